//! Model files: TOML with a `[sample_space]` table, one `[[attributes]]`
//! table per nodal variable and one `[[terms]]` table per term.
//!
//! ```toml
//! [sample_space]
//! graph_random = true
//!
//! [[attributes]]
//! name = "grade"
//! kind = "categorical"
//! levels = ["9", "10", "11", "12"]
//! random = true
//!
//! [[terms]]
//! kind = "mean_degree"
//!
//! [[terms]]
//! kind = "rhomophily_within"
//! var = "grade"
//! null = "binomial"
//! ```

use std::path::Path;

use serde::Deserialize;
use toml::Spanned;

use super::{ModelSpec, SampleSpace, TermSpec};
use crate::error::{Error, Result};
use crate::network::Variable;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(default)]
    sample_space: SampleSpace,
    #[serde(default)]
    attributes: Vec<Spanned<Variable>>,
    #[serde(default)]
    terms: Vec<Spanned<TermSpec>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Parses and validates a model description.
pub fn parse_model_str(text: &str) -> Result<ModelSpec> {
    let raw: RawModel = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        msg: e.message().trim().to_string(),
    })?;
    if raw.terms.is_empty() {
        return Err(Error::Parse { line: line_of(text, text.len()), msg: "model has no terms".into() });
    }
    let attributes: Vec<Variable> = raw.attributes.iter().map(|a| a.get_ref().clone()).collect();
    for a in &raw.attributes {
        a.get_ref().validate().map_err(|e| Error::Parse { line: line_of(text, a.span().start), msg: e.to_string() })?;
    }
    // Validate term by term so that errors point at the offending section.
    for t in &raw.terms {
        let single = ModelSpec {
            sample_space: raw.sample_space,
            attributes: attributes.clone(),
            terms: vec![t.get_ref().clone()],
        };
        single.validate().map_err(|e| Error::Parse { line: line_of(text, t.span().start), msg: e.to_string() })?;
    }
    let spec = ModelSpec {
        sample_space: raw.sample_space,
        attributes,
        terms: raw.terms.into_iter().map(Spanned::into_inner).collect(),
    };
    spec.validate().map_err(|e| Error::Parse { line: 0, msg: e.to_string() })?;
    Ok(spec)
}

pub fn parse_model_file(path: impl AsRef<Path>) -> Result<ModelSpec> {
    let text = std::fs::read_to_string(path)?;
    parse_model_str(&text)
}

/// Serializes a model description in the same format [`parse_model_str`] reads.
pub fn write_model_str(spec: &ModelSpec) -> String {
    toml::to_string(spec).expect("model specs always serialize")
}
