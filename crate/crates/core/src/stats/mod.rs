//! The term catalog defining the sufficient statistic g(y, x).
//!
//! A [`ModelSpec`] is the declarative description (what the model file
//! holds). [`Model`] is the compiled form bound to a network size, with
//! variable names resolved to indices and null-expectation tables allocated.

mod file;
pub mod null;
mod terms;

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

pub use file::{parse_model_file, parse_model_str, write_model_str};
pub use null::NullMode;

use crate::error::{Error, Result};
use crate::network::{AttrValue, Dyad, Network, Variable, VariableKind};
use null::NullTable;
use terms::{Pairing, Regressor, Term};

/// One term of the model, as written in a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TermSpec {
    EdgeCount,
    MeanDegree,
    LogVarDegree,
    InDegreeCount { k: usize },
    OutDegreeCount { k: usize },
    Reciprocity,
    CategoryCount { var: String, level: String },
    /// Directed ties from level `k` to level `l`.
    Homophily { var: String, k: String, l: String },
    /// Joint-Ising homophily on a binary variable (levels map to -1, +1).
    SpinHomophily { var: String },
    RhomophilyWithin {
        var: String,
        #[serde(default)]
        null: NullMode,
    },
    /// Regularized homophily between adjacent levels (k with k + 1 and k - 1).
    RhomophilyOffset {
        var: String,
        #[serde(default)]
        null: NullMode,
    },
    NodalRegression {
        outcome: String,
        #[serde(default)]
        covariates: Vec<String>,
        #[serde(default = "yes")]
        intercept: bool,
    },
}

fn yes() -> bool {
    true
}

/// Which coordinates of (Y, X) the sampler may change. Random attributes are
/// flagged on the variables themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSpace {
    #[serde(default = "yes")]
    pub graph_random: bool,
}

impl Default for SampleSpace {
    fn default() -> Self {
        SampleSpace { graph_random: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default)]
    pub sample_space: SampleSpace,
    #[serde(default)]
    pub attributes: Vec<Variable>,
    pub terms: Vec<TermSpec>,
}

impl ModelSpec {
    pub fn new(attributes: Vec<Variable>, terms: Vec<TermSpec>) -> Self {
        ModelSpec { sample_space: SampleSpace::default(), attributes, terms }
    }

    fn var(&self, name: &str) -> Result<(usize, &Variable)> {
        self.attributes
            .iter()
            .enumerate()
            .find(|(_, v)| v.name == name)
            .ok_or_else(|| Error::Model(format!("unknown variable `{name}`")))
    }

    fn categorical(&self, name: &str) -> Result<(usize, &[String])> {
        let (i, v) = self.var(name)?;
        match v.levels() {
            Some(levels) => Ok((i, levels)),
            None => Err(Error::Model(format!("variable `{name}` must be categorical"))),
        }
    }

    fn level(&self, name: &str, label: &str) -> Result<(usize, usize)> {
        let (i, levels) = self.categorical(name)?;
        let l = levels
            .iter()
            .position(|x| x == label)
            .ok_or_else(|| Error::Model(format!("variable `{name}` has no level `{label}`")))?;
        Ok((i, l))
    }

    /// Checks references and roles without binding to a network size.
    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::Model("model has no terms".into()));
        }
        for v in &self.attributes {
            v.validate()?;
        }
        for (i, v) in self.attributes.iter().enumerate() {
            if self.attributes[..i].iter().any(|w| w.name == v.name) {
                return Err(Error::Model(format!("duplicate variable `{}`", v.name)));
            }
        }
        if !self.sample_space.graph_random && !self.attributes.iter().any(|v| v.random) {
            return Err(Error::Model("sample space is empty: graph fixed and no random attributes".into()));
        }
        for t in &self.terms {
            match t {
                TermSpec::CategoryCount { var, level } => {
                    self.level(var, level)?;
                }
                TermSpec::Homophily { var, k, l } => {
                    self.level(var, k)?;
                    self.level(var, l)?;
                }
                TermSpec::SpinHomophily { var } => {
                    let (_, levels) = self.categorical(var)?;
                    if levels.len() != 2 {
                        return Err(Error::Model(format!("spin_homophily needs a binary variable, `{var}` has {} levels", levels.len())));
                    }
                }
                TermSpec::RhomophilyWithin { var, .. } | TermSpec::RhomophilyOffset { var, .. } => {
                    self.categorical(var)?;
                }
                TermSpec::NodalRegression { outcome, covariates, intercept } => {
                    let (_, v) = self.var(outcome)?;
                    if v.n_levels() != Some(2) {
                        return Err(Error::Model(format!("regression outcome `{outcome}` must be binary categorical")));
                    }
                    if !v.random {
                        return Err(Error::Model(format!("regression outcome `{outcome}` must be random")));
                    }
                    for c in covariates {
                        let (_, cv) = self.var(c)?;
                        if cv.random {
                            return Err(Error::Model(format!("regression covariate `{c}` must be fixed")));
                        }
                        if c == outcome {
                            return Err(Error::Model(format!("`{c}` is both outcome and covariate")));
                        }
                    }
                    if !intercept && covariates.is_empty() {
                        return Err(Error::Model("nodal_regression without intercept or covariates".into()));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Labels naming each statistic, in order.
    pub fn labels(&self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        for t in &self.terms {
            match t {
                TermSpec::EdgeCount => out.push("edges".into()),
                TermSpec::MeanDegree => out.push("mean_degree".into()),
                TermSpec::LogVarDegree => out.push("log_var_degree".into()),
                TermSpec::InDegreeCount { k } => out.push(format!("in_degree_{k}")),
                TermSpec::OutDegreeCount { k } => out.push(format!("out_degree_{k}")),
                TermSpec::Reciprocity => out.push("reciprocity".into()),
                TermSpec::CategoryCount { var, level } => out.push(format!("count_{var}_{level}")),
                TermSpec::Homophily { var, k, l } => out.push(format!("homophily_{var}_{k}_{l}")),
                TermSpec::SpinHomophily { var } => out.push(format!("spin_homophily_{var}")),
                TermSpec::RhomophilyWithin { var, .. } => out.push(format!("rhomophily_within_{var}")),
                TermSpec::RhomophilyOffset { var, .. } => out.push(format!("rhomophily_offset_{var}")),
                TermSpec::NodalRegression { outcome, covariates, intercept } => {
                    if *intercept {
                        out.push(format!("regression_{outcome}_intercept"));
                    }
                    for c in covariates {
                        let (_, v) = self.var(c)?;
                        match v.levels() {
                            Some(levels) => {
                                out.extend(levels[1..].iter().map(|l| format!("regression_{outcome}_{c}_{l}")))
                            }
                            None => out.push(format!("regression_{outcome}_{c}")),
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Dense vector of sufficient statistics, index-aligned with the model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatVector(pub Vec<f64>);

impl StatVector {
    pub fn zeros(dim: usize) -> Self {
        StatVector(vec![0.0; dim])
    }

    pub fn dot(&self, eta: &[f64]) -> f64 {
        dot(&self.0, eta)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for StatVector {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

impl DerefMut for StatVector {
    fn deref_mut(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A model compiled for networks of a fixed size and attribute schema.
#[derive(Debug)]
pub struct Model {
    spec: ModelSpec,
    n: usize,
    terms: Vec<Box<dyn Term>>,
    offsets: Vec<usize>,
    labels: Vec<String>,
    random_vars: Vec<usize>,
    tracked: Vec<usize>,
}

impl Model {
    /// Compiles `spec` for networks with `n` nodes.
    pub fn compile(spec: ModelSpec, n: usize) -> Result<Model> {
        spec.validate()?;
        if spec.sample_space.graph_random && n < 2 {
            return Err(Error::Model("a random graph needs at least 2 nodes".into()));
        }
        let mut terms: Vec<Box<dyn Term>> = Vec::new();
        for t in &spec.terms {
            let term: Box<dyn Term> = match t {
                TermSpec::EdgeCount => Box::new(terms::EdgeCount),
                TermSpec::MeanDegree => Box::new(terms::MeanDegree),
                TermSpec::LogVarDegree => Box::new(terms::LogVarDegree),
                TermSpec::InDegreeCount { k } => Box::new(terms::InDegreeCount(*k)),
                TermSpec::OutDegreeCount { k } => Box::new(terms::OutDegreeCount(*k)),
                TermSpec::Reciprocity => Box::new(terms::Reciprocity),
                TermSpec::CategoryCount { var, level } => {
                    let (var, level) = spec.level(var, level)?;
                    Box::new(terms::CategoryCount { var, level })
                }
                TermSpec::Homophily { var, k, l } => {
                    let (v, from) = spec.level(var, k)?;
                    let (_, to) = spec.level(var, l)?;
                    Box::new(terms::Homophily { var: v, from, to })
                }
                TermSpec::SpinHomophily { var } => Box::new(terms::SpinHomophily { var: spec.categorical(var)?.0 }),
                TermSpec::RhomophilyWithin { var, null } | TermSpec::RhomophilyOffset { var, null } => {
                    let (v, levels) = spec.categorical(var)?;
                    let mode = null.resolve(n);
                    if mode == NullMode::Exact && n > null::EXACT_MAX_NODES {
                        return Err(Error::Model(format!(
                            "exact null expectation limited to {} nodes; use null = \"binomial\"",
                            null::EXACT_MAX_NODES
                        )));
                    }
                    let pairing =
                        if matches!(t, TermSpec::RhomophilyWithin { .. }) { Pairing::Within } else { Pairing::Adjacent };
                    Box::new(terms::RHomophily { var: v, pairing, k: levels.len(), null: NullTable::new(n, mode) })
                }
                TermSpec::NodalRegression { outcome, covariates, intercept } => {
                    let (outcome, _) = spec.var(outcome)?;
                    let mut columns = Vec::new();
                    if *intercept {
                        columns.push(Regressor::Intercept);
                    }
                    for c in covariates {
                        let (var, v) = spec.var(c)?;
                        match &v.kind {
                            VariableKind::Categorical { levels } => {
                                columns.extend((1..levels.len()).map(|level| Regressor::Dummy { var, level }))
                            }
                            VariableKind::Continuous => columns.push(Regressor::Continuous { var }),
                        }
                    }
                    Box::new(terms::NodalRegression { outcome, columns })
                }
            };
            terms.push(term);
        }
        let mut offsets = Vec::with_capacity(terms.len() + 1);
        let mut acc = 0;
        for t in &terms {
            offsets.push(acc);
            acc += t.dim();
        }
        offsets.push(acc);
        let mut tracked: Vec<usize> = terms.iter().flat_map(|t| t.tracked_vars()).collect();
        tracked.sort_unstable();
        tracked.dedup();
        let random_vars = spec.attributes.iter().enumerate().filter(|(_, v)| v.random).map(|(i, _)| i).collect();
        let labels = spec.labels()?;
        debug_assert_eq!(labels.len(), acc);
        Ok(Model { spec, n, terms, offsets, labels, random_vars, tracked })
    }

    /// Compiles for `net` and prepares it (see [`Model::prepare`]).
    pub fn for_network(spec: ModelSpec, net: &mut Network) -> Result<Model> {
        let model = Model::compile(spec, net.n_nodes())?;
        model.prepare(net)?;
        Ok(model)
    }

    /// Checks that `net` matches the model's size and attribute schema and
    /// enables the degree caches the terms need.
    pub fn prepare(&self, net: &mut Network) -> Result<()> {
        self.check_network(net)?;
        for &v in &self.tracked {
            net.track_categories(v)?;
        }
        Ok(())
    }

    fn check_network(&self, net: &Network) -> Result<()> {
        if net.n_nodes() != self.n {
            return Err(Error::Model(format!(
                "model compiled for {} nodes, network has {}",
                self.n,
                net.n_nodes()
            )));
        }
        if net.attributes().variables() != self.spec.attributes.as_slice() {
            return Err(Error::Model("network attribute schema does not match the model".into()));
        }
        Ok(())
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn graph_random(&self) -> bool {
        self.spec.sample_space.graph_random
    }

    /// Indices of the attribute variables the sampler may change.
    pub fn random_vars(&self) -> &[usize] {
        &self.random_vars
    }

    /// g(y, x) evaluated from scratch.
    pub fn compute(&self, net: &Network) -> StatVector {
        let mut out = StatVector::zeros(self.dim());
        for (t, w) in self.terms.iter().zip(self.offsets.windows(2)) {
            t.compute(net, &mut out[w[0]..w[1]]);
        }
        out
    }

    /// Writes the change statistic for toggling `d` into `out`.
    pub fn dyad_change_into(&self, net: &Network, d: Dyad, out: &mut [f64]) {
        for (t, w) in self.terms.iter().zip(self.offsets.windows(2)) {
            t.dyad_change(net, d, &mut out[w[0]..w[1]]);
        }
    }

    /// Writes the change statistic for setting `node`'s `var` to `value`.
    pub fn attr_change_into(&self, net: &Network, node: usize, var: usize, value: AttrValue, out: &mut [f64]) {
        let old = net.attributes().get(node, var);
        for (t, w) in self.terms.iter().zip(self.offsets.windows(2)) {
            t.attr_change(net, node, var, old, value, &mut out[w[0]..w[1]]);
        }
    }

    /// g(after toggling d) - g(now), without mutating the network.
    pub fn change_stats_dyad(&self, net: &Network, d: Dyad) -> Result<StatVector> {
        net.check_dyad(d)?;
        let mut out = StatVector::zeros(self.dim());
        self.dyad_change_into(net, d, &mut out);
        Ok(out)
    }

    /// g(after setting the attribute) - g(now), without mutating the network.
    pub fn change_stats_attr(&self, net: &Network, node: usize, var: usize, value: AttrValue) -> Result<StatVector> {
        net.attributes().check(node, var, value)?;
        let mut out = StatVector::zeros(self.dim());
        self.attr_change_into(net, node, var, value, &mut out);
        Ok(out)
    }
}
