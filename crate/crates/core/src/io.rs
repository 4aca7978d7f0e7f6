//! Delimited-text ingestion and output of networks.
//!
//! Edge lists have a `tail,head` header and string node labels. Attribute
//! tables have a `node,var1,var2,...` header and one row per node; a row
//! containing the token `NA` is excluded (with a warning) together with every
//! tie touching that node. Node ids follow input order: attribute-table rows
//! first when a table is given, otherwise first appearance in the edge list.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;

use crate::error::{invalid, Error, Result};
use crate::network::{AttrValue, Dyad, Network, Variable, VariableKind};

pub const MISSING: &str = "NA";

/// A network read from disk plus the external labels of its nodes.
#[derive(Debug, Clone)]
pub struct LoadedNetwork {
    pub net: Network,
    /// `labels[i]` is the external label of internal node `i`.
    pub labels: Vec<String>,
    /// Labels of attribute rows dropped for missing values.
    pub excluded: Vec<String>,
    /// Ties dropped because an endpoint was excluded.
    pub dropped_edges: usize,
}

fn parse_err(pos: Option<&csv::Position>, msg: impl Into<String>) -> Error {
    Error::Parse { line: pos.map_or(0, |p| p.line() as usize), msg: msg.into() }
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(false).from_reader(r)
}

fn check_header(rdr: &mut csv::Reader<impl Read>, first: &str) -> Result<csv::StringRecord> {
    let header = rdr.headers()?.clone();
    if header.get(0) != Some(first) {
        return Err(Error::Parse { line: 1, msg: format!("header must start with `{first}`, found `{}`", header.get(0).unwrap_or("")) });
    }
    Ok(header)
}

fn parse_value(var: &Variable, raw: &str) -> std::result::Result<AttrValue, String> {
    match &var.kind {
        VariableKind::Categorical { levels } => levels
            .iter()
            .position(|l| l == raw)
            .map(AttrValue::Level)
            .ok_or_else(|| format!("`{raw}` is not a level of `{}` (levels: {})", var.name, levels.join(", "))),
        VariableKind::Continuous => match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(AttrValue::Real(v)),
            _ => Err(format!("`{raw}` is not a finite number for `{}`", var.name)),
        },
    }
}

type AttrRows = (Vec<String>, Vec<Vec<AttrValue>>, Vec<String>);

/// Reads an attribute table into per-node values ordered like `schema`.
fn read_attribute_rows<R: Read>(r: R, schema: &[Variable]) -> Result<AttrRows> {
    let mut rdr = reader(r);
    let header = check_header(&mut rdr, "node")?;
    let cols: Vec<usize> = schema
        .iter()
        .map(|v| {
            header.iter().position(|h| h == v.name).ok_or_else(|| Error::Parse { line: 1, msg: format!("attribute table has no column `{}`", v.name) })
        })
        .collect::<Result<_>>()?;
    let (mut labels, mut values, mut excluded) = (Vec::new(), Vec::new(), Vec::new());
    let mut seen = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let pos = rec.position();
        let label = rec[0].to_string();
        if label.is_empty() || label == MISSING {
            return Err(parse_err(pos, "missing node label"));
        }
        if seen.insert(label.clone(), ()).is_some() {
            return Err(parse_err(pos, format!("node `{label}` listed twice")));
        }
        if rec.iter().skip(1).any(|f| f == MISSING) {
            excluded.push(label);
            continue;
        }
        let row = schema
            .iter()
            .zip(&cols)
            .map(|(v, &c)| parse_value(v, &rec[c]).map_err(|m| parse_err(pos, m)))
            .collect::<Result<Vec<_>>>()?;
        labels.push(label);
        values.push(row);
    }
    if !excluded.is_empty() {
        warn!("excluded {} node(s) with missing attribute values: {}", excluded.len(), excluded.join(", "));
    }
    Ok((labels, values, excluded))
}

fn read_edge_rows<R: Read>(r: R) -> Result<Vec<(String, String, usize)>> {
    let mut rdr = reader(r);
    let header = check_header(&mut rdr, "tail")?;
    if header.get(1) != Some("head") {
        return Err(Error::Parse { line: 1, msg: "edge list header must be `tail,head`".into() });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec[0].is_empty() || rec[1].is_empty() {
            return Err(Error::Parse { line, msg: "empty node label".into() });
        }
        out.push((rec[0].to_string(), rec[1].to_string(), line));
    }
    Ok(out)
}

/// Builds a network from an edge list and an optional attribute table.
/// Without a table, `schema` must be empty.
pub fn read_network<E: Read, A: Read>(edges: E, attributes: Option<A>, schema: &[Variable]) -> Result<LoadedNetwork> {
    let edge_rows = read_edge_rows(edges)?;
    let (labels, values, excluded) = match attributes {
        Some(a) => read_attribute_rows(a, schema)?,
        None if schema.is_empty() => {
            let mut labels: Vec<String> = Vec::new();
            let mut seen = HashMap::new();
            for (t, h, _) in &edge_rows {
                for l in [t, h] {
                    if seen.insert(l.clone(), ()).is_none() {
                        labels.push(l.clone());
                    }
                }
            }
            let n = labels.len();
            (labels, vec![Vec::new(); n], Vec::new())
        }
        None => return invalid("the model declares nodal variables but no attribute table was given"),
    };
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut net = Network::new(labels.len(), schema.to_vec())?;
    for (i, row) in values.iter().enumerate() {
        for (v, &val) in row.iter().enumerate() {
            net.assign_attribute(i, v, val)?;
        }
    }
    let mut dropped = 0;
    for (t, h, line) in &edge_rows {
        let (ti, hi) = match (index.get(t.as_str()), index.get(h.as_str())) {
            (Some(&a), Some(&b)) => (a, b),
            _ if excluded.contains(t) || excluded.contains(h) => {
                dropped += 1;
                continue;
            }
            _ => {
                let who = if index.contains_key(t.as_str()) { h } else { t };
                return Err(Error::Parse { line: *line, msg: format!("node `{who}` is not in the attribute table") });
            }
        };
        if ti == hi {
            return Err(Error::Parse { line: *line, msg: format!("self-loop on `{t}`") });
        }
        if net.has_edge(ti, hi) {
            return Err(Error::Parse { line: *line, msg: format!("duplicate tie `{t}` -> `{h}`") });
        }
        net.toggle_unchecked(Dyad::new(ti, hi));
    }
    if dropped > 0 {
        warn!("dropped {dropped} tie(s) touching excluded nodes");
    }
    Ok(LoadedNetwork { net, labels, excluded, dropped_edges: dropped })
}

/// File-path convenience wrapper around [`read_network`].
pub fn read_network_files(edges: &Path, attributes: Option<&Path>, schema: &[Variable]) -> Result<LoadedNetwork> {
    let e = File::open(edges).map_err(|err| Error::Io(std::io::Error::new(err.kind(), format!("{}: {err}", edges.display()))))?;
    let a = attributes
        .map(|p| File::open(p).map_err(|err| Error::Io(std::io::Error::new(err.kind(), format!("{}: {err}", p.display())))))
        .transpose()?;
    read_network(e, a, schema)
}

fn label_of(labels: Option<&[String]>, i: usize) -> String {
    labels.map_or_else(|| i.to_string(), |l| l[i].clone())
}

/// Writes ties in edge-index order.
pub fn write_edges<W: Write>(w: W, net: &Network, labels: Option<&[String]>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["tail", "head"])?;
    for d in net.edges() {
        wtr.write_record([label_of(labels, d.tail), label_of(labels, d.head)])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_attributes<W: Write>(w: W, net: &Network, labels: Option<&[String]>) -> Result<()> {
    let attrs = net.attributes();
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["node".to_string()];
    header.extend(attrs.variables().iter().map(|v| v.name.clone()));
    wtr.write_record(&header)?;
    for i in 0..net.n_nodes() {
        let mut row = vec![label_of(labels, i)];
        for (v, var) in attrs.variables().iter().enumerate() {
            row.push(match (var.levels(), attrs.get(i, v)) {
                (Some(levels), AttrValue::Level(l)) => levels[l].clone(),
                (_, val) => format!("{}", val.as_f64()),
            });
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
