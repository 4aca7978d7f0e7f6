use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Kind of a nodal variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariableKind {
    /// Categorical with an explicit, ordered level list (at least two levels).
    Categorical { levels: Vec<String> },
    Continuous,
}

/// A nodal variable declaration: name, kind and whether the model treats it
/// as random (sampled) or fixed (exogenous).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    #[serde(flatten)]
    pub kind: VariableKind,
    #[serde(default = "default_random")]
    pub random: bool,
}

fn default_random() -> bool {
    true
}

impl Variable {
    pub fn categorical<S: Into<String>>(name: &str, levels: impl IntoIterator<Item = S>, random: bool) -> Self {
        Variable {
            name: name.to_string(),
            kind: VariableKind::Categorical {
                levels: levels.into_iter().map(Into::into).collect(),
            },
            random,
        }
    }

    pub fn continuous(name: &str, random: bool) -> Self {
        Variable {
            name: name.to_string(),
            kind: VariableKind::Continuous,
            random,
        }
    }

    /// Number of levels, or `None` for a continuous variable.
    pub fn n_levels(&self) -> Option<usize> {
        match &self.kind {
            VariableKind::Categorical { levels } => Some(levels.len()),
            VariableKind::Continuous => None,
        }
    }

    pub fn levels(&self) -> Option<&[String]> {
        match &self.kind {
            VariableKind::Categorical { levels } => Some(levels),
            VariableKind::Continuous => None,
        }
    }

    pub fn level_index(&self, label: &str) -> Option<usize> {
        self.levels()?.iter().position(|l| l == label)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return invalid("variable with empty name");
        }
        if let VariableKind::Categorical { levels } = &self.kind {
            if levels.len() < 2 {
                return invalid(format!("categorical variable `{}` needs at least 2 levels", self.name));
            }
            for (i, l) in levels.iter().enumerate() {
                if levels[..i].contains(l) {
                    return invalid(format!("variable `{}` repeats level `{l}`", self.name));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn check_value(&self, value: AttrValue) -> Result<()> {
        match (&self.kind, value) {
            (VariableKind::Categorical { levels }, AttrValue::Level(l)) if l < levels.len() => Ok(()),
            (VariableKind::Categorical { levels }, AttrValue::Level(l)) => invalid(format!(
                "level {l} out of range for `{}` ({} levels)",
                self.name,
                levels.len()
            )),
            (VariableKind::Continuous, AttrValue::Real(v)) if v.is_finite() => Ok(()),
            (VariableKind::Continuous, AttrValue::Real(v)) => {
                invalid(format!("non-finite value {v} for `{}`", self.name))
            }
            _ => invalid(format!("value {value:?} has the wrong kind for `{}`", self.name)),
        }
    }
}

/// A single nodal attribute value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttrValue {
    Level(usize),
    Real(f64),
}

impl AttrValue {
    pub fn as_f64(self) -> f64 {
        match self {
            AttrValue::Level(l) => l as f64,
            AttrValue::Real(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Column {
    Categorical(Vec<usize>),
    Continuous(Vec<f64>),
}

/// Column-major n x q table of nodal attributes, with per-level counts kept
/// current for every categorical variable.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeTable {
    n: usize,
    vars: Vec<Variable>,
    columns: Vec<Column>,
    counts: Vec<Vec<usize>>,
}

impl AttributeTable {
    /// A table whose categorical values all start at level 0 and continuous
    /// values at 0.0.
    pub fn new(n: usize, vars: Vec<Variable>) -> Result<Self> {
        for (i, v) in vars.iter().enumerate() {
            v.validate()?;
            if vars[..i].iter().any(|w| w.name == v.name) {
                return invalid(format!("duplicate variable `{}`", v.name));
            }
        }
        let columns = vars
            .iter()
            .map(|v| match v.kind {
                VariableKind::Categorical { .. } => Column::Categorical(vec![0; n]),
                VariableKind::Continuous => Column::Continuous(vec![0.0; n]),
            })
            .collect();
        let counts = vars
            .iter()
            .map(|v| match v.n_levels() {
                Some(k) => {
                    let mut c = vec![0; k];
                    c[0] = n;
                    c
                }
                None => Vec::new(),
            })
            .collect();
        Ok(AttributeTable { n, vars, columns, counts })
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn variable(&self, var: usize) -> &Variable {
        &self.vars[var]
    }

    pub fn get(&self, node: usize, var: usize) -> AttrValue {
        match &self.columns[var] {
            Column::Categorical(c) => AttrValue::Level(c[node]),
            Column::Continuous(c) => AttrValue::Real(c[node]),
        }
    }

    /// Level of a categorical variable. Panics on a continuous variable.
    #[inline]
    pub fn level(&self, node: usize, var: usize) -> usize {
        match &self.columns[var] {
            Column::Categorical(c) => c[node],
            Column::Continuous(_) => panic!("variable `{}` is not categorical", self.vars[var].name),
        }
    }

    /// The full level column of a categorical variable.
    pub fn levels_of(&self, var: usize) -> &[usize] {
        match &self.columns[var] {
            Column::Categorical(c) => c,
            Column::Continuous(_) => panic!("variable `{}` is not categorical", self.vars[var].name),
        }
    }

    pub fn real(&self, node: usize, var: usize) -> f64 {
        self.get(node, var).as_f64()
    }

    /// Category counts n_k(x) for a categorical variable.
    pub fn counts(&self, var: usize) -> &[usize] {
        &self.counts[var]
    }

    pub(crate) fn check(&self, node: usize, var: usize, value: AttrValue) -> Result<()> {
        if node >= self.n {
            return invalid(format!("node {node} out of range (n = {})", self.n));
        }
        if var >= self.vars.len() {
            return invalid(format!("variable index {var} out of range"));
        }
        self.vars[var].check_value(value)
    }

    /// Writes a value that has already been validated, returning the old one.
    pub(crate) fn write(&mut self, node: usize, var: usize, value: AttrValue) -> AttrValue {
        let old = self.get(node, var);
        match (&mut self.columns[var], value) {
            (Column::Categorical(c), AttrValue::Level(l)) => {
                let prev = c[node];
                c[node] = l;
                self.counts[var][prev] -= 1;
                self.counts[var][l] += 1;
            }
            (Column::Continuous(c), AttrValue::Real(v)) => c[node] = v,
            _ => unreachable!("value kind checked by caller"),
        }
        old
    }

    /// Recounts categorical levels from the columns.
    pub fn recount(&self, var: usize) -> Vec<usize> {
        let mut out = vec![0; self.vars[var].n_levels().unwrap_or(0)];
        if let Column::Categorical(c) = &self.columns[var] {
            for &l in c {
                out[l] += 1;
            }
        }
        out
    }
}
