//! Term implementations. Every term computes its statistic from scratch by
//! scanning the adjacency sets, and computes change statistics from the
//! network's degree caches. The two routes are deliberately independent so
//! that one can check the other.

use std::fmt::Debug;

use crate::network::{AttrValue, Dyad, Network};

use super::null::NullTable;

pub(crate) trait Term: Debug + Send + Sync {
    fn dim(&self) -> usize {
        1
    }

    /// Statistic value(s) evaluated from scratch.
    fn compute(&self, net: &Network, out: &mut [f64]);

    /// Change caused by toggling `d` from its current state.
    fn dyad_change(&self, net: &Network, d: Dyad, out: &mut [f64]);

    /// Change caused by setting `node`'s value of `var` from `old` to `new`.
    /// Implementations write zeros when `var` does not concern them.
    fn attr_change(&self, net: &Network, node: usize, var: usize, old: AttrValue, new: AttrValue, out: &mut [f64]);

    /// Categorical variables whose per-category degrees must be tracked.
    fn tracked_vars(&self) -> Vec<usize> {
        Vec::new()
    }
}

#[inline]
fn sign(net: &Network, d: Dyad) -> f64 {
    if net.has_edge(d.tail, d.head) {
        -1.0
    } else {
        1.0
    }
}

#[inline]
fn ind(b: bool) -> f64 {
    b as u8 as f64
}

fn level(v: AttrValue) -> usize {
    match v {
        AttrValue::Level(l) => l,
        AttrValue::Real(_) => panic!("expected a categorical value"),
    }
}

fn scan_edge_count(net: &Network) -> usize {
    (0..net.n_nodes()).map(|i| net.out_neighbors(i).len()).sum()
}

#[derive(Debug)]
pub(crate) struct EdgeCount;

impl Term for EdgeCount {
    fn compute(&self, net: &Network, out: &mut [f64]) {
        out[0] = scan_edge_count(net) as f64;
    }

    fn dyad_change(&self, net: &Network, d: Dyad, out: &mut [f64]) {
        out[0] = sign(net, d);
    }

    fn attr_change(&self, _: &Network, _: usize, _: usize, _: AttrValue, _: AttrValue, out: &mut [f64]) {
        out[0] = 0.0;
    }
}

/// Average total degree, sum_i (in_i + out_i) / n = 2|E| / n.
#[derive(Debug)]
pub(crate) struct MeanDegree;

impl Term for MeanDegree {
    fn compute(&self, net: &Network, out: &mut [f64]) {
        let n = net.n_nodes();
        let total: usize = (0..n).map(|i| net.out_neighbors(i).len() + net.in_neighbors(i).len()).sum();
        out[0] = total as f64 / n as f64;
    }

    fn dyad_change(&self, net: &Network, d: Dyad, out: &mut [f64]) {
        out[0] = 2.0 * sign(net, d) / net.n_nodes() as f64;
    }

    fn attr_change(&self, _: &Network, _: usize, _: usize, _: AttrValue, _: AttrValue, out: &mut [f64]) {
        out[0] = 0.0;
    }
}

/// Log of the population variance of total degree, with the variance clamped
/// below at 1/n^2 so that empty and regular graphs stay finite.
#[derive(Debug)]
pub(crate) struct LogVarDegree;

impl LogVarDegree {
    /// log(max(var, 1/n^2)) from the exact integer moments S1 = sum d, S2 = sum d^2.
    fn from_moments(n: usize, s1: i64, s2: i64) -> f64 {
        let n = n as i64;
        // var = (n S2 - S1^2) / n^2; clamp numerator below at 1.
        let num = (n * s2 - s1 * s1).max(1);
        (num as f64).ln() - 2.0 * (n as f64).ln()
    }
}

impl Term for LogVarDegree {
    fn compute(&self, net: &Network, out: &mut [f64]) {
        let n = net.n_nodes();
        let degrees: Vec<f64> =
            (0..n).map(|i| (net.out_neighbors(i).len() + net.in_neighbors(i).len()) as f64).collect();
        let mean = degrees.iter().sum::<f64>() / n as f64;
        let var = degrees.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
        out[0] = var.max(1.0 / (n * n) as f64).ln();
    }

    fn dyad_change(&self, net: &Network, d: Dyad, out: &mut [f64]) {
        let n = net.n_nodes();
        let s = if net.has_edge(d.tail, d.head) { -1 } else { 1 };
        let s1 = 2 * net.n_edges() as i64;
        let s2 = net.degree_sq_sum() as i64;
        let di = net.total_degree(d.tail) as i64;
        let dj = net.total_degree(d.head) as i64;
        let s2_new = s2 + (di + s) * (di + s) - di * di + (dj + s) * (dj + s) - dj * dj;
        out[0] = Self::from_moments(n, s1 + 2 * s, s2_new) - Self::from_moments(n, s1, s2);
    }

    fn attr_change(&self, _: &Network, _: usize, _: usize, _: AttrValue, _: AttrValue, out: &mut [f64]) {
        out[0] = 0.0;
    }
}

/// Number of nodes with in-degree exactly `k`.
#[derive(Debug)]
pub(crate) struct InDegreeCount(pub usize);

impl Term for InDegreeCount {
    fn compute(&self, net: &Network, out: &mut [f64]) {
        out[0] = (0..net.n_nodes()).filter(|&i| net.in_neighbors(i).len() == self.0).count() as f64;
    }

    fn dyad_change(&self, net: &Network, d: Dyad, out: &mut [f64]) {
        let before = net.in_degree(d.head);
        let after = if net.has_edge(d.tail, d.head) { before - 1 } else { before + 1 };
        out[0] = ind(after == self.0) - ind(before == self.0);
    }

    fn attr_change(&self, _: &Network, _: usize, _: usize, _: AttrValue, _: AttrValue, out: &mut [f64]) {
        out[0] = 0.0;
    }
}

/// Number of nodes with out-degree exactly `k`.
#[derive(Debug)]
pub(crate) struct OutDegreeCount(pub usize);

impl Term for OutDegreeCount {
    fn compute(&self, net: &Network, out: &mut [f64]) {
        out[0] = (0..net.n_nodes()).filter(|&i| net.out_neighbors(i).len() == self.0).count() as f64;
    }

    fn dyad_change(&self, net: &Network, d: Dyad, out: &mut [f64]) {
        let before = net.out_degree(d.tail);
        let after = if net.has_edge(d.tail, d.head) { before - 1 } else { before + 1 };
        out[0] = ind(after == self.0) - ind(before == self.0);
    }

    fn attr_change(&self, _: &Network, _: usize, _: usize, _: AttrValue, _: AttrValue, out: &mut [f64]) {
        out[0] = 0.0;
    }
}

/// Number of reciprocated pairs {i, j} with both i -> j and j -> i.
#[derive(Debug)]
pub(crate) struct Reciprocity;

impl Term for Reciprocity {
    fn compute(&self, net: &Network, out: &mut [f64]) {
        let mut pairs = 0;
        for i in 0..net.n_nodes() {
            pairs += net.out_neighbors(i).iter().filter(|&&j| j > i && net.out_neighbors(j).contains(&i)).count();
        }
        out[0] = pairs as f64;
    }

    fn dyad_change(&self, net: &Network, d: Dyad, out: &mut [f64]) {
        out[0] = if net.has_edge(d.head, d.tail) { sign(net, d) } else { 0.0 };
    }

    fn attr_change(&self, _: &Network, _: usize, _: usize, _: AttrValue, _: AttrValue, out: &mut [f64]) {
        out[0] = 0.0;
    }
}

/// n_k(x): number of nodes at one level of a categorical variable.
#[derive(Debug)]
pub(crate) struct CategoryCount {
    pub var: usize,
    pub level: usize,
}

impl Term for CategoryCount {
    fn compute(&self, net: &Network, out: &mut [f64]) {
        let col = net.attributes().levels_of(self.var);
        out[0] = col.iter().filter(|&&l| l == self.level).count() as f64;
    }

    fn dyad_change(&self, _: &Network, _: Dyad, out: &mut [f64]) {
        out[0] = 0.0;
    }

    fn attr_change(&self, _: &Network, _: usize, var: usize, old: AttrValue, new: AttrValue, out: &mut [f64]) {
        out[0] = if var == self.var {
            ind(level(new) == self.level) - ind(level(old) == self.level)
        } else {
            0.0
        };
    }
}

/// sum_{i != j} I(x_i = k) y_ij I(x_j = l): directed ties from level k to
/// level l. Mutual ties within a level count twice.
#[derive(Debug)]
pub(crate) struct Homophily {
    pub var: usize,
    pub from: usize,
    pub to: usize,
}

impl Term for Homophily {
    fn compute(&self, net: &Network, out: &mut [f64]) {
        let col = net.attributes().levels_of(self.var);
        let mut count = 0;
        for i in (0..net.n_nodes()).filter(|&i| col[i] == self.from) {
            count += net.out_neighbors(i).iter().filter(|&&j| col[j] == self.to).count();
        }
        out[0] = count as f64;
    }

    fn dyad_change(&self, net: &Network, d: Dyad, out: &mut [f64]) {
        let a = net.attributes();
        let hit = a.level(d.tail, self.var) == self.from && a.level(d.head, self.var) == self.to;
        out[0] = if hit { sign(net, d) } else { 0.0 };
    }

    fn attr_change(&self, net: &Network, node: usize, var: usize, old: AttrValue, new: AttrValue, out: &mut [f64]) {
        if var != self.var {
            out[0] = 0.0;
            return;
        }
        let (a, b) = (level(old), level(new));
        // node as tail: its out-ties into `to`; node as head: in-ties from `from`.
        let as_tail = net.out_category_degree(node, var, self.to) as f64 * (ind(b == self.from) - ind(a == self.from));
        let as_head = net.in_category_degree(node, var, self.from) as f64 * (ind(b == self.to) - ind(a == self.to));
        out[0] = as_tail + as_head;
    }

    fn tracked_vars(&self) -> Vec<usize> {
        vec![self.var]
    }
}

/// Joint-Ising homophily for a binary variable mapped to spins s = -1, +1
/// (first level -1). Each tie is weighted once: half the ordered double sum
/// sum_{i != j} s_i y_ij s_j, so a mutual pair counts as a single tie.
#[derive(Debug)]
pub(crate) struct SpinHomophily {
    pub var: usize,
}

#[inline]
fn spin(l: usize) -> f64 {
    2.0 * l as f64 - 1.0
}

impl Term for SpinHomophily {
    fn compute(&self, net: &Network, out: &mut [f64]) {
        let col = net.attributes().levels_of(self.var);
        let mut total = 0.0;
        for i in 0..net.n_nodes() {
            for &j in net.out_neighbors(i) {
                total += spin(col[i]) * spin(col[j]);
            }
        }
        out[0] = 0.5 * total;
    }

    fn dyad_change(&self, net: &Network, d: Dyad, out: &mut [f64]) {
        let a = net.attributes();
        out[0] = 0.5 * sign(net, d) * spin(a.level(d.tail, self.var)) * spin(a.level(d.head, self.var));
    }

    fn attr_change(&self, net: &Network, node: usize, var: usize, old: AttrValue, new: AttrValue, out: &mut [f64]) {
        if var != self.var {
            out[0] = 0.0;
            return;
        }
        // sum_j (y_vj + y_jv) s_j = d_{v,+} - d_{v,-}
        let field = net.category_degree(node, var, 1) as f64 - net.category_degree(node, var, 0) as f64;
        out[0] = 0.5 * (spin(level(new)) - spin(level(old))) * field;
    }

    fn tracked_vars(&self) -> Vec<usize> {
        vec![self.var]
    }
}

/// Which level pairs a regularized homophily term pools.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Pairing {
    /// Degree of each node towards its own level.
    Within,
    /// Degree of each level-k node towards levels k + 1 and k - 1.
    Adjacent,
}

/// Regularized homophily:
/// sum_i sum_{l in targets(x_i)} sqrt(d_{i,l}) - E0[sqrt(d_{i,l})],
/// with the null expectation taken under independence of labels and graph
/// given the category counts.
#[derive(Debug)]
pub(crate) struct RHomophily {
    pub var: usize,
    pub pairing: Pairing,
    pub k: usize,
    pub null: NullTable,
}

/// Degree profile of one node, enough to evaluate its contribution.
#[derive(Clone, Copy)]
struct Profile {
    label: usize,
    total: usize,
    mutual: usize,
}

impl RHomophily {
    fn targets(&self, label: usize) -> impl Iterator<Item = usize> {
        let (k, pairing) = (self.k, self.pairing);
        let (first, second) = match pairing {
            Pairing::Within => (Some(label), None),
            Pairing::Adjacent => ((label + 1 < k).then_some(label + 1), label.checked_sub(1)),
        };
        first.into_iter().chain(second)
    }

    /// Contribution of one node. `deg_to(l)` gives d_{i,l}; `count(l)` gives n_l.
    fn contribution(&self, p: Profile, deg_to: impl Fn(usize) -> usize, count: impl Fn(usize) -> usize) -> f64 {
        self.targets(p.label)
            .map(|l| {
                let observed = (deg_to(l) as f64).sqrt();
                observed - self.null.lookup(p.total, p.mutual, count(l), l == p.label)
            })
            .sum()
    }

    fn cached_profile(net: &Network, node: usize, label: usize) -> Profile {
        Profile { label, total: net.total_degree(node), mutual: net.mutual_degree(node) }
    }
}

impl Term for RHomophily {
    fn compute(&self, net: &Network, out: &mut [f64]) {
        let n = net.n_nodes();
        let col = net.attributes().levels_of(self.var);
        let mut counts = vec![0; self.k];
        for &l in col {
            counts[l] += 1;
        }
        let mut total = 0.0;
        let mut deg = vec![0usize; self.k];
        for i in 0..n {
            deg.iter_mut().for_each(|d| *d = 0);
            let outs = net.out_neighbors(i);
            let ins = net.in_neighbors(i);
            for &j in outs.iter().chain(ins.iter()) {
                deg[col[j]] += 1;
            }
            let mutual = outs.iter().filter(|j| ins.contains(j)).count();
            let p = Profile { label: col[i], total: outs.len() + ins.len(), mutual };
            total += self.contribution(p, |l| deg[l], |l| counts[l]);
        }
        out[0] = total;
    }

    fn dyad_change(&self, net: &Network, d: Dyad, out: &mut [f64]) {
        let a = net.attributes();
        let counts = a.counts(self.var);
        let present = net.has_edge(d.tail, d.head);
        let reciprocated = net.has_edge(d.head, d.tail);
        let s: isize = if present { -1 } else { 1 };
        let shift = |x: usize| (x as isize + s) as usize;
        let (li, lj) = (a.level(d.tail, self.var), a.level(d.head, self.var));

        let mut delta = 0.0;
        for (node, label, other_label) in [(d.tail, li, lj), (d.head, lj, li)] {
            let before = Self::cached_profile(net, node, label);
            let after = Profile {
                label,
                total: shift(before.total),
                mutual: if reciprocated { shift(before.mutual) } else { before.mutual },
            };
            let deg = |l| net.category_degree(node, self.var, l);
            let c0 = self.contribution(before, deg, |l| counts[l]);
            let c1 = self.contribution(
                after,
                |l| if l == other_label { shift(deg(l)) } else { deg(l) },
                |l| counts[l],
            );
            delta += c1 - c0;
        }
        out[0] = delta;
    }

    fn attr_change(&self, net: &Network, node: usize, var: usize, old: AttrValue, new: AttrValue, out: &mut [f64]) {
        if var != self.var || old == new {
            out[0] = 0.0;
            return;
        }
        let (a, b) = (level(old), level(new));
        let attrs = net.attributes();
        let counts = attrs.counts(var);
        let counts_after = |l: usize| counts[l] - (l == a) as usize + (l == b) as usize;
        let mut delta = 0.0;
        for u in 0..net.n_nodes() {
            let label = attrs.level(u, var);
            let before = Self::cached_profile(net, u, label);
            let deg = |l| net.category_degree(u, var, l);
            let c0 = self.contribution(before, deg, |l| counts[l]);
            let c1 = if u == node {
                self.contribution(Profile { label: b, ..before }, deg, counts_after)
            } else {
                // ties between u and node move from level a to level b
                let w = net.has_edge(u, node) as usize + net.has_edge(node, u) as usize;
                self.contribution(
                    before,
                    |l| {
                        if l == a {
                            deg(l) - w
                        } else if l == b {
                            deg(l) + w
                        } else {
                            deg(l)
                        }
                    },
                    counts_after,
                )
            };
            delta += c1 - c0;
        }
        out[0] = delta;
    }

    fn tracked_vars(&self) -> Vec<usize> {
        vec![self.var]
    }
}

/// One regressor column of a nodal regression.
#[derive(Debug, Clone)]
pub(crate) enum Regressor {
    Intercept,
    /// Indicator that categorical `var` is at `level`.
    Dummy { var: usize, level: usize },
    Continuous { var: usize },
}

impl Regressor {
    fn value(&self, net: &Network, node: usize) -> f64 {
        match *self {
            Regressor::Intercept => 1.0,
            Regressor::Dummy { var, level } => ind(net.attributes().level(node, var) == level),
            Regressor::Continuous { var } => net.attributes().real(node, var),
        }
    }

    fn value_with(&self, var: usize, v: AttrValue) -> Option<f64> {
        match *self {
            Regressor::Dummy { var: w, level } if w == var => Some(ind(self::level(v) == level)),
            Regressor::Continuous { var: w } if w == var => Some(v.as_f64()),
            _ => None,
        }
    }
}

/// sum_i z_i * r_i for a binary outcome z and regressor row r_i; one
/// statistic per regressor column. With the outcome random and regressors
/// fixed, the coefficients act as a conditional logistic regression.
#[derive(Debug)]
pub(crate) struct NodalRegression {
    pub outcome: usize,
    pub columns: Vec<Regressor>,
}

impl Term for NodalRegression {
    fn dim(&self) -> usize {
        self.columns.len()
    }

    fn compute(&self, net: &Network, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let z = net.attributes().levels_of(self.outcome);
        for i in (0..net.n_nodes()).filter(|&i| z[i] == 1) {
            for (o, c) in out.iter_mut().zip(&self.columns) {
                *o += c.value(net, i);
            }
        }
    }

    fn dyad_change(&self, _: &Network, _: Dyad, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }

    fn attr_change(&self, net: &Network, node: usize, var: usize, old: AttrValue, new: AttrValue, out: &mut [f64]) {
        if var == self.outcome {
            let dz = level(new) as f64 - level(old) as f64;
            for (o, c) in out.iter_mut().zip(&self.columns) {
                *o = dz * c.value(net, node);
            }
            return;
        }
        let z = net.attributes().level(node, self.outcome) as f64;
        for (o, c) in out.iter_mut().zip(&self.columns) {
            *o = match (c.value_with(var, old), c.value_with(var, new)) {
                (Some(before), Some(after)) => z * (after - before),
                _ => 0.0,
            };
        }
    }
}
