//! Directed network with nodal attributes.
//!
//! Edges live in three places that are kept in lock step: a dense slot table
//! (O(1) membership), an edge index (O(1) uniform selection and swap-removal)
//! and ordered per-node out/in neighbour sets. Degree caches (in, out, mutual,
//! sum of squared total degree, and per-category degrees for tracked
//! categorical variables) are updated on every mutation.

mod attributes;

use std::collections::BTreeSet;

use rand::Rng;

pub use attributes::{AttrValue, AttributeTable, Variable, VariableKind};

use crate::error::{invalid, Error, Result};

/// Ordered node pair `(tail, head)`; a potential directed tie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dyad {
    pub tail: usize,
    pub head: usize,
}

impl Dyad {
    pub fn new(tail: usize, head: usize) -> Self {
        Dyad { tail, head }
    }

    pub fn reversed(self) -> Self {
        Dyad { tail: self.head, head: self.tail }
    }
}

const NO_EDGE: u32 = u32::MAX;

/// Per-node degree counts towards each level of one categorical variable,
/// split by direction. `out[i * k + l]` counts out-neighbours of `i` in level
/// `l`; `inn` likewise for in-neighbours.
#[derive(Debug, Clone, PartialEq)]
struct CategoryDegrees {
    k: usize,
    out: Vec<u32>,
    inn: Vec<u32>,
}

/// Summary returned by [`Network::degrees`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Degrees {
    pub in_degree: usize,
    pub out_degree: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    n: usize,
    slot: Vec<u32>,
    edges: Vec<Dyad>,
    out_nbrs: Vec<BTreeSet<usize>>,
    in_nbrs: Vec<BTreeSet<usize>>,
    mutual: Vec<usize>,
    n_mutual: usize,
    degree_sq_sum: u64,
    attrs: AttributeTable,
    cat_deg: Vec<Option<CategoryDegrees>>,
}

impl Network {
    /// Empty directed network on `n` nodes with the given attribute schema.
    pub fn new(n: usize, vars: Vec<Variable>) -> Result<Self> {
        if n > (u32::MAX as usize) / 2 {
            return invalid(format!("network too large: {n} nodes"));
        }
        let attrs = AttributeTable::new(n, vars)?;
        let n_vars = attrs.n_vars();
        Ok(Network {
            n,
            slot: vec![NO_EDGE; n * n],
            edges: Vec::new(),
            out_nbrs: vec![BTreeSet::new(); n],
            in_nbrs: vec![BTreeSet::new(); n],
            mutual: vec![0; n],
            n_mutual: 0,
            degree_sq_sum: 0,
            attrs,
            cat_deg: vec![None; n_vars],
        })
    }

    /// Network with no attributes.
    pub fn empty(n: usize) -> Self {
        Network::new(n, Vec::new()).expect("attribute-free network")
    }

    /// Builds a network from an edge list, rejecting invalid or duplicate edges.
    pub fn from_edges(n: usize, vars: Vec<Variable>, edges: &[(usize, usize)]) -> Result<Self> {
        let mut net = Network::new(n, vars)?;
        for &(t, h) in edges {
            let d = Dyad::new(t, h);
            net.check_dyad(d)?;
            if net.has_edge(t, h) {
                return invalid(format!("duplicate edge ({t}, {h})"));
            }
            net.toggle_unchecked(d);
        }
        Ok(net)
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Number of dyads, n(n-1).
    pub fn n_dyads(&self) -> usize {
        self.n * self.n.saturating_sub(1)
    }

    /// Number of mutual (reciprocated) pairs.
    pub fn n_mutual(&self) -> usize {
        self.n_mutual
    }

    /// Sum over nodes of the squared total degree.
    pub fn degree_sq_sum(&self) -> u64 {
        self.degree_sq_sum
    }

    #[inline]
    pub fn has_edge(&self, tail: usize, head: usize) -> bool {
        self.slot[tail * self.n + head] != NO_EDGE
    }

    pub fn edges(&self) -> &[Dyad] {
        &self.edges
    }

    pub fn out_neighbors(&self, node: usize) -> &BTreeSet<usize> {
        &self.out_nbrs[node]
    }

    pub fn in_neighbors(&self, node: usize) -> &BTreeSet<usize> {
        &self.in_nbrs[node]
    }

    #[inline]
    pub fn in_degree(&self, node: usize) -> usize {
        self.in_nbrs[node].len()
    }

    #[inline]
    pub fn out_degree(&self, node: usize) -> usize {
        self.out_nbrs[node].len()
    }

    #[inline]
    pub fn total_degree(&self, node: usize) -> usize {
        self.in_nbrs[node].len() + self.out_nbrs[node].len()
    }

    /// Number of nodes `j` with both `node -> j` and `j -> node`.
    #[inline]
    pub fn mutual_degree(&self, node: usize) -> usize {
        self.mutual[node]
    }

    pub fn degrees(&self, node: usize) -> Degrees {
        let in_degree = self.in_degree(node);
        let out_degree = self.out_degree(node);
        Degrees { in_degree, out_degree, total: in_degree + out_degree }
    }

    pub fn attributes(&self) -> &AttributeTable {
        &self.attrs
    }

    pub fn check_dyad(&self, d: Dyad) -> Result<()> {
        if d.tail >= self.n || d.head >= self.n {
            return invalid(format!("dyad ({}, {}) out of range (n = {})", d.tail, d.head, self.n));
        }
        if d.tail == d.head {
            return invalid(format!("self-loop dyad ({}, {})", d.tail, d.head));
        }
        Ok(())
    }

    /// Toggles a dyad, returning whether the edge was present before.
    pub fn toggle(&mut self, d: Dyad) -> Result<bool> {
        self.check_dyad(d)?;
        Ok(self.toggle_unchecked(d))
    }

    /// Toggle without range checks; callers guarantee a valid dyad.
    pub fn toggle_unchecked(&mut self, d: Dyad) -> bool {
        let Dyad { tail: i, head: j } = d;
        let n = self.n;
        let present = self.slot[i * n + j] != NO_EDGE;
        let reciprocated = self.slot[j * n + i] != NO_EDGE;
        let di = self.total_degree(i) as i64;
        let dj = self.total_degree(j) as i64;
        if present {
            let pos = self.slot[i * n + j] as usize;
            self.slot[i * n + j] = NO_EDGE;
            self.edges.swap_remove(pos);
            if let Some(moved) = self.edges.get(pos) {
                self.slot[moved.tail * n + moved.head] = pos as u32;
            }
            self.out_nbrs[i].remove(&j);
            self.in_nbrs[j].remove(&i);
            if reciprocated {
                self.mutual[i] -= 1;
                self.mutual[j] -= 1;
                self.n_mutual -= 1;
            }
            // (d - 1)^2 - d^2 = 1 - 2d
            self.degree_sq_sum = (self.degree_sq_sum as i64 + 2 - 2 * di - 2 * dj) as u64;
        } else {
            self.slot[i * n + j] = self.edges.len() as u32;
            self.edges.push(d);
            self.out_nbrs[i].insert(j);
            self.in_nbrs[j].insert(i);
            if reciprocated {
                self.mutual[i] += 1;
                self.mutual[j] += 1;
                self.n_mutual += 1;
            }
            self.degree_sq_sum = (self.degree_sq_sum as i64 + 2 + 2 * di + 2 * dj) as u64;
        }
        for (var, cd) in self.cat_deg.iter_mut().enumerate() {
            if let Some(cd) = cd {
                let li = self.attrs.level(i, var);
                let lj = self.attrs.level(j, var);
                if present {
                    cd.out[i * cd.k + lj] -= 1;
                    cd.inn[j * cd.k + li] -= 1;
                } else {
                    cd.out[i * cd.k + lj] += 1;
                    cd.inn[j * cd.k + li] += 1;
                }
            }
        }
        present
    }

    /// Sampler-time attribute write. Fails with a permission error when the
    /// variable is fixed; use [`Network::assign_attribute`] to initialise
    /// fixed covariates.
    pub fn set_attribute(&mut self, node: usize, var: usize, value: AttrValue) -> Result<AttrValue> {
        self.attrs.check(node, var, value)?;
        if !self.attrs.variable(var).random {
            return Err(Error::Permission(format!(
                "variable `{}` is fixed and cannot be changed after initialisation",
                self.attrs.variable(var).name
            )));
        }
        Ok(self.write_attribute(node, var, value))
    }

    /// Initialisation-time attribute write; ignores the random/fixed role.
    pub fn assign_attribute(&mut self, node: usize, var: usize, value: AttrValue) -> Result<AttrValue> {
        self.attrs.check(node, var, value)?;
        Ok(self.write_attribute(node, var, value))
    }

    pub(crate) fn write_attribute(&mut self, node: usize, var: usize, value: AttrValue) -> AttrValue {
        let old = self.attrs.write(node, var, value);
        if let (Some(cd), AttrValue::Level(a), AttrValue::Level(b)) = (&mut self.cat_deg[var], old, value) {
            if a != b {
                let k = cd.k;
                for &u in &self.out_nbrs[node] {
                    // u is an out-neighbour of node: node is an in-neighbour of u.
                    cd.inn[u * k + a] -= 1;
                    cd.inn[u * k + b] += 1;
                }
                for &u in &self.in_nbrs[node] {
                    cd.out[u * k + a] -= 1;
                    cd.out[u * k + b] += 1;
                }
            }
        }
        old
    }

    /// Starts maintaining per-category degrees for a categorical variable.
    pub fn track_categories(&mut self, var: usize) -> Result<()> {
        let Some(k) = self.attrs.variables().get(var).and_then(|v| v.n_levels()) else {
            return invalid(format!("variable index {var} is not categorical"));
        };
        if self.cat_deg[var].is_none() {
            self.cat_deg[var] = Some(self.scan_category_degrees(var, k));
        }
        Ok(())
    }

    pub fn is_tracking(&self, var: usize) -> bool {
        self.cat_deg.get(var).is_some_and(Option::is_some)
    }

    fn scan_category_degrees(&self, var: usize, k: usize) -> CategoryDegrees {
        let mut cd = CategoryDegrees { k, out: vec![0; self.n * k], inn: vec![0; self.n * k] };
        for e in &self.edges {
            cd.out[e.tail * k + self.attrs.level(e.head, var)] += 1;
            cd.inn[e.head * k + self.attrs.level(e.tail, var)] += 1;
        }
        cd
    }

    fn tracked(&self, var: usize) -> &CategoryDegrees {
        self.cat_deg[var]
            .as_ref()
            .unwrap_or_else(|| panic!("category degrees for variable {var} are not tracked"))
    }

    /// Out-neighbours of `node` whose level of `var` is `level`.
    #[inline]
    pub fn out_category_degree(&self, node: usize, var: usize, level: usize) -> usize {
        let cd = self.tracked(var);
        cd.out[node * cd.k + level] as usize
    }

    /// In-neighbours of `node` whose level of `var` is `level`.
    #[inline]
    pub fn in_category_degree(&self, node: usize, var: usize, level: usize) -> usize {
        let cd = self.tracked(var);
        cd.inn[node * cd.k + level] as usize
    }

    /// d_{i,l}: ties of `node` in either direction to nodes in `level`; a
    /// mutual pair contributes two.
    #[inline]
    pub fn category_degree(&self, node: usize, var: usize, level: usize) -> usize {
        let cd = self.tracked(var);
        (cd.out[node * cd.k + level] + cd.inn[node * cd.k + level]) as usize
    }

    /// Per-level d_{i,l} for every level of `var`.
    pub fn category_degrees(&self, node: usize, var: usize) -> Vec<usize> {
        let cd = self.tracked(var);
        (0..cd.k).map(|l| (cd.out[node * cd.k + l] + cd.inn[node * cd.k + l]) as usize).collect()
    }

    /// Uniformly chosen existing edge.
    pub fn random_edge<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Dyad> {
        if self.edges.is_empty() {
            None
        } else {
            Some(self.edges[rng.random_range(0..self.edges.len())])
        }
    }

    /// Uniformly chosen dyad (i != j). Requires at least two nodes.
    pub fn random_dyad<R: Rng + ?Sized>(&self, rng: &mut R) -> Dyad {
        let tail = rng.random_range(0..self.n);
        let mut head = rng.random_range(0..self.n - 1);
        if head >= tail {
            head += 1;
        }
        Dyad { tail, head }
    }

    /// Removes every edge, keeping attributes.
    pub fn clear_edges(&mut self) {
        while let Some(&e) = self.edges.last() {
            self.toggle_unchecked(e);
        }
    }

    /// Recomputes every cache from the adjacency sets and compares; returns a
    /// description of the first mismatch.
    pub fn verify(&self) -> Result<(), String> {
        let n = self.n;
        let mut count = 0;
        for i in 0..n {
            for &j in &self.out_nbrs[i] {
                count += 1;
                if i == j {
                    return Err(format!("self-loop at {i}"));
                }
                let s = self.slot[i * n + j];
                if s == NO_EDGE || self.edges.get(s as usize) != Some(&Dyad::new(i, j)) {
                    return Err(format!("edge ({i}, {j}) missing from edge index"));
                }
                if !self.in_nbrs[j].contains(&i) {
                    return Err(format!("edge ({i}, {j}) missing from in-set of {j}"));
                }
            }
        }
        if count != self.edges.len() {
            return Err(format!("edge index has {} entries, adjacency {count}", self.edges.len()));
        }
        let in_total: usize = self.in_nbrs.iter().map(BTreeSet::len).sum();
        if in_total != count {
            return Err("in-sets disagree with out-sets".into());
        }
        let mut sq = 0u64;
        let mut mutual_pairs = 0;
        for i in 0..n {
            let m = self.out_nbrs[i].iter().filter(|&&j| self.in_nbrs[i].contains(&j)).count();
            if m != self.mutual[i] {
                return Err(format!("mutual degree of {i}: cached {}, actual {m}", self.mutual[i]));
            }
            mutual_pairs += m;
            let d = self.total_degree(i) as u64;
            sq += d * d;
        }
        if mutual_pairs != 2 * self.n_mutual {
            return Err("mutual pair count mismatch".into());
        }
        if sq != self.degree_sq_sum {
            return Err(format!("degree square sum: cached {}, actual {sq}", self.degree_sq_sum));
        }
        for (var, cd) in self.cat_deg.iter().enumerate() {
            if let Some(cd) = cd {
                if *cd != self.scan_category_degrees(var, cd.k) {
                    return Err(format!("category degrees for variable {var} are stale"));
                }
            }
            if self.attrs.variable(var).n_levels().is_some() && self.attrs.counts(var) != self.attrs.recount(var) {
                return Err(format!("category counts for variable {var} are stale"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn xvar() -> Vec<Variable> {
        vec![Variable::categorical("x", ["A", "B"], true)]
    }

    #[test]
    fn toggle_inserts_and_removes() {
        let mut net = Network::empty(3);
        assert!(!net.toggle(Dyad::new(0, 1)).unwrap());
        assert_eq!(net.n_edges(), 1);
        assert!(net.toggle(Dyad::new(0, 1)).unwrap());
        assert_eq!(net, Network::empty(3));
    }

    #[test]
    fn toggle_updates_in_degree() {
        let mut net = Network::from_edges(3, vec![], &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(net.n_mutual(), 1);
        net.toggle(Dyad::new(1, 0)).unwrap();
        assert_eq!(net.in_degree(0), 0);
        assert_eq!(net.n_mutual(), 0);
        net.verify().unwrap();
    }

    #[test]
    fn self_loops_rejected() {
        let mut net = Network::empty(3);
        assert!(matches!(net.toggle(Dyad::new(1, 1)), Err(Error::InvalidArgument(_))));
        assert!(net.toggle(Dyad::new(0, 3)).is_err());
        assert_eq!(net.n_dyads(), 6);
    }

    #[test]
    fn degree_queries() {
        let net = Network::from_edges(3, vec![], &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(net.degrees(0), Degrees { in_degree: 1, out_degree: 1, total: 2 });
        assert_eq!(net.degrees(2), Degrees { in_degree: 0, out_degree: 0, total: 0 });
    }

    #[test]
    fn category_degree_counts_both_directions() {
        let mut net = Network::from_edges(3, xvar(), &[(0, 1), (2, 0)]).unwrap();
        net.assign_attribute(1, 0, AttrValue::Level(1)).unwrap();
        net.assign_attribute(2, 0, AttrValue::Level(1)).unwrap();
        net.track_categories(0).unwrap();
        assert_eq!(net.category_degree(0, 0, 1), 2);
        assert_eq!(net.category_degree(0, 0, 0), 0);
    }

    #[test]
    fn set_attribute_updates_counts_and_neighbours() {
        let mut net = Network::new(2, xvar()).unwrap();
        net.set_attribute(1, 0, AttrValue::Level(1)).unwrap();
        assert_eq!(net.attributes().counts(0), &[1, 1]);

        let mut net = Network::from_edges(2, xvar(), &[(0, 1)]).unwrap();
        net.track_categories(0).unwrap();
        assert_eq!(net.category_degrees(0, 0), vec![1, 0]);
        let old = net.set_attribute(1, 0, AttrValue::Level(1)).unwrap();
        assert_eq!(net.category_degrees(0, 0), vec![0, 1]);
        net.set_attribute(1, 0, old).unwrap();
        assert_eq!(net.category_degrees(0, 0), vec![1, 0]);
        net.verify().unwrap();
    }

    #[test]
    fn attribute_errors() {
        let vars = vec![
            Variable::categorical("x", ["A", "B"], true),
            Variable::categorical("sex", ["F", "M"], false),
        ];
        let mut net = Network::new(2, vars).unwrap();
        assert!(matches!(net.set_attribute(0, 0, AttrValue::Level(2)), Err(Error::InvalidArgument(_))));
        assert!(matches!(net.set_attribute(0, 1, AttrValue::Level(1)), Err(Error::Permission(_))));
        assert!(net.assign_attribute(0, 1, AttrValue::Level(1)).is_ok());
    }

    #[test]
    fn uniform_edge_selection() {
        let edges: Vec<(usize, usize)> = (0..10).map(|i| (i, (i + 1) % 10)).collect();
        let net = Network::from_edges(10, vec![], &edges).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let mut freq = std::collections::HashMap::new();
        for _ in 0..draws {
            *freq.entry(net.random_edge(&mut rng).unwrap()).or_insert(0usize) += 1;
        }
        let p = 0.1;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        assert_eq!(freq.len(), 10);
        for (&e, &c) in &freq {
            let z = (c as f64 - draws as f64 * p) / sd;
            assert!(z.abs() < 5.0, "edge {e:?}: z = {z}");
        }
    }

    #[test]
    fn random_dyads_are_valid_and_cover_space() {
        let net = Network::empty(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..1000 {
            let d = net.random_dyad(&mut rng);
            assert!(net.check_dyad(d).is_ok());
            seen.insert(d);
        }
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn caches_survive_long_random_mutation_sequences() {
        let n = 12;
        let vars = vec![
            Variable::categorical("g", ["a", "b", "c"], true),
            Variable::continuous("z", true),
        ];
        let mut net = Network::new(n, vars).unwrap();
        net.track_categories(0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for step in 0..10_000 {
            if rng.random_bool(0.7) {
                let d = net.random_dyad(&mut rng);
                net.toggle(d).unwrap();
            } else if rng.random_bool(0.8) {
                let node = rng.random_range(0..n);
                net.set_attribute(node, 0, AttrValue::Level(rng.random_range(0..3))).unwrap();
            } else {
                let node = rng.random_range(0..n);
                net.set_attribute(node, 1, AttrValue::Real(rng.random())).unwrap();
            }
            if step % 97 == 0 {
                net.verify().unwrap();
            }
        }
        net.verify().unwrap();
    }

    proptest! {
        #[test]
        fn toggles_and_sets_are_involutions(
            edges in proptest::collection::btree_set((0usize..6, 0usize..6), 0..20),
            ops in proptest::collection::vec((0usize..6, 0usize..6, 0usize..2), 1..30),
        ) {
            let edges: Vec<_> = edges.into_iter().filter(|(a, b)| a != b).collect();
            let mut net = Network::from_edges(6, xvar(), &edges).unwrap();
            net.track_categories(0).unwrap();
            let before = net.clone();
            let mut undo = Vec::new();
            for &(a, b, l) in &ops {
                if a != b {
                    net.toggle(Dyad::new(a, b)).unwrap();
                    undo.push((a, b, None));
                } else {
                    let old = net.set_attribute(a, 0, AttrValue::Level(l)).unwrap();
                    undo.push((a, b, Some(old)));
                }
            }
            prop_assert!(net.verify().is_ok());
            for (a, b, old) in undo.into_iter().rev() {
                match old {
                    None => { net.toggle(Dyad::new(a, b)).unwrap(); }
                    Some(v) => { net.set_attribute(a, 0, v).unwrap(); }
                }
            }
            let mut got: Vec<_> = net.edges().to_vec();
            let mut want: Vec<_> = before.edges().to_vec();
            got.sort();
            want.sort();
            prop_assert_eq!(got, want);
            prop_assert_eq!(net.attributes(), before.attributes());
            prop_assert_eq!(net.category_degrees(0, 0), before.category_degrees(0, 0));
        }
    }
}
