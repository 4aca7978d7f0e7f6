//! Exact enumeration of the sample space for tiny networks.
//!
//! Every state (graph x random-attribute assignment) is visited once and its
//! statistics computed from scratch, so results here do not depend on the
//! change-statistic machinery used by the sampler.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::network::{AttrValue, Dyad, Network, VariableKind};
use crate::stats::{dot, Model};
use crate::summary::log_sum_exp;

/// Default limit on log2 of the number of states.
pub const DEFAULT_MAX_BITS: u32 = 20;
/// Largest limit that may be requested.
pub const HARD_MAX_BITS: u32 = 30;

/// Size of the state space of `model` on `n` nodes, in bits, or `None` when
/// a random variable is continuous.
pub fn state_space_bits(model: &Model, template: &Network) -> Option<f64> {
    let n = template.n_nodes();
    let mut bits = if model.graph_random() { (n * (n - 1)) as f64 } else { 0.0 };
    for &v in model.random_vars() {
        let k = template.attributes().variable(v).n_levels()?;
        bits += n as f64 * (k as f64).log2();
    }
    Some(bits)
}

#[derive(Debug, Clone)]
pub struct ExactModel {
    labels: Vec<String>,
    template: Network,
    dyads: Vec<Dyad>,
    /// (variable, number of levels) for each random variable.
    vars: Vec<(usize, usize)>,
    n_graph_states: usize,
    unique: Vec<Vec<f64>>,
    /// Multiplicity of each unique statistic vector.
    counts: Vec<f64>,
    state_stat: Vec<u32>,
}

impl ExactModel {
    /// Enumerates all states of `model`. Fixed attributes (and the graph when
    /// it is fixed) are taken from `template`.
    pub fn enumerate(model: &Model, template: &Network, max_bits: u32) -> Result<ExactModel> {
        if max_bits > HARD_MAX_BITS {
            return invalid(format!("state-space limit of {max_bits} bits exceeds the maximum of {HARD_MAX_BITS}"));
        }
        let mut net = template.clone();
        model.prepare(&mut net)?;
        let n = net.n_nodes();
        let Some(bits) = state_space_bits(model, &net) else {
            return Err(Error::StateSpace("a random continuous variable makes the state space infinite".into()));
        };
        if bits > max_bits as f64 + 1e-9 {
            return Err(Error::StateSpace(format!(
                "{n} nodes give 2^{bits:.1} states ({} dyad bits + {:.1} attribute bits), above the limit of 2^{max_bits}",
                if model.graph_random() { n * (n - 1) } else { 0 },
                bits - if model.graph_random() { (n * (n - 1)) as f64 } else { 0.0 },
            )));
        }
        let dyads: Vec<Dyad> = if model.graph_random() {
            (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| Dyad::new(i, j))).collect()
        } else {
            Vec::new()
        };
        let vars: Vec<(usize, usize)> = model
            .random_vars()
            .iter()
            .map(|&v| match &net.attributes().variable(v).kind {
                VariableKind::Categorical { levels } => (v, levels.len()),
                VariableKind::Continuous => unreachable!("checked above"),
            })
            .collect();
        let n_graph_states = 1usize << dyads.len();
        let n_attr_states: usize = vars.iter().map(|&(_, k)| k.pow(n as u32)).product();
        let total = n_graph_states * n_attr_states;

        if model.graph_random() {
            net.clear_edges();
        }
        let mut index: HashMap<Vec<u64>, u32> = HashMap::new();
        let mut unique = Vec::new();
        let mut counts: Vec<f64> = Vec::new();
        let mut state_stat = vec![0u32; total];
        for a in 0..n_attr_states {
            set_attr_state(&mut net, &vars, a);
            // Gray-code walk: step g toggles one dyad and lands on state gray(g).
            for g in 0..n_graph_states {
                if g > 0 {
                    net.toggle_unchecked(dyads[g.trailing_zeros() as usize]);
                }
                let s = model.compute(&net);
                let key: Vec<u64> = s.iter().map(|x| x.to_bits()).collect();
                let id = *index.entry(key).or_insert_with(|| {
                    unique.push(s.0.clone());
                    counts.push(0.0);
                    (unique.len() - 1) as u32
                });
                counts[id as usize] += 1.0;
                state_stat[(g ^ (g >> 1)) + n_graph_states * a] = id;
            }
            if model.graph_random() {
                net.clear_edges();
            }
        }
        Ok(ExactModel { labels: model.labels().to_vec(), template: net, dyads, vars, n_graph_states, unique, counts, state_stat })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_states(&self) -> usize {
        self.state_stat.len()
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn stats_of(&self, state: usize) -> &[f64] {
        &self.unique[self.state_stat[state] as usize]
    }

    /// State index of `net`: dyad bits low, attribute digits above.
    pub fn state_of(&self, net: &Network) -> usize {
        let mut g = 0;
        for (b, d) in self.dyads.iter().enumerate() {
            if net.has_edge(d.tail, d.head) {
                g |= 1 << b;
            }
        }
        let mut a = 0;
        for &(v, k) in self.vars.iter().rev() {
            for i in (0..net.n_nodes()).rev() {
                a = a * k + net.attributes().level(i, v);
            }
        }
        g + self.n_graph_states * a
    }

    pub fn network_of(&self, state: usize) -> Network {
        let mut net = self.template.clone();
        if !self.dyads.is_empty() {
            net.clear_edges();
        }
        let (g, a) = (state % self.n_graph_states, state / self.n_graph_states);
        for (b, &d) in self.dyads.iter().enumerate() {
            if g >> b & 1 == 1 {
                net.toggle_unchecked(d);
            }
        }
        set_attr_state(&mut net, &self.vars, a);
        net
    }

    fn log_weights(&self, eta: &[f64]) -> Vec<f64> {
        self.unique.iter().zip(&self.counts).map(|(s, c)| c.ln() + dot(s, eta)).collect()
    }

    /// log c(eta): log of the sum of exp(eta . g) over all states.
    pub fn log_normalizer(&self, eta: &[f64]) -> f64 {
        log_sum_exp(&self.log_weights(eta))
    }

    /// Distinct statistic vectors with the number of states attaining each.
    pub fn support(&self) -> impl Iterator<Item = (&[f64], u64)> {
        self.unique.iter().zip(&self.counts).map(|(s, &c)| (s.as_slice(), c as u64))
    }

    /// Probability of each distinct statistic vector (summed over its
    /// states), in the order of [`ExactModel::support`].
    pub fn unique_probs(&self, eta: &[f64]) -> Vec<f64> {
        let lw = self.log_weights(eta);
        let lc = log_sum_exp(&lw);
        lw.iter().map(|w| (w - lc).exp()).collect()
    }

    pub fn log_prob(&self, eta: &[f64], state: usize) -> f64 {
        dot(self.stats_of(state), eta) - self.log_normalizer(eta)
    }

    /// Probability of every state, indexed as in [`ExactModel::state_of`].
    pub fn probabilities(&self, eta: &[f64]) -> Vec<f64> {
        let lc = self.log_normalizer(eta);
        let lp: Vec<f64> = self.unique.iter().map(|s| dot(s, eta) - lc).collect();
        self.state_stat.iter().map(|&i| lp[i as usize].exp()).collect()
    }

    pub fn mean(&self, eta: &[f64]) -> Vec<f64> {
        let p = self.unique_probs(eta);
        let mut m = vec![0.0; self.dim()];
        for (s, w) in self.unique.iter().zip(&p) {
            for (mk, sk) in m.iter_mut().zip(s) {
                *mk += w * sk;
            }
        }
        m
    }

    pub fn covariance(&self, eta: &[f64]) -> DMatrix<f64> {
        let p = self.unique_probs(eta);
        let mu = self.mean(eta);
        let q = self.dim();
        let mut c = DMatrix::zeros(q, q);
        for (s, w) in self.unique.iter().zip(&p) {
            for a in 0..q {
                for b in 0..q {
                    c[(a, b)] += w * (s[a] - mu[a]) * (s[b] - mu[b]);
                }
            }
        }
        c
    }

    /// Log-likelihood of an observed statistic vector.
    pub fn loglik(&self, eta: &[f64], g_obs: &[f64]) -> f64 {
        dot(eta, g_obs) - self.log_normalizer(eta)
    }

    /// Exact MLE by damped Newton on the concave log-likelihood, solving
    /// E_eta[g] = g_obs.
    pub fn mle(&self, g_obs: &[f64], init: &[f64]) -> Result<Vec<f64>> {
        let q = self.dim();
        for k in 0..q {
            let (lo, hi) = self.unique.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s[k]), hi.max(s[k])));
            if lo < hi && (g_obs[k] <= lo || g_obs[k] >= hi) {
                return Err(Error::Numerical(format!(
                    "observed `{}` = {} is at the edge of its support; the MLE does not exist",
                    self.labels[k], g_obs[k]
                )));
            }
        }
        let mut eta = init.to_vec();
        let mut ll = self.loglik(&eta, g_obs);
        for _ in 0..500 {
            let mu = self.mean(&eta);
            let grad = DVector::from_iterator(q, g_obs.iter().zip(&mu).map(|(o, m)| o - m));
            if grad.amax() < 1e-11 {
                return Ok(eta);
            }
            let cov = self.covariance(&eta);
            let step = match cov.clone().cholesky() {
                Some(ch) => ch.solve(&grad),
                None => {
                    return Err(Error::Numerical("statistics are linearly dependent; the MLE is not identified".into()))
                }
            };
            let mut t = 1.0;
            loop {
                let cand: Vec<f64> = eta.iter().zip(step.iter()).map(|(e, s)| e + t * s).collect();
                let cand_ll = self.loglik(&cand, g_obs);
                if cand_ll >= ll - 1e-14 * ll.abs().max(1.0) {
                    eta = cand;
                    ll = cand_ll;
                    break;
                }
                t *= 0.5;
                if t < 1e-12 {
                    return Ok(eta);
                }
            }
            if eta.iter().any(|e| e.abs() > 1e3) {
                return Err(Error::Numerical(
                    "observed statistics lie on the boundary of their support; the MLE does not exist".into(),
                ));
            }
        }
        Err(Error::Numerical("exact MLE did not converge".into()))
    }

    /// P(X = x | Y = y) for the attribute part of `state` given its graph.
    pub fn conditional_attrs_given_graph(&self, eta: &[f64], state: usize) -> f64 {
        let g = state % self.n_graph_states;
        let n_attr = self.n_states() / self.n_graph_states;
        let lw: Vec<f64> = (0..n_attr).map(|a| dot(self.stats_of(g + self.n_graph_states * a), eta)).collect();
        (dot(self.stats_of(state), eta) - log_sum_exp(&lw)).exp()
    }

    /// P(Y = y | X = x) for the graph part of `state` given its attributes.
    pub fn conditional_graph_given_attrs(&self, eta: &[f64], state: usize) -> f64 {
        let base = state - state % self.n_graph_states;
        let lw: Vec<f64> = (0..self.n_graph_states).map(|g| dot(self.stats_of(base + g), eta)).collect();
        (dot(self.stats_of(state), eta) - log_sum_exp(&lw)).exp()
    }

    /// Number of graph states (2^dyads, or 1 when the graph is fixed).
    pub fn n_graph_states(&self) -> usize {
        self.n_graph_states
    }
}

fn set_attr_state(net: &mut Network, vars: &[(usize, usize)], mut a: usize) {
    for &(v, k) in vars {
        for i in 0..net.n_nodes() {
            net.write_attribute(i, v, AttrValue::Level(a % k));
            a /= k;
        }
    }
}
