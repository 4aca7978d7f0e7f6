//! Metropolis-Hastings over (Y, X).
//!
//! Each step is a dyad move with probability `p_dyad`, otherwise an attribute
//! move. Dyad moves use the tie/no-tie proposal: with probability `p_edge`
//! delete a uniformly chosen existing edge, otherwise toggle a uniformly
//! chosen dyad. On an empty graph the delete branch falls through to the
//! dyad toggle. With E edges and D dyads the probability of proposing a
//! particular toggle is
//!
//! ```text
//! delete from E >= 1:  p_edge / E + (1 - p_edge) / D
//! add from E >= 1:     (1 - p_edge) / D
//! add from E = 0:      1 / D
//! ```
//!
//! and the Hastings ratio is the reverse probability over the forward one.
//! Attribute moves pick a node and a random variable uniformly; categorical
//! values move to one of the other K - 1 levels uniformly, continuous values
//! take a Normal(0, sigma) step. Both are symmetric.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::network::{AttrValue, Dyad, Network, VariableKind};
use crate::stats::{dot, Model, StatVector};

/// Steps between spot checks of the running statistics.
pub const VERIFY_EVERY: u64 = 100_000;
const VERIFY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    /// Probability of a dyad move; `None` picks 0.8 when any attribute is
    /// random, 1.0 otherwise (0 when the graph is fixed).
    pub p_dyad: Option<f64>,
    pub p_edge: f64,
    pub sigma: f64,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        ProposalConfig { p_dyad: None, p_edge: 0.5, sigma: 1.0 }
    }
}

impl ProposalConfig {
    /// The dyad-move probability actually used for `model`.
    pub fn resolve_p_dyad(&self, model: &Model) -> Result<f64> {
        let has_attr = !model.random_vars().is_empty();
        let p = match (model.graph_random(), has_attr) {
            (false, _) => 0.0,
            (true, false) => 1.0,
            (true, true) => self.p_dyad.unwrap_or(0.8),
        };
        if let Some(user) = self.p_dyad {
            if !(0.0..=1.0).contains(&user) {
                return invalid(format!("p_dyad = {user} outside [0, 1]"));
            }
            if model.graph_random() && has_attr && (user == 0.0 || user == 1.0) {
                return invalid("p_dyad must lie strictly between 0 and 1 when both the graph and attributes are random");
            }
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p_edge) {
            return invalid(format!("p_edge = {} outside [0, 1)", self.p_edge));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return invalid(format!("sigma = {} must be positive", self.sigma));
        }
        Ok(())
    }
}

/// Hastings ratio q(reverse) / q(forward) for a tie/no-tie toggle from a
/// state with `edges` edges out of `dyads`.
pub fn tnt_hastings(adding: bool, edges: usize, dyads: usize, p_edge: f64) -> f64 {
    let d = dyads as f64;
    let q_del = |e: usize| p_edge / e as f64 + (1.0 - p_edge) / d;
    let q_add = |e: usize| if e == 0 { 1.0 / d } else { (1.0 - p_edge) / d };
    if adding {
        q_del(edges + 1) / q_add(edges)
    } else {
        q_add(edges - 1) / q_del(edges)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    Dyad,
    Attribute,
}

/// A proposed change to the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Proposal {
    Toggle { dyad: Dyad, hastings: f64 },
    Attribute { node: usize, var: usize, value: AttrValue },
}

fn propose_dyad<R: Rng + ?Sized>(net: &Network, p_edge: f64, rng: &mut R) -> Proposal {
    let (e, d) = (net.n_edges(), net.n_dyads());
    let dyad = if rng.random::<f64>() < p_edge {
        net.random_edge(rng).unwrap_or_else(|| net.random_dyad(rng))
    } else {
        net.random_dyad(rng)
    };
    let adding = !net.has_edge(dyad.tail, dyad.head);
    Proposal::Toggle { dyad, hastings: tnt_hastings(adding, e, d, p_edge) }
}

/// Attribute proposal; `None` when the model has no random attributes.
pub fn propose_attribute<R: Rng + ?Sized>(net: &Network, model: &Model, sigma: f64, rng: &mut R) -> Option<Proposal> {
    let vars = model.random_vars();
    if vars.is_empty() {
        return None;
    }
    let node = rng.random_range(0..net.n_nodes());
    let var = vars[rng.random_range(0..vars.len())];
    let value = match &net.attributes().variable(var).kind {
        VariableKind::Categorical { levels } => {
            let old = net.attributes().level(node, var);
            let mut l = rng.random_range(0..levels.len() - 1);
            if l >= old {
                l += 1;
            }
            AttrValue::Level(l)
        }
        VariableKind::Continuous => {
            let step: f64 = Normal::new(0.0, sigma).expect("sigma validated").sample(rng);
            AttrValue::Real(net.attributes().real(node, var) + step)
        }
    };
    Some(Proposal::Attribute { node, var, value })
}

/// Outcome of one MH step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub kind: MoveKind,
    pub accepted: bool,
}

/// One Metropolis-Hastings step. The change statistic of the proposal is
/// left in `delta` whether or not it was accepted.
pub fn mh_step<R: Rng + ?Sized>(
    net: &mut Network,
    model: &Model,
    eta: &[f64],
    p_dyad: f64,
    cfg: &ProposalConfig,
    rng: &mut R,
    delta: &mut [f64],
) -> Step {
    let attr = if p_dyad < 1.0 && (p_dyad == 0.0 || rng.random::<f64>() >= p_dyad) {
        propose_attribute(net, model, cfg.sigma, rng)
    } else {
        None
    };
    let proposal = attr.unwrap_or_else(|| propose_dyad(net, cfg.p_edge, rng));
    let (kind, log_q) = match proposal {
        Proposal::Toggle { dyad, hastings } => {
            model.dyad_change_into(net, dyad, delta);
            (MoveKind::Dyad, hastings.ln())
        }
        Proposal::Attribute { node, var, value } => {
            model.attr_change_into(net, node, var, value, delta);
            (MoveKind::Attribute, 0.0)
        }
    };
    let log_r = log_q + dot(eta, delta);
    let accepted = log_r >= 0.0 || rng.random::<f64>().ln() < log_r;
    if accepted {
        match proposal {
            Proposal::Toggle { dyad, .. } => {
                net.toggle_unchecked(dyad);
            }
            Proposal::Attribute { node, var, value } => {
                net.write_attribute(node, var, value);
            }
        }
    }
    Step { kind, accepted }
}

/// Per-kind proposal and acceptance counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub dyad_proposed: u64,
    pub dyad_accepted: u64,
    pub attribute_proposed: u64,
    pub attribute_accepted: u64,
}

impl Acceptance {
    fn record(&mut self, s: Step) {
        match s.kind {
            MoveKind::Dyad => {
                self.dyad_proposed += 1;
                self.dyad_accepted += s.accepted as u64;
            }
            MoveKind::Attribute => {
                self.attribute_proposed += 1;
                self.attribute_accepted += s.accepted as u64;
            }
        }
    }

    fn merge(&mut self, o: &Acceptance) {
        self.dyad_proposed += o.dyad_proposed;
        self.dyad_accepted += o.dyad_accepted;
        self.attribute_proposed += o.attribute_proposed;
        self.attribute_accepted += o.attribute_accepted;
    }

    pub fn dyad_rate(&self) -> f64 {
        rate(self.dyad_accepted, self.dyad_proposed)
    }

    pub fn attribute_rate(&self) -> f64 {
        rate(self.attribute_accepted, self.attribute_proposed)
    }
}

fn rate(a: u64, p: u64) -> f64 {
    if p == 0 {
        0.0
    } else {
        a as f64 / p as f64
    }
}

/// A single chain with its own network copy, running statistics and RNG.
pub struct Chain<'m> {
    model: &'m Model,
    eta: Vec<f64>,
    cfg: ProposalConfig,
    p_dyad: f64,
    net: Network,
    stats: StatVector,
    delta: Vec<f64>,
    rng: ChaCha8Rng,
    steps: u64,
    verify_every: u64,
    acceptance: Acceptance,
}

impl<'m> Chain<'m> {
    /// `net` must already be prepared for `model`. The RNG is the ChaCha8
    /// stream `stream` of `seed`.
    pub fn new(model: &'m Model, eta: &[f64], net: Network, cfg: ProposalConfig, seed: u64, stream: u64) -> Result<Self> {
        if eta.len() != model.dim() {
            return invalid(format!("parameter vector has length {}, model has {} statistics", eta.len(), model.dim()));
        }
        if let Some(bad) = eta.iter().position(|x| !x.is_finite()) {
            return invalid(format!("parameter `{}` is not finite", model.labels()[bad]));
        }
        cfg.validate()?;
        let p_dyad = cfg.resolve_p_dyad(model)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let stats = model.compute(&net);
        check_finite(model, &stats)?;
        Ok(Chain {
            model,
            eta: eta.to_vec(),
            cfg,
            p_dyad,
            net,
            stats,
            delta: vec![0.0; model.dim()],
            rng,
            steps: 0,
            verify_every: VERIFY_EVERY,
            acceptance: Acceptance::default(),
        })
    }

    pub fn with_verify_every(mut self, every: u64) -> Self {
        self.verify_every = every.max(1);
        self
    }

    pub fn step(&mut self) -> Result<Step> {
        let s = mh_step(&mut self.net, self.model, &self.eta, self.p_dyad, &self.cfg, &mut self.rng, &mut self.delta);
        if s.accepted {
            for (g, d) in self.stats.iter_mut().zip(&self.delta) {
                *g += d;
            }
        }
        self.acceptance.record(s);
        self.steps += 1;
        if self.steps % self.verify_every == 0 {
            self.verify()?;
        }
        Ok(s)
    }

    pub fn run(&mut self, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    /// Compares the running statistics with a full recompute and resyncs.
    pub fn verify(&mut self) -> Result<()> {
        check_finite(self.model, &self.stats)?;
        let fresh = self.model.compute(&self.net);
        for (k, (a, b)) in self.stats.iter().zip(fresh.iter()).enumerate() {
            if (a - b).abs() > VERIFY_TOL * (1.0 + b.abs()) {
                return Err(Error::Numerical(format!(
                    "running statistic `{}` drifted: {a} vs recomputed {b} after {} steps",
                    self.model.labels()[k],
                    self.steps
                )));
            }
        }
        self.stats = fresh;
        Ok(())
    }

    pub fn net(&self) -> &Network {
        &self.net
    }

    pub fn into_net(self) -> Network {
        self.net
    }

    pub fn stats(&self) -> &StatVector {
        &self.stats
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn acceptance(&self) -> Acceptance {
        self.acceptance
    }
}

fn check_finite(model: &Model, g: &[f64]) -> Result<()> {
    match g.iter().position(|x| !x.is_finite()) {
        Some(k) => Err(Error::Numerical(format!("statistic `{}` is not finite", model.labels()[k]))),
        None => Ok(()),
    }
}

/// Run-length settings for [`sample`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub proposal: ProposalConfig,
    /// Steps discarded at the start of each chain; default 10 n^2.
    pub burn_in: Option<u64>,
    /// Steps between retained draws; default n^2.
    pub thin: Option<u64>,
    pub chains: usize,
    pub seed: u64,
    /// Keep every k-th retained network (0 keeps none).
    pub keep_every: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { proposal: ProposalConfig::default(), burn_in: None, thin: None, chains: 1, seed: 0, keep_every: 0 }
    }
}

impl SamplerConfig {
    pub fn burn_in_for(&self, n: usize) -> u64 {
        self.burn_in.unwrap_or(10 * (n * n) as u64)
    }

    pub fn thin_for(&self, n: usize) -> u64 {
        self.thin.unwrap_or((n * n) as u64).max(1)
    }
}

/// Statistic draws from one or more chains, concatenated in chain order.
#[derive(Debug, Clone, Serialize)]
pub struct SampleRun {
    pub labels: Vec<String>,
    pub draws: Vec<Vec<f64>>,
    #[serde(skip)]
    pub networks: Vec<Network>,
    /// Final state of each chain.
    #[serde(skip)]
    pub final_states: Vec<Network>,
    pub seed: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub chains: usize,
    pub acceptance: Acceptance,
}

impl SampleRun {
    pub fn dyad_acceptance(&self) -> f64 {
        self.acceptance.dyad_rate()
    }

    pub fn attribute_acceptance(&self) -> f64 {
        self.acceptance.attribute_rate()
    }
}

struct ChainOut<T> {
    draws: Vec<Vec<f64>>,
    observed: Vec<T>,
    networks: Vec<Network>,
    last: Network,
    acceptance: Acceptance,
}

/// Draws `n_draws` statistic vectors from the model at `eta`, starting every
/// chain from `start` (one state for all chains, or one per chain).
pub fn sample(model: &Model, eta: &[f64], start: &[Network], n_draws: usize, cfg: &SamplerConfig) -> Result<SampleRun> {
    Ok(sample_with(model, eta, start, n_draws, cfg, |_| ())?.0)
}

/// Like [`sample`], also evaluating `observe` on the network at every
/// retained draw. Observations come back in the same order as the draws.
pub fn sample_with<T, F>(
    model: &Model,
    eta: &[f64],
    start: &[Network],
    n_draws: usize,
    cfg: &SamplerConfig,
    observe: F,
) -> Result<(SampleRun, Vec<T>)>
where
    T: Send,
    F: Fn(&Network) -> T + Sync,
{
    if n_draws == 0 {
        return invalid("number of draws must be at least 1");
    }
    if cfg.chains == 0 {
        return invalid("number of chains must be at least 1");
    }
    if start.is_empty() || (start.len() != 1 && start.len() != cfg.chains) {
        return invalid(format!("need 1 or {} starting states, got {}", cfg.chains, start.len()));
    }
    let n = model.n_nodes();
    let (burn_in, thin) = (cfg.burn_in_for(n), cfg.thin_for(n));
    let per_chain: Vec<usize> =
        (0..cfg.chains).map(|c| n_draws / cfg.chains + (c < n_draws % cfg.chains) as usize).collect();
    let outs: Vec<Result<ChainOut<T>>> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| {
            let mut net = start[c.min(start.len() - 1)].clone();
            model.prepare(&mut net)?;
            let mut chain = Chain::new(model, eta, net, cfg.proposal, cfg.seed, c as u64)?;
            chain.run(burn_in)?;
            let mut draws = Vec::with_capacity(per_chain[c]);
            let mut observed = Vec::with_capacity(per_chain[c]);
            let mut networks = Vec::new();
            for k in 0..per_chain[c] {
                chain.run(thin)?;
                draws.push(chain.stats().to_vec());
                observed.push(observe(chain.net()));
                if cfg.keep_every > 0 && k % cfg.keep_every == 0 {
                    networks.push(chain.net().clone());
                }
            }
            chain.verify()?;
            let acceptance = chain.acceptance();
            Ok(ChainOut { draws, observed, networks, last: chain.into_net(), acceptance })
        })
        .collect();
    let mut run = SampleRun {
        labels: model.labels().to_vec(),
        draws: Vec::with_capacity(n_draws),
        networks: Vec::new(),
        final_states: Vec::with_capacity(cfg.chains),
        seed: cfg.seed,
        burn_in,
        thin,
        chains: cfg.chains,
        acceptance: Acceptance::default(),
    };
    let mut observed = Vec::with_capacity(n_draws);
    for out in outs {
        let out = out?;
        run.draws.extend(out.draws);
        observed.extend(out.observed);
        run.networks.extend(out.networks);
        run.final_states.push(out.last);
        run.acceptance.merge(&out.acceptance);
    }
    Ok((run, observed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Variable;
    use crate::stats::{ModelSpec, TermSpec};

    fn edge_model(n: usize) -> (Model, Network) {
        let mut net = Network::empty(n);
        let model = Model::for_network(ModelSpec::new(vec![], vec![TermSpec::EdgeCount]), &mut net).unwrap();
        (model, net)
    }

    #[test]
    fn boundary_hastings_ratios() {
        // n = 3: six dyads
        assert!((tnt_hastings(true, 0, 6, 0.5) - 3.5).abs() < 1e-15);
        assert!((tnt_hastings(false, 1, 6, 0.5) - 2.0 / 7.0).abs() < 1e-15);
        assert!((tnt_hastings(true, 2, 6, 0.5) - (1.0 + 6.0 / 3.0)).abs() < 1e-15);
        assert!((tnt_hastings(false, 3, 6, 0.5) - 3.0 / 9.0).abs() < 1e-15);
        // ratios of a move and its reverse are reciprocal
        for e in 0..6 {
            for p in [0.0, 0.3, 0.5, 0.9] {
                let fwd = tnt_hastings(true, e, 6, p);
                let back = tnt_hastings(false, e + 1, 6, p);
                assert!((fwd * back - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn proposal_probabilities_match_the_enumerated_kernel() {
        // Tabulate proposal frequencies from a 3-edge network on 3 nodes.
        let mut net = Network::from_edges(3, vec![], &[(0, 1), (1, 2), (2, 0)]).unwrap();
        let (model, _) = edge_model(3);
        model.prepare(&mut net).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut hits = std::collections::HashMap::new();
        let reps = 200_000;
        for _ in 0..reps {
            if let Proposal::Toggle { dyad, .. } = propose_dyad(&net, 0.5, &mut rng) {
                *hits.entry(dyad).or_insert(0u32) += 1;
            }
        }
        for (d, c) in hits {
            let p = c as f64 / reps as f64;
            let want = if net.has_edge(d.tail, d.head) { 0.5 / 3.0 + 0.5 / 6.0 } else { 0.5 / 6.0 };
            let sd = (want * (1.0 - want) / reps as f64).sqrt();
            assert!((p - want).abs() < 5.0 * sd, "{d:?}: {p} vs {want}");
        }
    }

    #[test]
    fn zero_field_attribute_moves_always_accept() {
        let x = Variable::categorical("x", ["a", "b", "c", "d"], true);
        let mut net = Network::new(5, vec![x.clone()]).unwrap();
        let spec = ModelSpec::new(vec![x], vec![TermSpec::CategoryCount { var: "x".into(), level: "a".into() }]);
        let model = Model::for_network(spec, &mut net).unwrap();
        let cfg = ProposalConfig { p_dyad: Some(0.5), ..Default::default() };
        let mut chain = Chain::new(&model, &[0.0], net, cfg, 1, 0).unwrap();
        let mut freq = [0u32; 4];
        for _ in 0..30_000 {
            let before = chain.net().attributes().levels_of(0).to_vec();
            let s = chain.step().unwrap();
            if s.kind == MoveKind::Attribute {
                assert!(s.accepted);
                let after = chain.net().attributes().levels_of(0);
                let moved: Vec<usize> = (0..5).filter(|&i| before[i] != after[i]).collect();
                assert_eq!(moved.len(), 1);
                if before[moved[0]] == 0 {
                    freq[after[moved[0]]] += 1;
                }
            }
        }
        // from level a, each of the other three levels is proposed with probability 1/3
        let total: u32 = freq.iter().sum();
        for &f in &freq[1..] {
            let p = f as f64 / total as f64;
            assert!((p - 1.0 / 3.0).abs() < 5.0 * (2.0 / 9.0 / total as f64).sqrt());
        }
        assert_eq!(freq[0], 0);
    }

    #[test]
    fn binary_attribute_proposal_flips() {
        let x = Variable::categorical("x", ["0", "1"], true);
        let mut net = Network::new(3, vec![x.clone()]).unwrap();
        let model =
            Model::for_network(ModelSpec::new(vec![x], vec![TermSpec::CategoryCount { var: "x".into(), level: "1".into() }]), &mut net)
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            match propose_attribute(&net, &model, 1.0, &mut rng).unwrap() {
                Proposal::Attribute { node, value, .. } => {
                    assert_ne!(value, net.attributes().get(node, 0));
                }
                p => panic!("{p:?}"),
            }
        }
    }

    #[test]
    fn continuous_step_has_half_normal_mean() {
        let z = Variable::categorical("z", ["0", "1"], true);
        let c = Variable::continuous("c", true);
        let mut net = Network::new(4, vec![z.clone(), c.clone()]).unwrap();
        let spec = ModelSpec::new(vec![z, c], vec![TermSpec::EdgeCount]);
        let model = Model::for_network(spec, &mut net).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (mut sum, mut k) = (0.0, 0);
        for _ in 0..200_000 {
            if let Some(Proposal::Attribute { node, var: 1, value }) = propose_attribute(&net, &model, 0.1, &mut rng) {
                sum += (value.as_f64() - net.attributes().real(node, 1)).abs();
                k += 1;
            }
        }
        let want = (2.0 / std::f64::consts::PI).sqrt() * 0.1;
        assert!((sum / k as f64 - want).abs() < 0.002, "{}", sum / k as f64);
    }

    #[test]
    fn edge_model_at_zero_has_mean_half_the_dyads() {
        let (model, net) = edge_model(3);
        let cfg = SamplerConfig { seed: 4, chains: 2, ..Default::default() };
        let run = sample(&model, &[0.0], &[net], 40_000, &cfg).unwrap();
        let xs = crate::summary::column(&run.draws, 0);
        let m = crate::summary::mean(&xs);
        assert!((m - 3.0).abs() < 4.0 * crate::summary::mcse(&xs), "{m}");
        assert_eq!(run.draws.len(), 40_000);
        assert!(run.dyad_acceptance() > 0.0 && run.dyad_acceptance() <= 1.0);
    }

    #[test]
    fn edge_model_density_is_logistic() {
        let theta = -0.7f64;
        let (model, net) = edge_model(6);
        let cfg = SamplerConfig { seed: 2, chains: 4, ..Default::default() };
        let run = sample(&model, &[theta], &[net], 20_000, &cfg).unwrap();
        let xs: Vec<f64> = crate::summary::column(&run.draws, 0).iter().map(|e| e / 30.0).collect();
        let want = theta.exp() / (1.0 + theta.exp());
        let m = crate::summary::mean(&xs);
        assert!((m - want).abs() < 4.0 * crate::summary::mcse(&xs), "{m} vs {want}");
    }

    #[test]
    fn two_node_ising_at_zero_is_uniform_over_sixteen_states() {
        let x = Variable::categorical("x", ["-1", "1"], true);
        let mut net = Network::new(2, vec![x.clone()]).unwrap();
        let spec = ModelSpec::new(vec![x], vec![TermSpec::EdgeCount, TermSpec::SpinHomophily { var: "x".into() }]);
        let model = Model::for_network(spec, &mut net).unwrap();
        let mut chain = Chain::new(&model, &[0.0, 0.0], net, ProposalConfig::default(), 7, 0).unwrap();
        let reps = 160_000;
        let mut counts = [0u32; 16];
        for _ in 0..reps {
            chain.run(4).unwrap();
            let n = chain.net();
            let a = n.attributes();
            let s = n.has_edge(0, 1) as usize
                | (n.has_edge(1, 0) as usize) << 1
                | a.level(0, 0) << 2
                | a.level(1, 0) << 3;
            counts[s] += 1;
        }
        for c in counts {
            let p = c as f64 / reps as f64;
            // thinning by 4 leaves some autocorrelation; allow for it
            assert!((p - 1.0 / 16.0).abs() < 4.0 * 2.0 * (1.0 / 16.0 * 15.0 / 16.0 / reps as f64).sqrt(), "{counts:?}");
        }
    }

    #[test]
    fn seed_determinism_and_stream_independence() {
        let (model, net) = edge_model(5);
        let cfg = SamplerConfig { seed: 99, chains: 3, ..Default::default() };
        let a = sample(&model, &[0.2], &[net.clone()], 300, &cfg).unwrap();
        let b = sample(&model, &[0.2], &[net.clone()], 300, &cfg).unwrap();
        assert_eq!(a.draws, b.draws);
        let c = sample(&model, &[0.2], &[net], 300, &SamplerConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn running_statistics_never_drift() {
        let g = Variable::categorical("g", ["a", "b", "c"], true);
        let mut net = Network::new(8, vec![g.clone()]).unwrap();
        let spec = ModelSpec::new(
            vec![g],
            vec![
                TermSpec::MeanDegree,
                TermSpec::LogVarDegree,
                TermSpec::Reciprocity,
                TermSpec::RhomophilyWithin { var: "g".into(), null: Default::default() },
                TermSpec::RhomophilyOffset { var: "g".into(), null: Default::default() },
            ],
        );
        let model = Model::for_network(spec, &mut net).unwrap();
        let mut chain =
            Chain::new(&model, &[0.5, -0.5, 0.3, 0.4, 0.1], net, ProposalConfig::default(), 5, 0).unwrap().with_verify_every(1000);
        chain.run(200_000).unwrap();
        chain.net().verify().unwrap();
    }

    #[test]
    fn bad_configs_are_rejected() {
        let (model, net) = edge_model(3);
        assert!(sample(&model, &[0.0], &[net.clone()], 0, &SamplerConfig::default()).is_err());
        assert!(sample(&model, &[0.0, 1.0], &[net.clone()], 5, &SamplerConfig::default()).is_err());
        assert!(sample(&model, &[f64::NAN], &[net.clone()], 5, &SamplerConfig::default()).is_err());
        let bad = SamplerConfig { proposal: ProposalConfig { p_edge: 1.0, ..Default::default() }, ..Default::default() };
        assert!(sample(&model, &[0.0], &[net], 5, &bad).is_err());
    }
}
