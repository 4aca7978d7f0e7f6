//! Monte Carlo maximum likelihood.
//!
//! With draws g_1..g_m from the model at eta0, the log-likelihood ratio is
//! approximated by
//!
//! ```text
//! l(eta) - l(eta0) ~ (eta - eta0) . g_obs - log( mean_i exp((eta - eta0) . g_i) )
//! ```
//!
//! Each iteration samples at the current estimate and maximizes this
//! approximation over a box |eta - eta0| <= epsilon per coordinate.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::{p_value, spd_inverse, to_rows};
use crate::error::{invalid, Error, Result};
use crate::network::Network;
use crate::sampler::{sample, SamplerConfig};
use crate::stats::{dot, Model};
use crate::summary::{batch_means_cov, column_means, covariance, ess_from_log_weights, log_sum_exp, n_batches};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Draws per iteration.
    pub m: usize,
    /// Largest change of any coordinate per iteration.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Converged once the largest step falls below this.
    pub conv_tol: f64,
    /// Also converged once a Hotelling test of mean(g) = g_obs on the
    /// iteration's draws has a p-value at least this large (1 disables it).
    pub conv_pvalue: f64,
    /// Draws for the final polishing step and the Fisher information;
    /// defaults to 5 m.
    pub final_m: Option<usize>,
    pub sampler: SamplerConfig,
    /// Starting parameters; defaults to [`initial_eta`].
    pub init: Option<Vec<f64>>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            m: 2000,
            epsilon: 0.5,
            max_iters: 50,
            conv_tol: 1e-3,
            conv_pvalue: 0.5,
            final_m: None,
            sampler: SamplerConfig { chains: 4, ..Default::default() },
            init: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 100 {
            return invalid(format!("m = {} is below the minimum of 100", self.m));
        }
        if !(self.epsilon > 0.0) {
            return invalid(format!("epsilon = {} must be positive", self.epsilon));
        }
        if self.max_iters == 0 {
            return invalid("max_iters must be at least 1");
        }
        if self.final_m.is_some_and(|f| f < 100) {
            return invalid("final_m must be at least 100");
        }
        Ok(())
    }

    pub fn final_draws(&self) -> usize {
        self.final_m.unwrap_or(5 * self.m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Parameters the iteration sampled at.
    pub eta: Vec<f64>,
    pub step: Vec<f64>,
    /// Approximate log-likelihood gain of the step.
    pub gain: f64,
    /// Effective sample size of the importance weights at the new estimate.
    pub ess: f64,
    pub hotelling_p: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub labels: Vec<String>,
    pub eta_hat: Vec<f64>,
    pub observed: Vec<f64>,
    /// Mean of the final draws.
    pub simulated_mean: Vec<f64>,
    pub fisher: Vec<Vec<f64>>,
    pub covariance: Vec<Vec<f64>>,
    pub se: Vec<f64>,
    pub z: Vec<f64>,
    pub p: Vec<f64>,
    /// Monte Carlo standard error of each estimate.
    pub mcse: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
    /// Terms whose observed value lies on or outside the range of the final
    /// draws; at a genuine MLE the draws straddle it, so the MLE likely does
    /// not exist.
    pub degenerate_terms: Vec<String>,
    /// Terms involved in singular directions of the Fisher information.
    pub singular_terms: Vec<String>,
    pub config: FitConfig,
    #[serde(skip)]
    pub final_states: Vec<Network>,
}

impl FitResult {
    pub fn likely_degenerate(&self) -> bool {
        !self.degenerate_terms.is_empty()
    }
}

/// Approximate l(eta) - l(eta0) from draws taken at eta0.
pub fn approx_loglik_ratio(eta: &[f64], eta0: &[f64], draws: &[Vec<f64>], g_obs: &[f64]) -> Result<f64> {
    if draws.is_empty() {
        return invalid("no draws to approximate the likelihood from");
    }
    let d: Vec<f64> = eta.iter().zip(eta0).map(|(a, b)| a - b).collect();
    let a: Vec<f64> = draws.iter().map(|g| dot(&d, g)).collect();
    Ok(dot(&d, g_obs) - (log_sum_exp(&a) - (draws.len() as f64).ln()))
}

/// Fisher information estimate: the sample covariance of the statistics.
pub fn fisher_information(draws: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let q = draws.first().map_or(0, Vec::len);
    if draws.len() < 2 {
        return invalid("need at least two draws for a covariance");
    }
    if draws.len() <= q {
        warn!("{} draws for {q} statistics: the Fisher information is singular", draws.len());
    }
    Ok(covariance(draws))
}

/// Starting values: zero except for the first edge or mean-degree term,
/// which gets the logistic density of the observed graph.
pub fn initial_eta(model: &Model, net: &Network) -> Vec<f64> {
    let mut eta = vec![0.0; model.dim()];
    if !model.graph_random() {
        return eta;
    }
    let dyads = net.n_dyads() as f64;
    let density = (net.n_edges() as f64).clamp(0.5, dyads - 0.5) / dyads;
    let logit = (density / (1.0 - density)).ln();
    let n = net.n_nodes() as f64;
    for (k, l) in model.labels().iter().enumerate() {
        match l.as_str() {
            "edges" => {
                eta[k] = logit;
                break;
            }
            // each tie adds 2/n to the mean degree
            "mean_degree" => {
                eta[k] = logit * n / 2.0;
                break;
            }
            _ => {}
        }
    }
    eta
}

/// Draws centred at the observed statistics.
fn centred(draws: &[Vec<f64>], g_obs: &[f64]) -> Vec<Vec<f64>> {
    draws.iter().map(|g| g.iter().zip(g_obs).map(|(a, b)| a - b).collect()).collect()
}

/// Weighted mean and covariance of centred draws at step `delta`, with the
/// objective -log mean exp(delta . d_i) and the log weights.
struct Weighted {
    value: f64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    log_w: Vec<f64>,
}

fn weighted(d: &[Vec<f64>], delta: &[f64], with_cov: bool) -> Weighted {
    let q = delta.len();
    let a: Vec<f64> = d.iter().map(|x| dot(delta, x)).collect();
    let lse = log_sum_exp(&a);
    let value = -(lse - (d.len() as f64).ln());
    let w: Vec<f64> = a.iter().map(|x| (x - lse).exp()).collect();
    let mut mean = DVector::zeros(q);
    for (x, wi) in d.iter().zip(&w) {
        for k in 0..q {
            mean[k] += wi * x[k];
        }
    }
    let mut cov = DMatrix::zeros(q, q);
    if with_cov {
        for (x, wi) in d.iter().zip(&w) {
            for r in 0..q {
                let dr = x[r] - mean[r];
                for c in r..q {
                    cov[(r, c)] += wi * dr * (x[c] - mean[c]);
                }
            }
        }
        for r in 0..q {
            for c in 0..r {
                cov[(r, c)] = cov[(c, r)];
            }
        }
    }
    Weighted { value, mean, cov, log_w: a }
}

/// Maximizes -log mean exp(delta . d_i) over the box |delta_k| <= eps by
/// projected Newton with backtracking. Returns the step and its gain.
fn box_argmax(d: &[Vec<f64>], eps: f64) -> (Vec<f64>, f64) {
    let q = d.first().map_or(0, Vec::len);
    let mut delta = vec![0.0; q];
    let mut cur = weighted(d, &delta, true);
    for _ in 0..200 {
        // gradient of the objective is -mean_w(d)
        let grad: Vec<f64> = cur.mean.iter().map(|m| -m).collect();
        let free: Vec<usize> = (0..q)
            .filter(|&k| !((delta[k] >= eps && grad[k] > 0.0) || (delta[k] <= -eps && grad[k] < 0.0)))
            .collect();
        if free.is_empty() {
            break;
        }
        let sub = DMatrix::from_fn(free.len(), free.len(), |r, c| cur.cov[(free[r], free[c])]);
        let (inv, _) = spd_inverse(&sub);
        let g_free = DVector::from_iterator(free.len(), free.iter().map(|&k| grad[k]));
        let mut dir = vec![0.0; q];
        let newton = &inv * &g_free;
        let newton_ok = newton.iter().all(|x| x.is_finite()) && newton.dot(&g_free) > 0.0;
        for (i, &k) in free.iter().enumerate() {
            // fall back to the gradient when the curvature is unusable
            dir[k] = if newton_ok { newton[i] } else { g_free[i] };
        }
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-10 {
            let cand: Vec<f64> = delta.iter().zip(&dir).map(|(x, s)| (x + t * s).clamp(-eps, eps)).collect();
            let next = weighted(d, &cand, false);
            let lin: f64 = cand.iter().zip(&delta).zip(&grad).map(|((c, x), g)| (c - x) * g).sum();
            if next.value >= cur.value + 1e-4 * lin && next.value > cur.value - 1e-15 {
                let change = cand.iter().zip(&delta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                delta = cand;
                cur = weighted(d, &delta, true);
                moved = change > 1e-12;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let gain = cur.value;
    (delta, gain)
}

/// p-value of Hotelling's test that the draws' mean equals `g_obs`, with
/// batch means for the covariance of the mean. That covariance is doubled:
/// at a fixed point the current parameters carry the Monte Carlo error of the
/// previous, equally sized sample, so the mismatch has twice the variance of
/// the mean alone. Zero when a constant statistic differs from its observed
/// value.
fn hotelling_p(draws: &[Vec<f64>], g_obs: &[f64]) -> f64 {
    let mu = column_means(draws);
    let d = DVector::from_iterator(mu.len(), mu.iter().zip(g_obs).map(|(a, b)| a - b));
    let s = batch_means_cov(draws) * 2.0;
    for k in 0..d.len() {
        if s[(k, k)] <= 0.0 && d[k].abs() > 1e-12 {
            return 0.0;
        }
    }
    let (inv, _) = spd_inverse(&s);
    let eig = s.symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let rank = eig.eigenvalues.iter().filter(|&&l| l > top * 1e-10 * d.len() as f64).count();
    if rank == 0 {
        return 1.0;
    }
    let t2 = (d.transpose() * &inv * &d)[(0, 0)];
    // the covariance is itself estimated from b batch means
    let (b, r) = (n_batches(draws.len()) as f64, rank as f64);
    if b <= r {
        return 0.0;
    }
    let f = (b - r) / (r * (b - 1.0)) * t2;
    1.0 - FisherSnedecor::new(r, b - r).expect("positive df").cdf(f)
}

/// Derived seed for sub-run `k` of a run seeded with `seed`.
pub(crate) fn derive_seed(seed: u64, k: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Takes the constrained argmax step from draws at `eta`, shrinking it while
/// the importance weights are too concentrated.
fn step_from(draws: &[Vec<f64>], g_obs: &[f64], eps: f64) -> (Vec<f64>, f64, f64) {
    let d = centred(draws, g_obs);
    let (mut delta, mut gain) = box_argmax(&d, eps);
    let min_ess = draws.len() as f64 / 20.0;
    let mut ess = ess_from_log_weights(&weighted(&d, &delta, false).log_w);
    let mut shrinks = 0;
    while ess < min_ess && shrinks < 30 {
        delta.iter_mut().for_each(|x| *x *= 0.5);
        let w = weighted(&d, &delta, false);
        gain = w.value;
        ess = ess_from_log_weights(&w.log_w);
        shrinks += 1;
    }
    (delta, gain, ess)
}

/// Fits `model` to the observed network by Monte Carlo maximum likelihood.
pub fn mcmc_mle(model: &Model, observed: &Network, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    let mut net_obs = observed.clone();
    model.prepare(&mut net_obs)?;
    let g_obs = model.compute(&net_obs).0;
    if let Some(k) = g_obs.iter().position(|x| !x.is_finite()) {
        return Err(Error::Numerical(format!("observed statistic `{}` is not finite", model.labels()[k])));
    }
    let mut eta = match &cfg.init {
        Some(v) if v.len() == model.dim() => v.clone(),
        Some(v) => return invalid(format!("initial parameters have length {}, model has {}", v.len(), model.dim())),
        None => initial_eta(model, &net_obs),
    };
    let mut starts = vec![net_obs.clone()];
    let mut trace = Vec::new();
    let mut converged = false;
    for iter in 0..cfg.max_iters {
        let scfg = SamplerConfig { seed: derive_seed(cfg.sampler.seed, iter as u64), keep_every: 0, ..cfg.sampler.clone() };
        let run = sample(model, &eta, &starts, cfg.m, &scfg)?;
        starts = run.final_states;
        let pval = hotelling_p(&run.draws, &g_obs);
        let (step, gain, ess) = step_from(&run.draws, &g_obs, cfg.epsilon);
        let max_step = step.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        debug!("iteration {iter}: max step {max_step:.4}, gain {gain:.4}, ess {ess:.0}, hotelling p {pval:.3}");
        trace.push(TraceEntry { iteration: iter, eta: eta.clone(), step: step.clone(), gain, ess, hotelling_p: pval });
        for (e, s) in eta.iter_mut().zip(&step) {
            *e += s;
        }
        if max_step < cfg.conv_tol || pval >= cfg.conv_pvalue {
            converged = true;
            break;
        }
    }

    // Final, larger sample: polish the estimate and estimate the information.
    let scfg = SamplerConfig { seed: derive_seed(cfg.sampler.seed, u64::MAX), keep_every: 0, ..cfg.sampler.clone() };
    let run = sample(model, &eta, &starts, cfg.final_draws(), &scfg)?;
    let (step, _, _) = step_from(&run.draws, &g_obs, cfg.epsilon);
    let eta_hat: Vec<f64> = eta.iter().zip(&step).map(|(e, s)| e + s).collect();

    let fisher = fisher_information(&run.draws)?;
    let (cov, singular) = spd_inverse(&fisher);
    let mean_cov = batch_means_cov(&run.draws);
    let mc_cov = &cov * mean_cov * &cov;
    let q = model.dim();
    let se: Vec<f64> =
        (0..q).map(|k| if singular.contains(&k) { f64::NAN } else { cov[(k, k)].max(0.0).sqrt() }).collect();
    let z: Vec<f64> = eta_hat.iter().zip(&se).map(|(e, s)| e / s).collect();
    let p = z.iter().map(|&z| p_value(z)).collect();
    let mcse = (0..q).map(|k| mc_cov[(k, k)].max(0.0).sqrt()).collect();

    let labels = model.labels().to_vec();
    let degenerate_terms = (0..q)
        .filter(|&k| {
            let (lo, hi) = run.draws.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g[k]), hi.max(g[k])));
            g_obs[k] <= lo || g_obs[k] >= hi
        })
        .map(|k| labels[k].clone())
        .collect::<Vec<_>>();
    if !degenerate_terms.is_empty() {
        warn!("observed statistics on the edge of the simulated range: {}", degenerate_terms.join(", "));
    }
    if !singular.is_empty() {
        warn!("Fisher information is singular in: {}", singular.iter().map(|&k| labels[k].as_str()).collect::<Vec<_>>().join(", "));
    }
    Ok(FitResult {
        simulated_mean: column_means(&run.draws),
        fisher: to_rows(&fisher),
        covariance: to_rows(&cov),
        singular_terms: singular.iter().map(|&k| labels[k].clone()).collect(),
        labels,
        eta_hat,
        observed: g_obs,
        se,
        z,
        p,
        mcse,
        converged,
        iterations: trace.len(),
        trace,
        degenerate_terms,
        config: cfg.clone(),
        final_states: run.final_states,
    })
}
