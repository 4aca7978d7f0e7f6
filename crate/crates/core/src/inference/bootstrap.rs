//! Parametric bootstrap: simulate networks at the estimate, refit each, and
//! take the spread of the refitted estimates.

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mle::{derive_seed, mcmc_mle, FitConfig, FitResult};
use crate::error::{invalid, Result};
use crate::network::Network;
use crate::sampler::{sample, SamplerConfig};
use crate::stats::Model;
use crate::summary::{column, variance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    /// Settings for each refit; the starting values are always the estimate
    /// being bootstrapped and each refit runs a single chain.
    pub fit: FitConfig,
    /// Steps between simulated data sets; defaults to the sampler's thinning.
    pub thin: Option<u64>,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { replicates: 200, fit: FitConfig::default(), thin: None, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapResult {
    pub labels: Vec<String>,
    /// One row of refitted estimates per retained replicate.
    pub estimates: Vec<Vec<f64>>,
    pub se: Vec<f64>,
    pub requested: usize,
    /// Replicates dropped for any reason, including `boundary`.
    pub dropped: usize,
    /// Replicates whose simulated network sits on the edge of the support,
    /// where the MLE does not exist.
    pub boundary: usize,
    pub warning: Option<String>,
}

enum Refit {
    Estimate(Vec<f64>),
    Boundary,
    Failed,
}

pub fn parametric_bootstrap(model: &Model, fit: &FitResult, observed: &Network, cfg: &BootstrapConfig) -> Result<BootstrapResult> {
    if cfg.replicates == 0 {
        return invalid("the bootstrap needs at least one replicate");
    }
    if !fit.converged {
        return invalid("the bootstrap needs a converged fit");
    }
    cfg.fit.validate()?;
    let sim_cfg = SamplerConfig {
        seed: derive_seed(cfg.seed, 0),
        keep_every: 1,
        thin: cfg.thin.or(cfg.fit.sampler.thin),
        ..cfg.fit.sampler.clone()
    };
    let start = fit.final_states.first().cloned().unwrap_or_else(|| observed.clone());
    let sims = sample(model, &fit.eta_hat, &[start], cfg.replicates, &sim_cfg)?.networks;

    let refits: Vec<Refit> = sims
        .par_iter()
        .enumerate()
        .map(|(i, net)| {
            let rcfg = FitConfig {
                init: Some(fit.eta_hat.clone()),
                sampler: SamplerConfig { seed: derive_seed(cfg.seed, i as u64 + 1), chains: 1, ..cfg.fit.sampler.clone() },
                ..cfg.fit.clone()
            };
            match mcmc_mle(model, net, &rcfg) {
                Ok(r) if r.likely_degenerate() => {
                    debug!("bootstrap replicate {i}: no MLE ({} on the boundary)", r.degenerate_terms.join(", "));
                    Refit::Boundary
                }
                Ok(r) if r.converged && r.eta_hat.iter().all(|x| x.is_finite()) => Refit::Estimate(r.eta_hat),
                Ok(_) => Refit::Failed,
                Err(e) => {
                    warn!("bootstrap replicate {i} failed: {e}");
                    Refit::Failed
                }
            }
        })
        .collect();
    let boundary = refits.iter().filter(|r| matches!(r, Refit::Boundary)).count();
    let estimates: Vec<Vec<f64>> = refits
        .into_iter()
        .filter_map(|r| match r {
            Refit::Estimate(e) => Some(e),
            _ => None,
        })
        .collect();
    let dropped = cfg.replicates - estimates.len();
    let warning = (dropped * 10 > cfg.replicates).then(|| {
        let msg = format!(
            "{dropped} of {} bootstrap replicates were dropped ({boundary} without an MLE, the rest unconverged)",
            cfg.replicates
        );
        warn!("{msg}");
        msg
    });
    let se = (0..model.dim()).map(|k| variance(&column(&estimates, k)).sqrt()).collect();
    Ok(BootstrapResult { labels: model.labels().to_vec(), estimates, se, requested: cfg.replicates, dropped, boundary, warning })
}
