//! Synthetic school-like network: four grades, degree structure, reciprocity,
//! strong within-grade and mild adjacent-grade homophily. Stands in for
//! survey data that cannot be redistributed.

use crate::error::Result;
use crate::network::{AttrValue, Network, Variable};
use crate::sampler::{Chain, ProposalConfig};
use crate::stats::{Model, ModelSpec, NullMode, TermSpec};

pub const GRADES: [&str; 4] = ["9", "10", "11", "12"];

/// The twelve-term school model: seven degree terms, three grade counts
/// (grade 12 is the baseline) and the two grade homophily terms.
pub fn school_spec() -> ModelSpec {
    let grade = |l: &str| TermSpec::CategoryCount { var: "grade".into(), level: l.into() };
    ModelSpec::new(
        vec![Variable::categorical("grade", GRADES, true)],
        vec![
            TermSpec::MeanDegree,
            TermSpec::LogVarDegree,
            TermSpec::InDegreeCount { k: 0 },
            TermSpec::InDegreeCount { k: 1 },
            TermSpec::OutDegreeCount { k: 0 },
            TermSpec::OutDegreeCount { k: 1 },
            TermSpec::Reciprocity,
            grade("9"),
            grade("10"),
            grade("11"),
            TermSpec::RhomophilyWithin { var: "grade".into(), null: NullMode::Auto },
            TermSpec::RhomophilyOffset { var: "grade".into(), null: NullMode::Auto },
        ],
    )
}

/// Generating parameters, in the order of [`school_spec`].
pub const TRUE_ETA: [f64; 12] = [-53.0, 1.0, 1.5, 0.5, 1.5, 0.5, 2.0, 0.0, 0.0, 0.0, 2.5, 1.0];

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n: usize,
    pub eta: Vec<f64>,
    /// Sampler steps from the starting configuration; defaults to 2000 n^2.
    pub steps: Option<u64>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { n: 40, eta: TRUE_ETA.to_vec(), steps: None, seed: 2 }
    }
}

/// Node labels used in the bundled files.
pub fn student_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("s{i:03}")).collect()
}

/// Draws one network from the school model at `cfg.eta`, starting from an
/// empty graph with grades assigned round-robin.
pub fn school_network(cfg: &SynthConfig) -> Result<(Model, Network)> {
    let spec = school_spec();
    let mut net = Network::new(cfg.n, spec.attributes.clone())?;
    for i in 0..cfg.n {
        net.assign_attribute(i, 0, AttrValue::Level(i % GRADES.len()))?;
    }
    let model = Model::for_network(spec, &mut net)?;
    let net = {
        let mut chain = Chain::new(&model, &cfg.eta, net, ProposalConfig::default(), cfg.seed, 0)?;
        chain.run(cfg.steps.unwrap_or(2000 * (cfg.n * cfg.n) as u64))?;
        chain.into_net()
    };
    Ok((model, net))
}
