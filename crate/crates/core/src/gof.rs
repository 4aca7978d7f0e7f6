//! Goodness-of-fit envelopes and degeneracy diagnostics.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::network::{Network, VariableKind};
use crate::sampler::{sample_with, SamplerConfig};
use crate::stats::Model;
use crate::summary::{column, mcse, mean, quantiles, skewness, variance, Histogram};

pub const ENVELOPE: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

/// Statistics simulated alongside the model terms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuxSpec {
    /// Categorical variables to tabulate K x K directed mixing counts for.
    pub mixing: Vec<usize>,
    /// In- and out-degree distributions over 0..=max_degree; the last bin
    /// collects everything above. `None` skips them.
    pub max_degree: Option<usize>,
}

impl AuxSpec {
    /// Mixing tables for every categorical variable and degrees up to 10.
    pub fn standard(net: &Network) -> AuxSpec {
        let mixing = (0..net.attributes().n_vars()).filter(|&v| net.attributes().variable(v).n_levels().is_some()).collect();
        AuxSpec { mixing, max_degree: Some(10) }
    }

    pub fn labels(&self, net: &Network) -> Vec<String> {
        let mut out = Vec::new();
        for &v in &self.mixing {
            let var = net.attributes().variable(v);
            let levels = var.levels().expect("mixing needs a categorical variable");
            for k in levels {
                for l in levels {
                    out.push(format!("mix_{}_{k}_{l}", var.name));
                }
            }
        }
        if let Some(m) = self.max_degree {
            for dir in ["in", "out"] {
                out.extend((0..m).map(|d| format!("{dir}_degree_dist_{d}")));
                out.push(format!("{dir}_degree_dist_{m}plus"));
            }
        }
        out
    }

    pub fn compute(&self, net: &Network) -> Vec<f64> {
        let mut out = Vec::new();
        for &v in &self.mixing {
            out.extend(mixing_matrix(net, v).into_iter().flatten().map(|c| c as f64));
        }
        if let Some(m) = self.max_degree {
            for degree in [Network::in_degree, Network::out_degree] {
                let mut hist = vec![0.0; m + 1];
                for i in 0..net.n_nodes() {
                    hist[degree(net, i).min(m)] += 1.0;
                }
                out.extend(hist);
            }
        }
        out
    }
}

/// Directed tie counts from level k (row) to level l (column).
pub fn mixing_matrix(net: &Network, var: usize) -> Vec<Vec<u64>> {
    let k = net.attributes().variable(var).n_levels().expect("categorical variable");
    let col = net.attributes().levels_of(var);
    let mut m = vec![vec![0; k]; k];
    for d in net.edges() {
        m[col[d.tail]][col[d.head]] += 1;
    }
    m
}

/// Fraction of ties whose endpoints share a level of `var` (NaN without ties).
pub fn matched_fraction(net: &Network, var: usize) -> f64 {
    let col = net.attributes().levels_of(var);
    let matched = net.edges().iter().filter(|d| col[d.tail] == col[d.head]).count();
    matched as f64 / net.n_edges() as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct GofRow {
    pub name: String,
    pub in_model: bool,
    pub observed: f64,
    pub mean: f64,
    pub mcse: f64,
    /// 2.5, 25, 50, 75 and 97.5 percent quantiles.
    pub quantiles: [f64; 5],
    /// Observed value lies within the central 95% of the simulations.
    pub inside: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GofReport {
    pub n_sims: usize,
    pub seed: u64,
    pub eta: Vec<f64>,
    pub rows: Vec<GofRow>,
}

impl GofReport {
    pub fn row(&self, name: &str) -> Option<&GofRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Simulates `n_sims` networks at `eta` and compares model and auxiliary
/// statistics with those of `observed`.
pub fn gof(model: &Model, eta: &[f64], observed: &Network, n_sims: usize, aux: &AuxSpec, cfg: &SamplerConfig) -> Result<GofReport> {
    let mut obs = observed.clone();
    model.prepare(&mut obs)?;
    let (run, aux_draws) = sample_with(model, eta, &[obs.clone()], n_sims, cfg, |net| aux.compute(net))?;
    let mut rows = Vec::new();
    let g_obs = model.compute(&obs);
    let aux_obs = aux.compute(&obs);
    let named = model.labels().iter().map(|l| (l.clone(), true)).chain(aux.labels(&obs).into_iter().map(|l| (l, false)));
    for (j, (name, in_model)) in named.enumerate() {
        let (xs, observed) = if in_model {
            (column(&run.draws, j), g_obs[j])
        } else {
            let k = j - model.dim();
            (column(&aux_draws, k), aux_obs[k])
        };
        let q = quantiles(&xs, &ENVELOPE);
        rows.push(GofRow {
            name,
            in_model,
            observed,
            mean: mean(&xs),
            mcse: mcse(&xs),
            quantiles: [q[0], q[1], q[2], q[3], q[4]],
            inside: q[0] <= observed && observed <= q[4],
        });
    }
    Ok(GofReport { n_sims, seed: cfg.seed, eta: eta.to_vec(), rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct Marginal {
    pub name: String,
    pub histogram: Histogram,
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    pub bimodal: bool,
    /// Centres of the significant histogram modes.
    pub modes: Vec<f64>,
    pub observed: Option<f64>,
    /// Two-sided tail probability of the observed value among the draws.
    pub tail_probability: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DegeneracyReport {
    pub draws: usize,
    pub valley_ratio: f64,
    pub marginals: Vec<Marginal>,
}

impl DegeneracyReport {
    pub fn marginal(&self, name: &str) -> Option<&Marginal> {
        self.marginals.iter().find(|m| m.name == name)
    }

    pub fn any_bimodal(&self) -> bool {
        self.marginals.iter().any(|m| m.bimodal)
    }
}

/// Builds the report from a draw matrix. NaN entries (e.g. a matched
/// fraction on an empty graph) are left out of their column.
pub fn degeneracy_report(labels: &[String], draws: &[Vec<f64>], observed: Option<&[f64]>, valley_ratio: f64) -> Result<DegeneracyReport> {
    if draws.is_empty() {
        return invalid("no draws to summarize");
    }
    let mut marginals = Vec::new();
    for (j, name) in labels.iter().enumerate() {
        let xs: Vec<f64> = column(draws, j).into_iter().filter(|x| !x.is_nan()).collect();
        if xs.is_empty() {
            continue;
        }
        let histogram = Histogram::freedman_diaconis(&xs);
        let modes = histogram.modes(0.1).iter().map(|&k| 0.5 * (histogram.edges[k] + histogram.edges[k + 1])).collect();
        let obs = observed.map(|o| o[j]).filter(|x| !x.is_nan());
        let tail_probability = obs.map(|o| {
            let below = xs.iter().filter(|&&x| x <= o).count() as f64 / xs.len() as f64;
            let above = xs.iter().filter(|&&x| x >= o).count() as f64 / xs.len() as f64;
            (2.0 * below.min(above)).min(1.0)
        });
        marginals.push(Marginal {
            name: name.clone(),
            bimodal: histogram.is_bimodal(valley_ratio),
            histogram,
            mean: mean(&xs),
            sd: variance(&xs).sqrt(),
            skewness: skewness(&xs),
            modes,
            observed: obs,
            tail_probability,
        });
    }
    Ok(DegeneracyReport { draws: draws.len(), valley_ratio, marginals })
}

/// Labels and values of the extra marginals tracked by [`degeneracy_scan`]:
/// level counts of each random categorical variable and the matched-tie
/// fraction of each categorical variable.
fn extra_labels(model: &Model, net: &Network) -> Vec<String> {
    let attrs = net.attributes();
    let mut out = Vec::new();
    for &v in model.random_vars() {
        if let VariableKind::Categorical { levels } = &attrs.variable(v).kind {
            out.extend(levels.iter().map(|l| format!("n_{}_{l}", attrs.variable(v).name)));
        }
    }
    for v in 0..attrs.n_vars() {
        if attrs.variable(v).n_levels().is_some() {
            out.push(format!("matched_{}", attrs.variable(v).name));
        }
    }
    out
}

fn extra_values(model: &Model, net: &Network) -> Vec<f64> {
    let attrs = net.attributes();
    let mut out = Vec::new();
    for &v in model.random_vars() {
        if attrs.variable(v).n_levels().is_some() {
            out.extend(attrs.counts(v).iter().map(|&c| c as f64));
        }
    }
    for v in 0..attrs.n_vars() {
        if attrs.variable(v).n_levels().is_some() {
            out.push(matched_fraction(net, v));
        }
    }
    out
}

/// Long-run simulation at `eta` summarized marginal by marginal. Returns the
/// report together with the labelled draw matrix it was built from.
pub fn degeneracy_scan(
    model: &Model,
    eta: &[f64],
    start: &Network,
    draws: usize,
    cfg: &SamplerConfig,
    valley_ratio: f64,
    observed: Option<&Network>,
) -> Result<(DegeneracyReport, Vec<String>, Vec<Vec<f64>>)> {
    let mut start = start.clone();
    model.prepare(&mut start)?;
    let (run, extra) = sample_with(model, eta, &[start.clone()], draws, cfg, |net| extra_values(model, net))?;
    let mut labels = model.labels().to_vec();
    labels.extend(extra_labels(model, &start));
    let rows: Vec<Vec<f64>> = run.draws.into_iter().zip(extra).map(|(mut g, e)| {
        g.extend(e);
        g
    }).collect();
    let obs = match observed {
        Some(net) => {
            let mut net = net.clone();
            model.prepare(&mut net)?;
            let mut g = model.compute(&net).0;
            g.extend(extra_values(model, &net));
            Some(g)
        }
        None => None,
    };
    let report = degeneracy_report(&labels, &rows, obs.as_deref(), valley_ratio)?;
    Ok((report, labels, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Dyad, Variable};
    use crate::stats::{ModelSpec, TermSpec};

    #[test]
    fn mixing_table_has_k_squared_cells() {
        let g = Variable::categorical("grade", ["9", "10", "11", "12"], true);
        let mut net = Network::new(4, vec![g]).unwrap();
        for i in 0..4 {
            net.assign_attribute(i, 0, crate::AttrValue::Level(i)).unwrap();
        }
        net.toggle(Dyad::new(0, 1)).unwrap();
        net.toggle(Dyad::new(3, 1)).unwrap();
        let aux = AuxSpec::standard(&net);
        let labels = aux.labels(&net);
        let vals = aux.compute(&net);
        assert_eq!(labels.len(), 16 + 22);
        assert_eq!(vals.len(), labels.len());
        assert_eq!(vals[1], 1.0); // 9 -> 10
        assert_eq!(vals[3 * 4 + 1], 1.0); // 12 -> 10
        assert_eq!(vals.iter().take(16).sum::<f64>(), 2.0);
        assert_eq!(labels[16], "in_degree_dist_0");
        assert_eq!(vals[16], 3.0);
        assert!((matched_fraction(&net, 0) - 0.0).abs() < 1e-15);
    }

    #[test]
    fn zero_parameter_density_is_centred() {
        let mut net = Network::empty(8);
        for i in 0..8 {
            for j in 0..8 {
                if i != j && (i + j) % 2 == 0 {
                    net.toggle(Dyad::new(i, j)).unwrap();
                }
            }
        }
        let model = Model::for_network(ModelSpec::new(vec![], vec![TermSpec::EdgeCount]), &mut net).unwrap();
        let cfg = SamplerConfig { seed: 1, chains: 2, ..Default::default() };
        let rep = gof(&model, &[0.0], &net, 500, &AuxSpec { mixing: vec![], max_degree: Some(3) }, &cfg).unwrap();
        let row = rep.row("edges").unwrap();
        assert!(row.inside);
        assert!((row.quantiles[2] - 28.0).abs() <= 3.0, "{row:?}");
        assert!(row.quantiles.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(rep.rows.len(), 1 + 8);
    }

    #[test]
    fn uniform_model_has_no_flags_and_report_is_deterministic() {
        let x = Variable::categorical("x", ["0", "1"], true);
        let mut net = Network::new(10, vec![x.clone()]).unwrap();
        let spec = ModelSpec::new(vec![x], vec![TermSpec::EdgeCount, TermSpec::SpinHomophily { var: "x".into() }]);
        let model = Model::for_network(spec, &mut net).unwrap();
        let cfg = SamplerConfig { seed: 5, chains: 2, ..Default::default() };
        let (rep, labels, rows) = degeneracy_scan(&model, &[0.0, 0.0], &net, 4000, &cfg, 0.6, Some(&net)).unwrap();
        assert!(!rep.any_bimodal(), "{:?}", rep.marginals.iter().filter(|m| m.bimodal).map(|m| &m.name).collect::<Vec<_>>());
        assert_eq!(labels, ["edges", "spin_homophily_x", "n_x_0", "n_x_1", "matched_x"]);
        for m in &rep.marginals {
            assert_eq!(m.histogram.total(), 4000);
        }
        // the spin term is legitimately right-skewed here; the edge count is not
        assert!(rep.marginal("edges").unwrap().skewness.abs() < 0.3);
        let again = degeneracy_report(&labels, &rows, None, 0.6).unwrap();
        for (a, b) in rep.marginals.iter().zip(&again.marginals) {
            assert_eq!(a.histogram, b.histogram);
            assert_eq!(a.bimodal, b.bimodal);
            assert_eq!(a.skewness.to_bits(), b.skewness.to_bits());
        }
    }
}
