use std::fs::File;
use std::path::Path;

use ernm::gof::{degeneracy_scan, gof as gof_report, AuxSpec};
use ernm::inference::{mcmc_mle, parametric_bootstrap, spd_inverse, BootstrapConfig, ExactModel, FitConfig, FitResult};
use ernm::io::{read_network, read_network_files, write_attributes, write_edges};
use ernm::sampler::{sample, ProposalConfig, SamplerConfig};
use ernm::stats::{parse_model_file, write_model_str};
use ernm::synth::{school_network, school_spec, student_labels, SynthConfig};
use ernm::{Error, Model, Network};
use log::info;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::CliError;
use crate::output::{num, strings, RunDir};
use crate::{BootstrapArgs, Common, DegeneracyArgs, EnumerateArgs, FitArgs, GofArgs, ParamArgs, SamplerArgs, SimulateArgs, SynthArgs};

struct Loaded {
    model: Model,
    net: Network,
    labels: Option<Vec<String>>,
}

fn config<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).unwrap_or(serde_json::Value::Null)
}

fn load(run: &mut RunDir, c: &Common, nodes: Option<usize>) -> Result<Loaded, CliError> {
    run.input("model", &c.model)?;
    let spec = parse_model_file(&c.model)?;
    let (mut net, labels) = match (&c.edges, &c.attributes, nodes) {
        (Some(_), _, Some(_)) | (_, Some(_), Some(_)) => {
            return Err(CliError::Usage("--nodes cannot be combined with --edges or --attributes".into()))
        }
        (Some(e), a, None) => {
            run.input("edges", e)?;
            if let Some(a) = a {
                run.input("attributes", a)?;
            }
            let l = read_network_files(e, a.as_deref(), &spec.attributes)?;
            (l.net, Some(l.labels))
        }
        (None, Some(a), None) => {
            run.input("attributes", a)?;
            let f = File::open(a).map_err(|e| CliError::io(a, e))?;
            let l = read_network("tail,head\n".as_bytes(), Some(f), &spec.attributes)?;
            (l.net, Some(l.labels))
        }
        (None, None, Some(n)) => {
            if let Some(v) = spec.attributes.iter().find(|v| !v.random) {
                return Err(CliError::Usage(format!("fixed variable `{}` needs an attribute table", v.name)));
            }
            (Network::new(n, spec.attributes.clone())?, None)
        }
        (None, None, None) => return Err(CliError::Usage("give --edges (with --attributes if needed) or --nodes".into())),
    };
    let model = Model::for_network(spec, &mut net)?;
    Ok(Loaded { model, net, labels })
}

fn observed_required(c: &Common) -> Result<(), CliError> {
    if c.edges.is_none() {
        return Err(CliError::Usage("this command needs the observed network (--edges)".into()));
    }
    Ok(())
}

fn sampler_config(a: &SamplerArgs, seed: u64) -> SamplerConfig {
    SamplerConfig {
        proposal: ProposalConfig { p_dyad: a.p_dyad, p_edge: a.p_edge, sigma: a.sigma },
        burn_in: a.burn_in,
        thin: a.thin,
        chains: a.chains,
        seed,
        keep_every: 0,
    }
}

/// Reads parameters from a `term,estimate` table, matched to the model by label.
fn read_params(run: &mut RunDir, path: &Path, model: &Model) -> Result<Vec<f64>, CliError> {
    run.input("params", path)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(Error::from)?;
    let header = rdr.headers().map_err(Error::from)?.clone();
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Parse { line: 1, msg: format!("parameter file has no `{name}` column") })
    };
    let (t, e) = (col("term")?, col("estimate")?);
    let mut eta = vec![None; model.dim()];
    for rec in rdr.records() {
        let rec = rec.map_err(Error::from)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let k = model
            .labels()
            .iter()
            .position(|l| l == &rec[t])
            .ok_or_else(|| Error::Parse { line, msg: format!("term `{}` is not in the model", &rec[t]) })?;
        let v: f64 = rec[e].parse().map_err(|_| Error::Parse { line, msg: format!("`{}` is not a number", &rec[e]) })?;
        eta[k] = Some(v);
    }
    eta.iter()
        .zip(model.labels())
        .map(|(v, l)| v.ok_or_else(|| CliError::Core(Error::Parse { line: 0, msg: format!("no estimate for term `{l}`") })))
        .collect()
}

fn inline_params(text: &str, model: &Model) -> Result<Vec<f64>, CliError> {
    let eta = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("`{s}` is not a number"))))
        .collect::<Result<Vec<_>, _>>()?;
    if eta.len() != model.dim() {
        return Err(CliError::Usage(format!("--eta has {} values, the model has {} terms", eta.len(), model.dim())));
    }
    Ok(eta)
}

fn params(run: &mut RunDir, p: &ParamArgs, model: &Model) -> Result<Vec<f64>, CliError> {
    match (&p.params, &p.eta) {
        (Some(path), _) => read_params(run, path, model),
        (None, Some(text)) => inline_params(text, model),
        (None, None) => Err(CliError::Usage("give --params or --eta".into())),
    }
}

fn fit_config(a: &FitArgs, model: &Model, run: &mut RunDir) -> Result<FitConfig, CliError> {
    let init = match &a.init {
        Some(p) => Some(read_params(run, p, model)?),
        None => None,
    };
    Ok(FitConfig {
        m: a.m,
        epsilon: a.epsilon,
        max_iters: a.max_iters,
        conv_tol: a.conv_tol,
        conv_pvalue: a.conv_pvalue,
        final_m: a.final_m,
        sampler: sampler_config(&a.sampler, a.common.seed),
        init,
    })
}

fn draws_table(run: &mut RunDir, name: &str, labels: &[String], draws: &[Vec<f64>]) -> Result<(), CliError> {
    let mut header = strings(&["draw"]);
    header.extend(labels.iter().cloned());
    let rows: Vec<Vec<String>> = draws
        .iter()
        .enumerate()
        .map(|(i, d)| std::iter::once(i.to_string()).chain(d.iter().map(|&x| num(x))).collect())
        .collect();
    run.write_table(name, &header, &rows)
}

fn write_network(run: &mut RunDir, stem: &str, net: &Network, labels: Option<&[String]>) -> Result<(), CliError> {
    run.write(&format!("{stem}edges.csv"), |w| Ok(write_edges(w, net, labels)?))?;
    if net.attributes().n_vars() > 0 {
        run.write(&format!("{stem}attributes.csv"), |w| Ok(write_attributes(w, net, labels)?))?;
    }
    Ok(())
}

fn write_fit(run: &mut RunDir, fit: &FitResult) -> Result<(), CliError> {
    let header = strings(&["term", "estimate", "se", "z", "p", "mcse", "observed", "simulated_mean"]);
    let rows: Vec<Vec<String>> = (0..fit.labels.len())
        .map(|k| {
            let mut r = vec![fit.labels[k].clone()];
            r.extend([fit.eta_hat[k], fit.se[k], fit.z[k], fit.p[k], fit.mcse[k], fit.observed[k], fit.simulated_mean[k]].map(num));
            r
        })
        .collect();
    run.write_table("fit.csv", &header, &rows)?;
    let mut header = strings(&["iteration", "hotelling_p", "ess", "gain", "max_step"]);
    header.extend(fit.labels.iter().map(|l| format!("eta_{l}")));
    let rows: Vec<Vec<String>> = fit
        .trace
        .iter()
        .map(|t| {
            let max_step = t.step.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let mut r = vec![t.iteration.to_string(), num(t.hotelling_p), num(t.ess), num(t.gain), num(max_step)];
            r.extend(t.eta.iter().map(|&x| num(x)));
            r
        })
        .collect();
    run.write_table("trace.csv", &header, &rows)?;
    run.write_json("fit.json", fit)
}

fn print_fit(fit: &FitResult) {
    println!("{:<28} {:>12} {:>10} {:>8} {:>8}", "term", "estimate", "se", "z", "p");
    for k in 0..fit.labels.len() {
        println!("{:<28} {:>12.4} {:>10.4} {:>8.2} {:>8.4}", fit.labels[k], fit.eta_hat[k], fit.se[k], fit.z[k], fit.p[k]);
    }
    println!("converged: {} after {} iterations", fit.converged, fit.iterations);
}

fn not_converged(fit: &FitResult) -> CliError {
    CliError::NotConverged(format!("estimation did not converge within {} iterations", fit.iterations))
}

pub fn fit(a: &FitArgs) -> Result<(), CliError> {
    let mut run = RunDir::create(&a.common.out, a.common.force)?;
    observed_required(&a.common)?;
    let l = load(&mut run, &a.common, None)?;
    let cfg = fit_config(a, &l.model, &mut run)?;
    let fit = mcmc_mle(&l.model, &l.net, &cfg)?;
    write_fit(&mut run, &fit)?;
    run.finish("fit", config(a), Some(a.common.seed))?;
    print_fit(&fit);
    if fit.converged {
        Ok(())
    } else {
        Err(not_converged(&fit))
    }
}

#[derive(Serialize)]
struct SampleSummary<'a> {
    labels: &'a [String],
    eta: &'a [f64],
    draws: usize,
    seed: u64,
    burn_in: u64,
    thin: u64,
    chains: usize,
    dyad_acceptance: f64,
    attribute_acceptance: f64,
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let mut run = RunDir::create(&a.common.out, a.common.force)?;
    let l = load(&mut run, &a.common, a.start.nodes)?;
    let eta = params(&mut run, &a.params, &l.model)?;
    let cfg = SamplerConfig { keep_every: a.keep_every, ..sampler_config(&a.sampler, a.common.seed) };
    let out = sample(&l.model, &eta, &[l.net.clone()], a.draws, &cfg)?;
    draws_table(&mut run, "draws.csv", &out.labels, &out.draws)?;
    for (i, net) in out.networks.iter().enumerate() {
        write_network(&mut run, &format!("networks/{:06}_", i * a.keep_every.max(1)), net, l.labels.as_deref())?;
    }
    for (c, net) in out.final_states.iter().enumerate() {
        write_network(&mut run, &format!("final/chain{c}_"), net, l.labels.as_deref())?;
    }
    let summary = SampleSummary {
        labels: &out.labels,
        eta: &eta,
        draws: out.draws.len(),
        seed: out.seed,
        burn_in: out.burn_in,
        thin: out.thin,
        chains: out.chains,
        dyad_acceptance: out.dyad_acceptance(),
        attribute_acceptance: out.attribute_acceptance(),
    };
    run.write_json("simulate.json", &summary)?;
    run.finish("simulate", config(a), Some(a.common.seed))?;
    println!("{} draws written to {}", out.draws.len(), a.common.out.display());
    Ok(())
}

pub fn gof(a: &GofArgs) -> Result<(), CliError> {
    let mut run = RunDir::create(&a.common.out, a.common.force)?;
    observed_required(&a.common)?;
    let l = load(&mut run, &a.common, None)?;
    let eta = params(&mut run, &a.params, &l.model)?;
    let attrs = l.net.attributes();
    let aux = AuxSpec {
        mixing: (0..attrs.n_vars()).filter(|&v| attrs.variable(v).n_levels().is_some()).collect(),
        max_degree: Some(a.max_degree),
    };
    let rep = gof_report(&l.model, &eta, &l.net, a.sims, &aux, &sampler_config(&a.sampler, a.common.seed))?;
    let header = strings(&["statistic", "in_model", "observed", "mean", "mcse", "q025", "q250", "q500", "q750", "q975", "inside"]);
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.name.clone(), r.in_model.to_string(), num(r.observed), num(r.mean), num(r.mcse)];
            row.extend(r.quantiles.iter().map(|&q| num(q)));
            row.push(r.inside.to_string());
            row
        })
        .collect();
    run.write_table("gof.csv", &header, &rows)?;
    run.write_json("gof.json", &rep)?;
    run.finish("gof", config(a), Some(a.common.seed))?;
    let outside: Vec<&str> = rep.rows.iter().filter(|r| !r.inside).map(|r| r.name.as_str()).collect();
    println!("{} statistics, {} outside the 95% envelope{}", rep.rows.len(), outside.len(), if outside.is_empty() { String::new() } else { format!(": {}", outside.join(", ")) });
    Ok(())
}

#[derive(Serialize)]
struct BootstrapSummary<'a> {
    requested: usize,
    dropped: usize,
    boundary: usize,
    warning: &'a Option<String>,
}

pub fn bootstrap(a: &BootstrapArgs) -> Result<(), CliError> {
    let f = &a.fit;
    let mut run = RunDir::create(&f.common.out, f.common.force)?;
    observed_required(&f.common)?;
    let l = load(&mut run, &f.common, None)?;
    let cfg = fit_config(f, &l.model, &mut run)?;
    let fit = mcmc_mle(&l.model, &l.net, &cfg)?;
    write_fit(&mut run, &fit)?;
    if !fit.converged {
        run.finish("bootstrap", config(a), Some(f.common.seed))?;
        return Err(not_converged(&fit));
    }
    info!("fit converged; starting {} bootstrap replicates", a.replicates);
    let bcfg = BootstrapConfig {
        replicates: a.replicates,
        fit: FitConfig {
            m: a.refit_m.unwrap_or(cfg.m),
            epsilon: a.refit_epsilon.unwrap_or(cfg.epsilon),
            sampler: SamplerConfig { thin: a.refit_thin.or(cfg.sampler.thin), ..cfg.sampler.clone() },
            init: None,
            ..cfg.clone()
        },
        thin: a.sim_thin,
        seed: f.common.seed,
    };
    let boot = parametric_bootstrap(&l.model, &fit, &l.net, &bcfg)?;
    let header = strings(&["term", "estimate", "fisher_se", "bootstrap_se", "ratio"]);
    let rows: Vec<Vec<String>> = (0..boot.labels.len())
        .map(|k| {
            let mut r = vec![boot.labels[k].clone()];
            r.extend([fit.eta_hat[k], fit.se[k], boot.se[k], boot.se[k] / fit.se[k]].map(num));
            r
        })
        .collect();
    run.write_table("bootstrap.csv", &header, &rows)?;
    draws_table(&mut run, "bootstrap_estimates.csv", &boot.labels, &boot.estimates)?;
    run.write_json("bootstrap.json", &BootstrapSummary { requested: boot.requested, dropped: boot.dropped, boundary: boot.boundary, warning: &boot.warning })?;
    run.finish("bootstrap", config(a), Some(f.common.seed))?;
    println!("{:<28} {:>12} {:>10} {:>10}", "term", "estimate", "fisher_se", "boot_se");
    for k in 0..boot.labels.len() {
        println!("{:<28} {:>12.4} {:>10.4} {:>10.4}", boot.labels[k], fit.eta_hat[k], fit.se[k], boot.se[k]);
    }
    println!("{} of {} replicates used", boot.estimates.len(), boot.requested);
    Ok(())
}

pub fn degeneracy(a: &DegeneracyArgs) -> Result<(), CliError> {
    let mut run = RunDir::create(&a.common.out, a.common.force)?;
    let l = load(&mut run, &a.common, a.start.nodes)?;
    let eta = params(&mut run, &a.params, &l.model)?;
    let observed = a.common.edges.is_some().then_some(&l.net);
    let cfg = sampler_config(&a.sampler, a.common.seed);
    let (rep, labels, draws) = degeneracy_scan(&l.model, &eta, &l.net, a.draws, &cfg, a.valley_ratio, observed)?;
    let header = strings(&["statistic", "mean", "sd", "skewness", "bimodal", "modes", "observed", "tail_probability"]);
    let rows: Vec<Vec<String>> = rep
        .marginals
        .iter()
        .map(|m| {
            vec![
                m.name.clone(),
                num(m.mean),
                num(m.sd),
                num(m.skewness),
                m.bimodal.to_string(),
                m.modes.iter().map(|&x| num(x)).collect::<Vec<_>>().join(" "),
                m.observed.map_or("NA".into(), num),
                m.tail_probability.map_or("NA".into(), num),
            ]
        })
        .collect();
    run.write_table("marginals.csv", &header, &rows)?;
    let header = strings(&["statistic", "lower", "upper", "count"]);
    let rows: Vec<Vec<String>> = rep
        .marginals
        .iter()
        .flat_map(|m| {
            let h = &m.histogram;
            (0..h.counts.len()).map(move |k| vec![m.name.clone(), num(h.edges[k]), num(h.edges[k + 1]), h.counts[k].to_string()])
        })
        .collect();
    run.write_table("histograms.csv", &header, &rows)?;
    draws_table(&mut run, "draws.csv", &labels, &draws)?;
    run.finish("degeneracy", config(a), Some(a.common.seed))?;
    for m in &rep.marginals {
        println!("{:<28} mean {:>10.3} sd {:>8.3} skew {:>6.2}{}", m.name, m.mean, m.sd, m.skewness, if m.bimodal { "  BIMODAL" } else { "" });
    }
    Ok(())
}

pub fn enumerate(a: &EnumerateArgs) -> Result<(), CliError> {
    let mut run = RunDir::create(&a.common.out, a.common.force)?;
    let l = load(&mut run, &a.common, a.start.nodes)?;
    let exact = ExactModel::enumerate(&l.model, &l.net, a.max_bits)?;
    let eta = match (&a.params, &a.eta) {
        (Some(_), Some(_)) => return Err(CliError::Usage("--params and --eta are mutually exclusive".into())),
        (Some(p), None) => read_params(&mut run, p, &l.model)?,
        (None, Some(t)) => inline_params(t, &l.model)?,
        (None, None) => vec![0.0; l.model.dim()],
    };
    let probs = exact.unique_probs(&eta);
    let mut header: Vec<String> = exact.labels().to_vec();
    header.extend(strings(&["states", "probability"]));
    let rows: Vec<Vec<String>> = exact
        .support()
        .zip(&probs)
        .map(|((s, c), &p)| s.iter().map(|&x| num(x)).chain([c.to_string(), num(p)]).collect())
        .collect();
    run.write_table("distribution.csv", &header, &rows)?;
    let mean = exact.mean(&eta);
    let cov = exact.covariance(&eta);
    let header = strings(&["term", "eta", "mean", "sd"]);
    let rows: Vec<Vec<String>> = (0..exact.dim())
        .map(|k| vec![exact.labels()[k].clone(), num(eta[k]), num(mean[k]), num(cov[(k, k)].max(0.0).sqrt())])
        .collect();
    run.write_table("moments.csv", &header, &rows)?;
    #[derive(Serialize)]
    struct Summary {
        states: usize,
        distinct_statistics: usize,
        log_normalizer: f64,
    }
    run.write_json("enumerate.json", &Summary { states: exact.n_states(), distinct_statistics: probs.len(), log_normalizer: exact.log_normalizer(&eta) })?;
    if a.mle {
        observed_required(&a.common)?;
        let g_obs = l.model.compute(&l.net).0;
        let hat = exact.mle(&g_obs, &vec![0.0; exact.dim()])?;
        let (inv, _) = spd_inverse(&exact.covariance(&hat));
        let header = strings(&["term", "estimate", "se", "observed"]);
        let rows: Vec<Vec<String>> = (0..exact.dim())
            .map(|k| vec![exact.labels()[k].clone(), num(hat[k]), num(se(&inv, k)), num(g_obs[k])])
            .collect();
        run.write_table("mle.csv", &header, &rows)?;
    }
    run.finish("enumerate", config(a), None)?;
    println!("{} states, {} distinct statistic vectors", exact.n_states(), probs.len());
    Ok(())
}

fn se(inv: &DMatrix<f64>, k: usize) -> f64 {
    inv[(k, k)].max(0.0).sqrt()
}

pub fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let mut run = RunDir::create(&a.out, a.force)?;
    let cfg = SynthConfig { n: a.nodes, steps: a.steps, seed: a.seed, ..Default::default() };
    let (model, net) = school_network(&cfg)?;
    let labels = student_labels(a.nodes);
    write_network(&mut run, "", &net, Some(&labels))?;
    run.write("model.toml", |w| Ok(w.write_all(write_model_str(&school_spec()).as_bytes())?))?;
    let rows: Vec<Vec<String>> = model.labels().iter().zip(&cfg.eta).map(|(l, &e)| vec![l.clone(), num(e)]).collect();
    run.write_table("true_params.csv", &strings(&["term", "estimate"]), &rows)?;
    run.finish("synth", config(a), Some(a.seed))?;
    println!("{} nodes, {} ties written to {}", net.n_nodes(), net.n_edges(), a.out.display());
    Ok(())
}
