//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run a subset with `cargo test -p ernm --test acceptance -- 1 3`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ernm::gof::degeneracy_scan;
use ernm::inference::{mcmc_mle, parametric_bootstrap, BootstrapConfig, ExactModel, FitConfig, FitResult};
use ernm::io::read_network_files;
use ernm::sampler::{sample, Chain, ProposalConfig, SamplerConfig};
use ernm::stats::{parse_model_file, ModelSpec, NullMode, TermSpec};
use ernm::summary::{column, mcse, mean};
use ernm::synth::SynthConfig;
use ernm::{AttrValue, Dyad, Model, Network, Variable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn bundled_models() -> Vec<(String, ModelSpec)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(root().join("models"))
        .expect("models directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    paths.sort();
    paths.into_iter().map(|p| (p.file_stem().unwrap().to_string_lossy().into_owned(), parse_model_file(&p).unwrap())).collect()
}

/// Network on `n` nodes for `spec`: fixed covariates alternate over their
/// levels (continuous ones get distinct values), random ones start at 0.
fn template(spec: &ModelSpec, n: usize) -> Network {
    let mut net = Network::new(n, spec.attributes.clone()).unwrap();
    for (v, var) in spec.attributes.iter().enumerate() {
        for i in 0..n {
            let value = match var.n_levels() {
                Some(k) if !var.random => AttrValue::Level((i * 7 + v) % k),
                Some(_) => AttrValue::Level(0),
                None => AttrValue::Real(((i * 37 + 11) % 17) as f64 / 4.0),
            };
            net.assign_attribute(i, v, value).unwrap();
        }
    }
    net
}

// 1. Sampler output against exact enumeration.
fn criterion_1() -> Outcome {
    const DRAWS: usize = 1_000_000;
    let mut worst = 0.0f64;
    let mut used = Vec::new();
    for (name, spec) in bundled_models() {
        let random: Vec<&Variable> = spec.attributes.iter().filter(|v| v.random).collect();
        if random.len() != 1 || random[0].n_levels() != Some(2) {
            continue;
        }
        let n = 3;
        let mut net = template(&spec, n);
        let model = Model::for_network(spec, &mut net).unwrap();
        let exact = ExactModel::enumerate(&model, &net, 20).unwrap();
        // a fixed, non-trivial parameter vector
        let eta: Vec<f64> = (0..model.dim()).map(|k| 0.6 * ((k as f64) * 1.7 + 0.4).sin()).collect();
        let p = exact.probabilities(&eta);
        let mut chain = Chain::new(&model, &eta, net, ProposalConfig::default(), 101, 0).unwrap();
        chain.run(10 * (n * n) as u64).unwrap();
        let mut hits = vec![0u64; exact.n_states()];
        for _ in 0..DRAWS {
            chain.run((n * n) as u64).unwrap();
            hits[exact.state_of(chain.net())] += 1;
        }
        let tv = 0.5 * hits.iter().zip(&p).map(|(&h, &q)| (h as f64 / DRAWS as f64 - q).abs()).sum::<f64>();
        worst = worst.max(tv);
        used.push(format!("{name} TV={tv:.4}"));
    }
    check(!used.is_empty() && worst < 0.02, format!("n=3, 10^6 draws thinned by n^2: {}", used.join(", ")))
}

fn catalog_spec() -> ModelSpec {
    let vars = vec![
        Variable::categorical("grade", ["9", "10", "11", "12"], true),
        Variable::categorical("x", ["a", "b"], true),
        Variable::categorical("sex", ["F", "M"], false),
        Variable::continuous("gpa", false),
    ];
    let s = |x: &str| x.to_string();
    let terms = vec![
        TermSpec::EdgeCount,
        TermSpec::MeanDegree,
        TermSpec::LogVarDegree,
        TermSpec::InDegreeCount { k: 0 },
        TermSpec::InDegreeCount { k: 2 },
        TermSpec::OutDegreeCount { k: 1 },
        TermSpec::Reciprocity,
        TermSpec::CategoryCount { var: s("grade"), level: s("10") },
        TermSpec::Homophily { var: s("grade"), k: s("9"), l: s("10") },
        TermSpec::Homophily { var: s("sex"), k: s("M"), l: s("M") },
        TermSpec::SpinHomophily { var: s("x") },
        TermSpec::RhomophilyWithin { var: s("grade"), null: NullMode::Exact },
        TermSpec::RhomophilyOffset { var: s("grade"), null: NullMode::Binomial },
        TermSpec::RhomophilyWithin { var: s("x"), null: NullMode::Binomial },
        TermSpec::NodalRegression { outcome: s("x"), covariates: vec![s("sex"), s("gpa")], intercept: true },
    ];
    ModelSpec::new(vars, terms)
}

// 2. Change statistics against full recomputation.
fn criterion_2() -> Outcome {
    const OPS: usize = 10_000;
    let n = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut specs = vec![("catalog".to_string(), catalog_spec())];
    specs.extend(bundled_models());
    let mut worst = 0.0f64;
    for (_, spec) in &specs {
        let mut net = template(spec, n);
        let model = Model::for_network(spec.clone(), &mut net).unwrap();
        for _ in 0..n * n / 3 {
            let d = net.random_dyad(&mut rng);
            net.toggle(d).unwrap();
        }
        let mut g = model.compute(&net).0;
        for _ in 0..OPS {
            let random = model.random_vars();
            let delta = if random.is_empty() || rng.random_bool(0.5) {
                let d = Dyad::new(rng.random_range(0..n), rng.random_range(0..n - 1));
                let d = if d.head >= d.tail { Dyad::new(d.tail, d.head + 1) } else { d };
                let c = model.change_stats_dyad(&net, d).unwrap();
                net.toggle(d).unwrap();
                c
            } else {
                let v = random[rng.random_range(0..random.len())];
                let node = rng.random_range(0..n);
                let value = match net.attributes().variable(v).n_levels() {
                    Some(k) => AttrValue::Level(rng.random_range(0..k)),
                    None => AttrValue::Real(rng.random_range(-2.0..2.0)),
                };
                let c = model.change_stats_attr(&net, node, v, value).unwrap();
                net.set_attribute(node, v, value).unwrap();
                c
            };
            let fresh = model.compute(&net).0;
            for k in 0..g.len() {
                worst = worst.max((g[k] + delta.0[k] - fresh[k]).abs());
            }
            g = fresh;
        }
    }
    check(worst <= 1e-10, format!("{} models x {OPS} changes on n={n}; max deviation {worst:.2e}", specs.len()))
}

// 3. Degeneracy of the joint Ising model.
fn criterion_3() -> Outcome {
    let spec = parse_model_file(root().join("models/ising.toml")).unwrap();
    let mut net = template(&spec, 20);
    let model = Model::for_network(spec, &mut net).unwrap();
    let cfg = SamplerConfig { seed: 3, ..Default::default() };
    let (rep, labels, draws) = degeneracy_scan(&model, &[0.0, 0.13], &net, 100_000, &cfg, 0.6, None).unwrap();
    let matched = rep.marginal("matched_x").unwrap().mean;
    let n1 = rep.marginal("n_x_1").unwrap();
    let col = column(&draws, labels.iter().position(|l| l == "n_x_1").unwrap());
    let mut freq = [0usize; 21];
    for x in col {
        freq[x as usize] += 1;
    }
    let below = *freq[..10].iter().max().unwrap();
    let above = *freq[11..].iter().max().unwrap();
    let ok = (matched - 0.76).abs() <= 0.03 && n1.bimodal && freq[10] < below && freq[10] < above;
    check(
        ok,
        format!(
            "matched fraction {matched:.3}; n_x_1 bimodal={} with modes {:?}; freq(10)={} vs peaks {below}/{above}",
            n1.bimodal, n1.modes, freq[10]
        ),
    )
}

fn quick_fit(seed: u64) -> FitConfig {
    FitConfig { sampler: SamplerConfig { seed, chains: 2, ..Default::default() }, ..Default::default() }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

// 4. MLE correctness against closed forms and enumeration.
fn criterion_4() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;

    // (a) 10 of 20 dyads
    let mut net = Network::empty(5);
    for (i, j) in [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2), (1, 3), (2, 4), (3, 0), (4, 1)] {
        net.toggle(Dyad::new(i, j)).unwrap();
    }
    let m = Model::for_network(ModelSpec::new(vec![], vec![TermSpec::EdgeCount]), &mut net).unwrap();
    let fit = mcmc_mle(&m, &net, &FitConfig { init: Some(vec![0.8]), ..quick_fit(41) }).unwrap();
    ok &= fit.converged && fit.eta_hat[0].abs() <= 0.05;
    parts.push(format!("(a) eta={:.4}", fit.eta_hat[0]));

    // (b) ties and a binary attribute with no joint term: two independent logits
    let spec = ModelSpec::new(
        vec![Variable::categorical("x", ["0", "1"], true)],
        vec![TermSpec::EdgeCount, TermSpec::CategoryCount { var: "x".into(), level: "1".into() }],
    );
    let mut net = Network::new(10, spec.attributes.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    while net.n_edges() < 30 {
        let d = net.random_dyad(&mut rng);
        if !net.has_edge(d.tail, d.head) {
            net.toggle(d).unwrap();
        }
    }
    for i in [1, 4, 7] {
        net.assign_attribute(i, 0, AttrValue::Level(1)).unwrap();
    }
    let m = Model::for_network(spec, &mut net).unwrap();
    let fit = mcmc_mle(&m, &net, &quick_fit(43)).unwrap();
    let truth = [logit(30.0 / 90.0), logit(0.3)];
    let z: Vec<f64> = (0..2).map(|k| (fit.eta_hat[k] - truth[k]) / fit.se[k]).collect();
    ok &= fit.converged && z.iter().all(|z| z.abs() <= 3.0);
    parts.push(format!("(b) eta={:.3?} closed form={:.3?} z={:.2?}", fit.eta_hat, truth, z));

    // (c) joint Ising on four nodes against the enumerated likelihood
    let spec = parse_model_file(root().join("models/ising.toml")).unwrap();
    let mut net = template(&spec, 4);
    for (i, j) in [(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 1), (0, 3), (0, 2)] {
        net.toggle(Dyad::new(i, j)).unwrap();
    }
    for i in [0, 1, 2] {
        net.assign_attribute(i, 0, AttrValue::Level(1)).unwrap();
    }
    let m = Model::for_network(spec, &mut net).unwrap();
    let exact = ExactModel::enumerate(&m, &net, 20).unwrap();
    let g_obs = m.compute(&net).0;
    let hat = exact.mle(&g_obs, &[0.0, 0.0]).unwrap();
    let fit = mcmc_mle(&m, &net, &FitConfig { m: 5000, ..quick_fit(44) }).unwrap();
    let z: Vec<f64> = (0..2).map(|k| (fit.eta_hat[k] - hat[k]) / fit.mcse[k]).collect();
    ok &= fit.converged && z.iter().all(|z| z.abs() <= 3.0);
    parts.push(format!("(c) mcmc={:.4?} exact={:.4?} mcse={:.4?} z={:.2?}", fit.eta_hat, hat, fit.mcse, z));
    check(ok, parts.join("; "))
}

struct School {
    model: Model,
    net: Network,
    fit: FitResult,
}

fn school_fit() -> School {
    let spec = parse_model_file(root().join("models/school.toml")).unwrap();
    let dir = root().join("data/school");
    let loaded = read_network_files(&dir.join("edges.csv"), Some(&dir.join("attributes.csv")), &spec.attributes).unwrap();
    let mut net = loaded.net;
    assert_eq!(net.n_nodes(), SynthConfig::default().n);
    let model = Model::for_network(spec, &mut net).unwrap();
    let n2 = (net.n_nodes() * net.n_nodes()) as u64;
    // a long final sample keeps the Monte Carlo error of the estimate well
    // below that of the independent check sample
    let cfg = FitConfig {
        final_m: Some(50_000),
        sampler: SamplerConfig { seed: 55, chains: 4, ..Default::default() },
        ..Default::default()
    };
    let fit = mcmc_mle(&model, &net, &cfg).unwrap();
    assert!(n2 > 0);
    School { model, net, fit }
}

// 5. Simulated means at the estimate centre on the observed statistics.
fn criterion_5(s: &School) -> Outcome {
    let cfg = SamplerConfig { seed: 56, chains: 4, ..Default::default() };
    let run = sample(&s.model, &s.fit.eta_hat, &s.fit.final_states, 10_000, &cfg).unwrap();
    let mut worst = 0.0f64;
    let mut worst_term = String::new();
    for (k, label) in s.model.labels().iter().enumerate() {
        let x = column(&run.draws, k);
        let z = (mean(&x) - s.fit.observed[k]) / mcse(&x);
        if z.abs() > worst {
            worst = z.abs();
            worst_term = label.clone();
        }
    }
    check(
        s.fit.converged && worst <= 3.0,
        format!("converged={} in {} iterations; largest |mean - observed| = {worst:.2} MCSE ({worst_term})", s.fit.converged, s.fit.iterations),
    )
}

// 6. Fisher and parametric-bootstrap standard errors.
fn criterion_6(s: &School) -> Outcome {
    let n2 = (s.net.n_nodes() * s.net.n_nodes()) as u64;
    let cfg = BootstrapConfig {
        replicates: 200,
        seed: 66,
        thin: Some(n2),
        fit: FitConfig {
            m: 1000,
            epsilon: 5.0,
            max_iters: 20,
            final_m: Some(2000),
            sampler: SamplerConfig { thin: Some(n2 / 4), ..Default::default() },
            ..Default::default()
        },
    };
    let boot = parametric_bootstrap(&s.model, &s.fit, &s.net, &cfg).unwrap();
    let ratios: Vec<f64> = boot.se.iter().zip(&s.fit.se).map(|(b, f)| b / f).collect();
    let ok = ratios.iter().all(|r| (r - 1.0).abs() <= 0.3);
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    check(ok, format!("B=200 ({} dropped, {} without an MLE); bootstrap/Fisher SE ratios in [{lo:.2}, {hi:.2}]", boot.dropped, boot.boundary))
}

/// Network with a fixed binary sex, a logistic binary outcome and Bernoulli ties.
fn logistic_data(spec: &ModelSpec, n: usize, beta: [f64; 2], density: f64, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::new(n, spec.attributes.clone()).unwrap();
    let (use_, sex) = (0, 1);
    for i in 0..n {
        let male = rng.random_bool(0.5) as usize;
        net.assign_attribute(i, sex, AttrValue::Level(male)).unwrap();
        let p = 1.0 / (1.0 + (-(beta[0] + beta[1] * male as f64)).exp());
        net.assign_attribute(i, use_, AttrValue::Level(rng.random_bool(p) as usize)).unwrap();
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(density) {
                net.toggle(Dyad::new(i, j)).unwrap();
            }
        }
    }
    net
}

/// Exact conditional log-odds of outcome level 1 against level 0 at `node`.
fn conditional_log_odds(model: &Model, net: &Network, eta: &[f64], node: usize, outcome: usize) -> f64 {
    let sign = if net.attributes().level(node, outcome) == 0 { 1.0 } else { -1.0 };
    let target = if sign > 0.0 { 1 } else { 0 };
    let delta = model.change_stats_attr(net, node, outcome, AttrValue::Level(target)).unwrap();
    sign * delta.0.iter().zip(eta).map(|(d, e)| d * e).sum::<f64>()
}

// 7. Covariate flips shift the conditional log-odds by beta . (x - x*).
fn criterion_7() -> Outcome {
    let spec = parse_model_file(root().join("models/logistic.toml")).unwrap();
    let mut net = logistic_data(&spec, 30, [-1.0, 1.0], 0.08, 7);
    let model = Model::for_network(spec, &mut net).unwrap();
    let fit = mcmc_mle(&model, &net, &FitConfig { m: 1000, ..quick_fit(77) }).unwrap();
    let eta = &fit.eta_hat;
    let beta_sex = eta[model.labels().iter().position(|l| l.ends_with("_sex_M")).expect("sex coefficient")];
    let (use_, sex) = (0, 1);
    let mut worst = 0.0f64;
    for i in 0..net.n_nodes() {
        let before = conditional_log_odds(&model, &net, eta, i, use_);
        let x = net.attributes().level(i, sex);
        let mut flipped = net.clone();
        flipped.assign_attribute(i, sex, AttrValue::Level(1 - x)).unwrap();
        let after = conditional_log_odds(&model, &flipped, eta, i, use_);
        let expected = beta_sex * (x as f64 - (1 - x) as f64);
        worst = worst.max((before - after - expected).abs());
    }
    check(worst <= 1e-10, format!("beta_sex={beta_sex:.4} (fit converged={}); max deviation over 30 nodes {worst:.2e}", fit.converged))
}

/// Logistic regression by Newton-Raphson; returns estimates and standard errors.
fn logistic_oracle(x: &[[f64; 2]], y: &[f64]) -> ([f64; 2], [f64; 2]) {
    let mut b = [0.0; 2];
    let mut info = [[0.0; 2]; 2];
    for _ in 0..100 {
        let mut grad = [0.0; 2];
        info = [[0.0; 2]; 2];
        for (xi, &yi) in x.iter().zip(y) {
            let p = 1.0 / (1.0 + (-(b[0] * xi[0] + b[1] * xi[1])).exp());
            for r in 0..2 {
                grad[r] += (yi - p) * xi[r];
                for c in 0..2 {
                    info[r][c] += p * (1.0 - p) * xi[r] * xi[c];
                }
            }
        }
        let det = info[0][0] * info[1][1] - info[0][1] * info[1][0];
        let step = [(info[1][1] * grad[0] - info[0][1] * grad[1]) / det, (info[0][0] * grad[1] - info[1][0] * grad[0]) / det];
        b = [b[0] + step[0], b[1] + step[1]];
        if step[0].abs().max(step[1].abs()) < 1e-12 {
            break;
        }
    }
    let det = info[0][0] * info[1][1] - info[0][1] * info[1][0];
    (b, [(info[1][1] / det).sqrt(), (info[0][0] / det).sqrt()])
}

// 8. Without joint terms the regression matches ordinary logistic regression.
fn criterion_8() -> Outcome {
    let spec = parse_model_file(root().join("models/separable.toml")).unwrap();
    let n = 60;
    let mut net = logistic_data(&spec, n, [-1.0, 1.2], 0.05, 8);
    let model = Model::for_network(spec, &mut net).unwrap();
    let cfg = FitConfig { m: 1000, sampler: SamplerConfig { seed: 88, chains: 2, thin: Some((n * n / 4) as u64), ..Default::default() }, ..Default::default() };
    let fit = mcmc_mle(&model, &net, &cfg).unwrap();
    let x: Vec<[f64; 2]> = (0..n).map(|i| [1.0, net.attributes().level(i, 1) as f64]).collect();
    let y: Vec<f64> = (0..n).map(|i| net.attributes().level(i, 0) as f64).collect();
    let (b, se) = logistic_oracle(&x, &y);
    let idx: HashMap<&str, usize> = model.labels().iter().enumerate().map(|(k, l)| (l.as_str(), k)).collect();
    let k0 = *idx.iter().find(|(l, _)| l.ends_with("intercept")).expect("intercept").1;
    let k1 = *idx.iter().find(|(l, _)| l.ends_with("_sex_M")).expect("sex coefficient").1;
    let z = [(fit.eta_hat[k0] - b[0]) / se[0], (fit.eta_hat[k1] - b[1]) / se[1]];
    check(
        fit.converged && z.iter().all(|z| z.abs() <= 3.0),
        format!("ernm ({:.3}, {:.3}) vs logistic ({:.3}, {:.3}); z = ({:.2}, {:.2})", fit.eta_hat[k0], fit.eta_hat[k1], b[0], b[1], z[0], z[1]),
    )
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |k: usize| wanted.is_empty() || wanted.contains(&k);
    let mut failed = 0;
    let mut report = |k: usize, started: Instant, out: Outcome| {
        let secs = started.elapsed().as_secs_f64();
        match out {
            Ok(d) => println!("criterion {k}: PASS ({secs:.1}s) {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {k}: FAIL ({secs:.1}s) {d}");
            }
        }
    };
    let singles: [(usize, fn() -> Outcome); 4] = [(1, criterion_1), (2, criterion_2), (3, criterion_3), (4, criterion_4)];
    for (k, f) in singles {
        if run(k) {
            let t = Instant::now();
            report(k, t, f());
        }
    }
    if run(5) || run(6) {
        let t = Instant::now();
        let school = school_fit();
        println!("school fit: {:.1}s", t.elapsed().as_secs_f64());
        if run(5) {
            let t = Instant::now();
            report(5, t, criterion_5(&school));
        }
        if run(6) {
            let t = Instant::now();
            report(6, t, criterion_6(&school));
        }
    }
    for (k, f) in [(7, criterion_7 as fn() -> Outcome), (8, criterion_8)] {
        if run(k) {
            let t = Instant::now();
            report(k, t, f());
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
