//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion that ran failed.
//!
//! Criteria 4 to 7 train full simulation studies and take hours on one core.
//! They run only when `STONET_ACCEPTANCE` is `full` or a comma-separated
//! list of criterion numbers (`STONET_ACCEPTANCE=5,6`); otherwise they print
//! SKIP.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stonet_core::estimate::{aipw_ate, aipw_from_predictions, predict, selected_covariates, Predictions};
use stonet_core::net::{
    Activation, LatentState, NetworkConfig, NetworkParameters, OutputKind, Sample, StoNet, TreatmentSlot,
};
use stonet_core::presets::{ar2_recipe, varying_size_recipe, Recipe};
use stonet_core::prior::PriorHyperparameters;
use stonet_core::simlab::{gen_ar2_missing, gen_linear_gaussian, gen_varying_size, Scenario, Splits};
use stonet_core::trainer::{chain_neighborhood, sghmc_sweep, train, CovariateModel, ImputeRates, TrainingSchedule};
use stonet_core::Data;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

// ---------------------------------------------------------------- gradients

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-8);
    num / den
}

fn gradient_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let act = if seed % 2 == 0 { Activation::Tanh } else { Activation::Relu };
    let with_slot = (seed / 2) % 2 == 0;
    let p = rng.random_range(2..6);
    let widths = vec![p, rng.random_range(2..5), rng.random_range(2..5), 1];
    let slot = with_slot.then(|| TreatmentSlot { layer: 1 + (seed as usize / 4) % 2, position: 1 });
    let mut cfg = NetworkConfig::new(
        widths,
        slot,
        vec![rng.random_range(0.05..1.0), rng.random_range(0.05..1.0), rng.random_range(0.05..1.0)],
        act,
        OutputKind::Continuous,
    )
    .unwrap();
    if with_slot {
        cfg.treatment_temperature = rng.random_range(0.5..2.0);
        cfg.treatment_weight = rng.random_range(0.5..50.0);
    }
    let mut params = NetworkParameters::zeros(&cfg);
    for (_, v) in params.entries_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    let missing: Vec<usize> = if seed % 3 == 0 { vec![0] } else { Vec::new() };
    let mut x: Vec<f64> = (0..p).map(|_| rng.random_range(-1.5..1.5)).collect();
    for &j in &missing {
        x[j] = f64::NAN;
    }
    let a = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
    let y = vec![rng.random_range(-2.0..2.0)];
    let mut lat = LatentState::zeros(&cfg, missing.len());
    for v in lat.hidden.iter_mut().flatten() {
        // keep ReLU inputs away from the kink
        let m: f64 = rng.random_range(0.1..1.5);
        *v = if rng.random_bool(0.5) { m } else { -m };
    }
    for v in &mut lat.x_mis {
        *v = rng.random_range(-1.0..1.0);
    }
    if let Some(s) = cfg.treatment {
        lat.hidden[s.layer - 1][s.position] = a;
    }
    let sample = Sample { x: &x, treatment: a, y: &y, missing: &missing };
    let step = 1e-5;
    let loglik = |params: &NetworkParameters<f64>, lat: &LatentState<f64>| {
        StoNet::new(&cfg, params, None).unwrap().complete_data_log_likelihood(&sample, lat).unwrap()
    };
    let central = |f: &dyn Fn(f64) -> f64| (f(step) - f(-step)) / (2.0 * step);

    let net = StoNet::new(&cfg, &params, None).unwrap();
    let g = net.grad_latents(&sample, &lat).unwrap();
    let mut got: Vec<f64> = g.hidden.iter().flatten().copied().chain(g.x_mis.iter().copied()).collect();
    let mut fd = Vec::new();
    for (layer, y) in lat.hidden.iter().enumerate() {
        for j in 0..y.len() {
            if cfg.treatment_in(layer + 1) == Some(j) {
                fd.push(0.0);
                continue;
            }
            fd.push(central(&|d| {
                let mut l = lat.clone();
                l.hidden[layer][j] += d;
                loglik(&params, &l)
            }));
        }
    }
    for j in 0..lat.x_mis.len() {
        fd.push(central(&|d| {
            let mut l = lat.clone();
            l.x_mis[j] += d;
            loglik(&params, &l)
        }));
    }
    let mut worst = rel_err(&got, &fd);

    got = net.grad_params(&sample, &lat).unwrap().entries().map(|e| e.1).collect();
    fd = (0..params.num_params())
        .map(|idx| {
            central(&|d| {
                let mut q = params.clone();
                *q.entries_mut().nth(idx).unwrap().1 += d;
                loglik(&q, &lat)
            })
        })
        .collect();
    worst = worst.max(rel_err(&got, &fd));

    let hyper = PriorHyperparameters::new(rng.random_range(0.01..0.5), rng.random_range(0.01..0.1), rng.random_range(0.5..2.0))
        .unwrap();
    got = hyper.grad_log_prior(&params).unwrap().entries().map(|e| e.1).collect();
    fd = (0..params.num_params())
        .map(|idx| {
            central(&|d| {
                let mut q = params.clone();
                *q.entries_mut().nth(idx).unwrap().1 += d;
                hyper.log_prior(&q).unwrap()
            })
        })
        .collect();
    worst.max(rel_err(&got, &fd))
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let worst = (0..20).map(gradient_instance).fold(0.0, f64::max);
    let el = t.elapsed();
    outcome(
        worst < 1e-5 && within(el, 10.0),
        format!("20 instances, worst relative error {worst:.2e}, {:.2}s", el.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- sampler

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let cfg = NetworkConfig::new(vec![1, 1, 1], None, vec![1.0, 0.5], Activation::Identity, OutputKind::Continuous)
        .unwrap();
    let mut params = NetworkParameters::zeros(&cfg);
    params.layers[0].weights.set(0, 0, 0.8);
    params.layers[0].bias[0] = 0.2;
    params.layers[1].weights.set(0, 0, 1.0);
    params.layers[1].bias[0] = -0.3;
    let net = StoNet::new(&cfg, &params, None).unwrap();
    let (x, y) = ([1.5], [2.0]);
    // Y1 | x, y is Gaussian: prior N(0.8x + 0.2, 1), observation y ~ N(Y1 - 0.3, 0.5).
    let precision = 1.0 + 1.0 / 0.5;
    let mean = ((0.8 * 1.5 + 0.2) + (2.0 + 0.3) / 0.5) / precision;
    let var = 1.0 / precision;
    let sample = Sample::complete(&x, 0.0, &y);
    let rates = ImputeRates { hidden: vec![0.1], missing: 0.0, eta: 2.8 };
    let (chains, sweeps, burn) = (64u64, 5000, 500);
    let mut chain_means = Vec::new();
    let (mut sq, mut count) = (0.0, 0.0);
    for c in 0..chains {
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + c);
        let mut lat = net.init_latents(&sample, vec![]).unwrap();
        let mut sum = 0.0;
        for s in 0..sweeps {
            sghmc_sweep(&net, &sample, &mut lat, &rates, None, &mut rng).unwrap();
            if s >= burn {
                let v = lat.hidden[0][0];
                sum += v;
                sq += (v - mean) * (v - mean);
                count += 1.0;
            }
        }
        chain_means.push(sum / (sweeps - burn) as f64);
    }
    let grand = chain_means.iter().sum::<f64>() / chains as f64;
    let spread = chain_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (chains - 1) as f64;
    let se = (spread / chains as f64).sqrt();
    let got_var = sq / count;
    let el = t.elapsed();
    let pass = (grand - mean).abs() < 3.0 * se && (got_var / var - 1.0).abs() < 0.1 && within(el, 30.0);
    outcome(
        pass,
        format!(
            "mean {grand:.5} vs {mean:.5} (3 se = {:.5}), variance {got_var:.5} vs {var:.5}, {:.1}s",
            3.0 * se,
            el.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- AIPW

fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>, Predictions<f64>) {
    let mut preds = Predictions { propensity: Vec::new(), mu0: Vec::new(), mu1: Vec::new() };
    let (mut a, mut y) = (Vec::new(), Vec::new());
    for _ in 0..n {
        preds.propensity.push(rng.random_range(0.05..0.95));
        preds.mu0.push(rng.random_range(-3.0..3.0));
        preds.mu1.push(rng.random_range(-3.0..3.0));
        a.push(if rng.random_bool(0.5) { 1.0 } else { 0.0 });
        y.push(rng.random_range(-4.0..4.0));
    }
    (a, y, preds)
}

// AIPW written as inverse weighting plus an augmentation term.
fn aipw_oracle(a: &[f64], y: &[f64], preds: &Predictions<f64>) -> f64 {
    let n = a.len() as f64;
    let mut total = 0.0;
    for i in 0..a.len() {
        let (p, m0, m1) = (preds.propensity[i], preds.mu0[i], preds.mu1[i]);
        let ipw = a[i] * y[i] / p - (1.0 - a[i]) * y[i] / (1.0 - p);
        let aug = (a[i] - p) / p * m1 + (a[i] - p) / (1.0 - p) * m0;
        total += ipw - aug;
    }
    total / n
}

fn criterion_3() -> Outcome {
    let mut worst_identity: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(30_000 + seed);
        let n = rng.random_range(5..400);
        let (a, mut y, preds) = random_problem(&mut rng, n);
        let est = aipw_from_predictions(&a, &y, &preds, 0.05).unwrap();
        worst_oracle = worst_oracle.max((est.tau_hat - aipw_oracle(&a, &y, &preds)).abs());
        for i in 0..n {
            y[i] = if a[i] == 1.0 { preds.mu1[i] } else { preds.mu0[i] };
        }
        let est = aipw_from_predictions(&a, &y, &preds, 0.05).unwrap();
        let plug_in = preds.mu1.iter().zip(&preds.mu0).map(|(m1, m0)| m1 - m0).sum::<f64>() / n as f64;
        worst_identity = worst_identity.max((est.tau_hat - plug_in).abs());
    }
    outcome(
        worst_identity < 1e-12 && worst_oracle < 1e-12,
        format!("100 datasets, identity error {worst_identity:.1e}, oracle error {worst_oracle:.1e}"),
    )
}

// ---------------------------------------------------------------- coverage

fn coverage_recipe() -> Recipe {
    let mut config = NetworkConfig::new(
        vec![10, 4, 3, 1],
        Some(TreatmentSlot { layer: 2, position: 0 }),
        vec![1e-2, 1e-3, 1e-4],
        Activation::Tanh,
        OutputKind::Continuous,
    )
    .unwrap();
    config.treatment_weight = 30.0;
    let mut schedule = TrainingSchedule::for_network(&config);
    schedule.epochs_pretrain = 0;
    schedule.epochs_train = 800;
    schedule.epochs_refine = 200;
    for g in schedule.param_lr.iter_mut().chain(schedule.param_lr_refine.iter_mut()) {
        *g *= 8.0;
    }
    Recipe { config, hyper: PriorHyperparameters::new(0.9, 1e-4, 1.0).unwrap(), schedule }
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let mut recipe = coverage_recipe();
    let (reps, tau) = (200u64, 1.0);
    let mut hits = 0;
    let mut errors = Vec::new();
    for r in 0..reps {
        let ds = gen_linear_gaussian(500, 10, 40_000 + r).unwrap();
        recipe.schedule.seed = r;
        let fitted = train(&ds, &recipe.config, &recipe.hyper, &recipe.schedule, None).unwrap();
        let est = aipw_ate(&fitted, &ds, 0.01, 0.05).unwrap();
        if est.ci.0 <= tau && tau <= est.ci.1 {
            hits += 1;
        }
        errors.push(est.tau_hat - tau);
    }
    let el = t.elapsed();
    let coverage = hits as f64 / reps as f64;
    let bias = errors.iter().sum::<f64>() / reps as f64;
    outcome(
        (0.90..=0.99).contains(&coverage) && within(el, 20.0 * 60.0),
        format!("coverage {coverage:.3} over {reps} replications, mean error {bias:+.4}, {:.0}s", el.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- simulation studies

struct SeedResult {
    exact_treatment: bool,
    exact_outcome: bool,
    abs_error: f64,
}

/// `|mean τ̂(x) − mean τ(x)|` over the test split.
fn test_ate_error(fitted: &stonet_core::Model, test: &Data) -> f64 {
    let preds = predict(fitted, test, 0.01).unwrap();
    let truth = test.truth.as_ref().unwrap();
    let n = test.len() as f64;
    (preds.cate().iter().sum::<f64>() / n - truth.cate.iter().sum::<f64>() / n).abs()
}

/// Independent runs per dataset, lowest BIC kept. Ten would exceed the time limits.
const AR2_RUNS: usize = 5;

fn run_ar2(seed: u64, scenario: Scenario) -> SeedResult {
    let Splits { train: data, test, .. } = gen_ar2_missing(10_000, 1_000, 1_000, seed, scenario).unwrap();
    let mut recipe = ar2_recipe(data.num_covariates(), 32).unwrap();
    recipe.schedule.seed = seed;
    recipe.schedule.num_runs = AR2_RUNS;
    let cov = data
        .has_missing()
        .then(|| CovariateModel::with_neighborhood(&data, &chain_neighborhood(data.num_covariates(), 2)).unwrap());
    let fitted = train(&data, &recipe.config, &recipe.hyper, &recipe.schedule, cov.as_ref()).unwrap();
    let sel = selected_covariates(&fitted);
    let truth = test.truth.as_ref().unwrap();
    SeedResult {
        exact_treatment: sel.treatment_model_covariates == truth.treatment_covariates,
        exact_outcome: sel.outcome_model_covariates == truth.outcome_covariates,
        abs_error: test_ate_error(&fitted, &test),
    }
}

fn ar2_study(scenario: Scenario, mae_bound: f64, exact_needed: usize, limit_s: f64) -> Outcome {
    let t = Instant::now();
    let results: Vec<SeedResult> = (1..=5).map(|s| run_ar2(s, scenario)).collect();
    let el = t.elapsed();
    let exact = results.iter().filter(|r| r.exact_treatment && r.exact_outcome).count();
    let mae = results.iter().map(|r| r.abs_error).sum::<f64>() / results.len() as f64;
    let per_seed: Vec<String> = results
        .iter()
        .map(|r| format!("{}{}:{:.3}", flag(r.exact_treatment), flag(r.exact_outcome), r.abs_error))
        .collect();
    outcome(
        exact >= exact_needed && mae <= mae_bound && within(el, limit_s),
        format!(
            "exact selection in {exact}/5 seeds, MAE {mae:.4}, {:.0}s [{}]",
            el.as_secs_f64(),
            per_seed.join(" ")
        ),
    )
}

fn flag(b: bool) -> char {
    if b {
        'Y'
    } else {
        'n'
    }
}

fn criterion_5() -> Outcome {
    ar2_study(Scenario::Complete, 0.05, 4, 2.0 * 3600.0)
}

fn criterion_6() -> Outcome {
    ar2_study(Scenario::Mar, 0.20, 3, 3.0 * 3600.0)
}

/// Mini-batches per epoch for the p = 1000 design. A fixed count keeps the
/// per-epoch parameter drift independent of n; at B = 32 the published rates
/// leave the fit far from converged after 200 epochs.
const VARYING_SIZE_STEPS: usize = 400;

fn criterion_7() -> Outcome {
    let t = Instant::now();
    let mut medians = Vec::new();
    for n in [800, 1600, 3200] {
        let mut errs: Vec<f64> = (1..=3u64)
            .map(|seed| {
                let Splits { train: data, test, .. } = gen_varying_size(n, 500, 1000, seed).unwrap();
                let mut recipe = varying_size_recipe(data.num_covariates(), (n / VARYING_SIZE_STEPS).max(1)).unwrap();
                recipe.schedule.seed = seed;
                let fitted = train(&data, &recipe.config, &recipe.hyper, &recipe.schedule, None).unwrap();
                test_ate_error(&fitted, &test)
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        medians.push((n, errs[1]));
    }
    let el = t.elapsed();
    let monotone = medians.windows(2).all(|w| w[1].1 <= w[0].1);
    let shown: Vec<String> = medians.iter().map(|(n, m)| format!("n={n}: {m:.4}")).collect();
    outcome(
        monotone && within(el, 4.0 * 3600.0),
        format!("median MAE {}, {:.0}s", shown.join(", "), el.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- mask

fn log_normal(x: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - x * x / (2.0 * var)
}

fn criterion_8() -> Outcome {
    let t = Instant::now();
    let settings: [(f64, f64, f64); 10] = [
        (1e-6, 3e-3, 0.3),
        (1e-6, 1e-5, 1e-2),
        (1e-7, 1e-5, 1e-2),
        (0.5, 1e-2, 1.0),
        (0.1, 1e-4, 1.0),
        (0.9, 1e-3, 0.1),
        (1e-3, 1e-6, 1e-1),
        (0.3, 0.05, 0.5),
        (1e-4, 2e-3, 5.0),
        (0.01, 1e-8, 1e-3),
    ];
    let cfg = NetworkConfig::new(vec![499, 200, 1], None, vec![1.0, 1.0], Activation::Tanh, OutputKind::Continuous)
        .unwrap();
    let mut disagreements = 0usize;
    let mut total = 0usize;
    for (k, &(lambda, s0, s1)) in settings.iter().enumerate() {
        let hyper = PriorHyperparameters::new(lambda, s0, s1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(80 + k as u64);
        // scale draws to the region where the two components cross
        let scale = 4.0 * s1.sqrt();
        let mut params = NetworkParameters::zeros(&cfg);
        for (_, v) in params.entries_mut() {
            *v = rng.random_range(-1.0..1.0) * scale * rng.random::<f64>().powi(3);
        }
        let mask = hyper.build_mask(&params).unwrap();
        for ((_, theta), keep) in params.entries().zip(mask.entries()) {
            let slab = lambda.ln() + log_normal(theta, s1);
            let spike = (1.0 - lambda).ln() + log_normal(theta, s0);
            if (slab > spike) != keep {
                disagreements += 1;
            }
            total += 1;
        }
    }
    let el = t.elapsed();
    outcome(
        disagreements == 0 && total >= 100_000 && within(el, 5.0),
        format!(
            "{disagreements} disagreements over {} values per setting, 10 settings, {:.2}s",
            total / settings.len(),
            el.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- determinism

fn stonet(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_stonet"))
        .args(args)
        .env_remove(stonet_cli::THREADS_ENV)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn train_checkpoint(dir: &Path, config: &Path, threads: &str, tag: &str) -> Option<Vec<u8>> {
    let out = dir.join(tag);
    let ok = stonet(&["train", "--config", config.to_str()?, "--threads", threads, "--out", out.to_str()?]);
    ok.then(|| std::fs::read(out.join(stonet_cli::commands::CHECKPOINT_FILE)).ok()).flatten()
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = d.join("sim.toml");
    std::fs::write(
        &sim,
        format!(
            "generator = \"linear_gaussian\"\nnum_covariates = 10\nn_train = 400\nn_test = 50\nseed = 9\nout_dir = \"{}\"\n",
            d.display()
        ),
    )
    .unwrap();
    if !stonet(&["simulate", "--config", sim.to_str().unwrap()]) {
        return outcome(false, "simulate failed".into());
    }
    let train_cfg = d.join("train.toml");
    std::fs::write(
        &train_cfg,
        format!(
            r#"seed = 21
out_dir = "{0}"
train_data = "{0}/train.csv"
layer_widths = [10, 6, 4, 1]
treatment_layer = 2
treatment_position = 1
noise_variances = [1e-2, 1e-3, 1e-4]
activation = "tanh"
lambda = 0.1
sigma0_sq = 1e-4
sigma1_sq = 1.0
epochs_pretrain = 3
epochs_train = 6
epochs_refine = 3
batch_size = 16
t_mc = 2
eta = 0.1
impute_lr = [0.03, 0.003]
param_lr = [1e-3, 1e-4, 1e-5]
param_lr_refine = [1e-4, 1e-5, 1e-6]
impute_decay = 1.2
param_decay = 1.2
num_runs = 2
tail_length = 3
"#,
            d.display()
        ),
    )
    .unwrap();
    let runs: Vec<Option<Vec<u8>>> = [("1", "a"), ("1", "b"), ("8", "c"), ("8", "d")]
        .iter()
        .map(|(threads, tag)| train_checkpoint(d, &train_cfg, threads, tag))
        .collect();
    if runs.iter().any(Option::is_none) {
        return outcome(false, "a training run failed".into());
    }
    let first = runs[0].as_ref().unwrap();
    let same = runs.iter().all(|r| r.as_ref() == Some(first));
    outcome(
        same,
        format!("4 checkpoints ({} bytes) at --threads 1 and 8, identical: {same}", first.len()),
    )
}

// ---------------------------------------------------------------- driver

fn selected() -> BTreeSet<usize> {
    let quick = BTreeSet::from([1, 2, 3, 8, 9]);
    match std::env::var("STONET_ACCEPTANCE").ok().as_deref().map(str::trim) {
        None | Some("") => quick,
        Some("full") | Some("all") => (1..=9).collect(),
        Some(list) => list.split(',').filter_map(|s| s.trim().parse().ok()).collect(),
    }
}

fn main() {
    let criteria: [(usize, &str, fn() -> Outcome); 9] = [
        (1, "gradient suite", criterion_1),
        (2, "sampler calibration", criterion_2),
        (3, "AIPW correctness", criterion_3),
        (4, "CI coverage", criterion_4),
        (5, "AR(2) complete-data reproduction", criterion_5),
        (6, "AR(2) MAR reproduction", criterion_6),
        (7, "varying-size trend", criterion_7),
        (8, "threshold/mask equivalence", criterion_8),
        (9, "determinism", criterion_9),
    ];
    let run = selected();
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !run.contains(&id) {
            println!("criterion {id} ({name}): SKIP (set STONET_ACCEPTANCE=full or include {id})");
            continue;
        }
        let r = f();
        if !r.pass {
            failed += 1;
        }
        println!("criterion {id} ({name}): {} - {}", if r.pass { "PASS" } else { "FAIL" }, r.detail);
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
