use std::path::{Path, PathBuf};

use stonet_core::estimate::{aipw_ate, predict, selected_covariates};
use stonet_core::simlab::{
    fsr_nsr, gen_ar2_missing, gen_linear_gaussian, gen_varying_size, mae_ate, pehe, Splits,
};
use stonet_core::trainer::{read_checkpoint, train, write_checkpoint};
use stonet_core::{Data, Model};

use crate::config::RunConfig;
use crate::error::{io_err, CliError};
use crate::io::{covariate_names, join, read_csv, read_truth, truth_report, write_csv, Report};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const TRAIN_REPORT_FILE: &str = "train_report.txt";
pub const EPOCHS_FILE: &str = "epochs.csv";
pub const ESTIMATE_FILE: &str = "estimate.txt";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const METRICS_FILE: &str = "metrics.txt";

const ALL_METRICS: [&str; 4] = ["mae_ate", "pehe", "fsr_nsr", "ci_coverage"];

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.out_dir()?;
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Seed of an extra split drawn by a single-sample generator.
fn split_seed(seed: u64, split: u64) -> u64 {
    seed ^ split.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn generate(cfg: &RunConfig) -> Result<Vec<(&'static str, Data)>, CliError> {
    let seed = cfg.seed()?;
    let n_train = cfg.n_train.ok_or_else(|| CliError::Config("missing config key `n_train`".into()))?;
    let sizes = || -> Result<(usize, usize), CliError> {
        let need = |v: Option<usize>, k: &str| v.ok_or_else(|| CliError::Config(format!("missing config key `{k}`")));
        Ok((need(cfg.n_val, "n_val")?, need(cfg.n_test, "n_test")?))
    };
    let splits = |s: Splits| vec![("train", s.train), ("val", s.val), ("test", s.test)];
    let generator = cfg
        .generator
        .as_deref()
        .ok_or_else(|| CliError::Config("missing config key `generator`".into()))?;
    Ok(match generator {
        "ar2" => {
            let (n_val, n_test) = sizes()?;
            splits(gen_ar2_missing(n_train, n_val, n_test, seed, cfg.scenario()?)?)
        }
        "varying_size" => {
            let (n_val, n_test) = sizes()?;
            splits(gen_varying_size(n_train, n_val, n_test, seed)?)
        }
        "linear_gaussian" => {
            let p = cfg
                .num_covariates
                .ok_or_else(|| CliError::Config("missing config key `num_covariates`".into()))?;
            let mut out = vec![("train", gen_linear_gaussian(n_train, p, seed)?)];
            for (k, (name, n)) in [("val", cfg.n_val), ("test", cfg.n_test)].into_iter().enumerate() {
                if let Some(n) = n.filter(|&n| n > 0) {
                    out.push((name, gen_linear_gaussian(n, p, split_seed(seed, k as u64 + 1))?));
                }
            }
            out
        }
        other => return Err(CliError::Config(format!("unknown generator `{other}`"))),
    })
}

/// Writes `<split>.csv` and `<split>.truth.txt` per split; returns the paths written.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let dir = out_dir(cfg)?;
    let mut written = Vec::new();
    for (name, ds) in generate(cfg)? {
        let csv = dir.join(format!("{name}.csv"));
        write_csv(&csv, &ds)?;
        written.push(csv);
        if let Some(truth) = &ds.truth {
            let path = dir.join(format!("{name}.truth.txt"));
            truth_report(truth).write(&path)?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn fit(cfg: &RunConfig, ds: &Data) -> Result<Model, CliError> {
    let recipe = cfg.recipe(ds.num_covariates())?;
    for w in recipe.config.warnings() {
        log::warn!("{w}");
    }
    let cov = cfg.covariate_model(ds)?;
    Ok(train(ds, &recipe.config, &recipe.hyper, &recipe.schedule, cov.as_ref())?)
}

/// Trains on `train_data`; writes the checkpoint, a summary report and the
/// per-epoch diagnostics. Returns the checkpoint path.
pub fn cmd_train(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let data_path = cfg.path(&cfg.train_data, "train_data")?;
    let ds = read_csv(&data_path)?;
    let dir = out_dir(cfg)?;
    let model = fit(cfg, &ds)?;

    let ckpt = dir.join(CHECKPOINT_FILE);
    write_text(&ckpt, &write_checkpoint(&model))?;

    let sel = selected_covariates(&model);
    let mut r = Report::default();
    r.push("rows", ds.len());
    r.push("covariates", ds.num_covariates());
    r.push("missing_cells", ds.num_missing());
    r.push("run", model.run);
    r.push("bic", model.bic);
    r.push("run_bics", join(&model.run_bics));
    r.push("active_connections", model.mask.count_active());
    r.push("epochs", model.epochs.len());
    r.push("treatment_covariates", covariate_names(&sel.treatment_model_covariates));
    r.push("outcome_covariates", covariate_names(&sel.outcome_model_covariates));
    r.write(&dir.join(TRAIN_REPORT_FILE))?;

    let mut csv = String::from("stage,epoch,log_posterior,kinetic_energy,active\n");
    for e in &model.epochs {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            e.stage.name(),
            e.epoch,
            e.log_posterior,
            e.kinetic_energy,
            e.active
        ));
    }
    write_text(&dir.join(EPOCHS_FILE), &csv)?;
    Ok(ckpt)
}

pub fn load_model(path: &Path) -> Result<Model, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    read_checkpoint(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// AIPW estimate on `eval_data` under the checkpointed model.
pub fn cmd_estimate(cfg: &RunConfig) -> Result<Report, CliError> {
    let dir = out_dir(cfg)?;
    let ckpt = cfg.checkpoint.clone().unwrap_or_else(|| dir.join(CHECKPOINT_FILE));
    let model = load_model(&ckpt)?;
    let data_path = cfg.path(&cfg.eval_data, "eval_data")?;
    let ds = read_csv(&data_path)?;
    let (kappa, alpha) = (cfg.kappa(), cfg.alpha());

    let est = aipw_ate(&model, &ds, kappa, alpha)?;
    let preds = predict(&model, &ds, kappa)?;
    let sel = selected_covariates(&model);
    let (lo, hi) = est.ci;
    let n = est.n as f64;
    let infl_mean = est.influence.iter().sum::<f64>() / n;
    let infl_var = est.influence.iter().map(|v| (v - infl_mean).powi(2)).sum::<f64>() / n;
    let cate = preds.cate();

    let mut r = Report::default();
    r.push("n", est.n);
    r.push("kappa", kappa);
    r.push("alpha", alpha);
    r.push("tau_hat", est.tau_hat);
    r.push("v_hat", est.v_hat);
    r.push("std_error", (est.v_hat / n).sqrt());
    r.push("ci_lower", lo);
    r.push("ci_upper", hi);
    r.push("ci_half_width", (hi - lo) / 2.0);
    r.push("mean_cate", cate.iter().sum::<f64>() / n);
    r.push("treatment_covariates", covariate_names(&sel.treatment_model_covariates));
    r.push("outcome_covariates", covariate_names(&sel.outcome_model_covariates));
    r.push("treatment_reaches_output", sel.treatment_reaches_output);
    r.push("influence_mean", infl_mean);
    r.push("influence_sd", infl_var.sqrt());
    r.push("influence_min", est.influence.iter().copied().fold(f64::INFINITY, f64::min));
    r.push("influence_max", est.influence.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    r.write(&dir.join(ESTIMATE_FILE))?;

    let mut csv = String::from("propensity,mu0,mu1,cate\n");
    for i in 0..preds.len() {
        csv.push_str(&format!("{},{},{},{}\n", preds.propensity[i], preds.mu0[i], preds.mu1[i], cate[i]));
    }
    write_text(&dir.join(PREDICTIONS_FILE), &csv)?;
    Ok(r)
}

fn read_predicted_cate(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let col = r
        .headers()
        .map_err(|e| io_err(path, e))?
        .iter()
        .position(|h| h == "cate")
        .ok_or_else(|| CliError::Input(format!("{}: no `cate` column", path.display())))?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| io_err(path, e))?;
            rec.get(col)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| CliError::Input(format!("{}: bad cate value", path.display())))
        })
        .collect()
}

/// Scores an estimate report against a truth sidecar.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Report, CliError> {
    let dir = out_dir(cfg)?;
    let report_path = cfg.estimate_report.clone().unwrap_or_else(|| dir.join(ESTIMATE_FILE));
    let est = Report::read(&report_path)?;
    let truth_path = cfg.path(&cfg.truth, "truth")?;
    let truth = read_truth(&truth_path)?;
    let n: usize = est
        .require("n", &report_path)?
        .parse()
        .map_err(|_| CliError::Input(format!("{}: bad `n`", report_path.display())))?;
    if truth.cate.len() != n {
        return Err(CliError::Input(format!(
            "truth describes {} rows but the estimate covers {n}",
            truth.cate.len()
        )));
    }
    let wanted: Vec<String> = match &cfg.metrics {
        Some(m) => m.clone(),
        None => ALL_METRICS.iter().map(|s| s.to_string()).collect(),
    };
    if let Some(bad) = wanted.iter().find(|m| !ALL_METRICS.contains(&m.as_str())) {
        return Err(CliError::Config(format!("unknown metric `{bad}`")));
    }
    let want = |m: &str| wanted.iter().any(|w| w == m);
    let tau_hat = est.real("tau_hat", &report_path)?;

    let mut r = Report::default();
    r.push("n", n);
    r.push("true_ate", truth.ate);
    r.push("tau_hat", tau_hat);
    if want("mae_ate") {
        r.push("mae_ate", mae_ate(&[tau_hat], truth.ate)?);
    }
    if want("pehe") {
        let path = cfg.predictions.clone().unwrap_or_else(|| dir.join(PREDICTIONS_FILE));
        if path.exists() || cfg.predictions.is_some() {
            let cate = read_predicted_cate(&path)?;
            if cate.len() != truth.cate.len() {
                return Err(CliError::Input(format!(
                    "{} predictions for {} true effects",
                    cate.len(),
                    truth.cate.len()
                )));
            }
            r.push("pehe", pehe(&cate, &truth.cate)?);
        }
    }
    if want("fsr_nsr") {
        for (label, key, true_set) in [
            ("treatment", "treatment_covariates", &truth.treatment_covariates),
            ("outcome", "outcome_covariates", &truth.outcome_covariates),
        ] {
            let chosen = crate::io::parse_covariate_names(est.require(key, &report_path)?, &report_path)?;
            let (fsr, nsr) = fsr_nsr(&[chosen], true_set)?;
            r.push(&format!("fsr_{label}"), fsr);
            r.push(&format!("nsr_{label}"), nsr);
        }
    }
    if want("ci_coverage") {
        let lo = est.real("ci_lower", &report_path)?;
        let hi = est.real("ci_upper", &report_path)?;
        r.push("ci_coverage", stonet_core::simlab::ci_coverage(&[(lo, hi)], truth.ate)?);
    }
    r.write(&dir.join(METRICS_FILE))?;
    Ok(r)
}
