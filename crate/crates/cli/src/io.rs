//! Dataset CSV files, truth sidecars and `key=value` reports.
//!
//! CSV layout: header `x1,..,xp,A,Y`, one row per unit, empty cell for a
//! missing covariate. Sidecars and reports are UTF-8 lines `key=value` in a
//! fixed order; list values are comma separated.

use std::collections::BTreeSet;
use std::path::Path;

use stonet_core::data::{Dataset, Truth};
use stonet_core::Data;

use crate::error::{io_err, CliError};

pub fn write_csv(path: &Path, ds: &Data) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let p = ds.num_covariates();
    let mut header: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    header.push("A".into());
    header.push("Y".into());
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for i in 0..ds.len() {
        let row = ds.row(i);
        let mut rec: Vec<String> = (0..p)
            .map(|j| if ds.is_observed(i, j) { row[j].to_string() } else { String::new() })
            .collect();
        rec.push(ds.treatment[i].to_string());
        rec.push(ds.outcome[i].to_string());
        w.write_record(&rec).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_csv(path: &Path) -> Result<Data, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = r.headers().map_err(|e| io_err(path, e))?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 3 || cols[cols.len() - 2] != "A" || cols[cols.len() - 1] != "Y" {
        return Err(CliError::Input(format!("{}: header must be x1..xp,A,Y", path.display())));
    }
    let p = cols.len() - 2;
    for (j, name) in cols[..p].iter().enumerate() {
        if *name != format!("x{}", j + 1) {
            return Err(CliError::Input(format!(
                "{}: column {} is `{name}`, expected `x{}`",
                path.display(),
                j + 1,
                j + 1
            )));
        }
    }
    let (mut cov, mut observed, mut a, mut y) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let row = line + 2;
        let num = |s: &str, col: &str| -> Result<f64, CliError> {
            s.trim().parse::<f64>().map_err(|_| {
                CliError::Input(format!("{}: row {row}, column {col}: `{s}` is not a number", path.display()))
            })
        };
        for (j, cell) in rec.iter().take(p).enumerate() {
            if cell.trim().is_empty() {
                cov.push(f64::NAN);
                observed.push(false);
            } else {
                cov.push(num(cell, cols[j])?);
                observed.push(true);
            }
        }
        let cell = |k: usize| rec.get(k).unwrap_or("");
        a.push(num(cell(p), "A")?);
        y.push(num(cell(p + 1), "Y")?);
    }
    let mask = observed.iter().any(|o| !o).then_some(observed.as_slice());
    Ok(Dataset::new(p, cov, mask, a, y).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?)
}

/// Ordered `key=value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub entries: Vec<(String, String)>,
}

impl Report {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str, origin: &Path) -> Result<&str, CliError> {
        self.get(key)
            .ok_or_else(|| CliError::Input(format!("{}: no `{key}` entry", origin.display())))
    }

    pub fn real(&self, key: &str, origin: &Path) -> Result<f64, CliError> {
        let v = self.require(key, origin)?;
        v.parse()
            .map_err(|_| CliError::Input(format!("{}: `{key}={v}` is not a number", origin.display())))
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Input(format!("{}: line {} is not key=value", origin.display(), i + 1))
            })?;
            entries.push((k.to_string(), v.to_string()));
        }
        Ok(Self { entries })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_text()).map_err(|e| io_err(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::parse(&text, path)
    }
}

pub fn join<T: ToString>(values: impl IntoIterator<Item = T>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// `{0, 2}` as `x1,x3`.
pub fn covariate_names(set: &BTreeSet<usize>) -> String {
    join(set.iter().map(|j| format!("x{}", j + 1)))
}

pub fn parse_covariate_names(s: &str, origin: &Path) -> Result<BTreeSet<usize>, CliError> {
    s.split(',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.strip_prefix('x')
                .and_then(|d| d.parse::<usize>().ok())
                .filter(|&j| j >= 1)
                .map(|j| j - 1)
                .ok_or_else(|| CliError::Input(format!("{}: bad covariate name `{t}`", origin.display())))
        })
        .collect()
}

pub fn parse_reals(s: &str, key: &str, origin: &Path) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| CliError::Input(format!("{}: `{key}` holds `{t}`", origin.display())))
        })
        .collect()
}

pub fn truth_report(truth: &Truth<f64>) -> Report {
    let mut r = Report::default();
    r.push("ate", truth.ate);
    r.push("treatment_covariates", covariate_names(&truth.treatment_covariates));
    r.push("outcome_covariates", covariate_names(&truth.outcome_covariates));
    r.push("propensity", join(&truth.propensity));
    r.push("cate", join(&truth.cate));
    r
}

pub fn read_truth(path: &Path) -> Result<Truth<f64>, CliError> {
    let r = Report::read(path)?;
    Ok(Truth {
        ate: r.real("ate", path)?,
        cate: parse_reals(r.require("cate", path)?, "cate", path)?,
        propensity: parse_reals(r.require("propensity", path)?, "propensity", path)?,
        treatment_covariates: parse_covariate_names(r.require("treatment_covariates", path)?, path)?,
        outcome_covariates: parse_covariate_names(r.require("outcome_covariates", path)?, path)?,
    })
}
