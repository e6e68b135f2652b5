//! Plain-text checkpoint of a [`FittedModel`].
//!
//! One record per line, `key` followed by space-separated fields. Floats are
//! the 16-digit hex of their `f64` bit pattern, so a round trip is exact.
//! Field order:
//!
//! ```text
//! stonet-checkpoint 1
//! widths <d_0> .. <d_{h+1}>
//! treatment <layer> <position> | treatment none
//! activation <name>
//! output <name>
//! noise <σ²_1> .. <σ²_{h+1}>
//! temperature <t> <treatment likelihood weight>
//! prior <λ> <σ0²> <σ1²> <penalize_bias 0|1>
//! run <index>
//! bic <value>
//! run_bics <value>..
//! params            (then per layer: `w <row-major weights>`, `b <biases>`)
//! mask              (then per layer: `w <0/1 string>`, `b <0/1 string>`)
//! imputations <n>   (then n lines `x <values>`)
//! epochs <count>    (then `e <stage> <epoch> <log_posterior> <kinetic> <active>`)
//! tail <count>      (then per point: `params` block, `imputations` block,
//!                    `latents none` or `latents <n>` followed by n lines
//!                    `s <layer-count>` and one `l <values>` per layer)
//! end
//! ```

use std::fmt::Write as _;

use super::fit::{EpochRecord, FittedModel, Stage, TrajectoryPoint};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::net::{
    Activation, LayerMask, LayerParams, NetworkConfig, NetworkParameters, OutputKind,
    SparsityMask, TreatmentSlot,
};
use crate::prior::PriorHyperparameters;
use crate::scalar::Scalar;

const MAGIC: &str = "stonet-checkpoint 1";

fn hex<T: Scalar>(v: T) -> String {
    format!("{:016x}", v.f64().to_bits())
}

fn push_values<T: Scalar>(out: &mut String, key: &str, values: &[T]) {
    out.push_str(key);
    for &v in values {
        out.push(' ');
        out.push_str(&hex(v));
    }
    out.push('\n');
}

fn push_bits(out: &mut String, key: &str, bits: &[bool]) {
    out.push_str(key);
    out.push(' ');
    out.extend(bits.iter().map(|&b| if b { '1' } else { '0' }));
    out.push('\n');
}

fn push_params<T: Scalar>(out: &mut String, params: &NetworkParameters<T>) {
    out.push_str("params\n");
    for l in &params.layers {
        push_values(out, "w", l.weights.as_slice());
        push_values(out, "b", &l.bias);
    }
}

fn push_imputations<T: Scalar>(out: &mut String, rows: &[Vec<T>]) {
    let _ = writeln!(out, "imputations {}", rows.len());
    for r in rows {
        push_values(out, "x", r);
    }
}

pub fn write_checkpoint<T: Scalar>(model: &FittedModel<T>) -> String {
    let c = &model.config;
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    let widths: Vec<String> = c.layer_widths.iter().map(|w| w.to_string()).collect();
    let _ = writeln!(out, "widths {}", widths.join(" "));
    match c.treatment {
        Some(t) => {
            let _ = writeln!(out, "treatment {} {}", t.layer, t.position);
        }
        None => out.push_str("treatment none\n"),
    }
    let _ = writeln!(out, "activation {}", c.activation.name());
    let _ = writeln!(out, "output {}", c.output_kind.name());
    push_values(&mut out, "noise", &c.noise_variances);
    push_values(&mut out, "temperature", &[c.treatment_temperature, c.treatment_weight]);
    let h = &model.hyper;
    let _ = writeln!(
        out,
        "prior {} {} {} {}",
        hex(h.lambda),
        hex(h.sigma0_sq),
        hex(h.sigma1_sq),
        u8::from(h.penalize_bias)
    );
    let _ = writeln!(out, "run {}", model.run);
    push_values(&mut out, "bic", &[model.bic]);
    push_values(&mut out, "run_bics", &model.run_bics);
    push_params(&mut out, &model.params);
    out.push_str("mask\n");
    for l in &model.mask.layers {
        push_bits(&mut out, "w", &l.weights);
        push_bits(&mut out, "b", &l.bias);
    }
    push_imputations(&mut out, &model.imputations);
    let _ = writeln!(out, "epochs {}", model.epochs.len());
    for e in &model.epochs {
        let _ = writeln!(
            out,
            "e {} {} {} {} {}",
            e.stage.name(),
            e.epoch,
            hex(e.log_posterior),
            hex(e.kinetic_energy),
            e.active
        );
    }
    let _ = writeln!(out, "tail {}", model.tail.len());
    for p in &model.tail {
        push_params(&mut out, &p.params);
        push_imputations(&mut out, &p.x_mis);
        match &p.latents {
            None => out.push_str("latents none\n"),
            Some(all) => {
                let _ = writeln!(out, "latents {}", all.len());
                for sample in all {
                    let _ = writeln!(out, "s {}", sample.len());
                    for layer in sample {
                        push_values(&mut out, "l", layer);
                    }
                }
            }
        }
    }
    out.push_str("end\n");
    out
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Input(format!("checkpoint line {}: {msg}", line + 1))
}

impl<'a> Reader<'a> {
    /// Next line split into key and fields; the key must match.
    fn record(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (no, line) = self
            .lines
            .next()
            .ok_or_else(|| Error::Input(format!("checkpoint ends before `{key}`")))?;
        let mut parts = line.split_ascii_whitespace();
        match parts.next() {
            Some(k) if k == key => Ok((no, parts.collect())),
            other => Err(bad(no, format!("expected `{key}`, found `{}`", other.unwrap_or("")))),
        }
    }

    fn floats<T: Scalar>(&mut self, key: &str) -> Result<Vec<T>> {
        let (no, fields) = self.record(key)?;
        fields.iter().map(|f| parse_hex(no, f)).collect()
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let (no, fields) = self.record(key)?;
        match fields.as_slice() {
            [v] => v.parse().map_err(|_| bad(no, format!("bad count `{v}`"))),
            _ => Err(bad(no, "expected one count")),
        }
    }

    fn bits(&mut self, key: &str, len: usize) -> Result<Vec<bool>> {
        let (no, fields) = self.record(key)?;
        let s = fields.first().copied().unwrap_or("");
        if s.len() != len || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(bad(no, format!("expected {len} mask bits")));
        }
        Ok(s.bytes().map(|b| b == b'1').collect())
    }

    fn params<T: Scalar>(&mut self, widths: &[usize]) -> Result<NetworkParameters<T>> {
        self.record("params")?;
        let layers = widths
            .windows(2)
            .map(|w| {
                let weights = self.floats("w")?;
                let weights = Matrix::from_vec(w[1], w[0], weights)?;
                let bias = self.floats("b")?;
                if bias.len() != w[1] {
                    return Err(Error::Input("checkpoint bias length mismatch".into()));
                }
                Ok(LayerParams { weights, bias })
            })
            .collect::<Result<_>>()?;
        Ok(NetworkParameters { layers })
    }

    fn imputations<T: Scalar>(&mut self) -> Result<Vec<Vec<T>>> {
        let n = self.count("imputations")?;
        (0..n).map(|_| self.floats("x")).collect()
    }
}

fn parse_hex<T: Scalar>(no: usize, field: &str) -> Result<T> {
    u64::from_str_radix(field, 16)
        .map(|b| T::of(f64::from_bits(b)))
        .map_err(|_| bad(no, format!("bad float `{field}`")))
}

fn single<T: Scalar>(values: Vec<T>, what: &str) -> Result<T> {
    match values.as_slice() {
        [v] => Ok(*v),
        _ => Err(Error::Input(format!("checkpoint `{what}` needs one value"))),
    }
}

pub fn read_checkpoint<T: Scalar>(text: &str) -> Result<FittedModel<T>> {
    let mut r = Reader {
        lines: text.lines().enumerate(),
    };
    match r.lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => return Err(Error::Input("not a stonet checkpoint".into())),
    }
    let (no, w) = r.record("widths")?;
    let widths = w
        .iter()
        .map(|v| v.parse::<usize>().map_err(|_| bad(no, "bad width")))
        .collect::<Result<Vec<_>>>()?;
    let (no, t) = r.record("treatment")?;
    let treatment = match t.as_slice() {
        ["none"] => None,
        [l, p] => Some(TreatmentSlot {
            layer: l.parse().map_err(|_| bad(no, "bad treatment layer"))?,
            position: p.parse().map_err(|_| bad(no, "bad treatment position"))?,
        }),
        _ => return Err(bad(no, "bad treatment record")),
    };
    let (no, a) = r.record("activation")?;
    let activation: Activation = a.first().copied().unwrap_or("").parse().map_err(|e| bad(no, e))?;
    let (no, o) = r.record("output")?;
    let output_kind: OutputKind = o.first().copied().unwrap_or("").parse().map_err(|e| bad(no, e))?;
    let noise = r.floats("noise")?;
    let mut config = NetworkConfig::new(widths.clone(), treatment, noise, activation, output_kind)?;
    let (no, t) = r.record("temperature")?;
    if t.len() != 2 {
        return Err(bad(no, "temperature needs two fields"));
    }
    config.treatment_temperature = parse_hex(no, t[0])?;
    config.treatment_weight = parse_hex(no, t[1])?;
    config.validate()?;
    let (no, p) = r.record("prior")?;
    if p.len() != 4 {
        return Err(bad(no, "prior needs four fields"));
    }
    let mut hyper = PriorHyperparameters::new(parse_hex(no, p[0])?, parse_hex(no, p[1])?, parse_hex(no, p[2])?)?;
    hyper.penalize_bias = match p[3] {
        "1" => true,
        "0" => false,
        _ => return Err(bad(no, "penalize flag must be 0 or 1")),
    };
    let run = r.count("run")?;
    let bic = single(r.floats("bic")?, "bic")?;
    let run_bics = r.floats("run_bics")?;
    let params = r.params(&widths)?;
    r.record("mask")?;
    let mask_layers = widths
        .windows(2)
        .map(|w| {
            Ok(LayerMask {
                weights: r.bits("w", w[0] * w[1])?,
                bias: r.bits("b", w[1])?,
            })
        })
        .collect::<Result<_>>()?;
    let mask = SparsityMask { layers: mask_layers };
    let imputations = r.imputations()?;
    let n_epochs = r.count("epochs")?;
    let mut epochs = Vec::with_capacity(n_epochs);
    for _ in 0..n_epochs {
        let (no, f) = r.record("e")?;
        if f.len() != 5 {
            return Err(bad(no, "epoch record needs five fields"));
        }
        let stage = match f[0] {
            "pretrain" => Stage::Pretrain,
            "train" => Stage::Train,
            "refine" => Stage::Refine,
            s => return Err(bad(no, format!("unknown stage `{s}`"))),
        };
        epochs.push(EpochRecord {
            stage,
            epoch: f[1].parse().map_err(|_| bad(no, "bad epoch"))?,
            log_posterior: parse_hex(no, f[2])?,
            kinetic_energy: parse_hex(no, f[3])?,
            active: f[4].parse().map_err(|_| bad(no, "bad active count"))?,
        });
    }
    let n_tail = r.count("tail")?;
    let mut tail = Vec::with_capacity(n_tail);
    for _ in 0..n_tail {
        let params = r.params(&widths)?;
        let x_mis = r.imputations()?;
        let (no, l) = r.record("latents")?;
        let latents = match l.as_slice() {
            ["none"] => None,
            [count] => {
                let count: usize = count.parse().map_err(|_| bad(no, "bad latent count"))?;
                let mut all = Vec::with_capacity(count);
                for _ in 0..count {
                    let layers = r.count("s")?;
                    all.push((0..layers).map(|_| r.floats("l")).collect::<Result<Vec<_>>>()?);
                }
                Some(all)
            }
            _ => return Err(bad(no, "bad latents record")),
        };
        tail.push(TrajectoryPoint { params, x_mis, latents });
    }
    r.record("end")?;
    params.check_shapes(&config)?;
    mask.check_shapes(&params)?;
    Ok(FittedModel {
        config,
        params,
        mask,
        hyper,
        run,
        imputations,
        epochs,
        tail,
        bic,
        run_bics,
    })
}
