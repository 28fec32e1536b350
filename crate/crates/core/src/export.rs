//! CSV and JSON persistence of [`ExperimentResult`]s.
//!
//! CSV floats are written with 17 significant digits so that re-reading a
//! file reproduces every value bit for bit. Files:
//!
//! | file        | header                                  |
//! |-------------|-----------------------------------------|
//! | curves.csv  | `n,alg,tap,value` (mean weights)        |
//! | msd.csv     | `n,alg,value`                           |
//! | emse.csv    | `n,alg,value`                           |
//! | bias.csv    | `alg,tap,w_opt,bias,predicted_bias`     |
//! | result.json | the full result                         |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::Algorithm;
use crate::harness::{ExperimentResult, InputModel};
use crate::signal::SparseSystem;
use crate::theory::{predict_bias, predict_general};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub n: usize,
    pub alg: Algorithm,
    pub tap: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub n: usize,
    pub alg: Algorithm,
    pub value: f64,
}

/// Measured bias joined with the closed-form prediction. The prediction is
/// empty for filters without one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub alg: Algorithm,
    pub tap: usize,
    pub w_opt: f64,
    pub bias: f64,
    pub predicted_bias: Option<f64>,
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Mean-weight rows in algorithm, snapshot, tap order.
pub fn curve_rows(result: &ExperimentResult) -> Vec<CurveRow> {
    let mut rows = Vec::new();
    for a in &result.algorithms {
        for (&n, w) in result.snapshot_iterations.iter().zip(&a.mean_weights) {
            rows.extend(w.iter().enumerate().map(|(tap, &value)| CurveRow {
                n,
                alg: a.algorithm(),
                tap,
                value,
            }));
        }
    }
    rows
}

pub fn msd_rows(result: &ExperimentResult) -> Vec<SeriesRow> {
    let mut rows = Vec::new();
    for a in &result.algorithms {
        rows.extend(result.snapshot_iterations.iter().zip(&a.msd).map(|(&n, &value)| SeriesRow {
            n,
            alg: a.algorithm(),
            value,
        }));
    }
    rows
}

pub fn emse_rows(result: &ExperimentResult) -> Vec<SeriesRow> {
    let mut rows = Vec::new();
    for a in &result.algorithms {
        rows.extend(a.emse.iter().enumerate().map(|(k, &value)| SeriesRow {
            n: k + 1,
            alg: a.algorithm(),
            value,
        }));
    }
    rows
}

/// Closed-form bias for one filter of `result`: zero without an attractor,
/// the white-input or general-input prediction for ZA-PNLMS, none for
/// RZA-PNLMS.
pub fn predicted_bias_for(result: &ExperimentResult, algorithm: Algorithm) -> Result<Option<Vec<f64>>> {
    let a = result.get(algorithm).ok_or(Error::InvalidParameter {
        name: "algorithm",
        reason: format!("{algorithm} is not part of this result"),
    })?;
    let cfg = &a.config;
    match algorithm {
        Algorithm::Nlms | Algorithm::Pnlms => Ok(Some(vec![0.0; result.w_opt.len()])),
        Algorithm::RzaPnlms => Ok(None),
        Algorithm::ZaPnlms => {
            let system = SparseSystem::from_weights(result.w_opt.clone())?;
            let report = match result.input {
                InputModel::White { .. } => predict_bias(&system, &cfg.gain_params, cfg.rho, cfg.mu)?,
                _ => {
                    let r = result.input.correlation(system.len())?;
                    predict_general(&system, &r, &cfg.gain_params, cfg.rho, cfg.mu)?
                }
            };
            Ok(Some(report.predicted_bias))
        }
    }
}

/// Per-tap measured bias (steady-window mean over every iteration) next to
/// its prediction, for every filter that did not diverge in all trials.
pub fn bias_rows(result: &ExperimentResult) -> Result<Vec<BiasRow>> {
    let mut rows = Vec::new();
    for a in result.algorithms.iter().filter(|a| a.trials_averaged > 0) {
        let predicted = predicted_bias_for(result, a.algorithm())?;
        for (tap, (&w_opt, &bias)) in result.w_opt.iter().zip(&a.bias).enumerate() {
            rows.push(BiasRow {
                alg: a.algorithm(),
                tap,
                w_opt,
                bias,
                predicted_bias: predicted.as_ref().map(|p| p[tap]),
            });
        }
    }
    Ok(rows)
}

pub fn write_curves_csv<W: Write>(out: W, rows: &[CurveRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "alg", "tap", "value"])?;
    for r in rows {
        w.write_record([r.n.to_string(), r.alg.name().into(), r.tap.to_string(), fmt(r.value)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series_csv<W: Write>(out: W, rows: &[SeriesRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "alg", "value"])?;
    for r in rows {
        w.write_record([r.n.to_string(), r.alg.name().into(), fmt(r.value)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bias_csv<W: Write>(out: W, rows: &[BiasRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alg", "tap", "w_opt", "bias", "predicted_bias"])?;
    for r in rows {
        w.write_record([
            r.alg.name().into(),
            r.tap.to_string(),
            fmt(r.w_opt),
            fmt(r.bias),
            r.predicted_bias.map(fmt).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(input: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn read_curves_csv<R: Read>(input: R) -> Result<Vec<CurveRow>> {
    read_rows(input)
}

pub fn read_series_csv<R: Read>(input: R) -> Result<Vec<SeriesRow>> {
    read_rows(input)
}

pub fn read_bias_csv<R: Read>(input: R) -> Result<Vec<BiasRow>> {
    read_rows(input)
}

pub fn write_result_json<W: Write>(out: W, result: &ExperimentResult) -> Result<()> {
    serde_json::to_writer(out, result)?;
    Ok(())
}

pub fn read_result_json<R: Read>(input: R) -> Result<ExperimentResult> {
    Ok(serde_json::from_reader(input)?)
}

/// Writes `result` to `path`: the mean-weight curves as CSV, or the whole
/// result as JSON.
pub fn export_result(result: &ExperimentResult, path: &Path, format: Format) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        Format::Csv => write_curves_csv(&mut out, &curve_rows(result))?,
        Format::Json => write_result_json(&mut out, result)?,
    }
    out.flush()?;
    Ok(())
}

pub fn import_result_json(path: &Path) -> Result<ExperimentResult> {
    read_result_json(BufReader::new(File::open(path)?))
}

/// Writes every file listed in the module table into `dir` and returns
/// their paths.
pub fn write_result_dir(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let path = |name: &str| dir.join(name);
    let mut written = Vec::new();

    let p = path("curves.csv");
    export_result(result, &p, Format::Csv)?;
    written.push(p);
    for (name, rows) in [("msd.csv", msd_rows(result)), ("emse.csv", emse_rows(result))] {
        let p = path(name);
        let mut out = BufWriter::new(File::create(&p)?);
        write_series_csv(&mut out, &rows)?;
        out.flush()?;
        written.push(p);
    }
    let p = path("bias.csv");
    let mut out = BufWriter::new(File::create(&p)?);
    write_bias_csv(&mut out, &bias_rows(result)?)?;
    out.flush()?;
    written.push(p);
    let p = path("result.json");
    export_result(result, &p, Format::Json)?;
    written.push(p);
    Ok(written)
}
