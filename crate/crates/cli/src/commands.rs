use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use sparsefilt::export::{
    bias_rows, emse_rows, export_result, import_result_json, msd_rows, write_bias_csv, write_result_dir,
    write_series_csv, Format,
};
use sparsefilt::harness::{run_experiment, ExperimentResult, InputModel};
use sparsefilt::theory::{predict_bias, predict_general, SteadyStateReport};

use crate::scenario::{self, Scenario};
use crate::{CliError, ExportFormat, Options};

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| io_err(path, e))?;
    out.write_all(b"\n").and_then(|_| out.flush()).map_err(|e| io_err(path, e))
}

fn summarize(result: &ExperimentResult, verbose: bool) {
    let initial: f64 = result.w_opt.iter().map(|w| w * w).sum();
    for a in &result.algorithms {
        let alg = a.algorithm();
        print!("{alg}: {}/{} trials averaged", a.trials_averaged, result.trials);
        if let (Ok(msd), Ok(emse)) = (
            result.window_msd(alg, result.steady_window),
            result.window_emse(alg, result.steady_window),
        ) {
            print!(
                ", steady MSD {msd:.4e} ({:.1} dB below start), steady EMSE {emse:.4e}",
                10.0 * (initial / msd).log10()
            );
        }
        println!();
        for d in &a.divergences {
            println!("  trial {} diverged at n = {}", d.trial, d.iteration);
        }
        if verbose {
            for (i, (&w, &b)) in result.w_opt.iter().zip(&a.bias).enumerate() {
                if w != 0.0 {
                    println!("  tap {i}: w_opt {w:+.4}, bias {b:+.4e}");
                }
            }
        }
    }
}

pub fn run(path: &Path, opts: &Options) -> Result<(), CliError> {
    let scenario = scenario::load(path, &opts.overrides)?;
    let cfg = scenario.experiment()?;
    let result = run_experiment(&cfg)?;
    ensure_dir(&opts.out)?;
    write_json(&opts.out.join("scenario.json"), &scenario)?;
    let files = write_result_dir(&result, &opts.out)?;
    summarize(&result, opts.verbose);
    for f in files {
        println!("wrote {}", f.display());
    }
    let diverged: usize = result.algorithms.iter().map(|a| a.divergences.len()).sum();
    if diverged > 0 && scenario.fail_on_divergence {
        return Err(CliError::Failure(format!("{diverged} trial run(s) diverged")));
    }
    Ok(())
}

/// Closed-form prediction for the scenario's ZA-PNLMS parameters.
pub fn prediction(scenario: &Scenario) -> Result<SteadyStateReport, CliError> {
    let system = scenario.system()?;
    let p = scenario.gain_params();
    p.validate().map_err(|e| CliError::Schema(e.to_string()))?;
    match scenario.input {
        InputModel::White { variance } => {
            let mut report = predict_bias(&system, &p, scenario.rho, scenario.mu)?;
            for row in report.s_matrix.iter_mut() {
                row.iter_mut().for_each(|v| *v *= variance);
            }
            Ok(report)
        }
        model => {
            let r = model.correlation(system.len())?;
            Ok(predict_general(&system, &r, &p, scenario.rho, scenario.mu)?)
        }
    }
}

pub fn predict(path: &Path, opts: &Options) -> Result<(), CliError> {
    let scenario = scenario::load(path, &opts.overrides)?;
    let report = prediction(&scenario)?;
    ensure_dir(&opts.out)?;
    let json = opts.out.join("prediction.json");
    write_json(&json, &report)?;

    let csv_path = opts.out.join("prediction.csv");
    let mut out = create(&csv_path)?;
    let w_opt = scenario.system()?.weights;
    let mut text = String::from("tap,w_opt,predicted_mean,predicted_bias\n");
    for (i, w) in w_opt.iter().enumerate() {
        text.push_str(&format!(
            "{i},{w:.16e},{:.16e},{:.16e}\n",
            report.predicted_mean[i], report.predicted_bias[i]
        ));
    }
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| io_err(&csv_path, e))?;

    if opts.verbose {
        for (i, w) in w_opt.iter().enumerate().filter(|(_, w)| **w != 0.0) {
            println!("  tap {i}: w_opt {w:+.4}, predicted bias {:+.4e}", report.predicted_bias[i]);
        }
    }
    println!("wrote {}", json.display());
    println!("wrote {}", csv_path.display());
    Ok(())
}

pub fn export(path: &Path, format: ExportFormat, opts: &Options) -> Result<(), CliError> {
    if !path.exists() {
        return Err(io_err(path, "no such file"));
    }
    let result = import_result_json(path).map_err(|e| match e {
        sparsefilt::Error::Io(m) => io_err(path, m),
        other => CliError::Schema(format!("{}: {other}", path.display())),
    })?;
    ensure_dir(&opts.out)?;
    let mut written = Vec::new();
    match format {
        ExportFormat::All => written = write_result_dir(&result, &opts.out)?,
        ExportFormat::Json => {
            let p = opts.out.join("result.json");
            export_result(&result, &p, Format::Json)?;
            written.push(p);
        }
        ExportFormat::Csv => {
            let p = opts.out.join("curves.csv");
            export_result(&result, &p, Format::Csv)?;
            written.push(p);
            for (name, rows) in [("msd.csv", msd_rows(&result)), ("emse.csv", emse_rows(&result))] {
                let p = opts.out.join(name);
                let mut out = create(&p)?;
                write_series_csv(&mut out, &rows)?;
                out.flush().map_err(|e| io_err(&p, e))?;
                written.push(p);
            }
            let p = opts.out.join("bias.csv");
            let mut out = create(&p)?;
            write_bias_csv(&mut out, &bias_rows(&result)?)?;
            out.flush().map_err(|e| io_err(&p, e))?;
            written.push(p);
        }
    }
    for f in written {
        println!("wrote {}", f.display());
    }
    Ok(())
}
