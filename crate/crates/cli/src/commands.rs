use std::path::{Path, PathBuf};

use catsim_core::fitter::{fit, predict, FitData, FitResult, ModelKind};
use catsim_core::harness::{
    export, import_csv, import_json, output_path, run_scan, EngineKind, Format, ScanKind, ScanResult, ScanSpec,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::plot::{self, Series, Style};

/// Files are only written once every one of them has been produced.
fn write_all(dir: &Path, files: &[(PathBuf, Vec<u8>)]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    for (path, bytes) in files {
        std::fs::write(path, bytes).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Swept values in display units plus the axis label.
fn display_axis(kind: ScanKind, swept: &[f64]) -> (Vec<f64>, &'static str) {
    match kind {
        ScanKind::TimeScan => (swept.iter().map(|t| t * 1e6).collect(), "force duration (us)"),
        ScanKind::DetuningScan => (
            swept.iter().map(|d| d / std::f64::consts::TAU * 1e-3).collect(),
            "detuning / 2pi (kHz)",
        ),
        ScanKind::PhaseScan => (swept.to_vec(), "analysis phase (rad)"),
    }
}

fn model_for(kind: ScanKind) -> ModelKind {
    match kind {
        ScanKind::TimeScan => ModelKind::TimeScan,
        ScanKind::DetuningScan => ModelKind::DetuningScan,
        ScanKind::PhaseScan => ModelKind::PhaseScan,
    }
}

fn scan_plot(r: &ScanResult) -> Vec<u8> {
    let (x, label) = display_axis(r.spec.kind, &r.swept);
    let mut series = vec![Series { label: "model", y: &r.model, style: Style::Line, color: "#1f5fbf" }];
    if r.spec.shots > 0 {
        series.push(Series { label: "shot estimate", y: &r.estimate, style: Style::Points, color: "black" });
    }
    plot::render(&x, &series, label, "P(down)").into_bytes()
}

fn checked_spec(cfg: &RunConfig, expected: ScanKind) -> Result<ScanSpec, CliError> {
    let spec = cfg.scan_spec()?;
    if spec.kind != expected {
        return Err(CliError::Config(format!(
            "config describes a {} but this command runs a {}",
            spec.kind.file_stem(),
            expected.file_stem()
        )));
    }
    Ok(spec)
}

pub fn cmd_scan(cfg: &RunConfig, expected: ScanKind) -> Result<(), CliError> {
    let spec = checked_spec(cfg, expected)?;
    let result = run_scan(&spec)?;
    let dir = &cfg.output_dir;
    let mut files = Vec::new();
    for fmt in [Format::Csv, Format::Json] {
        files.push((output_path(dir, spec.kind, spec.seed, fmt.extension()), export(&result, fmt)?));
    }
    if cfg.svg {
        files.push((output_path(dir, spec.kind, spec.seed, "svg"), scan_plot(&result)));
    }
    write_all(dir, &files)
}

#[derive(Serialize)]
struct CompareSummary {
    kind: ScanKind,
    seed: u64,
    points: usize,
    cutoff: usize,
    gate: f64,
    max_abs_diff: f64,
    mean_abs_diff: f64,
    passed: bool,
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<(), CliError> {
    let gate = cfg.compare.ok_or_else(|| CliError::Config("missing [compare] block".into()))?.gate;
    if !(gate > 0.0) || !gate.is_finite() {
        return Err(CliError::Config(format!("[compare]: gate must be a positive number, got {gate}")));
    }
    let mut spec = cfg.scan_spec()?;
    spec.shots = 0;
    spec.engine = EngineKind::ClosedForm;
    let closed = run_scan(&spec)?;
    spec.engine = EngineKind::Oracle;
    let oracle = run_scan(&spec)?;
    let diff: Vec<f64> = closed.model.iter().zip(&oracle.model).map(|(a, b)| (a - b).abs()).collect();
    let max = diff.iter().copied().fold(0.0, f64::max);
    let mean = diff.iter().sum::<f64>() / diff.len() as f64;
    let summary = CompareSummary {
        kind: spec.kind,
        seed: spec.seed,
        points: spec.points,
        cutoff: spec.space()?.cutoff(),
        gate,
        max_abs_diff: max,
        mean_abs_diff: mean,
        passed: max < gate,
    };

    let mut table = String::from("swept,closed_form,oracle,abs_diff\n");
    for (i, d) in diff.iter().enumerate() {
        table.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{d:.16e}\n",
            closed.swept[i], closed.model[i], oracle.model[i]
        ));
    }
    let mut report = serde_json::to_vec_pretty(&summary).map_err(|e| CliError::Config(e.to_string()))?;
    report.push(b'\n');
    let dir = &cfg.output_dir;
    let stem = format!("compare_{}_{}", spec.kind.file_stem(), spec.seed);
    let mut files = vec![(dir.join(format!("{stem}.csv")), table.into_bytes()), (dir.join(format!("{stem}.json")), report)];
    if cfg.svg {
        let (x, label) = display_axis(spec.kind, &closed.swept);
        let svg = plot::render(
            &x,
            &[
                Series { label: "closed form", y: &closed.model, style: Style::Line, color: "#1f5fbf" },
                Series { label: "master equation", y: &oracle.model, style: Style::Points, color: "#c0392b" },
            ],
            label,
            "P(down)",
        );
        files.push((dir.join(format!("{stem}.svg")), svg.into_bytes()));
    }
    write_all(dir, &files)?;
    println!("max |dP| = {max:.3e}, mean |dP| = {mean:.3e}, gate = {gate:.3e}");
    if summary.passed {
        Ok(())
    } else {
        Err(CliError::GateExceeded(format!("max |dP| {max:.3e} is not below the gate {gate:.3e}")))
    }
}

fn load_data(path: &Path, configured: Option<ModelKind>) -> Result<(FitData, ModelKind), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let bad = |e: catsim_core::Error| CliError::Config(format!("{}: {e}", path.display()));
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let r = import_json(&bytes).map_err(bad)?;
        let recorded = model_for(r.spec.kind);
        if let Some(m) = configured {
            if m != recorded {
                return Err(CliError::Config(format!(
                    "[fit]: model {m:?} does not match the {} data in {}",
                    r.spec.kind.file_stem(),
                    path.display()
                )));
            }
        }
        Ok((FitData::from_result(&r).map_err(bad)?, recorded))
    } else {
        let t = import_csv(&bytes).map_err(bad)?;
        let model = configured.ok_or_else(|| CliError::Config("[fit]: CSV input needs `model`".into()))?;
        Ok((FitData::from_table(&t).map_err(bad)?, model))
    }
}

fn print_table(r: &FitResult) {
    println!("{:<18} {:>16} {:>14}", "parameter", "value", "1-sigma");
    for (p, v) in &r.values {
        let unc = match (&r.uncertainties, r.free.contains(p)) {
            (Some(u), true) => format!("{:.3e}", u[p]),
            (None, true) => "n/a".to_string(),
            (_, false) => "fixed".to_string(),
        };
        println!("{:<18} {:>16.8e} {:>14}", p.name(), v, unc);
    }
    println!("residual norm {:.6e}, iterations {}, converged {}", r.residual_norm, r.iterations, r.converged);
    if let Some(w) = &r.warning {
        println!("warning: {w}");
    }
}

pub fn cmd_fit(cfg: &RunConfig, config_path: &Path, data: Option<PathBuf>) -> Result<(), CliError> {
    let block = cfg.fit.as_ref().ok_or_else(|| CliError::Config("missing [fit] block".into()))?;
    let data_path = match (data, &block.data) {
        (Some(p), _) => p,
        (None, Some(p)) => config_path.parent().unwrap_or(Path::new(".")).join(p),
        (None, None) => return Err(CliError::Config("no data file: pass --data or set fit.data".into())),
    };
    let (data, model) = load_data(&data_path, block.model)?;
    let spec = cfg.fit_spec(model)?;
    let result = fit(&data, &spec)?;

    let stem = data_path.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    let dir = &cfg.output_dir;
    let mut json = serde_json::to_vec_pretty(&result).map_err(|e| CliError::Config(e.to_string()))?;
    json.push(b'\n');
    let mut files = vec![(dir.join(format!("fit_{stem}.json")), json)];
    if cfg.svg {
        let curve: Vec<f64> = data
            .x
            .iter()
            .zip(&data.u)
            .map(|(x, u)| predict(model, &result.values, *x, *u).unwrap_or(f64::NAN))
            .collect();
        let kind = match model {
            ModelKind::TimeScan => ScanKind::TimeScan,
            ModelKind::DetuningScan => ScanKind::DetuningScan,
            ModelKind::PhaseScan => ScanKind::PhaseScan,
        };
        let (x, label) = display_axis(kind, &data.x);
        let svg = plot::render(
            &x,
            &[
                Series { label: "fit", y: &curve, style: Style::Line, color: "#1f5fbf" },
                Series { label: "data", y: &data.y, style: Style::Points, color: "black" },
            ],
            label,
            "P(down)",
        );
        files.push((dir.join(format!("fit_{stem}.svg")), svg.into_bytes()));
    }
    write_all(dir, &files)?;
    print_table(&result);
    if result.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged("fit did not converge; result written with a warning".into()))
    }
}
