//! The three commands and their report documents.

use std::fmt::Write as _;
use std::path::Path;

use plsmooth::mesh::{MeshDocument, PLMap, ValidationReport};
use plsmooth::pipeline::{
    choose_params, lambda_sweep, smooth as build, CertifyOptions, DifferenceOptions, DifferenceReport, Provenance,
    SmoothingOptions, SmoothingParams, SweepOptions, SweepRow,
};
use plsmooth::verify::CertificationReport;
use plsmooth::Error;
use serde::Serialize;

use crate::config::RunConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_CERTIFICATION: u8 = 3;
pub const EXIT_TARGET: u8 = 4;

#[derive(Serialize)]
struct ValidateReport<'a> {
    command: &'static str,
    input: String,
    passed: bool,
    /// Orientation-reversing maps are reflected before smoothing.
    reflected: bool,
    validation: Option<ValidationReport>,
    error: Option<String>,
    #[serde(skip)]
    _cfg: &'a RunConfig,
}

#[derive(Serialize)]
struct SmoothReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    passed: bool,
    reflected: bool,
    validation: ValidationReport,
    params: Option<SmoothingParams>,
    provenance: Option<Provenance>,
    certification: Vec<CertificationReport>,
    difference: Option<DifferenceReport>,
    error: Option<String>,
}

#[derive(Serialize)]
struct SweepReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    passed: bool,
    reflected: bool,
    params: Option<SmoothingParams>,
    rows: Vec<SweepRow>,
    /// First scale whose total error is below `epsilon`.
    achieved_at: Option<f64>,
    error: Option<String>,
}

/// Outcome of loading and validating the input.
enum Loaded {
    Map { map: PLMap, report: ValidationReport },
    Invalid { report: Option<ValidationReport>, error: String },
}

fn load(cfg: &RunConfig) -> Result<Loaded, String> {
    let doc = MeshDocument::read(&cfg.input).map_err(|e| format!("{}: {e}", cfg.input.display()))?;
    let map = match doc.to_map() {
        Ok(m) => m,
        Err(e @ (Error::Io(_) | Error::Parse(_))) => return Err(format!("{}: {e}", cfg.input.display())),
        Err(e) => return Ok(Loaded::Invalid { report: None, error: e.to_string() }),
    };
    let report = map.validate();
    if !report.passed() {
        let error = format!("validation failed: {:?}", report.verdict);
        return Ok(Loaded::Invalid { report: Some(report), error });
    }
    match map.normalized() {
        Ok(map) => Ok(Loaded::Map { map, report }),
        Err(e) => Ok(Loaded::Invalid { report: Some(report), error: e.to_string() }),
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports always serialize");
    s.push('\n');
    s
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// Writes `files` under the output directory, or prints the first of them.
fn emit(cfg: &RunConfig, files: &[(&str, String)]) -> Result<(), String> {
    match &cfg.out {
        Some(dir) => files.iter().try_for_each(|(name, text)| write(dir, name, text)),
        None => {
            if let Some((_, text)) = files.first() {
                print!("{text}");
            }
            Ok(())
        }
    }
}

fn fail_io(e: String) -> u8 {
    eprintln!("error: {e}");
    EXIT_IO
}

fn smoothing_options(cfg: &RunConfig) -> SmoothingOptions {
    SmoothingOptions {
        edge_fraction: cfg.edge_fraction,
        face_fraction: cfg.face_fraction,
        seed: cfg.seed,
        ..SmoothingOptions::default()
    }
}

fn difference_options(cfg: &RunConfig) -> DifferenceOptions {
    DifferenceOptions { p: cfg.p, q: cfg.q, norms: cfg.norms.clone(), ..DifferenceOptions::default() }
}

pub fn validate(cfg: &RunConfig) -> u8 {
    let loaded = match load(cfg) {
        Ok(l) => l,
        Err(e) => return fail_io(e),
    };
    let input = cfg.input.display().to_string();
    let (report, code) = match loaded {
        Loaded::Map { map, report } => (
            ValidateReport {
                command: "validate",
                input,
                passed: true,
                reflected: map.reflected(),
                validation: Some(report),
                error: None,
                _cfg: cfg,
            },
            EXIT_OK,
        ),
        Loaded::Invalid { report, error } => (
            ValidateReport {
                command: "validate",
                input,
                passed: false,
                reflected: false,
                validation: report,
                error: Some(error),
                _cfg: cfg,
            },
            EXIT_VALIDATION,
        ),
    };
    eprintln!("validate: {}", if code == EXIT_OK { "PASS" } else { "FAIL" });
    if let Some(e) = &report.error {
        eprintln!("  {e}");
    }
    match emit(cfg, &[("validate.json", json(&report))]) {
        Ok(()) => code,
        Err(e) => fail_io(e),
    }
}

pub fn smooth(cfg: &RunConfig) -> u8 {
    if cfg.grid.is_some() && cfg.out.is_none() {
        return fail_io("--grid needs an output directory (--out)".into());
    }
    let (map, validation) = match load(cfg) {
        Ok(Loaded::Map { map, report }) => (map, report),
        Ok(Loaded::Invalid { error, .. }) => {
            eprintln!("smooth: validation failed, nothing smoothed\n  {error}");
            return EXIT_VALIDATION;
        }
        Err(e) => return fail_io(e),
    };
    let mut report = SmoothReport {
        command: "smooth",
        config: cfg,
        passed: false,
        reflected: map.reflected(),
        validation,
        params: None,
        provenance: None,
        certification: Vec::new(),
        difference: None,
        error: None,
    };
    let mut grid = None;
    match build(&map, cfg.lambda, &smoothing_options(cfg)) {
        Err(e) => report.error = Some(e.to_string()),
        Ok((params, g)) => {
            report.params = Some(params);
            report.provenance = Some(g.provenance());
            let opts = CertifyOptions {
                samples: cfg.samples,
                fd_samples: (cfg.samples / 10).max(1),
                interface_samples: (cfg.samples / 10).max(1),
                seed: cfg.seed,
            };
            report.certification = g.certify(&opts);
            match g.difference(&difference_options(cfg)) {
                Ok(d) => report.difference = Some(d),
                Err(e) => report.error = Some(e.to_string()),
            }
            report.passed = report.error.is_none() && report.certification.iter().all(|r| r.passed);
            if let Some(n) = cfg.grid {
                let mut csv = String::from("x,y,z,gx,gy,gz\n");
                for (x, y) in g.grid_dump(n) {
                    let _ = writeln!(csv, "{:e},{:e},{:e},{:e},{:e},{:e}", x[0], x[1], x[2], y[0], y[1], y[2]);
                }
                grid = Some(csv);
            }
        }
    }
    eprintln!("smooth: {}", if report.passed { "PASS" } else { "FAIL" });
    for r in report.certification.iter().filter(|r| !r.passed) {
        eprintln!("  {} failed: worst {:e} > {:e} at {:?}", r.check, r.worst, r.tolerance, r.witness);
    }
    if let Some(e) = &report.error {
        eprintln!("  {e}");
    }
    let mut files = vec![("smooth.json", json(&report))];
    if let Some(csv) = grid {
        files.push(("grid.csv", csv));
    }
    match emit(cfg, &files) {
        Ok(()) if report.passed => EXIT_OK,
        Ok(()) => EXIT_CERTIFICATION,
        Err(e) => fail_io(e),
    }
}

pub fn sweep(cfg: &RunConfig) -> u8 {
    let map = match load(cfg) {
        Ok(Loaded::Map { map, .. }) => map,
        Ok(Loaded::Invalid { error, .. }) => {
            eprintln!("sweep: validation failed\n  {error}");
            return EXIT_VALIDATION;
        }
        Err(e) => return fail_io(e),
    };
    let smoothing = smoothing_options(cfg);
    let mut report = SweepReport {
        command: "sweep",
        config: cfg,
        passed: false,
        reflected: map.reflected(),
        params: None,
        rows: Vec::new(),
        achieved_at: None,
        error: None,
    };
    let params = match choose_params(&map, &smoothing) {
        Ok(p) => p,
        Err(e) => {
            report.error = Some(e.to_string());
            eprintln!("sweep: no admissible parameters\n  {e}");
            return match emit(cfg, &[("sweep.json", json(&report))]) {
                Ok(()) => EXIT_CERTIFICATION,
                Err(e) => fail_io(e),
            };
        }
    };
    let opts = SweepOptions { lambdas: cfg.lambdas.clone(), difference: difference_options(cfg), smoothing };
    let table = match lambda_sweep(&map, &params, &opts) {
        Ok(t) => t,
        Err(e) => return fail_io(e.to_string()),
    };
    let hit = table.first_below(cfg.epsilon).map(|r| (r.lambda, r.total_error()));
    report.params = Some(params);
    report.achieved_at = hit.map(|h| h.0);
    report.passed = hit.is_some();
    report.rows = table.rows.clone();
    let verdict = match hit {
        Some((l, err)) => format!("epsilon {:e}: PASS at lambda {l:e} (total error {err:.6e})\n", cfg.epsilon),
        None => format!("epsilon {:e}: FAIL (no lambda reaches it)\n", cfg.epsilon),
    };
    for row in table.rows.iter().filter(|r| r.note.is_some()) {
        eprintln!("  lambda {:e}: {}", row.lambda, row.note.as_deref().unwrap_or_default());
    }
    let csv = table.csv();
    let result = match &cfg.out {
        Some(dir) => write(dir, "sweep.csv", &csv)
            .and_then(|_| write(dir, "sweep.json", &json(&report)))
            .map(|_| print!("{verdict}")),
        None => {
            print!("{csv}{verdict}");
            Ok(())
        }
    };
    match result {
        Ok(()) if report.passed => EXIT_OK,
        Ok(()) => EXIT_TARGET,
        Err(e) => fail_io(e),
    }
}
