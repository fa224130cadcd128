//! Command-line entry point: `validate`, `run` and `batch`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::controller::LawMode;
use crate::scenario::{Scenario, ScenarioConfig, ScenarioError};
use crate::sim::{RunOutput, RunSummary};

pub const OUT_ENV: &str = "SAFELEARN_OUT";

#[derive(Debug, Parser)]
#[command(name = "safelearn", version, about = "Safe control with online-learned interval models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check every load-time assumption of a scenario file.
    Validate { file: PathBuf },
    /// Simulate one scenario and write its logs.
    Run {
        file: PathBuf,
        #[arg(long, env = OUT_ENV, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Apply `u_nom` unfiltered.
        #[arg(long)]
        no_safety: bool,
        /// Also write plot-ready CSVs.
        #[arg(long)]
        plots: bool,
    },
    /// Run every scenario matching a glob and write an aggregate table.
    Batch {
        pattern: String,
        #[arg(long, env = OUT_ENV, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

pub const AGGREGATE_HEADER: &str =
    "scenario,status,min_h,min_h_v,max_e2,max_j,drops,restores,synthesized,violations,measurements,error";

/// Exit codes: 0 success, 1 safety violation or failed validation, 2 other errors.
pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Validate { file } => cmd_validate(&file),
        Command::Run { file, out, seed, horizon, dt, no_safety, plots } => {
            let overrides = Overrides { seed, horizon, dt, no_safety };
            match run_file(&file, &overrides) {
                Ok((scenario, output)) => {
                    let dir = out.join(&scenario.config.name);
                    if let Err(e) = write_artifacts(&dir, &scenario, &output, plots) {
                        eprintln!("error: {e}");
                        return 2;
                    }
                    print!("{}", output.summary.to_text());
                    println!("artifacts = {}", dir.display());
                    if output.summary.safe() {
                        0
                    } else {
                        1
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code(&e)
                }
            }
        }
        Command::Batch { pattern, out, jobs } => cmd_batch(&pattern, &out, jobs),
    }
}

fn exit_code(e: &ScenarioError) -> i32 {
    match e {
        ScenarioError::ValidationFailed(_) => 1,
        _ => 2,
    }
}

fn cmd_validate(file: &Path) -> i32 {
    let cfg = match ScenarioConfig::load(file) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let report = Scenario::validate(&cfg);
    print!("{}", report.to_text());
    if report.passed() {
        println!("valid: {}", cfg.name);
        0
    } else {
        println!("invalid: {} ({} failed checks)", cfg.name, report.failures().len());
        1
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub no_safety: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(h) = self.horizon {
            cfg.schedule.horizon = h;
        }
        if let Some(dt) = self.dt {
            cfg.schedule.dt = dt;
        }
        if self.no_safety {
            cfg.controller.law = LawMode::Nominal;
        }
    }
}

pub fn run_file(file: &Path, overrides: &Overrides) -> Result<(Scenario, RunOutput), ScenarioError> {
    let mut cfg = ScenarioConfig::load(file)?;
    overrides.apply(&mut cfg);
    let scenario = Scenario::build(cfg)?;
    let output = scenario.run()?;
    Ok((scenario, output))
}

fn write(path: PathBuf, text: &str) -> Result<(), String> {
    std::fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// `trajectory.csv`, `events.csv`, `summary.txt`, `scenario.toml`, and with
/// `plots` the `fig_*.csv` files.
pub fn write_artifacts(dir: &Path, scenario: &Scenario, output: &RunOutput, plots: bool) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    write(dir.join("trajectory.csv"), &output.log.to_csv())?;
    write(dir.join("events.csv"), &output.log.events_csv())?;
    write(dir.join("summary.txt"), &output.summary.to_text())?;
    write(dir.join("scenario.toml"), &scenario.config.to_toml())?;
    if plots {
        for (name, text) in plot_tables(output) {
            write(dir.join(name), &text)?;
        }
    }
    Ok(())
}

/// Plot-ready slices of the trajectory log.
pub fn plot_tables(output: &RunOutput) -> Vec<(&'static str, String)> {
    let log = &output.log;
    let n = log.n;
    let mut pos = String::from("t,p0,p1,h\n");
    let mut e2 = String::from("t,e2_norm,h_v\n");
    let mut rho = String::from("t,j,rho1\n");
    let mut inputs = String::from("t");
    for i in 0..log.m {
        let _ = write!(inputs, ",u{i},u_nom{i}");
    }
    inputs.push('\n');
    let mut gerr = String::from("t,g_err,width_g\n");
    for r in &log.rows {
        let p1 = if n > 1 { r.x[1] } else { 0.0 };
        let _ = writeln!(pos, "{},{},{},{}", r.t, r.x[0], p1, r.h);
        let _ = writeln!(e2, "{},{},{}", r.t, r.e2_norm, r.h_v);
        let _ = writeln!(rho, "{},{},{}", r.t, r.j, u8::from(r.rho[0]));
        let _ = write!(inputs, "{}", r.t);
        for i in 0..log.m {
            let _ = write!(inputs, ",{},{}", r.u[i], r.u_nom[i]);
        }
        inputs.push('\n');
        let _ = writeln!(gerr, "{},{},{}", r.t, r.g_err, r.width_g);
    }
    vec![
        ("fig_position.csv", pos),
        ("fig_e2.csv", e2),
        ("fig_rho.csv", rho),
        ("fig_inputs.csv", inputs),
        ("fig_g_error.csv", gerr),
    ]
}

fn counts(m: &std::collections::BTreeMap<usize, usize>) -> String {
    m.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(" ")
}

/// One aggregate line; wall-clock time is left out so that rows are reproducible.
pub fn aggregate_row(name: &str, result: &Result<RunSummary, String>) -> String {
    match result {
        Ok(s) => format!(
            "{name},{},{:.9e},{:.9e},{:.9e},{},{},{},{},{},{},",
            if s.safe() { "pass" } else { "fail" },
            s.min_h,
            s.min_h_v,
            s.max_e2,
            s.max_j,
            counts(&s.drops),
            counts(&s.restores),
            s.synthesized,
            s.violations,
            s.measurements
        ),
        Err(e) => format!("{name},error,,,,,,,,,,\"{}\"", e.replace('"', "'").replace('\n', " ")),
    }
}

/// Runs the matched files with `jobs` workers; returns the aggregate CSV and whether all passed.
pub fn batch(files: &[PathBuf], jobs: usize, out: Option<&Path>) -> (String, bool) {
    let work = |f: &PathBuf| -> (String, Result<RunSummary, String>) {
        let name = f.file_stem().map_or_else(|| f.display().to_string(), |s| s.to_string_lossy().into_owned());
        let res = run_file(f, &Overrides::default()).map_err(|e| e.to_string()).and_then(|(sc, o)| {
            if let Some(out) = out {
                write_artifacts(&out.join(&sc.config.name), &sc, &o, false)?;
            }
            Ok(o.summary)
        });
        (name, res)
    };
    let results: Vec<_> = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(|| files.par_iter().map(work).collect()),
        Err(_) => files.iter().map(work).collect(),
    };
    let mut text = String::from(AGGREGATE_HEADER);
    text.push('\n');
    let mut all = true;
    for (name, r) in &results {
        all &= matches!(r, Ok(s) if s.safe());
        text.push_str(&aggregate_row(name, r));
        text.push('\n');
    }
    (text, all)
}

fn cmd_batch(pattern: &str, out: &Path, jobs: usize) -> i32 {
    let files: Vec<PathBuf> = match glob::glob(pattern) {
        Ok(paths) => paths.filter_map(Result::ok).collect(),
        Err(e) => {
            eprintln!("error: bad pattern {pattern}: {e}");
            return 2;
        }
    };
    if files.is_empty() {
        eprintln!("error: no scenario matches {pattern}");
        return 2;
    }
    let (text, all) = batch(&files, jobs, Some(out));
    if let Err(e) = std::fs::create_dir_all(out).map_err(|e| e.to_string()).and_then(|_| write(out.join("aggregate.csv"), &text)) {
        eprintln!("error: {e}");
        return 2;
    }
    print!("{text}");
    if all {
        0
    } else {
        1
    }
}
