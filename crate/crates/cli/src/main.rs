//! Command-line driver: period tables, set energies, verification suites,
//! cube classification, and pattern comparisons, emitted as CSV or JSON.
//!
//! Flags override `key = value` pairs from `--config`, which override the
//! built-in defaults. `STRIPE_THREADS` caps internal parallelism. Identical
//! configuration and seed produce byte-identical output.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use stripes_core::{
    classify_cubes, compare_patterns, decomposed_energy, direct_energy, h_box, h_star, run_suite,
    suite_names, ModelParams, PeriodicSet, QuadratureSpec,
};

#[derive(Parser)]
#[command(
    name = "stripes",
    about = "Energy tables, evaluations, and self-checks for striped-pattern functionals",
    version
)]
struct Cli {
    /// Plain-text `key = value` defaults (keys match the long flag names).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct ParamArgs {
    /// Ambient dimension d.
    #[arg(long)]
    dim: Option<usize>,
    /// Kernel exponent p (requires p >= d + 2).
    #[arg(long)]
    p: Option<f64>,
    /// Regularization tau (0 allowed only where noted).
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal and box-constrained stripe widths over a tau grid.
    PeriodTable {
        #[command(flatten)]
        params: ParamArgs,
        /// Comma-separated tau values, e.g. "0,0.01,0.05".
        #[arg(long)]
        tau_grid: Option<String>,
        /// Box side for the constrained column; per-row 2*h_star when absent.
        #[arg(long = "box")]
        box_l: Option<f64>,
        /// Solver tolerance on widths.
        #[arg(long)]
        tol: Option<f64>,
        /// csv or json.
        #[arg(long)]
        format: Option<String>,
    },
    /// Direct and decomposed energy of a set file, as JSON.
    Energy {
        #[command(flatten)]
        params: ParamArgs,
        /// Set file (format of `PeriodicSet::write_to`).
        #[arg(long)]
        set: PathBuf,
        /// Evaluation grid resolution per axis.
        #[arg(long)]
        grid_n: Option<usize>,
        /// Quadrature error budget.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run a named self-check suite (or "all"); exit status reflects passing.
    Verify {
        /// Suite name; use "list" to print the available names.
        #[arg(default_value = "all")]
        suite: String,
        /// Ensemble seed.
        #[arg(long)]
        seed: Option<u64>,
        /// text or json.
        #[arg(long)]
        format: Option<String>,
    },
    /// Label window positions of a set by stripe orientation, as CSV.
    Classify {
        /// Set file (format of `PeriodicSet::write_to`).
        #[arg(long)]
        set: PathBuf,
        /// Window side l.
        #[arg(long)]
        cube_l: Option<f64>,
        /// Minimal stripe width eta resolved by the fit.
        #[arg(long)]
        eta: Option<f64>,
        /// Distance threshold delta separating stripe-like from unstructured.
        #[arg(long)]
        delta: Option<f64>,
        /// Slice resolution (bins per window).
        #[arg(long)]
        grid_n: Option<usize>,
    },
    /// Rank candidate patterns by energy in a periodic box, as CSV.
    Compare {
        #[command(flatten)]
        params: ParamArgs,
        /// Box side; defaults to 8 optimal periods.
        #[arg(long = "box")]
        box_l: Option<f64>,
        /// Evaluation grid resolution per axis.
        #[arg(long)]
        grid_n: Option<usize>,
        /// csv or json.
        #[arg(long)]
        format: Option<String>,
    },
}

/// `key = value` lines; `#` starts a comment; unknown keys are rejected so
/// typos fail loudly.
fn load_config(path: &Path) -> Result<HashMap<String, String>> {
    const KEYS: &[&str] = &[
        "dim", "p", "tau", "box", "grid-n", "tol", "eta", "delta", "cube-l", "seed", "format",
        "tau-grid",
    ];
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let mut map = HashMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected `key = value`", ln + 1))?;
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            bail!(
                "config line {}: unknown key {:?} (known: {})",
                ln + 1,
                key,
                KEYS.join(", ")
            );
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

struct Settings {
    config: HashMap<String, String>,
}

impl Settings {
    fn get<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.config.get(key) {
            Some(raw) => raw
                .parse()
                .map_err(|_| anyhow!("config key {key:?}: cannot parse {raw:?}")),
            None => Ok(default),
        }
    }

    fn params(&self, args: &ParamArgs, default_tau: f64) -> Result<ModelParams> {
        let dim = self.get(args.dim, "dim", 1)?;
        let p = self.get(args.p, "p", (dim + 2) as f64)?;
        let tau = self.get(args.tau, "tau", default_tau)?;
        Ok(ModelParams::new(dim, p, tau)?)
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)
            .with_context(|| format!("cannot write {}", path.display())),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            match lock.write_all(content.as_bytes()).and_then(|()| lock.flush()) {
                // A closed downstream pipe (e.g. `| head`) is not an error.
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                other => Ok(other?),
            }
        }
    }
}

fn read_set(path: &Path) -> Result<PeriodicSet> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(PeriodicSet::read_from(&mut BufReader::new(file))
        .with_context(|| format!("parsing {}", path.display()))?)
}

/// Lossless float cell: 17 significant digits.
fn cell(v: f64) -> String {
    format!("{v:.16e}")
}

fn cmd_period_table(
    s: &Settings,
    args: &ParamArgs,
    tau_grid: Option<String>,
    box_l: Option<f64>,
    tol: Option<f64>,
    format: Option<String>,
) -> Result<String> {
    let grid_raw = s.get(tau_grid, "tau-grid", "0,0.001,0.01,0.05,0.1".into())?;
    let taus: Vec<f64> = grid_raw
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| anyhow!("bad tau value {t:?}")))
        .collect::<Result<_>>()?;
    let box_l = match box_l {
        Some(v) => Some(v),
        None => s.config.get("box").map(|r| r.parse()).transpose()?,
    };
    let tol = s.get(tol, "tol", 1e-10)?;
    let format = s.get(format, "format", "csv".into())?;

    struct Row {
        tau: f64,
        box_l: Option<f64>,
        h_star: Option<f64>,
        e_star: Option<f64>,
        h_box: Option<f64>,
        e_box: Option<f64>,
        drift_times_l: Option<f64>,
        width_tol: f64,
        error: String,
    }
    let mut rows = Vec::new();
    for &tau in &taus {
        let row = (|| -> Result<Row> {
            let params = s
                .params(args, 0.0)
                .and_then(|p| Ok(ModelParams::new(p.dim, p.p, tau)?))?;
            let star = h_star(&params, tol)?;
            let l = box_l.unwrap_or(2.0 * star.h);
            let boxed = h_box(&params, l, tol)?;
            Ok(Row {
                tau,
                box_l: Some(l),
                h_star: Some(star.h),
                e_star: Some(star.energy),
                h_box: Some(boxed.h),
                e_box: Some(boxed.energy),
                drift_times_l: Some((boxed.h - star.h).abs() * l),
                width_tol: tol,
                error: String::new(),
            })
        })()
        .unwrap_or_else(|e| Row {
            tau,
            box_l,
            h_star: None,
            e_star: None,
            h_box: None,
            e_box: None,
            drift_times_l: None,
            width_tol: tol,
            error: e.to_string(),
        });
        rows.push(row);
    }

    if format == "json" {
        let objs: Vec<serde_json::Value> = rows
            .iter()
            .map(|r| {
                json!({
                    "tau": r.tau, "box_l": r.box_l,
                    "h_star": r.h_star, "e_star": r.e_star,
                    "h_box": r.h_box, "e_box": r.e_box,
                    "drift_times_l": r.drift_times_l,
                    "width_tol": r.width_tol, "error": r.error,
                })
            })
            .collect();
        return Ok(serde_json::to_string_pretty(&objs)? + "\n");
    }
    let mut out = String::from("tau,box_l,h_star,e_star,h_box,e_box,drift_times_l,width_tol,error\n");
    let opt = |v: Option<f64>| v.map(cell).unwrap_or_default();
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            cell(r.tau),
            opt(r.box_l),
            opt(r.h_star),
            opt(r.e_star),
            opt(r.h_box),
            opt(r.e_box),
            opt(r.drift_times_l),
            cell(r.width_tol),
            r.error
        ));
    }
    Ok(out)
}

fn cmd_energy(
    s: &Settings,
    args: &ParamArgs,
    set: &Path,
    grid_n: Option<usize>,
    tol: Option<f64>,
) -> Result<String> {
    let e = read_set(set)?;
    let p = s.get(args.p, "p", (e.dim() + 2) as f64)?;
    let tau = s.get(args.tau, "tau", 0.05)?;
    if let Some(dim) = args.dim {
        if dim != e.dim() {
            bail!("--dim {dim} contradicts the set file (dim {})", e.dim());
        }
    }
    let params = ModelParams::new(e.dim(), p, tau)?;
    let grid_n = s.get(grid_n, "grid-n", 64)?;
    let mut quad = QuadratureSpec::for_box(e.period(), grid_n);
    quad.tol = s.get(tol, "tol", quad.tol)?;
    let direct = direct_energy(&e, &params, &quad)?;
    let split = decomposed_energy(&e, &params, &quad)?;
    let report = json!({
        "params": { "dim": params.dim, "p": params.p, "tau": params.tau },
        "grid_n": grid_n,
        "direct": direct,
        "decomposed": split,
        "gap_direct_minus_decomposed": direct.total - split.total,
    });
    Ok(serde_json::to_string_pretty(&report)? + "\n")
}

fn cmd_verify(s: &Settings, suite: &str, seed: Option<u64>, format: Option<String>) -> Result<(String, bool)> {
    if suite == "list" {
        let mut names = vec!["all"];
        names.extend(suite_names());
        return Ok((names.join("\n") + "\n", true));
    }
    let seed = s.get(seed, "seed", 0)?;
    let format = s.get(format, "format", "text".into())?;
    let report = run_suite(suite, seed)?;
    let text = if format == "json" { report.to_json()? + "\n" } else { report.to_text() };
    Ok((text, report.passed))
}

fn cmd_classify(
    s: &Settings,
    set: &Path,
    cube_l: Option<f64>,
    eta: Option<f64>,
    delta: Option<f64>,
    grid_n: Option<usize>,
) -> Result<String> {
    let e = read_set(set)?;
    let cube_l = s.get(cube_l, "cube-l", e.period() / 4.0)?;
    let eta = s.get(eta, "eta", cube_l / 4.0)?;
    let delta = s.get(delta, "delta", 0.25)?;
    let resolution = s.get(grid_n, "grid-n", 32)?;
    let labels = classify_cubes(&e, cube_l, eta, delta, resolution)?;
    let mut buf = Vec::new();
    labels.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf)?)
}

fn cmd_compare(
    s: &Settings,
    args: &ParamArgs,
    box_l: Option<f64>,
    grid_n: Option<usize>,
    format: Option<String>,
) -> Result<String> {
    let dim = s.get(args.dim, "dim", 2)?;
    let p = s.get(args.p, "p", (dim + 2) as f64)?;
    let tau = s.get(args.tau, "tau", 0.02)?;
    let params = ModelParams::new(dim, p, tau)?;
    let box_l = match box_l {
        Some(v) => v,
        None => match s.config.get("box") {
            Some(raw) => raw.parse().map_err(|_| anyhow!("config key \"box\": bad value"))?,
            None => 8.0 * h_star(&params, 1e-10)?.h,
        },
    };
    let grid_n = s.get(grid_n, "grid-n", 96)?;
    let format = s.get(format, "format", "csv".into())?;
    let rows = compare_patterns(&params, box_l, grid_n)?;
    if format == "json" {
        return Ok(serde_json::to_string_pretty(&rows)? + "\n");
    }
    // The shared evaluation budget doubles as the per-row error bound.
    let budget = 1e-6;
    let mut out = String::from("pattern,energy,volume_fraction,energy_error_budget\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.name,
            cell(r.energy),
            cell(r.volume_fraction),
            cell(budget)
        ));
    }
    Ok(out)
}

fn thread_cap() -> Result<()> {
    if let Ok(raw) = std::env::var("STRIPE_THREADS") {
        let n: usize = raw
            .parse()
            .map_err(|_| anyhow!("STRIPE_THREADS must be a positive integer, got {raw:?}"))?;
        if n == 0 {
            bail!("STRIPE_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow!("thread pool: {e}"))?;
    }
    Ok(())
}

fn run() -> Result<bool> {
    thread_cap()?;
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => load_config(path)?,
        None => HashMap::new(),
    };
    let s = Settings { config };
    let (content, ok) = match &cli.command {
        Command::PeriodTable { params, tau_grid, box_l, tol, format } => (
            cmd_period_table(&s, params, tau_grid.clone(), *box_l, *tol, format.clone())?,
            true,
        ),
        Command::Energy { params, set, grid_n, tol } => {
            (cmd_energy(&s, params, set, *grid_n, *tol)?, true)
        }
        Command::Verify { suite, seed, format } => {
            let (text, passed) = cmd_verify(&s, suite, *seed, format.clone())?;
            (text, passed)
        }
        Command::Classify { set, cube_l, eta, delta, grid_n } => {
            (cmd_classify(&s, set, *cube_l, *eta, *delta, *grid_n)?, true)
        }
        Command::Compare { params, box_l, grid_n, format } => {
            (cmd_compare(&s, params, *box_l, *grid_n, format.clone())?, true)
        }
    };
    emit(&cli.out, &content)?;
    Ok(ok)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
