//! Command-line entry point. Exit codes: 0 success, 2 configuration or I/O
//! error (and no arguments), 3 numerical failure or an exceeded stage budget.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};

pub use config::{AuxChoice, ExperimentConfig, WeightRef};

use crate::auxmetric::PathNorm;
use crate::cubature::CubeFamily;
use crate::error::{Error, Result};
use crate::ineqlab::FpForm;
use crate::pde::Boundary;
use crate::report::{Bundle, Report, Row, Stage};
use crate::suite::{checks, CheckResult, GridSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const REPORT: &str = "report.json";

#[derive(Parser, Debug)]
#[command(name = "agmon", version, about = "Matrix weights, auxiliary functions, Agmon distances and Green matrices")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Catalog name or path to a JSON weight; repeatable.
    #[arg(long, global = true)]
    weight: Vec<String>,
    /// Grid as N,L: N nodes per axis on [−L, L]ⁿ.
    #[arg(long, global = true, value_name = "N,L")]
    grid: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify class membership on a cube family.
    Certify {
        /// bp, bp-det, nd, ainf, a2inf, apinf, nc, rbm or cross.
        #[arg(long)]
        class: Option<String>,
        #[arg(long)]
        p: Option<f64>,
        /// Cube family as a JSON file or inline JSON.
        #[arg(long)]
        family: Option<String>,
        /// NC over every family cube instead of critical-scale cubes.
        #[arg(long)]
        nc_all_cubes: bool,
    },
    /// Sample an auxiliary function on the grid.
    Aux {
        #[arg(long, value_enum)]
        kind: Option<AuxChoice>,
    },
    /// Lattice Agmon distance from a source node.
    Agmon {
        #[arg(long, value_enum)]
        kind: Option<AuxChoice>,
        /// Source node as i,j,k.
        #[arg(long, value_name = "I,J,K")]
        source: Option<String>,
        /// linf or l2.
        #[arg(long)]
        path_norm: Option<String>,
    },
    /// Green matrix for one pole.
    Green {
        /// Pole node as i,j,k.
        #[arg(long, value_name = "I,J,K")]
        pole: Option<String>,
        /// Far-field boundary centered at the pole instead of zero Dirichlet.
        #[arg(long)]
        radiation: bool,
    },
    /// Decay-envelope fits of the Green matrix against the Agmon distance.
    Decay {
        #[arg(long, value_enum)]
        kind: Option<AuxChoice>,
        #[arg(long, value_name = "I,J,K")]
        pole: Option<String>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        no_small_scale: bool,
    },
    /// Fefferman–Phong ratios over the test-function library.
    Fp {
        /// Comma-separated subset of lower, norm, upper.
        #[arg(long)]
        forms: Option<String>,
    },
    /// Matrix Poincaré ratios on the configured cubes.
    Poincare {
        #[arg(long)]
        level: Option<u32>,
    },
    /// Lower Fefferman–Phong failure and NC decay for the rank-one-at-infinity weight.
    Counterexample {
        /// Only the Fefferman–Phong ratio (with --nc, both).
        #[arg(long)]
        fp: bool,
        /// Only the NC witness (with --fp, both).
        #[arg(long)]
        nc: bool,
        /// Cutoff radii.
        #[arg(long = "R", value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        /// Critical masses m for the cubes Q(x_m, √m).
        #[arg(long = "m", value_delimiter = ',')]
        masses: Option<Vec<f64>>,
    },
    /// Landscape function against the auxiliary functions at probe points.
    Landscape {
        #[arg(long)]
        probes: Option<usize>,
    },
    /// Run the verification catalog with per-stage time budgets.
    All {
        /// Comma-separated check ids; an empty list runs nothing.
        #[arg(long)]
        only: Option<String>,
        /// Reduced problem sizes.
        #[arg(long)]
        quick: bool,
        /// Seconds allowed per stage.
        #[arg(long)]
        budget: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Certify { .. } => "certify",
            Command::Aux { .. } => "aux",
            Command::Agmon { .. } => "agmon",
            Command::Green { .. } => "green",
            Command::Decay { .. } => "decay",
            Command::Fp { .. } => "fp",
            Command::Poincare { .. } => "poincare",
            Command::Counterexample { .. } => "counterexample",
            Command::Landscape { .. } => "landscape",
            Command::All { .. } => "all",
        }
    }
}

fn list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| Error::Config(format!("bad {what} '{s}'")))).collect()
}

fn named<T: serde::de::DeserializeOwned>(s: &str, what: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| Error::Config(format!("unknown {what} '{s}'")))
}

fn parse_grid(s: &str) -> Result<GridSpec> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [n, l] => {
            let n: usize = n.trim().parse().map_err(|_| Error::Config(format!("bad grid '{s}': N must be an integer")))?;
            let l: f64 = l.trim().parse().map_err(|_| Error::Config(format!("bad grid '{s}': L must be a number")))?;
            if n < 3 || !(l > 0.0) {
                return Err(Error::Config(format!("bad grid '{s}': need N >= 3 and L > 0")));
            }
            Ok(GridSpec { l, n })
        }
        _ => Err(Error::Config(format!("bad grid '{s}': expected N,L"))),
    }
}

/// Merges the config file (if any) with the flags; flags win.
fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let g = &cli.global;
    let mut c = match &g.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(o) = &g.out {
        c.out = o.clone();
    }
    if let Some(s) = g.seed {
        c.seed = s;
    }
    if g.threads.is_some() {
        c.threads = g.threads;
    }
    if !g.weight.is_empty() {
        c.weights = g.weight.iter().map(|w| WeightRef::Name(w.clone())).collect();
    }
    if let Some(s) = &g.grid {
        c.grid = parse_grid(s)?;
    }
    match &cli.command {
        Command::Certify { class, p, family, nc_all_cubes } => {
            if let Some(k) = class {
                c.certify.class = k.clone();
            }
            if let Some(p) = p {
                c.certify.p = *p;
            }
            if let Some(f) = family {
                let text = if f.trim_start().starts_with('{') {
                    f.clone()
                } else {
                    std::fs::read_to_string(f).map_err(|e| Error::Config(format!("family {f}: {e}")))?
                };
                c.family = serde_json::from_str::<CubeFamily>(&text).map_err(|e| Error::Config(format!("family {f}: {e}")))?;
            }
            c.certify.nc_all_cubes |= *nc_all_cubes;
        }
        Command::Aux { kind } => {
            if let Some(k) = kind {
                c.field.kind = *k;
            }
        }
        Command::Agmon { kind, source, path_norm } => {
            if let Some(k) = kind {
                c.field.kind = *k;
            }
            if let Some(s) = source {
                c.field.pole = Some(list(s, "source")?);
            }
            if let Some(p) = path_norm {
                c.field.path_norm = named::<PathNorm>(p, "path norm")?;
            }
        }
        Command::Green { pole, radiation } => {
            if let Some(s) = pole {
                c.field.pole = Some(list(s, "pole")?);
            }
            if *radiation {
                // The center is filled in per grid once the pole is known.
                c.field.boundary = Boundary::Radiation { center: Vec::new() };
            }
        }
        Command::Decay { kind, pole, p, no_small_scale } => {
            if let Some(k) = kind {
                c.field.kind = *k;
            }
            if let Some(s) = pole {
                c.field.pole = Some(list(s, "pole")?);
            }
            if let Some(p) = p {
                c.decay.p = *p;
            }
            c.decay.small_scale &= !*no_small_scale;
        }
        Command::Fp { forms } => {
            if let Some(f) = forms {
                c.fp.forms = f.split(',').map(|t| named::<FpForm>(t.trim(), "form")).collect::<Result<_>>()?;
            }
        }
        Command::Poincare { level } => {
            if let Some(l) = level {
                c.poincare.level = *l;
            }
        }
        Command::Counterexample { fp, nc, radii, masses } => {
            if *fp || *nc {
                c.counterexample.fp = *fp;
                c.counterexample.nc = *nc;
            }
            if let Some(r) = radii {
                c.counterexample.radii = r.clone();
            }
            if let Some(m) = masses {
                c.counterexample.masses = m.clone();
            }
        }
        Command::Landscape { probes } => {
            if let Some(p) = probes {
                c.landscape.probes = *p;
            }
        }
        Command::All { only, quick, budget } => {
            if let Some(o) = only {
                c.all.only = Some(list(o, "check list")?);
            }
            c.all.quick |= *quick;
            if let Some(b) = budget {
                if !(*b > 0.0) {
                    return Err(Error::Config(format!("budget must be positive, got {b}")));
                }
                c.all.stage_budget = *b;
            }
        }
    }
    c.normalize();
    Ok(c)
}

/// An empty radiation center means "at the pole".
fn fill_radiation_center(c: &mut ExperimentConfig) -> Result<()> {
    if let Boundary::Radiation { center } = &c.field.boundary {
        if center.is_empty() {
            let g = crate::grid::Grid::new(c.n, c.grid.l, c.grid.n)?;
            let pole = match &c.field.pole {
                Some(idx) if idx.len() == g.dim && idx.iter().all(|&i| i < g.npa) => g.index(idx),
                Some(idx) => return Err(Error::Config(format!("pole {idx:?} is outside the grid"))),
                None => g.nearest(&vec![0.0; g.dim]),
            };
            c.field.boundary = Boundary::Radiation { center: g.point(pole) };
        }
    }
    Ok(())
}

fn exit_for(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

/// Parses `argv` (program name first), runs the subcommand, returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    let name = cli.command.name();
    let cfg = match resolve(&cli).and_then(|mut c| fill_radiation_center(&mut c).map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("agmon {name}: {e}");
            return exit_for(&e);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.threads.unwrap_or(0)).build() {
        Ok(p) => Arc::new(p),
        Err(e) => {
            eprintln!("agmon {name}: cannot start {:?} worker threads: {e}", cfg.threads);
            return EXIT_CONFIG;
        }
    };
    let result = if name == "all" { run_all(&cfg, pool) } else { pool.install(|| run_single(name, &cfg)) };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("agmon {name}: {e}");
            exit_for(&e)
        }
    }
}

fn run_single(name: &str, cfg: &ExperimentConfig) -> Result<i32> {
    let mut bundle = Bundle::create(&cfg.out)?;
    let mut report = Report::new(name, cfg)?;
    let t = Instant::now();
    match name {
        "certify" => commands::certify_cmd(cfg, &mut bundle, &mut report),
        "aux" => commands::aux_cmd(cfg, &mut bundle, &mut report),
        "agmon" => commands::agmon_cmd(cfg, &mut bundle, &mut report),
        "green" => commands::green_cmd(cfg, &mut bundle, &mut report),
        "decay" => commands::decay_cmd(cfg, &mut bundle, &mut report),
        "fp" => commands::fp_cmd(cfg, &mut bundle, &mut report),
        "poincare" => commands::poincare_cmd(cfg, &mut bundle, &mut report),
        "counterexample" => commands::counterexample_cmd(cfg, &mut bundle, &mut report),
        "landscape" => commands::landscape_cmd(cfg, &mut bundle, &mut report),
        other => unreachable!("subcommand {other} is dispatched elsewhere"),
    }?;
    report.stages.push(Stage {
        name: name.into(),
        seconds: t.elapsed().as_secs_f64(),
        budget: None,
        over_budget: false,
        pass: None,
        error: None,
    });
    let path = bundle.finish(REPORT, &mut report)?;
    eprintln!("wrote {}", path.display());
    Ok(EXIT_OK)
}

/// Each stage runs on its own thread inside the pool. A stage that outlives its
/// budget cannot be cancelled, so the run stops there: the partial report is
/// written and the process exits 3, which also ends the orphaned stage.
fn run_all(cfg: &ExperimentConfig, pool: Arc<rayon::ThreadPool>) -> Result<i32> {
    let suite = cfg.suite_config();
    let budget = cfg.all.stage_budget;
    let mut bundle = Bundle::create(&cfg.out)?;
    let mut report = Report::new("all", cfg)?;
    let selected: Vec<(usize, &'static str, crate::suite::CheckFn)> = checks()
        .into_iter()
        .enumerate()
        .filter(|(i, _)| cfg.all.only.as_ref().is_none_or(|o| o.contains(&(*i as u32 + 1))))
        .map(|(i, (n, f))| (i + 1, n, f))
        .collect();
    let mut rows: Vec<Row> = Vec::new();
    let mut results: Vec<CheckResult> = Vec::new();
    let mut code = EXIT_OK;
    for (id, name, f) in selected {
        let (tx, rx) = mpsc::channel();
        let (s, p) = (suite.clone(), pool.clone());
        let t = Instant::now();
        std::thread::spawn(move || {
            let _ = tx.send(p.install(|| f(&s)));
        });
        let outcome = rx.recv_timeout(Duration::from_secs_f64(budget));
        let seconds = t.elapsed().as_secs_f64();
        let mut stage = Stage { name: name.into(), seconds, budget: Some(budget), over_budget: false, pass: None, error: None };
        match outcome {
            Ok(Ok(r)) => {
                eprintln!("[{id:2}] {name}: {} {} ({seconds:.1} s)", if r.pass { "PASS" } else { "FAIL" }, r.summary);
                stage.pass = Some(r.pass);
                rows.extend(r.rows.iter().cloned());
                results.push(r);
                report.stages.push(stage);
            }
            Ok(Err(e)) => {
                eprintln!("[{id:2}] {name}: ERROR {e}");
                stage.error = Some(e.to_string());
                report.stages.push(stage);
                code = code.max(exit_for(&e));
            }
            Err(_) => {
                eprintln!("[{id:2}] {name}: exceeded its budget of {budget} s; stopping");
                stage.over_budget = true;
                stage.error = Some(format!("exceeded the stage budget of {budget} s"));
                report.stages.push(stage);
                code = EXIT_NUMERICAL;
                break;
            }
        }
    }
    bundle.csv("all.csv", &rows)?;
    report.section("checks", &results)?;
    let passed = results.iter().filter(|r| r.pass).count();
    report.section("summary", &serde_json::json!({"run": results.len(), "passed": passed}))?;
    let path = bundle.finish(REPORT, &mut report)?;
    eprintln!("{passed}/{} checks passed; wrote {}", results.len(), path.display());
    Ok(code)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_flag_parses() {
        assert_eq!(parse_grid("48,3").unwrap(), GridSpec { l: 3.0, n: 48 });
        assert!(parse_grid("48").is_err());
        assert!(parse_grid("2,1").is_err());
        assert!(parse_grid("8,-1").is_err());
    }

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from(["agmon", "--seed", "7", "--grid", "12,1.5", "counterexample", "--fp", "--R", "10,20"]).unwrap();
        let c = resolve(&cli).unwrap();
        assert_eq!((c.seed, c.cert.seed, c.grid.n), (7, 7, 12));
        assert!(c.counterexample.fp && !c.counterexample.nc);
        assert_eq!(c.counterexample.radii, vec![10.0, 20.0]);
    }

    #[test]
    fn empty_only_list_selects_nothing() {
        let cli = Cli::try_parse_from(["agmon", "all", "--only", ""]).unwrap();
        assert_eq!(resolve(&cli).unwrap().all.only, Some(vec![]));
    }
}
