//! `vkctrl`: convergence studies, single-level solves and property checks for the
//! box-constrained von Kármán control problem.

mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::info;

use config::{ConfigError, Layer, RunConfig};
use vkctrl_core::convergence::{run_study, solve_level};
use vkctrl_core::solver::Fault;
use vkctrl_core::verify::{run_selected, VerifyOptions, PROPERTIES};

#[derive(Parser)]
#[command(name = "vkctrl", version, about)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a range of nested levels and write error/EOC tables.
    Study(Common),
    /// Solve one level and dump the control and state coefficients.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        level: Option<String>,
    },
    /// Run the discrete property checks.
    Verify {
        /// Print the property names and exit.
        #[arg(long)]
        list: bool,
        #[arg(long, default_value_t = VerifyOptions::default().seed)]
        seed: u64,
        /// Restrict to the named properties.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// `ex1` (unit square) or `ex2` (L-shape).
    #[arg(long)]
    case: Option<String>,
    /// Level range, e.g. `1..4`.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long = "ua", allow_hyphen_values = true)]
    ua: Option<String>,
    #[arg(long = "ub", allow_hyphen_values = true)]
    ub: Option<String>,
    /// Control region: `whole` or `x0,x1,y0,y1`.
    #[arg(long)]
    omega: Option<String>,
    /// Gauss points per direction for load integrals.
    #[arg(long)]
    quad_assembly: Option<String>,
    /// Gauss points per direction for error integrals.
    #[arg(long)]
    quad_error: Option<String>,
    /// Relative Newton residual tolerance.
    #[arg(long)]
    tol_newton: Option<String>,
    /// Relative control-change tolerance of the active-set loop.
    #[arg(long)]
    tol_pdas: Option<String>,
    /// Output directory (default: $VKCTRL_OUT, else `vkctrl-out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of `csv,md,dat`.
    #[arg(long)]
    format: Option<String>,
    /// `key = value` configuration file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn flag_layer(&self, level: Option<&String>) -> Layer {
        let mut l = Layer::new();
        let mut put = |k: &str, v: Option<&String>| {
            if let Some(v) = v {
                l.insert(k.to_string(), v.clone());
            }
        };
        put("case", self.case.as_ref());
        put("levels", self.levels.as_ref());
        put("level", level);
        put("alpha", self.alpha.as_ref());
        put("ua", self.ua.as_ref());
        put("ub", self.ub.as_ref());
        put("omega", self.omega.as_ref());
        put("quad_assembly", self.quad_assembly.as_ref());
        put("quad_error", self.quad_error.as_ref());
        put("tol_newton", self.tol_newton.as_ref());
        put("tol_pdas", self.tol_pdas.as_ref());
        put("format", self.format.as_ref());
        if let Some(o) = &self.out {
            l.insert("out".into(), o.to_string_lossy().into_owned());
        }
        l
    }

    fn resolve(&self, level: Option<&String>) -> Result<RunConfig, ConfigError> {
        let file = match &self.config {
            Some(p) => config::parse_file(p)?,
            None => Layer::new(),
        };
        config::resolve(&file, &self.flag_layer(level), std::env::var("VKCTRL_OUT").ok())
    }
}

fn study(cfg: &RunConfig) -> anyhow::Result<()> {
    let (a, b) = cfg.levels;
    info!("{} levels {a}..{b}", cfg.case.id);
    let table = run_study(&cfg.case, a..=b, &cfg.study_options())?;
    let written = output::write_study(&cfg.out, &cfg.case.id.to_string(), &table, cfg.formats)
        .with_context(|| format!("writing tables to {}", cfg.out.display()))?;
    for r in &table.records {
        info!(
            "level {} N={} outer={} newton={} {:.2}s",
            r.level, r.n_free, r.outer_iterations, r.newton_iterations, r.seconds
        );
    }
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

/// Header line, one control value per line, then the ψ1 and ψ2 free coefficients.
fn solve(cfg: &RunConfig) -> anyhow::Result<()> {
    let solved = solve_level(&cfg.case, cfg.level, &cfg.study_options(), None)
        .map_err(|e| anyhow::anyhow!("level {}: {e}", cfg.level))?;
    let sol = &solved.solution;
    let u = &sol.control;
    std::fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join(format!("solution_{}_level{}.txt", cfg.case.id, cfg.level));
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(
        w,
        "vkctrl-solution case={} level={} cells={} dofs={} alpha={:e} ua={:e} ub={:e} cost={:.17e}",
        cfg.case.id,
        cfg.level,
        u.len(),
        solved.problem.n_free(),
        cfg.case.alpha,
        cfg.case.u_a,
        cfg.case.u_b,
        sol.cost
    )?;
    for v in u.values() {
        writeln!(w, "{v:.17e}")?;
    }
    for c in sol.state.first.0.iter().chain(&sol.state.second.0) {
        writeln!(w, "{c:.17e}")?;
    }
    w.flush()?;
    println!("{}", path.display());
    Ok(())
}

fn verify(seed: u64, only: &[String], fault: Option<&str>) -> Result<bool, ExitCode> {
    let fault = match fault {
        None => Fault::None,
        Some("flip-adjoint-bracket") => Fault::FlipAdjointBracket,
        Some(other) => {
            eprintln!("error: unknown fault `{other}`");
            return Err(ExitCode::from(2));
        }
    };
    for n in only {
        if !PROPERTIES.contains(&n.as_str()) {
            eprintln!("error: unknown property `{n}` (see --list)");
            return Err(ExitCode::from(2));
        }
    }
    let names: Vec<&str> = if only.is_empty() { PROPERTIES.to_vec() } else { only.iter().map(String::as_str).collect() };
    let results = run_selected(&VerifyOptions { seed, fault }, &names);
    let mut ok = true;
    for r in &results {
        println!("{} {:<32} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        ok &= r.passed;
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    let run = |common: &Common, lvl: Option<&String>, f: fn(&RunConfig) -> anyhow::Result<()>| {
        let cfg = match common.resolve(lvl) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        };
        match f(&cfg) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        }
    };

    match &cli.command {
        Command::Study(common) => run(common, None, study),
        Command::Solve { common, level } => run(common, level.as_ref(), solve),
        Command::Verify { list, seed, only, inject_fault } => {
            if *list {
                for p in PROPERTIES {
                    println!("{p}");
                }
                return ExitCode::SUCCESS;
            }
            match verify(*seed, only, inject_fault.as_deref()) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::FAILURE,
                Err(code) => code,
            }
        }
    }
}
