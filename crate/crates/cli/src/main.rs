use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ide_attractor::model::Variant;
use ide_attractor::report::{self, fmt_f64};
use ide_attractor::scenario::{parse_config, ScenarioConfig};
use ide_attractor::Error;

/// Periodic attractors of seasonal integrodifference population models.
#[derive(Parser)]
#[command(name = "ide-attractor", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the number of grid subintervals.
    #[arg(long)]
    nodes: Option<usize>,
    /// Override the target tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Override the seasonal forcing pattern.
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
}

#[derive(Subcommand)]
enum Command {
    /// Iterate forward from the initial condition.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Number of steps (defaults to the run horizon).
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Certify a contraction and compute one period of attractor fibers.
    Attractor {
        #[command(flatten)]
        common: Common,
    },
    /// Run all four seasonal patterns and compare mean total populations.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Pullback fibers of the semilinear system in the scenario, or the scalar demo.
    Semilinear {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-step Lipschitz constants, period product and pullback depth.
    Lipschitz {
        #[command(flatten)]
        common: Common,
    },
    /// Mean total population under grid refinement.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Node counts to compare.
        #[arg(long, value_delimiter = ',', default_values_t = [500usize, 1000, 2000])]
        levels: Vec<usize>,
    },
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::parse(s).ok_or_else(|| format!("unknown variant `{s}`, expected h1..h4"))
}

fn load(path: &Path) -> Result<ScenarioConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn resolve(common: &Common) -> Result<ScenarioConfig, Error> {
    let mut cfg = load(&common.config)?;
    if let Some(n) = common.nodes {
        if n == 0 {
            return Err(Error::Config {
                path: "--nodes".into(),
                message: "must be at least 1".into(),
            });
        }
        cfg = cfg.with_nodes(n);
    }
    if let Some(tol) = common.tol {
        if tol.is_nan() || tol <= 0.0 {
            return Err(Error::Config {
                path: "--tol".into(),
                message: "tolerance must be positive".into(),
            });
        }
        cfg = cfg.with_tol(tol);
    }
    if let Some(v) = common.variant {
        cfg = cfg.with_variant(v);
    }
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NoContraction { .. } => 2,
        Error::BudgetExceeded { .. } => 3,
        _ => 1,
    }
}

fn print_report(r: &report::RunReport) {
    for (k, v) in r.rows() {
        println!("{k:>18}  {v}");
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { common, steps } => {
            let cfg = resolve(&common)?;
            let states = report::simulate(&cfg, steps.unwrap_or(cfg.horizon), common.out.as_deref())?;
            if let Some(last) = states.last() {
                println!(
                    "t = {}  total = {}  sup = {}",
                    states.len() - 1,
                    fmt_f64(last.total_population()),
                    fmt_f64(last.sup_norm())
                );
            }
        }
        Command::Attractor { common } => {
            let cfg = resolve(&common)?;
            print_report(&report::run_attractor(&cfg, common.out.as_deref())?);
        }
        Command::Compare { common } => {
            let cfg = resolve(&common)?;
            let cmp = report::compare_inhomogeneities(&cfg, common.out.as_deref())?;
            let best = cmp.argmax();
            println!("{:<8} {:>22} {:>14}", "variant", "mean_total", "cert_error");
            for (v, r) in &cmp.runs {
                match r {
                    Ok(r) => println!(
                        "{:<8} {:>22} {:>14.3e}{}",
                        v.label(),
                        fmt_f64(r.mean_total),
                        r.certified_error,
                        if best == Some(*v) { "  <- max" } else { "" }
                    ),
                    Err(e) => println!("{:<8} failed: {e}", v.label()),
                }
            }
            if let Some(e) = cmp.runs.into_iter().find_map(|(_, r)| r.err()) {
                return Err(e);
            }
        }
        Command::Semilinear { config, out } => {
            let cfg = config.as_deref().map(load).transpose()?;
            let sl = report::semilinear_config(cfg.as_ref());
            let r = report::run_semilinear(&sl, out.as_deref())?;
            println!("period {}  contraction {}  periods {}", r.period, fmt_f64(r.contraction), r.periods);
            for (t, f) in r.fibers.iter().enumerate() {
                let vals: Vec<String> = f.iter().map(|v| fmt_f64(*v)).collect();
                println!("fiber {t}: [{}]", vals.join(", "));
            }
        }
        Command::Lipschitz { common } => {
            let cfg = resolve(&common)?;
            let t = report::run_lipschitz_report(&cfg, common.out.as_deref())?;
            let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_else(|| "n/a".into());
            let steps = |s: Option<u64>| s.map(|s| s.to_string()).unwrap_or_else(|| "n/a".into());
            println!("ell (closed form)  {}", opt(t.ell_closed_form));
            println!("ell (quadrature)   {}", fmt_f64(t.ell_numeric));
            println!("S   (closed form)  {}", steps(t.steps_closed_form));
            println!("S   (quadrature)   {}", steps(t.steps_numeric));
        }
        Command::Convergence { common, levels } => {
            let cfg = resolve(&common)?;
            let study = report::convergence_study(&cfg, &levels, common.out.as_deref())?;
            let mut first_err = None;
            for level in study {
                match level.result {
                    Ok(r) => println!("n = {:<6} mean_total = {}", level.nodes, fmt_f64(r.mean_total)),
                    Err(e) => {
                        println!("n = {:<6} failed: {e}", level.nodes);
                        first_err.get_or_insert(e);
                    }
                }
            }
            if let Some(e) = first_err {
                return Err(e);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap reports usage errors with status 2, which is reserved here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
