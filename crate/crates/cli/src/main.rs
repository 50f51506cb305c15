//! `bsdelab` command-line front end.
//!
//! Exit status: 0 when every verdict passes, 2 when one fails, 1 on usage
//! or I/O errors.

use anyhow::{bail, Context, Result};
use bsdelab::constants::{default_beta_hat, m_star, pi_star, pi_tilde_star, select_k_star};
use bsdelab::drivers::StandardData;
use bsdelab::harness::{emit_report, stability_experiment, summary_text, ExperimentConfig, Problem, ProblemId};
use bsdelab::limits::{moore_osgood_a, moore_osgood_b, DoubleTable, TolSchedule};
use bsdelab::measures::{interval_sup_distance, ks_distance, FiniteMeasure};
use bsdelab::paths::{j1_distance, sup_distance, StepPath};
use bsdelab::solver::{solve, Convention, SolveOptions};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "bsdelab", version, about = "Picard-iterated BSDEs on scenario trees and their convergence diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Contraction constants and certificates.
    Constants {
        #[command(subcommand)]
        query: ConstantsQuery,
    },
    /// Solve one standard data file (or a catalog problem) by Picard iteration.
    Solve(SolveArgs),
    /// Run a doubly-indexed experiment from a TOML config.
    Experiment {
        config: PathBuf,
        /// Directory for the CSV tables, metadata.json and summary.txt.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Distances between paths or measures stored in text files.
    Metrics {
        #[command(subcommand)]
        metric: Metric,
    },
    /// Moore–Osgood verdict on a CSV double table.
    MoCheck {
        table: PathBuf,
        #[arg(long, value_enum, default_value_t = Variant::A)]
        variant: Variant,
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
        /// Also check the transposed conditions (variant A).
        #[arg(long)]
        symmetric: bool,
    },
}

#[derive(Subcommand)]
enum ConstantsQuery {
    /// `M⋆(β, Φ)` with its minimiser; fails when it is not below 1/4.
    MStar {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        phi: f64,
    },
    /// `Π⋆(γ, δ, Φ)`.
    PiStar {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        phi: f64,
    },
    /// `Π̃(δ, Φ)`.
    PiTilde {
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        phi: f64,
    },
    /// Smallest `β = 10^{i/20}` certifying contraction for `Φ`.
    BetaHat {
        #[arg(long)]
        phi: f64,
    },
    /// First index from which every `Φ` in the list is certified.
    KStar {
        #[arg(long)]
        beta: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        phi: Vec<f64>,
    },
}

#[derive(clap::Args)]
struct SolveArgs {
    /// Standard data JSON document.
    data: Option<PathBuf>,
    /// Catalog problem to build instead of reading a file.
    #[arg(long, conflicts_with = "data", requires = "k")]
    problem: Option<ProblemId>,
    /// Resolution for `--problem`.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_parser = parse_convention, default_value = "Y_left")]
    convention: Convention,
    /// ⋆-norm weight; the certified β̂ is used when omitted.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 1e-13)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_p: usize,
    /// Write `solution.csv` and `solve.json` here instead of printing.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write the data document that was solved.
    #[arg(long)]
    save_data: bool,
}

#[derive(Subcommand)]
enum Metric {
    /// Skorokhod J1 distance of two paths on `[0, window]`.
    J1 {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        window: f64,
    },
    /// Uniform distance of two paths on `[0, window]`.
    Sup {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        window: f64,
    },
    /// Kolmogorov–Smirnov distance of two measures.
    Ks { mu: PathBuf, nu: PathBuf },
    /// Largest interval-mass difference on `[0, window]`.
    Interval {
        mu: PathBuf,
        nu: PathBuf,
        #[arg(long)]
        window: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    A,
    B,
}

fn parse_convention(s: &str) -> Result<Convention, String> {
    match s {
        "Y_left" | "left" => Ok(Convention::YLeft),
        "Y_right" | "right" => Ok(Convention::YRight),
        other => Err(format!("unknown convention `{other}` (Y_left or Y_right)")),
    }
}

/// Outcome of a subcommand.
enum Verdict {
    Pass,
    Fail,
}

impl From<bool> for Verdict {
    fn from(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Writes to stdout; a closed pipe downstream is not an error.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    emit(&(serde_json::to_string_pretty(v)? + "\n"))
}

fn constants(q: ConstantsQuery) -> Result<Verdict> {
    match q {
        ConstantsQuery::MStar { beta, phi } => {
            let c = m_star(beta, phi)?;
            emit(&(c.to_json() + "\n"))?;
            Ok(c.passes_quarter.into())
        }
        ConstantsQuery::PiStar { gamma, delta, phi } => {
            print_json(&json!({ "gamma": gamma, "delta": delta, "phi": phi, "pi_star": pi_star(gamma, delta, phi)? }))?;
            Ok(Verdict::Pass)
        }
        ConstantsQuery::PiTilde { delta, phi } => {
            print_json(&json!({ "delta": delta, "phi": phi, "pi_tilde_star": pi_tilde_star(delta, phi) }))?;
            Ok(Verdict::Pass)
        }
        ConstantsQuery::BetaHat { phi } => match default_beta_hat(phi) {
            Ok(beta) => {
                print_json(&json!({ "phi": phi, "beta_hat": beta }))?;
                Ok(Verdict::Pass)
            }
            Err(e) => {
                print_json(&json!({ "phi": phi, "beta_hat": null, "reason": e.to_string() }))?;
                Ok(Verdict::Fail)
            }
        },
        ConstantsQuery::KStar { beta, phi } => match select_k_star(&phi, beta) {
            Ok(k) => {
                print_json(&serde_json::to_value(&k)?)?;
                Ok(Verdict::Pass)
            }
            Err(e) => {
                print_json(&json!({ "beta_hat": beta, "index": null, "reason": e.to_string() }))?;
                Ok(Verdict::Fail)
            }
        },
    }
}

fn solve_cmd(args: SolveArgs) -> Result<Verdict> {
    let data = match (&args.data, args.problem) {
        (Some(path), _) => StandardData::from_json(&read(path)?)?,
        (None, Some(id)) => Problem::new(id).data(args.k.expect("required by clap"))?,
        (None, None) => bail!("give a data file or --problem with --k"),
    };
    let phi = data.chars().phi();
    let certificate = match args.beta {
        Some(_) => None,
        None => default_beta_hat(phi).ok().map(|b| m_star(b, phi)).transpose()?,
    };
    let opts = SolveOptions {
        beta: args.beta.unwrap_or(1.0),
        tol: args.tol,
        max_p: args.max_p,
        convention: args.convention,
        keep_history: true,
        certificate,
    };
    let out = solve(&data, &opts)?;
    let summary = json!({
        "steps": data.tree().steps(),
        "nodes": data.tree().node_count(),
        "phi": phi,
        "beta": out.beta,
        "certified": out.certified,
        "converged": out.converged,
        "iterations": out.gaps.len(),
        "y0": out.solution.parts.y(0),
        "gaps": out.gaps,
        "distances": out.distances,
        "within_envelope": out.within_envelope,
        "residual": {
            "orthogonality": out.solution.residual.orthogonality,
            "martingale": out.solution.residual.martingale,
            "pythagoras": out.solution.residual.pythagoras,
            "reconstruction": out.solution.residual.reconstruction,
        },
    });
    let csv = out.solution.parts.to_csv(&data);
    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            std::fs::write(dir.join("solution.csv"), csv)?;
            std::fs::write(dir.join("solve.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
            if args.save_data {
                std::fs::write(dir.join("data.json"), data.to_json())?;
            }
            print_json(&summary)?;
        }
        None => emit(&csv)?,
    }
    Ok((out.converged && (!out.certified || out.within_envelope)).into())
}

fn experiment(config: &Path, out: Option<&Path>) -> Result<Verdict> {
    let cfg = ExperimentConfig::from_toml(&read(config)?)?;
    let table = stability_experiment(&cfg)?;
    let verdict = table.verdict()?;
    match out {
        Some(dir) => {
            let files = emit_report(&table, &verdict, dir)?;
            emit(&read(&files.summary)?)?;
        }
        None => emit(&summary_text(&table, &verdict))?,
    }
    Ok(verdict.pass.into())
}

fn metrics(m: Metric) -> Result<Verdict> {
    let path = |p: &Path| -> Result<StepPath> { Ok(StepPath::from_text(&read(p)?)?) };
    let measure = |p: &Path| -> Result<FiniteMeasure> { Ok(FiniteMeasure::from_text(&read(p)?)?) };
    let value = match m {
        Metric::J1 { a, b, window } => j1_distance(&path(&a)?, &path(&b)?, window)?,
        Metric::Sup { a, b, window } => sup_distance(&path(&a)?, &path(&b)?, window)?,
        Metric::Ks { mu, nu } => ks_distance(&measure(&mu)?, &measure(&nu)?),
        Metric::Interval { mu, nu, window } => interval_sup_distance(&measure(&mu)?, &measure(&nu)?, window),
    };
    emit(&format!("{value:.17e}\n"))?;
    Ok(Verdict::Pass)
}

fn mo_check(table: &Path, variant: Variant, tol: f64, symmetric: bool) -> Result<Verdict> {
    let t = DoubleTable::from_csv(&read(table)?)?;
    let v = match variant {
        Variant::A => moore_osgood_a(&t, &TolSchedule::Constant(tol), symmetric)?,
        Variant::B => moore_osgood_b(&t, tol)?,
    };
    print_json(&serde_json::to_value(&v)?)?;
    Ok(v.pass.into())
}

fn run(cli: Cli) -> Result<Verdict> {
    match cli.command {
        Command::Constants { query } => constants(query),
        Command::Solve(args) => solve_cmd(args),
        Command::Experiment { config, out } => experiment(&config, out.as_deref()),
        Command::Metrics { metric } => metrics(metric),
        Command::MoCheck { table, variant, tol, symmetric } => mo_check(&table, variant, tol, symmetric),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
