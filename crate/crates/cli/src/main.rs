//! `transq` — exact, brute-force, and Monte Carlo engines for the transient
//! customer-number distribution of a discrete-time batch-Markovian
//! infinite-server queue, behind one JSON model format.
//!
//! Exit codes are a stable contract:
//!   0  ok
//!   1  comparison failure (engines disagree, or a self-check tripped)
//!   2  invalid model
//!   3  malformed input
//!   4  excessive truncation without `--allow-truncation`
//!   5  no stationary convergence

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use transq_cli::model;
use transq_cli::output::{
    self, EffectiveChecksOutput, MminfOutput, SimulateOutput, SolveOutput, StationaryOutput,
};
use transq_core::{exact, oracle, sim};

const EXIT_OK: i32 = 0;
const EXIT_COMPARISON: i32 = 1;
const EXIT_INVALID_MODEL: i32 = 2;
const EXIT_MALFORMED: i32 = 3;
const EXIT_TRUNCATION: i32 = 4;
const EXIT_NO_CONVERGENCE: i32 = 5;

/// Truncation loss beyond this aborts `solve` unless explicitly allowed.
const TRUNCATION_GATE: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "transq",
    version,
    about = "Transient analysis of discrete-time batch-Markovian infinite-server queues"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file against all structural invariants
    Validate {
        model: PathBuf,
        /// Re-emit the parsed model in canonical form
        #[arg(long)]
        dump_model: Option<PathBuf>,
    },
    /// Exact distribution and moments at one horizon
    Solve {
        model: PathBuf,
        /// Number of slot transitions
        #[arg(long)]
        time: u64,
        /// How many factorial moments to report
        #[arg(long, default_value_t = 2)]
        moments: usize,
        /// Cap the series degree (loss is tracked and gated)
        #[arg(long)]
        max_degree: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Write here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit results even when the truncation gate trips
        #[arg(long)]
        allow_truncation: bool,
    },
    /// Monte Carlo ensemble of trajectories
    Simulate {
        model: PathBuf,
        #[arg(long)]
        time: u64,
        #[arg(long)]
        runs: u64,
        #[arg(long, env = "TRANSQ_SEED", default_value_t = 0)]
        seed: u64,
        /// Threads to spread runs over (the result does not depend on this)
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Also run the pathwise effective-process consistency sweep
        #[arg(long)]
        effective_checks: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check the exact engine against brute force (and optionally
    /// simulation); nonzero exit on disagreement
    Compare {
        model: PathBuf,
        #[arg(long)]
        time: u64,
        /// Also simulate this many runs and compare at 4 standard errors
        #[arg(long)]
        runs: Option<u64>,
        #[arg(long, env = "TRANSQ_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Closed forms for the single-state memoryless queue
    Mminf {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        time: u64,
    },
    /// Iterate the transient distribution to its large-time limit
    Stationary {
        model: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_time: u64,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Validate { model, dump_model } => cmd_validate(&model, dump_model.as_deref()),
        Command::Solve {
            model,
            time,
            moments,
            max_degree,
            format,
            out,
            allow_truncation,
        } => cmd_solve(
            &model,
            time,
            moments,
            max_degree,
            format,
            out.as_deref(),
            allow_truncation,
        ),
        Command::Simulate {
            model,
            time,
            runs,
            seed,
            workers,
            effective_checks,
            format,
            out,
        } => cmd_simulate(
            &model,
            time,
            runs,
            seed,
            workers,
            effective_checks,
            format,
            out.as_deref(),
        ),
        Command::Compare {
            model,
            time,
            runs,
            seed,
        } => cmd_compare(&model, time, runs, seed),
        Command::Mminf { p, alpha, time } => cmd_mminf(p, alpha, time),
        Command::Stationary {
            model,
            tol,
            max_time,
        } => cmd_stationary(&model, tol, max_time),
    };
    std::process::exit(code);
}

fn load_or_fail(path: &Path) -> Result<(transq_core::DBmapModel, transq_core::ServiceLaw), i32> {
    model::load(path).map_err(|err| {
        eprintln!("{err}");
        err.exit_code()
    })
}

fn emit(text: String, out: Option<&Path>) -> i32 {
    match out {
        None => {
            print!("{text}");
            EXIT_OK
        }
        Some(path) => match std::fs::write(path, text) {
            Ok(()) => EXIT_OK,
            Err(err) => {
                eprintln!("cannot write {}: {err}", path.display());
                EXIT_MALFORMED
            }
        },
    }
}

fn cmd_validate(path: &Path, dump_to: Option<&Path>) -> i32 {
    let file = match model::parse_file(path) {
        Ok(file) => file,
        Err(err) => {
            eprintln!("{err}");
            return err.exit_code();
        }
    };
    let mats = match model::batch_matrices(&file) {
        Ok(mats) => mats,
        Err(err) => {
            println!("violation: {err}");
            return err.exit_code();
        }
    };
    let report = transq_core::arrival::validate_parts(&mats, &file.initial);
    if !report.is_ok() {
        for violation in &report.violations {
            println!("violation: {violation}");
        }
        return EXIT_INVALID_MODEL;
    }
    let law = match model::service_law(&file.service) {
        Ok(law) => law,
        Err(err) => {
            println!("violation: {err}");
            return err.exit_code();
        }
    };
    println!("ok");
    if let Some(target) = dump_to {
        let arrival = transq_core::DBmapModel::from_matrices(mats, file.initial.clone())
            .expect("validated parts construct");
        let canonical = model::dump(&arrival, &law);
        return emit(output::to_json(&canonical), Some(target));
    }
    EXIT_OK
}

fn cmd_solve(
    path: &Path,
    time: u64,
    moments: usize,
    max_degree: Option<usize>,
    format: Format,
    out: Option<&Path>,
    allow_truncation: bool,
) -> i32 {
    let (arrival, law) = match load_or_fail(path) {
        Ok(pair) => pair,
        Err(code) => return code,
    };
    let result = exact::transient_result(&arrival, &law, time, max_degree, moments);
    if result.truncation_loss > TRUNCATION_GATE && !allow_truncation {
        eprintln!(
            "truncation loss {:.3e} exceeds {TRUNCATION_GATE:.0e}; \
             raise --max-degree or pass --allow-truncation",
            result.truncation_loss
        );
        return EXIT_TRUNCATION;
    }
    let text = match format {
        Format::Json => output::to_json(&SolveOutput::from(&result)),
        Format::Csv => output::distribution_csv(&result.distribution),
    };
    emit(text, out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    path: &Path,
    time: u64,
    runs: u64,
    seed: u64,
    workers: usize,
    effective_checks: bool,
    format: Format,
    out: Option<&Path>,
) -> i32 {
    let (arrival, law) = match load_or_fail(path) {
        Ok(pair) => pair,
        Err(code) => return code,
    };
    let result = sim::empirical_distribution_parallel(&arrival, &law, time, runs, seed, workers);
    let mut payload = SimulateOutput::from(&result);
    if effective_checks {
        let report = sim::effective_consistency_sweep(&arrival, &law, time, runs, seed);
        payload.effective_checks = Some(EffectiveChecksOutput::from(&report));
    }
    let text = match format {
        Format::Json => output::to_json(&payload),
        Format::Csv => output::empirical_csv(&result.probabilities, &result.standard_errors),
    };
    emit(text, out)
}

fn cmd_compare(path: &Path, time: u64, runs: Option<u64>, seed: u64) -> i32 {
    let (arrival, law) = match load_or_fail(path) {
        Ok(pair) => pair,
        Err(code) => return code,
    };
    let g = exact::transient_pgf(&arrival, &law, time, None);
    let exact_dist = exact::distribution(&g, None);
    let brute = match oracle::brute_distribution(&arrival, &law, time) {
        Ok(dist) => dist,
        Err(err) => {
            eprintln!("{err}");
            return EXIT_INVALID_MODEL;
        }
    };

    let bins = exact_dist.len().max(brute.len());
    let mut max_dev = 0.0f64;
    for m in 0..bins {
        let a = exact_dist.get(m).copied().unwrap_or(0.0);
        let b = brute.get(m).copied().unwrap_or(0.0);
        max_dev = max_dev.max((a - b).abs());
    }
    let exact_ok = max_dev <= 1e-9;
    println!(
        "exact vs brute force: max |diff| = {max_dev:.3e} over {bins} bins (tolerance 1e-9): {}",
        verdict(exact_ok)
    );

    let mut sim_ok = true;
    if let Some(n_runs) = runs {
        let res = sim::empirical_distribution(&arrival, &law, time, n_runs, seed);
        let mu = exact::factorial_moments_from_pgf(&g, 2);
        let mut worst: f64 = 0.0;
        let mut check = |label: &str, diff: f64, se: f64| {
            let ratio = if se > 0.0 {
                diff / se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(ratio);
            if ratio > 4.0 {
                sim_ok = false;
                println!("  {label}: deviation {diff:.3e} is {ratio:.1} standard errors");
            }
        };
        check("mean", (res.mean - mu[0]).abs(), res.mean_se);
        check(
            "second factorial moment",
            (res.second_factorial_moment - mu[1]).abs(),
            res.second_factorial_moment_se,
        );
        for (m, &p) in exact_dist.iter().enumerate() {
            if p < 1e-3 {
                continue;
            }
            let p_hat = res.probabilities.get(m).copied().unwrap_or(0.0);
            let se = res.standard_errors.get(m).copied().unwrap_or(0.0);
            check(&format!("p[{m}]"), (p_hat - p).abs(), se);
        }
        println!(
            "exact vs simulation ({n_runs} runs, seed {seed}): worst cell {worst:.2} standard errors (tolerance 4): {}",
            verdict(sim_ok)
        );
    }

    let ok = exact_ok && sim_ok;
    println!("verdict: {}", verdict(ok));
    if ok {
        EXIT_OK
    } else {
        EXIT_COMPARISON
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn cmd_mminf(p: f64, alpha: f64, time: u64) -> i32 {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        eprintln!("p = {p} must lie in [0, 1]");
        return EXIT_INVALID_MODEL;
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        eprintln!("alpha = {alpha} must lie in (0, 1)");
        return EXIT_INVALID_MODEL;
    }
    let poly = exact::mminf_closed_form(p, alpha, time);
    let moments = exact::mminf_moments(p, alpha, time);
    let payload = MminfOutput {
        p,
        alpha,
        time,
        mean: moments.mean,
        variance: moments.variance,
        fano: moments.fano,
        coefficients: poly.coeffs().to_vec(),
    };
    print!("{}", output::to_json(&payload));
    if let Some(fano) = moments.fano {
        if fano >= 1.0 {
            eprintln!("internal error: Fano factor {fano} violates the sub-Poissonian bound");
            return EXIT_COMPARISON;
        }
    }
    EXIT_OK
}

fn cmd_stationary(path: &Path, tol: f64, max_time: u64) -> i32 {
    let (arrival, law) = match load_or_fail(path) {
        Ok(pair) => pair,
        Err(code) => return code,
    };
    match exact::stationary_distribution(&arrival, &law, tol, max_time) {
        Ok(res) => {
            let payload = StationaryOutput {
                t_converged: res.t_converged,
                last_tv: res.last_tv,
                distribution: res.distribution,
            };
            print!("{}", output::to_json(&payload));
            EXIT_OK
        }
        Err(err) => {
            eprintln!("{err}");
            EXIT_NO_CONVERGENCE
        }
    }
}
