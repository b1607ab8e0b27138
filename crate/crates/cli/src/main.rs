//! `cxsdp`: generate instances, assemble relaxations, solve them, and compare
//! the two real forms.
//!
//! Exit codes: 0 optimal, 2 non-optimal solve, 3 input error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use cxsdp::cpop::{Cpop, Family};
use cxsdp::io::{append_report_row, row_index_text, ProblemFile, ReportRow, ResultFile, SampleCheck};
use cxsdp::reformulate::Form;
use cxsdp::relaxation::{assemble_hsos, size_report};
use cxsdp::sdpa::export_sdpa;
use cxsdp::solver::{solve, SolverOptions};
use cxsdp::validation::{compare_reformulations_timed, sample_upper_bound};
use cxsdp::Error;

const EXIT_NOT_OPTIMAL: u8 = 2;
const EXIT_INPUT: u8 = 3;

/// Slack allowed when checking a relaxation bound against sampled points.
const BOUND_SLACK: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "cxsdp", version, about = "Complex moment relaxations solved through real SDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded random instance as a problem file.
    Generate {
        /// `sphere` or `unitnorm`.
        #[arg(long)]
        family: String,
        #[arg(long)]
        s: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assemble a relaxation and export it as SDPA plus a `.rows` index.
    Relax {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        d: usize,
        /// `naive` or `dualview`.
        #[arg(long, default_value = "dualview")]
        form: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a relaxation and write a JSON result.
    Solve {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value = "dualview")]
        form: String,
        /// Gap, primal and dual tolerance.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        /// Result file; defaults to the input path with extension `result.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also check the optimum against this many sampled feasible points.
        #[arg(long, num_args = 0..=1, default_missing_value = "10000")]
        check_sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        sample_seed: u64,
    },
    /// Solve both forms of a generated instance and append a report row.
    Compare {
        #[arg(long)]
        family: String,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "report.csv")]
        out: PathBuf,
        /// Timed repetitions per form; the median is reported.
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
}

/// Failure of a command, mapped to an exit code.
enum Failure {
    Input(String),
    NotOptimal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotOptimal(_) => Failure::NotOptimal(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<String> for Failure {
    fn from(msg: String) -> Self {
        Failure::Input(msg)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::NotOptimal(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(EXIT_NOT_OPTIMAL)
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Generate { family, s, seed, out } => {
            let family: Family = family.parse()?;
            let p = family.generate(s, seed)?;
            let mut file = ProblemFile::from_cpop(&p);
            file.family = Some(family.to_string());
            file.seed = Some(seed);
            file.write(&out)?;
            println!("d_min={}", p.d_min());
            Ok(())
        }
        Command::Relax { input, d, form, out } => {
            let form: Form = form.parse()?;
            let p = load(&input)?;
            let sizes = size_report(&p, d)?;
            let art = assemble_hsos(&p, d, form)?;
            export_sdpa(art.program(), &out)?;
            let rows = sidecar_path(&out);
            std::fs::write(&rows, row_index_text(&art))
                .map_err(|e| Failure::Input(format!("cannot write {}: {e}", rows.display())))?;
            println!("n_sdp={} m={}", sizes.n_sdp, art.program().n_rows());
            println!(
                "omega={} m_naive={} m_dualview={}",
                sizes.omega, sizes.m_naive, sizes.m_dualview
            );
            Ok(())
        }
        Command::Solve { input, d, form, tol, max_iter, out, check_sample, sample_seed } => {
            let form: Form = form.parse()?;
            let opts = SolverOptions { max_iter, ..SolverOptions::with_tol(tol) };
            opts.validate()?;
            let p = load(&input)?;
            let sizes = size_report(&p, d)?;
            let art = assemble_hsos(&p, d, form)?;
            let t = Instant::now();
            let res = solve(art.program(), &opts)?;
            let seconds = t.elapsed().as_secs_f64();
            let sample = match check_sample {
                Some(n) => {
                    let r = sample_upper_bound(&p, n, sample_seed)?;
                    Some(SampleCheck {
                        best_value: r.best_value,
                        samples: r.samples,
                        seed: r.seed,
                        bound_holds: res.objective <= r.best_value + BOUND_SLACK,
                    })
                }
                None => None,
            };
            let record = ResultFile {
                version: cxsdp::io::RESULT_VERSION,
                input: input.display().to_string(),
                d,
                form: form.to_string(),
                options: opts,
                status: res.status,
                objective: res.objective,
                dual_objective: res.dual_objective,
                iterations: res.iterations,
                residuals: res.residuals,
                n_sdp: sizes.n_sdp,
                m: art.program().n_rows(),
                solve_seconds: seconds,
                sample_check: sample.clone(),
            };
            let out = out.unwrap_or_else(|| input.with_extension("result.json"));
            record.write(&out)?;
            println!("status={} objective={:.10e} iterations={}", res.status, res.objective, res.iterations);
            if let Some(c) = &sample {
                println!("sample_best={:.10e} bound_holds={}", c.best_value, c.bound_holds);
            }
            if !res.is_optimal() {
                return Err(Failure::NotOptimal(format!("solve ended with status {}", res.status)));
            }
            if sample.is_some_and(|c| !c.bound_holds) {
                return Err(Failure::NotOptimal("relaxation value exceeds a sampled feasible value".into()));
            }
            Ok(())
        }
        Command::Compare { family, s, d, seed, out, runs, tol } => {
            let family: Family = family.parse()?;
            let opts = SolverOptions::with_tol(tol);
            opts.validate()?;
            let p = family.generate(s, seed)?;
            let c = compare_reformulations_timed(&p, d, &opts, runs)?;
            if !c.both_optimal() {
                return Err(Failure::NotOptimal(format!(
                    "naive {}, dualview {}",
                    c.status_naive, c.status_dualview
                )));
            }
            let row = ReportRow::from_comparison(s, d, seed, &c);
            append_report_row(&out, &row)?;
            println!("{}", cxsdp::io::REPORT_COLUMNS);
            println!("{}", row.to_csv_line());
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<Cpop, Failure> {
    let (p, warnings) = ProblemFile::read(path)?.to_cpop()?;
    for w in warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(p)
}

/// `out.dat-s` gets `out.dat-s.rows`.
fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".rows");
    PathBuf::from(s)
}
