use clap::{Parser, Subcommand, ValueEnum};
use equiv_core::covariance::{build_ck, verify_ck};
use equiv_core::error::Result;
use equiv_core::job::{list_suites, run_job, JobSpec};
use equiv_core::report::emit_report;
use equiv_core::scalar::{Backend, C64, CQ};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "equiv", version, about = "Cross-check complex and self-adjoint matrix and tensor model equivalences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Exact,
    Float,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suite named in a JSON job file.
    Run {
        job: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
        /// Record wall time in the report (makes the bytes run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// List suites with the anchors they exercise.
    Suites,
    /// Build C_k and print its eigenvalues and power-sum residuals.
    Ck {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        exact: bool,
    },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { job, out, backend, timing } => {
            let text = std::fs::read_to_string(&job)?;
            let mut spec = JobSpec::parse(&text)?;
            if let Some(b) = backend {
                spec.backend = Some(match b {
                    BackendArg::Exact => Backend::Exact,
                    BackendArg::Float => Backend::Float,
                });
            }
            let start = Instant::now();
            let mut report = run_job(&spec)?;
            if timing {
                report.wall_time_s = Some(start.elapsed().as_secs_f64());
            }
            match out {
                Some(path) => emit_report(&report, &path)?,
                None => print!("{}", report.to_canonical_json()),
            }
            Ok(report.pass)
        }
        Command::Suites => {
            for s in list_suites() {
                println!("{}\t{}", s.name, s.anchors.join("; "));
            }
            Ok(true)
        }
        Command::Ck { k, n, exact } => {
            let report = if exact {
                let c = build_ck::<CQ>(k, n)?;
                print_eigenvalues(&c.eigenvalues);
                verify_ck(&c.matrix, k, 0.0)
            } else {
                let c = build_ck::<C64>(k, n)?;
                print_eigenvalues(&c.eigenvalues);
                verify_ck(&c.matrix, k, 1e-8 * n as f64)
            };
            for case in &report.cases {
                println!("{}\t|residual| = {:e}\t{}", case.label, case.abs_err, if case.pass { "ok" } else { "FAIL" });
            }
            Ok(report.pass)
        }
    }
}

fn print_eigenvalues(ev: &[C64]) {
    for (i, z) in ev.iter().enumerate() {
        println!("lambda_{i} = {:+.15e} {:+.15e}i", z.re, z.im);
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("equiv: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
