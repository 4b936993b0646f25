use std::process::ExitCode;

use clap::Parser;
use vstencil::harness::{self, BenchConfig, Cli, Command};
use vstencil::Error;

fn run() -> Result<ExitCode, Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(a) => {
            let cfg = BenchConfig::from_args(&a)?;
            let r = harness::run_benchmark(&cfg)?;
            println!("{}", harness::summary_line(&r));
            if let Some(p) = &cfg.csv {
                harness::emit_csv(&[r], p)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(a) => {
            let cfg = BenchConfig::from_args(&a)?;
            let r = harness::verify(&cfg)?;
            let err = r.max_rel_err.unwrap_or(f64::INFINITY);
            let limit = harness::verify_threshold(cfg.steps);
            let ok = err <= limit;
            println!("{}", harness::summary_line(&r));
            println!("{} (threshold {limit:.1e})", if ok { "PASS" } else { "FAIL" });
            if let Some(p) = &cfg.csv {
                harness::emit_csv(&[r], p)?;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Plan(a) => {
            let cfg = BenchConfig::from_args(&a)?;
            print!("{}", harness::plan_report(&cfg)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(Error::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
