use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use qdbar_cli::{parse_config, run_experiment, CliError, ExitClass, Experiment, Format};

const AFTER_HELP: &str = "\
Report columns:
  check-weights  quantity,t,k,value,reference,delta,bound,status
  norms          t,k_lo,k_hi,quantum_norm,classical_norm,abs_error,tail_bound,status
  parametrix     mode,t,k_lo,k_hi,distance,tail_bound,status
  inverse        t,k_lo,k_hi,mode,residual,at,bound,precision,status
  schur          t,kernel,n,k_lo,k_hi,row_sup,col_sup,schur_bound,power_norm,converged,analytic_cap,status
  continuity     t,k_hi,norm,forward_difference
  uniform-bound  t,k_hi,max_ratio,argmax,schur_cap,exceeds_cap,status

Floats use the shortest decimal that reads back to the same value.

Exit codes:
  0 success, 1 config error, 2 weight condition violated,
  3 numerical failure (quadrature, window, resource), 4 property violated";

/// Classical-limit experiments for the quantum disk and annulus.
#[derive(Debug, Parser)]
#[command(name = "qdbar", version, after_help = AFTER_HELP)]
struct Args {
    /// Experiment to run.
    #[arg(value_enum)]
    experiment: Experiment,

    /// JSON run description.
    #[arg(long)]
    config: PathBuf,

    /// Output directory; overrides the config's, defaults to `.`.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Report format; overrides the config's.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn run(args: &Args) -> anyhow::Result<ExitClass> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))
        .map_err(|e| anyhow::Error::new(CliError::ConfigSyntax(format!("{e:#}"))))?;
    let config = parse_config(&text)?;
    let out = args.out.clone().or_else(|| config.output.directory.clone()).unwrap_or_else(|| PathBuf::from("."));
    let format = args.format.unwrap_or(config.output.format);
    let artifacts = run_experiment(&config, args.experiment, &out, format)?;
    eprintln!(
        "[qdbar] {}: {} rows -> {} ({})",
        args.experiment.name(),
        artifacts.table.rows.len(),
        artifacts.report.display(),
        artifacts.exit.name()
    );
    Ok(artifacts.exit)
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which would collide with the
    // condition-failure code.
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(ExitClass::Config.code() as u8);
        }
    };
    match run(&args) {
        Ok(class) => ExitCode::from(class.code() as u8),
        Err(e) => {
            eprintln!("qdbar: {e:#}");
            let class = e.downcast_ref::<CliError>().map_or(ExitClass::Numerical, CliError::exit_class);
            ExitCode::from(class.code() as u8)
        }
    }
}
