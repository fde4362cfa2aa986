mod config;
mod output;
mod run;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigError, Flags};

#[derive(Parser)]
#[command(name = "lacewalk", version, about = "Memory-tau walks, lace expansion coefficients and critical points on Z^d")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Regularity constants of the uniform-box step distribution and the
    /// heat-kernel profile. CSV rows: n,sup,normalized
    DistCheck(Flags),
    /// Exact counts of memory-tau walks. CSV rows: n,c_n,count,mu_bound
    Enumerate(Flags),
    /// Lace-expansion coefficients pi^(N)_n at p = 1.
    /// CSV rows: order,tau,n,x,numerator,denominator
    Pi(Flags),
    /// Recursion, tail-identity and lace-partition checks (reports only)
    Verify(Flags),
    /// Critical point by transfer matrix or truncated fixed point.
    /// CSV rows: tau,method,pc,mu,lower,upper,states,transitions,iterations
    Pc(Flags),
    /// Critical point over a tau list with the exponent fit.
    /// CSV rows: tau,pc_estimate,method,diff,log_tau,log_diff,error
    Scan(Flags),
    /// Gaussian collapse of the rescaled two-point function.
    /// CSV rows: n,k,kappa,value,target,deviation,flagged
    Clt(Flags),
    /// Leading constant and first-order critical point of the box kernel.
    /// CSV rows: n,i_n,i_n_quadrature,quadrature_tail_bound,u_return
    Const(Flags),
}

impl Command {
    fn split(&self) -> (&'static str, &Flags) {
        match self {
            Command::DistCheck(f) => ("dist-check", f),
            Command::Enumerate(f) => ("enumerate", f),
            Command::Pi(f) => ("pi", f),
            Command::Verify(f) => ("verify", f),
            Command::Pc(f) => ("pc", f),
            Command::Scan(f) => ("scan", f),
            Command::Clt(f) => ("clt", f),
            Command::Const(f) => ("const", f),
        }
    }
}

fn config_failure(e: ConfigError) -> ExitCode {
    eprintln!("{e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, flags) = cli.command.split();
    let cfg = match config::merge(flags).and_then(|m| config::resolve(name, &m)) {
        Ok(c) => c,
        Err(e) => return config_failure(e),
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global() {
        eprintln!("warning: thread pool already set up: {e}");
    }
    let mut sink: Box<dyn Write> = match &cfg.out {
        Some(path) => match std::fs::File::create(path) {
            Ok(f) => Box::new(f),
            Err(e) => return config_failure(ConfigError::new("out", format!("cannot write {path}: {e}"))),
        },
        None => Box::new(std::io::stdout()),
    };
    eprintln!("lacewalk {name}: d={} L={} tau={}", cfg.d, cfg.l, cfg.tau);
    let doc = match run::execute(name, &cfg) {
        Ok(doc) => doc,
        Err(e) => {
            eprintln!("error: {e}");
            let code = if matches!(e, lacewalk::Error::InvalidArgument(_)) { 2 } else { 1 };
            return ExitCode::from(code);
        }
    };
    let text = match cfg.format {
        config::Format::Json => doc.to_json(),
        config::Format::Csv => output::to_csv(&doc, output::columns(name)),
    };
    if let Err(e) = sink.write_all(text.as_bytes()).and_then(|_| sink.flush()) {
        eprintln!("error: writing output: {e}");
        return ExitCode::from(1);
    }
    let failed = doc.reports.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        eprintln!("{failed} of {} checks failed", doc.reports.len());
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
