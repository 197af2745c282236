mod commands;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::Value;

use commands::CommandError;
use report::Format;

#[derive(Parser, Debug)]
#[command(name = "sgap", version, about = "Spectral gap laboratory for random walks on groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Seed for randomized computations.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Leave the timestamp out of the report header.
    #[arg(long, global = true)]
    no_timestamp: bool,

    /// Include the statement behind the computation in the header.
    #[arg(long, global = true)]
    cite: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compressed norm of the simple random walk on a regular tree.
    TreeNorm(commands::TreeNormArgs),
    /// Half-line quotient chain of the PGL2 Bruhat-Tits tree.
    Pgl2(commands::Pgl2Args),
    /// Cheeger constant of a chain given as JSON.
    Cheeger(commands::CheegerArgs),
    /// Cayley graph of SL_n(Z/pZ) with elementary generators.
    Cayley(commands::CayleyArgs),
    /// Dual action of a matrix group on Z^d, compressed along a ladder of balls.
    Torus(commands::TorusArgs),
    /// Shift action of a free group on finite configurations.
    Bernoulli(commands::BernoulliArgs),
    /// Spectral certificates for a family of congruence quotients.
    Expanders(commands::ExpandersArgs),
    /// Top Lyapunov exponent of random matrix products.
    Lyapunov(commands::LyapunovArgs),
    /// Return probabilities and the spectral radius of a free-group walk.
    ReturnProb(commands::ReturnProbArgs),
}

fn fail(code: &str, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("ERROR:{code}:{message}");
    ExitCode::from(1)
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("SGAP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("SGAP_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprint!("{msg}");
            return fail("usage", first.trim_start_matches("error: "));
        }
    };
    if let Err(e) = configure_threads() {
        return fail("usage", e);
    }

    let result = match &cli.command {
        Command::TreeNorm(a) => commands::tree_norm(a),
        Command::Pgl2(a) => commands::pgl2(a),
        Command::Cheeger(a) => commands::cheeger(a),
        Command::Cayley(a) => commands::cayley(a),
        Command::Torus(a) => commands::torus(a),
        Command::Bernoulli(a) => commands::bernoulli(a),
        Command::Expanders(a) => commands::expanders(a),
        Command::Lyapunov(a) => commands::lyapunov(a, cli.seed),
        Command::ReturnProb(a) => commands::return_prob(a),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(CommandError::Core(e)) => {
            let status = if matches!(e, sgap::Error::NonConvergence { .. }) { 2 } else { 1 };
            eprintln!("ERROR:{}:{e}", e.code());
            return ExitCode::from(status);
        }
        Err(CommandError::Usage(msg)) => return fail("usage", msg),
        Err(CommandError::Io(msg)) => return fail("io", msg),
    };

    let mut report = outcome.report;
    let mut config = serde_json::Map::new();
    config.insert("format".into(), serde_json::to_value(cli.format).expect("enum serializes"));
    config.insert("seed".into(), cli.seed.into());
    if let Some(p) = &cli.output {
        config.insert("output".into(), Value::String(p.display().to_string()));
    }
    config.append(&mut report.config);
    report.config = config;
    if cli.cite {
        report.cite = Some(commands::citation(&report.command));
    }
    if !cli.no_timestamp {
        report.timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
    }
    let text = report.render(cli.format);
    let written = match &cli.output {
        Some(path) => std::fs::write(path, text.as_bytes()),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        return fail("io", e);
    }
    if let Some(what) = outcome.unconverged {
        eprintln!("ERROR:non_convergence:{what}");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
