use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lameheat::app::{self, Command};
use lameheat::config::{parse_config, RunConfig};

#[derive(Parser)]
#[command(name = "lameheat", version, about = "Coupled heat / thin-layer / thick Lamé finite-element laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Configuration file (`key = value` lines).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `output_dir`).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    /// Random seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; also read from LAMEHEAT_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Build the mesh and export it with the assembled pencil.
    Mesh,
    /// θ-scheme run from seeded random data; writes energy.csv.
    Simulate,
    /// Small-α resolvent sweep; writes sweep.csv.
    ResolventSweep,
    /// Dirichlet Lamé eigenvalues; writes spectrum.csv.
    Spectrum,
    /// Full invariant suite.
    Verify,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Mesh => Command::Mesh,
            Cmd::Simulate => Command::Simulate,
            Cmd::ResolventSweep => Command::ResolventSweep,
            Cmd::Spectrum => Command::Spectrum,
            Cmd::Verify => Command::Verify,
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            parse_config(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.output {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.threads.or_else(app::thread_cap) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cmd = Command::from(cli.command);
    match app::run(cmd, &cfg) {
        Ok(out) => {
            for c in &out.checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("{tag} {} = {:.3e} ({} {:.3e})", c.name, c.value, c.relation.as_str(), c.bound);
            }
            println!("wrote {} to {}", out.artifacts.join(", "), cfg.output_dir.display());
            if out.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
