use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use plap_recon::config::ExperimentConfig;
use plap_recon::experiment::{describe, run};
use plap_recon::Error;

#[derive(Parser)]
#[command(name = "plap-recon", version, about = "Boundary coefficient reconstruction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured pipeline and write summary.json and series.csv.
    Run {
        config: PathBuf,
        /// Overrides the configured output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Print the resolved plan without solving.
    Describe { config: PathBuf },
}

fn report(e: &Error) -> ExitCode {
    let body = serde_json::json!({
        "error": e.kind(),
        "message": e.to_string(),
        "exit_code": e.exit_code(),
    });
    eprintln!("{body}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Describe { config } => {
            ExperimentConfig::load(&config).and_then(|c| describe(&c)).map(|plan| print!("{plan}"))
        }
        Command::Run { config, output_dir } => ExperimentConfig::load(&config).and_then(|mut c| {
            if let Some(dir) = output_dir {
                c.experiment.output_dir = dir;
            }
            let out = run(&c)?;
            for path in out.write(&c.experiment.output_dir)? {
                println!("wrote {}", path.display());
            }
            for r in &out.summary.recovered {
                match r.ground_truth {
                    Some(t) => println!("{} = {:.6} (truth {:.6}, budget {})", r.name, r.value, t, r.budget),
                    None => println!("{} = {:.6}", r.name, r.value),
                }
            }
            let s = &out.summary;
            if !s.identities.is_empty() {
                let ok = s.identities.iter().filter(|r| r.relative_gap <= r.budget).count();
                println!("identities within budget: {ok}/{}", s.identities.len());
            }
            if let Some(m) = s.monotonicity_ratio {
                println!("monotonicity ratio max = {m:.4}");
            }
            if let Some(d) = &s.dn_check {
                println!(
                    "linear DN relative gap = {:.3e}, remainder relative gap = {:.3e}",
                    d.linear_relative_gap, d.remainder_relative_gap
                );
            }
            if let Some(f) = &s.forward {
                println!(
                    "forward: converged = {}, iterations = {}, residual = {:.3e}",
                    f.solve.converged, f.solve.iterations, f.solve.residual
                );
            }
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
