//! `magsplit run <preset|--config path> [overrides]`

mod config;
mod custom;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "magsplit", version, about = "Splitting experiments for the magnetic Schrödinger equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a preset (ex1d, ex2d, ex3d, custom) and write CSV artifacts.
    Run(RunArgs),
}

/// Every option mirrors the config-file key of the same name.
#[derive(Debug, Args)]
struct RunArgs {
    /// ex1d, ex2d, ex3d or custom; may also come from the config file.
    preset: Option<String>,
    /// Flat `key = value` file, applied between the preset and these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Points per axis, one value or one per axis separated by commas.
    #[arg(long = "N", value_name = "N")]
    n: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    /// Final time.
    #[arg(long = "T", value_name = "T")]
    t: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    /// lie or strang.
    #[arg(long)]
    scheme: Option<String>,
    /// dfs, interp or nfft.
    #[arg(long)]
    backend: Option<String>,
    /// Interpolation nodes per axis (even; interp only).
    #[arg(long)]
    p: Option<String>,
    /// Window cutoff (nfft only).
    #[arg(long)]
    m: Option<String>,
    /// onfly, psi or fullpsi (nfft only).
    #[arg(long)]
    precompute: Option<String>,
    /// Byte budget for fullpsi window storage (nfft only).
    #[arg(long = "mem-budget", value_name = "BYTES")]
    mem_budget: Option<String>,
    /// RK4 substeps for the characteristics.
    #[arg(long)]
    substeps: Option<String>,
    /// gauged or corrected.
    #[arg(long)]
    formulation: Option<String>,
    /// Step counts for an order fit, e.g. 16,32,64,128.
    #[arg(long = "order-sweep", value_name = "LIST")]
    order_sweep: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Also write a gnuplot script.
    #[arg(long)]
    plot: bool,
}

impl RunArgs {
    fn flag_pairs(&self) -> Vec<(String, String)> {
        let opts = [
            ("preset", &self.preset),
            ("N", &self.n),
            ("steps", &self.steps),
            ("T", &self.t),
            ("eps", &self.eps),
            ("scheme", &self.scheme),
            ("backend", &self.backend),
            ("p", &self.p),
            ("m", &self.m),
            ("precompute", &self.precompute),
            ("mem_budget", &self.mem_budget),
            ("substeps", &self.substeps),
            ("formulation", &self.formulation),
            ("order_sweep", &self.order_sweep),
            ("out", &self.out),
            ("seed", &self.seed),
        ];
        let mut pairs: Vec<(String, String)> =
            opts.iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect();
        if self.plot {
            pairs.push(("plot".into(), "true".into()));
        }
        pairs
    }
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BLOWUP: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run(args) = cli.command;
    let result = RunConfig::load(args.config.as_deref(), args.flag_pairs())
        .and_then(|cfg| run::execute(&cfg, &mut |line| eprintln!("magsplit: {line}")));
    match result {
        Ok(summary) => {
            let mut line = format!("mass deviation {:.3e}", summary.max_mass_deviation);
            if let Some(q) = summary.fitted_order {
                line += &format!(", fitted order {q:.3}");
            }
            if let Some(l) = summary.lambda_error {
                line += &format!(", gauge error {l:.1e}");
            }
            eprintln!("magsplit: done ({line}); artifacts in {}", summary.out.display());
            for f in &summary.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("magsplit: error: {err:#}");
            if err.downcast_ref::<ConfigError>().is_some() {
                return ExitCode::from(EXIT_CONFIG);
            }
            match err.downcast_ref::<magsplit::Error>() {
                Some(magsplit::Error::BlowUp { .. }) => ExitCode::from(EXIT_BLOWUP),
                Some(magsplit::Error::Contract(_)) => ExitCode::from(EXIT_CONFIG),
                _ => ExitCode::from(EXIT_RUNTIME),
            }
        }
    }
}
