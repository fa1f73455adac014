use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pim_simo::validate::Fault;
use pim_simo::DetectorKind;
use pim_simo_cli::commands::format_outcomes;
use pim_simo_cli::{
    cmd_rate, cmd_required_snr, cmd_sweep, cmd_validate, CliError, Overrides, RateArgs,
};

#[derive(Parser)]
#[command(
    name = "pim-simo",
    version,
    about = "Permutation index modulation over noncoherent SIMO links"
)]
struct Cli {
    /// Worker threads for trial execution; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunFlags {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "PIM_SIMO_SEED", hide_env_values = true, hide = true)]
    env_seed: Option<u64>,
    /// Comma-separated detector names.
    #[arg(long, value_delimiter = ',')]
    detectors: Option<Vec<DetectorKind>>,
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            env_seed: self.env_seed,
            out: self.out.clone(),
            detectors: self.detectors.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Codebook size, spectral efficiency and related figures for a policy.
    Rate {
        #[arg(long = "K")]
        subcarriers: Option<usize>,
        #[arg(long = "L")]
        levels: Option<usize>,
        #[arg(long)]
        uniform: bool,
        /// Comma-separated multiplicities, e.g. 12,9,6,3.
        #[arg(long, value_delimiter = ',')]
        policy: Option<Vec<usize>>,
        #[arg(long)]
        json: bool,
    },
    /// SER sweep over one axis; writes `<out>/<axis>.csv` and `<out>/summary.json`.
    Sweep(RunFlags),
    /// SNR needed for a target SER, per antenna count and detector.
    RequiredSnr(RunFlags),
    /// Small-scale consistency checks across modules.
    Validate {
        #[arg(long, env = "PIM_SIMO_SEED", default_value_t = 2024)]
        seed: u64,
        /// Deliberately break a component to confirm the checks catch it.
        #[arg(long, value_enum)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FaultArg {
    HsnrGamma,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Rate {
            subcarriers,
            levels,
            uniform,
            policy,
            json,
        } => {
            let report = cmd_rate(&RateArgs {
                subcarriers,
                levels,
                uniform,
                policy,
            })?;
            if json {
                let text = serde_json::to_string_pretty(&report)
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
                println!("{text}");
            } else {
                print!("{}", report.to_text());
            }
        }
        Command::Sweep(flags) => {
            let out = cmd_sweep(&flags.config, &flags.overrides())?;
            for p in out.csv.iter().chain(&out.json) {
                println!("wrote {}", p.display());
            }
        }
        Command::RequiredSnr(flags) => {
            let path = cmd_required_snr(&flags.config, &flags.overrides())?;
            println!("wrote {}", path.display());
        }
        Command::Validate { seed, inject_fault } => {
            let fault = inject_fault.map(|FaultArg::HsnrGamma| Fault::HsnrGamma);
            let outcomes = cmd_validate(seed, fault)?;
            println!("{}", format_outcomes(&outcomes));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))
            .and_then(|pool| pool.install(|| run(cli))),
        None => run(cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
