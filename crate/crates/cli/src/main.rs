use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use saferl_cli::commands::{self, parse_safety_mode};
use saferl_cli::CliResult;
use saferl_core::trainer::SafetyMode;
use saferl_core::verifier::{SplitHeuristic, VerifyConfig};

#[derive(Parser)]
#[command(name = "saferl", version, about = "Train and verify safe-RL retraction policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct VerifyOpts {
    /// Minimum subarea width as a fraction of the property's box width.
    #[arg(long, default_value_t = 1.0 / 1024.0)]
    min_width: f64,
    #[arg(long, default_value_t = 1 << 22)]
    max_subareas: u64,
    #[arg(long, default_value_t = 32)]
    confirm_samples: usize,
    #[arg(long, env = "SAFERL_WORKERS", default_value_t = 1)]
    workers: usize,
    /// Bisect round-robin over dimensions instead of the widest one.
    #[arg(long)]
    round_robin: bool,
    #[arg(long = "verify-seed", default_value_t = 0)]
    verify_seed: u64,
}

impl VerifyOpts {
    fn config(&self) -> VerifyConfig {
        VerifyConfig {
            min_width_fraction: self.min_width,
            max_subareas: self.max_subareas,
            confirm_samples: self.confirm_samples,
            workers: self.workers,
            split_heuristic: if self.round_robin {
                SplitHeuristic::RoundRobin
            } else {
                SplitHeuristic::WidestNormalized
            },
            seed: self.verify_seed,
            ..VerifyConfig::default()
        }
    }
}

#[derive(Args)]
struct SuiteOpts {
    /// Property suite file; defaults to the workspace suite of the environment.
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Environment config used to build the default suite.
    #[arg(long)]
    env_config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train PPO policies, one per seed.
    Train {
        /// Training config (JSON); defaults are used when omitted.
        config: Option<PathBuf>,
        /// Repeat for several seeds.
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// `all`, `none` or `subset:NAME,...`.
        #[arg(long, value_parser = parse_safety_mode)]
        safety_mode: Option<SafetyMode>,
        #[arg(long, default_value_t = 100)]
        eval_episodes: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Verify a network against every property of a suite.
    Verify {
        network: PathBuf,
        #[command(flatten)]
        suite: SuiteOpts,
        #[command(flatten)]
        verify: VerifyOpts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid of violation rates over two inputs of one property.
    ViolationMap {
        network: PathBuf,
        #[command(flatten)]
        suite: SuiteOpts,
        #[arg(long)]
        property: String,
        #[arg(long, num_args = 2, value_names = ["I", "J"])]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 8)]
        fixed_samples: usize,
        #[arg(long, default_value_t = 20)]
        grid: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        verify: VerifyOpts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Log every state visited by greedy rollouts.
    RolloutStates {
        network: PathBuf,
        #[arg(long)]
        env_config: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and verify the six ablation policies.
    Ablation {
        config: Option<PathBuf>,
        #[arg(long)]
        suite: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        verify: VerifyOpts,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Fraction of a dense input grid that violates each property.
    Oracle {
        network: PathBuf,
        #[command(flatten)]
        suite: SuiteOpts,
        #[arg(long)]
        property: Option<String>,
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train {
            config,
            seeds,
            epochs,
            safety_mode,
            eval_episodes,
            out,
            quiet,
        } => {
            let summaries = commands::cmd_train(&commands::TrainArgs {
                config,
                seeds,
                epochs,
                safety_mode,
                eval_episodes,
                out,
                progress: !quiet,
            })?;
            for s in summaries {
                println!(
                    "seed {}: greedy success {:.2}, collisions/episode {:.2}, policy {}",
                    s.seed,
                    s.eval.success_rate,
                    s.eval.collisions_per_episode,
                    s.policy_path.display()
                );
            }
        }
        Command::Verify {
            network,
            suite,
            verify,
            out,
        } => {
            let (table, _) = commands::cmd_verify(&commands::VerifyArgs {
                network,
                suite: suite.suite,
                env_config: suite.env_config,
                verify: verify.config(),
                out,
            })?;
            print!("{}", table.to_csv());
        }
        Command::ViolationMap {
            network,
            suite,
            property,
            dims,
            fixed_samples,
            grid,
            seed,
            verify,
            out,
        } => {
            let map = commands::cmd_violation_map(&commands::MapArgs {
                network,
                suite: suite.suite,
                env_config: suite.env_config,
                property,
                dims: (dims[0], dims[1]),
                fixed_samples,
                grid,
                seed,
                verify: verify.config(),
                out: out.clone(),
            })?;
            let marked = map.values.iter().flatten().filter(|v| **v > 0.0).count();
            println!("{marked} of {} cells marked; wrote {}", grid * grid, out.display());
        }
        Command::RolloutStates {
            network,
            env_config,
            episodes,
            seed,
            out,
        } => {
            let rows = commands::cmd_rollout_states(&commands::RolloutArgs {
                network,
                env_config,
                episodes,
                seed,
                out: out.clone(),
            })?;
            println!("{} states from {episodes} episodes; wrote {}", rows.len(), out.display());
        }
        Command::Ablation {
            config,
            suite,
            epochs,
            seed,
            verify,
            out,
            quiet,
        } => {
            let table = commands::cmd_ablation(&commands::AblationArgs {
                config,
                suite,
                epochs,
                seed,
                verify: verify.config(),
                out,
                progress: !quiet,
            })?;
            print!("{}", table.to_csv());
        }
        Command::Oracle {
            network,
            suite,
            property,
            points,
        } => {
            let rows = commands::cmd_oracle(&commands::OracleArgs {
                network,
                suite: suite.suite,
                env_config: suite.env_config,
                property,
                points,
            })?;
            for (name, fraction) in rows {
                println!("{name},{fraction}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
