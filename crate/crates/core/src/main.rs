use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lgame::arena::{Agent, DEFAULT_TURN_CAP};
use lgame::cli::{self, CliError, Opponent, RunConfig, SweepAxis};
use lgame::game::Player;
use lgame::neural::Algorithm;
use lgame::solver::SolveTable;
use lgame::trainer::BatchMode;

/// L-Game solver, Deep Q-learning trainer and arena.
#[derive(Parser, Debug)]
#[command(name = "lgame", version)]
struct Cli {
    /// `key = value` config file; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Count arrangements and blocked positions.
    Enumerate,
    /// Solve every position; with --out, dump the table.
    Solve,
    /// Train one agent by self-play.
    Train(TrainArgs),
    /// Train one agent per cell of a parameter grid.
    Sweep {
        #[command(flatten)]
        train: TrainArgs,
        /// Parameter to vary; repeat for several.
        #[arg(long = "axis", value_enum)]
        axes: Vec<AxisArg>,
    },
    /// Evaluate a saved model against the baselines.
    Eval {
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        #[arg(long, value_enum)]
        opponent: Option<OpponentArg>,
        /// Games against the random agent.
        #[arg(long)]
        games: Option<u64>,
        /// Games against the perfect agent.
        #[arg(long)]
        perfect_games: Option<u64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Play a game in the terminal.
    Play {
        #[arg(long, value_enum, default_value = "perfect")]
        opponent: PlayAgainst,
        /// Model for `--opponent dqn`.
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        /// Your side; A moves first.
        #[arg(long = "as", value_enum, default_value = "a")]
        side: Side,
    },
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    games: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Past games replayed after each new one.
    #[arg(long)]
    replay_sample: Option<usize>,
    #[arg(long, value_enum)]
    batch_mode: Option<BatchArg>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum BatchArg {
    Variable,
    Fixed32,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum OptimizerArg {
    Sgd,
    Rmsprop,
    Adadelta,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AxisArg {
    Replay,
    Optimizer,
    Batch,
    Gamma,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum OpponentArg {
    Random,
    Perfect,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PlayAgainst {
    Random,
    Perfect,
    Dqn,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Side {
    A,
    B,
}

fn apply_train(cfg: &mut RunConfig, a: &TrainArgs) {
    let t = &mut cfg.trainer;
    if let Some(g) = a.games {
        t.total_games = g;
    }
    if let Some(g) = a.gamma {
        t.gamma = g;
    }
    if let Some(n) = a.replay_sample {
        t.replay_sample = n;
    }
    if let Some(b) = a.batch_mode {
        t.batch_mode = match b {
            BatchArg::Variable => BatchMode::Variable,
            BatchArg::Fixed32 => BatchMode::Fixed32,
        };
    }
    if let Some(o) = a.optimizer {
        t.optimizer = match o {
            OptimizerArg::Sgd => Algorithm::SgdNesterov,
            OptimizerArg::Rmsprop => Algorithm::RmsProp,
            OptimizerArg::Adadelta => Algorithm::AdaDelta,
        };
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        cfg.apply_text(&text)?;
    }
    if let Some(s) = cli.seed {
        cfg.trainer.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = load_config(&cli)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Enumerate => cli::cmd_enumerate(&mut out),
        Command::Solve => cli::cmd_solve(cfg.out.as_deref(), &mut out),
        Command::Train(a) => {
            apply_train(&mut cfg, a);
            cli::cmd_train(&cfg, &mut out)
        }
        Command::Sweep { train, axes } => {
            apply_train(&mut cfg, train);
            if !axes.is_empty() {
                cfg.sweep_axes = axes
                    .iter()
                    .map(|a| match a {
                        AxisArg::Replay => SweepAxis::Replay,
                        AxisArg::Optimizer => SweepAxis::Optimizer,
                        AxisArg::Batch => SweepAxis::Batch,
                        AxisArg::Gamma => SweepAxis::Gamma,
                    })
                    .collect();
            }
            cli::cmd_sweep(&cfg, &mut out)
        }
        Command::Eval {
            model,
            opponent,
            games,
            perfect_games,
            epsilon,
        } => {
            if let Some(m) = model {
                cfg.model = Some(m.clone());
            }
            if let Some(o) = opponent {
                cfg.eval_opponent = match o {
                    OpponentArg::Random => Opponent::Random,
                    OpponentArg::Perfect => Opponent::Perfect,
                    OpponentArg::Both => Opponent::Both,
                };
            }
            if let Some(g) = games {
                cfg.eval_games = *g;
            }
            if let Some(g) = perfect_games {
                cfg.eval_perfect_games = *g;
            }
            if let Some(e) = epsilon {
                cfg.eval_epsilon = *e;
            }
            cli::cmd_eval(&cfg, &mut out).map(|_| ())
        }
        Command::Play {
            opponent,
            model,
            side,
        } => {
            let table;
            let net;
            let agent = match opponent {
                PlayAgainst::Random => Agent::Random,
                PlayAgainst::Perfect => {
                    table = SolveTable::solve_all();
                    Agent::Perfect(&table)
                }
                PlayAgainst::Dqn => {
                    let path = model
                        .as_ref()
                        .or(cfg.model.as_ref())
                        .ok_or_else(|| CliError::Usage("--opponent dqn needs --model".into()))?;
                    net = cli::load_network(path)?;
                    Agent::Dqn {
                        net: &net,
                        epsilon: 0.0,
                    }
                }
            };
            let human = match side {
                Side::A => Player::A,
                Side::B => Player::B,
            };
            let stdin = io::stdin();
            cli::cmd_play(
                agent,
                human,
                cfg.trainer.seed,
                DEFAULT_TURN_CAP,
                &mut stdin.lock(),
                &mut out,
            )
            .map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = io::stdout().flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
