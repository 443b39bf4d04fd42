//! Command implementations behind the `lgame` binary. Each command writes its
//! human-readable output to a caller-supplied writer.

mod config;
mod play;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::arena::{self, EvaluationConfig, EvaluationReport};
use crate::game::{enumerate_arrangements, start_position, Player};
use crate::neural::{load_checkpoint, Algorithm, Network, NeuralError};
use crate::solver::{DistanceCount, SolveTable};
use crate::trainer::{self, curve_csv, BatchMode, TrainerConfig, TrainerError};

pub use config::{Opponent, RunConfig, SweepAxis};
pub use play::{cmd_play, parse_turn, PlayOutcome};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error(transparent)]
    Trainer(#[from] TrainerError),
    #[error("{path}: {source}")]
    Model { path: PathBuf, source: NeuralError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("output: {0}")]
    Output(#[from] io::Error),
}

impl CliError {
    /// 1 for bad invocations or configs, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 1,
            _ => 2,
        }
    }
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_at(path))
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_at(dir))
}

/// Echoes the effective configuration into the output directory.
fn echo_config(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    write_file(&dir.join("config.txt"), cfg.effective_text())
}

/// Arrangement counts, blocked positions and the distance readings.
pub fn cmd_enumerate(w: &mut dyn Write) -> Result<(), CliError> {
    let counts = enumerate_arrangements();
    writeln!(w, "raw arrangements: {}", counts.raw)?;
    writeln!(w, "canonical arrangements: {}", counts.canonical)?;
    writeln!(w, "L-piece pairs: {}", counts.l_pairs)?;
    let table = SolveTable::solve_all();
    let stats = table.stats();
    writeln!(
        w,
        "blocked arrangements: {} (up to symmetry and colour swap)",
        stats.blocked_up_to_colour
    )?;
    writeln!(
        w,
        "blocked positions (arrangement, side to move): {}",
        stats.blocked_positions
    )?;
    writeln!(w, "max legal placements: {}", stats.max_placements)?;
    writeln!(w, "max legal turns: {}", stats.max_turns)?;
    writeln!(w, "distance histogram, A to move (plies: won / lost):")?;
    let mut ds: Vec<u16> = stats
        .win_histogram_a_to_move
        .keys()
        .chain(stats.loss_histogram_a_to_move.keys())
        .copied()
        .collect();
    ds.sort_unstable();
    ds.dedup();
    for d in ds {
        let won = stats.win_histogram_a_to_move.get(&d).copied().unwrap_or(0);
        let lost = stats.loss_histogram_a_to_move.get(&d).copied().unwrap_or(0);
        writeln!(w, "  {d:>2}: {won} / {lost}")?;
    }
    writeln!(w, "decided within 5 moves:")?;
    let readings: Vec<DistanceCount> = stats.decided_within(5);
    for r in &readings {
        writeln!(w, "  {r}")?;
    }
    let matches: Vec<&DistanceCount> = readings.iter().filter(|r| r.count == 14).collect();
    if matches.is_empty() {
        writeln!(w, "readings giving 14: none")?;
    } else {
        for r in matches {
            writeln!(w, "reading giving 14: {r}")?;
        }
    }
    Ok(())
}

/// Solves the game; with `out`, writes the full table as text.
pub fn cmd_solve(out: Option<&Path>, w: &mut dyn Write) -> Result<(), CliError> {
    let table = SolveTable::solve_all();
    let s = table.stats();
    writeln!(w, "positions: {}", s.positions)?;
    writeln!(w, "won: {}  lost: {}  drawn: {}", s.wins, s.losses, s.draws)?;
    let longest_win = s.win_histogram.keys().max().copied().unwrap_or(0);
    let longest_loss = s.loss_histogram.keys().max().copied().unwrap_or(0);
    writeln!(
        w,
        "longest forced win: {longest_win} plies; longest forced loss: {longest_loss} plies"
    )?;
    let start = start_position();
    writeln!(
        w,
        "start position: A to move {}, B to move {}",
        table.query(&start),
        table.query(&start.with_to_move(Player::B))
    )?;
    if let Some(dir) = out {
        prepare_out(dir)?;
        let path = dir.join("solve_table.txt");
        write_file(&path, table.dump())?;
        writeln!(w, "table written to {}", path.display())?;
    }
    Ok(())
}

fn needs_table(t: &TrainerConfig) -> Option<SolveTable> {
    (t.validate_perfect_games > 0).then(SolveTable::solve_all)
}

/// One training run; artifacts go to the configured output directory.
pub fn cmd_train(cfg: &RunConfig, w: &mut dyn Write) -> Result<(), CliError> {
    let t = cfg.resolved_trainer();
    t.validate()?;
    let dir = cfg
        .out
        .as_deref()
        .ok_or_else(|| CliError::Usage("train needs an output directory (--out)".into()))?;
    prepare_out(dir)?;
    echo_config(cfg, dir)?;
    let table = needs_table(&t);
    let run = trainer::run_training(&t, table.as_ref(), Some(dir))?;
    if let Some(last) = run.curve.last() {
        writeln!(
            w,
            "trained {} games; final win rate vs random {:.4}",
            last.episode, last.vs_random.win
        )?;
        if let Some(p) = last.vs_perfect {
            writeln!(
                w,
                "vs perfect: win {:.4} draw {:.4} loss {:.4}",
                p.win, p.draw, p.loss
            )?;
        }
    }
    writeln!(w, "artifacts in {}", dir.display())?;
    Ok(())
}

/// Names and configs of every cell of the requested sweep axes.
pub fn sweep_cells(cfg: &RunConfig) -> Vec<(String, TrainerConfig)> {
    let base = cfg.resolved_trainer();
    let mut cells = Vec::new();
    for axis in &cfg.sweep_axes {
        match axis {
            SweepAxis::Replay => {
                for &n in &cfg.sweep_replay {
                    let t = TrainerConfig {
                        replay_sample: n,
                        batch_mode: BatchMode::Variable,
                        ..base.clone()
                    };
                    cells.push((format!("replay-{n}"), t));
                }
            }
            SweepAxis::Optimizer => {
                for &o in &cfg.sweep_optimizer {
                    let mut c = cfg.clone();
                    c.trainer.optimizer = o;
                    if o != base.optimizer {
                        c.learning_rate = None;
                        c.momentum = None;
                        c.rho = None;
                        c.optimizer_epsilon = None;
                    }
                    cells.push((format!("optimizer-{}", o.name()), c.resolved_trainer()));
                }
            }
            SweepAxis::Batch => {
                for &b in &cfg.sweep_batch_mode {
                    let t = TrainerConfig {
                        batch_mode: b,
                        ..base.clone()
                    };
                    cells.push((format!("batch-{}", b.name()), t));
                }
            }
            SweepAxis::Gamma => {
                for &g in &cfg.sweep_gamma {
                    let t = TrainerConfig {
                        gamma: g,
                        ..base.clone()
                    };
                    cells.push((format!("gamma-{g}"), t));
                }
            }
        }
    }
    cells
}

/// Runs each sweep cell, writing `curve_<cell>.csv` and `model_<cell>.lgdqn`.
pub fn cmd_sweep(cfg: &RunConfig, w: &mut dyn Write) -> Result<(), CliError> {
    let cells = sweep_cells(cfg);
    if cells.is_empty() {
        return Err(CliError::Usage("the sweep grid is empty".into()));
    }
    for (_, t) in &cells {
        t.validate()?;
    }
    let dir = cfg
        .out
        .as_deref()
        .ok_or_else(|| CliError::Usage("sweep needs an output directory (--out)".into()))?;
    prepare_out(dir)?;
    echo_config(cfg, dir)?;
    let table = cells
        .iter()
        .any(|(_, t)| t.validate_perfect_games > 0)
        .then(SolveTable::solve_all);
    for (name, t) in &cells {
        let run = trainer::run_training(t, table.as_ref(), None)?;
        write_file(&dir.join(format!("curve_{name}.csv")), curve_csv(&run.curve))?;
        let model = dir.join(format!("model_{name}.lgdqn"));
        crate::neural::save_model(&run.network, &model).map_err(|source| CliError::Model {
            path: model.clone(),
            source,
        })?;
        let last = run.curve.last().map_or(0.0, |r| r.vs_random.win);
        writeln!(w, "{name}: final win rate vs random {last:.4}")?;
    }
    Ok(())
}

pub fn load_network(path: &Path) -> Result<Network, CliError> {
    load_checkpoint(path)
        .map(|(net, _)| net)
        .map_err(|source| CliError::Model {
            path: path.to_path_buf(),
            source,
        })
}

/// Evaluates a saved model; writes `report.txt` and `report.csv` when an
/// output directory is set.
pub fn cmd_eval(cfg: &RunConfig, w: &mut dyn Write) -> Result<EvaluationReport, CliError> {
    let path = cfg
        .model
        .as_deref()
        .ok_or_else(|| CliError::Usage("eval needs a model (--model)".into()))?;
    if !(0.0..=1.0).contains(&cfg.eval_epsilon) {
        return Err(CliError::Usage("eval epsilon must lie in [0, 1]".into()));
    }
    let net = load_network(path)?;
    let (random_games, perfect_games) = match cfg.eval_opponent {
        Opponent::Random => (cfg.eval_games, 0),
        Opponent::Perfect => (0, cfg.eval_perfect_games),
        Opponent::Both => (cfg.eval_games, cfg.eval_perfect_games),
    };
    let table = (perfect_games > 0).then(SolveTable::solve_all);
    let report = arena::final_evaluation(
        &net,
        table.as_ref(),
        EvaluationConfig {
            random_games,
            perfect_games,
            epsilon: cfg.eval_epsilon,
            turn_cap: cfg.trainer.turn_cap,
            seed: cfg.trainer.seed,
        },
    );
    let text = report.text();
    w.write_all(text.as_bytes())?;
    if let Some(dir) = cfg.out.as_deref() {
        prepare_out(dir)?;
        echo_config(cfg, dir)?;
        write_file(&dir.join("report.txt"), &text)?;
        write_file(&dir.join("report.csv"), report.record_csv(0))?;
    }
    Ok(report)
}

/// Maps a `--optimizer` style value.
pub fn parse_optimizer(s: &str) -> Result<Algorithm, CliError> {
    s.parse().map_err(CliError::Usage)
}
