//! Self-play Deep Q-Learning with whole-game experience replay.
//!
//! Each episode plays one game of the network against itself, stores it in
//! the replay ring, then updates the network: in variable mode on `N` whole
//! games sampled from the ring (one batch per game), in fixed mode on 32
//! transitions sampled across all stored games.

mod policy;
mod replay;

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;

use crate::arena::{self, Rates};
use crate::neural::{
    save_checkpoint, save_model, Algorithm, Hyperparameters, Network, NeuralError, OptimizerState,
    TrainingTarget,
};
use crate::rng::{derive_rng, derive_seed};
use crate::solver::SolveTable;

pub use policy::{
    chained_targets, compute_targets, greedy_neutral, play_self_game, select_turn, target_value,
    BLOCKED_VALUE,
};
pub use replay::{GameOutcome, GameRecord, ReplayMemory, Transition};

#[derive(Debug, thiserror::Error)]
pub enum TrainerError {
    #[error("invalid trainer config: {0}")]
    Config(String),
    #[error("invalid game record: {0}")]
    InvalidRecord(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrainerError + '_ {
    move |source| TrainerError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BatchMode {
    /// One whole game per batch.
    Variable,
    /// 32 transitions sampled across the memory.
    Fixed32,
}

impl BatchMode {
    pub fn name(self) -> &'static str {
        match self {
            BatchMode::Variable => "variable",
            BatchMode::Fixed32 => "fixed32",
        }
    }
}

impl fmt::Display for BatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "variable" | "variable_game" => Ok(BatchMode::Variable),
            "fixed32" | "fixed_32" => Ok(BatchMode::Fixed32),
            other => Err(format!("unknown batch mode `{other}` (variable|fixed32)")),
        }
    }
}

/// How the `N` sampled games of a variable-mode episode are applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UpdateMode {
    /// One optimizer step per sampled game.
    PerGame,
    /// All sampled games concatenated into one step.
    Merged,
}

impl UpdateMode {
    pub fn name(self) -> &'static str {
        match self {
            UpdateMode::PerGame => "per_game",
            UpdateMode::Merged => "merged",
        }
    }
}

impl FromStr for UpdateMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per_game" => Ok(UpdateMode::PerGame),
            "merged" => Ok(UpdateMode::Merged),
            other => Err(format!("unknown update mode `{other}` (per_game|merged)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LrSchedule {
    /// x0.1 from half-way, x0.01 from 80%.
    Step,
    Constant,
}

impl LrSchedule {
    pub fn name(self) -> &'static str {
        match self {
            LrSchedule::Step => "step",
            LrSchedule::Constant => "constant",
        }
    }
}

impl FromStr for LrSchedule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "step" => Ok(LrSchedule::Step),
            "constant" => Ok(LrSchedule::Constant),
            other => Err(format!("unknown lr schedule `{other}` (step|constant)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainerConfig {
    pub total_games: u64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Games sampled per episode in variable mode; 0 trains on the
    /// just-finished game only.
    pub replay_sample: usize,
    pub replay_capacity: usize,
    pub batch_mode: BatchMode,
    pub update_mode: UpdateMode,
    pub optimizer: Algorithm,
    pub hyper: Hyperparameters,
    pub lr_schedule: LrSchedule,
    pub validate_every: u64,
    /// Validation games against the random agent.
    pub validate_games: usize,
    /// Validation games against the perfect agent; 0 skips that match.
    pub validate_perfect_games: usize,
    pub validation_epsilon: f64,
    pub turn_cap: usize,
    /// Refresh a frozen target network every this many games; `None` means
    /// targets come from the live network.
    pub target_sync: Option<u64>,
    /// Periodic checkpoints kept on disk besides the best one.
    pub keep_checkpoints: usize,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            total_games: 100_000,
            gamma: 0.9,
            epsilon_start: 0.05,
            epsilon_end: 0.01,
            replay_sample: 10,
            replay_capacity: 10_000,
            batch_mode: BatchMode::Variable,
            update_mode: UpdateMode::PerGame,
            optimizer: Algorithm::SgdNesterov,
            hyper: Hyperparameters::defaults(Algorithm::SgdNesterov),
            lr_schedule: LrSchedule::Step,
            validate_every: 1000,
            validate_games: 1000,
            validate_perfect_games: 1000,
            validation_epsilon: 0.01,
            turn_cap: 100,
            target_sync: None,
            keep_checkpoints: 5,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    /// Switches optimizer and resets its hyperparameters to that optimizer's
    /// defaults.
    pub fn with_optimizer(mut self, optimizer: Algorithm) -> Self {
        self.optimizer = optimizer;
        self.hyper = Hyperparameters::defaults(optimizer);
        self
    }

    pub fn validate(&self) -> Result<(), TrainerError> {
        let fail = |m: &str| Err(TrainerError::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail("gamma must lie in (0, 1]");
        }
        if !(self.epsilon_start >= self.epsilon_end
            && self.epsilon_end >= 0.0
            && self.epsilon_start <= 1.0)
        {
            return fail("need 1 >= epsilon_start >= epsilon_end >= 0");
        }
        if self.total_games == 0 {
            return fail("total_games must be positive");
        }
        if self.replay_capacity == 0 {
            return fail("replay_capacity must be positive");
        }
        if self.validate_every == 0 {
            return fail("validate_every must be positive");
        }
        if self.validate_games == 0 {
            return fail("validate_games must be positive");
        }
        if !(0.0..=1.0).contains(&self.validation_epsilon) {
            return fail("validation_epsilon must lie in [0, 1]");
        }
        if self.turn_cap == 0 {
            return fail("turn_cap must be positive");
        }
        if self.target_sync == Some(0) {
            return fail("target_sync must be positive");
        }
        let h = &self.hyper;
        if !(h.learning_rate > 0.0 && h.learning_rate.is_finite()) {
            return fail("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&h.momentum) || !(0.0..1.0).contains(&h.rho) || h.epsilon < 0.0 {
            return fail("momentum and rho must lie in [0, 1), epsilon >= 0");
        }
        Ok(())
    }
}

/// `(epsilon, learning_rate)` before episode `episode` (0-based).
pub fn schedules(episode: u64, config: &TrainerConfig) -> (f64, f64) {
    let total = config.total_games as f64;
    let frac = (episode as f64 / total).min(1.0);
    let eps = config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac;
    let base = config.hyper.learning_rate;
    let lr = match config.lr_schedule {
        LrSchedule::Constant => base,
        LrSchedule::Step if frac >= 0.8 => base * 0.01,
        LrSchedule::Step if frac >= 0.5 => base * 0.1,
        LrSchedule::Step => base,
    };
    (eps, lr)
}

/// Serials and pre-update losses of the games an update trained on.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Update {
    pub games: Vec<u64>,
    pub losses: Vec<f32>,
}

fn fit_batch(
    net: &mut Network,
    opt: &mut OptimizerState,
    games: &[&GameRecord],
    gamma: f32,
    lr: f64,
    target: Option<&Network>,
) -> Result<f32, TrainerError> {
    let width = net.output_size();
    let inputs: Vec<_> = games
        .iter()
        .flat_map(|g| g.transitions.iter().map(|t| t.input))
        .collect();
    let (grads, loss) = if target.is_none() && games.iter().all(|g| g.is_chained()) {
        net.backward_bootstrapped(&inputs, |out| {
            let mut row = 0;
            let mut batch = Vec::with_capacity(inputs.len());
            for g in games {
                let rows = &out[row * width..(row + g.len()) * width];
                batch.extend(chained_targets(g, rows, width, gamma).expect("chained record"));
                row += g.len();
            }
            batch
        })?
    } else {
        let refs: Vec<&Transition> = games.iter().flat_map(|g| g.transitions.iter()).collect();
        let batch = compute_targets(target.unwrap_or(net), &refs, gamma);
        net.backward(&batch)?
    };
    opt.step_with_lr(net, &grads, lr)?;
    Ok(loss)
}

/// Variable-batch update: `n_samples` games drawn uniformly with replacement,
/// each fitted as one batch (or all as one batch under
/// [`UpdateMode::Merged`]). An empty memory is a logged no-op.
#[allow(clippy::too_many_arguments)]
pub fn train_step_variable<R: Rng + ?Sized>(
    net: &mut Network,
    opt: &mut OptimizerState,
    memory: &ReplayMemory,
    n_samples: usize,
    gamma: f32,
    lr: f64,
    rng: &mut R,
    target: Option<&Network>,
    mode: UpdateMode,
) -> Result<Update, TrainerError> {
    if memory.is_empty() {
        log::warn!("variable-batch update skipped: replay memory is empty");
        return Ok(Update::default());
    }
    let picks: Vec<(u64, &GameRecord)> = (0..n_samples)
        .map(|_| memory.sample_game(rng).unwrap())
        .collect();
    let mut update = Update::default();
    match mode {
        UpdateMode::PerGame => {
            for (serial, game) in picks {
                let loss = fit_batch(net, opt, &[game], gamma, lr, target)?;
                update.games.push(serial);
                update.losses.push(loss);
            }
        }
        UpdateMode::Merged if !picks.is_empty() => {
            let games: Vec<&GameRecord> = picks.iter().map(|p| p.1).collect();
            let loss = fit_batch(net, opt, &games, gamma, lr, target)?;
            update.games = picks.iter().map(|p| p.0).collect();
            update.losses.push(loss);
        }
        UpdateMode::Merged => {}
    }
    Ok(update)
}

/// One step on the just-finished game only (`N = 0`).
pub fn train_on_newest(
    net: &mut Network,
    opt: &mut OptimizerState,
    memory: &ReplayMemory,
    gamma: f32,
    lr: f64,
    target: Option<&Network>,
) -> Result<Update, TrainerError> {
    let Some((serial, game)) = memory.newest() else {
        log::warn!("update skipped: replay memory is empty");
        return Ok(Update::default());
    };
    let loss = fit_batch(net, opt, &[game], gamma, lr, target)?;
    Ok(Update {
        games: vec![serial],
        losses: vec![loss],
    })
}

pub const FIXED_BATCH: usize = 32;

/// Fixed-batch update on 32 transitions drawn uniformly across the memory.
/// Returns `None` (and logs) while fewer than 32 transitions are stored.
pub fn train_step_fixed32<R: Rng + ?Sized>(
    net: &mut Network,
    opt: &mut OptimizerState,
    memory: &ReplayMemory,
    gamma: f32,
    lr: f64,
    rng: &mut R,
    target: Option<&Network>,
) -> Result<Option<f32>, TrainerError> {
    if memory.transition_count() < FIXED_BATCH {
        log::warn!(
            "fixed-batch update skipped: {} stored transitions",
            memory.transition_count()
        );
        return Ok(None);
    }
    let picks = memory.sample_transitions(FIXED_BATCH, rng);
    let batch: Vec<TrainingTarget> = compute_targets(target.unwrap_or(net), &picks, gamma);
    let (grads, loss) = net.backward(&batch)?;
    opt.step_with_lr(net, &grads, lr)?;
    Ok(Some(loss))
}

/// One row of the learning-curve file.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveRecord {
    pub episode: u64,
    pub epsilon: f64,
    pub learning_rate: f64,
    /// Mean pre-update loss since the previous row; NaN when no update ran.
    pub mean_loss: f64,
    pub vs_random: Rates,
    pub vs_perfect: Option<Rates>,
}

pub const CURVE_HEADER: &str = "episode,epsilon,learning_rate,mean_loss,win_vs_random,draw_vs_random,loss_vs_random,win_vs_perfect,draw_vs_perfect,loss_vs_perfect";

impl CurveRecord {
    pub fn csv_row(&self) -> String {
        let p = |r: Option<Rates>| match r {
            Some(r) => format!("{:.4},{:.4},{:.4}", r.win, r.draw, r.loss),
            None => ",,".to_string(),
        };
        let loss = if self.mean_loss.is_finite() {
            format!("{:.6}", self.mean_loss)
        } else {
            String::new()
        };
        format!(
            "{},{:.6},{:.6e},{},{},{}",
            self.episode,
            self.epsilon,
            self.learning_rate,
            loss,
            p(Some(self.vs_random)),
            p(self.vs_perfect)
        )
    }
}

pub fn curve_csv(records: &[CurveRecord]) -> String {
    let mut s = String::from(CURVE_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// What one episode did.
#[derive(Clone, Debug)]
pub struct EpisodeReport {
    pub episode: u64,
    pub outcome: GameOutcome,
    pub turns: usize,
    pub update: Update,
}

/// Training state advanced one episode at a time.
pub struct Trainer {
    config: TrainerConfig,
    net: Network,
    opt: OptimizerState,
    memory: ReplayMemory,
    target: Option<Network>,
    episode: u64,
    loss_sum: f64,
    loss_count: u64,
}

impl Trainer {
    pub fn new(config: TrainerConfig) -> Result<Self, TrainerError> {
        config.validate()?;
        let net = Network::new(derive_seed(config.seed, "init", 0));
        let opt = OptimizerState::new(config.optimizer, config.hyper, &net);
        let target = config.target_sync.map(|_| net.clone());
        Ok(Trainer {
            memory: ReplayMemory::new(config.replay_capacity),
            config,
            net,
            opt,
            target,
            episode: 0,
            loss_sum: 0.0,
            loss_count: 0,
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.opt
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    /// Episodes completed.
    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn is_done(&self) -> bool {
        self.episode >= self.config.total_games
    }

    /// Self-play, store, update.
    pub fn play_episode(&mut self) -> Result<EpisodeReport, TrainerError> {
        let c = &self.config;
        let e = self.episode;
        let (eps, lr) = schedules(e, c);
        let gamma = c.gamma as f32;
        let mut play_rng = derive_rng(c.seed, "selfplay", e);
        let record = play_self_game(&self.net, eps, &mut play_rng, c.turn_cap);
        let (outcome, turns) = (record.outcome, record.len());
        self.memory.push(record)?;
        let mut rng = derive_rng(c.seed, "replay", e);
        let target = self.target.as_ref();
        let update = match c.batch_mode {
            BatchMode::Variable if c.replay_sample == 0 => train_on_newest(
                &mut self.net,
                &mut self.opt,
                &self.memory,
                gamma,
                lr,
                target,
            )?,
            BatchMode::Variable => train_step_variable(
                &mut self.net,
                &mut self.opt,
                &self.memory,
                c.replay_sample,
                gamma,
                lr,
                &mut rng,
                target,
                c.update_mode,
            )?,
            BatchMode::Fixed32 => {
                let loss = train_step_fixed32(
                    &mut self.net,
                    &mut self.opt,
                    &self.memory,
                    gamma,
                    lr,
                    &mut rng,
                    target,
                )?;
                Update {
                    games: Vec::new(),
                    losses: loss.into_iter().collect(),
                }
            }
        };
        for &l in &update.losses {
            self.loss_sum += l as f64;
            self.loss_count += 1;
        }
        self.episode += 1;
        if let (Some(every), Some(t)) = (self.config.target_sync, self.target.as_mut()) {
            if self.episode % every == 0 {
                t.clone_from(&self.net);
            }
        }
        Ok(EpisodeReport {
            episode: e,
            outcome,
            turns,
            update,
        })
    }

    /// Runs the validation matches for the current network and starts a new
    /// loss-averaging window.
    pub fn validate(&mut self, table: Option<&SolveTable>) -> CurveRecord {
        let c = &self.config;
        let (eps, lr) = schedules(self.episode, c);
        let seed = derive_seed(c.seed, "validate", self.episode);
        let v = arena::validate(
            &self.net,
            table,
            c.validate_games,
            c.validate_perfect_games,
            c.validation_epsilon,
            c.turn_cap,
            seed,
        );
        let mean_loss = if self.loss_count == 0 {
            f64::NAN
        } else {
            self.loss_sum / self.loss_count as f64
        };
        self.loss_sum = 0.0;
        self.loss_count = 0;
        CurveRecord {
            episode: self.episode,
            epsilon: eps,
            learning_rate: lr,
            mean_loss,
            vs_random: v.vs_random,
            vs_perfect: v.vs_perfect,
        }
    }
}

/// Final network, optimizer state and learning curve of a run.
pub struct TrainingOutcome {
    pub network: Network,
    pub optimizer: OptimizerState,
    pub curve: Vec<CurveRecord>,
}

pub const CURVE_FILE: &str = "curve.csv";
pub const BEST_CHECKPOINT: &str = "best.lgdqn";
pub const FINAL_MODEL: &str = "final.lgdqn";

pub fn checkpoint_name(episode: u64) -> String {
    format!("checkpoint-{episode:07}.lgdqn")
}

/// Runs a whole training schedule. With `out`, the curve file is rewritten
/// and a checkpoint saved at every validation (keeping the newest
/// `keep_checkpoints` plus the best by win rate against random), and the
/// final network is written at the end.
pub fn run_training(
    config: &TrainerConfig,
    table: Option<&SolveTable>,
    out: Option<&Path>,
) -> Result<TrainingOutcome, TrainerError> {
    if config.validate_perfect_games > 0 && table.is_none() {
        return Err(TrainerError::Config(
            "validation against the perfect agent needs a solve table".into(),
        ));
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let probe = dir.join(".write-test");
        fs::File::create(&probe)
            .and_then(|mut f| f.write_all(b""))
            .map_err(io_err(dir))?;
        let _ = fs::remove_file(&probe);
    }
    let mut trainer = Trainer::new(config.clone())?;
    let mut curve = Vec::new();
    let mut kept: Vec<PathBuf> = Vec::new();
    let mut best = f64::NEG_INFINITY;
    while !trainer.is_done() {
        trainer.play_episode()?;
        let e = trainer.episode();
        if e % config.validate_every != 0 && e != config.total_games {
            continue;
        }
        let rec = trainer.validate(table);
        log::info!(
            "episode {e}: win vs random {:.3}, mean loss {:.5}",
            rec.vs_random.win,
            rec.mean_loss
        );
        let improved = rec.vs_random.win > best;
        best = best.max(rec.vs_random.win);
        curve.push(rec);
        if let Some(dir) = out {
            let path = dir.join(CURVE_FILE);
            fs::write(&path, curve_csv(&curve)).map_err(io_err(&path))?;
            let ck = dir.join(checkpoint_name(e));
            save_checkpoint(trainer.network(), trainer.optimizer(), &ck)?;
            if improved {
                save_checkpoint(
                    trainer.network(),
                    trainer.optimizer(),
                    dir.join(BEST_CHECKPOINT),
                )?;
            }
            kept.push(ck);
            while kept.len() > config.keep_checkpoints {
                let old = kept.remove(0);
                fs::remove_file(&old).map_err(io_err(&old))?;
            }
        }
    }
    if let Some(dir) = out {
        save_model(trainer.network(), dir.join(FINAL_MODEL))?;
    }
    Ok(TrainingOutcome {
        network: trainer.net,
        optimizer: trainer.opt,
        curve,
    })
}
