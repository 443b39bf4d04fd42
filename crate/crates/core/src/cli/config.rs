//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::neural::{Algorithm, Hyperparameters};
use crate::trainer::{BatchMode, TrainerConfig};

use super::CliError;

/// Which parameter a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    Replay,
    Optimizer,
    Batch,
    Gamma,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Replay => "replay",
            SweepAxis::Optimizer => "optimizer",
            SweepAxis::Batch => "batch",
            SweepAxis::Gamma => "gamma",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "replay" => Ok(SweepAxis::Replay),
            "optimizer" => Ok(SweepAxis::Optimizer),
            "batch" | "batch_mode" => Ok(SweepAxis::Batch),
            "gamma" => Ok(SweepAxis::Gamma),
            other => Err(format!("unknown sweep axis `{other}` (replay|optimizer|batch|gamma)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Opponent {
    Random,
    Perfect,
    /// The full protocol: random then perfect.
    Both,
}

impl Opponent {
    pub fn name(self) -> &'static str {
        match self {
            Opponent::Random => "random",
            Opponent::Perfect => "perfect",
            Opponent::Both => "both",
        }
    }
}

impl FromStr for Opponent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Opponent::Random),
            "perfect" => Ok(Opponent::Perfect),
            "both" => Ok(Opponent::Both),
            other => Err(format!("unknown opponent `{other}` (random|perfect|both)")),
        }
    }
}

/// Everything a command can be configured with. Defaults, then the config
/// file, then command-line flags.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub trainer: TrainerConfig,
    /// Explicit optimizer hyperparameters; unset ones take the optimizer's
    /// defaults.
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub rho: Option<f64>,
    pub optimizer_epsilon: Option<f64>,
    pub out: Option<PathBuf>,
    pub sweep_axes: Vec<SweepAxis>,
    pub sweep_replay: Vec<usize>,
    pub sweep_gamma: Vec<f64>,
    pub sweep_optimizer: Vec<Algorithm>,
    pub sweep_batch_mode: Vec<BatchMode>,
    pub eval_opponent: Opponent,
    pub eval_games: u64,
    pub eval_perfect_games: u64,
    pub eval_epsilon: f64,
    pub model: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            trainer: TrainerConfig::default(),
            learning_rate: None,
            momentum: None,
            rho: None,
            optimizer_epsilon: None,
            out: None,
            sweep_axes: vec![SweepAxis::Replay],
            sweep_replay: vec![0, 1, 5, 10, 25, 50],
            sweep_gamma: vec![0.9],
            sweep_optimizer: Algorithm::ALL.to_vec(),
            sweep_batch_mode: vec![BatchMode::Variable, BatchMode::Fixed32],
            eval_opponent: Opponent::Both,
            eval_games: 10_000,
            eval_perfect_games: 1000,
            eval_epsilon: 0.01,
            model: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| format!("bad value `{value}` for `{key}`: {e}"))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(format!("`{key}` needs at least one value"));
    }
    Ok(items)
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Sets one key. Unknown keys and unparsable values are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let t = &mut self.trainer;
        match key {
            "total_games" | "games" => t.total_games = parse(key, value)?,
            "gamma" => t.gamma = parse(key, value)?,
            "epsilon_start" => t.epsilon_start = parse(key, value)?,
            "epsilon_end" => t.epsilon_end = parse(key, value)?,
            "replay_sample" => t.replay_sample = parse(key, value)?,
            "replay_capacity" => t.replay_capacity = parse(key, value)?,
            "batch_mode" => t.batch_mode = parse(key, value)?,
            "update_mode" => t.update_mode = parse(key, value)?,
            "optimizer" => t.optimizer = parse(key, value)?,
            "lr_schedule" => t.lr_schedule = parse(key, value)?,
            "validate_every" => t.validate_every = parse(key, value)?,
            "validate_games" => t.validate_games = parse(key, value)?,
            "validate_perfect_games" => t.validate_perfect_games = parse(key, value)?,
            "validation_epsilon" => t.validation_epsilon = parse(key, value)?,
            "turn_cap" => t.turn_cap = parse(key, value)?,
            "target_sync" => {
                t.target_sync = match value {
                    "none" | "0" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "keep_checkpoints" => t.keep_checkpoints = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "learning_rate" => self.learning_rate = Some(parse(key, value)?),
            "momentum" => self.momentum = Some(parse(key, value)?),
            "rho" => self.rho = Some(parse(key, value)?),
            "optimizer_epsilon" => self.optimizer_epsilon = Some(parse(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "sweep" => self.sweep_axes = parse_list(key, value)?,
            "sweep_replay" => self.sweep_replay = parse_list(key, value)?,
            "sweep_gamma" => self.sweep_gamma = parse_list(key, value)?,
            "sweep_optimizer" => self.sweep_optimizer = parse_list(key, value)?,
            "sweep_batch_mode" => self.sweep_batch_mode = parse_list(key, value)?,
            "eval_opponent" => self.eval_opponent = parse(key, value)?,
            "eval_games" => self.eval_games = parse(key, value)?,
            "eval_perfect_games" => self.eval_perfect_games = parse(key, value)?,
            "eval_epsilon" => self.eval_epsilon = parse(key, value)?,
            "model" => self.model = Some(PathBuf::from(value)),
            other => return Err(format!("unknown config key `{other}`")),
        }
        Ok(())
    }

    /// Applies a config file's lines: `key = value`, blank lines and `#`
    /// comments ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| CliError::Config {
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            self.set(key.trim(), value.trim()).map_err(err)?;
        }
        Ok(())
    }

    /// The trainer settings with optimizer hyperparameters resolved.
    pub fn resolved_trainer(&self) -> TrainerConfig {
        let mut t = self.trainer.clone();
        let d = Hyperparameters::defaults(t.optimizer);
        t.hyper = Hyperparameters {
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            momentum: self.momentum.unwrap_or(d.momentum),
            rho: self.rho.unwrap_or(d.rho),
            epsilon: self.optimizer_epsilon.unwrap_or(d.epsilon),
        };
        t
    }

    /// Every key with its effective value, in a form [`RunConfig::apply_text`]
    /// reads back.
    pub fn effective_text(&self) -> String {
        let t = self.resolved_trainer();
        let h = t.hyper;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("total_games", t.total_games.to_string());
        kv("gamma", t.gamma.to_string());
        kv("epsilon_start", t.epsilon_start.to_string());
        kv("epsilon_end", t.epsilon_end.to_string());
        kv("replay_sample", t.replay_sample.to_string());
        kv("replay_capacity", t.replay_capacity.to_string());
        kv("batch_mode", t.batch_mode.name().into());
        kv("update_mode", t.update_mode.name().into());
        kv("optimizer", t.optimizer.name().into());
        kv("learning_rate", h.learning_rate.to_string());
        kv("momentum", h.momentum.to_string());
        kv("rho", h.rho.to_string());
        kv("optimizer_epsilon", h.epsilon.to_string());
        kv("lr_schedule", t.lr_schedule.name().into());
        kv("validate_every", t.validate_every.to_string());
        kv("validate_games", t.validate_games.to_string());
        kv("validate_perfect_games", t.validate_perfect_games.to_string());
        kv("validation_epsilon", t.validation_epsilon.to_string());
        kv("turn_cap", t.turn_cap.to_string());
        kv(
            "target_sync",
            t.target_sync.map_or("none".into(), |v| v.to_string()),
        );
        kv("keep_checkpoints", t.keep_checkpoints.to_string());
        kv("seed", t.seed.to_string());
        if let Some(o) = &self.out {
            kv("out", o.display().to_string());
        }
        let axes: Vec<&str> = self.sweep_axes.iter().map(|a| a.name()).collect();
        kv("sweep", axes.join(","));
        kv("sweep_replay", join(&self.sweep_replay));
        kv("sweep_gamma", join(&self.sweep_gamma));
        kv("sweep_optimizer", join(&self.sweep_optimizer));
        kv("sweep_batch_mode", join(&self.sweep_batch_mode));
        kv("eval_opponent", self.eval_opponent.name().into());
        kv("eval_games", self.eval_games.to_string());
        kv("eval_perfect_games", self.eval_perfect_games.to_string());
        kv("eval_epsilon", self.eval_epsilon.to_string());
        if let Some(m) = &self.model {
            kv("model", m.display().to_string());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_lines_and_comments() {
        let mut c = RunConfig::default();
        c.apply_text("# run\ngames = 500\n\ngamma=0.8 # discount\noptimizer = rmsprop\nsweep_replay = 0, 10\n")
            .unwrap();
        assert_eq!(c.trainer.total_games, 500);
        assert_eq!(c.trainer.gamma, 0.8);
        assert_eq!(c.sweep_replay, vec![0, 10]);
        let t = c.resolved_trainer();
        assert_eq!(t.hyper, Hyperparameters::defaults(Algorithm::RmsProp));
    }

    #[test]
    fn errors_name_the_line() {
        let mut c = RunConfig::default();
        let e = c.apply_text("gamma = 0.9\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(c.apply_text("gamma 0.9").is_err());
        assert!(c.apply_text("gamma = x").is_err());
    }

    #[test]
    fn effective_text_round_trips() {
        let mut c = RunConfig::default();
        c.apply_text("optimizer = adadelta\nlearning_rate = 0.5\ntarget_sync = 1000\nout = /tmp/x\nsweep = optimizer,batch\n")
            .unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&c.effective_text()).unwrap();
        assert_eq!(back.resolved_trainer(), c.resolved_trainer());
        assert_eq!(back.effective_text(), c.effective_text());
    }
}
