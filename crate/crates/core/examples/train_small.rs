//! A short self-play training run with experience replay, printing the
//! learning curve.
//!
//! `cargo run --release --example train_small [games] [replay_sample]`

use lgame::trainer::{run_training, TrainerConfig, CURVE_HEADER};

fn main() {
    let mut args = std::env::args().skip(1);
    let games = args.next().map_or(2000, |s| s.parse().expect("games"));
    let replay_sample = args.next().map_or(10, |s| s.parse().expect("replay sample"));
    let cfg = TrainerConfig {
        total_games: games,
        replay_sample,
        validate_every: (games / 10).max(1),
        validate_games: 500,
        validate_perfect_games: 0,
        seed: 1,
        ..TrainerConfig::default()
    };
    let run = run_training(&cfg, None, None).expect("training");
    println!("{CURVE_HEADER}");
    for r in &run.curve {
        println!("{}", r.csv_row());
    }
}
