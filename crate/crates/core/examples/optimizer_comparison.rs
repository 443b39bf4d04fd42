//! The three optimizers on the same short training schedule.
//!
//! `cargo run --release --example optimizer_comparison [games]`

use lgame::neural::Algorithm;
use lgame::trainer::{run_training, TrainerConfig};

fn main() {
    let games = std::env::args()
        .nth(1)
        .map_or(1000, |s| s.parse().expect("games"));
    for alg in Algorithm::ALL {
        let cfg = TrainerConfig {
            total_games: games,
            validate_every: (games / 4).max(1),
            validate_games: 500,
            validate_perfect_games: 0,
            seed: 3,
            ..TrainerConfig::default()
        }
        .with_optimizer(alg);
        let run = run_training(&cfg, None, None).expect("training");
        let curve: Vec<String> = run
            .curve
            .iter()
            .map(|r| format!("{}:{:.3}", r.episode, r.vs_random.win))
            .collect();
        println!("{alg:<9} lr {:<6} {}", cfg.hyper.learning_rate, curve.join("  "));
    }
}
