//! Trains briefly, saves a checkpoint, reloads it and runs the full
//! evaluation protocol on the reloaded network.
//!
//! `cargo run --release --example evaluate_checkpoint [path]`

use lgame::arena::{final_evaluation, EvaluationConfig};
use lgame::neural::{load_checkpoint, save_checkpoint};
use lgame::solver::SolveTable;
use lgame::trainer::{run_training, TrainerConfig};

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().join("example.lgdqn").display().to_string());
    let cfg = TrainerConfig {
        total_games: 1000,
        validate_every: 1000,
        validate_games: 200,
        validate_perfect_games: 0,
        seed: 2,
        ..TrainerConfig::default()
    };
    let run = run_training(&cfg, None, None).expect("training");
    save_checkpoint(&run.network, &run.optimizer, &path).expect("save");
    let (net, opt) = load_checkpoint(&path).expect("load");
    assert_eq!(net, run.network);
    println!(
        "reloaded {path}: {} parameters, optimizer {}",
        net.num_params(),
        opt.map_or("none".to_string(), |o| o.algorithm.to_string())
    );

    let table = SolveTable::solve_all();
    let report = final_evaluation(
        &net,
        Some(&table),
        EvaluationConfig {
            random_games: 2000,
            perfect_games: 200,
            ..EvaluationConfig::default()
        },
    );
    print!("{}", report.text());
}
