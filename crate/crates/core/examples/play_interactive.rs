//! Play the perfect agent in the terminal. Type `legal` for your options,
//! `quit` to stop.
//!
//! `cargo run --release --example play_interactive [a|b]`

use lgame::arena::{Agent, DEFAULT_TURN_CAP};
use lgame::cli::cmd_play;
use lgame::game::Player;
use lgame::solver::SolveTable;

fn main() {
    let side = match std::env::args().nth(1).as_deref() {
        Some("b") | Some("B") => Player::B,
        _ => Player::A,
    };
    let table = SolveTable::solve_all();
    let stdin = std::io::stdin();
    let outcome = cmd_play(
        Agent::Perfect(&table),
        side,
        0,
        DEFAULT_TURN_CAP,
        &mut stdin.lock(),
        &mut std::io::stdout(),
    )
    .expect("terminal i/o");
    println!("{outcome:?}");
}
