//! Head-to-head matches between the baseline agents and an untrained network.
//!
//! `cargo run --release --example arena_match [games]`

use lgame::arena::{play_match, Agent, MatchResult, DEFAULT_TURN_CAP};
use lgame::neural::Network;
use lgame::solver::SolveTable;

fn show(label: &str, m: &MatchResult) {
    let r = m.first_rates();
    println!(
        "{label:<28} win {:.3}  draw {:.3}  loss {:.3}  mean length {:.1}",
        r.win,
        r.draw,
        r.loss,
        m.mean_length()
    );
}

fn main() {
    let games: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("games must be a number"))
        .unwrap_or(2000);
    let table = SolveTable::solve_all();
    let untrained = Network::new(7);
    let perfect = Agent::Perfect(&table);
    let dqn = Agent::Dqn {
        net: &untrained,
        epsilon: 0.01,
    };
    let cap = DEFAULT_TURN_CAP;
    show("random vs random", &play_match(Agent::Random, Agent::Random, games, cap, 1));
    show("perfect vs random", &play_match(perfect, Agent::Random, games, cap, 2));
    show("perfect vs perfect", &play_match(perfect, perfect, games.min(1000), cap, 3));
    show("untrained dqn vs random", &play_match(dqn, Agent::Random, games, cap, 4));
    show("untrained dqn vs perfect", &play_match(dqn, perfect, games.min(1000), cap, 5));
}
