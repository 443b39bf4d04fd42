//! Counts arrangements, solves every position and inspects a few values.
//!
//! `cargo run --release --example enumerate_and_solve`

use lgame::game::{enumerate_arrangements, start_position, Player};
use lgame::rng::derive_rng;
use lgame::solver::{Outcome, SolveTable};

fn main() {
    let counts = enumerate_arrangements();
    println!("arrangements: {} raw, {} canonical", counts.raw, counts.canonical);

    let table = SolveTable::solve_all();
    let st = table.stats();
    println!(
        "{} positions: {} won, {} lost, {} drawn for the side to move",
        st.positions, st.wins, st.losses, st.draws
    );
    println!("blocked arrangements up to symmetry and colour: {}", st.blocked_up_to_colour);

    let start = start_position();
    println!("start position:\n{start}");
    println!(
        "value: {} with A to move, {} with B to move",
        table.query(&start),
        table.query(&start.with_to_move(Player::B))
    );

    // the longest forced win in the game
    let (key, side, v) = table
        .entries()
        .filter(|(_, _, v)| v.outcome == Outcome::Win)
        .max_by_key(|(_, _, v)| v.distance)
        .unwrap();
    let mut s = key.to_state(side);
    println!("longest forced win ({v}), played out perfectly:");
    let mut rng = derive_rng(0, "example", 0);
    while !s.is_loss() {
        println!("{s}\n{:?} to move, {}\n", s.to_move(), table.query(&s));
        s = s.apply_turn(table.perfect_move(&s, &mut rng)).unwrap();
    }
    println!("{s}\n{:?} is blocked", s.to_move());
}
