//! Acting with a Q-network, self-play, and bootstrapped regression targets.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::game::{start_position, ActionCode, GameState, NeutralAction, Turn};
use crate::neural::{Network, TrainingTarget};

use super::replay::{GameOutcome, GameRecord, Transition};

/// Value of a successor with no legal placement, from its mover's side.
pub const BLOCKED_VALUE: f32 = -1.0;

/// ε-greedy turn for the side to move.
///
/// Greedy placement is the masked argmax of the network output (lowest code
/// on ties). The greedy neutral action is the one leaving the opponent the
/// smallest best masked Q, a blocked opponent counting [`BLOCKED_VALUE`]
/// (lowest neutral code on ties).
///
/// # Panics
/// If the side to move is already blocked.
pub fn select_turn<R: Rng + ?Sized>(
    net: &Network,
    state: &GameState,
    epsilon: f64,
    rng: &mut R,
) -> Turn {
    let mask = state.legal_action_mask();
    assert!(!mask.is_empty(), "select_turn on a lost position");
    if rng.gen::<f64>() < epsilon {
        let codes: Vec<usize> = mask.iter().collect();
        let placement = ActionCode::new(*codes.choose(rng).unwrap()).unwrap();
        let mid = state.place_l(placement).expect("legal placement");
        let neutral = *mid.legal_neutral_actions().choose(rng).unwrap();
        return Turn { placement, neutral };
    }
    let q = net.evaluate(&[state.encode_for_network()]);
    let placement = ActionCode::new(mask.masked_argmax(&q).unwrap()).unwrap();
    let neutral = greedy_neutral(net, state, placement);
    Turn { placement, neutral }
}

/// The neutral action minimizing the opponent's best reply value after
/// `placement`.
pub fn greedy_neutral(net: &Network, state: &GameState, placement: ActionCode) -> NeutralAction {
    let mid = state.place_l(placement).expect("legal placement");
    let options = mid.legal_neutral_actions();
    let opponent = state.to_move().opponent();
    let nexts: Vec<GameState> = options
        .iter()
        .map(|&a| mid.apply_neutral(a).unwrap().with_to_move(opponent))
        .collect();
    let inputs: Vec<_> = nexts.iter().map(|s| s.encode_for_network()).collect();
    let q = net.evaluate(&inputs);
    let width = net.output_size();
    let mut best = (options[0], f32::INFINITY);
    for (i, (next, &action)) in nexts.iter().zip(&options).enumerate() {
        let v = next
            .legal_action_mask()
            .masked_max(&q[i * width..(i + 1) * width], BLOCKED_VALUE);
        if v < best.1 {
            best = (action, v);
        }
    }
    best.0
}

/// Plays one game of the network against itself from the start position.
///
/// The game stops when a side is blocked or after `turn_cap` turns (a draw).
/// The winning turn gets +1 and the loser's preceding turn -1, both
/// terminal; a capped game's last turn is terminal with reward 0.
pub fn play_self_game<R: Rng + ?Sized>(
    net: &Network,
    epsilon: f64,
    rng: &mut R,
    turn_cap: usize,
) -> GameRecord {
    assert!(turn_cap > 0, "turn cap must be positive");
    let mut state = start_position();
    let mut transitions: Vec<Transition> = Vec::new();
    loop {
        let turn = select_turn(net, &state, epsilon, rng);
        let next = state.apply_turn(turn).expect("selected turn is legal");
        let next_mask = next.legal_action_mask();
        let won = next_mask.is_empty();
        transitions.push(Transition {
            input: state.encode_for_network(),
            action: turn.placement,
            reward: if won { 1.0 } else { 0.0 },
            next_input: next.encode_for_network(),
            next_mask,
            terminal: won,
        });
        if won {
            let n = transitions.len();
            if n >= 2 {
                let loser = &mut transitions[n - 2];
                loser.reward = -1.0;
                loser.terminal = true;
            }
            return GameRecord {
                transitions,
                outcome: GameOutcome::Won(state.to_move()),
            };
        }
        if transitions.len() == turn_cap {
            transitions.last_mut().unwrap().terminal = true;
            return GameRecord {
                transitions,
                outcome: GameOutcome::Draw,
            };
        }
        state = next;
    }
}

/// `y = r` for terminal turns, else `y = r - gamma * max_legal Q(next)`.
pub fn target_value(t: &Transition, next_q: Option<&[f32]>, gamma: f32) -> f32 {
    if t.terminal {
        return t.reward;
    }
    let q = next_q.expect("non-terminal transition needs successor values");
    t.reward - gamma * t.next_mask.masked_max(q, BLOCKED_VALUE)
}

/// Regression targets for every turn of `transitions`, bootstrapped from
/// `net`.
pub fn compute_targets(
    net: &Network,
    transitions: &[&Transition],
    gamma: f32,
) -> Vec<TrainingTarget> {
    let live: Vec<_> = transitions
        .iter()
        .filter(|t| !t.terminal)
        .map(|t| t.next_input)
        .collect();
    let q = if live.is_empty() {
        Vec::new()
    } else {
        net.evaluate(&live)
    };
    let width = net.output_size();
    let mut row = 0;
    transitions
        .iter()
        .map(|t| {
            let next_q = (!t.terminal).then(|| {
                row += 1;
                &q[(row - 1) * width..row * width]
            });
            TrainingTarget {
                input: t.input,
                action: t.action,
                target: target_value(t, next_q, gamma),
            }
        })
        .collect()
}

/// Targets for a whole game from the outputs already computed on its own
/// inputs: each non-terminal turn's successor is the next turn's input.
/// `None` when the record does not chain that way.
pub fn chained_targets(
    record: &GameRecord,
    outputs: &[f32],
    width: usize,
    gamma: f32,
) -> Option<Vec<(ActionCode, f32)>> {
    let ts = &record.transitions;
    let mut out = Vec::with_capacity(ts.len());
    for (i, t) in ts.iter().enumerate() {
        let next_q = if t.terminal {
            None
        } else {
            let follower = ts.get(i + 1)?;
            if follower.input != t.next_input {
                return None;
            }
            Some(&outputs[(i + 1) * width..(i + 2) * width])
        };
        out.push((t.action, target_value(t, next_q, gamma)));
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::LegalMask;
    use crate::rng::derive_rng;

    fn small_net(seed: u64) -> Network {
        Network::with_dims(&[16, 8, 8, 128], seed)
    }

    #[test]
    fn self_play_record_is_well_formed() {
        let net = small_net(1);
        for g in 0..20 {
            let mut rng = derive_rng(3, "selfplay", g);
            let rec = play_self_game(&net, 0.3, &mut rng, 100);
            assert!(rec.len() <= 100);
            rec.validate().unwrap();
            let nz = rec.nonzero_rewards();
            match rec.outcome {
                GameOutcome::Draw => assert_eq!(nz, 0),
                GameOutcome::Won(_) => assert!(nz <= 2 && nz >= 1),
            }
        }
    }

    #[test]
    fn zero_output_layer_picks_lowest_code() {
        let mut net = small_net(2);
        let last = net.layers.last_mut().unwrap();
        last.weights.iter_mut().for_each(|w| *w = 0.0);
        last.biases.iter_mut().for_each(|b| *b = 0.0);
        let s = start_position();
        let lowest = s.legal_action_mask().iter().next().unwrap();
        let mut rng = derive_rng(0, "t", 0);
        let turn = select_turn(&net, &s, 0.0, &mut rng);
        assert_eq!(turn.placement.index(), lowest);
        // every option ties at 0, so the lowest neutral code wins
        assert_eq!(turn.neutral, NeutralAction::NoMove);
    }

    #[test]
    fn terminal_and_zero_gamma_targets() {
        let t = Transition {
            input: [0.0; 16],
            action: ActionCode::new(3).unwrap(),
            reward: 1.0,
            next_input: [0.0; 16],
            next_mask: LegalMask(0),
            terminal: true,
        };
        assert_eq!(target_value(&t, None, 0.9), 1.0);
        let live = Transition {
            reward: 0.0,
            terminal: false,
            next_mask: LegalMask(0b110),
            ..t
        };
        let q = vec![5.0; 128];
        assert_eq!(target_value(&live, Some(&q), 0.0), 0.0);
        assert_eq!(target_value(&live, Some(&q), 0.5), -2.5);
    }

    #[test]
    fn chained_targets_match_separate_forward() {
        let net = small_net(4);
        let mut rng = derive_rng(9, "selfplay", 0);
        let rec = play_self_game(&net, 0.5, &mut rng, 40);
        let inputs: Vec<_> = rec.transitions.iter().map(|t| t.input).collect();
        let out = net.evaluate(&inputs);
        let fused = chained_targets(&rec, &out, 128, 0.9).unwrap();
        let refs: Vec<&Transition> = rec.transitions.iter().collect();
        let separate = compute_targets(&net, &refs, 0.9);
        for (a, b) in fused.iter().zip(&separate) {
            assert_eq!(a.0, b.action);
            assert!((a.1 - b.target).abs() <= 1e-6 * (1.0 + b.target.abs()));
        }
    }
}
