use std::sync::OnceLock;

use lgame::game::{start_position, ActionCode, GameState, LegalMask, NeutralAction, Player};
use lgame::neural::{Algorithm, Hyperparameters, Network, OptimizerState};
use lgame::rng::derive_rng;
use lgame::solver::{Outcome, SolveTable};
use lgame::trainer::{
    compute_targets, greedy_neutral, play_self_game, run_training, schedules, select_turn,
    train_step_fixed32, train_step_variable, BatchMode, GameOutcome, GameRecord, ReplayMemory,
    Trainer, TrainerConfig, Transition, UpdateMode, BLOCKED_VALUE, CURVE_FILE,
};

fn table() -> &'static SolveTable {
    static T: OnceLock<SolveTable> = OnceLock::new();
    T.get_or_init(SolveTable::solve_all)
}

/// A drawn game of `len` turns whose inputs carry `tag` in cell 0.
fn synthetic_game(len: usize, tag: f32) -> GameRecord {
    let transitions = (0..len)
        .map(|i| {
            let mut input = [0.0; 16];
            input[0] = tag;
            input[1] = i as f32;
            Transition {
                input,
                action: ActionCode::new(i % 48).unwrap(),
                reward: 0.0,
                next_input: input,
                next_mask: LegalMask(1),
                terminal: i + 1 == len,
            }
        })
        .collect();
    GameRecord {
        transitions,
        outcome: GameOutcome::Draw,
    }
}

fn small_net(seed: u64) -> Network {
    Network::with_dims(&[16, 16, 16, 128], seed)
}

#[test]
fn game_sampling_is_uniform() {
    let k = 20;
    let mut mem = ReplayMemory::new(k);
    for g in 0..k {
        mem.push(synthetic_game(1 + g * 3, g as f32)).unwrap();
    }
    let draws = 100_000;
    let mut counts = vec![0u64; k];
    let mut rng = derive_rng(1, "chi", 0);
    for _ in 0..draws {
        counts[mem.sample_game(&mut rng).unwrap().0 as usize] += 1;
    }
    let e = draws as f64 / k as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    // 99th percentile of chi-square with 19 degrees of freedom
    assert!(chi2 < 36.19, "chi-square {chi2}");
}

#[test]
fn ring_keeps_the_newest_games() {
    let mut mem = ReplayMemory::new(3);
    for g in 0..4 {
        mem.push(synthetic_game(2, g as f32)).unwrap();
    }
    let tags: Vec<f32> = mem.iter().map(|(_, g)| g.transitions[0].input[0]).collect();
    assert_eq!(tags, vec![1.0, 2.0, 3.0]);
    let mut big = ReplayMemory::new(10_000);
    for g in 0..10_007 {
        big.push(synthetic_game(1, g as f32)).unwrap();
    }
    assert_eq!(big.evicted(), 7);
    assert_eq!(big.len(), 10_000);
}

#[test]
fn transition_sampling_weights_games_by_length() {
    let mut mem = ReplayMemory::new(10);
    mem.push(synthetic_game(10, 0.0)).unwrap();
    mem.push(synthetic_game(30, 1.0)).unwrap();
    let mut rng = derive_rng(2, "fixed", 0);
    let mut long = 0usize;
    let batches = 100_000 / 32 + 1;
    for _ in 0..batches {
        let batch = mem.sample_transitions(32, &mut rng);
        assert_eq!(batch.len(), 32);
        long += batch.iter().filter(|t| t.input[0] == 1.0).count();
    }
    let share = long as f64 / (batches * 32) as f64;
    assert!((share - 0.75).abs() <= 0.01, "{share}");
}

#[test]
fn fixed_batch_needs_32_transitions_and_uses_exactly_32() {
    let mut net = small_net(1);
    let mut opt = OptimizerState::with_defaults(Algorithm::SgdNesterov, &net);
    let mut mem = ReplayMemory::new(10);
    mem.push(synthetic_game(31, 0.0)).unwrap();
    let mut rng = derive_rng(3, "f", 0);
    let before = net.clone();
    assert_eq!(train_step_fixed32(&mut net, &mut opt, &mem, 0.9, 0.01, &mut rng, None).unwrap(), None);
    assert_eq!(net, before);

    let mut mem = ReplayMemory::new(10);
    mem.push(synthetic_game(32, 0.0)).unwrap();
    let mut r1 = derive_rng(4, "f", 0);
    let loss = train_step_fixed32(&mut net, &mut opt, &mem, 0.9, 0.01, &mut r1, None)
        .unwrap()
        .unwrap();
    let mut r2 = derive_rng(4, "f", 0);
    let picks = mem.sample_transitions(32, &mut r2);
    assert_eq!(picks.len(), 32);
    let want = before.loss(&compute_targets(&before, &picks, 0.9)).unwrap();
    assert_eq!(loss, want);
}

#[test]
fn variable_step_fits_each_sampled_game_as_one_batch() {
    let net0 = small_net(5);
    let mut rng = derive_rng(6, "selfplay", 0);
    let game = play_self_game(&net0, 0.5, &mut rng, 60);
    let len = game.len();
    let mut mem = ReplayMemory::new(10);
    mem.push(game.clone()).unwrap();

    let hyper = Hyperparameters {
        momentum: 0.0,
        ..Hyperparameters::defaults(Algorithm::SgdNesterov)
    };
    let mut net = net0.clone();
    let mut opt = OptimizerState::new(Algorithm::SgdNesterov, hyper, &net);
    let mut step_rng = derive_rng(7, "replay", 0);
    let lr = 0.05;
    let up = train_step_variable(&mut net, &mut opt, &mem, 1, 0.9, lr, &mut step_rng, None, UpdateMode::PerGame)
        .unwrap();
    assert_eq!(up.games, vec![0]);

    // oracle: targets and gradient of the whole game from separate passes
    let refs: Vec<&Transition> = game.transitions.iter().collect();
    let batch = compute_targets(&net0, &refs, 0.9);
    assert_eq!(batch.len(), len);
    let (grads, loss) = net0.backward(&batch).unwrap();
    assert!((up.losses[0] - loss).abs() <= 1e-6 * (1.0 + loss.abs()));
    for ((p, p0), g) in net.params().zip(net0.params()).zip(grads.params()) {
        let want = p0 - lr as f32 * g;
        assert!((p - want).abs() <= 1e-6 * (1.0 + want.abs()));
    }

    let mut opt = OptimizerState::with_defaults(Algorithm::SgdNesterov, &net);
    let up = train_step_variable(&mut net, &mut opt, &mem, 10, 0.9, lr, &mut step_rng, None, UpdateMode::PerGame)
        .unwrap();
    assert_eq!(up.losses.len(), 10);
    let empty = ReplayMemory::new(4);
    let before = net.clone();
    let up = train_step_variable(&mut net, &mut opt, &empty, 10, 0.9, lr, &mut step_rng, None, UpdateMode::PerGame)
        .unwrap();
    assert!(up.losses.is_empty());
    assert_eq!(net, before);
}

#[test]
fn zero_replay_trains_only_on_the_newest_game() {
    let cfg = TrainerConfig {
        total_games: 30,
        replay_sample: 0,
        validate_every: 30,
        validate_games: 10,
        validate_perfect_games: 0,
        ..TrainerConfig::default()
    };
    let mut t = Trainer::new(cfg).unwrap();
    while !t.is_done() {
        let r = t.play_episode().unwrap();
        assert_eq!(r.update.games, vec![t.memory().total_pushed() - 1]);
        assert_eq!(r.update.losses.len(), 1);
    }
}

#[test]
fn explore_everything_at_epsilon_one() {
    let net = small_net(8);
    let s = start_position();
    let legal = s.legal_l_placements();
    let draws = 100_000;
    let mut counts = vec![0u64; 128];
    let mut no_move = 0u64;
    let mut rng = derive_rng(9, "eps", 0);
    for _ in 0..draws {
        let t = select_turn(&net, &s, 1.0, &mut rng);
        counts[t.placement.index()] += 1;
        no_move += (t.neutral == NeutralAction::NoMove) as u64;
    }
    let p = 1.0 / legal.len() as f64;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    for code in &legal {
        let c = counts[code.index()] as f64;
        assert!((c - draws as f64 * p).abs() <= 5.0 * sigma, "code {}", code.index());
    }
    assert_eq!(counts.iter().sum::<u64>(), draws);
    let q = 1.0 / 13.0;
    let sigma = (draws as f64 * q * (1.0 - q)).sqrt();
    assert!((no_move as f64 - draws as f64 * q).abs() <= 5.0 * sigma);
}

/// Placement and the options whose neutral move blocks the opponent.
fn blocking_setups() -> Vec<(GameState, ActionCode)> {
    let mut out = Vec::new();
    for (key, side, v) in table().entries() {
        if v.outcome != Outcome::Win || v.distance != Some(1) {
            continue;
        }
        let s = key.to_state(side);
        for p in s.legal_l_placements() {
            let mid = s.place_l(p).unwrap();
            let blocks = mid.legal_neutral_actions().into_iter().any(|a| {
                mid.apply_neutral(a).unwrap().with_to_move(side.opponent()).is_loss()
            });
            if blocks {
                out.push((s, p));
                break;
            }
        }
        if out.len() >= 60 {
            break;
        }
    }
    out
}

#[test]
fn greedy_neutral_takes_the_block_when_it_is_the_minimum() {
    let setups = blocking_setups();
    assert!(!setups.is_empty());
    let mut zeroed = small_net(10);
    let last = zeroed.layers.last_mut().unwrap();
    last.weights.iter_mut().for_each(|w| *w = 0.0);
    last.biases.iter_mut().for_each(|b| *b = 0.0);
    let random = Network::new(11);
    for net in [&zeroed, &random] {
        for (s, p) in &setups {
            let opp = s.to_move().opponent();
            let mid = s.place_l(*p).unwrap();
            let mut best_open = f32::INFINITY;
            for a in mid.legal_neutral_actions() {
                let next = mid.apply_neutral(a).unwrap().with_to_move(opp);
                if !next.is_loss() {
                    let q = net.evaluate(&[next.encode_for_network()]);
                    best_open = best_open.min(next.legal_action_mask().masked_max(&q, BLOCKED_VALUE));
                }
            }
            let chosen = greedy_neutral(net, s, *p);
            let blocked = mid.apply_neutral(chosen).unwrap().with_to_move(opp).is_loss();
            if best_open > BLOCKED_VALUE {
                assert!(blocked, "{s}");
            }
        }
    }
}

#[test]
fn self_play_rewards_are_sparse() {
    let net = small_net(12);
    let mut decisive = 0;
    for g in 0..40 {
        let mut rng = derive_rng(13, "selfplay", g);
        let rec = play_self_game(&net, 0.2, &mut rng, 100);
        assert!(rec.len() <= 100);
        rec.validate().unwrap();
        let ts = &rec.transitions;
        match rec.outcome {
            GameOutcome::Draw => assert_eq!(rec.nonzero_rewards(), 0),
            GameOutcome::Won(p) => {
                decisive += 1;
                assert_eq!(ts.last().unwrap().reward, 1.0);
                if ts.len() >= 2 {
                    assert_eq!(ts[ts.len() - 2].reward, -1.0);
                }
                assert!(rec.nonzero_rewards() <= 2);
                // A moves on even turns
                let winner = if ts.len() % 2 == 1 { Player::A } else { Player::B };
                assert_eq!(p, winner);
            }
        }
        assert!(ts[..ts.len().saturating_sub(2)].iter().all(|t| t.reward == 0.0));
    }
    assert!(decisive > 0);
}

#[test]
fn two_turn_game_converges_to_negamax_antisymmetry() {
    // first mover's turn leads to a position where the only legal reply wins
    let a0 = ActionCode::new(3).unwrap();
    let a1 = ActionCode::new(20).unwrap();
    let mut x0 = [0.0; 16];
    x0[0] = 1.0;
    let mut x1 = [0.0; 16];
    x1[5] = -1.0;
    let game = GameRecord {
        transitions: vec![
            Transition {
                input: x0,
                action: a0,
                reward: 0.0,
                next_input: x1,
                next_mask: LegalMask(1 << a1.index()),
                terminal: false,
            },
            Transition {
                input: x1,
                action: a1,
                reward: 1.0,
                next_input: [0.0; 16],
                next_mask: LegalMask(0),
                terminal: true,
            },
        ],
        outcome: GameOutcome::Won(Player::B),
    };
    let mut mem = ReplayMemory::new(1);
    mem.push(game).unwrap();
    let mut net = small_net(14);
    let mut opt = OptimizerState::with_defaults(Algorithm::SgdNesterov, &net);
    let mut rng = derive_rng(15, "fix", 0);
    for _ in 0..400 {
        train_step_variable(&mut net, &mut opt, &mem, 1, 1.0, 0.01, &mut rng, None, UpdateMode::PerGame)
            .unwrap();
    }
    let q0 = net.evaluate(&[x0])[a0.index()];
    let q1 = net.evaluate(&[x1])[a1.index()];
    assert!((q0 + q1).abs() <= 0.05, "q0 {q0} q1 {q1}");
    assert!((q1 - 1.0).abs() <= 0.05);
}

#[test]
fn schedule_midpoint() {
    let cfg = TrainerConfig {
        total_games: 1000,
        ..TrainerConfig::default()
    };
    assert!((schedules(500, &cfg).0 - 0.03).abs() < 1e-12);
}

#[test]
fn runs_are_reproducible_and_validate_on_cadence() {
    let cfg = TrainerConfig {
        total_games: 60,
        validate_every: 20,
        validate_games: 40,
        validate_perfect_games: 10,
        keep_checkpoints: 2,
        seed: 21,
        ..TrainerConfig::default()
    };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let runs: Vec<_> = dirs
        .iter()
        .map(|d| run_training(&cfg, Some(table()), Some(d.path())).unwrap())
        .collect();
    assert_eq!(runs[0].curve.len(), 3);
    assert_eq!(runs[0].network, runs[1].network);
    let listing = |d: &tempfile::TempDir| {
        let mut names: Vec<String> = std::fs::read_dir(d.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        names
    };
    let names = listing(&dirs[0]);
    assert_eq!(names, listing(&dirs[1]));
    assert_eq!(names.iter().filter(|n| n.starts_with("checkpoint-")).count(), 2);
    assert!(names.contains(&CURVE_FILE.to_string()));
    for n in &names {
        let a = std::fs::read(dirs[0].path().join(n)).unwrap();
        let b = std::fs::read(dirs[1].path().join(n)).unwrap();
        assert_eq!(a, b, "{n}");
    }
    let curve = std::fs::read_to_string(dirs[0].path().join(CURVE_FILE)).unwrap();
    assert_eq!(curve.lines().count(), 4);
}

#[test]
fn fixed_batch_mode_trains() {
    let cfg = TrainerConfig {
        total_games: 20,
        batch_mode: BatchMode::Fixed32,
        validate_every: 20,
        validate_games: 10,
        validate_perfect_games: 0,
        ..TrainerConfig::default()
    };
    let run = run_training(&cfg, None, None).unwrap();
    assert_eq!(run.curve.len(), 1);
    assert!(run.curve[0].mean_loss.is_finite());
}
