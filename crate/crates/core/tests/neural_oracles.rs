use lgame::game::ActionCode;
use lgame::neural::{Algorithm, Hyperparameters, Network, OptimizerState, TrainingTarget};
use lgame::rng::derive_rng;
use rand::Rng;

/// Naive triple-loop forward pass in f64.
fn naive_forward(net: &Network<f64>, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    let last = net.layers.len() - 1;
    for (li, l) in net.layers.iter().enumerate() {
        let mut out = vec![0.0; l.rows];
        for r in 0..l.rows {
            let mut acc = l.biases[r];
            for c in 0..l.cols {
                acc += l.weights[r * l.cols + c] * h[c];
            }
            out[r] = if li == last { acc } else { acc.max(0.0) };
        }
        h = out;
    }
    h
}

fn random_input<R: Rng>(rng: &mut R) -> [f32; 16] {
    let mut x = [0.0; 16];
    x.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    x
}

fn random_batch<R: Rng>(rng: &mut R, n: usize) -> Vec<TrainingTarget> {
    (0..n)
        .map(|_| TrainingTarget {
            input: random_input(rng),
            action: ActionCode::new(rng.gen_range(0..128)).unwrap(),
            target: rng.gen_range(-1.0..1.0),
        })
        .collect()
}

#[test]
fn forward_matches_naive_oracle() {
    let net64 = Network::<f64>::new(3);
    let net32: Network<f32> = net64.cast();
    let mut rng = derive_rng(1, "forward", 0);
    let mut worst32: f64 = 0.0;
    for _ in 0..100 {
        let x = random_input(&mut rng);
        let x64: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let want = naive_forward(&net64, &x64);
        let scale = want.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
        let got = net64.forward(&x64).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() / scale <= 1e-6);
        }
        // the f32 path rounds every product, so it is held to single precision
        let want32 = naive_forward(&net32.cast(), &x64);
        let got32 = net32.evaluate(&[x]);
        for (a, b) in got32.iter().zip(&want32) {
            worst32 = worst32.max((*a as f64 - b).abs() / scale);
        }
    }
    assert!(worst32 <= 1e-5, "f32 relative error {worst32}");
}

/// ReLU on/off pattern of every hidden unit over the batch.
fn relu_pattern(net: &Network<f64>, batch: &[TrainingTarget]) -> Vec<bool> {
    let x: Vec<f64> = batch.iter().flat_map(|t| t.input.map(f64::from)).collect();
    let mut out = Vec::new();
    for k in 1..net.layers.len() {
        let prefix = Network {
            layers: net.layers[..k].to_vec(),
        };
        out.extend(prefix.forward_batch(&x).unwrap().iter().map(|&z| z > 0.0));
    }
    out
}

#[test]
fn gradients_match_central_differences() {
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    let (mut checked, mut skipped) = (0usize, 0usize);
    for b in 0..20u64 {
        let mut rng = derive_rng(7, "fd", b);
        let mut net = Network::<f64>::with_dims(&[16, 8, 8, 128], 100 + b);
        // nonzero biases keep dead samples off the kink at exactly 0
        for l in &mut net.layers {
            l.biases.iter_mut().for_each(|v| *v = rng.gen_range(-0.1..0.1));
        }
        let n = rng.gen_range(1..9);
        let batch = random_batch(&mut rng, n);
        let (grads, _) = net.backward(&batch).unwrap();
        let base = relu_pattern(&net, &batch);
        let analytic: Vec<f64> = grads.params().copied().collect();
        for (i, &a) in analytic.iter().enumerate() {
            let mut plus = net.clone();
            *plus.params_mut().nth(i).unwrap() += h;
            let mut minus = net.clone();
            *minus.params_mut().nth(i).unwrap() -= h;
            // a stencil straddling a ReLU kink measures no derivative
            if relu_pattern(&plus, &batch) != base || relu_pattern(&minus, &batch) != base {
                skipped += 1;
                continue;
            }
            let fd = (plus.loss(&batch).unwrap() - minus.loss(&batch).unwrap()) / (2.0 * h);
            checked += 1;
            let denom = a.abs().max(fd.abs()).max(1e-7);
            worst = worst.max((a - fd).abs() / denom);
        }
    }
    assert!(skipped * 100 < checked, "{skipped} kink crossings in {checked}");
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn changing_one_target_acts_only_through_its_action() {
    let net = Network::<f64>::with_dims(&[16, 8, 8, 128], 9);
    let mut rng = derive_rng(2, "mask", 0);
    let batch = random_batch(&mut rng, 6);
    let i = 3;
    let mut moved = batch.clone();
    moved[i].target += 0.5;
    let (g1, _) = net.backward(&batch).unwrap();
    let (g2, _) = net.backward(&moved).unwrap();
    // the same change on a one-sample batch, scaled by 1/n
    let (s1, _) = net.backward(&batch[i..=i]).unwrap();
    let (s2, _) = net.backward(&moved[i..=i]).unwrap();
    let n = batch.len() as f64;
    for (((a1, a2), b1), b2) in g1.params().zip(g2.params()).zip(s1.params()).zip(s2.params()) {
        let want = (b2 - b1) / n;
        assert!(((a2 - a1) - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }
    let out = g1.layers.last().unwrap();
    let out2 = g2.layers.last().unwrap();
    let a = batch[i].action.index();
    for r in 0..out.rows {
        if r == a {
            continue;
        }
        assert_eq!(out.biases[r], out2.biases[r]);
        let row = r * out.cols..(r + 1) * out.cols;
        assert_eq!(out.weights[row.clone()], out2.weights[row]);
    }
}

#[test]
fn argmax_ignores_a_constant_output_shift() {
    let mut net = Network::<f32>::new(4);
    let mut rng = derive_rng(3, "shift", 0);
    let xs: Vec<[f32; 16]> = (0..20).map(|_| random_input(&mut rng)).collect();
    let argmax = |q: &[f32]| {
        q.iter()
            .enumerate()
            .fold((0, f32::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
            .0
    };
    let before: Vec<usize> = xs.iter().map(|x| argmax(&net.evaluate(&[*x]))).collect();
    net.layers.last_mut().unwrap().biases.iter_mut().for_each(|b| *b += 0.25);
    let after: Vec<usize> = xs.iter().map(|x| argmax(&net.evaluate(&[*x]))).collect();
    assert_eq!(before, after);
}

#[test]
fn initial_outputs_are_centred() {
    let net = Network::<f32>::new(5);
    let mut rng = derive_rng(4, "centre", 0);
    let xs: Vec<[f32; 16]> = (0..100).map(|_| random_input(&mut rng)).collect();
    let out = net.evaluate(&xs);
    let mean = out.iter().map(|&v| v as f64).sum::<f64>() / out.len() as f64;
    assert!(mean.abs() <= 0.1, "{mean}");
}

/// Scalar reference for one optimizer on f(w) = w^2 from w = 1.
fn scalar_trajectory(alg: Algorithm, h: Hyperparameters, steps: usize) -> Vec<f64> {
    let (mut w, mut a, mut b) = (1.0f64, 0.0f64, 0.0f64);
    let mut out = vec![w * w];
    for _ in 0..steps {
        let g = 2.0 * w;
        match alg {
            Algorithm::SgdNesterov => {
                a = h.momentum * a - h.learning_rate * g;
                w += h.momentum * a - h.learning_rate * g;
            }
            Algorithm::RmsProp => {
                a = h.rho * a + (1.0 - h.rho) * g * g;
                w -= h.learning_rate * g / (a.sqrt() + h.epsilon);
            }
            Algorithm::AdaDelta => {
                a = h.rho * a + (1.0 - h.rho) * g * g;
                let dx = -((b + h.epsilon).sqrt() / (a + h.epsilon).sqrt()) * g;
                b = h.rho * b + (1.0 - h.rho) * dx * dx;
                w += h.learning_rate * dx;
            }
        }
        out.push(w * w);
    }
    out
}

fn network_trajectory(alg: Algorithm, steps: usize) -> Vec<f64> {
    let mut net = Network::<f64>::zeros(&[2, 3]);
    net.params_mut().for_each(|p| *p = 1.0);
    let count = net.num_params() as f64;
    let mut opt = OptimizerState::with_defaults(alg, &net);
    let mut out = vec![net.params().map(|p| p * p).sum::<f64>() / count];
    for _ in 0..steps {
        let mut g = net.clone();
        g.params_mut().for_each(|p| *p *= 2.0);
        opt.step(&mut net, &g).unwrap();
        out.push(net.params().map(|p| p * p).sum::<f64>() / count);
    }
    out
}

#[test]
fn optimizers_follow_the_scalar_reference_on_a_quadratic() {
    for alg in Algorithm::ALL {
        let want = scalar_trajectory(alg, Hyperparameters::defaults(alg), 100);
        let got = network_trajectory(alg, 100);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-12, "{alg}");
        }
        assert!(want[100] < want[0], "{alg} did not reduce f");
    }
}

#[test]
fn adaptive_optimizers_decrease_monotonically_after_step_five() {
    for alg in [Algorithm::RmsProp, Algorithm::AdaDelta] {
        let f = network_trajectory(alg, 100);
        assert!(f[5..].windows(2).all(|w| w[1] < w[0]), "{alg}");
    }
}

#[test]
fn nesterov_defaults_oscillate_on_the_quadratic() {
    // lr 0.01 and momentum 0.9 on f = w^2 give the linear map
    // (w, v) -> (0.962 w + 0.81 v, -0.02 w + 0.9 v), whose eigenvalues are
    // complex with modulus sqrt(0.882): w spirals through zero
    let f = network_trajectory(Algorithm::SgdNesterov, 100);
    assert!(f[5..].windows(2).any(|w| w[1] > w[0]));
    assert!(f[100] < 1e-4 * f[0]);
}

#[test]
fn training_is_deterministic() {
    let run = || {
        let mut net = Network::<f32>::with_dims(&[16, 32, 32, 128], 11);
        let mut opt = OptimizerState::with_defaults(Algorithm::SgdNesterov, &net);
        let mut rng = derive_rng(8, "det", 0);
        for _ in 0..25 {
            let batch = random_batch(&mut rng, 12);
            let (g, _) = net.backward(&batch).unwrap();
            opt.step(&mut net, &g).unwrap();
        }
        net
    };
    assert_eq!(run(), run());
}
