//! Backpropagation against central differences on a small network.
//!
//! `cargo run --release --example gradient_check`

use lgame::game::ActionCode;
use lgame::neural::{Network, TrainingTarget};
use lgame::rng::derive_rng;
use rand::Rng;

fn main() {
    let mut rng = derive_rng(0, "example", 0);
    let net = Network::<f64>::with_dims(&[16, 8, 8, 128], 1);
    let batch: Vec<TrainingTarget> = (0..4)
        .map(|_| {
            let mut input = [0.0f32; 16];
            input.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
            TrainingTarget {
                input,
                action: ActionCode::new(rng.gen_range(0..128)).unwrap(),
                target: rng.gen_range(-1.0..1.0),
            }
        })
        .collect();
    let (grads, loss) = net.backward(&batch).unwrap();
    println!("loss {loss:.6}");
    let h = 1e-6;
    for (layer, l) in grads.layers.iter().enumerate() {
        let offset: usize = net.layers[..layer]
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum();
        let mut worst: f64 = 0.0;
        for i in 0..l.weights.len() + l.biases.len() {
            let a = *grads.params().nth(offset + i).unwrap();
            let mut p = net.clone();
            *p.params_mut().nth(offset + i).unwrap() += h;
            let mut m = net.clone();
            *m.params_mut().nth(offset + i).unwrap() -= h;
            let fd = (p.loss(&batch).unwrap() - m.loss(&batch).unwrap()) / (2.0 * h);
            worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-7));
        }
        println!("layer {layer}: max relative error {worst:.2e}");
    }
}
