//! Gradient-descent update rules: Nesterov momentum, RMSProp and ADADELTA.

use std::fmt;
use std::str::FromStr;

use super::{Gradients, Network, NeuralError, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    SgdNesterov,
    RmsProp,
    AdaDelta,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::SgdNesterov,
        Algorithm::RmsProp,
        Algorithm::AdaDelta,
    ];

    /// Checkpoint tag byte.
    pub fn tag(self) -> u8 {
        match self {
            Algorithm::SgdNesterov => 1,
            Algorithm::RmsProp => 2,
            Algorithm::AdaDelta => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Algorithm::ALL.into_iter().find(|a| a.tag() == tag)
    }

    /// Number of parameter-shaped auxiliary buffers.
    pub fn buffer_count(self) -> usize {
        match self {
            Algorithm::SgdNesterov | Algorithm::RmsProp => 1,
            Algorithm::AdaDelta => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SgdNesterov => "sgd",
            Algorithm::RmsProp => "rmsprop",
            Algorithm::AdaDelta => "adadelta",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgd" | "sgd_nesterov" | "nesterov" => Ok(Algorithm::SgdNesterov),
            "rmsprop" => Ok(Algorithm::RmsProp),
            "adadelta" => Ok(Algorithm::AdaDelta),
            other => Err(format!(
                "unknown optimizer `{other}` (sgd|rmsprop|adadelta)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperparameters {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Decay of the running averages (RMSProp, ADADELTA).
    pub rho: f64,
    pub epsilon: f64,
}

impl Hyperparameters {
    pub fn defaults(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::SgdNesterov => Hyperparameters {
                learning_rate: 0.01,
                momentum: 0.9,
                rho: 0.0,
                epsilon: 0.0,
            },
            Algorithm::RmsProp => Hyperparameters {
                learning_rate: 0.001,
                momentum: 0.0,
                rho: 0.95,
                epsilon: 1e-6,
            },
            Algorithm::AdaDelta => Hyperparameters {
                learning_rate: 1.0,
                momentum: 0.0,
                rho: 0.95,
                epsilon: 1e-6,
            },
        }
    }
}

/// Zero for subnormal values.
#[inline(always)]
fn flush<T: Scalar>(x: T) -> T {
    if x.abs() < T::min_positive_value() {
        T::zero()
    } else {
        x
    }
}

/// Update rule plus its per-parameter buffers.
///
/// Buffers: Nesterov keeps a velocity; RMSProp a running mean of squared
/// gradients; ADADELTA running means of squared gradients and squared updates.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T = f32> {
    pub algorithm: Algorithm,
    pub hyper: Hyperparameters,
    pub buffers: Vec<Network<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(algorithm: Algorithm, hyper: Hyperparameters, net: &Network<T>) -> Self {
        let dims = net.dims();
        OptimizerState {
            algorithm,
            hyper,
            buffers: (0..algorithm.buffer_count())
                .map(|_| Network::zeros(&dims))
                .collect(),
        }
    }

    pub fn with_defaults(algorithm: Algorithm, net: &Network<T>) -> Self {
        OptimizerState::new(algorithm, Hyperparameters::defaults(algorithm), net)
    }

    /// Applies one update at the configured learning rate.
    pub fn step(&mut self, net: &mut Network<T>, grads: &Gradients<T>) -> Result<(), NeuralError> {
        let lr = self.hyper.learning_rate;
        self.step_with_lr(net, grads, lr)
    }

    /// Applies one update with an explicit (scheduled) learning rate. A
    /// non-finite gradient leaves both the network and the buffers untouched.
    pub fn step_with_lr(
        &mut self,
        net: &mut Network<T>,
        grads: &Gradients<T>,
        lr: f64,
    ) -> Result<(), NeuralError> {
        assert!(net.same_shape(grads), "gradient shape differs from network");
        if !grads.all_finite() {
            return Err(NeuralError::NonFiniteGradient);
        }
        let lr = T::from_f64(lr);
        let one = T::one();
        let h = self.hyper;
        let rho = T::from_f64(h.rho);
        let eps = T::from_f64(h.epsilon);
        let gs = grads.param_slices();
        let mut ps = net.param_slices_mut();
        match self.algorithm {
            Algorithm::SgdNesterov => {
                let mu = T::from_f64(h.momentum);
                let vs = self.buffers[0].param_slices_mut();
                for ((p, g), v) in ps.iter_mut().zip(&gs).zip(vs) {
                    for ((p, &g), v) in p.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
                        // v' = mu v - lr g ; p += mu v' - lr g
                        let nv = flush(mu * *v - lr * g);
                        *v = nv;
                        *p = *p + mu * nv - lr * g;
                    }
                }
            }
            Algorithm::RmsProp => {
                let ss = self.buffers[0].param_slices_mut();
                for ((p, g), s) in ps.iter_mut().zip(&gs).zip(ss) {
                    for ((p, &g), s) in p.iter_mut().zip(g.iter()).zip(s.iter_mut()) {
                        *s = flush(rho * *s + (one - rho) * g * g);
                        *p = *p - lr * g / (s.sqrt() + eps);
                    }
                }
            }
            Algorithm::AdaDelta => {
                let (sq_g, sq_dx) = self.buffers.split_at_mut(1);
                let egs = sq_g[0].param_slices_mut();
                let edxs = sq_dx[0].param_slices_mut();
                for (((p, g), eg), edx) in ps.iter_mut().zip(&gs).zip(egs).zip(edxs) {
                    let it = p.iter_mut().zip(g.iter()).zip(eg.iter_mut()).zip(edx.iter_mut());
                    for (((p, &g), eg), edx) in it {
                        *eg = flush(rho * *eg + (one - rho) * g * g);
                        let dx = -((*edx + eps).sqrt() / (*eg + eps).sqrt()) * g;
                        *edx = flush(rho * *edx + (one - rho) * dx * dx);
                        *p = *p + lr * dx;
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Network<f64> {
        Network::with_dims(&[2, 3, 2], 1)
    }

    #[test]
    fn zero_gradient_zero_velocity_is_fixed_point() {
        for alg in Algorithm::ALL {
            let mut net = tiny();
            let before = net.clone();
            let mut opt = OptimizerState::with_defaults(alg, &net);
            let zeros = Network::zeros(&net.dims());
            opt.step(&mut net, &zeros).unwrap();
            assert_eq!(net, before, "{alg}");
        }
    }

    #[test]
    fn nesterov_without_momentum_is_plain_descent() {
        let mut net = tiny();
        let before = net.clone();
        let mut grads = Network::zeros(&net.dims());
        for (i, g) in grads.params_mut().enumerate() {
            *g = i as f64 * 0.1 - 0.5;
        }
        let hyper = Hyperparameters {
            momentum: 0.0,
            ..Hyperparameters::defaults(Algorithm::SgdNesterov)
        };
        let mut opt = OptimizerState::new(Algorithm::SgdNesterov, hyper, &net);
        opt.step(&mut net, &grads).unwrap();
        for ((p, p0), g) in net.params().zip(before.params()).zip(grads.params()) {
            assert!((p - (p0 - 0.01 * g)).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_gradient_rejected_without_side_effects() {
        let mut net = tiny();
        let mut grads = Network::zeros(&net.dims());
        for g in grads.params_mut() {
            *g = 1.0;
        }
        let mut opt = OptimizerState::with_defaults(Algorithm::AdaDelta, &net);
        opt.step(&mut net, &grads).unwrap();
        let (net_before, opt_before) = (net.clone(), opt.clone());
        grads.layers[0].weights[0] = f64::INFINITY;
        assert!(matches!(
            opt.step(&mut net, &grads),
            Err(NeuralError::NonFiniteGradient)
        ));
        assert_eq!(net, net_before);
        assert_eq!(opt, opt_before);
    }

    #[test]
    fn averages_stay_non_negative() {
        let mut net = tiny();
        for alg in [Algorithm::RmsProp, Algorithm::AdaDelta] {
            let mut opt = OptimizerState::with_defaults(alg, &net);
            for k in 0..20 {
                let mut g = Network::zeros(&net.dims());
                for (i, v) in g.params_mut().enumerate() {
                    *v = ((i + k) as f64).sin();
                }
                opt.step(&mut net, &g).unwrap();
            }
            assert!(opt.buffers.iter().all(|b| b.params().all(|&v| v >= 0.0)));
        }
    }

    #[test]
    fn names_parse() {
        for alg in Algorithm::ALL {
            assert_eq!(alg.name().parse::<Algorithm>().unwrap(), alg);
            assert_eq!(Algorithm::from_tag(alg.tag()), Some(alg));
        }
        assert!("adam".parse::<Algorithm>().is_err());
    }
}
