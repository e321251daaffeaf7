use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::network::{Gradients, Mlp};

/// Adam optimizer state for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<(Array2<f64>, Array1<f64>)>,
    second: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Adam {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        let zeros: Vec<_> = net
            .layers()
            .iter()
            .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.raw_dim())))
            .collect();
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Descends along `grads`.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let lr = self.learning_rate * (1.0 - b2.powi(t)).sqrt() / (1.0 - b1.powi(t));
        let eps = self.epsilon;
        let layers = net.layers_mut();
        for (l, (dw, db)) in grads.layers.iter().enumerate() {
            let (mw, mb) = &mut self.first[l];
            let (vw, vb) = &mut self.second[l];
            update(&mut layers[l].weights, mw, vw, dw, b1, b2, lr, eps);
            update(&mut layers[l].bias, mb, vb, db, b1, b2, lr, eps);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn update<D: ndarray::Dimension>(
    param: &mut ndarray::Array<f64, D>,
    m: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    g: &ndarray::Array<f64, D>,
    b1: f64,
    b2: f64,
    lr: f64,
    eps: f64,
) {
    ndarray::Zip::from(param).and(m).and(v).and(g).for_each(|p, m, v, &g| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= lr * *m / (v.sqrt() + eps);
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddpg::network::{Activation, Dense};
    use ndarray::array;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut net = Mlp::from_layers(
            vec![Dense {
                weights: array![[1.0], [2.0]],
                bias: array![0.5],
                activation: Activation::Linear,
            }],
            1.0,
        );
        let mut opt = Adam::new(&net, 0.01);
        let grads = Gradients {
            layers: vec![(array![[3.0], [-0.2]], array![0.0])],
        };
        opt.step(&mut net, &grads);
        let p = net.flat_params();
        // Bias-corrected first step has magnitude lr for any nonzero gradient.
        assert!((p[0] - 0.99).abs() < 1e-6);
        assert!((p[1] - 2.01).abs() < 1e-6);
        assert_eq!(p[2], 0.5);
        assert_eq!(opt.steps(), 1);
    }
}
