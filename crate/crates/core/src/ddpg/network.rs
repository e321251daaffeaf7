use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Linear,
}

impl Activation {
    fn apply(self, x: &mut Array2<f64>) {
        if self == Activation::Tanh {
            x.mapv_inplace(tanh);
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }
}

/// `tanh` through `exp`, which is several times faster than `f64::tanh`
/// and agrees with it to within a few ulps.
fn tanh(x: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * x).exp() + 1.0)
}

/// Fully connected layer, `y = act(x W + b)` with `x` shaped
/// `(batch, inputs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    fn uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, bound: f64, activation: Activation, rng: &mut R) -> Self {
        Dense {
            weights: Array2::from_shape_simple_fn((inputs, outputs), || rng.gen_range(-bound..=bound)),
            bias: Array1::from_shape_simple_fn(outputs, || rng.gen_range(-bound..=bound)),
            activation,
        }
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.weights) + &self.bias;
        self.activation.apply(&mut y);
        y
    }
}

/// Per-layer parameter gradients, in the same layout as [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    /// Weights row-major, then bias, layer by layer.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[0]` is the input, `activations[l + 1]` the output of
    /// layer `l` before output scaling.
    activations: Vec<Array2<f64>>,
}

/// Multilayer perceptron with an optional constant output scale, used to map
/// a `tanh` output onto the acceleration range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
    output_scale: f64,
}

impl Mlp {
    /// Hidden layers draw from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`; the last
    /// layer draws from `U(-final_bound, final_bound)`.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        output_scale: f64,
        final_bound: f64,
        rng: &mut R,
    ) -> Self {
        assert!(sizes.len() >= 2, "need at least an input and an output size");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, pair)| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                if l == last {
                    Dense::uniform(fan_in, fan_out, final_bound, output, rng)
                } else {
                    Dense::uniform(fan_in, fan_out, 1.0 / (fan_in as f64).sqrt(), hidden, rng)
                }
            })
            .collect();
        Mlp { layers, output_scale }
    }

    pub fn from_layers(layers: Vec<Dense>, output_scale: f64) -> Self {
        assert!(!layers.is_empty());
        Mlp { layers, output_scale }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut h = self.layers[0].forward(x);
        for layer in &self.layers[1..] {
            h = layer.forward(&h);
        }
        h * self.output_scale
    }

    pub fn forward_cached(&self, x: &Array2<f64>) -> (Array2<f64>, ForwardCache) {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for layer in &self.layers {
            let next = layer.forward(activations.last().expect("input pushed"));
            activations.push(next);
        }
        let out = activations.last().expect("at least one layer") * self.output_scale;
        (out, ForwardCache { activations })
    }

    /// Backpropagates `d_output` (gradient of a scalar with respect to the
    /// scaled output) and returns parameter gradients together with the
    /// gradient with respect to the input.
    pub fn backward(&self, cache: &ForwardCache, d_output: &Array2<f64>) -> (Gradients, Array2<f64>) {
        let mut delta = d_output * self.output_scale;
        let mut layers = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let out = &cache.activations[l + 1];
            let act = layer.activation;
            delta.zip_mut_with(out, |d, &y| *d *= act.derivative_from_output(y));
            let input = &cache.activations[l];
            let dw = input.t().dot(&delta);
            let db = delta.sum_axis(Axis(0));
            let d_input = delta.dot(&layer.weights.t());
            layers.push((dw, db));
            delta = d_input;
        }
        layers.reverse();
        (Gradients { layers }, delta)
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count(), "parameter count mismatch");
        let mut it = params.iter().copied();
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = it.next().expect("length checked");
            }
        }
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    /// `self <- rate * online + (1 - rate) * self`, elementwise.
    pub fn soft_update(&mut self, online: &Mlp, rate: f64) {
        assert_eq!(self.param_count(), online.param_count(), "network shapes differ");
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            t.weights.zip_mut_with(&o.weights, |t, &o| *t = rate * o + (1.0 - rate) * *t);
            t.bias.zip_mut_with(&o.bias, |t, &o| *t = rate * o + (1.0 - rate) * *t);
        }
    }
}
