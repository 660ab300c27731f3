use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Output activation. Hidden layers always use ReLU.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "scale", rename_all = "snake_case")]
pub enum Head {
    Linear,
    /// `scale * sigmoid(z)`, output in (0, scale).
    SigmoidScaled(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Act {
    Relu,
    Head(Head),
}

impl Act {
    fn apply(self, z: f64) -> f64 {
        match self {
            Act::Relu => z.max(0.0),
            Act::Head(Head::Linear) => z,
            Act::Head(Head::SigmoidScaled(s)) => s * sigmoid(z),
        }
    }

    fn d1(self, z: f64) -> f64 {
        match self {
            Act::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Act::Head(Head::Linear) => 1.0,
            Act::Head(Head::SigmoidScaled(s)) => {
                let y = sigmoid(z);
                s * y * (1.0 - y)
            }
        }
    }

    fn d2(self, z: f64) -> f64 {
        match self {
            Act::Relu | Act::Head(Head::Linear) => 0.0,
            Act::Head(Head::SigmoidScaled(s)) => {
                let y = sigmoid(z);
                s * y * (1.0 - y) * (1.0 - 2.0 * y)
            }
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `out x in`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Weights and biases of one dense network.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    pub sizes: Vec<usize>,
    pub head: Head,
    pub layers: Vec<Layer>,
}

/// Activations retained by [`ParamSet::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input to each layer; `inputs[0]` is the network input.
    pub inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pub pre: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

/// Directional derivatives (R-operator) of a forward pass.
#[derive(Clone, Debug)]
pub struct RCache {
    pub r_inputs: Vec<Array2<f64>>,
    pub r_pre: Vec<Array2<f64>>,
    pub r_output: Array2<f64>,
}

/// Gradients and their directional derivatives from [`ParamSet::backward_r`].
pub struct RBackward {
    pub grad: ParamSet,
    pub r_grad: ParamSet,
    pub input_grad: Array2<f64>,
    pub r_input_grad: Array2<f64>,
}

impl ParamSet {
    /// Glorot-uniform weights, zero biases.
    pub fn init(sizes: &[usize], head: Head, seed: u64) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s >= 1), "bad layer sizes {sizes:?}");
        let mut r = rng::stream(seed, rng::tag::INIT);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weight = Array2::from_shape_simple_fn((fan_out, fan_in), || r.random_range(-limit..limit));
                Layer {
                    weight,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        ParamSet {
            sizes: sizes.to_vec(),
            head,
            layers,
        }
    }

    pub fn zeros(sizes: &[usize], head: Head) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| Layer {
                weight: Array2::zeros((w[1], w[0])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        ParamSet {
            sizes: sizes.to_vec(),
            head,
            layers,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.sizes, self.head)
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn same_shape(&self, other: &ParamSet) -> bool {
        self.sizes == other.sizes
    }

    fn check_shape(&self, other: &ParamSet) {
        assert!(
            self.same_shape(other),
            "parameter shape mismatch: {:?} vs {:?}",
            self.sizes,
            other.sizes
        );
    }

    fn act(&self, layer: usize) -> Act {
        if layer + 1 == self.layers.len() {
            Act::Head(self.head)
        } else {
            Act::Relu
        }
    }

    /// Weights then bias of each layer, row-major.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    /// Same shape as `self`, values from `flat`.
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "flat vector of {} values for {} parameters",
                flat.len(),
                self.num_params()
            )));
        }
        let mut p = self.clone();
        let mut it = flat.iter().copied();
        for l in &mut p.layers {
            for w in l.weight.iter_mut() {
                *w = it.next().unwrap();
            }
            for b in l.bias.iter_mut() {
                *b = it.next().unwrap();
            }
        }
        Ok(p)
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> + '_ {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(l.bias.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &ParamSet) {
        self.check_shape(x);
        for (l, lx) in self.layers.iter_mut().zip(&x.layers) {
            l.weight.scaled_add(a, &lx.weight);
            l.bias.scaled_add(a, &lx.bias);
        }
    }

    pub fn scale(&mut self, a: f64) {
        for v in self.values_mut() {
            *v *= a;
        }
    }

    pub fn dot(&self, other: &ParamSet) -> f64 {
        self.check_shape(other);
        self.values().zip(other.values()).map(|(a, b)| a * b).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    /// Order-sensitive digest of the exact bit patterns.
    pub fn checksum(&self) -> u64 {
        self.values().fold(0xcbf2_9ce4_8422_2325u64, |h, v| {
            (h ^ v.to_bits()).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }

    /// Batched forward pass; rows of `x` are samples.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> ForwardCache {
        assert_eq!(
            x.ncols(),
            self.input_size(),
            "input width {} for network input {}",
            x.ncols(),
            self.input_size()
        );
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            let z = a.dot(&l.weight.t()) + &l.bias;
            let act = self.act(i);
            let next = z.mapv(|v| act.apply(v));
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        ForwardCache {
            inputs,
            pre,
            output: a,
        }
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.forward(x).output
    }

    pub fn predict_one(&self, x: &[f64]) -> Vec<f64> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        self.forward(view).output.into_raw_vec_and_offset().0
    }

    /// Reverse-mode gradients for a scalar loss whose gradient with respect
    /// to the network output is `output_grad`.
    pub fn backward(&self, cache: &ForwardCache, output_grad: ArrayView2<'_, f64>) -> (ParamSet, Array2<f64>) {
        let mut grad = self.zeros_like();
        let mut delta = output_grad.to_owned();
        for i in (0..self.layers.len()).rev() {
            let act = self.act(i);
            let dz = &delta * &cache.pre[i].mapv(|v| act.d1(v));
            grad.layers[i].weight = dz.t().dot(&cache.inputs[i]);
            grad.layers[i].bias = dz.sum_axis(Axis(0));
            delta = dz.dot(&self.layers[i].weight);
        }
        (grad, delta)
    }

    /// Forward-mode directional derivative along input direction `x_dir`
    /// and parameter direction `v`.
    pub fn forward_r(&self, cache: &ForwardCache, x_dir: Option<ArrayView2<'_, f64>>, v: Option<&ParamSet>) -> RCache {
        let rows = cache.inputs[0].nrows();
        let mut ra = match x_dir {
            Some(d) => d.to_owned(),
            None => Array2::zeros((rows, self.input_size())),
        };
        let mut r_inputs = Vec::with_capacity(self.layers.len());
        let mut r_pre = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let mut rz = ra.dot(&l.weight.t());
            if let Some(v) = v {
                rz = rz + cache.inputs[i].dot(&v.layers[i].weight.t()) + &v.layers[i].bias;
            }
            let act = self.act(i);
            let next = &rz * &cache.pre[i].mapv(|z| act.d1(z));
            r_inputs.push(ra);
            r_pre.push(rz);
            ra = next;
        }
        RCache {
            r_inputs,
            r_pre,
            r_output: ra,
        }
    }

    /// Backward pass together with its directional derivative, given the
    /// output gradient and its own directional derivative.
    pub fn backward_r(
        &self,
        cache: &ForwardCache,
        rcache: &RCache,
        output_grad: ArrayView2<'_, f64>,
        r_output_grad: ArrayView2<'_, f64>,
        v: Option<&ParamSet>,
    ) -> RBackward {
        let mut grad = self.zeros_like();
        let mut r_grad = self.zeros_like();
        let mut delta = output_grad.to_owned();
        let mut r_delta = r_output_grad.to_owned();
        for i in (0..self.layers.len()).rev() {
            let act = self.act(i);
            let d1 = cache.pre[i].mapv(|z| act.d1(z));
            let d2 = cache.pre[i].mapv(|z| act.d2(z));
            let dz = &delta * &d1;
            let r_dz = &r_delta * &d1 + &(&delta * &d2 * &rcache.r_pre[i]);
            grad.layers[i].weight = dz.t().dot(&cache.inputs[i]);
            grad.layers[i].bias = dz.sum_axis(Axis(0));
            r_grad.layers[i].weight = r_dz.t().dot(&cache.inputs[i]) + dz.t().dot(&rcache.r_inputs[i]);
            r_grad.layers[i].bias = r_dz.sum_axis(Axis(0));
            let mut next_r = r_dz.dot(&self.layers[i].weight);
            if let Some(v) = v {
                next_r = next_r + dz.dot(&v.layers[i].weight);
            }
            delta = dz.dot(&self.layers[i].weight);
            r_delta = next_r;
        }
        RBackward {
            grad,
            r_grad,
            input_grad: delta,
            r_input_grad: r_delta,
        }
    }
}

/// `target <- tau * main + (1 - tau) * target`.
pub fn blend(target: &mut ParamSet, main: &ParamSet, tau: f64) {
    target.check_shape(main);
    for (t, m) in target.values_mut().zip(main.values()) {
        *t = tau * m + (1.0 - tau) * *t;
    }
}

/// `p <- p - sign * lr * grad`.
pub fn sgd_step(p: &mut ParamSet, grad: &ParamSet, lr: f64, sign: f64) {
    p.axpy(-sign * lr, grad);
}
