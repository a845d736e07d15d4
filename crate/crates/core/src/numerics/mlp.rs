use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output.
    fn slope(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
}

impl Layer {
    pub const fn new(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            input,
            output,
            activation,
        }
    }

    fn n_params(&self) -> usize {
        self.output * (self.input + 1)
    }
}

/// Dense feed-forward network over a flat parameter vector.
///
/// Each layer stores its weight matrix row-major as `output x input`,
/// followed by its bias. Inputs are batches with one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

/// Layer activations kept by [`Mlp::forward`] for the backward pass.
/// `acts[0]` is the input and `acts[l + 1]` the output of layer `l`.
#[derive(Debug, Clone)]
pub struct MlpCache {
    pub acts: Vec<Array2<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("cache holds the input at least")
    }
}

impl Mlp {
    /// Network with all parameters zero.
    pub fn zeros(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("Mlp layer list"));
        }
        for w in layers.windows(2) {
            if w[0].output != w[1].input {
                return Err(Error::shape("Mlp layer chain", w[0].output, w[1].input));
            }
        }
        if layers.iter().any(|l| l.input == 0 || l.output == 0) {
            return Err(Error::invalid("layers", "zero-width layer"));
        }
        let mut offsets = Vec::with_capacity(layers.len());
        let mut n = 0;
        for l in &layers {
            offsets.push(n);
            n += l.n_params();
        }
        Ok(Self {
            layers,
            offsets,
            params: vec![0.0; n],
        })
    }

    /// Uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init<R: Rng + ?Sized>(layers: Vec<Layer>, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(layers)?;
        for (l, &off) in net.layers.iter().zip(&net.offsets) {
            let bound = (6.0 / (l.input + l.output) as f64).sqrt();
            for w in &mut net.params[off..off + l.input * l.output] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.params.len() {
            return Err(Error::shape("Mlp::set_params", self.params.len(), p.len()));
        }
        self.params.copy_from_slice(p);
        Ok(())
    }

    fn weight_in<'a>(&self, p: &'a [f64], l: usize) -> (ArrayView2<'a, f64>, ArrayView1<'a, f64>) {
        let layer = &self.layers[l];
        let off = self.offsets[l];
        let nw = layer.input * layer.output;
        let w = ArrayView2::from_shape((layer.output, layer.input), &p[off..off + nw]).expect("layout");
        let b = ArrayView1::from(&p[off + nw..off + nw + layer.output]);
        (w, b)
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<MlpCache> {
        if x.ncols() != self.input_dim() {
            return Err(Error::shape("Mlp::forward input", self.input_dim(), x.ncols()));
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for (l, layer) in self.layers.iter().enumerate() {
            let (w, b) = self.weight_in(&self.params, l);
            let mut z = acts[l].dot(&w.t());
            z += &b;
            z.mapv_inplace(|v| layer.activation.apply(v));
            acts.push(z);
        }
        Ok(MlpCache { acts })
    }

    /// Convenience forward pass returning only the output.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(x)?.acts.pop().expect("non-empty"))
    }

    /// Reverse pass. `dout` is the gradient of a scalar loss with respect to
    /// the output rows; returns the input gradient and the parameter
    /// gradient summed over the batch.
    pub fn backward(&self, cache: &MlpCache, dout: ArrayView2<f64>) -> Result<(Array2<f64>, Vec<f64>)> {
        let mut grads = vec![0.0; self.params.len()];
        let dx = self.backward_into(cache, dout, &mut grads)?;
        Ok((dx, grads))
    }

    /// As [`backward`](Self::backward) but accumulates into `grads`.
    pub fn backward_into(&self, cache: &MlpCache, dout: ArrayView2<f64>, grads: &mut [f64]) -> Result<Array2<f64>> {
        let out = cache.output();
        if dout.dim() != out.dim() {
            return Err(Error::shape(
                "Mlp::backward output gradient",
                format!("{:?}", out.dim()),
                format!("{:?}", dout.dim()),
            ));
        }
        if grads.len() != self.params.len() {
            return Err(Error::shape("Mlp::backward gradient buffer", self.params.len(), grads.len()));
        }
        let mut delta = dout.to_owned();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let y = &cache.acts[l + 1];
            let x = &cache.acts[l];
            if layer.activation != Activation::Identity {
                ndarray::Zip::from(&mut delta)
                    .and(y)
                    .for_each(|d, &yv| *d *= layer.activation.slope(yv));
            }
            let off = self.offsets[l];
            let nw = layer.input * layer.output;
            let dw = delta.t().dot(x);
            for (g, v) in grads[off..off + nw].iter_mut().zip(dw.iter()) {
                *g += v;
            }
            for (g, v) in grads[off + nw..off + nw + layer.output].iter_mut().zip(delta.sum_axis(Axis(0)).iter()) {
                *g += v;
            }
            let (w, _) = self.weight_in(&self.params, l);
            delta = delta.dot(&w);
        }
        Ok(delta)
    }

    /// Forward-mode derivative of the output along parameter direction
    /// `dparams` and optional input direction `dinput`, at the point cached
    /// by a forward pass.
    pub fn jvp(&self, cache: &MlpCache, dparams: &[f64], dinput: Option<ArrayView2<f64>>) -> Result<Array2<f64>> {
        if dparams.len() != self.params.len() {
            return Err(Error::shape("Mlp::jvp direction", self.params.len(), dparams.len()));
        }
        let n = cache.acts[0].nrows();
        let mut dx = match dinput {
            Some(d) => {
                if d.dim() != cache.acts[0].dim() {
                    return Err(Error::shape("Mlp::jvp input direction", self.input_dim(), d.ncols()));
                }
                d.to_owned()
            }
            None => Array2::zeros((n, self.input_dim())),
        };
        for (l, layer) in self.layers.iter().enumerate() {
            let (w, _) = self.weight_in(&self.params, l);
            let (dw, db) = self.weight_in(dparams, l);
            let mut dz = dx.dot(&w.t());
            dz += &cache.acts[l].dot(&dw.t());
            dz += &db;
            let y = &cache.acts[l + 1];
            if layer.activation != Activation::Identity {
                ndarray::Zip::from(&mut dz)
                    .and(y)
                    .for_each(|d, &yv| *d *= layer.activation.slope(yv));
            }
            dx = dz;
        }
        Ok(dx)
    }

    /// Weight matrix of layer `l` (`output x input`) and its bias.
    pub fn layer_params(&self, l: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        self.weight_in(&self.params, l)
    }

    /// Row slice helper for single-sample inference.
    pub fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let xv = ArrayView2::from_shape((1, x.len()), x).expect("row");
        let out = self.predict(xv)?;
        Ok(out.slice(s![0, ..]).to_vec())
    }
}
