use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::math;
use crate::model::{check_width, Model};
use crate::params::{ParamSet, Persist};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig { hidden: vec![128, 64], epochs: 50, batch_size: 256, learning_rate: 1e-3, seed: 0 }
    }
}

/// Dense layer computing `W a + b`, with `W` stored outputs × inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Layer {
        Layer { weights: Matrix::zeros(outputs, inputs), bias: vec![0.0; outputs] }
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }
}

/// Feed-forward network: ReLU hidden layers, softmax output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    /// Mean training loss of each epoch.
    pub loss_history: Vec<f64>,
}

impl Mlp {
    /// He-uniform weights, zero biases.
    pub fn init(sizes: &[usize], seed: u64) -> Result<Mlp> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::param("layer sizes must be nonzero and include input and output"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let limit = math::sqrt(6.0 / w[0] as f64);
                let mut l = Layer::zeros(w[0], w[1]);
                l.weights.as_mut_slice().iter_mut().for_each(|v| *v = rng.gen_range(-limit..limit));
                l
            })
            .collect();
        Ok(Mlp { layers, loss_history: Vec::new() })
    }

    pub fn zeros(sizes: &[usize]) -> Mlp {
        Mlp { layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(), loss_history: Vec::new() }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs()];
        s.extend(self.layers.iter().map(Layer::outputs));
        s
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.loss_history.last().copied()
    }

    /// Activations of every layer for a batch; the last entry holds logits.
    fn forward(&self, x: &Matrix, rows: &[usize]) -> Vec<Matrix> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.select_rows(rows));
        for (k, layer) in self.layers.iter().enumerate() {
            let a = &acts[k];
            let hidden = k + 1 < self.layers.len();
            let mut z = Matrix::zeros(a.rows(), layer.outputs());
            for i in 0..a.rows() {
                let ar = a.row(i);
                for (o, zo) in z.row_mut(i).iter_mut().enumerate() {
                    let v = layer.bias[o] + dot(layer.weights.row(o), ar);
                    *zo = if hidden && v < 0.0 { 0.0 } else { v };
                }
            }
            acts.push(z);
        }
        acts
    }

    /// Mean cross-entropy over `rows` and its gradient for every layer.
    pub fn loss_and_gradient(&self, x: &Matrix, y: &[usize], rows: &[usize]) -> (f64, Vec<Layer>) {
        let acts = self.forward(x, rows);
        let n = rows.len() as f64;
        let mut delta = acts.last().unwrap().clone();
        let mut loss = 0.0;
        for (i, &r) in rows.iter().enumerate() {
            let d = delta.row_mut(i);
            let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + math::ln(d.iter().map(|z| math::exp(z - max)).sum::<f64>());
            loss += lse - d[y[r]];
            for v in d.iter_mut() {
                *v = math::exp(*v - lse) / n;
            }
            d[y[r]] -= 1.0 / n;
        }
        let mut grads: Vec<Layer> = self.layers.iter().map(|l| Layer::zeros(l.inputs(), l.outputs())).collect();
        for k in (0..self.layers.len()).rev() {
            let a = &acts[k];
            let layer = &self.layers[k];
            let g = &mut grads[k];
            let mut prev = if k > 0 { Some(Matrix::zeros(a.rows(), layer.inputs())) } else { None };
            for i in 0..a.rows() {
                let ar = a.row(i);
                for (o, &dv) in delta.row(i).iter().enumerate() {
                    if dv == 0.0 {
                        continue;
                    }
                    g.bias[o] += dv;
                    for (gw, &av) in g.weights.row_mut(o).iter_mut().zip(ar) {
                        *gw += dv * av;
                    }
                    if let Some(p) = prev.as_mut() {
                        for (pv, &w) in p.row_mut(i).iter_mut().zip(layer.weights.row(o)) {
                            *pv += dv * w;
                        }
                    }
                }
            }
            if let Some(mut p) = prev {
                // ReLU derivative: zero where the activation was clamped.
                for (pv, &av) in p.as_mut_slice().iter_mut().zip(a.as_slice()) {
                    if av <= 0.0 {
                        *pv = 0.0;
                    }
                }
                delta = p;
            }
        }
        (loss / n, grads)
    }

    /// Every parameter in a fixed order: per layer, weights then bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_parameters(&mut self, values: &[f64]) {
        let mut at = 0;
        for l in &mut self.layers {
            let w = l.weights.as_mut_slice();
            w.copy_from_slice(&values[at..at + w.len()]);
            at += w.len();
            let b = l.bias.len();
            l.bias.copy_from_slice(&values[at..at + b]);
            at += b;
        }
    }
}

/// Adam state for a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(n: usize, learning_rate: f64) -> Adam {
        Adam { learning_rate, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(Self::BETA1, self.t as f64);
        let c2 = 1.0 - libm::pow(Self::BETA2, self.t as f64);
        for ((p, &g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= self.learning_rate * (*m / c1) / (math::sqrt(*v / c2) + Self::EPS);
        }
    }
}

fn flatten(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(l.weights.as_slice());
        out.extend_from_slice(&l.bias);
    }
    out
}

/// Mini-batch Adam on mean softmax cross-entropy.
pub fn fit_mlp(x: &Matrix, y: &[usize], n_classes: usize, cfg: &MlpConfig) -> Result<Mlp> {
    if y.len() != x.rows() {
        return Err(Error::Dimension { expected: x.rows(), got: y.len() });
    }
    if x.rows() == 0 {
        return Err(Error::data("no training rows"));
    }
    if let Some(&l) = y.iter().find(|&&l| l >= n_classes) {
        return Err(Error::data(format!("label {l} out of range")));
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::param("epochs and batch size must be at least 1"));
    }
    if !(cfg.learning_rate >= 0.0) {
        return Err(Error::param("learning rate must be nonnegative"));
    }
    let mut sizes = vec![x.cols()];
    sizes.extend_from_slice(&cfg.hidden);
    sizes.push(n_classes);
    let mut net = Mlp::init(&sizes, cfg.seed)?;
    let mut params = net.parameters();
    let mut adam = Adam::new(params.len(), cfg.learning_rate);
    // Separate stream for batch order so it does not depend on network size.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f0b_a7c4);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (loss, grads) = net.loss_and_gradient(x, y, batch);
            if !loss.is_finite() {
                return Err(Error::numeric(format!("non-finite loss at epoch {epoch}, batch {b}")));
            }
            total += loss * batch.len() as f64;
            adam.step(&mut params, &flatten(&grads));
            net.set_parameters(&params);
        }
        net.loss_history.push(total / x.rows() as f64);
    }
    Ok(net)
}

pub fn predict_mlp(m: &Mlp, x: &Matrix) -> Result<Matrix> {
    m.predict_proba(x)
}

impl Model for Mlp {
    fn n_classes(&self) -> usize {
        self.layers.last().map_or(0, Layer::outputs)
    }

    fn n_features(&self) -> usize {
        self.layers.first().map_or(0, Layer::inputs)
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        check_width(x, self.n_features())?;
        let rows: Vec<usize> = (0..x.rows()).collect();
        let mut out = self.forward(x, &rows).pop().unwrap();
        for i in 0..out.rows() {
            math::softmax_in_place(out.row_mut(i));
        }
        Ok(out)
    }
}

impl Persist for Mlp {
    const KIND: &'static str = "mlp";

    fn to_params(&self) -> ParamSet {
        let mut p = ParamSet::new();
        p.push_scalar("n_layers", self.layers.len() as f64);
        for (i, l) in self.layers.iter().enumerate() {
            p.push_matrix(&format!("layer{i}.weights"), &l.weights);
            p.push_vec(&format!("layer{i}.bias"), &l.bias);
        }
        p.push_vec("loss_history", &self.loss_history);
        p
    }

    fn from_params(p: &ParamSet) -> Result<Self> {
        let n = p.count("n_layers")?;
        let mut layers = Vec::with_capacity(n);
        for i in 0..n {
            let weights = p.matrix(&format!("layer{i}.weights"))?;
            let bias = p.vector(&format!("layer{i}.bias"))?;
            if bias.len() != weights.rows() {
                return Err(Error::Dimension { expected: weights.rows(), got: bias.len() });
            }
            if let Some(prev) = layers.last().map(Layer::outputs) {
                if prev != weights.cols() {
                    return Err(Error::Dimension { expected: prev, got: weights.cols() });
                }
            }
            layers.push(Layer { weights, bias });
        }
        if layers.is_empty() {
            return Err(Error::data("network has no layers"));
        }
        Ok(Mlp { layers, loss_history: p.vector("loss_history")? })
    }
}
