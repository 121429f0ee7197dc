//! Fully connected ReLU network, its two training losses, backpropagation,
//! Adam, and the minibatch training loop.
//!
//! Layer `i` maps `x -> relu(W_i x + b_i)`; the last layer is affine.
//! Batches are evaluated as row matrices, so the per-layer product is
//! `X W_i^T`.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::TrainingSet;
use crate::sampler::RngStream;

pub const DEFAULT_HIDDEN_LAYERS: usize = 7;
pub const DEFAULT_WIDTH: usize = 110;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// `[d, width, ..., width, 1]` with `hidden` hidden layers.
pub fn layer_dims(d: usize, hidden: usize, width: usize) -> Vec<usize> {
    let mut dims = vec![d];
    dims.extend(std::iter::repeat_n(width, hidden));
    dims.push(1);
    dims
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    #[default]
    Mse,
    /// MSE plus the penalty `(R(x) - R(-x))^2`, both halved.
    Radial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    /// `W_i` has shape `dims[i + 1] x dims[i]`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Same layout as the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradient {
    fn zeros_like(m: &Mlp) -> Self {
        Self {
            weights: m.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: m.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().flatten().chain(self.biases.iter().flatten())
    }
}

impl Mlp {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Domain(format!("invalid layer dimensions {dims:?}")));
        }
        if dims[dims.len() - 1] != 1 {
            return Err(Error::Domain("the output layer must have width 1".into()));
        }
        Ok(Self {
            dims: dims.to_vec(),
            weights: dims.windows(2).map(|w| Array2::zeros((w[1], w[0]))).collect(),
            biases: dims[1..].iter().map(|&k| Array1::zeros(k)).collect(),
        })
    }

    /// Weights uniform on `±sqrt(6 / fan_in)`, zero biases.
    pub fn init(dims: &[usize], rng: &mut RngStream) -> Result<Self> {
        let mut m = Self::zeros(dims)?;
        for w in &mut m.weights {
            let bound = (6.0 / w.ncols() as f64).sqrt();
            w.iter_mut().for_each(|x| *x = bound * (2.0 * rng.uniform() - 1.0));
        }
        Ok(m)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn param_count(&self) -> usize {
        self.dims.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::Domain(format!(
                "input has {cols} coordinates, network expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Pre-activations of every layer for a batch of row inputs.
    fn forward(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut zs: Vec<Array2<f64>> = Vec::with_capacity(self.weights.len());
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = match i {
                0 => x.dot(&w.t()),
                _ => zs[i - 1].mapv(relu).dot(&w.t()),
            } + b;
            zs.push(z);
        }
        zs
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check_input(x.ncols())?;
        let out = self.forward(x).pop().expect("at least one layer");
        Ok(out.column(0).to_owned())
    }

    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let d = self.input_dim();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            self.check_input(bad.len())?;
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let x = Array2::from_shape_vec((rows.len(), d), flat).expect("row lengths checked");
        Ok(self.predict(x.view())?.to_vec())
    }

    pub fn realize(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x.len())?;
        let x = ArrayView2::from_shape((1, x.len()), x).expect("one row");
        Ok(self.predict(x)?[0])
    }

    pub fn loss(&self, x: ArrayView2<f64>, targets: &Array1<f64>, loss: Loss) -> Result<f64> {
        check_batch(&x, targets)?;
        let l = targets.len() as f64;
        let y = self.predict(x)?;
        let fit = (&y - targets).mapv(|e| e * e).sum();
        match loss {
            Loss::Mse => Ok(fit / l),
            Loss::Radial => {
                let y_neg = self.predict((-&x).view())?;
                let odd = (&y - &y_neg).mapv(|e| e * e).sum();
                Ok((fit + odd) / (2.0 * l))
            }
        }
    }

    pub fn loss_mse(&self, x: ArrayView2<f64>, targets: &Array1<f64>) -> Result<f64> {
        self.loss(x, targets, Loss::Mse)
    }

    pub fn loss_radial(&self, x: ArrayView2<f64>, targets: &Array1<f64>) -> Result<f64> {
        self.loss(x, targets, Loss::Radial)
    }

    /// Loss and its exact gradient (ReLU derivative 0 at the kink).
    pub fn gradient(&self, x: ArrayView2<f64>, targets: &Array1<f64>, loss: Loss) -> Result<(f64, Gradient)> {
        check_batch(&x, targets)?;
        self.check_input(x.ncols())?;
        let n = targets.len();
        let l = n as f64;
        match loss {
            Loss::Mse => {
                let zs = self.forward(x);
                let y = zs[zs.len() - 1].column(0);
                let err = &y - targets;
                let value = err.mapv(|e| e * e).sum() / l;
                let dy = err.mapv(|e| 2.0 * e / l);
                Ok((value, self.backward(x, &zs, dy)))
            }
            Loss::Radial => {
                let mut both = Array2::zeros((2 * n, x.ncols()));
                both.slice_mut(s![..n, ..]).assign(&x);
                both.slice_mut(s![n.., ..]).assign(&(-&x));
                let zs = self.forward(both.view());
                let y = zs[zs.len() - 1].column(0);
                let (pos, neg) = (y.slice(s![..n]), y.slice(s![n..]));
                let err = &pos - targets;
                let odd = &pos - &neg;
                let value = (err.mapv(|e| e * e).sum() + odd.mapv(|e| e * e).sum()) / (2.0 * l);
                let mut dy = Array1::zeros(2 * n);
                dy.slice_mut(s![..n]).assign(&((&err + &odd) / l));
                dy.slice_mut(s![n..]).assign(&(-&odd / l));
                Ok((value, self.backward(both.view(), &zs, dy)))
            }
        }
    }

    fn backward(&self, x: ArrayView2<f64>, zs: &[Array2<f64>], dy: Array1<f64>) -> Gradient {
        let mut g = Gradient::zeros_like(self);
        let last = self.weights.len() - 1;
        let mut delta = dy.insert_axis(Axis(1));
        for i in (0..=last).rev() {
            let input = match i {
                0 => x.to_owned(),
                _ => zs[i - 1].mapv(relu),
            };
            g.weights[i] = delta.t().dot(&input);
            g.biases[i] = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut next = delta.dot(&self.weights[i]);
                next.zip_mut_with(&zs[i - 1], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = next;
            }
        }
        g
    }

    /// All parameters, weights of every layer first, then biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.weights
            .iter()
            .flatten()
            .chain(self.biases.iter().flatten())
            .copied()
            .collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Domain(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut it = params.iter();
        for x in self
            .weights
            .iter_mut()
            .flatten()
            .chain(self.biases.iter_mut().flatten())
        {
            *x = *it.next().expect("length checked");
        }
        Ok(())
    }
}

fn relu(z: f64) -> f64 {
    z.max(0.0)
}

fn check_batch(x: &ArrayView2<f64>, targets: &Array1<f64>) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    if x.nrows() != targets.len() {
        return Err(Error::Domain(format!(
            "batch has {} inputs but {} targets",
            x.nrows(),
            targets.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Gradient,
    v: Gradient,
    t: u64,
}

impl AdamState {
    pub fn new(model: &Mlp) -> Self {
        Self {
            m: Gradient::zeros_like(model),
            v: Gradient::zeros_like(model),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update with learning rate `gamma`.
pub fn adam_step(model: &mut Mlp, state: &mut AdamState, grad: &Gradient, gamma: f64) -> Result<()> {
    if grad.weights.len() != model.weights.len()
        || grad.weights.iter().zip(&model.weights).any(|(g, w)| g.dim() != w.dim())
        || grad.biases.iter().zip(&model.biases).any(|(g, b)| g.dim() != b.dim())
    {
        return Err(Error::Domain("gradient shape does not match the model".into()));
    }
    if grad.values().any(|g| !g.is_finite()) {
        return Err(Error::Numerical("non-finite gradient".into()));
    }
    state.t += 1;
    let c1 = 1.0 - BETA1.powi(state.t as i32);
    let c2 = 1.0 - BETA2.powi(state.t as i32);
    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        *p -= gamma * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
    };
    for i in 0..model.weights.len() {
        ndarray::Zip::from(&mut model.weights[i])
            .and(&grad.weights[i])
            .and(&mut state.m.weights[i])
            .and(&mut state.v.weights[i])
            .for_each(|p, &g, m, v| update(p, g, m, v));
        ndarray::Zip::from(&mut model.biases[i])
            .and(&grad.biases[i])
            .and(&mut state.m.biases[i])
            .and(&mut state.v.biases[i])
            .for_each(|p, &g, m, v| update(p, g, m, v));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_iter: usize,
    pub batch: usize,
    pub gamma: f64,
    pub loss: Loss,
    pub seed: u64,
    pub hidden: usize,
    pub width: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_iter: 1000,
            batch: 400,
            gamma: 5e-3,
            loss: Loss::Mse,
            seed: 0,
            hidden: DEFAULT_HIDDEN_LAYERS,
            width: DEFAULT_WIDTH,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Mlp,
    /// Batch loss before each update.
    pub loss_trace: Vec<f64>,
}

/// Initializes from stream `(seed, 0)`, then runs `n_iter` Adam steps on
/// batches drawn without replacement from stream `(seed, 1)`.
pub fn train(ts: &TrainingSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if cfg.batch == 0 || cfg.batch > ts.len() {
        return Err(Error::Domain(format!(
            "batch size {} must lie between 1 and the training set size {}",
            cfg.batch,
            ts.len()
        )));
    }
    if !(cfg.gamma > 0.0 && cfg.gamma < 1.0) {
        return Err(Error::Domain(format!(
            "learning rate must lie in (0, 1), got {}",
            cfg.gamma
        )));
    }
    let dims = layer_dims(ts.dim(), cfg.hidden, cfg.width);
    let mut model = Mlp::init(&dims, &mut RngStream::new(cfg.seed, 0))?;
    let mut state = AdamState::new(&model);
    let mut rng = RngStream::new(cfg.seed, 1);
    let mut loss_trace = Vec::with_capacity(cfg.n_iter);
    for _ in 0..cfg.n_iter {
        let idx = index::sample(&mut rng, ts.len(), cfg.batch).into_vec();
        let x = ts.points.select(Axis(0), &idx);
        let t = ts.values.select(Axis(0), &idx);
        let (value, grad) = model.gradient(x.view(), &t, cfg.loss)?;
        adam_step(&mut model, &mut state, &grad, cfg.gamma)?;
        loss_trace.push(value);
    }
    Ok(TrainOutcome { model, loss_trace })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub d: usize,
    pub alpha: f64,
    pub example: u8,
    pub seed: u64,
    pub n_iter: usize,
    pub loss: Loss,
    /// Paths per training point, training points, batch size and learning
    /// rate of the run that produced the model.
    #[serde(default)]
    pub paths: usize,
    #[serde(default)]
    pub points: usize,
    #[serde(default)]
    pub batch: usize,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest_hash: Option<String>,
}

/// On-disk form of a trained model; weights are flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    pub fn new(model: &Mlp, meta: CheckpointMeta) -> Self {
        Self {
            layer_dims: model.dims.clone(),
            weights: model.weights.iter().map(|w| w.iter().copied().collect()).collect(),
            biases: model.biases.iter().map(|b| b.to_vec()).collect(),
            meta,
        }
    }

    pub fn model(&self) -> Result<Mlp> {
        let mut m = Mlp::zeros(&self.layer_dims)?;
        if self.weights.len() != m.weights.len() || self.biases.len() != m.biases.len() {
            return Err(Error::Domain(
                "checkpoint layer count does not match its dimensions".into(),
            ));
        }
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let shape = m.weights[i].dim();
            m.weights[i] = Array2::from_shape_vec(shape, w.clone())
                .map_err(|_| Error::Domain(format!("checkpoint weight {i} has the wrong size")))?;
            if b.len() != m.biases[i].len() {
                return Err(Error::Domain(format!("checkpoint bias {i} has the wrong size")));
            }
            m.biases[i] = Array1::from(b.clone());
        }
        if m.parameters().iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("checkpoint holds non-finite parameters".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}
