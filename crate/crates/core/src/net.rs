//! Dense feed-forward networks.
//!
//! Row-vector convention: a layer maps `a ↦ σ(a W + b)` with `W` stored `fan_in × fan_out`.
//! Batches are matrices with one sample per row.
//!
//! Dropout acts on hidden-layer outputs only, never on the inputs or the output layer.
//! A [`DropoutMask`] holds one keep vector per hidden layer plus the factor kept units are
//! multiplied by, so the same forward/backward code serves both scaling conventions.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Partition, SplitFractions};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::objectives::{LossSpec, Objective, Regularization};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => crate::objectives::sigmoid(z),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation's output `h = apply(z)`.
    #[inline]
    fn derivative_from_output(self, h: f64) -> f64 {
        match self {
            Activation::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - h * h,
            Activation::Sigmoid => h * (1.0 - h),
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(width: usize, activation: Activation) -> Self {
        Self { width, activation }
    }

    /// Hidden layers share `hidden`; the last layer is linear.
    pub fn stack(widths: &[usize], hidden: Activation) -> Vec<LayerSpec> {
        let last = widths.len().saturating_sub(1);
        widths
            .iter()
            .enumerate()
            .map(|(i, &w)| LayerSpec::new(w, if i == last { Activation::Linear } else { hidden }))
            .collect()
    }
}

pub(crate) fn validate_architecture(input_dim: usize, layers: &[LayerSpec]) -> Result<()> {
    if input_dim == 0 {
        return Err(Error::InvalidArchitecture("input dimension must be ≥ 1".into()));
    }
    if layers.is_empty() {
        return Err(Error::InvalidArchitecture("layer list is empty".into()));
    }
    if let Some(i) = layers.iter().position(|l| l.width == 0) {
        return Err(Error::InvalidArchitecture(format!("layer {i} has zero width")));
    }
    Ok(())
}

/// Fills `w` (fan_in × fan_out) with the scheme matched to `activation`:
/// He normal for relu, Glorot uniform otherwise.
pub(crate) fn init_weights(w: &mut Matrix, activation: Activation, rng: &mut Rng) {
    let (fan_in, fan_out) = w.shape();
    match activation {
        Activation::Relu => {
            let std = (2.0 / fan_in as f64).sqrt();
            let dist = Normal::new(0.0, std).expect("positive std");
            for v in w.as_mut_slice() {
                *v = dist.sample(rng);
            }
        }
        _ => {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
            for v in w.as_mut_slice() {
                *v = dist.sample(rng);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mlp {
    input_dim: usize,
    layers: Vec<LayerSpec>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

impl Mlp {
    /// Random initialization; biases start at zero.
    pub fn new(input_dim: usize, layers: &[LayerSpec], rng: &mut Rng) -> Result<Self> {
        validate_architecture(input_dim, layers)?;
        let mut weights = Vec::with_capacity(layers.len());
        let mut fan_in = input_dim;
        for spec in layers {
            let mut w = Matrix::zeros(fan_in, spec.width);
            init_weights(&mut w, spec.activation, rng);
            weights.push(w);
            fan_in = spec.width;
        }
        Ok(Self {
            input_dim,
            layers: layers.to_vec(),
            biases: layers.iter().map(|l| vec![0.0; l.width]).collect(),
            weights,
        })
    }

    pub fn init(input_dim: usize, layers: &[LayerSpec], seed: u64) -> Result<Self> {
        Self::new(input_dim, layers, &mut rng::seeded(seed))
    }

    pub fn zeros(input_dim: usize, layers: &[LayerSpec]) -> Result<Self> {
        validate_architecture(input_dim, layers)?;
        let mut fan_in = input_dim;
        let weights = layers
            .iter()
            .map(|l| {
                let w = Matrix::zeros(fan_in, l.width);
                fan_in = l.width;
                w
            })
            .collect();
        Ok(Self {
            input_dim,
            layers: layers.to_vec(),
            weights,
            biases: layers.iter().map(|l| vec![0.0; l.width]).collect(),
        })
    }

    /// Assemble from explicit parameters, checking every shape and value.
    pub fn from_parts(
        input_dim: usize,
        layers: Vec<LayerSpec>,
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        validate_architecture(input_dim, &layers)?;
        if weights.len() != layers.len() || biases.len() != layers.len() {
            return Err(Error::Shape(format!(
                "{} layers but {} weight matrices and {} bias vectors",
                layers.len(),
                weights.len(),
                biases.len()
            )));
        }
        let mut fan_in = input_dim;
        for (l, spec) in layers.iter().enumerate() {
            if weights[l].shape() != (fan_in, spec.width) {
                return Err(Error::Shape(format!(
                    "layer {l}: weights are {:?}, expected ({fan_in}, {})",
                    weights[l].shape(),
                    spec.width
                )));
            }
            if biases[l].len() != spec.width {
                return Err(Error::Shape(format!(
                    "layer {l}: {} biases, expected {}",
                    biases[l].len(),
                    spec.width
                )));
            }
            if !weights[l].is_finite() || biases[l].iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("layer {l} has non-finite parameters")));
            }
            fan_in = spec.width;
        }
        Ok(Self {
            input_dim,
            layers,
            weights,
            biases,
        })
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.width)
    }

    /// Number of weight layers (hidden + output).
    #[inline]
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.width).collect()
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    pub fn parameter_count(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.as_slice().len() + b.len())
            .sum()
    }

    fn check_mask(&self, mask: Option<&DropoutMask>) -> Result<()> {
        if let Some(mask) = mask {
            let hidden = self.hidden_widths();
            let got: Vec<usize> = mask.keep.iter().map(Vec::len).collect();
            if got != hidden {
                return Err(Error::Shape(format!(
                    "mask layer widths {got:?} do not match hidden widths {hidden:?}"
                )));
            }
        }
        Ok(())
    }

    fn check_inputs(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "input has {} features, network expects {}",
                x.cols(),
                self.input_dim
            )));
        }
        if !x.is_finite() {
            return Err(Error::Domain("non-finite network input".into()));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64], mask: Option<&DropoutMask>) -> Result<Vec<f64>> {
        let x = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.forward_batch(&x, mask)?.into_vec())
    }

    pub fn forward_batch(&self, x: &Matrix, mask: Option<&DropoutMask>) -> Result<Matrix> {
        self.check_inputs(x)?;
        self.check_mask(mask)?;
        Ok(self.run(x, mask, false).output)
    }

    fn run(&self, x: &Matrix, mask: Option<&DropoutMask>, record: bool) -> Tape {
        let last = self.layers.len() - 1;
        let mut tape = Tape {
            inputs: Vec::with_capacity(if record { self.layers.len() } else { 0 }),
            activations: Vec::with_capacity(if record { self.layers.len() } else { 0 }),
            output: Matrix::zeros(0, 0),
        };
        let mut a = x.clone();
        for (l, spec) in self.layers.iter().enumerate() {
            let mut h = a.matmul(&self.weights[l]);
            h.add_row_vector(&self.biases[l]);
            for v in h.as_mut_slice() {
                *v = spec.activation.apply(*v);
            }
            let next = match mask {
                Some(mask) if l < last => {
                    let mut masked = h.clone();
                    mask.apply(l, &mut masked);
                    masked
                }
                _ => h.clone(),
            };
            if record {
                tape.inputs.push(a);
                tape.activations.push(h);
            }
            a = next;
        }
        tape.output = a;
        tape
    }

    /// Data loss plus regularization on one batch, and exact gradients of that total.
    pub fn loss_and_gradients(
        &self,
        inputs: &Matrix,
        targets: &Matrix,
        loss: &LossSpec,
        mask: Option<&DropoutMask>,
    ) -> Result<(f64, Gradients)> {
        self.check_inputs(inputs)?;
        self.check_mask(mask)?;
        let tape = self.run(inputs, mask, true);
        let (data_loss, d_out) = loss.objective.batch_loss(&tape.output, targets)?;
        let mut grads = self.backprop(&tape, d_out, mask);
        loss.regularization.add_gradient(self, &mut grads);
        Ok((data_loss + loss.regularization.penalty(self), grads))
    }

    /// Reverse pass given `∂loss/∂output` for the batch recorded in `tape`.
    fn backprop(&self, tape: &Tape, d_out: Matrix, mask: Option<&DropoutMask>) -> Gradients {
        let depth = self.layers.len();
        let mut gw = vec![Matrix::zeros(0, 0); depth];
        let mut gb = vec![Vec::new(); depth];
        let mut upstream = d_out;
        for l in (0..depth).rev() {
            let act = self.layers[l].activation;
            let h = &tape.activations[l];
            if l + 1 < depth {
                if let Some(mask) = mask {
                    mask.apply(l, &mut upstream);
                }
            }
            // upstream becomes ∂loss/∂z_l
            for (d, hv) in upstream.as_mut_slice().iter_mut().zip(h.as_slice()) {
                *d *= act.derivative_from_output(*hv);
            }
            gw[l] = tape.inputs[l].t_matmul(&upstream);
            gb[l] = upstream.column_sums();
            if l > 0 {
                upstream = upstream.matmul_t(&self.weights[l]);
            }
        }
        Gradients {
            weights: gw,
            biases: gb,
        }
    }

    /// Apply `f(param, grad)` pairwise over all parameters.
    pub(crate) fn for_each_param_mut(&mut self, grads: &Gradients, mut f: impl FnMut(usize, &mut [f64], &[f64])) {
        for l in 0..self.layers.len() {
            f(2 * l, self.weights[l].as_mut_slice(), grads.weights[l].as_slice());
            f(2 * l + 1, &mut self.biases[l], &grads.biases[l]);
        }
    }
}

impl<'de> Deserialize<'de> for Mlp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            input_dim: usize,
            layers: Vec<LayerSpec>,
            weights: Vec<Matrix>,
            biases: Vec<Vec<f64>>,
        }
        let raw = Raw::deserialize(d)?;
        Mlp::from_parts(raw.input_dim, raw.layers, raw.weights, raw.biases).map_err(serde::de::Error::custom)
    }
}

struct Tape {
    /// Input fed into each layer (post-mask for layers after a hidden layer).
    inputs: Vec<Matrix>,
    /// Each layer's activation output, before masking.
    activations: Vec<Matrix>,
    output: Matrix,
}

/// Per-layer `∂loss/∂W_l` and `∂loss/∂b_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            for v in w.as_mut_slice() {
                *v *= factor;
            }
        }
        for b in &mut self.biases {
            for v in b {
                *v *= factor;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Matrix::is_finite) && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropoutScaling {
    /// Kept units are divided by `1 − p_D`.
    #[default]
    Inverted,
    /// Hidden layer `l` is multiplied by `√(1/K_l)`, `K_l` its width.
    InverseSqrtWidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dropout {
    pub rate: f64,
    #[serde(default)]
    pub scaling: DropoutScaling,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        Self::with_scaling(rate, DropoutScaling::Inverted)
    }

    pub fn with_scaling(rate: f64, scaling: DropoutScaling) -> Result<Self> {
        if !(rate > 0.0 && rate < 1.0) {
            return Err(Error::InvalidHyperparameter(format!(
                "dropout ratio must lie strictly inside (0, 1), got {rate}"
            )));
        }
        Ok(Self { rate, scaling })
    }

    fn layer_scale(&self, width: usize) -> f64 {
        match self.scaling {
            DropoutScaling::Inverted => 1.0 / (1.0 - self.rate),
            DropoutScaling::InverseSqrtWidth => (1.0 / width as f64).sqrt(),
        }
    }

    /// Fresh mask: each hidden unit dropped independently with probability `rate`.
    pub fn sample_mask(&self, mlp: &Mlp, rng: &mut Rng) -> DropoutMask {
        let widths = mlp.hidden_widths();
        let keep = widths
            .iter()
            .map(|&w| (0..w).map(|_| !rng.random_bool(self.rate)).collect())
            .collect();
        DropoutMask {
            keep,
            scale: widths.iter().map(|&w| self.layer_scale(w)).collect(),
        }
    }

    /// Deterministic mask equal to the expectation of [`Self::sample_mask`]'s effect.
    pub fn expected_mask(&self, mlp: &Mlp) -> DropoutMask {
        let widths = mlp.hidden_widths();
        DropoutMask {
            keep: widths.iter().map(|&w| vec![true; w]).collect(),
            scale: widths
                .iter()
                .map(|&w| (1.0 - self.rate) * self.layer_scale(w))
                .collect(),
        }
    }
}

/// Binary keep vectors for each hidden layer and the factor applied to kept units.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    keep: Vec<Vec<bool>>,
    scale: Vec<f64>,
}

impl DropoutMask {
    /// Masking disabled: keeps everything with unit scale, so forward reduces to the plain network.
    pub fn all_ones(mlp: &Mlp) -> Self {
        let widths = mlp.hidden_widths();
        Self {
            keep: widths.iter().map(|&w| vec![true; w]).collect(),
            scale: vec![1.0; widths.len()],
        }
    }

    pub fn from_parts(keep: Vec<Vec<bool>>, scale: Vec<f64>) -> Result<Self> {
        if keep.len() != scale.len() {
            return Err(Error::Shape("one scale per masked layer".into()));
        }
        Ok(Self { keep, scale })
    }

    pub fn layers(&self) -> usize {
        self.keep.len()
    }

    pub fn keep(&self, layer: usize) -> &[bool] {
        &self.keep[layer]
    }

    pub fn scale(&self, layer: usize) -> f64 {
        self.scale[layer]
    }

    fn apply(&self, layer: usize, m: &mut Matrix) {
        let keep = &self.keep[layer];
        let s = self.scale[layer];
        let cols = m.cols();
        for row in m.as_mut_slice().chunks_exact_mut(cols) {
            for (v, &k) in row.iter_mut().zip(keep) {
                *v = if k { *v * s } else { 0.0 };
            }
        }
    }
}

/// Inverted-dropout mask with drop probability `p_drop`.
pub fn sample_dropout_mask(mlp: &Mlp, p_drop: f64, rng: &mut Rng) -> Result<DropoutMask> {
    Ok(Dropout::new(p_drop)?.sample_mask(mlp, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub l2_lambda: f64,
    #[serde(default)]
    pub seed: u64,
    pub split: SplitFractions,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidHyperparameter(format!(
                "learning_rate must be finite and ≥ 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidHyperparameter("epochs must be ≥ 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidHyperparameter("batch_size must be ≥ 1".into()));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::InvalidHyperparameter(format!(
                "l2_lambda must be finite and ≥ 0, got {}",
                self.l2_lambda
            )));
        }
        self.split.validate()
    }
}

/// First-order optimizer with per-slot state; a slot is one parameter tensor.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self {
            kind,
            lr,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Call once per update, before the slot updates.
    pub fn next_step(&mut self) {
        self.step = self.step.saturating_add(1);
    }

    pub fn update(&mut self, slot: usize, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Adam => {
                while self.m.len() <= slot {
                    self.m.push(Vec::new());
                    self.v.push(Vec::new());
                }
                if self.m[slot].len() != params.len() {
                    self.m[slot] = vec![0.0; params.len()];
                    self.v[slot] = vec![0.0; params.len()];
                }
                let bc1 = 1.0 - Self::BETA1.powi(self.step);
                let bc2 = 1.0 - Self::BETA2.powi(self.step);
                let (m, v) = (&mut self.m[slot], &mut self.v[slot]);
                for i in 0..params.len() {
                    let g = grads[i];
                    m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * g;
                    v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * g * g;
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    params[i] -= self.lr * m_hat / (v_hat.sqrt() + Self::EPS);
                }
            }
        }
    }
}

/// Per-epoch loss history.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

impl TrainLog {
    pub fn epochs(&self) -> usize {
        self.train_loss.len()
    }

    /// Mean training loss over the first and last quarter of epochs.
    pub fn quartile_means(&self) -> (f64, f64) {
        let n = self.train_loss.len();
        let q = (n / 4).max(1);
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        (mean(&self.train_loss[..q]), mean(&self.train_loss[n - q..]))
    }

    pub(crate) fn push(&mut self, epoch: usize, train: f64, val: f64, context: &str) -> Result<()> {
        if !train.is_finite() || !val.is_finite() {
            return Err(Error::Divergence {
                epoch,
                last_finite_epoch: epoch.checked_sub(1),
                context: context.to_owned(),
            });
        }
        self.train_loss.push(train);
        self.val_loss.push(val);
        Ok(())
    }
}

/// The inputs/targets that validation losses are measured on: the validation partition
/// when it has rows, otherwise the training partition.
pub(crate) fn validation_xy(data: &Dataset) -> (Matrix, Matrix) {
    if data.indices(Partition::Val).is_empty() {
        data.partition_xy(Partition::Train)
    } else {
        data.partition_xy(Partition::Val)
    }
}

pub(crate) fn minibatches(n: usize, batch_size: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Shuffled minibatch training on the training partition.
///
/// With `dropout`, a fresh mask is drawn for every minibatch and the regularizer takes the
/// dropout form `λ Σ (p_D ‖W‖² + ‖b‖²)`; otherwise it is plain L2 with `cfg.l2_lambda`.
/// Validation loss uses the expected mask (no sampling).
pub fn train(
    mut mlp: Mlp,
    data: &Dataset,
    cfg: &TrainConfig,
    objective: Objective,
    dropout: Option<Dropout>,
    rng: &mut Rng,
) -> Result<(Mlp, TrainLog)> {
    cfg.validate()?;
    let (train_x, train_y) = data.partition_xy(Partition::Train);
    let n = train_x.rows();
    if n == 0 {
        return Err(Error::State("training partition is empty".into()));
    }
    if cfg.batch_size > n {
        return Err(Error::InvalidHyperparameter(format!(
            "batch_size {} exceeds training-set size {n}",
            cfg.batch_size
        )));
    }
    if objective.output_width(train_y.cols()) != mlp.output_dim() {
        return Err(Error::Shape(format!(
            "network has {} outputs; {:?} with {} responses needs {}",
            mlp.output_dim(),
            objective,
            train_y.cols(),
            objective.output_width(train_y.cols())
        )));
    }
    let loss = LossSpec {
        objective,
        regularization: match dropout {
            Some(d) => Regularization::mcd(cfg.l2_lambda, d.rate)?,
            None => Regularization::l2(cfg.l2_lambda)?,
        },
    };
    let (val_x, val_y) = validation_xy(data);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut log = TrainLog::default();

    for epoch in 0..cfg.epochs {
        let mut sum = 0.0;
        let batches = minibatches(n, cfg.batch_size, rng);
        for idx in &batches {
            let x = train_x.select_rows(idx);
            let y = train_y.select_rows(idx);
            let mask = dropout.map(|d| d.sample_mask(&mlp, rng));
            let (value, grads) = mlp.loss_and_gradients(&x, &y, &loss, mask.as_ref())?;
            if !value.is_finite() || !grads.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    last_finite_epoch: epoch.checked_sub(1),
                    context: "non-finite minibatch loss".into(),
                });
            }
            sum += value;
            opt.next_step();
            mlp.for_each_param_mut(&grads, |slot, p, g| opt.update(slot, p, g));
        }
        let expected = dropout.map(|d| d.expected_mask(&mlp));
        let val_out = mlp.forward_batch(&val_x, expected.as_ref())?;
        let (val, _) = loss.objective.batch_loss(&val_out, &val_y)?;
        log.push(
            epoch,
            sum / batches.len() as f64,
            val + loss.regularization.penalty(&mlp),
            "validation loss",
        )?;
    }
    Ok((mlp, log))
}
