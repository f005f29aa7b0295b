//! Restricted Boltzmann machines, greedy stacking into a deep belief network,
//! and the fine-tuned classifier built on top.
//!
//! An RBM with visible units `v` (length m), hidden units `h` (length n),
//! weights `W` (m × n) and biases `a`, `b` has energy
//!
//! ```text
//! E(v, h) = −Σ a_i v_i − Σ b_j h_j − Σ_i Σ_j v_i w_ij h_j
//! ```
//!
//! and factorized conditionals `P(h_j=1|v) = σ(b_j + Σ_i w_ij v_i)`,
//! `P(v_i=1|h) = σ(a_i + Σ_j w_ij h_j)`.
//!
//! Visible units are real-valued in [0,1] and never sampled; hidden states are
//! sampled in the negative phase of contrastive divergence.
//!
//! The classifier reads its output layer as class posteriors: sigmoid outputs
//! trained against 1-of-K targets with a sum-squared error approximate the
//! class conditional probabilities, so [`predict_proba`] only clamps and
//! renormalizes them.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::network::{self, argmax, Dense, FinetuneConfig, Network, TrainReport};
use crate::normalize::NormalizationStats;
use crate::patchio::Scheme;
use crate::{rng_from_seed, Error, Result};

pub use crate::network::sigmoid;

/// Standard deviation of the initial RBM and head weights.
pub const INIT_WEIGHT_STD: f64 = 0.01;
/// Lower clamp applied to output activations before renormalizing.
pub const PROBABILITY_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbmParams {
    /// `visible × hidden`.
    pub weights: Array2<f64>,
    pub visible_bias: Array1<f64>,
    pub hidden_bias: Array1<f64>,
}

impl RbmParams {
    pub fn zeros(visible: usize, hidden: usize) -> Self {
        Self {
            weights: Array2::zeros((visible, hidden)),
            visible_bias: Array1::zeros(visible),
            hidden_bias: Array1::zeros(hidden),
        }
    }

    /// Gaussian weights with std [`INIT_WEIGHT_STD`], zero biases.
    pub fn random(visible: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let normal = Normal::new(0.0, INIT_WEIGHT_STD).expect("valid std");
        Self {
            weights: Array2::from_shape_simple_fn((visible, hidden), || normal.sample(rng)),
            ..Self::zeros(visible, hidden)
        }
    }

    pub fn visible(&self) -> usize {
        self.weights.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.weights.ncols()
    }

    fn validate(&self) -> Result<()> {
        if self.visible_bias.len() != self.visible() || self.hidden_bias.len() != self.hidden() {
            return Err(Error::Shape(format!(
                "RBM {}×{} with biases of length {} and {}",
                self.visible(),
                self.hidden(),
                self.visible_bias.len(),
                self.hidden_bias.len()
            )));
        }
        Ok(())
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.visible_bias).chain(&self.hidden_bias).all(|v| v.is_finite())
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Shape(format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}

pub fn energy(v: ArrayView1<f64>, h: ArrayView1<f64>, params: &RbmParams) -> Result<f64> {
    params.validate()?;
    check_len("visible vector", v.len(), params.visible())?;
    check_len("hidden vector", h.len(), params.hidden())?;
    Ok(-params.visible_bias.dot(&v) - params.hidden_bias.dot(&h) - v.dot(&params.weights.dot(&h)))
}

pub fn prob_h_given_v(v: ArrayView1<f64>, params: &RbmParams) -> Result<Array1<f64>> {
    check_len("visible vector", v.len(), params.visible())?;
    Ok((v.dot(&params.weights) + &params.hidden_bias).mapv(sigmoid))
}

pub fn prob_v_given_h(h: ArrayView1<f64>, params: &RbmParams) -> Result<Array1<f64>> {
    check_len("hidden vector", h.len(), params.hidden())?;
    Ok((params.weights.dot(&h) + &params.visible_bias).mapv(sigmoid))
}

/// Row-wise `P(h=1|v)` for a batch.
pub fn hidden_probs(v: ArrayView2<f64>, params: &RbmParams) -> Result<Array2<f64>> {
    check_len("visible batch width", v.ncols(), params.visible())?;
    let mut z = v.dot(&params.weights);
    z += &params.hidden_bias;
    z.mapv_inplace(sigmoid);
    Ok(z)
}

/// Row-wise `P(v=1|h)` for a batch.
pub fn visible_probs(h: ArrayView2<f64>, params: &RbmParams) -> Result<Array2<f64>> {
    check_len("hidden batch width", h.ncols(), params.hidden())?;
    let mut z = h.dot(&params.weights.t());
    z += &params.visible_bias;
    z.mapv_inplace(sigmoid);
    Ok(z)
}

fn sample_bernoulli(probs: &Array2<f64>, rng: &mut impl Rng) -> Array2<f64> {
    probs.mapv(|p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
}

/// Contrastive-divergence estimate of the log-likelihood gradient for one
/// batch, averaged over rows, together with the mean squared error of the
/// first reconstruction.
///
/// Positive statistics use the data and `P(h|v₀)`. The chain samples binary
/// hidden states, maps them back to real-valued visible probabilities, and
/// after `steps` such rounds the negative statistics use `v_k` and
/// `P(h|v_k)`.
pub fn cd_gradient(
    params: &RbmParams,
    batch: ArrayView2<f64>,
    steps: usize,
    rng: &mut impl Rng,
) -> Result<(RbmParams, f64)> {
    params.validate()?;
    if steps == 0 {
        return Err(Error::Config("cd_steps must be ≥ 1".into()));
    }
    let rows = batch.nrows();
    if rows == 0 {
        return Err(Error::Size("empty batch".into()));
    }
    let pos_h = hidden_probs(batch, params)?;
    let mut h_state = sample_bernoulli(&pos_h, rng);
    let mut v_k = visible_probs(h_state.view(), params)?;
    let recon_error = (&v_k - &batch).mapv(|d| d * d).mean().unwrap_or(0.0);
    let mut neg_h = hidden_probs(v_k.view(), params)?;
    for _ in 1..steps {
        h_state = sample_bernoulli(&neg_h, rng);
        v_k = visible_probs(h_state.view(), params)?;
        neg_h = hidden_probs(v_k.view(), params)?;
    }
    let scale = 1.0 / rows as f64;
    let weights = (batch.t().dot(&pos_h) - v_k.t().dot(&neg_h)) * scale;
    let visible_bias = (&batch - &v_k).sum_axis(Axis(0)) * scale;
    let hidden_bias = (&pos_h - &neg_h).sum_axis(Axis(0)) * scale;
    Ok((
        RbmParams {
            weights,
            visible_bias,
            hidden_bias,
        },
        recon_error,
    ))
}

/// Step settings for [`cd_update`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdStep {
    pub learning_rate: f64,
    pub momentum: f64,
    pub l2: f64,
    pub steps: usize,
}

/// One CD-k update with momentum and weight decay:
///
/// ```text
/// velocity ← momentum·velocity + (∇_CD − λ·W)
/// W        ← W + learning_rate·velocity
/// ```
///
/// (biases likewise, without decay). A zero learning rate leaves the
/// parameters unchanged. Returns the new parameters and the reconstruction
/// error of the batch.
pub fn cd_update(
    params: &RbmParams,
    batch: ArrayView2<f64>,
    velocity: &mut RbmParams,
    step: &CdStep,
    rng: &mut impl Rng,
) -> Result<(RbmParams, f64)> {
    if velocity.weights.dim() != params.weights.dim() {
        return Err(Error::Shape("velocity does not match RBM parameters".into()));
    }
    let (mut grad, recon) = cd_gradient(params, batch, step.steps, rng)?;
    if step.l2 != 0.0 {
        grad.weights.scaled_add(-step.l2, &params.weights);
    }
    velocity.weights.mapv_inplace(|v| v * step.momentum);
    velocity.weights += &grad.weights;
    velocity.visible_bias.mapv_inplace(|v| v * step.momentum);
    velocity.visible_bias += &grad.visible_bias;
    velocity.hidden_bias.mapv_inplace(|v| v * step.momentum);
    velocity.hidden_bias += &grad.hidden_bias;

    let mut next = params.clone();
    next.weights.scaled_add(step.learning_rate, &velocity.weights);
    next.visible_bias.scaled_add(step.learning_rate, &velocity.visible_bias);
    next.hidden_bias.scaled_add(step.learning_rate, &velocity.hidden_bias);
    Ok((next, recon))
}

/// Full DBN training configuration. `finetune.batch_size` and
/// `finetune.l2_coefficient` also apply to RBM pretraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub layer_sizes: Vec<usize>,
    pub cd_steps: usize,
    pub rbm_learning_rate: f64,
    pub rbm_epochs: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    /// Pretraining epochs run at `initial_momentum`.
    pub momentum_switch_epoch: usize,
    #[serde(flatten)]
    pub finetune: FinetuneConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layer_sizes: vec![50, 50],
            cd_steps: 1,
            rbm_learning_rate: 0.05,
            rbm_epochs: 30,
            initial_momentum: 0.5,
            final_momentum: 0.9,
            momentum_switch_epoch: 5,
            finetune: FinetuneConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        if self.cd_steps == 0 {
            return Err(Error::Config("cd_steps must be ≥ 1".into()));
        }
        if !(self.rbm_learning_rate >= 0.0) {
            return Err(Error::Config("rbm_learning_rate must be ≥ 0".into()));
        }
        for m in [self.initial_momentum, self.final_momentum] {
            if !(0.0..1.0).contains(&m) {
                return Err(Error::Config("momentum must lie in [0, 1)".into()));
            }
        }
        self.finetune.validate()
    }

    fn momentum_at(&self, epoch: usize) -> f64 {
        if epoch < self.momentum_switch_epoch {
            self.initial_momentum
        } else {
            self.final_momentum
        }
    }
}

/// Per-layer, per-epoch mean squared reconstruction error of pretraining.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub layers: Vec<Vec<f64>>,
}

/// Trains a single RBM of `hidden` units on `data`.
pub fn train_rbm(
    data: &Array2<f64>,
    hidden: usize,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(RbmParams, Vec<f64>)> {
    let mut params = RbmParams::random(data.ncols(), hidden, rng);
    let mut velocity = RbmParams::zeros(data.ncols(), hidden);
    let mut order: Vec<usize> = (0..data.nrows()).collect();
    let mut history = Vec::with_capacity(config.rbm_epochs);
    for epoch in 0..config.rbm_epochs {
        order.shuffle(rng);
        let step = CdStep {
            learning_rate: config.rbm_learning_rate,
            momentum: config.momentum_at(epoch),
            l2: config.finetune.l2_coefficient,
            steps: config.cd_steps,
        };
        let (mut total, mut count) = (0.0, 0usize);
        for chunk in order.chunks(config.finetune.batch_size) {
            let batch = data.select(Axis(0), chunk);
            let (next, recon) = cd_update(&params, batch.view(), &mut velocity, &step, rng)?;
            params = next;
            total += recon * chunk.len() as f64;
            count += chunk.len();
        }
        if !params.is_finite() {
            return Err(Error::Numeric(format!("RBM parameters diverged at epoch {}", epoch + 1)));
        }
        history.push(total / count.max(1) as f64);
    }
    Ok((params, history))
}

/// Greedy layerwise pretraining: layer t is trained on the hidden
/// probabilities of layer t−1.
pub fn pretrain(data: &Array2<f64>, config: &TrainConfig) -> Result<(Vec<RbmParams>, PretrainReport)> {
    config.validate()?;
    if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain("pretraining data must lie in [0, 1]".into()));
    }
    let mut rng = rng_from_seed(config.seed);
    let mut stack = Vec::with_capacity(config.layer_sizes.len());
    let mut report = PretrainReport::default();
    let mut input = data.clone();
    for &width in &config.layer_sizes {
        let (params, history) = train_rbm(&input, width, config, &mut rng)?;
        input = hidden_probs(input.view(), &params)?;
        stack.push(params);
        report.layers.push(history);
    }
    Ok((stack, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Dbn,
    Sdae,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    /// Scaled pixels, `4·w·h` values in [0,1].
    RawPixels,
    /// The 22 normalized features.
    Features22,
    /// Any other real-valued input.
    Custom,
}

/// A trained (or initialized) classifier: sigmoid hidden layers and a
/// `top × k` sigmoid output head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbnModel {
    pub kind: ModelKind,
    pub input_kind: InputKind,
    pub scheme: Scheme,
    pub network: Network,
    /// Training-set feature statistics, kept for train-stats normalization
    /// of later inputs.
    pub normalization: Option<NormalizationStats>,
}

impl DbnModel {
    pub fn class_count(&self) -> usize {
        self.scheme.class_count()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.network.hidden.iter().map(Dense::outputs).collect()
    }

    pub fn input_width(&self) -> usize {
        self.network.input_width()
    }
}

/// Copies RBM weights and hidden biases into hidden layers and adds a head of
/// small Gaussian weights. With an empty stack the head reads the input
/// directly.
pub fn init_classifier(
    stack: &[RbmParams],
    input_width: usize,
    scheme: Scheme,
    input_kind: InputKind,
    seed: u64,
) -> Result<DbnModel> {
    let hidden: Vec<Dense> = stack
        .iter()
        .map(|rbm| {
            rbm.validate()?;
            Ok(Dense {
                weights: rbm.weights.clone(),
                bias: rbm.hidden_bias.clone(),
            })
        })
        .collect::<Result<_>>()?;
    if let Some(first) = hidden.first() {
        check_len("first layer input", first.inputs(), input_width)?;
    }
    let top = hidden.last().map_or(input_width, Dense::outputs);
    let k = scheme.class_count();
    let mut rng = rng_from_seed(seed);
    let normal = Normal::new(0.0, INIT_WEIGHT_STD).expect("valid std");
    let head = Dense {
        weights: Array2::from_shape_simple_fn((top, k), || normal.sample(&mut rng)),
        bias: Array1::zeros(k),
    };
    Ok(DbnModel {
        kind: ModelKind::Dbn,
        input_kind,
        scheme,
        network: Network::new(hidden, head)?,
        normalization: None,
    })
}

/// Supervised backpropagation fine-tuning; see [`network::train_classifier`].
pub fn finetune(
    model: &DbnModel,
    x: &Array2<f64>,
    labels: &[usize],
    config: &FinetuneConfig,
    seed: u64,
) -> Result<(DbnModel, TrainReport)> {
    let (network, report) = network::train_classifier(&model.network, x, labels, config, seed)?;
    Ok((DbnModel { network, ..model.clone() }, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbnTrainReport {
    pub pretrain: PretrainReport,
    pub finetune: TrainReport,
}

/// Pretrains the stack, initializes the classifier and fine-tunes it.
pub fn train_dbn(
    x: &Array2<f64>,
    labels: &[usize],
    scheme: Scheme,
    input_kind: InputKind,
    config: &TrainConfig,
) -> Result<(DbnModel, DbnTrainReport)> {
    let (stack, pretrain_report) = pretrain(x, config)?;
    let model = init_classifier(&stack, x.ncols(), scheme, input_kind, config.seed.wrapping_add(1))?;
    let (model, finetune_report) = finetune(&model, x, labels, &config.finetune, config.seed.wrapping_add(2))?;
    Ok((
        model,
        DbnTrainReport {
            pretrain: pretrain_report,
            finetune: finetune_report,
        },
    ))
}

fn normalize_rows(mut y: Array2<f64>) -> Array2<f64> {
    for mut row in y.rows_mut() {
        row.mapv_inplace(|v| v.clamp(PROBABILITY_FLOOR, 1.0));
        let total = row.sum();
        row /= total;
    }
    y
}

/// Posterior estimate for one input.
pub fn predict_proba(model: &DbnModel, features: ArrayView1<f64>) -> Result<Array1<f64>> {
    let x = features.insert_axis(Axis(0));
    Ok(predict_proba_batch(model, x)?.row(0).to_owned())
}

/// Row-wise posteriors.
pub fn predict_proba_batch(model: &DbnModel, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    Ok(normalize_rows(model.network.forward(x)?))
}

/// Most probable class; ties go to the lowest index.
pub fn classify(model: &DbnModel, features: ArrayView1<f64>) -> Result<usize> {
    Ok(argmax(predict_proba(model, features)?.iter().copied()))
}

pub fn classify_batch(model: &DbnModel, x: ArrayView2<f64>) -> Result<Vec<usize>> {
    let p = predict_proba_batch(model, x)?;
    Ok(p.rows().into_iter().map(|r| argmax(r.iter().copied())).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

pub fn evaluate(model: &DbnModel, x: &Array2<f64>, labels: &[usize]) -> Result<Evaluation> {
    if x.nrows() == 0 {
        return Err(Error::Size("empty test set".into()));
    }
    check_len("label list", labels.len(), x.nrows())?;
    let k = model.class_count();
    let predicted = classify_batch(model, x.view())?;
    let mut confusion = vec![vec![0usize; k]; k];
    let mut correct = 0usize;
    for (&truth, &guess) in labels.iter().zip(&predicted) {
        if truth >= k {
            return Err(Error::Label { index: truth, class_count: k });
        }
        confusion[truth][guess] += 1;
        correct += usize::from(truth == guess);
    }
    Ok(Evaluation {
        accuracy: correct as f64 / labels.len() as f64,
        confusion,
    })
}

pub const MODEL_FORMAT: &str = "satpipe-model";
pub const MODEL_VERSION: u32 = 1;

/// Serialized model: the classifier plus the configuration and seed that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub layer_sizes: Vec<usize>,
    pub seed: u64,
    pub config: serde_json::Value,
    pub model: DbnModel,
}

impl ModelFile {
    pub fn new(model: DbnModel, config: &impl Serialize, seed: u64) -> Result<Self> {
        Ok(Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            layer_sizes: model.layer_sizes(),
            seed,
            config: serde_json::to_value(config)?,
            model,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model document {} v{}", file.format, file.version)));
        }
        file.model.network.validate()?;
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
