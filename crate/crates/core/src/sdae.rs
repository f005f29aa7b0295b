//! Stacked denoising autoencoder baseline.
//!
//! Each layer is an untied sigmoid autoencoder
//!
//! ```text
//! a⁽ˡ⁺¹⁾ = σ(W⁽ˡ'¹⁾ a⁽ˡ⁾ + b⁽ˡ'¹⁾)        (encode)
//! x̂      = σ(W⁽ˡ'²⁾ a⁽ˡ⁺¹⁾ + b⁽ˡ'²⁾)      (decode)
//! ```
//!
//! trained to reconstruct its clean input from a masked copy. Layers are
//! trained one at a time and frozen; the encoders then become the hidden
//! layers of a classifier fine-tuned with the same backpropagation loop as
//! the DBN. No sparsity penalty is applied.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dbn::{self, DbnModel, InputKind, ModelKind, INIT_WEIGHT_STD};
use crate::network::{sigmoid, Dense, FinetuneConfig, Network, TrainReport};
use crate::patchio::Scheme;
use crate::{rng_from_seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderParams {
    /// `hidden × input`.
    pub encode_weights: Array2<f64>,
    pub encode_bias: Array1<f64>,
    /// `input × hidden`.
    pub decode_weights: Array2<f64>,
    pub decode_bias: Array1<f64>,
}

impl AutoencoderParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            encode_weights: Array2::zeros((hidden, input)),
            encode_bias: Array1::zeros(hidden),
            decode_weights: Array2::zeros((input, hidden)),
            decode_bias: Array1::zeros(input),
        }
    }

    pub fn random(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let normal = Normal::new(0.0, INIT_WEIGHT_STD).expect("valid std");
        Self {
            encode_weights: Array2::from_shape_simple_fn((hidden, input), || normal.sample(rng)),
            decode_weights: Array2::from_shape_simple_fn((input, hidden), || normal.sample(rng)),
            ..Self::zeros(input, hidden)
        }
    }

    pub fn input_width(&self) -> usize {
        self.encode_weights.ncols()
    }

    pub fn hidden_width(&self) -> usize {
        self.encode_weights.nrows()
    }

    fn validate(&self) -> Result<()> {
        let (h, i) = self.encode_weights.dim();
        if self.decode_weights.dim() != (i, h) || self.encode_bias.len() != h || self.decode_bias.len() != i {
            return Err(Error::Shape(format!("autoencoder parameters inconsistent with a {i}→{h} layer")));
        }
        Ok(())
    }

    /// The encoder as a feed-forward layer.
    pub fn encoder_layer(&self) -> Dense {
        Dense {
            weights: self.encode_weights.t().to_owned(),
            bias: self.encode_bias.clone(),
        }
    }
}

fn check_width(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Shape(format!("{what} has width {got}, expected {want}")));
    }
    Ok(())
}

pub fn encode(input: ArrayView1<f64>, params: &AutoencoderParams) -> Result<Array1<f64>> {
    check_width("input", input.len(), params.input_width())?;
    Ok((params.encode_weights.dot(&input) + &params.encode_bias).mapv(sigmoid))
}

pub fn decode(hidden: ArrayView1<f64>, params: &AutoencoderParams) -> Result<Array1<f64>> {
    check_width("hidden vector", hidden.len(), params.hidden_width())?;
    Ok((params.decode_weights.dot(&hidden) + &params.decode_bias).mapv(sigmoid))
}

pub fn encode_batch(x: ArrayView2<f64>, params: &AutoencoderParams) -> Result<Array2<f64>> {
    check_width("input batch", x.ncols(), params.input_width())?;
    let mut z = x.dot(&params.encode_weights.t());
    z += &params.encode_bias;
    z.mapv_inplace(sigmoid);
    Ok(z)
}

pub fn decode_batch(h: ArrayView2<f64>, params: &AutoencoderParams) -> Result<Array2<f64>> {
    check_width("hidden batch", h.ncols(), params.hidden_width())?;
    let mut z = h.dot(&params.decode_weights.t());
    z += &params.decode_bias;
    z.mapv_inplace(sigmoid);
    Ok(z)
}

/// Mean squared per-element error of reconstructing `x` from itself.
pub fn reconstruction_error(x: ArrayView2<f64>, params: &AutoencoderParams) -> Result<f64> {
    let recon = decode_batch(encode_batch(x, params)?.view(), params)?;
    Ok((&recon - &x).mapv(|d| d * d).mean().unwrap_or(0.0))
}

/// Mean squared error of reconstructing `clean` from `corrupted`.
pub fn denoising_error(corrupted: ArrayView2<f64>, clean: ArrayView2<f64>, params: &AutoencoderParams) -> Result<f64> {
    if corrupted.dim() != clean.dim() {
        return Err(Error::Shape(format!("corrupted {:?} vs clean {:?}", corrupted.dim(), clean.dim())));
    }
    let recon = decode_batch(encode_batch(corrupted, params)?.view(), params)?;
    Ok((&recon - &clean).mapv(|d| d * d).mean().unwrap_or(0.0))
}

/// Sum-squared reconstruction objective `Σ_rows ½‖x̂(corrupted) − clean‖²`
/// and its gradient with respect to every parameter.
pub fn reconstruction_gradient(
    params: &AutoencoderParams,
    corrupted: ArrayView2<f64>,
    clean: ArrayView2<f64>,
) -> Result<(f64, AutoencoderParams)> {
    params.validate()?;
    if corrupted.dim() != clean.dim() {
        return Err(Error::Shape(format!("corrupted {:?} vs clean {:?}", corrupted.dim(), clean.dim())));
    }
    let hidden = encode_batch(corrupted, params)?;
    let recon = decode_batch(hidden.view(), params)?;
    let diff = &recon - &clean;
    let loss = 0.5 * diff.mapv(|d| d * d).sum();
    let delta_out = diff * &recon.mapv(|r| r * (1.0 - r));
    let delta_hidden = delta_out.dot(&params.decode_weights) * &hidden.mapv(|h| h * (1.0 - h));
    Ok((
        loss,
        AutoencoderParams {
            encode_weights: delta_hidden.t().dot(&corrupted),
            encode_bias: delta_hidden.sum_axis(Axis(0)),
            decode_weights: delta_out.t().dot(&hidden),
            decode_bias: delta_out.sum_axis(Axis(0)),
        },
    ))
}

/// Zeroes each value independently with probability `fraction`.
pub fn mask_corrupt(x: ArrayView2<f64>, fraction: f64, rng: &mut impl Rng) -> Array2<f64> {
    if fraction <= 0.0 {
        return x.to_owned();
    }
    x.mapv(|v| if rng.random::<f64>() < fraction { 0.0 } else { v })
}

/// Step size suited to raw scaled pixels. The loss is summed over output
/// units, so wide inputs need a smaller step than the default.
pub const RAW_PIXEL_LEARNING_RATE: f64 = 0.0005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdaeConfig {
    pub layer_sizes: Vec<usize>,
    pub corruption_fraction: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Pretraining epochs per layer.
    pub epochs: usize,
    #[serde(flatten)]
    pub finetune: FinetuneConfig,
    pub seed: u64,
}

impl Default for SdaeConfig {
    fn default() -> Self {
        Self {
            layer_sizes: vec![100, 100],
            corruption_fraction: 0.25,
            learning_rate: 0.005,
            momentum: 0.9,
            epochs: 30,
            finetune: FinetuneConfig::default(),
            seed: 0,
        }
    }
}

impl SdaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.corruption_fraction) {
            return Err(Error::Config("corruption_fraction must lie in [0, 1)".into()));
        }
        if !(self.learning_rate >= 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("learning_rate must be ≥ 0 and momentum in [0, 1)".into()));
        }
        self.finetune.validate()
    }
}

/// Trains one denoising autoencoder of `width` hidden units. Returns the
/// frozen parameters and the denoising reconstruction error after each
/// epoch: the mean squared error of reconstructing `data` from one fixed
/// corrupted copy drawn before training. Holding the corruption fixed keeps
/// the per-epoch values comparable; with no corruption this is the plain
/// reconstruction error.
pub fn pretrain_layer(
    data: &Array2<f64>,
    width: usize,
    config: &SdaeConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(AutoencoderParams, Vec<f64>)> {
    config.validate()?;
    if width == 0 {
        return Err(Error::Config("layer width must be positive".into()));
    }
    let mut params = AutoencoderParams::random(data.ncols(), width, rng);
    let mut velocity = AutoencoderParams::zeros(data.ncols(), width);
    let mut order: Vec<usize> = (0..data.nrows()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let probe = mask_corrupt(data.view(), config.corruption_fraction, rng);
    let (lr, mom) = (config.learning_rate, config.momentum);
    for epoch in 0..config.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.finetune.batch_size) {
            let clean = data.select(Axis(0), chunk);
            let corrupted = mask_corrupt(clean.view(), config.corruption_fraction, rng);
            let (_, grad) = reconstruction_gradient(&params, corrupted.view(), clean.view())?;
            for (p, v, g) in [
                (&mut params.encode_weights, &mut velocity.encode_weights, &grad.encode_weights),
                (&mut params.decode_weights, &mut velocity.decode_weights, &grad.decode_weights),
            ] {
                *v *= mom;
                v.scaled_add(-lr, g);
                *p += &*v;
            }
            for (p, v, g) in [
                (&mut params.encode_bias, &mut velocity.encode_bias, &grad.encode_bias),
                (&mut params.decode_bias, &mut velocity.decode_bias, &grad.decode_bias),
            ] {
                *v *= mom;
                v.scaled_add(-lr, g);
                *p += &*v;
            }
        }
        let err = denoising_error(probe.view(), data.view(), &params)?;
        if !err.is_finite() {
            return Err(Error::Numeric(format!("autoencoder diverged at epoch {}", epoch + 1)));
        }
        history.push(err);
    }
    Ok((params, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdaeReport {
    /// Per-layer, per-epoch denoising reconstruction error.
    pub pretrain: Vec<Vec<f64>>,
    pub finetune: TrainReport,
}

/// Greedy layerwise pretraining followed by supervised fine-tuning of a
/// classifier on the deepest representation.
pub fn train_sdae(
    x: &Array2<f64>,
    labels: &[usize],
    scheme: Scheme,
    input_kind: InputKind,
    config: &SdaeConfig,
) -> Result<(DbnModel, SdaeReport)> {
    config.validate()?;
    if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain("autoencoder inputs must lie in [0, 1]".into()));
    }
    let mut rng = rng_from_seed(config.seed);
    let mut input = x.clone();
    let mut hidden = Vec::with_capacity(config.layer_sizes.len());
    let mut pretrain = Vec::with_capacity(config.layer_sizes.len());
    for &width in &config.layer_sizes {
        let (params, history) = pretrain_layer(&input, width, config, &mut rng)?;
        input = encode_batch(input.view(), &params)?;
        hidden.push(params.encoder_layer());
        pretrain.push(history);
    }
    let mut model = dbn::init_classifier(&[], input.ncols(), scheme, input_kind, config.seed.wrapping_add(1))?;
    model.kind = ModelKind::Sdae;
    model.network = Network::new(hidden, model.network.head)?;
    let (model, finetune) = dbn::finetune(&model, x, labels, &config.finetune, config.seed.wrapping_add(2))?;
    Ok((model, SdaeReport { pretrain, finetune }))
}
