//! End-to-end helpers: turn datasets into network inputs and train the
//! three classifier families with their conventional architectures.

use ndarray::Array2;

use crate::dbn::{self, DbnModel, DbnTrainReport, InputKind, TrainConfig};
use crate::features::{extract_batch, FeatureConfig};
use crate::normalize::{normalize_pair, NormalizationMode, NormalizationStats};
use crate::patchio::Dataset;
use crate::sdae::{self, SdaeConfig, SdaeReport};
use crate::Result;

/// Network inputs for a train/test pair.
#[derive(Debug, Clone)]
pub struct PreparedInputs {
    pub kind: InputKind,
    pub train: Array2<f64>,
    pub test: Array2<f64>,
    /// Training feature statistics (feature inputs only).
    pub stats: Option<NormalizationStats>,
}

/// Extracts the 22 features from both datasets and min-max normalizes them.
pub fn feature_inputs(
    train: &Dataset,
    test: &Dataset,
    config: &FeatureConfig,
    mode: NormalizationMode,
    workers: Option<usize>,
) -> Result<PreparedInputs> {
    let train_raw = extract_batch(train, config, workers)?;
    let test_raw = extract_batch(test, config, workers)?;
    let (train, test, stats) = normalize_pair(&train_raw, &test_raw, mode)?;
    Ok(PreparedInputs {
        kind: InputKind::Features22,
        train,
        test,
        stats: Some(stats),
    })
}

/// Pixels scaled by 1/255.
pub fn pixel_inputs(train: &Dataset, test: &Dataset) -> PreparedInputs {
    PreparedInputs {
        kind: InputKind::RawPixels,
        train: train.pixel_matrix(),
        test: test.pixel_matrix(),
        stats: None,
    }
}

/// Two hidden layers of 50 on the 22 normalized features.
pub fn deepsat_config(seed: u64) -> TrainConfig {
    TrainConfig {
        layer_sizes: vec![50, 50],
        seed,
        ..TrainConfig::default()
    }
}

/// Three hidden layers of 100 on raw pixels.
pub fn raw_dbn_config(seed: u64) -> TrainConfig {
    TrainConfig {
        layer_sizes: vec![100, 100, 100],
        seed,
        ..TrainConfig::default()
    }
}

/// Stacked denoising autoencoder defaults for the given input kind.
pub fn sdae_config(kind: InputKind, layer_sizes: Vec<usize>, seed: u64) -> SdaeConfig {
    let defaults = SdaeConfig::default();
    SdaeConfig {
        layer_sizes,
        learning_rate: match kind {
            InputKind::RawPixels => sdae::RAW_PIXEL_LEARNING_RATE,
            _ => defaults.learning_rate,
        },
        seed,
        ..defaults
    }
}

pub fn train_dbn_on(
    inputs: &PreparedInputs,
    train: &Dataset,
    config: &TrainConfig,
) -> Result<(DbnModel, DbnTrainReport)> {
    let (mut model, report) = dbn::train_dbn(&inputs.train, train.labels(), train.scheme(), inputs.kind, config)?;
    model.normalization = inputs.stats.clone();
    Ok((model, report))
}

pub fn train_sdae_on(
    inputs: &PreparedInputs,
    train: &Dataset,
    config: &SdaeConfig,
) -> Result<(DbnModel, SdaeReport)> {
    let (mut model, report) = sdae::train_sdae(&inputs.train, train.labels(), train.scheme(), inputs.kind, config)?;
    model.normalization = inputs.stats.clone();
    Ok((model, report))
}
