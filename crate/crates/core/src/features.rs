//! Handcrafted patch features: HSI conversion, per-channel statistics,
//! co-occurrence (GLCM) statistics on quantized H, S and I planes, vegetation
//! indices and a DCT texture summary.
//!
//! [`extract`] produces the 22-feature [`FeatureVector`], ordered by
//! decreasing separability on SAT-6 (see [`Feature::ALL`]).

use std::f64::consts::{PI, TAU};
use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::patchio::{Band, Dataset, Patch};
use crate::{Error, Result};

pub const FEATURE_COUNT: usize = 22;

/// The 22 features, in vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    ICcmMean,
    HCcmSosvh,
    HCcmAutoc,
    SCcmMean,
    HCcmMean,
    Sr,
    SCcmSecondMoment,
    ICcmSecondMoment,
    ISecondMoment,
    IVariance,
    NirStd,
    IStd,
    HStd,
    HMean,
    IMean,
    SMean,
    ICcmCovariance,
    NirMean,
    Arvi,
    Ndvi,
    Dct,
    Evi,
}

impl Feature {
    pub const ALL: [Feature; FEATURE_COUNT] = [
        Feature::ICcmMean,
        Feature::HCcmSosvh,
        Feature::HCcmAutoc,
        Feature::SCcmMean,
        Feature::HCcmMean,
        Feature::Sr,
        Feature::SCcmSecondMoment,
        Feature::ICcmSecondMoment,
        Feature::ISecondMoment,
        Feature::IVariance,
        Feature::NirStd,
        Feature::IStd,
        Feature::HStd,
        Feature::HMean,
        Feature::IMean,
        Feature::SMean,
        Feature::ICcmCovariance,
        Feature::NirMean,
        Feature::Arvi,
        Feature::Ndvi,
        Feature::Dct,
        Feature::Evi,
    ];

    pub fn name(self) -> &'static str {
        FEATURE_NAMES[self as usize]
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "i_ccm_mean",
    "h_ccm_sosvh",
    "h_ccm_autoc",
    "s_ccm_mean",
    "h_ccm_mean",
    "sr",
    "s_ccm_second_moment",
    "i_ccm_second_moment",
    "i_second_moment",
    "i_variance",
    "nir_std",
    "i_std",
    "h_std",
    "h_mean",
    "i_mean",
    "s_mean",
    "i_ccm_covariance",
    "nir_mean",
    "arvi",
    "ndvi",
    "dct",
    "evi",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn get(&self, feature: Feature) -> f64 {
        self.0[feature as usize]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = (Feature, f64)> + '_ {
        Feature::ALL.iter().map(move |&f| (f, self.0[f as usize]))
    }
}

/// EVI coefficients `G·(NIR−Red)/(NIR + c_red·Red − c_blue·Blue + L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EviCoefficients {
    pub gain: f64,
    pub c_red: f64,
    pub c_blue: f64,
    pub soil: f64,
}

impl Default for EviCoefficients {
    fn default() -> Self {
        Self {
            gain: 2.5,
            c_red: 6.0,
            c_blue: 7.5,
            soil: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Quantization levels for the co-occurrence matrices.
    pub levels: usize,
    /// Pixel displacements `(dy, dx)`; each is accumulated together with its
    /// negation.
    pub offsets: Vec<(i32, i32)>,
    pub evi: EviCoefficients,
    /// Guard for ratio denominators.
    pub epsilon: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            levels: 8,
            offsets: vec![(0, 1)],
            evi: EviCoefficients::default(),
            epsilon: 1e-12,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::Config(format!("levels must be ≥ 2, got {}", self.levels)));
        }
        if self.offsets.is_empty() {
            return Err(Error::Config("at least one co-occurrence offset is required".into()));
        }
        if self.offsets.contains(&(0, 0)) {
            return Err(Error::Config("co-occurrence offset (0, 0) is not allowed".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Per-pixel planes scaled to [0,1]. Hue is stored as a fraction of a turn.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPlanes {
    pub width: usize,
    pub height: usize,
    pub hue: Vec<f64>,
    pub saturation: Vec<f64>,
    pub intensity: Vec<f64>,
    pub nir: Vec<f64>,
    pub red: Vec<f64>,
    pub green: Vec<f64>,
    pub blue: Vec<f64>,
}

/// HSI of one byte-valued RGB pixel.
///
/// `I = (r+g+b)/3`, `S = 1 − 3·min(r,g,b)/(r+g+b)` (0 for black), and hue from
/// the arccos form as a fraction of a full turn in [0,1), 0 for grey pixels.
/// The arithmetic runs on the integer byte values so grey pixels give exact
/// zeros.
pub fn hsi_from_bytes(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let (ri, gi, bi) = (r as i32, g as i32, b as i32);
    let sum = ri + gi + bi;
    let intensity = sum as f64 / 765.0;
    let saturation = if sum == 0 {
        0.0
    } else {
        1.0 - (3 * ri.min(gi).min(bi)) as f64 / sum as f64
    };
    let num = 0.5 * ((ri - gi) + (ri - bi)) as f64;
    let den_sq = ((ri - gi) * (ri - gi) + (ri - bi) * (gi - bi)) as f64;
    let hue = if den_sq <= 0.0 {
        0.0
    } else {
        let theta = (num / den_sq.sqrt()).clamp(-1.0, 1.0).acos();
        let angle = if bi <= gi { theta } else { TAU - theta };
        let turn = angle / TAU;
        if turn >= 1.0 {
            0.0
        } else {
            turn
        }
    };
    (hue, saturation, intensity)
}

pub fn rgb_to_hsi(patch: &Patch) -> ScaledPlanes {
    let n = patch.pixel_count();
    let (red, green, blue, nir) = (
        patch.plane(Band::Red),
        patch.plane(Band::Green),
        patch.plane(Band::Blue),
        patch.plane(Band::Nir),
    );
    let mut planes = ScaledPlanes {
        width: patch.width(),
        height: patch.height(),
        hue: Vec::with_capacity(n),
        saturation: Vec::with_capacity(n),
        intensity: Vec::with_capacity(n),
        nir: nir.iter().map(|&v| v as f64 / 255.0).collect(),
        red: red.iter().map(|&v| v as f64 / 255.0).collect(),
        green: green.iter().map(|&v| v as f64 / 255.0).collect(),
        blue: blue.iter().map(|&v| v as f64 / 255.0).collect(),
    };
    for i in 0..n {
        let (h, s, v) = hsi_from_bytes(red[i], green[i], blue[i]);
        planes.hue.push(h);
        planes.saturation.push(s);
        planes.intensity.push(v);
    }
    planes
}

/// Slack added before flooring in [`quantize`]. Byte-derived values that
/// sit exactly on a bin edge (saturation 3/5 with 5 levels, say) can land a
/// rounding error below it; values off an edge are much farther away.
pub const QUANTIZE_SLACK: f64 = 1e-9;

/// Uniform binning of [0,1] values: `min(floor(v·L), L−1)`.
pub fn quantize(plane: &[f64], levels: usize) -> Vec<usize> {
    plane
        .iter()
        .map(|&v| ((v * levels as f64 + QUANTIZE_SLACK).floor().max(0.0) as usize).min(levels - 1))
        .collect()
}

/// Normalized symmetric co-occurrence matrix of a quantized plane.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceMatrix {
    levels: usize,
    cells: Vec<f64>,
}

impl CooccurrenceMatrix {
    pub fn levels(&self) -> usize {
        self.levels
    }

    /// `p(i, j)` with 0-based bin indices.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.levels + j]
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    /// Builds a matrix from explicit cells (row-major), normalizing to sum 1.
    pub fn from_cells(levels: usize, cells: Vec<f64>) -> Result<Self> {
        if cells.len() != levels * levels {
            return Err(Error::Shape(format!(
                "{} cells for {levels} levels",
                cells.len()
            )));
        }
        let total: f64 = cells.iter().sum();
        if !(total > 0.0) || cells.iter().any(|&c| c < 0.0) {
            return Err(Error::Domain("co-occurrence cells must be non-negative with positive sum".into()));
        }
        Ok(Self {
            levels,
            cells: cells.into_iter().map(|c| c / total).collect(),
        })
    }
}

pub fn cooccurrence(
    qplane: &[usize],
    width: usize,
    height: usize,
    config: &FeatureConfig,
) -> Result<CooccurrenceMatrix> {
    let levels = config.levels;
    if qplane.len() != width * height {
        return Err(Error::Shape(format!(
            "plane of {} values for {width}×{height}",
            qplane.len()
        )));
    }
    if let Some(&bad) = qplane.iter().find(|&&q| q >= levels) {
        return Err(Error::Domain(format!("bin {bad} ≥ {levels} levels")));
    }
    let mut counts = vec![0u64; levels * levels];
    for &(dy, dx) in &config.offsets {
        let (ady, adx) = (dy.unsigned_abs() as usize, dx.unsigned_abs() as usize);
        if ady >= height || adx >= width {
            return Err(Error::Geometry(format!(
                "offset ({dy}, {dx}) reaches beyond a {width}×{height} plane"
            )));
        }
        for y in 0..height {
            let ny = y as i64 + dy as i64;
            if ny < 0 || ny >= height as i64 {
                continue;
            }
            for x in 0..width {
                let nx = x as i64 + dx as i64;
                if nx < 0 || nx >= width as i64 {
                    continue;
                }
                let a = qplane[y * width + x];
                let b = qplane[ny as usize * width + nx as usize];
                counts[a * levels + b] += 1;
                counts[b * levels + a] += 1;
            }
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Geometry("no in-bounds pixel pairs".into()));
    }
    let total = total as f64;
    Ok(CooccurrenceMatrix {
        levels,
        cells: counts.into_iter().map(|c| c as f64 / total).collect(),
    })
}

/// Haralick-style statistics used by the feature vector. Bins are indexed
/// from 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcmStats {
    pub mean: f64,
    pub autoc: f64,
    pub sosvh: f64,
    pub second_moment: f64,
    pub covariance: f64,
}

pub fn ccm_stats(ccm: &CooccurrenceMatrix) -> CcmStats {
    let l = ccm.levels;
    let (mut mu_x, mut mu_y, mut autoc, mut second_moment) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..l {
        for j in 0..l {
            let p = ccm.cells[i * l + j];
            let (fi, fj) = ((i + 1) as f64, (j + 1) as f64);
            mu_x += fi * p;
            mu_y += fj * p;
            autoc += fi * fj * p;
            second_moment += p * p;
        }
    }
    let (mut sosvh, mut covariance) = (0.0, 0.0);
    for i in 0..l {
        for j in 0..l {
            let p = ccm.cells[i * l + j];
            let di = (i + 1) as f64 - mu_x;
            let dj = (j + 1) as f64 - mu_y;
            sosvh += di * di * p;
            covariance += di * dj * p;
        }
    }
    CcmStats {
        mean: mu_x,
        autoc,
        sosvh,
        second_moment,
        covariance,
    }
}

/// Co-occurrence statistics outside the 22-feature vector, available for
/// ranking experiments over a wider candidate pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcmExtras {
    pub entropy: f64,
    pub homogeneity: f64,
    pub contrast: f64,
    pub max_probability: f64,
}

pub fn ccm_extras(ccm: &CooccurrenceMatrix) -> CcmExtras {
    let l = ccm.levels;
    let mut extras = CcmExtras {
        entropy: 0.0,
        homogeneity: 0.0,
        contrast: 0.0,
        max_probability: 0.0,
    };
    for i in 0..l {
        for j in 0..l {
            let p = ccm.cells[i * l + j];
            let d = i as f64 - j as f64;
            if p > 0.0 {
                extras.entropy -= p * p.ln();
            }
            extras.homogeneity += p / (1.0 + d * d);
            extras.contrast += d * d * p;
            extras.max_probability = extras.max_probability.max(p);
        }
    }
    extras
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats {
    pub mean: f64,
    pub std: f64,
    pub variance: f64,
    pub second_moment: f64,
}

/// Population statistics. The variance is accumulated on values shifted by
/// the first sample, which makes it exactly 0 on constant planes.
pub fn channel_stats(plane: &[f64]) -> ChannelStats {
    let n = plane.len() as f64;
    let shift = plane.first().copied().unwrap_or(0.0);
    let shifted_mean = plane.iter().map(|&x| x - shift).sum::<f64>() / n;
    let variance = plane
        .iter()
        .map(|&x| {
            let d = x - shift - shifted_mean;
            d * d
        })
        .sum::<f64>()
        / n;
    ChannelStats {
        mean: shift + shifted_mean,
        std: variance.sqrt(),
        variance,
        second_moment: plane.iter().map(|&x| x * x).sum::<f64>() / n,
    }
}

fn guarded_ratio(num: f64, den: f64, epsilon: f64) -> f64 {
    if den.abs() < epsilon {
        num / epsilon
    } else {
        num / den
    }
}

fn pixel_mean(n: usize, f: impl Fn(usize) -> f64) -> f64 {
    (0..n).map(f).sum::<f64>() / n as f64
}

/// Patch-mean of `(NIR − Red)/(NIR + Red)`.
pub fn ndvi(planes: &ScaledPlanes, epsilon: f64) -> f64 {
    pixel_mean(planes.nir.len(), |i| {
        let (nir, red) = (planes.nir[i], planes.red[i]);
        guarded_ratio(nir - red, nir + red, epsilon)
    })
}

/// Patch-mean of the enhanced vegetation index.
pub fn evi(planes: &ScaledPlanes, coeffs: &EviCoefficients, epsilon: f64) -> f64 {
    pixel_mean(planes.nir.len(), |i| {
        let (nir, red, blue) = (planes.nir[i], planes.red[i], planes.blue[i]);
        coeffs.gain
            * guarded_ratio(
                nir - red,
                nir + coeffs.c_red * red - coeffs.c_blue * blue + coeffs.soil,
                epsilon,
            )
    })
}

/// Patch-mean of `(NIR − (2·Red − Blue)) / (NIR + (2·Red + Blue))`.
///
/// Note the denominator carries `+Blue`; the more common ARVI form uses
/// `2·Red − Blue` in both places. The form here keeps the value in [−1, 1].
pub fn arvi(planes: &ScaledPlanes, epsilon: f64) -> f64 {
    pixel_mean(planes.nir.len(), |i| {
        let (nir, red, blue) = (planes.nir[i], planes.red[i], planes.blue[i]);
        guarded_ratio(nir - (2.0 * red - blue), nir + (2.0 * red + blue), epsilon)
    })
}

/// Patch-mean of `NIR / (Red + ε)`.
pub fn simple_ratio(planes: &ScaledPlanes, epsilon: f64) -> f64 {
    pixel_mean(planes.nir.len(), |i| planes.nir[i] / (planes.red[i] + epsilon))
}

/// Orthonormal DCT-II basis: `basis[k][n] = α(k)·cos(π(2n+1)k / 2N)`.
pub fn dct_basis(n: usize) -> Array2<f64> {
    let scale0 = (1.0 / n as f64).sqrt();
    let scale = (2.0 / n as f64).sqrt();
    Array2::from_shape_fn((n, n), |(k, i)| {
        let alpha = if k == 0 { scale0 } else { scale };
        alpha * (PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos()
    })
}

/// Orthonormal 2-D DCT-II of a row-major `height × width` plane.
pub fn dct2(plane: &[f64], width: usize, height: usize) -> Array2<f64> {
    let x = Array2::from_shape_vec((height, width), plane.to_vec()).expect("plane geometry");
    let rows = dct_basis(height);
    let cols = dct_basis(width);
    rows.dot(&x).dot(&cols.t())
}

/// Mean absolute DCT-II coefficient, excluding the DC term.
///
/// The plane mean only feeds the DC coefficient, so it is removed before the
/// transform; constant planes then give exactly 0.
pub fn dct_feature(plane: &[f64], width: usize, height: usize) -> f64 {
    let count = width * height;
    if count <= 1 {
        return 0.0;
    }
    let mean = channel_stats(plane).mean;
    let centered: Vec<f64> = plane.iter().map(|&v| v - mean).collect();
    let coeffs = dct2(&centered, width, height);
    let total: f64 = coeffs.iter().skip(1).map(|c| c.abs()).sum();
    total / (count - 1) as f64
}

fn plane_ccm(plane: &[f64], planes: &ScaledPlanes, config: &FeatureConfig) -> Result<CooccurrenceMatrix> {
    cooccurrence(&quantize(plane, config.levels), planes.width, planes.height, config)
}

pub fn extract(patch: &Patch, config: &FeatureConfig) -> Result<FeatureVector> {
    config.validate()?;
    let planes = rgb_to_hsi(patch);
    let h_ccm = ccm_stats(&plane_ccm(&planes.hue, &planes, config)?);
    let s_ccm = ccm_stats(&plane_ccm(&planes.saturation, &planes, config)?);
    let i_ccm = ccm_stats(&plane_ccm(&planes.intensity, &planes, config)?);
    let h = channel_stats(&planes.hue);
    let s = channel_stats(&planes.saturation);
    let i = channel_stats(&planes.intensity);
    let nir = channel_stats(&planes.nir);
    let eps = config.epsilon;

    let values = [
        i_ccm.mean,
        h_ccm.sosvh,
        h_ccm.autoc,
        s_ccm.mean,
        h_ccm.mean,
        simple_ratio(&planes, eps),
        s_ccm.second_moment,
        i_ccm.second_moment,
        i.second_moment,
        i.variance,
        nir.std,
        i.std,
        h.std,
        h.mean,
        i.mean,
        s.mean,
        i_ccm.covariance,
        nir.mean,
        arvi(&planes, eps),
        ndvi(&planes, eps),
        dct_feature(&planes.intensity, planes.width, planes.height),
        evi(&planes, &config.evi, eps),
    ];
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("feature {} is not finite", FEATURE_NAMES[pos])));
    }
    Ok(FeatureVector(values))
}

/// Named candidate pool: the 22 features followed by the extra co-occurrence
/// statistics of H, S, I and the NIR co-occurrence matrix.
pub fn extract_candidates(patch: &Patch, config: &FeatureConfig) -> Result<Vec<(String, f64)>> {
    let mut out: Vec<(String, f64)> = extract(patch, config)?
        .iter()
        .map(|(f, v)| (f.name().to_string(), v))
        .collect();
    let planes = rgb_to_hsi(patch);
    for (prefix, plane) in [
        ("h", &planes.hue),
        ("s", &planes.saturation),
        ("i", &planes.intensity),
        ("nir", &planes.nir),
    ] {
        let ccm = plane_ccm(plane, &planes, config)?;
        let extras = ccm_extras(&ccm);
        out.push((format!("{prefix}_ccm_entropy"), extras.entropy));
        out.push((format!("{prefix}_ccm_homogeneity"), extras.homogeneity));
        out.push((format!("{prefix}_ccm_contrast"), extras.contrast));
        out.push((format!("{prefix}_ccm_max_probability"), extras.max_probability));
        if prefix == "nir" {
            let stats = ccm_stats(&ccm);
            out.push(("nir_ccm_mean".into(), stats.mean));
            out.push(("nir_ccm_sosvh".into(), stats.sosvh));
        }
    }
    Ok(out)
}

/// Extracts every patch into an `n × 22` matrix. `workers` caps the thread
/// count (`None` uses the global pool); the output does not depend on it.
pub fn extract_batch(dataset: &Dataset, config: &FeatureConfig, workers: Option<usize>) -> Result<Array2<f64>> {
    if dataset.is_empty() {
        return Err(Error::Size("cannot extract features from an empty dataset".into()));
    }
    config.validate()?;
    let run = || -> Result<Vec<FeatureVector>> {
        dataset
            .patches()
            .par_iter()
            .map(|p| extract(p, config))
            .collect()
    };
    let rows = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let mut out = Array2::zeros((rows.len(), FEATURE_COUNT));
    for (mut dst, fv) in out.rows_mut().into_iter().zip(&rows) {
        dst.assign(&ndarray::ArrayView1::from(fv.as_slice()));
    }
    Ok(out)
}

/// Writes `label` plus the 22 named columns, full precision.
pub fn write_feature_csv<W: Write>(out: W, matrix: &Array2<f64>, labels: &[usize]) -> Result<()> {
    if matrix.nrows() != labels.len() || matrix.ncols() != FEATURE_COUNT {
        return Err(Error::Shape(format!(
            "feature matrix {:?} with {} labels",
            matrix.dim(),
            labels.len()
        )));
    }
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["label"];
    header.extend(FEATURE_NAMES);
    writer.write_record(&header)?;
    for (row, label) in matrix.rows().into_iter().zip(labels) {
        let mut record = vec![label.to_string()];
        record.extend(row.iter().map(|v| v.to_string()));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a feature CSV written by [`write_feature_csv`].
pub fn read_feature_csv<R: std::io::Read>(input: R) -> Result<(Array2<f64>, Vec<usize>)> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    let expected: Vec<&str> = std::iter::once("label").chain(FEATURE_NAMES).collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Format("feature CSV header does not match the 22 feature names".into()));
    }
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record?;
        labels.push(
            record[0]
                .parse()
                .map_err(|_| Error::Format(format!("invalid label {:?}", &record[0])))?,
        );
        for field in record.iter().skip(1) {
            values.push(
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("invalid value {field:?}")))?,
            );
        }
    }
    let matrix = Array2::from_shape_vec((labels.len(), FEATURE_COUNT), values)
        .map_err(|e| Error::Shape(e.to_string()))?;
    Ok((matrix, labels))
}
