//! Diagnostics: the distribution separability criterion and feature ranking,
//! separability of layer activations, intrinsic dimension, and the relative
//! volume of the hypersphere inscribed in a hypercube.
//!
//! # Distribution separability
//!
//! For one scalar feature and classes `c = 1..K` with class-conditional mean
//! `μ_c` and population standard deviation `σ_c`:
//!
//! ```text
//! δ̄_mean = mean over unordered pairs (a, b) of |μ_a − μ_b|
//! δ̄_σ    = mean over classes of σ_c
//! D_s    = δ̄_mean / δ̄_σ
//! ```
//!
//! When `δ̄_σ` is below [`SEPARABILITY_EPSILON`], `D_s` is `+∞` if the means
//! differ and 0 if they coincide.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::dbn::DbnModel;
use crate::features::channel_stats;
use crate::{rng_from_seed, Error, Result};

pub const SEPARABILITY_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityReport {
    /// Class indices present in the labels, ascending.
    pub classes: Vec<usize>,
    pub class_means: Vec<f64>,
    pub class_stds: Vec<f64>,
    pub delta_mean: f64,
    pub delta_sigma: f64,
    pub d_s: f64,
}

fn separability_ratio(delta_mean: f64, delta_sigma: f64) -> f64 {
    if delta_sigma > SEPARABILITY_EPSILON {
        delta_mean / delta_sigma
    } else if delta_mean > SEPARABILITY_EPSILON {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Row indices grouped by class, ascending class order.
fn group_by_class(labels: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (row, &label) in labels.iter().enumerate() {
        groups.entry(label).or_default().push(row);
    }
    groups
}

fn column_report(column: ArrayView1<f64>, groups: &BTreeMap<usize, Vec<usize>>) -> SeparabilityReport {
    let mut class_means = Vec::with_capacity(groups.len());
    let mut class_stds = Vec::with_capacity(groups.len());
    let mut values = Vec::new();
    for rows in groups.values() {
        values.clear();
        values.extend(rows.iter().map(|&r| column[r]));
        let stats = channel_stats(&values);
        class_means.push(stats.mean);
        class_stds.push(stats.std);
    }
    let k = class_means.len();
    let mut pair_sum = 0.0;
    for a in 0..k {
        for b in a + 1..k {
            pair_sum += (class_means[a] - class_means[b]).abs();
        }
    }
    let delta_mean = pair_sum / (k * (k - 1) / 2) as f64;
    let delta_sigma = class_stds.iter().sum::<f64>() / k as f64;
    SeparabilityReport {
        classes: groups.keys().copied().collect(),
        class_means,
        class_stds,
        delta_mean,
        delta_sigma,
        d_s: separability_ratio(delta_mean, delta_sigma),
    }
}

fn checked_groups(values: &Array2<f64>, labels: &[usize]) -> Result<BTreeMap<usize, Vec<usize>>> {
    if values.nrows() != labels.len() {
        return Err(Error::Shape(format!("{} rows with {} labels", values.nrows(), labels.len())));
    }
    let groups = group_by_class(labels);
    if groups.len() < 2 {
        return Err(Error::ClassCount(groups.len()));
    }
    Ok(groups)
}

/// One report per column of `values`.
pub fn separability(values: &Array2<f64>, labels: &[usize]) -> Result<Vec<SeparabilityReport>> {
    let groups = checked_groups(values, labels)?;
    Ok(values.axis_iter(Axis(1)).map(|col| column_report(col, &groups)).collect())
}

/// Column averages of a set of separability reports, the shape of a
/// "distance between means / standard deviation" comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparabilitySummary {
    pub columns: usize,
    pub mean_delta_mean: f64,
    pub mean_delta_sigma: f64,
    /// Mean of the per-column `D_s`; `+∞` if any column is infinite.
    pub mean_d_s: f64,
}

pub fn summarize(reports: &[SeparabilityReport]) -> SeparabilitySummary {
    let n = reports.len().max(1) as f64;
    SeparabilitySummary {
        columns: reports.len(),
        mean_delta_mean: reports.iter().map(|r| r.delta_mean).sum::<f64>() / n,
        mean_delta_sigma: reports.iter().map(|r| r.delta_sigma).sum::<f64>() / n,
        mean_d_s: reports.iter().map(|r| r.d_s).sum::<f64>() / n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rank: usize,
    pub feature: String,
    pub delta_mean: f64,
    pub delta_sigma: f64,
    pub d_s: f64,
}

/// Features by descending `D_s`, ties broken by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub entries: Vec<RankEntry>,
}

impl FeatureRanking {
    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.feature.as_str()).collect()
    }

    /// CSV with columns `rank,feature,delta_mean,delta_sigma,d_s`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        for entry in &self.entries {
            writer.serialize(entry)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// JSON document; infinite `D_s` values are written as `null`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn rank_features<S: AsRef<str>>(values: &Array2<f64>, labels: &[usize], names: &[S]) -> Result<FeatureRanking> {
    if names.len() != values.ncols() {
        return Err(Error::Shape(format!("{} names for {} columns", names.len(), values.ncols())));
    }
    let reports = separability(values, labels)?;
    let mut entries: Vec<RankEntry> = reports
        .into_iter()
        .zip(names)
        .map(|(r, name)| RankEntry {
            rank: 0,
            feature: name.as_ref().to_string(),
            delta_mean: r.delta_mean,
            delta_sigma: r.delta_sigma,
            d_s: r.d_s,
        })
        .collect();
    entries.sort_by(|a, b| b.d_s.total_cmp(&a.d_s).then_with(|| a.feature.cmp(&b.feature)));
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    Ok(FeatureRanking { entries })
}

/// How a layer's activations are reduced before measuring separability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerReduction {
    /// One scalar per sample: the mean activation over the layer's units.
    #[default]
    SampleMean,
    /// `D_s` of every unit, averaged over units.
    UnitAverage,
}

/// `D_s` of each hidden layer's activations.
pub fn layer_separability(
    model: &DbnModel,
    data: &Array2<f64>,
    labels: &[usize],
    reduction: LayerReduction,
) -> Result<Vec<f64>> {
    let groups = checked_groups(data, labels)?;
    let acts = model.network.activations(data.view())?;
    let hidden = &acts[1..acts.len() - 1];
    Ok(hidden
        .iter()
        .map(|layer| match reduction {
            LayerReduction::SampleMean => {
                let means: Array1<f64> = layer.mean_axis(Axis(1)).expect("non-empty layer");
                column_report(means.view(), &groups).d_s
            }
            LayerReduction::UnitAverage => {
                let total: f64 = layer.axis_iter(Axis(1)).map(|col| column_report(col, &groups).d_s).sum();
                total / layer.ncols() as f64
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdConfig {
    /// Neighbours per point.
    pub k: usize,
    pub rounds: usize,
    /// Points drawn (without replacement) per round; capped at the number of
    /// distinct points.
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for IdConfig {
    fn default() -> Self {
        Self {
            k: 10,
            rounds: 10,
            sample_size: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdEstimate {
    pub dimension: f64,
    pub k: usize,
    /// Points per round.
    pub sample_size: usize,
    pub per_round: Vec<f64>,
    pub duplicates_dropped: usize,
}

fn distinct_rows(points: &Array2<f64>) -> (Array2<f64>, usize) {
    let mut seen = HashSet::with_capacity(points.nrows());
    let keep: Vec<usize> = points
        .rows()
        .into_iter()
        .enumerate()
        .filter(|(_, row)| seen.insert(row.iter().map(|v| v.to_bits()).collect::<Vec<u64>>()))
        .map(|(i, _)| i)
        .collect();
    let dropped = points.nrows() - keep.len();
    if dropped == 0 {
        (points.clone(), 0)
    } else {
        (points.select(Axis(0), &keep), dropped)
    }
}

/// Maximum-likelihood estimate for one sample of points: the inverse of the
/// mean over points of `(1/(k−1))·Σ_{j<k} ln(T_k/T_j)`, where `T_j` is the
/// distance to the j-th nearest neighbour.
fn mle_dimension(sample: &Array2<f64>, k: usize) -> Result<f64> {
    let s = sample.nrows();
    let mean = sample.mean_axis(Axis(0)).expect("non-empty sample");
    let centered = sample - &mean;
    let gram = centered.dot(&centered.t());
    let norms: Vec<f64> = (0..s).map(|i| gram[[i, i]]).collect();
    let mut dist = Vec::with_capacity(s - 1);
    let mut inverse_sum = 0.0;
    for i in 0..s {
        dist.clear();
        dist.extend((0..s).filter(|&j| j != i).map(|j| (norms[i] + norms[j] - 2.0 * gram[[i, j]]).max(0.0)));
        dist.select_nth_unstable_by(k - 1, f64::total_cmp);
        let nearest = &mut dist[..k];
        nearest.sort_by(f64::total_cmp);
        let t_k = nearest[k - 1].sqrt();
        let mut acc = 0.0;
        for &d2 in &nearest[..k - 1] {
            let t = d2.sqrt();
            if t <= 0.0 || t_k <= 0.0 {
                return Err(Error::Numeric("zero nearest-neighbour distance".into()));
            }
            acc += (t_k / t).ln();
        }
        inverse_sum += acc / (k - 1) as f64;
    }
    let mean_inverse = inverse_sum / s as f64;
    if !(mean_inverse > 0.0) {
        return Err(Error::Numeric("degenerate neighbour distances".into()));
    }
    Ok(1.0 / mean_inverse)
}

/// k-nearest-neighbour maximum-likelihood intrinsic dimension, averaged over
/// `rounds` seeded random samples of `sample_size` points. Exact duplicate
/// rows are dropped first (with a warning). The estimate depends only on
/// distance ratios, so it is unchanged by rotation, translation and uniform
/// scaling.
pub fn intrinsic_dimension(points: &Array2<f64>, config: &IdConfig) -> Result<IdEstimate> {
    let k = config.k;
    if k < 2 {
        return Err(Error::Config("k must be ≥ 2".into()));
    }
    if config.rounds == 0 || config.sample_size == 0 {
        return Err(Error::Config("rounds and sample_size must be positive".into()));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("points must be finite".into()));
    }
    if points.nrows() <= k {
        return Err(Error::Size(format!("{} points for k = {k}", points.nrows())));
    }
    let (unique, dropped) = distinct_rows(points);
    if dropped > 0 {
        log::warn!("intrinsic dimension: dropped {dropped} duplicate points");
    }
    let n = unique.nrows();
    if n <= k {
        return Err(Error::Size(format!("{n} distinct points for k = {k}")));
    }
    let sample_size = config.sample_size.min(n);
    let mut rng = rng_from_seed(config.seed);
    let mut per_round = Vec::with_capacity(config.rounds);
    for _ in 0..config.rounds {
        let mut rows = index::sample(&mut rng, n, sample_size).into_vec();
        rows.sort_unstable();
        per_round.push(mle_dimension(&unique.select(Axis(0), &rows), k)?);
    }
    Ok(IdEstimate {
        dimension: per_round.iter().sum::<f64>() / per_round.len() as f64,
        k,
        sample_size,
        per_round,
        duplicates_dropped: dropped,
    })
}

/// `ln Γ(m/2)` for a positive integer `m`, summed from exact factors.
fn ln_gamma_half(m: usize) -> f64 {
    if m % 2 == 0 {
        // Γ(j) = (j−1)!
        (2..m / 2).map(|i| (i as f64).ln()).sum()
    } else {
        // Γ(j + ½) = Γ(½)·Π_{i<j}(i + ½)
        let base = 0.5 * std::f64::consts::PI.ln();
        base + (0..m / 2).map(|i| (i as f64 + 0.5).ln()).sum::<f64>()
    }
}

/// Volume of the unit-diameter `n`-ball relative to its bounding unit cube,
/// `π^{n/2} / (2^n Γ(n/2 + 1))`, evaluated in log space.
pub fn hypersphere_relative_volume(n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain("dimension must be ≥ 1".into()));
    }
    let nf = n as f64;
    let log_v = 0.5 * nf * std::f64::consts::PI.ln() - nf * std::f64::consts::LN_2 - ln_gamma_half(n + 2);
    Ok(log_v.exp())
}
