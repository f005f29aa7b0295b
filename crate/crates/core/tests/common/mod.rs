//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the library's numerical code.

#![allow(dead_code)]

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use satpipe::dbn::RbmParams;
use satpipe::patchio::{Band, Patch};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_patch(rng: &mut impl Rng, width: usize, height: usize) -> Patch {
    let data = (0..4 * width * height).map(|_| rng.random::<u8>()).collect();
    Patch::new(width, height, data).unwrap()
}

/// Relative difference with a floor of 1 on the scale.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

// ---------------------------------------------------------------- features

struct Planes {
    w: usize,
    h: usize,
    /// byte triples for the HSI planes
    rgb: Vec<(u32, u32, u32)>,
    nir: Vec<f64>,
    red: Vec<f64>,
    blue: Vec<f64>,
}

fn planes(p: &Patch) -> Planes {
    let (w, h) = (p.width(), p.height());
    let mut out = Planes { w, h, rgb: vec![], nir: vec![], red: vec![], blue: vec![] };
    for y in 0..h {
        for x in 0..w {
            let (r, g, b, n) = (p.get(Band::Red, y, x), p.get(Band::Green, y, x), p.get(Band::Blue, y, x), p.get(Band::Nir, y, x));
            out.rgb.push((r as u32, g as u32, b as u32));
            out.nir.push(n as f64 / 255.0);
            out.red.push(r as f64 / 255.0);
            out.blue.push(b as f64 / 255.0);
        }
    }
    out
}

/// Hue as a fraction of a turn via the atan2 form of the HSI angle.
fn hue(r: u32, g: u32, b: u32) -> f64 {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    if r == g && g == b {
        return 0.0;
    }
    let mut a = (3f64.sqrt() * (g - b)).atan2(2.0 * r - g - b);
    if a < 0.0 {
        a += 2.0 * PI;
    }
    let t = a / (2.0 * PI);
    if t >= 1.0 { 0.0 } else { t }
}

fn saturation(r: u32, g: u32, b: u32) -> f64 {
    let sum = (r + g + b) as f64;
    if sum == 0.0 { 0.0 } else { 1.0 - 3.0 * r.min(g).min(b) as f64 / sum }
}

fn intensity(r: u32, g: u32, b: u32) -> f64 {
    (r + g + b) as f64 / 765.0
}

/// Exact bins for saturation and intensity from the integer ratios; hue is
/// binned from its float value.
fn bins(p: &Planes, levels: u32) -> [Vec<usize>; 3] {
    let mut out: [Vec<usize>; 3] = Default::default();
    for &(r, g, b) in &p.rgb {
        let hq = ((hue(r, g, b) * levels as f64).floor() as usize).min(levels as usize - 1);
        let sum = r + g + b;
        let sq = if sum == 0 { 0 } else { (levels * (sum - 3 * r.min(g).min(b)) / sum).min(levels - 1) };
        let iq = (levels * sum / 765).min(levels - 1);
        out[0].push(hq);
        out[1].push(sq as usize);
        out[2].push(iq as usize);
    }
    out
}

/// Symmetric horizontal-neighbour co-occurrence, counted pair by pair.
pub fn ccm(q: &[usize], w: usize, h: usize, levels: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; levels]; levels];
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            for x2 in [x.wrapping_sub(1), x + 1] {
                if x2 < w {
                    m[q[y * w + x]][q[y * w + x2]] += 1.0;
                    total += 1.0;
                }
            }
        }
    }
    for row in &mut m {
        for c in row.iter_mut() {
            *c /= total;
        }
    }
    m
}

/// (mean, sosvh, autoc, second moment, covariance) with 1-based bins.
fn haralick(m: &[Vec<f64>]) -> (f64, f64, f64, f64, f64) {
    let l = m.len();
    let idx = |i: usize| (i + 1) as f64;
    let mu_i: f64 = (0..l).flat_map(|i| (0..l).map(move |j| (i, j))).map(|(i, j)| idx(i) * m[i][j]).sum();
    let mu_j: f64 = (0..l).flat_map(|i| (0..l).map(move |j| (i, j))).map(|(i, j)| idx(j) * m[i][j]).sum();
    let (mut sosvh, mut autoc, mut asm, mut cov) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..l {
        for j in 0..l {
            let p = m[i][j];
            sosvh += (idx(i) - mu_i).powi(2) * p;
            autoc += idx(i) * idx(j) * p;
            asm += p * p;
            cov += (idx(i) - mu_i) * (idx(j) - mu_j) * p;
        }
    }
    (mu_i, sosvh, autoc, asm, cov)
}

fn moments(v: &[f64]) -> (f64, f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let second = v.iter().map(|x| x * x).sum::<f64>() / n;
    (mean, var, second)
}

fn guarded(num: f64, den: f64, eps: f64) -> f64 {
    num / if den.abs() < eps { eps } else { den }
}

/// Mean |DCT-II| over every coefficient except DC, by direct summation.
fn dct_mean_abs(v: &[f64], w: usize, h: usize) -> f64 {
    let alpha = |k: usize, n: usize| if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
    let cy: Vec<Vec<f64>> = (0..h).map(|k| (0..h).map(|y| ((2 * y + 1) as f64 * k as f64 * PI / (2 * h) as f64).cos()).collect()).collect();
    let cx: Vec<Vec<f64>> = (0..w).map(|k| (0..w).map(|x| ((2 * x + 1) as f64 * k as f64 * PI / (2 * w) as f64).cos()).collect()).collect();
    let mut total = 0.0;
    for u in 0..h {
        for k in 0..w {
            if u == 0 && k == 0 {
                continue;
            }
            let mut c = 0.0;
            for y in 0..h {
                for x in 0..w {
                    c += v[y * w + x] * cy[u][y] * cx[k][x];
                }
            }
            total += (alpha(u, h) * alpha(k, w) * c).abs();
        }
    }
    total / (w * h - 1) as f64
}

/// The 22 features in vector order, computed from their definitions.
pub fn feature_oracle(patch: &Patch, levels: u32, eps: f64) -> Vec<(&'static str, f64)> {
    let p = planes(patch);
    let n = p.rgb.len();
    let hue_v: Vec<f64> = p.rgb.iter().map(|&(r, g, b)| hue(r, g, b)).collect();
    let sat_v: Vec<f64> = p.rgb.iter().map(|&(r, g, b)| saturation(r, g, b)).collect();
    let int_v: Vec<f64> = p.rgb.iter().map(|&(r, g, b)| intensity(r, g, b)).collect();
    let [hq, sq, iq] = bins(&p, levels);
    let l = levels as usize;
    let h_ccm = haralick(&ccm(&hq, p.w, p.h, l));
    let s_ccm = haralick(&ccm(&sq, p.w, p.h, l));
    let i_ccm = haralick(&ccm(&iq, p.w, p.h, l));
    let (h_mean, h_var, _) = moments(&hue_v);
    let (s_mean, _, _) = moments(&sat_v);
    let (i_mean, i_var, i_second) = moments(&int_v);
    let (nir_mean, nir_var, _) = moments(&p.nir);
    let avg = |f: &dyn Fn(usize) -> f64| (0..n).map(f).sum::<f64>() / n as f64;
    let sr = avg(&|k| p.nir[k] / (p.red[k] + eps));
    let ndvi = avg(&|k| guarded(p.nir[k] - p.red[k], p.nir[k] + p.red[k], eps));
    let arvi = avg(&|k| {
        let rb = 2.0 * p.red[k];
        guarded(p.nir[k] - (rb - p.blue[k]), p.nir[k] + rb + p.blue[k], eps)
    });
    let evi = avg(&|k| 2.5 * guarded(p.nir[k] - p.red[k], p.nir[k] + 6.0 * p.red[k] - 7.5 * p.blue[k] + 1.0, eps));
    let dct = dct_mean_abs(&int_v, p.w, p.h);
    vec![
        ("i_ccm_mean", i_ccm.0),
        ("h_ccm_sosvh", h_ccm.1),
        ("h_ccm_autoc", h_ccm.2),
        ("s_ccm_mean", s_ccm.0),
        ("h_ccm_mean", h_ccm.0),
        ("sr", sr),
        ("s_ccm_second_moment", s_ccm.3),
        ("i_ccm_second_moment", i_ccm.3),
        ("i_second_moment", i_second),
        ("i_variance", i_var),
        ("nir_std", nir_var.sqrt()),
        ("i_std", i_var.sqrt()),
        ("h_std", h_var.sqrt()),
        ("h_mean", h_mean),
        ("i_mean", i_mean),
        ("s_mean", s_mean),
        ("i_ccm_covariance", i_ccm.4),
        ("nir_mean", nir_mean),
        ("arvi", arvi),
        ("ndvi", ndvi),
        ("dct", dct),
        ("evi", evi),
    ]
}

/// HSI-plane co-occurrence matrices (H, S, I) as the oracle sees them.
pub fn oracle_ccms(patch: &Patch, levels: u32) -> Vec<Vec<Vec<f64>>> {
    let p = planes(patch);
    bins(&p, levels).iter().map(|q| ccm(q, p.w, p.h, levels as usize)).collect()
}

// --------------------------------------------------------------------- RBM

fn states(bits: usize) -> Vec<Vec<f64>> {
    (0..1usize << bits).map(|s| (0..bits).map(|i| ((s >> i) & 1) as f64).collect()).collect()
}

fn energy(v: &[f64], h: &[f64], p: &RbmParams) -> f64 {
    let mut e = 0.0;
    for i in 0..v.len() {
        e -= p.visible_bias[i] * v[i];
        for j in 0..h.len() {
            e -= v[i] * p.weights[[i, j]] * h[j];
        }
    }
    for j in 0..h.len() {
        e -= p.hidden_bias[j] * h[j];
    }
    e
}

/// Joint distribution over all binary (v, h) pairs.
pub fn joint(p: &RbmParams) -> Vec<(Vec<f64>, Vec<f64>, f64)> {
    let (m, n) = p.weights.dim();
    let mut out = Vec::new();
    for v in states(m) {
        for h in states(n) {
            let w = (-energy(&v, &h, p)).exp();
            out.push((v.clone(), h, w));
        }
    }
    let z: f64 = out.iter().map(|t| t.2).sum();
    for t in &mut out {
        t.2 /= z;
    }
    out
}

/// `P(h_j = 1 | v)` by summing the joint over matching states.
pub fn exact_p_h_given_v(p: &RbmParams, v: &[f64]) -> Vec<f64> {
    let table = joint(p);
    let rows: Vec<_> = table.iter().filter(|t| t.0 == v).collect();
    let total: f64 = rows.iter().map(|t| t.2).sum();
    (0..p.weights.ncols()).map(|j| rows.iter().filter(|t| t.1[j] == 1.0).map(|t| t.2).sum::<f64>() / total).collect()
}

pub fn exact_p_v_given_h(p: &RbmParams, h: &[f64]) -> Vec<f64> {
    let table = joint(p);
    let rows: Vec<_> = table.iter().filter(|t| t.1 == h).collect();
    let total: f64 = rows.iter().map(|t| t.2).sum();
    (0..p.weights.nrows()).map(|i| rows.iter().filter(|t| t.0[i] == 1.0).map(|t| t.2).sum::<f64>() / total).collect()
}

/// Exact gradient of the mean log-likelihood of `data` (binary rows),
/// flattened as weights (row-major), visible bias, hidden bias.
pub fn exact_ll_gradient(p: &RbmParams, data: &Array2<f64>) -> Vec<f64> {
    let (m, n) = p.weights.dim();
    let table = joint(p);
    let mut pos = vec![0.0; m * n + m + n];
    for row in data.rows() {
        let v: Vec<f64> = row.to_vec();
        let ph = exact_p_h_given_v(p, &v);
        for i in 0..m {
            for j in 0..n {
                pos[i * n + j] += v[i] * ph[j];
            }
            pos[m * n + i] += v[i];
        }
        for j in 0..n {
            pos[m * n + m + j] += ph[j];
        }
    }
    let rows = data.nrows() as f64;
    let mut neg = vec![0.0; m * n + m + n];
    for (v, h, w) in &table {
        for i in 0..m {
            for j in 0..n {
                neg[i * n + j] += w * v[i] * h[j];
            }
            neg[m * n + i] += w * v[i];
        }
        for j in 0..n {
            neg[m * n + m + j] += w * h[j];
        }
    }
    pos.iter().zip(&neg).map(|(a, b)| a / rows - b).collect()
}

pub fn flatten(p: &RbmParams) -> Vec<f64> {
    p.weights.iter().chain(p.visible_bias.iter()).chain(p.hidden_bias.iter()).copied().collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub fn random_rbm(rng: &mut impl Rng, m: usize, n: usize, scale: f64) -> RbmParams {
    let mut g = || (rng.random::<f64>() - 0.5) * 2.0 * scale;
    RbmParams {
        weights: Array2::from_shape_simple_fn((m, n), &mut g),
        visible_bias: Array1::from_shape_simple_fn(m, &mut g),
        hidden_bias: Array1::from_shape_simple_fn(n, &mut g),
    }
}

// ------------------------------------------------------------- clustering

/// Gaussian blobs around well separated centres in [0,1]^dim.
pub fn blobs(rng: &mut impl Rng, classes: usize, per_class: usize, dim: usize, spread: f64) -> (Array2<f64>, Vec<usize>) {
    let centres: Vec<Vec<f64>> = (0..classes)
        .map(|c| (0..dim).map(|d| if (c + d) % classes == 0 { 0.8 } else { 0.2 }).collect())
        .collect();
    let mut x = Array2::zeros((classes * per_class, dim));
    let mut labels = Vec::new();
    for c in 0..classes {
        for k in 0..per_class {
            let row = c * per_class + k;
            for d in 0..dim {
                let noise: f64 = (rng.random::<f64>() - 0.5) * 2.0 * spread;
                x[[row, d]] = (centres[c][d] + noise).clamp(0.0, 1.0);
            }
            labels.push(c);
        }
    }
    (x, labels)
}
