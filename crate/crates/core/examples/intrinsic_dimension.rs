//! Intrinsic dimension of known manifolds and of the synthetic features and
//! pixels.
//!
//! `cargo run --release --example intrinsic_dimension -- [patches_per_class] [seed]`

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use satpipe::analysis::{intrinsic_dimension, IdConfig};
use satpipe::features::{extract_batch, FeatureConfig};
use satpipe::normalize::NormalizationStats;
use satpipe::patchio::{generate_synthetic, SyntheticSpec};

fn main() -> satpipe::Result<()> {
    let mut args = std::env::args().skip(1);
    let per_class: usize = args.next().map_or(250, |s| s.parse().expect("patches per class"));
    let seed: u64 = args.next().map_or(9, |s| s.parse().expect("seed"));
    let config = IdConfig { seed, ..IdConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // A 3-dimensional linear patch embedded in 12 ambient dimensions.
    let coords = Array2::from_shape_fn((1500, 3), |_| rng.random::<f64>());
    let basis = Array2::from_shape_fn((3, 12), |_| rng.random::<f64>() - 0.5);
    let flat = coords.dot(&basis);
    println!("3-d subspace in 12-d: {:.2}", intrinsic_dimension(&flat, &config)?.dimension);

    // A circle in 8 dimensions.
    let circle = Array2::from_shape_fn((1500, 8), |(i, j)| {
        let t = i as f64 * 0.0041887902;
        match j {
            0 => t.cos(),
            1 => t.sin(),
            _ => 0.0,
        }
    });
    println!("circle in 8-d: {:.2}", intrinsic_dimension(&circle, &config)?.dimension);

    let data = generate_synthetic(&SyntheticSpec::texture_preset(per_class), seed)?;
    let feats = extract_batch(&data, &FeatureConfig::default(), None)?;
    let feats = NormalizationStats::fit(&feats)?.apply(&feats)?;
    let est = intrinsic_dimension(&feats, &config)?;
    println!("22 features: {:.2} (per round {:?})", est.dimension, est.per_round.iter().map(|d| (d * 100.0).round() / 100.0).collect::<Vec<_>>());
    let pixels = intrinsic_dimension(&data.pixel_matrix(), &config)?;
    println!("{} raw pixel values: {:.2}", data.pixel_matrix().ncols(), pixels.dimension);
    Ok(())
}
