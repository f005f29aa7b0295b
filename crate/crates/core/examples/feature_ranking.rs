//! Ranks the 22 features, and the wider candidate pool, by distribution
//! separability.
//!
//! `cargo run --release --example feature_ranking -- [patches_per_class] [seed]`

use ndarray::Array2;
use satpipe::analysis::rank_features;
use satpipe::features::{extract_batch, extract_candidates, FeatureConfig, FEATURE_NAMES};
use satpipe::patchio::{generate_synthetic, SyntheticSpec};

fn main() -> satpipe::Result<()> {
    let mut args = std::env::args().skip(1);
    let per_class: usize = args.next().map_or(200, |s| s.parse().expect("patches per class"));
    let seed: u64 = args.next().map_or(2, |s| s.parse().expect("seed"));
    let data = generate_synthetic(&SyntheticSpec::texture_preset(per_class), seed)?;
    let config = FeatureConfig::default();

    let matrix = extract_batch(&data, &config, None)?;
    let ranking = rank_features(&matrix, data.labels(), &FEATURE_NAMES)?;
    println!("{:>4} {:<22} {:>10} {:>10} {:>10}", "rank", "feature", "δ_mean", "δ_σ", "D_s");
    for e in &ranking.entries {
        println!("{:>4} {:<22} {:>10.4} {:>10.4} {:>10.3}", e.rank, e.feature, e.delta_mean, e.delta_sigma, e.d_s);
    }

    let rows = data
        .patches()
        .iter()
        .map(|p| extract_candidates(p, &config))
        .collect::<satpipe::Result<Vec<_>>>()?;
    let names: Vec<String> = rows[0].iter().map(|(n, _)| n.clone()).collect();
    let pool = Array2::from_shape_fn((rows.len(), names.len()), |(i, j)| rows[i][j].1);
    let pool_ranking = rank_features(&pool, data.labels(), &names)?;
    println!("\ncandidate pool of {}, top 10:", names.len());
    for e in pool_ranking.entries.iter().take(10) {
        println!("{:>4} {:<26} {:>10.3}", e.rank, e.feature, e.d_s);
    }
    Ok(())
}
