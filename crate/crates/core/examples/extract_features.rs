//! Extracts the 22 features of a few synthetic patches and prints them next
//! to their names, then the class means of the normalized features.
//!
//! `cargo run --example extract_features -- [patches_per_class] [seed]`

use ndarray::Axis;
use satpipe::features::{extract, extract_batch, FeatureConfig, FEATURE_NAMES};
use satpipe::normalize::NormalizationStats;
use satpipe::patchio::{generate_synthetic, SyntheticSpec};

fn main() -> satpipe::Result<()> {
    let mut args = std::env::args().skip(1);
    let per_class: usize = args.next().map_or(50, |s| s.parse().expect("patches per class"));
    let seed: u64 = args.next().map_or(3, |s| s.parse().expect("seed"));
    let data = generate_synthetic(&SyntheticSpec::texture_preset(per_class), seed)?;
    let config = FeatureConfig::default();

    let (patch, label) = data.iter().next().expect("non-empty");
    let v = extract(patch, &config)?;
    println!("first patch (class {label}):");
    for (feature, value) in v.iter() {
        println!("  {:<22} {value:>12.6}", feature.name());
    }

    let matrix = extract_batch(&data, &config, None)?;
    let normalized = NormalizationStats::fit(&matrix)?.apply(&matrix)?;
    let classes = data.scheme().class_count();
    print!("\n{:<22}", "normalized mean");
    for c in 0..classes {
        print!(" {:>8}", format!("class {c}"));
    }
    println!();
    for (j, name) in FEATURE_NAMES.iter().enumerate() {
        print!("{name:<22}");
        for c in 0..classes {
            let rows: Vec<usize> = (0..data.len()).filter(|&i| data.labels()[i] == c).collect();
            let col = normalized.column(j);
            let mean = rows.iter().map(|&i| col[i]).sum::<f64>() / rows.len() as f64;
            print!(" {mean:>8.4}");
        }
        println!();
    }
    println!("\n{} rows × {} columns", normalized.len_of(Axis(0)), normalized.len_of(Axis(1)));
    Ok(())
}
