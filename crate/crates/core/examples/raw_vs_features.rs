//! Trains the feature-based DBN and the raw-pixel DBN on the same synthetic
//! dataset and compares separability, intrinsic dimension and accuracy.
//!
//! `cargo run --release --example raw_vs_features -- [patches_per_class] [seed]`

use std::time::Instant;

use satpipe::analysis::{intrinsic_dimension, separability, summarize, IdConfig};
use satpipe::dbn::evaluate;
use satpipe::features::FeatureConfig;
use satpipe::normalize::NormalizationMode;
use satpipe::patchio::{generate_synthetic, shuffle_split, SyntheticSpec};
use satpipe::pipeline;

fn main() -> satpipe::Result<()> {
    let mut args = std::env::args().skip(1);
    let per_class: usize = args.next().map_or(1500, |s| s.parse().expect("patches per class"));
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed"));

    let data = generate_synthetic(&SyntheticSpec::texture_preset(per_class), seed)?;
    let (train, test) = shuffle_split(&data, 5.0 / 6.0, seed)?;
    println!("train {} / test {}", train.len(), test.len());

    let t = Instant::now();
    let feats = pipeline::feature_inputs(&train, &test, &FeatureConfig::default(), NormalizationMode::Separate, None)?;
    let pixels = pipeline::pixel_inputs(&train, &test);
    println!("inputs ready in {:.1?}", t.elapsed());

    let f_sep = summarize(&separability(&feats.train, train.labels())?);
    let p_sep = summarize(&separability(&pixels.train, train.labels())?);
    println!("features: δ̄_mean {:.4} δ̄_σ {:.4} D_s {:.4}", f_sep.mean_delta_mean, f_sep.mean_delta_sigma, f_sep.mean_d_s);
    println!("pixels:   δ̄_mean {:.4} δ̄_σ {:.4} D_s {:.4}", p_sep.mean_delta_mean, p_sep.mean_delta_sigma, p_sep.mean_d_s);

    let t = Instant::now();
    let id_config = IdConfig { seed, ..IdConfig::default() };
    let id_f = intrinsic_dimension(&feats.train, &id_config)?;
    let id_p = intrinsic_dimension(&pixels.train, &id_config)?;
    println!("intrinsic dimension: features {:.2}, pixels {:.2} ({:.1?})", id_f.dimension, id_p.dimension, t.elapsed());

    let t = Instant::now();
    let (deepsat, report) = pipeline::train_dbn_on(&feats, &train, &pipeline::deepsat_config(seed))?;
    let acc = evaluate(&deepsat, &feats.test, test.labels())?.accuracy;
    println!(
        "features + DBN 50×2: test accuracy {:.2}% (best epoch {}, {:.1?})",
        100.0 * acc,
        report.finetune.best_epoch,
        t.elapsed()
    );

    let t = Instant::now();
    let (raw, report) = pipeline::train_dbn_on(&pixels, &train, &pipeline::raw_dbn_config(seed))?;
    let acc_raw = evaluate(&raw, &pixels.test, test.labels())?.accuracy;
    println!(
        "raw pixels + DBN 100×3: test accuracy {:.2}% (best epoch {}, {:.1?})",
        100.0 * acc_raw,
        report.finetune.best_epoch,
        t.elapsed()
    );
    Ok(())
}
