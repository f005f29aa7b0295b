//! Trains the stacked denoising autoencoder baseline and prints the
//! per-layer reconstruction history and test accuracy.
//!
//! `cargo run --release --example sdae_baseline -- [features|raw] [patches_per_class] [seed] [learning_rate] [momentum]`

use satpipe::dbn::evaluate;
use satpipe::features::FeatureConfig;
use satpipe::normalize::NormalizationMode;
use satpipe::patchio::{generate_synthetic, shuffle_split, SyntheticSpec};
use satpipe::pipeline;
use satpipe::sdae::SdaeConfig;

fn main() -> satpipe::Result<()> {
    let mut args = std::env::args().skip(1);
    let input = args.next().unwrap_or_else(|| "features".into());
    let per_class: usize = args.next().map_or(300, |s| s.parse().expect("patches per class"));
    let seed: u64 = args.next().map_or(5, |s| s.parse().expect("seed"));
    let lr_arg = args.next();
    let momentum_arg = args.next();

    let data = generate_synthetic(&SyntheticSpec::texture_preset(per_class), seed)?;
    let (train, test) = shuffle_split(&data, 5.0 / 6.0, seed)?;
    let inputs = match input.as_str() {
        "raw" => pipeline::pixel_inputs(&train, &test),
        _ => pipeline::feature_inputs(&train, &test, &FeatureConfig::default(), NormalizationMode::Separate, None)?,
    };

    let defaults = pipeline::sdae_config(inputs.kind, SdaeConfig::default().layer_sizes, seed);
    let config = SdaeConfig {
        learning_rate: lr_arg.map_or(defaults.learning_rate, |s| s.parse().expect("learning rate")),
        momentum: momentum_arg.map_or(defaults.momentum, |s| s.parse().expect("momentum")),
        ..defaults
    };
    let t = std::time::Instant::now();
    let (model, report) = pipeline::train_sdae_on(&inputs, &train, &config)?;
    for (i, history) in report.pretrain.iter().enumerate() {
        let shown: Vec<String> = history.iter().step_by(5).map(|e| format!("{e:.5}")).collect();
        let worst_rise = history.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
        println!("layer {} reconstruction: {} (largest epoch-over-epoch ratio {worst_rise:.3})", i + 1, shown.join(" "));
    }
    let eval = evaluate(&model, &inputs.test, test.labels())?;
    println!(
        "{input}: test accuracy {:.2}% after {} fine-tuning epochs ({:.1?})",
        100.0 * eval.accuracy,
        report.finetune.epochs.len(),
        t.elapsed()
    );
    Ok(())
}
