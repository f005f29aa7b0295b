//! Trains the feature-based DBN, saves it as JSON, reloads it and checks the
//! reloaded model gives identical predictions.
//!
//! `cargo run --release --example train_deepsat -- [patches_per_class] [seed] [model.json]`

use satpipe::dbn::{classify_batch, evaluate, ModelFile};
use satpipe::features::FeatureConfig;
use satpipe::normalize::NormalizationMode;
use satpipe::patchio::{generate_synthetic, shuffle_split, SyntheticSpec};
use satpipe::pipeline;

fn main() -> satpipe::Result<()> {
    let mut args = std::env::args().skip(1);
    let per_class: usize = args.next().map_or(300, |s| s.parse().expect("patches per class"));
    let seed: u64 = args.next().map_or(11, |s| s.parse().expect("seed"));
    let path = args.next().unwrap_or_else(|| "deepsat_model.json".into());

    let data = generate_synthetic(&SyntheticSpec::texture_preset(per_class), seed)?;
    let (train, test) = shuffle_split(&data, 0.8, seed)?;
    let inputs = pipeline::feature_inputs(&train, &test, &FeatureConfig::default(), NormalizationMode::Separate, None)?;

    let config = pipeline::deepsat_config(seed);
    let (model, report) = pipeline::train_dbn_on(&inputs, &train, &config)?;
    for (i, errors) in report.pretrain.layers.iter().enumerate() {
        println!(
            "RBM {}: reconstruction error {:.5} -> {:.5}",
            i + 1,
            errors.first().copied().unwrap_or(f64::NAN),
            errors.last().copied().unwrap_or(f64::NAN)
        );
    }
    println!(
        "fine-tuning stopped after {} epochs, best {} (validation error {:.4})",
        report.finetune.epochs.len(),
        report.finetune.best_epoch,
        report.finetune.best_validation_error
    );

    let eval = evaluate(&model, &inputs.test, test.labels())?;
    println!("test accuracy {:.2}%", 100.0 * eval.accuracy);
    println!("confusion (rows = truth):");
    for row in &eval.confusion {
        println!("  {row:?}");
    }

    ModelFile::new(model.clone(), &config, seed)?.save(&path)?;
    let reloaded = ModelFile::load(&path)?.model;
    assert_eq!(classify_batch(&model, inputs.test.view())?, classify_batch(&reloaded, inputs.test.view())?);
    println!("saved and reloaded {path}");
    Ok(())
}
