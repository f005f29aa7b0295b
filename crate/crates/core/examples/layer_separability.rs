//! Distribution separability of each hidden layer's mean activation, for a
//! feature-based DBN and a raw-pixel DBN, before and after fine-tuning.
//!
//! `cargo run --release --example layer_separability -- [patches_per_class] [seed]`

use satpipe::analysis::{layer_separability, LayerReduction};
use satpipe::dbn::{init_classifier, pretrain};
use satpipe::features::FeatureConfig;
use satpipe::normalize::NormalizationMode;
use satpipe::patchio::{generate_synthetic, shuffle_split, SyntheticSpec};
use satpipe::pipeline::{self, PreparedInputs};

fn report(name: &str, inputs: &PreparedInputs, train: &satpipe::patchio::Dataset, config: &satpipe::dbn::TrainConfig) -> satpipe::Result<()> {
    let labels = train.labels();
    let (stack, _) = pretrain(&inputs.train, config)?;
    let pretrained = init_classifier(&stack, inputs.train.ncols(), train.scheme(), inputs.kind, config.seed)?;
    let (tuned, _) = pipeline::train_dbn_on(inputs, train, config)?;
    for reduction in [LayerReduction::SampleMean, LayerReduction::UnitAverage] {
        let before = layer_separability(&pretrained, &inputs.train, labels, reduction)?;
        let after = layer_separability(&tuned, &inputs.train, labels, reduction)?;
        println!("{name} ({reduction:?})");
        for (i, (b, a)) in before.iter().zip(&after).enumerate() {
            println!("  layer {}: pretrained {b:>9.4}  fine-tuned {a:>9.4}", i + 1);
        }
    }
    Ok(())
}

fn main() -> satpipe::Result<()> {
    let mut args = std::env::args().skip(1);
    let per_class: usize = args.next().map_or(250, |s| s.parse().expect("patches per class"));
    let seed: u64 = args.next().map_or(4, |s| s.parse().expect("seed"));
    let data = generate_synthetic(&SyntheticSpec::texture_preset(per_class), seed)?;
    let (train, test) = shuffle_split(&data, 0.8, seed)?;

    let feats = pipeline::feature_inputs(&train, &test, &FeatureConfig::default(), NormalizationMode::Separate, None)?;
    report("features + DBN 50×2", &feats, &train, &pipeline::deepsat_config(seed))?;
    let pixels = pipeline::pixel_inputs(&train, &test);
    let mut raw = pipeline::raw_dbn_config(seed);
    raw.finetune.max_finetune_epochs = 100;
    report("raw pixels + DBN 100×3", &pixels, &train, &raw)?;
    Ok(())
}
