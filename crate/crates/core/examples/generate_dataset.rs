//! Generates a synthetic labeled dataset, writes it as SATBIN and CSV, and
//! reads both back.
//!
//! `cargo run --example generate_dataset -- [out_dir] [patches_per_class] [seed]`

use std::path::PathBuf;

use satpipe::patchio::{generate_synthetic, load_dataset, save_dataset, Format, SyntheticSpec};

fn main() -> satpipe::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "synthetic".into()));
    let per_class: usize = args.next().map_or(100, |s| s.parse().expect("patches per class"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));
    std::fs::create_dir_all(&dir)?;

    let data = generate_synthetic(&SyntheticSpec::texture_preset(per_class), seed)?;
    let bin = dir.join("patches.satbin");
    let csv = dir.join("patches.csv");
    save_dataset(&data, &bin, Format::Satbin)?;
    save_dataset(&data, &csv, Format::Csv)?;

    let from_bin = load_dataset(&bin, Format::Satbin)?;
    let from_csv = load_dataset(&csv, Format::Csv)?;
    assert_eq!(from_bin, data);
    assert_eq!(from_csv, data);
    println!(
        "{} patches of {:?}, {} classes -> {} ({} bytes) and {}",
        data.len(),
        data.geometry().expect("non-empty"),
        data.scheme().class_count(),
        bin.display(),
        std::fs::metadata(&bin)?.len(),
        csv.display()
    );
    for class in 0..data.scheme().class_count() {
        let n = data.labels().iter().filter(|&&l| l == class).count();
        println!("  class {class} ({}): {n}", data.scheme().class_name(class));
    }
    Ok(())
}
