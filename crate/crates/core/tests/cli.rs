use std::fs;
use std::path::Path;

use satpipe::cli::{run, sha256_file, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use satpipe::dbn::{evaluate, ModelFile};
use satpipe::features::{extract_batch, FeatureConfig};
use satpipe::normalize::NormalizationStats;
use satpipe::patchio::{load_dataset, Format};

fn satpipe(out: &Path, args: &[&str]) -> i32 {
    let argv: Vec<String> = ["satpipe"]
        .iter()
        .chain(args)
        .map(|s| s.to_string())
        .chain(["--quiet".into(), "--out-dir".into(), out.display().to_string()])
        .collect();
    run(argv)
}

fn manifest(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("manifest-{name}.json"))).unwrap()).unwrap()
}

#[test]
fn gen_writes_dataset_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(satpipe(out, &["dataset", "gen", "--classes", "4", "--per-class", "100", "--out", "d.satbin", "--seed", "1"]), EXIT_OK);
    let data = load_dataset(out.join("d.satbin"), Format::Satbin).unwrap();
    assert_eq!(data.len(), 400);
    let m = manifest(out, "dataset-gen");
    assert_eq!(m["subcommand"], "dataset gen");
    assert_eq!(m["seed"], 1);
    assert_eq!(m["rng"], "ChaCha8");
    assert_eq!(m["outputs"][0]["sha256"], sha256_file(&out.join("d.satbin")).unwrap());

    assert_eq!(satpipe(out, &["dataset", "convert", "--input", out.join("d.satbin").to_str().unwrap(), "--from", "satbin", "--output", "d.csv", "--to", "csv"]), EXIT_OK);
    assert_eq!(load_dataset(out.join("d.csv"), Format::Csv).unwrap(), data);
    assert_eq!(satpipe(out, &["dataset", "split", "--data", out.join("d.satbin").to_str().unwrap(), "--fraction", "0.75"]), EXIT_OK);
    assert_eq!(load_dataset(out.join("train.satbin"), Format::Satbin).unwrap().len(), 300);
}

#[test]
fn train_then_eval_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let path = |name: &str| out.join(name).display().to_string();
    assert_eq!(satpipe(out, &["dataset", "gen", "--per-class", "40", "--out", "all.satbin", "--seed", "2"]), EXIT_OK);
    assert_eq!(satpipe(out, &["dataset", "split", "--data", &path("all.satbin"), "--seed", "2"]), EXIT_OK);
    let train = ["train", "deepsat", "--data", &path("train.satbin"), "--rbm-epochs", "5", "--max-finetune-epochs", "60", "--seed", "2"];
    assert_eq!(satpipe(out, &train), EXIT_OK);
    let first = fs::read(out.join("model.json")).unwrap();
    let report = fs::read(out.join("train_report.csv")).unwrap();
    assert_eq!(satpipe(out, &train), EXIT_OK);
    assert_eq!(fs::read(out.join("model.json")).unwrap(), first);
    assert_eq!(fs::read(out.join("train_report.csv")).unwrap(), report);

    for norm in ["separate", "train-stats"] {
        assert_eq!(satpipe(out, &["eval", "--model", &path("model.json"), "--data", &path("test.satbin"), "--norm", norm]), EXIT_OK);
        let eval: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("eval.json")).unwrap()).unwrap();

        let model = ModelFile::load(out.join("model.json")).unwrap().model;
        let test = load_dataset(out.join("test.satbin"), Format::Satbin).unwrap();
        let raw = extract_batch(&test, &FeatureConfig::default(), None).unwrap();
        let x = match norm {
            "separate" => NormalizationStats::fit(&raw).unwrap().apply(&raw).unwrap(),
            _ => model.normalization.as_ref().unwrap().apply(&raw).unwrap(),
        };
        let expected = evaluate(&model, &x, test.labels()).unwrap();
        assert_eq!(eval["accuracy"].as_f64().unwrap(), expected.accuracy, "{norm}");
    }

    assert_eq!(satpipe(out, &["layersep", "--model", &path("model.json"), "--data", &path("test.satbin")]), EXIT_OK);
    assert_eq!(fs::read_to_string(out.join("layersep.csv")).unwrap().lines().count(), 3);
}

#[test]
fn analysis_subcommands_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let data = out.join("d.satbin").display().to_string();
    assert_eq!(satpipe(out, &["dataset", "gen", "--per-class", "30", "--out", "d.satbin"]), EXIT_OK);
    assert_eq!(satpipe(out, &["rank", "--data", &data]), EXIT_OK);
    assert_eq!(fs::read_to_string(out.join("ranking.csv")).unwrap().lines().count(), 23);
    assert_eq!(satpipe(out, &["separability", "--data", &data, "--input", "raw"]), EXIT_OK);
    assert_eq!(fs::read_to_string(out.join("separability.csv")).unwrap().lines().count(), 1 + 3136);
    assert_eq!(satpipe(out, &["id", "--data", &data, "--rounds", "2"]), EXIT_OK);
    assert!(out.join("id.json").exists());
    assert_eq!(satpipe(out, &["hypersphere", "--max-n", "4"]), EXIT_OK);
    let rows = fs::read_to_string(out.join("hypersphere.csv")).unwrap();
    assert!(rows.lines().nth(2).unwrap().starts_with("2,0.785398163397448"));
}

#[test]
fn report_collects_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let path = |name: &str| out.join(name).display().to_string();
    assert_eq!(satpipe(out, &["dataset", "gen", "--per-class", "30", "--out", "all.satbin"]), EXIT_OK);
    assert_eq!(satpipe(out, &["dataset", "split", "--data", &path("all.satbin")]), EXIT_OK);
    let code = satpipe(out, &[
        "report", "--train", &path("train.satbin"), "--test", &path("test.satbin"),
        "--deepsat-grid", "8x1,8x2", "--raw-grid", "8x1", "--sdae-grid", "8x1",
        "--rbm-epochs", "2", "--sdae-epochs", "2", "--max-finetune-epochs", "3",
    ]);
    assert_eq!(code, EXIT_OK);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["accuracy"].as_array().unwrap().len(), 4);
    assert_eq!(report["layer_separability"].as_array().unwrap().len(), 5);
    assert!(report["intrinsic_dimension"]["features"].as_f64().unwrap() > 0.0);
    for name in ["accuracy.csv", "ranking.csv", "layersep.csv"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn config_file_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let cfg = out.join("run.cfg");
    fs::write(&cfg, "# defaults\nper-class = 5\nseed = 9\n").unwrap();
    let cfg = cfg.display().to_string();
    assert_eq!(satpipe(out, &["dataset", "gen", "--config", &cfg, "--out", "a.satbin"]), EXIT_OK);
    assert_eq!(manifest(out, "dataset-gen")["seed"], 9);
    assert_eq!(load_dataset(out.join("a.satbin"), Format::Satbin).unwrap().len(), 20);
    assert_eq!(satpipe(out, &["dataset", "gen", "--config", &cfg, "--seed", "4", "--out", "b.satbin"]), EXIT_OK);
    assert_eq!(manifest(out, "dataset-gen")["seed"], 4);


    fs::write(out.join("bad.cfg"), "no-such-flag = 1\n").unwrap();
    assert_eq!(satpipe(out, &["hypersphere", "--config", out.join("bad.cfg").to_str().unwrap()]), EXIT_USAGE);
    assert_eq!(satpipe(out, &["extract", "--bogus"]), EXIT_USAGE);
    assert_eq!(satpipe(out, &["extract", "--data", out.join("missing.satbin").to_str().unwrap()]), EXIT_DATA);
    fs::write(out.join("junk.satbin"), b"XATP\x01").unwrap();
    assert_eq!(satpipe(out, &["extract", "--data", out.join("junk.satbin").to_str().unwrap()]), EXIT_DATA);
}
