//! Seed fallback through the environment. Kept in its own test binary since
//! it mutates process-wide state.

use satpipe::cli::{run, EXIT_OK, EXIT_USAGE, SEED_ENV};

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let hypersphere = || run(["satpipe", "hypersphere", "--max-n", "2", "--quiet", "--out-dir", &out]);
    let seed = || {
        let text = std::fs::read_to_string(dir.path().join("manifest-hypersphere.json")).unwrap();
        serde_json::from_str::<serde_json::Value>(&text).unwrap()["seed"].as_u64().unwrap()
    };

    std::env::remove_var(SEED_ENV);
    assert_eq!(hypersphere(), EXIT_OK);
    assert_eq!(seed(), 0);
    std::env::set_var(SEED_ENV, "13");
    assert_eq!(hypersphere(), EXIT_OK);
    assert_eq!(seed(), 13);
    assert_eq!(run(["satpipe", "hypersphere", "--seed", "2", "--quiet", "--out-dir", &out]), EXIT_OK);
    assert_eq!(seed(), 2);
    std::env::set_var(SEED_ENV, "not-a-number");
    assert_eq!(hypersphere(), EXIT_USAGE);
    std::env::remove_var(SEED_ENV);
}
