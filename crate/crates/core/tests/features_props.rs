mod common;

use common::{feature_oracle, random_patch, rel_diff, rng};
use proptest::prelude::*;
use satpipe::features::{extract, extract_batch, FeatureConfig, Feature, FEATURE_NAMES};
use satpipe::patchio::{Dataset, Patch, Scheme};

#[test]
fn oracle_agrees_on_odd_geometries_and_levels() {
    let mut rng = rng(12);
    for (w, h, levels) in [(5, 3, 2), (7, 7, 16), (2, 9, 5), (28, 28, 32)] {
        let config = FeatureConfig { levels, ..FeatureConfig::default() };
        for _ in 0..5 {
            let patch = random_patch(&mut rng, w, h);
            let got = extract(&patch, &config).unwrap();
            for ((name, expected), &value) in feature_oracle(&patch, levels as u32, config.epsilon).iter().zip(got.as_slice()) {
                assert!(rel_diff(value, *expected) <= 1e-9, "{w}×{h} L={levels} {name}: {value} vs {expected}");
            }
        }
    }
}

#[test]
fn golden_two_tone_patch() {
    // Left half pure red (255,0,0), right half grey 51; NIR 102 everywhere.
    let (w, h) = (4, 2);
    let mut data = vec![0u8; 4 * w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let (r, g, b) = if x < 2 { (255, 0, 0) } else { (51, 51, 51) };
            data[i] = r;
            data[w * h + i] = g;
            data[2 * w * h + i] = b;
            data[3 * w * h + i] = 102;
        }
    }
    let v = extract(&Patch::new(w, h, data).unwrap(), &FeatureConfig::default()).unwrap();
    // hue 0 everywhere; saturation 1 on the left, 0 on the right
    assert_eq!(v.get(Feature::HMean), 0.0);
    assert_eq!(v.get(Feature::HStd), 0.0);
    assert_eq!(v.get(Feature::SMean), 0.5);
    // intensity 1/3 and 1/5 → bins 2 and 1 (1-based 3 and 2); horizontal pairs:
    // per row (3,3), (3,2), (2,2) counted both ways → p(3,3)=p(2,2)=1/3, p(3,2)=p(2,3)=1/6
    assert!((v.get(Feature::ICcmMean) - 2.5).abs() < 1e-15);
    let asm = 2.0 * (1.0f64 / 9.0) + 2.0 * (1.0 / 36.0);
    assert!((v.get(Feature::ICcmSecondMoment) - asm).abs() < 1e-15);
    assert!((v.get(Feature::ICcmCovariance) - 1.0 / 12.0).abs() < 1e-15);
    assert!((v.get(Feature::IMean) - (1.0 / 3.0 + 0.2) / 2.0).abs() < 1e-15);
    assert!((v.get(Feature::NirMean) - 0.4).abs() < 1e-15);
    assert_eq!(v.get(Feature::NirStd), 0.0);
    // NDVI: left (0.4−1)/(1.4), right (0.4−0.2)/0.6
    let ndvi = ((0.4 - 1.0) / 1.4 + (0.4 - 0.2) / 0.6) / 2.0;
    assert!((v.get(Feature::Ndvi) - ndvi).abs() < 1e-12);
}

#[test]
fn single_patch_batch_matches_extract() {
    let patch = random_patch(&mut rng(2), 28, 28);
    let data = Dataset::new(Scheme::Sat4, vec![patch.clone()], vec![1]).unwrap();
    let config = FeatureConfig::default();
    let m = extract_batch(&data, &config, Some(2)).unwrap();
    assert_eq!(m.dim(), (1, FEATURE_NAMES.len()));
    assert_eq!(m.row(0).to_vec(), extract(&patch, &config).unwrap().as_slice().to_vec());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn features_are_finite_and_indices_bounded(bytes in prop::collection::vec(any::<u8>(), 4 * 6 * 5)) {
        let v = extract(&Patch::new(6, 5, bytes).unwrap(), &FeatureConfig::default()).unwrap();
        prop_assert!(v.as_slice().iter().all(|x| x.is_finite()));
        for f in [Feature::Ndvi, Feature::Arvi] {
            prop_assert!((-1.0..=1.0).contains(&v.get(f)));
        }
        prop_assert!(v.get(Feature::HMean) >= 0.0 && v.get(Feature::HMean) < 1.0);
    }

    #[test]
    fn constant_patch_has_zero_dispersion(r: u8, g: u8, b: u8, n: u8) {
        let mut data = Vec::new();
        for v in [r, g, b, n] {
            data.extend(std::iter::repeat_n(v, 28 * 28));
        }
        let v = extract(&Patch::new(28, 28, data).unwrap(), &FeatureConfig::default()).unwrap();
        for f in [Feature::HStd, Feature::IStd, Feature::IVariance, Feature::NirStd, Feature::HCcmSosvh, Feature::ICcmCovariance, Feature::Dct] {
            prop_assert_eq!(v.get(f), 0.0, "{:?}", f);
        }
    }
}
