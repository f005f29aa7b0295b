mod common;

use common::{blobs, rng};
use ndarray::Array2;
use rand::Rng;
use satpipe::dbn::{evaluate, InputKind};
use satpipe::network::FinetuneConfig;
use satpipe::patchio::Scheme;
use satpipe::sdae::{pretrain_layer, train_sdae, SdaeConfig};

fn config(layers: Vec<usize>) -> SdaeConfig {
    SdaeConfig {
        layer_sizes: layers,
        finetune: FinetuneConfig { max_finetune_epochs: 300, batch_size: 20, ..FinetuneConfig::default() },
        seed: 1,
        ..SdaeConfig::default()
    }
}

#[test]
fn identity_rows_are_reconstructed() {
    let data = Array2::<f64>::eye(10);
    let config = SdaeConfig { corruption_fraction: 0.0, learning_rate: 0.5, momentum: 0.5, epochs: 500, ..config(vec![10]) };
    let (_, history) = pretrain_layer(&data, 10, &config, &mut rng(1)).unwrap();
    let last = *history.last().unwrap();
    assert!(last < 1e-2, "reconstruction error {last}");
}

#[test]
fn reconstruction_error_descends_on_random_data() {
    let mut rng = rng(2);
    let data = Array2::from_shape_simple_fn((80, 12), || rng.random::<f64>());
    let config = SdaeConfig { epochs: 30, ..config(vec![6]) };
    let (_, history) = pretrain_layer(&data, 6, &config, &mut rng).unwrap();
    assert_eq!(history.len(), 30);
    assert!(history.last().unwrap() <= history.first().unwrap(), "{history:?}");
}

#[test]
fn separable_blobs_reach_99_percent() {
    let (x, labels) = blobs(&mut rng(3), 4, 150, 8, 0.1);
    let (test, train): (Vec<usize>, Vec<usize>) = (0..x.nrows()).partition(|i| i % 4 == 0);
    let pick = |rows: &[usize]| (x.select(ndarray::Axis(0), rows), rows.iter().map(|&i| labels[i]).collect::<Vec<_>>());
    let ((xt, lt), (xv, lv)) = (pick(&train), pick(&test));
    let (model, report) = train_sdae(&xt, &lt, Scheme::Sat4, InputKind::Custom, &config(vec![16, 16])).unwrap();
    assert_eq!(report.pretrain.len(), 2);
    let acc = evaluate(&model, &xv, &lv).unwrap().accuracy;
    assert!(acc >= 0.99, "accuracy {acc}");
}

#[test]
fn empty_stack_trains_the_head_alone() {
    let (x, labels) = blobs(&mut rng(4), 2, 60, 3, 0.1);
    let scheme = Scheme::from_class_count(2).unwrap();
    let (model, report) = train_sdae(&x, &labels, scheme, InputKind::Custom, &config(vec![])).unwrap();
    assert!(report.pretrain.is_empty());
    assert!(model.network.hidden.is_empty());
    assert!(evaluate(&model, &x, &labels).unwrap().accuracy > 0.9);
}
