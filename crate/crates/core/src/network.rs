//! Sigmoid feed-forward network and its supervised training loop.
//!
//! The objective for a mini-batch is the sum-squared error against 1-of-K
//! targets plus an L2 penalty on every weight matrix (biases excluded):
//!
//! ```text
//! E = Σ_batch ½‖y − t‖² + ½·λ·Σ_layers ‖W‖²
//! ```
//!
//! Both the DBN and the SDAE classifiers are fine-tuned with this loop.

use std::io::Write;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::{rng_from_seed, Error, Result};

/// Logistic function, evaluated without overflow for any finite input.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Fully connected sigmoid layer; `weights` is `inputs × outputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn forward(&self, input: ArrayView2<f64>) -> Array2<f64> {
        let mut z = input.dot(&self.weights);
        z += &self.bias;
        z.mapv_inplace(sigmoid);
        z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub hidden: Vec<Dense>,
    pub head: Dense,
}

/// Gradient of the objective, one entry per layer (hidden layers then head).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGradient {
    pub layers: Vec<Dense>,
}

impl Network {
    pub fn new(hidden: Vec<Dense>, head: Dense) -> Result<Self> {
        let net = Self { hidden, head };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        let mut width = None;
        for (i, layer) in self.layers().enumerate() {
            if layer.bias.len() != layer.outputs() {
                return Err(Error::Shape(format!("layer {i}: bias length {} ≠ {}", layer.bias.len(), layer.outputs())));
            }
            if let Some(w) = width {
                if layer.inputs() != w {
                    return Err(Error::Shape(format!("layer {i} expects {} inputs, previous layer gives {w}", layer.inputs())));
                }
            }
            width = Some(layer.outputs());
        }
        Ok(())
    }

    pub fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.hidden.iter().chain(std::iter::once(&self.head))
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.hidden.iter_mut().chain(std::iter::once(&mut self.head))
    }

    pub fn input_width(&self) -> usize {
        self.hidden.first().unwrap_or(&self.head).inputs()
    }

    pub fn output_width(&self) -> usize {
        self.head.outputs()
    }

    fn check_input(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_width() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.input_width()
            )));
        }
        Ok(())
    }

    /// Activations of every layer: `[input, hidden_1, …, output]`.
    pub fn activations(&self, x: ArrayView2<f64>) -> Result<Vec<Array2<f64>>> {
        self.check_input(x)?;
        let mut acts = vec![x.to_owned()];
        for layer in self.layers() {
            let next = layer.forward(acts.last().expect("non-empty").view());
            acts.push(next);
        }
        Ok(acts)
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let mut a = x.to_owned();
        for layer in self.layers() {
            a = layer.forward(a.view());
        }
        Ok(a)
    }

    fn l2_term(&self, l2: f64) -> f64 {
        0.5 * l2 * self.layers().map(|l| l.weights.iter().map(|w| w * w).sum::<f64>()).sum::<f64>()
    }

    /// Objective value for a batch with one-hot `targets`.
    pub fn loss(&self, x: ArrayView2<f64>, targets: ArrayView2<f64>, l2: f64) -> Result<f64> {
        let y = self.forward(x)?;
        check_targets(&y, targets)?;
        Ok(0.5 * (&y - &targets).mapv(|d| d * d).sum() + self.l2_term(l2))
    }

    /// Objective value and its gradient by backpropagation.
    pub fn gradient(&self, x: ArrayView2<f64>, targets: ArrayView2<f64>, l2: f64) -> Result<(f64, NetworkGradient)> {
        let acts = self.activations(x)?;
        let y = acts.last().expect("output");
        check_targets(y, targets)?;
        let diff = y - &targets;
        let loss = 0.5 * diff.mapv(|d| d * d).sum() + self.l2_term(l2);

        let layers: Vec<&Dense> = self.layers().collect();
        let mut delta = diff * &y.mapv(|a| a * (1.0 - a));
        let mut grads = Vec::with_capacity(layers.len());
        for (l, layer) in layers.iter().enumerate().rev() {
            let input = &acts[l];
            let mut gw = input.t().dot(&delta);
            if l2 != 0.0 {
                gw.scaled_add(l2, &layer.weights);
            }
            let gb = delta.sum_axis(Axis(0));
            if l > 0 {
                let back = delta.dot(&layer.weights.t());
                delta = back * &input.mapv(|a| a * (1.0 - a));
            }
            grads.push(Dense { weights: gw, bias: gb });
        }
        grads.reverse();
        Ok((loss, NetworkGradient { layers: grads }))
    }
}

fn check_targets(y: &Array2<f64>, targets: ArrayView2<f64>) -> Result<()> {
    if y.dim() != targets.dim() {
        return Err(Error::Shape(format!("outputs {:?} vs targets {:?}", y.dim(), targets.dim())));
    }
    Ok(())
}

pub fn one_hot(labels: &[usize], classes: usize) -> Array2<f64> {
    let mut t = Array2::zeros((labels.len(), classes));
    for (i, &l) in labels.iter().enumerate() {
        t[[i, l]] = 1.0;
    }
    t
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Supervised training settings shared by the DBN and SDAE classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub finetune_learning_rate: f64,
    pub finetune_momentum: f64,
    pub max_finetune_epochs: usize,
    pub l2_coefficient: f64,
    pub validation_fraction: f64,
    pub early_stopping_patience: usize,
    pub batch_size: usize,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            finetune_learning_rate: 0.01,
            finetune_momentum: 0.5,
            max_finetune_epochs: 500,
            l2_coefficient: 1e-4,
            validation_fraction: 0.1,
            early_stopping_patience: 20,
            batch_size: 100,
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("finetune_learning_rate", self.finetune_learning_rate >= 0.0),
            ("finetune_momentum", (0.0..1.0).contains(&self.finetune_momentum)),
            ("max_finetune_epochs", self.max_finetune_epochs > 0),
            ("l2_coefficient", self.l2_coefficient >= 0.0),
            ("validation_fraction", self.validation_fraction > 0.0 && self.validation_fraction < 1.0),
            ("early_stopping_patience", self.early_stopping_patience > 0),
            ("batch_size", self.batch_size > 0),
        ];
        match positive.iter().find(|(_, ok)| !ok) {
            Some((name, _)) => Err(Error::Config(format!("{name} out of range"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Misclassification rate on the training portion.
    pub train_error: f64,
    /// Misclassification rate on the validation portion.
    pub validation_error: f64,
    /// Mean per-sample sum-squared error (without the L2 term).
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_validation_error: f64,
    pub train_size: usize,
    pub validation_size: usize,
    pub config: FinetuneConfig,
    pub seed: u64,
}

impl TrainReport {
    /// CSV with columns `epoch,train_error,validation_error,train_loss,validation_loss`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        for record in &self.epochs {
            writer.serialize(record)?;
        }
        writer.flush()?;
        Ok(())
    }
}

fn error_and_loss(net: &Network, x: ArrayView2<f64>, labels: &[usize]) -> Result<(f64, f64)> {
    let y = net.forward(x)?;
    let mut wrong = 0usize;
    let mut loss = 0.0;
    for (row, &label) in y.rows().into_iter().zip(labels) {
        if argmax(row.iter().copied()) != label {
            wrong += 1;
        }
        loss += row
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let d = v - if k == label { 1.0 } else { 0.0 };
                0.5 * d * d
            })
            .sum::<f64>();
    }
    let n = labels.len() as f64;
    Ok((wrong as f64 / n, loss / n))
}

fn select_rows(x: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

/// Mini-batch gradient descent with momentum on the sum-squared objective.
///
/// A seeded `validation_fraction` of the rows is held out (when that rounds
/// to zero rows, the training rows double as validation rows). After each
/// epoch the validation misclassification rate is measured, ties broken by
/// validation loss; the best parameters are returned. Training stops after
/// `early_stopping_patience` epochs without improvement or at
/// `max_finetune_epochs`.
pub fn train_classifier(
    network: &Network,
    x: &Array2<f64>,
    labels: &[usize],
    config: &FinetuneConfig,
    seed: u64,
) -> Result<(Network, TrainReport)> {
    config.validate()?;
    network.validate()?;
    let n = x.nrows();
    if n == 0 || n != labels.len() {
        return Err(Error::Shape(format!("{n} rows with {} labels", labels.len())));
    }
    let classes = network.output_width();
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Label { index: bad, class_count: classes });
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::DegenerateLabels);
    }
    if x.ncols() != network.input_width() {
        return Err(Error::Shape(format!("input has {} columns, network expects {}", x.ncols(), network.input_width())));
    }

    let mut rng = rng_from_seed(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let val_len = (config.validation_fraction * n as f64).floor() as usize;
    let (val_idx, train_idx) = if val_len == 0 || val_len == n {
        (order.clone(), order)
    } else {
        let (v, t) = order.split_at(val_len);
        (v.to_vec(), t.to_vec())
    };
    let train_x = select_rows(x, &train_idx);
    let train_y: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
    let val_x = select_rows(x, &val_idx);
    let val_y: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();
    let train_t = one_hot(&train_y, classes);

    let mut net = network.clone();
    let mut velocity: Vec<Dense> = net.layers().map(|l| Dense::zeros(l.inputs(), l.outputs())).collect();
    let mut best = (f64::INFINITY, f64::INFINITY);
    let mut best_net = net.clone();
    let mut best_epoch = 0;
    let mut epochs = Vec::new();
    let mut since_best = 0;
    let mut batch_order: Vec<usize> = (0..train_idx.len()).collect();
    let (lr, mom) = (config.finetune_learning_rate, config.finetune_momentum);

    for epoch in 1..=config.max_finetune_epochs {
        batch_order.shuffle(&mut rng);
        for chunk in batch_order.chunks(config.batch_size) {
            let bx = select_rows(&train_x, chunk);
            let bt = train_t.select(Axis(0), chunk);
            let (_, grad) = net.gradient(bx.view(), bt.view(), config.l2_coefficient)?;
            for ((layer, vel), g) in net.layers_mut().zip(velocity.iter_mut()).zip(&grad.layers) {
                vel.weights *= mom;
                vel.weights.scaled_add(-lr, &g.weights);
                vel.bias *= mom;
                vel.bias.scaled_add(-lr, &g.bias);
                layer.weights += &vel.weights;
                layer.bias += &vel.bias;
            }
        }
        let (train_error, train_loss) = error_and_loss(&net, train_x.view(), &train_y)?;
        let (validation_error, validation_loss) = error_and_loss(&net, val_x.view(), &val_y)?;
        if !(train_loss.is_finite() && validation_loss.is_finite()) {
            return Err(Error::Numeric(format!("non-finite loss at fine-tuning epoch {epoch}")));
        }
        epochs.push(EpochRecord { epoch, train_error, validation_error, train_loss, validation_loss });
        if (validation_error, validation_loss) < best {
            best = (validation_error, validation_loss);
            best_net = net.clone();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.early_stopping_patience {
                break;
            }
        }
    }

    let report = TrainReport {
        epochs,
        best_epoch,
        best_validation_error: best.0,
        train_size: train_idx.len(),
        validation_size: val_idx.len(),
        config: config.clone(),
        seed,
    };
    Ok((best_net, report))
}
