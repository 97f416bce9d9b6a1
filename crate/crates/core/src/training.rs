//! MSE training with Adam, mini-batching, early stopping, and a grid-search
//! harness.
//!
//! Targets are standardized before the loss is computed, so the reported MSE
//! values are in standardized glucose units. Mini-batches are reshuffled each
//! epoch with a seeded RNG; the last incomplete batch is kept. Early stopping
//! monitors validation MSE and restores the parameters from the best epoch.

use crate::error::{Error, Result};
use crate::models::{Model, TapedBaseline, TapedRetain};
use crate::pipeline::{SampleWindow, StandardizationParams};
use crate::tape::Tape;
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::time::Instant;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 50,
            max_epochs: 500,
            patience: 25,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0
            || self.batch_size == 0
            || self.max_epochs == 0
            || self.epsilon <= 0.0
            || !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
        {
            return Err(Error::Contract("training config out of range".into()));
        }
        if self.patience >= self.max_epochs {
            return Err(Error::Contract(format!(
                "patience {} must be below max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        Ok(())
    }
}

/// Losses are MSE in standardized glucose units. Wall time is excluded from
/// equality so identical seeds produce equal reports.
#[derive(Clone, Debug)]
pub struct TrainReport {
    pub train_mse: Vec<f64>,
    pub valid_mse: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub wall_seconds: f64,
}

impl PartialEq for TrainReport {
    fn eq(&self, other: &Self) -> bool {
        self.train_mse == other.train_mse
            && self.valid_mse == other.valid_mse
            && self.best_epoch == other.best_epoch
            && self.stopped_epoch == other.stopped_epoch
    }
}

impl TrainReport {
    pub fn best_valid_mse(&self) -> f64 {
        self.valid_mse[self.best_epoch]
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "epoch,train_mse,valid_mse")?;
        for (i, (t, v)) in self.train_mse.iter().zip(&self.valid_mse).enumerate() {
            writeln!(out, "{},{:.12},{:.12}", i, t, v)?;
        }
        Ok(())
    }
}

fn model_tensors(model: &Model) -> Vec<&Tensor> {
    match model {
        Model::Retain(p) => p.tensors(),
        Model::Baseline(p) => p.tensors(),
    }
}

fn model_tensors_mut(model: &mut Model) -> Vec<&mut Tensor> {
    match model {
        Model::Retain(p) => p.tensors_mut(),
        Model::Baseline(p) => p.tensors_mut(),
    }
}

/// Squared error and its gradient w.r.t. every parameter tensor for one
/// sample, on a fresh tape.
fn sample_loss_grads(model: &Model, x: &Tensor, y: f64) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let (pred, leaves) = match model {
        Model::Retain(p) => {
            let taped = TapedRetain::register(&mut tape, p);
            (taped.forward(&mut tape, x)?, taped.leaves())
        }
        Model::Baseline(p) => {
            let taped = TapedBaseline::register(&mut tape, p);
            (taped.forward(&mut tape, x)?, taped.leaves())
        }
    };
    let target = tape.leaf(Tensor::vector(vec![y]));
    let diff = tape.sub(pred, target)?;
    let loss = tape.dot(diff, diff)?;
    let loss_value = tape.value(loss).item()?;
    let grads = tape.backward(loss)?;
    let grad_tensors = leaves.iter().map(|&l| grads.wrt(l).clone()).collect();
    Ok((loss_value, grad_tensors))
}

struct Adam {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u32,
}

impl Adam {
    fn new(params: &[&Tensor]) -> Self {
        Adam {
            m: params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect(),
            t: 0,
        }
    }

    fn step(&mut self, params: Vec<&mut Tensor>, grads: &[Tensor], config: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - config.beta1.powi(self.t as i32);
        let bc2 = 1.0 - config.beta2.powi(self.t as i32);
        for (i, p) in params.into_iter().enumerate() {
            let g = grads[i].data();
            let m = self.m[i].data_mut();
            for (mk, gk) in m.iter_mut().zip(g) {
                *mk = config.beta1 * *mk + (1.0 - config.beta1) * gk;
            }
            let v = self.v[i].data_mut();
            for (vk, gk) in v.iter_mut().zip(g) {
                *vk = config.beta2 * *vk + (1.0 - config.beta2) * gk * gk;
            }
            let data = p.data_mut();
            for k in 0..data.len() {
                let m_hat = self.m[i].data()[k] / bc1;
                let v_hat = self.v[i].data()[k] / bc2;
                data[k] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
            }
        }
    }
}

fn mse_over(model: &Model, set: &[SampleWindow], std_params: &StandardizationParams) -> Result<f64> {
    let mut acc = 0.0;
    for w in set {
        let pred = model.predict(&w.x)?;
        let err = pred - std_params.standardize_target(w.y);
        acc += err * err;
    }
    Ok(acc / set.len() as f64)
}

/// Trains `model` in place; on return it holds the parameters from the best
/// validation epoch. Inputs must already be standardized; targets are
/// standardized internally from each window's mg/dL `y`.
pub fn train(
    model: &mut Model,
    train_set: &[SampleWindow],
    valid_set: &[SampleWindow],
    std_params: &StandardizationParams,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if train_set.is_empty() || valid_set.is_empty() {
        return Err(Error::Contract("empty train or validation set".into()));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(&model_tensors(model));
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut report = TrainReport {
        train_mse: Vec::new(),
        valid_mse: Vec::new(),
        best_epoch: 0,
        stopped_epoch: 0,
        wall_seconds: 0.0,
    };
    let mut best_model = model.clone();
    let mut best_valid = f64::INFINITY;
    let mut since_best = 0usize;

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut batch_grads: Option<Vec<Tensor>> = None;
            for &i in batch {
                let w = &train_set[i];
                let y = std_params.standardize_target(w.y);
                let (loss, grads) = sample_loss_grads(model, &w.x, y)?;
                epoch_loss += loss;
                match &mut batch_grads {
                    None => batch_grads = Some(grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&grads) {
                            let d = a.data_mut();
                            for (ak, gk) in d.iter_mut().zip(g.data()) {
                                *ak += gk;
                            }
                        }
                    }
                }
            }
            let mut grads = batch_grads.unwrap();
            let scale = 1.0 / batch.len() as f64;
            for g in &mut grads {
                for v in g.data_mut() {
                    *v *= scale;
                }
            }
            adam.step(model_tensors_mut(model), &grads, config);
        }
        let train_mse = epoch_loss / train_set.len() as f64;
        let valid_mse = mse_over(model, valid_set, std_params)?;
        if !train_mse.is_finite() || !valid_mse.is_finite() {
            return Err(Error::Numeric(format!(
                "loss diverged at epoch {}",
                epoch
            )));
        }
        report.train_mse.push(train_mse);
        report.valid_mse.push(valid_mse);
        report.stopped_epoch = epoch;
        if valid_mse < best_valid {
            best_valid = valid_mse;
            report.best_epoch = epoch;
            best_model = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > config.patience {
                break;
            }
        }
    }
    *model = best_model;
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

// --- grid search ---------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridCell {
    pub learning_rate: f64,
    pub batch_size: usize,
}

#[derive(Clone, Debug)]
pub struct GridResult {
    pub best: GridCell,
    /// One (cell, mean validation RMSE) entry per cell, in grid order.
    pub scores: Vec<(GridCell, f64)>,
}

/// Exhaustive search over learning rate x batch size. Each cell trains a
/// fresh clone of `initial` on every (train, valid) fold and is scored by
/// the mean best validation RMSE across folds. Cells are visited with
/// learning rate as the outer axis; ties keep the first cell visited.
pub fn grid_search(
    initial: &Model,
    folds: &[(Vec<SampleWindow>, Vec<SampleWindow>, StandardizationParams)],
    learning_rates: &[f64],
    batch_sizes: &[usize],
    base: &TrainConfig,
) -> Result<GridResult> {
    if learning_rates.is_empty() || batch_sizes.is_empty() {
        return Err(Error::Contract("empty hyperparameter grid".into()));
    }
    if folds.is_empty() {
        return Err(Error::Contract("grid search needs at least one fold".into()));
    }
    let mut scores = Vec::new();
    let mut best: Option<(GridCell, f64)> = None;
    for &lr in learning_rates {
        for &bs in batch_sizes {
            let cell = GridCell {
                learning_rate: lr,
                batch_size: bs,
            };
            let config = TrainConfig {
                learning_rate: lr,
                batch_size: bs,
                ..base.clone()
            };
            let mut acc = 0.0;
            for (train_set, valid_set, std_params) in folds {
                let mut model = initial.clone();
                let report = train(&mut model, train_set, valid_set, std_params, &config)?;
                acc += report.best_valid_mse().sqrt();
            }
            let score = acc / folds.len() as f64;
            scores.push((cell, score));
            if best.map_or(true, |(_, s)| score < s) {
                best = Some((cell, score));
            }
        }
    }
    Ok(GridResult {
        best: best.unwrap().0,
        scores,
    })
}
