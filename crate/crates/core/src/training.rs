//! Mini-batch SGD with momentum, weight decay and a cosine-annealed
//! learning rate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor};
use crate::data::Split;
use crate::error::{Error, Result};
use crate::models::Model;
use crate::rng::{stream, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    L1,
    CrossEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub loss: Loss,
    pub seed: u64,
}

impl TrainConfig {
    /// 300 epochs, batch 32, lr 0.01, momentum 0.99, weight decay 1e-6, L1.
    pub fn synthetic(seed: u64) -> Self {
        Self {
            epochs: 300,
            batch_size: 32,
            lr_max: 0.01,
            momentum: 0.99,
            weight_decay: 1e-6,
            loss: Loss::L1,
            seed,
        }
    }

    /// Classification preset: momentum 0.9, weight decay 1e-4, cross entropy.
    pub fn tabular(seed: u64) -> Self {
        Self {
            momentum: 0.9,
            weight_decay: 1e-4,
            loss: Loss::CrossEntropy,
            ..Self::synthetic(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be positive"));
        }
        if self.lr_max.is_nan()
            || self.lr_max < 0.0
            || !(0.0..1.0).contains(&self.momentum)
            || self.weight_decay.is_nan()
            || self.weight_decay < 0.0
        {
            return Err(Error::invalid(
                "learning rate, momentum or weight decay out of range",
            ));
        }
        Ok(())
    }
}

/// `lr_max * (1 + cos(pi * epoch / total)) / 2`.
pub fn cosine_lr(epoch: usize, total: usize, lr_max: f64) -> Result<f64> {
    if epoch >= total {
        return Err(Error::invalid(format!(
            "epoch {epoch} out of range for {total} epochs"
        )));
    }
    let lr = lr_max * (1.0 + (PI * epoch as f64 / total as f64).cos()) / 2.0;
    Ok(lr.max(0.0))
}

/// Per-parameter velocity buffers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizerState {
    velocity: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(shapes: &[usize]) -> Self {
        Self {
            velocity: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_model(model: &Model) -> Self {
        let sizes: Vec<usize> = model.parameters().iter().map(|t| t.numel()).collect();
        Self::new(&sizes)
    }

    pub fn velocity(&self) -> &[Vec<f64>] {
        &self.velocity
    }
}

/// `v <- momentum * v + (grad + weight_decay * param)`, `param <- param - lr * v`.
pub fn sgd_step(
    params: &mut [&mut Tensor],
    grads: &[&[f64]],
    state: &mut OptimizerState,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.velocity.len() {
        return Err(Error::LengthMismatch {
            expected: params.len(),
            got: grads.len().min(state.velocity.len()),
        });
    }
    for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut state.velocity) {
        if p.numel() != g.len() || v.len() != g.len() {
            return Err(Error::ShapeMismatch {
                op: "sgd_step",
                lhs: p.shape().to_vec(),
                rhs: vec![g.len()],
            });
        }
        for ((w, &gw), vw) in p.data_mut().iter_mut().zip(g.iter()).zip(v.iter_mut()) {
            *vw = momentum * *vw + (gw + weight_decay * *w);
            *w -= lr * *vw;
        }
    }
    Ok(())
}

/// Summary of the values an activation site receives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationStats {
    pub site: usize,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub below_minus_one: usize,
    pub above_plus_one: usize,
    /// Histogram edges span `[-range, range]`; out-of-range values land in
    /// the outer bins.
    pub range: f64,
    pub histogram: Vec<usize>,
}

impl ActivationStats {
    fn from_values(site: usize, values: &[f64], bins: usize, range: f64) -> Self {
        let mut histogram = vec![0; bins.max(1)];
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut below, mut above) = (0, 0);
        for &v in values {
            min = min.min(v);
            max = max.max(v);
            below += usize::from(v < -1.0);
            above += usize::from(v > 1.0);
            let pos = ((v + range) / (2.0 * range) * histogram.len() as f64).floor();
            let idx = pos.clamp(0.0, (histogram.len() - 1) as f64) as usize;
            histogram[idx] += 1;
        }
        Self {
            site,
            count: values.len(),
            min,
            max,
            below_minus_one: below,
            above_plus_one: above,
            range,
            histogram,
        }
    }

    /// Fraction of inputs outside `[-1, 1]`.
    pub fn tail_fraction(&self) -> f64 {
        (self.below_minus_one + self.above_plus_one) as f64 / self.count.max(1) as f64
    }
}

/// Records the polynomial-stage inputs of every activation site on `x`.
pub fn activation_input_stats(
    model: &Model,
    x: &Tensor,
    bins: usize,
    range: f64,
) -> Result<Vec<ActivationStats>> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let pass = model.forward(&mut tape, xv)?;
    Ok(pass
        .activation_inputs
        .iter()
        .enumerate()
        .map(|(site, v)| ActivationStats::from_values(site, tape.value(*v).data(), bins, range))
        .collect())
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Histogram bins for activation inputs captured after training; `None`
    /// disables the capture.
    pub activation_histogram_bins: Option<usize>,
    pub histogram_range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    /// Sample-weighted mean training loss per completed epoch.
    pub history: Vec<f64>,
    pub diverged: bool,
    /// Epoch in which a non-finite loss or parameter first appeared.
    pub diverged_at: Option<usize>,
    pub activation_stats: Option<Vec<ActivationStats>>,
}

fn batch_targets(split: &Split, rows: &[usize]) -> Split {
    split.select(rows)
}

fn labels_of(y: &Tensor) -> Result<Vec<usize>> {
    y.data()
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::invalid(format!(
                    "class label {v} is not a non-negative integer"
                )))
            }
        })
        .collect()
}

/// Trains `model` in place. Each epoch visits the rows of `train` in a
/// fresh permutation drawn from the shuffle substream of `config.seed`;
/// the last partial batch is kept. A non-finite loss or parameter stops
/// training and marks the outcome diverged.
pub fn train(
    model: &mut Model,
    train: &Split,
    config: &TrainConfig,
    options: &TrainOptions,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if train.dim() != model.spec().input_dim {
        return Err(Error::ShapeMismatch {
            op: "train",
            lhs: train.x.shape().to_vec(),
            rhs: vec![model.spec().input_dim],
        });
    }
    let mut rng = SeededRng::new(config.seed, stream::SHUFFLE);
    let mut state = OptimizerState::for_model(model);
    let mut history = Vec::with_capacity(config.epochs);
    let mut diverged_at = None;

    'epochs: for epoch in 0..config.epochs {
        let lr = cosine_lr(epoch, config.epochs, config.lr_max)?;
        let mut order: Vec<usize> = (0..train.len()).collect();
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for rows in order.chunks(config.batch_size) {
            let batch = batch_targets(train, rows);
            let mut tape = Tape::new();
            let xv = tape.constant(batch.x);
            let pass = model.forward(&mut tape, xv)?;
            let loss = match config.loss {
                Loss::L1 => {
                    let t = tape.constant(batch.y);
                    tape.l1_loss(pass.output, t)?
                }
                Loss::CrossEntropy => {
                    let labels = labels_of(&batch.y)?;
                    tape.cross_entropy(pass.output, &labels)?
                }
            };
            let value = tape.value(loss).item();
            if !value.is_finite() {
                diverged_at = Some(epoch);
                break 'epochs;
            }
            total += value * rows.len() as f64;
            tape.backward(loss)?;
            let grads: Vec<Vec<f64>> = pass
                .params
                .iter()
                .zip(model.parameters())
                .map(|(v, t)| {
                    tape.grad(*v)
                        .map(<[f64]>::to_vec)
                        .unwrap_or_else(|| vec![0.0; t.numel()])
                })
                .collect();
            let grad_refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
            let mut params = model.parameters_mut();
            sgd_step(
                &mut params,
                &grad_refs,
                &mut state,
                lr,
                config.momentum,
                config.weight_decay,
            )?;
            if params
                .iter()
                .any(|p| p.data().iter().any(|v| !v.is_finite()))
            {
                diverged_at = Some(epoch);
                break 'epochs;
            }
        }
        history.push(total / train.len() as f64);
    }

    let activation_stats = match (options.activation_histogram_bins, diverged_at) {
        (Some(bins), None) => {
            let range = if options.histogram_range > 0.0 {
                options.histogram_range
            } else {
                5.0
            };
            Some(activation_input_stats(model, &train.x, bins, range)?)
        }
        _ => None,
    };
    Ok(TrainOutcome {
        history,
        diverged: diverged_at.is_some(),
        diverged_at,
        activation_stats,
    })
}

/// Model outputs for every row of `x`, evaluated in chunks.
pub fn predict_batched(model: &Model, x: &Tensor) -> Result<Tensor> {
    const CHUNK: usize = 256;
    let d = x.cols();
    let rows = x.rows();
    let mut out = Vec::with_capacity(rows * model.spec().output_dim);
    for start in (0..rows).step_by(CHUNK) {
        let end = (start + CHUNK).min(rows);
        let chunk = Tensor::new(vec![end - start, d], x.data()[start * d..end * d].to_vec())?;
        out.extend_from_slice(model.predict(&chunk)?.data());
    }
    Tensor::new(vec![rows, model.spec().output_dim], out)
}

/// Root mean square error; NaN if any prediction is non-finite.
pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch {
            expected: target.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("rmse"));
    }
    if pred.iter().any(|p| !p.is_finite()) {
        return Ok(f64::NAN);
    }
    let mse = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / pred.len() as f64;
    Ok(mse.sqrt())
}

pub fn evaluate_rmse(model: &Model, test: &Split) -> Result<f64> {
    let pred = predict_batched(model, &test.x)?;
    rmse(pred.data(), test.y.data())
}
