//! Cross-validated classification of generic numeric CSV tables.
//!
//! Class `1` is the positive class for sensitivity and specificity. Folds
//! are drawn over groups when a group column is given, so that no group
//! appears in both the training and test side of a fold.

use std::collections::BTreeSet;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::activations::{ActivationSpec, Variant};
use crate::autodiff::Tensor;
use crate::data::Split;
use crate::error::{Error, Result};
use crate::models::{Model, ModelSpec, SkipMode};
use crate::rng::{derive_seed, stream, SeededRng};
use crate::training::{predict_batched, train, Loss, TrainConfig, TrainOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabularConfig {
    pub label_column: String,
    pub group_column: Option<String>,
    pub folds: usize,
    pub activation: ActivationSpec,
    pub width: usize,
    pub blocks: usize,
    pub layers_per_block: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Z-score features with statistics of each training fold.
    pub standardize: bool,
}

impl Default for TabularConfig {
    fn default() -> Self {
        let t = TrainConfig::tabular(0);
        Self {
            label_column: "label".into(),
            group_column: None,
            folds: 10,
            activation: ActivationSpec::new(Variant::ClExtrapolate),
            width: 32,
            blocks: 2,
            layers_per_block: 2,
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr_max: t.lr_max,
            momentum: t.momentum,
            weight_decay: t.weight_decay,
            seed: 0,
            standardize: true,
        }
    }
}

impl TabularConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularData {
    pub features: Vec<String>,
    /// `rows × features`
    pub x: Tensor,
    pub labels: Vec<usize>,
    pub groups: Option<Vec<String>>,
}

impl TabularData {
    pub fn classes(&self) -> usize {
        self.labels.iter().max().map_or(2, |&m| (m + 1).max(2))
    }
}

/// Parses a headed CSV: the label column holds non-negative integers, the
/// optional group column arbitrary strings, every other column numbers.
pub fn read_tabular<R: Read>(input: R, config: &TabularConfig) -> Result<TabularData> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers()?.clone();
    let find = |name: &str| header.iter().position(|h| h == name);
    let label_at = find(&config.label_column)
        .ok_or_else(|| Error::Data(format!("missing label column '{}'", config.label_column)))?;
    let group_at = match &config.group_column {
        Some(g) => Some(find(g).ok_or_else(|| Error::Data(format!("missing group column '{g}'")))?),
        None => None,
    };
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&i| i != label_at && Some(i) != group_at)
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::Data("no feature columns".into()));
    }

    let mut x = Vec::new();
    let mut labels = Vec::new();
    let mut groups = group_at.map(|_| Vec::new());
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row + 2;
        let cell = |i: usize| record.get(i).unwrap_or("");
        for &i in &feature_cols {
            let v: f64 = cell(i).parse().map_err(|_| {
                Error::Data(format!(
                    "line {line}, column '{}': '{}' is not a number",
                    &header[i],
                    cell(i)
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "line {line}, column '{}': non-finite value",
                    &header[i]
                )));
            }
            x.push(v);
        }
        let label: usize = cell(label_at).parse().map_err(|_| {
            Error::Data(format!(
                "line {line}: label '{}' is not a non-negative integer",
                cell(label_at)
            ))
        })?;
        labels.push(label);
        if let (Some(g), Some(at)) = (groups.as_mut(), group_at) {
            g.push(cell(at).to_string());
        }
    }
    if labels.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }
    Ok(TabularData {
        features: feature_cols
            .iter()
            .map(|&i| header[i].to_string())
            .collect(),
        x: Tensor::new(vec![labels.len(), feature_cols.len()], x)?,
        labels,
        groups,
    })
}

/// Fold index per row. Distinct keys are shuffled and dealt round-robin to
/// `folds` folds, so rows sharing a key share a fold.
pub fn assign_folds(keys: &[String], folds: usize, seed: u64) -> Result<Vec<usize>> {
    let mut distinct: Vec<&String> = keys.iter().collect::<BTreeSet<_>>().into_iter().collect();
    if folds < 2 || distinct.len() < folds {
        return Err(Error::invalid(format!(
            "need at least 2 folds and one group per fold ({} groups, {folds} folds)",
            distinct.len()
        )));
    }
    SeededRng::new(seed, stream::SHUFFLE).shuffle(&mut distinct);
    Ok(keys
        .iter()
        .map(|k| distinct.iter().position(|d| *d == k).expect("key present") % folds)
        .collect())
}

/// Percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub micro_f1: f64,
}

impl Metrics {
    /// Sensitivity (specificity) is 0 when there are no positive (negative)
    /// rows.
    pub fn compute(pred: &[usize], truth: &[usize]) -> Self {
        let n = truth.len().max(1) as f64;
        let (mut tp, mut tn, mut pos, mut neg, mut correct) =
            (0usize, 0usize, 0usize, 0usize, 0usize);
        for (&p, &t) in pred.iter().zip(truth) {
            correct += usize::from(p == t);
            if t == 1 {
                pos += 1;
                tp += usize::from(p == 1);
            } else {
                neg += 1;
                tn += usize::from(p != 1);
            }
        }
        let ratio = |a: usize, b: usize| {
            if b == 0 {
                0.0
            } else {
                100.0 * a as f64 / b as f64
            }
        };
        // Micro-averaged over classes, every row contributes one TP or one
        // FP/FN pair, so micro-F1 equals accuracy for single-label data.
        let micro_tp = correct as f64;
        let micro_err = (truth.len() - correct) as f64;
        let micro_f1 = if truth.is_empty() {
            0.0
        } else {
            100.0 * 2.0 * micro_tp / (2.0 * micro_tp + 2.0 * micro_err)
        };
        Self {
            accuracy: 100.0 * correct as f64 / n,
            sensitivity: ratio(tp, pos),
            specificity: ratio(tn, neg),
            micro_f1,
        }
    }

    fn fields(&self) -> [f64; 4] {
        [
            self.accuracy,
            self.sensitivity,
            self.specificity,
            self.micro_f1,
        ]
    }

    fn from_fields(f: [f64; 4]) -> Self {
        Self {
            accuracy: f[0],
            sensitivity: f[1],
            specificity: f[2],
            micro_f1: f[3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub diverged: bool,
    /// Absent for diverged folds.
    pub metrics: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularReport {
    pub classes: usize,
    pub folds: Vec<FoldResult>,
    /// Mean and sample standard deviation over converged folds.
    pub mean: Option<Metrics>,
    pub sd: Option<Metrics>,
}

fn standardize(train: &mut Tensor, test: &mut Tensor) {
    let (n, d) = (train.rows(), train.cols());
    for j in 0..d {
        let col = |t: &Tensor, i: usize| t.data()[i * d + j];
        let mean = (0..n).map(|i| col(train, i)).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (col(train, i) - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for t in [&mut *train, &mut *test] {
            let rows = t.rows();
            for i in 0..rows {
                let v = &mut t.data_mut()[i * d + j];
                *v = (*v - mean) / sd;
            }
        }
    }
}

fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    let c = logits.cols();
    logits
        .data()
        .chunks(c)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                    if v > best.1 {
                        (i, v)
                    } else {
                        best
                    }
                })
                .0
        })
        .collect()
}

fn mean_sd(values: &[Metrics]) -> (Option<Metrics>, Option<Metrics>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mut mean = [0.0; 4];
    for m in values {
        for (acc, v) in mean.iter_mut().zip(m.fields()) {
            *acc += v / n;
        }
    }
    let mut sd = [0.0; 4];
    if values.len() > 1 {
        for m in values {
            for ((acc, v), mu) in sd.iter_mut().zip(m.fields()).zip(mean) {
                *acc += (v - mu).powi(2) / (n - 1.0);
            }
        }
        sd.iter_mut().for_each(|s| *s = s.sqrt());
    }
    (
        Some(Metrics::from_fields(mean)),
        Some(Metrics::from_fields(sd)),
    )
}

pub fn cmd_tabular(data: &TabularData, config: &TabularConfig) -> Result<TabularReport> {
    let n = data.labels.len();
    let keys: Vec<String> = match &data.groups {
        Some(g) => g.clone(),
        None => (0..n).map(|i| i.to_string()).collect(),
    };
    let fold_of = assign_folds(&keys, config.folds, config.seed)?;
    let classes = data.classes();
    let spec = ModelSpec {
        input_dim: data.x.cols(),
        width: config.width,
        blocks: config.blocks,
        layers_per_block: config.layers_per_block,
        activation: config.activation,
        output_dim: classes,
        skip_mode: SkipMode::Average,
    };
    spec.validate()?;

    let labels_tensor = Tensor::new(vec![n, 1], data.labels.iter().map(|&l| l as f64).collect())?;
    let all = Split {
        x: data.x.clone(),
        y: labels_tensor,
    };
    let mut folds = Vec::with_capacity(config.folds);
    for fold in 0..config.folds {
        let test_rows: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
        let train_rows: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
        let mut tr = all.select(&train_rows);
        let mut te = all.select(&test_rows);
        if config.standardize {
            standardize(&mut tr.x, &mut te.x);
        }
        let seed = derive_seed(config.seed, &["tabular"], fold as u64);
        let mut model = Model::build(spec, &mut SeededRng::new(seed, stream::INIT))?;
        let train_config = TrainConfig {
            epochs: config.epochs,
            batch_size: config.batch_size,
            lr_max: config.lr_max,
            momentum: config.momentum,
            weight_decay: config.weight_decay,
            loss: Loss::CrossEntropy,
            seed,
        };
        let outcome = train(&mut model, &tr, &train_config, &TrainOptions::default())?;
        let logits = if outcome.diverged {
            None
        } else {
            Some(predict_batched(&model, &te.x)?).filter(|l| l.data().iter().all(|v| v.is_finite()))
        };
        let truth: Vec<usize> = test_rows.iter().map(|&i| data.labels[i]).collect();
        folds.push(FoldResult {
            fold,
            n_train: train_rows.len(),
            n_test: test_rows.len(),
            diverged: logits.is_none(),
            metrics: logits.map(|l| Metrics::compute(&argmax_rows(&l), &truth)),
        });
    }
    let ok: Vec<Metrics> = folds.iter().filter_map(|f| f.metrics).collect();
    let (mean, sd) = mean_sd(&ok);
    Ok(TabularReport {
        classes,
        folds,
        mean,
        sd,
    })
}
