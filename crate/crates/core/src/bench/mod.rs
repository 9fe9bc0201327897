//! Experiment harness: seeded grids of training runs, result tables,
//! gradient-check suites, slices through trained models, checkpoints and
//! cross-validated tabular classification.
//!
//! Results are a JSON array of [`ExperimentResult`] sorted by
//! `(dataset, activation, noise_sd, seed)`; the run order and worker count
//! never affect the bytes written.

pub mod checkpoint;
pub mod gradcheck;
pub mod table;
pub mod tabular;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activations::{ActivationSpec, Variant, DEFAULT_DEGREE, DEFAULT_REGRESSION_K};
use crate::data::{generate, slice, DatasetSpec, Recipe};
use crate::error::{Error, Result};
use crate::models::{Model, ModelSpec, SkipMode};
use crate::rng::{derive_seed, stream, SeededRng};
use crate::training::{evaluate_rmse, train, ActivationStats, Loss, TrainConfig, TrainOptions};

/// Points in a slice through `x0 ∈ [-1, 1]`.
pub const SLICE_POINTS: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub width: usize,
    pub blocks: usize,
    pub layers_per_block: usize,
    pub degree: usize,
    pub regression_k: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            width: 32,
            blocks: 3,
            layers_per_block: 1,
            degree: DEFAULT_DEGREE,
            regression_k: DEFAULT_REGRESSION_K,
        }
    }
}

impl ModelSettings {
    pub fn spec(&self, input_dim: usize, variant: Variant) -> ModelSpec {
        ModelSpec {
            input_dim,
            width: self.width,
            blocks: self.blocks,
            layers_per_block: self.layers_per_block,
            activation: ActivationSpec::new(variant)
                .with_degree(self.degree)
                .with_regression_k(self.regression_k),
            output_dim: 1,
            skip_mode: SkipMode::Add,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let c = TrainConfig::synthetic(0);
        Self {
            epochs: c.epochs,
            batch_size: c.batch_size,
            lr_max: c.lr_max,
            momentum: c.momentum,
            weight_decay: c.weight_decay,
        }
    }
}

impl TrainSettings {
    pub fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr_max: self.lr_max,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            loss: Loss::L1,
            seed,
        }
    }
}

/// A grid of runs: every dataset × activation × noise level × seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub datasets: Vec<Recipe>,
    pub activations: Vec<Variant>,
    #[serde(default = "default_noise")]
    pub noise_sd: Vec<f64>,
    /// Seed indices; each is hashed with the base seed and cell labels.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_split")]
    pub n_train: usize,
    #[serde(default = "default_split")]
    pub n_test: usize,
    #[serde(default)]
    pub model: ModelSettings,
    #[serde(default)]
    pub train: TrainSettings,
    /// Also emit per-epoch loss and activation-input histograms.
    #[serde(default)]
    pub instrument: bool,
    /// Wall time makes output non-reproducible, so it is opt-in.
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_noise() -> Vec<f64> {
    vec![0.01]
}

fn default_seeds() -> Vec<u64> {
    (0..3).collect()
}

fn default_split() -> usize {
    1000
}

impl RunConfig {
    pub fn new(datasets: Vec<Recipe>, activations: Vec<Variant>) -> Self {
        Self {
            datasets,
            activations,
            noise_sd: default_noise(),
            seeds: default_seeds(),
            base_seed: 0,
            n_train: default_split(),
            n_test: default_split(),
            model: ModelSettings::default(),
            train: TrainSettings::default(),
            instrument: false,
            record_wall_time: false,
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.datasets.is_empty() || self.activations.is_empty() {
            return bad("at least one dataset and one activation are required");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.noise_sd.is_empty() || self.noise_sd.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return bad("noise levels must be finite and non-negative");
        }
        if self.n_train == 0 || self.n_test == 0 {
            return bad("split sizes must be positive");
        }
        let config_err = |e: Error| Error::Config(e.to_string());
        self.train.config(0).validate().map_err(config_err)?;
        for &v in &self.activations {
            self.model.spec(1, v).validate().map_err(config_err)?;
        }
        Ok(())
    }

    /// Every run in the grid, in canonical order.
    pub fn cells(&self) -> Vec<RunCell> {
        let mut cells = Vec::new();
        for &dataset in &self.datasets {
            for &activation in &self.activations {
                for &noise_sd in &self.noise_sd {
                    for &seed in &self.seeds {
                        cells.push(RunCell {
                            dataset,
                            activation,
                            noise_sd,
                            seed,
                        });
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunCell {
    pub dataset: Recipe,
    pub activation: Variant,
    pub noise_sd: f64,
    pub seed: u64,
}

/// Seed of the dataset for one seed index; shared by every activation so
/// that cells differ only in the model.
pub fn data_seed(base_seed: u64, dataset: Recipe, seed_index: u64) -> u64 {
    derive_seed(base_seed, &["data", dataset.name()], seed_index)
}

/// Seed of the initialization and shuffle streams for one run.
pub fn run_seed(base_seed: u64, dataset: Recipe, activation: Variant, seed_index: u64) -> u64 {
    derive_seed(base_seed, &[dataset.name(), activation.name()], seed_index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub dataset: Recipe,
    pub activation: Variant,
    pub noise_sd: f64,
    pub seed: u64,
    pub run_seed: u64,
    /// Test RMSE; absent exactly when the run diverged.
    pub rmse: Option<f64>,
    pub diverged: bool,
    pub diverged_epoch: Option<usize>,
    pub epochs: usize,
    pub param_count: usize,
    pub final_train_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation_stats: Option<Vec<ActivationStats>>,
}

/// Trains and evaluates one grid cell, returning the trained model too.
pub fn run_cell(config: &RunConfig, cell: RunCell) -> Result<(Model, ExperimentResult)> {
    let started = Instant::now();
    let data = generate(&DatasetSpec {
        recipe: cell.dataset,
        noise_sd: cell.noise_sd,
        n_train: config.n_train,
        n_test: config.n_test,
        seed: data_seed(config.base_seed, cell.dataset, cell.seed),
    })?;
    let seed = run_seed(config.base_seed, cell.dataset, cell.activation, cell.seed);
    let spec = config.model.spec(cell.dataset.input_dim(), cell.activation);
    let mut model = Model::build(spec, &mut SeededRng::new(seed, stream::INIT))?;
    let options = TrainOptions {
        activation_histogram_bins: config.instrument.then_some(40),
        histogram_range: 5.0,
    };
    let outcome = train(
        &mut model,
        &data.train,
        &config.train.config(seed),
        &options,
    )?;
    let rmse = if outcome.diverged {
        None
    } else {
        Some(evaluate_rmse(&model, &data.test)?).filter(|r| r.is_finite())
    };
    let diverged = rmse.is_none();
    let result = ExperimentResult {
        dataset: cell.dataset,
        activation: cell.activation,
        noise_sd: cell.noise_sd,
        seed: cell.seed,
        run_seed: seed,
        rmse,
        diverged,
        diverged_epoch: outcome.diverged_at,
        epochs: outcome.history.len(),
        param_count: model.param_count(),
        final_train_loss: if diverged {
            None
        } else {
            outcome.history.last().copied()
        },
        wall_time: config
            .record_wall_time
            .then(|| started.elapsed().as_secs_f64()),
        history: config.instrument.then(|| outcome.history.clone()),
        activation_stats: outcome.activation_stats,
    };
    Ok((model, result))
}

/// Runs the whole grid on `workers` threads (all cores when `None`).
pub fn cmd_run(config: &RunConfig, workers: Option<usize>) -> Result<Vec<ExperimentResult>> {
    config.validate()?;
    let cells = config.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let mut results: Vec<ExperimentResult> = pool.install(|| {
        cells
            .par_iter()
            .map(|&cell| run_cell(config, cell).map(|(_, r)| r))
            .collect::<Result<_>>()
    })?;
    results.sort_by(|a, b| {
        (a.dataset, a.activation)
            .cmp(&(b.dataset, b.activation))
            .then(a.noise_sd.total_cmp(&b.noise_sd))
            .then(a.seed.cmp(&b.seed))
    });
    Ok(results)
}

pub fn results_to_json(results: &[ExperimentResult]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(results)?;
    s.push('\n');
    Ok(s)
}

pub fn write_results(path: &Path, results: &[ExperimentResult]) -> Result<()> {
    fs::write(path, results_to_json(results)?)?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ExperimentResult>> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Rows `(x0, y_true, y_pred)` along the recipe's slice.
pub fn cmd_slice(model: &Model, recipe: Recipe) -> Result<Vec<[f64; 3]>> {
    if model.spec().input_dim != recipe.input_dim() || model.spec().output_dim != 1 {
        return Err(Error::ShapeMismatch {
            op: "slice",
            lhs: vec![model.spec().input_dim, model.spec().output_dim],
            rhs: vec![recipe.input_dim(), 1],
        });
    }
    let s = slice(recipe, SLICE_POINTS)?;
    let pred = model.predict(&s.x)?;
    Ok((0..s.len())
        .map(|i| [s.row(i)[0], s.y.data()[i], pred.data()[i]])
        .collect())
}

pub fn write_slice_csv<W: Write>(rows: &[[f64; 3]], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x0", "y_true", "y_pred"])?;
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v:.16e}")))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(datasets: Vec<Recipe>, activations: Vec<Variant>) -> RunConfig {
        let mut c = RunConfig::new(datasets, activations);
        c.seeds = vec![0, 1];
        c.n_train = 48;
        c.n_test = 16;
        c.model.width = 6;
        c.train.epochs = 2;
        c
    }

    #[test]
    fn config_round_trips() {
        let mut c = tiny(
            vec![Recipe::Pendulum],
            vec![Variant::Relu, Variant::ClExtrapolate],
        );
        c.out = Some("results.json".into());
        c.noise_sd = vec![0.01, 0.04];
        let back = RunConfig::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"datasets": ["pendulum"], "activations": ["relu"], "bogus": 1}"#;
        assert!(matches!(RunConfig::from_json(text), Err(Error::Config(_))));
        let nested = r#"{"datasets": ["pendulum"], "activations": ["relu"], "train": {"lr": 1}}"#;
        assert!(RunConfig::from_json(nested).is_err());
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c =
            RunConfig::from_json(r#"{"datasets": ["gravity"], "activations": ["cl_extrapolate"]}"#)
                .unwrap();
        assert_eq!(c.seeds, vec![0, 1, 2]);
        assert_eq!(c.noise_sd, vec![0.01]);
        assert_eq!(c.train.epochs, 300);
        assert_eq!(c.model.width, 32);
    }

    #[test]
    fn invalid_configs_fail_validation() {
        let mut c = tiny(vec![Recipe::Pendulum], vec![Variant::Relu]);
        c.noise_sd = vec![-0.1];
        assert!(c.validate().is_err());
        let mut c = tiny(vec![Recipe::Pendulum], vec![Variant::ClRegression]);
        c.model.regression_k = 9;
        assert!(c.validate().is_err());
    }

    #[test]
    fn seeds_depend_on_labels() {
        let a = run_seed(0, Recipe::Pendulum, Variant::Relu, 0);
        assert_ne!(a, run_seed(0, Recipe::Pendulum, Variant::Tanh, 0));
        assert_ne!(a, run_seed(0, Recipe::Gravity, Variant::Relu, 0));
        assert_ne!(a, run_seed(0, Recipe::Pendulum, Variant::Relu, 1));
        assert_ne!(a, run_seed(1, Recipe::Pendulum, Variant::Relu, 0));
        assert_eq!(a, run_seed(0, Recipe::Pendulum, Variant::Relu, 0));
    }

    #[test]
    fn grid_cardinality_and_order() {
        let c = tiny(
            vec![Recipe::Pendulum],
            vec![Variant::ClExtrapolate, Variant::Relu],
        );
        let results = cmd_run(&c, Some(1)).unwrap();
        assert_eq!(results.len(), 4);
        let order: Vec<_> = results.iter().map(|r| (r.activation, r.seed)).collect();
        assert_eq!(
            order,
            vec![
                (Variant::Relu, 0),
                (Variant::Relu, 1),
                (Variant::ClExtrapolate, 0),
                (Variant::ClExtrapolate, 1)
            ]
        );
        for r in &results {
            assert_eq!(r.rmse.is_none(), r.diverged);
            assert!(r.wall_time.is_none());
        }
    }

    #[test]
    fn slice_checks_dimensions() {
        let spec = ModelSettings::default().spec(3, Variant::Relu);
        let model = Model::build(spec, &mut SeededRng::new(0, stream::INIT)).unwrap();
        assert!(cmd_slice(&model, Recipe::Gravity).is_err());
        let rows = cmd_slice(&model, Recipe::Pendulum).unwrap();
        assert_eq!(rows.len(), SLICE_POINTS);
        assert_eq!(rows[0][0], -1.0);
        assert_eq!(rows[SLICE_POINTS - 1][0], 1.0);
    }
}
