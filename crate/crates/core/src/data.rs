//! Synthetic regression datasets built from closed-form recipes over
//! inputs drawn uniformly from `[-1, 1]`, with Gaussian target noise.
//!
//! Row generation order for a split: the row's `input_dim` uniforms, then
//! one normal (two uniforms via Box–Muller) scaled by `noise_sd`. Train and
//! test come from substreams 1 and 2 of the dataset seed.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::{stream, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    Pendulum,
    Arrhenius,
    Gravity,
    Sigmoid,
    Prelu,
    Jump,
    Step,
}

const STEP_LEVELS: [f64; 5] = [-0.8, -0.4, 0.0, 0.4, 0.8];

impl Recipe {
    pub const ALL: [Recipe; 7] = [
        Recipe::Pendulum,
        Recipe::Arrhenius,
        Recipe::Gravity,
        Recipe::Sigmoid,
        Recipe::Prelu,
        Recipe::Jump,
        Recipe::Step,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::Pendulum => "pendulum",
            Recipe::Arrhenius => "arrhenius",
            Recipe::Gravity => "gravity",
            Recipe::Sigmoid => "sigmoid",
            Recipe::Prelu => "prelu",
            Recipe::Jump => "jump",
            Recipe::Step => "step",
        }
    }

    pub fn input_dim(self) -> usize {
        match self {
            Recipe::Pendulum | Recipe::Arrhenius | Recipe::Prelu => 3,
            Recipe::Gravity | Recipe::Jump => 4,
            Recipe::Sigmoid => 5,
            Recipe::Step => 1,
        }
    }

    pub fn is_smooth(self) -> bool {
        matches!(
            self,
            Recipe::Pendulum | Recipe::Arrhenius | Recipe::Gravity | Recipe::Sigmoid
        )
    }

    /// Noise-free target; `x` must have exactly `input_dim` entries.
    fn eval_unchecked(self, x: &[f64]) -> f64 {
        match self {
            Recipe::Pendulum => -x[1] * x[2] * (2.0 * PI * x[0]).sin(),
            Recipe::Arrhenius => x[1] * (-x[2] * x[0] / 4.0).exp(),
            Recipe::Gravity => x[1] * x[2] * x[3] / (0.2 + x[0] * x[0]),
            Recipe::Sigmoid => {
                2.0 * x[1] / (1.0 + (-10.0 * x[2] * (x[0] - x[3] + 0.5)).exp()) + x[4] - 0.5
            }
            Recipe::Prelu => {
                if x[0] < 0.0 {
                    0.1 * x[0] * x[1]
                } else {
                    x[0] * x[2]
                }
            }
            Recipe::Jump => {
                if x[0] < x[1] - 0.75 {
                    4.0 * x[2] * x[0]
                } else {
                    0.1 * x[3] * ((4.0 * x[2] * x[0]) - x[2] / 2.0)
                }
            }
            Recipe::Step => STEP_LEVELS
                .iter()
                .copied()
                .find(|&t| x[0] < t)
                .unwrap_or(0.8),
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Recipe::ALL
            .into_iter()
            .find(|r| r.name() == key)
            .ok_or_else(|| Error::invalid(format!("unknown dataset '{s}'")))
    }
}

pub fn recipe_eval(recipe: Recipe, x: &[f64]) -> Result<f64> {
    if x.len() != recipe.input_dim() {
        return Err(Error::LengthMismatch {
            expected: recipe.input_dim(),
            got: x.len(),
        });
    }
    Ok(recipe.eval_unchecked(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub recipe: Recipe,
    pub noise_sd: f64,
    #[serde(default = "default_split")]
    pub n_train: usize,
    #[serde(default = "default_split")]
    pub n_test: usize,
    pub seed: u64,
}

fn default_split() -> usize {
    1000
}

impl DatasetSpec {
    pub fn new(recipe: Recipe, noise_sd: f64, seed: u64) -> Self {
        Self {
            recipe,
            noise_sd,
            n_train: default_split(),
            n_test: default_split(),
            seed,
        }
    }
}

/// Inputs `n × dim` and targets `n × 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub x: Tensor,
    pub y: Tensor,
}

impl Split {
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.x.data()[i * d..(i + 1) * d]
    }

    /// Gathers the given rows into a new split.
    pub fn select(&self, rows: &[usize]) -> Split {
        let d = self.dim();
        let yc = self.y.cols();
        let mut x = Vec::with_capacity(rows.len() * d);
        let mut y = Vec::with_capacity(rows.len() * yc);
        for &r in rows {
            x.extend_from_slice(self.row(r));
            y.extend_from_slice(&self.y.data()[r * yc..(r + 1) * yc]);
        }
        Split {
            x: Tensor::new(vec![rows.len(), d], x).expect("shape"),
            y: Tensor::new(vec![rows.len(), yc], y).expect("shape"),
        }
    }

    /// CSV with header `x0..x{d-1},y` and 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.dim();
        let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| format!("{v:.16e}")).collect();
            rec.push(format!("{:.16e}", self.y.data()[i]));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub train: Split,
    pub test: Split,
}

pub fn generate(spec: &DatasetSpec) -> Result<Dataset> {
    if !spec.noise_sd.is_finite() || spec.noise_sd < 0.0 {
        return Err(Error::invalid(
            "noise sd must be a finite non-negative number",
        ));
    }
    let train = generate_split(
        spec.recipe,
        spec.noise_sd,
        spec.n_train,
        spec.seed,
        stream::TRAIN_DATA,
    );
    let test = generate_split(
        spec.recipe,
        spec.noise_sd,
        spec.n_test,
        spec.seed,
        stream::TEST_DATA,
    );
    Ok(Dataset {
        spec: *spec,
        train,
        test,
    })
}

fn generate_split(recipe: Recipe, noise_sd: f64, n: usize, seed: u64, stream: u64) -> Split {
    let mut rng = SeededRng::new(seed, stream);
    let d = recipe.input_dim();
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let start = x.len();
        for _ in 0..d {
            x.push(rng.uniform(-1.0, 1.0));
        }
        let clean = recipe.eval_unchecked(&x[start..]);
        y.push(clean + noise_sd * rng.normal());
    }
    Split {
        x: Tensor::new(vec![n, d], x).expect("shape"),
        y: Tensor::new(vec![n, 1], y).expect("shape"),
    }
}

/// Evenly spaced `x0` over `[-1, 1]` with every other input fixed at 0.5,
/// and noise-free targets.
pub fn slice(recipe: Recipe, resolution: usize) -> Result<Split> {
    if resolution < 2 {
        return Err(Error::invalid("slice resolution must be at least 2"));
    }
    let d = recipe.input_dim();
    let mut x = Vec::with_capacity(resolution * d);
    let mut y = Vec::with_capacity(resolution);
    for i in 0..resolution {
        let x0 = -1.0 + 2.0 * i as f64 / (resolution - 1) as f64;
        let start = x.len();
        x.push(x0);
        x.extend(std::iter::repeat_n(0.5, d - 1));
        y.push(recipe.eval_unchecked(&x[start..]));
    }
    Ok(Split {
        x: Tensor::new(vec![resolution, d], x)?,
        y: Tensor::new(vec![resolution, 1], y)?,
    })
}
