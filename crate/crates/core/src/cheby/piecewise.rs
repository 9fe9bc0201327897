use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::{dot, ChebyshevGrid};
use crate::error::{Error, Result};

/// How the linear tails outside `[-1, 1]` get their slopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum TailMode {
    /// Tangent of the interpolant at each end.
    Extrapolate,
    /// Least-squares slope through the `k` nodes nearest each end.
    Regression { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailSlopes {
    pub m_minus: f64,
    pub m_plus: f64,
    pub mode: TailMode,
}

/// Both slopes are linear in `y`; these are the coefficient vectors, so
/// `m_minus = minus · y` and `m_plus = plus · y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeWeights {
    pub minus: Vec<f64>,
    pub plus: Vec<f64>,
}

impl SlopeWeights {
    pub fn new(grid: &ChebyshevGrid, mode: TailMode) -> Result<Self> {
        match mode {
            TailMode::Extrapolate => Ok(Self {
                minus: grid.grad_cache(false).basis_grad.clone(),
                plus: grid.grad_cache(true).basis_grad.clone(),
            }),
            TailMode::Regression { k } => {
                let count = grid.len();
                if k < 2 || k > count {
                    return Err(Error::invalid(format!(
                        "regression node count k={k} must lie in 2..={count}"
                    )));
                }
                let x = grid.nodes();
                let mut plus = vec![0.0; count];
                let mut minus = vec![0.0; count];
                fill_ls_weights(&x[..k], &mut plus[..k]);
                // nodes nearest -1 are the last k, x_{n+2-k}..x_{n+1}
                fill_ls_weights(&x[count - k..], &mut minus[count - k..]);
                Ok(Self { minus, plus })
            }
        }
    }
}

/// Weights `w` with `sum(w_i y_i) = Cov(x, y) / Var(x)`.
fn fill_ls_weights(x: &[f64], out: &mut [f64]) {
    if x.len() == 2 {
        // two-point fit is the secant
        let inv = 1.0 / (x[0] - x[1]);
        out[0] = inv;
        out[1] = -inv;
        return;
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let sxx: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    for (o, v) in out.iter_mut().zip(x) {
        *o = (v - mean) / sxx;
    }
}

pub fn tail_slopes(grid: &ChebyshevGrid, y: &[f64], mode: TailMode) -> Result<TailSlopes> {
    grid.check_len(y)?;
    let w = SlopeWeights::new(grid, mode)?;
    Ok(TailSlopes {
        m_minus: dot(&w.minus, y),
        m_plus: dot(&w.plus, y),
        mode,
    })
}

/// Lagrange interpolant on `[-1, 1]` joined to linear tails.
///
/// Below `-1` the output is `m_minus * (v - x_{n+1}) + y_{n+1}`; above `+1`
/// it is `m_plus * (v - x_1) + y_1`. The tails pass through the end nodes,
/// so the activation is continuous, and C¹ when slopes are tangents.
#[derive(Debug, Clone)]
pub struct ClPiecewise {
    grid: Arc<ChebyshevGrid>,
    mode: TailMode,
    weights: SlopeWeights,
}

impl ClPiecewise {
    pub fn new(grid: Arc<ChebyshevGrid>, mode: TailMode) -> Result<Self> {
        if !grid.scaled() {
            return Err(Error::invalid(
                "piecewise activation needs a scaled grid with end nodes at ±1",
            ));
        }
        let weights = SlopeWeights::new(&grid, mode)?;
        Ok(Self {
            grid,
            mode,
            weights,
        })
    }

    pub fn grid(&self) -> &ChebyshevGrid {
        &self.grid
    }

    pub fn mode(&self) -> TailMode {
        self.mode
    }

    pub fn weights(&self) -> &SlopeWeights {
        &self.weights
    }

    pub fn eval(&self, y: &[f64], v: f64) -> f64 {
        let last = self.grid.len() - 1;
        if v > 1.0 {
            dot(&self.weights.plus, y) * (v - self.grid.nodes()[0]) + y[0]
        } else if v < -1.0 {
            dot(&self.weights.minus, y) * (v - self.grid.nodes()[last]) + y[last]
        } else {
            let mut basis = [0.0; 16];
            if y.len() <= basis.len() {
                let b = &mut basis[..y.len()];
                self.grid.basis_into(v, b);
                dot(b, y)
            } else {
                dot(&self.grid.basis(v), y)
            }
        }
    }

    /// Adds `g * dσ/dy` into `dy` and returns `g * dσ/dv`.
    pub fn backward(&self, y: &[f64], v: f64, g: f64, dy: &mut [f64]) -> f64 {
        let last = self.grid.len() - 1;
        let tail = if v > 1.0 {
            Some((&self.weights.plus, 0))
        } else if v < -1.0 {
            Some((&self.weights.minus, last))
        } else {
            None
        };
        match tail {
            Some((w, end)) => {
                let offset = v - self.grid.nodes()[end];
                for (d, wj) in dy.iter_mut().zip(w) {
                    *d += g * offset * wj;
                }
                dy[end] += g;
                g * dot(w, y)
            }
            None => {
                let n = y.len();
                let mut scratch = [0.0; 16];
                let mut heap;
                let buf: &mut [f64] = if n <= scratch.len() {
                    &mut scratch[..n]
                } else {
                    heap = vec![0.0; n];
                    &mut heap
                };
                self.grid.basis_into(v, buf);
                for (d, l) in dy.iter_mut().zip(buf.iter()) {
                    *d += g * l;
                }
                self.grid.basis_grad_into(v, buf);
                g * dot(buf, y)
            }
        }
    }
}

/// One-off evaluation of the piecewise activation.
pub fn cl_piecewise(grid: &ChebyshevGrid, y: &[f64], mode: TailMode, v: f64) -> Result<f64> {
    grid.check_len(y)?;
    let kernel = ClPiecewise::new(Arc::new(grid.clone()), mode)?;
    Ok(kernel.eval(y, v))
}

/// Returns `(g * dσ/dv, g * dσ/dy)`.
pub fn cl_backward(
    grid: &ChebyshevGrid,
    y: &[f64],
    mode: TailMode,
    v: f64,
    g: f64,
) -> Result<(f64, Vec<f64>)> {
    grid.check_len(y)?;
    let kernel = ClPiecewise::new(Arc::new(grid.clone()), mode)?;
    let mut dy = vec![0.0; y.len()];
    let dv = kernel.backward(y, v, g, &mut dy);
    Ok((dv, dy))
}
