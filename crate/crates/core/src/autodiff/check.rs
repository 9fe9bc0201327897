//! Central finite-difference checks against tape gradients.

use super::{Tape, Tensor, Var};
use crate::error::Result;

/// Default central-difference step for 64-bit values.
pub const FD_STEP: f64 = 1e-5;

/// Magnitudes below this are compared absolutely.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, REL_ERR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
    (analytic - numeric).abs() / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Worst relative error per input tensor.
    pub per_input: Vec<f64>,
    pub max_rel_err: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Compares tape gradients of the scalar returned by `f` with respect to
/// every element of every input against central differences.
pub fn check_gradients<F>(inputs: &[Tensor], step: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| {
            tape.grad(v)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; t.numel()])
        })
        .collect();

    let eval = |perturbed: &[Tensor]| -> Result<f64> {
        let mut t = Tape::new();
        let vs: Vec<Var> = perturbed.iter().map(|x| t.constant(x.clone())).collect();
        let l = f(&mut t, &vs)?;
        Ok(t.value(l).item())
    };

    let mut work = inputs.to_vec();
    let mut per_input = Vec::with_capacity(inputs.len());
    let mut checked = 0;
    #[allow(clippy::needless_range_loop)]
    for i in 0..inputs.len() {
        let mut worst: f64 = 0.0;
        for e in 0..inputs[i].numel() {
            let orig = inputs[i].data()[e];
            work[i].data_mut()[e] = orig + step;
            let up = eval(&work)?;
            work[i].data_mut()[e] = orig - step;
            let down = eval(&work)?;
            work[i].data_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * step);
            worst = worst.max(relative_error(analytic[i][e], numeric));
            checked += 1;
        }
        per_input.push(worst);
    }
    let max_rel_err = per_input.iter().cloned().fold(0.0, f64::max);
    Ok(GradCheckReport {
        per_input,
        max_rel_err,
        checked,
    })
}
