use crate::error::{Error, Result};

/// Worst-case error of interpolating `f` at `n` Chebyshev nodes on
/// `[-1, 1]`: `max|f^(n)| / (2^(n-1) n!)`.
pub fn cheby_error_bound(n: usize, max_deriv: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::invalid("node count must be at least 1"));
    }
    if max_deriv.is_nan() || max_deriv < 0.0 {
        return Err(Error::invalid("derivative bound must be non-negative"));
    }
    let factorial: f64 = (1..=n).map(|k| k as f64).product();
    Ok(max_deriv / (2f64.powi(n as i32 - 1) * factorial))
}
