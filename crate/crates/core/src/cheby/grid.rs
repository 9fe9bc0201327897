use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Chebyshev nodes of the first kind with the Lagrange-basis caches.
///
/// Nodes are stored in decreasing order, `nodes[0]` nearest `+1`. A scaled
/// grid stretches them by `r = 1 / cos(pi / (2(n+1)))` so the extreme nodes
/// sit exactly on `+1` and `-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevGrid {
    degree: usize,
    scaled: bool,
    radius: f64,
    nodes: Vec<f64>,
    /// Row `j` holds every node except `nodes[j]`, in order.
    numerator: Vec<Vec<f64>>,
    /// `prod_{m != j} (x_j - x_m)`.
    denominator: Vec<f64>,
    /// Basis derivatives at `+1` and `-1`.
    grad_at_plus: GradCache,
    grad_at_minus: GradCache,
}

/// Right products `prod(c - numerator_grad)` at a fixed probe point and the
/// basis derivatives they produce.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCache {
    pub at: f64,
    /// `(n+1) × n`; entry `[j][i]` is the product over the numerator row `j`
    /// with its `i`-th element removed.
    pub right_prod: Vec<Vec<f64>>,
    pub basis_grad: Vec<f64>,
}

impl ChebyshevGrid {
    pub fn new(degree: usize, scaled: bool) -> Result<Self> {
        if degree < 1 {
            return Err(Error::invalid("polynomial degree must be at least 1"));
        }
        let count = degree + 1;
        let half_angle = PI / (2.0 * count as f64);
        let radius = if scaled { 1.0 / half_angle.cos() } else { 1.0 };

        // Fill the upper half and mirror it so that x_k = -x_{n+2-k} exactly.
        let mut nodes = vec![0.0; count];
        for k in 0..count / 2 {
            let x = radius * ((2 * k + 1) as f64 * half_angle).cos();
            nodes[k] = x;
            nodes[count - 1 - k] = -x;
        }
        if scaled {
            nodes[0] = 1.0;
            nodes[count - 1] = -1.0;
        }

        let numerator: Vec<Vec<f64>> = (0..count)
            .map(|j| {
                nodes
                    .iter()
                    .enumerate()
                    .filter(|&(m, _)| m != j)
                    .map(|(_, &x)| x)
                    .collect()
            })
            .collect();
        let denominator: Vec<f64> = (0..count)
            .map(|j| numerator[j].iter().map(|&xm| nodes[j] - xm).product())
            .collect();

        let mut grid = Self {
            degree,
            scaled,
            radius,
            nodes,
            numerator,
            denominator,
            grad_at_plus: GradCache::default(),
            grad_at_minus: GradCache::default(),
        };
        grid.grad_at_plus = grid.build_grad_cache(1.0);
        grid.grad_at_minus = grid.build_grad_cache(-1.0);
        Ok(grid)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn scaled(&self) -> bool {
        self.scaled
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn numerator(&self) -> &[Vec<f64>] {
        &self.numerator
    }

    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    pub fn grad_cache(&self, at_plus: bool) -> &GradCache {
        if at_plus {
            &self.grad_at_plus
        } else {
            &self.grad_at_minus
        }
    }

    fn build_grad_cache(&self, c: f64) -> GradCache {
        let right_prod: Vec<Vec<f64>> = self
            .numerator
            .iter()
            .map(|row| {
                (0..row.len())
                    .map(|skip| {
                        row.iter()
                            .enumerate()
                            .filter(|&(i, _)| i != skip)
                            .map(|(_, &x)| c - x)
                            .product()
                    })
                    .collect()
            })
            .collect();
        let basis_grad = right_prod
            .iter()
            .zip(&self.denominator)
            .map(|(row, d)| row.iter().map(|p| p / d).sum())
            .collect();
        GradCache {
            at: c,
            right_prod,
            basis_grad,
        }
    }

    /// Writes `l_j(v)` for every node into `out`.
    pub fn basis_into(&self, v: f64, out: &mut [f64]) {
        for ((o, row), d) in out.iter_mut().zip(&self.numerator).zip(&self.denominator) {
            *o = row.iter().map(|x| v - x).product::<f64>() / d;
        }
    }

    pub fn basis(&self, v: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.basis_into(v, &mut out);
        out
    }

    /// Writes `l_j'(c)` into `out`; served from the cache at `c = ±1`.
    pub fn basis_grad_into(&self, c: f64, out: &mut [f64]) {
        if c == 1.0 {
            out.copy_from_slice(&self.grad_at_plus.basis_grad);
            return;
        }
        if c == -1.0 {
            out.copy_from_slice(&self.grad_at_minus.basis_grad);
            return;
        }
        for ((o, row), d) in out.iter_mut().zip(&self.numerator).zip(&self.denominator) {
            let mut s = 0.0;
            for skip in 0..row.len() {
                let mut p = 1.0;
                for (i, x) in row.iter().enumerate() {
                    if i != skip {
                        p *= c - x;
                    }
                }
                s += p;
            }
            *o = s / d;
        }
    }

    pub fn basis_grad(&self, c: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.basis_grad_into(c, &mut out);
        out
    }

    pub(crate) fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: y.len(),
            });
        }
        Ok(())
    }
}

impl Default for GradCache {
    fn default() -> Self {
        Self {
            at: 0.0,
            right_prod: Vec::new(),
            basis_grad: Vec::new(),
        }
    }
}

pub fn make_grid(degree: usize, scaled: bool) -> Result<ChebyshevGrid> {
    ChebyshevGrid::new(degree, scaled)
}

/// Value at `v` of the interpolant through `(x_j, y_j)`.
pub fn lagrange_eval(grid: &ChebyshevGrid, y: &[f64], v: f64) -> Result<f64> {
    grid.check_len(y)?;
    Ok(dot(y, &grid.basis(v)))
}

/// Derivative at `c` of the interpolant through `(x_j, y_j)`.
pub fn lagrange_grad(grid: &ChebyshevGrid, y: &[f64], c: f64) -> Result<f64> {
    grid.check_len(y)?;
    Ok(dot(y, &grid.basis_grad(c)))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn degree_zero_is_rejected() {
        assert!(make_grid(0, true).is_err());
    }

    #[test]
    fn scaled_cubic_nodes() {
        let g = make_grid(3, true).unwrap();
        let expected = [1.0, 0.414_213_6, -0.414_213_6, -1.0];
        for (x, e) in g.nodes().iter().zip(expected) {
            assert!(close(*x, e, 1e-7), "{x} vs {e}");
        }
        assert!(close(g.radius(), 1.082_392_2, 1e-7));
        assert_eq!(g.nodes()[0], 1.0);
        assert_eq!(g.nodes()[3], -1.0);
    }

    #[test]
    fn scaled_linear_nodes() {
        let g = make_grid(1, true).unwrap();
        assert_eq!(g.nodes(), &[1.0, -1.0]);
        assert!(close(g.radius(), 2f64.sqrt(), 1e-15));
    }

    #[test]
    fn unscaled_cubic_nodes() {
        let g = make_grid(3, false).unwrap();
        let expected = [0.923_879_5, 0.382_683_4, -0.382_683_4, -0.923_879_5];
        for (x, e) in g.nodes().iter().zip(expected) {
            assert!(close(*x, e, 1e-7), "{x} vs {e}");
        }
    }

    #[test]
    fn nodes_are_symmetric_and_decreasing() {
        for n in 1..12 {
            for scaled in [true, false] {
                let g = make_grid(n, scaled).unwrap();
                let x = g.nodes();
                for k in 0..x.len() {
                    assert!((x[k] + x[x.len() - 1 - k]).abs() <= 1e-15);
                }
                assert!(x.windows(2).all(|w| w[0] > w[1]));
                assert!(g.denominator().iter().all(|d| *d != 0.0));
            }
        }
    }

    #[test]
    fn cache_layout() {
        let g = make_grid(3, true).unwrap();
        assert_eq!(g.numerator().len(), 4);
        assert!(g.numerator().iter().all(|r| r.len() == 3));
        assert_eq!(g.numerator()[1], vec![1.0, g.nodes()[2], -1.0]);
        for j in 0..4 {
            let d: f64 = (0..4)
                .filter(|&m| m != j)
                .map(|m| g.nodes()[j] - g.nodes()[m])
                .product();
            assert_eq!(g.denominator()[j], d);
        }
        let c = g.grad_cache(true);
        assert_eq!(c.at, 1.0);
        assert_eq!(c.right_prod.len(), 4);
        assert!(c.right_prod.iter().all(|r| r.len() == 3));
    }

    #[test]
    fn eval_examples() {
        let g = make_grid(3, true).unwrap();
        assert_eq!(lagrange_eval(&g, &[0.0; 4], 0.7).unwrap(), 0.0);
        let ident = g.nodes().to_vec();
        assert!(close(lagrange_eval(&g, &ident, 0.3).unwrap(), 0.3, 1e-14));
        let sq: Vec<f64> = g.nodes().iter().map(|x| x * x).collect();
        assert!(close(lagrange_eval(&g, &sq, 0.3).unwrap(), 0.09, 1e-14));
        for (j, &x) in g.nodes().iter().enumerate() {
            let y: Vec<f64> = (0..4).map(|i| (i as f64 + 1.0) * 0.3 - 0.5).collect();
            assert!(close(lagrange_eval(&g, &y, x).unwrap(), y[j], 1e-14));
        }
        assert!(matches!(
            lagrange_eval(&g, &[0.0; 3], 0.0),
            Err(Error::LengthMismatch {
                expected: 4,
                got: 3
            })
        ));
    }

    #[test]
    fn grad_examples() {
        let g = make_grid(3, true).unwrap();
        let ident = g.nodes().to_vec();
        for c in [-1.0, -0.2, 0.0, 0.7, 1.0, 2.5] {
            assert!(close(lagrange_grad(&g, &ident, c).unwrap(), 1.0, 1e-13));
        }
        let sq: Vec<f64> = g.nodes().iter().map(|x| x * x).collect();
        assert!(close(lagrange_grad(&g, &sq, 1.0).unwrap(), 2.0, 1e-13));
        assert!(lagrange_grad(&g, &[1.0], 0.0).is_err());
    }

    #[test]
    fn grad_matches_central_difference() {
        let g = make_grid(3, true).unwrap();
        let y = [0.31, -0.72, 0.15, 0.93];
        let h = 1e-5;
        let c = 0.7;
        let fd = (lagrange_eval(&g, &y, c + h).unwrap() - lagrange_eval(&g, &y, c - h).unwrap())
            / (2.0 * h);
        let an = lagrange_grad(&g, &y, c).unwrap();
        assert!((an - fd).abs() / an.abs() < 1e-8, "{an} vs {fd}");
    }

    #[test]
    fn cached_endpoint_gradients_match_central_difference() {
        let g = make_grid(5, true).unwrap();
        let h = 1e-6;
        for c in [1.0, -1.0] {
            let cached = g.basis_grad(c);
            let (up, down) = (g.basis(c + h), g.basis(c - h));
            for j in 0..g.len() {
                let fd = (up[j] - down[j]) / (2.0 * h);
                assert!((cached[j] - fd).abs() < 1e-6 * cached[j].abs().max(1.0));
            }
        }
    }
}
