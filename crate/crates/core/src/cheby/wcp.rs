//! Weighted sums of Chebyshev polynomials `sum_k theta_k T_k(v)`.

/// `T_0..T_n` at `v` via the three-term recurrence, together with their
/// derivatives.
pub fn chebyshev_terms(v: f64, count: usize, values: &mut [f64], derivs: &mut [f64]) {
    for k in 0..count {
        let (t, dt) = match k {
            0 => (1.0, 0.0),
            1 => (v, 1.0),
            _ => (
                2.0 * v * values[k - 1] - values[k - 2],
                2.0 * values[k - 1] + 2.0 * v * derivs[k - 1] - derivs[k - 2],
            ),
        };
        values[k] = t;
        derivs[k] = dt;
    }
}

pub fn wcp_eval(theta: &[f64], v: f64) -> f64 {
    let n = theta.len();
    let mut t = vec![0.0; n];
    let mut dt = vec![0.0; n];
    chebyshev_terms(v, n, &mut t, &mut dt);
    theta.iter().zip(&t).map(|(a, b)| a * b).sum()
}

/// Returns `(dσ/dv, dσ/dθ)` with `dσ/dθ_k = T_k(v)`.
pub fn wcp_backward(theta: &[f64], v: f64) -> (f64, Vec<f64>) {
    let n = theta.len();
    let mut t = vec![0.0; n];
    let mut dt = vec![0.0; n];
    chebyshev_terms(v, n, &mut t, &mut dt);
    let dv = theta.iter().zip(&dt).map(|(a, b)| a * b).sum();
    (dv, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_order_terms() {
        assert_eq!(wcp_eval(&[0.0, 1.0, 0.0, 0.0], 0.7), 0.7);
        assert_eq!(wcp_eval(&[0.0, 0.0, 1.0, 0.0], 0.5), -0.5);
        // T_3(x) = 4x^3 - 3x
        let x: f64 = 0.3;
        assert!((wcp_eval(&[0.0, 0.0, 0.0, 1.0], x) - (4.0 * x.powi(3) - 3.0 * x)).abs() < 1e-15);
    }

    #[test]
    fn matches_cosine_form_inside_unit_interval() {
        let v: f64 = 0.42;
        let mut t = [0.0; 8];
        let mut dt = [0.0; 8];
        chebyshev_terms(v, 8, &mut t, &mut dt);
        for (k, tk) in t.iter().enumerate() {
            assert!((tk - (k as f64 * v.acos()).cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let theta = [0.3, -1.2, 0.7, 0.45];
        let h = 1e-5;
        for v in [-2.1, -0.6, 0.0, 0.35, 1.7] {
            let (dv, dtheta) = wcp_backward(&theta, v);
            let fd = (wcp_eval(&theta, v + h) - wcp_eval(&theta, v - h)) / (2.0 * h);
            assert!(
                (dv - fd).abs() / dv.abs().max(1e-6) < 1e-8,
                "{v}: {dv} vs {fd}"
            );
            for k in 0..4 {
                let mut up = theta;
                let mut dn = theta;
                up[k] += h;
                dn[k] -= h;
                let fd = (wcp_eval(&up, v) - wcp_eval(&dn, v)) / (2.0 * h);
                assert!((dtheta[k] - fd).abs() / dtheta[k].abs().max(1e-6) < 1e-8);
            }
        }
    }
}
