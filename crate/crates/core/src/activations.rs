//! Per-unit activation layers, including the learnable Chebyshev–Lagrange
//! family, recorded on the autodiff tape.
//!
//! Parameter matrices are stored `(n+1) × d`: column `j` holds the
//! y-coordinates (or Chebyshev weights) of unit `j`. Inputs of any rank are
//! treated as rows of `d` units along the last axis.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::check::{check_gradients, FD_STEP};
use crate::autodiff::{Backward, Tape, Tensor, UnaryKind, Var};
use crate::cheby::{chebyshev_terms, ChebyshevGrid, ClPiecewise, TailMode};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub const DEFAULT_DEGREE: usize = 3;
pub const DEFAULT_REGRESSION_K: usize = 2;
/// Added to the norm product in cosine similarity.
pub const COSINE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Relu,
    Tanh,
    Cubic,
    /// Lagrange interpolant applied to the raw input everywhere.
    #[serde(rename = "cl")]
    ClRaw,
    Wcp,
    TanhCl,
    PcsCl,
    ClRegression,
    ClExtrapolate,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::Relu,
        Variant::Tanh,
        Variant::Cubic,
        Variant::ClRaw,
        Variant::Wcp,
        Variant::TanhCl,
        Variant::PcsCl,
        Variant::ClRegression,
        Variant::ClExtrapolate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Relu => "relu",
            Variant::Tanh => "tanh",
            Variant::Cubic => "cubic",
            Variant::ClRaw => "cl",
            Variant::Wcp => "wcp",
            Variant::TanhCl => "tanh_cl",
            Variant::PcsCl => "pcs_cl",
            Variant::ClRegression => "cl_regression",
            Variant::ClExtrapolate => "cl_extrapolate",
        }
    }

    pub fn has_polynomial(self) -> bool {
        !matches!(self, Variant::Relu | Variant::Tanh | Variant::Cubic)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == key || (key == "cl_raw" && *v == Variant::ClRaw))
            .ok_or_else(|| Error::invalid(format!("unknown activation '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationSpec {
    pub variant: Variant,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_k")]
    pub regression_k: usize,
}

fn default_degree() -> usize {
    DEFAULT_DEGREE
}

fn default_k() -> usize {
    DEFAULT_REGRESSION_K
}

impl ActivationSpec {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            degree: DEFAULT_DEGREE,
            regression_k: DEFAULT_REGRESSION_K,
        }
    }

    pub fn with_degree(mut self, degree: usize) -> Self {
        self.degree = degree;
        self
    }

    pub fn with_regression_k(mut self, k: usize) -> Self {
        self.regression_k = k;
        self
    }

    /// Trainable parameters for a layer of `width` units.
    pub fn param_count(&self, width: usize) -> usize {
        let poly = (self.degree + 1) * width;
        match self.variant {
            Variant::Relu | Variant::Tanh | Variant::Cubic => 0,
            Variant::PcsCl => poly + width * width,
            _ => poly,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.variant.has_polynomial() && self.degree < 1 {
            return Err(Error::invalid("activation degree must be at least 1"));
        }
        if self.variant == Variant::ClRegression
            && (self.regression_k < 2 || self.regression_k > self.degree + 1)
        {
            return Err(Error::invalid(format!(
                "regression k={} must lie in 2..={}",
                self.regression_k,
                self.degree + 1
            )));
        }
        Ok(())
    }
}

/// What the polynomial stage does with its input.
#[derive(Debug, Clone)]
enum UnitKernel {
    Raw(Arc<ChebyshevGrid>),
    Piecewise(ClPiecewise),
    Wcp,
}

#[derive(Debug, Clone)]
pub struct ActivationLayer {
    spec: ActivationSpec,
    width: usize,
    coeffs: Option<Tensor>,
    prototypes: Option<Tensor>,
    kernel: Option<UnitKernel>,
}

impl PartialEq for ActivationLayer {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
            && self.width == other.width
            && self.coeffs == other.coeffs
            && self.prototypes == other.prototypes
    }
}

/// Result of a recorded forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ActivationOutput {
    pub output: Var,
    /// Values fed to the polynomial stage (raw input for non-polynomial
    /// variants).
    pub poly_input: Var,
}

impl ActivationLayer {
    /// Zero-initialized polynomial parameters; PCS prototypes are drawn
    /// He-uniform from `rng`.
    pub fn new(spec: ActivationSpec, width: usize, rng: &mut SeededRng) -> Result<Self> {
        spec.validate()?;
        if width == 0 {
            return Err(Error::invalid("activation width must be positive"));
        }
        let count = spec.degree + 1;
        let coeffs = spec
            .variant
            .has_polynomial()
            .then(|| Tensor::zeros(&[count, width]));
        let prototypes = (spec.variant == Variant::PcsCl).then(|| {
            let bound = (6.0 / width as f64).sqrt();
            let data = (0..width * width)
                .map(|_| rng.uniform(-bound, bound))
                .collect();
            Tensor::new(vec![width, width], data).expect("square")
        });
        Self::assemble(spec, width, coeffs, prototypes)
    }

    /// Rebuilds a layer from stored parameters.
    pub fn from_parts(
        spec: ActivationSpec,
        width: usize,
        coeffs: Option<Tensor>,
        prototypes: Option<Tensor>,
    ) -> Result<Self> {
        spec.validate()?;
        let count = spec.degree + 1;
        let want_coeffs = spec.variant.has_polynomial();
        match (&coeffs, want_coeffs) {
            (Some(c), true) if c.shape() == [count, width] => {}
            (None, false) => {}
            _ => return Err(Error::invalid("activation coefficients do not match spec")),
        }
        match (&prototypes, spec.variant == Variant::PcsCl) {
            (Some(p), true) if p.shape() == [width, width] => {}
            (None, false) => {}
            _ => return Err(Error::invalid("prototype matrix does not match spec")),
        }
        Self::assemble(spec, width, coeffs, prototypes)
    }

    fn assemble(
        spec: ActivationSpec,
        width: usize,
        coeffs: Option<Tensor>,
        prototypes: Option<Tensor>,
    ) -> Result<Self> {
        let kernel = match spec.variant {
            Variant::Relu | Variant::Tanh | Variant::Cubic => None,
            Variant::Wcp => Some(UnitKernel::Wcp),
            Variant::ClRaw => Some(UnitKernel::Raw(Arc::new(ChebyshevGrid::new(
                spec.degree,
                true,
            )?))),
            Variant::TanhCl | Variant::PcsCl | Variant::ClExtrapolate => {
                let grid = Arc::new(ChebyshevGrid::new(spec.degree, true)?);
                Some(UnitKernel::Piecewise(ClPiecewise::new(
                    grid,
                    TailMode::Extrapolate,
                )?))
            }
            Variant::ClRegression => {
                let grid = Arc::new(ChebyshevGrid::new(spec.degree, true)?);
                let mode = TailMode::Regression {
                    k: spec.regression_k,
                };
                Some(UnitKernel::Piecewise(ClPiecewise::new(grid, mode)?))
            }
        };
        Ok(Self {
            spec,
            width,
            coeffs,
            prototypes,
            kernel,
        })
    }

    pub fn spec(&self) -> ActivationSpec {
        self.spec
    }

    pub fn variant(&self) -> Variant {
        self.spec.variant
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(n+1) × d` y-coordinates or Chebyshev weights.
    pub fn coeffs(&self) -> Option<&Tensor> {
        self.coeffs.as_ref()
    }

    pub fn coeffs_mut(&mut self) -> Option<&mut Tensor> {
        self.coeffs.as_mut()
    }

    /// `d × d` prototypes, one per column.
    pub fn prototypes(&self) -> Option<&Tensor> {
        self.prototypes.as_ref()
    }

    pub fn prototypes_mut(&mut self) -> Option<&mut Tensor> {
        self.prototypes.as_mut()
    }

    /// Trainable tensors in a fixed order: coefficients, then prototypes.
    pub fn parameters(&self) -> Vec<&Tensor> {
        self.coeffs.iter().chain(self.prototypes.iter()).collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.coeffs
            .iter_mut()
            .chain(self.prototypes.iter_mut())
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.parameters().iter().map(|t| t.numel()).sum()
    }

    /// Sets every unit's coefficients to the same vector.
    pub fn set_all_units(&mut self, values: &[f64]) -> Result<()> {
        let width = self.width;
        let coeffs = self
            .coeffs
            .as_mut()
            .ok_or_else(|| Error::invalid("layer has no coefficients"))?;
        if values.len() != coeffs.shape()[0] {
            return Err(Error::LengthMismatch {
                expected: coeffs.shape()[0],
                got: values.len(),
            });
        }
        for (k, v) in values.iter().enumerate() {
            coeffs.data_mut()[k * width..(k + 1) * width].fill(*v);
        }
        Ok(())
    }

    /// Node x-coordinates of the layer grid, if it uses one.
    pub fn nodes(&self) -> Option<&[f64]> {
        match self.kernel.as_ref()? {
            UnitKernel::Raw(g) => Some(g.nodes()),
            UnitKernel::Piecewise(k) => Some(k.grid().nodes()),
            UnitKernel::Wcp => None,
        }
    }

    /// Registers the parameters on `tape` as gradient-tracking leaves.
    pub fn register(&self, tape: &mut Tape) -> Vec<Var> {
        self.parameters()
            .into_iter()
            .map(|t| tape.param(t.clone()))
            .collect()
    }

    /// Records the activation of `x` using previously registered `params`.
    pub fn forward(&self, tape: &mut Tape, x: Var, params: &[Var]) -> Result<ActivationOutput> {
        let xt = tape.value(x);
        if xt.cols() != self.width || xt.rank() == 0 {
            return Err(Error::ShapeMismatch {
                op: "activation",
                lhs: xt.shape().to_vec(),
                rhs: vec![self.width],
            });
        }
        if params.len() != self.parameters().len() {
            return Err(Error::invalid("wrong number of activation parameters"));
        }
        let same = |output| ActivationOutput {
            output,
            poly_input: x,
        };
        Ok(match self.spec.variant {
            Variant::Relu => same(tape.unary(x, UnaryKind::Relu)),
            Variant::Tanh => same(tape.unary(x, UnaryKind::Tanh)),
            Variant::Cubic => same(tape.unary(x, UnaryKind::Cube)),
            Variant::ClRaw | Variant::Wcp | Variant::ClExtrapolate | Variant::ClRegression => {
                same(self.unit_poly(tape, x, params[0])?)
            }
            Variant::TanhCl => {
                let squashed = tape.unary(x, UnaryKind::Tanh);
                ActivationOutput {
                    output: self.unit_poly(tape, squashed, params[0])?,
                    poly_input: squashed,
                }
            }
            Variant::PcsCl => {
                let sims = cosine_similarity(tape, x, params[1])?;
                ActivationOutput {
                    output: self.unit_poly(tape, sims, params[0])?,
                    poly_input: sims,
                }
            }
        })
    }

    /// Registers parameters and records the activation in one step.
    pub fn apply(&self, tape: &mut Tape, x: Var) -> Result<(ActivationOutput, Vec<Var>)> {
        let params = self.register(tape);
        let out = self.forward(tape, x, &params)?;
        Ok((out, params))
    }

    /// Forward pass without gradient tracking.
    pub fn apply_values(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let params: Vec<Var> = self
            .parameters()
            .into_iter()
            .map(|t| tape.constant(t.clone()))
            .collect();
        let out = self.forward(&mut tape, xv, &params)?;
        Ok(tape.value(out.output).clone())
    }

    fn unit_poly(&self, tape: &mut Tape, x: Var, coeffs: Var) -> Result<Var> {
        let kernel = self
            .kernel
            .clone()
            .expect("polynomial variant has a kernel");
        let xt = tape.value(x);
        let ct = tape.value(coeffs);
        let count = ct.shape()[0];
        let columns = unit_columns(ct.data(), count, self.width);
        let mut out = vec![0.0; xt.numel()];
        let mut basis = vec![0.0; count];
        let mut deriv = vec![0.0; count];
        for (row_in, row_out) in xt.data().chunks(self.width).zip(out.chunks_mut(self.width)) {
            for (j, (&v, o)) in row_in.iter().zip(row_out.iter_mut()).enumerate() {
                let y = &columns[j * count..(j + 1) * count];
                *o = match &kernel {
                    UnitKernel::Raw(grid) => {
                        grid.basis_into(v, &mut basis);
                        dot(&basis, y)
                    }
                    UnitKernel::Piecewise(k) => k.eval(y, v),
                    UnitKernel::Wcp => {
                        chebyshev_terms(v, count, &mut basis, &mut deriv);
                        dot(&basis, y)
                    }
                };
            }
        }
        let t = Tensor::new(xt.shape().to_vec(), out)?;
        Ok(tape.custom(
            &[x, coeffs],
            t,
            Box::new(UnitPolyBackward {
                kernel,
                width: self.width,
                count,
                name: self.spec.variant.name(),
            }),
        ))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Transposes `(n+1) × d` storage into contiguous per-unit vectors.
fn unit_columns(data: &[f64], count: usize, width: usize) -> Vec<f64> {
    let mut cols = vec![0.0; count * width];
    for k in 0..count {
        for j in 0..width {
            cols[j * count + k] = data[k * width + j];
        }
    }
    cols
}

struct UnitPolyBackward {
    kernel: UnitKernel,
    width: usize,
    count: usize,
    name: &'static str,
}

impl Backward for UnitPolyBackward {
    fn name(&self) -> &str {
        self.name
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, g: &[f64]) -> Vec<Option<Vec<f64>>> {
        let (x, coeffs) = (inputs[0], inputs[1]);
        let (count, width) = (self.count, self.width);
        let columns = unit_columns(coeffs.data(), count, width);
        let mut dx = vec![0.0; x.numel()];
        let mut dcols = vec![0.0; count * width];
        let mut basis = vec![0.0; count];
        let mut deriv = vec![0.0; count];
        for (r, row_in) in x.data().chunks(width).enumerate() {
            for (j, &v) in row_in.iter().enumerate() {
                let idx = r * width + j;
                let gv = g[idx];
                let y = &columns[j * count..(j + 1) * count];
                let dy = &mut dcols[j * count..(j + 1) * count];
                dx[idx] = match &self.kernel {
                    UnitKernel::Piecewise(k) => k.backward(y, v, gv, dy),
                    UnitKernel::Raw(grid) => {
                        grid.basis_into(v, &mut basis);
                        dy.iter_mut().zip(&basis).for_each(|(d, l)| *d += gv * l);
                        grid.basis_grad_into(v, &mut deriv);
                        gv * dot(&deriv, y)
                    }
                    UnitKernel::Wcp => {
                        chebyshev_terms(v, count, &mut basis, &mut deriv);
                        dy.iter_mut().zip(&basis).for_each(|(d, t)| *d += gv * t);
                        gv * dot(&deriv, y)
                    }
                };
            }
        }
        let mut dcoeffs = vec![0.0; count * width];
        for k in 0..count {
            for j in 0..width {
                dcoeffs[k * width + j] = dcols[j * count + k];
            }
        }
        vec![Some(dx), Some(dcoeffs)]
    }
}

/// Cosine similarity of each row of `x` (`m × d`) against each column of
/// `prototypes` (`d × p`): `s = x·p / (|x| |p| + eps)`.
pub fn cosine_similarity(tape: &mut Tape, x: Var, prototypes: Var) -> Result<Var> {
    let (xt, pt) = (tape.value(x), tape.value(prototypes));
    let d = xt.cols();
    if pt.rank() != 2 || pt.shape()[0] != d {
        return Err(Error::ShapeMismatch {
            op: "cosine_similarity",
            lhs: xt.shape().to_vec(),
            rhs: pt.shape().to_vec(),
        });
    }
    let p = pt.shape()[1];
    let m = xt.rows();
    let pnorm = column_norms(pt.data(), d, p);
    let dots = crate::autodiff::matmul_raw(xt.data(), pt.data(), m, d, p);
    let mut out = dots;
    for (r, row) in xt.data().chunks(d).enumerate() {
        let xn = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..p {
            out[r * p + j] /= xn * pnorm[j] + COSINE_EPS;
        }
    }
    let mut shape = xt.shape().to_vec();
    *shape.last_mut().expect("rank >= 1") = p;
    let t = Tensor::new(shape, out)?;
    Ok(tape.custom(&[x, prototypes], t, Box::new(CosineBackward { d, p })))
}

fn column_norms(data: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    (0..cols)
        .map(|j| {
            (0..rows)
                .map(|i| data[i * cols + j].powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

struct CosineBackward {
    d: usize,
    p: usize,
}

impl Backward for CosineBackward {
    fn name(&self) -> &str {
        "cosine_similarity"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, g: &[f64]) -> Vec<Option<Vec<f64>>> {
        let (x, protos) = (inputs[0], inputs[1]);
        let (d, p) = (self.d, self.p);
        let pd = protos.data();
        let pnorm = column_norms(pd, d, p);
        let mut dx = vec![0.0; x.numel()];
        let mut dp = vec![0.0; d * p];
        for (r, row) in x.data().chunks(d).enumerate() {
            let xn = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            for j in 0..p {
                let gv = g[r * p + j];
                if gv == 0.0 {
                    continue;
                }
                let a: f64 = (0..d).map(|i| row[i] * pd[i * p + j]).sum();
                let denom = xn * pnorm[j] + COSINE_EPS;
                let inv = 1.0 / denom;
                let corr = a * inv * inv;
                // d|x|/dx = x/|x|, zero at the origin
                let cx = if xn > 0.0 { corr * pnorm[j] / xn } else { 0.0 };
                let cp = if pnorm[j] > 0.0 {
                    corr * xn / pnorm[j]
                } else {
                    0.0
                };
                for i in 0..d {
                    let pij = pd[i * p + j];
                    dx[r * d + i] += gv * (pij * inv - cx * row[i]);
                    dp[i * p + j] += gv * (row[i] * inv - cp * pij);
                }
            }
        }
        vec![Some(dx), Some(dp)]
    }
}

/// Gradient-check outcome for one layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerGradReport {
    pub variant: Variant,
    pub input_rel_err: f64,
    /// `(parameter name, worst relative error)`; empty for parameter-free
    /// variants.
    pub params: Vec<(String, f64)>,
    pub max_rel_err: f64,
    pub checked: usize,
}

/// Compares tape gradients of `sum(apply(x) ⊙ r)` for a random fixed `r`
/// against central differences, for the input and every parameter.
pub fn param_grads_check(
    layer: &ActivationLayer,
    batch: &Tensor,
    seed: u64,
) -> Result<LayerGradReport> {
    let mut rng = SeededRng::new(seed, crate::rng::stream::FIXTURE);
    let weights: Vec<f64> = (0..batch.numel()).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let weights = Tensor::new(batch.shape().to_vec(), weights)?;
    weighted_grads_check(layer, batch, &weights)
}

/// As [`param_grads_check`] with caller-chosen output weights `r`, e.g. a
/// one-hot `r` to isolate a single output from the rounding noise of the
/// others.
pub fn weighted_grads_check(
    layer: &ActivationLayer,
    batch: &Tensor,
    weights: &Tensor,
) -> Result<LayerGradReport> {
    if weights.shape() != batch.shape() {
        return Err(Error::ShapeMismatch {
            op: "weighted_grads_check",
            lhs: batch.shape().to_vec(),
            rhs: weights.shape().to_vec(),
        });
    }
    let mut inputs = vec![batch.clone()];
    inputs.extend(layer.parameters().into_iter().cloned());
    let report = check_gradients(&inputs, FD_STEP, |tape, vars| {
        let out = layer.forward(tape, vars[0], &vars[1..])?;
        let w = tape.constant(weights.clone());
        let prod = tape.mul(out.output, w)?;
        tape.sum(prod)
    })?;
    let mut names = Vec::new();
    if layer.coeffs.is_some() {
        names.push(if layer.variant() == Variant::Wcp {
            "theta"
        } else {
            "y"
        });
    }
    if layer.prototypes.is_some() {
        names.push("prototypes");
    }
    let params = names
        .into_iter()
        .zip(&report.per_input[1..])
        .map(|(n, e)| (n.to_string(), *e))
        .collect();
    Ok(LayerGradReport {
        variant: layer.variant(),
        input_rel_err: report.per_input[0],
        params,
        max_rel_err: report.max_rel_err,
        checked: report.checked,
    })
}
