//! Finite-difference suite over every activation variant and tape op.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::activations::{
    cosine_similarity, weighted_grads_check, ActivationLayer, ActivationSpec, Variant,
};
use crate::autodiff::check::{check_gradients, FD_STEP};
use crate::autodiff::{Tape, Tensor, UnaryKind, Var};
use crate::error::Result;
use crate::rng::{stream, SeededRng};

pub const GRADCHECK_TOL: f64 = 1e-5;
/// Activation inputs per variant.
pub const GRADCHECK_POINTS: usize = 200;
/// Inputs are drawn from `[-INPUT_RANGE, INPUT_RANGE]`.
pub const INPUT_RANGE: f64 = 5.0;
/// Minimum distance between a sample and a kink of the function under test,
/// where central differences are meaningless.
pub const KINK_MARGIN: f64 = 1e-3;

const UNITS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    pub max_rel_err: f64,
    pub checked: usize,
    pub passed: bool,
    /// Worst relative error per checked tensor.
    pub detail: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub entries: Vec<CheckEntry>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{:<4} {:<24} max_rel_err={:.3e} checked={}",
                if e.passed { "ok" } else { "FAIL" },
                e.name,
                e.max_rel_err,
                e.checked
            );
        }
        let failed = self.failures().count();
        let _ = writeln!(
            out,
            "{} of {} checks passed (tolerance {:e})",
            self.entries.len() - failed,
            self.entries.len(),
            self.tolerance
        );
        out
    }
}

fn kinks(variant: Variant) -> &'static [f64] {
    match variant {
        Variant::Relu => &[0.0],
        Variant::ClRegression | Variant::ClExtrapolate => &[-1.0, 1.0],
        _ => &[],
    }
}

/// `n` samples from `[-range, range]` kept at least `KINK_MARGIN` away
/// from every kink.
fn sample_away_from(rng: &mut SeededRng, n: usize, range: f64, kinks: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v = rng.uniform(-range, range);
        if kinks.iter().all(|k| (v - k).abs() >= KINK_MARGIN) {
            out.push(v);
        }
    }
    out
}

/// Checks input and parameter gradients of one variant with random
/// parameters at `GRADCHECK_POINTS` inputs. Each point is checked through
/// its own output alone (a one-hot output weight), so the finite-difference
/// noise of large outputs elsewhere in the batch cannot mask a small
/// gradient.
pub fn check_variant(variant: Variant, seed: u64) -> Result<CheckEntry> {
    let mut rng = SeededRng::new(seed, stream::FIXTURE);
    let mut layer = ActivationLayer::new(ActivationSpec::new(variant), UNITS, &mut rng)?;
    if let Some(c) = layer.coeffs_mut() {
        for v in c.data_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
    }
    let values = sample_away_from(&mut rng, GRADCHECK_POINTS, INPUT_RANGE, kinks(variant));
    let batch = Tensor::new(vec![GRADCHECK_POINTS / UNITS, UNITS], values)?;
    let mut detail: Vec<(String, f64)> = Vec::new();
    let mut checked = 0;
    for point in 0..batch.numel() {
        let mut onehot = Tensor::zeros(batch.shape());
        onehot.data_mut()[point] = rng.uniform(0.5, 1.5);
        let report = weighted_grads_check(&layer, &batch, &onehot)?;
        checked += report.checked;
        let errs =
            std::iter::once(("input".to_string(), report.input_rel_err)).chain(report.params);
        for (i, (name, err)) in errs.enumerate() {
            match detail.get_mut(i) {
                Some(slot) => slot.1 = slot.1.max(err),
                None => detail.push((name, err)),
            }
        }
    }
    let max_rel_err = detail.iter().map(|d| d.1).fold(0.0, f64::max);
    Ok(CheckEntry {
        name: variant.name().to_string(),
        max_rel_err,
        checked,
        passed: max_rel_err < GRADCHECK_TOL,
        detail,
    })
}

/// Checks the gradient of `sum(f(inputs) ⊙ R)` for a fixed random `R`, so
/// every output element contributes a distinct weight.
pub fn check_op<F>(name: &str, inputs: &[Tensor], seed: u64, f: F) -> Result<CheckEntry>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let probe = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        tape.value(out).shape().to_vec()
    };
    let mut rng = SeededRng::new(seed, stream::FIXTURE);
    let n: usize = probe.iter().product();
    let weights = Tensor::new(probe, (0..n).map(|_| rng.uniform(0.5, 1.5)).collect())?;
    let report = check_gradients(inputs, FD_STEP, |tape, vars| {
        let out = f(tape, vars)?;
        let w = tape.constant(weights.clone());
        let prod = tape.mul(out, w)?;
        tape.sum(prod)
    })?;
    Ok(CheckEntry {
        name: name.to_string(),
        max_rel_err: report.max_rel_err,
        checked: report.checked,
        passed: report.max_rel_err < GRADCHECK_TOL,
        detail: report
            .per_input
            .iter()
            .enumerate()
            .map(|(i, e)| (format!("input{i}"), *e))
            .collect(),
    })
}

fn random(rng: &mut SeededRng, shape: &[usize], lo: f64, hi: f64) -> Result<Tensor> {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.uniform(lo, hi)).collect(),
    )
}

/// Entries for every primitive the tape records.
pub fn check_ops(seed: u64) -> Result<Vec<CheckEntry>> {
    let mut rng = SeededRng::new(seed, stream::FIXTURE);
    let a = random(&mut rng, &[5, 4], -2.0, 2.0)?;
    let b = random(&mut rng, &[5, 4], -2.0, 2.0)?;
    let m = random(&mut rng, &[4, 3], -2.0, 2.0)?;
    let bias = random(&mut rng, &[4], -1.0, 1.0)?;
    // Away from the kinks of relu/abs at 0.
    let signed = {
        let v = sample_away_from(&mut rng, 20, 2.0, &[0.0]);
        Tensor::new(vec![5, 4], v)?
    };
    let mut entries = vec![
        check_op("matmul", &[a.clone(), m], seed, |t, v| t.matmul(v[0], v[1]))?,
        check_op("add_bias", &[a.clone(), bias], seed, |t, v| {
            t.add_bias(v[0], v[1])
        })?,
        check_op("add", &[a.clone(), b.clone()], seed, |t, v| {
            t.add(v[0], v[1])
        })?,
        check_op("sub", &[a.clone(), b.clone()], seed, |t, v| {
            t.sub(v[0], v[1])
        })?,
        check_op("mul", &[a.clone(), b.clone()], seed, |t, v| {
            t.mul(v[0], v[1])
        })?,
    ];
    let unaries = [
        UnaryKind::Relu,
        UnaryKind::Tanh,
        UnaryKind::Cube,
        UnaryKind::Sin,
        UnaryKind::Exp,
        UnaryKind::Abs,
        UnaryKind::Neg,
        UnaryKind::Scale(-1.7),
        UnaryKind::AddConst(0.3),
    ];
    for k in unaries {
        entries.push(check_op(
            k.name(),
            std::slice::from_ref(&signed),
            seed,
            move |t, v| Ok(t.unary(v[0], k)),
        )?);
    }
    entries.push(check_op("sum", std::slice::from_ref(&a), seed, |t, v| {
        t.sum(v[0])
    })?);
    entries.push(check_op("mean", std::slice::from_ref(&a), seed, |t, v| {
        t.mean(v[0])
    })?);
    let target = random(&mut rng, &[5, 4], -2.0, 2.0)?;
    let pred = {
        // Keep every residual clear of the |·| kink.
        let gaps = sample_away_from(&mut rng, 20, 1.0, &[0.0]);
        let d: Vec<f64> = target.data().iter().zip(gaps).map(|(t, g)| t + g).collect();
        Tensor::new(vec![5, 4], d)?
    };
    entries.push(check_op("l1_loss", &[pred, target], seed, |t, v| {
        t.l1_loss(v[0], v[1])
    })?);
    let labels = [0usize, 3, 1, 2, 3];
    entries.push(check_op(
        "cross_entropy",
        std::slice::from_ref(&a),
        seed,
        move |t, v| t.cross_entropy(v[0], &labels),
    )?);
    let protos = random(&mut rng, &[4, 4], -1.0, 1.0)?;
    entries.push(check_op(
        "cosine_similarity",
        &[a, protos],
        seed,
        |t, v| cosine_similarity(t, v[0], v[1]),
    )?);
    Ok(entries)
}

/// Every tape primitive, then every activation variant.
pub fn cmd_gradcheck(seed: u64) -> Result<GradcheckReport> {
    let mut entries = check_ops(seed)?;
    for v in Variant::ALL {
        entries.push(check_variant(v, seed)?);
    }
    Ok(GradcheckReport {
        tolerance: GRADCHECK_TOL,
        entries,
    })
}
