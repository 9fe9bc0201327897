//! Residual MLPs: an input projection, `B` residual blocks of `L`
//! (linear + activation) layers, and a linear output head.

use serde::{Deserialize, Serialize};

use crate::activations::{ActivationLayer, ActivationSpec, Variant};
use crate::autodiff::{Tape, Tensor, UnaryKind, Var};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipMode {
    /// `block_in + block_out`
    Add,
    /// `(block_in + block_out) / 2`
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub width: usize,
    pub blocks: usize,
    pub layers_per_block: usize,
    pub activation: ActivationSpec,
    pub output_dim: usize,
    pub skip_mode: SkipMode,
}

impl ModelSpec {
    /// The 32-wide, 3-block, single-layer-per-block regression network.
    pub fn synthetic(input_dim: usize, variant: Variant) -> Self {
        Self {
            input_dim,
            width: 32,
            blocks: 3,
            layers_per_block: 1,
            activation: ActivationSpec::new(variant),
            output_dim: 1,
            skip_mode: SkipMode::Add,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.width == 0 || self.output_dim == 0 {
            return Err(Error::invalid("model dimensions must be positive"));
        }
        if self.blocks == 0 || self.layers_per_block == 0 {
            return Err(Error::invalid(
                "need at least one block and one layer per block",
            ));
        }
        self.activation.validate()
    }

    pub fn activation_sites(&self) -> usize {
        self.blocks * self.layers_per_block
    }
}

/// Closed-form trainable parameter count.
pub fn count_params(spec: &ModelSpec) -> usize {
    let (i, d, o) = (spec.input_dim, spec.width, spec.output_dim);
    let hidden = d * d + d + spec.activation.param_count(d);
    i * d + d + spec.activation_sites() * hidden + d * o + o
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// `fan_in × fan_out`, applied as `x · W + b`.
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    /// He-uniform weights in `±sqrt(6 / fan_in)`, zero bias.
    pub fn he_uniform(fan_in: usize, fan_out: usize, rng: &mut SeededRng) -> Self {
        let bound = he_bound(fan_in);
        let data = (0..fan_in * fan_out)
            .map(|_| rng.uniform(-bound, bound))
            .collect();
        Self {
            weight: Tensor::new(vec![fan_in, fan_out], data).expect("shape"),
            bias: Tensor::zeros(&[fan_out]),
        }
    }
}

fn affine(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let h = tape.matmul(x, w)?;
    tape.add_bias(h, b)
}

pub fn he_bound(fan_in: usize) -> f64 {
    (6.0 / fan_in as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayer {
    pub linear: Linear,
    pub activation: ActivationLayer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    input: Linear,
    blocks: Vec<Vec<HiddenLayer>>,
    output: Linear,
}

/// Tape handles produced by [`Model::forward`].
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub output: Var,
    /// Same order as [`Model::parameters`].
    pub params: Vec<Var>,
    /// Polynomial-stage inputs, one per activation site.
    pub activation_inputs: Vec<Var>,
}

/// Serializable parameter snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRecord {
    pub spec: ModelSpec,
    pub params: Vec<Tensor>,
}

impl Model {
    pub fn build(spec: ModelSpec, rng: &mut SeededRng) -> Result<Self> {
        spec.validate()?;
        let d = spec.width;
        let input = Linear::he_uniform(spec.input_dim, d, rng);
        let mut blocks = Vec::with_capacity(spec.blocks);
        for _ in 0..spec.blocks {
            let mut layers = Vec::with_capacity(spec.layers_per_block);
            for _ in 0..spec.layers_per_block {
                let linear = Linear::he_uniform(d, d, rng);
                let activation = ActivationLayer::new(spec.activation, d, rng)?;
                layers.push(HiddenLayer { linear, activation });
            }
            blocks.push(layers);
        }
        let output = Linear::he_uniform(d, spec.output_dim, rng);
        Ok(Self {
            spec,
            input,
            blocks,
            output,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn blocks(&self) -> &[Vec<HiddenLayer>] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Vec<HiddenLayer>] {
        &mut self.blocks
    }

    pub fn input_layer(&self) -> &Linear {
        &self.input
    }

    pub fn output_layer(&self) -> &Linear {
        &self.output
    }

    pub fn parameters(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.input.weight, &self.input.bias];
        for layer in self.blocks.iter().flatten() {
            out.push(&layer.linear.weight);
            out.push(&layer.linear.bias);
            out.extend(layer.activation.parameters());
        }
        out.push(&self.output.weight);
        out.push(&self.output.bias);
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.input.weight, &mut self.input.bias];
        for layer in self.blocks.iter_mut().flatten() {
            out.push(&mut layer.linear.weight);
            out.push(&mut layer.linear.bias);
            out.extend(layer.activation.parameters_mut());
        }
        out.push(&mut self.output.weight);
        out.push(&mut self.output.bias);
        out
    }

    pub fn param_count(&self) -> usize {
        self.parameters().iter().map(|t| t.numel()).sum()
    }

    /// Registers every parameter as a gradient-tracking leaf, in
    /// [`Model::parameters`] order.
    pub fn register(&self, tape: &mut Tape) -> Vec<Var> {
        self.parameters()
            .into_iter()
            .map(|t| tape.param(t.clone()))
            .collect()
    }

    /// Records the forward pass for a batch `x` of shape `m × input_dim`.
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<ForwardPass> {
        let params = self.register(tape);
        let (output, activation_inputs) = self.forward_with(tape, x, &params)?;
        Ok(ForwardPass {
            output,
            params,
            activation_inputs,
        })
    }

    /// Forward pass reading parameters from `params`, which must follow
    /// [`Model::parameters`] order. Returns the output and the
    /// polynomial-stage inputs of each activation site.
    pub fn forward_with(&self, tape: &mut Tape, x: Var, params: &[Var]) -> Result<(Var, Vec<Var>)> {
        let xt = tape.value(x);
        if xt.rank() != 2 || xt.cols() != self.spec.input_dim {
            return Err(Error::ShapeMismatch {
                op: "model forward",
                lhs: xt.shape().to_vec(),
                rhs: vec![self.spec.input_dim],
            });
        }
        let expected = self.parameters().len();
        if params.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: params.len(),
            });
        }
        let mut next = params.iter().copied();
        let mut take = || next.next().expect("parameter count checked");
        let mut activation_inputs = Vec::with_capacity(self.spec.activation_sites());
        let (w, b) = (take(), take());
        let mut h = affine(tape, x, w, b)?;
        for block in &self.blocks {
            let block_in = h;
            for layer in block {
                let (w, b) = (take(), take());
                let z = affine(tape, h, w, b)?;
                let act_params: Vec<Var> = (0..layer.activation.parameters().len())
                    .map(|_| take())
                    .collect();
                let out = layer.activation.forward(tape, z, &act_params)?;
                activation_inputs.push(out.poly_input);
                h = out.output;
            }
            let sum = tape.add(block_in, h)?;
            h = match self.spec.skip_mode {
                SkipMode::Add => sum,
                SkipMode::Average => tape.unary(sum, UnaryKind::Scale(0.5)),
            };
        }
        let (w, b) = (take(), take());
        let output = affine(tape, h, w, b)?;
        Ok((output, activation_inputs))
    }

    /// Forward pass without keeping the tape.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let pass = self.forward(&mut tape, xv)?;
        Ok(tape.value(pass.output).clone())
    }

    pub fn to_record(&self) -> ModelRecord {
        ModelRecord {
            spec: self.spec,
            params: self.parameters().into_iter().cloned().collect(),
        }
    }

    pub fn from_record(record: ModelRecord) -> Result<Self> {
        let spec = record.spec;
        // build a skeleton for the shapes, then overwrite every tensor
        let mut model = Model::build(spec, &mut SeededRng::new(0, 0))?;
        let slots = model.parameters_mut();
        if slots.len() != record.params.len() {
            return Err(Error::LengthMismatch {
                expected: slots.len(),
                got: record.params.len(),
            });
        }
        for (slot, t) in slots.into_iter().zip(record.params) {
            if slot.shape() != t.shape() {
                return Err(Error::ShapeMismatch {
                    op: "load parameters",
                    lhs: slot.shape().to_vec(),
                    rhs: t.shape().to_vec(),
                });
            }
            *slot = t;
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::check::{check_gradients, FD_STEP};

    fn relu_spec(blocks: usize, layers: usize) -> ModelSpec {
        ModelSpec {
            blocks,
            layers_per_block: layers,
            ..ModelSpec::synthetic(3, Variant::Relu)
        }
    }

    fn batch(rows: usize, cols: usize, seed: u64) -> Tensor {
        let mut rng = SeededRng::new(seed, 7);
        let data = (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect();
        Tensor::new(vec![rows, cols], data).unwrap()
    }

    #[test]
    fn counts_for_reference_architectures() {
        assert_eq!(count_params(&relu_spec(3, 1)), 3329);
        assert_eq!(count_params(&relu_spec(6, 1)), 6497);
        assert_eq!(count_params(&relu_spec(3, 2)), 6497);
        assert_eq!(count_params(&ModelSpec::synthetic(3, Variant::PcsCl)), 6785);
        assert_eq!(
            count_params(&ModelSpec::synthetic(3, Variant::ClExtrapolate)),
            3713
        );
        assert_eq!(count_params(&ModelSpec::synthetic(3, Variant::Tanh)), 3329);
    }

    #[test]
    fn build_matches_closed_form() {
        for v in Variant::ALL {
            for (b, l) in [(3, 1), (6, 1), (3, 2), (2, 2)] {
                let spec = ModelSpec {
                    blocks: b,
                    layers_per_block: l,
                    ..ModelSpec::synthetic(3, v)
                };
                let m = Model::build(spec, &mut SeededRng::new(1, 3)).unwrap();
                assert_eq!(m.param_count(), count_params(&spec), "{v} {b} {l}");
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut rng = SeededRng::new(0, 0);
        assert!(Model::build(relu_spec(0, 1), &mut rng).is_err());
        assert!(Model::build(relu_spec(1, 0), &mut rng).is_err());
        let spec = ModelSpec {
            width: 0,
            ..relu_spec(1, 1)
        };
        assert!(Model::build(spec, &mut rng).is_err());
    }

    #[test]
    fn he_uniform_weights_are_bounded() {
        let m = Model::build(relu_spec(3, 1), &mut SeededRng::new(4, 3)).unwrap();
        let b_in = he_bound(3);
        assert!(m.input.weight.data().iter().all(|w| w.abs() <= b_in));
        let b_hidden = he_bound(32);
        for layer in m.blocks.iter().flatten() {
            assert!(layer
                .linear
                .weight
                .data()
                .iter()
                .all(|w| w.abs() <= b_hidden));
            assert!(layer.linear.bias.data().iter().all(|b| *b == 0.0));
        }
    }

    #[test]
    fn zero_weights_with_relu_give_zero_output() {
        let mut m = Model::build(relu_spec(3, 1), &mut SeededRng::new(0, 3)).unwrap();
        for p in m.parameters_mut() {
            p.data_mut().fill(0.0);
        }
        let y = m.predict(&batch(5, 3, 1)).unwrap();
        assert!(y.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_cl_network_is_affine_in_input() {
        let spec = ModelSpec::synthetic(3, Variant::ClExtrapolate);
        let m = Model::build(spec, &mut SeededRng::new(2, 3)).unwrap();
        let x = batch(7, 3, 2);
        let y = m.predict(&x).unwrap();
        // with zero activations every block is the identity
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let w0 = tape.constant(m.input.weight.clone());
        let b0 = tape.constant(m.input.bias.clone());
        let w1 = tape.constant(m.output.weight.clone());
        let b1 = tape.constant(m.output.bias.clone());
        let h = tape.matmul(xv, w0).unwrap();
        let h = tape.add_bias(h, b0).unwrap();
        let o = tape.matmul(h, w1).unwrap();
        let o = tape.add_bias(o, b1).unwrap();
        assert_eq!(tape.value(o).data(), y.data());
    }

    #[test]
    fn forward_is_deterministic() {
        let m = Model::build(
            ModelSpec::synthetic(3, Variant::Tanh),
            &mut SeededRng::new(5, 3),
        )
        .unwrap();
        let x = batch(4, 3, 3);
        assert_eq!(m.predict(&x).unwrap(), m.predict(&x).unwrap());
    }

    #[test]
    fn input_width_is_checked() {
        let m = Model::build(relu_spec(1, 1), &mut SeededRng::new(0, 3)).unwrap();
        assert!(m.predict(&batch(2, 4, 0)).is_err());
    }

    #[test]
    fn record_round_trip() {
        let m = Model::build(
            ModelSpec::synthetic(4, Variant::PcsCl),
            &mut SeededRng::new(8, 3),
        )
        .unwrap();
        let back = Model::from_record(m.to_record()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn average_skip_halves_the_sum() {
        let spec = ModelSpec {
            skip_mode: SkipMode::Average,
            blocks: 1,
            ..ModelSpec::synthetic(2, Variant::ClExtrapolate)
        };
        let m = Model::build(spec, &mut SeededRng::new(3, 3)).unwrap();
        let x = batch(3, 2, 4);
        let y = m.predict(&x).unwrap();
        let h = {
            let mut t = Tape::new();
            let xv = t.constant(x.clone());
            let w = t.constant(m.input.weight.clone());
            let hv = t.matmul(xv, w).unwrap();
            t.value(hv).clone()
        };
        let mut t = Tape::new();
        let hv = t.constant(h);
        let half = t.unary(hv, UnaryKind::Scale(0.5));
        let w = t.constant(m.output.weight.clone());
        let o = t.matmul(half, w).unwrap();
        for (a, b) in t.value(o).data().iter().zip(y.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn full_model_gradients_match_finite_differences() {
        for v in [Variant::ClExtrapolate, Variant::Relu, Variant::PcsCl] {
            let mut m = Model::build(
                ModelSpec {
                    width: 6,
                    blocks: 2,
                    ..ModelSpec::synthetic(3, v)
                },
                &mut SeededRng::new(6, 3),
            )
            .unwrap();
            let mut rng = SeededRng::new(7, 1);
            if let Some(c) = m.blocks[0][0].activation.coeffs_mut() {
                c.data_mut()
                    .iter_mut()
                    .for_each(|y| *y = rng.uniform(-1.0, 1.0));
            }
            let x = batch(5, 3, 9);
            let target = batch(5, 1, 10);
            let params: Vec<Tensor> = m.parameters().into_iter().cloned().collect();
            let report = check_gradients(&params, FD_STEP, |tape, vars| {
                let xv = tape.constant(x.clone());
                let (out, _) = m.forward_with(tape, xv, vars)?;
                let t = tape.constant(target.clone());
                tape.l1_loss(out, t)
            })
            .unwrap();
            assert!(report.max_rel_err < 1e-4, "{v}: {report:?}");
        }
    }
}
