use chebyshev_lagrange::activations::Variant;
use chebyshev_lagrange::autodiff::{Backward, Tensor};
use chebyshev_lagrange::bench::checkpoint;
use chebyshev_lagrange::bench::gradcheck::{check_op, GRADCHECK_TOL};
use chebyshev_lagrange::bench::tabular::Metrics;
use chebyshev_lagrange::bench::{cmd_run, cmd_slice, RunConfig, SLICE_POINTS};
use chebyshev_lagrange::data::{Recipe, Split};
use chebyshev_lagrange::models::{Model, ModelSpec};
use chebyshev_lagrange::rng::SeededRng;
use chebyshev_lagrange::training::evaluate_rmse;

const CUBIC: [f64; 4] = [0.2, -0.7, 0.4, 1.1];

fn p(v: f64) -> f64 {
    CUBIC.iter().rev().fold(0.0, |acc, c| acc * v + c)
}

fn dp(v: f64) -> f64 {
    CUBIC[1] + 2.0 * CUBIC[2] * v + 3.0 * CUBIC[3] * v * v
}

/// One-unit network computing `p(x0)`: the projection and hidden linear map
/// pass `x0` through, the activation holds `p(x) - x`, and the skip adds
/// `x` back.
fn oracle(input_dim: usize) -> Model {
    let spec = ModelSpec {
        width: 1,
        blocks: 1,
        ..ModelSpec::synthetic(input_dim, Variant::ClExtrapolate)
    };
    let mut model = Model::build(spec, &mut SeededRng::new(0, 3)).unwrap();
    let nodes = model.blocks()[0][0].activation.nodes().unwrap().to_vec();
    let mut params = model.parameters_mut();
    assert_eq!(params.len(), 7);
    let mut input_w = vec![0.0; input_dim];
    input_w[0] = 1.0;
    params[0].data_mut().copy_from_slice(&input_w);
    params[1].data_mut()[0] = 0.0;
    params[2].data_mut()[0] = 1.0;
    params[3].data_mut()[0] = 0.0;
    for (c, x) in params[4].data_mut().iter_mut().zip(&nodes) {
        *c = p(*x) - x;
    }
    params[5].data_mut()[0] = 1.0;
    params[6].data_mut()[0] = 0.0;
    model
}

#[test]
fn oracle_network_reproduces_a_cubic() {
    let model = oracle(1);
    let xs: Vec<f64> = (0..101).map(|i| -1.0 + 0.02 * i as f64).collect();
    let split = Split {
        x: Tensor::new(vec![xs.len(), 1], xs.clone()).unwrap(),
        y: Tensor::new(vec![xs.len(), 1], xs.iter().map(|&v| p(v)).collect()).unwrap(),
    };
    let err = evaluate_rmse(&model, &split).unwrap();
    assert!(err < 1e-9, "{err}");

    // Outside [-1, 1] the network follows the tangent of p at the edge.
    let far = Tensor::new(vec![2, 1], vec![-3.0, 2.5]).unwrap();
    let out = model.predict(&far).unwrap();
    assert!((out.data()[0] - (p(-1.0) - 2.0 * dp(-1.0))).abs() < 1e-9);
    assert!((out.data()[1] - (p(1.0) + 1.5 * dp(1.0))).abs() < 1e-9);
}

#[test]
fn oracle_slice_matches_closed_form() {
    let model = oracle(Recipe::Pendulum.input_dim());
    let rows = cmd_slice(&model, Recipe::Pendulum).unwrap();
    assert_eq!(rows.len(), SLICE_POINTS);
    for [x0, _, pred] in rows {
        assert!((pred - p(x0)).abs() < 1e-9, "{x0}: {pred}");
    }
}

#[test]
fn untrained_cl_network_is_affine() {
    let spec = ModelSpec::synthetic(Recipe::Gravity.input_dim(), Variant::ClExtrapolate);
    let model = Model::build(spec, &mut SeededRng::new(9, 3)).unwrap();
    let rows = cmd_slice(&model, Recipe::Gravity).unwrap();
    for w in rows.windows(3) {
        let second = w[0][2] - 2.0 * w[1][2] + w[2][2];
        assert!(second.abs() < 1e-12, "{second}");
    }
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let spec = ModelSpec::synthetic(3, Variant::PcsCl);
    let mut model = Model::build(spec, &mut SeededRng::new(2, 3)).unwrap();
    let mut rng = SeededRng::new(2, 5);
    for t in model.parameters_mut() {
        for v in t.data_mut() {
            *v += rng.uniform(-0.1, 0.1);
        }
    }
    let x = Tensor::new(
        vec![7, 3],
        (0..21).map(|i| (i as f64 * 0.7).sin() * 3.0).collect(),
    )
    .unwrap();
    let bytes = checkpoint::encode(&model).unwrap();
    let back = checkpoint::decode(&bytes).unwrap();
    assert_eq!(back, model);
    let (a, b) = (model.predict(&x).unwrap(), back.predict(&x).unwrap());
    for (u, v) in a.data().iter().zip(b.data()) {
        assert_eq!(u.to_bits(), v.to_bits());
    }
}

#[test]
fn metrics_on_degenerate_folds() {
    let m = Metrics::compute(&[0, 0, 1], &[0, 0, 0]);
    assert_eq!(m.sensitivity, 0.0);
    assert!((m.specificity - 200.0 / 3.0).abs() < 1e-12);
    let m = Metrics::compute(&[0, 0], &[0, 0]);
    assert_eq!(
        (m.accuracy, m.sensitivity, m.specificity, m.micro_f1),
        (100.0, 0.0, 100.0, 100.0)
    );
    let m = Metrics::compute(&[1, 0, 1, 1], &[1, 0, 0, 1]);
    assert_eq!(
        (m.accuracy, m.sensitivity, m.specificity),
        (75.0, 100.0, 50.0)
    );
    assert_eq!(m.micro_f1, m.accuracy);
}

/// `x²` with a derivative that is 1% too large.
struct BrokenSquare;

impl Backward for BrokenSquare {
    fn name(&self) -> &str {
        "broken_square"
    }

    fn backward(
        &self,
        inputs: &[&Tensor],
        _output: &Tensor,
        upstream: &[f64],
    ) -> Vec<Option<Vec<f64>>> {
        let g = inputs[0]
            .data()
            .iter()
            .zip(upstream)
            .map(|(x, u)| 2.02 * x * u)
            .collect();
        vec![Some(g)]
    }
}

#[test]
fn gradcheck_flags_a_wrong_backward_rule() {
    let x = Tensor::new(vec![2, 3], vec![0.3, -1.2, 0.8, 1.5, -0.4, 2.0]).unwrap();
    let entry = check_op("broken_square", &[x], 0, |tape, v| {
        let out = Tensor::new(
            tape.value(v[0]).shape().to_vec(),
            tape.value(v[0]).data().iter().map(|a| a * a).collect(),
        )?;
        Ok(tape.custom(&[v[0]], out, Box::new(BrokenSquare)))
    })
    .unwrap();
    assert_eq!(entry.name, "broken_square");
    assert!(!entry.passed);
    assert!(
        entry.max_rel_err > 100.0 * GRADCHECK_TOL,
        "{}",
        entry.max_rel_err
    );
}

#[test]
fn run_grid_has_one_result_per_cell() {
    let mut config = RunConfig::new(
        vec![Recipe::Prelu, Recipe::Step],
        vec![Variant::Relu, Variant::Wcp],
    );
    config.noise_sd = vec![0.0, 0.05];
    config.seeds = vec![0, 4];
    config.n_train = 40;
    config.n_test = 20;
    config.model.width = 4;
    config.train.epochs = 2;
    let a = cmd_run(&config, Some(1)).unwrap();
    assert_eq!(a.len(), 2 * 2 * 2 * 2);
    assert_eq!(a, cmd_run(&config, Some(2)).unwrap());
    // Activations share the data of a (dataset, seed) cell but not the init.
    let seeds: std::collections::BTreeSet<u64> = a.iter().map(|r| r.run_seed).collect();
    assert_eq!(seeds.len(), 2 * 2 * 2);
}
