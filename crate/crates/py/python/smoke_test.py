"""Smoke test for the chebylagrange extension module."""

import json
import math
import os
import tempfile

import chebylagrange as cl


def close(a, b, tol):
    assert abs(a - b) < tol, (a, b)


def main():
    nodes = cl.chebyshev_nodes(3)
    close(nodes[0], 1.0, 1e-15)
    close(nodes[-1], -1.0, 1e-15)

    # Node values of a cubic reproduce it, and the tails follow its tangent.
    p = lambda x: 0.3 - x + 0.5 * x**2 + 1.2 * x**3
    dp = lambda x: -1 + x + 3.6 * x**2
    y = [p(x) for x in nodes]
    close(cl.lagrange_eval(y, 0.37), p(0.37), 1e-12)
    close(cl.lagrange_grad(y, 0.37), dp(0.37), 1e-10)
    m_minus, m_plus = cl.tail_slopes(y)
    close(m_minus, dp(-1.0), 1e-10)
    close(m_plus, dp(1.0), 1e-10)
    close(cl.cl_piecewise(y, 2.5), p(1.0) + 1.5 * dp(1.0), 1e-10)

    bound = cl.error_bound(4, math.e)
    close(bound, math.e / (2**3 * 24), 1e-15)

    assert "pendulum" in cl.recipe_names()
    assert "cl_extrapolate" in cl.variant_names()
    close(cl.recipe_eval("prelu", [-0.5, 1.0, 0.0]), -0.05, 1e-15)
    x_train, y_train, x_test, y_test = cl.generate("step", 0.0, 1, 50, 10)
    assert len(x_train) == 50 and len(x_train[0]) == 1 and len(y_test) == 10

    assert cl.count_params("pcs_cl") == 6785
    assert cl.count_params("relu") == 3329

    model = cl.Model("cl_extrapolate", input_dim=1, width=8, seed=3)
    assert model.variant == "cl_extrapolate"
    assert model.param_count == cl.count_params("cl_extrapolate", input_dim=1, width=8)
    history, diverged, rmse = model.fit("step", epochs=3)
    assert len(history) == 3 and not diverged and rmse is not None
    pred = model.predict([[0.1], [-0.7]])
    assert len(pred) == 2
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "m.clck")
        model.save(path)
        assert cl.Model.load(path).predict([[0.1], [-0.7]]) == pred
    assert len(model.slice("step")) == 201

    results = json.loads(
        cl.run(json.dumps({
            "datasets": ["prelu"],
            "activations": ["relu"],
            "seeds": [0],
            "n_train": 32,
            "n_test": 16,
            "model": {"width": 4},
            "train": {"epochs": 1},
        }))
    )
    assert len(results) == 1

    report = cl.run_gradcheck()
    failed = [name for name, _, ok in report if not ok]
    assert not failed, failed

    try:
        cl.Model("nope")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown variant accepted")
    print("smoke test ok")


if __name__ == "__main__":
    main()
