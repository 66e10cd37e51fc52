"""Smoke test for the meta_smooth_py extension.

Build and install it first, e.g.

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/meta_smooth_py-*.whl
    python python/smoke_test.py
"""

import json
import math

import meta_smooth_py as ms


def close(a, b, tol):
    return all(abs(x - y) <= tol for ra, rb in zip(a, b) for x, y in zip(ra, rb))


def main():
    model = ms.StructuralParams.preset(1)
    assert model.n == 2
    assert model.sigma_eta == [[1.0, -0.5], [-0.5, 1.5]]

    truth = model.to_reduced()
    back = truth.to_structural()
    assert close(back.sigma_eps, model.sigma_eps, 1e-10)

    gamma0, gamma1 = truth.autocov()
    assert close(gamma0, [[4.0, -0.8], [-0.8, 3.5]], 1e-12)
    assert close(gamma1, [[-1.5, 0.15], [0.15, -1.0]], 1e-12)

    # identity noise ratio: theta = (3 - sqrt 5) / 2 on the diagonal
    ident = ms.StructuralParams([[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]).to_reduced()
    assert abs(ident.theta[0][0] - (3 - math.sqrt(5)) / 2) < 1e-12

    levels = model.simulate(1000, seed=42)
    assert len(levels) == 1000 and len(levels[0]) == 2
    assert levels == model.simulate(1000, seed=42)
    z = ms.difference(levels)

    fit = ms.meta_fit(z)
    err = ms.rmse(fit.theta, truth.theta)
    assert err < 0.3, err
    assert [a[0] for a in fit.aggregates] == ["e1", "e2", "e1+e2"]
    report = json.loads(fit.to_json())
    assert report["reduced"]["theta"] == fit.theta

    ml = ms.ml_fit(z, init="meta")
    assert ml.nll(z) <= fit.reduced.nll(z) + 1e-6

    mom = ms.mom_fit(z)
    assert mom.n == 2

    yhat = fit.reduced.forecast(levels)
    assert len(yhat) == 2 and all(math.isfinite(v) for v in yhat)

    try:
        ms.meta_fit([[1.0, 2.0]] * 50)
    except ms.EstimationError:
        pass
    else:
        raise AssertionError("constant data should not fit")

    try:
        ms.ReducedParams([[1.5]], [[1.0]])
    except ValueError:
        pass
    else:
        raise AssertionError("non-invertible theta accepted")

    print("theta (meta):", fit.theta)
    print("rmse vs truth: %.4f" % err)
    print("smoke test passed")


if __name__ == "__main__":
    main()
