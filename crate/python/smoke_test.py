"""Smoke test for the lpgroth extension module; run with pytest or python."""

import json
import math

import lpgroth


def test_sphere_and_eigenvalue_limit():
    g = lpgroth.Disorder.sample(seed=3, n=8)
    assert g.n == 8 and len(g.couplings()) == 64
    res = lpgroth.maximize_sphere(g, 3.0, kappa=2, restarts=4, seed=1)
    assert res["value"] > 0 and len(res["config"]) == 16
    scalar, vector = lpgroth.scalar_vector_maxima(g, 1.5, 2, restarts=8)
    assert abs(scalar - vector) <= 1e-6 * abs(scalar)


def test_limit_constant():
    value, regime, scaling = lpgroth.limit_constant(2.0)
    assert abs(value - math.sqrt(2.0)) < 1e-12
    assert scaling == "N^0.5"


def test_parisi_round_trip():
    d = lpgroth.GramMatrix.identity(1)
    best = lpgroth.minimize_parisi(d, 3.0, 1.0, 1, reseeds=1)
    doc = json.loads(best["document"])
    assert doc["flavor"] == "finite"
    value, _ = lpgroth.parisi_eval(best["document"], 3.0, 1.0)
    assert abs(value - best["value"]) < 1e-8
    prob = lpgroth.to_probability(best["document"], 50.0)
    warm, _ = lpgroth.parisi_eval(prob, 3.0, 1.0, beta=50.0)
    assert math.isfinite(warm)


def test_verify_suite():
    checks = lpgroth.verify("linalg", seed=1)
    assert checks and all(passed for _, passed, _, _ in checks)


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            fn()
            print("ok", name)
