"""Smoke tests for the python bindings; run by ctest with PYTHONPATH set."""

import json
import math

import riskbo


def test_stats():
    value, degenerate = riskbo.alpha_max(0.05, 0.1, 5000, "hoeffding")
    assert abs(value - 0.034826) < 1e-4
    assert not degenerate

    assert riskbo.hoeffding_p_value(0.4, 50, 0.3) == 1.0
    assert riskbo.hb_p_value(0.2, 10, 0.5) <= riskbo.hoeffding_p_value(0.2, 10, 0.5)
    assert abs(riskbo.binom_cdf(2, 10, 0.5) - 56 / 1024) < 1e-12
    assert abs(riskbo.h1(0.0, 0.5) - math.log(2.0)) < 1e-12

    region = riskbo.region_of_interest([0.05], delta=0.1, delta_prime=1e-4,
                                       k=5000, m=5000, bound="hoeffding")
    assert region["low"][0] < region["alpha_max"][0] < region["high"][0]


def test_pareto():
    assert abs(riskbo.hypervolume([[0.2, 0.5], [0.5, 0.2]], [1.0, 1.0]) - 0.55) < 1e-12
    front = riskbo.pareto_front([[0.1, 0.1], [0.2, 0.2], [0.05, 0.5]])
    assert sorted(front) == [[0.05, 0.5], [0.1, 0.1]]
    gain = riskbo.hvi([0.3, 0.3], [[0.2, 0.5], [0.5, 0.2]], [1.0, 1.0])
    assert abs(gain - 0.04) < 1e-12
    value, stderr = riskbo.hypervolume_mc([[0.2, 0.2]], [1.0, 1.0],
                                          n_samples=200000, seed=3)
    assert abs(value - 0.64) <= 3 * stderr + 1e-9


def test_gp():
    inputs = [[0.1], [0.3], [0.5], [0.7], [0.9]]
    targets = [0.42] * 5
    model = riskbo.fit_gp(inputs, targets, seed=1)
    mean, variance = model.posterior([0.6])
    assert abs(mean - 0.42) < 1e-6
    assert variance >= 0.0


def test_select():
    report = json.loads(riskbo.select("fairness-like", [0.5], budget=8, init=4,
                                      k=400, m=400, seed=7))
    assert "ordering" in report and "region" in report
    assert report["chosen"] is None or "lambda" in report["chosen"]

    config = {
        "problem": "fairness-like",
        "alphas": [0.5],
        "budget": 8,
        "init": 4,
        "trials": 2,
        "k": 300,
        "m": 300,
        "seed": 11,
    }
    results = json.loads(riskbo.run_experiment(json.dumps(config)))
    assert len(results["groups"]) == 1
    assert len(results["groups"][0]["rows"]) == 2
    # deterministic given the seed
    again = json.loads(riskbo.run_experiment(json.dumps(config)))
    assert results == again


def main():
    names = [name for name in sorted(globals()) if name.startswith("test_")]
    for name in names:
        globals()[name]()
        print(f"ok {name}")
    assert set(riskbo.builtin_problems()[0]) == {"name", "dim", "constrained",
                                                 "summary"}
    print(f"{len(names)} smoke tests passed")


if __name__ == "__main__":
    main()
