import json

import numpy as np
import pytest

from umbra.errors import EmptyDatasetError, InvalidParameterError
from umbra.evaluate import DatasetCase
from umbra.paramlearn import (
    BOUNDS,
    DEFAULT_PARAMS,
    ObjectiveSpec,
    ParamVector,
    evaluate_objective,
    genetic_minimize,
    learn_params,
)

LOWS = np.array([b[0] for b in BOUNDS], dtype=float)
HIGHS = np.array([b[1] for b in BOUNDS], dtype=float)
RANGES = HIGHS - LOWS


# ---------------------------------------------------------------------------
# parameter vector


def test_defaults_match_published_vector():
    assert DEFAULT_PARAMS == ParamVector(14, 10, 0.1124, 0.0333, 8.5195, 0.2228)


def test_param_vector_json_round_trip():
    text = DEFAULT_PARAMS.to_json()
    payload = json.loads(text)
    assert payload == {"h1": 14, "h2": 10, "h3": 0.1124, "h4": 0.0333, "h5": 8.5195, "h6": 0.2228}
    assert ParamVector.from_json(text) == DEFAULT_PARAMS


def test_param_vector_validation():
    with pytest.raises(InvalidParameterError):
        ParamVector(2, 10, 0.1, 0.03, 8.0, 0.2)
    with pytest.raises(InvalidParameterError):
        ParamVector(14, 10, -0.1, 0.03, 8.0, 0.2)
    with pytest.raises(InvalidParameterError):
        ParamVector(14, 10, 0.1, 0.03, 0.9, 0.2)
    with pytest.raises(InvalidParameterError):
        ParamVector.from_json('{"h1": 14}')


# ---------------------------------------------------------------------------
# genetic optimizer


def planted_objective(target):
    def fitness(x):
        z = (np.asarray(x) - target) / RANGES
        return float(np.sum(z * z))

    return fitness


def test_ga_recovers_planted_optimum():
    target = np.array([14.0, 10.0, 0.1124, 0.0333, 8.5195, 0.2228])
    best_x, best_f, history = genetic_minimize(planted_objective(target), generations=50, seed=0)
    assert len(history) == 51
    err = np.abs(best_x - target)
    assert np.all(err <= 0.05 * RANGES), (best_x, err / RANGES)


def test_ga_best_fitness_non_increasing():
    _, _, history = genetic_minimize(planted_objective(LOWS + 0.3 * RANGES), generations=30, seed=3)
    assert all(b <= a + 1e-15 for a, b in zip(history[:-1], history[1:]))


def test_ga_returned_best_is_min_of_evaluated():
    seen = []

    def tracked(x):
        f = planted_objective(LOWS + 0.7 * RANGES)(x)
        seen.append(f)
        return f

    injected = DEFAULT_PARAMS.to_array()
    _, best_f, _ = genetic_minimize(tracked, generations=1, seed=5, initial=[injected])
    assert best_f == min(seen)


def test_ga_individuals_respect_bounds():
    seen = []

    def tracked(x):
        seen.append(np.asarray(x).copy())
        return planted_objective(LOWS + 0.5 * RANGES)(x)

    genetic_minimize(tracked, generations=10, seed=7)
    for ind in seen:
        assert np.all(ind >= LOWS - 1e-12) and np.all(ind <= HIGHS + 1e-12)
        assert float(ind[0]) == int(ind[0]) and float(ind[1]) == int(ind[1])


def test_ga_seeded_reproducibility():
    fit = planted_objective(LOWS + 0.4 * RANGES)
    a = genetic_minimize(fit, generations=15, seed=11)
    b = genetic_minimize(fit, generations=15, seed=11)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1] and a[2] == b[2]


def test_ga_rejects_zero_budget():
    with pytest.raises(InvalidParameterError):
        genetic_minimize(planted_objective(LOWS), generations=0)


# ---------------------------------------------------------------------------
# objective evaluation


def case_with_strokes(name):
    return DatasetCase(id=name, shadow_path=None, groundtruth_path=None, strokes_path=f"{name}.json")


def test_objective_perfect_pipeline_is_zero():
    cases = [case_with_strokes("a"), case_with_strokes("b")]
    spec = ObjectiveSpec.single_group(cases)
    total = evaluate_objective(DEFAULT_PARAMS, cases, spec, run_case=lambda p, c: 0.0)
    assert total == 0.0


def test_objective_identity_pipeline_sums_weights():
    cases = [case_with_strokes("a"), case_with_strokes("b"), case_with_strokes("c")]
    spec = ObjectiveSpec(groups=[["a"], ["b"], ["c"]], weights=[1.0, 1.0, 1.0])
    total = evaluate_objective(DEFAULT_PARAMS, cases, spec, run_case=lambda p, c: 1.0)
    assert total == pytest.approx(3.0)


def test_objective_two_measurements():
    cases = [case_with_strokes("a"), case_with_strokes("b")]
    spec = ObjectiveSpec(groups=[["a"], ["b"]], weights=[1.0, 1.0])
    ratios = {"a": 0.3, "b": 0.5}
    total = evaluate_objective(DEFAULT_PARAMS, cases, spec, run_case=lambda p, c: ratios[c.id])
    assert total == pytest.approx(0.8)


def test_objective_skips_strokeless_cases():
    cases = [case_with_strokes("a"), DatasetCase(id="nostrokes", shadow_path=None, groundtruth_path=None)]
    spec = ObjectiveSpec(groups=[["a", "nostrokes"]])
    with pytest.warns(UserWarning):
        total = evaluate_objective(DEFAULT_PARAMS, cases, spec, run_case=lambda p, c: 0.25)
    assert total == pytest.approx(0.25)


def test_objective_pipeline_failure_is_infeasible():
    from umbra.errors import NoValidSamplesError

    def failing(p, c):
        raise NoValidSamplesError("boom")

    cases = [case_with_strokes("a")]
    spec = ObjectiveSpec.single_group(cases)
    assert evaluate_objective(DEFAULT_PARAMS, cases, spec, run_case=failing) == float("inf")


def test_objective_spec_validation():
    with pytest.raises(InvalidParameterError):
        ObjectiveSpec(groups=[])
    with pytest.raises(InvalidParameterError):
        ObjectiveSpec(groups=[["a"]], weights=[1.0, 2.0])
    with pytest.raises(InvalidParameterError):
        ObjectiveSpec(groups=[["a"]], weights=[-1.0])


# ---------------------------------------------------------------------------
# learn_params


def test_learn_params_requires_strokes():
    cases = [DatasetCase(id="x", shadow_path=None, groundtruth_path=None)]
    with pytest.raises(EmptyDatasetError):
        learn_params(cases, None, budget=3)


def test_learn_params_with_stub_runner():
    cases = [case_with_strokes("a")]
    target = DEFAULT_PARAMS.to_array()

    def run_case(params, case):
        z = (params.to_array() - target) / RANGES
        return float(np.sum(z * z))

    best = learn_params(cases, None, budget=40, seed=2, run_case=run_case)
    err = np.abs(best.to_array() - target)
    assert np.all(err <= 0.08 * RANGES)
