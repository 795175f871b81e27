"""Pipeline parameter learning by mixed-integer genetic optimization.

Six tunables thread through the pipeline; two are integer kernel sizes and
four are reals. The learner minimizes a weighted sum of mean all-pixel
error ratios over training cases.
"""

from __future__ import annotations

import dataclasses
import json
import warnings

import numpy as np

from .errors import EmptyDatasetError, InvalidParameterError, UmbraError

# (low, high, is_integer) per gene; generous envelope around useful values
BOUNDS = (
    (3, 31, True),      # h1: posterior smoothing kernel size
    (3, 31, True),      # h2: fusion median window
    (0.01, 1.0, False),    # h3: outlier clustering radius
    (0.005, 0.5, False),   # h4: sub-grouping bandwidth
    (1.5, 20.0, False),    # h5: sampling-line gradient decay ratio
    (0.01, 1.0, False),    # h6: color-correction range sigma
)


@dataclasses.dataclass(frozen=True)
class ParamVector:
    """The six pipeline tunables.

    h1: Gaussian size for posterior smoothing (int); h2: median window for
    texture suppression (int); h3: clustering radius for outlier rejection;
    h4: mean-shift bandwidth for sub-grouping; h5: gradient decay ratio that
    terminates sampling lines; h6: bilateral range sigma for color
    correction.
    """

    h1: int
    h2: int
    h3: float
    h4: float
    h5: float
    h6: float

    def __post_init__(self):
        if int(self.h1) < 3 or int(self.h2) < 3:
            raise InvalidParameterError("kernel sizes h1, h2 must be integers >= 3")
        if self.h3 <= 0 or self.h4 <= 0 or self.h6 <= 0:
            raise InvalidParameterError("h3, h4, h6 must be positive")
        if self.h5 <= 1:
            raise InvalidParameterError("h5 must exceed 1")

    def to_array(self) -> np.ndarray:
        return np.array([self.h1, self.h2, self.h3, self.h4, self.h5, self.h6], dtype=np.float64)

    @classmethod
    def from_array(cls, arr) -> "ParamVector":
        a = np.asarray(arr, dtype=np.float64)
        return cls(int(round(a[0])), int(round(a[1])), float(a[2]), float(a[3]), float(a[4]), float(a[5]))

    def to_json(self) -> str:
        return json.dumps(
            {"h1": self.h1, "h2": self.h2, "h3": self.h3, "h4": self.h4, "h5": self.h5, "h6": self.h6}
        )

    @classmethod
    def from_json(cls, text: str) -> "ParamVector":
        payload = json.loads(text)
        try:
            return cls(
                int(payload["h1"]),
                int(payload["h2"]),
                float(payload["h3"]),
                float(payload["h4"]),
                float(payload["h5"]),
                float(payload["h6"]),
            )
        except KeyError as exc:
            raise InvalidParameterError(f"parameter file missing key {exc}") from exc


# learned defaults shipped with the pipeline
DEFAULT_PARAMS = ParamVector(14, 10, 0.1124, 0.0333, 8.5195, 0.2228)


@dataclasses.dataclass
class ObjectiveSpec:
    """Weighted error measurements; each measurement is the mean all-pixel
    error ratio over a group of case ids."""

    groups: list            # list of lists of case ids
    weights: list | None = None

    def __post_init__(self):
        if not self.groups:
            raise InvalidParameterError("objective needs at least one measurement group")
        if self.weights is None:
            self.weights = [1.0] * len(self.groups)
        if len(self.weights) != len(self.groups):
            raise InvalidParameterError("one weight per measurement group required")
        if any(w < 0 for w in self.weights):
            raise InvalidParameterError("weights must be non-negative")

    @classmethod
    def single_group(cls, cases) -> "ObjectiveSpec":
        return cls(groups=[[c.id for c in cases]])


def evaluate_objective(params: ParamVector, cases, objective: ObjectiveSpec, run_case=None) -> float:
    """Weighted sum of per-group mean all-pixel error ratios.

    `run_case(params, case) -> float` computes one case's all-pixel error
    ratio; the default runs the full removal pipeline with the case's
    strokes. Cases without strokes are skipped with a warning; a pipeline
    failure makes the whole vector infeasible (+inf).
    """
    if run_case is None:
        from .pipeline import score_case  # deferred: pipeline imports this module

        run_case = score_case
    by_id = {c.id: c for c in cases}
    total = 0.0
    for group, weight in zip(objective.groups, objective.weights):
        ratios = []
        for cid in group:
            case = by_id.get(cid)
            if case is None:
                continue
            if case.strokes_path is None:
                warnings.warn(f"case {cid} has no strokes; skipped", stacklevel=2)
                continue
            try:
                ratios.append(run_case(params, case))
            except UmbraError:
                return float("inf")
        if ratios:
            total += weight * float(np.mean(ratios))
    return total


def _clamp_gene(value: float, low: float, high: float, is_int: bool) -> float:
    v = min(max(value, low), high)
    return float(round(v)) if is_int else float(v)


def genetic_minimize(
    fitness,
    bounds=BOUNDS,
    generations: int = 50,
    population: int = 20,
    seed: int = 0,
    crossover_rate: float = 0.8,
    mutation_rate: float = 0.15,
    elite: int = 2,
    tournament: int = 3,
    initial=None,
    on_generation=None,
):
    """Mixed-integer GA: tournament selection, uniform crossover, per-gene
    mutation (integers resample uniformly, reals jitter by 10% of range),
    elitism. Deterministic for a fixed seed. Returns (best_x, best_f,
    history of per-generation best)."""
    if generations < 1:
        raise InvalidParameterError("budget must be >= 1 generation")
    rng = np.random.default_rng(seed)
    n_genes = len(bounds)
    lows = np.array([b[0] for b in bounds], dtype=np.float64)
    highs = np.array([b[1] for b in bounds], dtype=np.float64)
    ints = [b[2] for b in bounds]

    def random_individual():
        x = lows + rng.random(n_genes) * (highs - lows)
        return np.array([_clamp_gene(v, lo, hi, ii) for v, lo, hi, ii in zip(x, lows, highs, ints)])

    pop = []
    if initial:
        for ind in initial[:population]:
            arr = np.asarray(ind, dtype=np.float64)
            pop.append(np.array([_clamp_gene(v, lo, hi, ii) for v, lo, hi, ii in zip(arr, lows, highs, ints)]))
    while len(pop) < population:
        pop.append(random_individual())
    fits = np.array([fitness(ind) for ind in pop])

    best_i = int(np.argmin(fits))
    best_x, best_f = pop[best_i].copy(), float(fits[best_i])
    history = [best_f]

    for _ in range(generations):
        order = np.argsort(fits, kind="stable")
        next_pop = [pop[order[i]].copy() for i in range(min(elite, population))]
        while len(next_pop) < population:
            pa = _tournament_pick(pop, fits, rng, tournament)
            pb = _tournament_pick(pop, fits, rng, tournament)
            child = pa.copy()
            if rng.random() < crossover_rate:
                swap = rng.random(n_genes) < 0.5
                child[swap] = pb[swap]
            for g in range(n_genes):
                if rng.random() < mutation_rate:
                    if ints[g]:
                        child[g] = rng.integers(int(lows[g]), int(highs[g]) + 1)
                    else:
                        child[g] += rng.normal(0.0, 0.1 * (highs[g] - lows[g]))
                child[g] = _clamp_gene(child[g], lows[g], highs[g], ints[g])
            next_pop.append(child)
        pop = next_pop
        fits = np.array([fitness(ind) for ind in pop])
        gen_best = int(np.argmin(fits))
        if fits[gen_best] < best_f:
            best_x, best_f = pop[gen_best].copy(), float(fits[gen_best])
        history.append(best_f)
        if on_generation is not None:
            on_generation(len(history) - 1, best_f)
    return best_x, best_f, history


def _tournament_pick(pop, fits, rng, k):
    idx = rng.integers(0, len(pop), size=k)
    return pop[idx[np.argmin(fits[idx])]]


def learn_params(cases, objective: ObjectiveSpec | None, budget: int, seed: int = 0, initial=None, on_generation=None, run_case=None) -> ParamVector:
    """Learn the six tunables on dataset cases with stroke files."""
    usable = [c for c in cases if c.strokes_path is not None]
    if not usable:
        raise EmptyDatasetError("no case provides strokes; cannot learn parameters")
    if objective is None:
        objective = ObjectiveSpec.single_group(usable)
    init = None
    if initial:
        init = [p.to_array() if isinstance(p, ParamVector) else np.asarray(p) for p in initial]
    best_x, _, _ = genetic_minimize(
        lambda x: evaluate_objective(ParamVector.from_array(x), usable, objective, run_case=run_case),
        generations=budget,
        seed=seed,
        initial=init,
        on_generation=on_generation,
    )
    return ParamVector.from_array(best_x)
