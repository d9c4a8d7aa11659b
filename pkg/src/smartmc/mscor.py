"""Multi-run pattern search over products of unit spheres.

Each iteration builds, for every block and both directions of every
coordinate, one feasible candidate (see :mod:`smartmc.sphere`), evaluates all
of them and moves to the best one if it strictly improves the objective.  The
global step is divided by ``rho`` whenever an iteration fails to improve by at
least ``tau1``; a run ends once the step falls to ``phi``.  Runs restart from
the previous run's solution with the full initial step and stop when two
consecutive run solutions are within ``tau2`` of each other.

The engine minimizes.  To maximize a function, pass its negation.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np

from .errors import NotConverged, ObjectiveNonFinite
from .sphere import MultiSpherePoint, block_candidates, validate_point

RUN_CONVERGENCE = "run_convergence"
MAX_RUNS = "max_runs"
TIME_BUDGET = "time_budget"


@dataclass
class MscorConfig:
    s_initial: float = 1.0
    rho: float = 2.0
    phi: float = 1e-6
    lambda_: float = 0.0
    tau1: float = 1e-8
    tau2: float = 1e-4
    max_iter: int = 10000
    max_runs: int = 100
    time_budget_seconds: float | None = None
    threads: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.s_initial > 0:
            raise ValueError("s_initial must be positive")
        if not self.rho > 1:
            raise ValueError("rho must exceed 1")
        if not 0 < self.phi < self.s_initial:
            raise ValueError("need 0 < phi < s_initial")
        if self.lambda_ < 0:
            raise ValueError("lambda must be nonnegative")
        if not (self.tau1 > 0 and self.tau2 > 0):
            raise ValueError("tau1 and tau2 must be positive")
        if self.max_iter < 1 or self.max_runs < 1:
            raise ValueError("max_iter and max_runs must be positive")
        if self.time_budget_seconds is not None and not self.time_budget_seconds > 0:
            raise ValueError("time_budget_seconds must be positive")
        if self.threads < 1:
            raise ValueError("threads must be positive")

    # JSON uses the key "lambda"
    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MscorConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)} - {"lambda_"} | {"lambda"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown MSCOR config keys: {sorted(unknown)}")
        if "lambda" in d:
            d["lambda_"] = d.pop("lambda")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "MscorConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def replace(self, **changes) -> "MscorConfig":
        d = asdict(self)
        d.update(changes)
        return MscorConfig(**d)


class CallableObjective:
    """Adapts a plain ``f(point) -> float`` to the block-objective protocol.

    Block objectives expose ``bind(point) -> state``, ``value(state)`` and
    ``replaced(state, b, block)``; the last returns the objective at ``point``
    with block ``b`` swapped for ``block``.  Implementations must be
    deterministic and safe to call concurrently for distinct blocks.

    Two optional methods speed things up.  ``block_values(state, b, cands)``
    evaluates the rows of ``cands`` in one call and returns
    ``(values, tokens)``; ``accept(state, b, block, token)`` builds the state
    after a move from the matching token, and its value must equal the
    evaluated candidate value exactly.
    """

    def __init__(self, f: Callable[[MultiSpherePoint], float]):
        self.f = f

    def bind(self, point):
        return (point, float(self.f(point)))

    def value(self, state):
        return state[1]

    def replaced(self, state, b, block):
        return float(self.f(state[0].replace(b, block)))

    def block_values(self, state, b, cands):
        values = [self.replaced(state, b, c) for c in cands]
        return values, values

    def accept(self, state, b, block, token=None):
        point = state[0].replace(b, block)
        value = float(self.f(point)) if token is None else token
        return (point, value)


def as_block_objective(objective):
    if all(hasattr(objective, name) for name in ("bind", "value", "replaced")):
        return objective
    return CallableObjective(objective)


def _evaluate(objective, state, b, cands):
    if hasattr(objective, "block_values"):
        return objective.block_values(state, b, cands)
    values = [objective.replaced(state, b, c) for c in cands]
    return values, [None] * len(values)


@dataclass
class IterationResult:
    point: MultiSpherePoint
    step: float
    improved: bool
    value: float
    evaluations: int
    state: object = field(default=None, repr=False)


@dataclass
class RunResult:
    point: MultiSpherePoint
    value: float
    iterations: int
    evaluations: int
    timed_out: bool = False


@dataclass
class OptResult:
    solution: MultiSpherePoint
    objective_value: float
    runs_completed: int
    iterations_per_run: list[int]
    objective_evaluations: int
    run_best_values: list[float]
    terminated_by: str


def _checked(value, point):
    if not math.isfinite(value):
        raise ObjectiveNonFinite(point, value)
    return value


def _block_values(objective, state, point, b, step, config, fallback):
    cands, ok = block_candidates(point.blocks[b], step, config.rho, config.phi, config.lambda_)
    idx = np.flatnonzero(ok)
    values = [fallback] * ok.size
    arrays = [None] * ok.size
    tokens = [None] * ok.size
    if idx.size:
        sub = cands[idx]
        vals, toks = _evaluate(objective, state, b, sub)
        for k, h in enumerate(idx):
            v = float(vals[k])
            if not math.isfinite(v):
                raise ObjectiveNonFinite(point.replace(b, sub[k]), v)
            values[h] = v
            arrays[h] = sub[k]
            tokens[h] = toks[k]
    return values, arrays, tokens, int(idx.size)


def iterate(objective, point: MultiSpherePoint, step: float, config: MscorConfig,
            j: int = 2, state=None, executor=None) -> IterationResult:
    """One exploratory sweep at global step ``step``.

    ``j`` is the 1-based iteration index within the run; the step is only
    decayed for ``j > 1``.  Candidates are scanned block by block, each
    block's moves in the order (coord 0, -), (coord 0, +), (coord 1, -), ...;
    ties in the minimum go to the earliest slot.
    """
    objective = as_block_objective(objective)
    evaluations = 0
    if state is None:
        state = objective.bind(point)
        evaluations += 1
    f1 = _checked(objective.value(state), point)

    blocks = range(len(point.blocks))
    task = lambda b: _block_values(objective, state, point, b, step, config, f1)  # noqa: E731
    if executor is None:
        results = [task(b) for b in blocks]
    else:
        results = list(executor.map(task, blocks))

    best_val = math.inf
    best = None
    for b, (values, _, _, n_eval) in enumerate(results):
        evaluations += n_eval
        for h, v in enumerate(values):
            if v < best_val:
                best_val = v
                best = (b, h)
    f2 = best_val

    improved = False
    new_point = point
    new_state = state
    value = f1
    if f2 < f1:
        b, h = best
        new_point = point.replace(b, results[b][1][h])
        if hasattr(objective, "accept"):
            new_state = objective.accept(state, b, new_point.blocks[b], results[b][2][h])
        else:
            new_state = objective.bind(new_point)
            evaluations += 1
        value = _checked(objective.value(new_state), new_point)
        improved = True

    if j > 1 and abs(f1 - min(f1, f2)) < config.tau1 and step > config.phi:
        step = step / config.rho
    return IterationResult(new_point, step, improved, value, evaluations, new_state)


def run(objective, start: MultiSpherePoint, config: MscorConfig, executor=None,
        deadline: float | None = None) -> RunResult:
    """Iterate from ``s_initial`` until ``max_iter`` or the step reaches ``phi``."""
    objective = as_block_objective(objective)
    validate_point(start)
    state = objective.bind(start)
    evaluations = 1
    point = start
    value = _checked(objective.value(state), start)
    step = config.s_initial
    j = 1
    timed_out = False
    while j <= config.max_iter and step > config.phi:
        res = iterate(objective, point, step, config, j=j, state=state, executor=executor)
        point, step, value, state = res.point, res.step, res.value, res.state
        evaluations += res.evaluations
        j += 1
        if deadline is not None and time.monotonic() >= deadline:
            timed_out = True
            break
    return RunResult(point, value, j - 1, evaluations, timed_out)


def optimize(objective, init: MultiSpherePoint, config: MscorConfig | None = None) -> OptResult:
    """Chain runs until consecutive run solutions are within ``tau2``.

    Also stops after ``max_runs`` runs or when ``time_budget_seconds`` is
    exhausted, returning the best point found so far.  The stopping test
    needs two runs, so a successful result always has ``runs_completed >= 2``.
    """
    config = MscorConfig() if config is None else config
    objective = as_block_objective(objective)
    validate_point(init)
    deadline = None
    if config.time_budget_seconds is not None:
        deadline = time.monotonic() + config.time_budget_seconds

    executor = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    try:
        iterations = []
        run_values = []
        evaluations = 0
        previous = init
        terminated_by = MAX_RUNS
        for r in range(1, config.max_runs + 1):
            res = run(objective, previous, config, executor=executor, deadline=deadline)
            iterations.append(res.iterations)
            run_values.append(res.value)
            evaluations += res.evaluations
            if res.timed_out:
                terminated_by = TIME_BUDGET
                previous = res.point
                break
            converged = r > 1 and res.point.distance(previous) < config.tau2
            previous = res.point
            if converged:
                terminated_by = RUN_CONVERGENCE
                break
    finally:
        if executor is not None:
            executor.shutdown()

    return OptResult(
        solution=previous,
        objective_value=run_values[-1],
        runs_completed=len(iterations),
        iterations_per_run=iterations,
        objective_evaluations=evaluations,
        run_best_values=run_values,
        terminated_by=terminated_by,
    )


def detect_nonconvexity(result: OptResult) -> bool:
    """True when more than two runs were needed, i.e. at least one escape."""
    if result.terminated_by != RUN_CONVERGENCE:
        raise NotConverged(f"optimizer stopped by {result.terminated_by}")
    return result.runs_completed > 2
