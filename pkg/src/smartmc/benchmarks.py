"""Standard global-optimization test functions moved onto unit spheres.

Each function is applied block by block to ``u_b - a_b`` where ``a`` is a
feasible anchor (by default the first basis vector of every block), so the
global minimum 0 is attained on the sphere at the anchor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch
from .sphere import MultiSpherePoint, SphereShape, validate_point


def rastrigin(z):
    z = np.asarray(z, dtype=float)
    return float(np.sum(z * z - 10.0 * np.cos(2.0 * np.pi * z) + 10.0))


def ackley(z):
    z = np.asarray(z, dtype=float)
    # grouped so that both pairs cancel exactly at z = 0
    a = 20.0 - 20.0 * math.exp(-0.2 * math.sqrt(float(np.mean(z * z))))
    b = math.e - math.exp(float(np.mean(np.cos(2.0 * np.pi * z))))
    return a + b


def griewank(z):
    z = np.asarray(z, dtype=float)
    q = np.arange(1, z.size + 1)
    return float(1.0 + np.sum(z * z) / 4000.0 - np.prod(np.cos(z / np.sqrt(q))))


def sum_squares(z):
    z = np.asarray(z, dtype=float)
    return float(np.dot(z, z))


FUNCTIONS = {
    "ackley": ackley,
    "griewank": griewank,
    "neg_sum_squares": sum_squares,
    "rastrigin": rastrigin,
}


def default_anchor(shape: SphereShape) -> MultiSpherePoint:
    blocks = []
    for n in shape.block_lengths:
        e = np.zeros(n)
        e[0] = 1.0
        blocks.append(e)
    return MultiSpherePoint(blocks, shape)


@dataclass
class BenchmarkFunction:
    """Sum over blocks of a zero-at-origin test function of ``u_b - anchor_b``.

    Instances are callable and also implement the block-objective protocol
    used by :func:`smartmc.mscor.optimize`, re-evaluating only the block that
    changed.
    """

    name: str
    shape: SphereShape
    anchor: MultiSpherePoint | None = None

    def __post_init__(self):
        if self.name not in FUNCTIONS:
            raise ValueError(f"unknown benchmark {self.name!r}; choose from {sorted(FUNCTIONS)}")
        if self.anchor is None:
            self.anchor = default_anchor(self.shape)
        validate_point(self.anchor, self.shape)
        self._g = FUNCTIONS[self.name]

    def block_term(self, b, block):
        return self._g(np.asarray(block) - self.anchor.blocks[b])

    def __call__(self, point: MultiSpherePoint) -> float:
        return eval_benchmark(self, point)

    def bind(self, point):
        terms = [self.block_term(b, blk) for b, blk in enumerate(point.blocks)]
        return terms

    def value(self, terms):
        return math.fsum(terms)

    def replaced(self, terms, b, block):
        new = list(terms)
        new[b] = self.block_term(b, block)
        return math.fsum(new)

    def block_values(self, terms, b, cands):
        new = list(terms)
        values = []
        tokens = []
        for c in cands:
            new[b] = self.block_term(b, c)
            values.append(math.fsum(new))
            tokens.append(new[b])
        return values, tokens

    def accept(self, terms, b, block, token=None):
        new = list(terms)
        new[b] = self.block_term(b, block) if token is None else token
        return new


def eval_benchmark(fn: BenchmarkFunction, point: MultiSpherePoint) -> float:
    if len(point.blocks) != fn.shape.n_blocks or any(
        blk.shape != (n,) for blk, n in zip(point.blocks, fn.shape.block_lengths)
    ):
        raise ShapeMismatch("point does not match the benchmark's shape")
    return math.fsum(fn.block_term(b, blk) for b, blk in enumerate(point.blocks))
