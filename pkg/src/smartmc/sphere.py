"""Products of unit spheres and the coordinate moves that stay on them.

A point of ``S = O^{n_1-1} x ... x O^{n_B-1}`` is stored as a list of 1-D
float arrays, one per block.  Coordinates are 0-based throughout.

Moving coordinate ``i`` of a unit vector by ``s`` leaves the sphere; the
remaining significant coordinates are then shifted by a common amount ``t``
(the adjustment step) chosen so the norm is 1 again.  Coordinates whose
magnitude is below the sparsity threshold are set to zero instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .errors import NormViolation, ShapeMismatch, ZeroVector

NORM_TOL = 1e-12


@dataclass(frozen=True)
class SphereShape:
    block_lengths: tuple[int, ...]

    def __post_init__(self):
        lengths = tuple(int(n) for n in self.block_lengths)
        if len(lengths) < 1:
            raise ValueError("need at least one block")
        if any(n < 2 for n in lengths):
            raise ValueError(f"every block needs length >= 2, got {lengths}")
        object.__setattr__(self, "block_lengths", lengths)

    @property
    def n_blocks(self) -> int:
        return len(self.block_lengths)

    @property
    def n_params(self) -> int:
        return sum(self.block_lengths)

    @classmethod
    def uniform(cls, n_blocks: int, dim: int) -> "SphereShape":
        return cls((dim,) * n_blocks)


class MultiSpherePoint:
    """A tuple of unit vectors.

    Blocks are copied to float64 on construction; no validation is done here
    (see :func:`validate_point`) so that infeasible points can be represented
    and rejected explicitly.
    """

    __slots__ = ("blocks", "shape")

    def __init__(self, blocks: Sequence[Sequence[float]], shape: SphereShape | None = None):
        self.blocks = [np.array(b, dtype=float).reshape(-1) for b in blocks]
        if shape is None:
            shape = SphereShape(tuple(len(b) for b in self.blocks))
        self.shape = shape

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def __getitem__(self, b):
        return self.blocks[b]

    def __eq__(self, other):
        if not isinstance(other, MultiSpherePoint):
            return NotImplemented
        return self.shape == other.shape and all(
            np.array_equal(a, b) for a, b in zip(self.blocks, other.blocks)
        )

    def __repr__(self):
        return f"MultiSpherePoint({[b.tolist() for b in self.blocks]})"

    def copy(self) -> "MultiSpherePoint":
        return MultiSpherePoint([b.copy() for b in self.blocks], self.shape)

    def replace(self, b: int, block) -> "MultiSpherePoint":
        """New point with block ``b`` swapped for ``block`` (other blocks shared)."""
        blocks = list(self.blocks)
        blocks[b] = np.asarray(block, dtype=float)
        out = MultiSpherePoint.__new__(MultiSpherePoint)
        out.blocks = blocks
        out.shape = self.shape
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate(self.blocks)

    def distance(self, other: "MultiSpherePoint") -> float:
        """Euclidean distance over all concatenated coordinates."""
        return float(np.linalg.norm(self.flat() - other.flat()))


def validate_point(point: MultiSpherePoint, shape: SphereShape | None = None) -> None:
    """Raise unless every block has unit norm (within 1e-12) and the shape fits."""
    shape = point.shape if shape is None else shape
    if len(point.blocks) != shape.n_blocks:
        raise ShapeMismatch(f"expected {shape.n_blocks} blocks, got {len(point.blocks)}")
    for b, (block, n) in enumerate(zip(point.blocks, shape.block_lengths)):
        if block.shape != (n,):
            raise ShapeMismatch(f"block {b} has length {block.size}, expected {n}")
        norm = float(np.linalg.norm(block))
        if not abs(norm - 1.0) <= NORM_TOL:
            raise NormViolation(b, norm)


def random_point(shape: SphereShape, rng_seed=None, max_tries: int = 100) -> MultiSpherePoint:
    """Normalized i.i.d. standard-normal blocks.

    ``rng_seed`` may be an integer or a ``numpy.random.Generator``.
    """
    rng = np.random.default_rng(rng_seed)
    blocks = []
    for n in shape.block_lengths:
        for _ in range(max_tries):
            z = rng.standard_normal(n)
            norm = np.linalg.norm(z)
            if norm > 0.0 and np.isfinite(norm):
                blocks.append(z / norm)
                break
        else:
            raise ZeroVector(f"could not draw a nonzero vector of length {n}")
    return MultiSpherePoint(blocks, shape)


class Adjustment(NamedTuple):
    t: float
    significant: tuple[int, ...]
    discriminant: float


def _discriminant(x, i, s, significant, insignificant):
    sum_g = math.fsum(x[k] for k in significant)
    sq_l = math.fsum(x[k] * x[k] for k in insignificant)
    n_g = len(significant)
    return (2.0 * sum_g) ** 2 - 4.0 * n_g * (2.0 * s * x[i] + s * s - sq_l), sum_g


def split_significant(x, i, sparsity_threshold):
    """(significant, insignificant) index tuples, both excluding ``i``."""
    sig = []
    insig = []
    for k, v in enumerate(x):
        if k == i:
            continue
        if abs(v) < sparsity_threshold:
            insig.append(k)
        else:
            sig.append(k)
    return tuple(sig), tuple(insig)


def discriminant(block, i: int, step: float, sparsity_threshold: float = 0.0) -> float:
    x = [float(v) for v in block]
    sig, insig = split_significant(x, i, sparsity_threshold)
    return _discriminant(x, i, step, sig, insig)[0]


def adjustment_step(block, i: int, step: float, sparsity_threshold: float = 0.0):
    """Common shift of the significant coordinates restoring unit norm.

    Solves ``|G| t^2 + 2 t sum_G x + (2 s x_i + s^2 - sum_L x^2) = 0`` for the
    larger root, where ``G``/``L`` are the significant/insignificant
    coordinates other than ``i``.  Returns an :class:`Adjustment`, or ``None``
    when the discriminant is negative or no coordinate is significant.
    """
    x = [float(v) for v in block]
    sig, insig = split_significant(x, i, sparsity_threshold)
    d, sum_g = _discriminant(x, i, step, sig, insig)
    if d < 0.0 or not sig:
        return None
    t = (-2.0 * sum_g + math.sqrt(d)) / (2.0 * len(sig))
    return Adjustment(t, sig, d)


@dataclass(frozen=True)
class MoveSpec:
    block: int
    coord: int
    direction: int  # +1 or -1
    step: float
    sparsity_threshold: float = 0.0

    def __post_init__(self):
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.sparsity_threshold < 0:
            raise ValueError("sparsity_threshold must be >= 0")


def _moves(x, coords, steps, rho, phi, lam):
    """Vectorized candidate construction for several moves of one block.

    ``coords[m]`` is the moved coordinate and ``steps[m]`` the signed initial
    step of move ``m``.  Returns ``(candidates, ok)``: a ``(len(coords), n)``
    array and a boolean vector, ``False`` where the block stays unchanged.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    coords = np.asarray(coords, dtype=np.intp)
    s = np.array(steps, dtype=float)
    m = coords.size
    rows = np.arange(m)
    others = np.ones((m, n), dtype=bool)
    others[rows, coords] = False
    sig_coord = np.abs(x) >= lam
    gamma = others & sig_coord
    lam_set = others & ~sig_coord
    sum_g = (gamma * x).sum(axis=1)
    sq_l = (lam_set * (x * x)).sum(axis=1)
    n_g = gamma.sum(axis=1, dtype=float)
    xi = x[coords]
    b2 = (2.0 * sum_g) * (2.0 * sum_g)

    d = b2 - 4.0 * n_g * (2.0 * s * xi + s * s - sq_l)
    # Shrinking is a short scalar loop over the few infeasible moves; Python
    # floats round exactly like the elementwise numpy expression above.
    for k in np.flatnonzero((d < 0.0) & (np.abs(s) > phi) & (n_g > 0)):
        sk, b2k, ngk, xik, sqk = float(s[k]), float(b2[k]), float(n_g[k]), float(xi[k]), float(sq_l[k])
        dk = float(d[k])
        while dk < 0.0 and abs(sk) > phi:
            sk = sk / rho
            dk = b2k - 4.0 * ngk * (2.0 * sk * xik + sk * sk - sqk)
        s[k] = sk
        d[k] = dk
    ok = (d >= 0.0) & (n_g > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = (-2.0 * sum_g + np.sqrt(np.where(ok, d, 0.0))) / (2.0 * n_g)
    y = np.where(gamma, x + t[:, None], 0.0)
    y[rows, coords] = xi + s
    norm = np.sqrt((y * y).sum(axis=1))
    with np.errstate(invalid="ignore", divide="ignore"):
        y /= norm[:, None]
    return y, ok


def propose_move(block, move: MoveSpec, rho: float = 2.0, phi: float = 1e-6):
    """Candidate block for one signed coordinate move, or ``None`` if unchanged.

    The signed step is shrunk by ``rho`` while the adjustment has no real
    solution and ``|s| > phi``.  Insignificant coordinates come out exactly
    0.0 and the result is renormalized to absorb rounding drift.
    """
    x = np.asarray(block, dtype=float)
    if not 0 <= move.coord < x.size:
        raise IndexError(f"coordinate {move.coord} out of range for block of length {x.size}")
    y, ok = _moves(x, [move.coord], [move.direction * move.step], rho, phi, move.sparsity_threshold)
    return y[0] if ok[0] else None


def block_candidates(block, step: float, rho: float, phi: float, lam: float):
    """All ``2n`` candidates of a block in scan order (coord 0 -, coord 0 +, ...).

    Returns ``(candidates, ok)`` as in :func:`_moves`; the candidates are
    bit-identical to what :func:`propose_move` gives for each move.
    """
    x = np.asarray(block, dtype=float)
    n = x.size
    coords, signs = _scan_order(n)
    return _moves(x, coords, signs * step, rho, phi, lam)


@lru_cache(maxsize=None)
def _scan_order(n):
    coords = np.repeat(np.arange(n), 2)
    signs = np.tile([-1.0, 1.0], n)
    coords.flags.writeable = False
    signs.flags.writeable = False
    return coords, signs
