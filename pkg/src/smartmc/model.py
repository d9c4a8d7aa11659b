"""Covariate-dependent Markov chains with empirically pinned rare transitions.

States are 1-based (``1..N``).  Probability matrices have shape ``(N+1, N)``:
row 0 is the initial-state distribution and row ``u`` holds the transitions
out of state ``u``.  Column ``v - 1`` corresponds to state ``v``.

An entry ``(u, v)`` is *non-rare* (masked) when its empirical count reaches
``tol``.  Masked entries get a unit-norm coefficient vector ``beta`` of length
``p + 1`` (intercept first) and share the probability mass left over by the
rare entries of their row through a softmax of ``(1, x) @ beta``.  Rare
entries keep their empirical probability for every subject.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    MissingCoefficient,
    NumericalError,
    OverflowGuard,
    SchemaMismatch,
    TolTooSmall,
    ZeroProbability,
    ZeroSelfTransition,
)
from .mscor import RUN_CONVERGENCE, MscorConfig, optimize
from .sphere import NORM_TOL, MultiSpherePoint, SphereShape, random_point

SCORE_LIMIT = 700.0


@dataclass
class Dataset:
    """``K`` subjects, each with a state sequence over ``1..N`` and ``p`` covariates."""

    n_states: int
    sequences: list
    covariates: np.ndarray
    subject_ids: list | None = None
    covariate_names: list | None = None
    state_labels: list | None = None

    def __post_init__(self):
        self.sequences = [np.asarray(s, dtype=np.int64).reshape(-1) for s in self.sequences]
        X = np.asarray(self.covariates, dtype=float)
        if X.ndim == 1:
            X = X.reshape(len(self.sequences), -1)
        self.covariates = X
        K = len(self.sequences)
        if K < 1:
            raise SchemaMismatch("dataset needs at least one subject")
        if X.shape[0] != K:
            raise SchemaMismatch(f"{K} sequences but {X.shape[0]} covariate rows")
        if self.n_states < 1:
            raise SchemaMismatch("n_states must be positive")
        for k, s in enumerate(self.sequences):
            if s.size < 1:
                raise SchemaMismatch(f"subject {k} has an empty sequence")
            if s.min() < 1 or s.max() > self.n_states:
                raise SchemaMismatch(f"subject {k} has states outside 1..{self.n_states}")
        if self.subject_ids is None:
            self.subject_ids = [str(k + 1) for k in range(K)]
        if self.covariate_names is None:
            self.covariate_names = [f"x{j + 1}" for j in range(X.shape[1])]
        if len(self.covariate_names) != X.shape[1]:
            raise SchemaMismatch("covariate_names does not match the covariate columns")
        if self.state_labels is None:
            self.state_labels = [str(v) for v in range(1, self.n_states + 1)]

    @property
    def n_subjects(self) -> int:
        return len(self.sequences)

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]

    def design(self) -> np.ndarray:
        """Covariates with a leading column of ones."""
        return augment(self.covariates)

    def subset(self, index) -> "Dataset":
        index = np.asarray(index, dtype=np.int64)
        return Dataset(
            self.n_states,
            [self.sequences[i] for i in index],
            self.covariates[index],
            [self.subject_ids[i] for i in index],
            list(self.covariate_names),
            list(self.state_labels),
        )


def augment(X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.hstack([np.ones((X.shape[0], 1)), X])


@dataclass
class CountMatrix:
    counts: np.ndarray

    @property
    def n_states(self) -> int:
        return self.counts.shape[1]


@dataclass
class EmpiricalMatrix:
    probs: np.ndarray
    active_rows: np.ndarray

    @property
    def n_states(self) -> int:
        return self.probs.shape[1]


@dataclass
class NonRareMask:
    mask: np.ndarray
    tol: int

    @property
    def complement(self) -> np.ndarray:
        return ~self.mask

    @property
    def n_masked(self) -> int:
        return int(self.mask.sum())

    def entries(self) -> list[tuple[int, int]]:
        """Masked ``(u, v)`` pairs in row-major order, ``v`` 1-based."""
        us, cols = np.nonzero(self.mask)
        return [(int(u), int(c) + 1) for u, c in zip(us, cols)]


class CoefficientMatrix:
    """Unit-norm coefficient vectors keyed by masked ``(u, v)``."""

    def __init__(self, n_states: int, n_coef: int, vectors=None):
        self.n_states = int(n_states)
        self.n_coef = int(n_coef)
        self.vectors: dict[tuple[int, int], np.ndarray] = {}
        for key, vec in (vectors or {}).items():
            self[key] = vec

    def __setitem__(self, key, vec):
        u, v = int(key[0]), int(key[1])
        if not (0 <= u <= self.n_states and 1 <= v <= self.n_states):
            raise KeyError(f"entry {(u, v)} outside a {self.n_states}-state chain")
        vec = np.array(vec, dtype=float).reshape(-1)
        if vec.size != self.n_coef:
            raise ValueError(f"coefficient vector for {(u, v)} has length {vec.size}, expected {self.n_coef}")
        norm = float(np.linalg.norm(vec))
        if not abs(norm - 1.0) <= NORM_TOL:
            raise ValueError(f"coefficient vector for {(u, v)} has norm {norm!r}")
        self.vectors[(u, v)] = vec

    def __getitem__(self, key):
        return self.vectors[(int(key[0]), int(key[1]))]

    def __contains__(self, key):
        return (int(key[0]), int(key[1])) in self.vectors

    def __len__(self):
        return len(self.vectors)

    def keys(self):
        return sorted(self.vectors)

    def items(self):
        return [(k, self.vectors[k]) for k in self.keys()]

    def __eq__(self, other):
        if not isinstance(other, CoefficientMatrix):
            return NotImplemented
        return (
            self.n_states == other.n_states
            and self.n_coef == other.n_coef
            and self.keys() == other.keys()
            and all(np.array_equal(self.vectors[k], other.vectors[k]) for k in self.keys())
        )

    def __repr__(self):
        return f"CoefficientMatrix(n_states={self.n_states}, n_coef={self.n_coef}, entries={self.keys()})"

    def unidentified(self) -> list[tuple[int, int]]:
        """Entries alone in their row; their softmax weight is always 1."""
        per_row = {}
        for u, v in self.vectors:
            per_row.setdefault(u, []).append((u, v))
        return sorted(k for ks in per_row.values() if len(ks) == 1 for k in ks)

    def aligned_with(self, mask: NonRareMask) -> bool:
        return self.keys() == mask.entries()

    def to_point(self, mask: NonRareMask) -> MultiSpherePoint:
        entries = mask.entries()
        shape = SphereShape((self.n_coef,) * len(entries))
        return MultiSpherePoint([self[e] for e in entries], shape)

    @classmethod
    def from_point(cls, point: MultiSpherePoint, mask: NonRareMask, n_states: int) -> "CoefficientMatrix":
        entries = mask.entries()
        if len(entries) != len(point.blocks):
            raise ValueError("point and mask disagree on the number of entries")
        n_coef = point.shape.block_lengths[0] if entries else 1
        out = cls(n_states, n_coef)
        for e, blk in zip(entries, point.blocks):
            out[e] = blk
        return out


# ---------------------------------------------------------------------------
# empirical structures
# ---------------------------------------------------------------------------

def count_matrix(data: Dataset) -> CountMatrix:
    N = data.n_states
    counts = np.zeros((N + 1, N), dtype=np.int64)
    for seq in data.sequences:
        counts[0, seq[0] - 1] += 1
        if seq.size > 1:
            np.add.at(counts, (seq[:-1], seq[1:] - 1), 1)
    return CountMatrix(counts)


def empirical_matrix(counts: CountMatrix) -> EmpiricalMatrix:
    c = counts.counts
    totals = c.sum(axis=1)
    active = totals > 0
    probs = np.zeros(c.shape, dtype=float)
    probs[active] = c[active] / totals[active, None]
    return EmpiricalMatrix(probs, active)


def nonrare_mask(counts: CountMatrix, tol: int, p: int) -> NonRareMask:
    if tol < p + 1:
        raise TolTooSmall(f"tol={tol} must be at least p + 1 = {p + 1}")
    return NonRareMask(counts.counts >= tol, int(tol))


def _sorted_sum(a, axis=-1):
    # order-independent row sums, so relabeling states cannot change rounding
    return np.sort(a, axis=axis).sum(axis=axis)


def _check_scores(S):
    finite = S[np.isfinite(S)]
    if finite.size and np.max(np.abs(finite)) > SCORE_LIMIT:
        raise OverflowGuard(f"linear predictor magnitude {np.max(np.abs(finite)):.1f} exceeds {SCORE_LIMIT}")


def _coef_tensor(coeffs: CoefficientMatrix, mask: NonRareMask):
    N = mask.mask.shape[1]
    beta = np.zeros((N + 1, N, coeffs.n_coef))
    for (u, v) in mask.entries():
        if (u, v) not in coeffs:
            raise MissingCoefficient(f"no coefficient vector for masked entry {(u, v)}")
        beta[u, v - 1] = coeffs[(u, v)]
    return beta


def patient_transition_matrices(coeffs: CoefficientMatrix, mask: NonRareMask,
                                empirical: EmpiricalMatrix, X) -> np.ndarray:
    """Stacked ``(K, N+1, N)`` matrices for the covariate rows of ``X``.

    Rows that are inactive in ``empirical`` (no observations) are returned as
    identity rows: row ``u`` puts all mass on state ``u``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    M_hat = empirical.probs
    N = M_hat.shape[1]
    I = mask.mask
    G = np.where(I, 0.0, M_hat)
    rare_mass = _sorted_sum(G)
    free_mass = np.maximum(1.0 - rare_mass, 0.0)

    Xp = augment(X)
    if Xp.shape[1] != coeffs.n_coef and mask.n_masked:
        raise SchemaMismatch(f"covariates give {Xp.shape[1]} design columns, coefficients have {coeffs.n_coef}")
    out = np.broadcast_to(G, (Xp.shape[0],) + G.shape).copy()
    if mask.n_masked:
        beta = _coef_tensor(coeffs, mask)
        S = np.einsum("kj,uvj->kuv", Xp, beta)
        S = np.where(I, S, -np.inf)
        _check_scores(S)
        has = I.any(axis=1)
        row_max = np.max(S, axis=2, keepdims=True)
        row_max = np.where(has[None, :, None], row_max, 0.0)
        H = np.where(I, np.exp(S - row_max), 0.0)
        H_sum = _sorted_sum(H)
        H_sum = np.where(has[None, :], H_sum, 1.0)
        share = free_mass[None, :, None] * H / H_sum[:, :, None]
        out = np.where(I[None], G[None] + share, out)
    for u in np.nonzero(~empirical.active_rows)[0]:
        out[:, u, :] = 0.0
        if u >= 1:
            out[:, u, u - 1] = 1.0
    return out


def patient_transition_matrix(coeffs: CoefficientMatrix, mask: NonRareMask,
                              empirical: EmpiricalMatrix, x) -> np.ndarray:
    """The ``(N+1, N)`` matrix for one covariate vector ``x`` of length ``p``."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return patient_transition_matrices(coeffs, mask, empirical, x)[0]


def _observed_terms(P, data: Dataset):
    rows = []
    cols = []
    subj = []
    for k, seq in enumerate(data.sequences):
        rows.append(np.concatenate([[0], seq[:-1]]))
        cols.append(seq - 1)
        subj.append(np.full(seq.size, k))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    subj = np.concatenate(subj)
    return P[subj, rows, cols]


def _sum_logs(probs):
    if np.any(probs <= 0.0):
        raise ZeroProbability("an observed transition has probability zero under the model")
    return math.fsum(np.log(probs))


def log_likelihood(coeffs: CoefficientMatrix, data: Dataset, mask: NonRareMask,
                   empirical: EmpiricalMatrix) -> float:
    """Sum over subjects of the log initial-state and transition probabilities."""
    P = patient_transition_matrices(coeffs, mask, empirical, data.covariates)
    return _sum_logs(_observed_terms(P, data))


def plugin_log_likelihood(data: Dataset, empirical: EmpiricalMatrix) -> float:
    """Log-likelihood with every entry at its empirical probability."""
    K = data.n_subjects
    P = np.broadcast_to(empirical.probs, (K,) + empirical.probs.shape)
    return _sum_logs(_observed_terms(P, data))


# ---------------------------------------------------------------------------
# fast objective for the optimizer
# ---------------------------------------------------------------------------

class _Row:
    __slots__ = ("u", "cols", "X", "weights", "linear", "const")


def _lse(S):
    m = S.max(axis=1)
    return m + np.log(np.exp(S - m[:, None]).sum(axis=1))


class _RowState:
    __slots__ = ("scores", "linear", "lse_without", "term")


class NegLogLikelihood:
    """Negative log-likelihood over the masked coefficient blocks.

    Each block is one masked entry; changing it only touches its own row.  For
    every row the bound state caches, per column, the log-sum-exp of the
    other columns' scores, so a candidate costs one matrix-vector product and
    one ``logaddexp``.  Row terms are combined with ``math.fsum``.
    """

    def __init__(self, data: Dataset, mask: NonRareMask, empirical: EmpiricalMatrix):
        self.mask = mask
        self.empirical = empirical
        self.entries = mask.entries()
        N = data.n_states
        K = data.n_subjects
        Xp = data.design()
        self.n_coef = Xp.shape[1]

        per_subject = np.zeros((K, N + 1, N), dtype=np.int64)
        for k, seq in enumerate(data.sequences):
            per_subject[k, 0, seq[0] - 1] += 1
            if seq.size > 1:
                np.add.at(per_subject[k], (seq[:-1], seq[1:] - 1), 1)
        totals = per_subject.sum(axis=0)

        G = np.where(mask.mask, 0.0, empirical.probs)
        rare_mass = _sorted_sum(G)

        self.rows = []
        self.block_row = []
        for u in range(N + 1):
            row = _Row()
            row.u = u
            cols = [v - 1 for (uu, v) in self.entries if uu == u]
            row.cols = cols
            const_terms = []
            for c in range(N):
                if not mask.mask[u, c] and totals[u, c] > 0:
                    const_terms.append(totals[u, c] * math.log(empirical.probs[u, c]))
            if cols:
                n_masked = per_subject[:, u, cols]
                w = n_masked.sum(axis=1)
                keep = w > 0
                row.X = np.ascontiguousarray(Xp[keep])
                row.weights = w[keep].astype(float)
                row.linear = [n_masked[:, j].astype(float) @ Xp for j in range(len(cols))]
                total_masked = int(w.sum())
                if total_masked > 0:
                    const_terms.append(total_masked * math.log(max(1.0 - rare_mass[u], 0.0)))
            row.const = math.fsum(const_terms)
            self.rows.append(row)
            for j in range(len(cols)):
                self.block_row.append((u, j))
        self.shape = SphereShape((self.n_coef,) * len(self.entries)) if self.entries else None

    def _term(self, row, lin, lse):
        return math.fsum([row.const] + lin) - float(row.weights @ lse)

    def _row_state(self, row, S, lin, term=None):
        rs = _RowState()
        rs.scores = S
        rs.linear = lin
        m = S.shape[1]
        if m == 1:
            rs.lse_without = [np.full(S.shape[0], -np.inf)]
        else:
            rs.lse_without = [_lse(np.delete(S, j, axis=1)) for j in range(m)]
        if term is None:
            term = self._term(row, lin, _lse(S))
        rs.term = term
        return rs

    def bind(self, point: MultiSpherePoint):
        states = []
        b = 0
        for row in self.rows:
            if not row.cols:
                states.append(row.const)
                continue
            betas = point.blocks[b:b + len(row.cols)]
            b += len(row.cols)
            S = np.column_stack([row.X @ beta for beta in betas])
            lin = [float(a @ beta) for a, beta in zip(row.linear, betas)]
            states.append(self._row_state(row, S, lin))
        return states

    @staticmethod
    def _terms(states):
        return [s if isinstance(s, float) else s.term for s in states]

    def value(self, states) -> float:
        return -math.fsum(self._terms(states))

    def replaced(self, states, b, block) -> float:
        values, _ = self.block_values(states, b, np.asarray(block, dtype=float)[None, :])
        return values[0]

    def block_values(self, states, b, cands):
        """Objective values for several candidate blocks of block ``b``.

        Returns ``(values, tokens)``; passing a token to :meth:`accept` gives
        a state whose value equals the corresponding entry exactly.
        """
        u, j = self.block_row[b]
        row = self.rows[u]
        rs = states[u]
        S_new = row.X @ cands.T
        a = rs.lse_without[j][:, None]
        diff = S_new - a
        if diff.size and np.max(diff) < 700.0:
            lse = a + np.log1p(np.exp(diff))
        else:
            lse = np.logaddexp(a, S_new)
        wl = row.weights @ lse
        lin_j = cands @ row.linear[j]
        terms = self._terms(states)
        values = []
        tokens = []
        for c in range(cands.shape[0]):
            lin = list(rs.linear)
            lin[j] = float(lin_j[c])
            term = math.fsum([row.const] + lin) - float(wl[c])
            terms[u] = term
            values.append(-math.fsum(terms))
            tokens.append((S_new[:, c].copy(), lin, term))
        return values, tokens

    def accept(self, states, b, block, token=None):
        """State after moving block ``b``; its value equals ``replaced`` exactly."""
        u, j = self.block_row[b]
        if token is None:
            token = self.block_values(states, b, np.asarray(block, dtype=float)[None, :])[1][0]
        s_new, lin, term = token
        S = states[u].scores.copy()
        S[:, j] = s_new
        new = list(states)
        new[u] = self._row_state(self.rows[u], S, lin, term)
        return new

    def __call__(self, point: MultiSpherePoint) -> float:
        return self.value(self.bind(point))


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

@dataclass
class OptimizerSummary:
    runs: int
    iterations: list
    evaluations: int


@dataclass
class FitResult:
    coefficients: CoefficientMatrix
    mask: NonRareMask
    empirical: EmpiricalMatrix
    log_likelihood: float
    optimizer: OptimizerSummary
    standardization: list | None = None
    state_labels: list | None = None
    terminated_by: str | None = field(default=None, compare=False)

    @property
    def n_states(self) -> int:
        return self.empirical.n_states

    def __eq__(self, other):
        if not isinstance(other, FitResult):
            return NotImplemented
        return (
            self.coefficients == other.coefficients
            and np.array_equal(self.mask.mask, other.mask.mask)
            and self.mask.tol == other.mask.tol
            and np.array_equal(self.empirical.probs, other.empirical.probs)
            and np.array_equal(self.empirical.active_rows, other.empirical.active_rows)
            and self.log_likelihood == other.log_likelihood
            and self.optimizer == other.optimizer
            and self.standardization == other.standardization
            and self.state_labels == other.state_labels
        )

    def standardize(self, X_raw) -> np.ndarray:
        """Apply the recorded covariate standardization to raw covariates."""
        X = np.atleast_2d(np.asarray(X_raw, dtype=float)).copy()
        if not self.standardization:
            return X
        for j, col in enumerate(self.standardization):
            if col.get("continuous"):
                X[:, j] = (X[:, j] - col["mean"]) / col["sd"]
        return X

    def transition_matrices(self, X) -> np.ndarray:
        return patient_transition_matrices(self.coefficients, self.mask, self.empirical, X)


def _fit_with_mask(data: Dataset, mask: NonRareMask, config: MscorConfig, n_starts: int = 1):
    counts = count_matrix(data)
    empirical = empirical_matrix(counts)
    n_coef = data.n_covariates + 1
    entries = mask.entries()
    if not entries:
        ll = plugin_log_likelihood(data, empirical)
        return (CoefficientMatrix(data.n_states, n_coef), empirical, ll,
                OptimizerSummary(0, [], 0), RUN_CONVERGENCE)
    objective = NegLogLikelihood(data, mask, empirical)
    rng = np.random.default_rng(config.seed)
    best = None
    for _ in range(max(1, n_starts)):
        init = random_point(objective.shape, rng)
        res = optimize(objective, init, config)
        if best is None or res.objective_value < best.objective_value:
            best = res
    coeffs = CoefficientMatrix.from_point(best.solution, mask, data.n_states)
    ll = log_likelihood(coeffs, data, mask, empirical)
    summary = OptimizerSummary(best.runs_completed, list(best.iterations_per_run), best.objective_evaluations)
    return coeffs, empirical, ll, summary, best.terminated_by


def fit(data: Dataset, tol: int, mscor_config: MscorConfig | None = None,
        n_starts: int = 1, standardization=None) -> FitResult:
    """Maximum-likelihood coefficients for every non-rare entry.

    The starting point is drawn from ``mscor_config.seed``; with
    ``n_starts > 1`` the best of several seeded starts is kept.
    """
    config = MscorConfig() if mscor_config is None else mscor_config
    counts = count_matrix(data)
    mask = nonrare_mask(counts, tol, data.n_covariates)
    coeffs, empirical, ll, summary, how = _fit_with_mask(data, mask, config, n_starts)
    return FitResult(coeffs, mask, empirical, ll, summary, standardization,
                     list(data.state_labels), terminated_by=how)


def coefficient_mad(est: CoefficientMatrix, truth: CoefficientMatrix, counts: CountMatrix,
                    top_k: int = 10, include_initial: bool = False) -> float:
    """Mean absolute deviation over the ``top_k`` most frequent estimated entries.

    Entries are ranked by count, ties broken by ``(u, v)``; row 0 is skipped
    unless ``include_initial``.
    """
    keys = [k for k in est.keys() if include_initial or k[0] >= 1]
    c = counts.counts
    keys.sort(key=lambda k: (-int(c[k[0], k[1] - 1]), k))
    chosen = keys[:top_k]
    if len(chosen) < top_k:
        raise MissingCoefficient(f"only {len(chosen)} estimated entries available, need {top_k}")
    diffs = []
    for k in chosen:
        if k not in truth:
            raise MissingCoefficient(f"truth has no coefficient vector for {k}")
        diffs.append(np.abs(est[k] - truth[k]))
    return float(np.mean(np.concatenate(diffs)))


@dataclass
class BootstrapResult:
    se: dict
    n_used: int
    n_failed: int
    replicates: list


def bootstrap_se(data: Dataset, tol: int, mscor_config: MscorConfig | None = None,
                 n_boot: int = 100, seed: int = 0, workers: int = 1,
                 require_convergence: bool = True) -> BootstrapResult:
    """Bootstrap standard errors of the fitted coefficients.

    Subjects are resampled with replacement; the non-rare mask is fixed from
    the full data while empirical probabilities are recomputed per replicate.
    Every replicate starts the optimizer from the same seeded point so the
    replicates are comparable.  Replicates raising a numerical error, or not
    reaching run convergence when ``require_convergence`` is set, are dropped
    and counted in ``n_failed``.
    """
    if n_boot < 2:
        raise ValueError("n_boot must be at least 2")
    config = MscorConfig() if mscor_config is None else mscor_config
    counts = count_matrix(data)
    mask = nonrare_mask(counts, tol, data.n_covariates)
    K = data.n_subjects
    children = np.random.SeedSequence(seed).spawn(n_boot)
    indices = [np.random.default_rng(ch).integers(0, K, size=K) for ch in children]

    def one(idx):
        try:
            coeffs, _, _, _, how = _fit_with_mask(data.subset(idx), mask, config)
        except NumericalError:
            return None
        if require_convergence and how != RUN_CONVERGENCE:
            return None
        return coeffs

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            fits = list(ex.map(one, indices))
    else:
        fits = [one(idx) for idx in indices]

    good = [f for f in fits if f is not None]
    n_failed = len(fits) - len(good)
    if len(good) < 2:
        raise NumericalError(f"only {len(good)} bootstrap replicates succeeded")
    se = {}
    for key in mask.entries():
        stack = np.vstack([f[key] for f in good])
        se[key] = stack.std(axis=0, ddof=1)
    return BootstrapResult(se, len(good), n_failed, good)


def odds_ratios(fit: FitResult, x, from_state: int, to_states, odds: bool = False) -> list[float]:
    """Ratio of ``m[u, v]`` to the self-transition ``m[u, u]`` for each ``v``.

    ``x`` is on the model (standardized) scale.  With ``odds=True`` the ratio
    of odds ``p / (1 - p)`` is returned instead of the probability ratio.
    """
    u = int(from_state)
    N = fit.n_states
    if not 1 <= u <= N:
        raise ValueError(f"from_state must be in 1..{N}")
    if not fit.empirical.active_rows[u]:
        raise ValueError(f"state {u} has no observed transitions")
    P = fit.transition_matrices(np.asarray(x, dtype=float).reshape(1, -1))[0]
    row = P[u]
    stay = row[u - 1]
    if stay <= 0.0:
        raise ZeroSelfTransition(f"state {u} has zero self-transition probability")
    out = []
    for v in to_states:
        m = row[int(v) - 1]
        if odds:
            out.append(float((m / (1.0 - m)) / (stay / (1.0 - stay))) if m < 1.0 else math.inf)
        else:
            out.append(float(m / stay))
    return out
