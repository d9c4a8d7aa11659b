"""Reading, writing, preprocessing and simulating sequence data."""

from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import dataclass
from itertools import groupby

import numpy as np

from .errors import DegenerateColumn, EmptyLog, ParseError, SchemaMismatch
from .model import (
    CoefficientMatrix,
    Dataset,
    EmpiricalMatrix,
    FitResult,
    NonRareMask,
    OptimizerSummary,
    augment,
)

DEFAULT_WINDOW_DAYS = 91


# ---------------------------------------------------------------------------
# event logs
# ---------------------------------------------------------------------------

def _as_date(value):
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    return dt.date.fromisoformat(str(value).strip())


def reduce_sequence(events, window_days: int = DEFAULT_WINDOW_DAYS) -> list:
    """Collapse one subject's dated events into a state sequence.

    ``events`` is an iterable of ``(date, state)`` pairs.  Events are bucketed
    into consecutive windows of ``window_days`` days starting at the first
    event; within a window, runs of the same state count once.  Events on the
    same date keep their input order.
    """
    events = [(_as_date(d), s) for d, s in events]
    if not events:
        raise EmptyLog("no events to reduce")
    if window_days < 1:
        raise ValueError("window_days must be positive")
    events.sort(key=lambda e: e[0])
    start = events[0][0]
    out = []
    for _, window in groupby(events, key=lambda e: (e[0] - start).days // window_days):
        out.extend(state for state, _ in groupby(s for _, s in window))
    return out


def read_events_csv(path) -> dict:
    """``subject_id,date,state_label`` rows grouped by subject (file order)."""
    by_subject: dict[str, list] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["subject_id", "date", "state_label"]:
            raise SchemaMismatch(f"{path}: expected header subject_id,date,state_label, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}", path, lineno)
            sid, date, label = (c.strip() for c in row)
            try:
                date = dt.date.fromisoformat(date)
            except ValueError:
                raise ParseError(f"bad ISO date {date!r}", path, lineno, 2) from None
            if not label:
                raise ParseError("empty state label", path, lineno, 3)
            by_subject.setdefault(sid, []).append((date, label))
    return by_subject


def reduce_events(by_subject: dict, window_days: int = DEFAULT_WINDOW_DAYS, alphabet=None):
    """Reduce every subject and encode labels as 1-based integers.

    Returns ``(sequences, labels)`` where ``sequences`` maps subject id to a
    list of integer states and ``labels[v - 1]`` is the label of state ``v``.
    Without an explicit ``alphabet`` the sorted set of observed labels is used.
    """
    if alphabet is None:
        alphabet = sorted({lab for evs in by_subject.values() for _, lab in evs})
    code = {lab: i + 1 for i, lab in enumerate(alphabet)}
    out = {}
    for sid, evs in by_subject.items():
        for _, lab in evs:
            if lab not in code:
                raise SchemaMismatch(f"subject {sid}: label {lab!r} not in the alphabet")
        out[sid] = [code[lab] for lab in reduce_sequence(evs, window_days)]
    return out, list(alphabet)


# ---------------------------------------------------------------------------
# covariates
# ---------------------------------------------------------------------------

def standardize_covariates(raw, continuous_mask, names=None):
    """Center and scale continuous columns by sample mean and sample sd.

    Returns the standardized matrix and one parameter record per column
    (``{"name", "continuous", "mean", "sd"}``); non-continuous columns are
    passed through with ``mean=0, sd=1``.
    """
    X = np.array(raw, dtype=float)
    if X.ndim != 2:
        raise ValueError("raw covariates must be a 2-D array")
    mask = [bool(m) for m in continuous_mask]
    if len(mask) != X.shape[1]:
        raise ValueError("continuous_mask length differs from the number of columns")
    names = names or [f"x{j + 1}" for j in range(X.shape[1])]
    params = []
    for j, cont in enumerate(mask):
        if not cont:
            params.append({"name": names[j], "continuous": False, "mean": 0.0, "sd": 1.0})
            continue
        col = X[:, j]
        sd = float(np.std(col, ddof=1)) if col.size > 1 else 0.0
        if not sd > 0.0:
            raise DegenerateColumn(f"column {names[j]!r} has zero sample sd")
        mean = float(np.mean(col))
        X[:, j] = (col - mean) / sd
        params.append({"name": names[j], "continuous": True, "mean": mean, "sd": sd})
    return X, params


def guess_continuous(raw) -> list:
    """Columns with more than two distinct values are treated as continuous."""
    X = np.asarray(raw, dtype=float)
    return [len(np.unique(X[:, j])) > 2 for j in range(X.shape[1])]


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

@dataclass
class SimConfig:
    n_states: int = 10
    n_subjects: int = 1000
    seq_length: int = 20
    n_covariates: int = 5
    sparsity_fraction: float = 0.67
    coeff_sd: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.n_states < 1 or self.n_subjects < 1 or self.seq_length < 1:
            raise ValueError("n_states, n_subjects and seq_length must be positive")
        if self.n_covariates < 0:
            raise ValueError("n_covariates must be nonnegative")
        if not 0.0 <= self.sparsity_fraction < 1.0:
            raise ValueError("sparsity_fraction must lie in [0, 1)")
        if not self.coeff_sd > 0:
            raise ValueError("coeff_sd must be positive")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class SimulatedData:
    dataset: Dataset
    truth: CoefficientMatrix
    support: np.ndarray


def _support(N, sparsity, rng):
    rows = N + 1
    per_row = min(2, N)
    target = int(round((1.0 - sparsity) * rows * N))
    target = min(max(target, per_row * rows), rows * N)
    S = np.zeros((rows, N), dtype=bool)
    for u in range(rows):
        if u >= 1:
            S[u, u - 1] = True
        free = np.flatnonzero(~S[u])
        need = per_row - int(S[u].sum())
        if need > 0:
            S[u, rng.choice(free, size=need, replace=False)] = True
    extra = target - int(S.sum())
    if extra > 0:
        free = np.flatnonzero(~S.ravel())
        S.ravel()[rng.choice(free, size=extra, replace=False)] = True
    return S


def _restricted_softmax(Xp, beta, support):
    S = np.einsum("kj,uvj->kuv", Xp, beta)
    S = np.where(support[None], S, -np.inf)
    S = S - S.max(axis=2, keepdims=True)
    E = np.where(support[None], np.exp(S), 0.0)
    return E / E.sum(axis=2, keepdims=True)


def simulate_dataset(config: SimConfig) -> SimulatedData:
    """Synthetic cohort from a sparse covariate-driven chain.

    The support keeps every diagonal transition and at least two entries per
    row; supported entries get ``N(0, coeff_sd^2)`` coefficients scaled to
    unit norm, and probabilities are a softmax over the supported entries of
    each row.
    """
    rng = np.random.default_rng(config.seed)
    N, K, T, p = config.n_states, config.n_subjects, config.seq_length, config.n_covariates
    support = _support(N, config.sparsity_fraction, rng)
    beta = np.zeros((N + 1, N, p + 1))
    truth = CoefficientMatrix(N, p + 1)
    for u, c in zip(*np.nonzero(support)):
        b = rng.normal(0.0, config.coeff_sd, size=p + 1)
        b = b / np.linalg.norm(b)
        beta[u, c] = b
        truth[(int(u), int(c) + 1)] = b
    X = rng.standard_normal((K, p))
    P = _restricted_softmax(augment(X), beta, support)
    cum = np.cumsum(P, axis=2)
    cum[:, :, -1] = 1.0
    seqs = np.zeros((K, T), dtype=np.int64)
    rows = np.zeros(K, dtype=np.int64)
    idx = np.arange(K)
    for t in range(T):
        draw = rng.random(K)
        nxt = np.argmax(cum[idx, rows] > draw[:, None], axis=1)
        seqs[:, t] = nxt + 1
        rows = nxt + 1
    data = Dataset(N, list(seqs), X)
    return SimulatedData(data, truth, support)


# ---------------------------------------------------------------------------
# CSV datasets
# ---------------------------------------------------------------------------

def _read_csv(path, first_column="subject_id"):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaMismatch(f"{path}: empty file")
        header = [h.strip() for h in header]
        if not header or header[0] != first_column:
            raise SchemaMismatch(f"{path}: first column must be {first_column!r}, got {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", path, lineno)
            rows.append((lineno, [c.strip() for c in row]))
    return header, rows


def read_covariates_csv(path):
    """``(subject_ids, names, matrix)`` from a ``subject_id,<name>...`` CSV."""
    header, rows = _read_csv(path)
    names = header[1:]
    ids = []
    X = np.zeros((len(rows), len(names)))
    seen = set()
    for i, (lineno, row) in enumerate(rows):
        sid = row[0]
        if sid in seen:
            raise ParseError(f"duplicate subject {sid!r}", path, lineno, 1)
        seen.add(sid)
        ids.append(sid)
        for j, cell in enumerate(row[1:]):
            try:
                X[i, j] = float(cell)
            except ValueError:
                raise ParseError(f"not a number: {cell!r}", path, lineno, j + 2) from None
            if not np.isfinite(X[i, j]):
                raise ParseError(f"non-finite value {cell!r}", path, lineno, j + 2)
    return ids, names, X


def read_sequences_csv(path) -> dict:
    """Subject id -> list of 1-based states, from ``subject_id,t,state`` rows."""
    header, rows = _read_csv(path)
    if header != ["subject_id", "t", "state"]:
        raise SchemaMismatch(f"{path}: expected header subject_id,t,state, got {header}")
    positions: dict[str, dict] = {}
    for lineno, (sid, t, state) in rows:
        try:
            t = int(t)
        except ValueError:
            raise ParseError(f"position {t!r} is not an integer", path, lineno, 2) from None
        try:
            s = int(state)
        except ValueError:
            raise ParseError(f"state {state!r} is not an integer", path, lineno, 3) from None
        if t < 1:
            raise ParseError(f"position {t} must be >= 1", path, lineno, 2)
        if s < 1:
            raise ParseError(f"state {s} must be >= 1", path, lineno, 3)
        seq = positions.setdefault(sid, {})
        if t in seq:
            raise ParseError(f"duplicate position {t} for subject {sid!r}", path, lineno, 2)
        seq[t] = s
    out = {}
    for sid, seq in positions.items():
        if sorted(seq) != list(range(1, len(seq) + 1)):
            raise SchemaMismatch(f"{path}: subject {sid!r} positions are not 1..{len(seq)}")
        out[sid] = [seq[t] for t in range(1, len(seq) + 1)]
    return out


def load_dataset(sequences_path, covariates_path, n_states: int | None = None,
                 state_labels=None) -> Dataset:
    seqs = read_sequences_csv(sequences_path)
    ids, names, X = read_covariates_csv(covariates_path)
    missing = [s for s in seqs if s not in set(ids)]
    if missing:
        raise SchemaMismatch(f"subjects {missing[:5]} have sequences but no covariates")
    no_seq = [s for s in ids if s not in seqs]
    if no_seq:
        raise SchemaMismatch(f"subjects {no_seq[:5]} have covariates but no sequence")
    top = max(max(s) for s in seqs.values())
    if n_states is None:
        n_states = len(state_labels) if state_labels else top
    if top > n_states:
        raise SchemaMismatch(f"state {top} exceeds n_states={n_states}")
    return Dataset(n_states, [seqs[s] for s in ids], X, ids, names, state_labels)


def write_sequences_csv(path, subject_ids, sequences):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "t", "state"])
        for sid, seq in zip(subject_ids, sequences):
            for t, s in enumerate(seq, start=1):
                w.writerow([sid, t, int(s)])


def write_covariates_csv(path, subject_ids, names, X):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id"] + list(names))
        for sid, row in zip(subject_ids, np.asarray(X, dtype=float)):
            w.writerow([sid] + [repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# fit persistence
# ---------------------------------------------------------------------------

def fit_to_dict(fit: FitResult) -> dict:
    N = fit.n_states
    return {
        "n_states": N,
        "state_labels": list(fit.state_labels) if fit.state_labels else [str(v) for v in range(1, N + 1)],
        "tol": int(fit.mask.tol),
        "mask": fit.mask.mask.astype(int).tolist(),
        "empirical": fit.empirical.probs.tolist(),
        "inactive_rows": [int(u) for u in np.nonzero(~fit.empirical.active_rows)[0]],
        "coefficients": {f"{u},{v}": vec.tolist() for (u, v), vec in fit.coefficients.items()},
        "log_likelihood": float(fit.log_likelihood),
        "optimizer": {
            "runs": int(fit.optimizer.runs),
            "iterations": [int(i) for i in fit.optimizer.iterations],
            "evaluations": int(fit.optimizer.evaluations),
        },
        "standardization": fit.standardization,
    }


def fit_from_dict(d: dict) -> FitResult:
    required = {"n_states", "state_labels", "tol", "mask", "empirical", "inactive_rows",
                "coefficients", "log_likelihood", "optimizer", "standardization"}
    missing = required - set(d)
    if missing:
        raise SchemaMismatch(f"fit document lacks keys {sorted(missing)}")
    N = int(d["n_states"])
    mask = np.array(d["mask"], dtype=int)
    probs = np.array(d["empirical"], dtype=float)
    if mask.shape != (N + 1, N) or probs.shape != (N + 1, N):
        raise SchemaMismatch(f"mask/empirical must be {(N + 1, N)} matrices")
    active = np.ones(N + 1, dtype=bool)
    active[list(d["inactive_rows"])] = False
    coefs = {}
    for key, vec in d["coefficients"].items():
        try:
            u, v = (int(x) for x in key.split(","))
        except ValueError:
            raise SchemaMismatch(f"bad coefficient key {key!r}") from None
        coefs[(u, v)] = vec
    n_coef = len(next(iter(coefs.values()))) if coefs else (
        len(d["standardization"]) + 1 if d["standardization"] else 1)
    coeffs = CoefficientMatrix(N, n_coef, coefs)
    opt = d["optimizer"]
    return FitResult(
        coefficients=coeffs,
        mask=NonRareMask(mask.astype(bool), int(d["tol"])),
        empirical=EmpiricalMatrix(probs, active),
        log_likelihood=float(d["log_likelihood"]),
        optimizer=OptimizerSummary(int(opt["runs"]), list(opt["iterations"]), int(opt["evaluations"])),
        standardization=d["standardization"],
        state_labels=list(d["state_labels"]),
    )


def save_fit(fit: FitResult, path):
    with open(path, "w") as fh:
        json.dump(fit_to_dict(fit), fh, indent=1)
        fh.write("\n")


def load_fit(path) -> FitResult:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno, exc.colno) from None
    return fit_from_dict(d)
