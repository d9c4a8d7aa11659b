import datetime as dt
import json

import numpy as np
import pytest

from smartmc.data_io import (
    SimConfig,
    fit_from_dict,
    fit_to_dict,
    guess_continuous,
    load_dataset,
    load_fit,
    read_events_csv,
    reduce_events,
    reduce_sequence,
    save_fit,
    simulate_dataset,
    standardize_covariates,
    write_covariates_csv,
    write_sequences_csv,
)
from smartmc.errors import DegenerateColumn, EmptyLog, ParseError, SchemaMismatch
from smartmc.model import count_matrix, fit
from smartmc.mscor import MscorConfig

DAY0 = dt.date(2021, 3, 1)


def events(labels, gaps=None):
    gaps = gaps or [1] * len(labels)
    out, day = [], DAY0
    for lab, g in zip(labels, gaps):
        out.append((day, lab))
        day += dt.timedelta(days=int(g))
    return out


class TestReduceSequence:
    def test_single_state_window(self):
        assert reduce_sequence(events("AAA")) == ["A"]

    def test_worked_example(self):
        assert reduce_sequence(events("AABBACC")) == ["A", "B", "A", "C"]

    def test_window_boundary_keeps_repeat(self):
        assert reduce_sequence(events("AA", gaps=[120, 1])) == ["A", "A"]

    def test_unsorted_input(self):
        evs = events("ABC")
        assert reduce_sequence(evs[::-1]) == ["A", "B", "C"]

    def test_window_length(self):
        evs = [(DAY0, "A"), (DAY0 + dt.timedelta(days=90), "A"), (DAY0 + dt.timedelta(days=91), "A")]
        assert reduce_sequence(evs) == ["A", "A"]
        assert reduce_sequence(evs, window_days=92) == ["A"]

    def test_empty(self):
        with pytest.raises(EmptyLog):
            reduce_sequence([])

    def test_idempotent_on_window_positions(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            labels = rng.choice(list("ABC"), size=int(rng.integers(1, 30)))
            gaps = rng.integers(0, 60, size=labels.size)
            once = reduce_sequence(events(list(labels), list(gaps)))
            again = reduce_sequence([(DAY0 + dt.timedelta(days=91 * k), s) for k, s in enumerate(once)])
            assert again == once


class TestEventsCsv:
    def test_read_and_encode(self, tmp_path):
        path = tmp_path / "ev.csv"
        path.write_text("subject_id,date,state_label\n"
                        "s1,2020-01-01,Nat\ns1,2020-01-02,Nat\ns1,2020-05-01,Fin\ns2,2020-02-02,Fin\n")
        seqs, labels = reduce_events(read_events_csv(path))
        assert labels == ["Fin", "Nat"]
        assert seqs == {"s1": [2, 1], "s2": [1]}

    def test_bad_date(self, tmp_path):
        path = tmp_path / "ev.csv"
        path.write_text("subject_id,date,state_label\ns1,2020-13-01,A\n")
        with pytest.raises(ParseError) as info:
            read_events_csv(path)
        assert (info.value.line, info.value.column) == (2, 2)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "ev.csv"
        path.write_text("id,when,what\n")
        with pytest.raises(SchemaMismatch):
            read_events_csv(path)

    def test_label_outside_alphabet(self):
        with pytest.raises(SchemaMismatch):
            reduce_events({"a": events("AB")}, alphabet=["A"])


class TestStandardize:
    def test_sample_sd(self):
        X, params = standardize_covariates([[1.0], [2.0], [3.0]], [True])
        np.testing.assert_allclose(X[:, 0], [-1.0, 0.0, 1.0])
        assert params[0]["sd"] == 1.0

    def test_binary_passthrough(self):
        X, params = standardize_covariates([[0.0], [1.0], [1.0]], [False])
        np.testing.assert_array_equal(X[:, 0], [0.0, 1.0, 1.0])
        assert params[0]["continuous"] is False

    def test_degenerate(self):
        with pytest.raises(DegenerateColumn):
            standardize_covariates([[2.0], [2.0]], [True])

    def test_moments(self):
        rng = np.random.default_rng(1)
        raw = np.column_stack([rng.normal(40, 12, 500), rng.integers(0, 2, 500), rng.gamma(2, 3, 500)])
        X, _ = standardize_covariates(raw, guess_continuous(raw))
        for j in (0, 2):
            assert abs(X[:, j].mean()) <= 1e-12
            assert abs(X[:, j].std(ddof=1) - 1.0) <= 1e-12
        np.testing.assert_array_equal(X[:, 1], raw[:, 1])


class TestSimulate:
    def test_small_shape(self):
        sim = simulate_dataset(SimConfig(n_states=2, n_subjects=1, seq_length=5, n_covariates=1,
                                         sparsity_fraction=0.0))
        seq = sim.dataset.sequences[0]
        assert seq.size == 5
        assert set(seq.tolist()) <= {1, 2}

    def test_deterministic(self):
        a = simulate_dataset(SimConfig(n_subjects=50, seed=4))
        b = simulate_dataset(SimConfig(n_subjects=50, seed=4))
        assert a.truth == b.truth
        for s, t in zip(a.dataset.sequences, b.dataset.sequences):
            np.testing.assert_array_equal(s, t)
        np.testing.assert_array_equal(a.dataset.covariates, b.dataset.covariates)

    def test_transitions_in_support(self):
        sim = simulate_dataset(SimConfig(seed=2))
        counts = count_matrix(sim.dataset).counts
        assert np.all(counts[~sim.support] == 0)
        assert counts.sum() == 1000 + 1000 * 19

    def test_support_structure(self):
        for seed in range(5):
            sim = simulate_dataset(SimConfig(seed=seed))
            S = sim.support
            assert np.all(S.sum(axis=1) >= 2)
            assert np.all(np.diag(S[1:]))
            assert S.sum() == round(0.33 * 110)
            for (u, v), vec in sim.truth.items():
                assert S[u, v - 1]
                assert abs(np.linalg.norm(vec) - 1) <= 1e-12


class TestCsvDatasets:
    def test_round_trip(self, tmp_path):
        sim = simulate_dataset(SimConfig(n_states=3, n_subjects=20, seq_length=4, n_covariates=2))
        d = sim.dataset
        write_sequences_csv(tmp_path / "s.csv", d.subject_ids, d.sequences)
        write_covariates_csv(tmp_path / "c.csv", d.subject_ids, d.covariate_names, d.covariates)
        e = load_dataset(tmp_path / "s.csv", tmp_path / "c.csv")
        np.testing.assert_array_equal(e.covariates, d.covariates)
        assert [s.tolist() for s in e.sequences] == [s.tolist() for s in d.sequences]

    def test_subject_without_covariates(self, tmp_path):
        (tmp_path / "s.csv").write_text("subject_id,t,state\na,1,1\nb,1,2\n")
        (tmp_path / "c.csv").write_text("subject_id,x1\na,0.5\n")
        with pytest.raises(SchemaMismatch):
            load_dataset(tmp_path / "s.csv", tmp_path / "c.csv")

    def test_state_zero(self, tmp_path):
        (tmp_path / "s.csv").write_text("subject_id,t,state\na,1,0\n")
        (tmp_path / "c.csv").write_text("subject_id,x1\na,0.5\n")
        with pytest.raises(ParseError) as info:
            load_dataset(tmp_path / "s.csv", tmp_path / "c.csv")
        assert (info.value.line, info.value.column) == (2, 3)

    def test_gap_in_positions(self, tmp_path):
        (tmp_path / "s.csv").write_text("subject_id,t,state\na,1,1\na,3,1\n")
        (tmp_path / "c.csv").write_text("subject_id,x1\na,0.5\n")
        with pytest.raises(SchemaMismatch):
            load_dataset(tmp_path / "s.csv", tmp_path / "c.csv")

    def test_non_numeric_covariate(self, tmp_path):
        (tmp_path / "s.csv").write_text("subject_id,t,state\na,1,1\n")
        (tmp_path / "c.csv").write_text("subject_id,x1\na,abc\n")
        with pytest.raises(ParseError):
            load_dataset(tmp_path / "s.csv", tmp_path / "c.csv")


class TestFitPersistence:
    @pytest.fixture(scope="class")
    @classmethod
    def fitted(cls):
        sim = simulate_dataset(SimConfig(n_states=3, n_subjects=60, seq_length=6, n_covariates=2, seed=1))
        return fit(sim.dataset, 3, MscorConfig(phi=1e-4, tau1=1e-6, max_runs=3),
                   standardization=[{"name": "x1", "continuous": True, "mean": 0.1, "sd": 2.0},
                                    {"name": "x2", "continuous": False, "mean": 0.0, "sd": 1.0}])

    def test_round_trip(self, tmp_path, fitted):
        path = tmp_path / "fit.json"
        save_fit(fitted, path)
        assert load_fit(path) == fitted

    def test_schema_keys(self, fitted):
        d = fit_to_dict(fitted)
        assert set(d) == {"n_states", "state_labels", "tol", "mask", "empirical", "inactive_rows",
                          "coefficients", "log_likelihood", "optimizer", "standardization"}
        assert set(d["optimizer"]) == {"runs", "iterations", "evaluations"}
        assert all(k.count(",") == 1 for k in d["coefficients"])

    def test_missing_key(self, fitted):
        d = fit_to_dict(fitted)
        del d["mask"]
        with pytest.raises(SchemaMismatch):
            fit_from_dict(d)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{\n \"n_states\": ,\n}")
        with pytest.raises(ParseError) as info:
            load_fit(path)
        assert info.value.line == 2

    def test_byte_identical(self, tmp_path, fitted):
        save_fit(fitted, tmp_path / "a.json")
        save_fit(fit_from_dict(json.loads((tmp_path / "a.json").read_text())), tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
