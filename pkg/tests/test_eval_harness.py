import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gnrisk.eval_harness import RollingConfig, auc, recall, run_rolling, schedule
from gnrisk.gbdt import TrainParams
from gnrisk.synth import SynthConfig, generate


def test_schedule_examples():
    (w,) = schedule("2013Q1", 1)
    assert [str(x) for x in (w.train, w.observation, w.prediction, w.evaluation)] == \
        ["2013Q1", "2013Q2", "2013Q2", "2013Q3"]
    ten = schedule("2013Q1", 10)
    assert str(ten[-1].evaluation) == "2015Q4"
    assert [str(q.train) for q in ten[:3]] == ["2013Q1", "2013Q2", "2013Q3"]
    with pytest.raises(ValueError):
        schedule("2013Q1", 0)
    with pytest.raises(ValueError):
        schedule("2013Q1", 10, last_quarter="2015Q3")


def test_auc_examples():
    assert auc([0.9, 0.8, 0.3, 0.1], [1, 0, 1, 0]).value == 0.75
    assert auc([0.9, 0.8, 0.3, 0.1], [1, 1, 0, 0]).value == 1.0
    assert auc([0.4] * 4, [1, 0, 1, 0]).value == 0.5
    m = auc([0.2, 0.3], [1, 1])
    assert m.value is None and m.reason


def test_recall_examples():
    assert recall([0.9, 0.4], [1, 1]).value == 0.5
    assert recall([0.9, 0.7, 0.1], [1, 1, 0]).value == 1.0
    assert recall([0.0, 0.3], [1, 1], threshold=0.0).value == 1.0
    m = recall([0.9], [0])
    assert m.value is None and m.reason


_scored = st.integers(2, 40).flatmap(lambda n: st.tuples(
    st.lists(st.floats(-100, 100), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n)).filter(lambda t: 0 < sum(t[1]) < n))


@settings(max_examples=100, deadline=None)
@given(_scored)
def test_auc_is_rank_invariant(case):
    s, y = np.array(case[0]), np.array(case[1])
    ranks = np.unique(s, return_inverse=True)[1].astype(float)
    assert auc(np.exp(ranks) - 5.0, y).value == pytest.approx(auc(s, y).value)


@settings(max_examples=100, deadline=None)
@given(_scored)
def test_auc_complement(case):
    s, y = np.array(case[0]), np.array(case[1])
    assert auc(s, y).value + auc(s, 1 - y).value == pytest.approx(1.0)


@settings(max_examples=60, deadline=None)
@given(_scored)
def test_auc_matches_pair_count(case):
    s, y = case
    pairs = [(a, b) for a, ya in zip(s, y) if ya for b, yb in zip(s, y) if not yb]
    brute = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a, b in pairs) / len(pairs)
    assert auc(s, y).value == pytest.approx(brute)


def test_config_validation():
    with pytest.raises(ValueError):
        RollingConfig(n_windows=0)
    with pytest.raises(ValueError):
        RollingConfig(ablations=())
    with pytest.raises(ValueError):
        RollingConfig(ablations=("NW", "XX"))
    assert RollingConfig(ablations=("H", "NW")).ablations == ("NW", "H")


@pytest.fixture(scope="module")
def short_run():
    ds = generate(SynthConfig(n_customers=900, n_months=24, seed=5))
    cfg = RollingConfig(start="2012Q2", n_windows=3, params=TrainParams(K=20))
    return ds, cfg, run_rolling(ds, cfg)


def test_rolling_report_shape(short_run):
    _, cfg, rep = short_run
    assert rep.windows == ["2012Q4", "2013Q1", "2013Q2"]
    assert rep.ablations == list(cfg.ablations)
    for c in rep.cells:
        assert c.auc is None or 0 <= c.auc <= 1
        assert c.recall is None or 0 <= c.recall <= 1
        assert c.instances > 0
    assert len(rep.importance) == 3
    tables = rep.csv_tables()
    assert tables["auc_by_window.csv"].splitlines()[0] == "window,NW,NW+CM,NW+N,H"
    assert len(tables["importance_by_window.csv"].splitlines()) == 4
    for imp in rep.importance:
        assert sum(imp["groups"].values()) == pytest.approx(0.0 if imp["empty"] else 1.0)
    assert set(json.loads(rep.to_json())) == {"config", "windows", "importance", "fingerprints", "summary"}


def test_rolling_rerun_is_byte_identical(short_run):
    ds, cfg, rep = short_run
    assert run_rolling(ds, cfg).to_json() == rep.to_json()


def test_threaded_run_matches_serial(short_run):
    ds, cfg, rep = short_run
    cfg2 = RollingConfig(start=cfg.start, n_windows=cfg.n_windows, params=cfg.params, threads=4)
    assert run_rolling(ds, cfg2).to_json() == rep.to_json()


def test_schedule_past_the_data_is_rejected(short_run):
    ds, _, _ = short_run
    with pytest.raises(ValueError):
        run_rolling(ds, RollingConfig(start="2013Q3", n_windows=2))
