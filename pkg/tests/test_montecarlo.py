import numpy as np
import pytest

from joltlab.detector import DetectorConfig
from joltlab.errors import BudgetExceeded, EmptyCell, InvalidSpec
from joltlab.estimation import SavitzkyGolay
from joltlab.growth import (
    Exponential,
    GridSpec,
    InjectedJolt,
    Logistic,
    LogQuadratic,
)
from joltlab.montecarlo import (
    ConfusionCounts,
    MCCell,
    TrialMix,
    _tally,
    apply_axes,
    run_cell,
    sample_trial_spec,
    summarize,
    sweep,
    wilson_interval,
    write_heatmap,
    write_table1,
)

FAST = DetectorConfig(n_perm=99)


def small_cell(**kw):
    defaults = dict(
        noise="low",
        detector=FAST,
        n_trials=20,
        master_seed=7,
        grid=GridSpec(0.0, 20.0, 100),
    )
    defaults.update(kw)
    return MCCell(**defaults)


# --- rate arithmetic ----------------------------------------------------------

def test_rate_arithmetic():
    r = summarize(ConfusionCounts(tp=95, fn=5, fp=5, tn=95))
    assert r.tpr == pytest.approx(0.95)
    assert r.fpr == pytest.approx(0.05)
    assert r.accuracy == pytest.approx(0.95)
    assert r.error_rate == pytest.approx(0.05)


def test_rate_arithmetic_medium_row():
    r = summarize(ConfusionCounts(tp=92, fn=8, fp=8, tn=92))
    assert r.tpr == pytest.approx(0.92)
    assert r.fpr == pytest.approx(0.08)


def test_empty_cell_rejected():
    with pytest.raises(EmptyCell):
        summarize(ConfusionCounts(tp=0, fn=0, fp=5, tn=95))


def test_wilson_interval_contains_point():
    lo, hi = wilson_interval(95, 100)
    assert lo < 0.95 < hi
    assert 0.0 <= lo and hi <= 1.0
    assert wilson_interval(0, 0) == (0.0, 1.0)


# --- degenerate detectors via tallying ----------------------------------------

def test_always_positive_detector():
    outcomes = {
        True: (np.ones(50), np.zeros(50)),
        False: (np.ones(50), np.zeros(50)),
    }
    r = summarize(_tally(outcomes, DetectorConfig()))
    assert r.tpr == 1.0 and r.fpr == 1.0


def test_always_negative_detector():
    outcomes = {
        True: (np.zeros(50), np.ones(50)),
        False: (np.zeros(50), np.ones(50)),
    }
    r = summarize(_tally(outcomes, DetectorConfig()))
    assert r.tpr == 0.0 and r.fpr == 0.0


# --- trial sampling -----------------------------------------------------------

def test_sample_trial_spec_families_and_determinism():
    cell = small_cell(n_trials=50)
    pos_families = set()
    neg_families = set()
    for i in range(50):
        spec, _ = sample_trial_spec(cell, True, i)
        pos_families.add(type(spec.family))
        assert spec.label is True
        spec, _ = sample_trial_spec(cell, False, i)
        neg_families.add(type(spec.family))
        assert spec.label is False
    assert pos_families == {LogQuadratic, InjectedJolt}
    assert neg_families == {Exponential, Logistic}
    a = sample_trial_spec(cell, True, 3)
    b = sample_trial_spec(cell, True, 3)
    assert a == b


def test_trial_seeds_differ_across_indices():
    cell = small_cell()
    seeds = {sample_trial_spec(cell, True, i)[1] for i in range(20)}
    assert len(seeds) == 20


# --- cell execution -----------------------------------------------------------

def test_run_cell_deterministic_and_schedule_invariant():
    cell = small_cell()
    serial = run_cell(cell, jobs=1)
    parallel = run_cell(cell, jobs=4)
    assert serial == parallel
    assert serial == run_cell(cell, jobs=1)


def test_run_cell_counts_partition_trials():
    cell = small_cell()
    c = run_cell(cell)
    assert c.tp + c.fn == cell.n_trials
    assert c.fp + c.tn == cell.n_trials


def test_numeric_noise_level():
    cell = small_cell(noise=0.02)
    c = run_cell(cell)
    assert c.tp + c.fn == cell.n_trials


# --- sweep --------------------------------------------------------------------

def test_apply_axes():
    cfg = apply_axes(DetectorConfig(), {"window": 11, "decision_threshold": 0.4})
    assert cfg.smoother == SavitzkyGolay(window=11, poly_order=4)
    assert cfg.decision_threshold == 0.4


def test_sweep_2x2_shape():
    axes = {"decision_threshold": [0.3, 0.5], "alpha_sig": [0.05, 0.1]}
    report = sweep(axes, small_cell(), budget=4)
    assert len(report.cells) == 4
    for cell in report.cells:
        assert {"decision_threshold", "alpha_sig"} == set(cell.params)
        assert 0.0 <= cell.rates.tpr <= 1.0
        assert 0.0 <= cell.rates.fpr <= 1.0
    assert report.best in report.cells


def test_sweep_cell_matches_standalone_run():
    template = small_cell()
    axes = {"decision_threshold": [0.3, 0.5]}
    report = sweep(axes, template)
    standalone = run_cell(template)  # default decision_threshold is 0.5
    matching = [c for c in report.cells if c.params["decision_threshold"] == 0.5]
    assert matching[0].counts == standalone


def test_sweep_budget_enforced():
    axes = {"decision_threshold": [0.3, 0.4, 0.5], "alpha_sig": [0.01, 0.05]}
    with pytest.raises(BudgetExceeded):
        sweep(axes, small_cell(), budget=5)


def test_sweep_rejects_unknown_axis():
    with pytest.raises(InvalidSpec):
        sweep({"mystery": [1, 2]}, small_cell())


def test_sweep_rejects_single_value_axis():
    with pytest.raises(InvalidSpec):
        sweep({"decision_threshold": [0.5]}, small_cell())


# --- report emission ----------------------------------------------------------

def test_table1_and_heatmap_outputs(tmp_path):
    axes = {"decision_threshold": [0.3, 0.5]}
    report = sweep(axes, small_cell())
    t1 = tmp_path / "table1.csv"
    write_table1(report.cells, t1)
    lines = t1.read_text().splitlines()
    assert lines[0] == "noise_level,TPR,FPR,TPR_lo,TPR_hi,FPR_lo,FPR_hi"
    assert len(lines) == 3

    hm = tmp_path / "heatmap.csv"
    write_heatmap(report.cells, ["decision_threshold"], hm)
    lines = hm.read_text().splitlines()
    assert lines[0] == "noise_level,decision_threshold,tpr,fpr,error_rate"
    assert len(lines) == 3
