"""Monte Carlo validation harness for the hybrid jolt detector.

Generates labeled synthetic trajectories (jolting positives vs exponential /
logistic negatives), runs the detector on each, and tallies confusion counts
into TPR/FPR summaries and hyperparameter-sweep heatmap data.

Per-trial seeds are pure functions of (master seed, cell id, class, trial
index), and tallies are commutative sums, so results are independent of the
degree of parallelism.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from dataclasses import dataclass, field, replace

import numpy as np

from .detector import DetectorConfig, hybrid_detect
from .errors import BudgetExceeded, EmptyCell, InvalidSpec, JoltlabError
from .estimation import SavitzkyGolay
from .growth import (
    Exponential,
    GridSpec,
    GrowthModelSpec,
    InjectedJolt,
    Logistic,
    LogQuadratic,
    NoiseSpec,
    generate,
)

log = logging.getLogger(__name__)

Z95 = 1.959963984540054


@dataclass(frozen=True)
class TrialMix:
    """Parameter ranges for per-trial sampling of positive/negative specs."""

    b_range: tuple = (0.005, 0.02)
    k_range: tuple = (0.03, 0.12)
    r_range: tuple = (0.5, 1.5)
    t0_range: tuple = (8.0, 12.0)
    logistic_l: float = 100.0
    injected_fraction: float = 0.5
    logistic_fraction: float = 0.5
    ramp_strength_range: tuple = (0.10, 0.35)
    ramp_start_range: tuple = (5.0, 10.0)
    ramp_len_range: tuple = (4.0, 8.0)


@dataclass(frozen=True)
class MCCell:
    """One Monte Carlo cell: noise level, detector config and trial budget."""

    noise: str | float = "low"
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    n_trials: int = 1000
    master_seed: int = 0
    mix: TrialMix = field(default_factory=TrialMix)
    grid: GridSpec = field(default_factory=GridSpec)
    cell_id: int = 0

    def __post_init__(self):
        if self.n_trials < 1:
            raise InvalidSpec("n_trials must be >= 1")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0


@dataclass
class RateSummary:
    tpr: float
    fpr: float
    tnr: float
    accuracy: float
    error_rate: float
    tpr_ci: tuple
    fpr_ci: tuple


@dataclass
class CellResult:
    noise: str | float
    params: dict
    counts: ConfusionCounts
    rates: RateSummary


@dataclass
class MCReport:
    cells: list
    best: CellResult | None
    metadata: dict


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple:
    """95% Wilson score interval for a binomial proportion."""
    if n == 0:
        return (0.0, 1.0)
    p = successes / n
    denom = 1.0 + z * z / n
    center = p + z * z / (2 * n)
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return ((center - half) / denom, (center + half) / denom)


# --- per-trial machinery ------------------------------------------------------

def _trial_children(cell: MCCell, is_positive: bool, trial_idx: int):
    ss = np.random.SeedSequence(
        entropy=cell.master_seed,
        spawn_key=(cell.cell_id, 1 if is_positive else 0, trial_idx),
    )
    return ss.spawn(3)


def _noise_spec(cell: MCCell, seed: int) -> NoiseSpec:
    if isinstance(cell.noise, str):
        return NoiseSpec(level=cell.noise, seed=seed)
    return NoiseSpec(level="none", sigma_rel=float(cell.noise), seed=seed)


def _uniform(rng, lo_hi):
    return float(rng.uniform(lo_hi[0], lo_hi[1]))


def sample_trial_spec(cell: MCCell, is_positive: bool, trial_idx: int):
    """Deterministic (spec, detector seed) for one trial."""
    param_ss, noise_ss, det_ss = _trial_children(cell, is_positive, trial_idx)
    rng = np.random.default_rng(param_ss)
    noise_seed = int(noise_ss.generate_state(1, np.uint64)[0])
    det_seed = int(det_ss.generate_state(1, np.uint64)[0])
    mix = cell.mix
    if is_positive:
        if rng.random() < mix.injected_fraction:
            start = _uniform(rng, mix.ramp_start_range)
            family = InjectedJolt(
                base=Exponential(c0=1.0, k=_uniform(rng, mix.k_range)),
                jolt_start=start,
                jolt_end=start + _uniform(rng, mix.ramp_len_range),
                ramp_strength=_uniform(rng, mix.ramp_strength_range),
            )
        else:
            family = LogQuadratic(
                c0=1.0, a=_uniform(rng, mix.k_range), b=_uniform(rng, mix.b_range)
            )
    else:
        if rng.random() < mix.logistic_fraction:
            family = Logistic(
                l=mix.logistic_l,
                r=_uniform(rng, mix.r_range),
                t0=_uniform(rng, mix.t0_range),
            )
        else:
            family = Exponential(c0=1.0, k=_uniform(rng, mix.k_range))
    spec = GrowthModelSpec(
        family=family, grid=cell.grid, noise=_noise_spec(cell, noise_seed)
    )
    return spec, det_seed


def _run_trial(cell: MCCell, is_positive: bool, trial_idx: int):
    """Return (trial_idx, score, p_value, ok); failures never abort a cell."""
    spec, det_seed = sample_trial_spec(cell, is_positive, trial_idx)
    config = replace(cell.detector, seed=det_seed)
    try:
        series, _label = generate(spec)
        result = hybrid_detect(series, config)
        return (trial_idx, result.score, result.p_value, True)
    except JoltlabError as exc:
        log.warning(
            "trial failed (class=%s idx=%d): %s; counted as negative verdict",
            "pos" if is_positive else "neg", trial_idx, exc,
        )
        return (trial_idx, 0.0, 1.0, False)


def _run_chunk(args):
    cell, is_positive, indices = args
    return [_run_trial(cell, is_positive, i) for i in indices]


def _cell_outcomes(cell: MCCell, jobs: int = 1):
    """(scores, p_values) arrays per class, ordered by trial index."""
    out = {}
    tasks = []
    for is_positive in (True, False):
        chunks = np.array_split(np.arange(cell.n_trials), max(1, min(jobs * 4, cell.n_trials)))
        tasks.extend((cell, is_positive, list(chunk)) for chunk in chunks if len(chunk))
    if jobs <= 1:
        chunk_results = [_run_chunk(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunk_results = list(pool.map(_run_chunk, tasks))
    for task, results in zip(tasks, chunk_results):
        _, is_positive, _ = task
        out.setdefault(is_positive, []).extend(results)
    arrays = {}
    for is_positive in (True, False):
        rows = sorted(out[is_positive])
        arrays[is_positive] = (
            np.array([r[1] for r in rows]),
            np.array([r[2] for r in rows]),
        )
    return arrays


def _tally(outcomes, config: DetectorConfig) -> ConfusionCounts:
    pos_scores, pos_p = outcomes[True]
    neg_scores, neg_p = outcomes[False]
    pos_verdicts = (pos_scores >= config.decision_threshold) & (pos_p <= config.alpha_sig)
    neg_verdicts = (neg_scores >= config.decision_threshold) & (neg_p <= config.alpha_sig)
    return ConfusionCounts(
        tp=int(pos_verdicts.sum()),
        fn=int((~pos_verdicts).sum()),
        fp=int(neg_verdicts.sum()),
        tn=int((~neg_verdicts).sum()),
    )


def run_cell(cell: MCCell, jobs: int = 1) -> ConfusionCounts:
    """Run one Monte Carlo cell; deterministic for a fixed master seed."""
    return _tally(_cell_outcomes(cell, jobs), cell.detector)


def summarize(counts: ConfusionCounts, class_weights=(0.5, 0.5)) -> RateSummary:
    """Rates, balanced accuracy, error rate and Wilson CIs for one cell."""
    n_pos = counts.tp + counts.fn
    n_neg = counts.fp + counts.tn
    if n_pos == 0 or n_neg == 0:
        raise EmptyCell("cell has no trials in one of the classes")
    tpr = counts.tp / n_pos
    fpr = counts.fp / n_neg
    tnr = 1.0 - fpr
    accuracy = class_weights[0] * tpr + class_weights[1] * tnr
    return RateSummary(
        tpr=tpr,
        fpr=fpr,
        tnr=tnr,
        accuracy=accuracy,
        error_rate=1.0 - accuracy,
        tpr_ci=wilson_interval(counts.tp, n_pos),
        fpr_ci=wilson_interval(counts.fp, n_neg),
    )


# --- hyperparameter sweep -----------------------------------------------------

_THRESHOLD_AXES = {"decision_threshold", "alpha_sig"}
_CONFIG_AXES = {
    "window", "poly_order", "threshold_peak", "min_duration_frac",
    "decision_threshold", "n_perm", "alpha_sig",
}


def apply_axes(config: DetectorConfig, assignment: dict) -> DetectorConfig:
    """Return ``config`` with sweep-axis values applied."""
    kwargs = {}
    smoother = config.smoother
    if "window" in assignment or "poly_order" in assignment:
        base = smoother if smoother is not None else SavitzkyGolay()
        smoother = SavitzkyGolay(
            window=int(assignment.get("window", base.window)),
            poly_order=int(assignment.get("poly_order", base.poly_order)),
        )
        kwargs["smoother"] = smoother
    for name in ("threshold_peak", "min_duration_frac", "decision_threshold", "alpha_sig"):
        if name in assignment:
            kwargs[name] = float(assignment[name])
    if "n_perm" in assignment:
        kwargs["n_perm"] = int(assignment["n_perm"])
    return replace(config, **kwargs)


def sweep(axes: dict, template: MCCell, budget: int = 64, jobs: int = 1) -> MCReport:
    """Grid sweep over detector hyperparameters for one cell template.

    Cells differing only in decision_threshold / alpha_sig share their trial
    outcomes (scores and p-values do not depend on those fields), which keeps
    the sweep affordable without changing any reported number.
    """
    for name, values in axes.items():
        if name not in _CONFIG_AXES:
            raise InvalidSpec(f"unknown sweep axis {name!r}")
        if len(values) < 2:
            raise InvalidSpec(f"sweep axis {name!r} needs at least 2 values")
    names = list(axes.keys())
    combos = [dict(zip(names, combo)) for combo in itertools.product(*axes.values())]
    if len(combos) > budget:
        raise BudgetExceeded(f"{len(combos)} cells exceed budget {budget}")

    group_names = [n for n in names if n not in _THRESHOLD_AXES]
    outcome_cache = {}
    cells = []
    for assignment in combos:
        group_key = tuple(assignment[n] for n in group_names)
        if group_key not in outcome_cache:
            config = apply_axes(template.detector, {n: assignment[n] for n in group_names})
            cell = replace(template, detector=config)
            outcome_cache[group_key] = _cell_outcomes(cell, jobs)
        config = apply_axes(template.detector, assignment)
        counts = _tally(outcome_cache[group_key], config)
        cells.append(
            CellResult(
                noise=template.noise,
                params=dict(assignment),
                counts=counts,
                rates=summarize(counts),
            )
        )

    first_axis = names[0] if names else None
    best = min(
        cells,
        key=lambda c: (
            c.rates.error_rate,
            c.rates.fpr,
            c.params.get(first_axis) if first_axis else 0,
        ),
    ) if cells else None
    metadata = {
        "master_seed": template.master_seed,
        "n_trials": template.n_trials,
        "noise": template.noise,
        "axes": {k: list(v) for k, v in axes.items()},
        "grid": dataclasses.asdict(template.grid),
        "mix": dataclasses.asdict(template.mix),
    }
    return MCReport(cells=cells, best=best, metadata=metadata)


# --- report emission ----------------------------------------------------------

def write_table1(results, path) -> None:
    """CSV of per-noise-level detector rates with Wilson CIs."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("noise_level,TPR,FPR,TPR_lo,TPR_hi,FPR_lo,FPR_hi\n")
        for res in results:
            r = res.rates
            fh.write(
                f"{res.noise},{r.tpr:.6f},{r.fpr:.6f},"
                f"{r.tpr_ci[0]:.6f},{r.tpr_ci[1]:.6f},"
                f"{r.fpr_ci[0]:.6f},{r.fpr_ci[1]:.6f}\n"
            )


def write_heatmap(results, axis_names, path) -> None:
    """Long-format CSV: one row per grid cell, for external heatmap tools."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        header = ["noise_level"] + list(axis_names) + ["tpr", "fpr", "error_rate"]
        fh.write(",".join(header) + "\n")
        for res in results:
            row = [str(res.noise)]
            row += [f"{res.params[a]:g}" for a in axis_names]
            r = res.rates
            row += [f"{r.tpr:.6f}", f"{r.fpr:.6f}", f"{r.error_rate:.6f}"]
            fh.write(",".join(row) + "\n")


def _cell_payload(res: CellResult) -> dict:
    return {
        "noise": res.noise,
        "params": res.params,
        "counts": dataclasses.asdict(res.counts),
        "tpr": res.rates.tpr,
        "fpr": res.rates.fpr,
        "tnr": res.rates.tnr,
        "accuracy": res.rates.accuracy,
        "error_rate": res.rates.error_rate,
        "tpr_ci": list(res.rates.tpr_ci),
        "fpr_ci": list(res.rates.fpr_ci),
    }


def write_report_json(results, metadata, path, best=None) -> None:
    from . import __version__

    payload = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "version": __version__,
        "accuracy_class_weights": [0.5, 0.5],
        "metadata": metadata,
        "cells": [_cell_payload(r) for r in results],
        "best": _cell_payload(best) if best is not None else None,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
