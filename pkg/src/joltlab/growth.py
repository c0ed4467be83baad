"""Seedable generators for synthetic capability trajectories.

Families: pure exponential, logistic, log-quadratic (the canonical
superexponential form C0*exp(a*t + b*t^2)), an injected-jolt variant that
smoothly ramps the relative growth rate of a base trajectory, and composite
weighted mixtures. Ground-truth "jolting" labels are derived from the family,
never measured post hoc.

Noise is multiplicative Gaussian on the values, resampled per point when a
draw would leave the positive domain. All generation is a pure function of
(spec, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch, InvalidSpec, NonPositiveValue, ScheduleViolation
from .timeseries import TimeSeries, validate

NOISE_SIGMAS = {"none": 0.0, "low": 0.01, "medium": 0.05, "high": 0.10}


# --- declarative specs --------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    t_start: float = 0.0
    t_end: float = 20.0
    n_points: int = 200

    def __post_init__(self):
        if self.n_points < 8:
            raise InvalidSpec("grid needs n_points >= 8")
        if not self.t_end > self.t_start:
            raise InvalidSpec("grid needs t_end > t_start")

    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_points)


@dataclass(frozen=True)
class NoiseSpec:
    """Multiplicative noise tier (or explicit relative sigma) plus seed."""

    level: str = "none"
    sigma_rel: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.sigma_rel is None and self.level not in NOISE_SIGMAS:
            raise InvalidSpec(f"unknown noise level {self.level!r}")
        if self.sigma_rel is not None and self.sigma_rel < 0:
            raise InvalidSpec("sigma_rel must be >= 0")

    @property
    def sigma(self) -> float:
        if self.sigma_rel is not None:
            return float(self.sigma_rel)
        return NOISE_SIGMAS[self.level]


@dataclass(frozen=True)
class Exponential:
    c0: float = 1.0
    k: float = 0.1

    def __post_init__(self):
        if self.c0 <= 0:
            raise InvalidSpec("Exponential requires c0 > 0")


@dataclass(frozen=True)
class Logistic:
    l: float = 100.0
    r: float = 1.0
    t0: float = 10.0

    def __post_init__(self):
        if self.l <= 0 or self.r <= 0:
            raise InvalidSpec("Logistic requires l > 0 and r > 0")


@dataclass(frozen=True)
class LogQuadratic:
    """C(t) = c0 * exp(a*t + b*t^2); superexponential when b > 0."""

    c0: float = 1.0
    a: float = 0.0
    b: float = 0.01

    def __post_init__(self):
        if self.c0 <= 0:
            raise InvalidSpec("LogQuadratic requires c0 > 0")


@dataclass(frozen=True)
class InjectedJolt:
    """Base trajectory whose relative growth rate ramps up by ``ramp_strength``.

    The ramp follows a C^2 quintic smoothstep over [jolt_start, jolt_end]
    applied to the slope of log-capability, so the increase in growth rate is
    sustained after the ramp and the third derivative exists everywhere.
    """

    base: object = field(default_factory=Exponential)
    jolt_start: float = 5.0
    jolt_end: float = 10.0
    ramp_strength: float = 0.1

    def __post_init__(self):
        if not self.jolt_end > self.jolt_start:
            raise InvalidSpec("InjectedJolt requires jolt_end > jolt_start")
        if self.ramp_strength < 0:
            raise InvalidSpec("InjectedJolt requires ramp_strength >= 0")


@dataclass(frozen=True)
class InteractionSpec:
    """Pairwise interaction terms keyed by ordered factor index pairs.

    Each entry maps (i, j) to either a callable of t or a sampled array on
    the shared grid. Defaults to no interactions.
    """

    terms: tuple = ()

    def sampled(self, times: np.ndarray) -> np.ndarray:
        total = np.zeros_like(times)
        for (_i, _j), term in self.terms:
            vals = term(times) if callable(term) else np.asarray(term, float)
            if vals.shape != times.shape:
                raise GridMismatch("interaction term length != grid length")
            if not np.all(np.isfinite(vals)):
                raise InvalidSpec("interaction term must be finite")
            total = total + vals
        return total


@dataclass(frozen=True)
class Composite:
    """Weighted sum of factor trajectories (interaction terms apply only to
    jolt-series composition via :func:`compose`)."""

    factors: tuple = ()

    def __post_init__(self):
        if not self.factors:
            raise InvalidSpec("Composite requires at least one factor")


@dataclass(frozen=True)
class GrowthModelSpec:
    family: object = field(default_factory=Exponential)
    grid: GridSpec = field(default_factory=GridSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    @property
    def label(self) -> bool:
        """Ground-truth jolting label, derived from the family."""
        return _family_label(self.family, self.grid)


# --- smoothstep helpers -------------------------------------------------------

def smoothstep(x):
    """Quintic smoothstep: 0 below 0, 1 above 1, C^2 at the joints."""
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x))


def smoothstep_integral(x):
    """Antiderivative of :func:`smoothstep` with value 0 at x <= 0."""
    x = np.asarray(x, dtype=float)
    xc = np.clip(x, 0.0, 1.0)
    inside = xc**4 * (2.5 + xc * (-3.0 + xc))
    return inside + np.where(x > 1.0, x - 1.0, 0.0)


# --- evaluation ---------------------------------------------------------------

def evaluate(family, times: np.ndarray) -> np.ndarray:
    """Noiseless closed-form trajectory of ``family`` on ``times``."""
    if isinstance(family, Exponential):
        return family.c0 * np.exp(family.k * times)
    if isinstance(family, Logistic):
        return family.l / (1.0 + np.exp(-family.r * (times - family.t0)))
    if isinstance(family, LogQuadratic):
        return family.c0 * np.exp(family.a * times + family.b * times**2)
    if isinstance(family, InjectedJolt):
        base = evaluate(family.base, times)
        span = family.jolt_end - family.jolt_start
        x = (times - family.jolt_start) / span
        bump = family.ramp_strength * span * smoothstep_integral(x)
        return base * np.exp(bump)
    if isinstance(family, Composite):
        total = np.zeros_like(times)
        for w, sub in family.factors:
            total = total + w * evaluate(sub, times)
        return total
    raise InvalidSpec(f"unknown growth family {type(family).__name__}")


def _family_label(family, grid: GridSpec) -> bool:
    if isinstance(family, (Exponential, Logistic)):
        return False
    if isinstance(family, LogQuadratic):
        return family.b > 0
    if isinstance(family, InjectedJolt):
        return family.ramp_strength > 0
    if isinstance(family, Composite):
        # sustained alpha'(t) > 0 across the grid, checked numerically
        t = grid.times()
        logv = np.log(evaluate(family, t))
        return bool(np.all(np.diff(logv, 2) > 0))
    raise InvalidSpec(f"unknown growth family {type(family).__name__}")


def generate(spec: GrowthModelSpec) -> tuple[TimeSeries, bool]:
    """Generate a (possibly noisy) trajectory plus its ground-truth label."""
    t = spec.grid.times()
    values = evaluate(spec.family, t)
    if not np.all(values > 0):
        raise InvalidSpec("generated trajectory is not strictly positive")
    series = validate(TimeSeries(t, values), require_positive=True)
    return add_noise(series, spec.noise), spec.label


def add_noise(series: TimeSeries, noise: NoiseSpec) -> TimeSeries:
    """Multiply values by (1 + eps), eps ~ N(0, sigma_rel^2), kept positive.

    Draws that would produce a non-positive value are resampled. Identity
    for sigma 0; bitwise deterministic for a fixed seed.
    """
    validate(series, require_positive=True)
    sigma = noise.sigma
    if sigma == 0.0:
        return series
    rng = np.random.default_rng(np.random.SeedSequence(noise.seed))
    v = series.values
    out = v * (1.0 + sigma * rng.standard_normal(v.size))
    bad = out <= 0
    while bad.any():
        out[bad] = v[bad] * (1.0 + sigma * rng.standard_normal(int(bad.sum())))
        bad = out <= 0
    return series.with_values(out)


# --- jolt-series combination and damping --------------------------------------

def compose(factors, interaction: InteractionSpec | None = None) -> TimeSeries:
    """Pointwise weighted sum of jolt series plus interaction terms.

    ``factors`` is a list of (weight, TimeSeries) sharing one grid.
    """
    if not factors:
        raise InvalidSpec("compose requires at least one factor")
    times = factors[0][1].times
    total = np.zeros_like(times)
    for w, s in factors:
        if not np.array_equal(s.times, times):
            raise GridMismatch("factor series must share one time grid")
        total = total + w * s.values
    if interaction is not None:
        total = total + interaction.sampled(times)
    return TimeSeries(times, total)


@dataclass(frozen=True)
class ResourceSchedule:
    """Sampled resource utilization R(t) with cap r_max."""

    times: np.ndarray
    utilization: np.ndarray
    r_max: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        u = np.asarray(self.utilization, dtype=float)
        if self.r_max <= 0:
            raise InvalidSpec("r_max must be positive")
        if t.shape != u.shape:
            raise GridMismatch("schedule grid/utilization length mismatch")
        if np.any(u < 0):
            raise ScheduleViolation("resource utilization must be >= 0")
        if np.any(u > self.r_max):
            raise ScheduleViolation("resource utilization exceeds r_max")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "utilization", u)


def apply_resource_damping(jolt: TimeSeries, schedule: ResourceSchedule) -> TimeSeries:
    """Damp a jolt series by (r_max - R(t)) / r_max pointwise."""
    if not np.array_equal(jolt.times, schedule.times):
        raise GridMismatch("jolt series and schedule must share one grid")
    factor = (schedule.r_max - schedule.utilization) / schedule.r_max
    return jolt.with_values(jolt.values * factor)


# --- interventions ------------------------------------------------------------

def inject_intervention(base: TimeSeries, kind: str, **params) -> TimeSeries:
    """Apply a step-change or efficiency-ramp intervention to a trajectory.

    step_change: multiply values by factor m (> 0) for t >= t_step.
    efficiency_ramp: multiply the instantaneous growth exponent by a factor
    ramping smoothly from 1 to ``factor`` over [t0, t1].
    """
    validate(base, require_positive=True)
    if kind == "step_change":
        m = params.get("m", 1.0)
        t_step = params.get("t_step")
        if m <= 0:
            raise InvalidSpec("step_change requires m > 0")
        if t_step is None:
            raise InvalidSpec("step_change requires t_step")
        mult = np.where(base.times >= t_step, m, 1.0)
        return base.with_values(base.values * mult)
    if kind == "efficiency_ramp":
        factor = params.get("factor", 2.0)
        t0, t1 = params.get("t0"), params.get("t1")
        if t0 is None or t1 is None or not t1 > t0:
            raise InvalidSpec("efficiency_ramp requires t1 > t0")
        if factor <= 0:
            raise InvalidSpec("efficiency_ramp requires factor > 0")
        t = base.times
        logv = np.log(base.values)
        alpha = np.gradient(logv, t)
        ramp = 1.0 + (factor - 1.0) * smoothstep((t - t0) / (t1 - t0))
        scaled = alpha * ramp
        # rebuild log-capability by trapezoidal integration
        new_log = np.concatenate(
            [[0.0], np.cumsum(0.5 * (scaled[1:] + scaled[:-1]) * np.diff(t))]
        )
        return base.with_values(np.exp(logv[0] + new_log))
    raise InvalidSpec(f"unknown intervention kind {kind!r}")
