"""Regularity-criterion monitoring: critical exponent, critical mixed norms and the blowup-rate fit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InsufficientDataError
from .littlewood_paley import (
    BesovParams,
    DyadicDecomposition,
    MixedNormParams,
    besov_norm,
    chemin_norm,
)
from .trajectory import Trajectory


def _check_ranges(p, r0, gamma):
    if not (2 <= p < math.inf):
        raise DomainError(f"p must satisfy p ∈ [2,∞), got {p}")
    if not (2 <= r0 < math.inf):
        raise DomainError(f"r0 must satisfy r0 ∈ [2,∞), got {r0}")
    if not (0 < gamma <= 1):
        raise DomainError(f"gamma must satisfy gamma ∈ (0,1], got {gamma}")


def critical_alpha(p, r0, gamma):
    """Scaling-critical regularity ``alpha = 2/p + 1 - gamma + gamma/r0``."""
    _check_ranges(p, r0, gamma)
    return 2.0 / p + 1.0 - gamma + gamma / r0


@dataclass(frozen=True)
class CriterionParams:
    """Exponents of the critical space ``L^{r0}_t B^alpha_{p,q}``.

    ``q`` is the Besov summability used by the Λ functional and the existence
    time; the regularity monitor always uses ``q = inf``.
    """

    p: float
    r0: float
    gamma: float
    q: float = 2.0

    def __post_init__(self):
        _check_ranges(self.p, self.r0, self.gamma)
        if not self.q >= 1:
            raise DomainError(f"q must be in [1, inf], got {self.q}")

    @property
    def alpha(self):
        a = critical_alpha(self.p, self.r0, self.gamma)
        assert abs(a - (2.0 / self.p + 1.0 - self.gamma + self.gamma / self.r0)) < 1e-15
        return a


def _default_oversample(p):
    return 1 if p == 2 else 2


@dataclass
class MonitorSeries:
    times: np.ndarray
    besov_alpha_values: np.ndarray
    running_integral: np.ndarray
    verdict: str = "satisfied"
    last_reliable_time: float | None = None
    blowup_fit: dict | None = None

    def to_rows(self):
        return [
            {"time": t, "besov_alpha": b, "running_integral": r}
            for t, b, r in zip(self.times, self.besov_alpha_values, self.running_integral)
        ]


def regularity_monitor(traj: Trajectory, params: CriterionParams, decomp=None, oversample=None):
    """Per-snapshot ``||theta||_{B^alpha_{p,inf}}`` (inhomogeneous) and its running ``r0``-integral.

    Verdicts: ``"satisfied"`` if every value is finite on a completed run,
    ``"violated"`` at the first non-finite value, ``"truncated"`` for runs the
    solver stopped early (the integral is then only known up to
    ``last_reliable_time``).
    """
    traj.require(2)
    decomp = decomp or DyadicDecomposition(traj.grid)
    oversample = oversample or _default_oversample(params.p)
    bp = BesovParams(s=params.alpha, p=params.p, q=math.inf, homogeneous=False)
    times = np.asarray(traj.times, dtype=np.float64)
    vals = np.empty(len(times))
    for i, f in enumerate(traj.fields):
        if not np.all(np.isfinite(f.coeffs)):
            vals[i] = np.inf
        else:
            vals[i] = besov_norm(f, bp, decomp, oversample)
    running = np.zeros(len(times))
    powered = vals**params.r0
    for i in range(1, len(times)):
        running[i] = running[i - 1] + 0.5 * (times[i] - times[i - 1]) * (powered[i] + powered[i - 1])

    series = MonitorSeries(times, vals, running)
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        series.verdict = "violated"
        series.last_reliable_time = float(times[bad[0] - 1]) if bad[0] > 0 else None
    elif traj.status != "completed":
        series.verdict = "truncated"
        series.last_reliable_time = (
            traj.last_reliable_time if traj.last_reliable_time is not None else float(times[-1])
        )
    else:
        series.last_reliable_time = float(times[-1])
    return series


def blowup_proxy_fit(series: MonitorSeries, params: CriterionParams, T_guess, window_fraction=0.25,
                     tol=0.2, resample=32):
    """Fit ``log ||theta(s)|| ~ a + b * (-log(T_guess - s))`` near the end of the series.

    Uses the last ``window_fraction`` of the samples, resampled at
    log-spaced values of ``T_guess - s``.  The run is called
    blowup-consistent when the fitted exponent ``b`` reaches
    ``(1/r0) * (1 - tol)``; a lower bound ``||theta(s)|| >= c (T - s)^(-1/r0)``
    near a singular time forces exactly that rate.
    """
    t = np.asarray(series.times, dtype=np.float64)
    v = np.asarray(series.besov_alpha_values, dtype=np.float64)
    if T_guess <= t[-1]:
        raise DomainError(f"T_guess={T_guess} must exceed the last sample time {t[-1]}")
    count = max(int(math.ceil(window_fraction * len(t))), 0)
    t_w, v_w = t[-count:], v[-count:]
    ok = np.isfinite(v_w) & (v_w > 0)
    t_w, v_w = t_w[ok], v_w[ok]
    if len(t_w) < 8:
        raise InsufficientDataError(f"blowup fit needs >= 8 samples in the window, got {len(t_w)}")
    x = -np.log(T_guess - t_w)
    y = np.log(v_w)
    # resample uniformly in log(T - s), i.e. log-spaced in T - s
    xs = np.linspace(x.min(), x.max(), resample)
    ys = np.interp(xs, x, y)
    slope, intercept = np.polyfit(xs, ys, 1)
    expected = 1.0 / params.r0
    report = {
        "exponent": float(slope),
        "amplitude": float(math.exp(intercept)),
        "expected_exponent": expected,
        "relative_error": float(abs(slope - expected) / expected),
        "window": [float(t_w[0]), float(t_w[-1])],
        "samples": int(len(t_w)),
        "T_guess": float(T_guess),
        "tol": tol,
        "blowup_consistent": bool(slope >= expected * (1.0 - tol)),
    }
    series.blowup_fit = report
    return report


def lambda_functional(traj: Trajectory, params: CriterionParams, decomp=None, oversample=None):
    """``||theta||_{L~^2 Bdot^{alpha+gamma/2}_{p,q}} + ||theta||_{L~^inf Bdot^alpha_{p,q}}``."""
    traj.require(2)
    decomp = decomp or DyadicDecomposition(traj.grid)
    oversample = oversample or _default_oversample(params.p)
    a, g = params.alpha, params.gamma
    dissip = MixedNormParams(r=2.0, besov=BesovParams(a + g / 2.0, params.p, params.q, True))
    sup = MixedNormParams(r=math.inf, besov=BesovParams(a, params.p, params.q, True))
    return chemin_norm(traj, dissip, decomp, oversample) + chemin_norm(traj, sup, decomp, oversample)


def apriori_ratio(traj: Trajectory, params: CriterionParams, decomp=None, oversample=None):
    """``Λ(theta, T) / ||theta_0||_{Bdot^alpha_{p,q}}`` (bounded on the existence interval)."""
    decomp = decomp or DyadicDecomposition(traj.grid)
    oversample = oversample or _default_oversample(params.p)
    lam = lambda_functional(traj, params, decomp, oversample)
    base = besov_norm(traj.fields[0], BesovParams(params.alpha, params.p, params.q, True), decomp, oversample)
    return lam / base if base > 0 else 0.0


def smoothing_ratios(traj: Trajectory, params: CriterionParams, rs=(2, 4, 8, math.inf), decomp=None,
                     oversample=None):
    """``||theta||_{L~^r B^{alpha+gamma/r}_{p,q}} / ||theta_0||_{B^alpha_{p,q}}`` for each ``r``."""
    decomp = decomp or DyadicDecomposition(traj.grid)
    oversample = oversample or _default_oversample(params.p)
    base = besov_norm(traj.fields[0], BesovParams(params.alpha, params.p, params.q, False), decomp, oversample)
    out = {}
    for r in rs:
        s = params.alpha + params.gamma / r
        mp = MixedNormParams(r=r, besov=BesovParams(s, params.p, params.q, False))
        out[r] = chemin_norm(traj, mp, decomp, oversample) / base if base > 0 else 0.0
    return out


def embedding_chain(traj: Trajectory, params: CriterionParams, decomp=None, oversample=None):
    """The three norms of the chain ``L^{r0}B^a_{p,inf} <= L~^{r0}B^a_{p,r0} <= C L~^{r0}B^{a+g/r0}_{p,inf}``.

    Returns the values and the empirical ``C`` of the second inequality.
    """
    decomp = decomp or DyadicDecomposition(traj.grid)
    oversample = oversample or _default_oversample(params.p)
    a, g, p, r0 = params.alpha, params.gamma, params.p, params.r0
    plain = chemin_norm(traj, MixedNormParams(r0, BesovParams(a, p, math.inf, False), chemin_style=False),
                        decomp, oversample)
    chem = chemin_norm(traj, MixedNormParams(r0, BesovParams(a, p, r0, False)), decomp, oversample)
    upper = chemin_norm(traj, MixedNormParams(r0, BesovParams(a + g / r0, p, math.inf, False)), decomp, oversample)
    return {
        "lr0_besov_inf": plain,
        "chemin_besov_r0": chem,
        "chemin_besov_shifted_inf": upper,
        "C": chem / upper if upper > 0 else 0.0,
    }


@dataclass
class NormRecord:
    time: float
    norm_id: str
    value: float


@dataclass
class NormReport:
    rows: list = field(default_factory=list)

    def add(self, time, norm_id, value):
        self.rows.append(NormRecord(float(time), norm_id, float(value)))
