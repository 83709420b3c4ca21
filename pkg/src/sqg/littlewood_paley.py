"""Dyadic (Littlewood-Paley) decomposition on the torus and the Besov / Chemin norms built on it."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError
from .spectral import GridSpec, SpectralField, l2_norm_spectral, lp_norm
from .trajectory import Trajectory


def _bump(t):
    out = np.zeros_like(t, dtype=np.float64)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


@dataclass(frozen=True)
class Mollifier:
    """Smooth radial cutoff ``chi`` and annulus profile ``phi_hat(r) = chi(r) - chi(2r)``.

    ``chi`` is 1 on ``[0, 1]``, 0 on ``[2, inf)`` and on ``(1, 2)`` equals
    ``h(2-r) / (h(2-r) + h(r-1))`` with ``h(t) = exp(-1/t)``.
    """

    name: str = "exp-bump"

    def chi(self, r):
        r = np.asarray(r, dtype=np.float64)
        a = _bump(2.0 - r)
        b = _bump(r - 1.0)
        out = np.where(r <= 1.0, 1.0, 0.0)
        mid = (r > 1.0) & (r < 2.0)
        out = np.where(mid, a / np.where(mid, a + b, 1.0), out)
        return out

    def phi_hat(self, r):
        r = np.asarray(r, dtype=np.float64)
        return self.chi(r) - self.chi(2.0 * r)

    def describe(self):
        return {"name": self.name, "inner_radius": 1.0, "outer_radius": 2.0,
                "profile": "h(2-r)/(h(2-r)+h(r-1)), h(t)=exp(-1/t)"}


@dataclass(frozen=True)
class BesovParams:
    s: float
    p: float = 2.0
    q: float = 2.0
    homogeneous: bool = True

    def __post_init__(self):
        if not self.p >= 1:
            raise DomainError(f"Besov integrability p must be in [1, inf], got {self.p}")
        if not self.q >= 1:
            raise DomainError(f"Besov summability q must be in [1, inf], got {self.q}")


@dataclass(frozen=True)
class MixedNormParams:
    """Time exponent ``r`` plus spatial Besov parameters.

    ``chemin_style=True`` takes the time norm block by block inside the
    ``l^q`` sum; ``False`` takes the time norm of the spatial Besov norm.
    """

    r: float
    besov: BesovParams
    chemin_style: bool = True

    def __post_init__(self):
        if not self.r >= 1:
            raise DomainError(f"time exponent r must be in [1, inf], got {self.r}")


class DyadicDecomposition:
    """Blocks ``Delta_j`` realisable on a grid.

    ``j_min .. j_max`` is the smallest range whose blocks sum to one on every
    nonzero lattice mode (including the corners beyond the dealiasing band).
    Blocks outside that range vanish identically on the lattice and are
    omitted from all norms.
    """

    def __init__(self, grid: GridSpec, mollifier: Mollifier | None = None):
        self.grid = grid
        self.mollifier = mollifier or Mollifier()
        xi_min = 1.0 / grid.length
        xi_max = math.sqrt(2.0) * (grid.n // 2) / grid.length
        self.j_min = math.floor(math.log2(xi_min) + 1e-12)
        self.j_max = math.ceil(math.log2(xi_max) - 1e-12)
        self._weights = {}

    def __repr__(self):
        return f"DyadicDecomposition(n={self.grid.n}, L={self.grid.length}, j=[{self.j_min}, {self.j_max}])"

    @property
    def js(self):
        return range(self.j_min, self.j_max + 1)

    def in_range(self, j):
        return self.j_min <= j <= self.j_max

    def weights(self, j):
        """Multiplier ``phi_hat(2^-j xi)`` on the half spectrum (zero mode 0)."""
        w = self._weights.get(j)
        if w is None:
            w = self.mollifier.phi_hat(self.grid.xi_abs * 2.0 ** (-j))
            w[0, 0] = 0.0
            w.setflags(write=False)
            self._weights[j] = w
        return w

    @cached_property
    def low_weights(self):
        """Multiplier of the low block: ``chi(2|xi|)`` plus the mean mode."""
        w = self.mollifier.chi(2.0 * self.grid.xi_abs)
        w[0, 0] = 1.0
        w.setflags(write=False)
        return w

    def partition_deviation(self):
        """Max over nonzero modes of ``|sum_j phi_hat_j - 1|``."""
        total = np.zeros(self.grid.shape)
        for j in self.js:
            total = total + self.weights(j)
        dev = np.abs(total - 1.0)
        dev[0, 0] = 0.0
        return float(dev.max())

    def inhomogeneous_partition_deviation(self):
        """Max over all modes of ``|low weight + sum_{j>=0} phi_hat_j - 1|``."""
        total = np.array(self.low_weights, copy=True)
        for j in self.js:
            if j >= 0:
                total = total + self.weights(j)
        return float(np.abs(total - 1.0).max())


def _apply(field, w):
    if isinstance(field, tuple):
        return tuple(SpectralField(f.grid, f.coeffs * w) for f in field)
    return SpectralField(field.grid, field.coeffs * w)


def dyadic_block(field, j, decomp):
    """``Delta_j field``; out-of-range ``j`` yields a zero field flagged ``"out_of_band"``."""
    if not decomp.in_range(j):
        zero = np.zeros(decomp.grid.shape)
        if isinstance(field, tuple):
            return tuple(SpectralField(f.grid, f.coeffs * zero, frozenset({"out_of_band"})) for f in field)
        return SpectralField(field.grid, field.coeffs * zero, frozenset({"out_of_band"}))
    return _apply(field, decomp.weights(j))


def low_block(field, decomp):
    """Inhomogeneous low-frequency block (sum of ``Delta_j`` over ``j < 0`` plus the mean)."""
    return _apply(field, decomp.low_weights)


def block_lp(field, p, oversample=1):
    """``L^p`` norm used for blocks; the ``p = 2`` case is evaluated by Parseval."""
    if p == 2 and oversample == 1:
        if isinstance(field, tuple):
            return math.sqrt(sum(l2_norm_spectral(f) ** 2 for f in field))
        return l2_norm_spectral(field)
    return lp_norm(field, p, oversample=oversample)


def lq_sum(values, q):
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return 0.0
    if math.isinf(q):
        return float(values.max())
    return float(np.sum(values**q) ** (1.0 / q))


def block_norms(field, p, decomp, js=None, oversample=1):
    """``{j: ||Delta_j field||_p}`` over ``js`` (default: all blocks)."""
    js = decomp.js if js is None else js
    return {j: block_lp(dyadic_block(field, j, decomp), p, oversample) for j in js}


def besov_norm(field, params: BesovParams, decomp, oversample=1):
    """Homogeneous or inhomogeneous Besov norm over the realisable blocks."""
    s, p, q = params.s, params.p, params.q
    if params.homogeneous:
        norms = block_norms(field, p, decomp, oversample=oversample)
        return lq_sum([2.0 ** (j * s) * v for j, v in norms.items()], q)
    js = [j for j in decomp.js if j >= 0]
    norms = block_norms(field, p, decomp, js=js, oversample=oversample)
    high = lq_sum([2.0 ** (j * s) * v for j, v in norms.items()], q)
    return high + block_lp(low_block(field, decomp), p, oversample)


def time_lr(times, values, r):
    """``(int |g|^r dt)^(1/r)`` by the trapezoid rule; ``r = inf`` gives the max."""
    values = np.abs(np.asarray(values, dtype=np.float64))
    if math.isinf(r):
        return float(values.max())
    peak = values.max()
    if peak == 0:
        return 0.0
    integral = np.trapezoid((values / peak) ** r, np.asarray(times, dtype=np.float64))
    return float(peak * integral ** (1.0 / r))


def _time_block_norms(traj, p, decomp, js, oversample):
    out = {j: [] for j in js}
    for f in traj.fields:
        for j, v in block_norms(f, p, decomp, js=js, oversample=oversample).items():
            out[j].append(v)
    return out


def chemin_norm(traj: Trajectory, params: MixedNormParams, decomp, oversample=1):
    """Mixed time-space norm over the trajectory's time span.

    Chemin style (``L~^r(I; B^s_{p,q})``) takes the time ``L^r`` norm of each
    block before the weighted ``l^q`` sum.  The inhomogeneous Chemin variant
    is ``||f||_{L^r(I; L^p)} + ||f||_{L~^r(I; Bdot^s_{p,q})}``.  With
    ``chemin_style=False`` the result is the time ``L^r`` norm of the spatial
    Besov norm.  Time integrals use the trapezoid rule on the snapshots.
    """
    traj.require(2)
    b = params.besov
    r = params.r
    if not params.chemin_style:
        vals = [besov_norm(f, b, decomp, oversample) for f in traj.fields]
        return time_lr(traj.times, vals, r)
    js = list(decomp.js)
    per_block = _time_block_norms(traj, b.p, decomp, js, oversample)
    seq = [2.0 ** (j * b.s) * time_lr(traj.times, per_block[j], r) for j in js]
    hom = lq_sum(seq, b.q)
    if b.homogeneous:
        return hom
    lp_series = [block_lp(f, b.p, oversample) for f in traj.fields]
    return time_lr(traj.times, lp_series, r) + hom


def chemin_block_sequence(traj, params: MixedNormParams, decomp, oversample=1):
    """Per-block terms ``2^{js} ||Delta_j f||_{L^r_t L^p}`` of the Chemin norm."""
    traj.require(2)
    b = params.besov
    js = list(decomp.js)
    per_block = _time_block_norms(traj, b.p, decomp, js, oversample)
    return {j: 2.0 ** (j * b.s) * time_lr(traj.times, per_block[j], params.r) for j in js}
