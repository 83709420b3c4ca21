"""Numerical checks of the harmonic-analysis estimates (Bernstein, commutator, product) and the scaling map.

Each check returns a :class:`LemmaReport` with per-block empirical ratios
and the constants they imply.  Lemma constants depend on the parameters and
on the mollifier, so only their uniformity in ``j`` is judged: a report is
``"bounded"`` when the largest per-block ratio stays below ten times the
median.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, PreconditionError
from .littlewood_paley import (
    BesovParams,
    DyadicDecomposition,
    MixedNormParams,
    block_lp,
    chemin_norm,
    dyadic_block,
    lq_sum,
    time_lr,
)
from .spectral import (
    GridSpec,
    SpectralField,
    advection,
    gradient,
    lambda_power,
    lp_norm,
)
from .trajectory import Trajectory

BOUNDED_FACTOR = 10.0


@dataclass
class LemmaReport:
    lemma_id: str
    params: dict
    per_j: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    verdict: str = "bounded"
    skipped: int = 0
    mollifier: dict | None = None

    @property
    def passed(self):
        return self.verdict in ("bounded", "passed")

    def to_dict(self):
        return _jsonable(asdict(self))

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def uniform_in_j(values_by_j):
    """Design rule for 'bounded': max over j below ``BOUNDED_FACTOR`` times the median."""
    vals = np.asarray([v for v in values_by_j if np.isfinite(v)], dtype=np.float64)
    if vals.size == 0 or vals.size != len(values_by_j):
        return False
    med = float(np.median(vals))
    if med == 0:
        return bool(vals.max() == 0)
    return bool(vals.max() < BOUNDED_FACTOR * med)


def random_block_field(grid, j, decomp, rng):
    """White noise filtered to ``Delta_j``."""
    noise = SpectralField.from_physical(grid, rng.standard_normal((grid.n, grid.n)))
    return dyadic_block(noise, j, decomp)


def _default_js(decomp, js):
    if js is not None:
        return list(js)
    return [j for j in range(max(0, decomp.j_min), min(4, decomp.j_max) + 1)]


def _is_zero(f):
    return not np.any(np.abs(f.coeffs) > 0)


def _summarise(ratios):
    r = np.asarray(ratios, dtype=np.float64)
    return float(r.min()), float(r.max()), float(np.median(r))


def verify_bernstein(decomp: DyadicDecomposition, p=2.0, q_out=math.inf, s=1.0, samples=100, seed=0,
                     js=None, oversample=2):
    """Empirical constants of the Bernstein inequalities on random single-block fields.

    Per block ``j`` and sample ``v = Delta_j w``:

    * derivative ratio ``||Lambda^s v||_p / (2^{js} ||v||_p)`` whose min/max
      are the lower/upper constants;
    * integrability ratio ``||v||_{q_out} / (2^{2j(1/p - 1/q_out)} ||v||_p)``
      whose max is the embedding constant.
    """
    if not (1 <= p <= q_out):
        raise DomainError(f"need 1 <= p <= q_out, got p={p}, q_out={q_out}")
    grid = decomp.grid
    rng = np.random.default_rng(seed)
    js = _default_js(decomp, js)
    report = LemmaReport("bernstein", {"p": p, "q_out": q_out, "s": s, "samples": samples, "seed": seed,
                                       "n": grid.n, "length": grid.length},
                         mollifier=decomp.mollifier.describe())
    all1, all2, maxes1, maxes2 = [], [], [], []
    inv = (1.0 / p - (0.0 if math.isinf(q_out) else 1.0 / q_out))
    for j in js:
        r1, r2, lhs1, rhs1 = [], [], [], []
        for _ in range(samples):
            v = random_block_field(grid, j, decomp, rng)
            if _is_zero(v):
                report.skipped += 1
                continue
            vp = block_lp(v, p, oversample)
            if vp == 0:
                report.skipped += 1
                continue
            a = block_lp(lambda_power(v, s), p, oversample)
            b = 2.0 ** (j * s) * vp
            r1.append(a / b)
            lhs1.append(a)
            rhs1.append(b)
            r2.append(block_lp(v, q_out, oversample) / (2.0 ** (2 * j * inv) * vp))
        if not r1:
            continue
        lo1, hi1, med1 = _summarise(r1)
        lo2, hi2, _ = _summarise(r2)
        report.per_j.append({"j": j, "lhs": float(np.mean(lhs1)), "rhs": float(np.mean(rhs1)), "ratio": med1,
                             "ratio_min": lo1, "ratio_max": hi1,
                             "embedding_ratio_min": lo2, "embedding_ratio_max": hi2, "samples": len(r1)})
        all1 += r1
        all2 += r2
        maxes1.append(hi1)
        maxes2.append(hi2)
    lam, lam_p = float(np.min(all1)), float(np.max(all1))
    report.constants = {"lambda": lam, "lambda_prime": lam_p, "band": lam_p / lam,
                        "C_embedding": float(np.max(all2))}
    ok = math.isfinite(lam_p / lam) and lam > 0 and uniform_in_j(maxes1) and uniform_in_j(maxes2)
    report.verdict = "bounded" if ok else "violated"
    return report


def _fine_field(values, grid, oversample):
    """Wrap samples from an oversampled evaluation as a field on the finer grid."""
    fine = GridSpec(grid.n * oversample, grid.length, grid.dealias_fraction)
    return SpectralField.from_physical(fine, values)


def _power_field(v, power, oversample, signed=False):
    """``|v|^power`` (or ``sign(v)|v|^power``) as a field on the oversampled grid."""
    x = v.physical(oversample)
    vals = np.abs(x) ** power
    if signed:
        vals = np.sign(x) * vals
    return _fine_field(vals, v.grid, oversample)


def dissipation_integral(v, gamma, p, oversample=2):
    """``int (Lambda^gamma v) |v|^{p-2} v dx`` by quadrature on the oversampled grid."""
    lv = lambda_power(v, gamma).physical(oversample)
    vv = v.physical(oversample)
    area = v.grid.cell_area / oversample**2
    return float(np.sum(lv * np.abs(vv) ** (p - 2) * vv) * area)


def verify_generalized_bernstein(decomp: DyadicDecomposition, p=4.0, gamma=1.0, samples=100, seed=0,
                                 js=None, oversample=2):
    """Generalised Bernstein two-sided bound and the lower bounds for the dissipation integral.

    Per block and sample ``v = Delta_j w``:

    * ``gen_ratio = ||Lambda^{gamma/2} |v|^{p/2}||_2^{2/p} / (2^{gamma j/p} ||v||_p)``;
    * ``integral_ratio = int (Lambda^gamma v)|v|^{p-2} v / ||Lambda^{gamma/2} (v|v|^{p/2-1})||_2^2``
      (the signed power, so that ``p = 2`` is the Parseval identity); the
      same integral over ``||Lambda^{gamma/2} |v|^{p/2}||_2^2`` is reported as
      ``c_integral_modulus``;
    * ``block_ratio = int (Lambda^gamma v)|v|^{p-2} v / (2^{gamma j} ||v||_p^p)``.
    """
    if not (2 <= p < math.inf):
        raise DomainError(f"p must satisfy p ∈ [2,∞), got {p}")
    if not (0 <= gamma <= 2):
        raise DomainError(f"gamma must lie in [0, 2], got {gamma}")
    grid = decomp.grid
    rng = np.random.default_rng(seed)
    js = _default_js(decomp, js)
    report = LemmaReport("gen_bernstein", {"p": p, "gamma": gamma, "samples": samples, "seed": seed,
                                           "n": grid.n, "length": grid.length},
                         mollifier=decomp.mollifier.describe())
    gen_all, int_all, int_mod_all, blk_all, gen_max, blk_min = [], [], [], [], [], []
    for j in js:
        gen, integ, integ_mod, blk, lhs, rhs = [], [], [], [], [], []
        for _ in range(samples):
            v = random_block_field(grid, j, decomp, rng)
            if _is_zero(v):
                report.skipped += 1
                continue
            vp = lp_norm(v, p, oversample=oversample)
            w = _power_field(v, p / 2.0, oversample)
            mid_sq = block_lp(lambda_power(w, gamma / 2.0), 2.0) ** 2
            ws = _power_field(v, p / 2.0, oversample, signed=True)
            signed_sq = block_lp(lambda_power(ws, gamma / 2.0), 2.0) ** 2
            d = dissipation_integral(v, gamma, p, oversample)
            g = mid_sq ** (1.0 / p) / (2.0 ** (gamma * j / p) * vp)
            gen.append(g)
            integ.append(d / signed_sq if signed_sq > 0 else math.nan)
            integ_mod.append(d / mid_sq if mid_sq > 0 else math.nan)
            blk.append(d / (2.0 ** (gamma * j) * vp**p))
            lhs.append(mid_sq ** (1.0 / p))
            rhs.append(2.0 ** (gamma * j / p) * vp)
        if not gen:
            continue
        lo, hi, med = _summarise(gen)
        blo, bhi, _ = _summarise(blk)
        ilo, ihi, _ = _summarise(integ)
        report.per_j.append({"j": j, "lhs": float(np.mean(lhs)), "rhs": float(np.mean(rhs)), "ratio": med,
                             "ratio_min": lo, "ratio_max": hi, "block_ratio_min": blo, "block_ratio_max": bhi,
                             "integral_ratio_min": ilo, "integral_ratio_max": ihi, "samples": len(gen)})
        gen_all += gen
        int_all += integ
        int_mod_all += integ_mod
        blk_all += blk
        gen_max.append(hi)
        blk_min.append(blo)
    lam, lam_p = float(np.min(gen_all)), float(np.max(gen_all))
    report.constants = {
        "lambda": lam,
        "lambda_prime": lam_p,
        "band": lam_p / lam,
        "c_integral": float(np.nanmin(int_all)),
        "c_integral_max": float(np.nanmax(int_all)),
        "c_integral_modulus": float(np.nanmin(int_mod_all)),
        "c_block": float(np.min(blk_all)),
    }
    ok = (lam > 0 and report.constants["c_integral"] > 0 and report.constants["c_block"] > 0
          and uniform_in_j(gen_max) and uniform_in_j([1.0 / b for b in blk_min]))
    report.verdict = "bounded" if ok else "violated"
    return report


def divergence_defect(u):
    """``max |xi . u_hat| / max |xi| |u_hat|`` (0 for a solenoidal field)."""
    g = u[0].grid
    div = np.abs(g.xi1_odd * u[0].coeffs + g.xi2_odd * u[1].coeffs)
    scale = np.max(g.xi_abs * (np.abs(u[0].coeffs) + np.abs(u[1].coeffs)), initial=0.0)
    if scale == 0:
        return 0.0
    return float(div.max() / scale)


def commutator(u, v, j, decomp, div_tol=1e-10):
    """``[u, Delta_j] . grad v = u . Delta_j(grad v) - Delta_j(u . grad v)``, dealiased like the transport term."""
    if divergence_defect(u) > div_tol:
        raise PreconditionError("velocity is not divergence-free")
    first = advection(u, dyadic_block(v, j, decomp))
    second = dyadic_block(advection(u, v), j, decomp)
    return first - second


def _check_commutator_params(rho1, rho2, r1, r2, p):
    failed = []
    if not rho1 < 1:
        failed.append("rho1 < 1")
    if not rho2 < 1:
        failed.append("rho2 < 1")
    if not rho1 + rho2 + 2 * min(1.0, 2.0 / p) > 0:
        failed.append("rho1 + rho2 + d*min(1, 2/p) > 0")
    if not rho1 + 2.0 / p > 0:
        failed.append("rho1 + d/p > 0")
    inv_r = 1.0 / r1 + 1.0 / r2
    if not inv_r <= 1:
        failed.append("1/r = 1/r1 + 1/r2 <= 1")
    if failed:
        raise DomainError("commutator estimate parameters violate: " + ", ".join(failed))
    return math.inf if inv_r == 0 else 1.0 / inv_r


def _velocity_gradient(u):
    a1, a2 = gradient(u[0])
    b1, b2 = gradient(u[1])
    return (a1, a2, b1, b2)


def _same_times(a, b):
    if len(a) != len(b) or not np.allclose(a.times, b.times, rtol=0, atol=1e-12):
        raise DomainError("velocity and scalar trajectories must share snapshot times")


def verify_commutator_estimate(params, traj_u: Trajectory, traj_v: Trajectory, decomp, js=None,
                               oversample=None):
    """Per-block constants ``c_j`` of the commutator estimate.

    ``c_j = ||[u,Delta_j].grad v||_{L^r_t L^p} 2^{j(2/p+rho1+rho2-1)}
    / (||grad u||_{L~^{r1} Bdot^{2/p+rho1-1}_{p,q}} ||grad v||_{L~^{r2} Bdot^{2/p+rho2-1}_{p,q}})``.
    The report carries the ``l^q`` norm of ``c_j``.
    """
    rho1, rho2 = float(params["rho1"]), float(params["rho2"])
    r1, r2 = float(params["r1"]), float(params["r2"])
    p, q = float(params.get("p", 2.0)), float(params.get("q", 2.0))
    r = _check_commutator_params(rho1, rho2, r1, r2, p)
    _same_times(traj_u, traj_v)
    traj_u.require(2)
    oversample = oversample or (1 if p == 2 else 2)
    js = list(decomp.js) if js is None else list(js)
    grid = decomp.grid

    grad_u = traj_u.map(_velocity_gradient)
    grad_v = traj_v.map(lambda f: gradient(f))
    nu = chemin_norm(grad_u, MixedNormParams(r1, BesovParams(2.0 / p + rho1 - 1.0, p, q, True)), decomp, oversample)
    nv = chemin_norm(grad_v, MixedNormParams(r2, BesovParams(2.0 / p + rho2 - 1.0, p, q, True)), decomp, oversample)
    report = LemmaReport("commutator", {"rho1": rho1, "rho2": rho2, "r1": r1, "r2": r2, "r": r, "p": p, "q": q,
                                        "n": grid.n, "length": grid.length},
                         mollifier=decomp.mollifier.describe())
    cs = []
    for j in js:
        series = [block_lp(commutator(u, v, j, decomp), p, oversample)
                  for u, v in zip(traj_u.fields, traj_v.fields)]
        lhs = time_lr(traj_u.times, series, r)
        rhs = 2.0 ** (-j * (2.0 / p + rho1 + rho2 - 1.0)) * nu * nv
        c = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
        cs.append(c)
        report.per_j.append({"j": j, "lhs": lhs, "rhs": rhs, "ratio": c})
    cs_arr = np.asarray(cs)
    lq = lq_sum(cs_arr, q)
    report.constants = {"c_j_lq": lq, "c_j_max": float(cs_arr.max()), "grad_u_norm": nu, "grad_v_norm": nv,
                        "active_blocks": int(np.count_nonzero(cs_arr > 1e-14 * max(cs_arr.max(), 1e-300)))}
    report.verdict = "bounded" if math.isfinite(lq) else "violated"
    return report


def _check_product_params(s, s1, p, q, r1, r2, r=None):
    failed = []
    if not p >= 2:
        failed.append("p >= 2")
    if not s > -2.0 / p - 1.0:
        failed.append("s > -d/p - 1")
    if not s <= s1 <= 2.0 / p:
        failed.append("s < s1 < d/p")
    elif (s1 == 2.0 / p or s1 == s) and q != 1:
        failed.append("q = 1 when s1 = d/p or s1 = s")
    inv_r = 1.0 / r1 + 1.0 / r2
    if not inv_r <= 1:
        failed.append("1/r = 1/r1 + 1/r2 <= 1")
    r_derived = math.inf if inv_r == 0 else 1.0 / inv_r
    if r is not None and not math.isclose(float(r), r_derived, rel_tol=1e-12):
        failed.append("r consistent with 1/r = 1/r1 + 1/r2")
    if failed:
        raise DomainError("product estimate parameters violate: " + ", ".join(failed))
    return r_derived


def product_ratio(params, traj_u, traj_v, decomp, oversample=None):
    """``(lhs, rhs)`` of the product estimate on one pair of trajectories."""
    s, s1 = float(params["s"]), float(params["s1"])
    p, q = float(params.get("p", 2.0)), float(params.get("q", 2.0))
    r1, r2 = float(params["r1"]), float(params["r2"])
    r = _check_product_params(s, s1, p, q, r1, r2, params.get("r"))
    _same_times(traj_u, traj_v)
    oversample = oversample or (1 if p == 2 else 2)
    prod = Trajectory(list(traj_u.times), [advection(u, v) for u, v in zip(traj_u.fields, traj_v.fields)])
    lhs = chemin_norm(prod, MixedNormParams(r, BesovParams(s, p, q, True)), decomp, oversample)
    nu = chemin_norm(traj_u, MixedNormParams(r1, BesovParams(s1, p, q, True)), decomp, oversample)
    grad_v = traj_v.map(lambda f: gradient(f))
    nv = chemin_norm(grad_v, MixedNormParams(r2, BesovParams(s + 2.0 / p - s1, p, q, True)), decomp, oversample)
    return lhs, nu * nv


def verify_product_estimate(params, traj_u, traj_v, decomp, oversample=None):
    """Empirical ratio ``||u.grad v||_{L~^r Bdot^s} / (||u||_{L~^{r1} Bdot^{s1}} ||grad v||_{L~^{r2} Bdot^{s+2/p-s1}})``.

    ``traj_u``/``traj_v`` may be single trajectories or equal-length lists of
    them (one ratio per pair).
    """
    pairs_u = traj_u if isinstance(traj_u, list) else [traj_u]
    pairs_v = traj_v if isinstance(traj_v, list) else [traj_v]
    grid = decomp.grid
    report = LemmaReport("product", {k: float(v) for k, v in params.items()} | {"n": grid.n, "length": grid.length,
                                                                             "samples": len(pairs_u)},
                         mollifier=decomp.mollifier.describe())
    ratios = []
    for i, (tu, tv) in enumerate(zip(pairs_u, pairs_v)):
        lhs, rhs = product_ratio(params, tu, tv, decomp, oversample)
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
        ratios.append(ratio)
        report.per_j.append({"j": i, "lhs": lhs, "rhs": rhs, "ratio": ratio})
    arr = np.asarray(ratios)
    report.constants = {"ratio_max": float(arr.max()), "ratio_min": float(arr.min()),
                        "ratio_median": float(np.median(arr))}
    report.verdict = "bounded" if np.all(np.isfinite(arr)) else "violated"
    return report


# -- partition of unity ------------------------------------------------------------

def verify_partition(decomp, tol=1e-12):
    """Block-sum deviation from one on all nonzero lattice modes (homogeneous and inhomogeneous)."""
    grid = decomp.grid
    report = LemmaReport("partition", {"n": grid.n, "length": grid.length, "tol": tol},
                         mollifier=decomp.mollifier.describe())
    for j in decomp.js:
        w = decomp.weights(j)
        report.per_j.append({"j": j, "lhs": float(w.max()), "rhs": 1.0, "ratio": float(w.max()),
                             "modes": int(np.count_nonzero(w))})
    hom = decomp.partition_deviation()
    inh = decomp.inhomogeneous_partition_deviation()
    report.constants = {"max_deviation": hom, "max_deviation_inhomogeneous": inh}
    report.verdict = "passed" if max(hom, inh) < tol else "violated"
    return report


# -- scaling ------------------------------------------------------------------------

def scaling_transform(field: SpectralField, m: int, gamma: float):
    """Spatial part of ``theta_lam(x) = lam^(gamma-1) theta(lam x)`` with ``lam = 2^m``.

    Mode ``k`` moves to ``lam k`` (dyadic block ``j -> j + m``) with amplitude
    multiplied by ``lam^(gamma-1)``.  Modes mapped outside ``|k_i| < n/2``, or
    (for ``m < 0``) not divisible by ``2^|m|``, are dropped and the result
    carries the ``"truncated"`` flag.  Time is rescaled by the caller
    (``t -> t / lam^gamma``, see :func:`scale_trajectory`).
    """
    grid = field.grid
    m = int(m)
    if grid.n % (2 ** abs(m)):
        raise DomainError(f"n={grid.n} is not divisible by 2^{abs(m)}")
    lam = 2.0**m
    amp = lam ** (gamma - 1.0)
    if m == 0:
        return field.with_coeffs(field.coeffs * amp)
    n = grid.n
    k1 = np.broadcast_to(grid.k1, grid.shape)
    k2 = np.broadcast_to(grid.k2, grid.shape)
    src = field.coeffs
    out = np.zeros_like(src)
    half = n // 2
    nonzero = np.abs(src) > 0
    if m > 0:
        f = 2**m
        t1, t2 = k1 * f, k2 * f
        inside = (np.abs(t1) < half) & (t2 < half)
    else:
        f = 2 ** (-m)
        inside = (k1 % f == 0) & (k2 % f == 0) & (np.abs(k1) < half) & (k2 < half)
        t1, t2 = k1 // f, k2 // f
    out[t1[inside] % n, t2[inside]] = src[inside] * amp
    flags = set(field.flags)
    if np.any(nonzero & ~inside):
        flags.add("truncated")
    return SpectralField(grid, out, frozenset(flags))


def scale_trajectory(traj: Trajectory, m: int, gamma: float):
    """Apply :func:`scaling_transform` to every snapshot and map times ``t -> t / lam^gamma``."""
    lam = 2.0**m
    return Trajectory([t / lam**gamma for t in traj.times],
                      [scaling_transform(f, m, gamma) for f in traj.fields])


def scaling_invariance_check(field, j, m, gamma, p, decomp, oversample=None):
    """Compare ``2^{j a'} ||Delta_j f||_p`` before and after scaling, ``a' = 2/p + 1 - gamma``.

    The torus ``L^p`` norm does not see the ``lam^(-2/p)`` change of measure
    of the whole-space dilation, so that factor is applied explicitly.  The
    finer of the two fields is sampled ``2^|m|`` times more densely, so both
    norms are evaluated on the same physical points (exact for every ``p``).
    Returns ``(before, after)``.
    """
    oversample = oversample or (1 if p == 2 else 4)
    a = (0.0 if math.isinf(p) else 2.0 / p) + 1.0 - gamma
    lam = 2.0**m
    refine = 2 ** abs(m) if p != 2 else 1
    before = 2.0 ** (j * a) * block_lp(dyadic_block(field, j, decomp), p, oversample * (refine if m < 0 else 1))
    g = scaling_transform(field, m, gamma)
    measure = 1.0 if math.isinf(p) else lam ** (-2.0 / p)
    after_lp = block_lp(dyadic_block(g, j + m, decomp), p, oversample * (refine if m > 0 else 1))
    after = 2.0 ** ((j + m) * a) * after_lp * measure
    return before, after
