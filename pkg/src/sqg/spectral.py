"""Fields on the periodic torus [0, 2*pi*L]^2 and the Fourier multipliers acting on them.

Coefficients are stored in the real-FFT half spectrum: an array of shape
``(n, n//2 + 1)`` whose axis 0 runs over the full wavenumber ``k1`` (FFT
ordering) and axis 1 over ``k2 >= 0``.  They are normalised so that

    f(x) = sum_k c_k exp(i k.x / L),

i.e. ``c = rfft2(samples) / n**2``.  With this convention ``sin(x1)`` has
``c_(1,0) = -i/2`` and the mean value of a field is ``c_(0,0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, DomainError, SymmetryError

# relative tolerance used when validating Hermitian symmetry of input coefficients
HERMITIAN_RTOL = 1e-10


@dataclass(frozen=True)
class GridSpec:
    """Torus geometry and resolution.

    ``n`` modes per axis on the lattice ``|k_i| <= n/2``; the physical
    wavenumber is ``xi = k / L``.  The dealiasing mask keeps modes with
    ``|k_i| <= dealias_fraction * n / 2``.
    """

    n: int
    length: float = 1.0
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n <= 0 or self.n % 2:
            raise ConfigurationError(f"n must be an even positive integer, got {self.n!r}")
        if not self.length > 0:
            raise ConfigurationError(f"length must be > 0, got {self.length!r}")
        if not 0 < self.dealias_fraction <= 1:
            raise ConfigurationError(
                f"dealias_fraction must lie in (0, 1], got {self.dealias_fraction!r}"
            )

    @property
    def shape(self):
        return (self.n, self.n // 2 + 1)

    @property
    def period(self):
        return 2.0 * math.pi * self.length

    @property
    def cell_area(self):
        return (self.period / self.n) ** 2

    @cached_property
    def k1(self):
        """Integer wavenumbers along axis 0, broadcastable to ``shape``."""
        return np.fft.fftfreq(self.n, 1.0 / self.n).round().astype(np.int64)[:, None]

    @cached_property
    def k2(self):
        return np.arange(self.n // 2 + 1, dtype=np.int64)[None, :]

    @cached_property
    def xi1(self):
        return np.broadcast_to(self.k1 / self.length, self.shape)

    @cached_property
    def xi2(self):
        return np.broadcast_to(self.k2 / self.length, self.shape)

    @cached_property
    def xi_abs(self):
        return np.hypot(self.xi1, self.xi2)

    @cached_property
    def nyquist(self):
        """Boolean mask of modes with ``|k_i| = n/2`` (no well-defined sign)."""
        half = self.n // 2
        return (np.abs(self.k1) == half) | (self.k2 == half)

    @cached_property
    def xi1_odd(self):
        """``xi1`` with Nyquist modes zeroed; used for odd (derivative-like) symbols."""
        return np.where(self.nyquist, 0.0, self.xi1)

    @cached_property
    def xi2_odd(self):
        return np.where(self.nyquist, 0.0, self.xi2)

    @cached_property
    def ixi1_odd(self):
        return 1j * self.xi1_odd

    @cached_property
    def ixi2_odd(self):
        return 1j * self.xi2_odd

    @cached_property
    def dealias_cutoff(self):
        """Largest retained ``|k_i|`` (integer lattice units)."""
        return math.floor(self.dealias_fraction * self.n / 2 + 1e-12)

    @cached_property
    def dealias_mask(self):
        kc = self.dealias_fraction * self.n / 2 + 1e-12
        return (np.abs(self.k1) <= kc) & (self.k2 <= kc)

    @cached_property
    def mode_weight(self):
        """Multiplicity of each stored mode in the full spectrum (1 or 2)."""
        w = np.full(self.shape, 2.0)
        w[:, 0] = 1.0
        if self.n // 2 >= 1:
            w[:, -1] = 1.0
        return w

    @cached_property
    def riesz_multipliers(self):
        """Velocity symbols ``(-i xi2/|xi|, i xi1/|xi|)`` with the zero mode set to 0."""
        inv = np.zeros(self.shape)
        nz = self.xi_abs > 0
        inv[nz] = 1.0 / self.xi_abs[nz]
        return -1j * self.xi2_odd * inv, 1j * self.xi1_odd * inv

    def coordinates(self, oversample=1):
        """Physical sample points ``(x1, x2)`` as 2D arrays (``ij`` indexing)."""
        m = self.n * oversample
        x = np.arange(m) * (self.period / m)
        return np.meshgrid(x, x, indexing="ij")

    def zeros(self):
        return SpectralField(self, np.zeros(self.shape, dtype=np.complex128))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real scalar field on the torus, stored as half-spectrum Fourier coefficients.

    ``flags`` carries metadata set by operations (e.g. ``"mean_mode_dropped"``).
    """

    grid: GridSpec
    coeffs: np.ndarray
    flags: frozenset = dc_field(default_factory=frozenset)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != self.grid.shape:
            raise ConfigurationError(
                f"coefficient array has shape {c.shape}, grid expects {self.grid.shape}"
            )
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_physical(cls, grid, values):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (grid.n, grid.n):
            raise ConfigurationError(f"expected samples of shape {(grid.n, grid.n)}")
        return cls(grid, sfft.rfft2(values) / grid.n**2)

    @classmethod
    def from_function(cls, grid, func):
        x1, x2 = grid.coordinates()
        return cls.from_physical(grid, func(x1, x2))

    @property
    def mean(self):
        return float(self.coeffs[0, 0].real)

    def physical(self, oversample=1):
        """Samples on the uniform ``(n*oversample)^2`` grid."""
        return to_physical(self.coeffs, self.grid.n, oversample)

    def hermitian_defect(self):
        """Max deviation from the nearest coefficient array of a real field."""
        n = self.grid.n
        proj = sfft.rfft2(sfft.irfft2(self.coeffs * n**2, s=(n, n))) / n**2
        return float(np.max(np.abs(proj - self.coeffs), initial=0.0))

    def check_hermitian(self, rtol=HERMITIAN_RTOL):
        scale = max(float(np.max(np.abs(self.coeffs), initial=0.0)), 1e-300)
        defect = self.hermitian_defect()
        if defect > rtol * scale and defect > 1e-300:
            raise SymmetryError(
                f"coefficients are not Hermitian-symmetric (defect {defect:.3e})"
            )
        return self

    def with_coeffs(self, coeffs, flags=None):
        return SpectralField(self.grid, coeffs, self.flags if flags is None else flags)

    def _check_same_grid(self, other):
        if other.grid != self.grid:
            raise ConfigurationError("fields live on different grids")

    def __add__(self, other):
        self._check_same_grid(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_same_grid(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.grid, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)


def to_physical(coeffs, n, oversample=1):
    """Inverse transform of normalised half-spectrum coefficients.

    With ``oversample > 1`` the coefficients are zero-padded so the result is
    the trigonometric interpolant sampled on a finer grid.  Nyquist entries
    are split evenly between ``+n/2`` and ``-n/2`` so the coarse-grid samples
    are reproduced exactly.
    """
    if oversample == 1:
        return sfft.irfft2(coeffs * n**2, s=(n, n))
    if oversample < 1 or int(oversample) != oversample:
        raise DomainError("oversample must be a positive integer")
    m = n * int(oversample)
    half = n // 2
    padded = np.zeros((m, m // 2 + 1), dtype=np.complex128)
    c = coeffs.copy()
    c[:, half] *= 0.5
    padded[:half, : half + 1] = c[:half]
    padded[m - half + 1 :, : half + 1] = c[half + 1 :]
    padded[half, : half + 1] = 0.5 * c[half]
    padded[m - half, : half + 1] = 0.5 * c[half]
    return sfft.irfft2(padded * m**2, s=(m, m))


def _as_field(field):
    if not isinstance(field, SpectralField):
        raise TypeError(f"expected SpectralField, got {type(field).__name__}")
    return field


def transform_roundtrip(field):
    """Forward-then-inverse transform; returns the field rebuilt from its samples."""
    _as_field(field).check_hermitian()
    return SpectralField.from_physical(field.grid, field.physical())


def fractional_laplacian(field, beta):
    """Apply ``(-Delta)^beta``: multiply mode ``k`` by ``|xi|^(2 beta)``.

    ``Lambda = (-Delta)^(1/2)`` is ``beta = 1/2``.  For ``beta < 0`` the zero
    mode is set to 0; if it was nonzero the result carries the
    ``"mean_mode_dropped"`` flag.  For ``beta >= 0`` the zero mode is scaled
    by ``0**(2 beta)`` (kept for ``beta == 0``, zeroed otherwise).
    """
    grid = field.grid
    beta = float(beta)
    flags = set(field.flags)
    if beta == 0.0:
        return field.with_coeffs(field.coeffs.copy())
    with np.errstate(divide="ignore"):
        symbol = grid.xi_abs ** (2.0 * beta)
    symbol = np.array(symbol, copy=True)
    symbol[0, 0] = 0.0
    if beta < 0 and field.coeffs[0, 0] != 0:
        flags.add("mean_mode_dropped")
    return field.with_coeffs(field.coeffs * symbol, frozenset(flags))


def lambda_power(field, s):
    """``Lambda^s`` shorthand, i.e. ``fractional_laplacian(field, s/2)``."""
    return fractional_laplacian(field, 0.5 * s)


def gradient(field):
    """Spectral gradient ``(d/dx1, d/dx2)``."""
    g = field.grid
    return (
        SpectralField(g, 1j * g.xi1_odd * field.coeffs),
        SpectralField(g, 1j * g.xi2_odd * field.coeffs),
    )


def divergence(u1, u2):
    g = u1.grid
    return SpectralField(g, 1j * g.xi1_odd * u1.coeffs + 1j * g.xi2_odd * u2.coeffs)


def riesz_velocity(theta):
    """Velocity ``u = (-R2 theta, R1 theta)`` with symbols ``(-i xi2/|xi|, i xi1/|xi|)``.

    The mean of ``theta`` is ignored (symbol set to 0 at ``xi = 0``).
    """
    g = theta.grid
    r1, r2 = g.riesz_multipliers
    return SpectralField(g, r1 * theta.coeffs), SpectralField(g, r2 * theta.coeffs)


def dealias(field):
    return field.with_coeffs(field.coeffs * field.grid.dealias_mask)


def _check_dealias_band(grid):
    if grid.dealias_cutoff < 1:
        raise ConfigurationError(
            f"dealiased band is empty for n={grid.n}, dealias_fraction={grid.dealias_fraction}"
        )


def advection(u, theta):
    """Dealiased pseudo-spectral product ``u . grad(theta)`` for a given velocity pair.

    Inputs are truncated to the dealiased band before the product and the
    result is masked again, so quadratic aliasing is removed exactly under the
    2/3 rule.
    """
    g = theta.grid
    _check_dealias_band(g)
    return SpectralField(g, advection_coeffs(g, u[0].coeffs, u[1].coeffs, theta.coeffs))


def advection_coeffs(grid, u1, u2, theta):
    """Coefficient-array core of :func:`advection` (one batched inverse transform)."""
    mask = grid.dealias_mask
    n = grid.n
    th = theta * mask
    stack = np.empty((4,) + grid.shape, dtype=np.complex128)
    np.multiply(u1, mask, out=stack[0])
    np.multiply(u2, mask, out=stack[1])
    np.multiply(grid.ixi1_odd, th, out=stack[2])
    np.multiply(grid.ixi2_odd, th, out=stack[3])
    v1, v2, d1, d2 = sfft.irfft2(stack, s=(n, n), axes=(-2, -1), norm="forward")
    return sfft.rfft2(v1 * d1 + v2 * d2, norm="forward") * mask


def nonlinear_term(theta):
    """``u . grad(theta)`` with ``u`` the Riesz velocity of ``theta``; dealiased."""
    _check_dealias_band(theta.grid)
    return advection(riesz_velocity(dealias(theta)), theta)


def _magnitude_samples(field, oversample):
    if isinstance(field, SpectralField):
        return np.abs(field.physical(oversample))
    comps = [f.physical(oversample) for f in field]
    return np.sqrt(sum(c * c for c in comps))


def lp_norm(field, p, oversample=1):
    """``L^p`` norm over the torus by uniform-grid quadrature.

    ``field`` may be a single field or a tuple of components, in which case the
    pointwise Euclidean magnitude is used.  ``p = inf`` gives the max of the
    samples.  Normalised so that ``||1||_p = (2 pi L)^(2/p)``.
    """
    p = float(p)
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p}")
    first = field if isinstance(field, SpectralField) else field[0]
    grid = first.grid
    mag = _magnitude_samples(field, oversample)
    if math.isinf(p):
        return float(mag.max())
    area = grid.cell_area / oversample**2
    peak = mag.max()
    if peak == 0:
        return 0.0
    # scale by the peak to avoid overflow for large p
    scaled = (mag / peak) ** p
    return float(peak * (scaled.sum() * area) ** (1.0 / p))


def l2_norm_spectral(field):
    """``L^2`` norm from the coefficients (Parseval)."""
    g = field.grid
    energy = np.sum(g.mode_weight * np.abs(field.coeffs) ** 2)
    return float(g.period * math.sqrt(energy))


def inner(f, g):
    """``int f g dx`` from the coefficients."""
    grid = f.grid
    val = np.sum(grid.mode_weight * (f.coeffs * np.conj(g.coeffs)).real)
    return float(val * grid.period**2)
