import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sqg.spectral import GridSpec, SpectralField

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_field(grid, seed=0, mean_zero=True, dealiased=False):
    """Real white-noise field (optionally mean-free / dealiased)."""
    rng = np.random.default_rng(seed)
    f = SpectralField.from_physical(grid, rng.standard_normal((grid.n, grid.n)))
    c = f.coeffs.copy()
    if mean_zero:
        c[0, 0] = 0.0
    if dealiased:
        c *= grid.dealias_mask
    return SpectralField(grid, c)


def single_mode(grid, k1, k2, amplitude=1.0, kind="sin"):
    """``amplitude * sin(k.x/L)`` (or ``cos``) with exactly two nonzero coefficients."""
    c = np.zeros(grid.shape, dtype=np.complex128)
    half = 0.5 * amplitude if kind == "cos" else -0.5j * amplitude
    if k2 < 0 or (k2 == 0 and k1 < 0):
        k1, k2 = -k1, -k2
        half = np.conj(half)
    c[k1 % grid.n, k2] += half
    if k2 == 0:
        c[(-k1) % grid.n, 0] += np.conj(half)
    return SpectralField(grid, c)


@pytest.fixture
def grid32():
    return GridSpec(32)


@pytest.fixture
def grid64():
    return GridSpec(64)


# -- acceptance summary -----------------------------------------------------------

_acceptance = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    number, title = mark.args
    entry = _acceptance.setdefault(number, {"title": title, "ok": True, "details": []})
    if call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception):
        entry["ok"] = False
    if call.when == "call":
        entry["details"] += [f"{k}: {v}" for k, v in item.user_properties]


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        e = _acceptance[number]
        status = "PASS" if e["ok"] else "FAIL"
        detail = "; ".join(e["details"])
        terminalreporter.write_line(f"[{status}] {number:>2}. {e['title']}" + (f"  ({detail})" if detail else ""))
