"""ETD integration, successive approximations and initial data."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sqg.diagnostics import CriterionParams, lambda_functional
from sqg.errors import BlowupDetected, ConfigurationError, DomainError, InsufficientDataError
from sqg.littlewood_paley import DyadicDecomposition
from sqg.solver import (
    SolverConfig,
    calibrate_existence_constant,
    existence_time_estimate,
    make_initial_data,
    phi_functions,
    picard_contracts,
    picard_iterate,
    run_simulation,
    step_etd,
)
from sqg.spectral import GridSpec, SpectralField, l2_norm_spectral, lp_norm
from sqg.trajectory import Trajectory

from conftest import random_field, single_mode


class TestPhiFunctions:
    def test_values_at_zero(self):
        e, p1, p2, p3 = phi_functions(np.array([0.0]))
        assert (e[0], p1[0], p2[0], p3[0]) == pytest.approx((1.0, 1.0, 0.5, 1 / 6), rel=1e-15)

    def test_closed_forms_away_from_zero(self):
        z = np.array([-50.0, -3.0, -1.5, 2.0])
        _, p1, p2, p3 = phi_functions(z)
        np.testing.assert_allclose(p1, np.expm1(z) / z, rtol=1e-14)
        np.testing.assert_allclose(p2, (np.expm1(z) - z) / z**2, rtol=1e-12)
        np.testing.assert_allclose(p3, (np.expm1(z) - z - z**2 / 2) / z**3, rtol=1e-10)

    def test_continuous_across_branch_switch(self):
        z = np.array([-1.0 + 1e-12, -1.0 - 1e-12])
        for phi in phi_functions(z)[1:]:
            assert phi[0] == pytest.approx(phi[1], rel=1e-10)


class TestSolverConfig:
    @pytest.mark.parametrize("kw, err", [({"gamma": 0.0}, DomainError), ({"gamma": 1.5}, DomainError),
                                         ({"dt": 2.0}, ConfigurationError), ({"dt": -1.0}, ConfigurationError),
                                         ({"scheme": "euler"}, ConfigurationError),
                                         ({"snapshot_stride": 0}, ConfigurationError)])
    def test_validation(self, kw, err):
        base = dict(grid=GridSpec(16), gamma=1.0, dt=0.1, t_end=1.0)
        with pytest.raises(err):
            SolverConfig(**(base | kw))

    def test_step_divides_horizon(self):
        cfg = SolverConfig(GridSpec(16), 1.0, 0.3, 1.0)
        assert cfg.n_steps == 4 and cfg.dt_effective == pytest.approx(0.25)


class TestLinearDecay:
    @pytest.mark.parametrize("gamma", [0.5, 1.0])
    @pytest.mark.parametrize("scheme", ["etd_rk2", "etd_rk4"])
    def test_single_mode_exact(self, gamma, scheme):
        g = GridSpec(32)
        theta0 = single_mode(g, 1, 0)
        traj = run_simulation(theta0, SolverConfig(g, gamma, 1e-2, 1.0, scheme=scheme, snapshot_stride=100),
                              diagnostics=False)
        err = lp_norm(traj.fields[-1] - theta0 * math.exp(-1.0), math.inf)
        assert err < 1e-12

    def test_linear_only_random_field(self, grid32):
        theta0 = band(grid32, seed=4, j1=0, j2=2)
        cfg = SolverConfig(grid32, 0.7, 0.05, 0.5, linear_only=True, snapshot_stride=100)
        traj = run_simulation(theta0, cfg, diagnostics=False)
        assert traj.status == "completed"
        got = traj.fields[-1]
        exact = theta0.coeffs * np.exp(-grid32.xi_abs**0.7 * 0.5)
        np.testing.assert_allclose(got.coeffs, exact, atol=1e-15)


def band(grid, seed=0, amplitude=1.0, j1=1, j2=2):
    return make_initial_data("random_band", grid, amplitude=amplitude, seed=seed, j1=j1, j2=j2)


class TestNonlinearRuns:
    @pytest.mark.parametrize("scheme, order", [("etd_rk2", 2), ("etd_rk4", 4)])
    def test_temporal_order(self, scheme, order):
        g = GridSpec(32)
        theta0 = band(g, amplitude=2.0)
        ref = run_simulation(theta0, SolverConfig(g, 1.0, 1 / 640, 0.2, scheme="etd_rk4", snapshot_stride=10**6),
                             diagnostics=False).fields[-1]
        errs = []
        for dt in (0.02, 0.01):
            f = run_simulation(theta0, SolverConfig(g, 1.0, dt, 0.2, scheme=scheme, snapshot_stride=10**6),
                               diagnostics=False).fields[-1]
            errs.append(l2_norm_spectral(f - ref))
        observed = math.log2(errs[0] / errs[1])
        assert observed > order - 0.5

    def test_energy_identity_converges(self):
        g = GridSpec(64)
        theta0 = band(g, j1=1, j2=3)
        res = []
        for dt in (2e-3, 1e-3):
            traj = run_simulation(theta0, SolverConfig(g, 1.0, dt, 0.25, snapshot_stride=10**6))
            t, E = traj.diagnostic("energy")
            _, D = traj.diagnostic("dissipation")
            res.append(abs(E[-1] - E[0] + np.trapezoid(D, t)) / E[0])
        assert res[1] < 1e-2 and res[0] / res[1] > 3.5

    @pytest.mark.parametrize("seed", [0, 1])
    def test_lp_norms_non_increasing(self, seed):
        g = GridSpec(32)
        traj = run_simulation(band(g, seed), SolverConfig(g, 1.0, 1e-2, 0.5))
        for key in ("lp_2", "lp_4", "lp_inf"):
            _, v = traj.diagnostic(key)
            assert np.all(v[1:] <= v[:-1] * (1 + 1e-6)), key

    def test_mean_preserved(self, grid32):
        c = band(grid32).coeffs.copy()
        c[0, 0] = 0.3
        traj = run_simulation(SpectralField(grid32, c), SolverConfig(grid32, 1.0, 1e-2, 0.2), diagnostics=False)
        assert traj.fields[-1].coeffs[0, 0] == pytest.approx(0.3, abs=1e-15)

    def test_snapshots_and_callback(self, grid32):
        seen = []
        traj = run_simulation(band(grid32), SolverConfig(grid32, 1.0, 0.01, 0.1, snapshot_stride=3),
                              diagnostics=False, callback=lambda k, t, f: seen.append(k))
        assert seen == list(range(11))
        assert traj.times == pytest.approx([0.0, 0.03, 0.06, 0.09, 0.1])

    def test_pileup_flags_blowup(self, grid32):
        traj = run_simulation(band(grid32, amplitude=50.0), SolverConfig(grid32, 0.5, 1e-2, 1.0))
        assert traj.status == "blowup_flagged"
        assert traj.last_reliable_time is not None and traj.last_reliable_time < 1.0
        assert any("pileup" in w for w in traj.warnings)
        assert traj.times[-1] == pytest.approx(traj.last_reliable_time)

    def test_non_finite_step_raises(self, grid32):
        c = band(grid32).coeffs.copy()
        c[1, 1] = np.nan
        with pytest.raises(BlowupDetected) as info:
            step_etd(SpectralField(grid32, c), SolverConfig(grid32, 1.0, 0.1, 1.0), t=0.4)
        assert info.value.last_time == 0.4

    def test_grid_mismatch_rejected(self):
        with pytest.raises(ConfigurationError):
            run_simulation(band(GridSpec(32)), SolverConfig(GridSpec(64), 1.0, 0.1, 1.0))


class TestInitialData:
    @given(seed=st.integers(0, 10**6), amp=st.floats(0.1, 10.0))
    def test_random_band_properties(self, seed, amp):
        g = GridSpec(32)
        f = band(g, seed, amp)
        f.check_hermitian()
        assert f.coeffs[0, 0] == 0
        assert l2_norm_spectral(f) / g.period == pytest.approx(amp, rel=1e-12)
        assert not np.any(f.coeffs * (1 - g.dealias_mask))

    def test_random_band_grid_independent(self):
        a = band(GridSpec(32), seed=5)
        b = band(GridSpec(64), seed=5)
        np.testing.assert_allclose(b.physical()[::2, ::2], a.physical(), atol=1e-13)

    def test_deterministic(self, grid32):
        np.testing.assert_array_equal(band(grid32, 9).coeffs, band(grid32, 9).coeffs)

    def test_unresolvable_band_rejected(self):
        with pytest.raises(ConfigurationError):
            band(GridSpec(16), j1=2, j2=3)

    def test_unknown_kind(self, grid32):
        with pytest.raises(ConfigurationError):
            make_initial_data("tornado", grid32)

    def test_vortex_pair_mean_free_real(self, grid32):
        f = make_initial_data("vortex_pair", grid32)
        f.check_hermitian()
        assert f.coeffs[0, 0] == 0 and lp_norm(f, math.inf) > 0.1

    def test_single_mode_default(self, grid32):
        x1, _ = grid32.coordinates()
        np.testing.assert_allclose(make_initial_data("single_mode", grid32).physical(), np.sin(x1), atol=1e-14)


class TestPicard:
    def test_single_mode_differences_vanish_after_first(self, grid32):
        cfg = SolverConfig(grid32, 1.0, 0.05, 1.0)
        run = picard_iterate(single_mode(grid32, 1, 0), cfg, 6)
        assert run.status == "converged"
        assert run.differences[0] > 0 and max(run.differences[1:]) < 1e-14

    def test_small_data_matches_direct(self, grid32):
        theta0 = band(grid32, seed=4, amplitude=0.2, j1=0, j2=1)
        params = CriterionParams(2.0, 2.0, 1.0)
        T = existence_time_estimate(theta0, 2.0, 2.0, 2.0, 1.0, c_cal=1.0)
        cfg = SolverConfig(grid32, 1.0, T / 50, T)
        run = picard_iterate(theta0, cfg, 8, params)
        assert picard_contracts(run)
        direct = run_simulation(theta0, cfg, diagnostics=False)
        assert lambda_functional(run.final.trajectory - direct, params) < 1e-12

    def test_large_data_no_contraction(self, grid32):
        theta0 = band(grid32, amplitude=20.0, j1=0, j2=1)
        run = picard_iterate(theta0, SolverConfig(grid32, 1.0, 0.02, 1.0), 8)
        assert run.status == "no_contraction" and not picard_contracts(run)

    def test_k_max_validated(self, grid32):
        with pytest.raises(ConfigurationError):
            picard_iterate(band(grid32), SolverConfig(grid32, 1.0, 0.1, 1.0), 0)


class TestExistenceTime:
    def test_zero_data_unbounded(self, grid32):
        assert existence_time_estimate(grid32.zeros(), 2.0, 2.0, 4.0, 1.0, 1.0) == math.inf

    @pytest.mark.parametrize("r0", [2.0, 4.0])
    def test_amplitude_scaling(self, grid32, r0):
        f = band(grid32)
        t1 = existence_time_estimate(f, 4.0, 2.0, r0, 0.5, 1.0)
        t2 = existence_time_estimate(f * 2.0, 4.0, 2.0, r0, 0.5, 1.0)
        assert t2 / t1 == pytest.approx(2.0**-r0, rel=1e-12)

    def test_rejects_non_positive_constant(self, grid32):
        with pytest.raises(DomainError):
            existence_time_estimate(band(grid32), 2.0, 2.0, 2.0, 1.0, 0.0)

    def test_calibration_brackets(self):
        g = GridSpec(16)
        data = [band(g, s, amplitude=1.0, j1=0, j2=1) for s in range(2)]
        template = SolverConfig(g, 1.0, 0.1, 1.0)
        params = CriterionParams(2.0, 2.0, 1.0)
        c, log = calibrate_existence_constant(data, template, params, k_max=5, c_lo=0.1, c_hi=1e4,
                                              iterations=4, steps_per_unit=20)
        assert 0.1 <= c <= 1e4
        assert log[0] == (0.1, True)
        passed = [ci for ci, ok in log if ok]
        failed = [ci for ci, ok in log if not ok]
        assert c == max(passed) and (not failed or c < min(failed))


class TestTrajectory:
    def test_times_strictly_increasing(self, grid32):
        t = Trajectory()
        t.append(0.0, grid32.zeros())
        with pytest.raises(ConfigurationError):
            t.append(0.0, grid32.zeros())

    def test_require(self, grid32):
        with pytest.raises(InsufficientDataError):
            Trajectory([0.0], [grid32.zeros()]).require(2)

    def test_truncated_and_difference(self, grid32):
        f = random_field(grid32, 1)
        t = Trajectory([0.0, 0.5, 1.0], [f, f, f])
        assert t.truncated(0.5).times == [0.0, 0.5]
        assert not np.any((t - t).fields[1].coeffs)
