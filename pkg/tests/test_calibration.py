"""Window calibration: search space, seeding, damping, full fits."""

import math
from dataclasses import replace

import numpy as np
import pytest

from lppls_detect.calibration import (
    SearchSpace,
    damping_ratio,
    fit_window,
    window_seed,
)
from lppls_detect.errors import UsageError
from lppls_detect.series import FitWindow

from conftest import fast_cmaes


class TestSearchSpace:
    def test_for_window_box(self):
        space = SearchSpace.for_window(100)
        lo, hi = space.tc_range
        assert lo == pytest.approx(99.01)
        assert hi == pytest.approx(99.0 + 33.0)
        assert space.m_range == (0.0, 1.0)
        assert space.omega_range == (1.0, 50.0)

    def test_custom_tc_fraction(self):
        space = SearchSpace.for_window(100, tc_fraction=0.1)
        assert space.tc_range[1] == pytest.approx(99.0 * 1.1)

    def test_bounds_order(self):
        space = SearchSpace.for_window(50)
        assert space.bounds() == [space.tc_range, space.m_range, space.omega_range]

    def test_unordered_range_rejected(self):
        with pytest.raises(UsageError):
            SearchSpace(tc_range=(10.0, 5.0))


class TestWindowSeed:
    def test_deterministic(self):
        assert window_seed(0, "1d", 100, 50) == window_seed(0, "1d", 100, 50)

    def test_sensitive_to_every_field(self):
        base = window_seed(0, "1d", 100, 50)
        assert window_seed(1, "1d", 100, 50) != base
        assert window_seed(0, "1h", 100, 50) != base
        assert window_seed(0, "1d", 101, 50) != base
        assert window_seed(0, "1d", 100, 55) != base

    def test_fits_in_uint32(self):
        for s in range(20):
            assert 0 <= window_seed(s, "30m", 640, 30) < 2**32


class TestDamping:
    def test_known_value(self):
        # 0.5 * 2 / (5 * 0.16) = 1.25
        assert damping_ratio(0.5, -2.0, 5.0, 0.16, 0.0) == pytest.approx(1.25, abs=1e-12)

    def test_no_oscillation_is_infinitely_damped(self):
        assert damping_ratio(0.5, -1.0, 9.0, 0.0, 0.0) == math.inf

    def test_sign_of_b_ignored(self):
        assert damping_ratio(0.5, 2.0, 5.0, 0.0, 0.16) == damping_ratio(0.5, -2.0, 5.0, 0.16, 0.0)


class TestFitWindow:
    def test_recovers_noiseless_parameters(self, clean_bubble):
        fit = fit_window(clean_bubble, FitWindow(0, 79), fast_cmaes(seed=0))
        assert fit.tc == pytest.approx(87.0, abs=0.2)
        assert fit.m == pytest.approx(0.6, abs=0.01)
        assert fit.omega == pytest.approx(8.0, abs=0.1)
        assert fit.B < 0
        assert fit.ssr < 1e-12
        assert fit.window == FitWindow(0, 79)

    def test_deterministic_for_fixed_seed(self, noisy_bubble):
        cfg = fast_cmaes(seed=11)
        a = fit_window(noisy_bubble, FitWindow(0, 79), cfg)
        b = fit_window(noisy_bubble, FitWindow(0, 79), cfg)
        assert (a.tc, a.m, a.omega, a.A, a.B, a.C1, a.C2, a.ssr) == (
            b.tc,
            b.m,
            b.omega,
            b.A,
            b.B,
            b.C1,
            b.C2,
            b.ssr,
        )

    def test_tc_stays_in_search_box(self, noisy_bubble):
        window = FitWindow(20, 79)
        fit = fit_window(noisy_bubble, window, fast_cmaes(seed=2))
        t2_rel = float(window.length - 1)
        assert t2_rel < fit.tc <= t2_rel + t2_rel / 3.0 + 1e-9

    def test_custom_space_respected(self, noisy_bubble):
        space = SearchSpace(tc_range=(79.01, 99.0), omega_range=(6.0, 10.0))
        fit = fit_window(noisy_bubble, FitWindow(0, 79), fast_cmaes(seed=3), space=space)
        assert 6.0 <= fit.omega <= 10.0

    def test_enforce_damping_bounds_ratio(self, noisy_bubble):
        fit = fit_window(
            noisy_bubble, FitWindow(0, 79), fast_cmaes(seed=4), enforce_damping=True
        )
        assert damping_ratio(fit.m, fit.B, fit.omega, fit.C1, fit.C2) >= 1.0

    def test_window_beyond_series_rejected(self, clean_bubble):
        with pytest.raises(UsageError):
            fit_window(clean_bubble, FitWindow(0, 200), fast_cmaes())

    def test_subwindow_uses_relative_time(self, clean_bubble):
        # same generator, window starting at index 20: tc shifts by 20 samples
        fit = fit_window(clean_bubble, FitWindow(20, 79), fast_cmaes(seed=6))
        assert fit.tc == pytest.approx(67.0, abs=0.3)
