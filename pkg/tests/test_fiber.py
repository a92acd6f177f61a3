import numpy as np
import pytest

from htlab.fiber import (SEEDS, CalibrationError, FiberParams, JointMultiplier, calibrate_constants,
                         fiber_kernel, heat_closed_form, heat_symbol, schrodinger_symbol)
from htlab.grid import build_grid


def test_calibration_recovers_conventions(cal):
    assert cal.calibrated
    assert cal.c_E == pytest.approx(SEEDS["c_E"], rel=1e-8)
    assert cal.c_Z == pytest.approx(SEEDS["c_Z"], rel=1e-8)
    assert cal.perturbed_error > 100 * cal.match_error


def test_heat_matches_closed_form(h1, cal):
    grid = build_grid(h1, 3.0, 3.0, 24, 24, rho_rule="uniform")
    A = fiber_kernel(h1, heat_symbol(0.5), grid, FiberParams(d_mu=1 / 12), cal)
    B = heat_closed_form(h1, 0.5, grid)
    assert np.max(np.abs(A.values - B.values)) / np.max(np.abs(B.values)) < 1e-6


def test_symbol_algebra():
    a, b = heat_symbol(1.0), heat_symbol(2.0)
    prod = a * b
    assert prod(1.5, 0.0) == pytest.approx(np.exp(-4.5))
    assert prod.lam_max == min(a.lam_max, b.lam_max)
    assert a.scaled(2)(0.0, 0.0) == 2


def test_symbol_errors(h1):
    with pytest.raises(ValueError):
        heat_symbol(0)
    with pytest.raises(ValueError):
        schrodinger_symbol(1.0, 0.0)
    with pytest.raises(CalibrationError):
        calibrate_constants(h1, tol=1e-20)
