import numpy as np
import pytest

from htlab.grid import build_grid, field_norm
from htlab.multipliers import CutoffSpec
from htlab.wave import (DecompIndex, adaptive_kernel, decay_products, gaussian_band, piece_multiplier,
                        reconstruction_error, residual_scan, subordination_terms, tau_band_kernel,
                        w_assembly_error, wave_grid)

C = CutoffSpec()


def terms(tau, order=0):
    return subordination_terms(tau, C.band, C.chi1, order, C.band_support)


def test_subordination_residual_shrinks():
    res = [v for _, v in residual_scan([8, 16, 32, 64], C.band, C.chi1, 0)]
    assert all(b < a for a, b in zip(res, res[1:]))


def test_subordination_guards():
    with pytest.raises(ValueError):
        terms(2.0)
    with pytest.raises(ValueError):
        terms(8.0, -1)
    with pytest.raises(ValueError):
        DecompIndex(8.0, k=-1)


def test_pieces_reconstruct():
    tr = terms(16.0)
    lam_L = np.linspace(16 ** 2 / 8, 16 ** 2 * 4, 40)
    L, U = np.meshgrid(lam_L, np.linspace(0, 400, 30), indexing="ij")
    assert reconstruction_error(tr, C, L, U) < 1e-10
    with pytest.raises(ValueError):
        piece_multiplier("nk", tr, C, k=0)


def test_w_assembly(h1, cal):
    grid = build_grid(h1, 1.0, 0.5, 32, 64, r_panels=2, rho_panels=4)
    assert w_assembly_error(h1, 8.0, grid, cal=cal) < 1e-12


def test_gaussian_band():
    band, (lo, hi) = gaussian_band()
    assert band(1.0) == 1 and band(hi) < 1e-16 and lo == 0.14


def test_band_kernel_mass_small(h1, cal):
    # chi vanishes at 0, so the kernel integrates to 0
    K = tau_band_kernel(h1, 8.0, wave_grid(h1, 8.0, R_x=4.0, R_u=2.0), cal=cal)
    assert abs(K.mass()) < 5e-3 * field_norm(K, 1)


def test_adaptive_kernel_stable(h1, cal):
    f = piece_multiplier("V", terms(8.0), C)
    K = adaptive_kernel(h1, f, 8.0, R_x=4.0, R_u=1.9, cal=cal)
    assert K.meta["pilot_tail"] < 1e-3 * K.meta["pilot_l1"]
    assert field_norm(K, 1) == pytest.approx(K.meta["pilot_l1"], rel=1e-2)


def test_decay_region_errors(h1, cal):
    K = tau_band_kernel(h1, 8.0, wave_grid(h1, 8.0, R_x=0.5, R_u=0.01, min_nodes=16), cal=cal)
    with pytest.raises(ValueError):
        decay_products(K, 8.0, "finite-speed")
    with pytest.raises(ValueError):
        decay_products(K, 8.0, "nowhere")
