import numpy as np
import pytest

from htlab.atoms import (AtomError, atom_level, biradial_convolve, check_atom, direct_convolve,
                         hjn_symbol, laguerre_coefficients, make_atom)
from htlab.fiber import heat_closed_form, heat_symbol
from htlab.grid import build_grid, field_norm, interpolate


@pytest.mark.parametrize("kind", ["oscillating-sign", "radial-shell"])
@pytest.mark.parametrize("r", [1.0, 0.5, 0.125])
def test_atom_axioms(h1, kind, r):
    a = make_atom(h1, r, kind)
    assert all(check_atom(a, h1).values())
    assert a.stats["l2"] == pytest.approx(r ** -1.5)
    assert abs(a.stats["mean"]) <= 1e-10 * a.stats["l1"]


def test_atom_errors(h1):
    with pytest.raises(AtomError):
        make_atom(h1, 0.25, "plain")
    with pytest.raises(AtomError):
        make_atom(h1, 2.0)
    assert make_atom(h1, 1.0, "plain").cancellation_required is False
    assert [atom_level(r) for r in (1, 0.5, 0.3, 0.25)] == [0, -1, -1, -2]


def test_heat_coefficients(h1, cal):
    grid = build_grid(h1, 8.0, 10.0, 64, 96, r_panels=4, rho_panels=6)
    H = heat_closed_form(h1, 0.5, grid)
    mu = np.array([0.3, 1.0])
    kmax = np.array([6, 6])
    flat, off = laguerre_coefficients(h1, H, mu, kmax, cal)
    for i, m in enumerate(mu):
        lam = cal.c_E * m * (2 * np.arange(7) + h1.n)
        assert np.allclose(flat[off[i]: off[i] + 7], np.exp(-0.5 * lam), atol=1e-7)


def test_spectral_matches_direct(h1, cal):
    a = make_atom(h1, 0.5, n_r=32, n_rho=32)
    gK = build_grid(h1, 4.0, 5.0, 48, 64, r_panels=3, rho_panels=4)
    K = heat_closed_form(h1, 0.2, gK)
    out = build_grid(h1, 1.0, 1.0, 8, 8)
    spec = biradial_convolve(h1, heat_symbol(0.2), a, out, cal=cal)
    r, rho = out.r[::3], out.rho[::3]
    direct = direct_convolve(h1, K, a, r, rho)
    R, P = np.meshgrid(r, rho, indexing="ij")
    ref = interpolate(spec, R, P)
    assert np.max(np.abs(direct - ref)) <= 0.05 * np.max(np.abs(ref))


def test_hjn_symbol_support():
    f = hjn_symbol(-2, 1)
    assert f(4.0 ** -2, 2.0 ** -1) == 1
    assert f(100.0, 2.0 ** -1) == 0
    assert f.lamU_band == (0.25 * 0.5, 4 * 0.5)
