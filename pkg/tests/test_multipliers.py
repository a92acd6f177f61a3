import numpy as np
import pytest

from htlab.multipliers import (AliasingError, CutoffSpec, analytic_family, class_constants, eta0,
                               high_low_split, osc_multiplier, parse_multiplier, phi_dyadic,
                               sobolev_growth_table, sobolev_norm, sup_norm, zeta0, zeta1)


def test_partitions():
    t = np.linspace(0, 40, 4001)
    assert np.allclose(sum(eta0(t - k * np.pi) for k in range(-2, 16)), 1, atol=1e-13)
    b = np.linspace(0, 500, 5001)
    assert np.allclose(zeta0(b) + sum(zeta1(b / 2.0 ** n) for n in range(1, 12)), 1, atol=1e-13)
    lam = np.geomspace(1, 1000, 500)
    assert np.allclose(sum(phi_dyadic(lam / 2.0 ** j) for j in range(-1, 12)), 1, atol=1e-13)


def test_plateaus_cover():
    c = CutoffSpec()
    x = np.linspace(0.5, 2.0, 101)
    assert np.all(c.band_wide(x) == 1)
    assert np.all(c.chi1(x ** 2) == 1)


def test_parse_and_shape():
    m = parse_multiplier("osc:theta=2,beta=3")
    assert (m.theta, m.beta) == (2.0, 3.0)
    lam = np.array([4.0])
    assert abs(m(lam)[0]) == pytest.approx(4.0 ** -3)
    assert parse_multiplier("mh:gaussian")(np.array([0.0]))[0] == 1
    with pytest.raises(ValueError):
        parse_multiplier("bogus")
    with pytest.raises(ValueError):
        osc_multiplier(-1, 1)


def test_sobolev_norm_plancherel():
    x = np.linspace(-10, 10, 4001)
    f = np.exp(-x ** 2)
    assert sobolev_norm(f, x[1] - x[0], 0) == pytest.approx(np.sqrt(np.sqrt(np.pi / 2)), rel=1e-9)
    with pytest.raises(AliasingError):
        sobolev_norm(np.ones(100), 0.1, 1)


def test_dyadic_growth_table_columns():
    rows = sobolev_growth_table(2, 3, 2, [1, 2])
    assert set(rows[0]) == {"j", "l2s_norm", "bound", "ratio"}


def test_analytic_family_identity():
    m = osc_multiplier(2, 3)
    _, ml = high_low_split(m)
    f = analytic_family(ml, 2, 3, 3, complex(1, 0))
    lam = np.linspace(0, 20, 101)
    assert np.allclose(f(lam), ml(lam))
    assert sup_norm(analytic_family(ml, 2, 3, 3, complex(0, 1))) <= 1 + 1e-12
    with pytest.raises(ValueError):
        analytic_family(ml, 2, 3, 3, complex(2, 0))


def test_class_constants_member():
    rep = class_constants(osc_multiplier(2, 3), 2, 3, 2, t_max=2.0 ** 5)
    assert rep.stable and np.isfinite(rep.constant)
