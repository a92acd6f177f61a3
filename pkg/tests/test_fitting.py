import numpy as np
import pytest

from htlab.fitting import ExperimentRecord, fit_exponent


def test_exact_power_law():
    fit = fit_exponent([(x, 7 * x ** 1.5) for x in (1, 2, 4, 8, 16)])
    assert fit.slope == pytest.approx(1.5, abs=1e-12)
    assert fit_exponent([(x, 3.0) for x in (1, 2, 3, 4)]).slope == pytest.approx(0, abs=1e-12)


def test_noisy_fit_interval():
    rng = np.random.default_rng(0)
    xs = np.geomspace(1, 100, 12)
    fit = fit_exponent([(x, x * (1 + 0.05 * rng.standard_normal())) for x in xs])
    assert 0.9 <= fit.slope - fit.half_width and fit.slope + fit.half_width <= 1.1


def test_semilog():
    fit = fit_exponent([(n, 2.0 ** (-0.5 * n)) for n in range(1, 6)], semilog=True)
    assert fit.slope == pytest.approx(-0.5)


@pytest.mark.parametrize("pts", [[(1, 1), (2, 2), (3, 3)], [(1, 1), (2, -2), (3, 3), (4, 4)],
                                 [(2, 1), (2, 2), (2, 3), (2, 4)]])
def test_fit_errors(pts):
    with pytest.raises(ValueError):
        fit_exponent(pts)


def test_record_roundtrip_and_consistency():
    rec = ExperimentRecord.from_fit("growth", "K", [(x, x) for x in (1, 2, 4, 8)], (0.9, 1.1))
    assert rec.passed
    assert ExperimentRecord.from_dict(rec.as_dict()) == rec
    with pytest.raises(ValueError):
        ExperimentRecord("g", "x", rec.measurements, fit=rec.fit, band=(2, 3), passed=True)
