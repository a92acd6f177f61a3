import numpy as np
import pytest

from htlab.grid import (DomainError, KernelField, ball_volume, build_grid, field_norm, interpolate,
                        load_field, save_field, to_csv)


def test_weights_integrate_volume(h1):
    g = build_grid(h1, 2.0, 3.0, 32, 32)
    assert g.weights.sum() == pytest.approx(ball_volume(2, 2.0) * ball_volume(1, 3.0), rel=1e-12)


def test_gaussian_integral(h1):
    g = build_grid(h1, 8.0, 8.0, 64, 64, r_panels=4, rho_panels=4)
    R, P = np.meshgrid(g.r, g.rho, indexing="ij")
    f = KernelField(g, np.exp(-np.pi * (R ** 2 + P ** 2)))
    assert f.mass().real == pytest.approx(1.0, abs=1e-12)
    assert field_norm(f, 2) == pytest.approx(2 ** -0.75, rel=1e-10)


def test_roundtrip_and_csv(h1, tmp_path):
    g = build_grid(h1, 1.0, 1.0, 8, 8)
    R, P = np.meshgrid(g.r, g.rho, indexing="ij")
    f = KernelField(g, R + 1j * P, {"m": "test"})
    save_field(f, tmp_path / "k.htk", "heisenberg-1")
    back, header = load_field(tmp_path / "k.htk")
    assert np.array_equal(back.values, f.values) and header["group"] == "heisenberg-1"
    assert to_csv(f).splitlines()[0] == "r,rho,re,im"
    (tmp_path / "bad").write_bytes(b"xx")
    with pytest.raises(ValueError):
        load_field(tmp_path / "bad")


def test_errors(h1):
    with pytest.raises(ValueError):
        build_grid(h1, -1.0, 1.0, 8, 8)
    g = build_grid(h1, 1.0, 1.0, 8, 8)
    f = KernelField(g, np.full(g.shape, np.nan))
    with pytest.raises(ValueError):
        field_norm(f)
    with pytest.raises(DomainError):
        interpolate(KernelField(g, np.zeros(g.shape)), np.array([5.0]), np.array([0.1]))
