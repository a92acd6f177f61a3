"""Biradial grids, kernel fields and their norms.

Kernels of joint functions of the sublaplacian and ``|U|`` depend only on
``(r, rho) = (|x|, |u|)``.  A :class:`BiradialGrid` carries quadrature in
both variables with the polar Jacobians ``r^(d1-1) rho^(d2-1)`` and the
sphere areas folded into the weights, so ``sum(w * f)`` approximates the
Haar integral over the truncated region ``|x| <= R_x, |u| <= R_u``.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma, roots_legendre

MAGIC = b"HTLABK1\n"


def sphere_area(k: int) -> float:
    """Area of the unit sphere in ``R^k`` (``k = 1`` gives 2)."""
    return float(2 * np.pi ** (k / 2) / gamma(k / 2))


def ball_volume(k: int, R: float) -> float:
    return sphere_area(k) * R ** k / k


def composite_gauss(a: float, b: float, n: int, panels: int = 1):
    """Gauss-Legendre rule with ``n`` nodes total over equal panels of ``[a, b]``."""
    per = max(1, n // panels)
    x, w = roots_legendre(per)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def trapezoid(a: float, b: float, n: int):
    nodes = np.linspace(a, b, n)
    h = nodes[1] - nodes[0]
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return nodes, w


@dataclass(frozen=True)
class BiradialGrid:
    r: np.ndarray
    r_weights: np.ndarray
    rho: np.ndarray
    rho_weights: np.ndarray
    d1: int
    d2: int
    R_x: float
    R_u: float
    spec: dict = field(default_factory=dict)

    @property
    def shape(self):
        return (self.r.size, self.rho.size)

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.r_weights, self.rho_weights)

    @property
    def rho_uniform(self) -> bool:
        return self.spec.get("rho_rule") == "uniform"

    def key(self) -> str:
        return json.dumps(self.spec, sort_keys=True)


def build_grid(g, R_x: float, R_u: float, n_r: int, n_rho: int, *,
               r_panels: int = 1, rho_panels: int = 1, rho_rule: str = "gauss") -> BiradialGrid:
    """Quadrature grid on ``[0, R_x] x [0, R_u]`` for the group ``g``.

    ``rho_rule="uniform"`` gives a trapezoid axis starting at ``rho = 0``,
    which lets the fiber engine use a cosine transform in the centre.
    """
    if not (R_x > 0 and R_u > 0):
        raise ValueError("grid extents must be positive")
    if n_r < 1 or n_rho < 2:
        raise ValueError("grid must have at least one r node and two rho nodes")
    d1, d2 = g.d1, g.d2
    r, wr = composite_gauss(0.0, R_x, n_r, r_panels)
    if rho_rule == "gauss":
        rho, wrho = composite_gauss(0.0, R_u, n_rho, rho_panels)
    elif rho_rule == "uniform":
        rho, wrho = trapezoid(0.0, R_u, n_rho)
    else:
        raise ValueError(f"unknown rho rule {rho_rule!r}")
    wr = wr * sphere_area(d1) * r ** (d1 - 1)
    wrho = wrho * sphere_area(d2) * rho ** (d2 - 1)
    spec = {"d1": d1, "d2": d2, "R_x": R_x, "R_u": R_u, "n_r": int(r.size),
            "n_rho": int(rho.size), "r_panels": r_panels, "rho_panels": rho_panels,
            "rho_rule": rho_rule}
    return BiradialGrid(r, wr, rho, wrho, d1, d2, float(R_x), float(R_u), spec)


@dataclass
class KernelField:
    grid: BiradialGrid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")

    def __add__(self, other):
        _same_grid(self, other)
        return KernelField(self.grid, self.values + other.values, {})

    def __sub__(self, other):
        _same_grid(self, other)
        return KernelField(self.grid, self.values - other.values, {})

    def scaled(self, c) -> "KernelField":
        return KernelField(self.grid, c * self.values, dict(self.meta))

    def mass(self) -> complex:
        return complex(np.sum(self.grid.weights * self.values))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


def _same_grid(a: KernelField, b: KernelField):
    if a.grid is not b.grid and a.grid.key() != b.grid.key():
        raise ValueError("kernel fields live on different grids")


def field_norm(f: KernelField, p: int = 1, with_tail: bool = False):
    """Weighted ``L^p`` norm over the truncated domain.

    With ``with_tail`` also returns the share of ``int |f|^p`` carried by the
    outer tenth of the domain, a proxy for the truncation error.
    """
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    a = np.abs(f.values)
    if np.isnan(a).any():
        raise ValueError("kernel field contains NaN")
    dens = f.grid.weights * a ** p
    total = float(np.sum(dens))
    val = total ** (1.0 / p)
    if not with_tail:
        return val
    g = f.grid
    outer = (g.r[:, None] > 0.9 * g.R_x) | (g.rho[None, :] > 0.9 * g.R_u)
    tail = float(np.sum(dens[outer])) / total if total > 0 else 0.0
    return val, tail


def l1_outside(f: KernelField, mask) -> float:
    return float(np.sum(f.grid.weights * np.abs(f.values) * mask))


# --------------------------------------------------------------------------
# interpolation

class DomainError(ValueError):
    """Query outside the reliable domain of a kernel field."""


def _bracket(nodes, q):
    i = np.clip(np.searchsorted(nodes, q) - 1, 0, nodes.size - 2)
    t = (q - nodes[i]) / (nodes[i + 1] - nodes[i])
    return i, t


def interpolate(f: KernelField, r, rho):
    """Bilinear interpolation in ``(r, rho)``; exact at nodes and for linears."""
    g = f.grid
    r = np.asarray(r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    tol = 1e-12
    if (r < -tol).any() or (r > g.R_x * (1 + tol)).any() or (rho < -tol).any() \
            or (rho > g.R_u * (1 + tol)).any():
        raise DomainError("interpolation query outside the grid extents")
    i, s = _bracket(g.r, r)
    j, t = _bracket(g.rho, rho)
    v = f.values
    return ((1 - s) * (1 - t) * v[i, j] + s * (1 - t) * v[i + 1, j]
            + (1 - s) * t * v[i, j + 1] + s * t * v[i + 1, j + 1])


def resample(f: KernelField, grid: BiradialGrid) -> KernelField:
    R, P = np.meshgrid(grid.r, grid.rho, indexing="ij")
    return KernelField(grid, interpolate(f, R, P), dict(f.meta))


# --------------------------------------------------------------------------
# persistence

def save_field(f: KernelField, path, group_name: str = "") -> None:
    """Binary cache: magic, header length, JSON header, then float64 arrays."""
    g = f.grid
    header = {"group": group_name, "grid": g.spec, "meta": f.meta,
              "endianness": "little", "shape": list(g.shape)}
    hb = json.dumps(header, sort_keys=True, default=str).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(hb)))
        fh.write(hb)
        for arr in (g.r, g.r_weights, g.rho, g.rho_weights):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        pairs = np.stack([f.values.real, f.values.imag], axis=-1)
        fh.write(np.ascontiguousarray(pairs, dtype="<f8").tobytes())


def load_field(path) -> tuple[KernelField, dict]:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path} is not a kernel cache file")
        (hl,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hl))
        if header.get("endianness") != "little":
            raise ValueError("unsupported endianness tag")
        nr, nrho = header["shape"]
        data = np.frombuffer(fh.read(), dtype="<f8")
    parts = np.split(data[: 2 * nr + 2 * nrho], np.cumsum([nr, nr, nrho]))
    spec = header["grid"]
    grid = BiradialGrid(parts[0].copy(), parts[1].copy(), parts[2].copy(), parts[3].copy(),
                        spec["d1"], spec["d2"], spec["R_x"], spec["R_u"], spec)
    pairs = data[2 * nr + 2 * nrho:].reshape(nr, nrho, 2)
    return KernelField(grid, pairs[..., 0] + 1j * pairs[..., 1], header["meta"]), header


def to_csv(f: KernelField) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "rho", "re", "im"])
    for i, r in enumerate(f.grid.r):
        for j, rho in enumerate(f.grid.rho):
            v = f.values[i, j]
            w.writerow([repr(float(r)), repr(float(rho)), repr(float(v.real)), repr(float(v.imag))])
    return buf.getvalue()
