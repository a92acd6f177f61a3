"""Heisenberg-type groups in exponential coordinates.

A group is described by its skew maps ``J_1, ..., J_{d2}`` acting on the
first layer ``R^{d1}``.  Points are pairs ``(x, u)`` with the law

    (x, u) . (x', u') = (x + x', u + u' + 1/2 <J x, x'>),

where ``<J x, x'>`` is the vector with components ``(J_i x) . x'``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TOL = 1e-12


class HTypeError(ValueError):
    """Raised when a family of matrices does not define an H-type group."""


@dataclass(frozen=True)
class HTypeStructure:
    J: tuple
    name: str = "custom"
    d1: int = field(init=False)
    d2: int = field(init=False)

    def __post_init__(self):
        mats = tuple(np.array(m, dtype=float) for m in self.J)
        for m in mats:
            m.setflags(write=False)
        object.__setattr__(self, "J", mats)
        object.__setattr__(self, "d1", mats[0].shape[0])
        object.__setattr__(self, "d2", len(mats))

    @property
    def d(self) -> int:
        """Topological dimension."""
        return self.d1 + self.d2

    @property
    def Q(self) -> int:
        """Homogeneous dimension."""
        return self.d1 + 2 * self.d2

    @property
    def n(self) -> int:
        return self.d1 // 2

    def J_mu(self, mu) -> np.ndarray:
        mu = np.asarray(mu, dtype=float)
        return np.tensordot(mu, np.stack(self.J), axes=1)

    def bracket(self, x, y) -> np.ndarray:
        """Components ``(J_i x) . y``; broadcasts over leading axes."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.einsum("kij,...j,...i->...k", np.stack(self.J), x, y)


@dataclass(frozen=True)
class GroupPoint:
    x: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        u = np.array(self.u, dtype=float).reshape(-1)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
            raise ValueError("group point has non-finite entries")
        x.setflags(write=False)
        u.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u", u)

    def allclose(self, other: "GroupPoint", atol: float = TOL) -> bool:
        return bool(np.allclose(self.x, other.x, atol=atol, rtol=0)
                    and np.allclose(self.u, other.u, atol=atol, rtol=0))


def identity(g: HTypeStructure) -> GroupPoint:
    return GroupPoint(np.zeros(g.d1), np.zeros(g.d2))


def _symplectic_blocks(n: int) -> np.ndarray:
    J = np.zeros((2 * n, 2 * n))
    for b in range(n):
        J[2 * b, 2 * b + 1] = 1.0
        J[2 * b + 1, 2 * b] = -1.0
    return J


def build_htype(J_list, name: str = "custom", tol: float = TOL) -> HTypeStructure:
    """Validate a list of skew maps and return the group they define.

    Checks skewness of each ``J_i`` and the Clifford relations
    ``J_i J_j + J_j J_i = -2 delta_ij I`` in Frobenius norm.
    """
    mats = [np.asarray(m, dtype=float) for m in J_list]
    if not mats:
        raise HTypeError("need at least one skew map")
    size = mats[0].shape
    for m in mats:
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape != size:
            raise HTypeError("all matrices must be square and of the same size")
    if size[0] % 2:
        raise HTypeError(f"first layer dimension must be even, got {size[0]}")
    eye = np.eye(size[0])
    for i, m in enumerate(mats):
        res = np.linalg.norm(m + m.T)
        if res > tol:
            raise HTypeError(f"J_{i} is not skew-symmetric (residual {res:.3e})")
    for i, a in enumerate(mats):
        for j, b in enumerate(mats[i:], start=i):
            target = -2.0 * eye if i == j else 0.0
            res = np.linalg.norm(a @ b + b @ a - target)
            if res > tol:
                raise HTypeError(f"H-type identity violated for pair ({i}, {j}),"
                                 f" residual {res:.3e}")
    return HTypeStructure(tuple(mats), name=name)


def heisenberg(n: int) -> HTypeStructure:
    """Heisenberg group H^n: ``d1 = 2n``, ``d2 = 1``."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    return build_htype([_symplectic_blocks(int(n))], name=f"heisenberg-{int(n)}")


def quaternionic() -> HTypeStructure:
    """Left multiplications by ``i`` and ``j`` on the quaternions ``R^4``."""
    Li = np.array([[0, -1, 0, 0],
                   [1, 0, 0, 0],
                   [0, 0, 0, -1],
                   [0, 0, 1, 0]], dtype=float)
    Lj = np.array([[0, 0, -1, 0],
                   [0, 0, 0, 1],
                   [1, 0, 0, 0],
                   [0, -1, 0, 0]], dtype=float)
    return build_htype([Li, Lj], name="quaternionic-4-2")


PRESETS = {
    "heisenberg-1": lambda: heisenberg(1),
    "heisenberg-2": lambda: heisenberg(2),
    "heisenberg-3": lambda: heisenberg(3),
    "quaternionic-4-2": quaternionic,
}


def preset(name: str) -> HTypeStructure:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown group preset {name!r}; "
                         f"choose from {sorted(PRESETS)}") from None


def load_group(path) -> HTypeStructure:
    """Load skew maps from JSON: ``{"J": [[row, ...], ...]}`` or a bare list."""
    data = json.loads(Path(path).read_text())
    mats = data["J"] if isinstance(data, dict) else data
    name = data.get("name", Path(path).stem) if isinstance(data, dict) else Path(path).stem
    return build_htype(mats, name=name)


def htype_residual(g: HTypeStructure, mu) -> float:
    """Frobenius norm of ``J_mu^2 + |mu|^2 I``."""
    mu = np.asarray(mu, dtype=float)
    Jm = g.J_mu(mu)
    return float(np.linalg.norm(Jm @ Jm + mu.dot(mu) * np.eye(g.d1)))


def _check(g: HTypeStructure, *points: GroupPoint) -> None:
    for p in points:
        if p.x.shape != (g.d1,) or p.u.shape != (g.d2,):
            raise ValueError(f"point dimensions ({p.x.size}, {p.u.size}) do not "
                             f"match group ({g.d1}, {g.d2})")


def mul(g: HTypeStructure, p: GroupPoint, q: GroupPoint) -> GroupPoint:
    _check(g, p, q)
    return GroupPoint(p.x + q.x, p.u + q.u + 0.5 * g.bracket(p.x, q.x))


def inv(g: HTypeStructure, p: GroupPoint) -> GroupPoint:
    _check(g, p)
    return GroupPoint(-p.x, -p.u)


def norm(p: GroupPoint, kind: str = "koranyi") -> float:
    """Koranyi norm ``(|x|^4 + 16|u|^2)^(1/4)`` or Euclidean ``|x| + |u|``."""
    ax = np.linalg.norm(p.x)
    au = np.linalg.norm(p.u)
    if kind == "koranyi":
        return float((ax ** 4 + 16.0 * au ** 2) ** 0.25)
    if kind == "euclid":
        return float(ax + au)
    raise ValueError(f"unknown norm kind {kind!r}")


def dilate(p: GroupPoint, r: float, kind: str = "auto") -> GroupPoint:
    """Automorphic ``(rx, r^2 u)`` or isotropic ``(rx, ru)`` dilation."""
    if not r > 0:
        raise ValueError(f"dilation factor must be positive, got {r}")
    if kind == "auto":
        return GroupPoint(r * p.x, r * r * p.u)
    if kind == "iso":
        return GroupPoint(r * p.x, r * p.u)
    raise ValueError(f"unknown dilation kind {kind!r}")
