"""Biradial atoms, group convolution and the atom-image experiments.

Atoms are centred and biradial, so they live on a small ``(r, rho)`` grid
over the Euclidean ball of radius ``r``.  Convolution with the kernel of a
joint multiplier is done spectrally: on each fiber ``mu`` the atom is
expanded in the Laguerre projection kernels and its coefficients multiply
the symbol, which then goes through the fiber engine.  A direct quadrature
route over ``(y, v)`` is kept for validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .fiber import (CalibrationReport, FiberParams, JointMultiplier, calibration_for,
                    fiber_kernel, mu_nodes, spherical_kernel, sqrt_symbol)
from .grid import BiradialGrid, DomainError, KernelField, build_grid, field_norm, interpolate, \
    sphere_area
from .multipliers import CutoffSpec, mother_bump

PROFILES = ("plain", "oscillating-sign", "radial-shell")
_BIG = 1e250


class AtomError(ValueError):
    """Atom axioms cannot be met."""


@dataclass
class Atom:
    r: float
    L: int
    kind: str
    profile: KernelField
    cancellation_required: bool
    stats: dict = field(default_factory=dict)

    @property
    def grid(self) -> BiradialGrid:
        return self.profile.grid


def atom_level(r: float) -> int:
    """``L`` with ``2^(L-1) < r <= 2^L``."""
    return int(math.ceil(math.log2(r) - 1e-12))


def _shape(kind: str, t):
    """Profile in ``t = |(x, u)|_E / r`` before normalization, as ``(core, correction)``."""
    if kind == "plain":
        return mother_bump(t), None
    if kind == "oscillating-sign":
        return mother_bump(t), mother_bump(t) * t ** 2
    if kind == "radial-shell":
        return mother_bump((t - 0.65) / 0.3), mother_bump(t / 0.4)
    raise AtomError(f"unknown atom profile {kind!r}")


def make_atom(g, r: float, kind: str = "oscillating-sign", n_r: int = 48, n_rho: int = 48) -> Atom:
    """Centred biradial atom on the Euclidean ball of radius ``r``.

    Mean zero is forced on the atom's own quadrature (``r <= 1/2`` requires
    it, so ``plain`` is rejected there) and the profile is scaled to
    ``||a||_2 = r^(-d/2)``.
    """
    if not 0 < r <= 1:
        raise AtomError("atom radius must lie in (0, 1]")
    need = r <= 0.5
    if kind == "plain" and need:
        raise AtomError("plain profile cannot have the cancellation required for r <= 1/2")
    grid = build_grid(g, r, r, n_r, n_rho, r_panels=max(1, n_r // 16), rho_panels=max(1, n_rho // 16))
    R, P = np.meshgrid(grid.r, grid.rho, indexing="ij")
    t = np.hypot(R, P) / r
    core, corr = _shape(kind, t)
    W = grid.weights
    if corr is None:
        vals = core
    else:
        vals = core - (W * core).sum() / (W * corr).sum() * corr
    vals = vals * r ** (-g.d / 2) / np.sqrt((W * vals ** 2).sum())
    a = KernelField(grid, vals, {"atom": kind, "r": r})
    mean = float((W * vals).sum())
    l1 = field_norm(a, 1)
    stats = {"mean": mean, "l1": l1, "l2": field_norm(a, 2), "l2_bound": r ** (-g.d / 2),
             "support_ok": bool(np.all(vals[t > 1] == 0))}
    if need and abs(mean) > 1e-8 * l1:
        raise AtomError("cancellation not achieved")
    return Atom(r, atom_level(r), kind, a, need, stats)


def check_atom(atom: Atom, g) -> dict:
    s = atom.stats
    return {"support": s["support_ok"], "l2": s["l2"] <= 1.01 * s["l2_bound"],
            "cancellation": (not atom.cancellation_required) or abs(s["mean"]) <= 1e-8 * s["l1"]}


# --------------------------------------------------------------------------
# spectral coefficients

def laguerre_coefficients(g, f: KernelField, mu, kmax, cal: CalibrationReport | None = None):
    """Coefficients ``c_k(mu)`` of ``f`` in the projection kernels, ``k <= kmax(mu)``.

    ``f^mu(x) = int f(x, u) e^{-2 pi i u.mu} du`` is expanded as
    ``c_N |mu|^n sum_k c_k l_k(c_Z |mu| |x|^2)``; orthogonality of the
    Laguerre functions gives each ``c_k`` as one weighted sum.
    Returns a flat array and offsets: ``c_k(mu_i) = flat[off[i] + k]``.
    """
    cal = cal or calibration_for(g)
    G = f.grid
    n = g.n
    mu = np.asarray(mu, dtype=float)
    kmax = np.asarray(kmax, dtype=np.int64)
    S = spherical_kernel(mu, G.rho, g.d2) * (G.rho_weights / sphere_area(g.d2))
    F = (f.values @ S.T).T                              # f^mu(r_q), shape (mu, r)
    FW = F * G.r_weights[None, :]
    off = np.concatenate([[0], np.cumsum(np.maximum(kmax, -1) + 1)])
    flat = np.zeros(int(off[-1]), dtype=complex)
    z = cal.c_Z * mu[:, None] * G.r[None, :] ** 2
    alpha = n - 1
    prev = np.zeros_like(z)
    cur = np.ones_like(z)
    logE = -0.5 * z
    top = int(kmax.max()) if kmax.size else -1
    lognorm0 = np.log(sphere_area(g.d1) / 2) - n * np.log(cal.c_Z * mu)
    for k in range(top + 1):
        live = np.nonzero(kmax >= k)[0]
        ell = cur[live] * np.exp(logE[live])
        proj = np.sum(FW[live] * ell, axis=1)
        h = np.exp(lognorm0[live] + gammaln(k + n) - gammaln(k + 1))
        flat[off[live] + k] = proj / (cal.c_N * mu[live] ** n * h)
        nxt = ((2 * k + 1 + alpha - z) * cur - (k + alpha) * prev) / (k + 1)
        prev, cur = cur, nxt
        big = np.abs(cur) > _BIG
        if big.any():
            cur[big] /= _BIG
            prev[big] /= _BIG
            logE[big] += np.log(_BIG)
    return flat, off


def spectral_product(g, f: JointMultiplier, a: KernelField, grid: BiradialGrid,
                     params: FiberParams | None = None, cal=None) -> JointMultiplier:
    """Joint symbol of ``a * K_f`` on the fiber nodes the engine will use for ``grid``."""
    params = params or FiberParams()
    cal = cal or calibration_for(g)
    m, _, _ = mu_nodes(g, f, grid, params, cal)
    kmax = np.floor((f.lam_max / (cal.c_E * m) - g.n) / 2).astype(np.int64)
    flat, off = laguerre_coefficients(g, a, m, kmax, cal)
    lamU_nodes = cal.c_U * m

    def h(lam_L, lam_U):
        lam_L = np.asarray(lam_L, dtype=float)
        lam_U = np.broadcast_to(np.asarray(lam_U, dtype=float), lam_L.shape)
        i = np.clip(np.searchsorted(lamU_nodes, lam_U), 0, m.size - 1)
        k = np.rint((lam_L / (cal.c_E * m[i]) - g.n) / 2).astype(np.int64)
        ok = (k >= 0) & (k <= kmax[i]) & np.isclose(lamU_nodes[i], lam_U, rtol=1e-12, atol=0)
        idx = np.where(ok, off[i] + np.clip(k, 0, None), 0)
        return np.where(ok, flat[idx], 0.0) * f(lam_L, lam_U)

    return JointMultiplier(h, f.lam_max, f.lam_min, f.lamU_band, name=f"atom*{f.name}",
                           meta=dict(f.meta))


def biradial_convolve(g, f: JointMultiplier, a, grid: BiradialGrid,
                      params: FiberParams | None = None, cal=None) -> KernelField:
    """``a * K_f`` sampled on ``grid`` (spectral route).

    ``a`` is an :class:`Atom` or any biradial :class:`KernelField` on its
    own grid.  The fiber spacing is the one ``grid`` needs, so the atom's
    own extent does not enter the alias period.
    """
    prof = a.profile if isinstance(a, Atom) else a
    h = spectral_product(g, f, prof, grid, params, cal)
    out = fiber_kernel(g, h, grid, params, cal)
    out.meta.update({"route": "spectral-convolution"})
    return out


def direct_convolve(g, K: KernelField, a, r_out, rho_out, n_s: int = 24, n_phi: int = 32,
                    n_v: int = 32) -> np.ndarray:
    """``(a * K)(x, u)`` at axis points by tensor quadrature over the atom's ball (``d2 = 1``, ``d1 = 2``).

    Off-grid kernel values come from :func:`grid.interpolate`; queries
    outside ``K``'s grid raise :class:`grid.DomainError`.
    """
    if g.d1 != 2 or g.d2 != 1:
        raise NotImplementedError("direct route is implemented for H^1 only")
    prof = a.profile if isinstance(a, Atom) else a
    R = prof.grid.R_x
    s, ws = np.polynomial.legendre.leggauss(n_s)
    s, ws = 0.5 * R * (s + 1), 0.5 * R * ws
    ph = 2 * np.pi * np.arange(n_phi) / n_phi
    v, wv = np.polynomial.legendre.leggauss(n_v)
    v, wv = R * v, R * wv
    S, PH, V = np.meshgrid(s, ph, v, indexing="ij")
    Wt = (ws * s)[:, None, None] * (2 * np.pi / n_phi) * wv[None, None, :]
    inside = S ** 2 + V ** 2 <= R ** 2
    av = np.zeros(S.shape)
    av[inside] = interpolate(prof, S[inside], np.abs(V[inside])).real
    Y = np.stack([S * np.cos(PH), S * np.sin(PH)], axis=-1)
    out = np.zeros((len(r_out), len(rho_out)), dtype=complex)
    for i, r in enumerate(r_out):
        x = np.array([r, 0.0])
        dx = x - Y
        br = g.bracket(Y, np.broadcast_to(x, Y.shape))[..., 0]
        rr = np.linalg.norm(dx, axis=-1)
        for j, rho in enumerate(rho_out):
            uu = np.abs(rho - V - 0.5 * br)
            out[i, j] = np.sum(Wt * av * interpolate(K, rr, uu))
    return out


# --------------------------------------------------------------------------
# atom images

def _piece_symbol(m, j: int, phi, lo_hi=(0.5, 2.0)) -> JointMultiplier:
    sc = 2.0 ** j
    return sqrt_symbol(lambda x: m(x) * phi(x / sc), (lo_hi[0] * sc, lo_hi[1] * sc),
                       name=f"m_j:j={j}")


def image_grid(g, j_max: int, theta: float, atom_r: float, max_nodes: int = 4096):
    """Domain holding ``m_j(sqrt L) a`` for ``j <= j_max``.

    The pieces spread like ``e^{i lam^theta}`` at ``lam ~ 2^j`` over unit time:
    ``|x| <~ theta 2^{(theta-1) j} + 1``; the measured central extent is about ``1.5 |x|``.
    """
    from .wave import wave_grid
    lam = 2.0 ** (j_max + 1)
    speed = theta * lam ** (theta - 1)
    R_x = 1.5 * (speed + 2.0) + atom_r
    R_u = 1.5 * R_x + atom_r
    return wave_grid(g, lam / 2, R_x=R_x, R_u=R_u, max_nodes=max_nodes)


def atom_image_norm(g, m, atom: Atom, js=range(0, 3), *, cutoffs: CutoffSpec | None = None,
                    grid: BiradialGrid | None = None, theta: float = 2.0, tail_tol: float = 0.05,
                    params: FiberParams | None = None, cal=None) -> tuple[float, dict]:
    """``|| sum_j m_j(sqrt L) a ||_1`` over the window ``js`` with per-``j`` contributions.

    The tail beyond the window is extrapolated geometrically from the last
    two per-``j`` norms; ``record["converged"]`` is false when it exceeds
    ``tail_tol`` of the value.
    """
    cutoffs = cutoffs or CutoffSpec()
    js = list(js)
    grid = grid or image_grid(g, max(js), theta, atom.r)
    total = None
    per_j = {}
    for j in js:
        img = biradial_convolve(g, _piece_symbol(m, j, cutoffs.phi), atom, grid, params, cal)
        per_j[j] = field_norm(img, 1)
        total = img if total is None else total + img
    value = field_norm(total, 1)
    last = [per_j[j] for j in js[-2:]]
    if len(last) == 2 and last[0] > 0 and last[1] < last[0]:
        q = last[1] / last[0]
        tail = last[1] * q / (1 - q)
    else:
        tail = float("inf") if len(last) == 2 else 0.0
    rec = {"per_j": per_j, "tail_est": tail, "j_window": [js[0], js[-1]],
           "converged": bool(tail <= tail_tol * value), "grid": grid.spec,
           "edge_share": field_norm(total, 1, with_tail=True)[1]}
    return value, rec


# --------------------------------------------------------------------------
# H_{j,n}

def hjn_symbol(j: int, n: int, cutoffs: CutoffSpec | None = None) -> JointMultiplier:
    """``chi1'(2^{-2j} L) zeta'(2^{-j-n} |U|)``; negative ``j`` is allowed."""
    c = cutoffs or CutoffSpec()
    sL, sU = 4.0 ** j, 2.0 ** (j + n)
    lo, hi = 0.25 * sU, 4.0 * sU
    lam_lo, lam_hi = sL / 16.0, 16.0 * sL

    def f(lam_L, lam_U):
        return c.chi1p(np.asarray(lam_L) / sL) * c.zeta1p(np.asarray(lam_U) / sU)

    return JointMultiplier(f, lam_hi, lam_lo, (lo, hi), name=f"H:j={j},n={n}")


def hjn_domain(j: int, n: int, atom_r: float = 0.0, pad: float = 4.0):
    """Extents for ``H_{j,n}`` (scales ``2^-j`` and ``2^{-2j}``) or its atom image.

    ``pad`` covers the slowly decaying cutoff tails and keeps the fiber
    alias period ``3 R_u`` clear of them.
    """
    sx = 2.0 ** -j
    R_x, R_u = 6.0 * sx, max(6.0 * sx * sx, 2.0 ** (-j - n) * 6.0)
    return pad * (R_x + 2 * atom_r), pad * (R_u + 2 * atom_r + atom_r * R_x)


def hjn_field(g, j: int, n: int, grid: BiradialGrid | None = None, cutoffs=None,
              params: FiberParams | None = None, cal=None, max_nodes: int = 2048) -> KernelField:
    from .wave import wave_grid
    f = hjn_symbol(j, n, cutoffs)
    if grid is None:
        R_x, R_u = hjn_domain(j, n)
        grid = wave_grid(g, math.sqrt(f.lam_max) / 2, R_x=R_x, R_u=R_u,
                         mu_max=f.lamU_band[1] / (2 * np.pi), max_nodes=max_nodes)
    res = _resolution_guard(grid, f, j)
    K = fiber_kernel(g, f, grid, params, cal)
    K.meta.update({"j": j, "n": n, **res})
    return K


def _resolution_guard(grid: BiradialGrid, f: JointMultiplier, j: int) -> dict:
    h_r = grid.R_x / grid.r.size
    h_u = grid.R_u / grid.rho.size
    wl_r = 2 * np.pi / math.sqrt(f.lam_max)
    wl_u = 1.0 / max(f.lamU_band[1] / (2 * np.pi), 1e-300)
    if h_r > wl_r or h_u > wl_u:
        raise DomainError(f"grid under-resolves the 2^-{j} scale")
    return {"ppw_r": wl_r / h_r, "ppw_u": wl_u / h_u}


def hjn_ratio(g, atom: Atom, j: int, n: int, cutoffs=None, params=None, cal=None,
              max_nodes: int = 2048) -> dict:
    """``||a * H_{j,n}||_1`` against ``min(1, 2^n 2^{j+L})``."""
    from .wave import wave_grid
    f = hjn_symbol(j, n, cutoffs)
    R_x, R_u = hjn_domain(j, n, atom.r)
    grid = wave_grid(g, math.sqrt(f.lam_max) / 2, R_x=R_x, R_u=R_u,
                     mu_max=f.lamU_band[1] / (2 * np.pi), max_nodes=max_nodes)
    img = biradial_convolve(g, f, atom, grid, params, cal)
    val, tail = field_norm(img, 1, with_tail=True)
    bound = min(1.0, 2.0 ** n * 2.0 ** (j + atom.L))
    return {"j": j, "n": n, "jL": j + atom.L, "l1": val, "bound": bound, "ratio": val / bound,
            "edge_share": tail}
