"""Kernels of joint multipliers ``f(L, |U|)`` on H-type groups.

Route A sums the Laguerre expansion on each central fiber ``mu`` and then
integrates over ``mu`` with the spherical Fourier kernel of ``R^{d2}``:

    Phi^mu(r) = c_N |mu|^n sum_k f(c_E |mu| (2k + n), c_U |mu|) l_k(c_Z |mu| r^2),
    K(r, rho) = int_0^inf Phi^m(r) m^(d2-1) Omega_{d2}(2 pi m rho) dm,

with ``l_k(z) = L_k^(n-1)(z) e^{-z/2}`` and ``n = d1/2``.  Route B evaluates
the closed-form Schroedinger kernel directly.  The constants of route A are
fitted against route B by :func:`calibrate_constants`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import least_squares
from scipy.special import jv

from .grid import BiradialGrid, KernelField, build_grid, composite_gauss, sphere_area

# Magnitude guard for the upward Laguerre recurrence.
_BIG = 1e250
_LOG_BIG = np.log(_BIG)
_CHUNK = 512
# exp(-_DECAY) is treated as zero when truncating decaying symbols.
_DECAY = 36.0

SEEDS = {"c_E": 2 * np.pi, "c_Z": np.pi, "c_U": 2 * np.pi, "c_N": 1.0}


class ConvergenceError(RuntimeError):
    """A truncation or regularization parameter failed its convergence check."""


class CalibrationError(RuntimeError):
    """Route A could not be matched to the closed form within tolerance."""


# --------------------------------------------------------------------------
# symbols

@dataclass(frozen=True)
class JointMultiplier:
    """Joint symbol ``f(lam_L, lam_U)`` with support hints.

    ``lam_max`` bounds the ``L``-eigenvalues that contribute (exact for
    compactly supported symbols, a decay cut for the others).
    """
    func: Callable
    lam_max: float
    lam_min: float = 0.0
    lamU_band: tuple = (0.0, np.inf)
    name: str = "joint"
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, lam_L, lam_U):
        lam_L, lam_U = np.broadcast_arrays(np.asarray(lam_L, float), np.asarray(lam_U, float))
        return np.asarray(self.func(lam_L, lam_U), dtype=complex) * np.ones(lam_L.shape)

    def __mul__(self, other: "JointMultiplier") -> "JointMultiplier":
        lo = (max(self.lamU_band[0], other.lamU_band[0]), min(self.lamU_band[1], other.lamU_band[1]))
        return JointMultiplier(lambda a, b: self.func(a, b) * other.func(a, b),
                               min(self.lam_max, other.lam_max), max(self.lam_min, other.lam_min),
                               lo, f"{self.name}*{other.name}")

    def scaled(self, c) -> "JointMultiplier":
        return JointMultiplier(lambda a, b: c * self.func(a, b), self.lam_max, self.lam_min,
                               self.lamU_band, self.name, dict(self.meta))


def heat_symbol(t: float) -> JointMultiplier:
    if not t > 0:
        raise ValueError("heat time must be positive")
    return JointMultiplier(lambda a, b: np.exp(-t * a), _DECAY / t, name=f"heat:t={t}")


def schrodinger_symbol(t: float, eps: float) -> JointMultiplier:
    """``exp(i (t + i eps) lam_L)``: the Schroedinger group at complex time."""
    if not eps > 0:
        raise ValueError("complex-time regularization needs eps > 0")
    return JointMultiplier(lambda a, b: np.exp((1j * t - eps) * a), _DECAY / eps,
                           name=f"schrodinger:t={t},eps={eps}")


def sqrt_symbol(m: Callable, support: tuple, name: str = "m") -> JointMultiplier:
    """Lift ``m(lambda)`` with ``lambda = sqrt(L)`` supported in ``support``."""
    lo, hi = support
    return JointMultiplier(lambda a, b: m(np.sqrt(a)), hi * hi, lo * lo, name=name)


# --------------------------------------------------------------------------
# parameters and calibration record

@dataclass(frozen=True)
class FiberParams:
    """Quadrature and truncation controls for route A.

    ``d_mu`` is the midpoint spacing in ``|mu|`` (default ``1/(3 R_u)`` so the
    alias period is three times the grid extent); ``mu_max`` and ``k_max``
    default to what the symbol's ``lam_max`` implies.
    """
    d_mu: float | None = None
    mu_max: float | None = None
    k_max: int | None = None
    eps: float = 0.0
    mu_rule: str = "auto"
    panel_width: float | None = None
    n_gauss: int = 16

    def doubled(self) -> "FiberParams":
        return replace(self, d_mu=None if self.d_mu is None else self.d_mu / 2)


@dataclass
class CalibrationReport:
    c_E: float
    c_Z: float
    c_U: float
    c_N: float
    phase: float = 0.0
    fit_error: float = np.nan
    match_error: float = np.nan
    errors: dict = field(default_factory=dict)
    perturbed_error: float = np.nan
    eps: float = np.nan
    calibrated: bool = False

    @property
    def kappa(self) -> complex:
        """Fitted factor relating the closed form to the calculus kernel."""
        return self.c_N * np.exp(1j * self.phase)

    def as_dict(self) -> dict:
        return {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                for k, v in self.__dict__.items()}


SEED_REPORT = CalibrationReport(**SEEDS)
_CALIBRATIONS: dict = {}


def group_key(g) -> str:
    return g.name + ":" + np.stack(g.J).tobytes().hex()[:32]


def calibration_for(g) -> CalibrationReport:
    """Calibrated constants for ``g``, computed once per process."""
    key = group_key(g)
    if key not in _CALIBRATIONS:
        _CALIBRATIONS[key] = calibrate_constants(g)
    return _CALIBRATIONS[key]


def set_calibration(g, report: CalibrationReport) -> None:
    _CALIBRATIONS[group_key(g)] = report


# --------------------------------------------------------------------------
# route A

def _laguerre_block(mu, r2, f: JointMultiplier, K, n, cal, abel):
    """``c_N |mu|^n sum_k f(lam_k) l_k(z)`` for one block of fibers."""
    z = cal.c_Z * mu[:, None] * r2[None, :]
    alpha = n - 1
    prev = np.zeros_like(z)
    cur = np.ones_like(z)
    s = -0.5 * z
    E = np.exp(s)
    acc = np.zeros(z.shape, dtype=complex)
    lamU = cal.c_U * mu
    lo, hi = f.lam_min, f.lam_max
    kmax = int(K.max())
    for k0 in range(0, kmax + 1, _CHUNK):
        ks = np.arange(k0, min(k0 + _CHUNK, kmax + 1))
        lam = cal.c_E * mu[:, None] * (2 * ks[None, :] + n)
        live = (ks[None, :] <= K[:, None]) & (lam >= lo) & (lam <= hi)
        fv = np.where(live, f(lam, np.broadcast_to(lamU[:, None], lam.shape)), 0.0)
        fv *= abel[:, None]
        for i, k in enumerate(ks):
            col = fv[:, i]
            if col.any():
                acc += col[:, None] * (cur * E)
            nxt = ((2 * k + 1 + alpha - z) * cur - (k + alpha) * prev) / (k + 1)
            prev, cur = cur, nxt
            big = np.abs(cur) > _BIG
            if big.any():
                cur[big] /= _BIG
                prev[big] /= _BIG
                s[big] += _LOG_BIG
                E[big] = np.exp(s[big])
    return cal.c_N * mu[:, None] ** n * acc


def fiber_profiles(g, f: JointMultiplier, mu, r, cal: CalibrationReport, k_max=None, eps=0.0):
    """``Phi^mu(r)`` on the product of fiber nodes ``mu`` and radii ``r``."""
    mu = np.asarray(mu, dtype=float)
    r2 = np.asarray(r, dtype=float) ** 2
    n = g.n
    out = np.zeros((mu.size, r2.size), dtype=complex)
    K = np.floor((f.lam_max / (cal.c_E * mu) - n) / 2).astype(np.int64)
    if k_max is not None:
        if (K > k_max).any():
            raise ConvergenceError(f"k_max={k_max} truncates active eigenvalues "
                                   f"(needs {int(K.max())})")
    lamU = cal.c_U * mu
    K[(lamU < f.lamU_band[0]) | (lamU > f.lamU_band[1])] = -1
    abel = np.exp(-eps * mu)
    order = np.argsort(-K, kind="stable")
    i = 0
    while i < order.size and K[order[i]] >= 0:
        top = K[order[i]]
        j = i
        while j < order.size and j - i < 256 and K[order[j]] >= 0 and K[order[j]] * 1.3 >= top:
            j += 1
        idx = order[i:j]
        out[idx] = _laguerre_block(mu[idx], r2, f, K[idx], n, cal, abel[idx])
        i = j
    return out


def spherical_kernel(m, rho, d2: int) -> np.ndarray:
    """``int_{S^{d2-1}} exp(2 pi i m rho w_1) dw`` on the product ``m x rho``."""
    a = 2 * np.pi * np.outer(m, rho)
    if d2 == 1:
        return 2 * np.cos(a)
    if d2 == 2:
        return 2 * np.pi * jv(0, a)
    if d2 == 3:
        return 4 * np.pi * np.sinc(a / np.pi)
    nu = d2 / 2 - 1
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (2 * np.pi) ** (d2 / 2) * a ** (-nu) * jv(nu, a)
    return np.where(a == 0, sphere_area(d2), out)


def radial_transform(values, m, w, rho, d2: int) -> np.ndarray:
    """Apply the radial ``mu``-integral to profiles ``values[m, r]``."""
    V = np.ascontiguousarray(values.T)
    Vr, Vi = np.ascontiguousarray(V.real), np.ascontiguousarray(V.imag)
    out = np.empty((V.shape[0], rho.size), dtype=complex)
    wm = (w * m ** (d2 - 1))[:, None]
    step = max(1, 2 ** 25 // max(m.size, 1))
    for i in range(0, rho.size, step):
        S = spherical_kernel(m, rho[i:i + step], d2) * wm
        out[:, i:i + step] = Vr @ S + 1j * (Vi @ S)
    return out


def mu_nodes(g, f: JointMultiplier, grid: BiradialGrid, params: FiberParams, cal):
    mu_max = params.mu_max or f.lam_max / (cal.c_E * g.n)
    mu_max = min(mu_max, f.lamU_band[1] / cal.c_U)
    mu_min = max(0.0, f.lamU_band[0] / cal.c_U)
    rule = params.mu_rule
    if rule == "auto":
        rule = "midpoint" if g.d2 == 1 else "gauss"
    if rule == "midpoint":
        # nodes anchored at 0 so the rule is the same on every band
        d = params.d_mu or 1.0 / (3 * grid.R_u)
        i0 = int(np.floor(mu_min / d))
        m = (np.arange(i0, int(np.ceil(mu_max / d))) + 0.5) * d
        return m, np.full(m.size, d), rule
    if rule == "gauss":
        pw = params.panel_width or min(params.d_mu * params.n_gauss / 2 if params.d_mu else np.inf,
                                       0.5 / grid.R_u)
        panels = max(1, int(np.ceil((mu_max - mu_min) / pw)))
        m, w = composite_gauss(mu_min, mu_max, panels * params.n_gauss, panels)
        return m, w, rule
    raise ValueError(f"unknown mu rule {rule!r}")


def fiber_kernel(g, f: JointMultiplier, grid: BiradialGrid, params: FiberParams | None = None,
                 cal: CalibrationReport | None = None) -> KernelField:
    """Route A kernel of the joint multiplier ``f`` sampled on ``grid``."""
    params = params or FiberParams()
    cal = cal or calibration_for(g)
    m, w, rule = mu_nodes(g, f, grid, params, cal)
    prof = fiber_profiles(g, f, m, grid.r, cal, params.k_max, params.eps)
    vals = radial_transform(prof, m, w, grid.rho, g.d2)
    meta = {"route": "fiber", "multiplier": f.name, "mu_rule": rule, "n_mu": int(m.size),
            "mu_max": float(m[-1]) if m.size else 0.0, **f.meta}
    return KernelField(grid, vals, meta)


def convergence_check(g, f: JointMultiplier, grid: BiradialGrid, params: FiberParams | None = None,
                      tol: float = 1e-6, cal=None):
    """Relative sup change when the fiber spacing is halved."""
    params = params or FiberParams()
    cal = cal or calibration_for(g)
    a = fiber_kernel(g, f, grid, params, cal)
    d = params.d_mu or 1.0 / (3 * grid.R_u)
    b = fiber_kernel(g, f, grid, replace(params, d_mu=d / 2), cal)
    err = float(np.max(np.abs(a.values - b.values)) / max(b.sup(), 1e-300))
    a.meta["converged"] = err <= tol
    a.meta["doubling_error"] = err
    return a, err


# --------------------------------------------------------------------------
# route B

def _shell_nodes(t: float, eps: float, n: int, R_u: float, n_gauss: int = 16):
    """Gauss panels on ``|mu|`` split at the shells ``2 t |mu| in Z``."""
    mu_max = _DECAY / (2 * np.pi * eps * n) + 1.0
    shell = 1.0 / (2 * abs(t))
    width = min(0.5 / max(R_u, 1.0), shell, 0.5 * eps / (2 * t * t))
    edges = [0.0]
    k = 1
    while edges[-1] < mu_max:
        stop = min(k * shell, mu_max)
        pieces = max(1, int(np.ceil((stop - edges[-1]) / width)))
        edges.extend(np.linspace(edges[-1], stop, pieces + 1)[1:])
        k += 1
    edges = np.asarray(edges)
    x, w = np.polynomial.legendre.leggauss(n_gauss)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def _mehler_profiles(m, r, n: int, w: complex):
    """Fiber profiles of ``exp(-w L)`` for complex ``w`` with ``Re w > 0``."""
    a = 2 * np.pi * w * m
    pref = (m / (2 * np.sinh(a))) ** n
    return pref[:, None] * np.exp(-0.5 * np.pi * (m / np.tanh(a))[:, None] * np.asarray(r)[None, :] ** 2)


def schrodinger_closed_form(g, t: float, grid: BiradialGrid, eps: float = 0.05,
                            check_eps: bool = False) -> KernelField:
    """Closed-form Schroedinger kernel at complex time ``t + i eps``.

    The integrand ``(|mu| / (2 sin(2 pi t |mu|)))^n exp(-i |x|^2 (pi/2) |mu| cot(2 pi t |mu|))``
    is evaluated with ``t -> t + i eps``, which moves the shell singularities
    off the real axis.  With ``check_eps`` the kernel at ``eps / 2`` is also
    computed and the relative sup change stored as ``eps_change``.
    """
    if t == 0:
        raise ValueError("t must be nonzero")
    if not eps > 0:
        raise ValueError("eps must be positive")

    def evaluate(e):
        m, w = _shell_nodes(t, e, g.n, grid.R_u)
        tc = t + 1j * e
        a = 2 * np.pi * tc * m
        pref = (m / (2 * np.sin(a))) ** g.n
        prof = pref[:, None] * np.exp(-0.5j * np.pi * (m / np.tan(a))[:, None] * grid.r[None, :] ** 2)
        return radial_transform(prof, m, w, grid.rho, g.d2)

    vals = evaluate(eps)
    meta = {"route": "closed-form", "t": t, "eps": eps}
    if check_eps:
        half = evaluate(eps / 2)
        meta["eps_change"] = float(np.max(np.abs(half - vals)) / np.max(np.abs(half)))
    return KernelField(grid, vals, meta)


def heat_closed_form(g, t: float, grid: BiradialGrid) -> KernelField:
    """Heat kernel of ``exp(-t L)`` from the Mehler fiber profiles."""
    if not t > 0:
        raise ValueError("heat time must be positive")
    mu_max = _DECAY / (2 * np.pi * t * g.n) + 1.0
    panels = max(1, int(np.ceil(mu_max * 2 * max(grid.R_u, 1.0))))
    m, w = composite_gauss(0.0, mu_max, 16 * panels, panels)
    prof = _mehler_profiles(m, grid.r, g.n, t)
    return KernelField(grid, radial_transform(prof, m, w, grid.rho, g.d2).real,
                       {"route": "closed-form", "heat_t": t})


# --------------------------------------------------------------------------
# calibration

def _rel_sup(a, b) -> float:
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


def calibrate_constants(g, grid: BiradialGrid | None = None, fit_ts=(0.05, 0.1), val_t=0.2,
                        eps: float = 0.05, tol: float = 1e-4, fit_grid: BiradialGrid | None = None,
                        params: FiberParams | None = None) -> CalibrationReport:
    """Fit ``(c_E, c_Z)`` and the complex factor ``kappa`` of route A to route B.

    ``c_U`` is fixed by the Fourier convention ``exp(2 pi i u . mu)``.  The fit
    uses ``fit_ts``; the report's ``match_error`` is the relative sup error at
    the held-out ``val_t`` on ``grid`` (default ``[0, 4]^2``).
    """
    grid = grid or build_grid(g, 4.0, 4.0, 41, 41, rho_rule="uniform")
    fit_grid = fit_grid or build_grid(g, 4.0, 4.0, 13, 13, rho_rule="uniform")
    params = params or FiberParams(d_mu=1.0 / 12)
    targets = [schrodinger_closed_form(g, t, fit_grid, eps).values.ravel() for t in fit_ts]
    scales = [np.max(np.abs(b)) for b in targets]

    def route_a(cE, cZ, t, gr):
        cal = CalibrationReport(cE, cZ, SEEDS["c_U"], 1.0)
        return fiber_kernel(g, schrodinger_symbol(t, eps), gr, params, cal).values.ravel()

    def kappa_of(A, B):
        num = sum(np.vdot(a, b) for a, b in zip(A, B))
        den = sum(np.vdot(a, a).real for a in A)
        return num / den

    def residual(p):
        A = [route_a(p[0], p[1], t, fit_grid) / s for t, s in zip(fit_ts, scales)]
        B = [b / s for b, s in zip(targets, scales)]
        k = kappa_of(A, B)
        r = np.concatenate([k * a - b for a, b in zip(A, B)])
        return np.concatenate([r.real, r.imag])

    x0 = np.array([SEEDS["c_E"], SEEDS["c_Z"]])
    sol = least_squares(residual, x0, x_scale=x0, diff_step=1e-7, xtol=1e-14, ftol=1e-14, gtol=1e-14)
    cE, cZ = sol.x
    A = [route_a(cE, cZ, t, fit_grid) / s for t, s in zip(fit_ts, scales)]
    kappa = kappa_of(A, [b / s for b, s in zip(targets, scales)])

    cal = CalibrationReport(float(cE), float(cZ), SEEDS["c_U"], float(abs(kappa)),
                            float(np.angle(kappa)), eps=eps)
    errors = {}
    for t in (*fit_ts, val_t):
        B = schrodinger_closed_form(g, t, grid, eps).values
        Ak = fiber_kernel(g, schrodinger_symbol(t, eps), grid, params, cal).values * kappa
        errors[t] = _rel_sup(Ak, B)
    cal.errors = errors
    cal.fit_error = max(errors[t] for t in fit_ts)
    cal.match_error = errors[val_t]
    # sensitivity: the held-out error must react to a 1% change in c_E
    B = schrodinger_closed_form(g, val_t, grid, eps).values
    bad = CalibrationReport(1.01 * cal.c_E, cal.c_Z, cal.c_U, 1.0)
    cal.perturbed_error = _rel_sup(
        fiber_kernel(g, schrodinger_symbol(val_t, eps), grid, params, bad).values * kappa, B)
    if cal.match_error > tol:
        raise CalibrationError(f"held-out match error {cal.match_error:.2e} exceeds {tol:.0e}")
    cal.calibrated = True
    return cal


# --------------------------------------------------------------------------
# wave synthesis

def synthesize_via_wave(g, piece_symbol: Callable, j: int, chi: Callable, grid: BiradialGrid,
                        n_tau: int = 256, tau_max: float = 64.0, tol: float = 1e-4,
                        params: FiberParams | None = None, cal=None, return_nodes: bool = False):
    """Kernel of ``m_j(sqrt L)`` via Fourier synthesis over wave-band kernels.

    ``piece_symbol`` is the rescaled piece ``lambda -> m_j(2^j lambda)``,
    supported in ``[1/2, 2]``.  Its Fourier transform on a ``tau`` grid gives

        m_j(sqrt L) = sum_tau w_tau mhat(tau) chi(2^-j sqrt L) exp(i 2^-j tau sqrt L),

    and each term is computed as a separate fiber kernel.  Nodes whose
    coefficients fall below ``tol`` of the largest are skipped; the dropped
    mass is reported in ``meta["tau_tail"]``.
    """
    cal = cal or calibration_for(g)
    taus = np.linspace(-tau_max, tau_max, n_tau, endpoint=False)
    dtau = taus[1] - taus[0]
    lam = np.linspace(0.25, 2.5, 2049)
    # mhat(tau) = (1 / 2 pi) int m(lambda) exp(-i tau lambda) d lambda
    samp = piece_symbol(lam)
    wl = np.full(lam.size, lam[1] - lam[0])
    wl[[0, -1]] /= 2
    coef = (np.exp(-1j * np.outer(taus, lam)) @ (samp * wl)) * dtau / (2 * np.pi)
    keep = np.abs(coef) >= tol * np.abs(coef).max() if np.any(coef) else np.zeros(taus.size, bool)
    tail = float(np.sum(np.abs(coef[~keep])))
    # compare the synthesized symbol with the original on the support
    synth = coef[keep] @ np.exp(1j * np.outer(taus[keep], lam))
    sym_err = float(np.max(np.abs(synth - samp) * (chi(lam) > 0))) if np.any(keep) else 0.0
    s = 2.0 ** -j
    values = np.zeros(grid.shape, dtype=complex)
    for tau, c in zip(taus[keep], coef[keep]):
        band = sqrt_symbol(lambda x, tau=tau: chi(s * x) * np.exp(1j * s * tau * x),
                           (0.25 / s, 2.5 / s), name=f"band:tau={tau:.4g}")
        values += c * fiber_kernel(g, band, grid, params, cal).values
    meta = {"route": "wave-synthesis", "j": j, "tau_nodes": int(keep.sum()),
            "tau_tail": tail, "symbol_error": sym_err}
    out = KernelField(grid, values, meta)
    return (out, taus[keep], coef[keep]) if return_nodes else out
