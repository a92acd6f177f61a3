"""Wave propagator: subordination to the Schroedinger group and refined pieces.

The scalar identity behind everything here is

    chi(sqrt x) e^{i tau sqrt x} = chi1(x) sqrt(tau) int e^{i tau / 4s} a(s) e^{i tau s x} ds + rho(x),

applied with ``x = L / tau^2``.  The decomposition of ``|U|`` into shells
``s |U| / tau in k pi + supp eta0`` and into dyadic ``zeta`` bands is carried
out at symbol level; kernels come from :func:`fiber.fiber_kernel`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fiber import FiberParams, JointMultiplier, fiber_kernel, sqrt_symbol
from .grid import KernelField, build_grid, field_norm
from .multipliers import ETA_HALFWIDTH, CutoffSpec

# stationary-phase constant: sqrt(tau) int s^(-3/2) e^{i tau (1/4s + s x)} ds = SP * e^{i tau sqrt x}
SP = 2 * np.sqrt(np.pi) * np.exp(0.25j * np.pi)


def phase_data(tau: float, x):
    """Critical point ``s*``, ``Phi(s*)`` and ``Phi''(s*)`` of ``tau (1/4s + s x)``."""
    x = np.asarray(x, dtype=float)
    s = 1.0 / (2.0 * np.sqrt(x))
    return s, tau * (0.25 / s + s * x), tau / (2.0 * s ** 3)


@dataclass
class SubordinationTerms:
    """Sampled amplitude ``a_tau`` on Gauss nodes of the annulus ``[s0, s1]``."""
    tau: float
    order: int
    s: np.ndarray
    w: np.ndarray
    a: np.ndarray
    chi: Callable
    chi1: Callable
    meta: dict = field(default_factory=dict)

    @property
    def support(self):
        return float(self.s[0]), float(self.s[-1])

    def coefficients(self) -> np.ndarray:
        """``sqrt(tau) w_q e^{i tau / 4 s_q} a(s_q)``: weights of ``e^{i tau s x}``."""
        return np.sqrt(self.tau) * self.w * np.exp(0.25j * self.tau / self.s) * self.a

    def transform(self, x, weight=None) -> np.ndarray:
        """``sqrt(tau) int e^{i tau/4s} a(s) weight(s) e^{i tau s x} ds`` at ``x``."""
        x = np.asarray(x, dtype=float)
        c = self.coefficients()
        if weight is not None:
            c = c * weight
        out = np.empty(x.shape, dtype=complex)
        flat = x.ravel()
        res = out.reshape(-1)
        step = max(1, 4_000_000 // self.s.size)
        for i in range(0, flat.size, step):
            res[i:i + step] = np.exp(1j * self.tau * np.outer(flat[i:i + step], self.s)) @ c
        return out

    def target(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.chi(np.sqrt(x)) * np.exp(1j * self.tau * np.sqrt(x))

    def residual(self, x) -> np.ndarray:
        """``rho_tau(x)``, measured as the defect of the identity."""
        x = np.asarray(x, dtype=float)
        return self.target(x) - self.chi1(x) * self.transform(x)

    def sup_residual(self, x=None) -> float:
        x = np.linspace(0.0, 10.0, 8001) if x is None else x
        return float(np.max(np.abs(self.residual(x))))


def _s_rule(s0, s1, tau, nodes_per_panel=12):
    panels = int(np.ceil((s1 - s0) * max(64.0, 2.5 * tau)))
    x, w = np.polynomial.legendre.leggauss(nodes_per_panel)
    e = np.linspace(s0, s1, panels + 1)
    h = 0.5 * np.diff(e)
    m = 0.5 * (e[1:] + e[:-1])
    return (m[:, None] + h[:, None] * x).ravel(), (h[:, None] * w).ravel()


def subordination_terms(tau: float, chi: Callable, chi1: Callable, order: int = 0,
                        chi_support=(0.5, 2.0), density: float = 1.0) -> SubordinationTerms:
    """Stationary-phase amplitude of the given order.

    Order 0 is ``a(s) = chi(1/2s) s^(-3/2) / SP``, which reproduces the
    identity exactly where ``chi = 1``.  Each further order applies the
    leading-order inverse to the current defect, which removes one more
    power of ``1/tau``, exactly as the next term of the expansion does.
    """
    if abs(tau) < 4:
        raise ValueError("subordination regime needs |tau| >= 4")
    if order < 0:
        raise ValueError("order must be nonnegative")
    lo, hi = chi_support
    s0, s1 = 0.5 / hi, 0.5 / lo
    s, w = _s_rule(s0, s1, abs(tau) * density)
    x = 0.25 / s ** 2
    terms = SubordinationTerms(tau, order, s, w, chi(1.0 / (2 * s)) * s ** -1.5 / SP, chi, chi1)
    for _ in range(order):
        defect = terms.residual(x) * np.exp(-1j * tau * np.sqrt(x))
        terms.a = terms.a + defect * s ** -1.5 / SP
    terms.meta = {"s_nodes": int(s.size), "annulus": (float(s0), float(s1))}
    return terms


def residual_scan(taus, chi, chi1, order: int = 0, x=None):
    return [(float(t), subordination_terms(t, chi, chi1, order).sup_residual(x)) for t in taus]


# --------------------------------------------------------------------------
# refined pieces

@dataclass(frozen=True)
class DecompIndex:
    tau: float
    j: int = 0
    k: int = 0
    n: int = 0

    def __post_init__(self):
        if self.j < 0 or self.k < 0 or self.n < 0:
            raise ValueError("indices j, k, n must be nonnegative")
        if self.tau == 0:
            raise ValueError("tau must be nonzero")

    @property
    def g(self) -> float:
        return 2.0 ** self.j / self.tau


def _window(kind: str, k: int, eta0: Callable) -> Callable:
    """Shell window in ``t = s lam_U / tau``.

    ``k >= 0`` selects ``eta0(t - k pi)``; ``k = -1`` the complement
    ``1 - eta0(t)``, which equals the sum over all shells ``k >= 1`` for
    ``t >= 0`` because ``eta0`` is supported in ``(-pi, pi)``.
    """
    if kind == "W":
        return lambda t: 1.0 - eta0(t)
    return lambda t: eta0(t - k * np.pi)


def _piece_symbol(terms: SubordinationTerms, cutoffs: CutoffSpec, window: Callable, u_cut=None):
    """Joint symbol ``chi1(lam_L/tau^2) sqrt(tau) int e^{i tau/4s} a(s) window e^{i s lam_L/tau} ds``."""
    tau = terms.tau
    c = terms.coefficients()

    def f(lam_L, lam_U):
        lam_L = np.asarray(lam_L, dtype=float)
        lam_U = np.broadcast_to(np.asarray(lam_U, dtype=float), lam_L.shape)
        out = np.zeros(lam_L.shape, dtype=complex)
        live = cutoffs.chi1(lam_L / tau ** 2) != 0
        if u_cut is not None:
            live &= u_cut(lam_U) != 0
        L, U = lam_L[live], lam_U[live]
        if L.size == 0:
            return out
        val = np.empty(L.shape, dtype=complex)
        step = max(1, 2_000_000 // terms.s.size)
        for i in range(0, L.size, step):
            sl = slice(i, i + step)
            win = window(np.multiply.outer(U[sl], terms.s) / tau)
            E = np.exp(1j * np.multiply.outer(L[sl], terms.s) / tau)
            val[sl] = (win * E) @ c
        val *= cutoffs.chi1(L / tau ** 2)
        if u_cut is not None:
            val *= u_cut(U)
        out[live] = val
        return out
    return f


def _shell_band(terms: SubordinationTerms, k_lo: float, k_hi: float):
    """``lam_U`` range where shells ``k_lo..k_hi`` meet ``supp a``."""
    s0, s1 = terms.support
    half = ETA_HALFWIDTH
    lo = max(0.0, k_lo * np.pi - half) * terms.tau / s1
    hi = (k_hi * np.pi + half) * terms.tau / s0
    return lo, hi


def zeta_band(n: int, cutoffs: CutoffSpec, tau: float):
    """``n``-th factor of the ``zeta`` partition in ``lam_U`` and its support."""
    if n == 0:
        return (lambda b: cutoffs.zeta0(b / tau)), (0.0, 2.0 * tau)
    return (lambda b: cutoffs.zeta1(b / (tau * 2.0 ** n))), (2.0 ** (n - 1) * tau, 2.0 ** (n + 1) * tau)


def piece_multiplier(kind: str, terms: SubordinationTerms, cutoffs: CutoffSpec,
                     k: int = 0, n: int = 0) -> JointMultiplier:
    """Joint symbol of one refined piece.

    ``kind``: ``V`` (shell ``k = 0``), ``nk`` (shell ``k >= 1``), ``W`` (all
    shells ``k >= 1``), ``Wn`` (``W`` times the ``n``-th zeta band) or ``E``
    (the residual ``rho_tau(lam_L / tau^2)``).  Every shell piece carries the
    ``chi1(L / tau^2)`` factor.
    """
    tau = terms.tau
    lam_lo, lam_hi = (c * tau ** 2 for c in cutoffs.chi1_support)
    name = f"{kind}:tau={tau:g},k={k},n={n},order={terms.order}"
    if kind == "E":
        return JointMultiplier(lambda a, b: terms.residual(np.asarray(a) / tau ** 2), lam_hi,
                               0.0, name=name)
    if kind in ("V", "n0"):
        window, band, u_cut = _window("V", 0, cutoffs.eta0), _shell_band(terms, 0, 0), None
    elif kind == "nk":
        if k < 1:
            raise ValueError("shell index k must be >= 1")
        window, band, u_cut = _window("nk", k, cutoffs.eta0), _shell_band(terms, k, k), None
    elif kind in ("W", "Wn"):
        window, band, u_cut = _window("W", -1, cutoffs.eta0), _shell_band(terms, 1, np.inf), None
        if kind == "Wn":
            u_cut, zb = zeta_band(n, cutoffs, tau)
            band = (max(band[0], zb[0]), min(band[1], zb[1]))
    else:
        raise ValueError(f"unknown piece kind {kind!r}")
    f = _piece_symbol(terms, cutoffs, window, u_cut)
    return JointMultiplier(f, lam_hi, lam_lo, band, name=name)


def reconstruction_error(terms: SubordinationTerms, cutoffs: CutoffSpec, lam_L, lam_U) -> float:
    """Sup of ``V + W + E - chi(lam/tau) e^{i lam}`` at joint samples."""
    tau = terms.tau
    total = sum(piece_multiplier(kind, terms, cutoffs)(lam_L, lam_U) for kind in ("V", "W", "E"))
    target = terms.chi(np.sqrt(lam_L) / tau) * np.exp(1j * np.sqrt(lam_L))
    return float(np.max(np.abs(total - target)))


def wave_band_symbol(tau: float, j: int = 0, chi: Callable | None = None,
                     support=(0.5, 2.0)) -> JointMultiplier:
    """``chi(2^-j lambda) exp(i 2^-j tau lambda)`` with ``lambda = sqrt(L)``."""
    if tau == 0:
        raise ValueError("tau must be nonzero")
    chi = chi or CutoffSpec().band
    s = 2.0 ** -j
    lo, hi = support
    return sqrt_symbol(lambda x: chi(s * x) * np.exp(1j * s * tau * x), (lo / s, hi / s),
                       name=f"wave:tau={tau},j={j}")


def wave_band_kernel(g, tau: float, j: int, grid, cutoffs: CutoffSpec | None = None,
                     params: FiberParams | None = None, cal=None) -> KernelField:
    cutoffs = cutoffs or CutoffSpec()
    K = fiber_kernel(g, wave_band_symbol(tau, j, cutoffs.band, cutoffs.band_support), grid,
                     params, cal)
    K.meta.update({"tau": tau, "j": j})
    return K


def gaussian_band(sigma: float = 0.1, center: float = 1.0, cut: float = 8.6):
    """Gaussian band ``exp(-(x - center)^2 / 2 sigma^2)`` truncated where it falls below ``e^{-cut^2/2}``.

    Its kernels have Gaussian spatial tails, unlike the ``e^{-1/t}`` bumps.
    """
    band = lambda x: np.exp(-0.5 * ((np.asarray(x, dtype=float) - center) / sigma) ** 2)
    return band, (max(0.0, center - cut * sigma), center + cut * sigma)


def tau_band_kernel(g, tau: float, grid, cutoffs: CutoffSpec | None = None,
                    params: FiberParams | None = None, cal=None, chi: Callable | None = None,
                    support=None) -> KernelField:
    """``K_tau``: kernel of ``chi(sqrt(L) / tau) exp(i sqrt(L))`` (default ``chi`` the dyadic band)."""
    cutoffs = cutoffs or CutoffSpec()
    if chi is None:
        chi, support = cutoffs.band, cutoffs.band_support
    lo, hi = support
    f = sqrt_symbol(lambda x: chi(x / tau) * np.exp(1j * x), (lo * tau, hi * tau),
                    name=f"K_tau:tau={tau}")
    K = fiber_kernel(g, f, grid, params, cal)
    K.meta.update({"tau": tau})
    return K


def dilate_field(K: KernelField, gfac: float, grid, Q: int) -> KernelField:
    """``g^Q K(delta_g(x, u))`` resampled onto ``grid``."""
    from .grid import interpolate
    R, P = np.meshgrid(grid.r * gfac, grid.rho * gfac ** 2, indexing="ij")
    return KernelField(grid, gfac ** Q * interpolate(K, R, P), dict(K.meta))


def refined_pieces(g, idx: DecompIndex, kind: str, grid, cutoffs: CutoffSpec | None = None,
                   order: int = 0, params: FiberParams | None = None, cal=None,
                   terms: SubordinationTerms | None = None) -> KernelField:
    """Kernel of one refined piece at ``idx.tau`` (``j`` is not used here)."""
    cutoffs = cutoffs or CutoffSpec()
    terms = terms or subordination_terms(idx.tau, cutoffs.band, cutoffs.chi1, order,
                                         cutoffs.band_support)
    f = piece_multiplier(kind, terms, cutoffs, idx.k, idx.n)
    K = fiber_kernel(g, f, grid, params, cal)
    K.meta.update({"tau": idx.tau, "k": idx.k, "n": idx.n, "kind": kind})
    return K


# --------------------------------------------------------------------------
# grids sized for the wave scales

def wave_grid(g, tau: float, *, R_x: float = 2.0, R_u: float = 0.8, mu_max: float | None = None,
              max_nodes: int = 512, min_nodes: int = 64, ppw: float = 2.5):
    """Composite Gauss grid resolving frequency ``tau`` in ``r`` and ``mu_max`` in ``rho``."""
    def count(extent, freq):
        n = int(np.ceil(ppw * extent * freq / 16.0)) * 16
        return int(min(max(n, min_nodes), max_nodes))
    nr = count(R_x, 2 * tau / np.pi)
    mu_max = mu_max if mu_max is not None else (2 * tau) ** 2 / (2 * np.pi * g.n)
    nu = count(R_u, 2 * mu_max)
    return build_grid(g, R_x, R_u, nr, nu, r_panels=nr // 16, rho_panels=nu // 16)


def kernel_l1(K: KernelField) -> float:
    return field_norm(K, 1)


def mass_extent(K: KernelField, q: float = 0.9999):
    """Smallest ``(r, rho)`` boxes holding the fraction ``q`` of ``int |K|``."""
    dens = K.grid.weights * np.abs(K.values)
    total = dens.sum()
    if total == 0:
        return K.grid.R_x, K.grid.R_u
    cr = np.cumsum(dens.sum(axis=1)) / total
    cu = np.cumsum(dens.sum(axis=0)) / total
    return float(K.grid.r[np.searchsorted(cr, q)].clip(max=K.grid.R_x)), \
        float(K.grid.rho[min(np.searchsorted(cu, q), cu.size - 1)])


def adaptive_kernel(g, f: JointMultiplier, tau: float, *, R_x: float = 2.0, R_u: float = 0.8,
                    q: float = 0.9999, pad: float = 1.5, params: FiberParams | None = None,
                    cal=None, final_nodes: int = 2048, **grid_kw) -> KernelField:
    """Pilot on ``[0, R_x] x [0, R_u]``, then recompute on the box holding ``q`` of the mass.

    The box is padded by ``pad`` and never exceeds the pilot extents, so the
    final grid spends its nodes where the kernel lives.  ``meta["pilot_tail"]``
    records ``int |K|`` of the pilot outside the final box.
    """
    mu_max = f.lam_max / (2 * np.pi * g.n)
    pilot = fiber_kernel(g, f, wave_grid(g, tau, R_x=R_x, R_u=R_u, mu_max=mu_max, **grid_kw),
                         params, cal)
    er, eu = mass_extent(pilot, q)
    rx, ru = min(R_x, pad * max(er, 1e-3)), min(R_u, pad * max(eu, 1e-5))
    final = fiber_kernel(g, f, wave_grid(g, tau, R_x=rx, R_u=ru, mu_max=mu_max,
                                         max_nodes=final_nodes, **grid_kw), params, cal)
    G = pilot.grid
    outside = (G.r[:, None] > rx) | (G.rho[None, :] > ru)
    final.meta.update({"R_x": rx, "R_u": ru, "pilot_l1": field_norm(pilot, 1),
                       "pilot_tail": float(np.sum(G.weights * np.abs(pilot.values) * outside))})
    return final


# --------------------------------------------------------------------------
# experiments

def tau_domain(tau: float):
    """Extents holding ``K_tau`` including its ``1/tau`` boundary layer."""
    return max(2.0, 1.0 + 24.0 / tau), max(0.8, 0.4 + 12.0 / tau)


def growth_scan(g, family: str, values, *, tau: float = 32.0, cutoffs: CutoffSpec | None = None,
                band=(0.85, 1.15), params: FiberParams | None = None, cal=None,
                max_nodes: int = 512, cache=None):
    """``L^1`` norms of ``K_tau`` / ``n0_tau`` over ``tau`` or of ``n_{tau,k}`` over ``k``.

    Returns an :class:`ExperimentRecord` whose ``extra`` holds per-point
    domain, grid shape and the outer-tenth tail share.  ``cache(key, compute)``
    may supply stored kernels.
    """
    import time
    from .fitting import ExperimentRecord
    cutoffs = cutoffs or CutoffSpec()
    values = list(values)
    t0 = time.perf_counter()
    pts, info = [], []
    if family not in ("K_tau", "n0", "nk"):
        raise ValueError(f"unknown growth family {family!r}")
    cache = cache or (lambda key, compute: compute())
    for v in values:
        def compute(v=v):
            if family == "K_tau":
                R_x, R_u = tau_domain(v)
                gr = wave_grid(g, v, R_x=R_x, R_u=R_u, max_nodes=max_nodes)
                return tau_band_kernel(g, v, gr, cutoffs, params, cal)
            t = v if family == "n0" else tau
            terms = subordination_terms(t, cutoffs.band, cutoffs.chi1, 0, cutoffs.band_support)
            f = piece_multiplier("V" if family == "n0" else "nk", terms, cutoffs, k=int(v))
            R_x, R_u = tau_domain(t)
            return adaptive_kernel(g, f, t, R_x=R_x, R_u=R_u, params=params, cal=cal)
        K = cache({"kind": family, "group": g.name, "param": v, "tau": tau,
                   "max_nodes": max_nodes}, compute)
        l1, tail = field_norm(K, 1, with_tail=True)
        pts.append((v, l1))
        info.append({"param": v, "R_x": K.grid.R_x, "R_u": K.grid.R_u,
                     "shape": list(K.grid.shape), "tail_share": tail})
    return ExperimentRecord.from_fit("growth", family, pts, band,
                                     wall=time.perf_counter() - t0, extra={"points": info})


def w_decay_scan(g, tau: float = 16.0, ns=range(1, 7), *, cutoffs: CutoffSpec | None = None,
                 band=(-np.inf, -0.2), params: FiberParams | None = None, cal=None):
    """``||W_{tau,n}||_1`` over ``n`` with a semi-log fit in base 2."""
    import time
    from .fitting import ExperimentRecord
    cutoffs = cutoffs or CutoffSpec()
    t0 = time.perf_counter()
    terms = subordination_terms(tau, cutoffs.band, cutoffs.chi1, 0, cutoffs.band_support)
    R_x, R_u = tau_domain(tau)
    pts = []
    for n in ns:
        K = adaptive_kernel(g, piece_multiplier("Wn", terms, cutoffs, n=n), tau,
                            R_x=R_x, R_u=R_u, params=params, cal=cal)
        pts.append((n, field_norm(K, 1)))
    return ExperimentRecord.from_fit("decay", f"W_n:tau={tau:g}", pts, band, semilog=True,
                                     wall=time.perf_counter() - t0)


def w_assembly_error(g, tau: float, grid, n_max: int | None = None, cutoffs=None,
                     params=None, cal=None) -> float:
    """Relative ``L^1`` distance between ``sum_n W_{tau,n}`` and ``W_tau`` on ``grid``."""
    cutoffs = cutoffs or CutoffSpec()
    terms = subordination_terms(tau, cutoffs.band, cutoffs.chi1, 0, cutoffs.band_support)
    W = fiber_kernel(g, piece_multiplier("W", terms, cutoffs), grid, params, cal)
    # lam_U <= lam_L <= chi1_hi tau^2 bounds the zeta bands that can be live
    n_max = n_max if n_max is not None else int(np.ceil(np.log2(cutoffs.chi1_support[1] * tau))) + 1
    S = W.scaled(0)
    for n in range(n_max + 1):
        S = S + fiber_kernel(g, piece_multiplier("Wn", terms, cutoffs, n=n), grid, params, cal)
    return field_norm(S - W, 1) / field_norm(W, 1)


def _weight(region: str, lam: float, R, P):
    if region == "finite-speed":
        return np.hypot(lam * R, lam ** 2 * P), lambda w, R, P: w >= 10.0
    if region == "K0-far":
        return R ** 2 + P, lambda w, R, P: w >= 2.0
    if region == "K0-central":
        return 1.0 + P, lambda w, R, P: R ** 2 <= 1.0 / 20.0
    raise ValueError(f"unknown decay region {region!r}")


def decay_products(K: KernelField, lam: float, region: str, Ns=(2, 4, 6)) -> dict:
    """``sup |K| w^N`` over the region, overall and on its outer quarter in ``w``."""
    G = K.grid
    R, P = np.meshgrid(G.r, G.rho, indexing="ij")
    w, sel = _weight(region, lam, R, P)
    mask = sel(w, R, P)
    if not mask.any():
        raise ValueError("grid does not reach the decay region")
    a, ww = np.abs(K.values[mask]), w[mask]
    cut = ww.min() + 0.75 * (ww.max() - ww.min())
    out = {}
    for N in Ns:
        prod = a * ww ** N
        inner = prod[ww < cut]
        out[N] = {"sup": float(prod.max()), "outer": float(prod[ww >= cut].max()),
                  "inner": float(inner.max()) if inner.size else 0.0}
    return out


def pointwise_decay_scan(K: KernelField, lam: float, region: str, Ns=(2, 4, 6), *,
                         extended: KernelField | None = None, slack: float = 1.05,
                         required: int | None = None):
    """Largest ``N`` whose product ``|K| w^N`` stays bounded on the region.

    With ``extended`` (the same kernel on a larger domain) bounded means the
    sup does not grow under the extension; otherwise that the outer quarter
    of the region does not exceed the rest.
    """
    from .fitting import ExperimentRecord
    base = decay_products(K, lam, region, Ns)
    ext = decay_products(extended, lam, region, Ns) if extended is not None else None
    bounded = {}
    for N in Ns:
        if ext is not None:
            bounded[N] = ext[N]["sup"] <= slack * base[N]["sup"]
        else:
            bounded[N] = base[N]["outer"] <= slack * base[N]["inner"]
    ok = [N for N in Ns if bounded[N]]
    best = max(ok) if ok else 0
    need = required if required is not None else max(Ns)
    pts = [(N, base[N]["sup"]) for N in Ns]
    return ExperimentRecord("decay", f"pointwise:{region}", pts, passed=bool(bounded.get(need, False)),
                            extra={"largest_bounded_N": best, "bounded": {str(k): v for k, v in bounded.items()},
                                   "base": {str(k): v for k, v in base.items()},
                                   "extended": {str(k): v for k, v in ext.items()} if ext else None,
                                   "lambda": lam, "required_N": need})
