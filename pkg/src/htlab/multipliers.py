"""Scalar spectral symbols: cutoffs, oscillating multipliers and their norms.

All bump functions are built from the exponential ``exp(-1/t)`` that also
gives the mother bump ``b(t) = exp(-1/(1 - t^2))``.  Partitions of unity are
obtained by telescoping or periodization, so the identities hold to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import fft as sfft


def _h(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def mother_bump(t):
    """``exp(-1/(1 - t^2))`` on ``(-1, 1)``, zero outside."""
    t = np.asarray(t, dtype=float)
    return _h(1.0 - t * t)


def smooth_step(t):
    """C-infinity step: 0 for ``t <= 0``, 1 for ``t >= 1``."""
    a = _h(t)
    b = _h(1.0 - np.asarray(t, dtype=float))
    return a / (a + b)


def psi(lam):
    """1 on ``[0, 1]``, 0 on ``[2, inf)``; smooth in ``log2(lam)``."""
    lam = np.abs(np.asarray(lam, dtype=float))
    with np.errstate(divide="ignore"):
        ell = np.where(lam > 0, np.log2(np.where(lam > 0, lam, 1.0)), -np.inf)
    return 1.0 - smooth_step(ell)


def chi_osc(lam):
    """0 for ``lam <= 1``, 1 for ``lam >= 2``."""
    return smooth_step(np.asarray(lam, dtype=float) - 1.0)


def phi_dyadic(lam):
    """Dyadic bump supported in ``[1/2, 2]``; ``sum_j phi(2^-j lam) = 1``."""
    lam = np.asarray(lam, dtype=float)
    return psi(lam) - psi(2.0 * lam)


def plateau(lo: float, hi: float):
    """Bump equal to 1 on ``[lo, hi]`` and supported in ``[lo/2, 2 hi]``."""
    def f(lam):
        lam = np.asarray(lam, dtype=float)
        return psi(lam / hi) * (1.0 - psi(2.0 * lam / lo))
    return f


ETA_HALFWIDTH = 0.75 * np.pi


def _eta_raw(t):
    return mother_bump(np.asarray(t, dtype=float) / ETA_HALFWIDTH)


def eta0(t):
    """Periodization partition: ``sum_k eta0(t - k pi) = 1``."""
    t = np.asarray(t, dtype=float)
    k0 = np.round(t / np.pi)
    den = sum(_eta_raw(t - (k0 + s) * np.pi) for s in (-1, 0, 1))
    return _eta_raw(t) / den


def zeta0(t):
    return psi(np.abs(np.asarray(t, dtype=float)))


def zeta1(t):
    """Supported in ``+-(1/2, 2)``; ``zeta0 + sum_{n>=1} zeta1(2^-n t) = 1``."""
    t = np.abs(np.asarray(t, dtype=float))
    return psi(t) - psi(2.0 * t)


@dataclass(frozen=True)
class CutoffSpec:
    """Named cutoffs used throughout.

    ``band`` is the dyadic bump, ``band_wide`` equals 1 on the support of
    ``band``; ``chi1`` (variable ``x = lam_L / tau^2``) equals 1 on the
    support of ``band(sqrt(x))`` and ``chi1p`` equals 1 on the support of
    ``chi1``.  ``zeta0p``/``zeta1p`` play the same role for the ``zeta`` pair.
    """
    chi: Callable = chi_osc
    phi: Callable = phi_dyadic
    band: Callable = phi_dyadic
    band_wide: Callable = field(default_factory=lambda: plateau(0.5, 2.0))
    chi1: Callable = field(default_factory=lambda: plateau(0.25, 4.0))
    chi1p: Callable = field(default_factory=lambda: plateau(0.125, 8.0))
    eta0: Callable = eta0
    zeta0: Callable = zeta0
    zeta1: Callable = zeta1
    zeta0p: Callable = field(default_factory=lambda: (lambda t: psi(np.abs(t) / 2.0)))
    zeta1p: Callable = field(default_factory=lambda: plateau(0.5, 2.0))
    band_support: tuple = (0.5, 2.0)
    chi1_support: tuple = (0.125, 8.0)


def make_partition(kind: str = "default") -> CutoffSpec:
    if kind != "default":
        raise ValueError(f"unknown cutoff family {kind!r}")
    return CutoffSpec()


# --------------------------------------------------------------------------
# symbols

@dataclass
class MultiplierFn:
    """A scalar symbol ``m(lam)`` on ``lam >= 0`` with optional metadata."""
    func: Callable
    theta: float | None = None
    beta: float | None = None
    name: str = "m"
    support: tuple = (0.0, np.inf)

    def __call__(self, lam):
        return np.asarray(self.func(np.asarray(lam, dtype=float)), dtype=complex)

    def sample(self, lam_max: float, density: int = 64):
        lam = np.arange(0.0, lam_max, 1.0 / density)
        return lam, self(lam)


def osc_multiplier(theta: float, beta: float, cutoffs: CutoffSpec | None = None) -> MultiplierFn:
    """``exp(i lam^theta) lam^(-theta beta / 2) chi(lam)``."""
    if theta < 0 or beta < 0:
        raise ValueError("theta and beta must be nonnegative")
    chi = (cutoffs or CutoffSpec()).chi

    def m(lam):
        lam = np.asarray(lam, dtype=float)
        c = chi(lam)
        safe = np.where(lam > 0, lam, 1.0)
        return np.where(c > 0, np.exp(1j * safe ** theta) * safe ** (-theta * beta / 2) * c, 0.0)

    return MultiplierFn(m, theta=theta, beta=beta, name=f"osc:theta={theta:g},beta={beta:g}",
                        support=(1.0, np.inf))


def gaussian_multiplier() -> MultiplierFn:
    return MultiplierFn(lambda lam: np.exp(-np.asarray(lam) ** 2), name="mh:gaussian")


def parse_multiplier(spec: str) -> MultiplierFn:
    """Parse presets like ``osc:theta=2,beta=3`` or ``mh:gaussian``."""
    kind, _, rest = spec.partition(":")
    if kind == "osc":
        params = dict(item.split("=") for item in rest.split(",") if item)
        return osc_multiplier(float(params["theta"]), float(params["beta"]))
    if kind == "mh" and rest == "gaussian":
        return gaussian_multiplier()
    raise ValueError(f"unknown multiplier spec {spec!r}")


# --------------------------------------------------------------------------
# Sobolev norms

class AliasingError(RuntimeError):
    pass


def sobolev_norm(samples, h: float, s: float, guard: float = 1e-8) -> float:
    """``L^2_s`` norm of a compactly supported symbol sampled with step ``h``.

    Uses the weight ``(1 + xi^2)^(s/2)`` on the discrete Fourier transform,
    normalised so that ``s = 0`` returns the ``L^2`` norm.
    """
    f = np.asarray(samples, dtype=complex)
    if s < 0:
        raise ValueError("s must be nonnegative")
    scale = np.max(np.abs(f)) if f.size else 0.0
    if scale == 0.0:
        return 0.0
    edge = max(1, f.size // 64)
    if max(np.max(np.abs(f[:edge])), np.max(np.abs(f[-edge:]))) > guard * scale:
        raise AliasingError("symbol does not vanish at the sampling window edges")
    n = sfft.next_fast_len(f.size)
    F = sfft.fft(f, n=n)
    xi = 2 * np.pi * sfft.fftfreq(n, d=h)
    w = (1.0 + xi * xi) ** s
    return float(np.sqrt(h / n * np.sum(w * np.abs(F) ** 2)))


def _max_freq(theta, t, hi):
    theta = 1.0 if theta is None else theta
    return theta * max(t * hi, 1.0) ** theta / hi + 20.0


def _sample_window(lo: float, hi: float, max_freq: float, density: int = 64,
                   pts_per_wave: float = 6.0):
    dens = max(density, pts_per_wave * max_freq / (2 * np.pi))
    pad = 0.05 * (hi - lo)
    n = int(np.ceil((hi - lo + 2 * pad) * dens)) + 1
    lam = np.linspace(lo - pad, hi + pad, n)
    return lam, lam[1] - lam[0]


def localized_norms(m: Callable, t: float, s: float, theta: float | None = None,
                    cutoff: Callable = phi_dyadic, support=(0.5, 2.0)):
    """``(||m(t.) chi||_inf, ||m(t.) chi||_{L^2_s})`` for the localizing cutoff."""
    lo, hi = support
    lam, h = _sample_window(lo, hi, _max_freq(theta, t, hi))
    vals = np.asarray(m(t * np.clip(lam, 0, None)), dtype=complex) * cutoff(lam)
    return float(np.max(np.abs(vals))), sobolev_norm(vals, h, s)


@dataclass
class DyadicPiece:
    j: int
    m_j: Callable
    m_upper: Callable
    norms: dict = field(default_factory=dict)


def dyadic_decompose(m: MultiplierFn, cutoffs: CutoffSpec | None = None, j_range=range(-4, 12)):
    """Pieces ``m_j = m phi(2^-j .)`` and ``m^j = m(2^j .) phi``."""
    phi = (cutoffs or CutoffSpec()).phi
    pieces = []
    for j in j_range:
        sc = 2.0 ** j
        pieces.append(DyadicPiece(
            j=j,
            m_j=(lambda lam, sc=sc: m(lam) * phi(np.asarray(lam) / sc)),
            m_upper=(lambda lam, sc=sc: m(sc * np.asarray(lam)) * phi(lam)),
        ))
    return pieces


def reconstruction_residual(m: MultiplierFn, pieces, lam) -> float:
    total = sum(p.m_j(lam) for p in pieces)
    return float(np.max(np.abs(total - m(lam))))


def dyadic_sobolev(m: MultiplierFn, j: int, s: float, cutoffs: CutoffSpec | None = None) -> float:
    """``||m^j||_{L^2_s}``."""
    phi = (cutoffs or CutoffSpec()).phi
    return localized_norms(m, 2.0 ** j, s, m.theta, cutoff=phi)[1]


def sobolev_growth_table(theta: float, beta: float, s: float, js) -> list[dict]:
    """Rows ``j, l2s_norm, bound, ratio`` against ``2^(|j| theta (s - beta/2))``."""
    m = osc_multiplier(theta, beta)
    rows = []
    for j in js:
        val = dyadic_sobolev(m, j, s)
        bound = 2.0 ** (abs(j) * theta * (s - beta / 2))
        rows.append({"j": j, "l2s_norm": val, "bound": bound, "ratio": val / bound})
    return rows


# --------------------------------------------------------------------------
# class constants, high/low split, analytic family

@dataclass
class ClassReport:
    small_t_sobolev: float
    linf_decay: float
    sobolev_growth: float
    constant: float
    stable: bool
    history: dict = field(default_factory=dict)


def _sup_terms(m, theta, beta, s, ts):
    a, b = [], []
    for t in ts:
        inf_n, l2s = localized_norms(m, t, s, theta)
        a.append(t ** (theta * beta / 2) * inf_n)
        b.append(t ** (-theta * (2 * s - beta) / 2) * l2s)
    return np.array(a), np.array(b)


def class_constants(m: Callable, theta: float, beta: float, s: float,
                    t_max: float = 2.0 ** 8, n_per_octave: int = 8,
                    stab_tol: float = 0.05) -> ClassReport:
    """Evaluate the three scale-invariant conditions on log-uniform ``t`` grids.

    The suprema over ``t >= 1`` are recomputed with ``t_max`` doubled twice;
    ``stable`` is False when the supremum keeps growing (non-membership).
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    ts_small = 2.0 ** np.linspace(-6, 0, 6 * n_per_octave + 1)
    small = max(localized_norms(m, t, s, theta)[1] for t in ts_small)
    history = {}
    oct_max = int(np.ceil(np.log2(t_max)))
    ts = 2.0 ** np.linspace(0, oct_max + 2, (oct_max + 2) * n_per_octave + 1)
    a, b = _sup_terms(m, theta, beta, s, ts)
    for k, top in enumerate((oct_max, oct_max + 1, oct_max + 2)):
        sel = ts <= 2.0 ** top * (1 + 1e-12)
        history[2.0 ** top] = (float(a[sel].max()), float(b[sel].max()))
    vals = list(history.values())
    first, last = vals[0], vals[-1]
    stable = all(l <= f * (1 + stab_tol) + 1e-300 for f, l in zip(first, last))
    sup_a, sup_b = vals[0]
    return ClassReport(small, sup_a, sup_b, max(sup_a, sup_b), stable, history)


def high_low_split(m: Callable, cutoffs: CutoffSpec | None = None):
    """``m = m_small + m_large`` with ``m_small = m psi`` (``psi = 1`` on ``[0,1]``)."""
    def m_small(lam):
        return m(lam) * psi(lam)

    def m_large(lam):
        return m(lam) * (1.0 - psi(lam))

    return m_small, m_large


def analytic_family(m_large: Callable, theta: float, beta: float, d: int, z: complex) -> MultiplierFn:
    """``m_large(lam) lam^(theta/2 (beta - d z))``; identity at ``z = beta/d``."""
    if not 0 <= z.real <= 1:
        raise ValueError("Re z must lie in [0, 1]")
    expo = theta / 2 * (beta - d * z)

    def f(lam):
        lam = np.asarray(lam, dtype=float)
        safe = np.where(lam > 0, lam, 1.0)
        return np.where(lam > 0, m_large(lam) * safe ** expo, 0.0)

    return MultiplierFn(f, theta=theta, beta=None, name=f"family(z={z})")


def sup_norm(m: Callable, lam_max: float = 2.0 ** 10, n: int = 200001) -> float:
    lam = np.linspace(0.0, lam_max, n)
    return float(np.max(np.abs(m(lam))))
