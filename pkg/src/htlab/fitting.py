"""Log-log exponent fits and the experiment record they feed."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class Fit:
    slope: float
    intercept: float
    residual: float
    half_width: float

    def within(self, band) -> bool:
        lo, hi = band
        return bool(lo <= self.slope <= hi)


def fit_exponent(points, *, semilog: bool = False, base: float = 2.0) -> Fit:
    """OLS fit of ``log value`` against ``log param``, with a 95% t half-width.

    With ``semilog`` the abscissa is the raw parameter and the slope is the
    exponent in ``base**(slope * param)``.
    """
    pts = list(points)
    if len(pts) < 4:
        raise ValueError("need at least 4 points for a fit")
    x = np.array([p for p, _ in pts], dtype=float)
    y = np.array([v for _, v in pts], dtype=float)
    if (y <= 0).any() or not np.isfinite(y).all():
        raise ValueError("values must be positive and finite")
    if semilog:
        X, Y = x, np.log(y) / np.log(base)
    else:
        if (x <= 0).any():
            raise ValueError("parameters must be positive for a log-log fit")
        X, Y = np.log(x), np.log(y)
    if np.ptp(X) == 0:
        raise ValueError("degenerate abscissae")
    A = np.vstack([X, np.ones_like(X)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, Y, rcond=None)
    res = Y - A @ np.array([slope, intercept])
    dof = X.size - 2
    s2 = float(res @ res) / dof
    se = np.sqrt(s2 / float(((X - X.mean()) ** 2).sum()))
    return Fit(float(slope), float(intercept), float(np.sqrt(np.mean(res ** 2))),
               float(stats.t.ppf(0.975, dof) * se))


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class ExperimentRecord:
    suite: str
    name: str
    measurements: list
    config_hash: str = ""
    fit: Fit | None = None
    band: tuple | None = None
    passed: bool = False
    wall: float = 0.0
    extra: dict = field(default_factory=dict)
    columns: tuple = ("param", "l1_norm")

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self.measurements = [(float(p), float(v)) for p, v in self.measurements]
        if self.fit is not None and self.band is not None and self.passed != self.fit.within(self.band):
            raise ValueError("pass flag inconsistent with band")

    @classmethod
    def from_fit(cls, suite, name, points, band, *, semilog=False, **kw) -> "ExperimentRecord":
        fit = fit_exponent(points, semilog=semilog)
        return cls(suite, name, list(points), fit=fit, band=tuple(band),
                   passed=fit.within(band), **kw)

    def as_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        d["measurements"] = [list(m) for m in self.measurements]
        d["band"] = list(self.band) if self.band is not None else None
        d["columns"] = list(self.columns)
        if not timing:
            d.pop("wall")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentRecord":
        d = dict(d)
        fit = d.pop("fit", None)
        band = d.pop("band", None)
        return cls(fit=Fit(**fit) if fit else None, band=tuple(band) if band else None,
                   measurements=[tuple(m) for m in d.pop("measurements")], **d)
