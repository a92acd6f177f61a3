"""Experiment configuration, suites, caching and output emission.

Each suite turns a flat config into :class:`ExperimentRecord` objects.  A
failing convergence guard inside one suite becomes a failed record
carrying the error, never an aborted run.  Outputs are written in a fixed
order with ``repr`` floats so identical configs give identical CSV bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import atoms as atoms_mod
from . import fiber, multipliers, wave
from .fitting import ExperimentRecord, config_hash
from .grid import build_grid, field_norm, load_field, save_field
from .group import htype_residual, preset

ATOM_COLUMNS = ["theta", "beta", "r", "L", "j_window", "l1_value", "tail_est"]
SUITES = ("algebra", "mehler", "heat", "growth", "decay", "dyadic", "subordination", "atoms",
          "analytic")

DEFAULTS = {
    "group": "heisenberg-1",
    "suites": ["growth"],
    "multiplier": "osc:theta=2,beta=3",
    "seed": 0,
    "cache_dir": None,
    "output_dir": "htlab-out",
    "algebra_presets": ["heisenberg-1", "heisenberg-2", "heisenberg-3", "quaternionic-4-2"],
    "algebra_samples": 100,
    "heat_t": 1.0,
    "heat_grid": {"R_x": 10.0, "R_u": 12.0, "n_r": 96, "n_rho": 96},
    "taus": [8, 16, 32, 64],
    "n0_taus": [8, 16, 32, 64],
    "shell_tau": 32,
    "ks": list(range(1, 17)),
    "w_tau": 16,
    "ns": [1, 2, 3, 4, 5, 6],
    "decay_tau": 16,
    "decay_N": 4,
    "decay_domain": [2.0, 0.8],
    "decay_diagnostic": False,
    "sub_taus": [8, 16, 32, 64],
    "sub_orders": [0, 2],
    "dyadic": {"theta": 2, "beta": 3, "s": 2, "js": list(range(1, 11))},
    "atom_rs": [1.0, 0.5, 0.25, 0.125],
    "atom_betas": [3, 1],
    "atom_js": [0, 1, 2, 3],
    "hjn_r": 0.25,
    "hjn_jL": [-5, -4, -3, -2, -1, 0],
    "hjn_ns": [0, 1, 2, 3, 4, 5],
    "analytic_ys": [0, 1, 5],
    "analytic_growth_ys": [1, 2, 4, 8],
    "tolerances": {
        "algebra": 1e-12, "mehler": 1e-4, "heat_mass": 1e-6, "positivity_floor": 1e-12,
        "growth": [0.85, 1.15], "shell": [-1.8, -1.2], "w_decay": -0.2,
        "decay_slack": 1.05, "sub_slope": -1.0, "dyadic_factor": 4.0,
        "atom_factor": 4.0, "hjn_factor": 2.0, "analytic_slope_margin": 0.0,
    },
}


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        merged = json.loads(json.dumps(DEFAULTS))
        tol = dict(merged["tolerances"])
        tol.update(self.values.get("tolerances", {}))
        merged.update(self.values)
        merged["tolerances"] = tol
        for s in merged["suites"]:
            if s not in SUITES:
                raise ValueError(f"unknown suite {s!r}")
        for key in ("taus", "ks", "ns", "sub_taus", "atom_rs", "atom_js"):
            if not merged[key]:
                raise ValueError(f"range {key!r} must be nonempty")
        for k, v in tol.items():
            if isinstance(v, (int, float)) and k not in ("w_decay", "sub_slope", "analytic_slope_margin") and v <= 0:
                raise ValueError(f"tolerance {k!r} must be positive")
        self.values = merged

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls(json.load(fh))

    def digest(self) -> str:
        v = {k: x for k, x in self.values.items() if k not in ("cache_dir", "output_dir")}
        return config_hash(v)


# --------------------------------------------------------------------------
# caches

class Cache:
    """Kernel fields and calibration reports under one directory (``None`` disables)."""

    def __init__(self, root=None):
        self.root = Path(root) if root else None
        if self.root:
            self.root.mkdir(parents=True, exist_ok=True)
        self.hits = 0

    def kernel(self, key: dict, compute):
        if self.root is None:
            return compute()
        path = self.root / f"kernel-{config_hash(key)}.htk"
        if path.exists():
            self.hits += 1
            return load_field(path)[0]
        K = compute()
        save_field(K, path, str(key.get("group", "")))
        return K

    def calibration(self, g):
        if self.root is None:
            return fiber.calibration_for(g)
        name = hashlib.sha256(fiber.group_key(g).encode()).hexdigest()[:16]
        path = self.root / f"calibration-{name}.json"
        if path.exists():
            self.hits += 1
            d = json.loads(path.read_text())
            d["errors"] = {float(t): e for t, e in d["errors"].items()}
            rep = fiber.CalibrationReport(**d)
            fiber.set_calibration(g, rep)
            return rep
        rep = fiber.calibration_for(g)
        path.write_text(json.dumps(rep.as_dict(), sort_keys=True, default=_json_default))
        return rep


def default_cache_dir():
    return os.environ.get("HTLAB_CACHE") or None


# --------------------------------------------------------------------------
# suites

def _failed(suite, name, err) -> ExperimentRecord:
    return ExperimentRecord(suite, name, [], passed=False,
                            extra={"error": type(err).__name__, "message": str(err)})


def suite_algebra(cfg, ctx):
    rng = np.random.default_rng(cfg["seed"])
    recs = []
    for name in cfg["algebra_presets"]:
        g = preset(name)
        res = [htype_residual(g, rng.standard_normal(g.d2)) for _ in range(cfg["algebra_samples"])]
        worst = max(res)
        recs.append(ExperimentRecord("algebra", name, list(enumerate(res)), passed=worst <= cfg["tolerances"]["algebra"],
                                     columns=("sample", "residual"), extra={"max_residual": worst}))
    return recs


def suite_mehler(cfg, ctx):
    g = preset(cfg["group"])
    fiber._CALIBRATIONS.pop(fiber.group_key(g), None)
    rep = fiber.calibrate_constants(g, tol=cfg["tolerances"]["mehler"])
    fiber.set_calibration(g, rep)
    pts = sorted((float(t), float(e)) for t, e in rep.errors.items())
    ok = max(rep.fit_error, rep.match_error) <= cfg["tolerances"]["mehler"]
    return [ExperimentRecord("mehler", cfg["group"], pts, passed=bool(ok), columns=("t", "rel_linf_error"),
                             extra={"calibration": rep.as_dict()})]


def suite_heat(cfg, ctx):
    g = preset(cfg["group"])
    hg = cfg["heat_grid"]
    grid = build_grid(g, hg["R_x"], hg["R_u"], hg["n_r"], hg["n_rho"],
                      r_panels=max(1, hg["n_r"] // 16), rho_panels=max(1, hg["n_rho"] // 16))
    t = cfg["heat_t"]
    key = {"kind": "heat", "group": cfg["group"], "t": t, "grid": grid.spec}
    K = ctx.cache.kernel(key, lambda: fiber.fiber_kernel(g, fiber.heat_symbol(t), grid, cal=ctx.cal(g)))
    mass = K.mass().real
    vmin = float(K.values.real.min())
    # far-tail values below rounding of the peak count as zero
    floor = -cfg["tolerances"]["positivity_floor"] * float(np.abs(K.values).max())
    ok = vmin >= floor and abs(mass - 1) <= cfg["tolerances"]["heat_mass"]
    return [ExperimentRecord("heat", f"t={t:g}", [(t, mass)], passed=bool(ok), columns=("t", "mass"),
                             extra={"min_value": vmin, "floor": floor, "max_imag": float(np.abs(K.values.imag).max())})]


def suite_growth(cfg, ctx):
    g = preset(cfg["group"])
    cal = ctx.cal(g)
    tol = cfg["tolerances"]
    out = []
    for family, vals, band in (("K_tau", cfg["taus"], tol["growth"]),
                               ("n0", cfg["n0_taus"], tol["growth"]),
                               ("nk", cfg["ks"], tol["shell"])):
        try:
            rec = wave.growth_scan(g, family, vals, tau=float(cfg["shell_tau"]), band=band, cal=cal,
                                   cache=ctx.cache.kernel)
            rec.columns = ("param", "l1_norm")
            out.append(rec)
        except (fiber.ConvergenceError, ValueError) as e:
            out.append(_failed("growth", family, e))
    return out


def suite_decay(cfg, ctx):
    g = preset(cfg["group"])
    cal = ctx.cal(g)
    tol = cfg["tolerances"]
    out = []
    try:
        rec = wave.w_decay_scan(g, float(cfg["w_tau"]), cfg["ns"], band=(-np.inf, tol["w_decay"]), cal=cal)
        out.append(rec)
    except (fiber.ConvergenceError, ValueError) as e:
        out.append(_failed("decay", "W_n", e))
    tau = float(cfg["decay_tau"])
    R_x, R_u = cfg["decay_domain"]
    bands = [("gaussian", wave.gaussian_band())]
    if cfg["decay_diagnostic"]:
        bands.append(("dyadic", (None, None)))
    for label, chi in bands:
        fields = []
        for fac in (1, 2):
            key = {"kind": "decay", "group": cfg["group"], "tau": tau, "band": label, "R": [fac * R_x, fac * R_u]}
            fields.append(ctx.cache.kernel(key, lambda fac=fac: wave.tau_band_kernel(
                g, tau, wave.wave_grid(g, tau, R_x=fac * R_x, R_u=fac * R_u, max_nodes=4096),
                cal=cal, chi=chi[0], support=chi[1])))
        rec = wave.pointwise_decay_scan(fields[0], tau, "finite-speed", extended=fields[1],
                                        slack=tol["decay_slack"], required=cfg["decay_N"])
        rec.name = f"finite-speed:{label}"
        rec.columns = ("N", "sup_product")
        rec.extra["band"] = label
        rec.extra["diagnostic"] = label != "gaussian"
        out.append(rec)
    return out


def suite_dyadic(cfg, ctx):
    p = cfg["dyadic"]
    rows = multipliers.sobolev_growth_table(p["theta"], p["beta"], p["s"], p["js"])
    ratios = [r["ratio"] for r in rows]
    spread = max(ratios) / min(ratios)
    return [ExperimentRecord("dyadic", f"theta={p['theta']},beta={p['beta']},s={p['s']}",
                             [(r["j"], r["ratio"]) for r in rows], columns=("j", "ratio"),
                             passed=spread <= cfg["tolerances"]["dyadic_factor"],
                             extra={"spread": spread, "rows": rows})]


def suite_subordination(cfg, ctx):
    cutoffs = multipliers.CutoffSpec()
    taus = cfg["sub_taus"]
    res = {o: wave.residual_scan(taus, cutoffs.band, cutoffs.chi1, o) for o in cfg["sub_orders"]}
    lo = min(cfg["sub_orders"])
    rec0 = ExperimentRecord.from_fit("subordination", f"order={lo}", res[lo],
                                     (-np.inf, cfg["tolerances"]["sub_slope"]), columns=("tau", "sup_residual"))
    out = [rec0]
    for o, pts in res.items():
        if o == lo:
            continue
        smaller = all(v < v0 for (_, v), (_, v0) in zip(pts, res[lo]))
        out.append(ExperimentRecord("subordination", f"order={o}", pts, passed=smaller,
                                    columns=("tau", "sup_residual"),
                                    extra={"compared_to": lo, "smaller_at_every_tau": smaller}))
    return out


def suite_atoms(cfg, ctx):
    g = preset(cfg["group"])
    cal = ctx.cal(g)
    tol = cfg["tolerances"]
    out = []
    # cancellation table for H_{j,n}
    A = atoms_mod.make_atom(g, cfg["hjn_r"], "oscillating-sign")
    rows = []
    for jL in cfg["hjn_jL"]:
        for n in cfg["hjn_ns"]:
            rows.append(atoms_mod.hjn_ratio(g, A, jL - A.L, n, cal=cal))
    live = [r for r in rows if r["l1"] > 0]
    near = max((r["ratio"] for r in live if r["jL"] >= -2), default=0.0)
    far = max((r["ratio"] for r in live if r["jL"] <= -3), default=0.0)
    out.append(ExperimentRecord("atoms", "hjn", [(r["jL"], r["ratio"]) for r in rows if r["n"] == 0],
                                columns=("j_plus_L", "ratio"), passed=far <= tol["hjn_factor"] * near,
                                extra={"table": rows, "max_ratio": max(r["ratio"] for r in rows),
                                       "near_max": near, "far_max": far}))
    # atom images
    th = 2.0
    for beta in cfg["atom_betas"]:
        m = multipliers.osc_multiplier(th, beta)
        pts, table = [], []
        for r in cfg["atom_rs"]:
            a = atoms_mod.make_atom(g, r, "plain" if r > 0.5 else "oscillating-sign")
            v, rec = atoms_mod.atom_image_norm(g, m, a, cfg["atom_js"], theta=th, cal=cal)
            pts.append((r, v))
            table.append({"theta": th, "beta": beta, "r": r, "L": a.L,
                          "j_window": f"{rec['j_window'][0]}..{rec['j_window'][1]}",
                          "l1_value": v, "tail_est": rec["tail_est"], "converged": rec["converged"],
                          "per_j": {str(j): v for j, v in rec["per_j"].items()}})
        vals = [v for _, v in pts]
        if beta >= g.d:
            ok = max(vals) / min(vals) <= tol["atom_factor"]
            crit = "uniform"
        else:
            ok = all(b > a for a, b in zip(vals, vals[1:]))
            crit = "monotone-growth"
        out.append(ExperimentRecord("atoms", f"image:theta={th:g},beta={beta:g}", pts, columns=("r", "l1_value"),
                                    passed=bool(ok), extra={"table": table, "table_columns": ATOM_COLUMNS,
                                                            "criterion": crit,
                                                            "spread": max(vals) / min(vals),
                                                            "all_converged": all(t["converged"] for t in table)}))
    return out


def suite_analytic(cfg, ctx):
    g = preset(cfg["group"])
    m = multipliers.parse_multiplier(cfg["multiplier"])
    th, beta, s = m.theta, m.beta, cfg["dyadic"]["s"]
    C = multipliers.class_constants(m, th, beta, s)
    ml = multipliers.high_low_split(m)[1]
    pts = [(y, multipliers.sup_norm(multipliers.analytic_family(ml, th, beta, g.d, complex(0, y))))
           for y in cfg["analytic_ys"]]
    sup_ok = all(v <= C.constant for _, v in pts)
    out = [ExperimentRecord("analytic", "sup_iy", pts, columns=("y", "sup_norm"), passed=sup_ok,
                            extra={"class_constant": C.constant})]
    gpts = []
    for y in cfg["analytic_growth_ys"]:
        f = multipliers.analytic_family(ml, th, beta, g.d, complex(1, y))
        gpts.append((y, multipliers.class_constants(f, th, beta, s).constant))
    out.append(ExperimentRecord.from_fit("analytic", "class_1_iy", gpts,
                                         (-np.inf, s + cfg["tolerances"]["analytic_slope_margin"]),
                                         columns=("y", "class_constant")))
    return out


_SUITE_FNS = {"algebra": suite_algebra, "mehler": suite_mehler, "heat": suite_heat,
              "growth": suite_growth, "decay": suite_decay, "dyadic": suite_dyadic,
              "subordination": suite_subordination, "atoms": suite_atoms, "analytic": suite_analytic}


class _Context:
    def __init__(self, cache: Cache):
        self.cache = cache

    def cal(self, g):
        return self.cache.calibration(g)


def run(config: ExperimentConfig, cache: Cache | None = None) -> list[ExperimentRecord]:
    """Run the configured suites in order; one suite's failure does not stop the others."""
    cache = cache or Cache(config["cache_dir"])
    ctx = _Context(cache)
    digest = config.digest()
    records = []
    for name in config["suites"]:
        t0 = time.perf_counter()
        try:
            recs = _SUITE_FNS[name](config, ctx)
        except (fiber.ConvergenceError, fiber.CalibrationError, atoms_mod.AtomError, ValueError) as e:
            recs = [_failed(name, name, e)]
        wall = time.perf_counter() - t0
        for r in recs:
            r.config_hash = digest
            r.wall = r.wall or wall
        records.extend(recs)
    return records


# --------------------------------------------------------------------------
# emission

def _slug(rec: ExperimentRecord) -> str:
    keep = "".join(c if c.isalnum() or c in "-_." else "_" for c in rec.name)
    return f"{rec.suite}_{keep}"


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit(records, out_dir, formats=("csv", "json", "plotdata"), config=None) -> list[Path]:
    """Write CSV per record, a JSON manifest (with ``config`` if given) and two-column plot files."""
    if not records:
        raise ValueError("no records to emit")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {out}: {e}") from e
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")
    written = []
    for rec in records:
        slug = _slug(rec)
        if "csv" in formats:
            p = out / f"{slug}.csv"
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(rec.columns)
                for a, b in rec.measurements:
                    w.writerow([_fmt(a), _fmt(b)])
            written.append(p)
            table = rec.extra.get("table")
            if table:
                p = out / f"{slug}_table.csv"
                cols = rec.extra.get("table_columns") or list(table[0])
                with open(p, "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(cols)
                    for row in table:
                        w.writerow([_fmt(row[c]) for c in cols])
                written.append(p)
        if "plotdata" in formats:
            p = out / f"{slug}.dat"
            with open(p, "w") as fh:
                for a, b in rec.measurements:
                    fh.write(f"{_fmt(a)} {_fmt(b)}\n")
            written.append(p)
    if "json" in formats:
        p = out / "manifest.json"
        body = {"records": [r.as_dict() for r in records],
                "all_passed": all(r.passed for r in records)}
        if config is not None:
            body["config"] = config.values
        p.write_text(json.dumps(body, indent=1, sort_keys=True, default=_json_default))
        written.append(p)
    return written


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def load_manifest(path) -> list[ExperimentRecord]:
    body = json.loads(Path(path).read_text())
    return [ExperimentRecord.from_dict(d) for d in body["records"]]


def summary(records) -> dict:
    return {"passed": all(r.passed for r in records),
            "records": [{"suite": r.suite, "name": r.name, "pass": r.passed,
                         "slope": r.fit.slope if r.fit else None,
                         "ci": r.fit.half_width if r.fit else None} for r in records]}
