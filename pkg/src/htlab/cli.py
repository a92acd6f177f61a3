"""``htlab`` command line.  Exit status is 0 iff every pass flag is true."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .fiber import fiber_kernel, sqrt_symbol
from .grid import build_grid, save_field, to_csv
from .group import HTypeError, htype_residual, load_group, preset
from .multipliers import parse_multiplier


def _group(name):
    return load_group(name) if name.endswith(".json") else preset(name)


def _cache(args, cfg):
    if args.no_cache:
        return harness.Cache(None)
    return harness.Cache(harness.default_cache_dir() or cfg["cache_dir"])


def _config(args, **overrides) -> harness.ExperimentConfig:
    values = json.loads(Path(args.config).read_text()) if getattr(args, "config", None) else {}
    values.update(overrides)
    if args.out:
        values["output_dir"] = args.out
    return harness.ExperimentConfig(values)


def _execute(cfg, args) -> int:
    records = harness.run(cfg, _cache(args, cfg))
    if not records:
        print("no suites requested")
        return 0
    harness.emit(records, cfg["output_dir"], config=cfg)
    summary = harness.summary(records)
    Path(cfg["output_dir"], "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    for r in records:
        slope = f" slope={r.fit.slope:.4g}+-{r.fit.half_width:.2g}" if r.fit else ""
        err = f" error={r.extra['error']}: {r.extra['message']}" if "error" in r.extra else ""
        print(f"{r.suite}/{r.name}: {'PASS' if r.passed else 'FAIL'}{slope}{err}")
    return 0 if summary["passed"] else 1


def cmd_group(args) -> int:
    try:
        g = _group(args.preset)
    except (HTypeError, KeyError, ValueError) as e:
        print(f"invalid group: {e}", file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed)
    worst = max(htype_residual(g, rng.standard_normal(g.d2)) for _ in range(args.samples))
    ok = worst <= args.tol
    print(json.dumps({"group": g.name, "d1": g.d1, "d2": g.d2, "max_residual": worst, "pass": ok}))
    return 0 if ok else 1


def cmd_kernel(args) -> int:
    g = _group(args.group)
    m = parse_multiplier(args.mult)
    R_x, R_u, n_r, n_rho = (float(x) for x in args.grid.split(","))
    grid = build_grid(g, R_x, R_u, int(n_r), int(n_rho),
                      r_panels=max(1, int(n_r) // 16), rho_panels=max(1, int(n_rho) // 16))
    cache = _cache(args, harness.ExperimentConfig({"suites": []}))
    f = sqrt_symbol(m, (0.0, args.lam_max), name=args.mult)
    key = {"kind": "kernel", "group": g.name, "mult": args.mult, "lam_max": args.lam_max,
           "grid": grid.spec}
    K = cache.kernel(key, lambda: fiber_kernel(g, f, grid, cal=cache.calibration(g)))
    out = Path(args.out or "kernel.htk")
    save_field(K, out, g.name)
    if args.csv:
        Path(args.csv).write_text(to_csv(K))
    finite = bool(np.isfinite(K.values).all())
    print(json.dumps({"file": str(out), "shape": list(K.grid.shape), "mass_re": K.mass().real,
                      "sup": K.sup(), "pass": finite}))
    return 0 if finite else 1


def cmd_verify(args) -> int:
    return _execute(_config(args, suites=[args.what]), args)


def cmd_atoms(args) -> int:
    return _execute(_config(args, suites=["atoms"]), args)


def cmd_run(args) -> int:
    args.config = args.config_file
    return _execute(_config(args), args)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="htlab", description=__doc__)
    p.add_argument("--no-cache", action="store_true", help="recompute kernels and calibrations")
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("group", help="H-type structure checks")
    g.add_argument("action", choices=["validate"])
    g.add_argument("preset", help="preset name or JSON file of row-major matrices")
    g.add_argument("--samples", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--tol", type=float, default=1e-12)
    g.set_defaults(fn=cmd_group)

    k = sub.add_parser("kernel", help="kernel of m(sqrt L) on a biradial grid")
    k.add_argument("--group", default="heisenberg-1")
    k.add_argument("--mult", default="mh:gaussian")
    k.add_argument("--grid", default="4,4,64,64", help="R_x,R_u,n_r,n_rho")
    k.add_argument("--lam-max", type=float, default=8.0, help="spectral truncation in sqrt(L)")
    k.add_argument("--out", help="binary cache file (default kernel.htk)")
    k.add_argument("--csv", help="also write r,rho,re,im CSV here")
    k.set_defaults(fn=cmd_kernel)

    v = sub.add_parser("verify", help="run one verification suite")
    v.add_argument("what", choices=["growth", "decay", "subordination", "dyadic"])
    v.add_argument("--config", help="JSON overrides")
    v.add_argument("--out", help="output directory")
    v.set_defaults(fn=cmd_verify)

    a = sub.add_parser("atoms", help="atom experiments")
    a.add_argument("action", choices=["sweep"])
    a.add_argument("--config", help="JSON overrides")
    a.add_argument("--out", help="output directory")
    a.set_defaults(fn=cmd_atoms)

    r = sub.add_parser("run", help="run the suites named in a config file")
    r.add_argument("config_file")
    r.add_argument("--out", help="output directory")
    r.set_defaults(fn=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (OSError, ValueError) as e:
        print(f"htlab: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
