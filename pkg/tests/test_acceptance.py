"""Acceptance criteria 1-13 at their stated tolerances.

Each test prints one ``criterion N: PASS|FAIL`` line.  Criteria with a
known, documented shortfall are reported as FAIL and marked xfail.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from htlab import harness

SLOW = pytest.mark.slow


@pytest.fixture(scope="module")
def cache(tmp_path_factory):
    return harness.Cache(tmp_path_factory.mktemp("htlab-cache"))


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail, known=None):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
        if not ok and known:
            pytest.xfail(known)
        assert ok, detail
    return _report


def records(suite, cache, **kw):
    cfg = harness.ExperimentConfig({"suites": [suite], **kw})
    recs = harness.run(cfg, cache)
    for r in recs:
        assert "error" not in r.extra, r.extra
    return {r.name: r for r in recs}


def test_c01_htype_algebra(cache, report):
    recs = records("algebra", cache)
    worst = max(r.extra["max_residual"] for r in recs.values())
    report(1, all(r.passed for r in recs.values()) and len(recs) == 4 and worst <= 1e-12,
           f"max ||J^2 + |mu|^2 I||_F = {worst:.2e} over 4 presets x 100 samples (tol 1e-12)")


def test_c02_mehler(cache, report):
    rec = records("mehler", cache)["heisenberg-1"]
    cal = rec.extra["calibration"]
    err = max(cal["fit_error"], cal["match_error"])
    report(2, rec.passed and err <= 1e-4,
           f"fit error {cal['fit_error']:.2e}, held-out t=0.2 error {cal['match_error']:.2e} (tol 1e-4)")


def test_c03_heat(cache, report):
    rec = records("heat", cache)["t=1"]
    mass = rec.measurements[0][1]
    report(3, rec.passed and abs(mass - 1) <= 1e-6 and rec.extra["min_value"] >= rec.extra["floor"],
           f"|mass - 1| = {abs(mass - 1):.2e} (tol 1e-6), min value {rec.extra['min_value']:.1e}")


@pytest.fixture(scope="module")
def growth(cache):
    return records("growth", cache)


@SLOW
def test_c04_wave_growth(growth, report):
    rec = growth["K_tau"]
    report(4, rec.passed and 0.85 <= rec.fit.slope <= 1.15 and len(rec.measurements) == 4,
           f"slope {rec.fit.slope:.3f} +- {rec.fit.half_width:.3f} in [0.85, 1.15]; "
           f"n0 slope {growth['n0'].fit.slope:.3f}")


@SLOW
def test_c05_shell_decay(growth, report):
    rec = growth["nk"]
    ks = [k for k, _ in rec.measurements]
    report(5, rec.passed and -1.8 <= rec.fit.slope <= -1.2 and ks == list(range(1, 17)),
           f"slope {rec.fit.slope:.3f} +- {rec.fit.half_width:.3f} in [-1.8, -1.2] over k=1..16")


@pytest.fixture(scope="module")
def decay(cache):
    return records("decay", cache)


@SLOW
def test_c06_w_decay(decay, report):
    rec = decay["W_n:tau=16"]
    report(6, rec.passed and rec.fit.slope <= -0.2,
           f"semilog slope {rec.fit.slope:.3f} (need <= -0.2) over n=1..6")


@SLOW
def test_c07_finite_speed(decay, report):
    rec = decay["finite-speed:gaussian"]
    b = rec.extra["base"]["4"]["sup"]
    e = rec.extra["extended"]["4"]["sup"]
    report(7, rec.passed and e <= 1.05 * b,
           f"sup |K| w^4: {b:.4e} on base domain, {e:.4e} on doubled domain")


def test_c08_dyadic(cache, report):
    rec = next(iter(records("dyadic", cache).values()))
    ratios = [v for _, v in rec.measurements]
    spread = max(ratios) / min(ratios)
    report(8, rec.passed and spread <= 4 and len(ratios) == 10,
           f"ratios in [{min(ratios):.3f}, {max(ratios):.3f}], max/min {spread:.3f} (<= 4)")


def test_c09_subordination(cache, report):
    recs = records("subordination", cache)
    r0, r2 = recs["order=0"], recs["order=2"]
    ok = r0.fit.slope <= -1 and r2.passed
    report(9, ok, f"order-0 slope {r0.fit.slope:.3f} (need <= -1); order 2 smaller at every tau: "
                  f"{r2.extra['smaller_at_every_tau']}",
           known="pre-asymptotic residual at tau <= 64, see ledger")


@pytest.fixture(scope="module")
def atoms(cache):
    return records("atoms", cache)


@SLOW
def test_c10_hjn(atoms, report):
    rec = atoms["hjn"]
    table = rec.extra["table"]
    assert {(r["jL"], r["n"]) for r in table} == {(jl, n) for jl in range(-5, 1) for n in range(6)}
    report(10, rec.passed and np.isfinite(rec.extra["max_ratio"]),
           f"max ratio {rec.extra['max_ratio']:.3f}; far (j+L<=-3) max {rec.extra['far_max']:.3f} "
           f"vs near max {rec.extra['near_max']:.3f}")


@SLOW
def test_c11_endpoint(atoms, report):
    flat, contrast = atoms["image:theta=2,beta=3"], atoms["image:theta=2,beta=1"]
    ok = flat.passed and contrast.passed and flat.extra["all_converged"]
    report(11, ok, f"beta=3 max/min {flat.extra['spread']:.2f} (<= 4), converged "
                   f"{flat.extra['all_converged']}; beta=1 monotone growth {contrast.passed}",
           known="j-window 0..3 is not converged, see ledger")


@SLOW
def test_c12_analytic(cache, report):
    recs = records("analytic", cache)
    sup, grow = recs["sup_iy"], recs["class_1_iy"]
    report(12, sup.passed and grow.passed,
           f"max sup|m^iy| {max(v for _, v in sup.measurements):.3f} <= C_m "
           f"{sup.extra['class_constant']:.3f}; class-constant slope in y {grow.fit.slope:.3f} <= 2")


def test_c13_determinism(tmp_path, report):
    cfg = {"suites": ["algebra", "dyadic", "subordination", "heat"]}
    outs = []
    for i in range(2):
        cfg["output_dir"] = str(tmp_path / f"out{i}")
        path = tmp_path / f"c{i}.json"
        path.write_text(json.dumps(cfg))
        subprocess.run([sys.executable, "-m", "htlab.cli", "--no-cache", "run", str(path)],
                       capture_output=True, check=False)
        outs.append({p.name: p.read_bytes() for p in sorted((tmp_path / f"out{i}").glob("*.csv"))})
    same = bool(outs[0]) and outs[0] == outs[1]
    report(13, same, f"{len(outs[0])} CSV files byte-identical across two runs")
