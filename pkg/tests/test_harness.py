import json
import os

import pytest

from htlab import harness
from htlab.fitting import ExperimentRecord


def growth_record(n=4):
    return ExperimentRecord.from_fit("growth", "K_tau", [(2.0 ** k, 3 * 2.0 ** k) for k in range(n)],
                                     (0.85, 1.15))


def test_config_validation():
    assert harness.ExperimentConfig({})["taus"] == [8, 16, 32, 64]
    with pytest.raises(ValueError):
        harness.ExperimentConfig({"suites": ["bogus"]})
    with pytest.raises(ValueError):
        harness.ExperimentConfig({"taus": []})
    with pytest.raises(ValueError):
        harness.ExperimentConfig({"tolerances": {"algebra": -1}})
    a = harness.ExperimentConfig({"output_dir": "x"})
    b = harness.ExperimentConfig({"output_dir": "y"})
    assert a.digest() == b.digest()


def test_empty_suites():
    assert harness.run(harness.ExperimentConfig({"suites": []}), harness.Cache(None)) == []


def test_emit_formats(tmp_path):
    rec = growth_record()
    files = harness.emit([rec], tmp_path)
    csv = (tmp_path / "growth_K_tau.csv").read_text().splitlines()
    assert csv[0] == "param,l1_norm" and len(csv) == 5
    assert len((tmp_path / "growth_K_tau.dat").read_text().splitlines()) == 4
    assert harness.load_manifest(tmp_path / "manifest.json") == [rec]
    assert len(files) == 3


def test_emit_errors(tmp_path):
    with pytest.raises(ValueError):
        harness.emit([], tmp_path)
    ro = tmp_path / "ro"
    ro.mkdir()
    os.chmod(ro, 0o500)
    try:
        if not os.access(ro, os.W_OK):
            with pytest.raises(OSError):
                harness.emit([growth_record()], ro)
    finally:
        os.chmod(ro, 0o700)


def test_suite_failure_is_structured(tmp_path):
    cfg = harness.ExperimentConfig({"suites": ["growth", "algebra"], "taus": [8, 16], "n0_taus": [8],
                                    "ks": [1]})
    recs = harness.run(cfg, harness.Cache(None))
    bad = [r for r in recs if r.suite == "growth"]
    assert all(not r.passed and r.extra["error"] == "ValueError" for r in bad)
    assert all(r.passed for r in recs if r.suite == "algebra")


def test_cache_roundtrip(tmp_path, h1, cal):
    cache = harness.Cache(tmp_path)
    calls = []

    def compute():
        from htlab.grid import KernelField, build_grid
        import numpy as np
        calls.append(1)
        return KernelField(build_grid(h1, 1, 1, 4, 4), np.ones((4, 4)))

    k1 = cache.kernel({"a": 1}, compute)
    k2 = cache.kernel({"a": 1}, compute)
    assert len(calls) == 1 and (k1.values == k2.values).all() and cache.hits == 1
    rep = cache.calibration(h1)
    again = harness.Cache(tmp_path).calibration(h1)
    assert again.c_E == rep.c_E and again.errors == rep.errors
    assert any(p.name.startswith("calibration-") for p in tmp_path.iterdir())
