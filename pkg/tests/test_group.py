import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from htlab.group import (GroupPoint, HTypeError, build_htype, dilate, htype_residual, identity,
                         inv, load_group, mul, norm, preset)

PRESETS = ["heisenberg-1", "heisenberg-2", "heisenberg-3", "quaternionic-4-2"]
coord = st.floats(-5, 5, allow_nan=False)


def point(g, data):
    return GroupPoint(data[: g.d1], data[g.d1: g.d1 + g.d2])


@pytest.mark.parametrize("name", PRESETS)
def test_presets_are_htype(name):
    g = preset(name)
    rng = np.random.default_rng(1)
    assert max(htype_residual(g, rng.standard_normal(g.d2)) for _ in range(20)) <= 1e-12
    for J in g.J:
        assert np.allclose(J, -J.T)


def test_dimensions():
    g = preset("quaternionic-4-2")
    assert (g.d1, g.d2, g.d, g.Q) == (4, 2, 6, 8)


@settings(max_examples=50, deadline=None)
@given(st.lists(coord, min_size=9, max_size=9))
def test_group_law(data):
    g = preset("heisenberg-1")
    p, q, r = (point(g, data[3 * i: 3 * i + 3]) for i in range(3))
    assert mul(g, mul(g, p, q), r).allclose(mul(g, p, mul(g, q, r)), atol=1e-9)
    assert mul(g, p, inv(g, p)).allclose(identity(g))
    assert dilate(mul(g, p, q), 1.7).allclose(mul(g, dilate(p, 1.7), dilate(q, 1.7)), atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.lists(coord, min_size=3, max_size=3), st.floats(0.1, 10))
def test_koranyi_homogeneous(data, r):
    g = preset("heisenberg-1")
    p = point(g, data)
    assert norm(dilate(p, r)) == pytest.approx(r * norm(p), rel=1e-12, abs=1e-12)
    assert norm(dilate(p, r, "iso"), "euclid") == pytest.approx(r * norm(p, "euclid"), rel=1e-12, abs=1e-12)


def test_norm_examples():
    p = GroupPoint([3.0, 4.0], [2.0])
    assert norm(p, "euclid") == 7.0
    assert norm(p) == pytest.approx((625 + 64) ** 0.25)


def test_rejects_bad_structures(tmp_path):
    with pytest.raises(HTypeError):
        build_htype([[[0, 2], [-2, 0]], [[0, 1], [-1, 0]]])
    with pytest.raises(ValueError):
        preset("nope")
    with pytest.raises(ValueError):
        GroupPoint([np.nan, 0], [0])
    with pytest.raises(ValueError):
        dilate(GroupPoint([1, 0], [0]), -1)
    path = tmp_path / "g.json"
    path.write_text(json.dumps({"name": "mine", "J": [[[0, 1], [-1, 0]]]}))
    assert load_group(path).name == "mine"
