import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from opstar.algebra import AlgebraShape, Element, random_sample
from opstar.io import (
    FormatError,
    decomposition_to_json,
    dumps,
    element_from_json,
    element_to_json,
    load_json,
    load_superop,
    save_superop,
    scan_to_json,
    superop_from_json,
    superop_to_json,
    to_jsonable,
)
from opstar.preserver import decompose, random_op_bijection
from opstar.semigroup import scan, zero_generator
from opstar.superop import PropertyReport, SuperOp, identity

SHAPES = [AlgebraShape([2]), AlgebraShape([2, 1]), AlgebraShape([2, 2, 1])]


@given(st.sampled_from(SHAPES), st.integers(0, 2**32 - 1))
def test_element_round_trip(shape, seed):
    a = random_sample(shape, "generic", seed)
    back = element_from_json(json.loads(json.dumps(element_to_json(a))))
    np.testing.assert_array_equal(back.vec(), a.vec())


def test_element_schema():
    a = Element(AlgebraShape([1]), (np.array([[1 + 2j]]),))
    assert element_to_json(a) == {"dims": [1], "blocks": [[[[1.0, 2.0]]]]}


@given(st.sampled_from(SHAPES), st.integers(0, 2**32 - 1))
def test_superop_round_trip(shape, seed):
    T = random_op_bijection(shape, seed).T
    back = superop_from_json(json.loads(dumps(superop_to_json(T))))
    np.testing.assert_array_equal(back.mat, T.mat)
    assert back.dom == T.dom and back.cod == T.cod


def test_rectangular_superop():
    T = SuperOp(AlgebraShape([2, 1]), AlgebraShape([2]), np.arange(20).reshape(4, 5))
    back = superop_from_json(superop_to_json(T))
    assert back.dom.dims == (2, 1) and back.cod.dims == (2,)


@pytest.mark.parametrize("bad", [
    {},
    {"dims": [2]},
    {"dims": "2", "blocks": []},
    {"dims": [2], "blocks": []},
    {"dims": [2], "blocks": [[[1, 0], [0, 1]]]},
    {"dims": [0], "blocks": [[]]},
])
def test_malformed_elements(bad):
    with pytest.raises(FormatError):
        element_from_json(bad)


def test_malformed_superop():
    good = superop_to_json(identity(AlgebraShape([2])))
    with pytest.raises(FormatError):
        superop_from_json({k: v for k, v in good.items() if k != "matrix"})
    bad = dict(good, matrix=good["matrix"][:-1])
    with pytest.raises(FormatError):
        superop_from_json(bad)


def test_file_round_trip(tmp_path):
    T = random_op_bijection(AlgebraShape([2, 1]), 0).T
    path = tmp_path / "op.json"
    save_superop(T, path)
    np.testing.assert_array_equal(load_superop(path).mat, T.mat)


def test_load_errors(tmp_path):
    with pytest.raises(FormatError, match="cannot read"):
        load_json(tmp_path / "missing.json")
    p = tmp_path / "trunc.json"
    p.write_text('{"dims": [2], "blo')
    with pytest.raises(FormatError, match="not valid JSON"):
        load_json(p)


def test_decomposition_schema():
    dec = decompose(random_op_bijection(AlgebraShape([2, 1]), 1).T)
    out = decomposition_to_json(dec)
    assert set(out) == {"h", "r", "S", "residuals", "verdict"}
    assert out["verdict"] is True
    json.dumps(out)


def test_scan_schema():
    sc = scan(zero_generator(AlgebraShape([2])), (0.0, 1.0))
    out = scan_to_json(sc, {"semigroup_law": 0.0})
    assert out["times"] == [0.0, 1.0]
    assert set(out["records"][0]) == {"t", "h", "r", "S", "verdict"}
    assert out["residuals"] == {"semigroup_law": 0.0}


def test_jsonable_and_determinism():
    rep = PropertyReport("x", True, np.float64(1e-17), witness={"t": np.float64(1.0)})
    obj = {"b": rep, "a": [np.int64(3), np.bool_(True), 1 + 2j, float("nan")]}
    plain = to_jsonable(obj)
    assert plain["a"] == [3, True, [1.0, 2.0], None]
    assert dumps(obj) == dumps(obj)
    assert dumps(obj).index('"a"') < dumps(obj).index('"b"')
