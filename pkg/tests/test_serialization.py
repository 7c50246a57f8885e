import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from reldec.qstate import SubsystemLayout
from reldec.serialization import (
    SpecError,
    complex_to_json,
    dumps_report,
    ket_to_json,
    load_json,
    parse_beable,
    parse_complex,
    parse_ket,
    parse_layout,
    parse_observable,
    parse_vector,
)

LAYOUT = SubsystemLayout([2, 2], ["1", "2"])
S2 = 2 ** -0.5


def test_complex_forms():
    assert parse_complex(0.5, "x") == 0.5
    assert parse_complex([0, -1], "x") == -1j


@pytest.mark.parametrize("bad", [[1, 2, 3], "1+2j", [1, "a"], True, float("nan")])
def test_bad_complex_names_path(bad):
    with pytest.raises(SpecError, match=r"state.amplitudes\[1\]"):
        parse_ket({"amplitudes": [1, bad, 0, 0]}, LAYOUT)


@given(st.complex_numbers(allow_nan=False, allow_infinity=False, max_magnitude=1e6))
def test_complex_round_trip(z):
    assert parse_complex(complex_to_json(z), "z") == z


def test_ket_forms_agree():
    bell = np.array([S2, 0, 0, S2])
    forms = [
        {"amplitudes": [S2, 0, 0, S2]},
        {"branches": [{"weight": 0.5, "ket": {"basis": [0, 0]}}, {"weight": 0.5, "ket": {"basis": [1, 1]}}]},
        {"superposition": [{"amplitude": [S2, 0], "ket": {"basis": [0, 0]}},
                           {"amplitude": S2, "ket": {"basis": [1, 1]}}]},
    ]
    for f in forms:
        assert np.allclose(parse_ket(f, LAYOUT).amplitudes, bell)
    prod = parse_ket({"product": [[S2, S2], [1, 0]]}, LAYOUT)
    assert np.allclose(prod.amplitudes, [S2, 0, S2, 0])


def test_unnormalized_branches_rejected():
    spec = {"branches": [{"weight": 0.5, "ket": {"basis": [0, 0]}}, {"weight": 0.4, "ket": {"basis": [1, 1]}}]}
    with pytest.raises(SpecError, match="state.branches"):
        parse_ket(spec, LAYOUT)


def test_unnormalized_amplitudes_not_rescaled():
    with pytest.raises(SpecError, match="state"):
        parse_ket({"amplitudes": [1, 1, 0, 0]}, LAYOUT)


def test_wrong_length():
    with pytest.raises(SpecError, match="expected 4 amplitudes"):
        parse_ket({"amplitudes": [1, 0]}, LAYOUT)


def test_layout_errors():
    with pytest.raises(SpecError, match="layout.dims"):
        parse_layout({"dims": [2, "x"]})
    with pytest.raises(SpecError, match="layout"):
        parse_layout({"dims": [2, 2], "labels": ["a", "a"]})


def test_beable_errors():
    with pytest.raises(SpecError, match=r"beable.subsystems\[0\]"):
        parse_beable({"subsystems": ["9"], "partition": [[0], [1]]}, LAYOUT)
    with pytest.raises(SpecError, match="beable"):
        parse_beable({"subsystems": ["2"], "partition": [[0]]}, LAYOUT)
    b = parse_beable({"subsystems": ["2"], "projectors": [{"vectors": [[S2, S2]]}, {"vectors": [[S2, -S2]]}]},
                     LAYOUT)
    assert len(b) == 2


def test_observable_errors():
    assert np.allclose(parse_observable({"named": "sigma_z"}, 2), np.diag([1, -1]))
    with pytest.raises(SpecError, match="not Hermitian"):
        parse_observable({"matrix": [[0, 1], [0, 0]]}, 2)
    with pytest.raises(SpecError, match="observable.named"):
        parse_observable({"named": "sigma_q"}, 2)


def test_load_json_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{nope")
    with pytest.raises(SpecError, match="invalid JSON"):
        load_json(p)
    with pytest.raises(SpecError, match="file not found"):
        load_json(tmp_path / "missing.json")


def test_report_canonical():
    text = dumps_report({"b": 1, "a": [0.1]})
    assert json.loads(text)["schema"] == 1
    assert text.index('"a"') < text.index('"b"')
    with pytest.raises(ValueError):
        dumps_report({"x": float("nan")})


def test_ket_json_round_trip():
    k = parse_ket({"amplitudes": [[0, S2], 0, 0, S2]}, LAYOUT)
    again = parse_ket({"amplitudes": ket_to_json(k)["amplitudes"]}, LAYOUT)
    assert np.array_equal(k.amplitudes, again.amplitudes)
    assert parse_vector([1, [0, 1]], "v").dtype == complex
