import json

import pytest

from gcps.dsl import ParseError, parse_model, parse_ode_system, serialize_model, serialize_ode_system
from gcps.model import Configuration
from gcps.presets import PRESETS, load_preset, preset_text

LV_DOC = """
@alphabet tok
@env tok
@cells 2 prey=1 pred=2
@output prey
@init prey: tok=10
@init pred: tok=5
rule (tok,0)(tok,prey) -> (tok,prey)(tok,prey)
rule (tok,prey)(tok,0) -> (tok,prey)(tok,prey)
rule (tok,prey)(tok,pred) -> (tok,pred)(tok,pred) @ 0.5
rule (tok,pred)(tok,prey) -> (tok,pred)(tok,pred) @ 0.5
rule (tok,pred)(tok,0) -> (tok,0)(tok,0)
rule (tok,0)(tok,pred) -> (tok,0)(tok,0)
"""

SQRT2_ODE = json.dumps({
    "n": 2,
    "a": [{"i": 1, "j": 1, "k": 2, "value": 2.0}, {"i": 1, "j": 2, "k": 1, "value": 2.0},
          {"i": 1, "j": 1, "k": 1, "value": 1.0}, {"i": 2, "j": 1, "k": 1, "value": 1.0},
          {"i": 1, "j": 2, "k": 2, "value": 1.0}, {"i": 2, "j": 2, "k": 2, "value": 1.0}],
    "b": [{"i": 1, "j": 1, "value": 1.0}, {"i": 1, "j": 2, "value": 1.0},
          {"i": 2, "j": 1, "value": 1.0}, {"i": 2, "j": 2, "value": 1.0}],
}, indent=1)


def test_lotka_volterra_document():
    m = parse_model(LV_DOC)
    assert len(m.rules) == 6 and m.n_cells == 2
    assert m.alphabet == ("tok",) and m.env_objects == frozenset({"tok"})
    assert m.initial == Configuration.tokens([10, 5])
    assert m.rules[0].constant == 1.0 and m.rules[2].constant == 0.5
    assert (m.rules[2].i, m.rules[2].j) == (1, 2)


def test_empty_rules_block():
    m = parse_model("@alphabet tok\n@cells 1\n@output 1\n")
    assert m.rules == () and m.initial == Configuration.tokens([0])


def test_condition_four_is_fatal():
    text = "@alphabet tok\n@env tok\n@cells 1\n@output 1\nrule (tok,0)(tok,0) -> (tok,1)(tok,1) @ 1\n"
    with pytest.raises(ParseError, match="condition 4") as exc:
        parse_model(text)
    assert exc.value.line == 5


@pytest.mark.parametrize("text, line", [
    ("@alphabet tok\n@cells 2\nrule (tok,1)(tok,3) -> (tok,1)(tok,1)\n", 3),
    ("@alphabet tok\n@cells 2\nrule (tok,1)(foo,1) -> (tok,1)(foo,1)\n", 3),
    ("@alphabet tok\n@cells 2 a=1\n\nrule (tok,b)(tok,1) -> (tok,1)(tok,1)\n", 4),
    ("@alphabet tok\n@cells 2\nrule (tok,1)(tok,1) => (tok,1)(tok,1)\n", 3),
    ("@alphabet tok\n@cells 2\n@frobnicate\n", 3),
    ("@alphabet tok\n@cells 2\nrule (tok,1)(tok,1) -> (tok,2)(tok,2) @ -1\n", 3),
    ("@cells 2\n", 1),
])
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as exc:
        parse_model(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


@pytest.mark.parametrize("name", PRESETS)
def test_presets_round_trip(name):
    m = load_preset(name)
    text = serialize_model(m)
    again = parse_model(text)
    assert again == m
    assert serialize_model(again) == text


def test_serialize_empty_model():
    m = parse_model("@alphabet tok\n@cells 1\n")
    text = serialize_model(m)
    assert "rule" not in text and parse_model(text) == m


def test_serialize_with_initial(sqrt2):
    text = serialize_model(sqrt2, Configuration.tokens([7, 3]))
    assert parse_model(text).initial == Configuration.tokens([7, 3])


def test_preset_text_is_the_file():
    assert preset_text("sqrt2.gcps").startswith("#")


def test_sqrt2_ode_document():
    s = parse_ode_system(SQRT2_ODE)
    assert s.n_vars == 2
    assert s.polynomial() == {1: {(1, 1): -1.0, (1, 2): 2.0, (2, 2): 1.0},
                              2: {(1, 1): 1.0, (1, 2): -2.0, (2, 2): -1.0}}


def test_zero_ode_system():
    s = parse_ode_system('{"n": 3, "a": [], "b": []}')
    assert s.polynomial() == {1: {}, 2: {}, 3: {}}


def test_negative_b_is_rejected():
    text = '{"n": 2,\n "a": [],\n "b": [{"i": 1, "j": 2, "value": -1}]}'
    with pytest.raises(ParseError, match="condition 1") as exc:
        parse_ode_system(text)
    assert exc.value.line == 3


def test_ode_index_out_of_range():
    with pytest.raises(ParseError, match="outside"):
        parse_ode_system('{"n": 2, "a": [{"i": 3, "j": 1, "k": 1, "value": 1}], "b": []}')


def test_ode_syntax_error_line():
    with pytest.raises(ParseError) as exc:
        parse_ode_system('{"n": 2,\n "a": [,]}')
    assert exc.value.line == 2


def test_ode_round_trip():
    s = parse_ode_system(SQRT2_ODE)
    assert parse_ode_system(serialize_ode_system(s)) == s
