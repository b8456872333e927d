from importlib import resources

import pytest
from hypothesis import given
from hypothesis import strategies as st

from schauderlab.config import (ConfigError, format_value, load_scenario, load_schema, parse_config,
                                parse_value)

SCENARIOS = sorted(p for p in resources.files("schauderlab").joinpath("scenarios").iterdir()
                   if p.name.endswith(".cfg") and p.name != "schema.cfg")

BASE = """\
scenario.id = demo
scenario.kind = plaplace
problem.p = 2.5
grid.n = 9
grid.lower = 0.0, 0.0
grid.upper = 1.0, 1.0
grid.t_end = 0.1
grid.dt = 0.01
data.kind = expression
data.expression = x + y
"""


def test_shipped_scenarios_parse_and_round_trip():
    assert len(SCENARIOS) >= 10
    for path in SCENARIOS:
        sc = load_scenario(path)
        assert sc.id == path.name[:-4]
        assert parse_config(sc.to_text()) == sc


def test_defaults_and_access():
    sc = parse_config(BASE)
    assert sc["problem.mu"] == 0.0 and sc["problem.k"] == 1
    assert sc.checks == [] and sc["problem.q"] is None
    assert sc["grid.n"] == (9,)
    with pytest.raises(KeyError):
        sc.get("no.such.key")


def test_with_values():
    sc = parse_config(BASE)
    sc2 = sc.with_values(problem__k=3, grid__dt=0.005)
    assert sc2["problem.k"] == 3 and sc2["grid.dt"] == 0.005
    assert sc["problem.k"] == 1


@pytest.mark.parametrize("extra,line,fragment", [
    ("bogus.key = 1\n", 11, "unknown key"),
    ("problem.mu = abc\n", 11, "bad value"),
    ("problem.p = 3\n", 11, "duplicate key"),
    ("just words\n", 11, "expected 'key = value'"),
    ("checks = nonsense\n", 11, "unknown checker"),
    ("check.gluing.budget = 1\n", 11, "not listed"),
    ("problem.mu = 1.5\n", 11, "[0, 1]"),
])
def test_errors_carry_line_numbers(extra, line, fragment):
    with pytest.raises(ConfigError) as err:
        parse_config(BASE + extra, "demo.cfg")
    assert err.value.line == line
    assert fragment in err.value.message
    assert str(err.value).startswith(f"demo.cfg:{line}:")


def test_axis_count_rule():
    with pytest.raises(ConfigError) as err:
        parse_config(BASE.replace("grid.n = 9", "grid.n = 9, 9, 9"))
    assert err.value.line == 4


def test_missing_required_key():
    with pytest.raises(ConfigError) as err:
        parse_config(BASE.replace("grid.dt = 0.01\n", ""))
    assert "grid.dt" in err.value.message


def test_checker_needs_its_parameters():
    with pytest.raises(ConfigError) as err:
        parse_config(BASE + "checks = gluing\n")
    assert "check.gluing" in err.value.message and err.value.line == 11


def test_dnl_rules():
    dnl = BASE.replace("plaplace", "dnl")
    with pytest.raises(ConfigError):
        parse_config(dnl)
    with pytest.raises(ConfigError):
        parse_config(dnl + "problem.q = 1.0\n")
    assert parse_config(dnl + "problem.q = 1.5\n")["problem.q"] == 1.5


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError) as err:
        load_scenario(tmp_path / "missing.cfg")
    assert err.value.line is None


def test_schema_types_parse_their_defaults():
    for entry in load_schema().values():
        if entry.default not in ("-", "~"):
            assert parse_value(entry.type, format_value(entry.type, entry.default)) == entry.default


floats = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(st.one_of(
    st.tuples(st.just("float"), floats),
    st.tuples(st.just("int"), st.integers(-10 ** 9, 10 ** 9)),
    st.tuples(st.just("bool"), st.booleans()),
    st.tuples(st.just("floats"), st.lists(floats, min_size=1, max_size=5).map(tuple)),
    st.tuples(st.just("ints"), st.lists(st.integers(0, 10 ** 6), min_size=1, max_size=5).map(tuple)),
))
def test_value_round_trip(pair):
    typ, value = pair
    assert parse_value(typ, format_value(typ, value)) == value


@given(st.floats(1.05, 5.0), st.floats(0.0, 1.0), st.integers(1, 3), st.integers(3, 200),
       st.floats(1e-4, 1.0))
def test_scenario_round_trip(p, mu, k, n, dt):
    sc = parse_config(BASE).with_values(problem__p=p, problem__mu=mu, problem__k=k, grid__n=(n,),
                                        grid__dt=dt)
    assert parse_config(sc.to_text()) == sc
