import json

import numpy as np
import pytest

from pucci.config import ConfigError, parse_config
from pucci.errors import InvalidSpecError
from pucci.expressions import parse
from pucci.problems import build_problem, domain_mask, grid_function


def test_expression_values():
    e = parse("1 + 2*x0 - r**2 + abs(x1)/4", 2)
    p = np.array([[0.5, -2.0], [0.0, 0.0]])
    np.testing.assert_allclose(e(p), [1 + 1 - 4.25 + 0.5, 1.0])
    b = parse("ball(1, 0.5, 0) - ball(0.25)", 2)
    np.testing.assert_allclose(b(np.array([[1.0, 0.0], [0.0, 0.0], [1.6, 0.0]])), [1, 0, 0])
    assert parse("x", 1)(np.array([2.0])) == pytest.approx(2.0)


def test_far_field_and_bound():
    assert parse("ball(2) - ball(1)", 1).far_field() == (0.0, 2.0)
    assert parse("3", 2).far_field() == (3.0, 0.0)
    assert parse("x0*ball(1)", 1).far_field() == (0.0, 1.0)
    assert parse("x0", 1).far_field() is None
    assert parse("2*ball(1) - 1", 1).bound() == 3.0
    assert parse("x0**2*ball(1)", 1).bound() == pytest.approx(1.0)
    assert parse("r", 2).bound() == np.inf


@pytest.mark.parametrize("text", ["x2", "x0 / x0", "x0**-1", "x0**0.5", "exp(x0)", "ball(-1)",
                                  "ball(1, x0)", "1/0", "'a'", "x0 if x0 else 1", "import os"])
def test_expression_rejects(text):
    with pytest.raises(InvalidSpecError):
        parse(text, 2)


def test_grid_function_and_mask():
    u = grid_function("ball(1)", 2, 2.0, 16)
    assert u.exterior.is_constant and u.exterior.value == 0.0
    m = domain_mask(u, "ball(1)", positive_coordinate=0)
    x = u.coords()
    assert np.all(x[m][:, 0] > 0) and np.all(np.linalg.norm(x[m], axis=1) < 1)


KERNEL = {"phi": {"family": "power", "beta": 0.5}, "lambda": 1.0, "Lambda": 2.0, "alpha": 1.2}


def cfg(**over):
    d = {"command": "verify-kernel",
         "kernel": {"phi": {"family": "power", "beta": 0.5}, "lambda": 1.0, "Lambda": 2.0, "alpha": 1.2}}
    d.update(over)
    return json.dumps(d)


def test_parse_valid_config():
    c = parse_config(cfg())
    assert c.schema_version == 1 and c.seed == 0
    spec = c.kernel.build()
    assert spec.alpha == 1.2 and spec.kernel_class == "A3"


def errors_of(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    return info.value.errors


def test_config_errors_have_paths():
    bad = json.loads(cfg())
    bad["kernel"]["alpha"] = 2.5
    (path, msg), = errors_of(json.dumps(bad))
    assert path == "kernel" and "alpha must lie in (beta, 2)" in msg
    bad["kernel"]["alpha"] = 1.2
    bad["kernel"]["colour"] = "red"
    assert errors_of(json.dumps(bad))[0][0] == "kernel.colour"
    assert "missing block" in errors_of(json.dumps({"command": "barrier", "kernel": KERNEL}))[0][1]
    assert errors_of("{not json")[0][0] == ""
    assert "schema_version" in errors_of(cfg(schema_version=2))[0][1]
    a4 = json.loads(cfg())
    a4["kernel"]["class"] = "A4"
    a4["kernel"]["phi"] = {"family": "tabulated", "beta": 0.5, "t_nodes": [1, 2], "values": [2, 1]}
    assert "non-decreasing" in errors_of(json.dumps(a4))[0][1]


def test_solve_block_builds_problem():
    c = parse_config(json.dumps({
        "command": "solve", "kernel": json.loads(cfg())["kernel"],
        "solve": {"grid": {"dim": 1, "R": 1.0, "N": 32}, "f": "-1", "g": "0",
                  "operator": {"type": "bellman", "kernels": [{"type": "linear", "c_stable": 1.0},
                                                              {"type": "linear", "c_stable": 2.0, "c_phi": 1.0}]}}}))
    s = c.solve
    prob = build_problem(s.grid, s.domain, s.f, s.g, s.operator, c.kernel.build())
    assert prob.mask.sum() == 31
    bad = json.loads(c.model_dump_json(by_alias=True))
    bad["solve"]["f"] = "x9"
    assert errors_of(json.dumps(bad))[0][0] == "solve"
