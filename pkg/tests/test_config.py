"""Strict config-schema behaviour."""

import pytest

from holoevp.config import build_problem, config_hash, parse_config
from holoevp.errors import ConfigurationError


def minimal(kind="linear"):
    cfg = {
        "problem": {"kind": kind, "n_cells": 16, "s": 2},
        "field": {
            "A": {"base": 1.0, "amplitude": 0.0},
            "B": {"base": 0.0, "amplitude": 0.1},
        },
    }
    if kind == "linear":
        cfg["field"]["C"] = {"base": 1.0}
    else:
        cfg["semilinear"] = {"eta": 1.0, "p": 3}
    return cfg


def test_round_trip_minimal():
    cfg = parse_config(minimal())
    problem = build_problem(cfg)
    assert problem.kind == "linear" and problem.s == 2
    assert len(cfg.hash) == 12


def test_unknown_section_rejected():
    raw = minimal()
    raw["solvers"] = {"tol": 1e-9}
    with pytest.raises(ConfigurationError):
        parse_config(raw)


def test_unknown_field_key_rejected():
    raw = minimal()
    raw["field"]["A"]["ampl"] = 0.1
    with pytest.raises(ConfigurationError):
        parse_config(raw)


def test_unknown_field_name_rejected():
    raw = minimal()
    raw["field"]["D"] = {"base": 1.0}
    with pytest.raises(ConfigurationError):
        parse_config(raw)


@pytest.mark.parametrize(
    "section,key,value",
    [
        ("problem", "kind", "parabolic"),
        ("problem", "n_cells", 1),
        ("problem", "s", 65),
        ("semilinear", "eta", -1.0),
        ("semilinear", "p", 4),
        ("gamma", "policy", "harmonic"),
        ("solver", "tol", 1e-14),
        ("solver", "theta", 0.0),
        ("solver", "max_iters", 0),
    ],
)
def test_value_validation(section, key, value):
    raw = minimal("semilinear" if section == "semilinear" else "linear")
    raw.setdefault(section, {})[key] = value
    with pytest.raises(ConfigurationError):
        parse_config(raw)


def test_semilinear_requires_constant_diffusion():
    raw = minimal("semilinear")
    raw["field"]["A"]["amplitude"] = 0.1
    with pytest.raises(ConfigurationError):
        build_problem(parse_config(raw))


def test_missing_field_section():
    raw = minimal()
    del raw["field"]["C"]
    with pytest.raises(ConfigurationError):
        build_problem(parse_config(raw))


def test_field_needs_base():
    raw = minimal()
    del raw["field"]["A"]["base"]
    with pytest.raises(ConfigurationError):
        parse_config(raw)


def test_hash_is_canonical_and_sensitive():
    a = minimal()
    b = minimal()
    assert config_hash(a) == config_hash(b)
    b["problem"]["n_cells"] = 32
    assert config_hash(a) != config_hash(b)
