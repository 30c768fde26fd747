"""TOML run configuration: strict schema, validation, and problem building.

Unknown keys are rejected so a typo cannot silently fall back to a default.
The configuration hash (canonical-JSON SHA-256 prefix) keys every output
row, making merged reports traceable to the exact configuration.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import tomli

from .errors import ConfigurationError
from .fem import Mesh1D
from .fields import make_decay_field
from .problems import LinearEVP, SemilinearEVP

__all__ = ["RunConfig", "load_config", "parse_config", "build_problem", "config_hash"]

_FIELD_KEYS = {"base", "amplitude", "sigma", "shape"}
_SCHEMA = {
    "problem": {"kind", "n_cells", "s"},
    "field": {"A": _FIELD_KEYS, "B": _FIELD_KEYS, "C": _FIELD_KEYS},
    "semilinear": {"eta", "p"},
    "gamma": {"policy", "r", "sigma_g", "fraction"},
    "solver": {"tol", "theta", "max_iters"},
    "seeds": {"master"},
}


@dataclass(frozen=True)
class FieldSpec:
    base: float
    amplitude: float = 0.0
    sigma: float = 2.0
    shape: str = "fourier"


@dataclass(frozen=True)
class RunConfig:
    kind: str
    n_cells: int
    s: int
    fields: dict
    eta: float
    p: int
    gamma_policy: str
    gamma_r: float
    gamma_sigma: float
    gamma_fraction: float
    tol: float
    theta: float
    max_iters: int
    seed: int
    raw: dict

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def config_hash(mapping: dict) -> str:
    """12-hex prefix of the SHA-256 of the canonical JSON encoding."""
    blob = json.dumps(mapping, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _reject_unknown(raw: dict) -> None:
    for key, sub in raw.items():
        if key not in _SCHEMA:
            raise ConfigurationError(f"unknown config section [{key}]")
        if key == "field":
            for name, body in sub.items():
                if name not in _SCHEMA["field"]:
                    raise ConfigurationError(f"unknown field [field.{name}]")
                extra = set(body) - _FIELD_KEYS
                if extra:
                    raise ConfigurationError(
                        f"unknown keys in [field.{name}]: {sorted(extra)}"
                    )
        else:
            extra = set(sub) - _SCHEMA[key]
            if extra:
                raise ConfigurationError(f"unknown keys in [{key}]: {sorted(extra)}")


def parse_config(raw: dict) -> RunConfig:
    if "problem" not in raw:
        raise ConfigurationError("config needs a [problem] section")
    _reject_unknown(raw)
    prob = raw["problem"]
    kind = prob.get("kind", "linear")
    if kind not in ("linear", "semilinear"):
        raise ConfigurationError(f"problem kind must be linear or semilinear, got {kind!r}")
    n_cells = int(prob.get("n_cells", 64))
    if n_cells < 2:
        raise ConfigurationError(f"n_cells must be at least 2, got {n_cells}")
    s = int(prob.get("s", 4))
    if not 0 <= s <= 64:
        raise ConfigurationError(f"truncation s must lie in [0, 64], got {s}")

    fields = {}
    for name, body in raw.get("field", {}).items():
        if "base" not in body:
            raise ConfigurationError(f"[field.{name}] needs a base value")
        spec = FieldSpec(
            base=float(body["base"]),
            amplitude=float(body.get("amplitude", 0.0)),
            sigma=float(body.get("sigma", 2.0)),
            shape=str(body.get("shape", "fourier")),
        )
        if spec.shape not in ("fourier", "bump"):
            raise ConfigurationError(f"[field.{name}] shape must be fourier or bump")
        fields[name] = spec

    semi = raw.get("semilinear", {})
    eta = float(semi.get("eta", 0.0))
    p = int(semi.get("p", 3))
    if eta < 0.0:
        raise ConfigurationError(f"eta must be non-negative, got {eta}")
    if p not in (1, 3, 5):
        raise ConfigurationError(f"p must be one of 1, 3, 5, got {p}")

    gam = raw.get("gamma", {})
    policy = str(gam.get("policy", "power"))
    if policy not in ("power", "geometric"):
        raise ConfigurationError(f"gamma policy must be power or geometric, got {policy!r}")

    sol = raw.get("solver", {})
    tol = float(sol.get("tol", 1e-10))
    if tol < 1e-13:
        raise ConfigurationError(f"solver tol below supported floor 1e-13: {tol}")
    theta = float(sol.get("theta", 0.5))
    if not 0.0 < theta <= 1.0:
        raise ConfigurationError(f"theta must lie in (0, 1], got {theta}")
    max_iters = int(sol.get("max_iters", 500))
    if max_iters < 1:
        raise ConfigurationError("max_iters must be positive")

    return RunConfig(
        kind=kind,
        n_cells=n_cells,
        s=s,
        fields=fields,
        eta=eta,
        p=p,
        gamma_policy=policy,
        gamma_r=float(gam.get("r", 2.0)),
        gamma_sigma=float(gam.get("sigma_g", 1.0)),
        gamma_fraction=float(gam.get("fraction", 0.9)),
        tol=tol,
        theta=theta,
        max_iters=max_iters,
        seed=int(raw.get("seeds", {}).get("master", 0)),
        raw=raw,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        raw = tomli.loads(path.read_text())
    except tomli.TOMLDecodeError as exc:
        raise ConfigurationError(f"malformed TOML in {path}: {exc}") from exc
    return parse_config(raw)


def _build_field(name: str, spec: FieldSpec, s: int):
    # Positivity of A and C is enforced at run time through the certified
    # nodewise check (a numerical failure, exit 3), not at construction:
    # the constructor's sum test is conservative and would misclassify a
    # mathematically violating field as a config syntax problem.
    return make_decay_field(
        spec.base,
        spec.amplitude,
        spec.sigma,
        s,
        mode_shape=spec.shape,
        label=name,
        require_positive=False,
    )


def build_problem(cfg: RunConfig):
    mesh = Mesh1D.uniform(cfg.n_cells)
    if cfg.kind == "linear":
        for name in ("A", "B", "C"):
            if name not in cfg.fields:
                raise ConfigurationError(f"linear problem needs [field.{name}]")
        return LinearEVP(
            A=_build_field("A", cfg.fields["A"], cfg.s),
            B=_build_field("B", cfg.fields["B"], cfg.s),
            C=_build_field("C", cfg.fields["C"], cfg.s),
            mesh=mesh,
            s=cfg.s,
            tol=cfg.tol,
        )
    for name in ("A", "B"):
        if name not in cfg.fields:
            raise ConfigurationError(f"semilinear problem needs [field.{name}]")
    if cfg.fields["A"].amplitude != 0.0:
        raise ConfigurationError(
            "semilinear problems use a parameter-independent A "
            "(set [field.A] amplitude = 0)"
        )
    return SemilinearEVP(
        A=_build_field("A", cfg.fields["A"], 0),
        B=_build_field("B", cfg.fields["B"], cfg.s),
        eta=cfg.eta,
        p=cfg.p,
        mesh=mesh,
        s=cfg.s,
        tol=max(cfg.tol, 1e-12),
        theta=cfg.theta,
        max_iters=cfg.max_iters,
    )
