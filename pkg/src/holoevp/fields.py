"""Affine parametric coefficient fields phi(x, y) = phi0(x) + sum_j y_j phi_j(x).

The built-in decay family has modes amplitude * j^(-sigma) * shape_j(x) with
``fourier`` shapes sin(j pi x) or localized ``bump`` hats.  For that family
the per-mode sup norms c_j = amplitude * j^(-sigma) are exact (the shapes
peak at 1); custom fields sample their sup norms on a grid.

Positivity bookkeeping is worst-case over the parameter cube: at each sample
point the lower envelope is phi0(x) - sum_j |phi_j(x)| (the sign assignment
y_j = -sign(phi_j(x)) attains it), and the certified constants are the grid
extrema of those envelopes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import AssumptionViolation, ConfigurationError

__all__ = [
    "AffineField",
    "FieldAssumptions",
    "make_decay_field",
    "constant_field",
    "eval_field",
    "verify_assumptions",
    "default_sample_grid",
]


def default_sample_grid(n: int = 512) -> np.ndarray:
    """Uniform sup-norm sampling grid on [0, 1] (nodes plus midpoints)."""
    return np.linspace(0.0, 1.0, 2 * n + 1)


@dataclass(frozen=True)
class AffineField:
    """Immutable affine coefficient field with cached mode amplitudes.

    ``amplitudes[j]`` caches the sup norm of mode j on the field's sampling
    set; downstream decay/summability checks run against these numbers.
    """

    phi0: Callable[[np.ndarray], np.ndarray]
    modes: tuple = ()
    amplitudes: tuple = ()
    label: str = ""

    def __post_init__(self):
        if len(self.modes) != len(self.amplitudes):
            raise ConfigurationError(
                f"{len(self.modes)} modes but {len(self.amplitudes)} amplitudes"
            )
        for j, c in enumerate(self.amplitudes, start=1):
            if not (np.isfinite(c) and c > 0.0):
                raise ConfigurationError(
                    f"mode {j} amplitude must be finite and positive, got {c}"
                )

    @property
    def s(self) -> int:
        return len(self.modes)

    @classmethod
    def from_callables(
        cls,
        phi0: Callable,
        modes: Sequence[Callable],
        grid: np.ndarray | None = None,
        label: str = "",
    ) -> "AffineField":
        """Build a field from raw callables, measuring sup norms on ``grid``."""
        grid = default_sample_grid() if grid is None else np.asarray(grid, float)
        amps = tuple(float(np.max(np.abs(m(grid)))) for m in modes)
        return cls(phi0=phi0, modes=tuple(modes), amplitudes=amps, label=label)


def _fourier_mode(j: int, scale: float) -> Callable:
    def mode(x, _j=j, _scale=scale):
        return _scale * np.sin(_j * np.pi * np.asarray(x, float))

    return mode


def _bump_mode(j: int, s: int, scale: float) -> Callable:
    center = (2 * j - 1) / (2 * s)
    half_width = 1.0 / (2 * s)

    def mode(x, _c=center, _w=half_width, _scale=scale):
        x = np.asarray(x, float)
        return _scale * np.maximum(0.0, 1.0 - np.abs(x - _c) / _w)

    return mode


def constant_field(value: float, label: str = "") -> AffineField:
    """Parameter-independent field phi(x, y) = value."""

    def phi0(x, _v=float(value)):
        return np.full_like(np.asarray(x, float), _v)

    return AffineField(phi0=phi0, label=label)


def make_decay_field(
    base: float,
    amplitude: float,
    sigma: float,
    s: int,
    mode_shape: str = "fourier",
    label: str = "",
    require_positive: bool = True,
) -> AffineField:
    """Decay-family field: phi0 = base, phi_j = amplitude * j^(-sigma) * shape_j.

    Requires base > amplitude * sum_{j<=s} j^(-sigma), which guarantees the
    field stays positive over the whole parameter cube (needed wherever the
    field enters as a diffusion or weight coefficient); pass
    ``require_positive=False`` for potential-type fields that only need a
    magnitude bound.  amplitude = 0 or s = 0 degenerates to the constant
    field.
    """
    if sigma <= 1.0:
        raise ConfigurationError(f"decay exponent must exceed 1, got {sigma}")
    if amplitude < 0.0:
        raise ConfigurationError(f"amplitude must be non-negative, got {amplitude}")
    if s < 0:
        raise ConfigurationError(f"truncation must be non-negative, got {s}")
    if amplitude == 0.0 or s == 0:
        return constant_field(base, label=label)
    partial_sum = math.fsum(j ** (-sigma) for j in range(1, s + 1))
    if require_positive and not base > amplitude * partial_sum:
        raise ConfigurationError(
            f"positivity margin violated: base {base} <= amplitude * "
            f"sum_j j^-sigma = {amplitude * partial_sum:.6g}"
        )
    if mode_shape == "fourier":
        modes = tuple(_fourier_mode(j, amplitude * j ** (-sigma)) for j in range(1, s + 1))
    elif mode_shape == "bump":
        modes = tuple(_bump_mode(j, s, amplitude * j ** (-sigma)) for j in range(1, s + 1))
    else:
        raise ConfigurationError(f"unknown mode shape {mode_shape!r}")
    # Shapes peak at exactly 1, so the sup norms are the decay weights.
    amps = tuple(amplitude * j ** (-sigma) for j in range(1, s + 1))

    def phi0(x, _b=float(base)):
        return np.full_like(np.asarray(x, float), _b)

    return AffineField(phi0=phi0, modes=modes, amplitudes=amps, label=label)


def eval_field(f: AffineField, y, x_nodes) -> np.ndarray:
    """Evaluate phi0(x) + sum_{j <= len(y)} y_j phi_j(x) at the given nodes.

    Real parameter vectors return a real array (imaginary part exactly zero);
    complex vectors return complex.
    """
    y = np.asarray(y)
    if y.ndim == 0:
        y = y.reshape(1)
    if len(y) > f.s:
        raise ValueError(f"parameter vector has {len(y)} entries, field has {f.s} modes")
    x = np.asarray(x_nodes, float)
    vals = np.array(f.phi0(x), dtype=complex if np.iscomplexobj(y) else float)
    for j, yj in enumerate(y):
        if yj != 0:
            vals = vals + yj * f.modes[j](x)
    return vals


@dataclass(frozen=True)
class FieldAssumptions:
    """Worst-case coefficient bounds certified on a sampling grid."""

    a_lower: float
    c_lower: float
    a_upper: float
    b_upper: float
    c_upper: float
    grid_size: int
    s: int

    @property
    def d_lower(self) -> float:
        return min(self.a_lower, self.c_lower)


def _envelopes(f: AffineField, s: int, grid: np.ndarray):
    base = np.asarray(f.phi0(grid), float)
    spread = np.zeros_like(base)
    for j in range(min(s, f.s)):
        spread += np.abs(f.modes[j](grid))
    return base - spread, base + spread


def verify_assumptions(
    A: AffineField,
    B: AffineField,
    C: AffineField,
    s: int,
    grid: np.ndarray | None = None,
) -> FieldAssumptions:
    """Certify the cube-wide bounds needed by the elliptic eigenproblem.

    Lower bounds are required (strictly positive) for A and C only; B enters
    through its magnitude bound.  Raises ``AssumptionViolation`` carrying the
    offending grid point when a lower bound fails.
    """
    grid = default_sample_grid() if grid is None else np.asarray(grid, float)
    a_lo, a_hi = _envelopes(A, s, grid)
    c_lo, c_hi = _envelopes(C, s, grid)
    b_lo, b_hi = _envelopes(B, s, grid)
    for name, lo in (("A", a_lo), ("C", c_lo)):
        k = int(np.argmin(lo))
        if lo[k] <= 0.0:
            raise AssumptionViolation(
                f"coefficient {name} loses positivity: lower bound "
                f"{lo[k]:.6g} at x = {grid[k]:.6g}",
                where=float(grid[k]),
            )
    magnitude = lambda lo, hi: float(np.max(np.maximum(np.abs(lo), np.abs(hi))))
    return FieldAssumptions(
        a_lower=float(a_lo.min()),
        c_lower=float(c_lo.min()),
        a_upper=magnitude(a_lo, a_hi),
        b_upper=magnitude(b_lo, b_hi),
        c_upper=magnitude(c_lo, c_hi),
        grid_size=len(grid),
        s=s,
    )
