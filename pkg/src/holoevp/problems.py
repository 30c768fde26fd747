"""Problem bundles: coefficient fields plus a mesh, solvable at a parameter.

``LinearEVP`` is the generalized eigenproblem
-div(A(y) grad u) + B(y) u = lambda C(y) u on (0, 1) with Dirichlet ends;
``SemilinearEVP`` is -div(A grad u) + B(y) u + eta u^p = lambda u with a
parameter-independent A.  Both accept real parameter vectors in [-1, 1]^s
and complex ones (analytic continuation) when a seed pair for eigen-branch
continuation is supplied.

Returned eigenvectors are L2-normalized (u^T mass(1) u = 1, bilinear for
complex parameters) so normalization is invariant under joint coefficient
scalings; real ground states carry a positive sign gauge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .fem import (
    GroundPair,
    Mesh1D,
    assemble,
    ground_pair_linear,
    ground_pair_semilinear,
    hnorm,
    mass_matrix,
)
from .fields import AffineField, FieldAssumptions, eval_field, verify_assumptions

__all__ = ["LinearEVP", "SemilinearEVP", "ProductIntegrand", "pad_parameters"]


def pad_parameters(y, s: int) -> np.ndarray:
    """Zero-pad a parameter vector to length ``s`` (tail coordinates at 0)."""
    y = np.atleast_1d(np.asarray(y))
    if len(y) > s:
        raise ValueError(f"parameter vector has {len(y)} entries, truncation is {s}")
    out = np.zeros(s, dtype=complex if np.iscomplexobj(y) else float)
    out[: len(y)] = y
    return out


@dataclass(frozen=True)
class LinearEVP:
    """Affine-parametric linear eigenproblem at truncation dimension ``s``."""

    A: AffineField
    B: AffineField
    C: AffineField
    mesh: Mesh1D
    s: int
    tol: float = 1e-10
    label: str = "linear"

    def __post_init__(self):
        if self.s < 0:
            raise ConfigurationError(f"truncation must be non-negative, got {self.s}")
        # Cache the L2 normalization mass and the positivity certificate.
        object.__setattr__(self, "_norm", mass_matrix(self.mesh, np.ones(self.mesh.n_cells)))
        object.__setattr__(self, "_assumptions", None)

    @property
    def kind(self) -> str:
        return "linear"

    def assumptions(self) -> FieldAssumptions:
        if self.__dict__["_assumptions"] is None:
            cert = verify_assumptions(
                self.A, self.B, self.C, self.s, grid=self.mesh.sample_points()
            )
            object.__setattr__(self, "_assumptions", cert)
        return self.__dict__["_assumptions"]

    def c_values(self) -> np.ndarray:
        """Shared mode amplitudes c_j = max over the three fields (0 where
        a field has fewer modes)."""
        c = np.zeros(self.s)
        for f in (self.A, self.B, self.C):
            for j in range(min(self.s, f.s)):
                c[j] = max(c[j], f.amplitudes[j])
        return c

    def coefficients(self, y):
        y = pad_parameters(y, self.s)
        mid = self.mesh.midpoints
        # Fields may carry fewer modes than the shared truncation; their
        # missing modes are identically zero.
        return (
            eval_field(self.A, y[: self.A.s], mid),
            eval_field(self.B, y[: self.B.s], mid),
            eval_field(self.C, y[: self.C.s], mid),
        )

    def cold_shift(self, b_vals, c_vals) -> float:
        """Shift strictly below the real spectrum: 0 for a positive-definite
        stiffness-plus-potential, else below min(B/C)."""
        lo = float(np.min(b_vals.real / c_vals.real))
        return min(0.0, lo - 1.0)

    def solve(self, y, seed: GroundPair | None = None, tol: float | None = None) -> GroundPair:
        a_vals, b_vals, c_vals = self.coefficients(y)
        K, M = assemble(self.mesh, a_vals, b_vals, c_vals)
        shift0 = 0.0
        if seed is None:
            shift0 = self.cold_shift(b_vals, c_vals)
        return ground_pair_linear(
            K,
            M,
            seed_pair=seed,
            tol=self.tol if tol is None else tol,
            shift0=shift0,
            norm_matrix=self.__dict__["_norm"],
        )

    def evaluate(self, y, functional, seed: GroundPair | None = None):
        """(value, pair) of a scalar functional at parameter ``y``.

        ``functional`` is ``"lambda"`` or ``("G_u", g)`` with a dual vector g
        applied through the L2 mass: G(u) = g^T (mass(1) u).
        """
        pair = self.solve(y, seed=seed)
        if functional == "lambda":
            return pair.lam, pair
        if isinstance(functional, tuple) and functional[0] == "G_u":
            g = np.asarray(functional[1])
            return float(np.dot(g, self.__dict__["_norm"].matvec(pair.u.real))), pair
        raise ValueError(f"unknown functional {functional!r}")

    def state_norm(self, pair: GroundPair) -> float:
        return hnorm(pair.u, self.mesh)


@dataclass(frozen=True)
class SemilinearEVP:
    """Semilinear ground-state problem with parameter-independent diffusion."""

    A: AffineField
    B: AffineField
    eta: float
    p: int
    mesh: Mesh1D
    s: int
    tol: float = 1e-9
    theta: float = 0.5
    max_iters: int = 500
    label: str = "semilinear"

    def __post_init__(self):
        if self.A.s != 0:
            raise ConfigurationError(
                "semilinear problems require a parameter-independent A "
                f"(got {self.A.s} modes)"
            )
        if self.eta < 0.0:
            raise ConfigurationError(f"eta must be non-negative, got {self.eta}")
        if self.s < 0:
            raise ConfigurationError(f"truncation must be non-negative, got {self.s}")
        object.__setattr__(self, "_norm", mass_matrix(self.mesh, np.ones(self.mesh.n_cells)))

    @property
    def kind(self) -> str:
        return "semilinear"

    def assumptions(self) -> FieldAssumptions:
        grid = self.mesh.sample_points()
        a_lo = float(np.min(np.asarray(self.A.phi0(grid), float)))
        if a_lo <= 0.0:
            raise ConfigurationError(f"diffusion coefficient not positive: min {a_lo:.6g}")
        b_lo, b_hi = _field_envelope(self.B, self.s, grid)
        return FieldAssumptions(
            a_lower=a_lo,
            c_lower=1.0,
            a_upper=float(np.max(np.abs(np.asarray(self.A.phi0(grid), float)))),
            b_upper=max(abs(b_lo), abs(b_hi)),
            c_upper=1.0,
            grid_size=len(grid),
            s=self.s,
        )

    def c_values(self) -> np.ndarray:
        c = np.zeros(self.s)
        for j in range(min(self.s, self.B.s)):
            c[j] = self.B.amplitudes[j]
        return c

    def solve(self, y, seed: GroundPair | None = None, tol: float | None = None) -> GroundPair:
        y = pad_parameters(y, self.s)
        mid = self.mesh.midpoints
        a_vals = np.asarray(self.A.phi0(mid), float)
        b_vals = eval_field(self.B, y[: self.B.s], mid)
        return ground_pair_semilinear(
            self.mesh,
            a_vals,
            b_vals,
            eta=self.eta,
            p=self.p,
            seed=seed,
            tol=self.tol if tol is None else tol,
            theta=self.theta,
            max_iters=self.max_iters,
        )

    def evaluate(self, y, functional, seed: GroundPair | None = None):
        pair = self.solve(y, seed=seed)
        if functional == "lambda":
            return pair.lam, pair
        if isinstance(functional, tuple) and functional[0] == "G_u":
            g = np.asarray(functional[1])
            return float(np.dot(g, self.__dict__["_norm"].matvec(pair.u.real))), pair
        raise ValueError(f"unknown functional {functional!r}")

    def state_norm(self, pair: GroundPair) -> float:
        return hnorm(pair.u, self.mesh)


def _field_envelope(f: AffineField, s: int, grid: np.ndarray):
    base = np.asarray(f.phi0(grid), float)
    spread = np.zeros_like(base)
    for j in range(min(s, f.s)):
        spread += np.abs(f.modes[j](grid))
    return float(np.min(base - spread)), float(np.max(base + spread))


@dataclass(frozen=True)
class ProductIntegrand:
    """PDE-free smooth integrand prod_j (1 + c_j y_j), mean exactly 1 on any
    symmetric cube.  Used to exercise the estimator harness at known rates."""

    c: tuple

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(x) for x in self.c))

    @property
    def kind(self) -> str:
        return "integrand"

    @property
    def s(self) -> int:
        return len(self.c)

    def evaluate(self, y, functional, seed=None):
        if functional != "lambda":
            raise ValueError("product integrand only exposes the scalar value")
        y = np.asarray(y, float)
        value = float(np.prod(1.0 + np.asarray(self.c[: len(y)]) * y))
        return value, None
