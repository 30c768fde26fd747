"""Numerical parametric derivatives of the ground eigenvalue and state.

Three independent routes are provided and cross-checked against each other:

* ``deriv_fd``: central finite differences with a Richardson error estimate
  (real-axis oracle, no analytic continuation needed).
* ``deriv_chebyshev``: degree-32 interpolation on the full coordinate segment
  [-1, 1], differentiated through the coefficient recurrence.
* ``deriv_contour``: trapezoid-rule Fourier sums on a circle around the base
  point, d_j^n f = n!/(Q r^n) sum_q f(y + r e^{i phi_q} e_j) e^{-i n phi_q},
  spectrally accurate for analytic branches.  Solves walk the circle by
  eigen-branch continuation and must return to the start (loop closure),
  guarding against branch slips.

Mixed derivatives with support on at most two coordinates tensorize the
contour rule (nested circles, Q^2 solves).  ``radius_estimate`` probes the
empirical analyticity radius by growing the contour until continuation or
closure fails.

Coordinates ``j`` are 1-based throughout, matching the sequence labels in
reports; multi-indices are dense tuples (nu_1, nu_2, ...).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ContinuationError, ContourError, IterationError
from .fem import GroundPair, hnorm
from .problems import pad_parameters

__all__ = [
    "DerivMethod",
    "DerivativeEntry",
    "DerivativeTable",
    "ContourSpec",
    "ContourResult",
    "FdResult",
    "ChebyshevResult",
    "MixedResult",
    "deriv_fd",
    "deriv_contour",
    "deriv_chebyshev",
    "deriv_mixed",
    "radius_estimate",
    "safe_radius",
    "nu_support",
    "nu_factorial",
]

#: Default headroom factor between the contour radius and the analyticity
#: radius it is allowed to use.
THETA_SAFETY = 0.5

_MAX_SUPPORT = 2
_MAX_ORDER = 6
_CLOSURE_TOL = 1e-9


class DerivMethod(str, Enum):
    FD = "fd"
    CHEBYSHEV = "chebyshev"
    CONTOUR = "contour"


def nu_support(nu) -> list:
    """[(j, order)] for the nonzero entries of a dense multi-index, 1-based."""
    return [(j + 1, int(n)) for j, n in enumerate(nu) if n]


def nu_factorial(nu) -> int:
    out = 1
    for n in nu:
        out *= math.factorial(int(n))
    return out


def _check_nu(nu) -> tuple:
    nu = tuple(int(n) for n in nu)
    if any(n < 0 for n in nu):
        raise ValueError(f"multi-index entries must be non-negative: {nu}")
    sup = nu_support(nu)
    if len(sup) > _MAX_SUPPORT:
        raise ValueError(f"multi-index support limited to {_MAX_SUPPORT} coordinates: {nu}")
    if sum(nu) > _MAX_ORDER:
        raise ValueError(f"total order limited to {_MAX_ORDER}: {nu}")
    return nu


@dataclass(frozen=True)
class DerivativeEntry:
    nu: tuple
    value_lambda: complex
    hnorm_du: float
    method: DerivMethod
    est_error: float


@dataclass
class DerivativeTable:
    """Measured parametric derivatives at one base point."""

    y: tuple
    entries: list = field(default_factory=list)

    def add(self, nu, value_lambda, hnorm_du, method, est_error):
        self.entries.append(
            DerivativeEntry(
                nu=_check_nu(nu),
                value_lambda=complex(value_lambda),
                hnorm_du=float(hnorm_du),
                method=DerivMethod(method),
                est_error=float(est_error),
            )
        )

    def rows(self):
        for e in self.entries:
            yield {
                "nu": ",".join(str(n) for n in e.nu),
                "lambda_re": e.value_lambda.real,
                "lambda_im": e.value_lambda.imag,
                "hnorm_du": e.hnorm_du,
                "method": e.method.value,
                "est_error": e.est_error,
            }


# ---------------------------------------------------------------------------
# Radii and continuation
# ---------------------------------------------------------------------------


def safe_radius(problem, j: int, cap: float = 4.0) -> float:
    """Positivity-safe excursion radius for coordinate ``j`` (1-based).

    Going distance r beyond the cube in coordinate j lowers the worst-case
    real part of the coefficients by at most r * c_j, so r = D/(2 c_j) keeps
    half the positivity margin.  For the semilinear problem the potential
    perturbation r * c_j is kept below 1/2, far inside the spectral gap.
    """
    c = problem.c_values()
    if j < 1 or j > len(c):
        raise ValueError(f"coordinate {j} outside 1..{len(c)}")
    cj = c[j - 1]
    if cj == 0.0:
        return cap
    if problem.kind == "linear":
        margin = problem.assumptions().d_lower
        return min(cap, margin / (2.0 * cj))
    return min(cap, 0.5 / cj)


@dataclass(frozen=True)
class ContourSpec:
    """Circle parameters for one coordinate: radius, quadrature count Q
    (power of two, at least 32), and continuation substeps per point."""

    j: int
    radius: float
    Q: int = 32
    substeps: int = 1

    def __post_init__(self):
        if self.j < 1:
            raise ValueError(f"coordinate must be 1-based positive, got {self.j}")
        if not self.radius > 0.0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.Q < 32 or (self.Q & (self.Q - 1)) != 0:
            raise ValueError(f"Q must be a power of two >= 32, got {self.Q}")
        if self.substeps < 1:
            raise ValueError(f"substeps must be >= 1, got {self.substeps}")

    @classmethod
    def for_problem(cls, problem, j: int, theta_safety: float = THETA_SAFETY, Q: int = 32):
        return cls(j=j, radius=theta_safety * safe_radius(problem, j), Q=Q)

    @classmethod
    def for_certificate(cls, cert, j: int, theta_safety: float = THETA_SAFETY, Q: int = 32):
        return cls(j=j, radius=theta_safety * cert.stadium_radius(j), Q=Q)


def _step(problem, y_target, seed_state, depth: int = 5):
    """One continuation step with adaptive bisection.

    ``seed_state`` is (y_from, pair); returns (y_target, pair_at_target).
    """
    y_from, pair = seed_state
    try:
        new = problem.solve(y_target, seed=pair)
        return (y_target, new)
    except (ContinuationError, IterationError) as exc:
        if depth <= 0:
            raise ContourError(
                f"continuation failed near parameter {np.round(y_target, 6)}: {exc}"
            ) from exc
        mid = 0.5 * (np.asarray(y_from) + np.asarray(y_target))
        state = _step(problem, mid, (y_from, pair), depth - 1)
        return _step(problem, y_target, state, depth - 1)


def _circle_solves(problem, y, spec: ContourSpec, base: GroundPair):
    """Solve around the circle; returns (lams, u_matrix, closure diagnostics)."""
    y = np.asarray(y, float)
    s = len(y)
    jj = spec.j - 1
    phis = 2.0 * np.pi * np.arange(spec.Q) / spec.Q

    def at(offset):
        z = y.astype(complex).copy()
        z[jj] += offset
        return z

    # Enter the circle along the real axis, optionally through substeps.
    state = (y, base)
    for k in range(1, spec.substeps + 1):
        state = _step(problem, at(spec.radius * k / spec.substeps), state)
    start_state = state
    lams = np.empty(spec.Q, dtype=complex)
    us = np.empty((spec.Q, len(base.u)), dtype=complex)
    lams[0] = state[1].lam
    us[0] = state[1].u
    for q in range(1, spec.Q):
        state = _step(problem, at(spec.radius * np.exp(1j * phis[q])), state)
        lams[q] = state[1].lam
        us[q] = state[1].u
    # Loop closure: continue from the last point back to the start.
    closed = _step(problem, at(spec.radius), state)
    scale_l = max(1.0, abs(lams[0]))
    closure_lambda = abs(closed[1].lam - lams[0]) / scale_l
    du = closed[1].u - us[0]
    closure_u = float(np.linalg.norm(du)) / max(1.0, float(np.linalg.norm(us[0])))
    if closure_lambda > _CLOSURE_TOL or closure_u > _CLOSURE_TOL:
        raise ContourError(
            f"loop closure failed in coordinate {spec.j} at radius "
            f"{spec.radius:.3g}: dlambda {closure_lambda:.2e}, du {closure_u:.2e}"
        )
    return lams, us, closure_lambda, closure_u, start_state


@dataclass(frozen=True)
class ContourResult:
    """Contour-rule derivatives 0..n_max in one coordinate plus diagnostics."""

    j: int
    orders: tuple
    d_lambda: np.ndarray
    d_u_hnorm: np.ndarray
    radius: float
    Q: int
    closure_lambda: float
    closure_u: float

    def __iter__(self):
        return iter(zip(self.orders, self.d_lambda, self.d_u_hnorm))

    def est_error(self, n: int) -> float:
        return max(self.closure_lambda, 1e-12 * (1.0 + abs(self.d_lambda[0])))


def deriv_contour(problem, y, spec: ContourSpec, n_max: int) -> ContourResult:
    """Derivatives d_j^n lambda and |d_j^n u|_{H1} for n = 0..n_max.

    The base point must be real; the circle must stay inside the region
    where seeded continuation converges (shrink the radius otherwise).
    """
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    if spec.Q < 4 * max(n_max, 1):
        raise ValueError(f"Q = {spec.Q} too small for order {n_max} (need >= 4n)")
    y = pad_parameters(y, problem.s)
    if np.iscomplexobj(y):
        raise ValueError("contour derivatives are taken at real base points")
    base = problem.solve(y)
    lams, us, cl, cu, _ = _circle_solves(problem, y, spec, base)
    lam_hat = np.fft.fft(lams)
    u_hat = np.fft.fft(us, axis=0)
    orders = tuple(range(n_max + 1))
    d_lambda = np.empty(n_max + 1, dtype=complex)
    d_u = np.empty(n_max + 1, dtype=float)
    for n in orders:
        factor = math.factorial(n) / (spec.Q * spec.radius ** n)
        d_lambda[n] = factor * lam_hat[n]
        d_u[n] = hnorm(factor * u_hat[n], problem.mesh)
    return ContourResult(
        j=spec.j,
        orders=orders,
        d_lambda=d_lambda,
        d_u_hnorm=d_u,
        radius=spec.radius,
        Q=spec.Q,
        closure_lambda=cl,
        closure_u=cu,
    )


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

# Second-order central stencils: {offset: coefficient}, scaled by h^-n.
_STENCILS = {
    1: {1: 0.5, -1: -0.5},
    2: {1: 1.0, 0: -2.0, -1: 1.0},
    3: {2: 0.5, 1: -1.0, -1: 1.0, -2: -0.5},
    4: {2: 1.0, 1: -4.0, 0: 6.0, -1: -4.0, -2: 1.0},
}


@dataclass(frozen=True)
class FdResult:
    d_lambda: float
    d_u_hnorm: float
    est_lambda: float
    est_u: float
    h: float


def deriv_fd(problem, y, j: int, n: int, h: float | None = None) -> FdResult:
    """Central finite difference of order-matched width, with a Richardson
    error estimate from comparing steps h and h/2 (second-order stencils,
    estimate |D_{h/2} - D_h| / 3; the h/2 value is returned).

    The whole stencil must stay inside the parameter cube.
    """
    if n not in _STENCILS:
        raise ValueError(f"finite differences support orders 1..4, got {n}")
    y = pad_parameters(y, problem.s)
    if j < 1 or j > problem.s:
        raise ValueError(f"coordinate {j} outside 1..{problem.s}")
    reach = max(abs(m) for m in _STENCILS[n])
    if h is None:
        h = 0.01 * safe_radius(problem, j)
        room = 1.0 - abs(y[j - 1])
        if room > 0.0:
            h = min(h, room / (reach + 0.5))
    lo, hi = y[j - 1] - reach * h, y[j - 1] + reach * h
    if lo < -1.0 or hi > 1.0 or h <= 0.0:
        raise ValueError(
            f"stencil [{lo:.4g}, {hi:.4g}] leaves the cube in coordinate {j}"
        )

    base = problem.solve(y)
    cache = {0: base}

    def solve_at(units):
        # units counts half-steps of h/2
        if units not in cache:
            z = y.copy()
            z[j - 1] += units * (h / 2.0)
            cache[units] = problem.solve(z, seed=base)
        return cache[units]

    def apply(step_units):
        dl = 0.0
        du = np.zeros_like(base.u)
        hh = step_units * (h / 2.0)
        for m, c in _STENCILS[n].items():
            pair = solve_at(m * step_units)
            dl += c * pair.lam
            du = du + c * pair.u
        return dl / hh ** n, du / hh ** n

    dl_h, du_h = apply(2)
    dl_h2, du_h2 = apply(1)
    est_l = abs(dl_h2 - dl_h) / 3.0
    est_u = hnorm(du_h2 - du_h, problem.mesh) / 3.0
    return FdResult(
        d_lambda=float(np.real(dl_h2)),
        d_u_hnorm=hnorm(du_h2, problem.mesh),
        est_lambda=float(est_l),
        est_u=float(est_u),
        h=h / 2.0,
    )


# ---------------------------------------------------------------------------
# Chebyshev interpolation route
# ---------------------------------------------------------------------------


def _cheb_transform(values: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients of the interpolant through f(cos(pi k/deg)),
    k = 0..deg (rows may be vectors)."""
    deg = values.shape[0] - 1
    k = np.arange(deg + 1)
    w = np.ones(deg + 1)
    w[0] = w[-1] = 0.5
    cosmat = np.cos(np.pi * np.outer(k, k) / deg)
    weighted = values * (w[:, None] if values.ndim > 1 else w)
    coeff = (2.0 / deg) * cosmat.dot(weighted)
    coeff[0] *= 0.5
    coeff[-1] *= 0.5
    return coeff


def _cheb_differentiate(coeff: np.ndarray) -> np.ndarray:
    """Coefficient recurrence for the derivative of a Chebyshev series."""
    deg = coeff.shape[0] - 1
    out = np.zeros_like(coeff)
    for k in range(deg - 1, -1, -1):
        prev = out[k + 2] if k + 2 <= deg else 0.0
        out[k] = prev + 2.0 * (k + 1) * coeff[k + 1]
    out[0] *= 0.5
    return out


def _cheb_eval(coeff: np.ndarray, t: float):
    """Clenshaw evaluation at t in [-1, 1]."""
    b1 = np.zeros_like(coeff[0])
    b2 = np.zeros_like(coeff[0])
    for k in range(coeff.shape[0] - 1, 0, -1):
        b1, b2 = 2.0 * t * b1 - b2 + coeff[k], b1
    return t * b1 - b2 + coeff[0]


@dataclass(frozen=True)
class ChebyshevResult:
    orders: tuple
    d_lambda: np.ndarray
    d_u_hnorm: np.ndarray
    est_lambda: np.ndarray
    degree: int


def deriv_chebyshev(problem, y, j: int, n_max: int, degree: int = 32) -> ChebyshevResult:
    """Derivatives at y_j from a degree-``degree`` Chebyshev interpolant of
    the eigen-branch along the full segment [-1, 1] in coordinate j.

    Solves walk the Chebyshev points by continuation; the error estimate is
    the magnitude of the trailing coefficients of the differentiated series
    (interpolation truncation), evaluated conservatively.
    """
    if degree < 8:
        raise ValueError("degree too small to be useful")
    if n_max > degree // 4:
        raise ValueError(f"n_max {n_max} too large for degree {degree}")
    y = pad_parameters(y, problem.s)
    t_nodes = np.cos(np.pi * np.arange(degree + 1) / degree)
    lam_vals = np.empty(degree + 1)
    u_vals = None
    state = None
    for k, t in enumerate(t_nodes):
        z = y.copy()
        z[j - 1] = t
        if state is None:
            pair = problem.solve(z)
            state = (z, pair)
        else:
            state = _step(problem, z, state)
        pair = state[1]
        lam_vals[k] = float(np.real(pair.lam))
        if u_vals is None:
            u_vals = np.empty((degree + 1, len(pair.u)))
        u_vals[k] = np.real(pair.u)

    lam_coeff = _cheb_transform(lam_vals)
    u_coeff = _cheb_transform(u_vals)
    t0 = float(y[j - 1])
    orders = tuple(range(n_max + 1))
    d_lambda = np.empty(n_max + 1)
    d_u = np.empty(n_max + 1)
    est = np.empty(n_max + 1)
    lc, uc = lam_coeff, u_coeff
    for n in orders:
        d_lambda[n] = float(_cheb_eval(lc, t0))
        d_u[n] = hnorm(_cheb_eval(uc, t0), problem.mesh)
        tail = np.abs(lc[-4:]).max() if len(lc) >= 4 else np.abs(lc).max()
        est[n] = 4.0 * tail
        lc = _cheb_differentiate(lc)
        uc = _cheb_differentiate(uc)
    return ChebyshevResult(
        orders=orders, d_lambda=d_lambda, d_u_hnorm=d_u, est_lambda=est, degree=degree
    )


# ---------------------------------------------------------------------------
# Mixed derivatives (tensorized contours)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MixedResult:
    nu: tuple
    d_lambda: complex
    d_u_hnorm: float
    radii: tuple
    Q: int


def deriv_mixed(problem, y, nu, Q: int = 32, radii=None, theta_safety: float = THETA_SAFETY) -> MixedResult:
    """Mixed derivative over a multi-index with support on <= 2 coordinates.

    Single-coordinate indices reduce to ``deriv_contour``; two-coordinate
    indices run nested circles (Q^2 + 2Q solves), with loop closure checked
    on the outer circle and on every inner circle.
    """
    nu = _check_nu(nu)
    sup = nu_support(nu)
    y = pad_parameters(y, problem.s)

    if radii is None:
        radii = tuple(theta_safety * safe_radius(problem, j) for j, _ in sup)
    else:
        radii = tuple(float(r) for r in radii)
        if len(radii) != len(sup):
            raise ValueError(f"{len(sup)} support coordinates but {len(radii)} radii")

    if not sup:
        pair = problem.solve(y)
        return MixedResult(nu=nu, d_lambda=pair.lam, d_u_hnorm=hnorm(pair.u, problem.mesh), radii=(), Q=Q)

    if len(sup) == 1:
        (j, n), = sup
        res = deriv_contour(problem, y, ContourSpec(j=j, radius=radii[0], Q=Q), n_max=n)
        return MixedResult(nu=nu, d_lambda=complex(res.d_lambda[n]), d_u_hnorm=float(res.d_u_hnorm[n]), radii=radii, Q=Q)

    (j1, n1), (j2, n2) = sup
    r1, r2 = radii
    if Q < 4 * max(n1, n2):
        raise ValueError(f"Q = {Q} too small for orders {(n1, n2)}")
    base = problem.solve(y)
    phis = 2.0 * np.pi * np.arange(Q) / Q

    def offset(yvec, j, val):
        z = np.asarray(yvec, complex).copy()
        z[j - 1] += val
        return z

    # Outer circle centers in coordinate j1 (with closure).
    spec1 = ContourSpec(j=j1, radius=r1, Q=Q)
    lam_out, u_out, _, _, start_state = _circle_solves(problem, y, spec1, base)

    inner_lam = np.empty((Q, Q), dtype=complex)
    inner_u = np.empty((Q, Q, len(base.u)), dtype=complex)
    for a in range(Q):
        center = offset(y, j1, r1 * np.exp(1j * phis[a]))
        center_pair = GroundPair(lam=lam_out[a], u=u_out[a], residual=0.0, norm_check=0.0)
        state = (center, center_pair)
        first = None
        for b in range(Q):
            zb = offset(center, j2, r2 * np.exp(1j * phis[b]))
            state = _step(problem, zb, state)
            if b == 0:
                first = state
            inner_lam[a, b] = state[1].lam
            inner_u[a, b] = state[1].u
        closed = _step(problem, offset(center, j2, r2), state)
        dl = abs(closed[1].lam - inner_lam[a, 0]) / max(1.0, abs(inner_lam[a, 0]))
        if dl > _CLOSURE_TOL:
            raise ContourError(
                f"inner loop closure failed at outer angle {phis[a]:.3f} "
                f"(coordinate {j2}, radius {r2:.3g}): {dl:.2e}"
            )

    fac2 = math.factorial(n2) / (Q * r2 ** n2)
    g_lam = fac2 * np.fft.fft(inner_lam, axis=1)[:, n2]
    g_u = fac2 * np.fft.fft(inner_u, axis=1)[:, n2, :]
    fac1 = math.factorial(n1) / (Q * r1 ** n1)
    d_lam = fac1 * np.fft.fft(g_lam)[n1]
    d_u_vec = fac1 * np.fft.fft(g_u, axis=0)[n1]
    return MixedResult(
        nu=nu,
        d_lambda=complex(d_lam),
        d_u_hnorm=hnorm(d_u_vec, problem.mesh),
        radii=radii,
        Q=Q,
    )


# ---------------------------------------------------------------------------
# Empirical analyticity radius
# ---------------------------------------------------------------------------


def radius_estimate(
    problem,
    y,
    j: int,
    r_min: float = 1e-3,
    r_cap: float = 8.0,
    Q: int = 32,
    bisections: int = 6,
) -> float:
    """Largest contour radius (doubling then bisection) at which the circle
    in coordinate ``j`` closes: continuation succeeds all the way around,
    the loop returns to its start, and the zeroth Fourier coefficient
    reproduces the base eigenvalue (which fails when a singularity is
    enclosed).  Returns the best validated radius (a lower bound); 0.0 when
    even ``r_min`` fails; ``r_cap`` when nothing fails below the cap.
    """
    y = pad_parameters(y, problem.s)
    base = problem.solve(y)
    scale = max(1.0, abs(base.lam))

    def closes(r: float) -> bool:
        try:
            res = deriv_contour(problem, y, ContourSpec(j=j, radius=r, Q=Q), n_max=0)
        except (ContourError, ContinuationError, IterationError):
            return False
        return abs(res.d_lambda[0] - base.lam) <= 1e-6 * scale

    if not closes(r_min):
        return 0.0
    good, bad = r_min, None
    r = r_min
    while bad is None:
        r = 2.0 * r
        if r >= r_cap:
            if closes(r_cap):
                return r_cap
            bad = r_cap
            break
        if closes(r):
            good = r
        else:
            bad = r
    for _ in range(bisections):
        mid = 0.5 * (good + bad)
        if closes(mid):
            good = mid
        else:
            bad = mid
    return good
