"""P1 finite elements on (0, 1) with homogeneous Dirichlet conditions.

Coefficients are sampled at cell midpoints and treated as piecewise constant,
which makes the stiffness and mass integrals exact for P1 elements: assembly
linearity identities hold to machine precision and are unit-testable.

The generalized ground pair K u = lambda M u is computed by shifted inverse
iteration on the tridiagonal pencil, with a pivoted tridiagonal LU.  Complex
coefficients (analytic continuation in the parameters) are supported through
the same path; complex pencils are non-Hermitian, so the solver tracks a
seeded eigen-branch and never sorts complex eigenvalues.

Normalization: the mass-normalization u^T M u = 1 is enforced with the
*bilinear* (unconjugated) product, which is the analytic continuation of the
real L2 normalization and keeps the continued eigenvector a holomorphic
function of the parameters (contour derivatives rely on this).  For real
pencils it coincides with the conjugated norm, and the sign is fixed by a
positive mass-weighted mean.

Determinism: after convergence every solve is finished by a canonical polish
stage (two inverse-iteration steps from a fixed start vector, at a shift
rounded to 8 significant digits), so the returned pair is a function of the
pencil alone, independent of the starting point or seed chain.  Seeded and
cold solves of the same pencil return bit-identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AssemblyError, ContinuationError, IterationError

__all__ = [
    "Mesh1D",
    "SparseSym",
    "GroundPair",
    "assemble",
    "stiffness_matrix",
    "mass_matrix",
    "ground_pair_linear",
    "ground_pair_semilinear",
    "hnorm",
    "power_integral",
    "stiffness_quadratic",
    "mass_quadratic",
    "midpoint_values",
    "eigen_gap",
]

_PIVOT_REL = 1e-14  # |pivot| below this times the matrix scale is singular


@dataclass(frozen=True)
class Mesh1D:
    """Sorted node set on [0, 1] including both endpoints."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or len(nodes) < 3:
            raise ValueError("mesh needs at least 3 nodes (one interior DoF)")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise ValueError("mesh must span [0, 1] exactly")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("mesh nodes must be strictly increasing")

    @classmethod
    def uniform(cls, n_cells: int) -> "Mesh1D":
        if n_cells < 2:
            raise ValueError("need at least 2 cells")
        return cls(np.linspace(0.0, 1.0, n_cells + 1))

    @property
    def n_cells(self) -> int:
        return len(self.nodes) - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def h(self) -> float:
        return float(self.widths.max())

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]

    @property
    def n_dof(self) -> int:
        return len(self.nodes) - 2

    def sample_points(self) -> np.ndarray:
        """Nodes plus midpoints, the default sup-norm/positivity grid."""
        return np.sort(np.concatenate([self.nodes, self.midpoints]))


@dataclass(frozen=True)
class SparseSym:
    """Symmetric tridiagonal matrix stored as main and off diagonal.

    Symmetry is structural: one off-diagonal array serves as both the sub-
    and super-diagonal, so K == K^T holds entrywise by construction, also
    for complex (non-Hermitian) data.
    """

    diag: np.ndarray
    off: np.ndarray

    def __post_init__(self):
        diag = np.asarray(self.diag)
        off = np.asarray(self.off)
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "off", off)
        if len(off) != max(len(diag) - 1, 0):
            raise ValueError("off-diagonal length must be n - 1")

    @property
    def n(self) -> int:
        return len(self.diag)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.diag) or np.iscomplexobj(self.off)

    def matvec(self, u: np.ndarray) -> np.ndarray:
        v = self.diag * u
        if self.n > 1:
            v[:-1] += self.off * u[1:]
            v[1:] += self.off * u[:-1]
        return v

    def combine(self, other: "SparseSym", scale=1.0) -> "SparseSym":
        """self + scale * other."""
        return SparseSym(self.diag + scale * other.diag, self.off + scale * other.off)

    def to_csr(self):
        """CSR triplet (indptr, indices, data) of the full tridiagonal."""
        n = self.n
        indptr = np.zeros(n + 1, dtype=np.int64)
        indices = []
        data = []
        for i in range(n):
            if i > 0:
                indices.append(i - 1)
                data.append(self.off[i - 1])
            indices.append(i)
            data.append(self.diag[i])
            if i < n - 1:
                indices.append(i + 1)
                data.append(self.off[i])
            indptr[i + 1] = len(indices)
        return indptr, np.asarray(indices, dtype=np.int64), np.asarray(data)

    def to_dense(self) -> np.ndarray:
        out = np.diag(self.diag)
        if self.n > 1:
            out += np.diag(self.off, 1) + np.diag(self.off, -1)
        return out

    def scale(self) -> float:
        m = float(np.max(np.abs(self.diag))) if self.n else 0.0
        if len(self.off):
            m = max(m, float(np.max(np.abs(self.off))))
        return m


def midpoint_values(u: np.ndarray, mesh: Mesh1D) -> np.ndarray:
    """Cell-midpoint values of the P1 interpolant with zero boundary values."""
    full = np.zeros(len(mesh.nodes), dtype=np.asarray(u).dtype)
    full[1:-1] = u
    return 0.5 * (full[:-1] + full[1:])


def _check_values(name: str, vals: np.ndarray, n_cells: int) -> np.ndarray:
    vals = np.asarray(vals)
    if vals.shape != (n_cells,):
        raise AssemblyError(f"{name} must hold one value per cell ({n_cells}), got {vals.shape}")
    if not np.all(np.isfinite(vals.view(float) if vals.dtype.kind == "c" else vals)):
        raise AssemblyError(f"{name} contains non-finite values")
    return vals


def stiffness_matrix(mesh: Mesh1D, a_vals) -> SparseSym:
    """Dirichlet stiffness for -d/dx (a du/dx), a piecewise constant per cell."""
    a = _check_values("A", np.asarray(a_vals), mesh.n_cells)
    h = mesh.widths
    w = a / h
    diag = w[:-1] + w[1:]
    off = -w[1:-1]
    return SparseSym(diag, off)


def mass_matrix(mesh: Mesh1D, c_vals) -> SparseSym:
    """Weighted mass for c(x) u v, c piecewise constant per cell (exact P1)."""
    c = _check_values("C", np.asarray(c_vals), mesh.n_cells)
    w = c * mesh.widths
    diag = (w[:-1] + w[1:]) / 3.0
    off = w[1:-1] / 6.0
    return SparseSym(diag, off)


def assemble(mesh: Mesh1D, a_vals, b_vals, c_vals):
    """Pencil (K, M) with K = stiffness(A) + mass(B) and M = mass(C)."""
    K = stiffness_matrix(mesh, a_vals).combine(mass_matrix(mesh, b_vals))
    M = mass_matrix(mesh, c_vals)
    return K, M


# ---------------------------------------------------------------------------
# Tridiagonal LU with partial pivoting (list-based for speed in inner loops)
# ---------------------------------------------------------------------------


class TriLU:
    """Pivoted LU of a tridiagonal matrix given by (sub, diag, super) arrays.

    Raises ``ContinuationError`` when a pivot falls below the relative
    threshold, which in seeded eigen-continuation means the step was too
    large (the shift landed on an eigenvalue).
    """

    def __init__(self, sub, diag, sup, scale=None):
        n = len(diag)
        d = list(diag)
        u1 = list(sup) + [0.0]
        u2 = [0.0] * n
        mult = [0.0] * max(n - 1, 0)
        swap = [False] * max(n - 1, 0)
        a = list(sub)
        if scale is None:
            scale = max(
                max(abs(x) for x in d),
                max((abs(x) for x in a), default=0.0),
                max((abs(x) for x in sup), default=0.0),
            )
        floor = _PIVOT_REL * max(scale, 1e-300)
        for i in range(n - 1):
            di = d[i]
            ai = a[i]
            if abs(di) >= abs(ai):
                if abs(di) < floor:
                    raise ContinuationError(
                        f"near-singular pivot {abs(di):.3e} at row {i} "
                        f"(threshold {floor:.3e})"
                    )
                m = ai / di
                d[i + 1] = d[i + 1] - m * u1[i]
                u1[i + 1] = u1[i + 1] - m * u2[i]
            else:
                # swap rows i and i+1; row i+1 brings (a_i, b_{i+1}, c_{i+1})
                m = di / ai
                old_u1, old_u2 = u1[i], u2[i]
                d[i] = ai
                u1[i] = d[i + 1]
                u2[i] = u1[i + 1]
                d[i + 1] = old_u1 - m * u1[i]
                u1[i + 1] = old_u2 - m * u2[i]
                swap[i] = True
            mult[i] = m
        if abs(d[n - 1]) < floor:
            raise ContinuationError(
                f"near-singular pivot {abs(d[n - 1]):.3e} at last row"
            )
        self.n = n
        self._d = d
        self._u1 = u1
        self._u2 = u2
        self._mult = mult
        self._swap = swap

    def solve(self, rhs) -> np.ndarray:
        n = self.n
        r = list(np.asarray(rhs))
        mult, swap = self._mult, self._swap
        for i in range(n - 1):
            if swap[i]:
                r[i], r[i + 1] = r[i + 1], r[i]
            r[i + 1] = r[i + 1] - mult[i] * r[i]
        d, u1, u2 = self._d, self._u1, self._u2
        x = r
        x[n - 1] = r[n - 1] / d[n - 1]
        if n > 1:
            x[n - 2] = (r[n - 2] - u1[n - 2] * x[n - 1]) / d[n - 2]
        for i in range(n - 3, -1, -1):
            x[i] = (r[i] - u1[i] * x[i + 1] - u2[i] * x[i + 2]) / d[i]
        return np.asarray(x)


def _shifted_lu(K: SparseSym, M: SparseSym, shift) -> TriLU:
    diag = K.diag - shift * M.diag
    off = K.off - shift * M.off
    return TriLU(off.tolist(), diag.tolist(), off.tolist(), scale=max(K.scale(), abs(shift) * M.scale(), 1e-300))


# ---------------------------------------------------------------------------
# Ground eigenpair
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroundPair:
    """Ground eigenvalue and mass-normalized eigenvector (interior DoFs)."""

    lam: complex
    u: np.ndarray
    residual: float
    norm_check: float
    iterations: int = 0


def _bilinear(u: np.ndarray, v: np.ndarray):
    # Unconjugated product; holomorphic in both arguments.
    return np.dot(u, v)


def _canonical_start(n: int) -> np.ndarray:
    return np.sin(np.pi * np.arange(1, n + 1) / (n + 1))


def _normalize(u: np.ndarray, M: SparseSym) -> np.ndarray:
    q = _bilinear(u, M.matvec(u))
    if abs(q) < 1e-4:
        raise ContinuationError(
            "mass normalization degenerate (|u^T M u| << 1); step too large"
        )
    return u / np.sqrt(q)


def _fix_gauge(u: np.ndarray, M: SparseSym, ref: np.ndarray | None):
    if ref is None:
        if float(np.sum(M.matvec(u)).real) < 0.0:
            return -u
        return u
    if _bilinear(ref, M.matvec(u)).real < 0.0:
        return -u
    return u


def _rayleigh(u: np.ndarray, K: SparseSym, M: SparseSym):
    return _bilinear(u, K.matvec(u)) / _bilinear(u, M.matvec(u))


def _residual(u: np.ndarray, lam, K: SparseSym, M: SparseSym) -> float:
    r = K.matvec(u) - lam * M.matvec(u)
    scale = float(np.linalg.norm(K.matvec(u)))
    return float(np.linalg.norm(r)) / max(scale, 1e-300)


def _round_sig(x: float, digits: int = 8) -> float:
    if x == 0.0:
        return 0.0
    q = 10.0 ** (math.floor(math.log10(abs(x))) - digits + 1)
    return round(x / q) * q


def _canonical_shift(lam) -> complex | float:
    if np.iscomplexobj(np.asarray(lam)):
        lam = complex(lam)
        m = max(abs(lam.real), abs(lam.imag))
        if m == 0.0:
            return 0.0
        q = 10.0 ** (math.floor(math.log10(m)) - 7)
        return round(lam.real / q) * q + 1j * (round(lam.imag / q) * q)
    return _round_sig(float(np.real(lam)))


def _factor_near(K, M, shift):
    """Factor K - shift*M, nudging the shift off an exact eigenvalue."""
    bump = 0.0
    for attempt in range(3):
        try:
            return _shifted_lu(K, M, shift + bump), shift + bump
        except ContinuationError:
            if attempt == 2:
                raise
            bump = (abs(shift) + 1.0) * (1e-9 * 10.0 ** attempt)
    raise AssertionError("unreachable")


def ground_pair_linear(
    K: SparseSym,
    M: SparseSym,
    seed_pair: GroundPair | None = None,
    tol: float = 1e-10,
    max_iters: int = 200,
    shift0: float = 0.0,
    canonical: bool = True,
    norm_matrix: SparseSym | None = None,
    best_effort: bool = False,
) -> GroundPair:
    """Ground eigenpair of K u = lambda M u by shifted inverse iteration.

    Cold starts (real pencils only) begin at ``shift0`` with a fixed smooth
    start vector and switch to Rayleigh-quotient shifts once roughly
    converged.  With ``seed_pair`` the iteration starts at the seed (eigen-
    branch continuation); complex pencils require a seed, since "smallest"
    is meaningless for complex eigenvalues and branch tracking replaces it.

    The returned vector satisfies u^T N u = 1 with N = ``norm_matrix`` (the
    plain L2 mass when the weight C is not identically one; defaults to M),
    so the normalization is independent of joint coefficient scalings.

    ``canonical=True`` appends the polish stage described in the module
    docstring, making the result independent of the starting point.
    """
    if tol < 1e-13:
        raise ValueError(f"tolerance below supported floor 1e-13: {tol}")
    is_complex = K.is_complex or M.is_complex
    n = K.n
    if seed_pair is None:
        if is_complex:
            raise ValueError(
                "complex pencil requires a seed pair (branch continuation)"
            )
        u = _canonical_start(n)
        shift = shift0
    else:
        u = np.array(seed_pair.u, copy=True)
        if is_complex and not np.iscomplexobj(u):
            u = u.astype(complex)
        shift = seed_pair.lam
    u = _fix_gauge(_normalize(u, M), M, None if seed_pair is None else seed_pair.u)

    # With the polish stage the loop only needs to pin lambda well below the
    # 8-digit canonical rounding; without it the loop must meet tol itself.
    target = min(1e-10, max(tol, 1e-12) * 1e2) if canonical else tol
    rqi_switch = 1e-4
    lam = _rayleigh(u, K, M)
    resid = _residual(u, lam, K, M)
    iterations = 0
    stalled = 0
    for iterations in range(1, max_iters + 1):
        if resid <= target:
            break
        use = lam if (resid < rqi_switch or seed_pair is not None) else shift
        lu, _ = _factor_near(K, M, use)
        w = lu.solve(M.matvec(u))
        w = _normalize(w, M)
        u = _fix_gauge(w, M, u)
        lam = _rayleigh(u, K, M)
        new_resid = _residual(u, lam, K, M)
        # Roundoff floor: the residual stops improving once K u cancellation
        # noise dominates.  best_effort callers take the floor value.
        stalled = stalled + 1 if new_resid > 0.5 * resid else 0
        resid = new_resid
        if best_effort and stalled >= 4:
            break
    else:
        if not best_effort:
            raise IterationError(
                f"inverse iteration did not reach {target:.1e} in {max_iters} steps",
                residual=resid,
            )

    if canonical:
        lam_hat = _canonical_shift(lam)
        lu, _ = _factor_near(K, M, lam_hat)
        v = _canonical_start(n)
        if is_complex:
            v = v.astype(complex)
        for _ in range(2):
            v = _normalize(lu.solve(M.matvec(v)), M)
        v = _fix_gauge(v, M, None if not is_complex else u)
        lam_v = _rayleigh(v, K, M)
        resid_v = _residual(v, lam_v, K, M)
        extra = 0
        while resid_v > tol and extra < 8:
            lu2, _ = _factor_near(K, M, _canonical_shift(lam_v))
            v = _normalize(lu2.solve(M.matvec(v)), M)
            v = _fix_gauge(v, M, None if not is_complex else u)
            lam_v = _rayleigh(v, K, M)
            resid_v = _residual(v, lam_v, K, M)
            extra += 1
        if resid_v <= max(tol, resid):
            u, lam, resid = v, lam_v, resid_v

    if resid > tol and not best_effort:
        raise IterationError(
            f"residual {resid:.3e} above tolerance {tol:.1e}", residual=resid
        )
    if not is_complex:
        lam = float(np.real(lam))
    N = M if norm_matrix is None else norm_matrix
    if norm_matrix is not None:
        # Rescale by a near-unit factor; the gauge fixed above is preserved.
        u = u / np.sqrt(_bilinear(u, N.matvec(u)))
    norm_check = float(abs(_bilinear(u, N.matvec(u)) - 1.0))
    return GroundPair(lam=lam, u=u, residual=resid, norm_check=norm_check, iterations=iterations)


# ---------------------------------------------------------------------------
# Discrete norms and quadratic forms
# ---------------------------------------------------------------------------


def hnorm(u: np.ndarray, mesh: Mesh1D) -> float:
    """Discrete H1_0 seminorm sqrt(sum_cells |du|^2 / h) of interior DoFs."""
    u = np.asarray(u)
    full = np.zeros(len(mesh.nodes), dtype=u.dtype)
    full[1:-1] = u
    du = np.diff(full)
    return float(np.sqrt(np.sum(np.abs(du) ** 2 / mesh.widths).real))


def stiffness_quadratic(u: np.ndarray, mesh: Mesh1D, a_vals) -> float:
    """Energy u^T stiffness(A) u with conjugation (real for real data)."""
    u = np.asarray(u)
    full = np.zeros(len(mesh.nodes), dtype=u.dtype)
    full[1:-1] = u
    du = np.diff(full)
    return float(np.sum(np.asarray(a_vals) * np.abs(du) ** 2 / mesh.widths).real)


def mass_quadratic(u: np.ndarray, mesh: Mesh1D, w_vals) -> float:
    """Weighted integral of u_h^2 with cellwise-constant weight (exact P1)."""
    u = np.asarray(u)
    full = np.zeros(len(mesh.nodes), dtype=u.dtype)
    full[1:-1] = u
    ua, ub = full[:-1], full[1:]
    cell = (np.abs(ua) ** 2 + (ua.conj() * ub).real + np.abs(ub) ** 2) / 3.0
    return float(np.sum(np.asarray(w_vals) * mesh.widths * cell).real)


def power_integral(u: np.ndarray, mesh: Mesh1D, q: int) -> float:
    """Discrete integral of u^q: midpoint-sampled u^(q-2) times exact u_h^2.

    This is the quadrature convention used by the semilinear operator, so
    the energy identity lambda = a(u,u) + int B u^2 + eta int u^(p+1) holds
    at the solver's fixed point to solver tolerance.
    """
    if q < 2 or q % 2 != 0:
        raise ValueError(f"power integral defined for even q >= 2, got {q}")
    mid = midpoint_values(np.asarray(u).real, mesh)
    return mass_quadratic(u, mesh, mid ** (q - 2))


# ---------------------------------------------------------------------------
# Semilinear ground state (damped self-consistent iteration)
# ---------------------------------------------------------------------------


def ground_pair_semilinear(
    mesh: Mesh1D,
    a_vals,
    b_vals,
    eta: float,
    p: int,
    seed: GroundPair | None = None,
    tol: float = 1e-9,
    theta: float = 0.5,
    max_iters: int = 500,
) -> GroundPair:
    """Ground state of -div(A grad u) + B u + eta u^p = lambda u, ||u|| = 1.

    The power term is linearized about the current iterate through its
    midpoint values, u^p ~ (u_k)^(p-1) u, the linear ground pair of the
    frozen operator is solved, and iterates are mixed with damping ``theta``.
    The reported residual is that of the discrete nonlinear equation at the
    returned vector, and lambda comes from the Rayleigh identity
    lambda = a(u,u) + int B u^2 + eta int u^(p+1).
    """
    if eta < 0.0:
        raise ValueError(f"power coefficient eta must be non-negative, got {eta}")
    if p not in (1, 3, 5):
        raise ValueError(f"exponent p must be one of 1, 3, 5, got {p}")
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"damping theta must lie in (0, 1], got {theta}")
    a_vals = np.asarray(a_vals)
    b_vals = np.asarray(b_vals)
    M = mass_matrix(mesh, np.ones(mesh.n_cells))
    K_lin = stiffness_matrix(mesh, a_vals).combine(mass_matrix(mesh, b_vals))
    cold_shift = min(0.0, float(np.min(b_vals.real))) - 1.0
    if eta == 0.0:
        return ground_pair_linear(K_lin, M, seed_pair=seed, tol=max(tol, 1e-13), shift0=cold_shift)

    is_complex = np.iscomplexobj(a_vals) or np.iscomplexobj(b_vals)

    def frozen_operator(u):
        mid = midpoint_values(u, mesh)
        return stiffness_matrix(mesh, a_vals).combine(
            mass_matrix(mesh, b_vals + eta * mid ** (p - 1))
        )

    if seed is None:
        pair = ground_pair_linear(K_lin, M, tol=1e-10, shift0=cold_shift, canonical=False)
        u, lam = pair.u, pair.lam
    else:
        u = np.array(seed.u, copy=True)
        if is_complex and not np.iscomplexobj(u):
            u = u.astype(complex)
        lam = seed.lam
    u = _fix_gauge(_normalize(u, M), M, None if seed is None else seed.u)

    inner_tol = max(min(tol * 1e-2, 1e-11), 1e-12)
    resid = np.inf
    for it in range(1, max_iters + 1):
        K = frozen_operator(u)
        lam = _rayleigh(u, K, M)
        resid = _residual(u, lam, K, M)
        if resid <= tol:
            if not is_complex:
                lam = float(np.real(lam))
            norm_check = float(abs(_bilinear(u, M.matvec(u)) - 1.0))
            return GroundPair(lam=lam, u=u, residual=resid, norm_check=norm_check, iterations=it)
        inner = ground_pair_linear(
            K, M,
            seed_pair=GroundPair(lam=lam, u=u, residual=resid, norm_check=0.0),
            tol=inner_tol,
            canonical=False,
            best_effort=True,
        )
        u_new = _fix_gauge(inner.u, M, u)
        u = _fix_gauge(_normalize((1.0 - theta) * u + theta * u_new, M), M, u)
    raise IterationError(
        f"self-consistent iteration stalled at residual {resid:.3e} "
        f"after {max_iters} sweeps",
        residual=float(resid),
    )


def eigen_gap(K: SparseSym, M: SparseSym, ground: GroundPair, tol: float = 1e-8) -> float:
    """Diagnostic gap lambda_2 - lambda_1 of a real pencil via deflated
    inverse iteration (M-orthogonalized against the ground vector)."""
    if K.is_complex or M.is_complex:
        raise ValueError("gap diagnostic is defined for real pencils only")
    n = K.n
    u1 = ground.u
    Mu1 = M.matvec(u1)
    denom = float(np.dot(u1, Mu1))

    def deflate(v):
        return v - (np.dot(Mu1, v) / denom) * u1

    v = deflate(np.cos(np.pi * np.arange(1, n + 1) / (n + 1)))
    v = _normalize(v, M)
    lam2 = _rayleigh(v, K, M)
    shift = ground.lam * 2.0
    for _ in range(100):
        lu, _ = _factor_near(K, M, shift)
        v = deflate(lu.solve(M.matvec(v)))
        v = _normalize(v, M)
        lam_new = _rayleigh(v, K, M)
        resid = _residual(v, lam_new, K, M)
        if abs(lam_new - lam2) <= tol * max(1.0, abs(lam_new)) and resid < 1e-6:
            lam2 = lam_new
            break
        lam2 = lam_new
        shift = lam2
    return float(lam2 - ground.lam)
