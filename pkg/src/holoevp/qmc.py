"""Randomly shifted rank-1 lattice rules and eigenpair statistics.

The estimator is the shift-averaged equal-weight rule

    Q_{N,s} f = (1/N) sum_{k=0}^{N-1} f({k z / N + Delta} - 1/2)

over parameters distributed uniformly on [-1/2, 1/2]^s, with R independent
random shifts Delta; the pooled mean and the shift spread give the estimate
and its RMS error.  Generating vectors come from the classic component-by-
component construction minimizing the shift-averaged worst-case error in a
weighted space with product weights and the Bernoulli-B2 kernel
omega(x) = 2 pi^2 (x^2 - x + 1/6) (zero mean, so the error formula reduces
to mean_k prod_j (1 + w_j omega({k z_j / N})) - 1).

The construction is the plain O(s N^2) search (no FFT acceleration), capped
at N <= 8192; that keeps desk-scale studies under a minute and permits
exhaustive-search cross-checks.

PDE evaluations may be chained: lattice points sorted by their first
coordinate are solved with eigen-branch seeding, which cuts solver cost;
because every solve is finished by the canonical polish stage, seeded and
cold evaluations agree bit for bit.  Shift replicas are independent and are
fanned out over a thread pool capped by the HOLO_EVP_THREADS environment
variable (the result does not depend on the worker count).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import EstimateError

__all__ = [
    "is_prime",
    "primes_in",
    "omega_kernel",
    "cbc_construct",
    "cbc_error_squared",
    "LatticeRule",
    "make_lattice_rule",
    "QmcEstimate",
    "estimate",
    "mc_estimate",
    "ConvergenceStudy",
    "convergence_study",
    "TruncationStudy",
    "truncation_study",
    "fit_log_slope",
]

N_CAP = 8192
S_CAP = 64


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def primes_in(lo: int, hi: int) -> list:
    return [n for n in range(lo, hi + 1) if is_prime(n)]


def omega_kernel(x: np.ndarray) -> np.ndarray:
    """Bernoulli-B2 kernel 2 pi^2 (x^2 - x + 1/6) on [0, 1); zero mean."""
    x = np.asarray(x, float)
    return 2.0 * np.pi ** 2 * (x * x - x + 1.0 / 6.0)


def _check_weights(weights, s: int) -> np.ndarray:
    w = np.asarray(weights, float)
    if len(w) < s:
        raise ValueError(f"need {s} weights, got {len(w)}")
    w = w[:s]
    if np.any(w <= 0.0):
        raise ValueError("weights must be strictly positive")
    if np.any(np.diff(w) > 0.0):
        raise ValueError("weights must be non-increasing")
    return w


def _canonical_mean(vals: np.ndarray) -> float:
    # Sort before reducing: the result then depends only on the value
    # multiset, not on the candidate-dependent gather order.  Candidates
    # related by group symmetry (all of them in the first coordinate) tie
    # exactly, so ties break deterministically to the smallest candidate.
    return float(np.mean(np.sort(vals)))


def cbc_error_squared(N: int, z, weights) -> float:
    """Shift-averaged worst-case error (squared) of the rule (N, z) from the
    product formula, computed from scratch.  Serves as the independent
    oracle for the incremental construction."""
    z = np.asarray(z, dtype=np.int64)
    w = _check_weights(weights, len(z))
    k = np.arange(N, dtype=np.int64)
    prod = np.ones(N)
    wtab = omega_kernel(np.arange(N) / N)
    for j in range(len(z)):
        prod = prod * (1.0 + w[j] * wtab[(k * int(z[j])) % N])
    return _canonical_mean(prod) - 1.0


def cbc_construct(N: int, s: int, weights) -> np.ndarray:
    """Component-by-component generating vector for prime N.

    Greedy per-coordinate minimization of the shift-averaged worst-case
    error; ties resolve to the smallest candidate, so the first coordinate
    is always 1 (all residues are equivalent there).
    """
    if not is_prime(N):
        raise ValueError(f"modulus must be prime, got {N}")
    if not 2 <= N <= N_CAP:
        raise ValueError(f"modulus {N} outside [2, {N_CAP}]")
    if not 1 <= s <= S_CAP:
        raise ValueError(f"dimension {s} outside [1, {S_CAP}]")
    w = _check_weights(weights, s)
    k = np.arange(N, dtype=np.int64)
    wtab = omega_kernel(np.arange(N) / N)
    prod = np.ones(N)
    z = np.empty(s, dtype=np.int64)
    for d in range(s):
        best_val = np.inf
        best_z = 1
        for cand in range(1, N):
            val = _canonical_mean(prod * (1.0 + w[d] * wtab[(k * cand) % N])) - 1.0
            if val < best_val:
                best_val = val
                best_z = cand
        z[d] = best_z
        prod = prod * (1.0 + w[d] * wtab[(k * best_z) % N])
    return z


@dataclass(frozen=True)
class LatticeRule:
    """Generating vector, modulus, and reproducible random shifts."""

    N: int
    s: int
    z: tuple
    shifts: np.ndarray
    seed: int

    def __post_init__(self):
        z = tuple(int(v) for v in self.z)
        object.__setattr__(self, "z", z)
        shifts = np.asarray(self.shifts, float)
        object.__setattr__(self, "shifts", shifts)
        if len(z) != self.s:
            raise ValueError(f"generating vector length {len(z)} != s = {self.s}")
        for j, zj in enumerate(z, start=1):
            if not 1 <= zj < self.N or math.gcd(zj, self.N) != 1:
                raise ValueError(f"z_{j} = {zj} not a unit modulo {self.N}")
        if shifts.ndim != 2 or shifts.shape[1] != self.s:
            raise ValueError(f"shift array must be (R, {self.s})")
        if shifts.shape[0] < 8:
            raise ValueError(f"need at least 8 shifts, got {shifts.shape[0]}")

    @property
    def R(self) -> int:
        return int(self.shifts.shape[0])

    def points(self, r: int) -> np.ndarray:
        """Shifted lattice points in [-1/2, 1/2]^s for replica r."""
        k = np.arange(self.N, dtype=np.int64)[:, None]
        z = np.asarray(self.z, dtype=np.int64)[None, :]
        frac = (k * z / self.N + self.shifts[r][None, :]) % 1.0
        return frac - 0.5


def make_lattice_rule(N: int, s: int, weights, R: int = 16, seed: int = 0) -> LatticeRule:
    z = cbc_construct(N, s, weights)
    shifts = np.random.default_rng(seed).random((R, s))
    return LatticeRule(N=N, s=s, z=tuple(int(v) for v in z), shifts=shifts, seed=seed)


@dataclass(frozen=True)
class QmcEstimate:
    """Pooled estimate with the spread of the per-shift means."""

    shift_means: tuple
    mean: float
    rms: float
    n_evals: int
    N: int
    s: int
    R: int
    seed: int
    label: str = "lambda"

    @classmethod
    def from_shift_means(cls, means, N, s, seed, label) -> "QmcEstimate":
        means = np.asarray(means, float)
        R = len(means)
        pooled = float(np.mean(means))
        rms = float(np.std(means, ddof=1) / np.sqrt(R)) if R > 1 else 0.0
        return cls(
            shift_means=tuple(float(m) for m in means),
            mean=pooled,
            rms=rms,
            n_evals=N * R,
            N=N,
            s=s,
            R=R,
            seed=seed,
            label=label,
        )


def _functional_label(functional) -> str:
    if functional == "lambda":
        return "lambda"
    if isinstance(functional, tuple) and functional[0] == "G_u":
        return "G_u"
    raise ValueError(f"unknown functional {functional!r}")


def _worker_count() -> int:
    raw = os.environ.get("HOLO_EVP_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _shift_mean(problem, functional, points, mode: str) -> float:
    N = points.shape[0]
    values = np.empty(N)
    if mode == "seeded":
        order = np.argsort(points[:, 0], kind="stable")
        seed_pair = None
        for idx in order:
            try:
                value, seed_pair = problem.evaluate(points[idx], functional, seed=seed_pair)
            except Exception as exc:
                raise EstimateError(
                    f"solve failed at lattice point {np.round(points[idx], 6)}: {exc}"
                ) from exc
            values[idx] = value
    elif mode == "cold":
        for idx in range(N):
            try:
                value, _ = problem.evaluate(points[idx], functional, seed=None)
            except Exception as exc:
                raise EstimateError(
                    f"solve failed at lattice point {np.round(points[idx], 6)}: {exc}"
                ) from exc
            values[idx] = value
    else:
        raise ValueError(f"unknown evaluation mode {mode!r}")
    return float(np.mean(values))


def estimate(problem, functional, rule: LatticeRule, mode: str = "seeded") -> QmcEstimate:
    """Shift-averaged lattice estimate of E[lambda] or E[G(u)].

    ``mode="seeded"`` chains solves along the first coordinate;
    ``mode="cold"`` solves every point independently.  Both return
    bit-identical estimates (canonical solver polish); the seeded chain is
    simply faster.
    """
    label = _functional_label(functional)
    workers = _worker_count()
    if workers == 1:
        means = [_shift_mean(problem, functional, rule.points(r), mode) for r in range(rule.R)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_shift_mean, problem, functional, rule.points(r), mode)
                for r in range(rule.R)
            ]
            means = [f.result() for f in futures]
    return QmcEstimate.from_shift_means(means, rule.N, rule.s, rule.seed, label)


def mc_estimate(problem, functional, N: int, R: int, s: int, seed: int = 0) -> QmcEstimate:
    """Plain Monte Carlo baseline with the same replication layout."""
    label = _functional_label(functional)
    rng = np.random.default_rng(seed)
    means = []
    for _ in range(R):
        pts = rng.uniform(-0.5, 0.5, size=(N, s))
        vals = np.empty(N)
        for i in range(N):
            vals[i], _ = problem.evaluate(pts[i], functional, seed=None)
        means.append(float(np.mean(vals)))
    return QmcEstimate.from_shift_means(means, N, s, seed, label)


def fit_log_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x), ignoring zero y."""
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    keep = ys > 0.0
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(xs[keep]), np.log(ys[keep]), 1)[0])


@dataclass(frozen=True)
class ConvergenceStudy:
    rows: tuple  # (N, estimate, rms)
    alpha_obs: float

    def csv_rows(self, s: int, R: int):
        seen_n, seen_r = [], []
        for N, est, rms in self.rows:
            seen_n.append(N)
            seen_r.append(rms)
            partial = fit_log_slope(seen_n, seen_r) if len(seen_n) >= 2 else float("nan")
            yield {
                "N": N,
                "s": s,
                "R": R,
                "estimate": repr(est),
                "rms": repr(rms),
                "alpha_obs_partial": repr(partial),
            }


def convergence_study(
    problem,
    functional,
    N_list,
    s: int,
    weights,
    R: int = 16,
    seed: int = 0,
    mode: str = "seeded",
) -> ConvergenceStudy:
    """RMS decay against N with freshly constructed generating vectors.

    ``alpha_obs`` is the fitted slope of log RMS versus log N (negative for
    converging rules).
    """
    N_list = [int(N) for N in N_list]
    if len(N_list) < 4:
        raise ValueError("need at least 4 moduli for a slope fit")
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("moduli must be strictly increasing")
    rows = []
    for N in N_list:
        rule = make_lattice_rule(N, s, weights, R=R, seed=seed)
        est = estimate(problem, functional, rule, mode=mode)
        rows.append((N, est.mean, est.rms))
    alpha_obs = fit_log_slope([r[0] for r in rows], [r[2] for r in rows])
    return ConvergenceStudy(rows=tuple(rows), alpha_obs=alpha_obs)


@dataclass(frozen=True)
class TruncationStudy:
    rows: tuple  # (s, estimate, rms, error_vs_reference)
    s_reference: int
    decay_exponent: float

    def csv_rows(self, N: int, R: int):
        for s, est, rms, err in self.rows:
            yield {
                "s": s,
                "N": N,
                "R": R,
                "estimate": repr(est),
                "rms": repr(rms),
                "error_vs_smax": repr(err),
            }


def truncation_study(
    problem,
    functional,
    s_list,
    N_fixed: int,
    weights,
    R: int = 16,
    seed: int = 0,
    mode: str = "seeded",
) -> TruncationStudy:
    """Truncation-error proxy |estimate_s - estimate_smax| at fixed N.

    One generating vector is built at the largest dimension and sliced, and
    shifts are shared, so rows differ only through the dropped coordinates.
    The decay exponent is fitted on the nonzero errors (reference excluded).
    """
    s_list = sorted(int(s) for s in s_list)
    if any(b == a for a, b in zip(s_list, s_list[1:])):
        raise ValueError("truncation dimensions must be distinct")
    s_max = s_list[-1]
    z = cbc_construct(N_fixed, s_max, weights)
    shifts = np.random.default_rng(seed).random((R, s_max))
    results = {}
    for s in s_list:
        rule = LatticeRule(N=N_fixed, s=s, z=tuple(int(v) for v in z[:s]), shifts=shifts[:, :s], seed=seed)
        results[s] = estimate(problem, functional, rule, mode=mode)
    ref = results[s_max].mean
    rows = tuple(
        (s, results[s].mean, results[s].rms, abs(results[s].mean - ref)) for s in s_list
    )
    fit_rows = [(s, err) for s, _, _, err in rows[:-1] if err > 0.0]
    exponent = fit_log_slope([s for s, _ in fit_rows], [e for _, e in fit_rows])
    return TruncationStudy(rows=rows, s_reference=s_max, decay_exponent=exponent)
