"""Bernstein ellipses, stadium neighbourhoods of [-1, 1], and the
per-coordinate inclusion tests behind the holomorphy certificates.

A radius profile ``rho`` is *admissible* for a budget (b, eps) when
``sum_j b_j (rho_j - 1) <= eps``.  Admissibility forces every per-coordinate
ellipse E_{rho_j} inside the stadium of radius eps/b_j around [-1, 1]; the
two sufficient axis inequalities

    (rho - 1/rho)/2     < eps/b_j      (semi-minor axis)
    (rho + 1/rho)/2 - 1 < eps/b_j      (vertex beyond the focus)

are checked analytically and re-verified by sampling the ellipse boundary.

Conventions: boundary cases count as inside (closed sets); all sequences are
explicit truncations, with the tail treated as rho_j = 1 (zero contribution).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BernsteinEllipse",
    "Stadium",
    "AdmissibleProfile",
    "is_admissible",
    "ellipse_contains",
    "stadium_contains",
    "ellipse_in_stadium",
    "inclusion_report",
    "random_admissible_rho",
]

#: Absolute slack absorbing roundoff in closed-set membership tests.
_MEMBERSHIP_SLACK = 1e-12


@dataclass(frozen=True)
class BernsteinEllipse:
    """Closed ellipse with foci +-1: image of {1 <= |w| <= rho} under
    (w + 1/w)/2.  Requires rho > 1."""

    rho: float

    def __post_init__(self):
        if not self.rho > 1.0:
            raise ValueError(f"ellipse parameter must exceed 1, got {self.rho}")

    @property
    def semi_minor(self) -> float:
        return 0.5 * (self.rho - 1.0 / self.rho)

    @property
    def semi_major(self) -> float:
        return 0.5 * (self.rho + 1.0 / self.rho)

    def boundary_points(self, count: int) -> np.ndarray:
        """``count`` boundary samples (w + 1/w)/2, |w| = rho, uniform in angle."""
        theta = 2.0 * np.pi * np.arange(count) / count
        w = self.rho * np.exp(1j * theta)
        return 0.5 * (w + 1.0 / w)


@dataclass(frozen=True)
class Stadium:
    """Closed set of points within ``radius`` of the segment [-1, 1]."""

    radius: float

    def __post_init__(self):
        if not self.radius > 0.0:
            raise ValueError(f"stadium radius must be positive, got {self.radius}")

    def distance(self, z) -> np.ndarray:
        """Distance from z to [-1, 1], computed by clamping Re z."""
        z = np.asarray(z, dtype=complex)
        near = np.clip(z.real, -1.0, 1.0)
        return np.abs(z - near)


@dataclass(frozen=True)
class AdmissibleProfile:
    """Budget (b, eps) with summability exponent p.

    ``b`` is a strictly positive, non-increasing truncated sequence; ``eps``
    is the analyticity budget; ``p`` in (0, 1] is recorded metadata for the
    ell^p bookkeeping (always finite on a truncation).
    """

    b: tuple
    eps: float
    p: float = 1.0

    def __post_init__(self):
        b = tuple(float(x) for x in self.b)
        object.__setattr__(self, "b", b)
        if len(b) == 0:
            raise ValueError("profile needs at least one coordinate")
        if any(x <= 0.0 for x in b):
            raise ValueError("profile sequence must be strictly positive")
        if any(b[i + 1] > b[i] for i in range(len(b) - 1)):
            raise ValueError("profile sequence must be non-increasing")
        if not self.eps > 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")

    @property
    def s(self) -> int:
        return len(self.b)

    def power_sum(self) -> float:
        return float(np.sum(np.asarray(self.b) ** self.p))

    def stadium_radius(self, j: int) -> float:
        """eps / b_j for coordinate j (1-based)."""
        return self.eps / self.b[j - 1]


def is_admissible(rho, profile: AdmissibleProfile, form: str = "sum") -> bool:
    """True when the radius profile fits the budget.

    ``form="sum"`` checks sum_j b_j (rho_j - 1) <= eps; ``form="max"`` checks
    the weaker max_j b_j (rho_j - 1) <= eps, exposed because only the max form
    is consumed by the inclusion argument.  ``rho`` may be shorter than the
    profile; missing entries are treated as exactly 1.  Equality passes.
    """
    rho = tuple(float(r) for r in rho)
    if len(rho) > profile.s:
        raise ValueError(f"rho has {len(rho)} entries, profile only {profile.s}")
    if any(r <= 1.0 for r in rho):
        raise ValueError("every rho_j must exceed 1")
    terms = [bj * (rj - 1.0) for bj, rj in zip(profile.b, rho)]
    if form == "sum":
        return sum(terms) <= profile.eps
    if form == "max":
        return max(terms) <= profile.eps
    raise ValueError(f"unknown admissibility form {form!r}")


def ellipse_contains(e: BernsteinEllipse, z) -> bool:
    """Closed-ellipse membership via the focal-sum characterization
    |z - 1| + |z + 1| <= rho + 1/rho (robust near the slit [-1, 1])."""
    z = complex(z)
    return abs(z - 1.0) + abs(z + 1.0) <= 2.0 * e.semi_major + _MEMBERSHIP_SLACK


def stadium_contains(st: Stadium, z) -> bool:
    """Closed-stadium membership: dist(z, [-1, 1]) <= radius."""
    return float(st.distance(complex(z))) <= st.radius + _MEMBERSHIP_SLACK


@dataclass(frozen=True)
class InclusionReport:
    """Diagnostics from one ellipse-in-stadium test."""

    analytic_ok: bool
    sampled_ok: bool
    semi_minor: float
    vertex_excess: float
    radius: float
    max_distance: float

    @property
    def included(self) -> bool:
        return self.analytic_ok and self.sampled_ok


def inclusion_report(
    e: BernsteinEllipse, st: Stadium, samples: int = 256
) -> InclusionReport:
    """Test E_rho inside the stadium along both routes.

    Analytic route: strict axis inequalities semi_minor < radius and
    semi_major - 1 < radius.  Sampling route: ``samples`` boundary points all
    within the stadium.  The two must agree; a disagreement indicates a
    boundary-degenerate case and is reported via ``warnings``.
    """
    if samples < 64:
        raise ValueError(f"need at least 64 boundary samples, got {samples}")
    vertex_excess = e.semi_major - 1.0
    analytic_ok = e.semi_minor < st.radius and vertex_excess < st.radius
    dist = st.distance(e.boundary_points(samples))
    max_distance = float(dist.max())
    sampled_ok = bool(max_distance <= st.radius + _MEMBERSHIP_SLACK)
    return InclusionReport(
        analytic_ok=analytic_ok,
        sampled_ok=sampled_ok,
        semi_minor=e.semi_minor,
        vertex_excess=vertex_excess,
        radius=st.radius,
        max_distance=max_distance,
    )


def ellipse_in_stadium(e: BernsteinEllipse, st: Stadium, samples: int = 256) -> bool:
    """Conjunction of the analytic and sampled inclusion tests.

    Flags any disagreement between the two routes (possible only within
    roundoff of the boundary-touching case).
    """
    rep = inclusion_report(e, st, samples)
    if rep.analytic_ok != rep.sampled_ok:
        warnings.warn(
            "analytic and sampled inclusion disagree "
            f"(analytic={rep.analytic_ok}, sampled={rep.sampled_ok}, "
            f"max_distance={rep.max_distance:.3e}, radius={rep.radius:.3e})",
            stacklevel=2,
        )
    return rep.included


def random_admissible_rho(
    profile: AdmissibleProfile, rng: np.random.Generator
) -> tuple:
    """Draw an admissible rho by splitting a random fraction of the budget.

    Fractions f_j >= 0 with sum f_j <= 1 give rho_j = 1 + eps f_j / b_j,
    admissible by construction (the budget sum equals eps * sum f_j).
    """
    s = profile.s
    raw = rng.random(s) + 1e-12
    total = rng.random()  # fraction of budget actually spent
    f = raw / raw.sum() * total
    return tuple(1.0 + profile.eps * f[j] / profile.b[j] for j in range(s))
