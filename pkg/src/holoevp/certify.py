"""Derivative-growth certificates and mixed-derivative bound predictions.

A certificate packages, for one problem instance:

* the growth rule (quadruple factorial for the linear eigenproblem, plain
  factorial for the semilinear one) and its ratio limit ``eps`` (1/4 or 1);
* a fitted coordinate scale beta_j = zeta * c_j, where zeta is the smallest
  constant >= 1 such that measured single-coordinate derivatives satisfy
  |d_j^n lambda| <= lambda_bar * a_n * beta_j^n (and the state analogue in
  the H1 seminorm), inflated by a safety margin;
* a weight sequence gamma with Gamma = sum 1/gamma_j below the rule's cap
  (min(1, 4 D) for the linear problem, 1 for the semilinear one), chosen by
  a deterministic policy;
* empirical suprema: lambda_bar, u_bar over sampled real parameters, and
  m_lambda, m_u over sampled stadium points reached by eigen-branch
  continuation.

The certified prediction for any mixed derivative is then

    |d^nu lambda| <= m_lambda * nu! * prod_j (gamma_j beta_j / eps)^(nu_j)

and the state analogue with m_u.  ``validate_bounds`` measures mixed
derivatives by tensorized contour quadrature and compares.

The fitted zeta replaces closed-form constants that depend on quantities
with no computable formula here (spectral-gap constants from the abstract
theory); the certificate records the fit provenance so reports state
plainly what is measured rather than proved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .derivatives import (
    ContourSpec,
    THETA_SAFETY,
    _step,
    deriv_contour,
    deriv_mixed,
    nu_factorial,
    nu_support,
    safe_radius,
)
from .errors import AssumptionViolation, CertificateError, ContourError, IterationError
from .fem import hnorm
from .geometry import AdmissibleProfile, BernsteinEllipse, Stadium, inclusion_report, is_admissible
from .sequences import AlphaRule, alpha, rule_epsilon

__all__ = [
    "GammaPolicy",
    "HoloCertificate",
    "BoundRow",
    "BoundReport",
    "AdmissibilityRow",
    "AdmissibilityReport",
    "build_certificate",
    "check_admissibility",
    "predict_mixed_bounds",
    "validate_bounds",
    "weights_from_certificate",
]

#: Budget for the recorded ell^p exponent metadata: the smallest p in
#: {0.25, 0.5, 0.75, 1} whose truncated power sum stays below this.
POWER_SUM_BUDGET = 10.0


@dataclass(frozen=True)
class GammaPolicy:
    """Deterministic gamma sequences: gamma_j = t * r^j (geometric) or
    t * j^sigma_g (power), normalized so Gamma = fraction * cap."""

    kind: str = "power"
    r: float = 2.0
    sigma_g: float = 1.0
    fraction: float = 0.9

    def __post_init__(self):
        if self.kind not in ("geometric", "power"):
            raise ValueError(f"unknown gamma policy {self.kind!r}")
        if not 0.0 < self.fraction < 1.0:
            raise ValueError(f"fraction must lie in (0, 1), got {self.fraction}")
        if self.kind == "geometric" and self.r <= 1.0:
            raise ValueError(f"geometric ratio must exceed 1, got {self.r}")
        if self.kind == "power" and self.sigma_g <= 0.0:
            raise ValueError(f"power exponent must be positive, got {self.sigma_g}")

    def build(self, s: int, cap: float) -> np.ndarray:
        j = np.arange(1, s + 1, dtype=float)
        w = self.r ** (-j) if self.kind == "geometric" else j ** (-self.sigma_g)
        t = w.sum() / (self.fraction * cap)
        gamma = t / w
        if gamma[0] <= 1.0:
            raise AssumptionViolation(
                f"gamma policy yields gamma_1 = {gamma[0]:.4g} <= 1 "
                f"(cap {cap:.4g} too generous for s = {s})"
            )
        return gamma


@dataclass(frozen=True)
class HoloCertificate:
    """Fitted growth certificate; see the module docstring for the fields."""

    kind: str
    rule: AlphaRule
    eps: float
    beta: tuple
    gamma: tuple
    Gamma: float
    m_lambda: float
    m_u: float
    lambda_bar: float
    u_bar: float
    zeta: float
    d_lower: float
    p_exponent: float
    fit: dict = field(default_factory=dict)

    def __post_init__(self):
        beta = tuple(float(x) for x in self.beta)
        gamma = tuple(float(x) for x in self.gamma)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "rule", AlphaRule(self.rule))
        if len(beta) != len(gamma):
            raise ValueError("beta and gamma must share a truncation length")
        if any(b <= 0.0 for b in beta):
            raise AssumptionViolation("beta must be strictly positive")
        if any(g <= 1.0 for g in gamma):
            raise AssumptionViolation("gamma entries must exceed 1")
        if abs(self.eps - float(rule_epsilon(self.rule))) > 1e-15:
            raise ValueError(
                f"eps {self.eps} does not match the {self.rule.value} rule limit"
            )
        b = self.b
        if any(b[i + 1] > b[i] * (1.0 + 1e-12) for i in range(len(b) - 1)):
            k = next(i for i in range(len(b) - 1) if b[i + 1] > b[i] * (1.0 + 1e-12))
            raise AssumptionViolation(
                f"b = gamma*beta must be non-increasing; grows at j = {k + 1} "
                f"({b[k]:.4g} -> {b[k + 1]:.4g}); pick a slower gamma policy"
            )
        cap = min(1.0, 4.0 * self.d_lower) if self.kind == "linear" else 1.0
        if not self.Gamma < cap:
            raise AssumptionViolation(
                f"Gamma = {self.Gamma:.4g} must stay below the cap {cap:.4g}"
            )

    @property
    def s(self) -> int:
        return len(self.beta)

    @property
    def b(self) -> tuple:
        return tuple(g * bb for g, bb in zip(self.gamma, self.beta))

    def stadium_radius(self, j: int) -> float:
        return self.eps / self.b[j - 1]

    def profile(self) -> AdmissibleProfile:
        return AdmissibleProfile(b=self.b, eps=self.eps, p=self.p_exponent)

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "rule": self.rule.value,
            "eps": self.eps,
            "beta": list(self.beta),
            "gamma": list(self.gamma),
            "Gamma": self.Gamma,
            "M_gamma": max(self.m_lambda, self.m_u),
            "M_gamma_lambda": self.m_lambda,
            "M_gamma_u": self.m_u,
            "lambda_bar": self.lambda_bar,
            "u_bar": self.u_bar,
            "zeta": self.zeta,
            "d_lower": self.d_lower,
            "p_exponent": self.p_exponent,
            "fit": self.fit,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "HoloCertificate":
        return cls(
            kind=d["kind"],
            rule=AlphaRule(d["rule"]),
            eps=float(d["eps"]),
            beta=tuple(d["beta"]),
            gamma=tuple(d["gamma"]),
            Gamma=float(d["Gamma"]),
            m_lambda=float(d["M_gamma_lambda"]),
            m_u=float(d["M_gamma_u"]),
            lambda_bar=float(d["lambda_bar"]),
            u_bar=float(d["u_bar"]),
            zeta=float(d["zeta"]),
            d_lower=float(d["d_lower"]),
            p_exponent=float(d["p_exponent"]),
            fit=dict(d.get("fit", {})),
        )


def _fit_points(problem, s: int, extra: int, rng: np.random.Generator) -> list:
    """Deterministic extreme points plus seeded uniforms; the corners tend
    to carry the suprema of low-order derivatives."""
    pts = [np.zeros(s), np.ones(s), -np.ones(s)]
    for _ in range(extra):
        pts.append(rng.uniform(-1.0, 1.0, s))
    return pts


def build_certificate(
    problem,
    gamma_policy: GammaPolicy | None = None,
    sample_budget: int = 200,
    j_max: int = 8,
    n_fit: int | None = None,
    extra_fit_points: int = 3,
    seed: int = 2024,
    theta_fit: float = THETA_SAFETY,
    margin: float = 1.1,
    Q: int = 32,
) -> HoloCertificate:
    """Fit and assemble the certificate for one problem instance.

    Raises ``AssumptionViolation`` when the positivity/cap hypotheses fail
    and ``CertificateError`` (naming coordinate and radius) when stadium
    sampling cannot continue the eigen-branch.
    """
    kind = problem.kind
    if kind not in ("linear", "semilinear"):
        raise ValueError(f"cannot certify problem kind {kind!r}")
    rule = AlphaRule.QUAD if kind == "linear" else AlphaRule.FACTORIAL
    eps = float(rule_epsilon(rule))
    assumptions = problem.assumptions()
    d_lower = assumptions.d_lower if kind == "linear" else assumptions.a_lower
    cap = min(1.0, 4.0 * d_lower) if kind == "linear" else 1.0

    c = np.asarray(problem.c_values(), float)
    active = np.nonzero(c > 0.0)[0]
    if len(active) == 0:
        raise AssumptionViolation("no parametric modes to certify (all c_j = 0)")
    s_cert = int(active[-1]) + 1
    if np.any(c[:s_cert] <= 0.0):
        k = int(np.argmin(c[:s_cert] > 0.0))
        raise AssumptionViolation(
            f"mode amplitude c_{k + 1} = 0 inside the certified range 1..{s_cert}"
        )

    policy = gamma_policy or GammaPolicy()
    gamma = policy.build(s_cert, cap)
    if n_fit is None:
        # Complex self-consistent continuation is exercised lightly for the
        # semilinear problem; its fit stops at second derivatives.
        n_fit = 4 if kind == "linear" else 2
    j_fit = min(j_max, s_cert)
    rng = np.random.default_rng(seed)
    pts = _fit_points(problem, problem.s, extra_fit_points, rng)

    base_pairs = [problem.solve(y) for y in pts]
    lambda_bar = max(abs(p.lam) for p in base_pairs)
    u_bar = max(hnorm(p.u, problem.mesh) for p in base_pairs)

    zeta_raw = 1.0
    n_meas = 0
    for y in pts:
        for j in range(1, j_fit + 1):
            spec = ContourSpec(
                j=j, radius=theta_fit * safe_radius(problem, j), Q=Q
            )
            try:
                res = deriv_contour(problem, y, spec, n_max=n_fit)
            except (ContourError, IterationError) as exc:
                raise CertificateError(
                    f"derivative fit failed in coordinate {j}: {exc}",
                    coordinate=j,
                    radius=spec.radius,
                ) from exc
            for n in range(1, n_fit + 1):
                a_n = alpha(n, rule)
                lam_cand = (abs(res.d_lambda[n]) / (lambda_bar * a_n)) ** (1.0 / n) / c[j - 1]
                u_cand = (res.d_u_hnorm[n] / (u_bar * a_n)) ** (1.0 / n) / c[j - 1]
                zeta_raw = max(zeta_raw, lam_cand, u_cand)
                n_meas += 1
    zeta = margin * zeta_raw
    beta = zeta * c[:s_cert]

    # Stadium sampling through continuation: running maxima over the closed
    # analyticity region claimed by the certificate.
    b = gamma * beta
    m_lambda, m_u = lambda_bar, u_bar
    for j in range(1, s_cert + 1):
        radius = eps / b[j - 1]
        for _ in range(sample_budget):
            y_anchor = rng.uniform(-1.0, 1.0, problem.s)
            delta = radius * rng.random()
            angle = 2.0 * np.pi * rng.random()
            z = y_anchor.astype(complex)
            z[j - 1] += delta * np.exp(1j * angle)
            try:
                anchor_pair = problem.solve(y_anchor)
                state = (y_anchor.astype(complex), anchor_pair)
                state = _step(problem, z, state)
            except (ContourError, IterationError) as exc:
                raise CertificateError(
                    f"stadium sampling failed in coordinate {j} at radius "
                    f"{radius:.4g}: {exc}",
                    coordinate=j,
                    radius=radius,
                ) from exc
            pair = state[1]
            m_lambda = max(m_lambda, abs(pair.lam))
            m_u = max(m_u, hnorm(pair.u, problem.mesh))

    power_sum = None
    p_exponent = 1.0
    for p_try in (0.25, 0.5, 0.75, 1.0):
        power_sum = float(np.sum(b ** p_try))
        if power_sum <= POWER_SUM_BUDGET:
            p_exponent = p_try
            break

    return HoloCertificate(
        kind=kind,
        rule=rule,
        eps=eps,
        beta=tuple(beta),
        gamma=tuple(gamma),
        Gamma=float(np.sum(1.0 / gamma)),
        m_lambda=float(m_lambda),
        m_u=float(m_u),
        lambda_bar=float(lambda_bar),
        u_bar=float(u_bar),
        zeta=float(zeta),
        d_lower=float(d_lower),
        p_exponent=p_exponent,
        fit={
            "zeta_raw": zeta_raw,
            "margin": margin,
            "n_fit": n_fit,
            "j_fit": j_fit,
            "fit_points": len(pts),
            "measurements": n_meas,
            "seed": seed,
            "sample_budget": sample_budget,
            "theta_fit": theta_fit,
            "Q": Q,
            "cap": cap,
            "gamma_policy": {
                "kind": policy.kind,
                "r": policy.r,
                "sigma_g": policy.sigma_g,
                "fraction": policy.fraction,
            },
            "power_sum": power_sum,
        },
    )


# ---------------------------------------------------------------------------
# Admissibility diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdmissibilityRow:
    j: int
    b_j: float
    rho_j: float
    semi_minor: float
    vertex_excess: float
    radius: float
    included: bool


@dataclass(frozen=True)
class AdmissibilityReport:
    rows: tuple
    admissible_sum: bool
    admissible_max: bool

    @property
    def all_included(self) -> bool:
        return all(r.included for r in self.rows)

    @property
    def passed(self) -> bool:
        return self.admissible_sum and self.all_included


def check_admissibility(
    cert: HoloCertificate, rho, samples: int = 256
) -> AdmissibilityReport:
    """Per-coordinate inclusion diagnostics for a radius profile.

    Checks the budget (both the sum form and the weaker max form) and, for
    each coordinate, the ellipse-in-stadium inclusion by the analytic axis
    inequalities and by boundary sampling.
    """
    rho = tuple(float(r) for r in rho)
    profile = cert.profile()
    adm_sum = is_admissible(rho, profile, form="sum")
    adm_max = is_admissible(rho, profile, form="max")
    rows = []
    for j, rho_j in enumerate(rho, start=1):
        ell = BernsteinEllipse(rho_j)
        st = Stadium(cert.stadium_radius(j))
        rep = inclusion_report(ell, st, samples=samples)
        rows.append(
            AdmissibilityRow(
                j=j,
                b_j=cert.b[j - 1],
                rho_j=rho_j,
                semi_minor=rep.semi_minor,
                vertex_excess=rep.vertex_excess,
                radius=st.radius,
                included=rep.included,
            )
        )
    return AdmissibilityReport(rows=tuple(rows), admissible_sum=adm_sum, admissible_max=adm_max)


# ---------------------------------------------------------------------------
# Mixed-derivative bound reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundRow:
    nu: tuple
    predicted_lambda: float
    predicted_u: float
    measured_lambda: float | None = None
    measured_u: float | None = None
    note: str = ""

    @property
    def ratio_lambda(self) -> float | None:
        if self.measured_lambda is None:
            return None
        return self.measured_lambda / self.predicted_lambda

    @property
    def ratio_u(self) -> float | None:
        if self.measured_u is None:
            return None
        return self.measured_u / self.predicted_u

    @property
    def passed(self) -> bool | None:
        if self.measured_lambda is None or self.note:
            return None
        return (
            self.measured_lambda <= self.predicted_lambda
            and self.measured_u <= self.predicted_u
        )


@dataclass(frozen=True)
class BoundReport:
    rows: tuple

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.rows if r.passed is not None) and any(
            r.passed is not None for r in self.rows
        )

    @property
    def n_fail(self) -> int:
        return sum(1 for r in self.rows if r.passed is False)

    def csv_rows(self):
        for r in self.rows:
            yield {
                "nu": ",".join(str(n) for n in r.nu),
                "measured_lambda": "" if r.measured_lambda is None else repr(r.measured_lambda),
                "measured_u": "" if r.measured_u is None else repr(r.measured_u),
                "predicted_lambda": repr(r.predicted_lambda),
                "predicted_u": repr(r.predicted_u),
                "ratio_lambda": "" if r.ratio_lambda is None else repr(r.ratio_lambda),
                "ratio_u": "" if r.ratio_u is None else repr(r.ratio_u),
                "passed": "" if r.passed is None else str(r.passed),
                "note": r.note,
            }


def _prediction(cert: HoloCertificate, nu) -> tuple:
    growth = nu_factorial(nu)
    for j, n in nu_support(nu):
        if j > cert.s:
            raise ValueError(f"multi-index touches coordinate {j} beyond the certificate ({cert.s})")
        growth *= (cert.b[j - 1] / cert.eps) ** n
    return cert.m_lambda * growth, cert.m_u * growth


def predict_mixed_bounds(cert: HoloCertificate, nu_list) -> BoundReport:
    """Prediction-only report: m * nu! * prod (gamma_j beta_j / eps)^nu_j."""
    rows = []
    for nu in nu_list:
        pl, pu = _prediction(cert, tuple(nu))
        rows.append(BoundRow(nu=tuple(int(n) for n in nu), predicted_lambda=pl, predicted_u=pu))
    return BoundReport(rows=tuple(rows))


def validate_bounds(
    cert: HoloCertificate,
    problem,
    y_samples,
    nu_list,
    Q: int = 32,
    theta_safety: float = THETA_SAFETY,
) -> BoundReport:
    """Measure mixed derivatives at each sample and compare to predictions.

    Each row keeps the worst (largest) measurement over the samples; rows
    whose measurement fails numerically are flagged through ``note`` rather
    than aborting the report.
    """
    rows = []
    for nu in nu_list:
        nu = tuple(int(n) for n in nu)
        pl, pu = _prediction(cert, nu)
        worst_l, worst_u = 0.0, 0.0
        note = ""
        for y in y_samples:
            radii = tuple(
                theta_safety * cert.stadium_radius(j) for j, _ in nu_support(nu)
            )
            try:
                res = deriv_mixed(problem, y, nu, Q=Q, radii=radii)
            except (ContourError, IterationError) as exc:
                note = f"measurement failed at y={np.round(np.asarray(y, float), 4)}: {exc}"
                continue
            worst_l = max(worst_l, abs(res.d_lambda))
            worst_u = max(worst_u, res.d_u_hnorm)
        rows.append(
            BoundRow(
                nu=nu,
                predicted_lambda=pl,
                predicted_u=pu,
                measured_lambda=None if note else worst_l,
                measured_u=None if note else worst_u,
                note=note,
            )
        )
    return BoundReport(rows=tuple(rows))


def weights_from_certificate(cert: HoloCertificate, s: int | None = None) -> np.ndarray:
    """Lattice-rule product weights (gamma_j beta_j)^2, truncated/padded to s."""
    b = np.asarray(cert.b)
    if s is None or s == len(b):
        return b ** 2
    if s < len(b):
        return b[:s] ** 2
    out = np.full(s, b[-1] ** 2 * 1e-6)
    out[: len(b)] = b ** 2
    return out
