"""Certificate construction, admissibility diagnostics, and bound reports."""

from dataclasses import replace

import numpy as np
import pytest

from holoevp.certify import (
    GammaPolicy,
    HoloCertificate,
    build_certificate,
    check_admissibility,
    predict_mixed_bounds,
    validate_bounds,
    weights_from_certificate,
)
from holoevp.derivatives import radius_estimate
from holoevp.errors import AssumptionViolation
from holoevp.fem import Mesh1D
from holoevp.fields import constant_field
from holoevp.problems import SemilinearEVP
from holoevp.sequences import AlphaRule

from conftest import constant_modes_field, zero_base_fourier


def test_constant_mode_certificate_zeta_is_margin(constant_mode_problem):
    cert = build_certificate(constant_mode_problem, sample_budget=20, extra_fit_points=1)
    # the affine branch saturates nothing: the fit clips at 1 and only the
    # safety margin remains
    assert cert.zeta == pytest.approx(1.1, abs=1e-9)
    assert cert.rule is AlphaRule.QUAD and cert.eps == 0.25
    assert cert.fit["zeta_raw"] == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(
        cert.beta, 1.1 * np.asarray(constant_mode_problem.c_values()), rtol=1e-9
    )


def test_geometric_policy_on_geometric_decay(constant_mode_problem):
    cert = build_certificate(
        constant_mode_problem,
        gamma_policy=GammaPolicy("geometric", r=2.0),
        sample_budget=10,
        extra_fit_points=0,
    )
    assert cert.Gamma == pytest.approx(0.9 * min(1.0, 4.0 * cert.d_lower), rel=1e-12)
    b = np.asarray(cert.b)
    assert np.all(np.diff(b) <= 1e-15)


def test_gamma_policy_validation():
    with pytest.raises(ValueError):
        GammaPolicy("harmonic")
    with pytest.raises(ValueError):
        GammaPolicy("geometric", r=1.0)
    with pytest.raises(ValueError):
        GammaPolicy("power", sigma_g=-1.0)
    with pytest.raises(ValueError):
        GammaPolicy(fraction=1.0)
    pol = GammaPolicy("power", sigma_g=1.0, fraction=0.9)
    gamma = pol.build(8, 1.0)
    assert gamma[0] > 1.0 and np.all(np.diff(gamma) > 0)
    assert np.sum(1.0 / gamma) == pytest.approx(0.9, rel=1e-12)


def test_certificate_validation_guards(standard_certificate):
    cert = standard_certificate
    with pytest.raises(AssumptionViolation):
        replace(cert, beta=tuple(-b for b in cert.beta))
    with pytest.raises(AssumptionViolation):
        replace(cert, gamma=tuple(0.5 for _ in cert.gamma))
    with pytest.raises(ValueError):
        replace(cert, eps=1.0)  # wrong limit for the QUAD rule
    with pytest.raises(AssumptionViolation):
        # increasing b: reverse the fitted beta
        replace(cert, beta=tuple(reversed(cert.beta)))
    with pytest.raises(AssumptionViolation):
        replace(cert, Gamma=2.0)


def test_gamma_tightening_keeps_checks_passing(standard_certificate):
    cert = standard_certificate
    tightened = replace(cert, gamma=tuple(1.5 * g for g in cert.gamma),
                        Gamma=cert.Gamma / 1.5)
    assert tightened.Gamma < cert.Gamma


def test_admissibility_report(standard_certificate):
    cert = standard_certificate
    rho_ok = tuple(1.0 + cert.eps * 2.0 ** (-(j + 1)) / cert.b[j] for j in range(cert.s))
    rep = check_admissibility(cert, rho_ok)
    assert rep.admissible_sum and rep.admissible_max and rep.all_included and rep.passed
    rho_bad = (1.0 + 2.0 * cert.eps / cert.b[0],) + rho_ok[1:]
    rep_bad = check_admissibility(cert, rho_bad)
    assert not rep_bad.admissible_sum


def test_prediction_formulas(standard_certificate):
    cert = standard_certificate
    rep = predict_mixed_bounds(cert, [(0,), (1,), (0, 1), (2, 1)])
    by_nu = {r.nu: r for r in rep.rows}
    assert by_nu[(0,)].predicted_lambda == pytest.approx(cert.m_lambda, rel=1e-14)
    # first-order prediction is m * b_j / eps, i.e. 4 m gamma_j beta_j here
    assert by_nu[(1,)].predicted_lambda == pytest.approx(
        cert.m_lambda * 4.0 * cert.b[0], rel=1e-12
    )
    assert by_nu[(0, 1)].predicted_lambda == pytest.approx(
        cert.m_lambda * 4.0 * cert.b[1], rel=1e-12
    )
    expect = cert.m_lambda * 2.0 * (cert.b[0] / cert.eps) ** 2 * (cert.b[1] / cert.eps)
    assert by_nu[(2, 1)].predicted_lambda == pytest.approx(expect, rel=1e-12)


def test_prediction_multiplicative_over_disjoint_support(standard_certificate):
    cert = standard_certificate
    rep = predict_mixed_bounds(cert, [(2, 0), (0, 1), (2, 1)])
    a, b, ab = rep.rows
    assert ab.predicted_lambda * cert.m_lambda == pytest.approx(
        a.predicted_lambda * b.predicted_lambda, rel=1e-12
    )


def test_validation_and_adversarial_teeth(mixed_problem, mixed_certificate):
    cert = mixed_certificate
    samples = [np.zeros(2), np.array([-0.75, -0.75])]
    nus = [(1,), (2,), (3,)]
    report = validate_bounds(cert, mixed_problem, samples, nus)
    assert report.all_pass and report.n_fail == 0
    adversarial = replace(cert, beta=tuple(b / 10.0 for b in cert.beta))
    pred = predict_mixed_bounds(adversarial, nus)
    fails = sum(
        1
        for row, p in zip(report.rows, pred.rows)
        if row.measured_lambda > p.predicted_lambda or row.measured_u > p.predicted_u
    )
    assert fails >= 1


def test_scale_coherence(constant_mode_problem):
    base_amps = tuple(0.3 * 2.0 ** (-j) for j in range(1, 5))
    t = 1.2
    mesh = constant_mode_problem.mesh
    from holoevp.problems import LinearEVP

    scaled = LinearEVP(
        A=constant_field(1.0),
        B=constant_modes_field(tuple(t * a for a in base_amps)),
        C=constant_field(1.0),
        mesh=mesh,
        s=4,
    )
    cert0 = build_certificate(constant_mode_problem, sample_budget=10, extra_fit_points=0)
    cert1 = build_certificate(scaled, sample_budget=10, extra_fit_points=0)
    ratio = np.asarray(cert1.beta) / np.asarray(cert0.beta)
    assert np.all(ratio > 0.75 * t) and np.all(ratio < 1.34 * t)
    assert cert0.eps == cert1.eps == 0.25


def test_semilinear_certificate_factorial_rule():
    mesh = Mesh1D.uniform(32)
    prob = SemilinearEVP(
        A=constant_field(1.0),
        B=zero_base_fourier(0.10, 2.0, 2, label="B"),
        eta=0.5,
        p=3,
        mesh=mesh,
        s=2,
        tol=1e-9,
    )
    cert = build_certificate(prob, sample_budget=5, extra_fit_points=0, j_max=2)
    assert cert.rule is AlphaRule.FACTORIAL
    assert cert.eps == 1.0
    assert cert.kind == "semilinear"
    assert cert.fit["n_fit"] == 2
    assert cert.m_lambda >= cert.lambda_bar


def test_semilinear_mixed_validation():
    # complex self-consistent continuation in tensorized contours, within
    # the supported order cap (per-coordinate order <= 2)
    mesh = Mesh1D.uniform(32)
    prob = SemilinearEVP(
        A=constant_field(1.0),
        B=zero_base_fourier(0.10, 2.0, 2, label="B"),
        eta=0.5,
        p=3,
        mesh=mesh,
        s=2,
        tol=1e-9,
    )
    cert = build_certificate(prob, sample_budget=5, extra_fit_points=0, j_max=2)
    rep = validate_bounds(cert, prob, [np.array([0.4, -0.3])], [(1,), (1, 1)])
    assert rep.all_pass
    assert all(r.note == "" for r in rep.rows)


def test_radius_estimate_dominates_certificate_radius(mixed_problem, mixed_certificate):
    cert = mixed_certificate
    found = radius_estimate(mixed_problem, np.zeros(2), j=1, r_cap=2.0)
    assert found >= 0.5 * cert.stadium_radius(1)


def test_json_round_trip(standard_certificate):
    cert = standard_certificate
    clone = HoloCertificate.from_json_dict(cert.to_json_dict())
    assert clone.beta == cert.beta
    assert clone.gamma == cert.gamma
    assert clone.rule is cert.rule
    assert clone.m_lambda == cert.m_lambda
    assert clone.fit["zeta_raw"] == cert.fit["zeta_raw"]


def test_weights_from_certificate(standard_certificate):
    cert = standard_certificate
    w = weights_from_certificate(cert)
    np.testing.assert_allclose(w, np.asarray(cert.b) ** 2, rtol=1e-14)
    w_short = weights_from_certificate(cert, 3)
    assert len(w_short) == 3
    w_long = weights_from_certificate(cert, cert.s + 4)
    assert len(w_long) == cert.s + 4
    assert np.all(np.diff(w_long) <= 0.0)


def test_single_coordinate_domination(standard_problem, standard_certificate):
    """Measured derivatives stay below lambda_bar a_n beta_j^n (small slice;
    the acceptance suite runs the full grid)."""
    from holoevp.derivatives import ContourSpec, deriv_contour
    from holoevp.sequences import alpha

    cert = standard_certificate
    rng = np.random.default_rng(31)
    for y in [np.zeros(8), rng.uniform(-1, 1, 8)]:
        for j in (1, 3):
            spec = ContourSpec.for_certificate(cert, j)
            res = deriv_contour(standard_problem, y, spec, n_max=4)
            for n in range(1, 5):
                bound = alpha(n, cert.rule) * cert.beta[j - 1] ** n
                assert abs(res.d_lambda[n]) <= cert.lambda_bar * bound
                assert res.d_u_hnorm[n] <= cert.u_bar * bound
