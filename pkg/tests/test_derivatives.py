"""Cross-validation of the three derivative routes and the radius search.

Oracles: the exact affine structure of constant-mode potentials (first
derivative equals the mode height, higher orders vanish), nested central
differences for mixed derivatives, and cross-method agreement within the
methods' own error estimates.
"""

import numpy as np
import pytest

from holoevp.derivatives import (
    ContourSpec,
    DerivativeTable,
    deriv_chebyshev,
    deriv_contour,
    deriv_fd,
    deriv_mixed,
    nu_factorial,
    nu_support,
    radius_estimate,
    safe_radius,
)
from holoevp.fem import Mesh1D
from holoevp.fields import AffineField, constant_field
from holoevp.problems import LinearEVP


@pytest.fixture(scope="module")
def pole_problem():
    """Weight C = 1 + 0.5 y_1: the eigen-branch has a pole at y_1 = -2."""
    mesh = Mesh1D.uniform(32)
    C = AffineField(
        phi0=lambda x: np.ones_like(np.asarray(x, float)),
        modes=(lambda x: 0.5 * np.ones_like(np.asarray(x, float)),),
        amplitudes=(0.5,),
        label="C",
    )
    return LinearEVP(
        A=constant_field(1.0), B=constant_field(0.0), C=C, mesh=mesh, s=1
    )


def test_multi_index_helpers():
    assert nu_support((0, 2, 0, 1)) == [(2, 2), (4, 1)]
    assert nu_factorial((0, 2, 0, 1)) == 2
    with pytest.raises(ValueError):
        deriv_mixed(None, [0.0], (1, 1, 1))  # support on 3 coordinates
    with pytest.raises(ValueError):
        deriv_mixed(None, [0.0], (7,))  # total order above the cap


def test_constant_mode_fd(constant_mode_problem):
    y = np.zeros(4)
    r = deriv_fd(constant_mode_problem, y, j=1, n=1)
    # lambda(y) = lambda_0 + sum c_j y_j exactly, c_1 = 0.15
    assert abs(r.d_lambda - 0.15) < 1e-10
    assert r.d_u_hnorm < 1e-9
    r2 = deriv_fd(constant_mode_problem, y, j=1, n=2)
    assert abs(r2.d_lambda) <= max(10.0 * r2.est_lambda, 5e-9)


def test_constant_mode_contour(constant_mode_problem):
    y = np.zeros(4)
    spec = ContourSpec.for_problem(constant_mode_problem, 1)
    res = deriv_contour(constant_mode_problem, y, spec, n_max=3)
    base = constant_mode_problem.solve(y)
    assert abs(res.d_lambda[0] - base.lam) < 1e-10  # zeroth Fourier coefficient
    assert abs(res.d_lambda[1] - 0.15) < 1e-9
    assert abs(res.d_lambda[2]) < 1e-9
    assert abs(res.d_lambda[3]) < 1e-9
    assert res.closure_lambda <= 1e-9 and res.closure_u <= 1e-9


def test_contour_real_base_point_required(constant_mode_problem):
    spec = ContourSpec.for_problem(constant_mode_problem, 1)
    with pytest.raises(ValueError):
        deriv_contour(constant_mode_problem, np.array([0.1j, 0, 0, 0]), spec, 1)


def test_cross_method_agreement(standard_problem):
    y = np.zeros(8)
    for j in (1, 2):
        fd1 = deriv_fd(standard_problem, y, j, 1)
        spec = ContourSpec.for_problem(standard_problem, j)
        ct = deriv_contour(standard_problem, y, spec, n_max=3)
        ch = deriv_chebyshev(standard_problem, y, j, n_max=3)
        for n in (1, 2, 3):
            fd = deriv_fd(standard_problem, y, j, n)
            tol_fc = max(1e-6, fd.est_lambda + ct.est_error(n))
            assert abs(fd.d_lambda - ct.d_lambda[n].real) <= tol_fc
            tol_cc = max(1e-6, ch.est_lambda[n] + ct.est_error(n))
            assert abs(ch.d_lambda[n] - ct.d_lambda[n].real) <= tol_cc
            tol_u = max(1e-6, fd.est_u + ct.est_error(n))
            assert abs(fd.d_u_hnorm - ct.d_u_hnorm[n]) <= tol_u or n > 1
        assert abs(fd1.d_u_hnorm - ct.d_u_hnorm[1]) <= max(1e-6, 10 * fd1.est_u)


def test_contour_conjugate_symmetry(standard_problem):
    y = np.zeros(8)
    res = deriv_contour(
        standard_problem, y, ContourSpec.for_problem(standard_problem, 1), n_max=3
    )
    for n in range(4):
        assert abs(res.d_lambda[n].imag) <= 1e-9 * max(1.0, abs(res.d_lambda[n]))


def test_contour_q_doubling_invariance(standard_problem):
    y = np.zeros(8)
    r64 = deriv_contour(
        standard_problem, y, ContourSpec.for_problem(standard_problem, 1, Q=64), 3
    )
    r128 = deriv_contour(
        standard_problem, y, ContourSpec.for_problem(standard_problem, 1, Q=128), 3
    )
    for n in range(4):
        denom = max(1e-12, abs(r64.d_lambda[n]))
        assert abs(r64.d_lambda[n] - r128.d_lambda[n]) / denom <= 1e-9


def test_fd_stencil_domain_error(standard_problem):
    y = np.zeros(8)
    y[0] = 0.999
    with pytest.raises(ValueError):
        deriv_fd(standard_problem, y, j=1, n=3, h=0.1)
    with pytest.raises(ValueError):
        deriv_fd(standard_problem, y, j=1, n=5)


def test_mixed_single_support_consistency(standard_problem):
    y = np.zeros(8)
    spec = ContourSpec.for_problem(standard_problem, 1)
    ct = deriv_contour(standard_problem, y, spec, n_max=1)
    mx = deriv_mixed(standard_problem, y, (1,), radii=(spec.radius,))
    assert mx.d_lambda == pytest.approx(complex(ct.d_lambda[1]), rel=1e-12)
    assert mx.d_u_hnorm == pytest.approx(float(ct.d_u_hnorm[1]), rel=1e-12)


def test_mixed_constant_modes_vanish(constant_mode_problem):
    mx = deriv_mixed(constant_mode_problem, np.zeros(4), (1, 1))
    assert abs(mx.d_lambda) < 1e-8  # affine in each coordinate, no cross term


def test_mixed_matches_nested_fd(standard_problem):
    y = np.zeros(8)
    y[0], y[1] = 0.3, -0.2
    mx = deriv_mixed(standard_problem, y, (1, 1))
    h = 0.02

    def lam(d1, d2):
        z = y.copy()
        z[0] += d1
        z[1] += d2
        return standard_problem.solve(z).lam

    oracle = (lam(h, h) - lam(h, -h) - lam(-h, h) + lam(-h, -h)) / (4 * h * h)
    assert abs(mx.d_lambda.real - oracle) < 1e-5
    assert abs(mx.d_lambda.imag) < 1e-9


def test_mixed_order_two_plus_one(standard_problem):
    y = np.zeros(8)
    y[0], y[1] = 0.25, 0.4
    mx = deriv_mixed(standard_problem, y, (2, 1), Q=32)
    h = 0.05

    def lam(d1, d2):
        z = y.copy()
        z[0] += d1
        z[1] += d2
        return standard_problem.solve(z).lam

    # nested central stencils: second derivative in y1 of the first in y2
    def d2_in_1(d2):
        return (lam(h, d2) - 2 * lam(0, d2) + lam(-h, d2)) / h ** 2

    oracle = (d2_in_1(h) - d2_in_1(-h)) / (2 * h)
    assert abs(mx.d_lambda.real - oracle) <= max(1e-5, 1e-2 * abs(oracle))


def test_radius_estimate_entire_case(constant_mode_problem):
    # affine branch: no finite singularity, the search cap is returned
    r = radius_estimate(constant_mode_problem, np.zeros(4), j=1, r_cap=6.0)
    assert r == 6.0


def test_radius_estimate_pole_case(pole_problem):
    # pole of the continued branch at distance exactly 2
    r = radius_estimate(pole_problem, np.zeros(1), j=1, r_cap=6.0)
    assert 0.5 < r <= 2.0


def test_safe_radius_positive(standard_problem):
    for j in (1, 4, 8):
        assert safe_radius(standard_problem, j) > 0.0
    with pytest.raises(ValueError):
        safe_radius(standard_problem, 9)


def test_contour_spec_validation():
    with pytest.raises(ValueError):
        ContourSpec(j=1, radius=0.5, Q=24)
    with pytest.raises(ValueError):
        ContourSpec(j=1, radius=0.5, Q=48)
    with pytest.raises(ValueError):
        ContourSpec(j=0, radius=0.5)
    with pytest.raises(ValueError):
        ContourSpec(j=1, radius=-0.1)


def test_derivative_table_rows(standard_problem):
    y = np.zeros(8)
    table = DerivativeTable(y=tuple(y))
    fd = deriv_fd(standard_problem, y, 1, 1)
    table.add((1,), fd.d_lambda, fd.d_u_hnorm, "fd", fd.est_lambda)
    rows = list(table.rows())
    assert rows[0]["nu"] == "1" and rows[0]["method"] == "fd"
    with pytest.raises(ValueError):
        table.add((1, 1, 1), 0.0, 0.0, "fd", 0.0)
