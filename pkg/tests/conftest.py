"""Shared problem fixtures.

The "standard fourier" problem is the mild benchmark used by the derivative
cross-checks and the single-coordinate bound suite; the "mixed validation"
problem carries a strong constant mode in the weight coefficient so that
bound predictions sit close enough to measurements for the adversarial
certificate check to have teeth.
"""

import numpy as np
import pytest

from holoevp.certify import GammaPolicy, build_certificate
from holoevp.fem import Mesh1D
from holoevp.fields import AffineField, constant_field, make_decay_field
from holoevp.problems import LinearEVP, SemilinearEVP


def fourier_modes(amplitude, sigma, s):
    modes = []
    for j in range(1, s + 1):
        def mode(x, _j=j, _a=amplitude * j ** (-sigma)):
            return _a * np.sin(_j * np.pi * np.asarray(x, float))
        modes.append(mode)
    return tuple(modes)


def zero_base_fourier(amplitude, sigma, s, label=""):
    """Potential-type field with base 0 (no positivity requirement)."""
    return AffineField(
        phi0=lambda x: np.zeros_like(np.asarray(x, float)),
        modes=fourier_modes(amplitude, sigma, s),
        amplitudes=tuple(amplitude * j ** (-sigma) for j in range(1, s + 1)),
        label=label,
    )


def constant_modes_field(amplitudes, label=""):
    modes = tuple(
        (lambda x, _c=c: _c * np.ones_like(np.asarray(x, float))) for c in amplitudes
    )
    return AffineField(
        phi0=lambda x: np.zeros_like(np.asarray(x, float)),
        modes=modes,
        amplitudes=tuple(amplitudes),
        label=label,
    )


@pytest.fixture(scope="session")
def standard_problem():
    mesh = Mesh1D.uniform(64)
    return LinearEVP(
        A=make_decay_field(1.0, 0.10, 2.0, 8, "fourier", label="A"),
        B=zero_base_fourier(0.08, 2.0, 8, label="B"),
        C=make_decay_field(1.0, 0.06, 2.0, 8, "fourier", label="C"),
        mesh=mesh,
        s=8,
    )


@pytest.fixture(scope="session")
def constant_mode_problem():
    """lambda(y) = lambda_0 + sum_j c_j y_j exactly (constant potential modes)."""
    mesh = Mesh1D.uniform(32)
    amps = tuple(0.3 * 2.0 ** (-j) for j in range(1, 5))
    return LinearEVP(
        A=constant_field(1.0, label="A"),
        B=constant_modes_field(amps, label="B"),
        C=constant_field(1.0, label="C"),
        mesh=mesh,
        s=4,
    )


@pytest.fixture(scope="session")
def mixed_problem():
    """Strong constant mode in the weight C (teeth for adversarial checks)."""
    mesh = Mesh1D.uniform(64)
    C = AffineField(
        phi0=lambda x: np.ones_like(np.asarray(x, float)),
        modes=(
            lambda x: 0.5 * np.ones_like(np.asarray(x, float)),
            lambda x: 0.05 * np.sin(2 * np.pi * np.asarray(x, float)),
        ),
        amplitudes=(0.5, 0.05),
        label="C",
    )
    return LinearEVP(
        A=make_decay_field(1.0, 0.05, 2.0, 2, "fourier", label="A"),
        B=zero_base_fourier(0.04, 2.0, 2, label="B"),
        C=C,
        mesh=mesh,
        s=2,
    )


@pytest.fixture(scope="session")
def semilinear_problem():
    mesh = Mesh1D.uniform(64)
    return SemilinearEVP(
        A=constant_field(1.0, label="A"),
        B=zero_base_fourier(0.10, 2.0, 4, label="B"),
        eta=1.0,
        p=3,
        mesh=mesh,
        s=4,
    )


@pytest.fixture(scope="session")
def standard_certificate(standard_problem):
    return build_certificate(standard_problem, sample_budget=200)


@pytest.fixture(scope="session")
def mixed_certificate(mixed_problem):
    return build_certificate(
        mixed_problem, gamma_policy=GammaPolicy("geometric", r=8.0), sample_budget=200
    )
