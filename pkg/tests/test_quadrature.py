import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import beta as beta_fn

from bubblestrip.bubbles import bubble_constant, sync_scale
from bubblestrip.errors import IntegrabilityError, InvalidArgument
from bubblestrip.quadrature import (McOracle, RadialTerm, angular_moment, integrand_decay,
                                    matched_power, mc_integral, mc_sphere_moment,
                                    radial_bubble_beta, radial_bubble_integral, radial_continued,
                                    radial_quadrature, weighted_bubble_beta,
                                    weighted_bubble_integral, weighted_integrand)

N = 5
TS = 10 / 3


def _radial_beta(e, q):
    """Independent closed form of int_0^inf r^e (1 + r^2)^{-q} dr."""
    a = (e + 1) / 2
    return 0.5 * beta_fn(a, q - a)


def test_radial_quadrature_matches_beta():
    for e, q in ((4.0, 3.5), (7.5, 6.0), (2.0, 2.0)):
        val, err = radial_quadrature([RadialTerm(1.0, e, q)])
        assert val == pytest.approx(_radial_beta(e, q), rel=1e-12)
        assert err < 1e-9


def test_radial_quadrature_rejects_divergence():
    with pytest.raises(IntegrabilityError):
        radial_quadrature([RadialTerm(1.0, 6.0, 3.0)])


def test_bubble_mass_closed_form():
    C = bubble_constant(N)
    omega = 8 * math.pi**2 / 3
    expected = C ** (TS - 1) * omega / N
    assert radial_bubble_integral(N, TS - 1) == pytest.approx(expected, rel=1e-12)
    assert radial_bubble_beta(N, TS - 1) == pytest.approx(expected, rel=1e-13)
    with pytest.raises(IntegrabilityError):
        radial_bubble_integral(N, 1.0)


def test_angular_moment_against_monte_carlo():
    for b in (0.0, 2.0, 3.5):
        est, se = mc_sphere_moment(N, b, 200_000, 7)
        assert abs(est - angular_moment(N, b)) < 4 * se + 1e-12
    assert angular_moment(N, 0.0) == pytest.approx(8 * math.pi**2 / 3, rel=1e-14)
    with pytest.raises(InvalidArgument):
        angular_moment(N, -1.0)


# frozen values for N = 5 with U = s W, s = (2/3)^{3/4}; each also equals its
# Beta-function closed form computed independently below
FROZEN = {
    ("der0", 0.0): -190.28867718902,
    ("pair0", 3.1): -127.51115716,
    ("pair0", 3.5): -189.58007684,
    ("pair0", 3.9): -315.78015027,
    ("pairh", 3.1): -242.2712,
    ("pairh", 3.5): -284.37011525637797,
    ("pairh", 3.9): -347.3582,
}


def _independent_closed_form(kind, b):
    s = sync_scale(N)
    C = bubble_constant(N)
    ang = 2 * math.pi**2 * math.gamma((b + 1) / 2) / math.gamma((N + b) / 2)
    e = N - 1 + b
    if kind == "pair0":
        pre = (s * C) ** TS * (N - 2) / 2
        rad = 2 * _radial_beta(e, N + 1) - _radial_beta(e, N)
    elif kind == "der0":
        pre = (s * C) ** (TS - 1) * (N - 2) / 2
        rad = 2 * _radial_beta(e, 2 + N / 2) - _radial_beta(e, 1 + N / 2)
    else:
        pre = -b * (N - 2) * (s * C) ** TS
        rad = _radial_beta(e, N + 1)
    return pre * ang * rad


@pytest.mark.parametrize("kind,b", sorted(FROZEN))
def test_weighted_integrals_frozen(kind, b):
    val, err = weighted_bubble_integral(N, b, kind, with_error=True)
    closed = _independent_closed_form(kind, b)
    assert val == pytest.approx(closed, rel=1e-10)
    assert val == pytest.approx(FROZEN[(kind, b)], rel=1e-6)
    assert weighted_bubble_beta(N, b, kind) == pytest.approx(closed, rel=1e-12)
    assert err < 1e-8 * abs(val)


def test_weighted_integral_domain():
    with pytest.raises(InvalidArgument):
        weighted_bubble_integral(N, 2.5, "pair0")
    with pytest.raises(InvalidArgument):
        weighted_bubble_integral(N, 3.5, "nonsense")
    with pytest.raises(IntegrabilityError):
        weighted_bubble_integral(N, 3.5, "plain")


def test_dilation_identity():
    der0 = weighted_bubble_integral(N, 0.0, "der0")
    mass = weighted_bubble_integral(N, 0.0, "plain")
    assert (TS - 1) * der0 == pytest.approx(-(N - 2) / 2 * mass, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(3.01, 4.99))
def test_weighted_dilation_identity(b):
    # d/dlambda of int |y_1|^b U_lambda^{2*} = lambda^{-b} ...
    p0 = weighted_bubble_integral(N, b, "pair0")
    en = weighted_bubble_integral(N, b, "energy")
    assert p0 == pytest.approx(-b / TS * en, rel=1e-9)


@pytest.mark.parametrize("b", [3.1, 3.5, 3.9])
def test_continued_identity(b):
    lin = weighted_bubble_integral(N, b, "pair0_lin", continued=True)
    plain = weighted_bubble_integral(N, b, "plain", continued=True)
    assert (TS - 1) * lin == pytest.approx(-((N - 2) / 2 + b) * plain, rel=1e-9)
    assert lin == pytest.approx(weighted_bubble_beta(N, b, "pair0_lin"), rel=1e-9)


def test_continued_plain_frozen():
    vals = [weighted_bubble_integral(N, b, "plain", continued=True) for b in (3.1, 3.5, 3.9)]
    np.testing.assert_allclose(vals, [-610.8621255797556, -914.691083067995, -4395.451535307638],
                               rtol=1e-9)


def test_radial_continued_equals_quadrature_when_convergent():
    terms = [RadialTerm(1.0, 3.0, 3.0)]
    assert radial_continued(terms)[0] == pytest.approx(radial_quadrature(terms)[0], rel=1e-10)


def test_matched_power_and_decay():
    assert matched_power(5, 7.0) == pytest.approx(7 / 3)
    assert integrand_decay(5, 3.5, "pair0") == pytest.approx(6.5)


def test_mc_oracle_density_normalised():
    oracle = McOracle(5, sample_count=1000, seed=1, power=3.0)
    r = np.linspace(0, 200, 200001)
    dens = oracle.density(np.column_stack([r, np.zeros((len(r), 4))]))
    total = np.trapezoid(dens * r**4, r) * 8 * math.pi**2 / 3
    assert total == pytest.approx(1.0, rel=1e-3)


def test_mc_integral_is_thread_independent():
    oracle = McOracle(5, sample_count=300_000, seed=11, shard_size=1 << 16,
                      power=matched_power(5, integrand_decay(5, 0.0, "der0")))
    fn = weighted_integrand(5, 0.0, "der0")
    a = mc_integral(oracle, fn, threads=1)
    b = mc_integral(oracle, fn, threads=3)
    assert a == b


@pytest.mark.parametrize("kind,b", [("der0", 0.0), ("pair0", 3.5), ("pairh", 3.5),
                                    ("energy", 3.9)])
def test_mc_agrees_with_quadrature(kind, b):
    oracle = McOracle(5, sample_count=400_000, seed=5,
                      power=matched_power(5, integrand_decay(5, b, kind)))
    est, se = mc_integral(oracle, weighted_integrand(5, b, kind))
    assert abs(est - weighted_bubble_integral(5, b, kind)) < 4 * se
