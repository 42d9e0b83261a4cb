import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bubblestrip import reduction
from bubblestrip.ansatz import AnsatzField, KProfile, k_profile_eval, projected_bubble
from bubblestrip.bubbles import BubbleParams, Dimension
from bubblestrip.errors import InvalidArgument, SolverFailure
from bubblestrip.lattice import LatticeConfig
from bubblestrip.norms import NormParams, dstar_weight, sample_cloud
from bubblestrip.reduction import (SystemConfig, build_system, c0, folded_moment,
                                   center_equation_check, rate_balance_check, reduced_residual,
                                   residual_norm, scaling_exponent, solve_rate, solve_reduced)

MU_EXACT = {2: 0.7093055281649766, 3: 8.079433281754195, 4: 45.395553802558496}


def test_constants_assembled(default_system):
    rs = default_system
    assert rs.J_sets == ((0, 1, 2, 3, 4), (0, 1, 2, 3, 4))
    assert rs.scales == (1.0, 1.0)
    assert rs.S.value == pytest.approx(0.030448457058, rel=1e-11)
    assert rs.B(0, 1) == pytest.approx(284.37011525637797, rel=1e-12)
    assert rs.dip(0) == pytest.approx(5 * 189.58007684, rel=1e-9)
    assert rs.interaction < 0


def test_synchronized_integral_identity(default_system):
    rs = default_system
    ts = rs.two_star
    assert (ts - 1) * rs.der0.value == pytest.approx(-(rs.N - 2) / 2 * rs.sync.B1, rel=1e-6)
    assert (ts - 1) * rs.der0_v == pytest.approx(-(rs.N - 2) / 2 * rs.sync.B2, rel=1e-6)


def test_center_components_vanish_and_are_odd(default_system):
    r0 = reduced_residual(default_system, np.zeros(5), 10.0, 2)
    assert np.all(r0[:5] == 0.0)
    x = np.array([0.01, -0.02, 0.003, 0.0, 0.005])
    a = reduced_residual(default_system, x, 10.0, 2)
    b = reduced_residual(default_system, -x, 10.0, 2)
    np.testing.assert_array_equal(a[:5], -b[:5])
    assert a[5] == b[5]


def test_rate_component_changes_sign(default_system):
    # mu_L(4) is about 45, between the two probes
    lo = reduced_residual(default_system, np.zeros(5), 10.0, 4)[5]
    hi = reduced_residual(default_system, np.zeros(5), 1e6, 4)[5]
    assert lo < 0 < hi


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 500.0))
def test_rate_component_homogeneity(mu):
    rs = build_system(SystemConfig.default())
    L = 3
    curv = -(rs.dip(0) + rs.dip(1)) * mu**-3.5
    inter = -rs.interaction * mu**-3.0 * L**-3.0
    assert reduced_residual(rs, np.zeros(5), mu, L)[5] == pytest.approx(curv + inter, rel=1e-12)
    doubled = reduced_residual(rs, np.zeros(5), 2 * mu, L)[5]
    assert doubled == pytest.approx(2**-3.5 * curv + 2**-3.0 * inter, rel=1e-12, abs=1e-15)


def test_residual_validation(default_system):
    with pytest.raises(InvalidArgument):
        reduced_residual(default_system, np.zeros(4), 1.0, 2)
    with pytest.raises(InvalidArgument):
        reduced_residual(default_system, np.zeros(5), -1.0, 2)


@pytest.mark.parametrize("L", [2, 3, 4])
def test_solve_reduced_default(default_system, L):
    x, mu = solve_reduced(default_system, L)
    assert np.all(x == 0.0)
    assert mu == pytest.approx(MU_EXACT[L], rel=1e-12)
    res = reduced_residual(default_system, x, mu, L)
    scale = (default_system.dip(0) + default_system.dip(1)) * mu**-3.5
    assert abs(res[5]) < 1e-10 * scale


def test_solve_reduced_validation(default_system):
    with pytest.raises(InvalidArgument):
        solve_reduced(default_system, 2.5)
    with pytest.raises(InvalidArgument):
        solve_reduced(default_system, 1)


def test_bracket_failure_is_solver_failure(default_system, monkeypatch):
    monkeypatch.setattr(reduction, "BRACKET", (10.0, 100.0))
    with pytest.raises(SolverFailure):
        solve_rate(default_system, 3)


def test_c0_closed_form(default_system):
    rs = default_system
    ts = rs.two_star
    A = 2 * 5 * 189.58007683758535
    D = (ts - 1) * rs.S.value * 2 * 2.25 * rs.sync.B1 * rs.der0.value
    assert c0(rs) == pytest.approx((A / -D) ** 2, rel=1e-12)
    assert c0(rs) == pytest.approx(0.01108289887757776, rel=1e-12)
    assert scaling_exponent(rs) == pytest.approx(6.0)


@pytest.mark.parametrize("convention,value", [("exact", 0.01108289887757776),
                                              ("linear", 0.024936522474549968),
                                              ("unit", 0.05610717556773742)])
def test_c0_conventions(convention, value):
    rs = build_system(SystemConfig.default(convention=convention))
    assert c0(rs) == pytest.approx(value, rel=1e-12)
    _, mu = solve_reduced(rs, 3)
    assert mu * 3.0**-6 == pytest.approx(value, rel=1e-12)


def test_c0_decreases_with_weaker_dip(default_system):
    weak = build_system(SystemConfig.default(a=-0.5))
    assert c0(weak) == pytest.approx(0.00277072471939444, rel=1e-12)
    assert c0(weak) < c0(default_system)
    assert c0(weak) / c0(default_system) == pytest.approx(0.25, rel=1e-12)


def test_perturbed_profile_keeps_center():
    kp1 = KProfile((-1.2, -1, -1, -1, -1), (3.5,) * 5)
    kp2 = KProfile.uniform(5)
    rs = build_system(SystemConfig(Dimension(5, 1), kp1, kp2))
    x, mu = solve_reduced(rs, 3)
    assert np.all(x == 0.0)
    # only the first dip grows: A_total goes from 10 to 10.2 units, mu ~ A^2
    assert mu == pytest.approx(MU_EXACT[3] * 1.02**2, rel=1e-12)
    assert mu == pytest.approx(8.405842386337055, rel=1e-12)
    assert rs.B(0, 1) > rs.B(0, 2) > 0


@pytest.mark.parametrize("L", [2, 3, 4])
def test_scaling_sweep(default_system, L):
    study = reduction.scaling_sweep(default_system, (2, 3, 4))
    assert study.slope == pytest.approx(6.0, rel=1e-10)
    assert study.mu_solutions[L - 2] == pytest.approx(MU_EXACT[L], rel=1e-12)


def test_folded_moment_properties():
    assert folded_moment(5, 3.5, 0.0) == 0.0
    assert folded_moment(5, 3.5, -0.3) == pytest.approx(-folded_moment(5, 3.5, 0.3), rel=1e-14)
    # small c: I(c) ~ 2 beta c int t^{beta} (1 + t^2)^{-4} dt
    from scipy.special import beta as beta_fn
    c = 1e-6
    lin = 2 * 3.5 * c * 0.5 * beta_fn(2.25, 4 - 2.25)
    assert folded_moment(5, 3.5, c) == pytest.approx(lin, rel=1e-5)


def test_center_equation_zero_center(default_system):
    rows = center_equation_check(default_system, np.zeros(5), 1000.0, 2)
    assert all(r["full"] == 0.0 and r["leading"] == 0.0 for r in rows)


def test_center_equation_deviation_and_linearity(default_system):
    x = np.array([1e-4, 0, 0, 0, 0])
    full = center_equation_check(default_system, x, 1000.0, 2)[0]
    assert abs(full["rel_dev"]) < 0.2
    assert full["rel_dev"] == pytest.approx(0.008738, rel=1e-3)
    half = center_equation_check(default_system, x / 2, 1000.0, 2)[0]
    # the remainder is odd in x, so its relative size falls like (mu x)^2
    assert half["rel_dev"] / full["rel_dev"] == pytest.approx(0.25, rel=0.05)
    assert abs(half["full"] - full["full"] / 2) < abs(full["full"] - full["leading"])
    with pytest.raises(InvalidArgument):
        center_equation_check(default_system, np.full(5, 0.01), 1000.0, 2)


def test_rate_balance(default_system):
    at = rate_balance_check(default_system, MU_EXACT[3], 3)
    assert abs(at["ratio"] + 1) < 0.2
    assert abs(rate_balance_check(default_system, 5.0, 3)["ratio"]) > 1
    assert abs(rate_balance_check(default_system, 50.0, 3)["ratio"]) < 1
    # the cutoff version is a finite-mu diagnostic; it tends to the full one
    far = rate_balance_check(default_system, 1e4, 3)
    assert far["ratio_cutoff"] == pytest.approx(far["ratio"], rel=0.05)


def test_residual_norm_k_part_grows_off_center(default_system):
    rs = default_system
    mu = 20.0

    def k_part(x):
        af = AnsatzField(BubbleParams(x, mu), rs.sync, LatticeConfig(5, 1, 2.0))
        p = NormParams(rs.config.dim, 2.0, x, mu)
        pts = sample_cloud(p)
        pu, _, _ = projected_bubble(af, pts)
        K = k_profile_eval(rs.config.k1, pts)
        return np.max(np.abs((K - 1) * pu ** (rs.two_star - 1)) / dstar_weight(p, pts))

    assert k_part(np.array([1 / mu, 0, 0, 0, 0])) > k_part(np.zeros(5))


def test_residual_norm_frozen(default_system):
    assert residual_norm(default_system, 2, 20.0) == pytest.approx(1.2003139877796054, rel=1e-9)
