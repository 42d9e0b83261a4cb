import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bubblestrip.bubbles import Dimension
from bubblestrip.errors import ConfigError, InvalidArgument
from bubblestrip.norms import (CloudSpec, FieldSample, NormParams, dstar_weight, norm_dstar,
                               norm_star, sample_cloud, sigma_weight, star_weight)

DIM = Dimension(5, 1)


def _params(mu=50.0, L=2.0, x=None, vartheta=0.01):
    return NormParams(DIM, L, np.zeros(5) if x is None else x, mu, vartheta)


def test_parameter_validation():
    with pytest.raises(ConfigError):
        _params(vartheta=0.6)
    with pytest.raises(ConfigError):
        _params(vartheta=0.0)
    with pytest.raises(InvalidArgument):
        NormParams(DIM, 2.0, np.zeros(4), 1.0)
    assert _params().tau == pytest.approx(1.49)


def test_default_cloud_inside_cell_and_deterministic():
    p = _params()
    c = sample_cloud(p)
    assert np.all(np.abs(c[:, 0]) <= 1.0 + 1e-12)
    assert len(c) == 1017
    assert len(c) <= CloudSpec().size_bound(5) + 1
    np.testing.assert_array_equal(c, sample_cloud(p))
    assert np.any(np.all(c == 0.0, axis=1))


def test_cloud_radial_extent():
    p = _params(mu=10.0, L=4.0)
    c = sample_cloud(p)
    r = np.linalg.norm(c, axis=1)
    assert r[r > 0].min() == pytest.approx(0.1 / 10.0)
    assert np.linalg.norm(c[:, 1:], axis=1).max() == pytest.approx(10.0 * 4.0)


def test_refined_cloud_contains_default():
    p = _params()
    base = sample_cloud(p)
    fine = sample_cloud(p, CloudSpec().refined())
    assert len(fine) == 3581
    fine_set = {tuple(np.round(v, 12)) for v in fine}
    assert all(tuple(np.round(v, 12)) in fine_set for v in base)


def test_sigma_weight_bounds():
    p = _params(mu=20.0)
    y = np.array([[0, 0, 0, 0, 0], [0.5, 0, 0, 0, 0], [0, 0, 5.0, 0, 0]], float)
    s = sigma_weight(p, y)
    assert np.all(s <= 1.0) and np.all(s > 0)
    assert s[0] == pytest.approx(20.0 ** -(p.tau - 1))


def test_weights_against_direct_lattice_sum():
    p = _params(mu=5.0, x=np.array([0.1, 0, 0, 0, 0]))
    y = np.array([[0.3, 0.2, 0, 0, 0], [-0.9, 0, 0, 1.0, 0]])
    j = np.arange(-20000, 20001)
    for lead, fn in ((1.5, star_weight), (3.5, dstar_weight)):
        got = fn(p, y)
        for i in range(2):
            d = np.sqrt((y[i, 0] - 0.1 + 2.0 * j) ** 2 + np.sum(y[i, 1:] ** 2))
            direct = np.sum(5.0**lead * (1 + 5.0 * d) ** -(lead + p.tau))
            assert got[i] == pytest.approx(sigma_weight(p, y[i]) * direct, rel=1e-7)


def test_weight_periodic_in_first_coordinate():
    p = _params(mu=8.0)
    y = np.array([[0.4, 0.3, 0.1, 0, 0]])
    y2 = y + np.array([2.0, 0, 0, 0, 0])
    # sigma is not periodic, so compare the lattice factor only
    assert star_weight(p, y)[0] / sigma_weight(p, y)[0] == pytest.approx(
        star_weight(p, y2)[0] / sigma_weight(p, y2)[0], rel=1e-8)


def test_norm_of_weight_is_one():
    p = _params()
    pts = sample_cloud(p)
    assert norm_star(p, FieldSample(pts, star_weight(p, pts))) == pytest.approx(1.0)
    assert norm_dstar(p, FieldSample(pts, -dstar_weight(p, pts))) == pytest.approx(1.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(-1e3, 1e3).filter(lambda c: abs(c) > 1e-6))
def test_norm_homogeneity(c):
    p = _params(mu=12.0)
    pts = sample_cloud(p, CloudSpec(shells=4, sobol=4, far=3))
    f = np.cos(pts[:, 0]) + pts[:, 1] ** 2
    a = norm_star(p, FieldSample(pts, f))
    assert norm_star(p, FieldSample(pts, c * f)) == pytest.approx(abs(c) * a, rel=1e-12)


def test_pair_norm_is_sum_of_components():
    p = _params(mu=12.0)
    pts = sample_cloud(p, CloudSpec(shells=4, sobol=4, far=3))
    f, g = np.sin(pts[:, 0]), pts[:, 2]
    pair = norm_dstar(p, FieldSample(pts, np.column_stack([f, g])))
    assert pair == pytest.approx(norm_dstar(p, FieldSample(pts, f))
                                 + norm_dstar(p, FieldSample(pts, g)))


def test_field_sample_validation():
    p = _params()
    with pytest.raises(InvalidArgument):
        FieldSample(np.zeros((0, 5)), np.zeros(0))
    with pytest.raises(InvalidArgument):
        FieldSample(np.zeros((3, 5)), np.zeros(2))
    with pytest.raises(InvalidArgument):
        norm_star(p, FieldSample(np.array([[1.5, 0, 0, 0, 0]]), np.ones(1)))
    with pytest.raises(InvalidArgument):
        norm_star(p, np.ones(3))
