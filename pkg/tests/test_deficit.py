import numpy as np
import pytest

from bubblestrip.deficit import OuterDeficit
from bubblestrip.errors import InvalidArgument

N, L = 5, 2.0

# Independent oracle: two-dimensional quadrature (axial and radial variable)
# of the outside source against the periodic Green's function summed
# directly over 6001 images plus an integral tail, N = 5, L = 2, x = 0,
# amplitude mu^{7/2}.
ORACLE = {
    (0.7, 0.0): 0.011876450760950315,
    (0.7, 0.6): 0.013315326328735694,
    (3.0, 0.0): 0.0003177718354384482,
    (3.0, 0.6): 0.0004609356223792372,
    (20.0, 0.0): 4.75446760387186e-07,
    (20.0, 0.6): 7.131269700161686e-07,
}


@pytest.fixture(scope="module", params=[0.7, 3.0, 20.0])
def deficit(request):
    mu = request.param
    return OuterDeficit(N, L, np.zeros(N), mu, mu**3.5)


def test_matches_quadrature_oracle(deficit):
    for y1 in (0.0, 0.6):
        val = deficit(np.array([y1, 0, 0, 0, 0]))
        assert val == pytest.approx(ORACLE[(deficit.mu, y1)], rel=2e-5)


def test_nonnegative_even_and_periodic(deficit):
    rng = np.random.default_rng(4)
    y = np.column_stack([rng.uniform(-1, 1, 60), rng.normal(scale=0.7, size=(60, 4))])
    d = deficit(y)
    assert np.all(d > 0)
    flip = y.copy()
    flip[:, 0] *= -1
    np.testing.assert_allclose(deficit(flip), d, rtol=1e-10)
    shift = y.copy()
    shift[:, 0] += L
    np.testing.assert_allclose(deficit(shift), d, rtol=1e-10)


def test_mode_zero_closed_form_against_quadrature(deficit):
    from scipy import integrate
    rho = 0.4
    p = (N + 2) / 2
    f = lambda t: deficit.A * (1 + deficit.mu**2 * (t * t + rho * rho)) ** -p
    outside = 2 * integrate.quad(f, L / 2, np.inf, epsabs=0, epsrel=1e-12)[0]
    assert deficit.source_mode0(rho) == pytest.approx(outside / L, rel=1e-10)


def test_error_estimate_is_small_relative(deficit):
    val = deficit(np.zeros(N))
    assert deficit.error < 1e-3 * val


def test_shifted_center_is_mirror_symmetric():
    x = np.array([0.2, 0, 0, 0, 0])
    xm = -x
    a = OuterDeficit(N, L, x, 3.0, 3.0**3.5)
    b = OuterDeficit(N, L, xm, 3.0, 3.0**3.5)
    y = np.array([[0.5, 0.1, 0, 0, 0], [-0.3, 0, 0.4, 0, 0]])
    ym = y * np.array([-1, 1, 1, 1, 1])
    np.testing.assert_allclose(a(y), b(ym), rtol=1e-9)


def test_validation():
    with pytest.raises(InvalidArgument):
        OuterDeficit(4, L, np.zeros(4), 1.0, 1.0)
    with pytest.raises(InvalidArgument):
        OuterDeficit(N, L, np.array([1.0, 0, 0, 0, 0]), 1.0, 1.0)
