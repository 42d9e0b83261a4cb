"""Projected bubble pair on the strip, the curvature profiles and the error term.

The projected bubble PU solves -Delta PU = U^{2*-1} + U^{2*/2-1} V^{2*/2} / 2
in the cell with periodic boundary conditions. For the synchronized pair
(U, V) = (s W, kappa s W) the source equals -Delta U, so PU is the cell
part of the source convolved with the periodic Green's function:

    PU = sum_j U_j - D,

where U_j is the bubble translated by L P_j and D >= 0 is the potential of
the source mass lying outside the cell, folded back periodically. Far from
its center, U_j approaches

    m_j = M Gamma(x + L P_j, y) / mu^{(N-2)/2},   M = integral of -Delta U_{0,1},

and phi_1 = U - PU is compared against -sum_{j >= 1} m_j.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .bubbles import BubbleParams, Dimension, SyncConstants, bubble_constant
from .deficit import OuterDeficit
from .errors import ConfigError, InvalidArgument, SolverFailure
from .lattice import (DEFAULT_FIELD_TOL, LatticeConfig, image_sum, lattice_points,
                      sphere_area)
from .quadrature import McOracle

MULTIPOLE_LIMIT = 0.2
DEFAULT_DELTA = 0.25


# ---------------------------------------------------------------------------
# curvature profiles


def _bump_psi(u):
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def cutoff(t):
    """Smooth step: 1 on [0, 1/2], 0 on [1, inf), C-infinity in between."""
    t = np.asarray(t, dtype=float)
    u = np.clip(2.0 * t - 1.0, -1.0, 2.0)
    a = _bump_psi(1.0 - u)
    b = _bump_psi(u)
    return a / (a + b)


@dataclass(frozen=True)
class KProfile:
    """K(y) = 1 + sum_i a_i |y_i|^{beta_i} near the origin, blended to 1 at radius delta.

    ``k`` leading coordinates are periodic with period 1.
    """

    a: tuple
    beta: tuple
    delta: float = DEFAULT_DELTA
    k: int = 1

    def __post_init__(self):
        a = tuple(float(v) for v in self.a)
        beta = tuple(float(v) for v in self.beta)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "beta", beta)
        N = len(a)
        if len(beta) != N or N < 5:
            raise ConfigError("profile needs N >= 5 coefficients and exponents")
        if any(v == 0 for v in a):
            raise ConfigError("profile coefficients must be non-zero")
        if any(not (N - 2 < b < N) for b in beta):
            raise ConfigError(f"profile exponents must lie in (N-2, N) = ({N - 2}, {N})")
        if not self.beta_max < self.beta_min * (1.0 + 1.0 / (N - 2)):
            raise ConfigError("profile exponents violate max beta < min beta (1 + 1/(N-2))")
        if not sum(a[i] for i in self.leading) < 0:
            raise ConfigError("sum of coefficients at the smallest exponent must be negative")
        if not 0 < self.delta < 0.5:
            raise ConfigError("cutoff radius must lie in (0, 1/2)")
        if not 2 * self.k < N - 2:
            raise ConfigError(f"hypothesis 2k < N-2 violated: 2*{self.k} >= {N}-2")
        if 1.0 + sum(min(v, 0.0) * self.delta**b for v, b in zip(a, beta)) <= 0:
            raise ConfigError("profile is not positive on its cutoff ball")

    @property
    def N(self):
        return len(self.a)

    @property
    def beta_min(self):
        return min(self.beta)

    @property
    def beta_max(self):
        return max(self.beta)

    @property
    def leading(self):
        """Indices (0-based) where the exponent equals the smallest one."""
        return tuple(i for i, b in enumerate(self.beta) if b == self.beta_min)

    @property
    def slack(self):
        """Regularity slack of the remainder: the expansion is exact near 0."""
        return math.inf

    @classmethod
    def uniform(cls, N, a=-1.0, beta=3.5, delta=DEFAULT_DELTA, k=1):
        return cls(tuple([a] * N), tuple([beta] * N), delta, k)


def reduce_cell(y, k, period=1.0):
    """Map the first k coordinates into [-period/2, period/2)."""
    y = np.array(y, dtype=float)
    y[..., :k] = np.mod(y[..., :k] + period / 2.0, period) - period / 2.0
    return y


def k_profile_eval(kp, y):
    """Evaluate the periodized profile at points ``y`` (trailing axis N)."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != kp.N:
        raise InvalidArgument(f"points must have trailing size {kp.N}")
    yh = reduce_cell(y, kp.k)
    r = np.linalg.norm(yh, axis=-1)
    dip = sum(a * np.abs(yh[..., i]) ** b for i, (a, b) in enumerate(zip(kp.a, kp.beta)))
    return 1.0 + cutoff(r / kp.delta) * dip


# ---------------------------------------------------------------------------
# projected bubble


@lru_cache(maxsize=32)
def _cached_deficit(N, L, x, mu, amplitude):
    return OuterDeficit(N, L, np.asarray(x), mu, amplitude)


@dataclass(frozen=True)
class AnsatzField:
    """Projected bubble pair for center ``params.x`` and rate ``params.mu``."""

    params: BubbleParams
    sync: SyncConstants
    lattice: LatticeConfig
    image_order: int = 0
    tol: float = DEFAULT_FIELD_TOL
    dim: Dimension = field(init=False)

    def __post_init__(self):
        N, k = self.lattice.N, self.lattice.k
        object.__setattr__(self, "dim", Dimension(N, k))
        if self.sync.N != N or len(self.params.x) != N:
            raise InvalidArgument("bubble, constants and lattice dimensions differ")
        if self.image_order != 0:
            raise InvalidArgument("only multipole order 0 is available")
        if np.any(np.abs(self.params.center[:k]) >= self.lattice.L / 2):
            raise InvalidArgument("bubble center must lie inside the cell")

    @property
    def N(self):
        return self.lattice.N

    @property
    def L(self):
        return self.lattice.L

    @property
    def mu(self):
        return self.params.mu

    @property
    def x(self):
        return self.params.center

    @property
    def source_amplitude(self):
        """a with source a mu^{(N+2)/2} (1 + mu^2 |z - x|^2)^{-(N+2)/2}."""
        N = self.N
        return self.sync.s * bubble_constant(N) ** ((N + 2) / (N - 2))

    @property
    def image_mass(self):
        """Total source mass M of one bubble at mu = 1 (equals c_U B1)."""
        return self.sync.source_factor_u * self.sync.B1

    @property
    def center_margin(self):
        """Distance from the center to the cell faces."""
        k = self.lattice.k
        return self.L / 2.0 - float(np.max(np.abs(self.x[:k])))

    def with_params(self, x=None, mu=None):
        x = self.params.x if x is None else x
        mu = self.mu if mu is None else mu
        return AnsatzField(BubbleParams(x, mu), self.sync, self.lattice, self.image_order, self.tol)

    def deficit(self):
        if self.lattice.k != 1:
            raise InvalidArgument("the exact outer deficit is available for k = 1 only")
        a = self.source_amplitude * self.mu ** ((self.N + 2) / 2.0)
        return _cached_deficit(self.N, self.L, tuple(self.params.x), self.mu, a)

    def certified_error(self, y):
        return projected_bubble(self, y)[2]


def _kernel(N, d):
    return 1.0 / ((N - 2) * sphere_area(N)) * d ** (-(N - 2))


def _points(af, y):
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != af.N:
        raise InvalidArgument(f"points must have trailing size {af.N}")
    return y.reshape(-1, af.N), y.shape[:-1]


def bubble_u(af, y):
    """U = s W at ``y``."""
    flat, shape = _points(af, y)
    N, mu = af.N, af.mu
    r2 = np.sum((flat - af.x) ** 2, axis=1)
    val = af.sync.s * bubble_constant(N) * mu ** ((N - 2) / 2) * (1.0 + mu * mu * r2) ** (-(N - 2) / 2)
    return val.reshape(shape)


def _image_gap(af, d):
    """U_j - m_j as a function of the image distance d (always negative)."""
    N, mu = af.N, af.mu
    amp = af.sync.s * bubble_constant(N) * mu ** (-(N - 2) / 2)
    return amp * d ** (-(N - 2)) * np.expm1(-(N - 2) / 2.0 * np.log1p((mu * d) ** -2.0))


def _gap_bound(af, d):
    N, mu = af.N, af.mu
    return (N - 2) / 2.0 * af.sync.s * bubble_constant(N) * mu ** (-(N + 2) / 2) * d ** (-N)


def outer_bound(af, q):
    """Bound on the potential at ``q`` of the source mass outside the cell.

    Splits the outside region at distance R = |q - x|/2 from q: inside the
    ball the source is bounded by its value at distance max(R, margin) from
    x, outside the kernel is bounded by Gamma(R).
    """
    N, mu = af.N, af.mu
    q = np.atleast_2d(np.asarray(q, dtype=float))
    d0 = af.center_margin
    R = 0.5 * np.linalg.norm(q - af.x, axis=1)
    amp = af.source_amplitude * mu ** (-(N + 2) / 2)
    with np.errstate(divide="ignore"):
        near = np.minimum(R, d0) ** (-(N + 2.0)) * R * R / (2.0 * (N - 2))
        far = _kernel(N, R) * sphere_area(N) / (2.0 * d0 * d0)
    return amp * (near + far)


def _lattice_vector(af, j):
    k = af.lattice.k
    if np.ndim(j) == 0:
        j = int(j)
        R = 1
        while len(lattice_points(k, R)) <= j:
            R *= 2
        P = lattice_points(k, R)[j]
    else:
        P = np.asarray(j, dtype=float)
        if P.shape != (k,):
            raise InvalidArgument(f"lattice vector must have {k} entries")
    vec = np.zeros(af.N)
    vec[:k] = af.L * np.asarray(P, dtype=float)
    return vec


OUTER = "outer"


def image_correction(af, j, y, samples=1 << 18, seed=0):
    """Cell integral of Gamma(z + L P_j, y) times the source, at multipole order 0.

    ``j`` is an index into the lattice ordering (0 is the origin) or a
    lattice vector. Returns ``(value, bound)``. When the image is within
    L/4 of ``y`` or the expansion parameter 1/(mu d) exceeds 0.2 the value
    is a Monte-Carlo estimate and ``bound`` its standard error. With
    ``j = OUTER`` the integral over the complement of the cell is returned
    as the enclosure ``(0, bound)``.
    """
    flat, shape = _points(af, y)
    if isinstance(j, str):
        if j != OUTER:
            raise InvalidArgument(f"unknown image index {j!r}")
        b = np.minimum(outer_bound(af, flat), _outer_bound_direct(af, flat))
        return np.zeros(shape), b.reshape(shape)
    shift = _lattice_vector(af, j)
    if not np.any(shift):
        raise InvalidArgument("image index must be non-zero")
    q = flat - shift
    d = np.linalg.norm(q - af.x, axis=1)
    value = af.image_mass * _kernel(af.N, d) * af.mu ** (-(af.N - 2) / 2)
    bound = _gap_bound(af, d) + outer_bound(af, q)
    fallback = (d < af.L / 4.0) | (1.0 / (af.mu * d) > MULTIPOLE_LIMIT)
    for i in np.flatnonzero(fallback):
        value[i], bound[i] = mc_potential(af, q[i], "cell", samples, seed)
    return value.reshape(shape), bound.reshape(shape)


def _outer_bound_direct(af, y):
    """Bound through the distance from ``y`` to the cell faces."""
    N, mu, k = af.N, af.mu, af.lattice.k
    e = af.L / 2.0 - np.max(np.abs(y[:, :k]), axis=1)
    d0 = af.center_margin
    mass = af.source_amplitude * mu ** (-(N + 2) / 2) * sphere_area(N) / (2.0 * d0 * d0)
    with np.errstate(divide="ignore"):
        return mass * _kernel(N, e)


def image_sums(af, y):
    """sum_j U_j(y) over all lattice images, with its certified tail."""
    flat, shape = _points(af, y)
    N, mu, k = af.N, af.mu, af.lattice.k
    amp = af.sync.s * bubble_constant(N) * mu ** ((N - 2) / 2)

    def term(disp):
        return amp * (1.0 + mu * mu * np.sum(disp * disp, axis=-1)) ** (-(N - 2) / 2)

    coef = af.sync.s * bubble_constant(N) * mu ** (-(N - 2) / 2)
    total, tail = image_sum(k, af.L, flat - af.x, term, N - 2, coef, rtol=af.tol)
    return total.reshape(shape), tail.reshape(shape)


def _outer_enclosure(af, flat):
    """Upper bound of the periodized outer deficit for k >= 2."""
    N, mu, k = af.N, af.mu, af.lattice.k
    d0 = af.center_margin
    amp = af.source_amplitude * mu ** (-(N + 2) / 2)

    def term(disp):
        shp = disp.shape[:-1]
        q = (af.x + disp).reshape(-1, N)
        return outer_bound(af, q).reshape(shp)

    coef = amp * (2.0**N / (2.0 * (N - 2)) + 2.0 ** (N - 2) / (2.0 * (N - 2) * d0 * d0))
    far, _ = image_sum(k, af.L, flat - af.x, term, N - 2, coef, rtol=af.tol, skip_origin=True)
    own = np.minimum(outer_bound(af, flat), _outer_bound_direct(af, flat))
    return far + own


def projected_bubble(af, y):
    """(PU, PV, err) at points ``y`` of the cell.

    For k = 1 the outer deficit is evaluated by its Fourier expansion. For
    k >= 2 only the enclosure 0 <= D <= D_max is available; PU is then the
    midpoint and ``err`` includes the half-width.
    """
    flat, shape = _points(af, y)
    k = af.lattice.k
    if np.any(np.abs(flat[:, :k]) > af.L / 2.0 + 1e-12):
        raise InvalidArgument("points must lie in the cell")
    total, tail = image_sums(af, flat)
    if k == 1:
        D = af.deficit()
        defect = D(flat)
        err = tail + D.error
    else:
        half = 0.5 * _outer_enclosure(af, flat)
        defect = half
        err = tail + half
    pu = total - defect
    pv = af.sync.t / af.sync.s * pu
    return pu.reshape(shape), pv.reshape(shape), err.reshape(shape)


def phi_one(af, y):
    """phi_1 = U - PU."""
    pu, _, err = projected_bubble(af, y)
    return bubble_u(af, y) - pu, err


def image_asymptote(af, y, kind="value", h=None):
    """Sums over j >= 1 of the image asymptotes.

    ``kind`` ``"value"``: sum_j M Gamma(x + L P_j, y) / mu^{(N-2)/2};
    ``"mu"``: its mu-derivative; ``"x"``: its derivative in x_h (h 1-based).
    """
    flat, shape = _points(af, y)
    N, mu, k = af.N, af.mu, af.lattice.k
    c = af.image_mass / ((N - 2) * sphere_area(N))

    if kind in ("value", "mu"):
        fac = mu ** (-(N - 2) / 2) if kind == "value" else -(N - 2) / 2 * mu ** (-N / 2)

        def term(disp):
            return fac * c * np.sum(disp * disp, axis=-1) ** (-(N - 2) / 2)

        total, _ = image_sum(k, af.L, af.x - flat, term, N - 2, abs(fac) * c,
                             rtol=af.tol, skip_origin=True)
    elif kind == "x":
        if h is None or not 1 <= h <= N:
            raise InvalidArgument("x-derivative needs h in 1..N")
        fac = mu ** (-(N - 2) / 2)

        def term(disp):
            r2 = np.sum(disp * disp, axis=-1)
            return -(N - 2) * fac * c * disp[..., h - 1] * r2 ** (-N / 2)

        total, _ = image_sum(k, af.L, af.x - flat, term, N - 1, (N - 2) * fac * c,
                             rtol=af.tol, atol=1e-300, skip_origin=True)
    else:
        raise InvalidArgument(f"unknown asymptote kind {kind!r}")
    return total.reshape(shape)


def expansion_deviation(af, y):
    """phi_1 + sum_{j >= 1} m_j, computed without cancellation.

    Equals D - sum_{j >= 1} (U_j - m_j), with both parts non-negative.
    Returns ``(value, err)``.
    """
    flat, shape = _points(af, y)
    N, k = af.N, af.lattice.k
    if k != 1:
        raise InvalidArgument("the expansion deviation needs the exact deficit (k = 1)")

    def gap(disp):
        return _image_gap(af, np.linalg.norm(disp, axis=-1))

    coef = _gap_bound(af, 1.0)
    gaps, tail = image_sum(k, af.L, flat - af.x, gap, N, coef, rtol=af.tol,
                           atol=1e-300, skip_origin=True)
    D = af.deficit()
    val = D(flat) - gaps
    return val.reshape(shape), (tail + D.error).reshape(shape)


# ---------------------------------------------------------------------------
# Monte-Carlo potential


def mc_potential(af, target, region="cell", samples=1 << 18, seed=0):
    """Monte-Carlo integral of Gamma(z, target) times the source over a region.

    ``region`` is ``"cell"``, ``"outside"`` or ``"all"``. Half of the samples
    follow the source profile and half a density with the kernel's
    singularity at ``target``, combined with balance weights so the
    estimator has finite variance. Returns ``(estimate, stderr)``.
    """
    if region not in ("cell", "outside", "all"):
        raise InvalidArgument(f"unknown region {region!r}")
    N, mu, k, L = af.N, af.mu, af.lattice.k, af.L
    target = np.asarray(target, dtype=float)
    src = McOracle(N, sample_count=samples // 2, seed=seed, power=(N + 2) / (N - 2))
    seq_src, seq_sing = np.random.SeedSequence([seed, 1]).spawn(2)
    n = samples // 2
    z1 = af.x + src.sample(seq_src, n) / mu
    # singular component: |w|^{-(N-2)} (1 + |w|^2/l^2)^{-2}, l = 1/mu
    ell = 1.0 / mu
    rng = np.random.Generator(np.random.Philox(seq_sing))
    u = rng.beta(1.0, 1.0, size=n)
    r = ell * np.sqrt(u / (1.0 - u))
    g = rng.standard_normal((n, N))
    g /= np.linalg.norm(g, axis=1)[:, None]
    z2 = target + g * r[:, None]
    z = np.vstack([z1, z2])

    def src_density(pts):
        return mu**N * src.density(mu * (pts - af.x))

    def sing_density(pts):
        w2 = np.sum((pts - target) ** 2, axis=1)
        norm = sphere_area(N) * ell**2 / 2.0
        return w2 ** (-(N - 2) / 2) * (1.0 + w2 / ell**2) ** -2.0 / norm

    f = af.source_amplitude * mu ** ((N + 2) / 2) * (
        1.0 + mu * mu * np.sum((z - af.x) ** 2, axis=1)) ** (-(N + 2) / 2)
    kern = _kernel(N, np.linalg.norm(z - target, axis=1))
    inside = np.all(np.abs(z[:, :k]) <= L / 2.0, axis=1)
    mask = {"cell": inside, "outside": ~inside, "all": np.ones(len(z), bool)}[region]
    wts = np.where(mask, f * kern / (0.5 * src_density(z) + 0.5 * sing_density(z)), 0.0)
    if not np.all(np.isfinite(wts)):
        raise SolverFailure("non-finite Monte-Carlo weight")
    # stratified halves: variance of the mean combines the two strata
    a, b = wts[:n], wts[n:]
    est = 0.5 * (a.mean() + b.mean())
    se = 0.5 * math.sqrt(a.var(ddof=1) / n + b.var(ddof=1) / n)
    return float(est), float(se)


# ---------------------------------------------------------------------------
# checks


def domination_ratio(af, y):
    """PU / sum_j U_j at ``y``; the domination constant is its maximum."""
    pu, _, _ = projected_bubble(af, y)
    total, _ = image_sums(af, y)
    return pu / total


@dataclass(frozen=True)
class ExpansionReport:
    L: float
    mu: float
    points: int
    deviation: float
    scale: float
    ratio: float
    deviation_err: float
    phi_at_center: float
    mu_remainder: float
    mu_ratio: float
    x_remainder: tuple
    x_ratio: tuple


def _filter_ball(af, cloud):
    cloud = np.atleast_2d(np.asarray(cloud, dtype=float))
    return cloud[np.linalg.norm(cloud, axis=1) <= 1.0 + 1e-12]


def phi_expansion_check(af, cloud, rel_step=1e-3, x_step=1e-3, x_dirs=(1, 2)):
    """Compare phi_1 and its parameter derivatives against the image expansion.

    Only cloud points in the unit ball are used. The deviation is
    max |phi_1 + sum_{j>=1} m_j| and is reported with the scale
    L^{-(N-2)} mu^{-(N+2)/2}. The mu-derivative remainder is multiplied by
    mu before forming its ratio; x-derivative remainders use the same scale.
    """
    pts = _filter_ball(af, cloud)
    if len(pts) == 0:
        raise InvalidArgument("cloud has no points in the unit ball")
    N, L, mu = af.N, af.L, af.mu
    scale = L ** (-(N - 2)) * mu ** (-(N + 2) / 2)
    dev, err = expansion_deviation(af, pts)
    phi0, _ = phi_one(af, af.x[None, :])

    up, _ = expansion_deviation(af.with_params(mu=mu * (1 + rel_step)), pts)
    dn, _ = expansion_deviation(af.with_params(mu=mu * (1 - rel_step)), pts)
    mu_rem = float(np.max(np.abs(up - dn) / (2 * mu * rel_step)))

    x_rem = []
    for h in x_dirs:
        e = np.zeros(N)
        e[h - 1] = x_step
        up, _ = expansion_deviation(af.with_params(x=af.x + e), pts)
        dn, _ = expansion_deviation(af.with_params(x=af.x - e), pts)
        x_rem.append(float(np.max(np.abs(up - dn) / (2 * x_step))))
    dmax = float(np.max(np.abs(dev)))
    return ExpansionReport(
        L=L, mu=mu, points=len(pts), deviation=dmax, scale=scale, ratio=dmax / scale,
        deviation_err=float(np.max(err)), phi_at_center=float(phi0[0]),
        mu_remainder=mu_rem, mu_ratio=mu * mu_rem / scale,
        x_remainder=tuple(x_rem), x_ratio=tuple(v / scale for v in x_rem))


def ell(af, k1, k2, y):
    """Error terms (l_1, l_2) of the projected pair at ``y``."""
    flat, shape = _points(af, y)
    ts = af.dim.two_star
    u = bubble_u(af, flat)
    v = af.sync.kappa * u
    pu, pv, _ = projected_bubble(af, flat)
    K1 = k_profile_eval(k1, flat)
    K2 = k_profile_eval(k2, flat)
    h = ts / 2.0
    l1 = K1 * pu ** (ts - 1) - u ** (ts - 1) - 0.5 * (u ** (h - 1) * v**h - pu ** (h - 1) * pv**h)
    l2 = K2 * pv ** (ts - 1) - v ** (ts - 1) - 0.5 * (v ** (h - 1) * u**h - pv ** (h - 1) * pu**h)
    return l1.reshape(shape), l2.reshape(shape)
