"""Bubble family W_{x,mu}, its parameter derivatives and the synchronized pair.

The bubble

    W_{x,mu}(y) = C_N mu^{(N-2)/2} / (1 + mu^2 |y - x|^2)^{(N-2)/2},
    C_N = (N (N-2))^{(N-2)/4},

solves -Delta W = W^{2*-1} on R^N with 2* = 2N/(N-2). A synchronized pair
(U, V) = (s W, kappa s W) solves the coupled limit system with coupling 1/2.
"""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, InvalidArgument, SolverFailure

KAPPA_SCAN = (1e-6, 10.0)
ROOT_TOL = 1e-12
MAX_ROOT_ITER = 200


@dataclass(frozen=True)
class Dimension:
    """Ambient dimension N and periodic rank k, with 2k < N - 2."""

    N: int
    k: int = 1

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 5:
            raise ConfigError(f"dimension must satisfy N >= 5, got N={self.N}")
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"periodic rank must satisfy k >= 1, got k={self.k}")
        if not 2 * self.k < self.N - 2:
            raise ConfigError(
                f"hypothesis 2k < N-2 violated: 2*{self.k} >= {self.N}-2"
            )

    @property
    def two_star_exact(self):
        return Fraction(2 * self.N, self.N - 2)

    @property
    def two_star(self):
        return 2.0 * self.N / (self.N - 2)


@dataclass(frozen=True)
class BubbleParams:
    """Concentration center ``x`` (length N) and rate ``mu`` > 0."""

    x: tuple
    mu: float

    def __post_init__(self):
        x = tuple(float(v) for v in np.ravel(self.x))
        object.__setattr__(self, "x", x)
        if not np.all(np.isfinite(x)):
            raise InvalidArgument("bubble center must be finite")
        if not (np.isfinite(self.mu) and self.mu > 0):
            raise InvalidArgument(f"bubble rate must be positive, got {self.mu}")

    @classmethod
    def centered(cls, N, mu):
        return cls(tuple([0.0] * N), mu)

    @property
    def center(self):
        return np.asarray(self.x)


def bubble_constant(N):
    """C_N = (N(N-2))^{(N-2)/4}."""
    return float(N * (N - 2)) ** ((N - 2) / 4.0)


def _as_points(dim, y):
    pts = np.asarray(y, dtype=float)
    if pts.shape[-1] != dim.N:
        raise InvalidArgument(f"points must have trailing size {dim.N}")
    if not np.all(np.isfinite(pts)):
        raise InvalidArgument("evaluation point must be finite")
    return pts


def _sq_dist(dim, p, y):
    pts = _as_points(dim, y)
    diff = pts - p.center
    return diff, np.einsum("...i,...i->...", diff, diff)


def standard_bubble(dim, p, y):
    """Evaluate W_{x,mu} at ``y`` (any array with trailing axis N)."""
    N = dim.N
    _, r2 = _sq_dist(dim, p, y)
    mu = p.mu
    return bubble_constant(N) * mu ** ((N - 2) / 2) * (1.0 + mu * mu * r2) ** (-(N - 2) / 2)


def bubble_derivative(dim, p, y, h, scale=1.0):
    """Closed-form partial derivative of ``scale * W_{x,mu}``.

    ``h`` in 1..N differentiates in the center coordinate x_h, ``h = N+1``
    in the rate mu.
    """
    N = dim.N
    if int(h) != h or not 1 <= h <= N + 1:
        raise InvalidArgument(f"derivative index must lie in 1..{N + 1}, got {h}")
    diff, r2 = _sq_dist(dim, p, y)
    mu = p.mu
    c = scale * bubble_constant(N)
    q = 1.0 + mu * mu * r2
    if h <= N:
        return c * (N - 2) * mu ** ((N + 2) / 2) * diff[..., h - 1] * q ** (-N / 2)
    return c * (N - 2) / 2 * mu ** ((N - 4) / 2) * (1.0 - mu * mu * r2) * q ** (-N / 2)


def bubble_laplacian(dim, p, y):
    """Closed-form Laplacian of W_{x,mu}; equals -W^{2*-1}."""
    N = dim.N
    _, r2 = _sq_dist(dim, p, y)
    mu = p.mu
    c = bubble_constant(N)
    # radial formula W'' + (N-1)/r W' written in q = 1 + mu^2 r^2
    q = 1.0 + mu * mu * r2
    return -c * (N - 2) * N * mu ** ((N + 2) / 2) * q ** (-(N + 2) / 2)


def coupling_polynomial(kappa, N):
    """2 + kappa^{2*/2} - kappa^{2*/2-1} - 2 kappa^{2*-1}."""
    a = N / (N - 2)
    kappa = np.asarray(kappa, dtype=float)
    return 2.0 + kappa**a - kappa ** (a - 1) - 2.0 * kappa ** (2 * a - 1)


def coupling_roots(N, bracket=KAPPA_SCAN, samples=4000):
    """All sign-change roots of the coupling polynomial on the bracket."""
    lo, hi = bracket
    grid = np.geomspace(lo, hi, samples)
    grid = np.unique(np.append(grid, 1.0))
    vals = coupling_polynomial(grid, N)
    roots = [float(g) for g, v in zip(grid, vals) if v == 0.0]
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa * fb < 0:
            r = brentq(lambda t: float(coupling_polynomial(t, N)), a, b,
                       xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=MAX_ROOT_ITER)
            roots.append(float(r))
    roots = sorted(set(roots))
    bad = [r for r in roots if abs(coupling_polynomial(r, N)) >= ROOT_TOL]
    if bad:
        raise SolverFailure(f"coupling roots {bad} miss the residual tolerance")
    return roots


@dataclass(frozen=True)
class SyncConstants:
    """Synchronized constants for one dimension.

    ``B1`` and ``B2`` are the masses of U^{2*-1} and V^{2*-1}.
    """

    N: int
    kappa: float
    s: float
    t: float
    C_N: float
    B1: float
    B2: float
    roots: tuple = field(default=())

    @property
    def two_star(self):
        return 2.0 * self.N / (self.N - 2)

    @property
    def amplitude_ratio(self):
        """A1/A2 = kappa^{2*-1}."""
        return self.kappa ** (self.two_star - 1)

    @property
    def source_factor_u(self):
        """Ratio of the U-source U^{2*-1} + U^{2*/2-1}V^{2*/2}/2 to U^{2*-1}."""
        return 1.0 + 0.5 * self.kappa ** (self.two_star / 2)

    @property
    def source_factor_v(self):
        return 1.0 + 0.5 * self.kappa ** (-self.two_star / 2)

    @property
    def polynomial_residual(self):
        return float(coupling_polynomial(self.kappa, self.N))

    @property
    def scale_residual(self):
        a = self.two_star / 2
        return self.s ** (self.two_star - 2) - 2.0 / (2.0 + self.kappa**a)


def sync_scale(N, kappa=1.0):
    """s from s^{2*-2} = 2 / (2 + kappa^{2*/2})."""
    two_star = 2.0 * N / (N - 2)
    return (2.0 / (2.0 + kappa ** (two_star / 2))) ** (1.0 / (two_star - 2))


def solve_synchronized(dim):
    """Solve for (kappa, s, t) and fill the bubble masses.

    Every root of the coupling polynomial found on (0, 10] is kept in
    ``roots``; the root kappa = 1 is the one used downstream.
    """
    from .quadrature import radial_bubble_integral

    N = dim.N if isinstance(dim, Dimension) else int(dim)
    roots = coupling_roots(N)
    if not roots:
        raise SolverFailure("coupling polynomial has no sign change on the bracket")
    kappa = min(roots, key=lambda r: abs(r - 1.0))
    if abs(kappa - 1.0) < 1e-12 and coupling_polynomial(1.0, N) == 0.0:
        kappa = 1.0
    s = sync_scale(N, kappa)
    t = kappa * s
    two_star = 2.0 * N / (N - 2)
    mass = radial_bubble_integral(N, two_star - 1)
    B1 = s ** (two_star - 1) * mass
    B2 = t ** (two_star - 1) * mass
    return SyncConstants(N=N, kappa=kappa, s=s, t=t, C_N=bubble_constant(N),
                         B1=B1, B2=B2, roots=tuple(roots))


def sync_bubble_pair(dim, sc, p, y):
    """(U, V) = (s W, t W) at ``y``."""
    w = standard_bubble(dim, p, y)
    return sc.s * w, sc.t * w
