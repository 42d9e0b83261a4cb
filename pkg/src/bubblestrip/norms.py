"""Weighted sup-norms on the strip cell and the deterministic sample cloud.

For a bubble with center x and rate mu, images x_j = x - L P_j and
tau = (N-2)/2 - vartheta, the weights are

    star(y)  = sigma(y) sum_j mu^{(N-2)/2} (1 + mu |y - x_j|)^{-((N-2)/2 + tau)}
    dstar(y) = sigma(y) sum_j mu^{(N+2)/2} (1 + mu |y - x_j|)^{-((N+2)/2 + tau)}
    sigma(y) = min{1, ((1 + mu |y - x|) / mu)^{tau - 1}}

The norms of a sampled field are the largest ratio |value| / weight over
the sample. This is a lower bound of the supremum over the cell, exact on
the sample.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm as normal_dist
from scipy.stats import qmc

from .bubbles import Dimension
from .errors import ConfigError, InvalidArgument
from .lattice import DEFAULT_FIELD_TOL, image_sum

DEFAULT_VARTHETA = 0.01


@dataclass(frozen=True)
class NormParams:
    """Norm parameters: dimension, period, bubble center and rate, vartheta."""

    dim: Dimension
    L: float
    x: tuple
    mu: float
    vartheta: float = DEFAULT_VARTHETA

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in np.ravel(self.x)))
        N, k = self.dim.N, self.dim.k
        if len(self.x) != N:
            raise InvalidArgument(f"center must have {N} coordinates")
        if not (self.mu > 0 and self.L > 0):
            raise InvalidArgument("rate and period must be positive")
        if not 0 < self.vartheta < (N - 2) / 2 - k:
            raise ConfigError(
                f"need 0 < vartheta < (N-2)/2 - k = {(N - 2) / 2 - k}, got {self.vartheta}")
        if not self.tau > 1:
            raise ConfigError(f"need tau > 1 for the sigma weight, got tau = {self.tau}")

    @property
    def tau(self):
        return (self.dim.N - 2) / 2.0 - self.vartheta

    @property
    def center(self):
        return np.asarray(self.x)


def _points(params, y):
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != params.dim.N:
        raise InvalidArgument(f"points must have trailing size {params.dim.N}")
    return y


def sigma_weight(params, y):
    """min{1, ((1 + mu |y - x|) / mu)^{tau - 1}}."""
    y = _points(params, y)
    r = np.linalg.norm(y - params.center, axis=-1)
    mu = params.mu
    return np.minimum(1.0, ((1.0 + mu * r) / mu) ** (params.tau - 1.0))


def _weight(params, y, lead, lattice_tol):
    y = _points(params, y)
    flat = y.reshape(-1, params.dim.N)
    mu, k = params.mu, params.dim.k
    q = lead + params.tau
    amp = mu**lead

    def term(disp):
        return amp * (1.0 + mu * np.linalg.norm(disp, axis=-1)) ** (-q)

    # each term is below amp (mu d)^{-q} with d >= L|P| - |shift'|
    total, _ = image_sum(k, params.L, flat - params.center, term, q, amp * mu ** (-q),
                         rtol=lattice_tol)
    return (sigma_weight(params, flat) * total).reshape(y.shape[:-1])


def star_weight(params, y, lattice_tol=DEFAULT_FIELD_TOL):
    """Denominator of the star norm at ``y``; lattice tail within ``lattice_tol``."""
    return _weight(params, y, (params.dim.N - 2) / 2.0, lattice_tol)


def dstar_weight(params, y, lattice_tol=DEFAULT_FIELD_TOL):
    """Denominator of the double-star norm at ``y``."""
    return _weight(params, y, (params.dim.N + 2) / 2.0, lattice_tol)


@dataclass(frozen=True)
class FieldSample:
    """Field values on points of the cell.

    ``values`` has shape (n,) for a scalar field or (n, 2) for a pair.
    """

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        vals = np.asarray(self.values, dtype=float)
        if len(pts) == 0:
            raise InvalidArgument("field sample is empty")
        if vals.shape[0] != len(pts) or vals.ndim > 2:
            raise InvalidArgument("values must have one entry or pair per point")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    def check_cell(self, L, k):
        if np.any(np.abs(self.points[:, :k]) > L / 2.0 + 1e-12):
            raise InvalidArgument("sample points must lie in the cell")


def _norm(params, f, weight_fn):
    if not isinstance(f, FieldSample):
        raise InvalidArgument("expected a FieldSample")
    f.check_cell(params.L, params.dim.k)
    w = weight_fn(params, f.points)
    vals = f.values if f.values.ndim == 2 else f.values[:, None]
    # a pair is measured by the sum of its component norms
    return float(np.sum(np.max(np.abs(vals) / w[:, None], axis=0)))


def norm_star(params, f):
    """Sampled star norm (lower bound of the supremum over the cell)."""
    return _norm(params, f, star_weight)


def norm_dstar(params, f):
    """Sampled double-star norm (lower bound of the supremum over the cell)."""
    return _norm(params, f, dstar_weight)


@dataclass(frozen=True)
class CloudSpec:
    """Sample cloud layout.

    ``shells`` logarithmic radii from ``inner / mu`` to ``outer`` around the
    center; on each, the 2N axis directions plus ``sobol`` quasi-uniform
    directions. ``far`` points along the first non-periodic axis, spaced
    logarithmically from ``outer`` to ``far_extent * L``, repeated at the
    cell middle and the cell face.
    """

    shells: int = 16
    sobol: int = 52
    far: int = 12
    inner: float = 0.1
    outer: float = 1.0
    far_extent: float = 10.0

    def refined(self):
        """Cloud that contains this one as a subset."""
        return CloudSpec(2 * self.shells - 1, 2 * self.sobol, 2 * self.far - 1,
                         self.inner, self.outer, self.far_extent)

    def size_bound(self, N):
        return self.shells * (2 * N + self.sobol) + 2 * self.far


def _log_grid(lo, hi, n):
    # t = i / (n - 1) is reproduced exactly on refinement (2i / (2n - 2))
    if n == 1:
        return np.array([lo])
    t = np.array([i / (n - 1) for i in range(n)])
    return lo ** (1.0 - t) * hi**t


def _directions(N, count):
    axes = np.vstack([np.eye(N), -np.eye(N)])
    if count == 0:
        return axes
    # points 0 and 1 of the unscrambled sequence map to degenerate directions
    m = int(np.ceil(np.log2(count + 2)))
    u = qmc.Sobol(d=N, scramble=False).random_base2(m)[2:count + 2]
    g = normal_dist.ppf(u)
    g /= np.linalg.norm(g, axis=1)[:, None]
    return np.vstack([axes, g])


def sample_cloud(params, spec=CloudSpec()):
    """Deterministic point cloud in the cell; points outside are dropped."""
    N, k, L = params.dim.N, params.dim.k, params.L
    x = params.center
    radii = _log_grid(spec.inner / params.mu, spec.outer, spec.shells)
    dirs = _directions(N, spec.sobol)
    near = (x[None, None, :] + radii[:, None, None] * dirs[None, :, :]).reshape(-1, N)
    pts = [x[None, :], near]
    if spec.far > 0 and k < N:
        dist = _log_grid(spec.outer, spec.far_extent * L, spec.far)
        for face in (0.0, L / 2.0):
            p = np.zeros((spec.far, N))
            p[:, :k] = x[:k]
            p[:, 0] = face
            p[:, k] = x[k] + dist
            pts.append(p)
    cloud = np.vstack(pts)
    inside = np.all(np.abs(cloud[:, :k]) <= L / 2.0 + 1e-12, axis=1)
    return cloud[inside]
