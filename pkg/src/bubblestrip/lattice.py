"""Free-space kernel, lattice-periodized Green's function and lattice sums.

Lattice sums sum_P F(|L P + w|) with F decreasing are truncated at index
radius R and bounded beyond it by comparison with an integral over the
k-plane: every lattice point P with |P| > R owns the unit cube around it,
and on that cube |u| <= |P| + sqrt(k)/2.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import zeta

from .errors import ConfigError, InvalidArgument, SingularityError, TruncationFailure

DEFAULT_CONSTANT_TOL = 1e-10
DEFAULT_FIELD_TOL = 1e-8
MAX_LATTICE_POINTS = 4_000_000


def gamma_fn(x):
    """Euler gamma function."""
    return math.gamma(x)


def sphere_area(N):
    """Area of the unit sphere S^{N-1} in R^N."""
    if N < 1:
        raise InvalidArgument("sphere dimension must be positive")
    return 2.0 * math.pi ** (N / 2) / gamma_fn(N / 2)


@lru_cache(maxsize=64)
def lattice_points(k, R):
    """Points of Z^k with |P| <= R, ordered by |P|^2 then lexicographically."""
    R = int(R)
    axis = np.arange(-R, R + 1)
    grid = np.stack(np.meshgrid(*([axis] * k), indexing="ij"), axis=-1).reshape(-1, k)
    norm2 = np.einsum("ij,ij->i", grid, grid)
    keep = norm2 <= R * R
    grid, norm2 = grid[keep], norm2[keep]
    order = np.lexsort(tuple(grid[:, i] for i in range(k - 1, -1, -1)) + (norm2,))
    out = grid[order]
    out.setflags(write=False)
    return out


def lattice_tail_bound(k, L, q, coef, shift, R):
    """Certified bound for sum_{|P|>R} coef * (L|P| - shift)^{-q}.

    Requires q > k. Returns inf when R is too small for the comparison
    (the shifted radius must stay positive).
    """
    if q <= k:
        raise InvalidArgument(f"lattice sum diverges for exponent {q} <= rank {k}")
    d = math.sqrt(k) / 2.0
    e = d + shift / L
    u0 = R - d - e
    if u0 <= 0:
        return math.inf
    area = 2.0 if k == 1 else sphere_area(k)
    return area * coef * L ** (-q) * (1.0 + e / u0) ** (k - 1) * u0 ** (k - q) / (q - k)


@dataclass(frozen=True)
class LatticeConfig:
    """Lattice geometry: period L, rank k, ambient dimension N."""

    N: int
    k: int
    L: float
    max_radius: int = 1 << 16

    def __post_init__(self):
        if not 2 * self.k < self.N - 2:
            raise ConfigError(f"hypothesis 2k < N-2 violated: 2*{self.k} >= {self.N}-2")
        if not self.L > 0:
            raise ConfigError("period L must be positive")


@dataclass(frozen=True)
class GreenEvaluator:
    config: LatticeConfig

    @property
    def kernel_constant(self):
        N = self.config.N
        return 1.0 / ((N - 2) * sphere_area(N))


def gamma_kernel(ge, y, z):
    """Gamma(y, z) = 1 / ((N-2) omega_{N-1} |y - z|^{N-2})."""
    N = ge.config.N
    diff = np.asarray(y, dtype=float) - np.asarray(z, dtype=float)
    r2 = np.einsum("...i,...i->...", diff, diff)
    if np.any(r2 == 0):
        raise SingularityError("kernel evaluated on the diagonal y = z")
    return ge.kernel_constant * r2 ** (-(N - 2) / 2)


def _kernel_sum(ge, w, R):
    """Partial sum over |P| <= R of the kernel at w + L P, plus its tail bound."""
    cfg = ge.config
    N, k, L = cfg.N, cfg.k, cfg.L
    P = lattice_points(k, R)
    shifted = np.broadcast_to(w, (len(P), N)).copy()
    shifted[:, :k] += L * P
    r2 = np.einsum("ij,ij->i", shifted, shifted)
    if np.any(r2 == 0):
        raise SingularityError("green evaluated at coincident lattice images")
    terms = ge.kernel_constant * r2 ** (-(N - 2) / 2)
    tail = lattice_tail_bound(k, L, N - 2, ge.kernel_constant, float(np.linalg.norm(w[:k])), R)
    return float(np.sum(terms)), tail


def _grow(step, tol, start, cap):
    R = start
    best = None
    while R <= cap:
        value, tail = step(R)
        best = (value, tail)
        if tail <= tol:
            return value, tail
        R *= 2
    raise TruncationFailure(f"tail {best[1]:.3e} above tolerance {tol:.3e} at radius cap {cap}",
                            value=best[0], tail=best[1])


def green(ge, y, z, tol=DEFAULT_FIELD_TOL):
    """Periodized Green's function G(y, z) = sum_P Gamma(y + L P, z).

    Returns ``(value, tail)`` with ``tail`` a certified bound on the omitted
    images.
    """
    if not tol > 0:
        raise InvalidArgument("tolerance must be positive")
    w = np.asarray(y, dtype=float) - np.asarray(z, dtype=float)
    cfg = ge.config
    cap = min(cfg.max_radius, int(MAX_LATTICE_POINTS ** (1.0 / cfg.k)) // 2)
    return _grow(lambda R: _kernel_sum(ge, w, R), tol, 4, cap)


def green_at_radius(ge, y, z, R):
    """Truncated sum at a fixed index radius, for convergence studies."""
    w = np.asarray(y, dtype=float) - np.asarray(z, dtype=float)
    return _kernel_sum(ge, w, int(R))


def lattice_constant(ge, tol=DEFAULT_CONSTANT_TOL):
    """S = sum_{P != 0} Gamma(P, 0) on the unit lattice.

    Returns ``(value, tail)``.
    """
    cfg = ge.config
    N, k = cfg.N, cfg.k
    c = ge.kernel_constant
    cap = min(cfg.max_radius, int(MAX_LATTICE_POINTS ** (1.0 / k)) // 2)

    def step(R):
        P = lattice_points(k, R)[1:]
        n2 = np.einsum("ij,ij->i", P, P).astype(float)
        return float(np.sum(c * n2 ** (-(N - 2) / 2))), lattice_tail_bound(k, 1.0, N - 2, c, 0.0, R)

    return _grow(step, tol, 4, cap)


def lattice_constant_zeta(N):
    """Rank-one fast path: S = 2 zeta(N-2) / ((N-2) omega_{N-1})."""
    return 2.0 * float(zeta(N - 2)) / ((N - 2) * sphere_area(N))


def image_sum(k, L, x_shift, fn, q, coef, rtol=DEFAULT_FIELD_TOL, atol=0.0, start=4, cap=1 << 20,
              skip_origin=False):
    """Sum fn(d) over lattice images for a batch of displacement vectors.

    ``x_shift`` has shape (n, N) and holds y - x; image P contributes
    ``fn(y - x + L P)`` given the displacement array. Each term must be
    bounded by ``coef * (L|P| - |shift'|)^{-q}`` so the tail can be
    certified. ``skip_origin`` drops P = 0. Returns ``(values, tails)``.
    """
    w = np.atleast_2d(np.asarray(x_shift, dtype=float))
    shift = np.linalg.norm(w[:, :k], axis=1)
    coef = np.broadcast_to(np.asarray(coef, dtype=float), shift.shape)
    cap = min(cap, int(MAX_LATTICE_POINTS ** (1.0 / k)) // 2)
    R = start
    prev_R = -1
    total = np.zeros(len(w))
    tails = np.full(len(w), np.inf)
    # points whose tail is already certified stop accumulating images
    active = np.arange(len(w))
    while True:
        P = lattice_points(k, R)
        n2 = np.einsum("ij,ij->i", P, P)
        new = P[(n2 > prev_R * prev_R) if prev_R >= 0 else (n2 > 0 if skip_origin else slice(None))]
        wa = w[active]
        for chunk in np.array_split(new, max(1, len(new) * len(wa) // 2_000_000 + 1)):
            if len(chunk) == 0:
                continue
            disp = np.repeat(wa[:, None, :], len(chunk), axis=1)
            disp[:, :, :k] += L * chunk[None, :, :]
            total[active] += np.sum(fn(disp), axis=1)
        tails[active] = [lattice_tail_bound(k, L, q, coef[i], shift[i], R) for i in active]
        done = tails[active] <= np.maximum(rtol * np.abs(total[active]), atol)
        active = active[~done]
        if len(active) == 0:
            return total, tails
        if R >= cap:
            bad = np.max(tails[active] / np.maximum(np.abs(total[active]), 1e-300))
            raise TruncationFailure(
                f"image sum tail {bad:.3e} exceeds tolerance at radius cap {cap}",
                value=total, tail=tails)
        prev_R = R
        R *= 2
