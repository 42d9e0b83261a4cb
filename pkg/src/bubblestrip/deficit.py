"""Outer deficit of the projected bubble on a rank-one strip.

For a source f(z) = A (1 + mu^2 |z - x|^2)^{-(N+2)/2}, the periodic
potential over the cell differs from the sum of free-space images by

    D(y) = integral over R^N minus the cell of G(z, y) f(z) dz  >=  0,

the potential of the part of f that lies outside the cell, folded back
periodically. D is expanded in Fourier modes of the periodic variable,

    D(y) = sum_n exp(i k_n y_1) D_n(|y'' - x''|),   k_n = 2 pi n / L,

where each D_n solves (-Laplacian_{N-1} + k_n^2) D_n = h_n radially and h_n
is the n-th Fourier coefficient of the folded source. The coefficients h_n
come from a contour rotation of the half-line integrals (n >= 1) or from the
incomplete Beta function (n = 0), so no oscillatory quadrature is needed.
"""

import math

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy import integrate
from scipy.special import betainc, ive, kve

from .errors import InvalidArgument
from .lattice import gamma_fn

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _panels(lo, hi, width):
    n = max(1, int(math.ceil((hi - lo) / width)))
    edges = np.linspace(lo, hi, n + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return nodes, weights


def _cheb_points(m):
    return np.cos(np.pi * (np.arange(m) + 0.5) / m)


def _cheb_coeffs(values):
    """Chebyshev coefficients from values at first-kind points (axis 0)."""
    m = values.shape[0]
    j = np.arange(m)
    T = np.cos(np.pi * np.outer(j, j + 0.5) / m)
    c = (2.0 / m) * T @ values
    c[0] *= 0.5
    return c


class OuterDeficit:
    """Evaluator of D for one bubble (center ``x``, rate ``mu``) on a k = 1 strip.

    ``amplitude`` is A in the source above. ``modes`` Fourier modes are
    retained; ``mode_error`` estimates the truncation from the last mode.
    """

    def __init__(self, N, L, x, mu, amplitude, modes=32, cheb_rho=48, cheb_a=56):
        if N < 5:
            raise InvalidArgument("deficit needs N >= 5")
        self.N = int(N)
        self.L = float(L)
        self.x = np.asarray(x, dtype=float)
        self.mu = float(mu)
        self.A = float(amplitude)
        self.p = (N + 2) / 2.0
        self.m = N - 1
        self.nu = (N - 3) / 2.0
        self.lam = self.L / 2.0
        self.c_right = self.L / 2.0 - self.x[0]
        self.c_left = self.L / 2.0 + self.x[0]
        if min(self.c_right, self.c_left) <= 0:
            raise InvalidArgument("bubble center must lie inside the cell")
        self.modes = int(modes)
        self.k = 2.0 * np.pi * np.arange(self.modes + 1) / self.L
        self._fit_source(cheb_rho)
        self._fit_modes(cheb_a)

    # -- mapping between [0, inf) and [-1, 1)
    def _to_r(self, xi):
        return self.lam * (1.0 + xi) / (1.0 - xi)

    def _to_xi(self, r):
        return (r - self.lam) / (r + self.lam)

    # -- Fourier coefficients of the folded source
    def source_mode0(self, rho):
        """h_0(rho) in closed form."""
        rho = np.asarray(rho, dtype=float)
        p = self.p
        b2 = rho * rho + self.mu ** (-2)
        full = 0.5 * gamma_fn(p - 0.5) * gamma_fn(0.5) / gamma_fn(p)
        out = 0.0
        for c in (self.c_right, self.c_left):
            out = out + b2 ** (0.5 - p) * full * betainc(p - 0.5, 0.5, b2 / (b2 + c * c))
        return self.A * self.mu ** (-2 * p) * out / self.L

    def source_modes(self, rho):
        """h_n(rho) for n = 1..modes, shape (len(rho), modes), complex."""
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        b2 = (rho * rho + self.mu ** (-2))[:, None]
        out = np.zeros((len(rho), self.modes), dtype=complex)
        cmin = min(self.c_right, self.c_left)
        for n in range(1, self.modes + 1):
            k = self.k[n]
            u, w = _panels(0.0, 46.0 / k, min(cmin, 2.0 / k) / 1.5)
            w = w * np.exp(-k * u)
            zr = self.c_right - 1j * u
            zl = self.c_left + 1j * u
            gr = (b2 + zr[None, :] ** 2) ** (-self.p) @ w
            gl = (b2 + zl[None, :] ** 2) ** (-self.p) @ w
            half = k * self.L / 2.0
            out[:, n - 1] = -1j * np.exp(-1j * half) * gr + 1j * np.exp(1j * half) * gl
        return self.A * self.mu ** (-2 * self.p) * out / self.L

    def _fit_source(self, m):
        xi = _cheb_points(m)
        vals = self.source_modes(self._to_r(xi))
        self._src_coef = _cheb_coeffs(vals)
        self.source_fit_error = float(np.max(np.abs(self._src_coef[-4:])))

    def _source_interp(self, rho, n):
        return cheb.chebval(self._to_xi(rho), self._src_coef[:, n - 1])

    # -- radial solves
    def _mode0(self, a):
        m = self.m
        h0 = self.source_mode0
        inner = 0.0
        if a > 0:
            inner = integrate.quad(lambda r: r ** (m - 1) * h0(r), 0.0, a,
                                   epsabs=0.0, epsrel=1e-13, limit=200)[0] * a ** (2 - m)
        outer = integrate.quad(lambda r: r * h0(r), a, np.inf,
                               epsabs=0.0, epsrel=1e-13, limit=200)[0]
        return (inner + outer) / (m - 2)

    def _radial_factor(self, k, r, kind):
        """(k r)^{-nu} I_nu(k r) e^{-k r} or (k r)^{-nu} K_nu(k r) e^{k r}."""
        nu = self.nu
        z = k * r
        if kind == "i":
            small = z < 1e-8
            safe = np.where(small, 1.0, z)
            val = safe ** (-nu) * ive(nu, safe)
            return np.where(small, 1.0 / (2.0**nu * gamma_fn(nu + 1.0)), val)
        return z ** (-nu) * kve(nu, z)

    def _mode_n(self, n, a):
        k = self.k[n]
        T = 46.0 / k
        width = min(1.0 / k, self.lam / 4.0)
        segs = []
        lo = max(0.0, a - T)
        if a > lo:
            segs.append(_panels(lo, a, width))
        segs.append(_panels(a, a + T, width))
        rho = np.concatenate([s[0] for s in segs])
        w = np.concatenate([s[1] for s in segs])
        h = self._source_interp(rho, n)
        r_lo = np.minimum(rho, a)
        r_hi = np.maximum(rho, a)
        ker = (k ** (2 * self.nu) * self._radial_factor(k, r_lo, "i")
               * self._radial_factor(k, r_hi, "k") * np.exp(-k * (r_hi - r_lo)))
        return np.sum(w * rho ** (self.m - 1) * h * ker)

    def _fit_modes(self, m):
        xi = _cheb_points(m)
        a_nodes = self._to_r(xi)
        vals = np.zeros((m, self.modes + 1), dtype=complex)
        for i, a in enumerate(a_nodes):
            vals[i, 0] = self._mode0(a)
            for n in range(1, self.modes + 1):
                vals[i, n] = self._mode_n(n, a)
        self._a_nodes = a_nodes
        self._mode_vals = vals
        self._mode_coef = _cheb_coeffs(vals)
        self.mode_fit_error = float(np.max(np.abs(self._mode_coef[-4:])))
        last = np.max(np.abs(vals[:, -1]))
        self.mode_error = float(2.0 * self.modes * last / 3.0)

    def mode_profile(self, a):
        """Radial mode amplitudes D_n(a), shape (len(a), modes + 1)."""
        a = np.atleast_1d(np.asarray(a, dtype=float))
        return cheb.chebval(self._to_xi(a), self._mode_coef).T

    def __call__(self, y):
        """D at points ``y`` with trailing axis N."""
        y = np.asarray(y, dtype=float)
        flat = y.reshape(-1, self.N)
        a = np.linalg.norm(flat[:, 1:] - self.x[1:], axis=1)
        modes = self.mode_profile(a)
        phase = np.exp(1j * np.outer(flat[:, 0], self.k[1:]))
        val = modes[:, 0].real + 2.0 * np.sum((modes[:, 1:] * phase).real, axis=1)
        return val.reshape(y.shape[:-1])

    @property
    def error(self):
        """Heuristic absolute error: mode truncation plus fit residue."""
        return self.mode_error + self.mode_fit_error + self.source_fit_error
