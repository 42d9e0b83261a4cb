"""Reduced finite-dimensional system for the center x and the rate mu.

At leading order the center equations read

    sum_l B_{lh} mu x_h / mu^{beta_{lh} - 1} = 0,     B_{lh} = a_{lh} pairh_l,

and the rate equation balances the curvature dip against the lattice
interaction,

    - sum_l mu^{-beta_l} A_l - D mu^{-(N-2)} L^{-(N-2)} = 0,
    A_l = sum_{i in J_l} a_{li} pair0_l(i),
    D   = (2*-1) S (w_U B_1 der0 + w_V B_2 der0_V),

with S the lattice constant and (w_U, w_V) the interaction weights of the
chosen convention. A_l > 0 and D < 0, so the balance has a single root in
mu and mu_L = C_0 L^{(N-2)/(beta-N+2)} when beta_1 = beta_2.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.optimize import brentq

from .ansatz import AnsatzField, KProfile, ell
from .bubbles import BubbleParams, Dimension, bubble_constant, solve_synchronized
from .errors import ConfigError, InvalidArgument, SolverFailure
from .lattice import (GreenEvaluator, LatticeConfig, gamma_fn, lattice_constant,
                      lattice_constant_zeta)
from .norms import CloudSpec, FieldSample, NormParams, norm_dstar, sample_cloud
from .quadrature import weighted_bubble_integral

CONVENTIONS = ("exact", "linear", "unit")
BRACKET = (1e-3, 1e3)
X_THETA = 0.01


@dataclass(frozen=True)
class SystemConfig:
    """Dimension, the two curvature profiles and the interaction convention.

    ``convention`` selects the weights (w_U, w_V) of the interaction term:
    ``"exact"`` (c_U^2, c_V^2) with c the source factors of the coupled
    system, ``"linear"`` ((2+kappa)/2 for both) and ``"unit"`` (1, 1).
    """

    dim: Dimension
    k1: KProfile
    k2: KProfile
    convention: str = "exact"

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ConfigError(f"unknown convention {self.convention!r}; expected {CONVENTIONS}")
        for kp in (self.k1, self.k2):
            if kp.N != self.dim.N or kp.k != self.dim.k:
                raise ConfigError("profile dimension or rank differs from the system")

    @classmethod
    def default(cls, N=5, k=1, a=-1.0, beta=3.5, convention="exact"):
        kp = KProfile.uniform(N, a, beta, k=k)
        return cls(Dimension(N, k), kp, kp, convention)


@dataclass(frozen=True)
class Constant:
    value: float
    error: float
    method: str


@dataclass
class ReducedSystem:
    config: SystemConfig
    sync: object
    S: Constant
    der0: Constant
    pair0: tuple
    pairh: tuple
    J_sets: tuple
    weights: tuple = field(default=(1.0, 1.0))

    @property
    def N(self):
        return self.config.dim.N

    @property
    def two_star(self):
        return self.config.dim.two_star

    @property
    def profiles(self):
        return (self.config.k1, self.config.k2)

    @property
    def scales(self):
        """Ratio of the l-th component's integrals to the U-integrals."""
        return (1.0, self.sync.kappa**self.two_star)

    @property
    def der0_v(self):
        return self.sync.kappa ** (self.two_star - 1) * self.der0.value

    def dip(self, l):
        """A_l = sum_{i in J_l} a_{li} pair0_l(i) (positive under the sign hypothesis)."""
        kp = self.profiles[l]
        return self.scales[l] * sum(kp.a[i] * self.pair0[l][i].value for i in self.J_sets[l])

    def B(self, l, h):
        """Center coefficient B_{lh} = a_{lh} pairh_l (h 1-based)."""
        return self.scales[l] * self.profiles[l].a[h - 1] * self.pairh[l][h - 1].value

    @property
    def interaction(self):
        """D = (2*-1) S (w_U B_1 der0 + w_V B_2 der0_V), negative."""
        wu, wv = self.weights
        return (self.two_star - 1) * self.S.value * (
            wu * self.sync.B1 * self.der0.value + wv * self.sync.B2 * self.der0_v)


def _weights(sync, convention):
    if convention == "exact":
        return (sync.source_factor_u**2, sync.source_factor_v**2)
    if convention == "linear":
        w = (2.0 + sync.kappa) / 2.0
        return (w, w)
    return (1.0, 1.0)


def build_system(config):
    """Compute every constant of the reduced system."""
    N, k = config.dim.N, config.dim.k
    sync = solve_synchronized(config.dim)
    if k == 1:
        S = Constant(lattice_constant_zeta(N), 1e-16, "zeta")
    else:
        val, tail = lattice_constant(GreenEvaluator(LatticeConfig(N, k, 1.0)))
        S = Constant(val, tail, "lattice sum")
    v, e = weighted_bubble_integral(N, 0.0, "der0", with_error=True)
    der0 = Constant(v, e, "radial quadrature")
    pair0, pairh, J = [], [], []
    for kp in (config.k1, config.k2):
        J.append(kp.leading)
        p0 = {}
        for i in kp.leading:
            v, e = weighted_bubble_integral(N, kp.beta[i], "pair0", with_error=True)
            p0[i] = Constant(v, e, "radial quadrature")
        pair0.append(p0)
        ph = []
        for b in kp.beta:
            v, e = weighted_bubble_integral(N, b, "pairh", with_error=True)
            ph.append(Constant(v, e, "radial quadrature"))
        pairh.append(tuple(ph))
    rs = ReducedSystem(config, sync, S, der0, tuple(pair0), tuple(pairh), tuple(J),
                       _weights(sync, config.convention))
    for l in (0, 1):
        if not rs.dip(l) > 0:
            raise ConfigError("curvature dip has the wrong sign (negative coefficient sum required)")
    if not rs.interaction < 0:
        raise SolverFailure("interaction constant is not negative")
    return rs


def _beta_l(rs, l):
    return rs.profiles[l].beta_min


def reduced_residual(rs, x, mu, L):
    """Leading-order reduced equations; components 1..N for x, N+1 for mu."""
    x = np.asarray(x, dtype=float)
    N = rs.N
    if x.shape != (N,):
        raise InvalidArgument(f"center must have {N} coordinates")
    if not mu > 0:
        raise InvalidArgument("rate must be positive")
    out = np.zeros(N + 1)
    for h in range(1, N + 1):
        out[h - 1] = sum(rs.B(l, h) * mu * x[h - 1] / mu ** (rs.profiles[l].beta[h - 1] - 1)
                         for l in (0, 1))
    out[N] = (-sum(mu ** (-_beta_l(rs, l)) * rs.dip(l) for l in (0, 1))
              - rs.interaction * mu ** (-(N - 2)) * float(L) ** (-(N - 2)))
    return out


def _rate_terms(rs, t, L):
    """Rate component and its derivative in t = log mu."""
    N = rs.N
    f, df = 0.0, 0.0
    for l in (0, 1):
        b = _beta_l(rs, l)
        term = -math.exp(-b * t) * rs.dip(l)
        f += term
        df += -b * term
    inter = -rs.interaction * math.exp(-(N - 2) * t) * float(L) ** (-(N - 2))
    return f + inter, df - (N - 2) * inter


def scaling_exponent(rs):
    beta = min(_beta_l(rs, 0), _beta_l(rs, 1))
    return (rs.N - 2) / (beta - rs.N + 2)


def solve_rate(rs, L, tol=1e-14, max_iter=100):
    """Root of the rate component at x = 0: Newton in log mu, bisection fallback."""
    p = scaling_exponent(rs)
    lo = math.log(BRACKET[0] * float(L) ** p)
    hi = math.log(BRACKET[1] * float(L) ** p)
    flo, fhi = _rate_terms(rs, lo, L)[0], _rate_terms(rs, hi, L)[0]
    if not flo * fhi < 0:
        raise SolverFailure(f"no root bracketed in [{BRACKET[0]}, {BRACKET[1]}] * L^{p:g}")
    t = 0.5 * (lo + hi)
    for _ in range(max_iter):
        f, df = _rate_terms(rs, t, L)
        if f * flo > 0:
            lo, flo = t, f
        else:
            hi = t
        step = -f / df if df != 0 else math.inf
        t_new = t + step
        if not lo < t_new < hi:
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) < tol * max(1.0, abs(t)):
            return math.exp(t_new)
        t = t_new
    return math.exp(brentq(lambda s: _rate_terms(rs, s, L)[0], lo, hi, xtol=1e-15))


# ---------------------------------------------------------------------------
# finite-x curvature term


def _slice_constant(N):
    """Integral over R^{N-1} of (1 + t^2 + |w|^2)^{-(N+1)} divided by (1+t^2)^{-(N+3)/2}."""
    return math.pi ** ((N - 1) / 2) * gamma_fn((N + 3) / 2) / gamma_fn(N + 1.0)


def folded_moment(N, beta, c):
    """I(c) = int_0^inf (|t + c|^beta - |t - c|^beta) t (1 + t^2)^{-(N+3)/2} dt.

    Odd in c and exactly zero at c = 0.
    """
    if c == 0:
        return 0.0
    sign = 1.0 if c > 0 else -1.0
    c = abs(c)
    q = (N + 3) / 2.0
    f = lambda t: ((t + c) ** beta - abs(t - c) ** beta) * t * (1.0 + t * t) ** (-q)
    a, _ = integrate.quad(f, 0.0, c, epsabs=0.0, epsrel=1e-12, limit=200)
    b, _ = integrate.quad(f, c, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
    return sign * (a + b)


def curvature_center_term(rs, l, h, x_h, mu):
    """Full curvature contribution to the x_h equation of component l.

    Minus the integral of (K_l - 1) U^{2*-1} dU/dx_h with K_l - 1 replaced
    by its expansion; it depends on x_h only through mu x_h.
    """
    N = rs.N
    b = rs.profiles[l].beta[h - 1]
    a = rs.profiles[l].a[h - 1]
    amp = (rs.sync.s * bubble_constant(N)) ** rs.two_star * (N - 2) * _slice_constant(N)
    return -rs.scales[l] * a * amp * mu ** (1.0 - b) * folded_moment(N, b, mu * x_h)


def solve_reduced(rs, L, theta=X_THETA, max_iter=50):
    """(x_L, mu_L): rate root at x = 0, then a fixed-point refresh of x.

    The refresh solves each center equation with its full finite-x
    curvature term, x_h <- x_h - F_h(x_h) / F_h'(0).
    """
    if float(L) < 2 or float(L) != int(L):
        raise InvalidArgument("period must be an integer >= 2")
    mu = solve_rate(rs, L)
    N = rs.N
    x = np.zeros(N)
    for h in range(1, N + 1):
        slope = sum(rs.B(l, h) * mu / mu ** (rs.profiles[l].beta[h - 1] - 1) for l in (0, 1))
        xh = 0.0
        for _ in range(max_iter):
            F = sum(curvature_center_term(rs, l, h, xh, mu) for l in (0, 1))
            nxt = xh - F / slope
            if nxt == xh or abs(nxt - xh) <= 1e-15 * max(abs(nxt), 1e-300):
                break
            xh = nxt
        x[h - 1] = xh
    if np.linalg.norm(x) > mu ** (-1.0 - theta):
        raise SolverFailure("center refresh left the region |x| <= mu^{-1-theta}")
    return x, mu


def c0(rs):
    """Balance constant C_0 = (A / |D|)^{1/(beta-N+2)} for equal exponents."""
    b1, b2 = _beta_l(rs, 0), _beta_l(rs, 1)
    if b1 != b2:
        raise ConfigError("C_0 needs equal smallest exponents in both profiles")
    A = rs.dip(0) + rs.dip(1)
    D = rs.interaction
    if not (A > 0 and D < 0):
        raise ConfigError("balance constant has the wrong sign (check the profile coefficients)")
    return (A / -D) ** (1.0 / (b1 - rs.N + 2))


@dataclass(frozen=True)
class ScalingStudy:
    L_grid: tuple
    mu_solutions: tuple
    x_solutions: tuple
    slope: float
    intercept: float
    target: float
    fit_residual: float


def scaling_sweep(rs, L_grid):
    """Solve for each L and fit log mu_L against log L."""
    mus, xs = [], []
    for L in L_grid:
        x, mu = solve_reduced(rs, L)
        mus.append(mu)
        xs.append(tuple(x))
    lg, lm = np.log(np.asarray(L_grid, float)), np.log(mus)
    if len(L_grid) > 1:
        coef, res, *_ = np.polyfit(lg, lm, 1, full=True)
        slope, intercept = float(coef[0]), float(coef[1])
        resid = float(res[0]) if len(res) else 0.0
    else:
        slope, intercept, resid = math.nan, math.nan, math.nan
    return ScalingStudy(tuple(L_grid), tuple(mus), tuple(xs), slope, intercept,
                        scaling_exponent(rs), resid)


# ---------------------------------------------------------------------------
# cross-checks


def center_equation_check(rs, x, mu, L):
    """Full curvature center term against its linearization, per coordinate.

    Returns a list of dicts with h, the full value, the leading value
    B mu x_h / mu^{beta-1}, the relative deviation and the second-order
    scale (mu x_h)^2 / mu^{beta-1}.
    """
    x = np.asarray(x, dtype=float)
    if np.max(np.abs(mu * x)) > 1:
        raise InvalidArgument("crosscheck needs |mu x| <= 1")
    rows = []
    for h in range(1, rs.N + 1):
        full = sum(curvature_center_term(rs, l, h, x[h - 1], mu) for l in (0, 1))
        lead = sum(rs.B(l, h) * mu * x[h - 1] / mu ** (rs.profiles[l].beta[h - 1] - 1)
                   for l in (0, 1))
        b = min(rs.profiles[l].beta[h - 1] for l in (0, 1))
        rel = (full - lead) / lead if lead != 0 else (0.0 if full == 0 else math.inf)
        rows.append(dict(h=h, full=full, leading=lead, rel_dev=rel,
                         second_order=(mu * x[h - 1]) ** 2 / mu ** (b - 1)))
    return rows


def _cutoff_dip(rs, l, mu):
    """Curvature rate term with the profile's cutoff, radial quadrature."""
    from .ansatz import cutoff
    from .quadrature import angular_moment

    N = rs.N
    kp = rs.profiles[l]
    C = rs.sync.s * bubble_constant(N)
    ts = rs.two_star
    total = 0.0
    for i in kp.leading:
        b = kp.beta[i]

        def f(r):
            chi = float(cutoff(r / (mu * kp.delta)))
            g = (1.0 + r * r)
            return r ** (N - 1 + b) * chi * C**ts * (N - 2) / 2 * (1 - r * r) * g ** (-(N + 1))

        v = 0.0
        for lo, hi in ((0.0, 1.0), (1.0, mu * kp.delta / 2), (mu * kp.delta / 2, mu * kp.delta)):
            if hi > lo:
                v += integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)[0]
        total += kp.a[i] * v * angular_moment(N, b)
    return rs.scales[l] * total


def rate_balance_check(rs, mu, L):
    """Leading curvature and interaction rate terms and their ratio.

    ``ratio`` uses the full-space curvature constants; ``ratio_cutoff``
    uses the profile's cutoff, which is the finite-mu version. Both terms
    carry the common factor mu^{-1} of the mu-derivative.
    """
    N = rs.N
    term_k = -sum(mu ** (-_beta_l(rs, l) - 1) * rs.dip(l) for l in (0, 1))
    term_k_cut = -sum(mu ** (-_beta_l(rs, l) - 1) * _cutoff_dip(rs, l, mu) for l in (0, 1))
    term_i = -rs.interaction * mu ** (-(N - 1)) * float(L) ** (-(N - 2))
    return dict(mu=mu, L=float(L), curvature=term_k, curvature_cutoff=term_k_cut,
                interaction=term_i, ratio=term_k / term_i, ratio_cutoff=term_k_cut / term_i)


def residual_norm(rs, L, mu, x=None, cloud_spec=CloudSpec(), vartheta=0.01):
    """Double-star norm of (l_1, l_2) on the standard cloud."""
    N, k = rs.N, rs.config.dim.k
    x = np.zeros(N) if x is None else np.asarray(x, dtype=float)
    af = AnsatzField(BubbleParams(x, mu), rs.sync, LatticeConfig(N, k, float(L)))
    params = NormParams(rs.config.dim, float(L), x, mu, vartheta)
    pts = sample_cloud(params, cloud_spec)
    l1, l2 = ell(af, rs.config.k1, rs.config.k2, pts)
    return norm_dstar(params, FieldSample(pts, np.column_stack([l1, l2])))


@dataclass(frozen=True)
class ResidualStudy:
    mu_grid: tuple
    norms: tuple
    slope: float
    intercept: float
    refined_norms: tuple
    refined_slope: float


def residual_scaling_study(rs, L, mu_grid, cloud_spec=CloudSpec(), refine=True, vartheta=0.01):
    """Fit log ||(l_1, l_2)||_** against log mu at x = 0."""
    mu_grid = tuple(float(m) for m in mu_grid)
    if len(mu_grid) < 2 or max(mu_grid) / min(mu_grid) < 10:
        raise InvalidArgument("mu grid must span at least one decade")
    lm = np.log(mu_grid)
    norms = tuple(residual_norm(rs, L, m, None, cloud_spec, vartheta) for m in mu_grid)
    slope, icpt = np.polyfit(lm, np.log(norms), 1)
    rn, rslope = (), math.nan
    if refine:
        rn = tuple(residual_norm(rs, L, m, None, cloud_spec.refined(), vartheta) for m in mu_grid)
        rslope = float(np.polyfit(lm, np.log(rn), 1)[0])
    return ResidualStudy(mu_grid, norms, float(slope), float(icpt), rn, rslope)
