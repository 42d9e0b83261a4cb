"""Integral constants of the bubble by radial quadrature, plus a Monte-Carlo oracle.

Every integrand used here is radial up to a factor |y_i|^beta, so it reduces
to an angular moment times a one-dimensional radial integral of the form

    sum_t  c_t * integral_0^inf r^{e_t} (1 + r^2)^{-q_t} dr .

The radial integral is done by adaptive quadrature on [0, R_c] plus a
convergent series for the algebraic tail beyond R_c. The same term list also
has a Beta-function closed form, which is used as an independent check and
to continue divergent integrals analytically in beta.
"""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .bubbles import bubble_constant, sync_scale
from .errors import IntegrabilityError, InvalidArgument, OracleFailure
from .lattice import gamma_fn, sphere_area

KINDS = ("plain", "energy", "pair0", "pair0_lin", "pairh", "der0")


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-13
    abs_tol: float = 0.0
    max_subdivisions: int = 500
    radial_cutoff: float = 1e3


DEFAULT_SPEC = QuadratureSpec()


@dataclass(frozen=True)
class RadialTerm:
    """coef * r^e * (1 + r^2)^{-q} on (0, inf)."""

    coef: float
    e: float
    q: float

    def converges(self):
        return self.e > -1 and self.e - 2 * self.q < -1

    def beta_value(self):
        a = (self.e + 1) / 2
        b = self.q - a
        return self.coef * 0.5 * gamma_fn(a) * gamma_fn(b) / gamma_fn(a + b)


def _eval_terms(terms, r):
    r = np.asarray(r, dtype=float)
    total = np.zeros_like(r)
    for t in terms:
        total = total + t.coef * r**t.e * (1.0 + r * r) ** (-t.q)
    return total


def _binom_neg(q, m):
    """binom(-q, m)."""
    out = 1.0
    for i in range(m):
        out *= (-q - i) / (i + 1)
    return out


def _tail_series(term, R, tol=1e-18, max_terms=60):
    """integral_R^inf r^e (1+r^2)^{-q} dr via the expansion in r^{-2}."""
    total = 0.0
    last = 0.0
    for m in range(max_terms):
        p = term.e - 2 * term.q - 2 * m + 1
        last = _binom_neg(term.q, m) * R**p / (-p)
        total += last
        if abs(last) <= tol * abs(total):
            break
    return term.coef * total, abs(term.coef * last)


def radial_quadrature(terms, spec=DEFAULT_SPEC):
    """Adaptive quadrature of a term list; returns ``(value, error)``."""
    for t in terms:
        if not t.converges():
            raise IntegrabilityError(
                f"radial integrand r^{t.e:g}(1+r^2)^-{t.q:g} is not integrable on (0, inf)")
    Rc = spec.radial_cutoff
    pts = [p for p in (0.5, 1.0, 2.0, 5.0, 10.0, 30.0, 100.0, 300.0) if p < Rc]
    f = lambda r: float(_eval_terms(terms, r))
    val, err = integrate.quad(f, 0.0, Rc, points=pts, limit=spec.max_subdivisions,
                              epsabs=spec.abs_tol, epsrel=spec.rel_tol)
    for t in terms:
        tv, te = _tail_series(t, Rc)
        val += tv
        err += te
    return val, err


def radial_beta(terms):
    """Closed form of a term list through the Beta function.

    For divergent terms this is the analytic continuation in the exponents.
    """
    return float(sum(t.beta_value() for t in terms))


def radial_continued(terms, spec=DEFAULT_SPEC):
    """Analytically continued radial integral computed by subtraction.

    The large-r expansion of each term is removed on [1, inf) until the
    remainder is integrable, and the removed powers are integrated in closed
    form. Independent of ``radial_beta``.
    """
    val = 0.0
    err = 0.0
    f = lambda r: float(_eval_terms(terms, r))
    v0, e0 = integrate.quad(f, 0.0, 1.0, limit=spec.max_subdivisions,
                            epsabs=spec.abs_tol, epsrel=spec.rel_tol)
    val += v0
    err += e0
    for t in terms:
        if t.e <= -1:
            raise IntegrabilityError("continuation across the origin is not supported")
        powers = []
        m = 0
        while t.e - 2 * t.q - 2 * m >= -3:
            p = t.e - 2 * t.q - 2 * m + 1
            if abs(p) < 1e-12:
                raise IntegrabilityError("continued integral has a pole at this exponent")
            powers.append((_binom_neg(t.q, m), t.e - 2 * t.q - 2 * m))
            m += 1
        powers.append((_binom_neg(t.q, m), t.e - 2 * t.q - 2 * m))
        head = powers[:-1]

        def rem(r, t=t, head=head):
            base = r**t.e * (1.0 + r * r) ** (-t.q)
            return t.coef * (base - sum(c * r**p for c, p in head))

        # the subtracted remainder loses digits to cancellation at large r;
        # quad reports this as roundoff, the returned error estimate stands
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            v1, e1 = integrate.quad(rem, 1.0, np.inf, limit=spec.max_subdivisions,
                                    epsabs=spec.abs_tol, epsrel=spec.rel_tol)
        val += v1 + t.coef * sum(-c / (p + 1) for c, p in head)
        err += e1
    return val, err


def angular_moment(N, beta):
    """Integral of |omega_1|^beta over the unit sphere S^{N-1}."""
    if beta < 0:
        raise InvalidArgument("angular moment needs beta >= 0")
    return 2.0 * math.pi ** ((N - 1) / 2) * gamma_fn((beta + 1) / 2) / gamma_fn((N + beta) / 2)


def bubble_power_terms(N, p):
    return [RadialTerm(1.0, N - 1.0, p * (N - 2) / 2.0)]


def radial_bubble_integral(N, p, spec=DEFAULT_SPEC, with_error=False):
    """Integral of W_{0,1}^p over R^N."""
    if not p * (N - 2) > N:
        raise IntegrabilityError(f"W^p is integrable only for p(N-2) > N, got p={p}, N={N}")
    val, err = radial_quadrature(bubble_power_terms(N, p), spec)
    scale = bubble_constant(N) ** p * sphere_area(N)
    return (val * scale, err * scale) if with_error else val * scale


def radial_bubble_beta(N, p):
    return bubble_constant(N) ** p * sphere_area(N) * radial_beta(bubble_power_terms(N, p))


def _kind_terms(N, beta, kind, scale):
    """Prefactor and radial terms of each weighted integral, with U = scale * W."""
    C = bubble_constant(N)
    ts = 2.0 * N / (N - 2)
    e = N - 1.0 + beta
    if kind == "plain":
        pre = (scale * C) ** (ts - 1)
        return pre, [RadialTerm(1.0, e, (N + 2) / 2.0)]
    if kind == "energy":
        pre = (scale * C) ** ts
        return pre, [RadialTerm(1.0, e, float(N))]
    if kind == "pair0":
        pre = (scale * C) ** ts * (N - 2) / 2.0
        return pre, [RadialTerm(2.0, e, N + 1.0), RadialTerm(-1.0, e, float(N))]
    if kind in ("pair0_lin", "der0"):
        pre = (scale * C) ** (ts - 1) * (N - 2) / 2.0
        return pre, [RadialTerm(2.0, e, 2.0 + N / 2.0), RadialTerm(-1.0, e, 1.0 + N / 2.0)]
    if kind == "pairh":
        pre = -beta * (N - 2) * (scale * C) ** ts
        return pre, [RadialTerm(1.0, e, N + 1.0)]
    raise InvalidArgument(f"unknown integral kind {kind!r}; expected one of {KINDS}")


def weighted_bubble_integral(N, beta, kind, scale=None, spec=DEFAULT_SPEC,
                             continued=False, with_error=False):
    """Weighted bubble integrals with U = scale * W (default: synchronized s).

    kinds, with psi_0 = d/dlambda U_{0,lambda} and psi_h = dU/dy_h:
      plain      int |y_1|^beta U^{2*-1}
      energy     int |y_1|^beta U^{2*}
      pair0      int |y_1|^beta U^{2*-1} psi_0
      pair0_lin  int |y_1|^beta U^{2*-2} psi_0
      pairh      int beta |y_h|^{beta-2} y_h U^{2*-1} psi_h
      der0       int U^{2*-2} psi_0            (beta is ignored)

    ``continued=True`` returns the analytic continuation in beta when the
    Lebesgue integral diverges.
    """
    if scale is None:
        scale = sync_scale(N)
    if kind == "der0":
        beta = 0.0
    elif kind in ("pair0", "pairh") and not (N - 2 < beta < N):
        raise InvalidArgument(f"weighted kinds need N-2 < beta < N, got beta={beta}")
    pre, terms = _kind_terms(N, beta, kind, scale)
    ang = angular_moment(N, beta)
    if all(t.converges() for t in terms):
        val, err = radial_quadrature(terms, spec)
    elif continued:
        val, err = radial_continued(terms, spec)
    else:
        raise IntegrabilityError(
            f"integral {kind!r} diverges for N={N}, beta={beta}; pass continued=True "
            "for its analytic continuation")
    out = (pre * ang * val, abs(pre * ang) * err)
    return out if with_error else out[0]


def weighted_bubble_beta(N, beta, kind, scale=None):
    """Beta-function closed form (or continuation) of the same integral."""
    if scale is None:
        scale = sync_scale(N)
    if kind == "der0":
        beta = 0.0
    pre, terms = _kind_terms(N, beta, kind, scale)
    return pre * angular_moment(N, beta) * radial_beta(terms)


# ---------------------------------------------------------------------------
# Monte-Carlo oracle


@dataclass(frozen=True)
class McOracle:
    """Importance sampler with density proportional to W_{0,1}^power.

    ``power`` defaults to 2*. It must satisfy power (N-2) > N; finite
    variance additionally needs the integrand to decay no slower than the
    density, which ``matched_power`` provides.
    """

    N: int
    sample_count: int = 10_000_000
    seed: int = 20241016
    power: float = None
    shard_size: int = 1 << 20

    @property
    def proposal_power(self):
        return 2.0 * self.N / (self.N - 2) if self.power is None else float(self.power)

    @property
    def radial_b(self):
        return self.proposal_power * (self.N - 2) / 2.0 - self.N / 2.0

    def density(self, y):
        """Normalized proposal density at points ``y``."""
        N = self.N
        r2 = np.einsum("...i,...i->...", y, y)
        a, b = N / 2.0, self.radial_b
        norm = sphere_area(N) * 0.5 * gamma_fn(a) * gamma_fn(b) / gamma_fn(a + b)
        return (1.0 + r2) ** (-(a + b)) / norm

    def shards(self):
        n, size = self.sample_count, self.shard_size
        counts = [size] * (n // size)
        if n % size:
            counts.append(n % size)
        seqs = np.random.SeedSequence(self.seed).spawn(len(counts))
        return list(zip(seqs, counts))

    def sample(self, seq, count):
        if self.radial_b <= 0:
            raise InvalidArgument("proposal power must satisfy power (N-2) > N")
        rng = np.random.Generator(np.random.Philox(seq))
        u = rng.beta(self.N / 2.0, self.radial_b, size=count)
        r = np.sqrt(u / (1.0 - u))
        d = rng.standard_normal((count, self.N))
        d /= np.linalg.norm(d, axis=1)[:, None]
        return d * r[:, None]


def matched_power(N, decay):
    """Proposal power whose density decays like r^{-decay}."""
    return decay / (N - 2)


def _shard_stats(oracle, integrand, seq, count):
    y = oracle.sample(seq, count)
    w = integrand(y) / oracle.density(y)
    if not np.all(np.isfinite(w)):
        raise OracleFailure("non-finite importance weight")
    mean = float(np.mean(w))
    m2 = float(np.sum((w - mean) ** 2))
    return count, mean, m2


def mc_integral(oracle, integrand, threads=1):
    """Importance-sampling estimate of the integral of ``integrand`` over R^N.

    ``integrand`` maps an (n, N) array to n values. Returns
    ``(estimate, stderr)``; shards use independent spawned Philox streams so
    the result does not depend on ``threads``.
    """
    jobs = oracle.shards()
    run = lambda job: _shard_stats(oracle, integrand, *job)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            stats = list(pool.map(run, jobs))
    else:
        stats = [run(j) for j in jobs]
    n, mean, m2 = 0, 0.0, 0.0
    for cnt, mu_b, m2_b in stats:
        tot = n + cnt
        delta = mu_b - mean
        mean += delta * cnt / tot
        m2 += m2_b + delta * delta * n * cnt / tot
        n = tot
    var = m2 / (n - 1)
    if not np.isfinite(var):
        raise OracleFailure("importance weights have non-finite variance")
    return mean, math.sqrt(var / n)


def mc_sphere_moment(N, beta, samples, seed):
    """Monte-Carlo estimate of angular_moment with its standard error."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    total, total2, done = 0.0, 0.0, 0
    area = sphere_area(N)
    while done < samples:
        n = min(1 << 20, samples - done)
        d = rng.standard_normal((n, N))
        w = area * np.abs(d[:, 0] / np.linalg.norm(d, axis=1)) ** beta
        total += float(np.sum(w))
        total2 += float(np.sum(w * w))
        done += n
    mean = total / samples
    var = (total2 / samples - mean * mean) * samples / (samples - 1)
    return mean, math.sqrt(max(var, 0.0) / samples)


def weighted_integrand(N, beta, kind, scale=None):
    """Pointwise integrand of ``weighted_bubble_integral`` on R^N, axis 1 weighted."""
    if scale is None:
        scale = sync_scale(N)
    C = bubble_constant(N)
    ts = 2.0 * N / (N - 2)

    def bubble(y):
        r2 = np.einsum("...i,...i->...", y, y)
        return scale * C * (1.0 + r2) ** (-(N - 2) / 2), r2

    def psi0(y):
        r2 = np.einsum("...i,...i->...", y, y)
        return scale * C * (N - 2) / 2 * (1.0 - r2) * (1.0 + r2) ** (-N / 2)

    def fn(y):
        u, r2 = bubble(y)
        y1 = np.abs(y[..., 0])
        if kind == "plain":
            return y1**beta * u ** (ts - 1)
        if kind == "energy":
            return y1**beta * u**ts
        if kind == "pair0":
            return y1**beta * u ** (ts - 1) * psi0(y)
        if kind == "pair0_lin":
            return y1**beta * u ** (ts - 2) * psi0(y)
        if kind == "der0":
            return u ** (ts - 2) * psi0(y)
        if kind == "pairh":
            dh = -scale * C * (N - 2) * y[..., 0] * (1.0 + r2) ** (-N / 2)
            return beta * y1 ** (beta - 2) * y[..., 0] * u ** (ts - 1) * dh
        raise InvalidArgument(f"unknown integral kind {kind!r}")

    return fn


def integrand_decay(N, beta, kind):
    """Algebraic decay rate of the weighted integrand at infinity."""
    if kind == "der0":
        return N + 2.0
    return {"plain": N + 2.0 - beta, "energy": 2.0 * N - beta, "pair0": 2.0 * N - beta,
            "pair0_lin": N + 2.0 - beta, "pairh": 2.0 * N + 2.0 - beta}[kind]
