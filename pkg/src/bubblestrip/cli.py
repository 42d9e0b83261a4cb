"""Command-line driver: one subcommand per study, CSV plus JSON reports.

Subcommands and their CSV columns:

constants  name, value, error, method, residual, provenance
           Synchronized constants, lattice constant, bubble integrals with
           their closed-form residuals, dilation identities and, when
           quadrature.mc_samples > 0, Monte-Carlo cross-checks (residual is
           then the deviation in standard errors).
green      pair, y1..yN, z1..zN, value, tail, symmetry_residual,
           periodicity_residual, provenance
           Periodized Green's function at green.pairs seeded random pairs;
           residuals are in units of the summed certified tails.
project    point, radius, pu, images, phi1, expansion_dev, expansion_err,
           domination_ratio, provenance
           Projected bubble on the sample cloud at (period.L, project.mu);
           the expansion columns are filled inside the unit ball only. A
           final row ``max`` holds the column maxima of absolute values.
residual   row, mu, norm, refined_norm, slope, intercept, refined_slope,
           target, provenance
           Double-star norm of the error term over the residual mu grid
           and the log-log fit.
reduce     quantity, value, residual, provenance
           Solution (x, mu) of the reduced system at period.L with the
           residual of each equation, and the balance constant.
sweep      row, L, mu, x_norm, mu_scaled, c0, rel_dev, slope, intercept,
           target, fit_residual, provenance
           Reduced solutions over period.grid and the log-log slope.

Exit codes: 0 success, 2 configuration, 3 solver, 4 truncation, 5 internal.
"""

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .ansatz import (AnsatzField, bubble_u, expansion_deviation, image_sums, domination_ratio,
                     projected_bubble)
from .bubbles import BubbleParams, bubble_constant
from .config import load_config
from .errors import ConfigError, InvalidArgument, SolverFailure, TruncationFailure
from .lattice import GreenEvaluator, LatticeConfig, green, lattice_constant, sphere_area
from .norms import NormParams, sample_cloud
from .quadrature import (McOracle, integrand_decay, matched_power, mc_integral,
                         radial_bubble_integral, weighted_bubble_beta, weighted_bubble_integral,
                         weighted_integrand)
from .reduction import (build_system, c0, reduced_residual, residual_norm, scaling_exponent,
                        solve_reduced)
from .report import write_report

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_TRUNCATION, EXIT_INTERNAL = 0, 2, 3, 4, 5


def _pmap(fn, items, threads):
    """Ordered map, fanned out over ``threads`` workers."""
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def _tag(v):
    return format(v, ".17g")


# ---------------------------------------------------------------------------
# constants


def _integral_row(N, beta, kind, label):
    v, e = weighted_bubble_integral(N, beta, kind, with_error=True)
    closed = weighted_bubble_beta(N, beta, kind)
    return dict(name=label, value=v, error=e, method="radial quadrature",
                residual=_rel(v, closed), provenance="formula: quadrature vs Beta closed form")


def _mc_row(N, beta, kind, label, quad, samples, seed, threads):
    power = matched_power(N, integrand_decay(N, beta, kind))
    oracle = McOracle(N, samples, seed, power)
    est, se = mc_integral(oracle, weighted_integrand(N, beta, kind), threads)
    return dict(name=f"mc:{label}", value=est, error=se, method="monte carlo",
                residual=(est - quad) / se if se > 0 else 0.0,
                provenance=f"mc seed={seed} samples={samples} stderr={_tag(se)}")


def cmd_constants(cfg, threads):
    rs = build_system(cfg.system)
    sync = rs.sync
    N, k = cfg.dim.N, cfg.dim.k
    ts = cfg.dim.two_star
    rows = [
        dict(name="kappa", value=sync.kappa, error=0.0, method="root of coupling polynomial",
             residual=abs(sync.polynomial_residual), provenance="formula"),
        dict(name="s", value=sync.s, error=0.0, method="closed form",
             residual=abs(sync.scale_residual), provenance="formula"),
    ]
    mass, mass_err = radial_bubble_integral(N, ts - 1, with_error=True)
    closed_mass = bubble_constant(N) ** (ts - 1) * sphere_area(N) / N
    rows.append(dict(name="W_mass", value=mass, error=mass_err, method="radial quadrature",
                     residual=_rel(mass, closed_mass),
                     provenance="formula: quadrature vs C_N^(2*-1) omega / N"))
    for name, val, amp in (("B1", sync.B1, sync.s), ("B2", sync.B2, sync.t)):
        rows.append(dict(name=name, value=val, error=mass_err * amp ** (ts - 1),
                         method="radial quadrature",
                         residual=_rel(val, amp ** (ts - 1) * closed_mass), provenance="formula"))
    if k == 1:
        direct, tail = lattice_constant(GreenEvaluator(LatticeConfig(N, k, 1.0)))
        rows.append(dict(name="S", value=rs.S.value, error=rs.S.error, method=rs.S.method,
                         residual=abs(direct - rs.S.value),
                         provenance=f"formula: zeta vs direct sum, tail {_tag(tail)}"))
    else:
        rows.append(dict(name="S", value=rs.S.value, error=rs.S.error, method=rs.S.method,
                         residual=None, provenance="formula: lattice sum with certified tail"))

    rows.append(_integral_row(N, 0.0, "der0", "der0"))
    plain0 = weighted_bubble_integral(N, 0.0, "plain")
    lhs = (ts - 1) * rs.der0.value
    rows.append(dict(name="identity:dilation", value=lhs, error=(ts - 1) * rs.der0.error,
                     method="radial quadrature", residual=_rel(lhs, -(N - 2) / 2 * plain0),
                     provenance="formula: (2*-1) der0 vs -(N-2)/2 mass"))
    betas = sorted({b for kp in (cfg.system.k1, cfg.system.k2) for b in kp.beta})
    for b in betas:
        tag = _tag(b)
        rows.append(_integral_row(N, b, "pair0", f"pair0(beta={tag})"))
        rows.append(_integral_row(N, b, "pairh", f"pairh(beta={tag})"))
        p0 = weighted_bubble_integral(N, b, "pair0")
        en = weighted_bubble_integral(N, b, "energy")
        rows.append(dict(name=f"identity:weighted(beta={tag})", value=p0, error=None,
                         method="radial quadrature", residual=_rel(p0, -b / ts * en),
                         provenance="formula: pair0 vs -beta/2* energy"))
        lin = weighted_bubble_integral(N, b, "pair0_lin", continued=True)
        pl = weighted_bubble_integral(N, b, "plain", continued=True)
        rows.append(dict(name=f"identity:continued(beta={tag})", value=(ts - 1) * lin,
                         error=None, method="continued radial quadrature",
                         residual=_rel((ts - 1) * lin, -((N - 2) / 2 + b) * pl),
                         provenance="formula: analytic continuation in beta"))
    samples, seed = int(cfg["quadrature.mc_samples"]), int(cfg["quadrature.seed"])
    if samples > 0:
        jobs = [(0.0, "der0", "der0", rs.der0.value)]
        for b in betas:
            tag = _tag(b)
            jobs.append((b, "pair0", f"pair0(beta={tag})", weighted_bubble_integral(N, b, "pair0")))
            jobs.append((b, "pairh", f"pairh(beta={tag})", weighted_bubble_integral(N, b, "pairh")))
        for b, kind, label, quad in jobs:
            rows.append(_mc_row(N, b, kind, label, quad, samples, seed, threads))
    return ["name", "value", "error", "method", "residual", "provenance"], rows, {}


# ---------------------------------------------------------------------------
# green


def cmd_green(cfg, threads):
    N, k = cfg.dim.N, cfg.dim.k
    L = float(cfg["period.L"])
    tol = float(cfg["green.tol"])
    n = int(cfg["green.pairs"])
    seed = int(cfg["quadrature.seed"])
    ge = GreenEvaluator(LatticeConfig(N, k, L))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    hi = np.r_[np.full(k, L / 2), np.ones(N - k)]
    ys = rng.uniform(-hi, hi, size=(n, N))
    zs = rng.uniform(-hi, hi, size=(n, N))
    shift = np.zeros(N)
    shift[0] = L

    def one(i):
        y, z = ys[i], zs[i]
        g, tail = green(ge, y, z, tol)
        g_swap, tail_swap = green(ge, z, y, tol)
        g_shift, tail_shift = green(ge, y + shift, z, tol)
        row = dict(pair=i, value=g, tail=tail,
                   symmetry_residual=abs(g - g_swap) / (tail + tail_swap),
                   periodicity_residual=abs(g - g_shift) / (tail + tail_shift),
                   provenance=f"formula: lattice sum tol={_tag(tol)} seed={seed}")
        row.update({f"y{j + 1}": y[j] for j in range(N)})
        row.update({f"z{j + 1}": z[j] for j in range(N)})
        return row

    rows = _pmap(one, range(n), threads)
    cols = (["pair"] + [f"y{j + 1}" for j in range(N)] + [f"z{j + 1}" for j in range(N)]
            + ["value", "tail", "symmetry_residual", "periodicity_residual", "provenance"])
    return cols, rows, {}


# ---------------------------------------------------------------------------
# project


def _project_point(cfg, rs):
    mu = cfg["project.mu"]
    if mu == "auto":
        return solve_reduced(rs, int(cfg["period.L"]))
    return np.zeros(cfg.dim.N), float(mu)


def cmd_project(cfg, threads):
    rs = build_system(cfg.system)
    N, k = cfg.dim.N, cfg.dim.k
    L = float(cfg["period.L"])
    x, mu = _project_point(cfg, rs)
    af = AnsatzField(BubbleParams(x, mu), rs.sync, LatticeConfig(N, k, L))
    params = NormParams(cfg.dim, L, x, mu, float(cfg["norm.vartheta"]))
    pts = sample_cloud(params, cfg.cloud)
    pu, _, _ = projected_bubble(af, pts)
    images, _ = image_sums(af, pts)
    u = bubble_u(af, pts)
    ratio = domination_ratio(af, pts)
    radius = np.linalg.norm(pts - x, axis=1)
    ball = np.linalg.norm(pts, axis=1) <= 1.0 + 1e-12
    dev = np.full(len(pts), np.nan)
    err = np.full(len(pts), np.nan)
    if np.any(ball):
        dev[ball], err[ball] = expansion_deviation(af, pts[ball])
    prov = "formula: images minus outer deficit"
    rows = [dict(point=i, radius=radius[i], pu=pu[i], images=images[i], phi1=u[i] - pu[i],
                 expansion_dev=dev[i] if ball[i] else None,
                 expansion_err=err[i] if ball[i] else None,
                 domination_ratio=ratio[i], provenance=prov) for i in range(len(pts))]
    rows.append(dict(point="max", radius=np.max(radius), pu=np.max(np.abs(pu)),
                     images=np.max(np.abs(images)), phi1=np.max(np.abs(u - pu)),
                     expansion_dev=np.nanmax(np.abs(dev)) if np.any(ball) else None,
                     expansion_err=np.nanmax(err) if np.any(ball) else None,
                     domination_ratio=np.max(ratio), provenance="summary"))
    cols = ["point", "radius", "pu", "images", "phi1", "expansion_dev", "expansion_err",
            "domination_ratio", "provenance"]
    return cols, rows, dict(L=L, mu=float(mu), x=tuple(float(v) for v in x))


# ---------------------------------------------------------------------------
# residual


def cmd_residual(cfg, threads):
    rs = build_system(cfg.system)
    L = float(cfg["residual.L"])
    grid = np.geomspace(float(cfg["residual.mu_min"]), float(cfg["residual.mu_max"]),
                        int(cfg["residual.mu_count"]))
    vt = float(cfg["norm.vartheta"])
    spec = cfg.cloud
    norms = _pmap(lambda m: residual_norm(rs, L, m, None, spec, vt), grid, threads)
    refined = None
    if cfg["cloud.refine"]:
        refined = _pmap(lambda m: residual_norm(rs, L, m, None, spec.refined(), vt), grid, threads)
    lm = np.log(grid)
    slope, icpt = np.polyfit(lm, np.log(norms), 1)
    rslope = float(np.polyfit(lm, np.log(refined), 1)[0]) if refined else None
    prov = "formula: sampled double-star norm on the deterministic cloud"
    rows = [dict(row="point", mu=m, norm=n, refined_norm=refined[i] if refined else None,
                 provenance=prov) for i, (m, n) in enumerate(zip(grid, norms))]
    rows.append(dict(row="fit", slope=float(slope), intercept=float(icpt), refined_slope=rslope,
                     target=-2.0, provenance="least squares in log-log"))
    cols = ["row", "mu", "norm", "refined_norm", "slope", "intercept", "refined_slope", "target",
            "provenance"]
    return cols, rows, dict(L=L)


# ---------------------------------------------------------------------------
# reduce and sweep


def cmd_reduce(cfg, threads):
    rs = build_system(cfg.system)
    N = cfg.dim.N
    L = int(cfg["period.L"])
    x, mu = solve_reduced(rs, L)
    res = reduced_residual(rs, x, mu, L)
    prov = "formula: Newton on log mu, center refresh"
    rows = [dict(quantity=f"x{h + 1}", value=x[h], residual=res[h], provenance=prov)
            for h in range(N)]
    rows.append(dict(quantity="mu", value=mu, residual=res[N], provenance=prov))
    p = scaling_exponent(rs)
    rows.append(dict(quantity="mu_scaled", value=mu * L ** (-p), provenance="formula"))
    try:
        rows.append(dict(quantity="c0", value=c0(rs), provenance="formula: balance constant"))
    except ConfigError:
        pass
    return ["quantity", "value", "residual", "provenance"], rows, dict(L=L, exponent=p)


def cmd_sweep(cfg, threads):
    rs = build_system(cfg.system)
    grid = cfg.grid
    p = scaling_exponent(rs)
    try:
        const = c0(rs)
    except ConfigError:
        const = None
    sols = _pmap(lambda L: solve_reduced(rs, L), grid, threads)
    prov = "formula: Newton on log mu, center refresh"
    rows = []
    for L, (x, mu) in zip(grid, sols):
        scaled = mu * float(L) ** (-p)
        rows.append(dict(row="point", L=L, mu=mu, x_norm=float(np.linalg.norm(x)),
                         mu_scaled=scaled, c0=const,
                         rel_dev=scaled / const - 1.0 if const else None, provenance=prov))
    lg = np.log(np.asarray(grid, dtype=float))
    lm = np.log([mu for _, mu in sols])
    fit = dict(row="fit", target=p, provenance="least squares in log-log")
    if len(grid) > 1:
        coef, res, *_ = np.polyfit(lg, lm, 1, full=True)
        fit.update(slope=float(coef[0]), intercept=float(coef[1]),
                   fit_residual=float(res[0]) if len(res) else 0.0)
    rows.append(fit)
    cols = ["row", "L", "mu", "x_norm", "mu_scaled", "c0", "rel_dev", "slope", "intercept",
            "target", "fit_residual", "provenance"]
    return cols, rows, {}


COMMANDS = {
    "constants": cmd_constants,
    "green": cmd_green,
    "project": cmd_project,
    "residual": cmd_residual,
    "reduce": cmd_reduce,
    "sweep": cmd_sweep,
}


HELP = {
    "constants": "synchronized constants, bubble integrals and their checks",
    "green": "periodized Green's function at random point pairs",
    "project": "projected bubble and its expansion on the sample cloud",
    "residual": "error-term norm over a mu grid and its log-log slope",
    "reduce": "solve the reduced system at one period",
    "sweep": "reduced solutions over a period grid and the scaling slope",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bubblestrip", description="Bubble constants, projections and reduced solves on strips.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--seed", type=int, help="overrides quadrature.seed")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for grid points")
        p.add_argument("--tol", type=float, help="overrides green.tol")
    return parser


def run(args):
    cfg = load_config(args.config)
    cfg = cfg.with_overrides(**{"quadrature.seed": args.seed, "green.tol": args.tol}).validate()
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if args.threads < 1:
        raise ConfigError("threads must be at least 1")
    cols, rows, extra = COMMANDS[args.command](cfg, args.threads)
    meta = dict(command=args.command, config=cfg.values, **extra)
    return write_report(args.out, args.command, cols, rows, meta)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        csv_path, _ = run(args)
    except (ConfigError, InvalidArgument) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except TruncationFailure as exc:
        print(f"truncation failure: {exc} (value {exc.value}, tail {exc.tail})", file=sys.stderr)
        return EXIT_TRUNCATION
    except Exception as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    print(csv_path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
