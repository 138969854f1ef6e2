"""Command-line front end.

Exit codes: 0 success, 2 domain error, 3 numerical failure, 64 usage.
A config file holds flat ``key = value`` lines; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import hamflow, normalform, profile, quasires, raydyn, torus
from .errors import DomainError, NumericalFailure
from .svg import attractor_fraction, path_svg, sweep_svg

EXIT_OK, EXIT_DOMAIN, EXIT_NUMERIC, EXIT_USAGE = 0, 2, 3, 64
FORMATS = {"csv", "json", "svg"}


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _pairs(text):
    """'k:v;k:v' with k an int tuple 'a,b' or int, v real or complex."""
    out = {}
    for item in str(text).split(";"):
        if not item.strip():
            continue
        try:
            k, v = item.split(":")
            key = tuple(int(x) for x in k.split(","))
            out[key if len(key) > 1 else key[0]] = complex(v.replace(" ", ""))
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"bad coefficient entry {item!r}") from exc
    return out


def read_config(path):
    cfg = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        cfg[k.replace("-", "_")] = v
    return cfg


# --- output ---------------------------------------------------------------------


class Output:
    def __init__(self, args):
        self.dir = Path(args.out)
        self.formats = args.format
        self.dir.mkdir(parents=True, exist_ok=True)
        self.written = []

    def write(self, kind, name, text):
        if kind not in self.formats:
            return
        path = self.dir / name
        path.write_text(text)
        self.written.append(str(path))

    def json(self, name, obj):
        self.write("json", name, json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def _angle(args, value):
    return math.radians(value) if args.degrees else value


def _phi(args):
    if args.phi is not None:
        return _angle(args, args.phi)
    if args.omega0 is not None:
        phi, _ = raydyn.admissible_directions(args.omega0, args.N)
        return phi
    raise DomainError("give --phi or --omega0")


# --- commands -------------------------------------------------------------------


def cmd_trace(args, out):
    dom = raydyn.TrapeziumDomain(args.length, _angle(args, args.alpha))
    state = raydyn.RayState(args.x1, args.x3, args.sigma1, args.sigma3, _phi(args))
    path = raydyn.trace(dom, state, args.bounces)
    out.write("csv", "path.csv", path.to_csv())
    out.write("svg", "path.svg", path_svg(path.points(), dom.vertices))
    # on an attractor the slope hits collapse onto the cycle's few points
    hits = np.array([e.point for e in path.slope_events()])
    ratio = attractor_fraction(hits) if len(hits) >= 20 else None
    out.json("path.json", {"status": path.status, "bounces": len(path.events), "tail_extent_ratio": ratio})
    return f"{len(path.events)} bounces, status {path.status}"


def _rmap(args):
    dom = raydyn.TrapeziumDomain(args.length, _angle(args, args.alpha))
    return raydyn.ReturnMap(dom, _phi(args))


def cmd_return_map(args, out):
    rmap = _rmap(args)
    s = np.arange(args.samples) / args.samples
    vals = rmap(s)
    lines = ["s,pi_s"] + [f"{a:.12g},{b:.12g}" for a, b in zip(s, vals)]
    out.write("csv", "return_map.csv", "\n".join(lines) + "\n")
    out.json("return_map.json", {"monotone": bool(rmap.check_monotone(seed=args.seed)), "samples": args.samples})
    return f"{args.samples} samples"


def cmd_rotation(args, out):
    rng = np.random.default_rng(args.seed)
    c, cp = rng.random(2)
    est = raydyn.rotation_number(_rmap(args), args.n, c, cp)
    out.json("rotation.json", {"rho": est.rho, "rho_2n": est.rho_2n, "error": est.error,
                               "n": est.n, "converged": est.converged})
    return f"rho = {est.rho:.6f}"


def cmd_lyapunov(args, out):
    est = raydyn.lyapunov_exponent(_rmap(args), args.n, s0=np.random.default_rng(args.seed).random())
    out.json("lyapunov.json", {"lyapunov": est.value, "n": est.n, "flagged": est.flagged})
    return f"lyapunov = {est.value:.6f}"


def cmd_bifurcation(args, out):
    ag = np.linspace(_angle(args, args.alpha_min), _angle(args, args.alpha_max), args.na)
    pg = np.linspace(_angle(args, args.phi_min), _angle(args, args.phi_max), args.np)
    cfg = raydyn.SweepConfig(length=args.length, n_iter=args.n_iter, n_transient=args.n_iter // 2,
                             seed=args.seed, lyapunov_tol=args.tol or 1e-3, workers=args.workers)
    grid = raydyn.bifurcation_sweep(ag, pg, config=cfg)
    out.write("csv", "sweep.csv", raydyn.sweep_to_csv(grid))
    out.write("svg", "sweep.svg", sweep_svg(grid))
    plateaus = raydyn.detect_plateaus(grid)
    out.json("sweep.json", {"cells": args.na * args.np,
                            "plateaus": [{"rho": str(f), "cells": len(c)} for f, c in plateaus]})
    return f"{len(plateaus)} plateaus"


def cmd_toymodel(args, out):
    z0 = hamflow.ToyModelState(args.x, args.y, args.xi, args.eta)
    traj = hamflow.flow_integrate(hamflow.toy_symbol(args.lam), ((z0.x, z0.y), (z0.xi, z0.eta)),
                                  args.t, args.dt, sample_every=max(1, int(round(0.1 / args.dt))))
    diff = 0.0
    for t, x, p in zip(traj.t, traj.x, traj.p):
        ex = hamflow.toy_flow_exact(args.lam, z0, t, period=math.inf)
        diff = max(diff, abs(ex.x - x[0]), abs(ex.y - x[1]), abs(ex.eta - p[1]))
    out.write("csv", "toy.csv", traj.to_csv())
    pm = hamflow.toy_poincare(args.lam, args.y, args.eta)
    out.json("toy.json", {"max_closed_form_difference": diff, "poincare": list(pm)})
    return f"max |closed form - RK4| = {diff:.3g}"


def cmd_escape_check(args, out):
    h = hamflow.cycle_pair_symbol(args.lam)
    d = hamflow.cycle_pair_escape(args.lam, args.k)
    pos = np.random.default_rng(args.seed).uniform(0, 2 * np.pi, (args.samples, 2))
    x, p = hamflow.shell_points(h, 0.0, pos)
    rep = hamflow.escape_positivity(h, d, (x, p))
    dev = float(np.max(np.abs(hamflow.poisson_bracket(h, d, x, p) - d.predicted_bracket(x[:, 1]))))
    obj = json.loads(rep.to_json())
    obj["max_deviation_from_prediction"] = dev
    out.json("escape.json", obj)
    return f"min bracket {rep.min_bracket:.6g} over {rep.n_samples} shell points"


def cmd_normalform(args, out):
    P = lambda y: args.mu * y + y**2
    ys = np.linspace(-0.1, 0.1, 21)
    h = normalform.koenigs_chart(P, args.mu, ys)
    resid = float(np.max(np.abs(normalform.koenigs_chart(P, args.mu, P(ys)) - args.mu * h)))
    V = normalform.CylinderField.perturbed(args.lam, args.eps)
    rep = json.loads(normalform.conjugacy_report(V, args.lam, [(0.3, 0.2), (1.0, -0.3)], T=args.T))
    rep["koenigs_residual"] = resid
    out.json("normalform.json", rep)
    return f"koenigs residual {resid:.3g}, wave-map residual {rep['max_residual']:.3g}"


_RHO = {
    "one": lambda y, s: np.ones_like(y * s),
    "y": lambda y, s: y + 0 * s,
    "exp": lambda y, s: np.exp(y) * np.cos(s),
}


def cmd_cohomological(args, out):
    sol = normalform.solve_cohomological(args.lam, args.n, args.k, _RHO[args.rho])
    value = complex(sol(args.y, args.s))
    hs = [1e-2, 5e-3, 2.5e-3]
    res = [abs(complex(sol.residual(args.y, args.s, h))) for h in hs]
    order = math.log2(res[1] / res[2]) if res[2] > 0 and res[1] > 0 else math.inf
    out.json("cohomological.json", {"alpha": value, "residuals": dict(zip(map(str, hs), res)), "order": order})
    return f"alpha = {value:.10g}"


def _gaussian_forcing(args):
    return quasires.ForcingProfile.gaussian()


def cmd_quasires_amplitude(args, out):
    f = _gaussian_forcing(args)
    phi = lambda xi: np.exp(-np.asarray(xi) ** 2)
    rows = [quasires.amplitude_observable(f, phi, args.omega0, t) for t in args.t]
    lines = ["t,Re,Im,Re_limit,Im_limit,error"] + [
        f"{r.t:.12g},{r.value.real:.12g},{r.value.imag:.12g},{r.limit.real:.12g},{r.limit.imag:.12g},{r.error:.6g}"
        for r in rows]
    out.write("csv", "amplitude.csv", "\n".join(lines) + "\n")
    out.json("amplitude.json", {"limit": rows[0].limit, "errors": [r.error for r in rows], "t": args.t})
    return f"limit {rows[0].limit:.8g}"


def cmd_quasires_energy(args, out):
    fit = quasires.energy_fit(_gaussian_forcing(args), args.omega0, args.t)
    lines = ["t,energy"] + [f"{t:.12g},{e:.12g}" for t, e in zip(fit.times, fit.energies)]
    out.write("csv", "energy.csv", "\n".join(lines) + "\n")
    out.write("json", "energy.json", fit.to_json() + "\n")
    return f"fitted slope {fit.slope:.6g}, predicted {fit.predicted_slope:.6g}"


def cmd_oscint(args, out):
    if args.case == "atom":
        nu = quasires.SpectralMeasure(None, atoms=[(1.0, 1.0)], gap=0.5)
    else:
        nu = quasires.SpectralMeasure(lambda s: np.ones_like(np.asarray(s, float)))
    res = quasires.decompose_oscillating_integral(nu, args.t)
    out.write("csv", "oscint.csv", res.to_csv())
    out.json("oscint.json", {"I_inf": complex(res.I_inf), "consistency": float(res.consistency()),
                             "abs_eps": np.abs(res.eps).tolist()})
    return f"I_inf = {complex(res.I_inf):.8g}"


def cmd_torus_evolve(args, out):
    f = torus.ModeSet(args.modes)
    h = torus.LatticeSymbol.first_coordinate(f.d)
    out.write("csv", "torus.csv", torus.norm_series_csv(h, f, args.t))
    f0 = torus.kernel_projection(h, f)
    gaps = [math.sqrt((torus.evolve_forced(h, f, t) - f0.scale(1j * t)).norm2()) for t in args.t]
    out.json("torus.json", {"kernel_modes": [list(k) for k in f0.coeffs], "norm_u_minus_itf0": gaps})
    return f"sup |u - itf0| = {max(gaps):.6g}"


def cmd_diophantine(args, out):
    Y = args.Y
    stats = torus.diophantine_stats(torus.LatticeSymbol.direction(Y), Y, args.N)
    out.write("json", "diophantine.json", stats.to_json() + "\n")
    return f"beta* = {stats.beta_star}"


def cmd_profile_synthesize(args, out):
    coeffs = profile.ProfileCoefficients(args.lam, args.coeffs)
    xs = np.linspace(0, 2 * np.pi, args.nx, endpoint=False)
    ys = np.linspace(-args.ymax, args.ymax, args.ny)
    field = profile.synthesize_uinfty(coeffs, xs, ys, args.eps)
    out.write("csv", "field.csv", profile.field_csv(xs, ys, field))
    eta = np.linspace(0.5, 10, 20)
    out.write("csv", "eta.csv", profile.eta_profile_csv(coeffs, eta))
    verdict = profile.growth_check(coeffs)
    out.json("profile.json", {"admissible": verdict.admissible, "degree": verdict.degree,
                              "max_abs": float(np.max(np.abs(field)))})
    return f"field {field.shape}, growth degree {verdict.degree:.3g}"


def cmd_gamma_check(args, out):
    rows = []
    for a in args.alpha:
        g = profile.gamma_magnitude(a)
        lz = abs(profile.complex_gamma_lanczos(1 - 1j * a))
        rows.append({"alpha": a, "gamma_magnitude": g, "lanczos": lz, "difference": abs(g - lz)})
    report = {"rows": rows}
    if args.ft:
        r = profile.ft_power_law(1.0, np.linspace(1, 10, 10))
        report["ft_max_relative_error"] = float(r.relative_error.max())
    out.json("gamma.json", report)
    return f"max difference {max(r['difference'] for r in rows):.3g}"


# --- parser -----------------------------------------------------------------------


def _ray_args(p):
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--phi", type=float)
    p.add_argument("--omega0", type=float)
    p.add_argument("--N", type=float, default=1.0)
    p.add_argument("--length", type=float, default=6.0)


def build_parser():
    common = Parser(add_help=False)
    common.add_argument("--out", default=".")
    common.add_argument("--format", type=lambda s: set(s.split(",")), default=set(FORMATS))
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float)
    common.add_argument("--degrees", action="store_true")
    common.add_argument("--config")

    parser = Parser(prog="attractorlab", description="internal-wave attractor laboratory")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        return p

    p = add("trace", cmd_trace, "trace a ray and write its bounces")
    _ray_args(p)
    p.add_argument("--x1", type=float, required=True)
    p.add_argument("--x3", type=float, required=True)
    p.add_argument("--sigma1", type=int, default=1, choices=(-1, 1))
    p.add_argument("--sigma3", type=int, default=1, choices=(-1, 1))
    p.add_argument("--bounces", type=int, default=200)

    p = add("return-map", cmd_return_map, "sample the slope return map")
    _ray_args(p)
    p.add_argument("--samples", type=int, default=1000)
    for name, func in (("rotation", cmd_rotation), ("lyapunov", cmd_lyapunov)):
        p = add(name, func, f"{name} of the return map")
        _ray_args(p)
        p.add_argument("--n", type=int, default=2000)

    p = add("bifurcation", cmd_bifurcation, "rotation/Lyapunov sweep over (alpha, phi)")
    for k in ("alpha-min", "alpha-max", "phi-min", "phi-max"):
        p.add_argument(f"--{k}", type=float, required=True)
    p.add_argument("--na", type=int, required=True)
    p.add_argument("--np", type=int, required=True)
    p.add_argument("--length", type=float, default=6.0)
    p.add_argument("--n-iter", type=int, default=400)
    p.add_argument("--workers", type=int, default=1)

    p = add("toymodel", cmd_toymodel, "toy flow: closed form against RK4")
    p.add_argument("--lam", type=float, default=0.5)
    for k, v in (("x", 0.1), ("y", 0.2), ("xi", 0.3), ("eta", 1.0), ("t", 10.0), ("dt", 1e-3)):
        p.add_argument(f"--{k}", type=float, default=v)

    p = add("escape-check", cmd_escape_check, "bracket positivity of the two-chart escape function")
    p.add_argument("--lam", type=float, default=0.7)
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=5000)

    p = add("normalform", cmd_normalform, "Koenigs chart and wave-map conjugacy residuals")
    p.add_argument("--mu", type=float, default=0.5)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--T", type=float, default=20.0)

    p = add("cohomological", cmd_cohomological, "solve the transport equation at a point")
    p.add_argument("--lam", type=float, default=0.7)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--rho", choices=sorted(_RHO), default="y")
    p.add_argument("--y", type=float, default=0.3)
    p.add_argument("--s", type=float, default=0.4)

    for name, func in (("quasires-amplitude", cmd_quasires_amplitude), ("quasires-energy", cmd_quasires_energy)):
        p = add(name, func, "gaussian forcing, " + name.split("-")[1])
        p.add_argument("--omega0", type=float, default=1.0)
        p.add_argument("--t", type=_floats, default=[50.0, 100.0, 200.0])

    p = add("oscint", cmd_oscint, "limit/oscillating/decaying split of I(t)")
    p.add_argument("--case", choices=("atom", "box"), default="box")
    p.add_argument("--t", type=_floats, default=[10.0, 100.0, 1000.0])

    p = add("torus-evolve", cmd_torus_evolve, "forced evolution with h(n) = n1/|n|")
    p.add_argument("--modes", type=lambda s: {k: v for k, v in _pairs(s).items()}, default="1,0:1;0,1:0.5")
    p.add_argument("--t", type=_floats, default=[0.0, 10.0, 100.0, 1000.0])

    p = add("diophantine", cmd_diophantine, "Diophantine statistics over a lattice ball")
    p.add_argument("--Y", type=_floats, default=[1.0, math.sqrt(2)])
    p.add_argument("--N", type=int, default=200)

    p = add("profile-synthesize", cmd_profile_synthesize, "synthesize the singular mode profile")
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--coeffs", type=_pairs, default="0:1;1:0.5")
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--nx", type=int, default=16)
    p.add_argument("--ny", type=int, default=101)
    p.add_argument("--ymax", type=float, default=1.0)

    p = add("gamma-check", cmd_gamma_check, "Gamma magnitude identity against Lanczos")
    p.add_argument("--alpha", type=_floats, default=[0.1, 1.0, 5.0, 10.0])
    p.add_argument("--ft", action="store_true")
    return parser


def _apply_config(parser, argv):
    pre = Parser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = read_config(known.config)
    command = next((a for a in argv if not a.startswith("-")), None)
    sub = parser._subparsers._group_actions[0].choices.get(command)
    if sub is None:
        return
    dests = {a.dest: a for a in sub._actions}
    converted = {}
    for k, v in cfg.items():
        if k not in dests:
            raise UsageError(f"unknown config key {k!r}")
        action = dests[k]
        if action.type is not None:
            try:
                v = action.type(v)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {k!r}: {exc}") from exc
        elif action.const is True:
            v = v.lower() in ("1", "true", "yes", "on")
        converted[k] = v
        action.required = False
    sub.set_defaults(**converted)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        bad = set(args.format) - FORMATS
        if bad:
            raise UsageError(f"unknown output format(s): {', '.join(sorted(bad))}")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        out = Output(args)
        msg = args.func(args, out)
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(msg)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
