"""Command-line entry point: ``phasestar <subcommand> [options]``.

Field subcommands write a CSV (``q,p,re,im`` or ``xf,x0,re,im``) plus a JSON
sidecar ``<out>.json`` holding ``{family, params, hbar, grid, diagnostics,
version}``. Files are written once, through a temporary file and a rename.

Exit codes: 0 success, 1 failed validation, 2 configuration error, 3 numerical
domain error (caustic, non-convergence, ...).
"""
import argparse
import ast
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from . import acceptance
from . import propagators as pr
from . import star as st
from . import starexp as se
from .errors import ConfigError, DomainError, UnsupportedFamily
from .numerics import PhaseGrid, plateau_window
from .weyl import SampledSymbol

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_DOMAIN = 0, 1, 2, 3

FIELD_HEADER = ("q", "p", "re", "im")
STAREXP_HEADER = ("q", "p", "re", "im", "residual")
PROPAGATOR_HEADER = ("xf", "x0", "re", "im")
SPECTRUM_HEADER = ("n", "energy", "degeneracy", "norm", "residual")


# --------------------------------------------------------------------------
# Output
# --------------------------------------------------------------------------

def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".phasestar-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v):
    return repr(float(v))


def _csv(header, columns):
    cols = [np.asarray(c).ravel() for c in columns]
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(c[i]) for c in cols) for i in range(cols[0].size))
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else str(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _dumps(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _metadata(args, family, params, grid, diagnostics):
    return {
        "family": family,
        "params": params,
        "hbar": args.hbar,
        "grid": grid.as_dict() if grid is not None else None,
        "diagnostics": diagnostics,
        "version": __version__,
    }


def _emit(args, header, columns, meta):
    """Write the table and its metadata in the requested format."""
    if args.format == "json":
        payload = dict(meta)
        payload["columns"] = list(header)
        payload["data"] = [np.asarray(c).ravel() for c in columns]
        text = _dumps(payload)
        if args.out:
            _atomic_write(args.out, text)
        else:
            sys.stdout.write(text)
        return
    table = _csv(header, columns)
    if args.out:
        _atomic_write(args.out, table)
        _atomic_write(args.out + ".json", _dumps(meta))
    else:
        sys.stdout.write(table)


# --------------------------------------------------------------------------
# Parsing helpers
# --------------------------------------------------------------------------

_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt, "tanh": np.tanh}


def time_function(text, **params):
    """Compile an expression in ``t`` (plus named parameters) into a callable.

    Allowed: numbers, ``t``, ``pi``, the given parameters, ``+ - * / ** ^`` and
    ``sin cos exp sqrt tanh``.
    """
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval").body
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse {text!r}: {exc.msg}") from None
    names = dict(params, pi=math.pi)

    def ev(node, t):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id == "t":
                return t
            if node.id in names:
                return names[node.id]
            raise ConfigError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand, t)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            a, b = ev(node.left, t), ev(node.right, t)
            ops = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
                   ast.Div: np.divide, ast.Pow: np.power}
            for op, fn in ops.items():
                if isinstance(node.op, op):
                    return fn(a, b)
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0], t))
        raise ConfigError(f"unsupported expression in {text!r}")

    ev(tree, 0.0)     # reject bad names before any integration starts
    return lambda t: ev(tree, t)


def _grid(args):
    return PhaseGrid(args.x_min, args.x_max, args.n_x, args.hbar)


def _family(args):
    name = args.family
    if name == "free":
        return pr.Free(args.m, args.hbar), {"m": args.m}
    if name == "ho":
        return pr.HarmonicOscillator(args.m, args.omega, args.hbar), {"m": args.m, "omega": args.omega}
    if name == "linear":
        return pr.LinearPotential(args.hbar), {}
    if name == "circle":
        return (pr.Circle(args.inertia, args.nmax, hbar=args.hbar),
                {"inertia": args.inertia, "nmax": args.nmax})
    raise UnsupportedFamily(f"family {name!r} is not available here")


def _quadratic_model(args):
    params = {"m": args.m, "omega": args.omega, "omega2": args.omega ** 2, "hbar": args.hbar}
    return pr.QuadraticModel(args.m, time_function(args.c, **params), time_function(args.f, **params))


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_wigner(args):
    grid = _grid(args)
    X, P = grid.mesh()
    spec, params = _family(args)
    diag = {}
    if args.family in ("ho", "circle"):
        if args.n is None:
            raise ConfigError("--n is required for discrete families")
        if args.family == "ho" and args.n < 0:
            raise ConfigError("oscillator levels start at n = 0")
        sl = se.project_level(se.StarExponentialClosedForm(spec), abs(args.n), grid)
        params.update(n=args.n)
        diag.update(energy=sl.energy, degeneracy=sl.degeneracy)
        if args.family == "ho":
            rho = sl.rho
            exact = se.ho_level(args.n, X, P, spec.m, spec.omega, spec.hbar)
        else:
            # levels n and -n share an energy: the projection yields their sum,
            # the written field is the single level n
            rho = SampledSymbol(np.broadcast_to(se.circle_level(args.n, P, spec.hbar), X.shape).copy(), grid)
            exact = rho.values + (se.circle_level(-args.n, P, spec.hbar) if args.n else 0.0)
            rho_check = sl.rho
        diag["max_abs_error_vs_closed_form"] = float(np.max(np.abs(
            (rho if args.family == "ho" else rho_check).values - exact)))
    else:
        if args.E is None:
            raise ConfigError("--E is required for continuous families")
        rho = se.wigner_continuous(se.StarExponentialClosedForm(spec), args.E, grid, args.t_window, args.eps)
        params.update(E=args.E, eps=args.eps)
        if args.family == "linear":
            diag["max_abs_error_vs_airy"] = float(np.max(np.abs(rho.values - se.airy_wigner(X, P, args.E, spec.hbar))))
    diag.update(norm=rho.integral().real, max_imag=float(np.max(np.abs(rho.values.imag))))
    _emit(args, FIELD_HEADER, (X, P, rho.values.real, rho.values.imag),
          _metadata(args, args.family, params, grid, diag))
    return EXIT_OK


def cmd_starexp(args):
    grid = _grid(args)
    X, P = grid.mesh()
    spec, params = _family(args)
    params.update(t=args.t, route=args.route)
    vals = np.asarray(se.star_exp_from_propagator(spec, X, P, args.t, route=args.route))
    exact = se.StarExponentialClosedForm(spec)(X, P, args.t)
    resid = np.abs(vals - exact)
    diag = {
        "max_residual": float(np.max(resid)),
        "max_residual_interior": float(np.max(resid[grid.interior()])),
        "max_abs_value": float(np.max(np.abs(vals))),
    }
    _emit(args, STAREXP_HEADER, (X, P, vals.real, vals.imag, resid),
          _metadata(args, args.family, params, grid, diag))
    return EXIT_OK


def _kernel_dict(k):
    return {"prefactor": k.prefactor, "quadratic": list(k.quadratic), "linear": list(k.linear),
            "constant": k.constant, "maslov": k.maslov}


def cmd_propagator(args):
    grid = _grid(args)
    xf, x0 = np.meshgrid(grid.x, grid.x, indexing="ij")
    params = {"t": args.t}
    diag = {}
    if args.family in ("quadratic", "sliced"):
        model = _quadratic_model(args)
        params.update(m=args.m, c=args.c, f=args.f, steps=args.steps)
        gy = pr.gelfand_yaglom(model, args.t, args.steps, args.hbar)
        diag["gelfand_yaglom"] = _kernel_dict(gy)
        vals = gy(xf, x0)
        if args.slices is not None or args.family == "sliced":
            N = args.slices or 64
            params["slices"] = N
            sl = pr.time_sliced(model, args.t, N, args.hbar)
            diag["time_sliced"] = _kernel_dict(sl)
            sliced_vals = sl(xf, x0)
            diag["max_residual_sliced_vs_gy"] = float(np.max(np.abs(sliced_vals - vals)))
            if args.family == "sliced":
                vals = sliced_vals
    else:
        spec, fam_params = _family(args)
        params.update(fam_params)
        vals = pr.propagate(spec, xf, args.t, x0)
        if args.family == "ho":
            diag["maslov_index"] = pr.maslov_index(spec.omega, args.t) if args.t > 0 else None
    vals = np.asarray(vals)
    diag["max_abs_value"] = float(np.max(np.abs(vals)))
    _emit(args, PROPAGATOR_HEADER, (xf, x0, vals.real, vals.imag),
          _metadata(args, args.family, params, grid, diag))
    return EXIT_OK


def _poly_table(f):
    a, b = np.nonzero(f.coeffs)
    return [{"x": int(i), "p": int(j), "re": float(f.coeffs[i, j].real), "im": float(f.coeffs[i, j].imag)}
            for i, j in zip(a, b)]


def cmd_star(args):
    f = st.PolySymbol.parse(args.f, args.hbar)
    g = st.PolySymbol.parse(args.g, args.hbar)
    exact = st.star_poly(f, g)
    params = {"f": args.f, "g": args.g, "route": args.route}
    if args.route == "poly":
        meta = _metadata(args, "polynomial", params, None, {"degree": exact.degree})
        meta["coefficients"] = _poly_table(exact)
        text = _dumps(meta)
        if args.out:
            _atomic_write(args.out, text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    grid = _grid(args)
    X, P = grid.mesh()
    radius = 0.25 * grid.length
    width = 1.2 * grid.length / 28.0

    def window(x, p):
        return plateau_window(x, radius, width) * plateau_window(p, radius, width)

    fs, gs = f.sample(grid, window), g.sample(grid, window)
    route = {"kernel": st.star_kernel, "integral": st.star_integral, "path": st.star_path}[args.route]
    vals = route(fs, gs).values
    inner = 0.05 * grid.length
    box = (np.abs(X) < inner) & (np.abs(P) < inner)
    ref = exact(X, P)
    diag = {"window_radius": radius, "window_width": width,
            "max_residual_vs_poly_inner": float(np.max(np.abs(vals - ref)[box])) if box.any() else None}
    _emit(args, FIELD_HEADER, (X, P, vals.real, vals.imag), _metadata(args, "polynomial", params, grid, diag))
    return EXIT_OK


def cmd_spectrum(args):
    grid = _grid(args)
    spec, params = _family(args)
    if args.family not in ("ho", "circle"):
        raise UnsupportedFamily("spectrum needs a discrete family (ho or circle)")
    cf = se.StarExponentialClosedForm(spec)
    rows = []
    for n in range(args.levels):
        sl = se.project_level(cf, n, grid)
        if args.family == "ho":
            H = st.PolySymbol.harmonic(spec.m, spec.omega, args.hbar)
            res = st.star_genvalue_residual(H, sl.rho, sl.energy)
            norm = sl.rho.integral().real
        else:
            # the rotor's sinc levels are stationary but not star-genfunctions of
            # p^2/2I in continuous p, and x lives on one turn of length 2 pi
            res = float("nan")
            norm = 2 * np.pi * float(np.sum(sl.rho.values[0].real) * grid.dp)
        rows.append((n, sl.energy, sl.degeneracy, norm, res))
    cols = list(zip(*rows))
    params["levels"] = args.levels
    diag = {"max_residual": max(r[4] for r in rows) if args.family == "ho" else None}
    _emit(args, SPECTRUM_HEADER, cols, _metadata(args, args.family, params, grid, diag))
    return EXIT_OK


def cmd_validate(args):
    only = None
    if args.only:
        try:
            only = {int(v) for v in args.only.split(",")}
        except ValueError:
            raise ConfigError("--only takes a comma-separated list of criterion numbers") from None
        bad = only - {c[0] for c in acceptance.CRITERIA}
        if bad:
            raise ConfigError(f"unknown criteria {sorted(bad)}")
    t0 = time.perf_counter()
    results = acceptance.run_suite(args.suite, args.seed, only, report=print)
    total = time.perf_counter() - t0
    ok = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed in {total:.1f}s")
    if args.out:
        report = {"suite": args.suite, "seed": args.seed, "passed": ok, "elapsed": total,
                  "version": __version__, "criteria": [r.as_dict() for r in results]}
        _atomic_write(args.out, _dumps(report))
    return EXIT_OK if ok else EXIT_FAILED


# --------------------------------------------------------------------------
# Argument parser
# --------------------------------------------------------------------------

def _common(p, grid=True, out_required=False):
    p.add_argument("--hbar", type=float, default=1.0)
    p.add_argument("--out", required=out_required, help="output path (CSV, or JSON with --format json)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--seed", type=int, default=0)
    if grid:
        p.add_argument("--x-min", type=float, default=-10.0)
        p.add_argument("--x-max", type=float, default=10.0)
        p.add_argument("--n-x", type=int, default=128)


def _family_params(p):
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--inertia", type=float, default=1.0)
    p.add_argument("--nmax", type=int, default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="phasestar", description="Phase-space quantum mechanics toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("wigner", help="sample a Wigner function")
    _common(p)
    _family_params(p)
    p.add_argument("--family", choices=("ho", "circle", "linear", "free"), required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--E", type=float)
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--t-window", type=float)
    p.set_defaults(func=cmd_wigner)

    p = sub.add_parser("starexp", help="star exponential from the propagator")
    _common(p)
    _family_params(p)
    p.add_argument("--family", choices=("free", "ho", "linear", "circle"), required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--route", choices=("fresnel", "fft"), default="fresnel")
    p.set_defaults(func=cmd_starexp)

    p = sub.add_parser("propagator", help="propagator on the position grid")
    _common(p)
    _family_params(p)
    p.add_argument("--family", choices=("free", "ho", "linear", "circle", "quadratic", "sliced"), required=True)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--c", default="0", help="spring coefficient c(t), e.g. 'omega2' or '1 + 0.1*sin(t)'")
    p.add_argument("--f", default="0", help="force f(t)")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--slices", type=int)
    p.set_defaults(func=cmd_propagator)

    p = sub.add_parser("star", help="star product of two polynomial symbols")
    _common(p)
    p.add_argument("--f", required=True)
    p.add_argument("--g", required=True)
    p.add_argument("--route", choices=("poly", "kernel", "integral", "path"), default="poly")
    p.set_defaults(func=cmd_star)

    p = sub.add_parser("spectrum", help="project discrete levels out of the star exponential")
    _common(p)
    _family_params(p)
    p.add_argument("--family", choices=("ho", "circle"), required=True)
    p.add_argument("--levels", type=int, default=4)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("validate", help="run the acceptance suite")
    _common(p, grid=False)
    p.add_argument("--suite", choices=("quick", "full"), default="quick")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)     # exits with status 2 on bad flags
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, ArithmeticError) as exc:
        print(f"numerical domain error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
