"""Command-line front end.

Every subcommand reads JSON (files or inline options), prints a JSON result on stdout and
exits 0; domain failures exit 1 and malformed input exits 2, both with a JSON error body.
Density commands also write CSV or PGM grids, and optionally a PNG figure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import warnings
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import degenerations as dg
from . import hypertrees as ht
from . import mumford as mm
from . import realscatter as rs
from .scalars import DegenerateError, ProjPoint

EXIT_OK, EXIT_DOMAIN, EXIT_INPUT = 0, 1, 2


class InputError(ValueError):
    """Malformed command-line input or schema violation."""


class DomainError(RuntimeError):
    """Well-formed input on which the computation cannot proceed."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures through the JSON error path
        raise InputError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- output


def _atomic_write(path: str, data: bytes) -> None:
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=folder)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise DomainError(f"cannot write {path}: {exc}") from exc


def emit_csv(grid: rs.DensityGrid, path: str) -> int:
    """Header plus one row per cell, every value printed with 17 significant digits."""
    if not np.all(np.isfinite(grid.rho)):
        raise DomainError("grid contains non-finite density values")
    header = "lambda,rho" if len(grid.lambdas) == 1 else "lambda1,lambda2,rho"
    lines = [header]
    count = 0
    for row in grid.rows():
        lines.append(",".join(format(float(x), ".17g") for x in row))
        count += 1
    _atomic_write(path, ("\n".join(lines) + "\n").encode())
    return count


def read_csv(path: str) -> list[tuple[float, ...]]:
    with open(path) as fh:
        fh.readline()
        return [tuple(float(x) for x in line.split(",")) for line in fh if line.strip()]


def pgm_bytes(grid: rs.DensityGrid) -> bytes:
    """Binary P5 image: columns follow lambda1, rows follow lambda2 from top (largest) down."""
    if len(grid.lambdas) != 2:
        raise DomainError("PGM output needs a 2-D grid")
    rho = np.asarray(grid.rho, dtype=float)
    if not np.all(np.isfinite(rho)):
        raise DomainError("grid contains non-finite density values")
    top = float(rho.max())
    if top <= 0 or grid.mass() <= 0:
        raise DomainError("zero-mass grid cannot be rendered")
    pixels = np.floor(255.0 * rho / top + 0.5).astype(np.uint8)
    image = pixels.T[::-1]  # image[row, col] = rho[col, res - 1 - row]
    h, w = image.shape
    return f"P5\n{w} {h}\n255\n".encode() + image.tobytes()


def emit_pgm(grid: rs.DensityGrid, path: str) -> None:
    _atomic_write(path, pgm_bytes(grid))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, ProjPoint):
        return _jsonable(x.value()) if not x.is_infinite() else "inf"
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        x = complex(x)
        return x.real if x.imag == 0 else [x.real, x.imag]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


# ---------------------------------------------------------------- input


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _scalar(text: str):
    t = text.strip()
    if t.lower() in ("inf", "infinity", "oo"):
        return math.inf
    try:
        if "/" in t:
            return Fraction(t)
        if "j" in t:
            return complex(t)
        return float(t)
    except ValueError as exc:
        raise InputError(f"not a number: {text!r}") from exc


def _scalars(text: str | None, name: str, count: int | None = None) -> list:
    if text is None:
        raise InputError(f"--{name} is required")
    vals = [_scalar(x) for x in text.split(",") if x.strip()]
    if count is not None and len(vals) != count:
        raise InputError(f"--{name} needs {count} values, got {len(vals)}")
    return vals


def _ints(text: str | None, name: str) -> list[int]:
    if text is None:
        raise InputError(f"--{name} is required")
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"--{name} needs comma-separated integers") from exc


def _proj(x) -> ProjPoint:
    return ProjPoint.of(x)


def _curve(args) -> mm.HyperellipticCurve:
    """Curve from a JSON file or from --roots/--marked/--type."""
    if getattr(args, "curve", None):
        try:
            return mm.HyperellipticCurve.from_json(_load_json(args.curve))
        except DegenerateError:
            raise
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    if args.roots is None:
        raise InputError("give a curve JSON file or --roots")
    roots = [float(x) for x in _scalars(args.roots, "roots")]
    base = mm.HyperellipticCurve(tuple(roots))
    marked = []
    for item in (args.marked or "").split(","):
        item = item.strip()
        if not item:
            continue
        if "j" in item:
            z = complex(item)
            p = mm.MarkedPoint(z, base.sqrt_f(z))
            marked += [p, mm.MarkedPoint(z.conjugate(), complex(p.y).conjugate())]
            continue
        x, _, sheet = item.partition(":")
        sheet_val = int(sheet) if sheet else 1
        if sheet_val not in (1, -1):
            raise InputError(f"sheet must be 1 or -1 in {item!r}")
        marked.append(base.point(float(x), sheet_val))
    return base.with_marked(marked, args.type)


def _mcurve(args) -> rs.MCurve:
    try:
        return rs.MCurve(_curve(args))
    except rs.PlacementError as exc:
        raise InputError(str(exc)) from exc


def _triple(path: str | None) -> mm.MumfordTriple:
    if path is None:
        raise InputError("--triple is required")
    try:
        return mm.MumfordTriple.from_json(_load_json(path))
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _graph_and_degrees(args) -> tuple[dg.DualGraph, list[int] | None]:
    obj = _load_json(args.graph)
    graph = dg.DualGraph.from_json(obj)
    degrees = _ints(args.degrees, "degrees") if args.degrees else obj.get("degrees")
    if degrees is not None and len(degrees) != len(graph.vertices):
        raise InputError(f"need {len(graph.vertices)} degrees, got {len(degrees)}")
    return graph, degrees


def _need_degrees(degrees):
    if degrees is None:
        raise InputError("--degrees is required (or a 'degrees' key in the graph JSON)")
    return degrees


def _quads(text: str | None, g: int):
    if not text:
        return rs.HUISMAN_CHART if g == 2 else mm.default_quadruples(g)
    out = []
    for item in text.split(","):
        digits = item.strip()
        if len(digits) != 4 or not digits.isdigit():
            raise InputError(f"chart entries are four digits like 1345, got {item!r}")
        out.append(tuple(int(c) for c in digits))
    if len(out) != g:
        raise InputError(f"the chart needs {g} quadruples")
    return tuple(out)


def _component(text: str | None, g: int) -> rs.ComponentIndex:
    comp = rs.ComponentIndex.parse(text or "H", g)
    if not comp.members <= set(range(1, g + 2)) or len(comp.members) % 2 != (g + 1) % 2:
        raise InputError(f"{text!r} is not a component index of Pic^{g + 1}")
    return comp


# ---------------------------------------------------------------- handlers


def cmd_hypertree(args) -> dict:
    action = args.action
    if action in ("from-tri", "trinity"):
        tri = ht.Triangulation.from_json(_load_json(args.input))
        ht.validate_triangulation(tri)
        if args.validate_only:
            return {"valid": True}
        if action == "from-tri":
            black, white = ht.from_triangulation(tri)
            return {"black": black.to_json(), "white": white.to_json()}
        outer = None if args.outer is None else args.outer - 1
        return ht.trinity_match(tri, outer).to_json()
    tree = ht.Hypertree.from_json(_load_json(args.input))
    if action == "invert":
        q = [_proj(x) for x in _scalars(args.q, "q", tree.n)]
    if args.validate_only:
        return {"valid": True}
    if action == "check":
        return ht.check_ct(tree).to_json()
    if action == "irreducible":
        verdict = ht.check_ct(tree)
        if not verdict.is_ct:
            raise InputError(f"hypertree is not CT (violating {list(verdict.violating)})")
        return {"irreducible": ht.is_irreducible(tree)}
    maps, torus = ht.inverse_scattering(tree, q)
    return {"maps": [[_jsonable(c) for c in m.matrix()] for m in maps], "torus": torus.to_json()}


def cmd_graph(args) -> dict | list:
    graph, degrees = _graph_and_degrees(args)
    action = args.action
    if action in ("theta", "stability", "mhv", "channels"):
        _need_degrees(degrees)
    if action == "enumerate" and args.degree is None:
        raise InputError("--degree is required")
    if args.validate_only:
        return {"valid": True}
    if action == "genus":
        return {"genus": dg.graph_genus(graph)}
    if action == "theta":
        return {"theta": [str(x) for x in dg.theta_vector(graph, degrees)]}
    if action == "stability":
        return dg.check_stability(graph, degrees).to_json()
    if action == "enumerate":
        return [list(m) for m in dg.enumerate_multidegrees(graph, args.degree, args.kind)]
    if action == "mhv":
        return dg.mhv_structural_check(graph, degrees).to_json()
    return [c.to_json() for c in dg.channel_factorizations(graph, degrees)]


def cmd_mm(args) -> dict | list:
    curve = _curve(args)
    action = args.action
    M = _triple(args.triple) if action in ("validate", "flow", "slopes", "amplitude") else None
    if action == "build":
        t = _scalars(args.t, "t", curve.g)
        sheets = _ints(args.sheets, "sheets") if args.sheets else [1] * curve.g
        if len(sheets) != curve.g or any(s not in (1, -1) for s in sheets):
            raise InputError(f"--sheets needs {curve.g} entries of 1 or -1")
    if action == "flow":
        c = _scalar(args.c) if args.c is not None else None
        if c is None:
            raise InputError("--c is required")
    if action == "preimages":
        target = [float(x) for x in _scalars(args.target, "target", curve.g)]
    if args.validate_only:
        return {"valid": True}
    if action == "build":
        s = [curve.sqrt_f(x, k) for x, k in zip(t, sheets)]
        M = mm.mumford_from_points(curve, t, s)
        return {**M.to_json(), "residual": mm.mumford_validate(M, curve)}
    if action == "validate":
        res = mm.mumford_validate(M, curve)
        return {"residual": res, "valid": res <= args.tol}
    if action == "flow":
        try:
            out = mm.lax_flow(M, c, args.time, args.steps)
        except mm.ChartExit as exc:
            raise DomainError(f"{exc} at time {exc.time_reached}") from exc
        return {**out.to_json(), "residual": mm.mumford_validate(out, curve)}
    if action == "slopes":
        return {"q": [_jsonable(q) for q in mm.scattering_slopes(M, curve)]}
    if action == "amplitude":
        return {"branch": mm.amplitude_branch(M, curve, quadruples=_quads(args.chart, curve.g))}
    mc = _mcurve(args)
    found = rs.find_preimages(mc, target, quads=_quads(args.chart, curve.g), tol=args.tol if args.tol > 1e-9 else 1e-8)
    return {"count": len(found), "preimages": [p.to_json() for p in found]}


def _grid_outputs(grid: rs.DensityGrid, args) -> dict:
    report = {
        "component": str(grid.component),
        "resolution": grid.resolution,
        "mass": grid.mass(),
        "normalization": grid.normalization,
        "flagged": grid.flagged,
        "min_rho": float(np.min(grid.rho)),
        "max_rho": float(np.max(grid.rho)),
    }
    if args.out:
        if args.out.lower().endswith(".pgm"):
            emit_pgm(grid, args.out)
        else:
            report["rows"] = emit_csv(grid, args.out)
        report["out"] = args.out
    if args.figure:
        from .plotting import render_density

        render_density(grid, args.figure)
        report["figure"] = args.figure
    return report


def cmd_density(args) -> dict:
    mc = _mcurve(args)
    g = mc.g
    comp = _component(args.component, g)
    quads = _quads(args.chart, g)
    if args.action == "g1" and g != 1:
        raise InputError("density g1 needs a genus-1 curve")
    if args.action == "g2" and g != 2:
        raise InputError("density g2 needs a genus-2 curve")
    if args.action == "mc" and args.samples < 10_000:
        raise InputError("--samples must be at least 10000")
    if args.validate_only:
        return {"valid": True}
    if args.action == "g1":
        return _grid_outputs(rs.genus1_density(mc, args.resolution or 512, comp, quads), args)
    if args.action == "g2":
        return _grid_outputs(rs.genus2_density_grid(mc, comp, quads, args.resolution or 64), args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        hist = rs.montecarlo_pushforward(mc, comp, args.samples, args.seed, args.resolution or 32, quads)
    report = {
        "component": str(comp),
        "samples": hist.samples,
        "proposals": hist.proposals,
        "envelope": hist.envelope,
        "bins": int(hist.counts.shape[0]),
        "warnings": [str(w.message) for w in caught],
    }
    if args.out:
        centers = np.tan((hist.edges[:-1] + hist.edges[1:]) / 4)
        lines = ["lambda,count"] if g == 1 else ["lambda1,lambda2,count"]
        if g == 1:
            lines += [f"{format(float(c), '.17g')},{int(k)}" for c, k in zip(centers, hist.counts)]
        else:
            for i, a in enumerate(centers):
                for j, b in enumerate(centers):
                    lines.append(f"{format(float(a), '.17g')},{format(float(b), '.17g')},{int(hist.counts[i, j])}")
        _atomic_write(args.out, ("\n".join(lines) + "\n").encode())
        report["out"] = args.out
    return report


def cmd_nodal(args) -> dict:
    p = _scalars(args.p, "p", 4)
    z = _scalar(args.z) if args.z is not None else None
    if args.validate_only:
        return {"valid": True}
    if args.action == "g1":
        out = {
            "lambda_0": _jsonable(dg.nodal_genus1_lambda(0, p)),
            "lambda_inf": _jsonable(dg.nodal_genus1_lambda(math.inf, p)),
            "critical_points": [_jsonable(c) for c in dg.nodal_genus1_critical_points(p)],
        }
        if z is not None:
            out["lambda"] = _jsonable(dg.nodal_genus1_lambda(z, p))
        return out
    out = {
        "lambda_0": _jsonable(dg.twochannel_genus1_lambda(0, p)),
        "lambda_inf": _jsonable(dg.twochannel_genus1_lambda(math.inf, p)),
        "critical_points": [_jsonable(c) for c in dg.twochannel_critical_points(p)],
        "critical_values": [_jsonable(c) for c in dg.twochannel_discriminant_roots(p)],
    }
    if z is not None:
        out["lambda"] = _jsonable(dg.twochannel_genus1_lambda(z, p))
    return out


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (Monte Carlo)")
    common.add_argument("--tol", type=float, default=1e-9, help="numerical tolerance")
    common.add_argument("--out", help="output file (.csv or .pgm for grids, JSON otherwise)")
    common.add_argument("--validate-only", action="store_true", help="check inputs and stop")

    curve_opts = _Parser(add_help=False)
    curve_opts.add_argument("curve", nargs="?", help="curve JSON file")
    curve_opts.add_argument("--roots", help="comma-separated real roots (instead of a curve file)")
    curve_opts.add_argument("--marked", help="marked points: x[:sheet] entries, or re+imj for a conjugate pair")
    curve_opts.add_argument("--type", choices=("A", "B"), help="placement type of the marked points")
    curve_opts.add_argument("--chart", help="chart quadruples, e.g. 1345,2345")

    parser = _Parser(prog="mhvcurves", description="MHV curves: hypertrees, degenerations, matrix models, real scattering densities")
    sub = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)

    p = sub.add_parser("hypertree", parents=[common], help="CT hypertrees and checkerboard triangulations")
    p.add_argument("action", choices=("check", "irreducible", "from-tri", "trinity", "invert"))
    p.add_argument("input", help="hypertree or triangulation JSON")
    p.add_argument("--outer", type=int, help="1-based index of the outer white face (trinity)")
    p.add_argument("--q", help="comma-separated slopes q_1..q_n (invert); 'inf' allowed")
    p.set_defaults(func=cmd_hypertree)

    p = sub.add_parser("graph", parents=[common], help="dual graphs and multidegrees")
    p.add_argument("action", choices=("genus", "theta", "stability", "enumerate", "mhv", "channels"))
    p.add_argument("graph", help="dual graph JSON")
    p.add_argument("--degrees", help="comma-separated multidegree")
    p.add_argument("--degree", type=int, help="total degree (enumerate)")
    p.add_argument("--kind", default="stable", choices=("stable", "semistable", "strictly-semistable"))
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("mm", parents=[common, curve_opts], help="Mumford triples and Lax flows")
    p.add_argument("action", choices=("build", "validate", "flow", "slopes", "preimages", "amplitude"))
    p.add_argument("--triple", help="triple JSON {U, V, W}")
    p.add_argument("--t", help="comma-separated x-coordinates of the divisor (build)")
    p.add_argument("--sheets", help="comma-separated sheets +-1 for --t (build)")
    p.add_argument("--c", help="flow parameter (flow)")
    p.add_argument("--time", type=float, default=1.0, help="flow time (flow)")
    p.add_argument("--steps", type=int, default=1000, help="RK4 steps (flow)")
    p.add_argument("--target", help="chart point (preimages)")
    p.set_defaults(func=cmd_mm)

    p = sub.add_parser("density", parents=[common, curve_opts], help="real scattering densities")
    p.add_argument("action", choices=("g1", "g2", "mc"))
    p.add_argument("--component", help="component index: H, empty, or comma-separated ovals")
    p.add_argument("--resolution", type=int, help="cells (or bins) per axis")
    p.add_argument("--samples", type=int, default=100_000, help="Monte Carlo samples (mc)")
    p.add_argument("--figure", help="also render a PNG figure to this path")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("nodal", parents=[common], help="genus-1 closed forms")
    p.add_argument("action", choices=("g1", "twochannel"))
    p.add_argument("--p", help="comma-separated p1..p4")
    p.add_argument("--z", help="evaluate lambda at this z as well")
    p.set_defaults(func=cmd_nodal)
    return parser


_VALUE_OPTIONS = {"--roots", "--marked", "--q", "--degrees", "--t", "--c", "--target", "--p", "--z", "--sheets"}


def _join_negative_values(argv: Sequence[str]) -> list[str]:
    """Let value options take values that start with '-' (e.g. --roots -1,0,1)."""
    out: list[str] = []
    k = 0
    argv = list(argv)
    while k < len(argv):
        a = argv[k]
        if a in _VALUE_OPTIONS and k + 1 < len(argv) and argv[k + 1].startswith("-") and argv[k + 1][1:2].replace(".", "").isdigit():
            out.append(f"{a}={argv[k + 1]}")
            k += 2
            continue
        out.append(a)
        k += 1
    return out


def run(argv: Sequence[str] | None = None) -> tuple[int, object]:
    """Parse and dispatch; returns (exit code, JSON-ready body)."""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(_join_negative_values(argv))
        if getattr(args, "func", None) is None:
            raise InputError("exactly one subcommand is required")
        return EXIT_OK, args.func(args)
    except InputError as exc:
        return EXIT_INPUT, {"error": str(exc), "kind": "input"}
    except (DomainError, DegenerateError, mm.ChartExit, ht.InternalInconsistency, ht.NotMassless) as exc:
        return EXIT_DOMAIN, {"error": str(exc), "kind": "domain"}
    except (ht.ValidationError, ValueError, KeyError, TypeError) as exc:
        return EXIT_INPUT, {"error": str(exc), "kind": "input"}


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if any(a in ("-h", "--help") for a in argv):
        build_parser().parse_args(argv)  # prints help and exits 0
    code, body = run(argv)
    text = json.dumps(_jsonable(body), indent=None, sort_keys=False)
    out_json = None
    if code == EXIT_OK and not _writes_grid(argv):
        out_json = _out_path(argv)
    if out_json:
        try:
            _atomic_write(out_json, (text + "\n").encode())
        except DomainError as exc:
            print(json.dumps({"error": str(exc), "kind": "domain"}))
            return EXIT_DOMAIN
    print(text, file=sys.stdout if code == EXIT_OK else sys.stderr)
    return code


def _out_path(argv: Sequence[str]) -> str | None:
    for k, a in enumerate(argv):
        if a == "--out" and k + 1 < len(argv):
            return argv[k + 1]
        if a.startswith("--out="):
            return a.split("=", 1)[1]
    return None


def _writes_grid(argv: Sequence[str]) -> bool:
    return bool(argv) and argv[0] == "density"


if __name__ == "__main__":
    sys.exit(main())
