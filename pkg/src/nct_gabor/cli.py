"""Command-line front end.

Every report is JSON with floats printed to 17 significant digits, so equal
configurations give byte-identical output.  Exit codes: 0 success or
certified, 1 usage or parse error, 2 mathematical failure (not a frame, not
a projection), 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .errors import (
    NoConvergence,
    NotAFrame,
    NotInvertible,
    QuadratureFailure,
)
from .gabor_core import (
    canonical_dual,
    canonical_tight,
    default_radius,
    figa_sides,
    frame_bounds,
    inner_left,
    to_signal,
    window_id,
)
from .lattice import Lattice2D, parse_lattice
from .projections import (
    axis_envelope,
    decay_profile,
    module_condition_residual,
    build_projection,
    sweep_csv,
    tensor_projection,
    theta_sweep,
    tight_for_projection,
    verify_projection,
)
from .tf_signal import GridSpec, parse_window
from .twisted_algebra import TwistedElement

EXIT_OK, EXIT_USAGE, EXIT_MATH, EXIT_NUMERIC = 0, 1, 2, 3

# Defaults shared by all subcommands; echoed into every report as "config".
DEFAULTS = {
    "window": "gaussian",
    "lattice": "1,0,0,0.5",
    "grid": "16,64",
    "tol": 1e-8,
    "figa_tol": 1e-5,
    "frame_tol": 1e-8,
    "decay_radius": 12.0,
    "thetas": "0.5,0.7,0.9,0.95,0.99,1.0",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- output -----------------------------------------------------------------------------

def _encode(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return f"{v:.17g}" if math.isfinite(v) else "null"
    if isinstance(obj, complex):
        return _encode({"re": obj.real, "im": obj.imag}, indent)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj) -> str:
    """JSON text with every float at 17 significant digits."""
    return _encode(obj) + "\n"


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- config -------------------------------------------------------------------------------

def _parse_grid(text: str) -> GridSpec:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise UsageError(f"grid must be 'T,q', got {text!r}")
    try:
        return GridSpec(float(parts[0]), int(parts[1]))
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}: {exc}") from None


def _parse_floats(text: str, what: str) -> list:
    out = []
    for tok in text.split(","):
        try:
            out.append(float(tok))
        except ValueError:
            raise UsageError(f"bad {what} token {tok.strip()!r}") from None
    return out


def _config(args) -> dict:
    cfg = {
        "command": args.command,
        "window": args.window,
        "lattice": args.lattice,
        "grid": args.grid,
        "radius": args.radius,  # null: window default, grown automatically where supported
        "tol": args.tol or DEFAULTS["figa_tol" if args.command == "figa" else "tol"],
        "frame_tol": DEFAULTS["frame_tol"],
    }
    for key in ("thetas", "windows", "element"):
        if getattr(args, key, None) is not None:
            cfg[key] = getattr(args, key)
    return cfg


def _window(args):
    try:
        return parse_window(args.window)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _lattice(args) -> Lattice2D:
    try:
        return parse_lattice(args.lattice)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _check_positive(args):
    if args.radius is not None and not args.radius > 0:
        raise UsageError("radius must be positive")
    if args.tol is not None and not args.tol > 0:
        raise UsageError("tol must be positive")


# --- plots --------------------------------------------------------------------------------

def _plot(path: str, xs, ys, xlabel: str, ylabel: str, logy: bool = False):
    try:
        import matplotlib
    except ImportError:
        raise UsageError("--plot needs matplotlib") from None
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "nct-gabor"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for x, y, label in zip(xs, ys, ylabel if isinstance(ylabel, list) else [ylabel]):
        ax.plot(x, y, marker="o", label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    if isinstance(ylabel, list):
        ax.legend()
    else:
        ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# --- commands -------------------------------------------------------------------------------

def cmd_frame_bounds(args) -> int:
    w, L = _window(args), _lattice(args)
    rep = frame_bounds(w, L, args.radius, grid=_parse_grid(args.grid))
    out = rep.to_json()
    out["is_frame"] = rep.is_frame
    out["config"] = _config(args)
    _emit(dumps(out), args.out)
    return EXIT_OK if rep.is_frame else EXIT_MATH


def cmd_project(args) -> int:
    w, L = _window(args), _lattice(args)
    if L.dim_pairs != 1:
        raise UsageError("project takes a single-block lattice; use tensor-project for products")
    tol = args.tol or DEFAULTS["tol"]
    P, rep, gt = build_projection(w, L, tol, args.radius)
    try:
        rep.decay_fits = decay_profile(P)
    except ValueError as exc:
        rep.notes.append(f"decay fit skipped: {exc}")
    rep.module_condition_residual = module_condition_residual(gt, L, default_radius(w), _parse_grid(args.grid))
    out = rep.to_json()
    out["config"] = _config(args)
    _emit(dumps(out), args.out)
    if args.element_out:
        _emit(dumps(P.to_json()), args.element_out)
    return EXIT_OK if rep.certified else EXIT_MATH


def cmd_sweep(args) -> int:
    w = _window(args)
    thetas = _parse_floats(args.thetas or DEFAULTS["thetas"], "theta")
    rows = theta_sweep(w, thetas, args.radius, args.tol or DEFAULTS["tol"])
    _emit(sweep_csv(rows), args.out)
    if args.plot:
        ok = [r for r in rows if math.isfinite(r["A"])]
        _plot(args.plot, [[r["theta"] for r in ok]], [[r["A"] for r in ok]], "theta", "lower frame bound A")
    return EXIT_OK


def _read_element(path: str) -> TwistedElement:
    try:
        with open(path) as fh:
            obj = json.load(fh)
        return TwistedElement.from_json(obj)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        raise UsageError(f"cannot read element {path!r}: {exc}") from None


def cmd_verify(args) -> int:
    if not args.element:
        raise UsageError("verify needs --element PATH")
    P = _read_element(args.element)
    rep = verify_projection(P, args.tol or DEFAULTS["tol"])
    out = rep.to_json()
    out["config"] = _config(args)
    _emit(dumps(out), args.out)
    return EXIT_OK if rep.certified else EXIT_MATH


def cmd_figa(args) -> int:
    L = _lattice(args)
    lits = [s.strip() for s in (args.windows or args.window).split(",")]
    if len(lits) == 1:
        lits = lits * 4
    if len(lits) != 4:
        raise UsageError(f"figa needs 1 or 4 windows, got {len(lits)}")
    try:
        f, g, h, k = (parse_window(s) for s in lits)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    radius = args.radius or 8.0
    tol = args.tol or DEFAULTS["figa_tol"]
    lhs, rhs, res = figa_sides(f, g, h, k, L, radius)
    out = {
        "lattice": L.literal(),
        "windows": [window_id(x) for x in (f, g, h, k)],
        "radius": radius,
        "lhs": lhs,
        "rhs": rhs,
        "residual": res,
        "tol": tol,
        "passed": res <= tol,
        "config": _config(args),
    }
    _emit(dumps(out), args.out)
    return EXIT_OK if res <= tol else EXIT_MATH


def cmd_decay(args) -> int:
    w, L = _window(args), _lattice(args)
    radius = args.radius or DEFAULTS["decay_radius"]
    gt = tight_for_projection(w, L, args.tol or DEFAULTS["tol"])
    P = inner_left(gt, gt, L, radius)
    fits = decay_profile(P)
    out = {
        "lattice": L.literal(),
        "window": window_id(w),
        "radius": radius,
        "decay_fits": [f.to_json() for f in fits],
        "config": _config(args),
    }
    _emit(dumps(out), args.out)
    if args.plot:
        xs, ys, labels = [], [], []
        for j in range(L.dim):
            r, env = axis_envelope(P, j)
            keep = env > 0
            xs.append(r[keep])
            ys.append(env[keep])
            labels.append(f"index axis {j}")
        _plot(args.plot, xs, ys, "distance along axis", labels, logy=True)
    return EXIT_OK


def cmd_tensor_project(args) -> int:
    L = _lattice(args)
    lits = [s.strip() for s in (args.windows or args.window).split(",")]
    if len(lits) == 1:
        lits = lits * L.dim_pairs
    if len(lits) != L.dim_pairs:
        raise UsageError(f"need 1 or {L.dim_pairs} windows, got {len(lits)}")
    try:
        windows = [parse_window(s) for s in lits]
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    try:
        P, rep = tensor_projection(windows, list(L.blocks), args.tol or DEFAULTS["tol"], args.radius)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = rep.to_json()
    out["nnz"] = P.nnz
    out["config"] = _config(args)
    _emit(dumps(out), args.out)
    if args.element_out:
        _emit(dumps(P.to_json()), args.element_out)
    return EXIT_OK if rep.certified else EXIT_MATH


def _window_command(args, build, label: str) -> int:
    w, L = _window(args), _lattice(args)
    grid = _parse_grid(args.grid)
    tol = min(args.tol or 1e-10, 1e-10)
    h = build(w, L, tol, args.radius)
    rep = frame_bounds(h, L, args.radius or default_radius(w), power_check=False)
    g_s, h_s = to_signal(w, grid), to_signal(h, grid)
    out = {
        "lattice": L.literal(),
        "window": window_id(w),
        "kind": label,
        "frame_report": rep.to_json(),
        "distance_to_window": (g_s - h_s).norm(),
        "coefficients": h.coeffs.to_json(),
        "config": _config(args),
    }
    if label == "tight":
        # Exploratory: how far other tight atoms (tightened named windows) sit from w.
        others = {}
        for lit in ("gaussian", "sech", "exp2"):
            if lit == window_id(w):
                continue
            try:
                other = canonical_tight(parse_window(lit), L, 1e-8)
            except (NotAFrame, NoConvergence, NotInvertible):
                continue
            others[lit] = (g_s - to_signal(other, grid)).norm()
        out["distance_to_other_tight_atoms"] = others
    _emit(dumps(out), args.out)
    if args.samples_out:
        data = np.stack([grid.t, h_s.values.real, h_s.values.imag], axis=1)
        np.savetxt(args.samples_out, data, fmt="%.17g")
    return EXIT_OK


def cmd_tight(args) -> int:
    return _window_command(args, lambda w, L, tol, r: canonical_tight(w, L, tol, r), "tight")


def cmd_dual(args) -> int:
    return _window_command(args, lambda w, L, tol, r: canonical_dual(w, L, tol, r), "dual")


COMMANDS = {
    "frame-bounds": cmd_frame_bounds,
    "project": cmd_project,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "figa": cmd_figa,
    "decay": cmd_decay,
    "tensor-project": cmd_tensor_project,
    "tight": cmd_tight,
    "dual": cmd_dual,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nct-gabor", description="Gabor frames and projections in the noncommutative torus.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--window", default=DEFAULTS["window"], help="gaussian, sech, exp2 or custom:<path>")
        p.add_argument("--lattice", default=DEFAULTS["lattice"], help="row-major 2x2 blocks, ';'-separated")
        p.add_argument("--grid", default=DEFAULTS["grid"], help="T,q: half-width and samples per unit")
        p.add_argument("--radius", type=float, default=None, help="truncation radius")
        p.add_argument("--tol", type=float, default=None, help="certification tolerance")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--plot", default=None, help="SVG output path (sweep, decay)")
        if name == "sweep":
            p.add_argument("--thetas", default=None, help="comma-separated theta values")
        if name == "verify":
            p.add_argument("--element", default=None, help="element JSON file")
        if name in ("project", "tensor-project"):
            p.add_argument("--element-out", default=None, help="write the projection element JSON here")
        if name in ("figa", "tensor-project"):
            p.add_argument("--windows", default=None, help="comma-separated window literals")
        if name in ("tight", "dual"):
            p.add_argument("--samples-out", default=None, help="write t, re, im samples here")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _check_positive(args)
        _parse_grid(args.grid)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"nct-gabor: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NotAFrame, NotInvertible) as exc:
        print(f"nct-gabor: not a frame: {exc}", file=sys.stderr)
        return EXIT_MATH
    except (NoConvergence, QuadratureFailure) as exc:
        print(f"nct-gabor: no convergence: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        print(f"nct-gabor: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
