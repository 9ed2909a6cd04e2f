"""Projections in the truncated noncommutative torus.

A tight window ``gt`` gives the projection ``P = Lambda<gt, gt>``.  Every
constructor returns the residuals of the truncated element; nothing is
assumed to be a projection without being checked.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSupport, NctGaborError, NotAFrame
from .gabor_core import (
    FRAME_TOL,
    _check_frame,
    canonical_tight,
    default_radius,
    pairing,
    inner_right,
    janssen_element,
    janssen_tail_mass,
    to_signal,
    window_id,
)
from .lattice import Lattice2D, separable
from .tf_signal import GridSpec
from .twisted_algebra import (
    TwistedElement,
    adjoint_residual,
    apply_right,
    involute,
    l1s_norm,
    spectral_bounds,
    tconv,
    trace,
)

PROJ_TOL = 1e-8
SA_TOL = 1e-10
MAX_PROJ_RADIUS = 48.0
DECAY_SLOPE = 6.0
DECAY_FLOOR = 1e-13
DECAY_STRIP = 2.0  # half-width of the band around each axis used for envelopes
SWEEP_HEADER = ["theta", "A", "B", "invertible", "idem_residual", "sa_residual", "trace"]


@dataclass
class DecayFit:
    """Fit of the coefficient envelope along one index axis."""

    axis: int
    model: str  # best of polynomial, exponential, gaussian
    kind: str  # superpolynomial or polynomial
    slope: float  # log-log slope of the polynomial model
    rate: float  # decay rate of the best model
    rss: dict
    n_points: int

    @property
    def order(self) -> float:
        return -self.slope

    def to_json(self) -> dict:
        return {
            "axis": self.axis,
            "model": self.model,
            "kind": self.kind,
            "order": self.order,
            "rate": self.rate,
            "rss": dict(self.rss),
            "n_points": self.n_points,
        }


@dataclass
class ProjectionReport:
    idempotency_residual: float
    selfadjoint_residual: float
    trace: complex
    expected_trace: float | None = None
    decay_fits: list = field(default_factory=list)
    module_condition_residual: float | None = None
    radius: float = 0.0
    tol: float = PROJ_TOL
    sa_tol: float = SA_TOL
    lattice: str = ""
    window: str = ""
    notes: list = field(default_factory=list)

    @property
    def trace_error(self) -> float:
        if self.expected_trace is None:
            return 0.0
        return abs(self.trace - self.expected_trace)

    @property
    def certified(self) -> bool:
        return (
            self.idempotency_residual <= self.tol
            and self.selfadjoint_residual <= self.sa_tol
            and self.trace_error <= self.tol
        )

    def to_json(self) -> dict:
        return {
            "lattice": self.lattice,
            "window": self.window,
            "certified": self.certified,
            "idempotency_residual": self.idempotency_residual,
            "selfadjoint_residual": self.selfadjoint_residual,
            "trace": {"re": self.trace.real, "im": self.trace.imag},
            "expected_trace": self.expected_trace,
            "radius": self.radius,
            "tol": self.tol,
            "sa_tol": self.sa_tol,
            "module_condition_residual": self.module_condition_residual,
            "decay_fits": [f.to_json() for f in self.decay_fits],
            "notes": list(self.notes),
        }


def rieffel_trace(P: TwistedElement) -> complex:
    """The canonical trace: the coefficient at the origin."""
    return trace(P)


def verify_projection(P: TwistedElement, tol: float = PROJ_TOL, expected_trace=None,
                      sa_tol: float | None = None) -> ProjectionReport:
    """Residuals of P # P - P and P* - P in l1, and the trace."""
    idem = l1s_norm(tconv(P, P) - P)
    sa = adjoint_residual(P)
    return ProjectionReport(
        idempotency_residual=idem,
        selfadjoint_residual=sa,
        trace=complex(rieffel_trace(P)),
        expected_trace=expected_trace,
        radius=P.radius,
        tol=tol,
        sa_tol=min(SA_TOL, tol) if sa_tol is None else sa_tol,
        lattice=P.lattice.literal(),
    )


def module_condition_residual(g, L: Lattice2D, radius: float | None = None,
                              grid: GridSpec | None = None) -> float:
    """Relative L2 norm of g . <g, g> - g on the grid; zero exactly for tight windows."""
    radius = default_radius(g) if radius is None else radius
    gs = to_signal(g, grid)
    back = apply_right(gs, inner_right(gs, gs, L, radius))
    return (back - gs).norm() / gs.norm()


def projection_from_window(
    w,
    L: Lattice2D,
    tol: float = PROJ_TOL,
    radius: float | None = None,
    max_radius: float = MAX_PROJ_RADIUS,
    tight_tol: float | None = None,
    tight_max_radius: float | None = None,
    sa_tol: float | None = None,
):
    """Projection Lambda<gt, gt> from the canonical tight window of ``w``.

    The truncation radius starts at ``radius`` (window default) and grows
    until the projection certifies, the residual stops improving, or
    ``max_radius`` is reached.  Returns ``(P, report)``; check
    ``report.certified``.
    """
    P, rep, _ = build_projection(w, L, tol, radius, max_radius, tight_tol, tight_max_radius, sa_tol)
    return P, rep


def build_projection(
    w,
    L: Lattice2D,
    tol: float = PROJ_TOL,
    radius: float | None = None,
    max_radius: float = MAX_PROJ_RADIUS,
    tight_tol: float | None = None,
    tight_max_radius: float | None = None,
    sa_tol: float | None = None,
):
    """Like ``projection_from_window`` but also returns the tight window."""
    r = default_radius(w) if radius is None else float(radius)
    gt = tight_for_projection(w, L, tol, tight_tol, tight_max_radius)
    history = []
    best = None
    known = {}
    while True:
        P = _grow_inner(gt, L, r, known)
        rep = verify_projection(P, tol, L.volume, sa_tol)
        history.append(rep.idempotency_residual)
        if best is None or rep.idempotency_residual < best[1].idempotency_residual:
            best = (P, rep)
        if rep.certified or r >= max_radius:
            break
        if len(history) >= 4 and history[-1] > 0.5 * history[-4]:
            break
        r = min(max_radius, r + max(2.0, 2.0 * round(r / 8)))
    P, rep = best
    rep.window = window_id(w)
    rep.notes.append("radius search: " + ", ".join(f"{h:.3g}" for h in history))
    return P, rep, gt


def tight_for_projection(w, L: Lattice2D, tol: float = PROJ_TOL, tight_tol: float | None = None,
                         max_radius: float | None = None):
    """Canonical tight window accurate enough for projections certified at ``tol``."""
    tight_tol = min(1e-10, 1e-2 * tol) if tight_tol is None else tight_tol
    _, jr = _janssen_for(w, L, tol)
    return canonical_tight(w, L, tight_tol, jr, max_radius=max_radius)


def _grow_inner(gt, L: Lattice2D, r: float, known: dict) -> TwistedElement:
    """inner_left(gt, gt, L, r), reusing coefficients already in ``known``."""
    idx, _ = L.points(r)
    keys = [tuple(k) for k in idx.tolist()]
    new = [i for i, k in enumerate(keys) if k not in known]
    if new:
        vals = pairing(gt, gt, L, idx[new])
        known.update(zip((keys[i] for i in new), vals))
    return TwistedElement.from_points(L, idx, [known[k] for k in keys], "c", r)


def _janssen_for(w, L: Lattice2D, tol: float, max_radius: float = 24.0):
    """Janssen element with a radius large enough that its dropped tail,
    amplified by the inverse lower frame bound, stays well below ``tol``."""
    r = default_radius(w)
    while True:
        J = janssen_element(w, L, r)
        sb = _check_frame(J)
        if r >= max_radius or janssen_tail_mass(w, L, r) <= 1e-3 * tol * sb.lower:
            return J, r
        r += 2.0


# --- decay diagnostics -------------------------------------------------------------

def _fit(x: np.ndarray, y: np.ndarray):
    A = np.stack([np.ones_like(x), x], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    rss = float(np.sum((A @ coef - y) ** 2))
    return coef, rss


def axis_envelope(P: TwistedElement, j: int, strip: float = DECAY_STRIP):
    """Distances k |b_j| and envelope values for k = 1 .. kmax along index axis j.

    See ``decay_profile`` for the definition.
    """
    idx = P.indices
    coords = P.lattice.coords(idx)
    vals = np.abs(P.values)
    reach = math.sqrt(max(P.radius**2 - strip**2, 0.0))
    step = float(np.linalg.norm(P.lattice.basis[:, j]))
    kmax = int(math.floor(reach / step + 1e-9))
    ks = np.abs(idx[:, j])
    near = np.linalg.norm(np.delete(coords, j, axis=1), axis=1) <= strip
    sel = near & (ks <= kmax)
    env = np.zeros(kmax + 1)
    np.maximum.at(env, ks[sel], vals[sel])
    return np.arange(1, kmax + 1) * step, env[1:]


def decay_profile(P: TwistedElement, min_radius: float = 8.0, floor: float = DECAY_FLOOR,
                  strip: float = DECAY_STRIP) -> list:
    """Classify coefficient decay along each index axis.

    The envelope along axis j at step k is the largest |P| over indices whose
    j-th entry is +k or -k and whose other coordinates lie within ``strip`` of
    the axis.  Only steps whose whole strip cross-section fits inside the
    support ball are used; near the ball's edge the cross-section shrinks to
    the axis point alone and would bias the envelope.  Its logarithm is fitted
    against log r, r and r^2 (r = k times the length of the j-th generator);
    the model with the smallest residual wins.  Decay is superpolynomial
    unless the polynomial model wins with slope magnitude at most 6.
    """
    if P.radius < min_radius or P.nnz < 2:
        raise InsufficientSupport(f"decay fit needs support radius >= {min_radius}, got {P.radius:.3g}")
    top = float(np.max(np.abs(P.values)))
    fits = []
    for j in range(P.lattice.dim):
        r, e = axis_envelope(P, j, strip)
        keep = e > floor * top
        if np.count_nonzero(keep) < 3:
            raise InsufficientSupport(f"axis {j}: fewer than 3 coefficients above the floor")
        r = r[keep]
        y = np.log(e[keep])
        (_, slope), rss_p = _fit(np.log(r), y)
        (_, rate_e), rss_e = _fit(r, y)
        (_, rate_g), rss_g = _fit(r * r, y)
        rss = {"polynomial": rss_p, "exponential": rss_e, "gaussian": rss_g}
        model = min(rss, key=rss.get)
        rate = {"polynomial": -slope, "exponential": -rate_e, "gaussian": -rate_g}[model]
        kind = "polynomial" if model == "polynomial" and abs(slope) <= DECAY_SLOPE else "superpolynomial"
        fits.append(DecayFit(j, model, kind, float(slope), float(rate), rss, int(np.count_nonzero(keep))))
    return fits


# --- theta sweeps ----------------------------------------------------------------------

def _sweep_row(w, theta: float, radius, tol: float) -> dict:
    row = {"theta": theta, "A": math.nan, "B": math.nan, "invertible": False,
           "idem_residual": math.nan, "sa_residual": math.nan, "trace": math.nan, "error": ""}
    try:
        if not theta > 0:
            raise ValueError(f"theta must be positive, got {theta}")
        L = separable(1.0, theta)
        sb = spectral_bounds(janssen_element(w, L, radius))
        row["A"], row["B"] = sb.lower, sb.upper
        row["invertible"] = bool(sb.lower > FRAME_TOL * sb.upper)
        if row["invertible"]:
            _, rep = projection_from_window(w, L, tol, radius)
            row["idem_residual"] = rep.idempotency_residual
            row["sa_residual"] = rep.selfadjoint_residual
            row["trace"] = rep.trace.real
            if not rep.certified:
                row["error"] = "projection not certified"
    except (NctGaborError, ValueError, ArithmeticError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _threads() -> int:
    try:
        n = int(os.environ.get("NCT_GABOR_THREADS", "0"))
    except ValueError:
        n = 0
    return n if n > 0 else min(4, os.cpu_count() or 1)


def theta_sweep(w, thetas, radius: float | None = None, tol: float = PROJ_TOL,
                threads: int | None = None) -> list:
    """One row per theta for the lattice Z x theta Z, in input order.

    Failures are recorded in the row's ``error`` field and the sweep goes on.
    """
    threads = _threads() if threads is None else max(1, int(threads))
    thetas = [float(t) for t in thetas]
    if threads == 1:
        return [_sweep_row(w, t, radius, tol) for t in thetas]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda t: _sweep_row(w, t, radius, tol), thetas))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def sweep_csv(rows: list) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(SWEEP_HEADER + ["error"])
    for row in rows:
        out.writerow([_fmt(row[k]) for k in SWEEP_HEADER] + [row.get("error", "")])
    return buf.getvalue()


# --- separable tensor products -------------------------------------------------------

def tensor_elements(factors: list) -> TwistedElement:
    """Coefficient tensor product of elements on single-block lattices."""
    lattice = Lattice2D([b for f in factors for b in f.lattice.blocks])
    data = factors[0].data
    offset = list(factors[0].offset)
    for f in factors[1:]:
        data = np.multiply.outer(data, f.data)
        offset += list(f.offset)
    radius = math.sqrt(sum(f.radius**2 for f in factors))
    return TwistedElement(lattice, offset, data, factors[0].cocycle_sign, radius)


def _l1_outer_diff(a: np.ndarray, b: np.ndarray, c: np.ndarray, d: np.ndarray) -> float:
    """sum |a_i b_j - c_i d_j| over all index pairs, with matching boxes."""
    a, b, c, d = (x.reshape(-1) for x in (a, b, c, d))
    total = 0.0
    chunk = max(1, 2_000_000 // max(1, len(b)))
    for s in range(0, len(a), chunk):
        total += float(np.sum(np.abs(np.outer(a[s:s + chunk], b) - np.outer(c[s:s + chunk], d))))
    return total


def _embed(x: TwistedElement, offset, shape) -> np.ndarray:
    out = np.zeros(shape, dtype=complex)
    if x.nnz:
        sl = tuple(slice(o - b, o - b + s) for o, b, s in zip(x.offset, offset, x.shape))
        out[sl] = x.data
    return out


def _product_residuals(factors: list):
    """l1 residuals of P#P - P and P* - P for the tensor product of ``factors``.

    Twisted convolution and the involution act factor by factor on a product
    lattice, so both residuals are l1 norms of differences of two tensor
    products; these are summed exactly without forming the product of the
    squared factors.
    """
    def diff(pairs):
        # pairs: list of (x_i, y_i); returns || prod x_i - prod y_i ||_1
        boxes = []
        for x, y in pairs:
            lo = np.minimum(x.offset, y.offset) if x.nnz and y.nnz else (x.offset if x.nnz else y.offset)
            hi = np.maximum(x.offset + x.shape, y.offset + y.shape) if x.nnz and y.nnz else lo + (x.shape if x.nnz else y.shape)
            shape = tuple(hi - lo)
            boxes.append((_embed(x, lo, shape).reshape(-1), _embed(y, lo, shape).reshape(-1)))
        a, c = boxes[0]
        for b, d in boxes[1:-1]:
            a = np.multiply.outer(a, b).reshape(-1)
            c = np.multiply.outer(c, d).reshape(-1)
        if len(boxes) == 1:
            return float(np.sum(np.abs(a - c)))
        b, d = boxes[-1]
        return _l1_outer_diff(a, b, c, d)

    idem = diff([(tconv(p, p), p) for p in factors])
    sa = diff([(involute(p), p) for p in factors])
    return idem, sa


def tensor_projection(windows: list, blocks: list, tol: float = PROJ_TOL, radius: float | None = None):
    """Projection on a product of separable lattices from per-block projections.

    ``blocks`` holds 2x2 diagonal bases diag(alpha_i, beta_i).  The product
    window has a factorized ambiguity function over the product lattice, so
    the projection is the coefficient tensor product of the block projections.
    Returns ``(P, report)``.
    """
    if len(windows) != len(blocks) or not blocks:
        raise ValueError("need one window per lattice block")
    lattices = []
    for b in blocks:
        b = np.asarray(b, dtype=float).reshape(2, 2)
        if abs(b[0, 1]) > 0 or abs(b[1, 0]) > 0:
            raise ValueError(f"block {b.tolist()} is not separable (alpha Z x beta Z)")
        if abs(b[0, 0] * b[1, 1]) >= 1.0:
            raise NotAFrame(f"block alpha*beta = {abs(b[0, 0] * b[1, 1]):.6g} is not below 1")
        lattices.append(Lattice2D([b]))
    parts = []
    for w, L in zip(windows, lattices):
        P, rep = projection_from_window(w, L, tol / (2 * len(blocks)), radius)
        parts.append((P, rep))
    factors = [p for p, _ in parts]
    P = tensor_elements(factors)
    idem, sa = _product_residuals(factors)
    vol = float(np.prod([L.volume for L in lattices]))
    rep = ProjectionReport(
        idempotency_residual=idem,
        selfadjoint_residual=sa,
        trace=complex(rieffel_trace(P)),
        expected_trace=vol,
        radius=P.radius,
        tol=tol,
        sa_tol=min(SA_TOL, tol),
        lattice=P.lattice.literal(),
        window="x".join(window_id(w) for w in windows),
        notes=[f"block {i}: idempotency {r.idempotency_residual:.3g}, radius {r.radius:g}"
               for i, (_, r) in enumerate(parts)],
    )
    return P, rep
