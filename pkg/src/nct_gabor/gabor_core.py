"""Gabor analysis on top of the twisted algebra.

Windows may be given in three forms:

* ``WindowSpec``: analytic window, coefficients from closed forms or quadrature;
* ``AtomExpansion``: ``pi(Y) w`` for a finitely supported ``Y`` and an analytic
  ``w`` (tight windows and canonical duals are returned in this form, so
  their coefficients stay at algebra accuracy);
* ``SampledSignal``: samples on a grid, coefficients from grid sums.

Module inner products follow the associativity identity
``apply_left(inner_left(f, g), h) == apply_right(f, inner_right(g, h))``:
``inner_left(f, g)(l) = <f, pi(l) g>`` on L and
``inner_right(g, h)(m) = <g, pi(m) h>`` on the adjoint lattice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch, NotAFrame
from .lattice import Lattice2D
from .tf_signal import (
    GridSpec,
    SampledSignal,
    WindowSpec,
    cross_ambiguity,
    sample_window,
    shifted_copies,
    stft,
)
from .twisted_algebra import (
    TwistedElement,
    _synthesize,
    apply_left,
    apply_right,
    delta,
    involute,
    inv_sqrt,
    invert,
    spectral_bounds,
    tconv,
)

FRAME_TOL = 1e-8
DEFAULT_GRID = GridSpec(16.0, 64)
# Ambiguity decay: exp(-pi r^2 / 2) for the Gaussian, about r exp(-pi r) for sech.
AMB_REACH = {"gaussian": 7.0, "sech": 18.0}
DEFAULT_RADIUS = {"gaussian": 6.0, "sech": 8.0, "twosided_exp": 12.0, "custom": 8.0}


@dataclass(frozen=True, eq=False)
class AtomExpansion:
    """The window sum_m coeffs(m) pi(m) base."""

    base: WindowSpec
    coeffs: TwistedElement
    label: str = ""

    @property
    def id(self) -> str:
        return f"{self.base.id}{'~' + self.label if self.label else ''}"

    def sample(self, grid: GridSpec) -> SampledSignal:
        g = sample_window(self.base, grid)
        c = self.coeffs
        return _synthesize(g, c.lattice.coords(c.indices), c.values)


def default_radius(window) -> float:
    base = window.base if isinstance(window, AtomExpansion) else window
    if isinstance(base, WindowSpec):
        return DEFAULT_RADIUS[base.kind]
    return 6.0


def window_id(window) -> str:
    if isinstance(window, (WindowSpec, AtomExpansion)):
        return window.id
    return "sampled"


def to_signal(window, grid: GridSpec | None = None) -> SampledSignal:
    if isinstance(window, SampledSignal):
        if grid is not None and window.grid != grid:
            raise GridMismatch(f"signal lives on {window.grid}, expected {grid}")
        return window
    grid = grid or DEFAULT_GRID
    if isinstance(window, AtomExpansion):
        return window.sample(grid)
    return sample_window(window, grid)


def _grid_of(*windows):
    grids = {w.grid for w in windows if isinstance(w, SampledSignal)}
    if len(grids) > 1:
        raise GridMismatch("signals live on different grids")
    return grids.pop() if grids else None


def _as_expansion(w, like: TwistedElement) -> AtomExpansion:
    if isinstance(w, AtomExpansion):
        return w
    return AtomExpansion(w, delta(like.lattice, None, like.cocycle_sign))


def _commute(a: Lattice2D, b: Lattice2D) -> bool:
    """True when every shift of ``a`` commutes with every shift of ``b``."""
    if a.dim_pairs != b.dim_pairs:
        return False
    for ba, bb in zip(a.blocks, b.blocks):
        omega = ba.T @ np.array([[0.0, -1.0], [1.0, 0.0]]) @ bb
        if np.max(np.abs(omega - np.round(omega))) > 1e-9:
            return False
    return True


def _coord_cocycle(z, zp) -> np.ndarray:
    return np.exp(-2j * np.pi * np.asarray(z)[..., 0] * np.asarray(zp)[..., 1])


def pairing(f, g, lattice: Lattice2D, indices) -> np.ndarray:
    """<f, pi(l) g> for the lattice points with the given indices."""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1, lattice.dim)
    pts = lattice.coords(idx)
    grid = _grid_of(f, g)
    if grid is not None:
        return stft(to_signal(f, grid), to_signal(g, grid), pts)
    if isinstance(f, WindowSpec) and isinstance(g, WindowSpec):
        return cross_ambiguity(f, g, pts)
    ref = f if isinstance(f, AtomExpansion) else g
    ef = _as_expansion(f, ref.coeffs)
    eg = _as_expansion(g, ref.coeffs)
    m = ef.coeffs.lattice
    if not m.same_as(eg.coeffs.lattice):
        return pairing_direct(ef, eg, pts)
    if m.same_as(lattice):
        return _pairing_same(ef, eg, idx)
    if _commute(m, lattice):
        return _pairing_commuting(ef, eg, lattice, idx)
    return pairing_direct(ef, eg, pts)


def _pairing_commuting(ef: AtomExpansion, eg: AtomExpansion, lattice, idx) -> np.ndarray:
    # pi(Y1)^* pi(l) pi(Y2) = pi(l) pi(Y1^* # Y2) when pi(l) commutes with pi(Y_i).
    w = tconv(involute(ef.coeffs), eg.coeffs)
    nu = w.lattice.coords(w.indices)
    wv = np.conj(w.values)
    pts = lattice.coords(idx)
    out = np.empty(len(pts), dtype=complex)
    reach = max(_amb_reach(ef.base), _amb_reach(eg.base))
    step = max(1, 1_000_000 // max(len(nu), 1))
    for s in range(0, len(pts), step):
        z = pts[s:s + step]
        tot = z[:, None, :] + nu[None, :, :]
        rows, cols = np.nonzero(np.einsum("ijk,ijk->ij", tot, tot) <= reach * reach)
        amb = cross_ambiguity(ef.base, eg.base, tot[rows, cols])
        ph = np.conj(_coord_cocycle(z[rows], nu[cols]))
        out[s:s + step] = np.bincount(rows, (amb * ph * wv[cols]).real, len(z)) + 1j * np.bincount(
            rows, (amb * ph * wv[cols]).imag, len(z)
        )
    return out


def _amb_reach(w: WindowSpec) -> float:
    """Radius beyond which the ambiguity function is below 1e-22 (inf if unknown)."""
    return AMB_REACH.get(w.kind, math.inf)


def _pairing_same(ef: AtomExpansion, eg: AtomExpansion, idx) -> np.ndarray:
    # <pi(Y1) f, pi(m) pi(Y2) g> = (Y1 # K # Y2^*)(m) with K(n) = <f, pi(n) g>.
    y1, y2 = ef.coeffs, eg.coeffs
    lat = y1.lattice
    reach = np.max(np.linalg.norm(lat.coords(idx), axis=1)) if len(idx) else 0.0
    rk = reach + y1.support_radius() + y2.support_radius() + 1e-9
    kidx, kpts = lat.points(rk)
    K = TwistedElement.from_points(lat, kidx, cross_ambiguity(ef.base, eg.base, kpts), y1.cocycle_sign)
    E = tconv(tconv(y1, K), involute(y2))
    return E.lookup(idx)


def pairing_direct(ef: AtomExpansion, eg: AtomExpansion, points) -> np.ndarray:
    """Double-sum evaluation of <pi(Y1) f, pi(z) pi(Y2) g> at arbitrary points."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    a = ef.coeffs.lattice.coords(ef.coeffs.indices)
    b = eg.coeffs.lattice.coords(eg.coeffs.indices)
    ya, yb = ef.coeffs.values, eg.coeffs.values
    out = np.empty(len(pts), dtype=complex)
    for i, z in enumerate(pts):
        # pi(a)^* pi(z) pi(b) = phi * pi(z + b - a)
        phi = (
            _coord_cocycle(a, a)[:, None]
            * _coord_cocycle(-a, z)[:, None]
            * _coord_cocycle(z[None, None, :] - a[:, None, :], b[None, :, :])
        )
        tot = z[None, None, :] + b[None, :, :] - a[:, None, :]
        amb = cross_ambiguity(ef.base, eg.base, tot.reshape(-1, 2)).reshape(len(a), len(b))
        out[i] = np.sum(ya[:, None] * np.conj(yb)[None, :] * np.conj(phi) * amb)
    return out


# --- module inner products and the Janssen element --------------------------------

def inner_left(f, g, L: Lattice2D, radius: float) -> TwistedElement:
    """Lambda<f, g> = sum_l <f, pi(l) g> pi(l), truncated to the ball of ``radius``."""
    idx, _ = L.points(radius)
    return TwistedElement.from_points(L, idx, pairing(f, g, L, idx), "c", radius)


def inner_right(f, g, L: Lattice2D, radius: float) -> TwistedElement:
    """Adjoint-side inner product with coefficients <f, pi(m) g>, m in the adjoint lattice."""
    La = L.adjoint()
    idx, _ = La.points(radius)
    return TwistedElement.from_points(La, idx, pairing(f, g, La, idx), "cbar", radius)


def janssen_element(g, L: Lattice2D, radius: float | None = None) -> TwistedElement:
    """vol(L)^{-1} <g, pi(m) g> on the adjoint lattice; S_g = sum_m J(m) pi(m)."""
    radius = default_radius(g) if radius is None else radius
    return inner_right(g, g, L, radius) * (1.0 / L.volume)


def theta_op_coeffs(g, h, L: Lattice2D, radius: float | None = None) -> TwistedElement:
    """Coefficients T with sum_l <f, pi(l) g> pi(l) h = sum_m T(m) pi(m) f.

    T(m) = vol(L)^{-1} <h, pi(m) g>; equivalently the operator is
    ``f -> apply_right(f, vol(L) * involute(T))``.
    """
    radius = default_radius(g) if radius is None else radius
    return inner_right(h, g, L, radius) * (1.0 / L.volume)


def janssen_tail_mass(g, L: Lattice2D, radius: float) -> float:
    """l1 mass of the Janssen coefficients in radius < |m| <= 2 radius + 2."""
    La = L.adjoint()
    idx, c = La.points(2 * radius + 2)
    far = np.linalg.norm(c, axis=1) > radius * (1 + 1e-12)
    if not np.any(far):
        return 0.0
    return float(np.sum(np.abs(pairing(g, g, La, idx[far]))) / L.volume)


# --- grid-level operators -----------------------------------------------------------

def frame_operator_apply(g, L: Lattice2D, f: SampledSignal, radius: float) -> SampledSignal:
    """sum_{|l| <= radius} <f, pi(l) g> pi(l) g on the grid of f."""
    gs = to_signal(g, f.grid)
    return apply_left(inner_left(f, gs, L, radius), gs)


def figa_residual(f, g, h, k, L: Lattice2D, radius: float) -> float:
    """Relative mismatch between the two sides of the fundamental identity.

    sum_l <f, pi(l) g> <pi(l) h, k>  vs  vol(L)^{-1} sum_m <f, pi(m) k> <pi(m) h, g>.
    """
    return float(figa_sides(f, g, h, k, L, radius)[2])


def figa_sides(f, g, h, k, L: Lattice2D, radius: float):
    idx, _ = L.points(radius)
    lhs = np.sum(pairing(f, g, L, idx) * np.conj(pairing(k, h, L, idx)))
    La = L.adjoint()
    ida, _ = La.points(radius)
    rhs = np.sum(pairing(f, k, La, ida) * np.conj(pairing(g, h, La, ida))) / L.volume
    res = abs(lhs - rhs) / (abs(lhs) + abs(rhs) + 1e-300)
    return complex(lhs), complex(rhs), res


def associativity_residual(f, g, h, L: Lattice2D, radius: float, grid: GridSpec | None = None) -> float:
    """Relative L2 distance between Lambda<f,g>.h and f.<g,h> on the grid."""
    grid = grid or _grid_of(f, g, h) or DEFAULT_GRID
    fs, gs, hs = (to_signal(w, grid) for w in (f, g, h))
    left = apply_left(inner_left(fs, gs, L, radius), hs)
    right = apply_right(fs, inner_right(gs, hs, L, radius))
    scale = max(left.norm(), right.norm())
    if scale == 0:
        return 0.0
    return (left - right).norm() / scale


# --- frame bounds, duals, tight windows ------------------------------------------------

@dataclass
class FrameReport:
    lattice: str
    window: str
    A: float
    B: float
    tightness: float
    wr_residual: float
    tail_mass: float
    radius: float
    method: str = ""
    diag_lower: float = float("nan")
    power_B: float | None = None
    warnings: list = field(default_factory=list)

    @property
    def is_frame(self) -> bool:
        return self.A > FRAME_TOL * self.B

    def to_json(self) -> dict:
        return {
            "lattice": self.lattice,
            "window": self.window,
            "A": self.A,
            "B": self.B,
            "tightness": self.tightness,
            "wr_residual": self.wr_residual,
            "tail_mass": self.tail_mass,
            "radius": self.radius,
            "method": self.method,
            "diag_lower": self.diag_lower,
            "power_B": self.power_B,
            "warnings": list(self.warnings),
        }


def wexler_raz_residual(g, L: Lattice2D, radius: float | None = None) -> float:
    """max(|<g, pi(m) g>| over m != 0, |<g, g> - vol(L)|) on the adjoint lattice."""
    radius = default_radius(g) if radius is None else radius
    La = L.adjoint()
    idx, _ = La.points(radius)
    vals = pairing(g, g, La, idx)
    origin = np.all(idx == 0, axis=1)
    off = np.max(np.abs(vals[~origin])) if np.any(~origin) else 0.0
    return float(max(off, abs(vals[origin][0] - L.volume)))


def power_upper_bound(g, L: Lattice2D, grid: GridSpec | None = None, iters: int = 80) -> float:
    """Largest eigenvalue of the grid frame operator by power iteration.

    Atoms are taken from the lattice ball that fits inside the grid.
    """
    grid = grid or (g.grid if isinstance(g, SampledSignal) else DEFAULT_GRID)
    gs = to_signal(g, grid)
    rad = grid.half_width - 2.0
    _, pts = L.points(rad)
    pts = pts[np.abs(pts[:, 1]) < grid.samples_per_unit / 4]
    atoms = shifted_copies(gs, pts)
    q = grid.samples_per_unit
    rng = np.random.default_rng(0)
    v = rng.normal(size=grid.n_samples) + 1j * rng.normal(size=grid.n_samples)
    v *= np.exp(-np.pi * (grid.t / (grid.half_width / 3)) ** 2)
    lam = 0.0
    for _ in range(iters):
        v /= np.linalg.norm(v) / math.sqrt(q)
        sv = (atoms.conj() @ v / q) @ atoms
        lam = float(np.real(np.vdot(v, sv)) / q)
        v = sv
    return lam


def frame_bounds(g, L: Lattice2D, radius: float | None = None, power_check: bool | None = None,
                 grid: GridSpec | None = None) -> FrameReport:
    """Frame bounds from the spectrum of the Janssen element."""
    radius = default_radius(g) if radius is None else radius
    J = janssen_element(g, L, radius)
    sb = spectral_bounds(J)
    A, B = sb.lower, sb.upper
    tight = B / A - 1 if A > 0 else math.inf
    rep = FrameReport(
        lattice=L.literal(),
        window=window_id(g),
        A=A,
        B=B,
        tightness=tight,
        wr_residual=wexler_raz_residual(g, L, radius),
        tail_mass=janssen_tail_mass(g, L, radius),
        radius=radius,
        method=sb.method,
        diag_lower=sb.diag_lower,
    )
    if power_check is None:
        power_check = not isinstance(g, AtomExpansion) and L.dim_pairs == 1
    if power_check:
        rep.power_B = power_upper_bound(g, L, grid)
        # A Rayleigh quotient of a finite section can only undershoot B.
        if rep.power_B > B * (1 + 1e-3):
            rep.warnings.append(
                f"grid power iteration gives B={rep.power_B:.6g} above the algebra bound {B:.6g}"
            )
    return rep


def _check_frame(J: TwistedElement):
    sb = spectral_bounds(J)
    if not sb.lower > FRAME_TOL * sb.upper:
        raise NotAFrame(f"lower frame bound {sb.lower:.3e} vs upper {sb.upper:.3e}")
    return sb


def _act(g, y: TwistedElement, L: Lattice2D, label: str):
    """The window pi(y) g for y on the adjoint lattice."""
    if isinstance(g, SampledSignal):
        return apply_right(g, involute(y) * L.volume)
    if isinstance(g, AtomExpansion):
        return AtomExpansion(g.base, tconv(y, g.coeffs), label)
    return AtomExpansion(g, y, label)


def canonical_dual(g, L: Lattice2D, tol: float = 1e-10, radius: float | None = None, max_radius=None):
    """h0 = S^{-1} g, with S^{-1} = pi(J^{-1}) from the inverted Janssen element."""
    radius = default_radius(g) if radius is None else radius
    J = janssen_element(g, L, radius)
    sb = _check_frame(J)
    x = invert(J, tol, max_radius=max_radius, bounds=sb)
    return _act(g, x, L, "dual")


def canonical_tight(g, L: Lattice2D, tol: float = 1e-10, radius: float | None = None, max_radius=None):
    """S^{-1/2} g from the inverse square root of the Janssen element."""
    radius = default_radius(g) if radius is None else radius
    J = janssen_element(g, L, radius)
    sb = _check_frame(J)
    y = inv_sqrt(J, tol, max_radius=max_radius, bounds=sb)
    return _act(g, y, L, "tight")
