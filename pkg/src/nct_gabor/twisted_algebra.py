"""Finitely supported elements of the twisted group algebra of a lattice.

An element is a coefficient map ``a`` on lattice indices and stands for the
operator ``sum_l a(l) pi(l)``.  Coefficients live in a dense box of indices
(``offset`` is the lowest corner), which keeps the twisted convolution a
sequence of vectorized slice updates.

The cocycle is the one produced by ``pi(x, w) = M_w T_x``:
``pi(z) pi(z') = c(z, z') pi(z + z')`` with ``c(z, z') = exp(-2 pi i x.eta)``.
Elements on the adjoint lattice carry the tag ``cocycle_sign="cbar"``; they
multiply with the same phase function (it is the cocycle of the operators
they represent) and differ in how they act on signals and in the trace
normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize

from .errors import (
    LatticeMismatch,
    NoConvergence,
    NotInvertible,
    NotSelfAdjoint,
    RadiusTooLarge,
    WrongSide,
)
from .lattice import Lattice2D
from .tf_signal import SampledSignal, _shift_values

SIDES = ("c", "cbar")
MAX_MATRIX = 6000
DROP_REL = 1e-16
MAX_CAP_FACTOR = 40.0
MAX_CAP_POINTS = 200_000


def cocycle(lattice: Lattice2D, mu, nu) -> np.ndarray:
    """c(mu, nu) for index arrays (broadcast over leading axes)."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    x = mu @ lattice.x_matrix.T
    w = nu @ lattice.w_matrix.T
    return np.exp(-2j * np.pi * np.sum(x * w, axis=-1))


def _box_indices(offset, shape) -> np.ndarray:
    grids = np.indices(shape).reshape(len(shape), -1).T
    return grids + np.asarray(offset)


class TwistedElement:
    """Immutable finitely supported coefficient map on a lattice."""

    __slots__ = ("lattice", "offset", "data", "cocycle_sign", "radius")

    def __init__(self, lattice: Lattice2D, offset, data, cocycle_sign: str = "c", radius=None):
        if cocycle_sign not in SIDES:
            raise ValueError(f"cocycle_sign must be one of {SIDES}")
        data = np.asarray(data, dtype=complex)
        offset = np.asarray(offset, dtype=np.int64).reshape(-1)
        if data.ndim != lattice.dim or offset.shape != (lattice.dim,):
            raise ValueError("coefficient box does not match the lattice dimension")
        nz = np.nonzero(data)
        if len(nz[0]) == 0:
            data = np.zeros((0,) * lattice.dim, dtype=complex)
            offset = np.zeros(lattice.dim, dtype=np.int64)
        else:
            lo = np.array([a.min() for a in nz])
            hi = np.array([a.max() for a in nz])
            if np.any(lo > 0) or np.any(hi < np.array(data.shape) - 1):
                data = data[tuple(slice(a, b + 1) for a, b in zip(lo, hi))]
                offset = offset + lo
            data = np.array(data)
        data.setflags(write=False)
        self.lattice = lattice
        self.offset = offset
        self.data = data
        self.cocycle_sign = cocycle_sign
        if radius is None:
            radius = self.support_radius()
        self.radius = float(radius)

    # construction -----------------------------------------------------------

    @classmethod
    def from_points(cls, lattice, indices, values, cocycle_sign="c", radius=None):
        idx = np.asarray(indices, dtype=np.int64).reshape(-1, lattice.dim)
        vals = np.asarray(values, dtype=complex).reshape(-1)
        if len(idx) == 0:
            return cls(lattice, np.zeros(lattice.dim), np.zeros((0,) * lattice.dim), cocycle_sign, radius)
        lo = idx.min(axis=0)
        shape = tuple(idx.max(axis=0) - lo + 1)
        data = np.zeros(shape, dtype=complex)
        np.add.at(data, tuple((idx - lo).T), vals)
        return cls(lattice, lo, data, cocycle_sign, radius)

    @classmethod
    def zero(cls, lattice, cocycle_sign="c"):
        return cls.from_points(lattice, np.zeros((0, lattice.dim)), [], cocycle_sign)

    def _like(self, offset, data, radius=None):
        return TwistedElement(self.lattice, offset, data, self.cocycle_sign, radius)

    # inspection --------------------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def indices(self) -> np.ndarray:
        """Support indices in lexicographic order."""
        nz = np.nonzero(self.data)
        return np.stack(nz, axis=1).astype(np.int64) + self.offset

    @property
    def values(self) -> np.ndarray:
        return self.data[np.nonzero(self.data)]

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.data))

    def coeff(self, idx) -> complex:
        pos = np.asarray(idx, dtype=np.int64) - self.offset
        if np.any(pos < 0) or np.any(pos >= np.array(self.shape)):
            return 0j
        return complex(self.data[tuple(pos)])

    def lookup(self, indices) -> np.ndarray:
        """Coefficients at many indices (zero outside the box)."""
        idx = np.asarray(indices, dtype=np.int64).reshape(-1, self.lattice.dim)
        pos = idx - self.offset
        inside = np.all((pos >= 0) & (pos < np.array(self.shape)), axis=1)
        out = np.zeros(len(idx), dtype=complex)
        if self.data.size:
            out[inside] = self.data[tuple(pos[inside].T)]
        return out

    def support_radius(self) -> float:
        if self.nnz == 0:
            return 0.0
        c = self.lattice.coords(self.indices)
        return float(np.sqrt(np.max(np.einsum("ij,ij->i", c, c))))

    def as_dict(self) -> dict:
        return {tuple(int(v) for v in k): complex(c) for k, c in zip(self.indices, self.values)}

    # arithmetic ---------------------------------------------------------------

    def _check(self, other):
        if not self.lattice.same_as(other.lattice):
            raise LatticeMismatch("elements live on different lattices")
        if self.cocycle_sign != other.cocycle_sign:
            raise LatticeMismatch("elements carry different cocycle signs")

    def __add__(self, other):
        self._check(other)
        if other.nnz == 0:
            return self
        if self.nnz == 0:
            return other
        lo = np.minimum(self.offset, other.offset)
        hi = np.maximum(self.offset + self.shape, other.offset + other.shape)
        data = np.zeros(tuple(hi - lo), dtype=complex)
        for e in (self, other):
            data[tuple(slice(o, o + s) for o, s in zip(e.offset - lo, e.shape))] += e.data
        return self._like(lo, data, max(self.radius, other.radius))

    def __neg__(self):
        return self._like(self.offset, -self.data, self.radius)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        return self._like(self.offset, self.data * complex(scalar), self.radius)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return tconv(self, other)

    def __repr__(self):
        return (
            f"TwistedElement(lattice={self.lattice.literal()!r}, side={self.cocycle_sign!r}, "
            f"nnz={self.nnz}, radius={self.radius:.4g})"
        )

    # serialization --------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "lattice": self.lattice.to_json(),
            "cocycle_sign": self.cocycle_sign,
            "radius": self.radius,
            "coeffs": [
                {"index": [int(v) for v in k], "re": float(c.real), "im": float(c.imag)}
                for k, c in zip(self.indices, self.values)
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TwistedElement":
        try:
            lattice = Lattice2D(obj["lattice"])
            coeffs = obj["coeffs"]
            idx = np.array([c["index"] for c in coeffs], dtype=np.int64).reshape(-1, lattice.dim)
            vals = np.array([complex(float(c["re"]), float(c["im"])) for c in coeffs], dtype=complex)
            return cls.from_points(lattice, idx, vals, obj.get("cocycle_sign", "c"), obj.get("radius"))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed element: {exc}") from None


def delta(L: Lattice2D, idx=None, cocycle_sign: str = "c") -> TwistedElement:
    if idx is None:
        idx = np.zeros(L.dim, dtype=np.int64)
    return TwistedElement.from_points(L, [idx], [1.0], cocycle_sign)


def identity_like(a: TwistedElement) -> TwistedElement:
    return delta(a.lattice, None, a.cocycle_sign)


def tconv(a: TwistedElement, b: TwistedElement) -> TwistedElement:
    """Twisted convolution (a # b)(l) = sum_m a(m) b(l - m) c(m, l - m)."""
    a._check(b)
    if a.nnz == 0 or b.nnz == 0:
        return TwistedElement.zero(a.lattice, a.cocycle_sign)
    L = a.lattice
    out = np.zeros(tuple(np.array(a.shape) + np.array(b.shape) - 1), dtype=complex)
    # Loop over the factor with fewer nonzeros; the phase of the other factor
    # separates into one exponential per index axis.
    if a.nnz <= b.nnz:
        loop, other = a, b
        mix = L.w_matrix.T @ L.x_matrix  # phase depends on (W^T X mu) . nu
    else:
        loop, other = b, a
        mix = L.x_matrix.T @ L.w_matrix  # phase depends on (X^T W nu) . mu
    idx = loop.indices
    vals = loop.values
    vecs = idx @ mix.T
    axes = [other.offset[j] + np.arange(other.shape[j]) for j in range(L.dim)]
    uniq, inv = np.unique(vecs, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    order = np.argsort(inv, kind="stable")
    bounds = np.searchsorted(inv[order], np.arange(len(uniq) + 1))
    pos = idx - loop.offset
    tmp = np.empty(other.shape, dtype=complex)
    for u in range(len(uniq)):
        phased = other.data
        v = uniq[u]
        for j in range(L.dim):
            if v[j] != 0.0:
                ph = np.exp(-2j * np.pi * v[j] * axes[j]).reshape([-1 if k == j else 1 for k in range(L.dim)])
                phased = phased * ph
        for r in order[bounds[u]:bounds[u + 1]]:
            sl = tuple(slice(p, p + s) for p, s in zip(pos[r], other.shape))
            np.multiply(phased, vals[r], out=tmp)
            out[sl] += tmp
    offset = a.offset + b.offset
    return TwistedElement(L, offset, out, a.cocycle_sign, a.radius + b.radius)


def involute(a: TwistedElement) -> TwistedElement:
    """a*(l) = c(l, l) conj(a(-l)), the coefficients of the adjoint operator."""
    if a.nnz == 0:
        return a
    flipped = np.conj(a.data[(slice(None, None, -1),) * a.data.ndim])
    offset = -(a.offset + np.array(a.shape) - 1)
    idx = _box_indices(offset, flipped.shape)
    ph = cocycle(a.lattice, idx, idx).reshape(flipped.shape)
    return a._like(offset, flipped * ph, a.radius)


def l1s_norm(a: TwistedElement, s: float = 0.0) -> float:
    if s < 0:
        raise ValueError("weight exponent s must be non-negative")
    if a.nnz == 0:
        return 0.0
    vals = np.abs(a.values)
    if s == 0:
        return float(np.sum(vals))
    c = a.lattice.coords(a.indices)
    w = (1.0 + np.einsum("ij,ij->i", c, c)) ** (s / 2)
    return float(np.sum(vals * w))


def trace(a: TwistedElement) -> complex:
    """Coefficient at the origin; adjoint-side elements are scaled by vol(L)^{-1}.

    For an adjoint-side element, ``a.lattice`` is the adjoint lattice, whose
    volume is vol(L)^{-1}.
    """
    c0 = a.coeff(np.zeros(a.lattice.dim, dtype=np.int64))
    if a.cocycle_sign == "cbar":
        return c0 * a.lattice.volume
    return c0


def truncate(a: TwistedElement, radius=None, rel_tol: float | None = None) -> TwistedElement:
    """Drop coefficients outside ``radius`` and/or below rel_tol * l1 norm."""
    if a.nnz == 0:
        return a
    data = np.array(a.data)
    if radius is not None:
        idx = _box_indices(a.offset, a.shape)
        c = a.lattice.coords(idx)
        far = np.einsum("ij,ij->i", c, c) > radius * radius * (1 + 1e-12)
        data.reshape(-1)[far] = 0
    if rel_tol is not None:
        norm = np.sum(np.abs(data))
        data[np.abs(data) < rel_tol * norm] = 0
    r = a.radius if radius is None else min(a.radius, radius)
    return a._like(a.offset, data, r)


def adjoint_residual(a: TwistedElement) -> float:
    """l1 norm of a - a*."""
    return l1s_norm(a - involute(a))


# --- actions on sampled signals --------------------------------------------------

def _require_1d(a: TwistedElement):
    if a.lattice.dim_pairs != 1:
        raise ValueError("signal actions are defined for one time-frequency pair only")


def _synthesize(g: SampledSignal, coords: np.ndarray, weights: np.ndarray) -> SampledSignal:
    """sum_k weights[k] pi(coords[k]) g on the grid."""
    t = g.grid.t
    out = np.zeros(g.grid.n_samples, dtype=complex)
    xs, inv = np.unique(coords[:, 0], return_inverse=True)
    inv = inv.reshape(-1)
    for i, x in enumerate(xs):
        rows = np.nonzero(inv == i)[0]
        mod = weights[rows] @ np.exp(2j * np.pi * np.outer(coords[rows, 1], t))
        out += _shift_values(g.grid, g.values, x) * mod
    return SampledSignal(g.grid, out)


def apply_left(a: TwistedElement, g: SampledSignal) -> SampledSignal:
    """sum_l a(l) pi(l) g."""
    _require_1d(a)
    if a.nnz == 0:
        return SampledSignal(g.grid, np.zeros(g.grid.n_samples))
    return _synthesize(g, a.lattice.coords(a.indices), a.values)


def apply_right(g: SampledSignal, b: TwistedElement) -> SampledSignal:
    """vol(L)^{-1} sum_m conj(b(m)) pi(m)^* g for b on the adjoint lattice.

    With this normalization ``(g.b).b' = vol(L)^{-1} g.(b # b')``, and the
    unit of the right action is ``vol(L) delta(0)``.
    """
    _require_1d(b)
    if b.cocycle_sign != "cbar":
        raise WrongSide("apply_right needs an adjoint-side element (cocycle_sign='cbar')")
    if b.nnz == 0:
        return SampledSignal(g.grid, np.zeros(g.grid.n_samples))
    idx = b.indices
    # pi(m)^* = c(m, m) pi(-m)
    weights = np.conj(b.values) * cocycle(b.lattice, idx, idx) * b.lattice.volume
    return _synthesize(g, -b.lattice.coords(idx), weights)


# --- regular representation and spectra ------------------------------------------

def regular_rep_matrix(a: TwistedElement, radius: float, max_size: int = MAX_MATRIX):
    """Compression of left twisted convolution by ``a`` to the ball of ``radius``.

    Rows and columns follow the lexicographic point order of the ball.
    """
    idx, _ = a.lattice.points(radius)
    n = len(idx)
    if n > max_size:
        raise RadiusTooLarge(f"regular representation of size {n} exceeds {max_size}")
    M = np.empty((n, n), dtype=complex)
    step = max(1, 2_000_000 // max(n, 1))
    for start in range(0, n, step):
        rows = idx[start:start + step]
        diff = rows[:, None, :] - idx[None, :, :]
        vals = a.lookup(diff.reshape(-1, a.lattice.dim)).reshape(len(rows), n)
        ph = cocycle(a.lattice, diff, np.broadcast_to(idx[None, :, :], diff.shape))
        M[start:start + step] = vals * ph
    return M, idx


@dataclass(frozen=True)
class SpectralBounds:
    lower: float
    upper: float
    method: str
    diag_lower: float
    diag_upper: float


def rotation_number(lattice: Lattice2D, max_den: int = 128):
    """(num, den) with det(basis) = num/den mod 1, or None if not rational enough."""
    if lattice.dim_pairs != 1:
        return None
    d = float(np.linalg.det(lattice.blocks[0]))
    frac = Fraction(d).limit_denominator(max_den)
    if abs(d - frac.numerator / frac.denominator) > 1e-10 * max(1.0, abs(d)):
        return None
    return frac.numerator % frac.denominator, frac.denominator


class RationalSymbol:
    """Finite-dimensional irreducible representations for rational rotation numbers.

    When det(basis) = num/den, every irreducible representation of the
    algebra is equivalent to a ``den``-dimensional clock/shift representation
    ``rho_{s,t}`` with (s, t) in [0, 1/den)^2, so the spectrum of a self-adjoint
    element is the union of the spectra of the matrices ``rho_{s,t}(a)``.
    """

    def __init__(self, a: TwistedElement, rot):
        num, p = rot
        self.p = p
        b = a.lattice.blocks[0]
        q = np.outer(b[0], b[1])
        idx = a.indices
        m, n = idx[:, 0].astype(float), idx[:, 1].astype(float)
        quad = q[0, 0] * m * m + 2 * q[0, 1] * m * n + q[1, 1] * n * n
        k = np.arange(p)
        clock = np.exp(-2j * np.pi * np.outer(m, 1.0) * ((k[None, :] + n[:, None]) * num % p) / p)
        self._coef = (a.values * np.exp(1j * np.pi * quad))[:, None] * clock
        self._rows = ((k[None, :] + idx[:, 1:2]) % p).ravel()
        self._cols = np.broadcast_to(k[None, :], clock.shape).ravel()
        self._m, self._n = m, n

    def matrix(self, s: float, t: float, hermitian: bool = True) -> np.ndarray:
        c = self._coef * np.exp(2j * np.pi * (s * self._m + t * self._n))[:, None]
        M = np.zeros((self.p, self.p), dtype=complex)
        np.add.at(M, (self._rows, self._cols), c.ravel())
        return (M + M.conj().T) / 2 if hermitian else M

    def eig_extremes(self, s, t):
        ev = np.linalg.eigvalsh(self.matrix(s, t))
        return ev[0], ev[-1]

    def bounds(self, grid: int = 12):
        h = 1.0 / self.p
        pts = [(i * h / grid, j * h / grid) for i in range(grid) for j in range(grid)]
        ext = np.array([self.eig_extremes(s, t) for s, t in pts])
        lower = self._refine(pts, ext[:, 0], sign=1.0)
        upper = -self._refine(pts, -ext[:, 1], sign=-1.0)
        return lower, upper

    def _refine(self, pts, vals, sign):
        best = float(np.min(vals))
        for start in np.argsort(vals)[:3]:
            res = minimize(
                lambda v: sign * self.eig_extremes(v[0], v[1])[0 if sign > 0 else 1],
                np.array(pts[start]),
                method="Nelder-Mead",
                options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 400},
            )
            best = min(best, float(res.fun))
        return best


def _diag_bounds(a: TwistedElement):
    a0 = a.coeff(np.zeros(a.lattice.dim, dtype=np.int64)).real
    off = l1s_norm(a) - abs(a.coeff(np.zeros(a.lattice.dim, dtype=np.int64)))
    return a0 - off, a0 + off


def spectral_bounds(a: TwistedElement, radius: float | None = None, method: str = "auto") -> SpectralBounds:
    """Bounds for the spectrum of a self-adjoint element.

    ``rational_symbol`` (exact up to the (s, t) optimization) is used when the
    lattice has a rational rotation number with small denominator; otherwise
    the extreme eigenvalues of the compressed regular representation are
    returned.  Compressions can only under-estimate the spectral range.
    """
    norm = l1s_norm(a)
    if adjoint_residual(a) > 1e-10 * max(1.0, norm):
        raise NotSelfAdjoint(f"element is not self-adjoint (residual {adjoint_residual(a):.2e})")
    dlo, dhi = _diag_bounds(a)
    if method == "diagonal_dominance":
        return SpectralBounds(dlo, dhi, method, dlo, dhi)
    rot = rotation_number(a.lattice) if a.nnz else None
    if method == "auto":
        method = "rational_symbol" if rot is not None else "regular_rep"
    if method == "rational_symbol":
        if rot is None:
            raise ValueError("rotation number is not rational with a small denominator")
        lo, hi = RationalSymbol(a, rot).bounds()
        return SpectralBounds(lo, hi, method, dlo, dhi)
    if method != "regular_rep":
        raise ValueError(f"unknown method {method!r}")
    if radius is None:
        radius = a.support_radius() * 2 + 4
        while len(a.lattice.points(radius)[0]) > 1500 and radius > a.support_radius() + 1:
            radius *= 0.85
    M, _ = regular_rep_matrix(a, radius)
    M = (M + M.conj().T) / 2
    ev = np.linalg.eigvalsh(M)
    return SpectralBounds(float(ev[0]), float(ev[-1]), method, dlo, dhi)


# --- inversion and inverse square roots ------------------------------------------

def _cap(a: TwistedElement, max_radius: float) -> TwistedElement:
    return truncate(a, max_radius, DROP_REL)


def _default_cap(a: TwistedElement) -> float:
    return 4.0 * max(a.support_radius(), 1.0)


def _scaling(a: TwistedElement, bounds: SpectralBounds | None):
    if bounds is None:
        bounds = spectral_bounds(a)
    if bounds.lower <= np.finfo(float).eps * max(abs(bounds.upper), 1e-300):
        raise NotInvertible(f"spectral lower bound {bounds.lower:.3e} is not positive")
    return 2.0 / (bounds.lower + bounds.upper)


class _Stall:
    def __init__(self, patience: int = 8):
        self.best = math.inf
        self.since = 0
        self.patience = patience

    def update(self, r: float) -> bool:
        if r < 0.5 * self.best:
            self.best = r
            self.since = 0
        else:
            self.best = min(self.best, r)
            self.since += 1
        return self.since >= self.patience


def _grow_cap(a: TwistedElement, cap: float, fixed: bool) -> float | None:
    """Next coefficient cap after a stall, or None when growth is not allowed."""
    if fixed:
        return None
    nxt = 1.5 * cap
    if nxt > MAX_CAP_FACTOR * max(a.support_radius(), 1.0):
        return None
    d = a.lattice.dim
    count = math.pi ** (d / 2) / math.gamma(d / 2 + 1) * nxt**d / a.lattice.volume
    if count > MAX_CAP_POINTS:
        return None
    return nxt


def invert(
    a: TwistedElement,
    tol: float = 1e-10,
    max_radius: float | None = None,
    max_iter: int = 200,
    bounds: SpectralBounds | None = None,
) -> TwistedElement:
    """Inverse of a positive self-adjoint element by Newton-Hotelling iteration.

    Iterates x <- x + x # (1 - a # x) from x = alpha*delta(0), where alpha
    centres the scaled spectrum at 1.  The residual squares at every step.
    Coefficients are capped at ``max_radius``; without an explicit cap it
    starts at 4 times the support radius of ``a`` and grows when the
    iteration stalls.
    """
    alpha = _scaling(a, bounds)
    cap = _default_cap(a) if max_radius is None else max_radius
    one = identity_like(a)
    x = one * alpha
    stall = _Stall()
    r = math.inf
    for _ in range(max_iter):
        res = one - tconv(a, x)
        r = l1s_norm(res)
        if r <= tol:
            return x
        if stall.update(r):
            cap = _grow_cap(a, cap, max_radius is not None)
            if cap is None:
                break
            stall = _Stall()
        x = _cap(x + tconv(x, res), cap)
    raise NoConvergence(f"inverse stalled at l1 residual {r:.3e} (tol {tol:.1e})")


def inv_sqrt(
    a: TwistedElement,
    tol: float = 1e-10,
    max_radius: float | None = None,
    max_iter: int = 200,
    bounds: SpectralBounds | None = None,
) -> TwistedElement:
    """Inverse square root of a positive self-adjoint element.

    Coupled Newton-Schulz iteration on the scaled element k*a:
    T = (3 - Z#Y)/2, Y <- Y#T, Z <- T#Z with Y -> (ka)^{1/2}, Z -> (ka)^{-1/2}.
    In exact arithmetic Z follows y <- y(3 - ka y y)/2; the coupled form is
    stable when the scaled spectrum is far from 1.  The coefficient cap
    behaves as in ``invert``.
    """
    kappa = _scaling(a, bounds)
    cap = _default_cap(a) if max_radius is None else max_radius
    fixed = max_radius is not None
    one = identity_like(a)
    while True:
        y_big = a * kappa
        z = one
        stall = _Stall()
        for _ in range(max_iter):
            zy = tconv(z, y_big)
            r = l1s_norm(zy - one)
            if r <= 0.1 * tol or stall.update(r):
                break
            t = (one * 3.0 - zy) * 0.5
            y_big = _cap(tconv(y_big, t), cap)
            z = _cap(tconv(t, z), cap)
        y = z * math.sqrt(kappa)
        y = (y + involute(y)) * 0.5
        check = l1s_norm(tconv(tconv(y, a), y) - one)
        if check <= tol:
            return y
        cap = _grow_cap(a, cap, fixed)
        if cap is None:
            raise NoConvergence(f"inverse square root residual {check:.3e} exceeds {tol:.1e}")
