"""Sampled signals, time-frequency shifts and ambiguity coefficients.

Conventions used throughout the package:

* ``pi(x, w) = M_w T_x`` with ``T_x f(t) = f(t - x)`` and ``M_w f(t) = exp(2 pi i w t) f(t)``.
* ``V_g f(x, w) = <f, pi(x, w) g> = int f(t) conj(g(t - x)) exp(-2 pi i w t) dt``.
* Inner products are linear in the first slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import czt

from .errors import GridMismatch, QuadratureFailure


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid t_k = -T + k/q, k = 0..N-1 with N = 2Tq."""

    half_width: float = 16.0
    samples_per_unit: int = 64

    def __post_init__(self):
        tq = self.half_width * self.samples_per_unit
        if self.samples_per_unit <= 0 or self.half_width <= 0:
            raise ValueError("grid parameters must be positive")
        if abs(tq - round(tq)) > 1e-9:
            raise ValueError(f"T*q must be an integer, got {tq}")
        n = 2 * int(round(tq))
        if n & (n - 1):
            raise ValueError(f"N = 2Tq must be a power of two, got {n}")

    @property
    def n_samples(self) -> int:
        return 2 * int(round(self.half_width * self.samples_per_unit))

    @property
    def t(self) -> np.ndarray:
        return -self.half_width + np.arange(self.n_samples) / self.samples_per_unit

    @property
    def freqs(self) -> np.ndarray:
        return np.fft.fftfreq(self.n_samples, d=1.0 / self.samples_per_unit)


@dataclass(frozen=True, eq=False)
class SampledSignal:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n_samples,):
            raise GridMismatch(f"expected {self.grid.n_samples} samples, got {v.shape}")
        object.__setattr__(self, "values", v)

    def inner(self, other: "SampledSignal") -> complex:
        _check_grid(self, other)
        return complex(np.vdot(other.values, self.values) / self.grid.samples_per_unit)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) / self.grid.samples_per_unit))

    def __add__(self, other):
        _check_grid(self, other)
        return SampledSignal(self.grid, self.values + other.values)

    def __sub__(self, other):
        _check_grid(self, other)
        return SampledSignal(self.grid, self.values - other.values)

    def __mul__(self, scalar):
        return SampledSignal(self.grid, self.values * scalar)

    __rmul__ = __mul__


def _check_grid(*signals):
    g0 = signals[0].grid
    for s in signals[1:]:
        if s.grid != g0:
            raise GridMismatch(f"grids differ: {g0} vs {s.grid}")


WINDOW_KINDS = ("gaussian", "sech", "twosided_exp", "custom")


@dataclass(frozen=True, eq=False)
class WindowSpec:
    """Analytic description of a window function.

    The named kinds are unit-norm: the Gaussian 2^{1/4} e^{-pi t^2}, the
    secant (pi/2)^{1/2} / cosh(pi t) and the two-sided exponential e^{-|t|}.
    Custom windows interpolate a table of samples with a cubic spline, are
    zero outside the table and are rescaled to unit norm.
    """

    kind: str
    params: tuple = ()
    scale: complex = 1.0
    source: str | None = None
    samples: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in WINDOW_KINDS:
            raise ValueError(f"unknown window kind {self.kind!r}")
        if self.kind == "custom":
            if self.samples is None:
                raise ValueError("custom windows need samples")
            t, v = (np.asarray(a) for a in self.samples)
            order = np.argsort(t)
            t, v = t[order].astype(float), v[order].astype(complex)
            if len(t) < 4 or np.any(np.diff(t) <= 0):
                raise ValueError("custom window needs at least 4 distinct sample times")
            re, im = CubicSpline(t, v.real), CubicSpline(t, v.imag)
            object.__setattr__(self, "_spline", (t[0], t[-1], re, im))

    @property
    def id(self) -> str:
        if self.kind == "custom":
            return f"custom:{self.source}"
        return {"twosided_exp": "exp2"}.get(self.kind, self.kind)

    @property
    def key(self) -> tuple:
        return (self.kind, self.params, complex(self.scale), self.source, id(self.samples))

    @property
    def closed_form(self) -> bool:
        return self.kind != "custom"

    @property
    def support(self) -> float:
        """Half-width outside which |w(t)| < 1e-22."""
        if self.kind == "gaussian":
            return 4.0
        if self.kind == "sech":
            return 17.0
        if self.kind == "twosided_exp":
            return 51.0
        lo, hi = self._spline[:2]
        return float(max(abs(lo), abs(hi)))

    @property
    def kinks(self) -> tuple:
        if self.kind == "twosided_exp":
            return (0.0,)
        if self.kind == "custom":
            return (float(self._spline[0]), float(self._spline[1]))
        return ()

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "gaussian":
            v = 2.0**0.25 * np.exp(-np.pi * t * t)
        elif self.kind == "sech":
            with np.errstate(over="ignore"):
                v = math.sqrt(np.pi / 2) / np.cosh(np.pi * t)
        elif self.kind == "twosided_exp":
            v = np.exp(-np.abs(t))
        else:
            lo, hi, re, im = self._spline
            inside = (t >= lo) & (t <= hi)
            v = np.where(inside, re(t) + 1j * im(t), 0.0)
        return self.scale * v

    def scaled(self, factor: complex) -> "WindowSpec":
        return WindowSpec(self.kind, self.params, self.scale * factor, self.source, self.samples)


def gaussian() -> WindowSpec:
    return WindowSpec("gaussian")


def sech() -> WindowSpec:
    return WindowSpec("sech")


def twosided_exp() -> WindowSpec:
    return WindowSpec("twosided_exp")


def custom_window(t, values, source: str = "inline") -> WindowSpec:
    w = WindowSpec("custom", source=source, samples=(np.asarray(t), np.asarray(values)))
    norm = math.sqrt(_quad_norm2(w))
    if norm == 0:
        raise ValueError("custom window is identically zero")
    return w.scaled(1.0 / norm)


def load_custom_window(path: str) -> WindowSpec:
    data = np.loadtxt(path, dtype=float, ndmin=2)
    if data.shape[1] < 2:
        raise ValueError(f"{path}: expected two columns (t, value)")
    vals = data[:, 1] + (1j * data[:, 2] if data.shape[1] > 2 else 0.0)
    return custom_window(data[:, 0], vals, source=path)


def parse_window(text: str) -> WindowSpec:
    text = text.strip()
    named = {"gaussian": gaussian, "sech": sech, "exp2": twosided_exp, "twosided_exp": twosided_exp}
    if text in named:
        return named[text]()
    if text.startswith("custom:"):
        return load_custom_window(text[len("custom:"):])
    raise ValueError(f"unknown window {text!r} (expected gaussian, sech, exp2 or custom:<path>)")


def sample_window(w: WindowSpec, grid: GridSpec) -> SampledSignal:
    return SampledSignal(grid, w(grid.t))


def tf_shift(f: SampledSignal, z) -> SampledSignal:
    """pi(z) f = M_w T_x f; fractional shifts use an FFT phase ramp."""
    x, w = float(z[0]), float(z[1])
    return SampledSignal(f.grid, _shift_values(f.grid, f.values, x) * np.exp(2j * np.pi * w * f.grid.t))


def _shift_values(grid: GridSpec, values: np.ndarray, x: float) -> np.ndarray:
    if x == 0.0:
        return values.copy()
    steps = x * grid.samples_per_unit
    if steps == round(steps):
        return np.roll(values, int(round(steps)))
    return np.fft.ifft(np.fft.fft(values) * np.exp(-2j * np.pi * grid.freqs * x))


def shifted_copies(f: SampledSignal, points) -> np.ndarray:
    """Rows pi(z) f for every z in points (shape (K, 2))."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    out = np.empty((len(pts), f.grid.n_samples), dtype=complex)
    t = f.grid.t
    xs, inv = np.unique(pts[:, 0], return_inverse=True)
    for i, x in enumerate(xs):
        rows = np.nonzero(inv == i)[0]
        base = _shift_values(f.grid, f.values, x)
        out[rows] = base[None, :] * np.exp(2j * np.pi * np.outer(pts[rows, 1], t))
    return out


def stft(f: SampledSignal, g: SampledSignal, pts) -> np.ndarray:
    """V_g f at the given points, by Riemann sums on the grid."""
    _check_grid(f, g)
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    out = np.empty(len(pts), dtype=complex)
    t = f.grid.t
    xs, inv = np.unique(pts[:, 0], return_inverse=True)
    for i, x in enumerate(xs):
        rows = np.nonzero(inv == i)[0]
        prod = f.values * np.conj(_shift_values(g.grid, g.values, x))
        out[rows] = np.exp(-2j * np.pi * np.outer(pts[rows, 1], t)) @ prod
    return out / f.grid.samples_per_unit


def fourier_transform(f: SampledSignal) -> SampledSignal:
    """F f(xi) = int f(t) exp(-2 pi i t xi) dt, evaluated on the same grid."""
    g = f.grid
    q, T, n = g.samples_per_unit, g.half_width, g.n_samples
    k = np.arange(n)
    pre = f.values * np.exp(2j * np.pi * T * k / q)
    raw = czt(pre, m=n, w=np.exp(-2j * np.pi / q**2), a=1.0)
    post = np.exp(2j * np.pi * T * k / q - 2j * np.pi * T * T) / q
    return SampledSignal(g, raw * post)


# --- ambiguity coefficients -------------------------------------------------

def _x_over_sinh(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    out = np.ones_like(u)
    nz = u != 0
    with np.errstate(over="ignore"):
        out[nz] = u[nz] / np.sinh(u[nz])
    return out


def _real_part_profile(kind: str, x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """exp(pi i x w) <g, pi(x, w) g>, which is real for even real windows."""
    if kind == "gaussian":
        return np.exp(-np.pi * (x * x + w * w) / 2)
    if kind == "sech":
        return _x_over_sinh(np.pi * x) * _x_over_sinh(np.pi * w) * np.sinc(x * w)
    ax = np.abs(x)
    tail = (np.cos(np.pi * ax * w) - np.pi * w * np.sin(np.pi * ax * w)) / (1 + (np.pi * w) ** 2)
    return np.exp(-ax) * (ax * np.sinc(x * w) + tail)


def ambiguity(w: WindowSpec, points, tol: float = 1e-12) -> np.ndarray:
    """<w, pi(z) w> for every z in points (shape (K, 2))."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if w.closed_form:
        x, om = pts[:, 0], pts[:, 1]
        prof = _real_part_profile(w.kind, x, om)
        return abs(w.scale) ** 2 * prof * np.exp(-1j * np.pi * x * om)
    return cross_ambiguity(w, w, pts, tol)


def ambiguity_coefficient(w: WindowSpec, z) -> complex:
    return complex(ambiguity(w, np.asarray(z, dtype=float).reshape(1, 2))[0])


_GL_ORDER = 24
_GL = np.polynomial.legendre.leggauss(_GL_ORDER)


def _panels(lo: float, hi: float, breaks, width: float):
    edges = [lo] + sorted(b for b in breaks if lo < b < hi) + [hi]
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        m = max(1, int(math.ceil((b - a) / width)))
        cuts = np.linspace(a, b, m + 1)
        half = np.diff(cuts) / 2
        mid = (cuts[:-1] + cuts[1:]) / 2
        nodes.append((mid[:, None] + half[:, None] * _GL[0][None, :]).ravel())
        weights.append((half[:, None] * _GL[1][None, :]).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def _quad_norm2(w: WindowSpec) -> float:
    s = w.support
    t, wt = _panels(-s, s, w.kinks, 0.25)
    return float(np.sum(wt * np.abs(w(t)) ** 2))


def cross_ambiguity(f: WindowSpec, g: WindowSpec, points, tol: float = 1e-12) -> np.ndarray:
    """<f, pi(z) g> by composite Gauss-Legendre quadrature.

    Panels are split at the kinks of both factors and refined until two
    successive levels agree to ``tol`` (absolute).
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if f is g and f.closed_form:
        return ambiguity(f, pts)
    out = np.zeros(len(pts), dtype=complex)
    xs, inv = np.unique(pts[:, 0], return_inverse=True)
    for i, x in enumerate(xs):
        rows = np.nonzero(inv == i)[0]
        lo, hi = max(-f.support, x - g.support), min(f.support, x + g.support)
        if lo >= hi:
            continue
        om = pts[rows, 1]
        breaks = list(f.kinks) + [x + k for k in g.kinks]
        width = min(0.5, 1.0 / (1.0 + np.max(np.abs(om))))

        def integrate(h):
            t, wt = _panels(lo, hi, breaks, h)
            vals = wt * f(t) * np.conj(g(t - x))
            return np.exp(-2j * np.pi * np.outer(om, t)) @ vals

        prev = integrate(width)
        for _ in range(6):
            width /= 2
            cur = integrate(width)
            err = np.max(np.abs(cur - prev))
            prev = cur
            if err <= tol:
                break
        else:
            raise QuadratureFailure(f"cross-ambiguity at x={x}: error {err:.2e} > {tol:.1e}")
        out[rows] = cur
    return out
