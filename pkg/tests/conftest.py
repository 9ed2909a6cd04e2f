import functools

import numpy as np
import pytest

from nct_gabor import (
    GridSpec,
    SampledSignal,
    TwistedElement,
    canonical_tight,
    cocycle,
    gaussian,
    projection_from_window,
    sech,
    separable,
    twosided_exp,
)

GRID = GridSpec(16.0, 64)
WINDOWS = {"gaussian": gaussian, "sech": sech, "exp2": twosided_exp}


def smooth_signal(rng, grid=GRID, n_atoms=4, spread=3.0):
    """Random combination of shifted, modulated Gaussians."""
    t = grid.t
    v = np.zeros(grid.n_samples, dtype=complex)
    for _ in range(n_atoms):
        x, w = rng.uniform(-spread, spread, size=2)
        c = rng.normal() + 1j * rng.normal()
        v += c * np.exp(-np.pi * (t - x) ** 2) * np.exp(2j * np.pi * w * t)
    return SampledSignal(grid, v)


def random_element(rng, L, radius=2.0, side="c"):
    idx, _ = L.points(radius)
    vals = rng.normal(size=len(idx)) + 1j * rng.normal(size=len(idx))
    return TwistedElement.from_points(L, idx, vals, side)


def brute_tconv(a, b):
    """Direct double sum for the twisted convolution."""
    out = {}
    for m, av in zip(a.indices, a.values):
        for n, bv in zip(b.indices, b.values):
            k = tuple(int(v) for v in m + n)
            out[k] = out.get(k, 0) + av * bv * complex(cocycle(a.lattice, m, n))
    keys = list(out)
    return TwistedElement.from_points(a.lattice, keys, [out[k] for k in keys], a.cocycle_sign)


@functools.lru_cache(maxsize=None)
def tight_window(name, theta):
    return canonical_tight(WINDOWS[name](), separable(1.0, theta))


@functools.lru_cache(maxsize=None)
def projection(name, theta):
    return projection_from_window(WINDOWS[name](), separable(1.0, theta))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# One summary line per acceptance criterion, filled by test_acceptance.py.
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
