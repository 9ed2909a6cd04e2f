import math

import numpy as np
import pytest
from scipy.integrate import quad
from conftest import GRID, smooth_signal

from nct_gabor import (
    GridMismatch,
    GridSpec,
    QuadratureFailure,
    SampledSignal,
    ambiguity,
    cross_ambiguity,
    custom_window,
    fourier_transform,
    gaussian,
    parse_window,
    sample_window,
    sech,
    stft,
    tf_shift,
    twosided_exp,
)
from nct_gabor.tf_signal import ambiguity_coefficient, load_custom_window


def quad_ambiguity(f, g, x, w):
    """Oracle <f, pi(x, w) g> by scipy adaptive quadrature on [-L, L]."""
    lim = 60.0
    pts = sorted({0.0, float(x)})

    def part(fn):
        return quad(fn, -lim, lim, points=pts, limit=800, epsabs=1e-14, epsrel=1e-13)[0]

    def integrand(t):
        return complex(f(np.array([t]))[0] * np.conj(g(np.array([t - x]))[0]) * np.exp(-2j * np.pi * w * t))

    return part(lambda t: integrand(t).real) + 1j * part(lambda t: integrand(t).imag)


def test_grid_spec_validation():
    assert GRID.n_samples == 2048
    with pytest.raises(ValueError):
        GridSpec(16.0, 48)
    with pytest.raises(ValueError):
        GridSpec(1.3, 64)
    with pytest.raises(ValueError):
        GridSpec(-1.0, 64)


def test_sample_window_values():
    g = sample_window(gaussian(), GRID)
    t0 = int(np.argmin(np.abs(GRID.t)))
    assert g.values[t0] == pytest.approx(2 ** 0.25, abs=1e-15)
    assert g.norm() == pytest.approx(1.0, abs=1e-10)
    e = twosided_exp()
    assert e(np.array([-1.0, 1.0])) == pytest.approx([math.exp(-1)] * 2)
    assert sample_window(sech(), GRID).norm() == pytest.approx(1.0, abs=1e-10)


def test_window_norms_by_quadrature():
    for w in (gaussian(), sech()):
        val = quad(lambda t: abs(w(np.array([t]))[0]) ** 2, -np.inf, np.inf, epsabs=1e-14)[0]
        assert val == pytest.approx(1.0, abs=1e-12)
    val = quad(lambda t: math.exp(-2 * abs(t)), -np.inf, np.inf)[0]
    assert val == pytest.approx(1.0, abs=1e-12)


def test_tf_shift_identity_and_unitarity(rng):
    f = smooth_signal(rng)
    assert np.allclose(tf_shift(f, (0, 0)).values, f.values, atol=0)
    for _ in range(5):
        z = rng.uniform(-3, 3, size=2)
        assert abs(tf_shift(f, z).norm() - f.norm()) <= 1e-10 * f.norm()


def test_tf_shift_matches_analytic_shift():
    g = sample_window(gaussian(), GRID)
    x, w = 0.37, -1.3
    expected = gaussian()(GRID.t - x) * np.exp(2j * np.pi * w * GRID.t)
    assert np.max(np.abs(tf_shift(g, (x, w)).values - expected)) <= 1e-12


def test_cocycle_relation(rng):
    f = smooth_signal(rng, spread=2.0)
    for _ in range(5):
        (x, w), (y, eta) = rng.uniform(-2, 2, size=(2, 2))
        lhs = tf_shift(tf_shift(f, (y, eta)), (x, w))
        rhs = tf_shift(f, (x + y, w + eta)) * np.exp(-2j * np.pi * x * eta)
        assert (lhs - rhs).norm() <= 1e-9 * f.norm()


def test_commutation_relations(rng):
    f = smooth_signal(rng, spread=2.0)
    for _ in range(5):
        x, w = rng.uniform(-2, 2, size=2)
        mt = tf_shift(tf_shift(f, (x, 0)), (0, w))
        tm = tf_shift(tf_shift(f, (0, w)), (x, 0))
        assert (mt - tm * np.exp(2j * np.pi * x * w)).norm() <= 1e-9 * f.norm()
        (y, eta) = rng.uniform(-2, 2, size=2)
        ab = tf_shift(tf_shift(f, (y, eta)), (x, w))
        ba = tf_shift(tf_shift(f, (x, w)), (y, eta))
        c = np.exp(2j * np.pi * (y * w - x * eta))
        assert (ab - ba * c).norm() <= 1e-9 * f.norm()


def test_clock_shift_relation():
    # U1 = T_1, U2 = M_theta satisfy U2 U1 = e^{2 pi i theta} U1 U2.
    theta = 0.75
    f = sample_window(gaussian(), GRID)
    u2u1 = tf_shift(tf_shift(f, (1, 0)), (0, theta))
    u1u2 = tf_shift(tf_shift(f, (0, theta)), (1, 0))
    assert (u2u1 - u1u2 * np.exp(2j * np.pi * theta)).norm() <= 1e-12


def test_stft_examples(rng):
    g = sample_window(gaussian(), GRID)
    f = smooth_signal(rng)
    assert stft(f, g, [(0, 0)])[0] == pytest.approx(f.inner(g), abs=1e-14)
    assert stft(g, g, [(0, 0)])[0] == pytest.approx(1.0, abs=1e-12)
    oracle = quad(lambda t: 2 ** 0.5 * math.exp(-math.pi * (t * t + (t - 1) ** 2)), -np.inf, np.inf)[0]
    assert abs(stft(g, g, [(1, 0)])[0]) == pytest.approx(oracle, abs=1e-12)
    assert oracle == pytest.approx(math.exp(-math.pi / 2), abs=1e-12)
    with pytest.raises(GridMismatch):
        stft(f, sample_window(gaussian(), GridSpec(8.0, 64)), [(0, 0)])


def test_stft_matches_ambiguity_on_grid_points():
    g = sample_window(gaussian(), GRID)
    ax = np.linspace(-2, 2, 5)
    pts = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    assert np.max(np.abs(stft(g, g, pts) - ambiguity(gaussian(), pts))) <= 1e-8


def test_grid_parseval(rng):
    f = smooth_signal(rng, n_atoms=2, spread=1.0)
    g = sample_window(gaussian(), GRID)
    h = 1 / 8
    ax = np.arange(-10, 10, h)
    pts = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    total = np.sum(np.abs(stft(f, g, pts)) ** 2) * h * h
    assert total == pytest.approx(f.norm() ** 2 * g.norm() ** 2, rel=1e-6)


def test_ambiguity_examples():
    assert ambiguity_coefficient(gaussian(), (0, 0)) == pytest.approx(1.0, abs=1e-15)
    assert abs(ambiguity_coefficient(gaussian(), (1, 1))) == pytest.approx(math.exp(-math.pi), abs=1e-15)
    assert abs(ambiguity_coefficient(twosided_exp(), (1, 0))) == pytest.approx(2 * math.exp(-1), abs=1e-14)
    for x in (0.3, 2.5):
        assert ambiguity_coefficient(twosided_exp(), (x, 0)).real == pytest.approx(math.exp(-x) * (1 + x), abs=1e-14)


@pytest.mark.parametrize("name", ["gaussian", "sech", "exp2"])
def test_closed_form_ambiguity_matches_quadrature(name):
    w = parse_window(name)
    for x, om in [(0.0, 0.0), (0.5, 0.25), (1.0, -1.5), (-2.0, 0.75), (1.3, 3.2)]:
        got = ambiguity_coefficient(w, (x, om))
        assert abs(got - quad_ambiguity(w, w, x, om)) <= 1e-11


def test_cross_ambiguity_quadrature_matches_scipy():
    f, g = sech(), twosided_exp()
    pts = np.array([(0.0, 0.0), (0.75, 1.0), (-1.5, -0.5), (2.0, 2.0)])
    got = cross_ambiguity(f, g, pts)
    for z, v in zip(pts, got):
        assert abs(v - quad_ambiguity(f, g, *z)) <= 1e-11


def test_cross_ambiguity_same_window_by_quadrature_path():
    # A copy that is not the same object takes the quadrature path.
    a, b = sech(), sech()
    pts = np.array([(0.5, 0.5), (1.0, -2.0), (3.0, 0.25)])
    assert np.max(np.abs(cross_ambiguity(a, b, pts) - ambiguity(a, pts))) <= 1e-12


def test_custom_window(tmp_path):
    t = np.linspace(-5, 5, 401)
    path = tmp_path / "w.txt"
    np.savetxt(path, np.stack([t, np.exp(-np.pi * t * t)], axis=1))
    w = parse_window(f"custom:{path}")
    assert w.id == f"custom:{path}"
    s = sample_window(w, GRID)
    assert s.norm() == pytest.approx(1.0, abs=1e-6)
    assert np.max(np.abs(s.values - sample_window(gaussian(), GRID).values)) <= 1e-5
    v = cross_ambiguity(w, w, [(0.5, 0.5)])[0]
    assert abs(v - ambiguity_coefficient(gaussian(), (0.5, 0.5))) <= 1e-5
    with pytest.raises(ValueError):
        custom_window([0, 1], [1, 1])
    with pytest.raises(OSError):
        load_custom_window(str(tmp_path / "missing.txt"))


def test_parse_window_errors():
    assert parse_window("exp2").kind == "twosided_exp"
    with pytest.raises(ValueError, match="unknown window"):
        parse_window("boxcar")


def test_quadrature_failure():
    with pytest.raises(QuadratureFailure):
        cross_ambiguity(sech(), twosided_exp(), [(0.3, 40.0)], tol=1e-30)


@pytest.mark.parametrize("w", [gaussian(), sech()])
def test_fourier_invariant_windows(w):
    s = sample_window(w, GRID)
    assert np.max(np.abs(fourier_transform(s).values - s.values)) <= 1e-8


def test_fourier_involution(rng):
    f = smooth_signal(rng, spread=2.0)
    ff = fourier_transform(fourier_transform(f))
    reflected = SampledSignal(GRID, np.roll(f.values[::-1], 1))
    assert np.max(np.abs(ff.values - reflected.values)) <= 1e-10 * np.max(np.abs(f.values))


def test_fourier_unitary(rng):
    f = smooth_signal(rng, spread=2.0)
    assert fourier_transform(f).norm() == pytest.approx(f.norm(), rel=1e-10)


def test_signal_arithmetic():
    g = sample_window(gaussian(), GRID)
    assert (g + g).norm() == pytest.approx(2.0)
    assert (g - g).norm() == 0
    assert (2 * g).inner(g) == pytest.approx(2.0)
    with pytest.raises(GridMismatch):
        SampledSignal(GRID, np.zeros(5))
