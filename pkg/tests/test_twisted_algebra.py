import json

import numpy as np
import pytest
from conftest import GRID, brute_tconv, random_element, smooth_signal

from nct_gabor import (
    LatticeMismatch,
    NoConvergence,
    NotInvertible,
    NotSelfAdjoint,
    TwistedElement,
    WrongSide,
    apply_left,
    apply_right,
    cocycle,
    delta,
    gaussian,
    involute,
    inv_sqrt,
    invert,
    l1s_norm,
    make_lattice,
    regular_rep_matrix,
    sample_window,
    separable,
    spectral_bounds,
    tconv,
    tf_shift,
    trace,
    truncate,
)

LATTICES = [
    separable(1, 0.75),
    separable(1, 2 ** -0.5),
    make_lattice([[1, 0], [0.3, 0.8]]),
]


def positive_element(rng, L, spread=0.6, radius=1.5):
    r = random_element(rng, L, radius)
    h = (r + involute(r)) * 0.5
    h = h * (spread / l1s_norm(h))
    return delta(L) * (1.0 + rng.uniform(0, 0.3)) + h


def test_delta_unit_and_commutation(rng):
    L = separable(1, 0.75)
    a = random_element(rng, L)
    assert l1s_norm(tconv(delta(L), a) - a) == 0
    assert l1s_norm(tconv(a, delta(L)) - a) == 0
    ab = tconv(delta(L, (1, 0)), delta(L, (0, 1)))
    ba = tconv(delta(L, (0, 1)), delta(L, (1, 0)))
    assert ab.coeff((1, 1)) == pytest.approx(np.exp(-2j * np.pi * 0.75), abs=1e-15)
    assert ba.coeff((1, 1)) == pytest.approx(1.0, abs=1e-15)
    assert ab.nnz == 1 and ba.nnz == 1
    assert trace(delta(L)) == 1


def test_generators_match_operator_commutation():
    # U1 = pi(1, 0), U2 = pi(0, theta): U2 U1 = e^{2 pi i theta} U1 U2.
    theta = 0.75
    L = separable(1, theta)
    u1, u2 = delta(L, (1, 0)), delta(L, (0, 1))
    lhs = tconv(u2, u1)
    rhs = tconv(u1, u2) * np.exp(2j * np.pi * theta)
    assert l1s_norm(lhs - rhs) <= 1e-15


@pytest.mark.parametrize("L", LATTICES + [make_lattice([np.diag([1, 0.5]), [[1, 0.2], [0, 0.8]]])])
def test_tconv_matches_direct_sum(rng, L):
    a, b = random_element(rng, L, 2.0), random_element(rng, L, 1.5)
    assert l1s_norm(tconv(a, b) - brute_tconv(a, b)) <= 1e-12 * l1s_norm(a) * l1s_norm(b)
    assert l1s_norm(tconv(b, a) - brute_tconv(b, a)) <= 1e-12 * l1s_norm(a) * l1s_norm(b)


@pytest.mark.parametrize("L", LATTICES)
def test_associativity_against_triple_sum(rng, L):
    a, b, c = (random_element(rng, L, r) for r in (1.5, 2.0, 1.2))
    fast = tconv(tconv(a, b), c)
    triple = {}
    for m, av in zip(a.indices, a.values):
        for n, bv in zip(b.indices, b.values):
            for k, cv in zip(c.indices, c.values):
                key = tuple(int(v) for v in m + n + k)
                ph = cocycle(L, m, n) * cocycle(L, m + n, k)
                triple[key] = triple.get(key, 0) + av * bv * cv * complex(ph)
    keys = list(triple)
    ref = TwistedElement.from_points(L, keys, [triple[k] for k in keys])
    scale = l1s_norm(a) * l1s_norm(b) * l1s_norm(c)
    assert l1s_norm(fast - ref) <= 1e-12 * scale
    assert l1s_norm(fast - tconv(a, tconv(b, c))) <= 1e-12 * scale


@pytest.mark.parametrize("L", LATTICES)
def test_involution_properties(rng, L):
    a, b = random_element(rng, L), random_element(rng, L, 1.5)
    assert l1s_norm(involute(involute(a)) - a) <= 1e-14 * l1s_norm(a)
    lhs = involute(tconv(a, b))
    rhs = tconv(involute(b), involute(a))
    assert l1s_norm(lhs - rhs) <= 1e-12 * l1s_norm(a) * l1s_norm(b)
    assert l1s_norm(involute(delta(L)) - delta(L)) == 0


def test_l1s_norm_examples(rng):
    L = make_lattice(np.eye(2))
    for s in (0, 1, 2.5):
        assert l1s_norm(delta(L), s) == 1
    assert l1s_norm(delta(L, (1, 0)), 2) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        l1s_norm(delta(L), -1)
    for _ in range(10):
        a, b = random_element(rng, L), random_element(rng, L, 1.5)
        assert l1s_norm(tconv(a, b)) <= l1s_norm(a) * l1s_norm(b) * (1 + 1e-12)


def test_trace_properties(rng):
    L = separable(1, 0.5)
    for _ in range(5):
        a, b = random_element(rng, L), random_element(rng, L, 1.5)
        assert abs(trace(tconv(a, b)) - trace(tconv(b, a))) <= 1e-12 * l1s_norm(a) * l1s_norm(b)
    La = L.adjoint()
    assert trace(delta(La, None, "cbar")) == pytest.approx(2.0, abs=1e-15)


def test_lattice_and_side_mismatch(rng):
    a = random_element(rng, separable(1, 0.5))
    with pytest.raises(LatticeMismatch):
        tconv(a, random_element(rng, separable(1, 0.75)))
    with pytest.raises(LatticeMismatch):
        a + delta(a.lattice, None, "cbar")


def test_apply_left_examples(rng):
    L = separable(1, 0.5)
    g = sample_window(gaussian(), GRID)
    assert (apply_left(delta(L), g) - g).norm() == 0
    shifted = apply_left(delta(L, (2, -3)), g)
    assert (shifted - tf_shift(g, (2.0, -1.5))).norm() <= 1e-12
    a, b = random_element(rng, L, 1.5), random_element(rng, L, 1.5)
    lhs = apply_left(tconv(a, b), g)
    rhs = apply_left(a, apply_left(b, g))
    assert (lhs - rhs).norm() <= 1e-9 * rhs.norm()


def test_apply_right_examples(rng):
    L = separable(1, 0.5)
    La = L.adjoint()
    g = smooth_signal(rng, spread=1.5)
    unit = apply_right(g, delta(La, None, "cbar"))
    assert (unit - g * (1 / L.volume)).norm() <= 1e-12 * g.norm()
    a = random_element(rng, L, 1.5)
    b = random_element(rng, La, 1.5, "cbar")
    lhs = apply_left(a, apply_right(g, b))
    rhs = apply_right(apply_left(a, g), b)
    assert (lhs - rhs).norm() <= 1e-9 * lhs.norm()
    b2 = random_element(rng, La, 1.5, "cbar")
    lin = apply_right(g, b * 2.0 + b2) - (apply_right(g, b) * 2.0 + apply_right(g, b2))
    assert lin.norm() <= 1e-12 * apply_right(g, b).norm()
    # (g.b).b' = vol(L)^{-1} g.(b # b')
    lhs = apply_right(apply_right(g, b), b2)
    rhs = apply_right(g, tconv(b, b2)) * (1 / L.volume)
    assert (lhs - rhs).norm() <= 1e-9 * lhs.norm()
    with pytest.raises(WrongSide):
        apply_right(g, a)


def test_regular_rep_matrix(rng):
    L = separable(1, 0.75)
    M, idx = regular_rep_matrix(delta(L), 3)
    assert np.array_equal(M, np.eye(len(idx)))
    a = random_element(rng, L, 1.5)
    Ma, idx = regular_rep_matrix(a, 8)
    Ms, _ = regular_rep_matrix(involute(a), 8)
    assert np.max(np.abs(Ms - Ma.conj().T)) <= 1e-12
    assert np.max(np.abs(Ma)) > 0
    b = random_element(rng, L, 1.5)
    Mb, _ = regular_rep_matrix(b, 8)
    Mab, _ = regular_rep_matrix(tconv(a, b), 8)
    inner = np.linalg.norm(L.coords(idx), axis=1) < 4
    assert np.max(np.abs((Ma @ Mb - Mab)[np.ix_(inner, inner)])) <= 1e-10


def test_spectral_bounds_examples(rng):
    L = make_lattice(np.eye(2))
    sb = spectral_bounds(delta(L))
    assert sb.lower == pytest.approx(1) and sb.upper == pytest.approx(1)
    mu = (1, 0)
    a = delta(L) + (delta(L, mu) + involute(delta(L, mu))) * 0.5
    sb = spectral_bounds(a)
    M, _ = regular_rep_matrix(a, 8)
    ev = np.linalg.eigvalsh((M + M.conj().T) / 2)
    assert 0 - 1e-12 <= sb.lower <= ev[0] + 1e-9
    assert ev[-1] - 1e-9 <= sb.upper <= 2 + 1e-12
    assert sb.lower == pytest.approx(0.0, abs=1e-9)
    rr = spectral_bounds(a, method="regular_rep", radius=8)
    assert rr.lower == pytest.approx(ev[0], abs=1e-12)


def periodic_matrix(a, N, s=0.0, t=0.0):
    """Left twisted convolution by ``a`` on the finite quotient Z_N x Z_N.

    Needs theta * N integer so the cocycle is well defined modulo N.  The
    character twist (s, t) keeps it a *-representation, so its eigenvalues lie
    inside the spectrum of ``a``.
    """
    k = np.arange(N)
    idx = np.stack(np.meshgrid(k, k, indexing="ij"), axis=-1).reshape(-1, 2)
    M = np.zeros((N * N, N * N), dtype=complex)
    for mu, v in zip(a.indices, a.values):
        nu = idx
        lam = (nu + mu) % N
        ph = cocycle(a.lattice, mu, nu)
        chi = np.exp(2j * np.pi * (s * mu[0] + t * mu[1]))
        M[lam[:, 0] * N + lam[:, 1], nu[:, 0] * N + nu[:, 1]] += v * ph * chi
    return M


def test_rational_symbol_against_periodic_oracle(rng):
    L = separable(1, 0.5)
    for _ in range(3):
        a = positive_element(rng, L)
        exact = spectral_bounds(a)
        assert exact.method == "rational_symbol"
        lo, hi = np.inf, -np.inf
        for s in np.arange(8) / (8 * 24):
            for t in np.arange(8) / (8 * 24):
                M = periodic_matrix(a, 24, s, t)
                assert np.max(np.abs(M - M.conj().T)) <= 1e-12
                ev = np.linalg.eigvalsh(M)
                lo, hi = min(lo, ev[0]), max(hi, ev[-1])
        assert exact.lower <= lo + 1e-10 and exact.upper >= hi - 1e-10
        # remaining gap is the 1/192 sampling of the twist torus
        assert lo - exact.lower <= 5e-4 and exact.upper - hi <= 5e-4
        compressed = spectral_bounds(a, method="regular_rep", radius=10)
        assert exact.lower <= compressed.lower + 1e-10
        assert exact.upper >= compressed.upper - 1e-10


def test_rational_symbol_is_a_representation(rng):
    from nct_gabor.twisted_algebra import RationalSymbol, rotation_number

    for L in (separable(1, 0.75), make_lattice([[1, 0.25], [0.5, 0.875]])):
        rot = rotation_number(L)
        assert rot is not None
        a, b = random_element(rng, L, 1.5), random_element(rng, L, 1.5)
        ab = tconv(a, b)
        for s, t in [(0.0, 0.0), (0.05, 0.11)]:
            Ra = RationalSymbol(a, rot).matrix(s, t, hermitian=False)
            Rb = RationalSymbol(b, rot).matrix(s, t, hermitian=False)
            Rab = RationalSymbol(ab, rot).matrix(s, t, hermitian=False)
            assert np.max(np.abs(Ra @ Rb - Rab)) <= 1e-12 * l1s_norm(a) * l1s_norm(b)
            Rs = RationalSymbol(involute(a), rot).matrix(s, t, hermitian=False)
            assert np.max(np.abs(Rs - Ra.conj().T)) <= 1e-12 * l1s_norm(a)


def test_diagonal_dominance_is_a_lower_bound(rng):
    for i in range(20):
        L = LATTICES[i % len(LATTICES)]
        a = positive_element(rng, L, spread=rng.uniform(0.3, 1.5))
        sb = spectral_bounds(a)
        assert sb.diag_lower <= sb.lower + 1e-12
        dd = spectral_bounds(a, method="diagonal_dominance")
        assert dd.lower == sb.diag_lower


def test_spectral_bounds_rejects_non_self_adjoint():
    L = separable(1, 0.5)
    with pytest.raises(NotSelfAdjoint):
        spectral_bounds(delta(L, (1, 0)))


def test_invert_examples():
    L = separable(1, 0.75)
    assert l1s_norm(invert(delta(L)) - delta(L)) <= 1e-14
    assert l1s_norm(invert(delta(L) * 2) - delta(L) * 0.5) <= 1e-14
    assert l1s_norm(inv_sqrt(delta(L) * 4) - delta(L) * 0.5) <= 1e-14
    mu = (1, 1)
    a = delta(L) + (delta(L, mu) + involute(delta(L, mu))) * 0.3
    b = invert(a, 1e-10)
    assert l1s_norm(tconv(a, b) - delta(L)) <= 1e-10
    y = inv_sqrt(a, 1e-10)
    assert l1s_norm(tconv(tconv(y, a), y) - delta(L)) <= 1e-10
    assert l1s_norm(tconv(y, a) - tconv(a, y)) <= 1e-10
    assert l1s_norm(involute(y) - y) <= 1e-10
    back = invert(tconv(y, y), 1e-12)
    assert l1s_norm(back - a) <= 100 * 1e-10 * l1s_norm(a)


def _central_column(f, a, radius):
    M, idx = regular_rep_matrix(a, radius)
    M = (M + M.conj().T) / 2
    w, V = np.linalg.eigh(M)
    col = V @ (f(w) * V.conj()[np.all(idx == 0, axis=1)][0])
    return idx, col


@pytest.mark.parametrize("seed", range(10))
def test_invert_and_inv_sqrt_against_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    L = LATTICES[seed % len(LATTICES)]
    a = positive_element(rng, L)
    b = invert(a, 1e-13)
    y = inv_sqrt(a, 1e-13)
    for fn, el in ((lambda w: 1 / w, b), (lambda w: w ** -0.5, y)):
        idx, col = _central_column(fn, a, 11)
        near = np.linalg.norm(L.coords(idx), axis=1) <= 3
        assert np.max(np.abs(el.lookup(idx[near]) - col[near])) <= 1e-9


def test_inverse_coefficients_decay(rng):
    L = separable(1, 0.5)
    La = L.adjoint()
    idx, c = La.points(6)
    from nct_gabor import ambiguity

    J = TwistedElement.from_points(La, idx, ambiguity(gaussian(), c) / L.volume, "cbar")
    b = invert(J, 1e-12)
    r = np.linalg.norm(La.coords(b.indices), axis=1)
    v = np.abs(b.values)
    shells = [np.max(v[(r > k) & (r <= k + 1)]) for k in range(1, 8)]
    slope = np.polyfit(np.arange(1, 8), np.log(shells), 1)[0]
    assert slope < 0


def test_not_invertible_and_no_convergence():
    L = make_lattice(np.eye(2))
    a = delta(L) + (delta(L, (1, 0)) + involute(delta(L, (1, 0)))) * 0.5
    with pytest.raises(NotInvertible):
        invert(a)
    b = delta(L) + (delta(L, (1, 0)) + involute(delta(L, (1, 0)))) * 0.4999
    with pytest.raises(NoConvergence):
        invert(b, 1e-12, max_radius=3)
    with pytest.raises(NoConvergence):
        inv_sqrt(b, 1e-12, max_radius=3)


def test_truncate_and_support(rng):
    L = separable(1, 0.5)
    a = random_element(rng, L, 4)
    t = truncate(a, 2)
    assert t.support_radius() <= 2 + 1e-12
    assert t.radius == 2
    small = truncate(a, rel_tol=0.5)
    assert small.nnz == 0


def test_json_round_trip(rng):
    L = separable(1, 2 ** -0.5)
    a = random_element(rng, L, 2, "cbar")
    obj = json.loads(json.dumps(a.to_json()))
    b = TwistedElement.from_json(obj)
    assert b.cocycle_sign == "cbar" and b.lattice.same_as(L, atol=0)
    assert np.array_equal(b.indices, a.indices) and np.array_equal(b.values, a.values)
    with pytest.raises(ValueError):
        TwistedElement.from_json({"lattice": L.to_json()})


def test_element_is_immutable(rng):
    a = random_element(rng, separable(1, 0.5))
    with pytest.raises(ValueError):
        a.data[0, 0] = 1
