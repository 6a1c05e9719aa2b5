"""Field arithmetic checks: hand-computed pins, python-int oracles, and
engine cross-routes. Every randomized loop is seeded."""

import numpy as np
import pytest

from jigsawobf import zmod as z

P5 = z.PrimeModulus(5)
P101 = z.PrimeModulus(101)


def _py_matmul(al, bl, p):
    # independent reference: plain python ints, no numpy anywhere
    r, inner, c = len(al), len(bl), len(bl[0])
    return [
        [sum(al[i][k] * bl[k][j] for k in range(inner)) % p for j in range(c)]
        for i in range(r)
    ]


# ---------------------------------------------------------------- primality


def test_is_prime_small_pins():
    primes = [2, 3, 5, 7, 11, 101, 257, 65537]
    composites = [0, 1, 4, 9, 91, 561, 1105, 6601, 41041, 65536]
    # 561 etc are Carmichael numbers: Fermat-liars for every base
    for n in primes:
        assert z.is_prime(n)
    for n in composites:
        assert not z.is_prime(n)


def test_is_prime_large_pins():
    assert z.is_prime((1 << 61) - 1)  # Mersenne
    assert not z.is_prime((1 << 61) + 1)
    assert z.is_prime(2305843009213693951)
    # product of two 31-bit primes
    assert not z.is_prime(2147483647 * 2147483629)


def test_gen_prime_range_and_determinism():
    for lam in (2, 3, 8, 20, 40):
        a = z.gen_prime(lam, z.Rng(11))
        b = z.gen_prime(lam, z.Rng(11))
        assert int(a) == int(b)
        assert 2 <= int(a) <= (1 << lam)
        assert z.is_prime(int(a))


def test_random_prime_bits_width():
    for bits in (5, 25, 61):
        pm = z.random_prime_bits(bits, z.Rng(3))
        assert pm.bits == bits
        assert z.is_prime(int(pm))


def test_prime_modulus_rejects_composites():
    with pytest.raises(ValueError):
        z.PrimeModulus(91)
    with pytest.raises(ValueError):
        z.PrimeModulus(1)


# ---------------------------------------------------------------- matmul


def test_matmul_pinned_mod5():
    # [[1,1],[0,1]] * [[1,4],[0,1]] = [[1,5],[0,1]] = I mod 5
    a = z.FieldMatrix([[1, 1], [0, 1]], P5)
    b = z.FieldMatrix([[1, 4], [0, 1]], P5)
    assert z.mat_mul(a, b) == z.identity(2, P5)


ENGINE_PRIMES = [
    2,  # smallest field, small engine
    5,
    101,
    (1 << 25) + 35,  # just past the small/Montgomery boundary
    (1 << 31) - 1,  # mid-size Montgomery
    2305843009213693951,  # 61-bit, the pipeline default scale
    (1 << 80) + 13,  # big engine, object arrays
]


@pytest.mark.parametrize("p", ENGINE_PRIMES)
def test_matmul_matches_python_oracle(p):
    pm = z.PrimeModulus(p)
    rng = z.Rng(1000 + p % 997)
    # dims straddle the BLAS-detour threshold so both routes get exercised
    for d in (3, 10, 40):
        a = z.rand_matrix(pm, d, d, rng)
        b = z.rand_matrix(pm, d, d, rng)
        got = z.mat_mul(a, b).to_lists()
        assert got == _py_matmul(a.to_lists(), b.to_lists(), p)


def test_matmul_rectangular():
    pm = z.PrimeModulus(97)
    rng = z.Rng(4)
    a = z.rand_matrix(pm, 3, 7, rng)
    b = z.rand_matrix(pm, 7, 2, rng)
    assert z.mat_mul(a, b).to_lists() == _py_matmul(a.to_lists(), b.to_lists(), 97)
    with pytest.raises(ValueError):
        z.mat_mul(b, a)


def test_matmul_crt_route_agrees_with_direct_kernel():
    """The float64-BLAS detour and the scalar Montgomery kernel are two
    implementations of the same product; they must agree bit for bit."""
    from jigsawobf import _kernels as _k

    pm = z.random_prime_bits(61, z.Rng(21))
    ctx = z._ctx(int(pm))
    rng = z.Rng(22)
    for d in (24, 51, 64):
        a = z.rand_matrix(pm, d, d, rng).a
        b = z.rand_matrix(pm, d, d, rng).a
        direct = np.empty((d, d), dtype=np.uint64)
        _k.mont_matmul(a, b, direct, np.uint64(ctx.p), ctx.pninv, ctx.r2)
        via_crt = z._crt_matmul(a, b, ctx)
        assert np.array_equal(direct, via_crt)


def test_matmul_associative_seeded():
    pm = z.PrimeModulus(101)
    rng = z.Rng(9)
    for _ in range(20):
        a = z.rand_matrix(pm, 4, 4, rng)
        b = z.rand_matrix(pm, 4, 4, rng)
        c = z.rand_matrix(pm, 4, 4, rng)
        assert z.mat_mul(z.mat_mul(a, b), c) == z.mat_mul(a, z.mat_mul(b, c))


# ---------------------------------------------------------------- inverses


@pytest.mark.parametrize("p", [2, 5, 101, (1 << 31) - 1, 2305843009213693951, (1 << 80) + 13])
def test_inverse_round_trip(p):
    pm = z.PrimeModulus(p)
    rng = z.Rng(500 + p % 997)
    for d in (1, 2, 6, 19):
        m, mi = z.sample_invertible(pm, d, rng)
        assert z.mat_mul(m, mi) == z.identity(d, pm)
        assert z.mat_mul(mi, m) == z.identity(d, pm)
        assert z.mat_inv(m) == mi


def test_inverse_blocked_path():
    # above the Schur threshold the inversion recurses on 2x2 blocks
    pm = z.random_prime_bits(61, z.Rng(31))
    rng = z.Rng(32)
    d = z._SCHUR_MIN + 29
    m, mi = z.sample_invertible(pm, d, rng)
    assert z.mat_mul(m, mi) == z.identity(d, pm)


def test_inverse_blocked_path_singular_leading_block():
    # [[0, I], [I, 0]] is invertible though its leading block is not; the
    # blocked route must fall back rather than reporting failure
    pm = z.random_prime_bits(61, z.Rng(33))
    d = z._SCHUR_MIN + 10
    h = d // 2
    e = np.zeros((d, d), dtype=np.uint64)
    e[:h, h : 2 * h] = np.eye(h, dtype=np.uint64)
    e[h : 2 * h, :h] = np.eye(h, dtype=np.uint64)
    for i in range(2 * h, d):
        e[i, i] = 1
    m = z.FieldMatrix(e, pm, _raw=True)
    mi = z.mat_inv(m)
    assert z.mat_mul(m, mi) == z.identity(d, pm)


@pytest.mark.parametrize("p", [2, 101, 2305843009213693951])
def test_singular_raises(p):
    pm = z.PrimeModulus(p)
    m = z.FieldMatrix([[1, 1], [1, 1]], pm)
    with pytest.raises(z.SingularMatrix):
        z.mat_inv(m)
    with pytest.raises(z.SingularMatrix):
        z.mat_inv(z.FieldMatrix([[0]], pm))


def test_inverse_rejects_rectangular():
    with pytest.raises(ValueError):
        z.mat_inv(z.FieldMatrix([[1, 0, 0], [0, 1, 0]], P5))


def test_singular_scaled_rows_detected():
    # second row is 3 * first row mod 101
    pm = P101
    m = z.FieldMatrix([[2, 5, 7], [6, 15, 21], [1, 0, 4]], pm)
    with pytest.raises(z.SingularMatrix):
        z.mat_inv(m)


# ---------------------------------------------------------------- vectors


@pytest.mark.parametrize("p", [5, 101, 2305843009213693951, (1 << 80) + 13])
def test_vector_ops_match_oracle(p):
    pm = z.PrimeModulus(p)
    rng = z.Rng(700 + p % 997)
    m = z.rand_matrix(pm, 6, 4, rng)
    u = z.rand_vector(pm, 6, rng)
    v = z.rand_vector(pm, 4, rng)
    ml, ul, vl = m.to_lists(), u.to_list(), v.to_list()
    assert z.vec_mat(u, m).to_list() == [
        sum(ul[i] * ml[i][j] for i in range(6)) % p for j in range(4)
    ]
    assert z.mat_vec(m, v).to_list() == [
        sum(ml[i][j] * vl[j] for j in range(4)) % p for i in range(6)
    ]
    w = z.rand_vector(pm, 6, rng)
    assert z.dot(u, w) == sum(a * b for a, b in zip(ul, w.to_list())) % p
    assert z.ew_mul(u, w).to_list() == [(a * b) % p for a, b in zip(ul, w.to_list())]


def test_scale_rows_full_and_partial():
    pm = P101
    rng = z.Rng(44)
    m = z.rand_matrix(pm, 5, 3, rng)
    dg = z.rand_vector(pm, 5, rng)
    got = z.scale_rows(dg, m).to_lists()
    want = [[(dg.to_list()[i] * x) % 101 for x in row] for i, row in enumerate(m.to_lists())]
    assert got == want
    # partial diagonal: trailing rows pass through untouched
    dg2 = z.FieldVector([7, 9], pm)
    got2 = z.scale_rows(dg2, m).to_lists()
    ml = m.to_lists()
    assert got2[0] == [(7 * x) % 101 for x in ml[0]]
    assert got2[1] == [(9 * x) % 101 for x in ml[1]]
    assert got2[2:] == ml[2:]
    with pytest.raises(ValueError):
        z.scale_rows(z.rand_vector(pm, 6, rng), m)


def test_mat_sub():
    a = z.FieldMatrix([[3, 1], [0, 2]], P5)
    b = z.FieldMatrix([[4, 1], [1, 0]], P5)
    assert z.mat_sub(a, b).to_lists() == [[4, 0], [4, 2]]


# ---------------------------------------------------------------- values


def test_coercion_reduces_and_wraps_negatives():
    m = z.FieldMatrix([[-1, 7], [10, -6]], P5)
    assert m.to_lists() == [[4, 2], [0, 4]]
    v = z.FieldVector([-3, 123456789123456789123456789], z.PrimeModulus((1 << 80) + 13))
    assert v.to_list()[0] == (1 << 80) + 13 - 3


def test_values_immutable():
    m = z.identity(2, P5)
    with pytest.raises(AttributeError):
        m.a = None
    with pytest.raises((ValueError, RuntimeError)):
        m.a[0, 0] = 3
    v = z.FieldVector([1, 2], P5)
    with pytest.raises(AttributeError):
        v.modulus = P101


def test_modulus_mismatch_rejected():
    a = z.identity(2, P5)
    b = z.identity(2, P101)
    with pytest.raises(ValueError):
        z.mat_mul(a, b)


# ---------------------------------------------------------------- sampling


def test_rng_deterministic_and_spawn_independent():
    r1, r2 = z.Rng(99), z.Rng(99)
    assert [r1.py.randrange(100) for _ in range(10)] == [
        r2.py.randrange(100) for _ in range(10)
    ]
    assert np.array_equal(r1.np.integers(0, 1 << 60, 10), r2.np.integers(0, 1 << 60, 10))
    c1, c2 = r1.spawn(), r2.spawn()
    assert c1.seed == c2.seed
    assert c1.seed != 99


def test_rand_matrix_nonzero_flag():
    pm = P5
    rng = z.Rng(5)
    m = z.rand_matrix(pm, 30, 30, rng, nonzero=True)
    assert all(x != 0 for row in m.to_lists() for x in row)
    v = z.rand_vector(pm, 200, rng, nonzero=True)
    assert all(x != 0 for x in v.to_list())


def test_sample_invertible_returns_matching_pair():
    for p in (2, 5, 2305843009213693951):
        pm = z.PrimeModulus(p)
        m, mi = z.sample_invertible(pm, 7, z.Rng(p % 50))
        assert z.mat_mul(m, mi) == z.identity(7, pm)
