"""Exact arithmetic and linear algebra over prime fields Z_p.

Values are immutable after construction; every operation is a pure function
of its inputs plus an explicit rng, so sharing across threads is safe.

Three engines sit behind one dispatch layer, chosen per modulus:

* p < 2**25         plain int64 numba kernels (covers the tiny test primes)
* odd p < 2**63     Montgomery numba kernels; large matrix products take a
                    CRT detour over float64 BLAS (exact: per-residue sums
                    stay under 2**53), large inversions use 2x2 blocked
                    Schur complements on top of the product dispatch
* anything else     arbitrary-precision python ints (object arrays); slow,
                    correct, only exercised at big-lambda sanity scale

The engine split is invisible in results: tests pin identical outputs for
the same draws regardless of path taken.
"""

import math
import random
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k

_SMALL_LIMIT = 1 << 25
_MONT_LIMIT = 1 << 63
_CRT_MIN_INNER = 22  # matmul inner dim where the BLAS detour starts winning
_CRT_MIN_OUT = 16
_CRT_MAX_INNER = 2048  # float64 exactness bound: inner * (q-1)^2 < 2**53
_SCHUR_MIN = 72  # blocked inversion beats straight elimination above this


class SingularMatrix(Exception):
    """Raised when a matrix inverse is requested for a rank-deficient input."""


class Rng:
    """Bundle of a python Random and a numpy Generator under one seed.

    Structural choices draw from .py, bulk array sampling from .np; both are
    fixed algorithms (Mersenne twister, PCG64) so every consumer is
    reproducible from the single integer seed.
    """

    def __init__(self, seed=None):
        if seed is None:
            seed = random.SystemRandom().getrandbits(63)
        self.seed = int(seed)
        self.py = random.Random(self.seed)
        self.np = np.random.default_rng(self.seed)

    def spawn(self):
        """Independent child stream, deterministic given self's state."""
        return Rng(self.py.getrandbits(63))


def _sieve_upto(limit):
    flags = np.ones(limit, dtype=bool)
    flags[:2] = False
    for i in range(2, int(limit**0.5) + 1):
        if flags[i]:
            flags[i * i :: i] = False
    return np.flatnonzero(flags).tolist()


_TRIAL_PRIMES = None


def _trial_primes():
    global _TRIAL_PRIMES
    if _TRIAL_PRIMES is None:
        _TRIAL_PRIMES = _sieve_upto(1 << 16)
    return _TRIAL_PRIMES


def is_prime(n, rng=None):
    """Trial division below 2**16, then 64 Miller-Rabin rounds.

    Conclusive for n < 2**32; above that the error probability is 4**-64.
    """
    if n < 2:
        return False
    for q in _trial_primes():
        if q * q > n:
            return True
        if n % q == 0:
            return n == q
    # n > 2**32 here
    d = n - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    bases = rng.py if rng is not None else random.Random(n)
    for _ in range(64):
        a = bases.randrange(2, n - 1)
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = (x * x) % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class PrimeModulus:
    """A prime p; the plaintext space and matrix entry domain."""

    p: int

    def __post_init__(self):
        if self.p < 2 or not is_prime(self.p):
            raise ValueError(f"modulus {self.p} is not prime")

    @property
    def bits(self):
        return self.p.bit_length()

    def __int__(self):
        return self.p

    def __repr__(self):
        return f"PrimeModulus({self.p})"


def gen_prime(lam, rng):
    """Uniform-ish prime p <= 2**lam; retries non-prime draws."""
    if lam < 2:
        raise ValueError("lambda must be at least 2")
    hi = 1 << lam
    while True:
        c = rng.py.randrange(2, hi + 1)
        if is_prime(c, rng):
            return PrimeModulus(c)


def random_prime_bits(bits, rng):
    """Prime with exactly `bits` bits; the pipeline default uses 61."""
    lo = 1 << (bits - 1)
    while True:
        c = rng.py.randrange(lo, 2 * lo)
        if is_prime(c, rng):
            return PrimeModulus(c)


# ---------------------------------------------------------------- engines


class _Ctx:
    __slots__ = ("kind", "p", "pninv", "r2", "crt")

    def __init__(self, p):
        self.p = p
        self.crt = None
        if p < _SMALL_LIMIT:
            self.kind = "small"
            self.pninv = self.r2 = None
        elif p < _MONT_LIMIT and p % 2 == 1:
            self.kind = "mont"
            self.pninv = np.uint64((-pow(p, -1, 1 << 64)) % (1 << 64))
            self.r2 = np.uint64(pow(2, 128, p))
        else:
            self.kind = "big"
            self.pninv = self.r2 = None


_CTX_CACHE = {}


def _ctx(p):
    c = _CTX_CACHE.get(p)
    if c is None:
        c = _CTX_CACHE[p] = _Ctx(p)
    return c


def _crt_primes_desc(count):
    out = []
    n = (1 << 21) - 1
    while len(out) < count:
        if is_prime(n):
            out.append(n)
        n -= 2
    return out


def _crt_setup(ctx):
    if ctx.crt is not None:
        return ctx.crt
    p = ctx.p
    bound = _CRT_MAX_INNER * (p - 1) * (p - 1)
    primes = []
    prod = 1
    pool = _crt_primes_desc(12)
    for q in pool:
        primes.append(q)
        prod *= q
        if prod > bound:
            break
    else:
        raise ValueError("modulus too large for the CRT matmul path")
    t = len(primes)
    qinv = [0] * t
    cjk = np.zeros((t, t), dtype=np.float64)  # cjk[j,k] = prod(q_0..q_{j-1}) mod q_k
    wm = [0] * t  # to_mont(prod(q_0..q_{k-1}) mod p), digit weights
    acc = 1
    for j in range(t):
        for k in range(t):
            cjk[j, k] = acc % primes[k]
        if j:
            qinv[j] = pow(acc % primes[j], -1, primes[j])
        wm[j] = ((acc % p) << 64) % p
        acc *= primes[j]
    ctx.crt = (
        np.array(primes, dtype=np.float64),
        np.array([1.0 / q for q in primes], dtype=np.float64),
        np.array([(1 << 32) % q for q in primes], dtype=np.float64),
        cjk,
        np.array(qinv, dtype=np.float64),
        np.array(wm, dtype=np.uint64),
    )
    return ctx.crt


def _as_i64(a):
    return a.view(np.int64)


def _crt_matmul(a, b, ctx):
    qf, qrec, c32, cjk, qinv, wm = _crt_setup(ctx)
    t = qf.shape[0]
    r, inner = a.shape
    c = b.shape[1]
    if inner > _CRT_MAX_INNER:
        raise ValueError("inner dimension exceeds exact-BLAS bound")
    af = np.empty((t, r * inner), dtype=np.float64)
    bf = np.empty((t, inner * c), dtype=np.float64)
    _k.residues_f8(a.ravel(), qf, qrec, c32, af)
    _k.residues_f8(b.ravel(), qf, qrec, c32, bf)
    res = np.empty((t, r * c), dtype=np.float64)
    for j in range(t):
        # raw accumulation stays below 2**53, reduced inside the combiner
        np.matmul(
            af[j].reshape(r, inner),
            bf[j].reshape(inner, c),
            out=res[j].reshape(r, c),
        )
    out = np.empty(r * c, dtype=np.uint64)
    s = np.empty(r * c, dtype=np.float64)
    _k.garner_combine(res, qf, qrec, cjk, qinv, wm, s, out, np.uint64(ctx.p), ctx.pninv)
    return out.reshape(r, c)


def _matmul_raw(a, b, ctx):
    r, inner = a.shape
    c = b.shape[1]
    if ctx.kind == "big":
        return _big_matmul(a, b, ctx.p)
    if ctx.kind == "small":
        out = np.empty((r, c), dtype=np.int64)
        _k.small_matmul(_as_i64(a), _as_i64(b), out, np.int64(ctx.p))
        return out.view(np.uint64)
    if inner >= _CRT_MIN_INNER and r >= _CRT_MIN_OUT and c >= _CRT_MIN_OUT:
        return _crt_matmul(a, b, ctx)
    out = np.empty((r, c), dtype=np.uint64)
    _k.mont_matmul(a, b, out, np.uint64(ctx.p), ctx.pninv, ctx.r2)
    return out


def _big_matmul(a, b, p):
    out = a.dot(b)
    return out % p


def _gauss_inv_raw(a, ctx):
    d = a.shape[0]
    if ctx.kind == "big":
        return _big_gauss_inv(a, ctx.p)
    if ctx.kind == "small":
        w = np.zeros((d, 2 * d), dtype=np.int64)
        w[:, :d] = _as_i64(a)
        w[np.arange(d), d + np.arange(d)] = 1
        if not _k.small_gauss_inv(w, np.int64(ctx.p)):
            raise SingularMatrix(f"{d}x{d} matrix is singular mod {ctx.p}")
        return np.ascontiguousarray(w[:, d:]).view(np.uint64)
    w = np.zeros((d, 2 * d), dtype=np.uint64)
    w[:, :d] = a
    w[np.arange(d), d + np.arange(d)] = 1
    if not _k.mont_gauss_inv(w, np.uint64(ctx.p), ctx.pninv, ctx.r2):
        raise SingularMatrix(f"{d}x{d} matrix is singular mod {ctx.p}")
    return np.ascontiguousarray(w[:, d:])


def _big_gauss_inv(a, p):
    d = a.shape[0]
    w = [[int(a[i, j]) for j in range(d)] + [int(i == j) for j in range(d)] for i in range(d)]
    for col in range(d):
        piv = next((r for r in range(col, d) if w[r][col] % p != 0), None)
        if piv is None:
            raise SingularMatrix(f"{d}x{d} matrix is singular mod {p}")
        w[col], w[piv] = w[piv], w[col]
        inv = pow(w[col][col], -1, p)
        w[col] = [(x * inv) % p for x in w[col]]
        for r in range(d):
            if r != col and w[r][col]:
                f = w[r][col]
                w[r] = [(x - f * y) % p for x, y in zip(w[r], w[col])]
    out = np.empty((d, d), dtype=object)
    for i in range(d):
        out[i, :] = w[i][d:]
    return out


def _sub_mod(a, b, p):
    if isinstance(a, np.ndarray) and a.dtype == object:
        return (a - b) % p
    return (a + (np.uint64(p) - b)) % np.uint64(p)


def _add_mod(a, b, p):
    if isinstance(a, np.ndarray) and a.dtype == object:
        return (a + b) % p
    s = a + b
    return np.where(s >= np.uint64(p), s - np.uint64(p), s)


def _inv_raw(a, ctx):
    d = a.shape[0]
    if ctx.kind == "big" or d < _SCHUR_MIN:
        return _gauss_inv_raw(a, ctx)
    h = d // 2
    A = np.ascontiguousarray(a[:h, :h])
    B = np.ascontiguousarray(a[:h, h:])
    C = np.ascontiguousarray(a[h:, :h])
    D = np.ascontiguousarray(a[h:, h:])
    try:
        Ai = _inv_raw(A, ctx)
    except SingularMatrix:
        # leading block singular but the full matrix may not be
        return _gauss_inv_raw(a, ctx)
    X = _matmul_raw(Ai, B, ctx)
    Y = _matmul_raw(C, Ai, ctx)
    S = _sub_mod(D, _matmul_raw(C, X, ctx), ctx.p)
    Si = _inv_raw(np.ascontiguousarray(S), ctx)  # singular S => singular input
    XSi = _matmul_raw(X, Si, ctx)
    out = np.empty((d, d), dtype=np.uint64)
    out[:h, :h] = _add_mod(Ai, _matmul_raw(XSi, Y, ctx), ctx.p)
    out[:h, h:] = _neg_mod(XSi, ctx.p)
    out[h:, :h] = _neg_mod(_matmul_raw(Si, Y, ctx), ctx.p)
    out[h:, h:] = Si
    return out


def _neg_mod(a, p):
    if isinstance(a, np.ndarray) and a.dtype == object:
        return (-a) % p
    return np.where(a == 0, a, np.uint64(p) - a)


# ---------------------------------------------------------------- values


def _coerce(entries, p, shape):
    src = np.asarray(entries, dtype=object).reshape(shape)
    flat = [int(x) % p for x in src.ravel()]
    if p < _MONT_LIMIT:
        arr = np.array(flat, dtype=np.uint64).reshape(shape)
    else:
        arr = np.empty(shape, dtype=object)
        arr.ravel()[:] = flat
    arr.setflags(write=False)
    return arr


class FieldMatrix:
    """Dense matrix over Z_p; entries reduced to [0, p), immutable."""

    __slots__ = ("a", "modulus")

    def __init__(self, entries, modulus, _raw=False):
        p = modulus.p
        if _raw:
            entries.setflags(write=False)
            object.__setattr__(self, "a", entries)
        else:
            object.__setattr__(self, "a", _coerce(entries, p, np.shape(entries)))
        object.__setattr__(self, "modulus", modulus)
        if self.a.ndim != 2:
            raise ValueError("matrix entries must be two-dimensional")

    def __setattr__(self, name, value):
        raise AttributeError("FieldMatrix is immutable")

    @property
    def rows(self):
        return self.a.shape[0]

    @property
    def cols(self):
        return self.a.shape[1]

    def __eq__(self, other):
        return (
            isinstance(other, FieldMatrix)
            and self.modulus.p == other.modulus.p
            and self.a.shape == other.a.shape
            and bool(np.all(self.a == other.a))
        )

    def __repr__(self):
        return f"FieldMatrix({self.rows}x{self.cols} mod {self.modulus.p})"

    def to_lists(self):
        return [[int(x) for x in row] for row in self.a]


class FieldVector:
    """Dense vector over Z_p; entries reduced to [0, p), immutable."""

    __slots__ = ("a", "modulus")

    def __init__(self, entries, modulus, _raw=False):
        p = modulus.p
        if _raw:
            entries.setflags(write=False)
            object.__setattr__(self, "a", entries)
        else:
            object.__setattr__(self, "a", _coerce(entries, p, (len(entries),)))
        object.__setattr__(self, "modulus", modulus)

    def __setattr__(self, name, value):
        raise AttributeError("FieldVector is immutable")

    @property
    def dim(self):
        return self.a.shape[0]

    def __eq__(self, other):
        return (
            isinstance(other, FieldVector)
            and self.modulus.p == other.modulus.p
            and self.dim == other.dim
            and bool(np.all(self.a == other.a))
        )

    def __repr__(self):
        return f"FieldVector(dim {self.dim} mod {self.modulus.p})"

    def to_list(self):
        return [int(x) for x in self.a]


def identity(dim, modulus):
    if modulus.p < _MONT_LIMIT:
        return FieldMatrix(np.eye(dim, dtype=np.uint64), modulus, _raw=True)
    e = np.empty((dim, dim), dtype=object)
    for i in range(dim):
        for j in range(dim):
            e[i, j] = int(i == j)
    return FieldMatrix(e, modulus, _raw=True)


def _check_same_modulus(x, y):
    if x.modulus.p != y.modulus.p:
        raise ValueError(f"modulus mismatch: {x.modulus.p} vs {y.modulus.p}")


def mat_mul(a, b):
    _check_same_modulus(a, b)
    if a.cols != b.rows:
        raise ValueError(f"dimension mismatch: {a.rows}x{a.cols} times {b.rows}x{b.cols}")
    return FieldMatrix(_matmul_raw(a.a, b.a, _ctx(a.modulus.p)), a.modulus, _raw=True)


def mat_inv(m):
    if m.rows != m.cols:
        raise ValueError("only square matrices have inverses")
    return FieldMatrix(_inv_raw(m.a, _ctx(m.modulus.p)), m.modulus, _raw=True)


def mat_sub(a, b):
    _check_same_modulus(a, b)
    if a.a.shape != b.a.shape:
        raise ValueError("shape mismatch in subtraction")
    return FieldMatrix(_sub_mod(a.a, b.a, a.modulus.p), a.modulus, _raw=True)


def vec_mat(v, m):
    _check_same_modulus(v, m)
    if v.dim != m.rows:
        raise ValueError("dimension mismatch in vector-matrix product")
    ctx = _ctx(v.modulus.p)
    if ctx.kind == "big":
        return FieldVector(v.a.dot(m.a) % ctx.p, v.modulus, _raw=True)
    out = np.empty(m.cols, dtype=np.uint64)
    if ctx.kind == "small":
        o = out.view(np.int64)
        _k.small_vecmat(_as_i64(v.a), _as_i64(m.a), o, np.int64(ctx.p))
    else:
        _k.mont_vecmat(v.a, m.a, out, np.uint64(ctx.p), ctx.pninv, ctx.r2)
    return FieldVector(out, v.modulus, _raw=True)


def mat_vec(m, v):
    _check_same_modulus(m, v)
    if m.cols != v.dim:
        raise ValueError("dimension mismatch in matrix-vector product")
    ctx = _ctx(v.modulus.p)
    if ctx.kind == "big":
        return FieldVector(m.a.dot(v.a) % ctx.p, v.modulus, _raw=True)
    out = np.empty(m.rows, dtype=np.uint64)
    if ctx.kind == "small":
        o = out.view(np.int64)
        _k.small_matvec(_as_i64(m.a), _as_i64(v.a), o, np.int64(ctx.p))
    else:
        _k.mont_matvec(m.a, v.a, out, np.uint64(ctx.p), ctx.pninv, ctx.r2)
    return FieldVector(out, v.modulus, _raw=True)


def dot(u, v):
    _check_same_modulus(u, v)
    if u.dim != v.dim:
        raise ValueError("dimension mismatch in dot product")
    ctx = _ctx(u.modulus.p)
    if ctx.kind == "big":
        return int(sum(int(a) * int(b) for a, b in zip(u.a, v.a)) % ctx.p)
    if ctx.kind == "small":
        return int(_k.small_dot(_as_i64(u.a), _as_i64(v.a), np.int64(ctx.p)))
    return int(_k.mont_dot(u.a, v.a, np.uint64(ctx.p), ctx.pninv, ctx.r2))


def scale_rows(diag, m):
    """Row r of the result is diag[r] * m[r, :]; the block-diagonal shortcut."""
    _check_same_modulus(diag, m)
    if diag.dim > m.rows:
        raise ValueError("more scaling factors than rows")
    ctx = _ctx(m.modulus.p)
    sub = np.ascontiguousarray(m.a[: diag.dim])
    if ctx.kind == "big":
        out = (diag.a[:, None] * sub) % ctx.p
    else:
        out = np.empty_like(sub)
        if ctx.kind == "small":
            _k.small_scale_rows(
                _as_i64(diag.a), _as_i64(sub), out.view(np.int64), np.int64(ctx.p)
            )
        else:
            _k.mont_scale_rows(diag.a, sub, out, np.uint64(ctx.p), ctx.pninv, ctx.r2)
    if diag.dim == m.rows:
        return FieldMatrix(out, m.modulus, _raw=True)
    full = np.concatenate([out, m.a[diag.dim :]])
    return FieldMatrix(full, m.modulus, _raw=True)


def ew_mul(u, v):
    _check_same_modulus(u, v)
    if u.dim != v.dim:
        raise ValueError("dimension mismatch in elementwise product")
    ctx = _ctx(u.modulus.p)
    if ctx.kind == "big":
        return FieldVector((u.a * v.a) % ctx.p, u.modulus, _raw=True)
    out = np.empty(u.dim, dtype=np.uint64)
    if ctx.kind == "small":
        _k.small_ew_mul(_as_i64(u.a), _as_i64(v.a), out.view(np.int64), np.int64(ctx.p))
    else:
        _k.mont_ew_mul(u.a, v.a, out, np.uint64(ctx.p), ctx.pninv, ctx.r2)
    return FieldVector(out, u.modulus, _raw=True)


# ---------------------------------------------------------------- sampling


def rand_matrix(modulus, rows, cols, rng, nonzero=False):
    p = modulus.p
    lo = 1 if nonzero else 0
    if p < _MONT_LIMIT:
        arr = rng.np.integers(lo, p, size=(rows, cols), dtype=np.uint64)
        return FieldMatrix(arr, modulus, _raw=True)
    e = np.empty((rows, cols), dtype=object)
    for i in range(rows):
        for j in range(cols):
            e[i, j] = rng.py.randrange(lo, p)
    return FieldMatrix(e, modulus, _raw=True)


def rand_vector(modulus, dim, rng, nonzero=False):
    p = modulus.p
    lo = 1 if nonzero else 0
    if p < _MONT_LIMIT:
        arr = rng.np.integers(lo, p, size=dim, dtype=np.uint64)
        return FieldVector(arr, modulus, _raw=True)
    return FieldVector([rng.py.randrange(lo, p) for _ in range(dim)], modulus)


def sample_invertible(modulus, dim, rng):
    """Uniform invertible matrix with its inverse, by rejection.

    The rank check is the Gauss-Jordan elimination run by mat_inv itself: a
    singular draw surfaces as SingularMatrix and is thrown away. Expected
    retries are O(1) for p >= 5 and still modest at p = 2.
    """
    while True:
        m = rand_matrix(modulus, dim, dim, rng)
        try:
            return m, mat_inv(m)
        except SingularMatrix:
            continue
