"""numba kernels for exact arithmetic mod p.

Two regimes share this file:

* "small" kernels: p < 2**25, plain int64 arithmetic. Products stay below
  2**50 and row sums below 2**62, so nothing overflows before the final
  reduction.
* "mont" kernels: odd p < 2**63, Montgomery arithmetic with R = 2**64.
  Values live as plain residues at the call boundary; matmul-style kernels
  accumulate a*b*R^-1 terms and fix the stray R^-1 with one multiply by
  R^2 mod p at the end, so no domain conversion passes are needed.

Everything here is deliberately free of python objects: callers in zmod.py
own validation, dispatch and the arbitrary-precision fallback.
"""

import numpy as np
from numba import njit, uint64

U64_1 = np.uint64(1)
U64_32 = np.uint64(32)
U64_MASK32 = np.uint64(0xFFFFFFFF)


@njit(cache=True, inline="always")
def _mul128(a, b):
    # 64x64 -> 128 via 32-bit limbs; uint64 wraps like C here.
    alo = a & U64_MASK32
    ahi = a >> U64_32
    blo = b & U64_MASK32
    bhi = b >> U64_32
    ll = alo * blo
    lh = alo * bhi
    hl = ahi * blo
    hh = ahi * bhi
    mid = (ll >> U64_32) + (lh & U64_MASK32) + (hl & U64_MASK32)
    lo = (mid << U64_32) | (ll & U64_MASK32)
    hi = hh + (lh >> U64_32) + (hl >> U64_32) + (mid >> U64_32)
    return hi, lo


@njit(cache=True, inline="always")
def _redc(hi, lo, p, pninv):
    # Montgomery reduction of the 128-bit value (hi, lo); pninv = -p^-1 mod 2^64.
    m = lo * pninv
    mphi, mplo = _mul128(m, p)
    carry = U64_1 if lo != np.uint64(0) else np.uint64(0)
    t = hi + mphi + carry
    if t >= p:
        t -= p
    return t


@njit(cache=True, inline="always")
def _mont_mul(a, b, p, pninv):
    hi, lo = _mul128(a, b)
    return _redc(hi, lo, p, pninv)


@njit(cache=True, inline="always")
def _mont_pow(am, e, p, pninv, mont_one):
    # am in Montgomery domain -> am^e in Montgomery domain.
    res = mont_one
    base = am
    while e > np.uint64(0):
        if e & U64_1:
            res = _mont_mul(res, base, p, pninv)
        base = _mont_mul(base, base, p, pninv)
        e >>= U64_1
    return res


@njit(cache=True)
def mont_matmul(a, b, out, p, pninv, r2):
    n, k = a.shape
    m = b.shape[1]
    for i in range(n):
        for j in range(m):
            acc = np.uint64(0)
            for t in range(k):
                term = _mont_mul(a[i, t], b[t, j], p, pninv)
                acc += term
                if acc >= p:
                    acc -= p
            out[i, j] = _mont_mul(acc, r2, p, pninv)


@njit(cache=True)
def mont_vecmat(v, a, out, p, pninv, r2):
    k, m = a.shape
    for j in range(m):
        acc = np.uint64(0)
        for t in range(k):
            term = _mont_mul(v[t], a[t, j], p, pninv)
            acc += term
            if acc >= p:
                acc -= p
        out[j] = _mont_mul(acc, r2, p, pninv)


@njit(cache=True)
def mont_matvec(a, v, out, p, pninv, r2):
    n, k = a.shape
    for i in range(n):
        acc = np.uint64(0)
        for t in range(k):
            term = _mont_mul(a[i, t], v[t], p, pninv)
            acc += term
            if acc >= p:
                acc -= p
        out[i] = _mont_mul(acc, r2, p, pninv)


@njit(cache=True)
def mont_dot(u, v, p, pninv, r2):
    acc = np.uint64(0)
    for t in range(u.shape[0]):
        term = _mont_mul(u[t], v[t], p, pninv)
        acc += term
        if acc >= p:
            acc -= p
    return _mont_mul(acc, r2, p, pninv)


@njit(cache=True)
def mont_ew_mul(a, b, out, p, pninv, r2):
    # elementwise a*b mod p on flat views
    for i in range(a.shape[0]):
        am = _mont_mul(a[i], r2, p, pninv)
        out[i] = _mont_mul(am, b[i], p, pninv)


@njit(cache=True)
def mont_scale_rows(diag, a, out, p, pninv, r2):
    # out[r, :] = diag[r] * a[r, :] mod p
    n, m = a.shape
    for r in range(n):
        dm = _mont_mul(diag[r], r2, p, pninv)
        for c in range(m):
            out[r, c] = _mont_mul(dm, a[r, c], p, pninv)


@njit(cache=True)
def mont_gauss_inv(w, p, pninv, r2):
    """In-place Gauss-Jordan on the augmented block w = [A | I], d x 2d.

    Returns 1 and leaves the inverse in the right half, or returns 0 when a
    pivot column has no nonzero entry (A singular).
    """
    d = w.shape[0]
    mont_one = _mont_mul(U64_1, r2, p, pninv)
    # to Montgomery domain once; every inner product then costs one REDC
    for i in range(d):
        for j in range(2 * d):
            w[i, j] = _mont_mul(w[i, j], r2, p, pninv)
    pe = p - np.uint64(2)
    for col in range(d):
        piv = -1
        for r in range(col, d):
            if w[r, col] != np.uint64(0):
                piv = r
                break
        if piv < 0:
            return 0
        if piv != col:
            for j in range(2 * d):
                tmp = w[col, j]
                w[col, j] = w[piv, j]
                w[piv, j] = tmp
        inv = _mont_pow(w[col, col], pe, p, pninv, mont_one)
        for j in range(col, 2 * d):
            w[col, j] = _mont_mul(w[col, j], inv, p, pninv)
        for r in range(d):
            if r == col:
                continue
            f = w[r, col]
            if f == np.uint64(0):
                continue
            for j in range(col, 2 * d):
                sub = _mont_mul(f, w[col, j], p, pninv)
                cur = w[r, j]
                if cur >= sub:
                    w[r, j] = cur - sub
                else:
                    w[r, j] = cur + p - sub
    for i in range(d):
        for j in range(d, 2 * d):
            w[i, j] = _mont_mul(w[i, j], U64_1, p, pninv)
    return 1


@njit(cache=True, inline="always")
def _small_pow(a, e, p):
    res = np.int64(1)
    base = a % p
    while e > 0:
        if e & 1:
            res = (res * base) % p
        base = (base * base) % p
        e >>= 1
    return res


@njit(cache=True)
def small_matmul(a, b, out, p):
    n, k = a.shape
    m = b.shape[1]
    for i in range(n):
        for j in range(m):
            acc = np.int64(0)
            for t in range(k):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc % p


@njit(cache=True)
def small_vecmat(v, a, out, p):
    k, m = a.shape
    for j in range(m):
        acc = np.int64(0)
        for t in range(k):
            acc += v[t] * a[t, j]
        out[j] = acc % p


@njit(cache=True)
def small_matvec(a, v, out, p):
    n, k = a.shape
    for i in range(n):
        acc = np.int64(0)
        for t in range(k):
            acc += a[i, t] * v[t]
        out[i] = acc % p


@njit(cache=True)
def small_dot(u, v, p):
    acc = np.int64(0)
    for t in range(u.shape[0]):
        acc += u[t] * v[t]
    return acc % p


@njit(cache=True)
def small_ew_mul(a, b, out, p):
    for i in range(a.shape[0]):
        out[i] = (a[i] * b[i]) % p


@njit(cache=True)
def small_scale_rows(diag, a, out, p):
    n, m = a.shape
    for r in range(n):
        dv = diag[r]
        for c in range(m):
            out[r, c] = (dv * a[r, c]) % p


@njit(cache=True)
def small_gauss_inv(w, p):
    # int64 twin of mont_gauss_inv; w = [A | I], values in [0, p), p < 2**25
    d = w.shape[0]
    for col in range(d):
        piv = -1
        for r in range(col, d):
            if w[r, col] != 0:
                piv = r
                break
        if piv < 0:
            return 0
        if piv != col:
            for j in range(2 * d):
                tmp = w[col, j]
                w[col, j] = w[piv, j]
                w[piv, j] = tmp
        inv = _small_pow(w[col, col], p - 2, p)
        for j in range(col, 2 * d):
            w[col, j] = (w[col, j] * inv) % p
        for r in range(d):
            if r == col:
                continue
            f = w[r, col]
            if f == 0:
                continue
            for j in range(col, 2 * d):
                w[r, j] = (w[r, j] - f * w[col, j]) % p
    for i in range(d):
        for j in range(d, 2 * d):
            if w[i, j] < 0:
                w[i, j] += p
    return 1


@njit(cache=True, inline="always")
def _fmod_q(x, qf, qrec):
    # exact x mod q for 0 <= x < 2**53, q < 2**21, via the reciprocal trick
    r = x - np.floor(x * qrec) * qf
    if r >= qf:
        r -= qf
    elif r < 0.0:
        r += qf
    return r


@njit(cache=True)
def residues_f8(a, qf, qrec, c32, out):
    """Residues of uint64 values modulo each small prime, as exact float64.

    a: (n,) uint64 flat values < 2**63; qf/qrec/c32: per-prime q, 1/q and
    2**32 mod q as float64; out: (t, n) float64 residues.

    Entries loop innermost so the hot passes vectorize.
    """
    t = qf.shape[0]
    n = a.shape[0]
    for k in range(t):
        fq = qf[k]
        fr = qrec[k]
        fc = c32[k]
        for i in range(n):
            hi = np.float64(a[i] >> U64_32)
            lo = np.float64(a[i] & U64_MASK32)
            out[k, i] = _fmod_q(hi * fc + lo, fq, fr)


@njit(cache=True)
def garner_combine(res, qf, qrec, cjk, qinv, wm, s, out, p, pninv):
    """Mixed-radix CRT recombination, reduced mod p.

    res:  (t, n) float64, res[k] holding exact integers < 2**53 that are
          only guaranteed correct modulo q_k (raw BLAS accumulations);
          overwritten in place with the mixed-radix digits
    cjk:  cjk[j, k] = (q_0*...*q_{j-1}) mod q_k, float64
    qinv: qinv[k] = (q_0*...*q_{k-1})^-1 mod q_k, float64
    wm:   to_mont((q_0*...*q_{k-1}) mod p), weight of digit k
    s:    (n,) float64 scratch
    out:  (n,) uint64 values mod p

    Digit arithmetic stays in float64: digit sums top out below 2**45.
    """
    t = qf.shape[0]
    n = out.shape[0]
    for k in range(t):
        fq = qf[k]
        fr = qrec[k]
        for i in range(n):
            res[k, i] = _fmod_q(res[k, i], fq, fr)
    for k in range(1, t):
        for i in range(n):
            s[i] = 0.0
        for j in range(k):
            c = cjk[j, k]
            for i in range(n):
                s[i] += res[j, i] * c
        fq = qf[k]
        fr = qrec[k]
        fi = qinv[k]
        for i in range(n):
            x = res[k, i] - _fmod_q(s[i], fq, fr)
            if x < 0.0:
                x += fq
            res[k, i] = _fmod_q(x * fi, fq, fr)
    for i in range(n):
        x = np.uint64(res[0, i])
        for k in range(1, t):
            x += _mont_mul(np.uint64(res[k, i]), wm[k], p, pninv)
            if x >= p:
                x -= p
        out[i] = x


@njit(cache=True)
def perm_chain_products(inp, pid0, pid1, xs, table, out):
    """Fold the step permutations of a width-5 program over many inputs.

    inp: (n,) 0-based input index per step; pid0/pid1: (n,) permutation ids;
    xs: (m, ell) 0/1 input rows; table: (120, 120) composition table with
    identity at id 0; out: (m,) product ids.
    """
    n = inp.shape[0]
    m = xs.shape[0]
    for r in range(m):
        acc = np.int64(0)
        for i in range(n):
            if xs[r, inp[i]] != 0:
                s = pid1[i]
            else:
                s = pid0[i]
            acc = table[acc, s]
        out[r] = acc
