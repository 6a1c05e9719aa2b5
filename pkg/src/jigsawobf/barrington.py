"""Circuits to oblivious matrix branching programs over S5.

A program of length n reads one input bit per step and picks one of two
permutation matrices; the product over all steps lands on the accept-zero
matrix (the identity) or the accept-one matrix (a 5-cycle) when the program
computes the corresponding output bit.

The compiler works over permutations directly and keeps, for every compiled
wire, a conjugacy-class *demand*: the wire's subprogram multiplies out to
the identity or to a designated element c of the demanded class. Three
classes suffice and close under the gate constructions used here:

  "5"  5-cycles                  (the root demand; accept-one lives here)
  "3"  3-cycles
  "d"  double transpositions, shape (2,2)

AND uses the commutator word [g, h] = g h g^-1 h^-1, which is the identity
unless both factors are non-identity; its witnesses land in class "3" or
"5" from "d" children, and in "d" from "3" children. XOR uses a four-piece
word s u v w with s v = u w = s u v w^-1... (see the table checks below:
the defining identities are asserted at import). The two constructions
share the [left right left right] shape, so a step's source input depends
only on the circuit's shape, never on its opcodes, and every binary gate
doubles-and-doubles: length(compile(c)) <= 4**depth(c).

NOT is free: it folds the inverse of the child's element into the child's
last step, flipping which bit maps to the identity product.
"""

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from . import _kernels as _k
from .circuit import Circuit

IDENT5 = (0, 1, 2, 3, 4)
SIGMA5 = (1, 2, 3, 4, 0)  # reference 5-cycle
SIGMA5_SQ = (2, 3, 4, 0, 1)  # its square, representing the other even class

UNDEF = "undef"


def perm_mul(a, b):
    """Apply a, then b."""
    return tuple(b[a[i]] for i in range(len(a)))


def perm_inv(a):
    out = [0] * len(a)
    for i, j in enumerate(a):
        out[j] = i
    return tuple(out)


def perm_to_matrix(perm):
    """Row r has its 1 in column perm[r]; matrix products then compose
    permutations in application order."""
    w = len(perm)
    return tuple(tuple(int(perm[r] == c) for c in range(w)) for r in range(w))


def matrix_to_perm(m):
    w = len(m)
    perm = []
    for row in m:
        if len(row) != w or sum(row) != 1 or any(x not in (0, 1) for x in row):
            raise ValueError("not a permutation matrix")
        perm.append(row.index(1))
    if sorted(perm) != list(range(w)):
        raise ValueError("not a permutation matrix")
    return tuple(perm)


def cycle_type(a):
    seen = [False] * len(a)
    out = []
    for s in range(len(a)):
        if seen[s]:
            continue
        ln, x = 0, s
        while not seen[x]:
            seen[x] = True
            x = a[x]
            ln += 1
        if ln > 1:
            out.append(ln)
    return tuple(sorted(out))


# ------------------------------------------------------------- gadget tables

# Leaf element per class: a wire of value v multiplies out to leaf**v.
_LEAF = {
    "d": (1, 0, 3, 2, 4),
    "3": (1, 2, 0, 3, 4),
    "5": SIGMA5,
}

# AND witness per target class: (g, h, result) with [g, h] = result and the
# child class demands. Found once by exhaustive search over S5 in
# enumeration order; frozen here and re-verified at import.
_AND_W = {
    "5": (((0, 2, 1, 4, 3), (1, 0, 3, 2, 4), (3, 4, 1, 2, 0)), ("d", "d")),
    "3": (((0, 2, 1, 4, 3), (1, 0, 2, 4, 3), (2, 0, 1, 3, 4)), ("d", "d")),
    "d": (((0, 1, 3, 4, 2), (0, 2, 3, 1, 4), (0, 4, 3, 2, 1)), ("3", "3")),
}

# XOR witness per target class: pieces (s, u, v, w, result) for the word
# s^a u^b v^a w^b over child values a, b. The identities that make the word
# compute XOR: s v = result, u w = result, s u v w = identity; the (1,1)
# case follows because s = u and v = w are involutions here.
_XOR_W = {
    "5": (
        ((0, 2, 1, 4, 3), (0, 2, 1, 4, 3), (1, 0, 3, 2, 4), (1, 0, 3, 2, 4), (1, 3, 0, 4, 2)),
        ("d", "d"),
    ),
    "3": (
        ((0, 2, 1, 4, 3), (0, 2, 1, 4, 3), (1, 0, 2, 4, 3), (1, 0, 2, 4, 3), (1, 2, 0, 3, 4)),
        ("d", "d"),
    ),
    "d": (
        ((0, 2, 1, 4, 3), (0, 2, 1, 4, 3), (0, 3, 4, 1, 2), (0, 3, 4, 1, 2), (0, 4, 3, 2, 1)),
        ("d", "d"),
    ),
}

_CLASS_SHAPE = {"d": (2, 2), "3": (3,), "5": (5,)}


def _verify_tables():
    for cls, leaf in _LEAF.items():
        assert cycle_type(leaf) == _CLASS_SHAPE[cls]
    for cls, ((g, h, r), (cl, cr)) in _AND_W.items():
        assert cycle_type(r) == _CLASS_SHAPE[cls]
        assert cycle_type(g) == _CLASS_SHAPE[cl] and cycle_type(h) == _CLASS_SHAPE[cr]
        comm = perm_mul(perm_mul(perm_mul(g, h), perm_inv(g)), perm_inv(h))
        assert comm == r
    for cls, ((s, u, v, w, r), (cl, cr)) in _XOR_W.items():
        assert cycle_type(r) == _CLASS_SHAPE[cls]
        assert cycle_type(s) == _CLASS_SHAPE[cl] and cycle_type(u) == _CLASS_SHAPE[cr]
        assert perm_mul(s, v) == r and perm_mul(u, w) == r
        assert perm_mul(perm_mul(perm_mul(s, u), v), w) == IDENT5
        assert s == u and v == w and perm_mul(s, s) == IDENT5


_verify_tables()


def conjugator(x, y):
    """theta with theta^-1 x theta = y, for same-cycle-type x, y.

    Canonical choice: cycles rotated to start at their minimum and sorted
    by (length, start), then matched pointwise.
    """

    def canon_cycles(a):
        seen = [False] * 5
        cs = []
        for s in range(5):
            if seen[s]:
                continue
            c, t = [], s
            while not seen[t]:
                seen[t] = True
                c.append(t)
                t = a[t]
            cs.append(c[c.index(min(c)) :] + c[: c.index(min(c))])
        cs.sort(key=lambda c: (len(c), c[0]))
        return cs

    cx, cy = canon_cycles(x), canon_cycles(y)
    th = [None] * 5
    for a, b in zip(cx, cy):
        if len(a) != len(b):
            raise ValueError("cycle types differ")
        for i in range(len(a)):
            th[a[i]] = b[i]
    return tuple(th)


def perm_parity(p):
    """0 for even permutations, 1 for odd."""
    seen, odd = [False] * len(p), 0
    for s in range(len(p)):
        if seen[s]:
            continue
        ln, x = 0, s
        while not seen[x]:
            seen[x] = True
            x = p[x]
            ln += 1
        odd ^= (ln - 1) & 1
    return odd


def conjugator_even(x, y):
    """Like conjugator, but the result is an even permutation.

    If the canonical conjugator is odd it is corrected by the first odd
    centralizer element of y in enumeration order. Double transpositions
    and 3-cycles always have one; the 5-cycle class splits in the even
    subgroup, so there the correction can be impossible.
    """
    th = conjugator(x, y)
    if perm_parity(th) == 0:
        return th
    for z in sorted(permutations(range(5))):
        if perm_parity(z) == 1 and perm_mul(z, y) == perm_mul(y, z):
            return perm_mul(th, z)
    raise ValueError("no even conjugator exists for this pair")


# ---------------------------------------------------------------- programs


@dataclass(frozen=True)
class BranchingProgram:
    """Steps hold permutations; the 0/1 matrices are derived views."""

    width: int
    input_count: int
    steps: tuple  # ((inp 1-based, perm0, perm1), ...)
    accept_zero: tuple
    accept_one: tuple

    def __post_init__(self):
        w = self.width
        ref = tuple(range(w))
        if self.input_count < 1:
            raise ValueError("need at least one input")
        for perm in (self.accept_zero, self.accept_one):
            if tuple(sorted(perm)) != ref:
                raise ValueError("accept element is not a permutation")
        if self.accept_zero == self.accept_one:
            raise ValueError("accept elements must differ")
        for i, (j, p0, p1) in enumerate(self.steps, start=1):
            if not (1 <= j <= self.input_count):
                raise ValueError(f"step {i}: input index {j} out of range")
            for perm in (p0, p1):
                if tuple(sorted(perm)) != ref:
                    raise ValueError(f"step {i}: not a permutation")

    @property
    def length(self):
        return len(self.steps)

    def step_matrix(self, i, b):
        """0/1 matrix of step i (1-based) for input bit b."""
        return perm_to_matrix(self.steps[i - 1][2 if b else 1])

    def accept_matrix(self, b):
        return perm_to_matrix(self.accept_one if b else self.accept_zero)

    @classmethod
    def from_matrices(cls, input_count, steps, accept_zero, accept_one):
        """Build from (inp, M0, M1) triples of 0/1 permutation matrices."""
        conv = tuple(
            (j, matrix_to_perm(m0), matrix_to_perm(m1)) for j, m0, m1 in steps
        )
        width = len(accept_zero)
        return cls(
            width,
            input_count,
            conv,
            matrix_to_perm(accept_zero),
            matrix_to_perm(accept_one),
        )


def eval_bp(bp, x):
    """Product of the selected step permutations: 0 on accept-zero, 1 on
    accept-one, UNDEF anywhere else."""
    bits = [int(b) for b in x]
    if len(bits) != bp.input_count or any(b not in (0, 1) for b in bits):
        raise ValueError(f"need {bp.input_count} bits, got {x!r}")
    acc = tuple(range(bp.width))
    for j, p0, p1 in bp.steps:
        acc = perm_mul(acc, p1 if bits[j - 1] else p0)
    if acc == bp.accept_zero:
        return 0
    if acc == bp.accept_one:
        return 1
    return UNDEF


def input_sets(bp):
    """I_j = steps reading input j, 1-based both ways; the I_j partition
    the step positions."""
    out = {j: set() for j in range(1, bp.input_count + 1)}
    for i, (j, _, _) in enumerate(bp.steps, start=1):
        out[j].add(i)
    return {j: frozenset(s) for j, s in out.items()}


def pad_to(bp, target_length):
    """Append inert steps (input 1, identity either way) up to the target."""
    if target_length < bp.length:
        raise ValueError("cannot pad to a shorter length")
    ident = tuple(range(bp.width))
    extra = tuple((1, ident, ident) for _ in range(target_length - bp.length))
    return BranchingProgram(
        bp.width, bp.input_count, bp.steps + extra, bp.accept_zero, bp.accept_one
    )


# ---------------------------------------------------------------- compiler


def _rebase(steps, have, want):
    """Conjugate a wire program so its element becomes `want`; only the
    first and last steps change, so length and inp sequence are preserved.

    The conjugator is kept even so every step permutation stays inside the
    subgroup the 5-cycles generate.
    """
    th = conjugator_even(have, want)
    thi = perm_inv(th)
    out = list(steps)
    j, m0, m1 = out[0]
    out[0] = (j, perm_mul(thi, m0), perm_mul(thi, m1))
    j, m0, m1 = out[-1]
    out[-1] = (j, perm_mul(m0, th), perm_mul(m1, th))
    return out


def compile(c):
    """Oblivious width-5 program equivalent to the circuit.

    accept-zero is the identity, accept-one one of the two reference
    5-cycles; the result never evaluates to UNDEF and its length is at
    most 4**depth(c).
    """
    if not isinstance(c, Circuit):
        raise TypeError("compile expects a Circuit")
    gate_by_name = {g.name: g for g in c.gates}
    input_pos = {n: i + 1 for i, n in enumerate(c.inputs)}
    memo = {}

    def walk(wire, cls):
        key = (wire, cls)
        if key in memo:
            return memo[key]
        if wire in input_pos:
            leaf = _LEAF[cls]
            res = ([(input_pos[wire], IDENT5, leaf)], leaf)
        else:
            g = gate_by_name[wire]
            op = g.op
            if op == "NOT":
                steps, elem = walk(g.args[0], cls)
                ei = perm_inv(elem)
                j, m0, m1 = steps[-1]
                # product becomes elem^(1 - v): the negation is free
                res = (steps[:-1] + [(j, perm_mul(m0, ei), perm_mul(m1, ei))], ei)
            elif op == "AND":
                (gw, hw, rho), (cl, cr) = _AND_W[cls]
                ls, le = walk(g.args[0], cl)
                rs, re = walk(g.args[1], cr)
                word = (
                    _rebase(ls, le, gw)
                    + _rebase(rs, re, hw)
                    + _rebase(ls, le, perm_inv(gw))
                    + _rebase(rs, re, perm_inv(hw))
                )
                res = (word, rho)
            elif op == "XOR":
                (s, u, v, w, kk), (cl, cr) = _XOR_W[cls]
                ls, le = walk(g.args[0], cl)
                rs, re = walk(g.args[1], cr)
                word = (
                    _rebase(ls, le, s)
                    + _rebase(rs, re, u)
                    + _rebase(ls, le, v)
                    + _rebase(rs, re, w)
                )
                res = (word, kk)
            elif op == "OR":
                # not(and(not a, not b)): all three negations are free
                (gw, hw, rho), (cl, cr) = _AND_W[cls]
                ls, le = _negate(*walk(g.args[0], cl))
                rs, re = _negate(*walk(g.args[1], cr))
                word = (
                    _rebase(ls, le, gw)
                    + _rebase(rs, re, hw)
                    + _rebase(ls, le, perm_inv(gw))
                    + _rebase(rs, re, perm_inv(hw))
                )
                res = _negate(word, rho)
            elif op == "NAND":
                (gw, hw, rho), (cl, cr) = _AND_W[cls]
                ls, le = walk(g.args[0], cl)
                rs, re = walk(g.args[1], cr)
                word = (
                    _rebase(ls, le, gw)
                    + _rebase(rs, re, hw)
                    + _rebase(ls, le, perm_inv(gw))
                    + _rebase(rs, re, perm_inv(hw))
                )
                res = _negate(word, rho)
            else:  # pragma: no cover
                raise ValueError(f"unknown op {op}")
        memo[key] = res
        return res

    steps, elem = walk(c.output, "5")
    # the 5-cycles fall into two classes under even conjugation; rebase to
    # whichever reference the root element can reach
    try:
        steps = _rebase(steps, elem, SIGMA5)
        accept = SIGMA5
    except ValueError:
        steps = _rebase(steps, elem, SIGMA5_SQ)
        accept = SIGMA5_SQ
    return BranchingProgram(5, c.input_count, tuple(steps), IDENT5, accept)


def _negate(steps, elem):
    ei = perm_inv(elem)
    j, m0, m1 = steps[-1]
    return steps[:-1] + [(j, perm_mul(m0, ei), perm_mul(m1, ei))], ei


# ------------------------------------------------------------- batch route

_S5 = None
_S5_INDEX = None
_S5_TABLE = None


def _s5_tables():
    global _S5, _S5_INDEX, _S5_TABLE
    if _S5 is None:
        _S5 = sorted(permutations(range(5)))  # identity sorts first, id 0
        _S5_INDEX = {p: i for i, p in enumerate(_S5)}
        tab = np.empty((120, 120), dtype=np.int64)
        for i, a in enumerate(_S5):
            for j, b in enumerate(_S5):
                tab[i, j] = _S5_INDEX[perm_mul(a, b)]
        _S5_TABLE = tab
    return _S5, _S5_INDEX, _S5_TABLE


def eval_bp_many(bp, xs):
    """Evaluate one width-5 program on many inputs at once.

    xs: (m, input_count) array-like of bits. Returns int8 array with 0/1
    for the accept outcomes and -1 for UNDEF. A second route to eval_bp
    through a composition-table kernel.
    """
    if bp.width != 5:
        raise ValueError("batch route is width-5 only")
    _, index, table = _s5_tables()
    xs = np.ascontiguousarray(np.asarray(xs, dtype=np.uint8))
    if xs.ndim != 2 or xs.shape[1] != bp.input_count:
        raise ValueError("xs must be (m, input_count)")
    n = bp.length
    inp = np.empty(n, dtype=np.int64)
    pid0 = np.empty(n, dtype=np.int64)
    pid1 = np.empty(n, dtype=np.int64)
    for i, (j, p0, p1) in enumerate(bp.steps):
        inp[i] = j - 1
        pid0[i] = index[p0]
        pid1[i] = index[p1]
    out = np.empty(xs.shape[0], dtype=np.int64)
    _k.perm_chain_products(inp, pid0, pid1, xs, table, out)
    zero_id = index[bp.accept_zero]
    one_id = index[bp.accept_one]
    res = np.full(xs.shape[0], -1, dtype=np.int8)
    res[out == zero_id] = 0
    res[out == one_id] = 1
    return res


# ------------------------------------------------------------- serialization


def bp_to_text(bp):
    """Canonical text form: header, accept matrices, then per-step records.

    Matrices are row-major 0/1 digits, one space between digits, one row
    per line. Byte-identical output for equal programs.
    """
    lines = [f"BP v1 {bp.width} {bp.length} {bp.input_count}"]

    def put(perm):
        for row in perm_to_matrix(perm):
            lines.append(" ".join(str(x) for x in row))

    put(bp.accept_zero)
    put(bp.accept_one)
    for j, p0, p1 in bp.steps:
        lines.append(f"step {j}")
        put(p0)
        put(p1)
    return "\n".join(lines) + "\n"


def bp_from_text(text):
    lines = [ln.rstrip("\n") for ln in text.splitlines()]
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise ValueError("truncated program text")
        ln = lines[pos]
        pos += 1
        return ln

    head = take().split()
    if len(head) != 5 or head[0] != "BP" or head[1] != "v1":
        raise ValueError("bad header; expected `BP v1 w n ell`")
    try:
        w, n, ell = int(head[2]), int(head[3]), int(head[4])
    except ValueError:
        raise ValueError("bad header; expected integer dimensions") from None

    def matrix():
        rows = []
        for _ in range(w):
            toks = take().split()
            if len(toks) != w or any(t not in ("0", "1") for t in toks):
                raise ValueError(f"line {pos}: expected {w} 0/1 entries")
            rows.append(tuple(int(t) for t in toks))
        return matrix_to_perm(rows)

    a0 = matrix()
    a1 = matrix()
    steps = []
    for _ in range(n):
        toks = take().split()
        if len(toks) != 2 or toks[0] != "step":
            raise ValueError(f"line {pos}: expected `step <inp>`")
        j = int(toks[1])
        steps.append((j, matrix(), matrix()))
    if any(ln.strip() for ln in lines[pos:]):
        raise ValueError("trailing content after program")
    return BranchingProgram(w, ell, tuple(steps), a0, a1)
