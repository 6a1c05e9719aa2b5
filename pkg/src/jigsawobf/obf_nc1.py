"""Obfuscation of width-5 branching programs through randomized matrix
pairs and leveled puzzle encodings.

The pipeline pairs the real program with an all-identity twin, blinds both
with scalar factors, diagonal noise and telescoping change-of-basis
matrices, and encodes every matrix entry at a level tied to its step. One
input's result is then readable only through a single multilinear form:
the form's value is exactly zero whenever the program accepts-to-identity,
and essentially never zero otherwise (a wrong branch survives with
probability about 1/p). Fixing a subset of input bits and discarding the
matrices they rule out garbles the program down to its free inputs.

Scale note: the explicit form over an encoded program has ~4nd^2 wires, so
the generic verifier route (`eval_obf_generic`, `to_puzzle`) is meant for
micro programs and cross-checks; `eval_obf` evaluates the same form with
dense linear algebra on the transparent payloads.
"""

from dataclasses import dataclass

import numpy as np

from . import mjp
from .barrington import IDENT5, compile as compile_bp
from .circuit import Circuit, build_universal, encode_circuit, eval_circuit
from .zmod import (
    FieldMatrix,
    FieldVector,
    PrimeModulus,
    dot,
    mat_mul,
    mat_vec,
    rand_vector,
    random_prime_bits,
    sample_invertible,
    vec_mat,
)


class LimitError(ValueError):
    """Requested size exceeds what the selected mode supports."""


class ArityMismatch(ValueError):
    """Wrong number of input bits supplied."""


_MAX_FORM_GATES = 5_000_000
_MAX_PUZZLE_ENTRIES = 4_000_000
_MAX_UNIVERSAL_INPUTS = 2  # program length grows 6x per extra input
_MAX_DIRECT_LENGTH = 512  # randomization is cubic in 4n+15


def _as_modulus(p):
    return p if isinstance(p, PrimeModulus) else PrimeModulus(int(p))


def _bits(x, want, what="input"):
    if isinstance(x, str):
        bits = [int(c) for c in x]
    else:
        bits = [int(b) for b in x]
    if len(bits) != want or any(b not in (0, 1) for b in bits):
        raise ArityMismatch(f"need {want} {what} bits, got {x!r}")
    return tuple(bits)


# ------------------------------------------------------------ randomization


@dataclass(frozen=True)
class RandomizedBP:
    """Blinded program pair over Z_p, ready for encoding.

    Evaluation contract: for an input chi,
        main_left . prod_i main_steps[i][chi_{inp(i)}] . main_right
      - dummy_left . prod_i dummy_steps[i][chi_{inp(i)}] . dummy_right
    is 0 exactly when the underlying program maps chi to the identity.
    """

    p: PrimeModulus
    inp: tuple  # 1-based input index per step
    ell: int
    main_left: FieldVector
    main_right: FieldVector
    dummy_left: FieldVector
    dummy_right: FieldVector
    main_steps: tuple  # ((M_0, M_1), ...) per step
    dummy_steps: tuple

    @property
    def n(self):
        return len(self.inp)

    @property
    def m(self):
        return 2 * self.n + 5

    @property
    def d(self):
        return 2 * self.m + 5


@dataclass(frozen=True)
class _Secrets:
    """Pre-conjugation randomness, exposed for the invariance tests."""

    p: PrimeModulus
    inp: tuple
    ell: int
    main_alpha: tuple  # ((a_0, a_1), ...) per step
    dummy_alpha: tuple
    main_diag: tuple  # ((v_0, v_1), ...) FieldVectors of dim 2m per step
    dummy_diag: tuple
    main_left: FieldVector  # bookends before the change of basis
    main_right: FieldVector
    dummy_left: FieldVector
    dummy_right: FieldVector


def _inv_mod(a, p):
    return pow(a, p - 2, p)


def _draw_alphas(groups, p, rng):
    """Nonzero scalars with equal per-group products on both tracks.

    Per group and bit: the twin track's factors are free draws; the main
    track copies the product by solving its last factor.
    """
    main = {}
    twin = {}
    for j in sorted(groups):
        steps = sorted(groups[j])
        for b in (0, 1):
            prod_twin = 1
            for i in steps:
                a = 1 + rng.py.randrange(p - 1)
                twin[(i, b)] = a
                prod_twin = prod_twin * a % p
            prod_main = 1
            for i in steps[:-1]:
                a = 1 + rng.py.randrange(p - 1)
                main[(i, b)] = a
                prod_main = prod_main * a % p
            main[(steps[-1], b)] = prod_twin * _inv_mod(prod_main, p) % p
    return main, twin


def _draw_secrets(bp, modulus, rng, bookend_pattern="complementary"):
    if bp.width != 5:
        raise ValueError("randomization expects width-5 programs")
    if bp.accept_zero != IDENT5:
        raise ValueError("accept-zero permutation must be the identity")
    if bookend_pattern not in ("complementary", "same"):
        raise ValueError(f"unknown bookend pattern {bookend_pattern!r}")
    p = modulus.p
    n = bp.length
    m = 2 * n + 5
    inp = tuple(step[0] for step in bp.steps)
    groups = {}
    for i, j in enumerate(inp, start=1):
        groups.setdefault(j, []).append(i)
    main_a, twin_a = _draw_alphas(groups, p, rng)

    main_diag = []
    dummy_diag = []
    for i in range(1, n + 1):
        main_diag.append(
            tuple(rand_vector(modulus, 2 * m, rng, nonzero=True) for _ in (0, 1))
        )
        dummy_diag.append(
            tuple(rand_vector(modulus, 2 * m, rng, nonzero=True) for _ in (0, 1))
        )

    def bookend_pair(left_mid, left_end, right_mid, right_end):
        zeros = [0] * m
        left = FieldVector(zeros + left_mid.to_list() + left_end.to_list(), modulus)
        if bookend_pattern == "complementary":
            right = FieldVector(
                right_mid.to_list() + zeros + right_end.to_list(), modulus
            )
        else:
            # known-bad variant kept for self-diagnosis: with both zero
            # blocks in front, the diagonal noise couples into the value
            # and the zero guarantee collapses
            right = FieldVector(
                zeros + right_mid.to_list() + right_end.to_list(), modulus
            )
        return left, right

    v = rand_vector(modulus, m, rng)
    s_end = rand_vector(modulus, 5, rng)
    w = rand_vector(modulus, m, rng)
    t_end = rand_vector(modulus, 5, rng)
    main_left, main_right = bookend_pair(v, s_end, w, t_end)

    v2 = rand_vector(modulus, m, rng)
    while True:
        s2_end = rand_vector(modulus, 5, rng)
        if int(s2_end.a[-1]) != 0:
            break
    w2 = rand_vector(modulus, m, rng)
    # matched closing inner products: solve the twin's last coordinate
    target = dot(s_end, t_end)
    t2_head = [rng.py.randrange(p) for _ in range(4)]
    acc = 0
    s2 = s2_end.to_list()
    for a, b in zip(s2[:4], t2_head):
        acc = (acc + a * b) % p
    last = (target - acc) * _inv_mod(s2[4], p) % p
    t2_end = FieldVector(t2_head + [last], modulus)
    dummy_left, dummy_right = bookend_pair(v2, s2_end, w2, t2_end)

    return _Secrets(
        modulus,
        inp,
        bp.input_count,
        tuple((main_a[(i, 0)], main_a[(i, 1)]) for i in range(1, n + 1)),
        tuple((twin_a[(i, 0)], twin_a[(i, 1)]) for i in range(1, n + 1)),
        tuple(main_diag),
        tuple(dummy_diag),
        main_left,
        main_right,
        dummy_left,
        dummy_right,
    )


def _block_step(diag, block_rows, modulus):
    """d x d matrix: the 2m diagonal entries, then a dense 5x5 corner."""
    m2 = diag.dim
    d = m2 + 5
    dtype = object if modulus.p.bit_length() >= 63 else np.uint64
    arr = np.zeros((d, d), dtype=dtype)
    arr[np.arange(m2), np.arange(m2)] = diag.a
    arr[m2:, m2:] = block_rows
    return FieldMatrix(arr, modulus, _raw=True)


def _scaled_perm(perm, alpha, p):
    return tuple(
        tuple(alpha if perm[r] == c else 0 for c in range(5)) for r in range(5)
    )


def _kilian(bp, sec, rng):
    """Telescoping change of basis around both tracks; products collapse to
    the unconjugated chain, single factors stay uniformly scrambled."""
    modulus = sec.p
    n = len(sec.inp)
    d = 2 * (2 * n + 5) + 5

    def conjugate(left, right, steps_of):
        basis = [sample_invertible(modulus, d, rng) for _ in range(n + 1)]
        lt = vec_mat(left, basis[0][1])
        rt = mat_vec(basis[n][0], right)
        steps = []
        for i in range(1, n + 1):
            pair = []
            for b in (0, 1):
                mid = steps_of(i, b)
                pair.append(mat_mul(mat_mul(basis[i - 1][0], mid), basis[i][1]))
            steps.append(tuple(pair))
        return lt, rt, tuple(steps)

    def main_step(i, b):
        raw = _scaled_perm(_perm_of(bp, i, b), sec.main_alpha[i - 1][b], modulus.p)
        block = FieldMatrix(raw, modulus)
        return _block_step(sec.main_diag[i - 1][b], block.a, modulus)

    def dummy_step(i, b):
        raw = _scaled_perm(IDENT5, sec.dummy_alpha[i - 1][b], modulus.p)
        block = FieldMatrix(raw, modulus)
        return _block_step(sec.dummy_diag[i - 1][b], block.a, modulus)

    ml, mr, ms = conjugate(sec.main_left, sec.main_right, main_step)
    dl, dr, ds = conjugate(sec.dummy_left, sec.dummy_right, dummy_step)
    return RandomizedBP(modulus, sec.inp, sec.ell, ml, mr, dl, dr, ms, ds)


def _perm_of(bp, i, b):
    return bp.steps[i - 1][2 if b else 1]


def randomize(bp, p, rng, bookend_pattern="complementary"):
    """Blind a width-5 identity-accepting program over Z_p.

    The `same` bookend pattern reuses one zero layout for both ends; it is
    kept only so the self-test can demonstrate that it breaks the
    zero-value guarantee.
    """
    modulus = _as_modulus(p)
    sec = _draw_secrets(bp, modulus, rng, bookend_pattern)
    return _kilian(bp, sec, rng)


def form_value(rbp, chi):
    """The decision value for one input, computed densely over Z_p."""
    bits = _bits(chi, rbp.ell)
    p = rbp.p.p

    def track(left, steps, right):
        u = left
        for j, pair in zip(rbp.inp, steps):
            u = vec_mat(u, pair[bits[j - 1]])
        return dot(u, right)

    main = track(rbp.main_left, rbp.main_steps, rbp.main_right)
    dummy = track(rbp.dummy_left, rbp.dummy_steps, rbp.dummy_right)
    return (main - dummy) % p


# ----------------------------------------------------------------- encoding


@dataclass(frozen=True)
class PartialAssignment:
    """Fixed bits sigma on a position set J, the garbling instruction."""

    assignments: tuple  # ((position, bit), ...) ascending, unique

    def __post_init__(self):
        last = 0
        for pos, bit in self.assignments:
            if pos <= last:
                raise ValueError("positions must be ascending and unique")
            if bit not in (0, 1):
                raise ValueError("assigned bits must be 0 or 1")
            last = pos

    @classmethod
    def of(cls, mapping):
        return cls(tuple(sorted((int(j), int(b)) for j, b in mapping.items())))

    @property
    def positions(self):
        return frozenset(j for j, _ in self.assignments)

    def value(self, pos):
        for j, b in self.assignments:
            if j == pos:
                return b
        raise KeyError(pos)

    def free_positions(self, ell):
        return tuple(j for j in range(1, ell + 1) if j not in self.positions)

    def merge(self, free_bits, ell):
        """Full input tuple from the fixed bits plus the free bits in
        ascending position order."""
        free = self.free_positions(ell)
        bits = _bits(free_bits, len(free), what="free input")
        chi = [None] * ell
        for j, b in self.assignments:
            if not 1 <= j <= ell:
                raise ValueError(f"fixed position {j} outside 1..{ell}")
            chi[j - 1] = b
        for j, b in zip(free, bits):
            chi[j - 1] = b
        return tuple(chi)


EMPTY_ASSIGNMENT = PartialAssignment(())


def _level_of_step(i):
    # step levels sit between the left bookends ({1}) and the right ones
    return frozenset({i + 1})


@dataclass(frozen=True)
class EncodedBP:
    """Randomized program with every entry encoded at its level.

    Level plan over k = n + 2: left bookends at {1}, step i at {i+1},
    right bookends at {n+2}. Transparent payloads are columnar: the field
    vectors and matrices themselves, in the canonical entry order
    main_left, dummy_left, (steps: main 0, main 1, dummy 0, dummy 1,
    row-major), main_right, dummy_right.
    """

    prms: mjp.Prms
    inp: tuple
    ell: int
    d: int
    main_left: FieldVector
    dummy_left: FieldVector
    main_right: FieldVector
    dummy_right: FieldVector
    main_steps: tuple
    dummy_steps: tuple

    @property
    def n(self):
        return len(self.inp)

    @property
    def k(self):
        return self.n + 2

    @property
    def meta(self):
        return (self.n, self.ell, self.inp, self.d)

    @property
    def entry_count(self):
        return 4 * self.d + 4 * self.n * self.d * self.d

    def to_puzzle(self):
        return garble(self, EMPTY_ASSIGNMENT).to_puzzle()


def encode_bp(rbp, lam=None, rng=None, backend="transparent"):
    """Encode every entry of the randomized program at its level.

    Equivalent to running the puzzle generator on a specifier that draws
    and flattens the program (see `bp_specifier`); entries stay columnar
    because a step matrix is d^2 encodings. Only the transparent backend
    is supported by this carrier.
    """
    if backend != "transparent":
        raise ValueError("columnar encoding carrier requires the transparent backend")
    be = mjp.get_backend(backend)
    k = rbp.n + 2
    secret = be.gen_secret(rbp.p, k, rng)
    del secret  # transparent backend: payloads equal values
    prms = mjp.Prms(backend, k, rbp.p.p)
    return EncodedBP(
        prms,
        rbp.inp,
        rbp.ell,
        rbp.d,
        rbp.main_left,
        rbp.dummy_left,
        rbp.main_right,
        rbp.dummy_right,
        rbp.main_steps,
        rbp.dummy_steps,
    )


def bp_specifier(bp, lam_unused=None, bookend_pattern="complementary"):
    """The program as a puzzle specifier: given a prime, randomize and emit
    all entries as (level, value) pairs in canonical order."""
    n = bp.length
    m = 2 * n + 5
    d = 2 * m + 5
    count = 4 * d + 4 * n * d * d
    k = n + 2

    def proc(p, rng):
        rbp = randomize(bp, p, rng, bookend_pattern)
        pairs = []
        lvl1 = frozenset({1})
        for vec in (rbp.main_left, rbp.dummy_left):
            pairs.extend((lvl1, int(x)) for x in vec.to_list())
        for i in range(1, n + 1):
            lvl = _level_of_step(i)
            for mat in (
                rbp.main_steps[i - 1][0],
                rbp.main_steps[i - 1][1],
                rbp.dummy_steps[i - 1][0],
                rbp.dummy_steps[i - 1][1],
            ):
                for row in mat.to_lists():
                    pairs.extend((lvl, int(x)) for x in row)
        lvl_end = frozenset({k})
        for vec in (rbp.main_right, rbp.dummy_right):
            pairs.extend((lvl_end, int(x)) for x in vec.to_list())
        return mjp.SpecifierOutput(p, tuple(pairs))

    return mjp.JigsawSpecifier(k, count, proc)


# ----------------------------------------------------------------- garbling


@dataclass(frozen=True)
class GarbledProgram:
    """Encoded program with the matrices ruled out by fixed bits removed.

    steps[i] = (retained_bits, main_matrices, dummy_matrices), matrices
    aligned with retained_bits; a fixed step keeps one bit, a free step
    both.
    """

    prms: mjp.Prms
    inp: tuple
    ell: int
    d: int
    fixed: PartialAssignment
    main_left: FieldVector
    dummy_left: FieldVector
    main_right: FieldVector
    dummy_right: FieldVector
    steps: tuple

    @property
    def n(self):
        return len(self.inp)

    @property
    def k(self):
        return self.n + 2

    @property
    def free(self):
        return self.fixed.free_positions(self.ell)

    @property
    def entry_count(self):
        mats = sum(2 * len(bits) for bits, _, _ in self.steps)
        return 4 * self.d + mats * self.d * self.d

    def retained(self):
        return tuple(bits for bits, _, _ in self.steps)

    def to_puzzle(self):
        if self.entry_count > _MAX_PUZZLE_ENTRIES:
            raise LimitError(
                f"{self.entry_count} encodings is beyond the explicit puzzle carrier"
            )
        encs = []

        def extend_vec(vec, lvl):
            encs.extend(mjp.Encoding(lvl, int(x)) for x in vec.to_list())

        def extend_mat(mat, lvl):
            for row in mat.to_lists():
                encs.extend(mjp.Encoding(lvl, int(x)) for x in row)

        lvl1 = frozenset({1})
        extend_vec(self.main_left, lvl1)
        extend_vec(self.dummy_left, lvl1)
        for i, (bits, mains, dummies) in enumerate(self.steps, start=1):
            lvl = _level_of_step(i)
            for mat in mains:
                extend_mat(mat, lvl)
            for mat in dummies:
                extend_mat(mat, lvl)
        lvl_end = frozenset({self.k})
        extend_vec(self.main_right, lvl_end)
        extend_vec(self.dummy_right, lvl_end)
        return mjp.Puzzle(self.prms, tuple(encs))


def garble(ebp, pa):
    """Drop every step matrix inconsistent with the fixed bits."""
    bad = pa.positions - set(range(1, ebp.ell + 1))
    if bad:
        raise ValueError(f"fixed positions {sorted(bad)} outside 1..{ebp.ell}")
    steps = []
    for i, j in enumerate(ebp.inp):
        if j in pa.positions:
            b = pa.value(j)
            bits = (b,)
            mains = (ebp.main_steps[i][b],)
            dummies = (ebp.dummy_steps[i][b],)
        else:
            bits = (0, 1)
            mains = ebp.main_steps[i]
            dummies = ebp.dummy_steps[i]
        steps.append((bits, tuple(mains), tuple(dummies)))
    return GarbledProgram(
        ebp.prms,
        ebp.inp,
        ebp.ell,
        ebp.d,
        pa,
        ebp.main_left,
        ebp.dummy_left,
        ebp.main_right,
        ebp.dummy_right,
        tuple(steps),
    )


# --------------------------------------------------------------- evaluation


def _chain_value(gp, chi):
    modulus = gp.main_left.modulus

    def track(left, right, which):
        u = left
        for (bits, mains, dummies), j in zip(gp.steps, gp.inp):
            b = chi[j - 1]
            if b not in bits:
                raise ValueError(
                    f"input bit {b} for position {j} was garbled away"
                )
            mat = (mains if which == 0 else dummies)[bits.index(b)]
            u = vec_mat(u, mat)
        return dot(u, right)

    main = track(gp.main_left, gp.main_right, 0)
    dummy = track(gp.dummy_left, gp.dummy_right, 1)
    return (main - dummy) % modulus.p


def eval_obf(gp, x):
    """Decide one input: 0 when the verifier accepts the evaluation form.

    This runs the transparent-backend verifier computation directly with
    dense linear algebra; `eval_obf_generic` runs the same form through
    the explicit puzzle verifier and is cross-checked to agree.
    """
    chi = gp.fixed.merge(x, gp.ell)
    return 0 if _chain_value(gp, chi) == 0 else 1


def eval_obf_generic(gp, x):
    """Literal route: materialize the puzzle and the restricted form, then
    ask the framework verifier. Micro scale only."""
    chi = gp.fixed.merge(x, gp.ell)
    form = _build_form(gp.n, gp.ell, gp.inp, gp.d, chi, gp.retained())
    verdict = mjp.jver(gp.to_puzzle(), form)
    if verdict == 0 and verdict.diagnostic != "nonzero":
        raise ValueError(f"verifier rejected the evaluation form: {verdict.diagnostic}")
    return 0 if verdict == 1 else 1


# ------------------------------------------------------------- form builder


def build_form(chi, meta):
    """Multilinear form computing the decision value for one input over
    the canonical entry order of an (ungarbled) encoded program."""
    if hasattr(meta, "meta"):
        meta = meta.meta
    n, ell, inp, d = meta
    bits = _bits(chi, ell)
    return _build_form(n, ell, inp, d, bits, ((0, 1),) * n)


def _build_form(n, ell, inp, d, chi, retained):
    k = n + 2
    est = 6 * n * d * d + 6 * d
    if est > _MAX_FORM_GATES:
        raise LimitError(f"explicit form would need about {est} gates")
    lvl1 = frozenset({1})
    lvl_end = frozenset({k})

    input_sets = []
    input_sets.extend([lvl1] * (2 * d))
    step_offsets = []
    cur = 2 * d
    for i, bits in enumerate(retained, start=1):
        lvl = _level_of_step(i)
        offs = {}
        for track in (0, 1):
            for b in bits:
                offs[(track, b)] = cur
                cur += d * d
                input_sets.extend([lvl] * (d * d))
        step_offsets.append(offs)
    right_main = cur
    right_dummy = cur + d
    input_sets.extend([lvl_end] * (2 * d))
    total_inputs = cur + 2 * d

    gates = []

    def emit(kind, args, s):
        gates.append(mjp.FormGate(kind, args, s))
        return total_inputs + len(gates)

    def chain(left_off, right_off, track):
        u = [left_off + c + 1 for c in range(d)]
        lvl = lvl1
        for i in range(1, n + 1):
            b = chi[inp[i - 1] - 1]
            moff = step_offsets[i - 1][(track, b)]
            lvl = lvl | _level_of_step(i)
            nxt = []
            for c in range(d):
                acc = None
                for r in range(d):
                    w = emit(mjp.MUL, (u[r], moff + r * d + c + 1), lvl)
                    acc = w if acc is None else emit(mjp.ADD, (acc, w), lvl)
                nxt.append(acc)
            u = nxt
        full = lvl | lvl_end
        acc = None
        for c in range(d):
            w = emit(mjp.MUL, (u[c], right_off + c + 1), full)
            acc = w if acc is None else emit(mjp.ADD, (acc, w), full)
        return acc

    z_main = chain(0, right_main, 0)
    z_dummy = chain(d, right_dummy, 1)
    # unused matrices feed ignore gates so every entry is consumed
    for i in range(1, n + 1):
        b_used = chi[inp[i - 1] - 1]
        lvl = _level_of_step(i)
        for track in (0, 1):
            for b in retained[i - 1]:
                if b != b_used:
                    off = step_offsets[i - 1][(track, b)]
                    for e in range(d * d):
                        emit(mjp.DROP, (off + e + 1,), lvl)
    full = frozenset(range(1, k + 1))
    neg = emit(mjp.NEG, (z_dummy,), full)
    emit(mjp.ADD, (z_main, neg), full)
    return mjp.MultilinearForm(k, tuple(input_sets), tuple(gates))


# --------------------------------------------------------------- obfuscator


def obfuscate_nc1(lam, c, rng, mode="direct", prime=None, family=None):
    """Obfuscate a circuit as a garbled encoded program.

    direct mode compiles the circuit itself and fixes nothing; universal
    mode compiles a selector circuit for the whole (g, l) family and fixes
    the member's coefficient bits, so the emitted shape depends only on
    the family.
    """
    if lam < 2:
        raise ValueError("lambda must be at least 2")
    if mode == "direct":
        bp = compile_bp(c)
        if bp.length > _MAX_DIRECT_LENGTH:
            raise LimitError(
                f"compiled length {bp.length} exceeds the direct-mode cap "
                f"{_MAX_DIRECT_LENGTH}"
            )
        pa = EMPTY_ASSIGNMENT
    elif mode == "universal":
        l = c.input_count
        if family is None:
            family = (8, l)
        g, fl = family
        if fl > _MAX_UNIVERSAL_INPUTS:
            raise LimitError(
                f"universal mode handles at most {_MAX_UNIVERSAL_INPUTS} inputs"
            )
        enc = encode_circuit(c, family)
        bp = compile_bp(build_universal(family))
        pa = PartialAssignment.of(
            {pos + 1: bit for pos, bit in enumerate(enc.bits)}
        )
    else:
        raise ValueError(f"unknown mode {mode!r}")
    modulus = _as_modulus(prime) if prime is not None else random_prime_bits(lam, rng)
    rbp = randomize(bp, modulus, rng)
    return garble(encode_bp(rbp, lam, rng), pa)


def functionally_equivalent(pa0, pa1, func, ell):
    """Exhaustively compare the two restrictions over the free inputs."""
    if pa0.positions != pa1.positions:
        raise ValueError("assignments fix different position sets")
    free = pa0.free_positions(ell)
    if len(free) > 20:
        raise LimitError(f"{len(free)} free bits is beyond exhaustive comparison")
    if isinstance(func, Circuit):
        circ = func
        func = lambda chi: eval_circuit(circ, chi)
    for mask in range(1 << len(free)):
        x = tuple((mask >> t) & 1 for t in range(len(free)))
        if func(pa0.merge(x, ell)) != func(pa1.merge(x, ell)):
            return False
    return True


# ------------------------------------------------------------- serialization


def gp_to_text(gp):
    head = f"GP v1 {gp.prms.p} {gp.n} {gp.ell} {gp.k} {gp.d}"
    inp_line = "inp " + " ".join(str(j) for j in gp.inp)
    if gp.fixed.assignments:
        fixed_line = "fixed " + " ".join(
            f"{j}:{b}" for j, b in gp.fixed.assignments
        )
    else:
        fixed_line = "fixed -"
    flags = []
    for bits, _, _ in gp.steps:
        flags.append(("1" if 0 in bits else "0") + ("1" if 1 in bits else "0"))
    retain_line = "retain " + "".join(flags)
    return "\n".join([head, inp_line, fixed_line, retain_line, puzzle_text(gp)])


def puzzle_text(gp):
    return mjp.puzzle_to_text(gp.to_puzzle())


def gp_from_text(text):
    lines = text.splitlines()
    if len(lines) < 5:
        raise ValueError("truncated garbled program text")
    head = lines[0].split()
    if len(head) != 7 or head[0] != "GP" or head[1] != "v1":
        raise ValueError("bad header; expected `GP v1 p n ell k d`")
    try:
        p, n, ell, k, d = (int(t) for t in head[2:])
    except ValueError:
        raise ValueError("bad header; expected integer parameters") from None
    if k != n + 2:
        raise ValueError(f"level count {k} does not match {n} steps")
    inp_toks = lines[1].split()
    if inp_toks[:1] != ["inp"] or len(inp_toks) != n + 1:
        raise ValueError("bad step-to-input line")
    inp = tuple(int(t) for t in inp_toks[1:])
    if any(not 1 <= j <= ell for j in inp):
        raise ValueError("step reads an input outside 1..ell")
    fixed_toks = lines[2].split()
    if fixed_toks[:1] != ["fixed"]:
        raise ValueError("bad fixed-assignment line")
    if fixed_toks[1:] == ["-"]:
        pa = EMPTY_ASSIGNMENT
    else:
        try:
            pa = PartialAssignment(
                tuple(
                    (int(a), int(b))
                    for a, b in (t.split(":") for t in fixed_toks[1:])
                )
            )
        except ValueError as e:
            raise ValueError(f"bad fixed-assignment line: {e}") from None
    retain_toks = lines[3].split()
    if (
        retain_toks[:1] != ["retain"]
        or len(retain_toks) != 2
        or len(retain_toks[1]) != 2 * n
        or set(retain_toks[1]) - {"0", "1"}
    ):
        raise ValueError("bad retained-step line")
    retained = []
    for i in range(n):
        pair = retain_toks[1][2 * i : 2 * i + 2]
        bits = tuple(b for b in (0, 1) if pair[b] == "1")
        if not bits:
            raise ValueError(f"step {i + 1} retains no matrices")
        retained.append(bits)
        j = inp[i]
        want = (pa.value(j),) if j in pa.positions else (0, 1)
        if bits != want:
            raise ValueError(f"step {i + 1} retention contradicts the fixed bits")

    puzzle = mjp.puzzle_from_text("\n".join(lines[4:]))
    if puzzle.prms.p != p or puzzle.prms.k != k:
        raise ValueError("puzzle parameters contradict the program header")
    modulus = PrimeModulus(p)
    encs = puzzle.encodings
    want_count = 4 * d + sum(2 * len(bits) for bits in retained) * d * d
    if len(encs) != want_count:
        raise ValueError(
            f"expected {want_count} encodings, found {len(encs)}"
        )

    pos = 0

    def take_vec(lvl):
        nonlocal pos
        chunk = encs[pos : pos + d]
        pos += d
        if any(e.level != lvl for e in chunk):
            raise ValueError("encoding level contradicts the level plan")
        return FieldVector([e.payload for e in chunk], modulus)

    def take_mat(lvl):
        nonlocal pos
        chunk = encs[pos : pos + d * d]
        pos += d * d
        if any(e.level != lvl for e in chunk):
            raise ValueError("encoding level contradicts the level plan")
        vals = np.array([e.payload for e in chunk], dtype=object).reshape(d, d)
        return FieldMatrix(vals, modulus)

    lvl1 = frozenset({1})
    main_left = take_vec(lvl1)
    dummy_left = take_vec(lvl1)
    steps = []
    for i in range(1, n + 1):
        lvl = _level_of_step(i)
        mains = tuple(take_mat(lvl) for _ in retained[i - 1])
        dummies = tuple(take_mat(lvl) for _ in retained[i - 1])
        steps.append((retained[i - 1], mains, dummies))
    lvl_end = frozenset({k})
    main_right = take_vec(lvl_end)
    dummy_right = take_vec(lvl_end)
    return GarbledProgram(
        puzzle.prms,
        inp,
        ell,
        d,
        pa,
        main_left,
        dummy_left,
        main_right,
        dummy_right,
        tuple(steps),
    )
