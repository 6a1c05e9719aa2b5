"""Randomized-program pipeline tests.

The first test is the load-bearing oracle: an independent python-int
computation of the decision value, used to settle the bookend zero-pattern
question (complementary layouts keep the zero case exact, the same-layout
variant demonstrably does not) before anything downstream trusts
form_value. Everything statistical runs on fixed seeds.
"""

import pytest

from jigsawobf import mjp
from jigsawobf import obf_nc1 as O
from jigsawobf.barrington import (
    IDENT5,
    SIGMA5,
    BranchingProgram,
    compile as compile_bp,
    input_sets,
    pad_to,
)
from jigsawobf.circuit import eval_circuit, family_members, parse_circuit, restrict
from jigsawobf.zmod import PrimeModulus, Rng, gen_prime

XOR2 = parse_circuit("input x1\ninput x2\ngate g1 XOR x1 x2\noutput g1\n")
NOT1 = parse_circuit("input x1\ngate g1 NOT x1\noutput g1\n")
AND2 = parse_circuit("input x1\ninput x2\ngate g1 AND x1 x2\noutput g1\n")


def _py_form_value(rbp, chi):
    # independent route: plain-int arithmetic, no zmod kernels
    p = rbp.p.p
    bits = [int(b) for b in chi]

    def track(left, steps, right):
        u = left.to_list()
        for j, pair in zip(rbp.inp, steps):
            mat = pair[bits[j - 1]].to_lists()
            u = [
                sum(u[r] * mat[r][c] for r in range(len(u))) % p
                for c in range(len(u))
            ]
        return sum(a * b for a, b in zip(u, right.to_list())) % p

    main = track(rbp.main_left, rbp.main_steps, rbp.main_right)
    dummy = track(rbp.dummy_left, rbp.dummy_steps, rbp.dummy_right)
    return (main - dummy) % p


# -------------------------------------------------------------- the oracle


def test_bookend_pattern_oracle():
    """Complementary bookend layouts give exact zeros on accept; reusing
    one layout for both ends does not. Decided by the independent route."""
    bp = compile_bp(XOR2)
    p = PrimeModulus(13)
    rng = Rng(20260815)
    zero_inputs = ("00", "11")
    one_inputs = ("01", "10")

    complementary_violations = 0
    one_zero_hits = 0
    for _ in range(30):
        rbp = O.randomize(bp, p, rng)
        for chi in zero_inputs:
            v = _py_form_value(rbp, chi)
            assert v == O.form_value(rbp, chi)
            complementary_violations += v != 0
        for chi in one_inputs:
            v = _py_form_value(rbp, chi)
            assert v == O.form_value(rbp, chi)
            one_zero_hits += v == 0
    assert complementary_violations == 0
    # accidental zeros on the reject side happen at rate ~1/p only
    assert one_zero_hits <= 15

    same_violations = 0
    for _ in range(30):
        rbp = O.randomize(bp, p, rng, bookend_pattern="same")
        for chi in zero_inputs:
            same_violations += _py_form_value(rbp, chi) != 0
    assert same_violations >= 20  # the variant is decisively broken


# ------------------------------------------------------------ randomization


def test_randomized_dimensions():
    bp = pad_to(compile_bp(NOT1), 2)
    rbp = O.randomize(bp, PrimeModulus(101), Rng(4))
    assert (rbp.n, rbp.m, rbp.d) == (2, 9, 23)
    for vec in (rbp.main_left, rbp.main_right, rbp.dummy_left, rbp.dummy_right):
        assert vec.dim == 23
    for pair in rbp.main_steps + rbp.dummy_steps:
        for mat in pair:
            assert (mat.rows, mat.cols) == (23, 23)


def test_alpha_products_match_per_input():
    bp = compile_bp(XOR2)
    p = PrimeModulus(1009)
    for seed in range(5):
        sec = O._draw_secrets(bp, p, Rng(seed))
        groups = input_sets(bp)
        for j, steps in groups.items():
            for b in (0, 1):
                main = dummy = 1
                for i in steps:
                    main = main * sec.main_alpha[i - 1][b] % p.p
                    dummy = dummy * sec.dummy_alpha[i - 1][b] % p.p
                assert main == dummy
                assert all(sec.main_alpha[i - 1][b] != 0 for i in steps)


def test_zero_case_exact_many_draws():
    rng = Rng(99)
    for c in (XOR2, AND2, NOT1):
        bp = compile_bp(c)
        zeros = [
            x
            for x in range(1 << c.input_count)
            if eval_circuit(c, format(x, f"0{c.input_count}b")) == 0
        ]
        for _ in range(20):
            rbp = O.randomize(bp, PrimeModulus(13), rng)
            for x in zeros:
                chi = format(x, f"0{c.input_count}b")
                assert O.form_value(rbp, chi) == 0


def test_one_case_rate_small_prime():
    # reject-side zero rate ~ 1/p plus the p^-4 chance of a degenerate
    # bookend draw; at p=5 that is 0.2013
    bp = compile_bp(NOT1)
    rng = Rng(31337)
    zeros = 0
    trials = 1500
    for _ in range(trials):
        rbp = O.randomize(bp, 5, rng)
        zeros += O.form_value(rbp, "0") == 0
    assert 0.155 <= zeros / trials <= 0.25


def test_kilian_invariance():
    bp = compile_bp(XOR2)
    p = PrimeModulus(10007)
    sec = O._draw_secrets(bp, p, Rng(8))
    a = O._kilian(bp, sec, Rng(1))
    b = O._kilian(bp, sec, Rng(2))
    for chi in ("00", "01", "10", "11"):
        assert O.form_value(a, chi) == O.form_value(b, chi)
    # and the conjugated matrices themselves differ
    assert a.main_steps[0][0] != b.main_steps[0][0]


def test_randomize_rejects_wrong_programs():
    two = BranchingProgram(
        2, 1, (((1, (0, 1), (1, 0))),), (0, 1), (1, 0)
    )
    with pytest.raises(ValueError, match="width-5"):
        O.randomize(two, PrimeModulus(7), Rng(0))
    flipped = BranchingProgram(
        5,
        1,
        ((1, SIGMA5, SIGMA5),),
        SIGMA5,
        IDENT5,
    )
    with pytest.raises(ValueError, match="identity"):
        O.randomize(flipped, PrimeModulus(7), Rng(0))
    with pytest.raises(ValueError, match="pattern"):
        O.randomize(compile_bp(NOT1), PrimeModulus(7), Rng(0), bookend_pattern="x")


# ---------------------------------------------------------------- encoding


def test_encode_levels_and_count():
    bp = pad_to(compile_bp(NOT1), 3)
    rbp = O.randomize(bp, PrimeModulus(17), Rng(2))
    ebp = O.encode_bp(rbp)
    d, n = ebp.d, ebp.n
    assert ebp.k == n + 2 == ebp.prms.k
    assert ebp.entry_count == 4 * d + 4 * n * d * d
    puzzle = ebp.to_puzzle()
    assert len(puzzle.encodings) == ebp.entry_count
    # level plan: 2d at {1}, 4d^2 per step i at {i+1}, 2d at {n+2}
    pos = 0
    for e in puzzle.encodings[: 2 * d]:
        assert e.level == frozenset({1})
    pos = 2 * d
    for i in range(1, n + 1):
        for e in puzzle.encodings[pos : pos + 4 * d * d]:
            assert e.level == frozenset({i + 1})
        pos += 4 * d * d
    for e in puzzle.encodings[pos:]:
        assert e.level == frozenset({n + 2})
    # transparent payloads are the entries themselves
    assert [e.payload for e in puzzle.encodings[: 2 * d]] == (
        rbp.main_left.to_list() + rbp.dummy_left.to_list()
    )
    step3 = puzzle.encodings[2 * d + 2 * 4 * d * d : 2 * d + 3 * 4 * d * d]
    assert all(e.level == frozenset({4}) for e in step3)


def test_encode_requires_transparent_carrier():
    rbp = O.randomize(compile_bp(NOT1), PrimeModulus(17), Rng(2))
    with pytest.raises(ValueError, match="transparent"):
        O.encode_bp(rbp, backend="opaque")


def test_encode_matches_generic_generator():
    # dual route: the columnar carrier against the puzzle generator run on
    # the program-flattening specifier, same seed
    bp = compile_bp(NOT1)
    spec = O.bp_specifier(bp)
    seed = 4711
    p2, x, puzzle_b = mjp.jgen(10, spec.k, spec.element_count, spec, Rng(seed))

    rng = Rng(seed)
    p1 = gen_prime(10, rng)
    rbp = O.randomize(bp, p1, rng)
    puzzle_a = O.encode_bp(rbp).to_puzzle()

    assert p1.p == p2.p
    assert puzzle_a == puzzle_b


# ------------------------------------------------------------ form building


def test_build_form_validates_exhaustively():
    for length in (1, 2, 3):
        bp = pad_to(compile_bp(NOT1), length)
        meta = (bp.length, bp.input_count, tuple(s[0] for s in bp.steps), 4 * bp.length + 15)
        for chi in ("0", "1"):
            f = O.build_form(chi, meta)
            assert mjp.validate_form(f) is None
            assert f.element_count == 4 * meta[3] + 4 * meta[0] * meta[3] ** 2


def test_form_route_equals_dense_route():
    bp = pad_to(compile_bp(NOT1), 2)
    p = PrimeModulus(101)
    seed = 12
    rbp = O.randomize(bp, p, Rng(seed))
    x = O.bp_specifier(bp).run(p, Rng(seed))
    ebp = O.encode_bp(rbp)
    for chi in ("0", "1"):
        form = O.build_form(chi, ebp)
        lvl, val = mjp.eval_form(form, x)
        assert lvl == frozenset(range(1, ebp.k + 1))
        assert val == O.form_value(rbp, chi)


def test_form_size_guard():
    with pytest.raises(O.LimitError):
        O.build_form("0", (200, 1, (1,) * 200, 815))


# ---------------------------------------------------------------- garbling


def _encoded(c, p, seed):
    bp = compile_bp(c)
    rbp = O.randomize(bp, PrimeModulus(p), Rng(seed))
    return O.encode_bp(rbp)


def test_garble_empty_is_identity():
    ebp = _encoded(XOR2, 61, 5)
    gp = O.garble(ebp, O.EMPTY_ASSIGNMENT)
    assert gp.free == (1, 2)
    for (bits, mains, dummies), m_orig, d_orig in zip(
        gp.steps, ebp.main_steps, ebp.dummy_steps
    ):
        assert bits == (0, 1)
        assert mains == m_orig and dummies == d_orig


def test_garble_retention_groups():
    ebp = _encoded(XOR2, 61, 6)
    pa = O.PartialAssignment.of({1: 1})
    gp = O.garble(ebp, pa)
    assert gp.free == (2,)
    for (bits, mains, dummies), j in zip(gp.steps, gp.inp):
        if j == 1:
            assert bits == (1,) and len(mains) == len(dummies) == 1
        else:
            assert bits == (0, 1) and len(mains) == 2
    full = O.garble(ebp, O.PartialAssignment.of({1: 0, 2: 1}))
    assert full.free == ()
    assert all(len(bits) == 1 for bits, _, _ in full.steps)
    assert O.eval_obf(full, ()) == eval_circuit(XOR2, "01")


def test_garble_rejects_foreign_positions():
    ebp = _encoded(NOT1, 31, 7)
    with pytest.raises(ValueError, match="outside"):
        O.garble(ebp, O.PartialAssignment.of({2: 0}))


def test_garble_equals_circuit_restriction():
    # fixing bits before obfuscation = restricting the circuit
    for c, fixes in (
        (XOR2, {1: 0}),
        (XOR2, {1: 1}),
        (AND2, {2: 0}),
        (AND2, {2: 1}),
    ):
        ebp = _encoded(c, 2**31 - 1, sum(fixes) + 11)
        gp = O.garble(ebp, O.PartialAssignment.of(fixes))
        names = {j: c.inputs[j - 1] for j in fixes}
        rc = restrict(c, {names[j]: b for j, b in fixes.items()})
        for x in range(2):
            assert O.eval_obf(gp, (x,)) == eval_circuit(rc, (x,))


def test_garble_merge_commutes():
    ebp = _encoded(XOR2, 499, 3)
    pa = O.PartialAssignment.of({2: 1})
    gp = O.garble(ebp, pa)
    ungarbled = O.garble(ebp, O.EMPTY_ASSIGNMENT)
    for x in (0, 1):
        merged = pa.merge((x,), 2)
        assert O.eval_obf(gp, (x,)) == O.eval_obf(ungarbled, merged)


# --------------------------------------------------------------- evaluation


def test_eval_routes_agree_direct():
    gp = O.obfuscate_nc1(16, XOR2, Rng(7), mode="direct")
    for x in ("00", "01", "10", "11"):
        want = eval_circuit(XOR2, x)
        assert O.eval_obf(gp, x) == want
        assert O.eval_obf_generic(gp, x) == want


def test_eval_obf_arity_errors():
    gp = O.obfuscate_nc1(16, XOR2, Rng(7), mode="direct")
    with pytest.raises(O.ArityMismatch):
        O.eval_obf(gp, "0")
    with pytest.raises(O.ArityMismatch):
        O.eval_obf(gp, "012")
    with pytest.raises(O.ArityMismatch):
        O.eval_obf(gp, "021")


# --------------------------------------------------------------- obfuscator


def test_obfuscate_direct_completeness():
    from jigsawobf.circuit import random_circuit

    rng = Rng(606)
    for _ in range(6):
        c = random_circuit(1 + rng.py.randrange(3), 1 + rng.py.randrange(4), rng)
        gp = O.obfuscate_nc1(16, c, rng.spawn(), mode="direct")
        for x in range(1 << c.input_count):
            chi = format(x, f"0{c.input_count}b")
            assert O.eval_obf(gp, chi) == eval_circuit(c, chi)


def test_obfuscate_universal_family_micro():
    members = family_members((1, 1))
    shapes = set()
    for i, c in enumerate(members):
        gp = O.obfuscate_nc1(16, c, Rng(40 + i), mode="universal", family=(1, 1))
        shapes.add((gp.n, gp.d, gp.ell, gp.free, gp.entry_count))
        for x in (0, 1):
            assert O.eval_obf(gp, (x,)) == eval_circuit(c, (x,))
    assert len(shapes) == 1  # member identity never shows in the sizes


def test_universal_mode_limits():
    three = parse_circuit(
        "input x1\ninput x2\ninput x3\ngate g1 AND x1 x2\ngate g2 XOR g1 x3\noutput g2\n"
    )
    with pytest.raises(O.LimitError):
        O.obfuscate_nc1(16, three, Rng(1), mode="universal")
    with pytest.raises(ValueError, match="mode"):
        O.obfuscate_nc1(16, XOR2, Rng(1), mode="sideways")


def test_direct_mode_length_cap():
    lines = ["input x1", "input x2", "gate g1 AND x1 x2"]
    for i in range(2, 9):
        lines.append(f"gate g{i} AND g{i-1} x{1 + (i % 2)}")
    lines.append("gate g9 AND g8 x1")
    deep = parse_circuit("\n".join(lines) + "\noutput g9\n")
    with pytest.raises(O.LimitError, match="cap"):
        O.obfuscate_nc1(16, deep, Rng(1), mode="direct")


def test_prime_override_and_default():
    gp = O.obfuscate_nc1(16, NOT1, Rng(2), mode="direct", prime=101)
    assert gp.prms.p == 101
    gp2 = O.obfuscate_nc1(16, NOT1, Rng(2), mode="direct")
    assert gp2.prms.p.bit_length() == 16


# ------------------------------------------------------------- equivalence


def test_functionally_equivalent():
    pa_a = O.PartialAssignment.of({1: 0})
    pa_b = O.PartialAssignment.of({1: 1})
    same = O.PartialAssignment.of({1: 1})
    xor = lambda chi: chi[0] ^ chi[1]
    dead = lambda chi: chi[1]  # ignores position 1
    assert O.functionally_equivalent(pa_b, same, xor, 2)
    assert O.functionally_equivalent(pa_a, pa_b, dead, 2)
    assert not O.functionally_equivalent(pa_a, pa_b, xor, 2)
    assert O.functionally_equivalent(pa_a, pa_b, XOR2, 2) is False
    with pytest.raises(ValueError, match="different position"):
        O.functionally_equivalent(pa_a, O.PartialAssignment.of({2: 0}), xor, 2)
    with pytest.raises(O.LimitError):
        O.functionally_equivalent(
            O.EMPTY_ASSIGNMENT, O.EMPTY_ASSIGNMENT, lambda chi: 0, 21
        )


def test_partial_assignment_type():
    with pytest.raises(ValueError):
        O.PartialAssignment(((1, 0), (1, 1)))
    with pytest.raises(ValueError):
        O.PartialAssignment(((2, 0), (1, 1)))
    with pytest.raises(ValueError):
        O.PartialAssignment(((1, 2),))
    pa = O.PartialAssignment.of({3: 1, 1: 0})
    assert pa.assignments == ((1, 0), (3, 1))
    assert pa.positions == frozenset({1, 3})
    assert pa.value(3) == 1
    assert pa.free_positions(4) == (2, 4)
    assert pa.merge((1, 0), 4) == (0, 1, 1, 0)
    with pytest.raises(O.ArityMismatch):
        pa.merge((1,), 4)


# ------------------------------------------------------------ serialization


def test_gp_text_roundtrip():
    gp = O.obfuscate_nc1(10, XOR2, Rng(77), mode="direct", prime=101)
    text = O.gp_to_text(gp)
    assert text.splitlines()[0] == f"GP v1 101 {gp.n} 2 {gp.k} {gp.d}"
    back = O.gp_from_text(text)
    assert back.inp == gp.inp and back.fixed == gp.fixed
    assert back.main_left == gp.main_left
    assert back.steps[0][1][0] == gp.steps[0][1][0]
    for x in ("00", "01", "10", "11"):
        assert O.eval_obf(back, x) == O.eval_obf(gp, x)
    assert O.gp_to_text(back) == text


def test_gp_text_roundtrip_garbled():
    gp = O.obfuscate_nc1(10, NOT1, Rng(5), mode="universal", family=(1, 1), prime=61)
    text = O.gp_to_text(gp)
    back = O.gp_from_text(text)
    assert back.fixed == gp.fixed
    for x in (0, 1):
        assert O.eval_obf(back, (x,)) == O.eval_obf(gp, (x,))


def test_gp_malformed_texts():
    gp = O.obfuscate_nc1(8, NOT1, Rng(6), mode="direct", prime=31)
    good = O.gp_to_text(gp)
    lines = good.splitlines()
    k_bad = " ".join(["GP", "v1", "31", "1", "1", "9", str(gp.d)])
    cases = [
        "",
        good.replace("GP v1", "GX v1"),
        good.replace("GP v1", "GP v2"),
        "\n".join([k_bad] + lines[1:]),
        good.replace("inp 1", "inp 2", 1),  # input index beyond ell
        good.replace("fixed -", "fixed 1:2", 1),
        good.replace("retain 11", "retain 10", 1),  # contradicts fixed -
        good.replace("retain 11", "retain 1", 1),
        "\n".join(lines[:4] + [lines[4].replace("PUZZLE", "PUZ")] + lines[5:]),
        "\n".join(lines[:-2]),  # truncated encodings
    ]
    for bad in cases:
        with pytest.raises(ValueError):
            O.gp_from_text(bad)
