"""Acceptance gate: the eleven shipped criteria, one test each, full scale.

Run `pytest tests/test_acceptance.py -v` to get one pass/fail line per
criterion. Every tolerance below is the contractual number, not a softened
one; each test draws from its own frozen seed, so a pass is reproducible
and a fail is a defect, never noise. Expect roughly ten minutes total: the
heavy items are the 61-bit Kilian draws (criteria 3 and 7) and the garbled
checker cores (criterion 8).
"""

import itertools
import time

from jigsawobf import bootstrap as B
from jigsawobf import cli, mjp
from jigsawobf.barrington import (
    UNDEF,
    BranchingProgram,
    compile as compile_bp,
    eval_bp,
)
from jigsawobf.circuit import (
    Circuit,
    Gate,
    depth,
    eval_circuit,
    family_members,
    random_circuit,
    restrict,
    truth_table,
)
from jigsawobf.obf_nc1 import (
    EMPTY_ASSIGNMENT,
    PartialAssignment,
    encode_bp,
    eval_obf,
    form_value,
    garble,
    obfuscate_nc1,
    randomize,
)
from jigsawobf.zmod import Rng, random_prime_bits

SEED = 20260815

NOT1 = Circuit(("x1",), (Gate("g1", "NOT", ("x1",)),), "g1")
BIN_OPS = ("AND", "OR", "XOR", "NAND")


def _inputs(n):
    return [tuple((k >> j) & 1 for j in range(n)) for k in range(1 << n)]


def _assert_bp_matches(c, bp):
    assert bp.length <= 4 ** depth(c), f"length {bp.length} > 4^{depth(c)}"
    for x in _inputs(c.input_count):
        got = eval_bp(bp, x)
        assert got is not UNDEF, f"undefined on {x}"
        assert got == eval_circuit(c, x), f"mismatch on {x}"


def _enumerate_circuits(n_inputs, max_gates):
    """Every topologically ordered circuit with 1..max_gates gates whose
    output is its last gate, over the fixed input base."""
    base = tuple(f"x{i + 1}" for i in range(n_inputs))

    def rec(gates):
        wires = base + tuple(g.name for g in gates)
        if gates:
            yield Circuit(base, tuple(gates), gates[-1].name)
        if len(gates) == max_gates:
            return
        name = f"t{len(gates) + 1}"
        for a in wires:
            yield from rec(gates + (Gate(name, "NOT", (a,)),))
            for op in BIN_OPS:
                for b in wires:
                    yield from rec(gates + (Gate(name, op, (a, b)),))

    yield from rec(())


def test_criterion_01_barrington_bound_and_equivalence():
    start = time.perf_counter()
    rng = Rng(SEED + 1)
    exhaustive = 0
    for n_inputs in (1, 2):
        for c in _enumerate_circuits(n_inputs, 3):
            _assert_bp_matches(c, compile_bp(c))
            exhaustive += 1
    assert exhaustive == 3605 + 48456  # 1- and 2-input bases, <=3 gates

    for _ in range(500):
        c = random_circuit(
            rng.py.randrange(1, 5), rng.py.randrange(1, 9), rng, max_depth=4
        )
        _assert_bp_matches(c, compile_bp(c))

    elapsed = time.perf_counter() - start
    assert elapsed < 60.0, f"criterion budget exceeded: {elapsed:.1f}s"


def test_criterion_02_width2_parity_reference():
    # frozen two-step program: identity / swap on each input bit
    i2 = ((1, 0), (0, 1))
    swap = ((0, 1), (1, 0))
    bp = BranchingProgram.from_matrices(2, [(1, i2, swap), (2, i2, swap)], i2, swap)
    for x in _inputs(2):
        assert eval_bp(bp, x) == x[0] ^ x[1]


def test_criterion_03_zero_case_exactness():
    rng = Rng(SEED + 3)
    sample = []
    long_ones = 0
    while len(sample) < 20:
        c = random_circuit(
            rng.py.randrange(1, 4), rng.py.randrange(1, 4), rng, max_depth=2
        )
        bp = compile_bp(c)
        if bp.length > 20:
            continue
        zeros = [x for x in _inputs(c.input_count) if eval_circuit(c, x) == 0]
        if not zeros:
            continue
        if bp.length > 8:
            if long_ones == 6:  # keep the cubic-cost tail bounded
                continue
            long_ones += 1
        sample.append((bp, zeros))

    checked = 0
    for bp, zeros in sample:
        p = random_prime_bits(61, rng)
        for _ in range(200):
            rbp = randomize(bp, p, rng)
            for x in zeros:
                assert form_value(rbp, x) == 0, f"nonzero at {x}"
                checked += 1
    assert checked >= 20 * 200  # every BP had at least one zero input


def test_criterion_04_one_case_rarity():
    start = time.perf_counter()
    rng = Rng(SEED + 4)
    bp = compile_bp(NOT1)
    one_input = (0,)  # NOT(0) = 1

    zeros5 = sum(
        form_value(randomize(bp, 5, rng), one_input) == 0 for _ in range(50_000)
    )
    frac5 = zeros5 / 50_000
    assert 0.18 <= frac5 <= 0.22, f"p=5 zero fraction {frac5:.5f}"

    zeros101 = sum(
        form_value(randomize(bp, 101, rng), one_input) == 0 for _ in range(20_000)
    )
    frac101 = zeros101 / 20_000
    assert frac101 <= 0.05, f"p=101 zero fraction {frac101:.5f}"

    elapsed = time.perf_counter() - start
    assert elapsed < 300.0, f"criterion budget exceeded: {elapsed:.1f}s"


def _pinned_specifier(k, extra, rng):
    """Specifier whose level list is known to the caller: a shuffled
    singleton partition of [k] followed by `extra` random nonempty sets."""
    order = list(range(1, k + 1))
    rng.py.shuffle(order)
    levels = [frozenset({i}) for i in order]
    levels += [
        frozenset(rng.py.sample(range(1, k + 1), 1 + rng.py.randrange(k)))
        for _ in range(extra)
    ]
    levels = tuple(levels)

    def proc(p, prng):
        return mjp.SpecifierOutput(
            p, tuple((s, prng.py.randrange(p.p)) for s in levels)
        )

    return mjp.JigsawSpecifier(k, len(levels), proc), levels


def _violating_gates(constraint, variant, levels, k):
    s1, s2 = levels[0], levels[1]
    l = len(levels)
    if constraint == "addneg-same-set":
        return (
            (mjp.FormGate(mjp.ADD, (1, 2), s1 | s2),),
            (mjp.FormGate(mjp.NEG, (1,), s2),),
            (mjp.FormGate(mjp.ADD, (1, 2), s1),),
        )[variant % 3]
    if constraint == "mul-disjoint":
        return (
            (mjp.FormGate(mjp.MUL, (1, 1), s1),),  # overlaps itself
            (mjp.FormGate(mjp.MUL, (1, 2), s1),),  # wrong union
        )[variant % 2]
    if constraint == "drop-outdegree":
        return (
            (
                mjp.FormGate(mjp.DROP, (1,), s1),
                mjp.FormGate(mjp.ADD, (l + 1, l + 1), s1),
            ),
            (mjp.FormGate(mjp.DROP, (1,), s1),),  # output is the dropped wire
        )[variant % 2]
    # output-set: a perfectly level-respecting form that stops short of [k]
    return (mjp.FormGate(mjp.NEG, (1,), s1),)


def test_criterion_05_jver_correctness_contract():
    rng = Rng(SEED + 5)
    accepts = rejects = 0
    for i in range(500):
        k = rng.py.randrange(1, 6)
        count = rng.py.randrange(1, 9)
        force = (None, True, False)[i % 3]
        spec, _ = mjp.random_specifier(k, count, rng, force_zero=force)
        _, x, puzzle = mjp.jgen(16, k, count, spec, rng)
        form = mjp.random_compatible_form(x, k, rng)
        verdict = mjp.jver(puzzle, form)
        _, value = mjp.eval_form(form, x)
        assert int(verdict) == int(value == 0), f"case {i}: jver vs direct eval"
        accepts += int(verdict)
        rejects += 1 - int(verdict)
    assert accepts and rejects

    constraints = ("addneg-same-set", "mul-disjoint", "drop-outdegree", "output-set")
    for constraint in constraints:
        for i in range(100):
            k = rng.py.randrange(2, 6)
            spec, levels = _pinned_specifier(k, rng.py.randrange(0, 4), rng)
            _, _, puzzle = mjp.jgen(16, k, len(levels), spec, rng)
            form = mjp.MultilinearForm(
                k, levels, _violating_gates(constraint, i, levels, k)
            )
            verdict = mjp.jver(puzzle, form)
            assert int(verdict) == 0, f"{constraint} variant {i} accepted"
            assert verdict.diagnostic == constraint, (
                f"wanted {constraint}, verifier said {verdict.diagnostic}"
            )


def test_criterion_06_garble_equals_restriction():
    rng = Rng(SEED + 6)
    p = random_prime_bits(61, rng)
    members = family_members((2, 2))
    assert len(members) == 16
    for c in members:
        ebp = encode_bp(randomize(compile_bp(c), p, rng))
        for fixed in range(3):  # |J| = 0, 1, 2
            for positions in itertools.combinations((1, 2), fixed):
                for sigma in itertools.product((0, 1), repeat=fixed):
                    pa = (
                        PartialAssignment.of(dict(zip(positions, sigma)))
                        if fixed
                        else EMPTY_ASSIGNMENT
                    )
                    gp = garble(ebp, pa)
                    free = [j for j in (1, 2) if j not in positions]
                    if not free:
                        want = eval_circuit(c, sigma)
                        assert eval_obf(gp, ()) == want
                        continue
                    named = {c.inputs[j - 1]: b for j, b in zip(positions, sigma)}
                    rc = restrict(c, named) if named else c
                    for x in _inputs(len(free)):
                        assert eval_obf(gp, x) == eval_circuit(rc, x), (
                            f"{c.gates} fixed={named} free={x}"
                        )


def test_criterion_07_nc1_obfuscator_completeness():
    rng = Rng(SEED + 7)
    done = 0
    while done < 50:
        c = random_circuit(
            rng.py.randrange(1, 5), rng.py.randrange(1, 7), rng, max_depth=3
        )
        if compile_bp(c).length > 64:  # direct-mode carrier budget
            continue
        gp = obfuscate_nc1(61, c, rng, mode="direct")
        for x in _inputs(c.input_count):
            assert eval_obf(gp, x) == eval_circuit(c, x)
        done += 1

    for c in family_members((2, 2)):
        gp = obfuscate_nc1(61, c, rng, mode="universal", family=(2, 2))
        for x in _inputs(2):
            assert eval_obf(gp, x) == eval_circuit(c, x)


def _tampered(e1, e2, rng):
    which = rng.py.randrange(4)
    if which == 0:
        return B.Ciphertext(e1.tag, (1 - e1.bits[0],)), e2
    if which == 1:
        return e1, B.Ciphertext(e2.tag, (1 - e2.bits[0],))
    if which == 2:
        return B.Ciphertext(e1.tag + 1 + rng.py.randrange(9), e1.bits), e2
    return e1, B.Ciphertext(e2.tag ^ (1 + rng.py.randrange(7)), e2.bits)


def test_criterion_08_bootstrap_end_to_end():
    rng = Rng(SEED + 8)
    fhe = B.ref_fhe()
    proofs = B.ref_proofs(fhe)

    bundle = None
    for _ in range(20):
        c = random_circuit(3, 8, rng)
        bundle = B.obfuscate_polysize(61, c, B.identity_obfuscator, fhe, rng)
        for m in _inputs(3):
            assert B.evaluate(bundle, m, fhe, proofs) == eval_circuit(c, m)

    for c in family_members((1, 1)):  # micro params: lambda 16, one data bit
        micro = B.obfuscate_polysize(
            16, c, B.garbled_obfuscator, fhe, rng, family=(1, 1)
        )
        for m in _inputs(1):
            assert B.evaluate(micro, m, fhe, proofs) == eval_circuit(c, m)

    # soundness fuzz against the last identity bundle, both verification routes
    u = B.universal_descriptor(bundle.family, bundle.tag_bits)
    data = u.inputs[-3:]
    accepted = 0
    for _ in range(10_000):
        m = tuple(rng.py.randrange(2) for _ in range(3))
        f = restrict(u, dict(zip(data, m)))
        e1 = fhe.eval(bundle.pk1, f, bundle.g1)
        e2 = fhe.eval(bundle.pk2, f, bundle.g2)
        t1, t2 = _tampered(e1, e2, rng)
        st = B.EvalStatement(
            m, t1, t2, bundle.g1, bundle.g2, bundle.pk1, bundle.pk2, u
        )
        accepted += int(proofs.verify(st, B.EMPTY_PROOF))
        out = B._run_obfuscated(bundle.p, m, t1, t2, B.EMPTY_PROOF)
        assert out == 0, f"tampered pair produced {out}"
        accepted += out
    assert accepted == 0


def _renamed(c):
    names = {g.name: f"r{i + 1}" for i, g in enumerate(c.gates)}
    gates = tuple(
        Gate(names[g.name], g.op, tuple(names.get(a, a) for a in g.args))
        for g in c.gates
    )
    return Circuit(c.inputs, gates, names.get(c.output, c.output))


def _double_neg(c):
    extra = (Gate("_t1", "NOT", (c.output,)), Gate("_t2", "NOT", ("_t1",)))
    return Circuit(c.inputs, c.gates + extra, "_t2")


def test_criterion_09_hybrid_functional_invariance():
    rng = Rng(SEED + 9)
    fhe = B.ref_fhe()
    proofs = B.ref_proofs(fhe)
    expected_diffs = [("g2",), ("branch",), ("g1",), ("branch",)]
    for pair in range(10):
        c0 = random_circuit(2, rng.py.randrange(3, 7), rng)
        c1 = _double_neg(c0) if pair % 2 == 0 else _renamed(c0)
        assert truth_table(c0) == truth_table(c1)
        chain = B.hybrid_chain(c0, c1, B.identity_obfuscator, fhe, rng, family=(10, 2))
        assert len(chain) == 5
        for bundle in chain:
            for m in _inputs(2):
                assert B.evaluate(bundle, m, fhe, proofs) == eval_circuit(c0, m)
        diffs = [
            B.constructional_diff(chain[i], chain[i + 1]) for i in range(4)
        ]
        assert diffs == expected_diffs, f"pair {pair}: {diffs}"


def test_criterion_10_ind_cpa_harness_sanity():
    fhe = B.ref_fhe()
    floor = B.ind_cpa_game(
        fhe, B.random_guess_adversary, 10_000, rng=Rng(SEED + 10)
    )
    assert floor < 0.02, f"random-guess advantage {floor:.4f}"
    edge = B.ind_cpa_game(
        fhe, B.payload_reader_adversary, 10_000, rng=Rng(SEED + 11)
    )
    assert edge >= 0.48, f"payload-reader advantage {edge:.4f}"


def test_criterion_11_cli_artifact_determinism(tmp_path):
    (tmp_path / "xor.ckt").write_text(
        "input x1\ninput x2\ngate g1 XOR x1 x2\noutput g1\n"
    )
    (tmp_path / "not.ckt").write_text("input x1\ngate g1 NOT x1\noutput g1\n")
    (tmp_path / "wire.ckt").write_text("input x1\noutput x1\n")
    (tmp_path / "eight.ckt").write_text(
        "input x1\ninput x2\ninput x3\n"
        "gate g1 AND x1 x2\ngate g2 XOR g1 x3\ngate g3 OR x2 g2\n"
        "gate g4 NAND g1 g3\ngate g5 XOR g4 x1\ngate g6 NOT g5\n"
        "gate g7 AND g6 g2\ngate g8 XOR g7 g4\noutput g8\n"
    )
    runs = [
        ["compile-bp", str(tmp_path / "xor.ckt"), "--seed", "7"],
        ["obfuscate", str(tmp_path / "xor.ckt"), "--seed", "7"],
        ["obfuscate", str(tmp_path / "not.ckt"), "--mode", "universal", "--seed", "7"],
        ["obfuscate", str(tmp_path / "eight.ckt"), "--mode", "polysize", "--seed", "7"],
        [
            "obfuscate", str(tmp_path / "wire.ckt"),
            "--mode", "polysize", "--backend", "garbled", "--seed", "7",
        ],
    ]
    for i, args in enumerate(runs):
        a = tmp_path / f"first{i}"
        b = tmp_path / f"second{i}"
        assert cli.main(args + ["--out", str(a)]) == 0
        assert cli.main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes(), f"artifact {args} not deterministic"
