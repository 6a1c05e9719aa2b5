"""Command-line surface for the pipeline.

Five subcommands: compile-bp lowers a circuit to a branching program,
obfuscate produces a garbled program (direct or universal mode) or a two-key
bundle (polysize mode), eval runs any artifact on an input string, selftest
executes a reduced version of the acceptance suite, and bench prints a TSV
of size and time measurements per circuit depth.

Everything randomized is driven by --seed, so artifacts are byte-identical
across runs with equal flags.  Exit codes are a stable contract: 0 success,
2 parse error, 3 size/limit refusal, 4 input arity mismatch, 5 malformed
artifact file, 1 anything else.
"""

import argparse
import sys
import time
import zlib
from dataclasses import dataclass
from pathlib import Path

from . import bootstrap as bt
from . import mjp
from .barrington import (
    UNDEF,
    BranchingProgram,
    bp_from_text,
    bp_to_text,
    compile as compile_circuit,
    eval_bp,
    pad_to,
)
from .circuit import (
    Circuit,
    CircuitError,
    Gate,
    depth,
    eval_circuit,
    family_members,
    parse_circuit,
    random_circuit,
    restrict,
)
from .obf_nc1 import (
    EMPTY_ASSIGNMENT,
    ArityMismatch,
    LimitError,
    PartialAssignment,
    encode_bp,
    eval_obf,
    form_value,
    garble,
    gp_from_text,
    gp_to_text,
    obfuscate_nc1,
    randomize,
)
from .zmod import Rng, random_prime_bits


@dataclass(frozen=True)
class CliConfig:
    command: str
    path: str = None
    bits: str = None
    out: str = None
    seed: int = 0
    lam: int = 61
    prime: int = None
    mode: str = "direct"
    backend: str = "identity"
    pad: bool = False
    depths: str = "1:3"
    reps: int = 1
    times: bool = True


def _u64(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="jigsawobf",
        description="desk-scale circuit obfuscation pipeline",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=0, help="rng seed (default 0)")
    common.add_argument(
        "--lambda",
        dest="lam",
        type=int,
        default=61,
        metavar="BITS",
        help="prime / key width in bits (default 61)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "compile-bp", parents=[common], help="lower a circuit to a branching program"
    )
    p.add_argument("path", help="circuit file (.ckt)")
    p.add_argument("--out", help="output path (default: input with .bp suffix)")
    p.add_argument(
        "--pad", action="store_true", help="pad the program to exactly 4**depth steps"
    )

    p = sub.add_parser(
        "obfuscate", parents=[common], help="produce an obfuscated artifact"
    )
    p.add_argument("path", help="circuit file (.ckt)")
    p.add_argument("--out", help="output path (default: input with .obf suffix)")
    p.add_argument(
        "--mode",
        choices=("direct", "universal", "polysize"),
        default="direct",
        help="direct: garble this circuit; universal: hide it in its family; "
        "polysize: two-key bundle",
    )
    p.add_argument(
        "--backend",
        choices=("identity", "garbled"),
        default="identity",
        help="polysize checker obfuscator (identity is pass-through)",
    )
    p.add_argument("--prime", type=int, help="field override for direct/universal")

    p = sub.add_parser("eval", parents=[common], help="run an artifact on input bits")
    p.add_argument("path", help="program file (BP, GP, or IOP format)")
    p.add_argument("bits", help="input bits, e.g. 01")

    sub.add_parser("selftest", parents=[common], help="reduced acceptance suite")

    p = sub.add_parser("bench", parents=[common], help="size/time table per depth")
    p.add_argument("--depths", default="1:3", help="range like 1:3 or list like 1,2,3")
    p.add_argument("--reps", type=int, default=1, help="timing repetitions (min wins)")
    p.add_argument(
        "--no-times",
        dest="times",
        action="store_false",
        help="suppress wall-clock columns for rerun-identical output",
    )
    return parser


def parse_args(argv):
    ns = _build_parser().parse_args(argv)
    fields = {f for f in CliConfig.__dataclass_fields__}
    return CliConfig(**{k: v for k, v in vars(ns).items() if k in fields})


# ---------------------------------------------------------------- subcommands


def _read(path):
    return Path(path).read_text()


def _parse_bits(text):
    if not text or set(text) - {"0", "1"}:
        raise ValueError(f"input must be a nonempty 0/1 string, got {text!r}")
    return tuple(int(ch) for ch in text)


def cmd_compile_bp(cfg):
    c = parse_circuit(_read(cfg.path))
    bp = compile_circuit(c)
    bound = 4 ** depth(c)
    if cfg.pad:
        bp = pad_to(bp, bound)
    out = Path(cfg.out) if cfg.out else Path(cfg.path).with_suffix(".bp")
    out.write_text(bp_to_text(bp))
    print("length\twidth\tbound")
    print(f"{bp.length}\t{bp.width}\t{bound}")
    return 0


def cmd_obfuscate(cfg):
    c = parse_circuit(_read(cfg.path))
    rng = Rng(cfg.seed)
    if cfg.mode in ("direct", "universal"):
        gp = obfuscate_nc1(cfg.lam, c, rng, mode=cfg.mode, prime=cfg.prime)
        text = gp_to_text(gp)
        stats = (cfg.mode, "-", gp.n, gp.d, gp.entry_count)
    else:
        if cfg.prime is not None:
            raise ValueError("--prime applies to direct/universal modes only")
        io = bt.identity_obfuscator if cfg.backend == "identity" else bt.garbled_obfuscator
        bundle = bt.obfuscate_polysize(cfg.lam, c, io, bt.ref_fhe(), rng)
        text = bt.bundle_to_text(bundle)
        if cfg.backend == "garbled":
            gp = bundle.p.data
            stats = (cfg.mode, cfg.backend, gp.n, gp.d, gp.entry_count)
        else:
            stats = (cfg.mode, cfg.backend, "-", "-", "-")
    out = Path(cfg.out) if cfg.out else Path(cfg.path).with_suffix(".obf")
    out.write_text(text)
    print("mode\tbackend\tn\td\tencodings\tbytes")
    print("\t".join(str(v) for v in stats) + f"\t{len(text.encode())}")
    return 0


def cmd_eval(cfg):
    text = _read(cfg.path)
    bits = _parse_bits(cfg.bits)
    parts = text.split(None, 1)
    head = parts[0] if parts else ""
    if head == "BP":
        bp = bp_from_text(text)
        if len(bits) != bp.input_count:
            raise ArityMismatch(f"program wants {bp.input_count} bits, got {len(bits)}")
        value = eval_bp(bp, bits)
        if value is UNDEF:
            raise RuntimeError("program output is undefined on this input")
    elif head == "GP":
        value = eval_obf(gp_from_text(text), bits)
    elif head == "IOP":
        fhe = bt.ref_fhe()
        value = bt.evaluate(bt.bundle_from_text(text), bits, fhe, bt.ref_proofs(fhe))
    else:
        raise ValueError("unrecognized program file (expected BP, GP, or IOP header)")
    print(value)
    return 0


# ------------------------------------------------------------------ selftest


XOR2 = Circuit(("x1", "x2"), (Gate("g1", "XOR", ("x1", "x2")),), "g1")
AND2 = Circuit(("x1", "x2"), (Gate("g1", "AND", ("x1", "x2")),), "g1")
NOT1 = Circuit(("x1",), (Gate("g1", "NOT", ("x1",)),), "g1")


def _all_inputs(n):
    return [tuple((k >> j) & 1 for j in range(n)) for k in range(1 << n)]


def _check_barrington(rng):
    for _ in range(40):
        c = random_circuit(rng.py.randrange(1, 5), rng.py.randrange(1, 7), rng,
                           max_depth=3)
        bp = compile_circuit(c)
        assert bp.length <= 4 ** depth(c), "length bound exceeded"
        for x in _all_inputs(c.input_count):
            assert eval_bp(bp, x) == eval_circuit(c, x), "bp disagrees with circuit"
    return "40 random circuits, exhaustive inputs, length within 4**depth"


def _check_width2_reference(rng):
    i2 = ((1, 0), (0, 1))
    swap = ((0, 1), (1, 0))
    bp = BranchingProgram.from_matrices(2, [(1, i2, swap), (2, i2, swap)], i2, swap)
    got = tuple(eval_bp(bp, x) for x in ("00", "01", "10", "11"))
    assert got == (0, 1, 1, 0), f"width-2 parity program computed {got}"
    return "two-step width-2 swap program computes parity exactly"


def _check_zero_case(rng):
    p = random_prime_bits(61, rng)
    checked = 0
    for c in (XOR2, AND2):
        bp = compile_circuit(c)
        for x in _all_inputs(2):
            if eval_circuit(c, x) != 0:
                continue
            for _ in range(12):
                assert form_value(randomize(bp, p, rng), x) == 0, "nonzero on 0-input"
                checked += 1
    return f"{checked} randomizations over 0-inputs, 61-bit prime, all exactly 0"


def _check_bookend_mutation(rng):
    # the zero identity must break under the same-pattern bookend variant,
    # proving the zero-case check can catch that bug
    p = random_prime_bits(61, rng)
    bp = compile_circuit(NOT1)
    broken = sum(
        form_value(randomize(bp, p, rng, bookend_pattern="same"), (1,)) != 0
        for _ in range(40)
    )
    control = sum(
        form_value(randomize(bp, p, rng), (1,)) != 0 for _ in range(40)
    )
    assert control == 0, "complementary bookends must keep the zero identity"
    assert broken > 0, "mutated bookends were not detected"
    return f"same-pattern mutation flagged in {broken}/40 draws, control clean"


def _check_one_case(rng):
    bp = compile_circuit(NOT1)
    trials = 5000
    zeros = sum(form_value(randomize(bp, 5, rng), (0,)) == 0 for _ in range(trials))
    frac = zeros / trials
    assert 0.17 <= frac <= 0.23, f"zero fraction {frac:.4f} outside [0.17, 0.23]"
    return f"p=5 zero fraction {frac:.4f} over {trials} draws"


def _check_jver(rng):
    accepts = rejects = 0
    for i in range(60):
        k = rng.py.randrange(1, 5)
        count = k + rng.py.randrange(0, 4)
        spec, _ = mjp.random_specifier(k, count, rng, force_zero=(i % 2 == 0))
        _, x, puzzle = mjp.jgen(16, k, count, spec, rng)
        form = mjp.random_compatible_form(x, k, rng)
        verdict = mjp.jver(puzzle, form)
        _, value = mjp.eval_form(form, x)
        assert int(verdict) == int(value == 0), "jver disagrees with direct evaluation"
        accepts += int(verdict)
        rejects += 1 - int(verdict)
    assert accepts and rejects, "verifier saw only one outcome"

    # pinned levels {1}, {2}, {1} so each violating form is unambiguous
    s1, s2 = frozenset({1}), frozenset({2})
    levels = (s1, s2, s1)
    spec = mjp.JigsawSpecifier(
        2, 3, lambda p, prng: mjp.SpecifierOutput(p, tuple((s, 1) for s in levels))
    )
    _, x, puzzle = mjp.jgen(16, 2, 3, spec, rng)
    bad_forms = {
        "addneg-same-set": (mjp.FormGate(mjp.ADD, (1, 2), s1 | s2),),
        "mul-disjoint": (mjp.FormGate(mjp.MUL, (1, 3), s1),),
        "drop-outdegree": (
            mjp.FormGate(mjp.DROP, (1,), s1),
            mjp.FormGate(mjp.ADD, (4, 4), s1),
        ),
        "output-set": (mjp.FormGate(mjp.NEG, (1,), s1),),
    }
    for name, gates in bad_forms.items():
        verdict = mjp.jver(puzzle, mjp.MultilinearForm(2, levels, gates))
        assert int(verdict) == 0, f"{name} form accepted"
        assert verdict.diagnostic == name, (
            f"expected {name}, verifier said {verdict.diagnostic}"
        )
    return "60 random pairs agree with direct evaluation; 4 violations named"


def _check_garble(rng):
    p = random_prime_bits(16, rng)
    ebp = encode_bp(randomize(compile_circuit(XOR2), p, rng))
    for j, b in ((1, 0), (1, 1), (2, 0), (2, 1)):
        gp = garble(ebp, PartialAssignment.of({j: b}))
        rest = restrict(XOR2, {XOR2.inputs[j - 1]: b})
        for x in (0, 1):
            assert eval_obf(gp, (x,)) == eval_circuit(rest, (x,)), "garble mismatch"
    full = garble(ebp, EMPTY_ASSIGNMENT)
    for x in _all_inputs(2):
        assert eval_obf(full, x) == eval_circuit(XOR2, x), "ungarbled mismatch"
    return "all single-bit fixings equal the restricted circuit"


def _check_nc1(rng):
    for c in (XOR2, AND2):
        gp = obfuscate_nc1(61, c, rng, mode="direct")
        for x in _all_inputs(2):
            assert eval_obf(gp, x) == eval_circuit(c, x), "direct mode mismatch"
    for c in family_members((1, 1)):
        gp = obfuscate_nc1(16, c, rng, mode="universal", family=(1, 1))
        for x in (0, 1):
            assert eval_obf(gp, (x,)) == eval_circuit(c, (x,)), "universal mismatch"
    return "direct xor/and at 61-bit p; universal (1,1) family at 16-bit p"


def _check_bootstrap(rng):
    fhe = bt.ref_fhe()
    proofs = bt.ref_proofs(fhe)
    for _ in range(4):
        c = random_circuit(3, 8, rng)
        bundle = bt.obfuscate_polysize(61, c, bt.identity_obfuscator, fhe, rng)
        for m in _all_inputs(3):
            assert bt.evaluate(bundle, m, fhe, proofs) == eval_circuit(c, m)
    u = bt.universal_descriptor(bundle.family, bundle.tag_bits)
    data = u.inputs[-3:]
    accepted = 0
    for _ in range(600):
        m = tuple(rng.py.randrange(2) for _ in range(3))
        f = restrict(u, dict(zip(data, m)))
        e1 = fhe.eval(bundle.pk1, f, bundle.g1)
        e2 = fhe.eval(bundle.pk2, f, bundle.g2)
        if rng.py.randrange(2):
            e1 = bt.Ciphertext(e1.tag, (1 - e1.bits[0],) + e1.bits[1:])
        else:
            e2 = bt.Ciphertext(e2.tag + 1, e2.bits)
        accepted += bt._run_obfuscated(bundle.p, m, e1, e2, bt.EMPTY_PROOF)
    assert accepted == 0, f"{accepted} tampered pairs accepted"
    member = family_members((1, 1))[1]
    micro = bt.obfuscate_polysize(
        16, member, bt.garbled_obfuscator, fhe, rng, family=(1, 1)
    )
    for m in (0, 1):
        assert bt.evaluate(micro, (m,), fhe, proofs) == eval_circuit(member, (m,))
    return "identity pipeline exact on 4 circuits; 600 tamperings rejected; garbled micro exact"


def _check_chain(rng):
    fhe = bt.ref_fhe()
    proofs = bt.ref_proofs(fhe)
    for _ in range(2):
        c0 = random_circuit(2, 5, rng)
        c1 = Circuit(
            c0.inputs,
            c0.gates
            + (Gate("_t1", "NOT", (c0.output,)), Gate("_t2", "NOT", ("_t1",))),
            "_t2",
        )
        chain = bt.hybrid_chain(c0, c1, bt.identity_obfuscator, fhe, rng, family=(7, 2))
        for bundle in chain:
            for m in _all_inputs(2):
                assert bt.evaluate(bundle, m, fhe, proofs) == eval_circuit(c0, m)
        diffs = [bt.constructional_diff(chain[i], chain[i + 1]) for i in range(4)]
        assert diffs == [("g2",), ("branch",), ("g1",), ("branch",)], diffs
    return "2 chains: invariant function, diffs g2/branch/g1/branch"


def _check_ind_cpa(rng):
    fhe = bt.ref_fhe()
    floor = bt.ind_cpa_game(fhe, bt.random_guess_adversary, 2000, rng=rng.spawn())
    edge = bt.ind_cpa_game(fhe, bt.payload_reader_adversary, 2000, rng=rng.spawn())
    assert floor < 0.03, f"guess advantage {floor:.4f}"
    assert edge >= 0.48, f"reader advantage {edge:.4f}"
    return f"guess {floor:.4f} < 0.03; reader {edge:.4f} >= 0.48"


def _check_determinism(rng):
    a = gp_to_text(obfuscate_nc1(61, XOR2, Rng(7), mode="direct"))
    b = gp_to_text(obfuscate_nc1(61, XOR2, Rng(7), mode="direct"))
    assert a == b, "garbled artifact differs across equal seeds"
    fhe = bt.ref_fhe()
    c = bt.bundle_to_text(
        bt.obfuscate_polysize(61, XOR2, bt.identity_obfuscator, fhe, Rng(7))
    )
    d = bt.bundle_to_text(
        bt.obfuscate_polysize(61, XOR2, bt.identity_obfuscator, fhe, Rng(7))
    )
    assert c == d, "bundle artifact differs across equal seeds"
    return "garbled program and bundle byte-identical across equal seeds"


_SELFTEST = (
    ("barrington-equivalence", _check_barrington),
    ("width2-parity-reference", _check_width2_reference),
    ("randomize-zero-case", _check_zero_case),
    ("bookend-mutation-detected", _check_bookend_mutation),
    ("randomize-one-case-rate", _check_one_case),
    ("jver-contract", _check_jver),
    ("garble-restriction", _check_garble),
    ("nc1-completeness", _check_nc1),
    ("bootstrap-end-to-end", _check_bootstrap),
    ("replacement-chain", _check_chain),
    ("ind-cpa-harness", _check_ind_cpa),
    ("artifact-determinism", _check_determinism),
)


def cmd_selftest(cfg):
    failures = 0
    print("result\tcheck\tseconds\tdetail")
    for name, fn in _SELFTEST:
        rng = Rng(cfg.seed ^ zlib.crc32(name.encode()))
        start = time.perf_counter()
        try:
            detail = fn(rng)
            status = "PASS"
        except AssertionError as exc:
            detail = str(exc) or "assertion failed"
            status = "FAIL"
            failures += 1
        elapsed = time.perf_counter() - start
        print(f"{status}\t{name}\t{elapsed:.2f}\t{detail}")
    return 1 if failures else 0


# --------------------------------------------------------------------- bench


def _parse_depths(text):
    try:
        if ":" in text:
            lo, hi = (int(t) for t in text.split(":"))
            depths = list(range(lo, hi + 1))
        else:
            depths = [int(t) for t in text.split(",")]
    except ValueError:
        raise ValueError(f"bad depth range {text!r}") from None
    if not depths or any(d < 1 for d in depths) or depths != sorted(depths):
        raise ValueError(f"bad depth range {text!r}")
    return depths


def _balanced_circuit(d):
    """Complete alternating XOR/AND tree of depth d over up to 4 inputs."""
    leaves = [f"x{(i % min(1 << d, 4)) + 1}" for i in range(1 << d)]
    inputs = tuple(dict.fromkeys(leaves))
    gates = []
    level = 0
    while len(leaves) > 1:
        op = "XOR" if level % 2 == 0 else "AND"
        nxt = []
        for i in range(0, len(leaves), 2):
            name = f"t{level}_{i // 2}"
            gates.append(Gate(name, op, (leaves[i], leaves[i + 1])))
            nxt.append(name)
        leaves = nxt
        level += 1
    return Circuit(inputs, tuple(gates), leaves[0])


def _timed(fn, reps):
    best = None
    result = None
    for _ in range(reps):
        start = time.perf_counter()
        result = fn()
        elapsed = time.perf_counter() - start
        best = elapsed if best is None else min(best, elapsed)
    return result, best


def cmd_bench(cfg):
    depths = _parse_depths(cfg.depths)
    reps = max(1, cfg.reps)
    rng = Rng(cfg.seed)
    p = random_prime_bits(cfg.lam, rng)
    print("depth\tlength\tbound\trandomize_s\tencode_s\teval_s")
    for d in depths:
        c = _balanced_circuit(d)
        bp = compile_circuit(c)
        draw = rng.spawn()
        rbp, t_rand = _timed(lambda: randomize(bp, p, draw), reps)
        ebp, t_enc = _timed(lambda: encode_bp(rbp), reps)
        gp = garble(ebp, EMPTY_ASSIGNMENT)
        zero = (0,) * c.input_count
        _, t_eval = _timed(lambda: eval_obf(gp, zero), reps)
        cols = [str(d), str(bp.length), str(4 ** d)]
        if cfg.times:
            cols += [f"{t_rand:.4f}", f"{t_enc:.4f}", f"{t_eval:.4f}"]
        else:
            cols += ["-", "-", "-"]
        print("\t".join(cols))
    return 0


# ---------------------------------------------------------------- dispatcher


_COMMANDS = {
    "compile-bp": cmd_compile_bp,
    "obfuscate": cmd_obfuscate,
    "eval": cmd_eval,
    "selftest": cmd_selftest,
    "bench": cmd_bench,
}


def main(argv=None):
    cfg = parse_args(argv)
    try:
        return _COMMANDS[cfg.command](cfg)
    except CircuitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ArityMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except Exception as exc:  # noqa: BLE001 - the 1 bucket is the contract
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
