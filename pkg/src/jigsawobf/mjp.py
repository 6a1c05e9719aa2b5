"""Multilinear jigsaw puzzles: leveled encodings of field elements plus a
verifier for multilinear forms over them.

A specifier describes, for a freshly drawn prime, an ordered list of
(level set, value) pairs; the generator encodes those pairs into a puzzle.
A multilinear form is a straight-line program over the puzzle's entries
whose level discipline makes every index of the top level enter each
input-to-output path exactly once: additions and negations stay inside one
level set, multiplications take disjoint sets to their union, and the
output must sit at the full level set. The verifier accepts exactly the
forms that evaluate to zero at the top level.

Encoding backends are pluggable behind a tiny interface. The only one
shipped is `transparent`, whose payloads are the plaintext values; it
realizes the framework's functionality exactly and its hardness
assumption (indistinguishability of specifier families) not at all. A
hiding backend would slot in without touching any caller.
"""

from dataclasses import dataclass

from .zmod import PrimeModulus, gen_prime

ADD = "ADD"
MUL = "MUL"
NEG = "NEG"
DROP = "DROP"

_UNARY = (NEG, DROP)
_BINARY = (ADD, MUL)


@dataclass(frozen=True)
class FormGate:
    kind: str
    args: tuple  # wire ids, 1-based
    out_set: frozenset

    def __post_init__(self):
        if self.kind in _UNARY:
            want = 1
        elif self.kind in _BINARY:
            want = 2
        else:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.args) != want:
            raise ValueError(f"{self.kind} takes {want} wire(s)")


@dataclass(frozen=True)
class MultilinearForm:
    """Straight-line program: wires 1..l are the puzzle entries, gate t
    defines wire l + t. The last wire is the output."""

    k: int
    input_sets: tuple  # frozensets, one per puzzle entry
    gates: tuple

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be positive")
        full = set(range(1, self.k + 1))
        for s in self.input_sets:
            if not set(s) <= full:
                raise ValueError("input level set outside [k]")
        wires = len(self.input_sets)
        if wires + len(self.gates) == 0:
            raise ValueError("form has no wires")
        for g in self.gates:
            if not set(g.out_set) <= full:
                raise ValueError("gate level set outside [k]")
            for a in g.args:
                if not (1 <= a <= wires):
                    raise ValueError(f"gate references missing wire {a}")
            wires += 1

    @property
    def element_count(self):
        return len(self.input_sets)

    @property
    def output_wire(self):
        return len(self.input_sets) + len(self.gates)

    def wire_set(self, wire):
        if wire <= len(self.input_sets):
            return self.input_sets[wire - 1]
        return self.gates[wire - len(self.input_sets) - 1].out_set


@dataclass(frozen=True)
class Violation:
    """First broken form constraint: which rule, at which wire."""

    constraint: str  # addneg-same-set | mul-disjoint | drop-outdegree |
    #                  output-set | alpha-bound
    wire: int
    message: str


def validate_form(form, alpha=None):
    """None when all level constraints hold (and the size bound, if given),
    otherwise the first Violation in wire order."""
    if alpha is not None and len(form.gates) > alpha:
        return Violation(
            "alpha-bound", 0, f"form has {len(form.gates)} gates, bound is {alpha}"
        )
    l = len(form.input_sets)
    dropped = set()
    for t, g in enumerate(form.gates):
        wire = l + t + 1
        for a in g.args:
            if a in dropped:
                return Violation(
                    "drop-outdegree", wire, f"wire {wire} consumes dropped wire {a}"
                )
        sets = [form.wire_set(a) for a in g.args]
        if g.kind in (ADD, NEG):
            same = all(s == sets[0] for s in sets) and g.out_set == sets[0]
            if not same:
                return Violation(
                    "addneg-same-set",
                    wire,
                    f"{g.kind} wire {wire} must keep one level set",
                )
        elif g.kind == MUL:
            if sets[0] & sets[1]:
                return Violation(
                    "mul-disjoint",
                    wire,
                    f"MUL wire {wire} has overlapping operand sets",
                )
            if g.out_set != sets[0] | sets[1]:
                return Violation(
                    "mul-disjoint",
                    wire,
                    f"MUL wire {wire} must be set at the union of its operands",
                )
        else:  # DROP
            dropped.add(wire)
    out = form.output_wire
    if out in dropped:
        return Violation("drop-outdegree", out, "output wire is dropped")
    if form.wire_set(out) != frozenset(range(1, form.k + 1)):
        return Violation("output-set", out, "output wire is not at the full level")
    return None


# ---------------------------------------------------------------- specifiers


@dataclass(frozen=True)
class SpecifierOutput:
    p: PrimeModulus
    pairs: tuple  # ((frozenset level, int value), ...)

    def __post_init__(self):
        for s, a in self.pairs:
            if not (0 <= a < self.p.p):
                raise ValueError("specifier value out of field range")


@dataclass(frozen=True)
class JigsawSpecifier:
    """Procedure yielding, for a prime, an ordered list of leveled values.

    proc(p: PrimeModulus, rng) must return a SpecifierOutput with exactly
    element_count pairs, each level a subset of [k]. Determinism comes
    from the explicit rng.
    """

    k: int
    element_count: int
    proc: object

    def run(self, p, rng):
        out = self.proc(p, rng)
        if not isinstance(out, SpecifierOutput) or out.p.p != p.p:
            raise ValueError("specifier returned output for the wrong prime")
        if len(out.pairs) != self.element_count:
            raise ValueError(
                f"specifier promised {self.element_count} pairs, got {len(out.pairs)}"
            )
        full = set(range(1, self.k + 1))
        for s, _ in out.pairs:
            if not set(s) <= full:
                raise ValueError("specifier level outside [k]")
        return out


def compatible(form, x):
    """Element counts match and the level sequences agree in order.

    A specifier output does not carry its own k; the form's constructor
    already confines its sets to [k], so agreeing sequences agree on the
    universe too.
    """
    return form.element_count == len(x.pairs) and all(
        fs == ps for fs, (ps, _) in zip(form.input_sets, x.pairs)
    )


def eval_form(form, x):
    """Gate-by-gate plaintext evaluation; the oracle the verifier is held
    to. Returns the output wire's (level set, value)."""
    if not compatible(form, x):
        raise ValueError("form incompatible with specifier output")
    bad = validate_form(form)
    if bad is not None:
        raise ValueError(f"invalid form: {bad.constraint} at wire {bad.wire}")
    p = x.p.p
    vals = [a for _, a in x.pairs]
    for g in form.gates:
        ins = [vals[a - 1] for a in g.args]
        if g.kind == ADD:
            vals.append((ins[0] + ins[1]) % p)
        elif g.kind == MUL:
            vals.append((ins[0] * ins[1]) % p)
        elif g.kind == NEG:
            vals.append((-ins[0]) % p)
        else:
            vals.append(0)  # dropped; value never read again
    out = form.output_wire
    return form.wire_set(out), vals[out - 1]


# ---------------------------------------------------------------- backends


@dataclass(frozen=True)
class Prms:
    backend: str
    k: int
    p: int


@dataclass(frozen=True)
class Encoding:
    level: frozenset
    payload: object


@dataclass(frozen=True)
class Puzzle:
    prms: Prms
    encodings: tuple


class EncodingBackend:
    """Leveled-encoding provider.

    The framework's security rests on an indistinguishability assumption
    about specifier families; a backend is free to realize it or (like the
    transparent one) to deliberately not. Only functional correctness is
    promised here: the arithmetic hooks must track plaintext arithmetic
    and zero_test must decide zero exactly.
    """

    name = "abstract"

    def gen_secret(self, p, k, rng):
        raise NotImplementedError

    def encode(self, prms, secret, level, value):
        raise NotImplementedError

    def decode(self, prms, secret, payload):
        raise NotImplementedError

    def add(self, prms, u1, u2):
        raise NotImplementedError

    def neg(self, prms, u):
        raise NotImplementedError

    def mul(self, prms, u1, u2):
        raise NotImplementedError

    def zero_test(self, prms, u):
        raise NotImplementedError


class TransparentBackend(EncodingBackend):
    """Payload equals plaintext; hides nothing, verifies everything."""

    name = "transparent"

    def gen_secret(self, p, k, rng):
        return p.p

    def encode(self, prms, secret, level, value):
        return value

    def decode(self, prms, secret, payload):
        return payload

    def add(self, prms, u1, u2):
        return (u1 + u2) % prms.p

    def neg(self, prms, u):
        return (-u) % prms.p

    def mul(self, prms, u1, u2):
        return (u1 * u2) % prms.p

    def zero_test(self, prms, u):
        return u == 0


BACKENDS = {"transparent": TransparentBackend()}


def get_backend(name):
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown encoding backend {name!r}") from None


# ---------------------------------------------------------------- protocol


def inst_gen(lam, k, rng, backend="transparent"):
    """Draw the instance prime and backend secret; prms is public."""
    if k < 1:
        raise ValueError("k must be positive")
    be = get_backend(backend)
    p = gen_prime(lam, rng)
    secret = be.gen_secret(p, k, rng)
    return p, Prms(be.name, k, p.p), secret


def encode(p, prms, secret, level, value):
    be = get_backend(prms.backend)
    if not set(level) <= set(range(1, prms.k + 1)):
        raise ValueError("level set outside [k]")
    if not (0 <= value < p.p):
        raise ValueError("value out of field range")
    return Encoding(frozenset(level), be.encode(prms, secret, frozenset(level), value))


def jgen(lam, k, element_count, specifier, rng, backend="transparent"):
    """Instance + specifier run + encoded puzzle.

    The puzzle is the public part; the specifier output X stays private to
    the generator (the transparent backend leaks it, by design).
    """
    if specifier.k != k or specifier.element_count != element_count:
        raise ValueError("specifier parameters do not match jgen arguments")
    p, prms, secret = inst_gen(lam, k, rng, backend)
    x = specifier.run(p, rng)
    encs = tuple(encode(p, prms, secret, s, a) for s, a in x.pairs)
    return p, x, Puzzle(prms, encs)


class JVerResult(int):
    """Verifier verdict: equals 0 or 1; carries why rejection happened."""

    def __new__(cls, bit, diagnostic=None):
        self = super().__new__(cls, bit)
        self.diagnostic = diagnostic
        return self


def jver(puzzle, form, alpha=None):
    """1 exactly when the form is well-formed, matches the puzzle's level
    sequence, and evaluates to zero at the full level; 0 otherwise, with a
    diagnostic naming the reason."""
    prms = puzzle.prms
    if form.k != prms.k or form.element_count != len(puzzle.encodings):
        return JVerResult(0, "incompatible")
    for fs, e in zip(form.input_sets, puzzle.encodings):
        if fs != e.level:
            return JVerResult(0, "incompatible")
    bad = validate_form(form, alpha)
    if bad is not None:
        return JVerResult(0, bad.constraint)
    be = get_backend(prms.backend)
    vals = [e.payload for e in puzzle.encodings]
    for g in form.gates:
        ins = [vals[a - 1] for a in g.args]
        if g.kind == ADD:
            vals.append(be.add(prms, ins[0], ins[1]))
        elif g.kind == MUL:
            vals.append(be.mul(prms, ins[0], ins[1]))
        elif g.kind == NEG:
            vals.append(be.neg(prms, ins[0]))
        else:
            vals.append(None)
    if be.zero_test(prms, vals[form.output_wire - 1]):
        return JVerResult(1, None)
    return JVerResult(0, "nonzero")


# ------------------------------------------------------------- serialization


def _set_text(s):
    return ",".join(str(i) for i in sorted(s)) if s else "-"


def _set_parse(tok, k, where):
    if tok == "-":
        return frozenset()
    try:
        out = frozenset(int(t) for t in tok.split(","))
    except ValueError:
        raise ValueError(f"{where}: bad level set {tok!r}") from None
    if not out <= frozenset(range(1, k + 1)):
        raise ValueError(f"{where}: level set outside [k]")
    return out


def form_to_text(form):
    lines = [f"MF v1 {form.k} {form.element_count}"]
    for i, s in enumerate(form.input_sets, start=1):
        lines.append(f"{i} INPUT {_set_text(s)}")
    wire = form.element_count
    for g in form.gates:
        wire += 1
        args = " ".join(str(a) for a in g.args)
        lines.append(f"{wire} {g.kind} {args} {_set_text(g.out_set)}")
    return "\n".join(lines) + "\n"


def form_from_text(text):
    lines = [ln for ln in (raw.strip() for raw in text.splitlines()) if ln]
    if not lines:
        raise ValueError("empty form text")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "MF" or head[1] != "v1":
        raise ValueError("bad header; expected `MF v1 k ell`")
    try:
        k, l = int(head[2]), int(head[3])
    except ValueError:
        raise ValueError("bad header; expected integer parameters") from None
    input_sets = []
    gates = []
    for n, ln in enumerate(lines[1:], start=2):
        toks = ln.split()
        where = f"line {n}"
        if len(toks) < 3:
            raise ValueError(f"{where}: short gate line")
        try:
            wire = int(toks[0])
        except ValueError:
            raise ValueError(f"{where}: bad wire id {toks[0]!r}") from None
        kind = toks[1]
        if kind == "INPUT":
            if len(toks) != 3 or wire != len(input_sets) + 1 or gates:
                raise ValueError(f"{where}: misplaced INPUT line")
            input_sets.append(_set_parse(toks[2], k, where))
            continue
        if kind in _BINARY:
            if len(toks) != 5:
                raise ValueError(f"{where}: {kind} needs two wires and a set")
            args = (int(toks[2]), int(toks[3]))
        elif kind in _UNARY:
            if len(toks) != 4:
                raise ValueError(f"{where}: {kind} needs one wire and a set")
            args = (int(toks[2]),)
        else:
            raise ValueError(f"{where}: unknown gate kind {kind!r}")
        if wire != len(input_sets) + len(gates) + 1:
            raise ValueError(f"{where}: wire ids must be consecutive")
        gates.append(FormGate(kind, args, _set_parse(toks[-1], k, where)))
    if len(input_sets) != l:
        raise ValueError(f"declared {l} inputs, found {len(input_sets)}")
    return MultilinearForm(k, tuple(input_sets), tuple(gates))


def puzzle_to_text(puzzle):
    prms = puzzle.prms
    lines = [f"PUZZLE v1 {prms.backend} {prms.k} {len(puzzle.encodings)} {prms.p}"]
    for e in puzzle.encodings:
        lines.append(f"{_set_text(e.level)} {e.payload}")
    return "\n".join(lines) + "\n"


def puzzle_from_text(text):
    lines = [ln for ln in (raw.strip() for raw in text.splitlines()) if ln]
    if not lines:
        raise ValueError("empty puzzle text")
    head = lines[0].split()
    if len(head) != 6 or head[0] != "PUZZLE" or head[1] != "v1":
        raise ValueError("bad header; expected `PUZZLE v1 backend k ell p`")
    backend = head[2]
    get_backend(backend)
    try:
        k, l, p = int(head[3]), int(head[4]), int(head[5])
    except ValueError:
        raise ValueError("bad header; expected integer parameters") from None
    if len(lines) - 1 != l:
        raise ValueError(f"declared {l} encodings, found {len(lines) - 1}")
    encs = []
    for n, ln in enumerate(lines[1:], start=2):
        toks = ln.split()
        if len(toks) != 2:
            raise ValueError(f"line {n}: expected `<set> <payload>`")
        level = _set_parse(toks[0], k, f"line {n}")
        try:
            payload = int(toks[1])
        except ValueError:
            raise ValueError(f"line {n}: bad payload") from None
        if not (0 <= payload < p):
            raise ValueError(f"line {n}: payload out of range")
        encs.append(Encoding(level, payload))
    return Puzzle(Prms(backend, k, p), tuple(encs))


# ---------------------------------------------------------------- sampling


def random_specifier(k, element_count, rng, force_zero=None):
    """Specifier whose levels include a partition of [k], so compatible
    valid forms reaching the full level always exist.

    force_zero=True plants values whose full product is zero; False forces
    every value nonzero (the product then cannot be zero); None leaves
    values uniform.
    """
    if element_count < 1:
        raise ValueError("need at least one element")
    idx = list(range(1, k + 1))
    rng.py.shuffle(idx)
    blocks = min(element_count, k, 1 + rng.py.randrange(k))
    cuts = sorted(rng.py.sample(range(1, k), blocks - 1)) if blocks > 1 else []
    parts = []
    lo = 0
    for hi in cuts + [k]:
        parts.append(frozenset(idx[lo:hi]))
        lo = hi
    levels = parts + [
        frozenset(rng.py.sample(range(1, k + 1), rng.py.randrange(k + 1)))
        for _ in range(element_count - blocks)
    ]

    def proc(p, prng):
        pairs = []
        for s in levels:
            if force_zero is None:
                a = prng.py.randrange(p.p)
            elif force_zero:
                a = 0
            else:
                a = 1 + prng.py.randrange(p.p - 1)
            pairs.append((s, a))
        return SpecifierOutput(p, tuple(pairs))

    return JigsawSpecifier(k, element_count, proc), len(parts)


def random_compatible_form(x, k, rng, extra_gates=2):
    """Valid form compatible with the specifier output: multiply a
    first-fit disjoint cover of [k] up to the full set, drop everything
    else, and pad with value-preserving negations."""
    l = len(x.pairs)
    full = frozenset(range(1, k + 1))
    wire_sets = {i + 1: s for i, (s, _) in enumerate(x.pairs)}
    covered = frozenset()
    acc = None
    used = set()
    for w in sorted(wire_sets):
        s = wire_sets[w]
        if s and not (s & covered):
            used.add(w)
            covered |= s
        if covered == full:
            break
    if covered != full:
        raise ValueError("specifier output cannot reach the full level")
    gates = []
    running = frozenset()
    for w in sorted(used):
        if acc is None:
            acc, running = w, wire_sets[w]
        else:
            running |= wire_sets[w]
            gates.append(FormGate(MUL, (acc, w), running))
            acc = l + len(gates)
    for w in sorted(set(wire_sets) - used):
        gates.append(FormGate(DROP, (w,), wire_sets[w]))
    for _ in range(rng.py.randrange(extra_gates + 1)):
        gates.append(FormGate(NEG, (acc,), full))
        acc = l + len(gates)
    if acc != l + len(gates):
        # output must land on the last wire; close with a negation pair
        gates.append(FormGate(NEG, (acc,), full))
        gates.append(FormGate(NEG, (l + len(gates),), full))
    return MultilinearForm(k, tuple(s for s, _ in x.pairs), tuple(gates))
