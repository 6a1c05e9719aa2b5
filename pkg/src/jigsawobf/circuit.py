"""Boolean circuit IR, its line-based text format, and a small universal
circuit family.

A circuit is a topologically ordered gate list over named wires with one
designated output. Input wires map to bit positions 1..n in declaration
order. The universal family used for re-encoding circuits works over the
algebraic normal form of the computed function: a circuit with at most
`max_inputs` inputs is summarized by the 2**max_inputs coefficients of its
XOR-of-ANDs polynomial, and the universal evaluator is the matching
Horner-style selector circuit. Encodings therefore depend only on the
function computed, not on gate-level structure.
"""

import re
from dataclasses import dataclass

GATE_OPS = {"AND": 2, "OR": 2, "NOT": 1, "XOR": 2, "NAND": 2}

_NAME_RE = re.compile(r"[a-zA-Z_][a-zA-Z0-9_]*\Z")

_MAX_UNIVERSAL_INPUTS = 4  # 2**l coefficient wires; keep the family desk-sized
_MAX_UNIVERSAL_GATES = 64


class CircuitError(ValueError):
    """Malformed circuit text or an ill-formed in-memory circuit."""


class UndefinedWire(CircuitError):
    """A gate or output references a wire that is not yet declared.

    Forward references are rejected at the point of use, which also rules
    out cycles: a cycle needs at least one reference to a later wire.
    """


class ArityError(CircuitError):
    """Operand count does not match the gate's operator."""


@dataclass(frozen=True)
class Gate:
    name: str
    op: str
    args: tuple

    def __post_init__(self):
        if self.op not in GATE_OPS:
            raise CircuitError(f"unknown op {self.op!r}")
        if len(self.args) != GATE_OPS[self.op]:
            raise ArityError(
                f"{self.op} takes {GATE_OPS[self.op]} operand(s), got {len(self.args)}"
            )


@dataclass(frozen=True)
class Circuit:
    """Immutable gate list; wire references always point backwards."""

    inputs: tuple
    gates: tuple
    output: str

    def __post_init__(self):
        if not self.inputs:
            raise CircuitError("circuit needs at least one input")
        seen = set()
        for name in self.inputs:
            if not _NAME_RE.match(name):
                raise CircuitError(f"bad wire name {name!r}")
            if name in seen:
                raise CircuitError(f"duplicate wire {name!r}")
            seen.add(name)
        for g in self.gates:
            if not _NAME_RE.match(g.name):
                raise CircuitError(f"bad wire name {g.name!r}")
            if g.name in seen:
                raise CircuitError(f"duplicate wire {g.name!r}")
            for a in g.args:
                if a not in seen:
                    raise UndefinedWire(f"gate {g.name!r} references unknown wire {a!r}")
            seen.add(g.name)
        if self.output not in seen:
            raise UndefinedWire(f"output references unknown wire {self.output!r}")

    @property
    def input_count(self):
        return len(self.inputs)


@dataclass(frozen=True)
class CircuitEncoding:
    """Fixed-length bit string standing for one member of a (g, l) family."""

    bits: tuple
    params: tuple  # (max_gates, max_inputs)

    def __post_init__(self):
        g, l = self.params
        if len(self.bits) != 1 << l:
            raise CircuitError("encoding length does not match family params")
        if any(b not in (0, 1) for b in self.bits):
            raise CircuitError("encoding bits must be 0 or 1")


# ---------------------------------------------------------------- text format


def parse_circuit(text):
    """Parse the line-based format: `input N`, `gate N OP A [B]`, `output N`.

    `#` starts a comment; blank lines are skipped. Errors carry the 1-based
    line number.
    """
    inputs = []
    gates = []
    output = None
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        kind = toks[0]
        if kind == "input":
            if output is not None:
                raise CircuitError(f"line {lineno}: input after output")
            if len(toks) != 2:
                raise CircuitError(f"line {lineno}: expected `input <name>`")
            name = toks[1]
            if not _NAME_RE.match(name):
                raise CircuitError(f"line {lineno}: bad wire name {name!r}")
            if name in seen:
                raise CircuitError(f"line {lineno}: duplicate wire {name!r}")
            inputs.append(name)
            seen.add(name)
        elif kind == "gate":
            if output is not None:
                raise CircuitError(f"line {lineno}: gate after output")
            if len(toks) < 3:
                raise CircuitError(f"line {lineno}: expected `gate <name> <OP> <wires>`")
            name, op = toks[1], toks[2]
            args = tuple(toks[3:])
            if not _NAME_RE.match(name):
                raise CircuitError(f"line {lineno}: bad wire name {name!r}")
            if name in seen:
                raise CircuitError(f"line {lineno}: duplicate wire {name!r}")
            if op not in GATE_OPS:
                raise CircuitError(f"line {lineno}: unknown op {op!r}")
            if len(args) != GATE_OPS[op]:
                raise ArityError(
                    f"line {lineno}: {op} takes {GATE_OPS[op]} operand(s), got {len(args)}"
                )
            for a in args:
                if a not in seen:
                    raise UndefinedWire(f"line {lineno}: unknown wire {a!r}")
            gates.append(Gate(name, op, args))
            seen.add(name)
        elif kind == "output":
            if len(toks) != 2:
                raise CircuitError(f"line {lineno}: expected `output <name>`")
            if output is not None:
                raise CircuitError(f"line {lineno}: multiple outputs")
            if toks[1] not in seen:
                raise UndefinedWire(f"line {lineno}: unknown wire {toks[1]!r}")
            output = toks[1]
        else:
            raise CircuitError(f"line {lineno}: unknown directive {kind!r}")
    if not inputs:
        raise CircuitError("no inputs declared")
    if output is None:
        raise CircuitError("no output declared")
    return Circuit(tuple(inputs), tuple(gates), output)


def emit_circuit(c):
    """Canonical text form; parse_circuit(emit_circuit(c)) reproduces c."""
    lines = [f"input {n}" for n in c.inputs]
    for g in c.gates:
        lines.append(f"gate {g.name} {g.op} " + " ".join(g.args))
    lines.append(f"output {c.output}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- evaluation


_OP_FN = {
    "AND": lambda a, b: a & b,
    "OR": lambda a, b: a | b,
    "XOR": lambda a, b: a ^ b,
    "NAND": lambda a, b: 1 - (a & b),
    "NOT": lambda a: 1 - a,
}


def eval_circuit(c, x):
    """Evaluate on an input bit vector (string like \"01\" or sequence of ints)."""
    bits = [int(b) for b in x]
    if len(bits) != c.input_count or any(b not in (0, 1) for b in bits):
        raise ValueError(f"need {c.input_count} bits, got {x!r}")
    val = dict(zip(c.inputs, bits))
    for g in c.gates:
        val[g.name] = _OP_FN[g.op](*(val[a] for a in g.args))
    return val[c.output]


def depth(c):
    """Longest input-to-output path, every gate counting one level."""
    d = {n: 0 for n in c.inputs}
    for g in c.gates:
        d[g.name] = 1 + max(d[a] for a in g.args)
    return d[c.output]


def size(c):
    return len(c.gates)


def truth_table(c):
    """Tuple of 2**n output bits; assignment k sets input i to bit i-1 of k."""
    n = c.input_count
    return tuple(
        eval_circuit(c, [(k >> i) & 1 for i in range(n)]) for k in range(1 << n)
    )


# ---------------------------------------------------------------- sampling


def random_circuit(n_inputs, n_gates, rng, max_depth=None):
    """Random circuit with exactly n_gates gates, output on the last gate.

    With max_depth set, operand choices are restricted so no wire exceeds
    that level. n_gates = 0 yields the bare first-input circuit.
    """
    inputs = tuple(f"x{i + 1}" for i in range(n_inputs))
    level = {n: 0 for n in inputs}
    wires = list(inputs)
    gates = []
    ops = sorted(GATE_OPS)
    for j in range(n_gates):
        op = ops[rng.py.randrange(len(ops))]
        if max_depth is None:
            pool = wires
        else:
            pool = [w for w in wires if level[w] < max_depth]
        args = tuple(pool[rng.py.randrange(len(pool))] for _ in range(GATE_OPS[op]))
        name = f"g{j + 1}"
        gates.append(Gate(name, op, args))
        level[name] = 1 + max(level[a] for a in args)
        wires.append(name)
    output = gates[-1].name if gates else inputs[0]
    return Circuit(inputs, tuple(gates), output)


# ---------------------------------------------------------------- restriction


def restrict(c, assignment):
    """Pin some inputs to constants and fold the result.

    Folds constants through gates, collapses pass-through gates to aliases,
    and prunes everything the output no longer reaches. A circuit that
    collapses to a constant is materialized over the first surviving input
    (XOR(w, w) for 0, plus a NOT for 1), since the representation has no
    constant wires.
    """
    for name, b in assignment.items():
        if name not in c.inputs:
            raise ValueError(f"{name!r} is not an input wire")
        if b not in (0, 1):
            raise ValueError("assignment values must be bits")
    live_inputs = tuple(n for n in c.inputs if n not in assignment)
    if not live_inputs:
        raise ValueError("at least one input must remain free")
    # wire -> ("const", bit) or ("wire", name)
    env = {n: ("const", assignment[n]) for n in assignment}
    for n in live_inputs:
        env[n] = ("wire", n)
    kept = []
    for g in c.gates:
        vals = [env[a] for a in g.args]
        consts = [v[1] for v in vals if v[0] == "const"]
        if len(consts) == len(vals):
            env[g.name] = ("const", _OP_FN[g.op](*consts))
            continue
        if g.op == "NOT":
            kept.append(Gate(g.name, "NOT", (vals[0][1],)))
            env[g.name] = ("wire", g.name)
            continue
        if len(consts) == 1:
            cbit = consts[0]
            other = next(v[1] for v in vals if v[0] == "wire")
            if g.op == "AND":
                env[g.name] = ("const", 0) if cbit == 0 else ("wire", other)
            elif g.op == "OR":
                env[g.name] = ("wire", other) if cbit == 0 else ("const", 1)
            elif g.op == "XOR":
                if cbit == 0:
                    env[g.name] = ("wire", other)
                else:
                    kept.append(Gate(g.name, "NOT", (other,)))
                    env[g.name] = ("wire", g.name)
            else:  # NAND
                if cbit == 0:
                    env[g.name] = ("const", 1)
                else:
                    kept.append(Gate(g.name, "NOT", (other,)))
                    env[g.name] = ("wire", g.name)
            continue
        kept.append(Gate(g.name, g.op, tuple(v[1] for v in vals)))
        env[g.name] = ("wire", g.name)
    out_kind, out_val = env[c.output]
    if out_kind == "const":
        w = live_inputs[0]
        zero = Gate("_const0", "XOR", (w, w))
        if out_val == 0:
            return Circuit(live_inputs, (zero,), "_const0")
        one = Gate("_const1", "NOT", ("_const0",))
        return Circuit(live_inputs, (zero, one), "_const1")
    # backward reachability prune
    need = {out_val}
    pruned = []
    for g in reversed(kept):
        if g.name in need:
            pruned.append(g)
            need.update(g.args)
    pruned.reverse()
    return Circuit(live_inputs, tuple(pruned), out_val)


# ---------------------------------------------------------------- universal


def _check_family_params(params):
    g, l = params
    if not (1 <= l <= _MAX_UNIVERSAL_INPUTS):
        raise ValueError(f"family input count must be 1..{_MAX_UNIVERSAL_INPUTS}")
    if not (1 <= g <= _MAX_UNIVERSAL_GATES):
        raise ValueError(f"family gate budget must be 1..{_MAX_UNIVERSAL_GATES}")
    return g, l


def encode_circuit(c, params):
    """Encode a family member as the coefficient bits of its XOR polynomial.

    Circuits computing the same function share an encoding; distinct
    functions never collide (the polynomial determines the function).
    """
    g, l = _check_family_params(params)
    if size(c) > g:
        raise ValueError(f"circuit has {size(c)} gates; family allows {g}")
    if c.input_count > l:
        raise ValueError(f"circuit has {c.input_count} inputs; family allows {l}")
    tt = truth_table(c)
    full = [tt[k & ((1 << c.input_count) - 1)] for k in range(1 << l)]
    # in-place subset-sum transform: coefficient of a monomial is the XOR of
    # the function over all assignments below it
    for i in range(l):
        step = 1 << i
        for k in range(1 << l):
            if k & step:
                full[k] ^= full[k - step]
    return CircuitEncoding(tuple(full), (g, l))


def build_universal(params):
    """Selector circuit U with eval(U, enc(C) + m) = eval(C, m) for the family.

    Inputs are the 2**l coefficient wires e0..e{2**l-1} followed by the real
    inputs m1..ml. The gate structure is the Horner split on m1: the even
    coefficients form the subpolynomial without m1, the odd ones the
    cofactor of m1.
    """
    g, l = _check_family_params(params)
    coeff = [f"e{k}" for k in range(1 << l)]
    real = [f"m{i + 1}" for i in range(l)]
    gates = []
    counter = [0]

    def fresh():
        counter[0] += 1
        return f"u{counter[0]}"

    def build(var_ix, coeffs):
        if var_ix == l:
            return coeffs[0]
        evens = build(var_ix + 1, coeffs[0::2])
        odds = build(var_ix + 1, coeffs[1::2])
        a = fresh()
        gates.append(Gate(a, "AND", (real[var_ix], odds)))
        x = fresh()
        gates.append(Gate(x, "XOR", (evens, a)))
        return x

    out = build(0, coeff)
    return Circuit(tuple(coeff + real), tuple(gates), out)


def decode_circuit(enc):
    """Circuit functionally equal to the encoded member: U with the
    coefficient inputs pinned to the encoding bits."""
    u = build_universal(enc.params)
    _, l = enc.params
    return restrict(u, {f"e{k}": b for k, b in enumerate(enc.bits)})


def family_members(params):
    """All functions reachable with at most g gates on at most l inputs, one
    canonical (first minimal) circuit each, ordered by encoding bits."""
    g, l = _check_family_params(params)
    inputs = tuple(f"x{i + 1}" for i in range(l))
    found = {}

    def note(circ):
        key = truth_table(circ)
        if key not in found:
            found[key] = circ

    for ix in range(l):
        note(Circuit(inputs, (), inputs[ix]))

    def extend(gates, budget):
        if budget == 0:
            return
        wires = list(inputs) + [gg.name for gg in gates]
        name = f"g{len(gates) + 1}"
        for op in sorted(GATE_OPS):
            if GATE_OPS[op] == 1:
                pool = [(a,) for a in wires]
            else:
                pool = [(a, b) for a in wires for b in wires]
            for args in pool:
                nxt = gates + (Gate(name, op, args),)
                note(Circuit(inputs, nxt, name))
                extend(nxt, budget - 1)

    extend((), g)
    members = sorted(found.values(), key=lambda circ: encode_circuit(circ, params).bits)
    return members
