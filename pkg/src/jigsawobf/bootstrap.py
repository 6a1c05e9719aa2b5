"""Two-key bootstrap from the shallow-circuit obfuscator to larger circuits.

The shallow obfuscator in obf_nc1 only digests small cores.  To cover a
bigger circuit c, a bundle stores c's description twice, encrypted under two
independent keys of a homomorphic scheme, together with an obfuscated checker
program that holds exactly one of the two decryption keys.  Whoever evaluates
the bundle pushes both ciphertexts through the public evaluator circuit for
their input m, attaches a proof that this is what happened, and hands
everything to the checker; the checker releases its branch's decrypted bit
only if the proof verifies, and outputs 0 otherwise.  Since either key
suffices, the stored key never reveals which of two equivalent descriptions
went in -- that is the lever the five-stage replacement chain below pulls.

Both pluggable backends ship in reference form only.  The homomorphic scheme
is transparent (tag-matched wrappers around cleartext bits; see
TransparentFHE.security) and the proof system simply recomputes the claimed
evaluations and compares.  They make the control flow real and testable; they
provide no secrecy and say so.
"""

import hashlib
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache

from .circuit import (
    Circuit,
    Gate,
    build_universal,
    emit_circuit,
    encode_circuit,
    eval_circuit,
    parse_circuit,
    restrict,
    size,
    truth_table,
)
from .obf_nc1 import ArityMismatch, eval_obf, gp_from_text, gp_to_text, obfuscate_nc1
from .zmod import Rng


class KeyMismatch(Exception):
    """Ciphertext presented to a key it was not produced under."""


# Width of the description digest appended to every encrypted circuit
# description.  The evaluator circuit never reads these wires, so two
# different descriptions of the same function evaluate identically while
# their ciphertexts still differ.
DESCRIPTION_TAG_BITS = 32

EMPTY_PROOF = b""


def _as_bits(m, what="message"):
    try:
        bits = tuple(int(b) for b in m)
    except (TypeError, ValueError):
        raise ValueError(f"{what} must be a bit sequence") from None
    if any(b not in (0, 1) for b in bits):
        raise ValueError(f"{what} must contain only bits")
    return bits


# --------------------------------------------------------------- FHE interface


@dataclass(frozen=True)
class PubKey:
    tag: int


@dataclass(frozen=True)
class SecKey:
    tag: int


@dataclass(frozen=True)
class Ciphertext:
    tag: int
    bits: tuple


class FHEScheme(ABC):
    """Homomorphic encryption as the bootstrap consumes it.

    Required behaviour, exactly:
      dec(sk, enc(pk, m)) == m                       for matching (pk, sk)
      dec(sk, eval(pk, f, enc(pk, m1), ..)) == f(m1 .. mn)
    eval concatenates the plaintexts of its ciphertext arguments, in order,
    and applies the circuit f to the combined bit vector.  Implementations
    must make eval deterministic if they want to sit under the recompute
    proof system below.
    """

    @abstractmethod
    def keygen(self, lam, rng):
        """Fresh (pk, sk) pair; lam sets the key size."""

    @abstractmethod
    def enc(self, pk, m):
        """Encrypt a bit sequence."""

    @abstractmethod
    def dec(self, sk, ct):
        """Recover the bit tuple; KeyMismatch if ct is not under sk's key."""

    @abstractmethod
    def eval(self, pk, f, *cts):
        """Apply circuit f to the concatenated plaintexts of cts."""


class TransparentFHE(FHEScheme):
    """Reference scheme: ciphertexts carry their payload in the clear.

    keygen draws one random tag shared by the key pair; enc staples the tag
    to the untouched plaintext; dec checks the staple.  Every interface
    contract holds exactly, which is the entire point -- the pipeline above
    can be exercised end to end with no cryptography in the way.
    """

    security = "none: payloads are stored in the clear, plumbing only"

    def keygen(self, lam, rng):
        if lam < 1:
            raise ValueError("key size must be positive")
        tag = rng.py.getrandbits(lam)
        return PubKey(tag), SecKey(tag)

    def enc(self, pk, m):
        return Ciphertext(pk.tag, _as_bits(m))

    def dec(self, sk, ct):
        if ct.tag != sk.tag:
            raise KeyMismatch("ciphertext was produced under a different key")
        return ct.bits

    def eval(self, pk, f, *cts):
        if not cts:
            raise ValueError("eval needs at least one ciphertext")
        for ct in cts:
            if ct.tag != pk.tag:
                raise KeyMismatch("ciphertext was produced under a different key")
        bits = tuple(b for ct in cts for b in ct.bits)
        if len(bits) != f.input_count:
            raise ArityMismatch(
                f"circuit wants {f.input_count} bits, ciphertexts carry {len(bits)}"
            )
        return Ciphertext(pk.tag, (eval_circuit(f, bits),))


def ref_fhe():
    """The transparent reference scheme (see TransparentFHE)."""
    return TransparentFHE()


# --------------------------------------------------------------- IND-CPA game


def ind_cpa_game(scheme, adversary, trials, lam=16, rng=None):
    """Estimate an adversary's distinguishing advantage over `trials` games.

    Each game draws a fresh key pair and a fresh hidden bit b, then calls
    adversary(pk, oracle, rng) where oracle(m0, m1) returns enc(pk, m_b) for
    equal-length bit sequences.  The return value is |win rate - 1/2|.  The
    hidden bit never leaves this function except through the ciphertexts the
    oracle hands out.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if rng is None:
        rng = Rng(0)
    wins = 0
    for _ in range(trials):
        pk, _sk = scheme.keygen(lam, rng)
        b = rng.py.randrange(2)

        def oracle(m0, m1, _pk=pk, _b=b):
            left, right = _as_bits(m0, "m0"), _as_bits(m1, "m1")
            if len(left) != len(right):
                raise ValueError("challenge messages must have equal length")
            return scheme.enc(_pk, right if _b else left)

        guess = adversary(pk, oracle, rng)
        if guess not in (0, 1):
            raise ValueError("adversary must output 0 or 1")
        wins += int(guess == b)
    return abs(wins / trials - 0.5)


def random_guess_adversary(pk, oracle, rng):
    """Ignores everything; calibrates the game's noise floor."""
    return rng.py.randrange(2)


def payload_reader_adversary(pk, oracle, rng):
    """Reads the challenge payload straight out of a transparent ciphertext."""
    return oracle((0,), (1,)).bits[0]


# --------------------------------------------------------------- proof system


class ProofSystem(ABC):
    @abstractmethod
    def prove(self, statement, witness):
        """Produce a proof object for a true statement."""

    @abstractmethod
    def verify(self, statement, proof):
        """True only when the statement holds (sound by construction here)."""


@dataclass(frozen=True)
class EvalStatement:
    """Claim: e1 and e2 are the honest evaluations of u on g1 and g2 at m.

    u's free inputs are the description wires (encoding then digest) followed
    by the data wires; m binds the data wires.  The claim is literal
    ciphertext equality e_i == eval(pk_i, u at m, g_i), so any change to a
    payload bit or a key tag falsifies it.
    """

    m: tuple
    e1: Ciphertext
    e2: Ciphertext
    g1: Ciphertext
    g2: Ciphertext
    pk1: PubKey
    pk2: PubKey
    u: Circuit

    def __post_init__(self):
        object.__setattr__(self, "m", _as_bits(self.m, "statement input"))


def _statement_recompute(scheme, st):
    data = st.u.inputs[len(st.u.inputs) - len(st.m):]
    f = restrict(st.u, dict(zip(data, st.m)))
    r1 = scheme.eval(st.pk1, f, st.g1)
    r2 = scheme.eval(st.pk2, f, st.g2)
    return r1, r2


class RecomputeProofs(ProofSystem):
    """Reference proof system: the proof is empty, the verifier recomputes.

    Soundness is perfect because the underlying eval is deterministic: a
    false statement disagrees with the recomputation and is rejected, no
    proof object can change that.  Witness indistinguishability is NOT
    provided -- there is nothing in an empty proof to distinguish, but also
    nothing hiding which witness the prover held.  A real non-interactive
    proof drops in behind the same two methods.
    """

    def __init__(self, scheme):
        self.scheme = scheme

    def prove(self, statement, witness):
        return EMPTY_PROOF

    def verify(self, statement, proof):
        if proof != EMPTY_PROOF:
            return False
        try:
            r1, r2 = _statement_recompute(self.scheme, statement)
        except (KeyMismatch, ArityMismatch, ValueError):
            return False
        return r1 == statement.e1 and r2 == statement.e2


def ref_proofs(scheme):
    """Recompute-and-compare proofs over a deterministic scheme."""
    return RecomputeProofs(scheme)


# ------------------------------------------------- circuit-as-message plumbing


@lru_cache(maxsize=32)
def universal_descriptor(params, tag_bits=DESCRIPTION_TAG_BITS):
    """Family evaluator extended with ignored description-digest wires.

    Input order: the 2**l encoding wires, `tag_bits` digest wires no gate
    reads, then the l data wires.  Restricting the data wires leaves the free
    inputs aligned with circuit_message output, so the restricted circuit can
    be applied to one message ciphertext directly.
    """
    if not 0 <= tag_bits <= 512:
        raise ValueError("digest width out of range")
    u = build_universal(params)
    _g, l = params
    coeff, data = u.inputs[: 1 << l], u.inputs[1 << l:]
    digest = tuple(f"d{i + 1}" for i in range(tag_bits))
    return Circuit(coeff + digest + data, u.gates, u.output)


def description_digest(c, tag_bits=DESCRIPTION_TAG_BITS):
    """Leading bits of a hash of the canonical circuit text."""
    h = hashlib.sha256(emit_circuit(c).encode()).digest()
    return tuple((h[i // 8] >> (7 - i % 8)) & 1 for i in range(tag_bits))


def circuit_message(c, params, tag_bits=DESCRIPTION_TAG_BITS):
    """Bits that cross the encryption boundary for a family member.

    Encoding bits determine the function; the appended digest pins the exact
    description, so equivalent-but-distinct circuits yield distinct messages
    that the evaluator treats identically.
    """
    return encode_circuit(c, params).bits + description_digest(c, tag_bits)


# --------------------------------------------------------------- checker core


@dataclass(frozen=True)
class ProgramP:
    """Un-obfuscated checker: verification plus one branch of decryption.

    `core` is a Boolean circuit over (data wires, ct1, ct2) that outputs the
    branch payload bit exactly when both payloads match the honest
    re-evaluation of the stored descriptions.  Key binding is not a Boolean
    computation under the transparent scheme (tags are not payload bits), so
    run_p checks the tags in the wrapper before consulting the core.
    """

    branch: int
    sk: SecKey
    g1: Ciphertext
    g2: Ciphertext
    core: Circuit


def _splice(prefix, folded):
    renames = {g.name: prefix + g.name for g in folded.gates}
    gates = tuple(
        Gate(renames[g.name], g.op, tuple(renames.get(a, a) for a in g.args))
        for g in folded.gates
    )
    return gates, renames.get(folded.output, folded.output)


def _checker_core(branch, g1, g2, u):
    mlen = len(g1.bits)
    if len(g2.bits) != mlen:
        raise ValueError("stored ciphertexts must have equal payload length")
    if not 0 < mlen < len(u.inputs):
        raise ValueError("payload length does not fit the descriptor")
    desc, data = u.inputs[:mlen], u.inputs[mlen:]
    gates1, out1 = _splice("v1_", restrict(u, dict(zip(desc, g1.bits))))
    gates2, out2 = _splice("v2_", restrict(u, dict(zip(desc, g2.bits))))
    ct = ("ct1", "ct2")
    gates = gates1 + gates2 + (
        Gate("_ne1", "XOR", (ct[0], out1)),
        Gate("_eq1", "NOT", ("_ne1",)),
        Gate("_ne2", "XOR", (ct[1], out2)),
        Gate("_eq2", "NOT", ("_ne2",)),
        Gate("_ok", "AND", ("_eq1", "_eq2")),
        Gate("_out", "AND", ("_ok", ct[branch - 1])),
    )
    return Circuit(data + ct, gates, "_out")


def program_p(branch, sk, g1, g2, u):
    """Build the checker for one branch.

    The verification halves fold the descriptor u at each stored payload, so
    the core carries the descriptions as wiring, not as inputs; only the data
    bits and the two candidate payload bits remain free.  Requires the
    transparent carrier (the payloads must be readable to fold them) and a
    key that actually opens the branch ciphertext.
    """
    if branch not in (1, 2):
        raise ValueError("branch must be 1 or 2")
    if sk.tag != (g1 if branch == 1 else g2).tag:
        raise KeyMismatch("secret key does not open the branch ciphertext")
    return ProgramP(branch, sk, g1, g2, _checker_core(branch, g1, g2, u))


def run_p(p, m, e1, e2, proof):
    """Checker semantics: 0 on any invalid input, else the branch payload.

    Rejection (of a bad proof, a foreign key tag, or a malformed candidate
    ciphertext) is the value 0, never an exception; only a wrong data arity
    raises, since that is a caller bug rather than adversarial input.
    """
    m = _as_bits(m, "data input")
    if len(m) != p.core.input_count - 2:
        raise ArityMismatch(
            f"checker wants {p.core.input_count - 2} data bits, got {len(m)}"
        )
    if proof != EMPTY_PROOF:
        return 0
    if e1.tag != p.g1.tag or e2.tag != p.g2.tag:
        return 0
    if len(e1.bits) != 1 or len(e2.bits) != 1:
        return 0
    return eval_circuit(p.core, m + (e1.bits[0], e2.bits[0]))


# ------------------------------------------------------- pluggable obfuscators


@dataclass(frozen=True)
class ObfuscatedP:
    """Checker artifact as emitted by one of the io_nc1 instantiations.

    backend "identity" keeps the ProgramP as-is (pass-through, no hiding);
    backend "garbled" stores the randomized-and-encoded program of the
    checker core, plus the key tags the wrapper still has to check.
    """

    backend: str
    branch: int
    tag1: int
    tag2: int
    data: object


def identity_obfuscator(lam, p, rng):
    """Pass-through instantiation: the checker is its own obfuscation.

    Exists so the full pipeline runs at sizes the garbled route cannot
    reach; offers exactly as much hiding as the name says.
    """
    return ObfuscatedP("identity", p.branch, p.g1.tag, p.g2.tag, p)


def garbled_obfuscator(lam, p, rng):
    """Shallow-circuit instantiation: compile and randomize the checker core.

    Only viable when the folded core stays within the direct-mode length
    cap, which in practice means single-data-bit families.
    """
    gp = obfuscate_nc1(lam, p.core, rng, mode="direct")
    return ObfuscatedP("garbled", p.branch, p.g1.tag, p.g2.tag, gp)


def _run_obfuscated(op, m, e1, e2, proof):
    if op.backend == "identity":
        return run_p(op.data, m, e1, e2, proof)
    m = _as_bits(m, "data input")
    if len(m) != op.data.ell - 2:
        raise ArityMismatch(
            f"checker wants {op.data.ell - 2} data bits, got {len(m)}"
        )
    if proof != EMPTY_PROOF:
        return 0
    if e1.tag != op.tag1 or e2.tag != op.tag2:
        return 0
    if len(e1.bits) != 1 or len(e2.bits) != 1:
        return 0
    return eval_obf(op.data, m + (e1.bits[0], e2.bits[0]))


# --------------------------------------------------------------- the pipeline


@dataclass(frozen=True)
class ObfuscationBundle:
    """Everything an evaluator receives: checker, public keys, ciphertexts.

    family and tag_bits are public shape parameters; the descriptor circuit
    is recomputed from them on demand rather than stored.
    """

    p: ObfuscatedP
    pk1: PubKey
    pk2: PubKey
    g1: Ciphertext
    g2: Ciphertext
    family: tuple
    tag_bits: int

    @property
    def data_arity(self):
        return self.family[1]


def obfuscate_polysize(lam, c, io_nc1, fhe, rng, family=None,
                       tag_bits=DESCRIPTION_TAG_BITS):
    """Bundle a circuit: encrypt its description twice, obfuscate a checker.

    Draws two independent key pairs (redrawing on the off chance of a tag
    collision, the bundle must carry distinct keys), stores the description
    message under both, and hands the branch-1 checker to the chosen io_nc1
    instantiation.
    """
    if family is None:
        family = (max(1, size(c)), c.input_count)
    u = universal_descriptor(family, tag_bits)
    msg = circuit_message(c, family, tag_bits)
    pk1, sk1 = fhe.keygen(lam, rng)
    pk2, sk2 = fhe.keygen(lam, rng)
    while pk2.tag == pk1.tag:
        pk2, sk2 = fhe.keygen(lam, rng)
    g1 = fhe.enc(pk1, msg)
    g2 = fhe.enc(pk2, msg)
    obf = io_nc1(lam, program_p(1, sk1, g1, g2, u), rng)
    return ObfuscationBundle(obf, pk1, pk2, g1, g2, tuple(family), tag_bits)


def evaluate(bundle, m, fhe, proofs):
    """Run a bundle on data bits m; equals c(m) for honestly built bundles."""
    m = _as_bits(m, "data input")
    if len(m) != bundle.data_arity:
        raise ArityMismatch(
            f"bundle wants {bundle.data_arity} data bits, got {len(m)}"
        )
    u = universal_descriptor(bundle.family, bundle.tag_bits)
    data = u.inputs[len(u.inputs) - bundle.data_arity:]
    f = restrict(u, dict(zip(data, m)))
    e1 = fhe.eval(bundle.pk1, f, bundle.g1)
    e2 = fhe.eval(bundle.pk2, f, bundle.g2)
    statement = EvalStatement(m, e1, e2, bundle.g1, bundle.g2,
                              bundle.pk1, bundle.pk2, u)
    proof = proofs.prove(statement, None)
    return _run_obfuscated(bundle.p, m, e1, e2, proof)


# ------------------------------------------------------------ stage chain


_PROFILE_FIELDS = ("pk1", "pk2", "g1", "g2", "branch", "family")


def constructional_profile(bundle):
    """The components two bundles can differ in, as a comparable dict."""
    return {
        "pk1": bundle.pk1,
        "pk2": bundle.pk2,
        "g1": bundle.g1,
        "g2": bundle.g2,
        "branch": bundle.p.branch,
        "family": (bundle.family, bundle.tag_bits),
    }


def constructional_diff(a, b):
    """Names of the stored components that changed between two bundles."""
    pa, pb = constructional_profile(a), constructional_profile(b)
    return tuple(k for k in _PROFILE_FIELDS if pa[k] != pb[k])


def hybrid_chain(c0, c1, io_nc1, fhe, rng, lam=61, family=None,
                 tag_bits=DESCRIPTION_TAG_BITS):
    """Five bundles walking from the honest build of c0 to that of c1.

    Requires c0 and c1 to agree on every input (checked exhaustively; this
    is a precondition, not a hope).  Key pairs are drawn once and shared so
    that consecutive stages differ in exactly one stored component:

        stage 0  honest bundle for c0
        stage 1  second ciphertext now carries c1's description
        stage 2  checker switches to branch 2 (the second key)
        stage 3  first ciphertext now carries c1's description
        stage 4  checker back to branch 1 == honest bundle for c1

    Every stage computes the same function: the swapped description bits
    are invisible to the evaluator circuit (equivalence makes the encoding
    halves equal; the digest halves are never read).
    """
    if c0.input_count != c1.input_count or truth_table(c0) != truth_table(c1):
        raise ValueError("chain endpoints must compute the same function")
    if family is None:
        family = (max(1, size(c0), size(c1)), c0.input_count)
    u = universal_descriptor(family, tag_bits)
    msg0 = circuit_message(c0, family, tag_bits)
    msg1 = circuit_message(c1, family, tag_bits)
    pk1, sk1 = fhe.keygen(lam, rng)
    pk2, sk2 = fhe.keygen(lam, rng)
    while pk2.tag == pk1.tag:
        pk2, sk2 = fhe.keygen(lam, rng)
    g1_old, g1_new = fhe.enc(pk1, msg0), fhe.enc(pk1, msg1)
    g2_old, g2_new = fhe.enc(pk2, msg0), fhe.enc(pk2, msg1)
    stages = (
        (1, sk1, g1_old, g2_old),
        (1, sk1, g1_old, g2_new),
        (2, sk2, g1_old, g2_new),
        (2, sk2, g1_new, g2_new),
        (1, sk1, g1_new, g2_new),
    )
    out = []
    for branch, sk, g1, g2 in stages:
        obf = io_nc1(lam, program_p(branch, sk, g1, g2, u), rng)
        out.append(
            ObfuscationBundle(obf, pk1, pk2, g1, g2, tuple(family), tag_bits)
        )
    return out


# --------------------------------------------------------------- text format


def _bitstr(bits):
    return "".join(str(b) for b in bits)


def _ct_line(label, ct):
    return f"{label} {ct.tag} {_bitstr(ct.bits)}"


def _parse_ct_line(line, label):
    parts = line.split()
    if len(parts) != 3 or parts[0] != label:
        raise ValueError(f"bad {label} line")
    try:
        tag = int(parts[1])
    except ValueError:
        raise ValueError(f"bad {label} tag") from None
    if tag < 0 or not set(parts[2]) <= {"0", "1"}:
        raise ValueError(f"bad {label} payload")
    return Ciphertext(tag, tuple(int(b) for b in parts[2]))


def _progp_lines(p):
    core = emit_circuit(p.core).splitlines()
    return [
        f"PROGP v1 {p.branch} {p.sk.tag}",
        _ct_line("G1", p.g1),
        _ct_line("G2", p.g2),
        f"CORE {len(core)}",
        *core,
    ]


def _progp_from_lines(lines):
    head = lines[0].split() if lines else []
    if len(head) != 4 or head[:2] != ["PROGP", "v1"]:
        raise ValueError("bad checker header")
    try:
        branch, sktag = int(head[2]), int(head[3])
    except ValueError:
        raise ValueError("bad checker header") from None
    if branch not in (1, 2) or len(lines) < 4:
        raise ValueError("bad checker header")
    g1 = _parse_ct_line(lines[1], "G1")
    g2 = _parse_ct_line(lines[2], "G2")
    core_head = lines[3].split()
    if len(core_head) != 2 or core_head[0] != "CORE":
        raise ValueError("bad checker core header")
    try:
        n = int(core_head[1])
    except ValueError:
        raise ValueError("bad checker core header") from None
    if n < 1 or len(lines) != 4 + n:
        raise ValueError("checker core line count mismatch")
    core = parse_circuit("\n".join(lines[4:]) + "\n")
    if sktag != (g1 if branch == 1 else g2).tag:
        raise ValueError("checker key does not open its branch ciphertext")
    return ProgramP(branch, SecKey(sktag), g1, g2, core)


def bundle_to_text(bundle):
    """Serialize a bundle; the checker artifact rides along length-prefixed."""
    p = bundle.p
    if p.backend == "identity":
        body = _progp_lines(p.data)
    elif p.backend == "garbled":
        body = [f"GARBLEDP v1 {p.branch} {p.tag1} {p.tag2}"]
        body.extend(gp_to_text(p.data).splitlines())
    else:
        raise ValueError(f"unknown checker backend {p.backend!r}")
    g, l = bundle.family
    lines = [
        f"IOP v1 transparent {p.backend} {p.branch} {g} {l} {bundle.tag_bits}",
        f"PK1 {bundle.pk1.tag}",
        f"PK2 {bundle.pk2.tag}",
        _ct_line("G1", bundle.g1),
        _ct_line("G2", bundle.g2),
        f"P {len(body)}",
        *body,
    ]
    return "\n".join(lines) + "\n"


def _parse_pk_line(line, label):
    parts = line.split()
    if len(parts) != 2 or parts[0] != label:
        raise ValueError(f"bad {label} line")
    try:
        tag = int(parts[1])
    except ValueError:
        raise ValueError(f"bad {label} tag") from None
    if tag < 0:
        raise ValueError(f"bad {label} tag")
    return PubKey(tag)


def bundle_from_text(text):
    """Parse bundle_to_text output, cross-checking every stored relation."""
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty bundle text")
    head = lines[0].split()
    if len(head) != 8 or head[:2] != ["IOP", "v1"]:
        raise ValueError("bad bundle header")
    if head[2] != "transparent":
        raise ValueError(f"unknown carrier {head[2]!r}")
    backend = head[3]
    if backend not in ("identity", "garbled"):
        raise ValueError(f"unknown checker backend {backend!r}")
    try:
        branch, g, l, tag_bits = (int(x) for x in head[4:])
    except ValueError:
        raise ValueError("bad bundle header") from None
    if branch not in (1, 2):
        raise ValueError("bad bundle header")
    u = universal_descriptor((g, l), tag_bits)  # validates the shape ints
    if len(lines) < 6:
        raise ValueError("truncated bundle text")
    pk1 = _parse_pk_line(lines[1], "PK1")
    pk2 = _parse_pk_line(lines[2], "PK2")
    g1 = _parse_ct_line(lines[3], "G1")
    g2 = _parse_ct_line(lines[4], "G2")
    p_head = lines[5].split()
    if len(p_head) != 2 or p_head[0] != "P":
        raise ValueError("bad checker block header")
    try:
        n = int(p_head[1])
    except ValueError:
        raise ValueError("bad checker block header") from None
    if n < 1 or len(lines) != 6 + n:
        raise ValueError("checker block line count mismatch")
    body = lines[6:]
    if g1.tag != pk1.tag or g2.tag != pk2.tag:
        raise ValueError("stored ciphertexts do not match the public keys")
    msg_len = (1 << l) + tag_bits
    if len(g1.bits) != msg_len or len(g2.bits) != msg_len:
        raise ValueError("stored ciphertext payload has the wrong length")
    if backend == "identity":
        progp = _progp_from_lines(body)
        if progp.branch != branch:
            raise ValueError("checker branch disagrees with bundle header")
        if progp.g1 != g1 or progp.g2 != g2:
            raise ValueError("checker ciphertexts disagree with bundle")
        if progp.core.input_count != l + 2:
            raise ValueError("checker core arity disagrees with family")
        obf = ObfuscatedP("identity", branch, g1.tag, g2.tag, progp)
    else:
        inner = body[0].split()
        if len(inner) != 5 or inner[:2] != ["GARBLEDP", "v1"]:
            raise ValueError("bad garbled checker header")
        try:
            ibranch, tag1, tag2 = int(inner[2]), int(inner[3]), int(inner[4])
        except ValueError:
            raise ValueError("bad garbled checker header") from None
        if ibranch != branch or tag1 != g1.tag or tag2 != g2.tag:
            raise ValueError("garbled checker header disagrees with bundle")
        gp = gp_from_text("\n".join(body[1:]) + "\n")
        if gp.ell != l + 2:
            raise ValueError("garbled checker arity disagrees with family")
        obf = ObfuscatedP("garbled", branch, tag1, tag2, gp)
    return ObfuscationBundle(obf, pk1, pk2, g1, g2, (g, l), tag_bits)
