"""Desk-scale candidate indistinguishability obfuscation pipeline.

Boolean circuits are lowered to width-5 permutation branching programs,
randomized over Z_p, encoded as jigsaw puzzle pieces, garbled by input
fixing, and optionally bootstrapped from shallow circuits to all circuits
through pluggable homomorphic-encryption and proof interfaces.

Nothing here is secure: the only shipped encoding backend is transparent and
exists so that every functional contract is mechanically testable. See each
module's docstring for the knobs that a hardened backend would replace.
"""

__version__ = "0.1.0"
