"""Reversible arithmetic gadgets emitted through a circuit Builder.

All gadgets leave their scratch qubits clean and read operand registers as
controls only (operands are never modified unless the gadget's contract says
so).  Registers are tuples of qubit indices, LSB first.
"""
from __future__ import annotations

from typing import Sequence

from .circuit import Builder, CircuitError

Reg = Sequence[int]


def copy_register(b: Builder, src: Reg, dst: Reg) -> None:
    """dst ^= src, bit by bit.  len(src) <= len(dst)."""
    if len(src) > len(dst):
        raise CircuitError("copy source wider than destination")
    for s, d in zip(src, dst):
        b.cx(s, d)


def xor_constant(b: Builder, reg: Reg, value: int, controls=()) -> None:
    """reg ^= value as a single multi-target controlled X (no gate if 0)."""
    targets = [q for k, q in enumerate(reg) if (value >> k) & 1]
    if value >> len(reg):
        raise CircuitError("constant overflows register")
    if targets:
        b.gate(controls, targets)


def controlled_increment(b: Builder, reg: Reg, controls, scratch: Reg) -> None:
    """reg += 1 (mod 2^w) iff all controls are satisfied.

    Ripple scheme: carry chain computed into scratch ascending, then flips
    interleaved with carry uncomputation descending.  Needs w-1 clean
    scratch bits; costs 3w-2 gates.
    """
    w = len(reg)
    controls = list(controls)
    if w == 0:
        return
    if w == 1:
        b.gate(controls, (reg[0],))
        return
    if len(scratch) < w - 1:
        raise CircuitError("controlled_increment: need w-1 scratch bits")
    car = scratch[:w - 1]
    b.gate(controls + [(reg[0], True)], (car[0],))
    for j in range(2, w):
        b.gate(((car[j - 2], True), (reg[j - 1], True)), (car[j - 1],))
    for j in range(w - 1, 0, -1):
        b.cx(car[j - 1], reg[j])
        if j >= 2:
            b.gate(((car[j - 2], True), (reg[j - 1], True)), (car[j - 1],))
        else:
            b.gate(controls + [(reg[0], True)], (car[0],))
    b.gate(controls, (reg[0],))


def emit_reversed(b: Builder, emitter, *args, **kwargs) -> None:
    """Run ``emitter`` against a capture, then emit only the reversed gates."""
    shadow = _ShadowBuilder(b)
    emitter(shadow, *args, **kwargs)
    for g in reversed(shadow.captured):
        b._emit(g)


class _ShadowBuilder:
    """Builder proxy that captures gates instead of emitting them.

    Validates against the parent's qubit count so shadow emission is exactly
    as strict as real emission.
    """

    def __init__(self, parent: Builder):
        self._parent = parent
        self.captured = []

    @property
    def n_qubits(self):
        return self._parent.n_qubits

    def gate(self, controls, targets):
        from .circuit import Gate, _normalize_controls, _check_gate
        g = Gate(_normalize_controls(controls), tuple(int(t) for t in targets))
        _check_gate(g, self._parent.n_qubits)
        self.captured.append(g)

    def cx(self, control, target):
        self.gate((control,), (target,))

    def x(self, target):
        self.gate((), (target,))

    def begin_segment(self):
        pass

    def end_segment(self):
        return []

    def emit_inverse(self, segment):
        for g in reversed(segment):
            self.captured.append(g)

    def _emit(self, g):
        self.captured.append(g)


def controlled_decrement(b: Builder, reg: Reg, controls, scratch: Reg) -> None:
    """reg -= 1 (mod 2^w) iff controls satisfied."""
    emit_reversed(b, controlled_increment, reg, list(controls), scratch)


def add_register(b: Builder, acc: Reg, addend: Reg, scratch: Reg,
                 controls=()) -> None:
    """acc += addend (mod 2^len(acc)) iff controls satisfied.

    Carries are computed unconditionally into scratch and uncomputed in
    place; only the sum-bit updates carry the external controls, so the
    accumulator is untouched when the controls fail.  len(addend) may be
    shorter than len(acc); it is treated as zero-extended.
    """
    n = len(acc)
    m = len(addend)
    if m > n:
        raise CircuitError("addend wider than accumulator")
    if m == 0 or n == 0:
        return
    controls = list(controls)
    if n == 1:
        b.gate(controls + [(addend[0], True)], (acc[0],))
        return
    if len(scratch) < n - 1:
        raise CircuitError("add_register: need len(acc)-1 scratch bits")
    car = scratch[:n - 1]

    def emit_carry(j):
        # car[j-1] ^= MAJ(addend[j-1], acc[j-1], car[j-2]) with car[-1] = 0
        if j - 1 < m:
            a = addend[j - 1]
            if j == 1:
                b.gate(((a, True), (acc[0], True)), (car[0],))
            else:
                b.gate(((a, True), (acc[j - 1], True)), (car[j - 1],))
                b.gate(((a, True), (car[j - 2], True)), (car[j - 1],))
                b.gate(((acc[j - 1], True), (car[j - 2], True)), (car[j - 1],))
        else:
            if j == 1:
                return
            b.gate(((acc[j - 1], True), (car[j - 2], True)), (car[j - 1],))

    for j in range(1, n):
        emit_carry(j)
    for j in range(n - 1, 0, -1):
        if j < m:
            b.gate(controls + [(addend[j], True)], (acc[j],))
        b.gate(controls + [(car[j - 1], True)], (acc[j],))
        emit_carry(j)  # self-inverse: acc[j-1] is still pre-sum here
    b.gate(controls + [(addend[0], True)], (acc[0],))


def sub_register(b: Builder, acc: Reg, addend: Reg, scratch: Reg,
                 controls=()) -> None:
    """acc -= addend (mod 2^len(acc)) iff controls satisfied."""
    emit_reversed(b, add_register, acc, addend, scratch, controls=list(controls))


def flag_less_than_const(b: Builder, reg: Reg, bound: int, flag: int,
                         controls=()) -> None:
    """flag ^= [reg < bound] for a constant bound.

    Emits one gate per set bit of the bound (disjoint prefix patterns); a
    bound above the register range is unconditionally true.
    """
    w = len(reg)
    controls = list(controls)
    if bound <= 0:
        return
    if bound >= (1 << w):
        b.gate(controls, (flag,))
        return
    for k in reversed(range(w)):
        if (bound >> k) & 1:
            pattern = [(reg[j], bool((bound >> j) & 1)) for j in range(k + 1, w)]
            pattern.append((reg[k], False))
            b.gate(controls + pattern, (flag,))


def and_ladder(b: Builder, inputs: Sequence[tuple[int, bool]], out: int,
               scratch: Reg) -> None:
    """out ^= AND of polarity-qualified inputs via a Toffoli chain.

    Needs len(inputs)-2 scratch bits; the caller uncomputes by re-emitting
    the same ladder reversed (capture it in a segment).
    """
    m = len(inputs)
    if m == 0:
        raise CircuitError("and_ladder: no inputs")
    if m == 1:
        b.gate((inputs[0],), (out,))
        return
    if len(scratch) < m - 2:
        raise CircuitError("and_ladder: need m-2 scratch bits")
    cur = inputs[0]
    for idx in range(1, m):
        tgt = out if idx == m - 1 else scratch[idx - 1]
        b.gate((cur, inputs[idx]), (tgt,))
        cur = (tgt, True)
