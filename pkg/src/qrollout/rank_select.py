"""Coherent rank-select: semantic oracle, scan and blocked circuit builders.

Rank-select maps an N-bit validity mask and a rank r to the position of the
r-th set bit (0-indexed), or to the sentinel N when r is out of range.  Masks
are integers with bit i = position i; ``mask_from_string`` reads the
left-to-right string form where character i is position i.

Two constructions are provided:

* ``build_scan``     -- sequential compare-and-increment scan, Theta(N*w)
                        gates, w-1 shared scratch bits.
* ``build_blocked``  -- block-popcount construction with long-range writes,
                        Theta(N*log w) gates for blocks of size B ~ w.

Both leave mask and rank inputs unchanged, return every ancilla to zero, and
write position XOR sentinel into a sentinel-preloaded output register.
"""
from __future__ import annotations

from dataclasses import dataclass

from .circuit import Builder, Circuit
from .gadgets import (add_register, and_ladder, controlled_decrement,
                      controlled_increment, copy_register, sub_register,
                      xor_constant)


def width_for(n: int) -> int:
    """Selector/output width w = ceil(log2(N+1))."""
    if n < 1:
        raise ValueError("N must be >= 1")
    return n.bit_length()


@dataclass(frozen=True)
class RankSelectLayout:
    n: int
    w: int
    variant: str            # "scan" | "blocked"
    block: int = 0          # blocked only
    n_blocks: int = 0       # blocked only


def scan_layout(n: int) -> RankSelectLayout:
    return RankSelectLayout(n=n, w=width_for(n), variant="scan")


def blocked_layout(n: int, block: int | None = None) -> RankSelectLayout:
    w = width_for(n)
    b = w if block is None else block
    b = max(1, min(b, n))
    return RankSelectLayout(n=n, w=w, variant="blocked", block=b,
                            n_blocks=-(-n // b))


# ---------------------------------------------------------------------------
# semantics

def select_semantics(mask: int, n: int, r: int) -> int:
    """Position of the r-th set bit of an n-bit mask, else sentinel n."""
    if r < 0:
        raise ValueError("rank must be non-negative")
    seen = 0
    for i in range(n):
        if (mask >> i) & 1:
            if seen == r:
                return i
            seen += 1
    return n


def mask_from_string(s: str) -> int:
    """Left-to-right mask string: character i is position i."""
    m = 0
    for i, ch in enumerate(s):
        if ch == "1":
            m |= 1 << i
        elif ch != "0":
            raise ValueError(f"bad mask character {ch!r}")
    return m


def mask_to_string(mask: int, n: int) -> str:
    return "".join("1" if (mask >> i) & 1 else "0" for i in range(n))


def canonical_mask(n_total: int, t: int, weight: int) -> int:
    """Hard-family mask: weight leftmost-packed ones in the length-t prefix,
    all-ones suffix.  At rank t-1 it selects position 2t - weight - 1."""
    if not 1 <= t <= n_total - 1:
        raise ValueError("cut position out of range")
    lo = max(0, 2 * t - n_total)
    if not lo <= weight <= t - 1:
        raise ValueError(f"weight {weight} outside S_t = [{lo}, {t - 1}]")
    prefix = (1 << weight) - 1
    suffix = ((1 << (n_total - t)) - 1) << t
    return prefix | suffix


# ---------------------------------------------------------------------------
# scan construction

def scan_cells(b: Builder, mask_bits, nth_bits, rank_bits, match_bit,
               scr_bits, out_bits, sentinel: int) -> None:
    """Per-position compare/write/increment cells (no counter clear pass).

    The comparison XORs nth into the rank counter in place and tests for
    all-zero with negative-polarity controls, then restores; the ladder and
    its scratch are uncomputed around each conditional write.
    """
    w = len(nth_bits)
    for i, mbit in enumerate(mask_bits):
        b.begin_segment()
        for j in range(w):
            b.cx(nth_bits[j], rank_bits[j])
        inputs = [(mbit, True)] + [(rank_bits[j], False) for j in range(w)]
        and_ladder(b, inputs, match_bit, scr_bits)
        compare = b.end_segment()
        xor_constant(b, out_bits, i ^ sentinel, controls=[(match_bit, True)])
        b.emit_inverse(compare)
        controlled_increment(b, rank_bits, [(mbit, True)], scr_bits)


def scan_fragment(b: Builder, mask_bits, nth_bits, rank_bits, match_bit,
                  scr_bits, out_bits, sentinel: int | None = None) -> None:
    """Full self-cleaning scan: preload sentinel, cells, counter clear pass."""
    if sentinel is None:
        sentinel = len(mask_bits)
    xor_constant(b, out_bits, sentinel)
    scan_cells(b, mask_bits, nth_bits, rank_bits, match_bit, scr_bits,
               out_bits, sentinel)
    for mbit in reversed(mask_bits):
        controlled_decrement(b, rank_bits, [(mbit, True)], scr_bits)


def build_scan(n: int, record: bool = True) -> Circuit | None:
    """Sequential-scan rank-select circuit over an n-bit mask.

    Registers (declaration order = cut layout): mask, nth, rank counter,
    match flag, shared scratch, output (sentinel-preloaded).  Exact gate
    count N*(10w - 3) + 1.
    """
    b = builder_scan(n, record=record)
    return b.finish() if record else None


def builder_scan(n: int, record: bool = True) -> Builder:
    w = width_for(n)
    b = Builder(record=record)
    mask = b.add_register("mask", n, "mask")
    nth = b.add_register("nth", w, "selector")
    rank = b.add_register("rank", w, "rank")
    match = b.add_register("match", 1, "ancilla")
    scr = b.add_register("scr", w - 1, "ancilla") if w > 1 else ()
    out = b.add_register("out", w, "output")
    b.acquire(w + 1 + len(scr))
    scan_fragment(b, mask, nth, rank, match[0], scr, out, sentinel=n)
    b.release(w + 1 + len(scr))
    return b


def scan_gate_count(n: int) -> int:
    """Closed form for build_scan's gate count: N*(10w - 3) + 1."""
    return n * (10 * width_for(n) - 3) + 1


# ---------------------------------------------------------------------------
# blocked construction

def _tree_pool_width(block: int) -> int:
    # node width tracks the largest count it can hold, so the root ends at
    # exactly ceil(log2(block+1)) bits
    maxima = [1] * block
    total = 0
    while len(maxima) > 1:
        nxt = []
        for i in range(0, len(maxima) - 1, 2):
            mv = maxima[i] + maxima[i + 1]
            total += mv.bit_length()
            nxt.append(mv)
        if len(maxima) % 2:
            nxt.append(maxima[-1])
        maxima = nxt
    return total


def _emit_popcount_tree(b: Builder, leaves, tpool, scr):
    """Left-leaning balanced add-tree over single-bit leaves; returns the
    root register holding the popcount.  A lone leaf is its own root."""
    nodes = [((q,), 1) for q in leaves]
    cursor = 0
    while len(nodes) > 1:
        nxt = []
        for i in range(0, len(nodes) - 1, 2):
            (a, amax), (c2, cmax) = nodes[i], nodes[i + 1]
            mv = amax + cmax
            wd = mv.bit_length()
            reg = tuple(tpool[cursor:cursor + wd])
            cursor += wd
            copy_register(b, a, reg)
            add_register(b, reg, c2, scr)
            nxt.append((reg, mv))
        if len(nodes) % 2:
            nxt.append(nodes[-1])
        nodes = nxt
    return nodes[0][0]


def builder_blocked(n: int, block: int | None = None,
                    record: bool = True) -> Builder:
    lay = blocked_layout(n, block)
    w, bsz, nblocks = lay.w, lay.block, lay.n_blocks
    w_in = bsz.bit_length()

    b = Builder(record=record)
    mask = b.add_register("mask", n, "mask")
    nth = b.add_register("nth", w, "selector")
    p = b.add_register("p", w, "rank")
    tp_w = _tree_pool_width(bsz)
    tpool = b.add_register("tpool", tp_w, "ancilla") if tp_w else ()
    diff = b.add_register("diff", w + 1, "ancilla")
    diff2 = b.add_register("diff2", w_in + 2, "ancilla")
    take = b.add_register("take", 1, "ancilla")
    irank = b.add_register("irank", w_in, "ancilla")
    imatch = b.add_register("imatch", 1, "ancilla")
    ell = b.add_register("ell", w_in, "ancilla")
    scr = b.add_register("scr", max(w, w_in + 1), "ancilla")
    out = b.add_register("out", w, "output")
    anc = tp_w + (w + 1) + (w_in + 2) + 1 + w_in + 1 + w_in + len(scr) + w
    b.acquire(anc)

    xor_constant(b, out, n)
    for q in range(nblocks):
        leaves = mask[q * bsz: min((q + 1) * bsz, n)]
        bprime = len(leaves)

        b.begin_segment()
        root = _emit_popcount_tree(b, leaves, tpool, scr)
        tree = b.end_segment()

        b.begin_segment()
        copy_register(b, nth, diff)
        sub_register(b, diff, p, scr)                 # diff = r - p, sign at bit w
        copy_register(b, diff[:w_in + 1], diff2)
        sub_register(b, diff2, root, scr)             # sign at bit w_in+1
        cmp = b.end_segment()

        take_controls = ([(diff[j], False) for j in range(w_in, w + 1)]
                         + [(diff2[w_in + 1], True)])
        b.gate(take_controls, (take[0],))

        b.begin_segment()
        xor_constant(b, ell, bprime)
        scan_cells(b, leaves, diff[:w_in], irank, imatch[0], scr, ell,
                   sentinel=bprime)
        inner = b.end_segment()

        xor_constant(b, out, n ^ (q * bsz), controls=[(take[0], True)])
        add_register(b, out, ell, scr, controls=[(take[0], True)])

        b.emit_inverse(inner)
        b.gate(take_controls, (take[0],))
        b.emit_inverse(cmp)
        add_register(b, p, root, scr)
        b.emit_inverse(tree)

    for q in reversed(range(nblocks)):
        leaves = mask[q * bsz: min((q + 1) * bsz, n)]
        b.begin_segment()
        root = _emit_popcount_tree(b, leaves, tpool, scr)
        tree = b.end_segment()
        sub_register(b, p, root, scr)
        b.emit_inverse(tree)

    b.release(anc)
    return b


def build_blocked(n: int, block: int | None = None,
                  record: bool = True) -> Circuit | None:
    """Blocked rank-select: per block, popcount via a balanced add-tree, a
    take flag [p <= r < p + c_q], an inner scan at the local rank, one
    long-range conditional write, then full cleanup; a reverse accumulation
    pass clears the running prefix count."""
    b = builder_blocked(n, block, record=record)
    return b.finish() if record else None
