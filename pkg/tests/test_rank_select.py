"""Rank-select: semantics, both constructions, canonical hard family."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qrollout import emulator as em
from qrollout import rank_select as rs
from qrollout.circuit import cost, crossing_count, light_cone, register_local_span, span_profile


def brute_select(mask: int, n: int, r: int) -> int:
    positions = [i for i in range(n) if (mask >> i) & 1]
    return positions[r] if r < len(positions) else n


def sweep(circuit, n):
    """Emulate every (mask, rank) pair; returns (out, mask', nth', clean)."""
    w = rs.width_for(n)
    rows = (1 << n) * (1 << w)
    masks = np.arange(rows, dtype=np.int64) % (1 << n)
    ranks = np.arange(rows, dtype=np.int64) // (1 << n)
    bits = np.zeros((rows, circuit.total_qubits), dtype=np.uint8)
    for k, q in enumerate(circuit.register("mask")):
        bits[:, q] = (masks >> k) & 1
    for k, q in enumerate(circuit.register("nth")):
        bits[:, q] = (ranks >> k) & 1
    outs = em.apply_bits(circuit, bits)
    def read(reg):
        v = np.zeros(rows, dtype=np.int64)
        for k, q in enumerate(circuit.register(reg)):
            v |= outs[:, q].astype(np.int64) << k
        return v
    anc = [q for reg in circuit.registers if reg.role in ("ancilla", "rank")
           for q in circuit.register(reg.name)]
    clean = not outs[:, anc].any()
    return masks, ranks, read("out"), read("mask"), read("nth"), clean


def test_worked_example_positions():
    mask = rs.mask_from_string("01101000")
    assert mask == 0b00010110
    assert rs.select_semantics(mask, 8, 0) == 1
    assert rs.select_semantics(mask, 8, 1) == 2
    assert rs.select_semantics(mask, 8, 2) == 4
    for r in range(3, 16):
        assert rs.select_semantics(mask, 8, r) == 8


def test_semantics_trivial_cases():
    assert rs.select_semantics(0, 6, 0) == 6
    assert rs.select_semantics(0, 6, 5) == 6
    full = (1 << 6) - 1
    for k in range(6):
        assert rs.select_semantics(full, 6, k) == k


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 12), st.data())
def test_semantics_matches_bruteforce(n, data):
    mask = data.draw(st.integers(0, 2 ** n - 1))
    r = data.draw(st.integers(0, 2 ** rs.width_for(n) - 1))
    assert rs.select_semantics(mask, n, r) == brute_select(mask, n, r)


def test_mask_string_roundtrip():
    s = "0110100011"
    assert rs.mask_to_string(rs.mask_from_string(s), len(s)) == s


@pytest.mark.parametrize("n", range(1, 7))
def test_scan_equals_semantics_exhaustive(n):
    c = rs.build_scan(n)
    masks, ranks, outs, m2, r2, clean = sweep(c, n)
    want = np.array([rs.select_semantics(int(m), n, int(r))
                     for m, r in zip(masks, ranks)])
    assert np.array_equal(outs, want)
    assert np.array_equal(m2, masks)      # mask register unchanged
    assert np.array_equal(r2, ranks)      # nth register unchanged
    assert clean


@pytest.mark.parametrize("n", range(1, 7))
def test_blocked_equals_semantics_exhaustive(n):
    c = rs.build_blocked(n)
    masks, ranks, outs, m2, r2, clean = sweep(c, n)
    want = np.array([rs.select_semantics(int(m), n, int(r))
                     for m, r in zip(masks, ranks)])
    assert np.array_equal(outs, want)
    assert np.array_equal(m2, masks)
    assert np.array_equal(r2, ranks)
    assert clean


def test_blocked_worked_trace_n8():
    # mask 01101000, r=2: block 0 holds ranks {0,1}, block 1 fires with
    # local rank 0 at local index 0, so out = 1*4 + 0 = 4
    c = rs.build_blocked(8, 4)
    state = em.BasisState.from_registers(
        c, {"mask": rs.mask_from_string("01101000"), "nth": 2})
    assert em.apply(c, state).register_value(c, "out") == 4


def test_blocked_out_of_range_keeps_sentinel():
    c = rs.build_blocked(8, 4)
    state = em.BasisState.from_registers(
        c, {"mask": rs.mask_from_string("01101000"), "nth": 9})
    assert em.apply(c, state).register_value(c, "out") == 8


@pytest.mark.parametrize("block", [1, 2, 3, 5])
def test_blocked_nondefault_block_sizes(block):
    n = 7
    c = rs.build_blocked(n, block)
    masks, ranks, outs, _, _, clean = sweep(c, n)
    want = np.array([rs.select_semantics(int(m), n, int(r))
                     for m, r in zip(masks, ranks)])
    assert np.array_equal(outs, want)
    assert clean


def test_scan_gate_count_closed_form():
    for n in (1, 2, 5, 16, 100, 512):
        b = rs.builder_scan(n, record=False)
        assert b.report().gate_count == rs.scan_gate_count(n)


def test_scan_gate_band():
    # N(10w-3)+1 stays within [N*w, 10*N*w]
    for e in range(2, 10):
        n = 1 << e
        g = rs.scan_gate_count(n)
        w = rs.width_for(n)
        assert n * w <= g <= 10 * n * w


def test_scan_bijective_exhaustive_n3():
    rep = em.check_bijective(rs.build_scan(3))
    assert rep.passed and rep.mode == "exhaustive"


def test_blocked_bijective_sampled_n4():
    # blocked at N=4 carries ~35 qubits; the permutation check falls back to
    # sampled injectivity with an invert round-trip
    rep = em.check_bijective(rs.build_blocked(4), samples=20_000)
    assert rep.passed and rep.mode == "sampled"


def test_light_cone_covers_all_mask_bits():
    for n in (4, 8):
        for make in (rs.build_scan, rs.build_blocked):
            c = make(n)
            cone = light_cone(c, set(c.register("out")))
            assert set(c.register("mask")) <= cone


def test_crossing_bound_mask_aligned_cuts():
    import math
    for n in (4, 8, 16):
        for make in (rs.build_scan, rs.build_blocked):
            c = make(n)
            kappa = cost(c).max_fan_in
            for t in range(1, n):
                lhs = crossing_count(c, t)
                rhs = math.ceil(math.log2(min(t, n - t))) / (2 * kappa) \
                    if min(t, n - t) > 1 else 0.0
                assert lhs >= rhs, (n, t)


def test_span_profile_scan_vs_blocked():
    # scan gates touch at most one mask qubit (documented constant 0 for the
    # mask-local span); the blocked construction pays its cost in long-range
    # gates spanning Omega(w) positions
    n = 16
    scan = rs.build_scan(n)
    blocked = rs.build_blocked(n)
    assert register_local_span(scan, "mask") == 0
    prof = span_profile(blocked)
    assert prof.max_span >= rs.width_for(n)
    # the long-range writes reach from the mask region to the out register
    out_pos = min(blocked.position_of(q) for q in blocked.register("out"))
    assert prof.max_span >= out_pos - n


def test_canonical_mask_examples():
    # N=8, t=4, weight=3 -> 11101111, selects position 4 at rank 3
    m = rs.canonical_mask(8, 4, 3)
    assert rs.mask_to_string(m, 8) == "11101111"
    assert rs.select_semantics(m, 8, 3) == 2 * 4 - 3 - 1 == 4
    m = rs.canonical_mask(8, 4, 0)
    assert rs.mask_to_string(m, 8) == "00001111"
    assert rs.select_semantics(m, 8, 3) == 7


def test_canonical_mask_distinct_outputs():
    n, t = 10, 5
    outs = set()
    for w in range(max(0, 2 * t - n), t):
        m = rs.canonical_mask(n, t, w)
        outs.add(rs.select_semantics(m, n, t - 1))
    assert len(outs) == t - max(0, 2 * t - n)


def test_canonical_mask_rejects_bad_weight():
    with pytest.raises(ValueError):
        rs.canonical_mask(8, 4, 4)
    with pytest.raises(ValueError):
        rs.canonical_mask(8, 6, 2)   # needs weight >= 2t-N = 4


def test_layouts():
    lay = rs.scan_layout(8)
    assert (lay.n, lay.w, lay.variant) == (8, 4, "scan")
    lay = rs.blocked_layout(8)
    assert (lay.block, lay.n_blocks) == (4, 2)
    lay = rs.blocked_layout(10, 4)
    assert (lay.block, lay.n_blocks) == (4, 3)
