"""Oracle composition: branchwise agreement, cost formulas, invariants."""

import random

import numpy as np
import pytest

from qrollout import domains as dm
from qrollout import oracle as orc
from qrollout.circuit import invert
from qrollout import emulator as em

CENTER3 = dm.parse_board("SSS\nSIS\nSSS", "sir")


def small_sir(h=1, m=2, t=1, rho=2):
    return dm.sir_spec(dm.SirConfig(m=m, horizon=h, threshold=t, rho=rho))


def small_sway(h=1, m=2):
    return dm.sway_spec(dm.SwayConfig(m=m, horizon=h))


def test_h0_oracle_is_eval_only():
    spec = small_sir(h=0)
    oc = orc.compose(spec)
    assert oc.prep_gates == 0 and oc.trans_gates == 0
    assert oc.report.gate_count == oc.eval_gates > 0
    # payoff of the initial configuration directly
    board = dm.set_cell(0, 0, dm.INFECTED)
    c = oc.circuit
    state = em.BasisState.from_registers(c, {"config0": board})
    out = em.apply(c, state)
    assert out.register_value(c, "payoff") == spec.classical_eval(board)


def test_branchwise_sir_and_sway_small():
    rep = orc.branchwise_check(small_sir(h=2, m=2), 150,
                               dm.set_cell(0, 0, dm.INFECTED))
    assert rep.passed
    rep = orc.branchwise_check(small_sway(h=2, m=2), 150, 0)
    assert rep.passed


def test_branchwise_3x3_instances():
    rep = orc.branchwise_check(dm.sway_spec(dm.SwayConfig(3, 2)), 50, 0)
    assert rep.passed
    rep = orc.branchwise_check(
        dm.sir_spec(dm.SirConfig(3, 2, threshold=2)), 50, CENTER3)
    assert rep.passed


def test_branchwise_detects_corrupted_transition():
    spec = small_sir(h=1, m=2)
    # corrupt the transition: skip the recovery update entirely
    fields = {f: getattr(spec, f) for f in spec.__dataclass_fields__}
    good_emit = fields["emit_transition"]

    def bad_emit(b, mid, nxt, dice, pool, scr):
        good_emit(b, mid, nxt, dice, pool, scr)
        b.x(nxt[0])                      # flip one configuration bit

    fields["emit_transition"] = bad_emit
    bad_spec = orc.RolloutSpec(**fields)
    rep = orc.branchwise_check(bad_spec, 20, dm.set_cell(0, 0, dm.INFECTED))
    assert not rep.passed
    assert rep.register == "config1"
    assert rep.round_index == 1
    assert rep.seed is not None


def test_hook_touching_foreign_registers_rejected():
    spec = small_sir(h=1, m=2)
    fields = {f: getattr(spec, f) for f in spec.__dataclass_fields__}
    good_emit = fields["emit_transition"]

    def leaky_emit(b, mid, nxt, dice, pool, scr):
        good_emit(b, mid, nxt, dice, pool, scr)
        b.x(0)                           # config0 belongs to round 0

    fields["emit_transition"] = leaky_emit
    with pytest.raises(orc.OracleError):
        orc.compose(orc.RolloutSpec(**fields))


def test_sentinel_no_op_branch():
    # out-of-range selector: configuration after the index phase equals the
    # configuration before it (placements skipped, only dynamics act)
    spec = small_sway(h=1, m=2)
    oc = orc.compose(spec)
    c = oc.circuit
    sel_max = (1 << spec.w) - 1          # 7 >= popcount(4): sentinel
    state = em.BasisState.from_registers(
        c, {"config0": 0, "sel_h1_p0": sel_max, "sel_h1_p1": sel_max,
            "dice_h1": 0})
    out = em.apply(c, state)
    assert out.register_value(c, "config1") == 0   # empty board: no flips


def test_oracle_bijective_exhaustive_smallest():
    spec = dm.sir_spec(dm.SirConfig(m=1, horizon=1, threshold=0))
    oc = orc.compose(spec)
    assert oc.report.qubit_count <= 20
    rep = em.check_bijective(oc.circuit)
    assert rep.passed and rep.mode == "exhaustive"


def test_oracle_ancilla_clean_exhaustive():
    # smallest oracle, every (config, selector, dice) input: the staging
    # board, mask, scratch, and pool all return to zero
    spec = dm.sir_spec(dm.SirConfig(m=1, horizon=1, threshold=0))
    oc = orc.compose(spec)
    dist = em.InputDistribution(
        uniform={"config0": 4, "sel_h1_p0": 2, "dice_h1": 8})
    rep = em.check_ancilla_clean(oc.circuit, dist,
                                 roles=("ancilla", "mask"))
    assert rep.passed


def test_compose_invert_round_trip():
    spec = small_sir(h=2, m=2)
    oc = orc.compose(spec)
    c = oc.circuit
    ci = invert(c)
    rng = random.Random(5)
    for _ in range(200):
        x = rng.getrandbits(c.total_qubits)
        assert em.apply_int(ci, em.apply_int(c, x)) == x


def test_selectors_and_dice_read_only():
    for spec in (small_sir(h=2, m=2), small_sway(h=1, m=2)):
        oc = orc.compose(spec)
        assert orc.verify_read_only(oc.circuit)


def test_gate_formula_exact_and_h_regression():
    for make in (small_sir, small_sway):
        oc1 = orc.compose(make(h=1), record=False)
        oc2 = orc.compose(make(h=2), record=False)
        oc3 = orc.compose(make(h=3), record=False)
        per_round = 2 * oc1.prep_gates + oc1.trans_gates
        assert oc2.report.gate_count - oc1.report.gate_count == per_round
        assert oc3.report.gate_count - oc2.report.gate_count == per_round
        for oc, spec in ((oc1, make(h=1)), (oc2, make(h=2)), (oc3, make(h=3))):
            predicted = orc.gate_cost_formula(spec, oc.g_index, oc.g_trans,
                                              oc.g_eval)
            assert round(predicted) == oc.report.gate_count


def test_qubit_formula_matches_built_registers():
    for spec in (small_sir(h=2, m=3, t=2), small_sway(h=2, m=3),
                 small_sir(h=0, m=2)):
        lay = orc.qubit_cost_formula(spec)
        oc = orc.compose(spec, record=False)
        assert oc.report.qubit_count == lay.total
        bd = lay.breakdown()
        assert bd["total"] == sum(v for k, v in bd.items()
                                  if k not in ("total", "q_anc"))


def test_qubit_formula_h0():
    spec = small_sir(h=0, m=2)
    lay = orc.qubit_cost_formula(spec)
    # H=0: N*s + q_anc + 1
    assert lay.total == 4 * 2 + lay.q_anc + 1
    assert lay.board_mid == 0 and lay.mask == 0


def test_max_live_ancilla_constant_in_h():
    peaks = []
    for h in range(1, 5):
        oc = orc.compose(small_sir(h=h, m=2), record=False)
        peaks.append(oc.report.max_live_ancilla)
    assert len(set(peaks)) == 1


def test_arm_register_compose_and_branchwise():
    spec = small_sir(h=2, m=2, t=1)
    board = dm.set_cell(0, 0, dm.INFECTED)
    moves = dm.default_first_moves(spec, board, 2)
    rng = random.Random(9)
    arm_values = [rng.randrange(2) for _ in range(120)]
    rep = orc.branchwise_check(spec, 120, board, arms=2, first_moves=moves,
                               arm_values=arm_values)
    assert rep.passed


def test_arm_layout_adds_register_keeps_selectors():
    spec = small_sir(h=1, m=2)
    base = orc.qubit_cost_formula(spec)
    armed = orc.qubit_cost_formula(spec, arms=2)
    assert armed.arm_qubits == 2           # ceil(log2(3))
    assert armed.selector_qubits == base.selector_qubits
    assert armed.total == base.total + 2


def test_table2_qubit_ratio_smoke():
    spec = dm.sir_spec(dm.SirConfig(m=5, horizon=5, threshold=2))
    assert orc.qubit_cost_formula(spec).total / 767 < 1.25


def test_reference_instance_qubit_totals_within_band():
    # external reference totals for the three correctness-table instances
    cases = (
        (dm.sway_spec(dm.SwayConfig(3, 2)), 169),
        (dm.sway_spec(dm.SwayConfig(5, 3)), 667),
        (dm.sir_spec(dm.SirConfig(3, 2, threshold=2)), 146),
    )
    for spec, ref in cases:
        total = orc.qubit_cost_formula(spec).total
        assert 0.75 <= total / ref <= 1.25, (spec.name, total, ref)


def test_branchwise_matches_classical_payoff_distribution():
    # aggregate check: circuit MC via emulator == classical MC, same seeds
    spec = small_sway(h=1, m=2)
    oc = orc.compose(spec)
    c = oc.circuit
    seeds = list(range(300))
    rng_states = []
    bits = np.zeros((len(seeds), c.total_qubits), dtype=np.uint8)
    for r, seed in enumerate(seeds):
        rng = random.Random(seed)
        selectors, dice = orc.draw_streams(spec, rng)
        rng_states.append((selectors, dice))
        orc._set_register(bits, r, c, "sel_h1_p0", selectors[0][0])
        orc._set_register(bits, r, c, "sel_h1_p1", selectors[0][1])
        dval = 0
        for i, face in enumerate(dice[0]):
            dval |= face << (i * spec.d)
        orc._set_register(bits, r, c, "dice_h1", dval)
    outs = em.apply_bits(c, bits)
    circuit_wins = sum(orc._get_register(outs[r], c, "payoff")
                       for r in range(len(seeds)))
    classical_wins = sum(
        dm.classical_rollout(spec, 0, sel, dice)[1]
        for sel, dice in rng_states)
    assert circuit_wins == classical_wins
