"""Three-phase rollout-oracle composition from a domain RolloutSpec.

Round structure (h = 1..H):  a staging board is fan-out copied from the
round-(h-1) configuration; the validity mask is computed on it; each selector
pass runs rank-select and decodes the selected position into a placement on
the staging board (updating the mask between passes); rank-select and mask
are unwound; the stochastic transition then reads the staging board and dice
and writes the round-h configuration out of place; finally the whole prep
phase is emitted in reverse, returning every ancilla (including the staging
board) to zero.  Terminal evaluation writes the single payoff qubit from the
round-H configuration.

Selector and dice registers are controls only, so the composed circuit is a
permutation that leaves them unchanged on every branch, and inverting it
returns every register to its input value.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .circuit import Builder, Circuit, CostReport, Gate
from .emulator import apply_bits
from .gadgets import copy_register
from .rank_select import scan_fragment, width_for


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class RolloutSpec:
    """A domain's validity/transition/evaluation hooks plus register widths.

    Circuit hooks emit gate fragments through a Builder; classical hooks are
    the bit-exact reference semantics used for branchwise validation and the
    exact dynamic program.
    """

    name: str
    n_cells: int
    horizon: int
    s: int                       # configuration bits per cell
    d: int                       # dice bits per cell per round
    faces: int                   # dice faces, faces <= 2^d
    selectors_per_round: int
    # circuit hooks
    emit_validity: Callable      # (b, board_bits, mask_bits) -> None
    emit_transition: Callable    # (b, mid_bits, next_bits, dice_bits, pool, scr)
    emit_eval: Callable          # (b, config_bits, payoff_qubit, pool, scr)
    placement_bit: Callable      # pass_index -> cell-bit offset in {0..s-1}
    # pool demands (closed form, documented in the layout breakdown)
    trans_pool_width: int
    eval_pool_width: int
    domain_scr_width: int
    # classical hooks
    classical_validity: Callable     # board -> mask int
    classical_place: Callable        # (board, position, pass_index) -> board
    classical_transition: Callable   # (board, dice_faces) -> board
    classical_eval: Callable         # board -> 0 | 1
    payoff_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if min(self.n_cells, self.horizon + 1, self.s, self.d,
               self.selectors_per_round) < 1:
            raise OracleError("all counts must be positive")
        if not 2 <= self.faces <= (1 << self.d):
            raise OracleError("faces must satisfy 2 <= D <= 2^d")

    @property
    def w(self) -> int:
        return width_for(self.n_cells)


@dataclass(frozen=True)
class OracleLayout:
    """Closed-form register plan; ``total`` is the exact built qubit count."""

    n_cells: int
    horizon: int
    w: int
    config_qubits: int        # (H+1) * N * s
    selector_qubits: int      # P * H * w
    dice_qubits: int          # H * N * d
    arm_qubits: int
    payoff_qubits: int        # 1
    board_mid: int
    mask: int
    scr: int
    pool: int

    @property
    def q_anc(self) -> int:
        return self.board_mid + self.mask + self.scr + self.pool

    @property
    def total(self) -> int:
        return (self.config_qubits + self.selector_qubits + self.dice_qubits
                + self.arm_qubits + self.payoff_qubits + self.q_anc)

    def breakdown(self) -> dict[str, int]:
        return {
            "config": self.config_qubits, "selector": self.selector_qubits,
            "dice": self.dice_qubits, "arm": self.arm_qubits,
            "payoff": self.payoff_qubits, "board_mid": self.board_mid,
            "mask": self.mask, "scr": self.scr, "pool": self.pool,
            "q_anc": self.q_anc, "total": self.total,
        }


def qubit_cost_formula(spec: RolloutSpec, arms: int = 0) -> OracleLayout:
    """Predicted qubit count: (H+1)Ns + P*H*w + H*N*d + q_anc + 1 (+ arm)."""
    n, h, w, p = spec.n_cells, spec.horizon, spec.w, spec.selectors_per_round
    rs_pool = w + 1 + p * w if h > 0 else 0
    pool = max(rs_pool, spec.trans_pool_width if h > 0 else 0,
               spec.eval_pool_width)
    scr = max(w - 1 if h > 0 else 0, spec.domain_scr_width)
    return OracleLayout(
        n_cells=n, horizon=h, w=w,
        config_qubits=(h + 1) * n * spec.s,
        selector_qubits=p * h * w,
        dice_qubits=h * n * spec.d,
        arm_qubits=(arms + 1).bit_length() if arms else 0,
        payoff_qubits=1,
        board_mid=n * spec.s if h > 0 else 0,
        mask=n if h > 0 else 0,
        scr=scr,
        pool=pool,
    )


def gate_cost_formula(spec: RolloutSpec, g_index: float, g_trans: float,
                      g_eval: float) -> float:
    """Predicted per-call gate count H*(P*G_index + G_trans) + G_eval."""
    return (spec.horizon
            * (spec.selectors_per_round * g_index + g_trans) + g_eval)


@dataclass
class ComposedOracle:
    circuit: Circuit | None
    report: CostReport
    layout: OracleLayout
    prep_gates: int           # one prep emission per round (index phase is 2x)
    trans_gates: int          # per round
    eval_gates: int
    passes: int = 1           # selector passes per round
    arms: int = 0

    @property
    def g_index(self) -> float:
        """Per-selector-pass index cost (prep + unprep amortized)."""
        if self.layout.horizon == 0:
            return 0.0
        return 2.0 * self.prep_gates / max(1, self.passes)

    @property
    def g_trans(self) -> float:
        return float(self.trans_gates)

    @property
    def g_eval(self) -> float:
        return float(self.eval_gates)


def _pattern(bits: Sequence[int], value: int):
    return [(bits[k], bool((value >> k) & 1)) for k in range(len(bits))]


def _checked_fragment(b: Builder, allowed: set[int], emit, *args) -> None:
    b.begin_segment()
    emit(b, *args)
    seg = b.end_segment()
    for g in seg:
        bad = [q for q in g.support() if q not in allowed]
        if bad:
            raise OracleError(
                f"hook emitted a gate touching foreign qubits {bad}")


def compose(spec: RolloutSpec, record: bool = True, arms: int = 0,
            first_moves: Sequence[int] | None = None,
            validate_hooks: bool = True) -> ComposedOracle:
    """Build the full rollout oracle circuit (or its tally when record=False).

    With ``arms`` > 0 a dedicated first-move register replaces the round-1
    pass-0 selector: the arm index decodes to a deterministic placement at
    ``first_moves[a]``.  The bypassed selector register is still allocated so
    the qubit formula holds verbatim.
    """
    n, h, w, p = spec.n_cells, spec.horizon, spec.w, spec.selectors_per_round
    s = spec.s
    if arms and (first_moves is None or len(first_moves) < arms):
        raise OracleError("arms > 0 requires a first_moves table")
    lay = qubit_cost_formula(spec, arms)
    b = Builder(record=record)

    configs = [b.add_register(f"config{i}", n * s, "config")
               for i in range(h + 1)]
    sels = [[b.add_register(f"sel_h{i + 1}_p{j}", w, "selector")
             for j in range(p)] for i in range(h)]
    dice = [b.add_register(f"dice_h{i + 1}", n * spec.d, "dice")
            for i in range(h)]
    arm_bits = (b.add_register("arm", lay.arm_qubits, "arm")
                if arms else ())
    payoff = b.add_register("payoff", 1, "payoff")
    board_mid = (b.add_register("board_mid", lay.board_mid, "ancilla")
                 if lay.board_mid else ())
    vmask = b.add_register("vmask", lay.mask, "mask") if lay.mask else ()
    scr = b.add_register("scr", lay.scr, "ancilla") if lay.scr else ()
    pool = b.add_register("pool", lay.pool, "ancilla") if lay.pool else ()

    rank = pool[:w]
    match = pool[w] if lay.pool > w else None
    outs = [pool[w + 1 + j * w: w + 1 + (j + 1) * w] for j in range(p)]
    anc_count = lay.q_anc
    prep_gates = trans_gates = -1

    def emit_mask(source_bits):
        if validate_hooks:
            _checked_fragment(b, set(source_bits) | set(vmask),
                              spec.emit_validity, source_bits, vmask)
        else:
            spec.emit_validity(b, source_bits, vmask)

    for hh in range(h):
        g0 = b.gate_count
        b.acquire(anc_count)
        b.begin_segment()                      # PREP capture
        copy_register(b, configs[hh], board_mid)
        emit_mask(board_mid)
        scan_segs: list[list[Gate] | None] = []
        for pj in range(p):
            if hh == 0 and pj == 0 and arms:
                scan_segs.append(None)
                for a in range(arms):
                    pos = first_moves[a]
                    targets = [board_mid[pos * s + spec.placement_bit(pj)]]
                    if pj < p - 1:
                        targets.append(vmask[pos])
                    b.gate(_pattern(arm_bits, a), targets)
            else:
                b.begin_segment()
                scan_fragment(b, vmask, sels[hh][pj], rank, match, scr,
                              outs[pj], sentinel=n)
                scan_segs.append(b.end_segment())
                for j in range(n):
                    targets = [board_mid[j * s + spec.placement_bit(pj)]]
                    if pj < p - 1:
                        targets.append(vmask[j])
                    b.gate(_pattern(outs[pj], j), targets)
        for pj in range(p - 1, -1, -1):
            if scan_segs[pj] is not None:
                b.emit_inverse(scan_segs[pj])
            if pj > 0:
                # restore the mask bit cleared by pass pj-1's decode
                if scan_segs[pj - 1] is None:
                    for a in range(arms):
                        b.gate(_pattern(arm_bits, a),
                               (vmask[first_moves[a]],))
                else:
                    for j in range(n):
                        b.gate(_pattern(outs[pj - 1], j), (vmask[j],))
        emit_mask(configs[hh])                 # clears: same values as staging
        prep = b.end_segment()
        g1 = b.gate_count

        if validate_hooks:
            allow = (set(board_mid) | set(configs[hh + 1]) | set(dice[hh])
                     | set(pool) | set(scr))
            _checked_fragment(b, allow, spec.emit_transition, board_mid,
                              configs[hh + 1], dice[hh], pool, scr)
        else:
            spec.emit_transition(b, board_mid, configs[hh + 1], dice[hh],
                                 pool, scr)
        g2 = b.gate_count
        b.emit_inverse(prep)
        b.release(anc_count)
        g3 = b.gate_count
        round_prep, round_trans = g1 - g0, g2 - g1
        if arms == 0:
            if prep_gates < 0:
                prep_gates, trans_gates = round_prep, round_trans
            elif (prep_gates, trans_gates) != (round_prep, round_trans):
                raise OracleError("rounds emitted unequal gate counts")
        else:
            prep_gates, trans_gates = round_prep, round_trans
        assert g3 - g2 == round_prep

    g_eval0 = b.gate_count
    b.acquire(lay.pool + lay.scr)
    if validate_hooks:
        allow = set(configs[h]) | {payoff[0]} | set(pool) | set(scr)
        _checked_fragment(b, allow, spec.emit_eval, configs[h], payoff[0],
                          pool, scr)
    else:
        spec.emit_eval(b, configs[h], payoff[0], pool, scr)
    b.release(lay.pool + lay.scr)
    eval_gates = b.gate_count - g_eval0

    circuit = b.finish() if record else None
    report = b.report()
    if report.qubit_count != lay.total:
        raise OracleError("layout prediction disagrees with built registers")
    return ComposedOracle(circuit=circuit, report=report, layout=lay,
                          prep_gates=max(prep_gates, 0),
                          trans_gates=max(trans_gates, 0),
                          eval_gates=eval_gates, passes=p, arms=arms)


# ---------------------------------------------------------------------------
# branchwise validation

@dataclass(frozen=True)
class BranchwiseReport:
    passed: bool
    n_branches: int
    seed: int | None = None          # first failing seed
    round_index: int | None = None   # 1-based round of first divergence
    register: str | None = None

    def __bool__(self):
        return self.passed


def draw_streams(spec: RolloutSpec, rng: random.Random,
                 arms: int = 0) -> tuple[list[list[int]], list[list[int]]]:
    """Seed-derived selector and dice streams, in register declaration order.

    Selectors are uniform over all 2^w strings; dice are uniform over the
    valid faces {0..D-1}.  The round-1 pass-0 selector is drawn even when an
    arm register bypasses it, keeping streams aligned across modes.
    """
    w = spec.w
    selectors = [[rng.randrange(1 << w) for _ in range(spec.selectors_per_round)]
                 for _ in range(spec.horizon)]
    dice = [[rng.randrange(spec.faces) for _ in range(spec.n_cells)]
            for _ in range(spec.horizon)]
    return selectors, dice


def branchwise_check(spec: RolloutSpec, seeds: Sequence[int] | int,
                     board0: int, arms: int = 0,
                     first_moves: Sequence[int] | None = None,
                     arm_values: Sequence[int] | None = None,
                     oracle: ComposedOracle | None = None) -> BranchwiseReport:
    """Fix selector/dice registers branch by branch and demand bit-exact
    agreement with the classical rollout: every per-round configuration, the
    payoff bit, read-only inputs, and cleanness of every ancilla register."""
    from .domains import classical_trace  # local import: domains builds on us

    if isinstance(seeds, int):
        seeds = list(range(seeds))
    oc = oracle if oracle is not None else compose(spec, record=True,
                                                   arms=arms,
                                                   first_moves=first_moves)
    c = oc.circuit
    n, h, w, p, s = (spec.n_cells, spec.horizon, spec.w,
                     spec.selectors_per_round, spec.s)
    rows = len(seeds)
    bits = np.zeros((rows, c.total_qubits), dtype=np.uint8)
    streams = []
    for r, seed in enumerate(seeds):
        rng = random.Random(seed)
        selectors, dice = draw_streams(spec, rng, arms)
        arm_val = arm_values[r] if arms else 0
        streams.append((selectors, dice, arm_val))
        _set_register(bits, r, c, "config0", board0)
        for hh in range(h):
            for pj in range(p):
                _set_register(bits, r, c, f"sel_h{hh + 1}_p{pj}",
                              selectors[hh][pj])
            dval = 0
            for i, face in enumerate(dice[hh]):
                dval |= face << (i * spec.d)
            _set_register(bits, r, c, f"dice_h{hh + 1}", dval)
        if arms:
            _set_register(bits, r, c, "arm", arm_val)
    inputs = bits.copy()
    outs = apply_bits(c, bits)

    clean_regs = [reg.name for reg in c.registers
                  if reg.role in ("ancilla", "mask")]
    for r, seed in enumerate(seeds):
        selectors, dice, arm_val = streams[r]
        fm = first_moves[arm_val] if arms else None
        boards, payoff = classical_trace(spec, board0, selectors, dice,
                                         first_move=fm)
        for hh in range(h + 1):
            got = _get_register(outs[r], c, f"config{hh}")
            if got != boards[hh]:
                return BranchwiseReport(False, rows, seed, hh, f"config{hh}")
        if _get_register(outs[r], c, "payoff") != payoff:
            return BranchwiseReport(False, rows, seed, h, "payoff")
        for reg in c.registers:
            if reg.role in ("selector", "dice", "arm"):
                before = _get_register(inputs[r], c, reg.name)
                after = _get_register(outs[r], c, reg.name)
                if before != after:
                    return BranchwiseReport(False, rows, seed, None, reg.name)
        for name in clean_regs:
            if _get_register(outs[r], c, name) != 0:
                return BranchwiseReport(False, rows, seed, None, name)
    return BranchwiseReport(True, rows)


def _set_register(bits: np.ndarray, row: int, c: Circuit, name: str,
                  value: int) -> None:
    for k, q in enumerate(c.register(name)):
        bits[row, q] = (value >> k) & 1


def _get_register(row: np.ndarray, c: Circuit, name: str) -> int:
    v = 0
    for k, q in enumerate(c.register(name)):
        v |= int(row[q]) << k
    return v


def verify_read_only(c: Circuit, roles=("selector", "dice", "arm")) -> bool:
    """Structurally confirm that no gate targets a register in ``roles``."""
    protected = set()
    for reg in c.registers:
        if reg.role in roles:
            protected.update(c.register(reg.name))
    return all(not (set(g.targets) & protected) for g in c.gates)
