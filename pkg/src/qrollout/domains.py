"""Sway and SIR-epidemic instantiations of the rollout-oracle template.

Boards live on an m x m four-neighbor grid and are packed into integers with
two bits per cell (bit 0, bit 1):

    code 0 = (0,0) = empty / susceptible
    code 1 = (1,0) = black / infected
    code 2 = (0,1) = white / recovered        (code 3 unreachable)

Both domains provide circuit fragments (validity mask, stochastic transition,
terminal evaluation) and matching classical functions; the classical side is
the branchwise reference and also drives the exact distribution dynamic
program used as the payoff oracle at 3x3 scale.

Sway (two-player placement game): black then white place on empty cells each
round (white's validity excludes black's fresh placement), then every
occupied cell flips color with probability (4-k)/20, where k counts
same-color orthogonal neighbors on the pre-flip board; payoff 1 iff black
strictly outnumbers white at the horizon.

SIR: the selector vaccinates one susceptible cell (sentinel = no-op), then
simultaneously each susceptible cell with c infected neighbors becomes
infected iff its 8-sided die is below c, and each infected cell recovers iff
its die is below the recovery threshold rho (default 2); payoff 1 iff the
final infected count is at most the threshold T.
"""
from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass
from math import sqrt

from .circuit import Builder
from .gadgets import (add_register, controlled_increment, copy_register,
                      emit_reversed, flag_less_than_const, sub_register)
from .oracle import OracleError, RolloutSpec
from .rank_select import select_semantics, width_for

EMPTY = SUSCEPTIBLE = 0
BLACK = INFECTED = 1
WHITE = RECOVERED = 2

SWAY_FACES = 20
SWAY_DICE_BITS = 5
SIR_FACES = 8
SIR_DICE_BITS = 3

DP_STATE_BUDGET = 3 ** 9


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class SwayConfig:
    m: int
    horizon: int

    def __post_init__(self):
        if self.m < 1 or self.horizon < 0:
            raise ValueError("m >= 1 and horizon >= 0 required")


@dataclass(frozen=True)
class SirConfig:
    m: int
    horizon: int
    threshold: int
    rho: int = 2

    def __post_init__(self):
        if self.m < 1 or self.horizon < 0 or self.threshold < 0:
            raise ValueError("m >= 1, horizon >= 0, threshold >= 0 required")
        if not 0 <= self.rho <= SIR_FACES:
            raise ValueError("rho must lie in [0, 8]")


# ---------------------------------------------------------------------------
# boards and grids

def cell(board: int, i: int) -> int:
    return (board >> (2 * i)) & 3

def set_cell(board: int, i: int, code: int) -> int:
    return (board & ~(3 << (2 * i))) | (code << (2 * i))

def count_code(board: int, n: int, code: int) -> int:
    return sum(1 for i in range(n) if cell(board, i) == code)

def neighbors(m: int) -> list[list[int]]:
    out = []
    for r in range(m):
        for c in range(m):
            adj = []
            if r > 0:
                adj.append((r - 1) * m + c)
            if r < m - 1:
                adj.append((r + 1) * m + c)
            if c > 0:
                adj.append(r * m + c - 1)
            if c < m - 1:
                adj.append(r * m + c + 1)
            out.append(adj)
    return out


_SYMBOLS = {"sway": ".BW", "sir": "SIR"}


def parse_board(text: str, domain: str) -> int:
    """Plain-text grid of cell symbols (., B, W / S, I, R), row per line."""
    symbols = _SYMBOLS[domain]
    board = 0
    i = 0
    for line in text.strip().splitlines():
        for ch in line.strip():
            if ch.isspace():
                continue
            code = symbols.index(ch)
            board |= code << (2 * i)
            i += 1
    return board


def format_board(board: int, m: int, domain: str) -> str:
    symbols = _SYMBOLS[domain]
    rows = []
    for r in range(m):
        rows.append("".join(symbols[cell(board, r * m + c)] for c in range(m)))
    return "\n".join(rows)


def empty_mask(board: int, n: int) -> int:
    mask = 0
    for i in range(n):
        if cell(board, i) == 0:
            mask |= 1 << i
    return mask


# ---------------------------------------------------------------------------
# Sway classical dynamics

def _sway_transition(board: int, dice, nbrs) -> int:
    out = board
    for i, adj in enumerate(nbrs):
        code = cell(board, i)
        if code == EMPTY:
            continue
        k = sum(1 for j in adj if cell(board, j) == code)
        if dice[i] < 4 - k:
            out = set_cell(out, i, BLACK if code == WHITE else WHITE)
    return out


def sway_round(cfg: SwayConfig, board: int, black_selector: int,
               white_selector: int, dice) -> int:
    """One Sway round: black places, white places, then simultaneous flips."""
    n = cfg.m * cfg.m
    j = select_semantics(empty_mask(board, n), n, black_selector)
    if j < n:
        board = set_cell(board, j, BLACK)
    j = select_semantics(empty_mask(board, n), n, white_selector)
    if j < n:
        board = set_cell(board, j, WHITE)
    return _sway_transition(board, dice, neighbors(cfg.m))


def _sway_eval(board: int, n: int) -> int:
    return 1 if count_code(board, n, BLACK) > count_code(board, n, WHITE) else 0


# ---------------------------------------------------------------------------
# SIR classical dynamics

def _sir_transition(board: int, dice, nbrs, rho: int) -> int:
    out = board
    for i, adj in enumerate(nbrs):
        code = cell(board, i)
        if code == SUSCEPTIBLE:
            c = sum(1 for j in adj if cell(board, j) == INFECTED)
            if dice[i] < c:
                out = set_cell(out, i, INFECTED)
        elif code == INFECTED:
            if dice[i] < rho:
                out = set_cell(out, i, RECOVERED)
    return out


def sir_round(cfg: SirConfig, board: int, selector: int, dice) -> int:
    """One SIR round: vaccinate the selected susceptible cell, then spread
    and recover simultaneously on the post-vaccination board."""
    n = cfg.m * cfg.m
    j = select_semantics(empty_mask(board, n), n, selector)
    if j < n:
        board = set_cell(board, j, RECOVERED)
    return _sir_transition(board, dice, neighbors(cfg.m), cfg.rho)


# ---------------------------------------------------------------------------
# circuit fragments

def _emit_validity(b: Builder, board_bits, mask_bits) -> None:
    # valid <=> cell code 00 (empty / susceptible)
    for i in range(len(mask_bits)):
        b.gate(((board_bits[2 * i], False), (board_bits[2 * i + 1], False)),
               (mask_bits[i],))


def _emit_sway_transition(m: int):
    nbrs = neighbors(m)
    kw = max(len(a) for a in nbrs).bit_length()
    d = SWAY_DICE_BITS

    def emit(b: Builder, mid, nxt, dice, pool, scr):
        k_reg = pool[:kw]
        sum_reg = pool[kw:kw + d]
        flag = pool[kw + d]
        for i, adj in enumerate(nbrs):
            b.cx(mid[2 * i], nxt[2 * i])
            b.cx(mid[2 * i + 1], nxt[2 * i + 1])
            b.begin_segment()
            for j in adj:
                controlled_increment(b, k_reg,
                                     [(mid[2 * i], True), (mid[2 * j], True)],
                                     scr)
                controlled_increment(
                    b, k_reg,
                    [(mid[2 * i + 1], True), (mid[2 * j + 1], True)], scr)
            copy_register(b, dice[d * i:d * (i + 1)], sum_reg)
            add_register(b, sum_reg, k_reg, scr)
            flag_less_than_const(b, sum_reg, 4, flag)
            seg = b.end_segment()
            b.gate(((flag, True), (mid[2 * i], True)),
                   (nxt[2 * i], nxt[2 * i + 1]))
            b.gate(((flag, True), (mid[2 * i + 1], True)),
                   (nxt[2 * i], nxt[2 * i + 1]))
            b.emit_inverse(seg)

    return emit, kw + d + 1


def _emit_sway_eval(n: int):
    wc = width_for(n)

    def emit(b: Builder, cfg, payoff, pool, scr):
        black = pool[:wc]
        white = pool[wc:2 * wc]
        diff = pool[2 * wc:3 * wc + 1]
        b.begin_segment()
        for i in range(n):
            controlled_increment(b, black, [(cfg[2 * i], True)], scr)
            controlled_increment(b, white, [(cfg[2 * i + 1], True)], scr)
        copy_register(b, black, diff)
        sub_register(b, diff, white, scr)
        emit_reversed(b, controlled_increment, diff, [], scr)  # diff -= 1
        seg = b.end_segment()
        b.gate(((diff[wc], False),), (payoff,))   # black - white - 1 >= 0
        b.emit_inverse(seg)

    return emit, 3 * wc + 1


def _emit_sir_transition(m: int, rho: int):
    nbrs = neighbors(m)
    max_deg = max(len(a) for a in nbrs)
    cw = max_deg.bit_length() if max_deg else 0
    d = SIR_DICE_BITS
    tw = d + 1

    def emit(b: Builder, mid, nxt, dice, pool, scr):
        c_reg = pool[:cw]
        t_reg = pool[cw:cw + tw]
        rflag = pool[cw + tw]
        for i, adj in enumerate(nbrs):
            b.cx(mid[2 * i], nxt[2 * i])
            b.cx(mid[2 * i + 1], nxt[2 * i + 1])
            die = dice[d * i:d * (i + 1)]
            if adj:
                b.begin_segment()
                for j in adj:
                    controlled_increment(b, c_reg, [(mid[2 * j], True)], scr)
                copy_register(b, die, t_reg)
                sub_register(b, t_reg, c_reg, scr)   # sign <=> die < c
                seg = b.end_segment()
                b.gate(((t_reg[tw - 1], True), (mid[2 * i], False),
                        (mid[2 * i + 1], False)), (nxt[2 * i],))
                b.emit_inverse(seg)
            b.begin_segment()
            flag_less_than_const(b, die, rho, rflag)
            seg = b.end_segment()
            b.gate(((rflag, True), (mid[2 * i], True)),
                   (nxt[2 * i], nxt[2 * i + 1]))
            b.emit_inverse(seg)

    return emit, cw + tw + 1


def _emit_sir_eval(n: int, threshold: int):
    wc = width_for(n)

    def emit(b: Builder, cfg, payoff, pool, scr):
        cnt = pool[:wc]
        b.begin_segment()
        for i in range(n):
            controlled_increment(b, cnt, [(cfg[2 * i], True)], scr)
        seg = b.end_segment()
        flag_less_than_const(b, cnt, threshold + 1, payoff)
        b.emit_inverse(seg)

    return emit, wc


# ---------------------------------------------------------------------------
# RolloutSpec factories

def sway_spec(cfg: SwayConfig) -> RolloutSpec:
    n = cfg.m * cfg.m
    nbrs = neighbors(cfg.m)
    wc = width_for(n)
    emit_trans, trans_pool = _emit_sway_transition(cfg.m)
    emit_eval, eval_pool = _emit_sway_eval(n)

    def place(board, pos, pass_index):
        return set_cell(board, pos, BLACK if pass_index == 0 else WHITE)

    return RolloutSpec(
        name="sway", n_cells=n, horizon=cfg.horizon, s=2,
        d=SWAY_DICE_BITS, faces=SWAY_FACES, selectors_per_round=2,
        emit_validity=_emit_validity,
        emit_transition=emit_trans,
        emit_eval=emit_eval,
        placement_bit=lambda pass_index: pass_index,   # 0 -> black, 1 -> white
        trans_pool_width=trans_pool,
        eval_pool_width=eval_pool,
        domain_scr_width=max(SWAY_DICE_BITS - 1, wc),
        classical_validity=lambda board: empty_mask(board, n),
        classical_place=place,
        classical_transition=lambda board, dice: _sway_transition(
            board, dice, nbrs),
        classical_eval=lambda board: _sway_eval(board, n),
        payoff_params={"m": cfg.m},
    )


def sir_spec(cfg: SirConfig) -> RolloutSpec:
    n = cfg.m * cfg.m
    nbrs = neighbors(cfg.m)
    wc = width_for(n)
    emit_trans, trans_pool = _emit_sir_transition(cfg.m, cfg.rho)
    emit_eval, eval_pool = _emit_sir_eval(n, cfg.threshold)

    def place(board, pos, pass_index):
        return set_cell(board, pos, RECOVERED)    # vaccination: S -> R

    return RolloutSpec(
        name="sir", n_cells=n, horizon=cfg.horizon, s=2,
        d=SIR_DICE_BITS, faces=SIR_FACES, selectors_per_round=1,
        emit_validity=_emit_validity,
        emit_transition=emit_trans,
        emit_eval=emit_eval,
        placement_bit=lambda pass_index: 1,            # flip the removed bit
        trans_pool_width=trans_pool,
        eval_pool_width=eval_pool,
        domain_scr_width=max(SIR_DICE_BITS, wc - 1),
        classical_validity=lambda board: empty_mask(board, n),
        classical_place=place,
        classical_transition=lambda board, dice: _sir_transition(
            board, dice, nbrs, cfg.rho),
        classical_eval=lambda board: (
            1 if count_code(board, n, INFECTED) <= cfg.threshold else 0),
        payoff_params={"m": cfg.m, "threshold": cfg.threshold, "rho": cfg.rho},
    )


# ---------------------------------------------------------------------------
# classical rollouts

def classical_trace(spec: RolloutSpec, board0: int, selectors, dice,
                    first_move: int | None = None):
    """Replay a branch; returns ([board after round 0..H], payoff bit)."""
    n = spec.n_cells
    if len(selectors) != spec.horizon or len(dice) != spec.horizon:
        raise OracleError("stream length does not match horizon")
    boards = [board0]
    board = board0
    for h in range(spec.horizon):
        if len(selectors[h]) != spec.selectors_per_round:
            raise OracleError("selector stream width mismatch")
        for pj in range(spec.selectors_per_round):
            if h == 0 and pj == 0 and first_move is not None:
                board = spec.classical_place(board, first_move, 0)
                continue
            j = select_semantics(spec.classical_validity(board), n,
                                 selectors[h][pj])
            if j < n:
                board = spec.classical_place(board, j, pj)
        board = spec.classical_transition(board, dice[h])
        boards.append(board)
    return boards, spec.classical_eval(board)


def classical_rollout(spec: RolloutSpec, board0: int, selectors, dice,
                      first_move: int | None = None):
    """Final configuration and payoff for fixed selector/dice streams."""
    boards, payoff = classical_trace(spec, board0, selectors, dice,
                                     first_move=first_move)
    return boards[-1], payoff


def sample_payoff(spec: RolloutSpec, board0: int, shots: int, seed: int,
                  first_move: int | None = None):
    """Seeded Monte Carlo payoff estimate with a 95% CI (classical sampler)."""
    from .oracle import draw_streams
    rng = random.Random(seed)
    wins = 0
    for _ in range(shots):
        selectors, dice = draw_streams(spec, rng)
        _, pay = classical_rollout(spec, board0, selectors, dice,
                                   first_move=first_move)
        wins += pay
    p = wins / shots
    half = 1.96 * sqrt(p * (1 - p) / shots)
    return p, half


# ---------------------------------------------------------------------------
# exact value by distribution dynamic programming

class _KernelCache:
    """Per-spec memo of the per-cell-independent transition expansion."""

    def __init__(self, spec: RolloutSpec):
        self.spec = spec
        self.memo: dict[int, tuple] = {}
        m = spec.payoff_params["m"]
        self.nbrs = neighbors(m)

    def expand(self, board: int):
        hit = self.memo.get(board)
        if hit is not None:
            return hit
        outcomes = [(0, 1.0)]
        for i, adj in enumerate(self.nbrs):
            branches = self._cell_branches(board, i, adj)
            if len(branches) == 1 and branches[0][1] == 1.0:
                code = branches[0][0]
                outcomes = [(acc | (code << (2 * i)), pr)
                            for acc, pr in outcomes]
            else:
                outcomes = [(acc | (code << (2 * i)), pr * cp)
                            for acc, pr in outcomes
                            for code, cp in branches]
        result = tuple(outcomes)
        self.memo[board] = result
        return result

    def _cell_branches(self, board: int, i: int, adj):
        spec = self.spec
        code = cell(board, i)
        if spec.name == "sway":
            if code == EMPTY:
                return ((EMPTY, 1.0),)
            k = sum(1 for j in adj if cell(board, j) == code)
            pf = (4 - k) / SWAY_FACES
            if pf == 0.0:
                return ((code, 1.0),)
            other = BLACK if code == WHITE else WHITE
            return ((code, 1.0 - pf), (other, pf))
        if code == SUSCEPTIBLE:
            c = sum(1 for j in adj if cell(board, j) == INFECTED)
            if c == 0:
                return ((SUSCEPTIBLE, 1.0),)
            pi = c / SIR_FACES
            return ((SUSCEPTIBLE, 1.0 - pi), (INFECTED, pi))
        if code == INFECTED:
            rho = spec.payoff_params["rho"]
            if rho == 0:
                return ((INFECTED, 1.0),)
            pr = rho / SIR_FACES
            return ((INFECTED, 1.0 - pr), (RECOVERED, pr))
        return ((RECOVERED, 1.0),)


def _mix_pass(spec: RolloutSpec, dist: dict, pass_index: int) -> dict:
    n, w = spec.n_cells, spec.w
    inv = 1.0 / (1 << w)
    out: dict[int, float] = defaultdict(float)
    for board, pr in dist.items():
        mask = spec.classical_validity(board)
        positions = [i for i in range(n) if (mask >> i) & 1]
        sentinel = ((1 << w) - len(positions)) * inv
        if sentinel:
            out[board] += pr * sentinel
        for j in positions:
            out[spec.classical_place(board, j, pass_index)] += pr * inv
    return dict(out)


def exact_value(spec: RolloutSpec, board0: int, first_move: int | None = None,
                budget: int = DP_STATE_BUDGET,
                _cache: _KernelCache | None = None) -> float:
    """Exact payoff probability by full distribution dynamic programming.

    Selectors mix uniformly over all 2^w values (out-of-range mass on the
    sentinel no-op); the transition kernel factorizes over cells.  Requires
    3^N within the state budget (m <= 3 by default).
    """
    if 3 ** spec.n_cells > budget:
        raise BudgetError(
            f"state space 3^{spec.n_cells} exceeds budget {budget}")
    cache = _cache if _cache is not None else _KernelCache(spec)
    dist = {board0: 1.0}
    for h in range(spec.horizon):
        for pj in range(spec.selectors_per_round):
            if h == 0 and pj == 0 and first_move is not None:
                dist = {spec.classical_place(b, first_move, 0): p
                        for b, p in dist.items()}
            else:
                dist = _mix_pass(spec, dist, pj)
        nxt: dict[int, float] = defaultdict(float)
        for board, pr in dist.items():
            for nb, p in cache.expand(board):
                nxt[nb] += pr * p
        dist = dict(nxt)
    return sum(pr for b, pr in dist.items() if spec.classical_eval(b) == 1)


def default_first_moves(spec: RolloutSpec, board0: int, k: int) -> list[int]:
    """firstMove decoder: the first k valid positions of the initial board."""
    mask = spec.classical_validity(board0)
    positions = [i for i in range(spec.n_cells) if (mask >> i) & 1]
    if len(positions) < k:
        raise OracleError(f"initial board has only {len(positions)} valid cells")
    return positions[:k]


def arm_means(spec: RolloutSpec, board0: int, k: int,
              first_moves=None, budget: int = DP_STATE_BUDGET) -> list[float]:
    """mu_j = exact payoff probability given first move j (deterministic
    round-1 placement that bypasses the round-1 selector)."""
    if first_moves is None:
        first_moves = default_first_moves(spec, board0, k)
    cache = _KernelCache(spec)
    return [exact_value(spec, board0, first_move=fm, budget=budget,
                        _cache=cache) for fm in first_moves[:k]]
