"""Maker and Breaker move generators plus the abstract box game.

Bipartite vertex ids: ``k`` is ``a_k`` (out-star of ``k``), ``n + k`` is
``b_k`` (in-star of ``k``).
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .game_core import DirectedEdge, EdgeOwner, GameError, GameState


class NoUnclaimedIncidentEdge(GameError):
    """Maker's chosen vertex has no free incident edge: the degree guarantee broke."""


class StrategyKind(Enum):
    MAKER_DEGREE = "MakerDegree"
    MAKER_CONNECTIVITY = "MakerConnectivity"
    BREAKER_BOX = "BreakerBox"
    BREAKER_RANDOM = "BreakerRandom"
    BREAKER_MAX_DEGREE = "BreakerMaxDegree"

    @classmethod
    def parse(cls, name: str) -> "StrategyKind":
        key = name.replace("_", "").replace("-", "").lower()
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise ValueError(f"unknown strategy {name!r}; choose from {[k.value for k in cls]}")


# -- danger ---------------------------------------------------------------------

def danger(state: GameState, v: int) -> int:
    """``d_B(v) - 2 b d_M(v)`` for bipartite vertex ``v``."""
    n = state.n
    if v < n:
        return state.dB_out[v] - 2 * state.b * state.dM_out[v]
    return state.dB_in[v - n] - 2 * state.b * state.dM_in[v - n]


class DangerTable:
    """Incrementally maintained dangers with a lazy max-heap over eligible vertices.

    A vertex stays eligible while its Maker bipartite degree is below ``K``.
    Stale heap entries are discarded when they surface.
    """

    def __init__(self, state: GameState, K: int):
        self.state = state
        self.K = K
        n = state.n
        self.values = [danger(state, v) for v in range(2 * n)]
        self.heap = [(-d, v) for v, d in enumerate(self.values)]
        heapq.heapify(self.heap)
        self.unfinished = sum(1 for v in range(2 * n) if self._dm(v) < K)
        # Breaker degree of each vertex at the moment it left the pool
        self.breaker_degree_at_finish: dict[int, int] = {}
        self.max_increase_on_maker_move = 0
        self.last_candidates = 2 * n
        state.watchers.append(self)

    def _dm(self, v: int) -> int:
        n = self.state.n
        return self.state.dM_out[v] if v < n else self.state.dM_in[v - n]

    def _db(self, v: int) -> int:
        n = self.state.n
        return self.state.dB_out[v] if v < n else self.state.dB_in[v - n]

    def on_claim(self, player: EdgeOwner, i: int, j: int) -> None:
        n = self.state.n
        two_b = 2 * self.state.b
        vals = self.values
        for v in (i, n + j):
            old = vals[v]
            if player == EdgeOwner.MAKER:
                new = old - two_b
                if self._dm(v) == self.K:
                    self.unfinished -= 1
                    self.breaker_degree_at_finish[v] = self._db(v)
            else:
                new = old + 1
            vals[v] = new
            heapq.heappush(self.heap, (-new, v))
            if player == EdgeOwner.MAKER and new > old:
                self.max_increase_on_maker_move = max(self.max_increase_on_maker_move, new - old)

    def argmax(self) -> int | None:
        """Eligible vertex of maximum danger, lowest id on ties; ``None`` when all are done."""
        heap = self.heap
        vals = self.values
        K = self.K
        while heap:
            negd, v = heap[0]
            if -negd != vals[v] or self._dm(v) >= K:
                heapq.heappop(heap)
                continue
            return v
        return None

    def recompute(self) -> list[int]:
        return [danger(self.state, v) for v in range(2 * self.state.n)]

    def max_breaker_degree_unfinished(self) -> int:
        """Largest Breaker degree any vertex carried while still below ``K``."""
        best = max(self.breaker_degree_at_finish.values(), default=0)
        for v in range(2 * self.state.n):
            if self._dm(v) < self.K:
                best = max(best, self._db(v))
        return best


def maker_degree_move(state: GameState, rng: random.Random, table: DangerTable) -> DirectedEdge:
    """Ease the most dangerous unfinished vertex with a uniformly random free incident edge."""
    v = table.argmax()
    if v is None:
        raise GameError("degree phase already complete")
    n = state.n
    own = state.owner
    if v < n:
        free = n - 1 - state.dM_out[v] - state.dB_out[v]
        table.last_candidates = free
        if free <= 0:
            raise NoUnclaimedIncidentEdge(f"a_{v} has no unclaimed out-edge")
        base = v * n
        for _ in range(8 * n):
            w = rng.randrange(n)
            if w != v and not own[base + w]:
                return DirectedEdge(v, w)
        cands = [w for w in range(n) if w != v and not own[base + w]]
        return DirectedEdge(v, rng.choice(cands))
    k = v - n
    free = n - 1 - state.dM_in[k] - state.dB_in[k]
    table.last_candidates = free
    if free <= 0:
        raise NoUnclaimedIncidentEdge(f"b_{k} has no unclaimed in-edge")
    for _ in range(8 * n):
        w = rng.randrange(n)
        if w != k and not own[w * n + k]:
            return DirectedEdge(w, k)
    cands = [w for w in range(n) if w != k and not own[w * n + k]]
    return DirectedEdge(rng.choice(cands), k)


# -- Breaker ----------------------------------------------------------------------

def _random_free_in_star(state: GameState, rng: random.Random, v: int, k: int) -> list[DirectedEdge]:
    """Up to ``k`` distinct random unclaimed edges incident to bipartite vertex ``v``."""
    n = state.n
    own = state.owner
    if v < n:
        cands = [w for w in range(n) if w != v and not own[v * n + w]]
        pick = rng.sample(cands, min(k, len(cands)))
        return [DirectedEdge(v, w) for w in pick]
    c = v - n
    cands = [w for w in range(n) if w != c and not own[w * n + c]]
    pick = rng.sample(cands, min(k, len(cands)))
    return [DirectedEdge(w, c) for w in pick]


def alive_boxes(state: GameState) -> list[tuple[int, int]]:
    """``(vertex, unclaimed elements)`` for out-stars Maker has not touched and Breaker has not filled."""
    n = state.n
    return [
        (i, n - 1 - state.dB_out[i])
        for i in range(n)
        if state.dM_out[i] == 0 and state.dB_out[i] < n - 1
    ]


def breaker_box_move(state: GameState, rng: random.Random) -> list[DirectedEdge]:
    """Fill the alive out-star with the fewest unclaimed edges; random play once none is alive."""
    b = min(state.b, state.unclaimed_count)
    boxes = sorted(alive_boxes(state), key=lambda t: (t[1], t[0]))
    out: list[DirectedEdge] = []
    for v, free in boxes:
        if len(out) == b:
            break
        out.extend(_random_free_in_star(state, rng, v, b - len(out)))
    if len(out) < b:
        taken = {e[0] * state.n + e[1] for e in out}
        while len(out) < b:
            more = state.random_unclaimed(rng, b - len(out) + len(taken))
            for e in more:
                key = e[0] * state.n + e[1]
                if key not in taken and len(out) < b:
                    taken.add(key)
                    out.append(e)
    return out


def breaker_random_move(state: GameState, rng: random.Random) -> list[DirectedEdge]:
    return state.random_unclaimed(rng, state.b)


def breaker_maxdegree_move(state: GameState, rng: random.Random) -> list[DirectedEdge]:
    """Claim edges at the bipartite vertex of largest Maker degree (lowest id on ties)."""
    n = state.n
    b = min(state.b, state.unclaimed_count)
    dm = np.array(state.dM_out + state.dM_in)
    full = np.array(
        [n - 1 - state.dM_out[k] - state.dB_out[k] for k in range(n)]
        + [n - 1 - state.dM_in[k] - state.dB_in[k] for k in range(n)]
    ) <= 0
    order = np.lexsort((np.arange(2 * n), -dm))
    out: list[DirectedEdge] = []
    taken: set[DirectedEdge] = set()
    for v in order:
        if len(out) == b:
            break
        if full[v]:
            continue
        for e in _random_free_in_star(state, rng, int(v), b):
            if e not in taken and len(out) < b:
                taken.add(e)
                out.append(e)
    return out


BreakerMove = Callable[[GameState, random.Random], list[DirectedEdge]]

BREAKERS: dict[StrategyKind, BreakerMove] = {
    StrategyKind.BREAKER_BOX: breaker_box_move,
    StrategyKind.BREAKER_RANDOM: breaker_random_move,
    StrategyKind.BREAKER_MAX_DEGREE: breaker_maxdegree_move,
}


def breaker_turn(state: GameState, rng: random.Random, move: BreakerMove) -> list[DirectedEdge]:
    edges = move(state, rng)
    state.claim_many(EdgeOwner.BREAKER, edges)
    state.pass_breaker_turn()
    return edges


# -- degree phase -------------------------------------------------------------------

@dataclass
class DegreePhaseResult:
    rounds: int
    completed: bool
    min_maker_degree: int
    max_breaker_degree_unfinished: int
    max_breaker_degree: int
    min_candidates: int
    danger_increase_on_maker_move: int
    error: str | None = None


def play_degree_phase(
    state: GameState,
    rng: random.Random,
    breaker: BreakerMove,
    K: int,
    max_rounds: int | None = None,
) -> tuple[DegreePhaseResult, DangerTable]:
    """Alternate Maker's degree strategy with ``breaker`` until Maker's bipartite min degree is ``K``."""
    table = DangerTable(state, K)
    if max_rounds is None:
        max_rounds = 2 * K * state.n
    min_cands = state.n
    error = None
    rounds = 0
    while table.unfinished > 0 and rounds < max_rounds:
        if state.is_exhausted():
            error = "board exhausted"
            break
        try:
            edge = maker_degree_move(state, rng, table)
        except NoUnclaimedIncidentEdge as exc:
            error = f"NoUnclaimedIncidentEdge: {exc}"
            break
        min_cands = min(min_cands, table.last_candidates)
        state.claim(EdgeOwner.MAKER, edge)
        rounds += 1
        if table.unfinished == 0 or state.is_exhausted():
            break
        breaker_turn(state, rng, breaker)
    state.watchers.remove(table)
    degs = state.dM_out + state.dM_in
    bdegs = state.dB_out + state.dB_in
    result = DegreePhaseResult(
        rounds=rounds,
        completed=table.unfinished == 0,
        min_maker_degree=min(degs),
        max_breaker_degree_unfinished=table.max_breaker_degree_unfinished(),
        max_breaker_degree=max(bdegs),
        min_candidates=min_cands,
        danger_increase_on_maker_move=table.max_increase_on_maker_move,
        error=error,
    )
    return result, table


# -- abstract box game ----------------------------------------------------------------

@dataclass
class BoxGameState:
    """Breaker's load in each box; a box leaves play once the opponent removes it."""

    box_size: int
    loads: np.ndarray
    alive: np.ndarray
    rounds: int = 0

    @classmethod
    def fresh(cls, n_boxes: int, box_size: int) -> "BoxGameState":
        return cls(box_size, np.zeros(n_boxes, dtype=np.int64), np.ones(n_boxes, dtype=bool))


@dataclass
class BoxGameResult:
    winner: str
    rounds: int
    final_loads: list[int] = field(default_factory=list)


def water_fill(loads: np.ndarray, alive: np.ndarray, units: int) -> np.ndarray:
    """Increment vector that places ``units`` one at a time on the least-loaded alive box (lowest id on ties)."""
    inc = np.zeros_like(loads)
    idx = np.flatnonzero(alive)
    if units <= 0 or idx.size == 0:
        return inc
    lv = loads[idx]
    order = np.lexsort((idx, lv))
    s = lv[order]
    prefix = np.cumsum(s)
    ks = np.arange(1, s.size + 1)
    cost = ks * s - prefix
    k = int(np.searchsorted(cost, units, side="right"))
    total = units + int(prefix[k - 1])
    level, extra = divmod(total, k)
    chosen = idx[order[:k]]
    inc[chosen] = level - loads[chosen]
    inc[np.sort(chosen)[:extra]] += 1
    return inc


def balanced_breaker(st: BoxGameState, b: int) -> np.ndarray:
    """Finish a box if one is within reach, otherwise spread evenly over alive boxes."""
    remaining = np.where(st.alive, st.box_size - st.loads, np.iinfo(np.int64).max)
    i = int(np.argmin(remaining))
    if st.alive[i] and remaining[i] <= b:
        inc = np.zeros_like(st.loads)
        inc[i] = remaining[i]
        return inc
    return water_fill(st.loads, st.alive, b)


def concentrating_breaker(st: BoxGameState, b: int) -> np.ndarray:
    """Fill the alive box with the fewest remaining elements first, as in ``breaker_box_move``."""
    inc = np.zeros_like(st.loads)
    left = b
    idx = np.flatnonzero(st.alive)
    for i in idx[np.lexsort((idx, st.box_size - st.loads[idx]))]:
        take = min(left, st.box_size - int(st.loads[i]))
        inc[i] = take
        left -= take
        if left == 0:
            break
    return inc


def most_attacked_opponent(st: BoxGameState) -> int:
    masked = np.where(st.alive, st.loads, -1)
    return int(np.argmax(masked))


BOX_BREAKER_POLICIES = {"balanced": balanced_breaker, "concentrate": concentrating_breaker}
BOX_OPPONENT_POLICIES = {"most_attacked": most_attacked_opponent}


def box_game_play(
    n_boxes: int,
    box_size: int,
    b: int,
    maker_policy: Callable[[BoxGameState], int] | None = None,
    breaker_policy: Callable[[BoxGameState, int], np.ndarray] | None = None,
    breaker_first: bool = True,
) -> BoxGameResult:
    """Play the box game to the end.

    Breaker adds ``b`` elements per turn, the opponent (the digraph's Maker)
    removes one surviving box per turn. Breaker wins by filling a box.
    """
    if min(n_boxes, box_size, b) < 1:
        raise ValueError("n_boxes, box_size and b must all be positive")
    maker_policy = maker_policy or most_attacked_opponent
    breaker_policy = breaker_policy or balanced_breaker
    st = BoxGameState.fresh(n_boxes, box_size)
    breaker_to_move = breaker_first
    while st.alive.any():
        if breaker_to_move:
            st.rounds += 1
            inc = breaker_policy(st, b)
            if inc.sum() > b or np.any(inc[~st.alive] != 0) or np.any(inc < 0):
                raise GameError("box game Breaker policy made an illegal allocation")
            st.loads += inc
            if np.any(st.loads[st.alive] >= box_size):
                return BoxGameResult("Breaker", st.rounds, st.loads.tolist())
        else:
            i = maker_policy(st)
            if not st.alive[i]:
                raise GameError("box game opponent removed a dead box")
            st.alive[i] = False
        breaker_to_move = not breaker_to_move
    return BoxGameResult("Maker", st.rounds, st.loads.tolist())
