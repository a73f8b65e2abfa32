"""Biased Maker-Breaker game on the complete digraph.

The board is every ordered pair ``(i, j)`` with ``i != j`` on ``n`` vertices.
Maker claims one edge per turn and moves first; Breaker then claims ``b``
edges. Ownership lives in a flat ``bytearray`` indexed by ``i * n + j`` (the
diagonal is never touched), so claims and lookups are O(1) and numpy can view
the board without copying.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, NamedTuple

import numpy as np


class GameError(Exception):
    """Base class for rule violations."""


class AlreadyClaimed(GameError):
    pass


class OutOfTurn(GameError):
    pass


class LoopEdge(GameError):
    pass


class EdgeOwner(IntEnum):
    UNCLAIMED = 0
    MAKER = 1
    BREAKER = 2


class DirectedEdge(NamedTuple):
    src: int
    dst: int


@dataclass(frozen=True)
class GameConfig:
    n: int
    b: int
    alpha: float = 0.5
    beta: float = 0.1
    theta: float = 2.0
    K: int = 1
    epsilon: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")
        if self.b < 1:
            raise ValueError(f"b must be at least 1, got {self.b}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.K < 1:
            raise ValueError(f"K must be positive, got {self.K}")

    def degree_hypotheses(self) -> list[str]:
        """Return the degree-guarantee hypotheses this config fails (empty if all hold)."""
        failed = []
        if self.K < 2 / self.alpha:
            failed.append(f"K={self.K} < 2/alpha={2 / self.alpha:.3f}")
        if not self.theta * self.beta < self.alpha:
            failed.append("theta*beta >= alpha")
        if not self.theta < (self.alpha - self.beta) / self.beta:
            failed.append("theta >= (alpha-beta)/beta")
        return failed


@dataclass
class RoundRecord:
    index: int
    maker_edge: DirectedEdge | None = None
    breaker_edges: list[DirectedEdge] = field(default_factory=list)


class GameState:
    """Mutable position of one game, owned by a single worker.

    ``round`` counts Maker turns taken so far. ``watchers`` receive
    ``on_claim(player, i, j)`` after every claim; the danger table of the
    degree strategy hooks in this way.
    """

    def __init__(self, config: GameConfig, record_history: bool = True):
        config.validate()
        n = config.n
        self.config = config
        self.n = n
        self.b = config.b
        self.owner = bytearray(n * n)
        self.dM_out = [0] * n
        self.dM_in = [0] * n
        self.dB_out = [0] * n
        self.dB_in = [0] * n
        # Maker's neighbours in acquisition order
        self.maker_out: list[list[int]] = [[] for _ in range(n)]
        self.maker_in: list[list[int]] = [[] for _ in range(n)]
        self.n_maker = 0
        self.n_breaker = 0
        self.round = 0
        self.to_move = EdgeOwner.MAKER
        self.breaker_claimed_this_turn = 0
        self.record_history = record_history
        self.history: list[tuple[EdgeOwner, DirectedEdge]] = []
        self.watchers: list = []
        self.total_edges = n * (n - 1)

    # -- rules ---------------------------------------------------------------

    @property
    def unclaimed_count(self) -> int:
        return self.total_edges - self.n_maker - self.n_breaker

    def is_exhausted(self) -> bool:
        return self.unclaimed_count == 0

    def owner_of(self, i: int, j: int) -> EdgeOwner:
        return EdgeOwner(self.owner[i * self.n + j])

    def claim(self, player: EdgeOwner, edge: tuple[int, int]) -> None:
        i, j = edge
        n = self.n
        if i == j:
            raise LoopEdge(f"({i}, {j}) is a loop")
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"edge ({i}, {j}) outside [0, {n})")
        if player != self.to_move:
            raise OutOfTurn(f"{player.name} moved during {self.to_move.name}'s turn")
        if player == EdgeOwner.BREAKER and self.breaker_claimed_this_turn >= self.b:
            raise OutOfTurn(f"Breaker already claimed b={self.b} edges this turn")
        idx = i * n + j
        if self.owner[idx]:
            raise AlreadyClaimed(f"({i}, {j}) owned by {EdgeOwner(self.owner[idx]).name}")
        self.owner[idx] = player
        if player == EdgeOwner.MAKER:
            self.dM_out[i] += 1
            self.dM_in[j] += 1
            self.maker_out[i].append(j)
            self.maker_in[j].append(i)
            self.n_maker += 1
            self.round += 1
            self.to_move = EdgeOwner.BREAKER
            self.breaker_claimed_this_turn = 0
            if self.unclaimed_count == 0:
                self.to_move = EdgeOwner.MAKER
        else:
            self.dB_out[i] += 1
            self.dB_in[j] += 1
            self.n_breaker += 1
            self.breaker_claimed_this_turn += 1
            if self.breaker_claimed_this_turn == self.b or self.unclaimed_count == 0:
                self.to_move = EdgeOwner.MAKER
        if self.record_history:
            self.history.append((player, DirectedEdge(i, j)))
        for w in self.watchers:
            w.on_claim(player, i, j)

    def claim_many(self, player: EdgeOwner, edges: Iterable[tuple[int, int]]) -> None:
        for e in edges:
            self.claim(player, e)

    def pass_breaker_turn(self) -> None:
        """End Breaker's turn early; legal only when the board has run out."""
        if self.to_move == EdgeOwner.BREAKER and self.unclaimed_count == 0:
            self.to_move = EdgeOwner.MAKER

    # -- queries -------------------------------------------------------------

    def board(self) -> np.ndarray:
        """Zero-copy ``(n, n)`` uint8 view of ownership codes."""
        return np.frombuffer(self.owner, dtype=np.uint8).reshape(self.n, self.n)

    def unclaimed_out(self, v: int) -> set[int]:
        row = self.owner[v * self.n:(v + 1) * self.n]
        return {w for w, o in enumerate(row) if not o and w != v}

    def unclaimed_in(self, v: int) -> set[int]:
        n = self.n
        own = self.owner
        return {w for w in range(n) if w != v and not own[w * n + v]}

    def edges_of(self, player: EdgeOwner) -> list[DirectedEdge]:
        idx = np.flatnonzero(np.frombuffer(self.owner, dtype=np.uint8) == player)
        return [DirectedEdge(int(k) // self.n, int(k) % self.n) for k in idx]

    def maker_adjacency(self) -> list[list[int]]:
        """Out-neighbour lists of Maker's digraph in acquisition order."""
        return [list(a) for a in self.maker_out]

    def random_unclaimed(self, rng: random.Random, k: int) -> list[DirectedEdge]:
        """Up to ``k`` distinct uniformly random unclaimed edges."""
        k = min(k, self.unclaimed_count)
        n = self.n
        own = self.owner
        seen: set[int] = set()
        out: list[int] = []
        if self.unclaimed_count > self.total_edges // 8:
            nn = n * n
            while len(out) < k:
                idx = rng.randrange(nn)
                if not own[idx] and idx // n != idx % n and idx not in seen:
                    seen.add(idx)
                    out.append(idx)
        else:
            board = np.frombuffer(own, dtype=np.uint8)
            free = np.flatnonzero(board == 0)
            free = free[free // n != free % n]
            out = [int(free[t]) for t in rng.sample(range(len(free)), k)]
        return [DirectedEdge(idx // n, idx % n) for idx in out]

    def check_consistency(self) -> list[str]:
        """Recompute every cached tally from the owner map; return mismatches."""
        errors = []
        board = self.board()
        for player, (d_out, d_in) in (
            (EdgeOwner.MAKER, (self.dM_out, self.dM_in)),
            (EdgeOwner.BREAKER, (self.dB_out, self.dB_in)),
        ):
            mask = board == player
            if np.any(np.diag(mask)):
                errors.append("diagonal claimed")
            if list(mask.sum(axis=1)) != d_out:
                errors.append(f"{player.name} out-degree mismatch")
            if list(mask.sum(axis=0)) != d_in:
                errors.append(f"{player.name} in-degree mismatch")
        if int((board == EdgeOwner.MAKER).sum()) != self.n_maker:
            errors.append("maker edge count mismatch")
        if int((board == EdgeOwner.BREAKER).sum()) != self.n_breaker:
            errors.append("breaker edge count mismatch")
        return errors


def new_game(config: GameConfig, record_history: bool = True) -> GameState:
    return GameState(config, record_history=record_history)


def claim(state: GameState, player: EdgeOwner, edge: tuple[int, int]) -> GameState:
    state.claim(player, edge)
    return state


def unclaimed_out_edges(state: GameState, v: int) -> set[int]:
    return state.unclaimed_out(v)


def unclaimed_in_edges(state: GameState, v: int) -> set[int]:
    return state.unclaimed_in(v)


def is_exhausted(state: GameState) -> bool:
    return state.is_exhausted()


@dataclass
class BipartiteView:
    """Claimed edges of the game viewed on ``A ∪ B``: ``(i, j)`` becomes ``{a_i, b_j}``.

    Vertex ``a_k`` has index ``k`` and ``b_k`` has index ``n + k``.
    """

    n: int
    maker_edges: list[tuple[int, int]]
    breaker_edges: list[tuple[int, int]]

    def degree(self, player: EdgeOwner, v: int) -> int:
        edges = self.maker_edges if player == EdgeOwner.MAKER else self.breaker_edges
        return sum(1 for a, b in edges if a == v or b == v)

    def degrees(self, player: EdgeOwner) -> list[int]:
        edges = self.maker_edges if player == EdgeOwner.MAKER else self.breaker_edges
        deg = [0] * (2 * self.n)
        for a, b in edges:
            deg[a] += 1
            deg[b] += 1
        return deg


def bipartite_view(state: GameState) -> BipartiteView:
    n = state.n
    return BipartiteView(
        n=n,
        maker_edges=[(i, n + j) for i, j in state.edges_of(EdgeOwner.MAKER)],
        breaker_edges=[(i, n + j) for i, j in state.edges_of(EdgeOwner.BREAKER)],
    )


def bipartite_degrees(state: GameState, player: EdgeOwner) -> list[int]:
    """Cached bipartite degrees: out-degrees for ``a_k`` then in-degrees for ``b_k``."""
    if player == EdgeOwner.MAKER:
        return state.dM_out + state.dM_in
    return state.dB_out + state.dB_in


# -- position dump -------------------------------------------------------------

def dump_position(state: GameState) -> str:
    """Serialize the claim history: header ``n b seed``, then ``M i j`` / ``B i j``."""
    if not state.record_history:
        raise ValueError("position dump needs a game recorded with history")
    lines = [f"{state.n} {state.b} {state.config.seed}"]
    for player, (i, j) in state.history:
        lines.append(f"{'M' if player == EdgeOwner.MAKER else 'B'} {i} {j}")
    return "\n".join(lines) + "\n"


def load_position(text: str, config: GameConfig | None = None) -> GameState:
    """Replay a dump. Breaker turns are closed as the move letters switch."""
    lines = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
    n, b, seed = (int(x) for x in lines[0])
    if config is None:
        config = GameConfig(n=n, b=b, seed=seed)
    state = new_game(config)
    for tag, i, j in lines[1:]:
        player = EdgeOwner.MAKER if tag == "M" else EdgeOwner.BREAKER
        if player == EdgeOwner.MAKER and state.to_move == EdgeOwner.BREAKER:
            # a short Breaker turn in a dump only happens at board exhaustion
            raise OutOfTurn("dump has Maker moving before Breaker's turn completed")
        state.claim(player, (int(i), int(j)))
    return state
