"""Strong components, the expansion property of Maker's digraph, and sink-to-source patching."""

from __future__ import annotations

import math
import random
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .game_core import DirectedEdge, EdgeOwner, GameError, GameState

Adjacency = Sequence[Sequence[int]]


class SizeTooLargeForExhaustive(ValueError):
    pass


class Stuck(GameError):
    """No unclaimed edge runs from any sink component to any source component."""


@dataclass
class Condensation:
    comp: list[int]
    members: list[list[int]]
    dag_edges: set[tuple[int, int]]
    sources: list[int]
    sinks: list[int]

    @property
    def n_components(self) -> int:
        return len(self.members)

    @property
    def strongly_connected(self) -> bool:
        return len(self.members) == 1


def strong_components(adj: Adjacency) -> list[int]:
    """Iterative Tarjan. Returns a component id per vertex, ids in reverse topological order."""
    n = len(adj)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    comp = [-1] * n
    stack: list[int] = []
    counter = 0
    n_comp = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            nbrs = adj[v]
            if pos < len(nbrs):
                work[-1] = (v, pos + 1)
                w = nbrs[pos]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
                continue
            work.pop()
            if work:
                u = work[-1][0]
                if low[v] < low[u]:
                    low[u] = low[v]
            if low[v] == index[v]:
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp[w] = n_comp
                    if w == v:
                        break
                n_comp += 1
    return comp


def condense(adj: Adjacency) -> Condensation:
    comp = strong_components(adj)
    k = max(comp) + 1 if comp else 0
    members: list[list[int]] = [[] for _ in range(k)]
    for v, c in enumerate(comp):
        members[c].append(v)
    dag: set[tuple[int, int]] = set()
    for v, nbrs in enumerate(adj):
        cv = comp[v]
        for w in nbrs:
            cw = comp[w]
            if cv != cw:
                dag.add((cv, cw))
    has_out = {a for a, _ in dag}
    has_in = {b for _, b in dag}
    return Condensation(
        comp=comp,
        members=members,
        dag_edges=dag,
        sources=[c for c in range(k) if c not in has_in],
        sinks=[c for c in range(k) if c not in has_out],
    )


def is_strongly_connected(adj: Adjacency) -> bool:
    return len(adj) <= 1 or condense(adj).strongly_connected


# -- expansion ----------------------------------------------------------------------

@dataclass
class ExpansionReport:
    n: int
    max_size: int
    mode: str
    violation: list[int] | None = None
    direction: str | None = None
    samples: int = 0
    sizes_checked: tuple[int, int] = (1, 0)

    @property
    def ok(self) -> bool:
        return self.violation is None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "max_size": self.max_size,
            "mode": self.mode,
            "violation": self.violation,
            "direction": self.direction,
            "samples": self.samples,
            "sizes_checked": list(self.sizes_checked),
        }


def expansion_threshold(n: int, alpha: float) -> int:
    return int(math.floor((1 - alpha) ** 2 * n + 1e-9))


def expansion_min_K(alpha: float) -> float:
    """Smallest degree for which the expansion degree bound holds."""
    return (2 - 2 * math.log(1 - alpha)) / alpha


def reverse_adjacency(adj: Adjacency) -> list[list[int]]:
    radj: list[list[int]] = [[] for _ in range(len(adj))]
    for v, nbrs in enumerate(adj):
        for w in nbrs:
            radj[w].append(v)
    return radj


def violation_direction(adj: Adjacency, S: Sequence[int], radj: Adjacency | None = None) -> str | None:
    """``"out"`` if no Maker edge leaves ``S``, ``"in"`` if none enters, else ``None``."""
    inside = set(S)
    if not any(w not in inside for v in S for w in adj[v]):
        return "out"
    if radj is None:
        radj = reverse_adjacency(adj)
    if not any(w not in inside for v in S for w in radj[v]):
        return "in"
    return None


def _bitmask_unions(masks: list[int], n: int) -> np.ndarray:
    """``u[S] = OR of masks[i] for i in S`` for every subset bitmask ``S``."""
    u = np.zeros(1 << n, dtype=np.int64)
    for i in range(n):
        half = 1 << i
        u[half:2 * half] = u[:half] | masks[i]
    return u


def expansion_check(
    adj: Adjacency,
    alpha: float,
    K: int | None = None,
    mode: str = "exhaustive",
    samples: int = 1000,
    rng: random.Random | None = None,
    max_size: int | None = None,
) -> ExpansionReport:
    """Search for ``S`` with ``1 <= |S| <= (1-alpha)^2 n`` that no Maker edge leaves or enters.

    Exhaustive mode decides the question completely (``n <= 22``) and reports a
    smallest violating set, lowest bitmask first. Sampled mode first tries the
    source and sink components of the condensation, then uniform subsets per
    size; it can only falsify.
    """
    n = len(adj)
    if K is not None and K < expansion_min_K(alpha):
        warnings.warn(
            f"K={K} below the expansion degree bound {expansion_min_K(alpha):.2f}",
            stacklevel=2,
        )
    top = expansion_threshold(n, alpha) if max_size is None else max_size
    top = min(top, n - 1)
    if mode == "exhaustive":
        if n > 22:
            raise SizeTooLargeForExhaustive(f"exhaustive expansion check needs n <= 22, got {n}")
        out_mask = [0] * n
        in_mask = [0] * n
        for v, nbrs in enumerate(adj):
            for w in nbrs:
                out_mask[v] |= 1 << w
                in_mask[w] |= 1 << v
        full = (1 << n) - 1
        subsets = np.arange(1 << n, dtype=np.int64)
        sizes = np.zeros(1 << n, dtype=np.int64)
        for i in range(n):
            sizes += (subsets >> i) & 1
        outside = full & ~subsets
        no_out = (_bitmask_unions(out_mask, n) & outside) == 0
        no_in = (_bitmask_unions(in_mask, n) & outside) == 0
        bad = (no_out | no_in) & (sizes >= 1) & (sizes <= top)
        report = ExpansionReport(n, top, "exhaustive", sizes_checked=(1, top))
        hits = np.flatnonzero(bad)
        if hits.size:
            best = int(hits[np.lexsort((hits, sizes[hits]))[0]])
            report.violation = [i for i in range(n) if best >> i & 1]
            report.direction = "out" if no_out[best] else "in"
        return report
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")
    rng = rng or random.Random(0)
    report = ExpansionReport(n, top, "sampled", samples=samples, sizes_checked=(1, top))
    cond = condense(adj)
    radj = reverse_adjacency(adj)
    for c in cond.sinks + cond.sources:
        S = cond.members[c]
        if 1 <= len(S) <= top:
            d = violation_direction(adj, S, radj)
            if d is not None:
                report.violation, report.direction = sorted(S), d
                return report
    if top < 1:
        return report
    for t in range(samples):
        size = 1 + t % top
        S = rng.sample(range(n), size)
        d = violation_direction(adj, S, radj)
        if d is not None:
            report.violation, report.direction = sorted(S), d
            return report
    return report


def enumerate_violations(adj: Adjacency, max_size: int) -> list[tuple[int, ...]]:
    """Every violating set up to ``max_size`` by plain subset enumeration (small ``n`` only)."""
    n = len(adj)
    found = []
    radj = reverse_adjacency(adj)
    for s in range(1, min(max_size, n - 1) + 1):
        for S in combinations(range(n), s):
            if violation_direction(adj, S, radj) is not None:
                found.append(S)
    return found


# -- patching endgame -----------------------------------------------------------------

def pick_patch_edge(state: GameState, rng: random.Random, cond: Condensation) -> DirectedEdge:
    """Random unclaimed edge from a largest sink to a largest source (next pair if that one is full)."""
    sinks = sorted(cond.sinks, key=lambda c: (-len(cond.members[c]), c))
    sources = sorted(cond.sources, key=lambda c: (-len(cond.members[c]), c))
    n = state.n
    board = state.board()
    for t in sinks:
        T = np.array(cond.members[t])
        for s in sources:
            if s == t:
                continue
            S = np.array(cond.members[s])
            free = np.argwhere(board[np.ix_(T, S)] == 0)
            if len(free):
                a, c = free[rng.randrange(len(free))]
                return DirectedEdge(int(T[a]), int(S[c]))
    raise Stuck(f"no unclaimed sink-to-source edge among {len(sinks)} sinks / {len(sources)} sources")


@dataclass
class PatchResult:
    moves: list[DirectedEdge] = field(default_factory=list)
    strongly_connected: bool = False
    stuck: bool = False


def maker_connectivity_endgame(
    state: GameState,
    rng: random.Random,
    breaker=None,
    max_moves: int | None = None,
) -> PatchResult:
    """Patch sinks to sources until Maker's digraph is strongly connected.

    Each Maker patch is followed by a Breaker turn from ``breaker`` (a move
    function); with ``breaker=None`` Breaker passes.
    """
    from .strategies import breaker_turn

    result = PatchResult()
    while True:
        cond = condense(state.maker_out)
        if cond.strongly_connected:
            result.strongly_connected = True
            return result
        if max_moves is not None and len(result.moves) >= max_moves:
            return result
        if state.to_move != EdgeOwner.MAKER or state.is_exhausted():
            result.stuck = state.is_exhausted()
            return result
        try:
            edge = pick_patch_edge(state, rng, cond)
        except Stuck:
            result.stuck = True
            return result
        state.claim(EdgeOwner.MAKER, edge)
        result.moves.append(edge)
        if breaker is not None and not state.is_exhausted():
            breaker_turn(state, rng, breaker)
        elif breaker is None:
            state.to_move = EdgeOwner.MAKER


# -- digraph text format ----------------------------------------------------------------

def dump_digraph(adj: Adjacency) -> str:
    lines = [str(len(adj))]
    for v, nbrs in enumerate(adj):
        lines.extend(f"{v} {w}" for w in nbrs)
    return "\n".join(lines) + "\n"


def load_digraph(text: str) -> list[list[int]]:
    rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
    n = int(rows[0][0])
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in rows[1:]:
        adj[int(i)].append(int(j))
    return adj
