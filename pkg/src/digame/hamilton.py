"""Rotation-extension Hamilton cycle builder over lazily revealed out-lists.

Every vertex ``v`` owns an ``IN(v)`` set, fully drawn up front, and an
``OUT(v)`` list whose entries are only drawn when the builder looks at them.
The builder keeps a path ``P`` from ``s_P`` to ``f_P``, an optional cycle
``C`` and the unvisited set ``U``. While ``|U| >= 2 alpha n`` it extends ``P``
into ``U``; below that it rotates ``P`` into a cycle, merges cycles back,
and uses the ``IN`` sets of vertices in ``U`` to re-enter ``U`` from the
rotation point.

The same builder runs on Maker's digraph after the degree phase, with the
out-lists replaced by Maker's out-neighbours in acquisition order.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .game_core import GameError, GameState

IN_U, IN_P, IN_C = 0, 1, 2


class OutListExhausted(GameError):
    def __init__(self, v: int):
        super().__init__(f"out-list of vertex {v} exhausted")
        self.vertex = v


class DegreePhaseIncomplete(GameError):
    pass


# -- random model -----------------------------------------------------------------------

ADVERSARY_MODES = ("uniform", "block", "targeted")


@dataclass(frozen=True)
class ModelConfig:
    n: int
    alpha: float = 0.1
    K: int | None = None
    theta: float = 5.0
    adversary: str = "uniform"
    seed: int = 0

    @property
    def k(self) -> int:
        if self.K is not None:
            return self.K
        return math.ceil(self.theta * math.log(self.n))

    @property
    def candidate_size(self) -> int:
        return min(self.n - 1, math.ceil((1 - self.alpha) * self.n - 1e-9))

    def validate(self) -> None:
        if self.n < 3:
            raise ValueError("model needs n >= 3")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.adversary not in ADVERSARY_MODES:
            raise ValueError(f"adversary must be one of {ADVERSARY_MODES}")
        if self.k > self.candidate_size:
            raise ValueError(f"K={self.k} exceeds candidate set size {self.candidate_size}")
        if self.k < 1:
            raise ValueError("K must be positive")


class Adversary:
    """Candidate sets ``A(v)`` (for IN) and ``B(v)`` (for OUT), stored as their complements.

    ``uniform`` excludes a random block per vertex, ``block`` excludes the
    vertices just after (for B) or before (for A) ``v`` on the circle,
    ``targeted`` excludes one common block from everybody.
    """

    def __init__(self, n: int, size: int, mode: str, rng: random.Random):
        self.n = n
        self.size = size
        self.n_excluded = n - 1 - size
        self.mode = mode
        self.rng = rng
        self._np = None
        self._excl: dict[tuple[str, int], frozenset[int]] = {}

    def excluded(self, side: str, v: int) -> frozenset[int]:
        key = (side, v)
        hit = self._excl.get(key)
        if hit is not None:
            return hit
        n, e = self.n, self.n_excluded
        if self.mode == "uniform":
            if self._np is None:
                self._np = np.random.default_rng(self.rng.getrandbits(64))
            pool = self._np.choice(n - 1, e, replace=False).tolist()
            ex = frozenset(w if w < v else w + 1 for w in pool)
        elif self.mode == "block":
            step = 1 if side == "B" else -1
            ex = frozenset((v + step * (1 + i)) % n for i in range(e))
        else:
            common = [w for w in range(e + 1) if w != v][:e]
            ex = frozenset(common)
        self._excl[key] = ex
        return ex

    def members(self, side: str, v: int) -> list[int]:
        ex = self.excluded(side, v)
        return [w for w in range(self.n) if w != v and w not in ex]

    def contains(self, side: str, v: int, w: int) -> bool:
        return w != v and w not in self.excluded(side, v)


class LazyOutLists:
    """Deferred out-lists: each reveal is uniform over ``B(v)`` minus earlier reveals, at most ``K`` per vertex."""

    def __init__(self, adversary: Adversary, K: int, rng: random.Random):
        self.adversary = adversary
        self.K = K
        self.rng = rng
        n = adversary.n
        self.revealed: list[list[int]] = [[] for _ in range(n)]
        self._seen: list[set[int]] = [set() for _ in range(n)]

    def reveal(self, v: int) -> int | None:
        got = self.revealed[v]
        if len(got) >= self.K:
            return None
        ex = self.adversary.excluded("B", v)
        seen = self._seen[v]
        n = self.adversary.n
        rng = self.rng
        while True:
            w = rng.randrange(n)
            if w != v and w not in ex and w not in seen:
                break
        seen.add(w)
        got.append(w)
        return w

    def pointer(self, v: int) -> int:
        return len(self.revealed[v])

    def budget(self, v: int) -> int:
        return self.K

    def has_edge(self, v: int, w: int) -> bool:
        return w in self._seen[v]


class FixedOutLists:
    """Out-lists fixed in advance (Maker's claimed out-edges in acquisition order)."""

    def __init__(self, lists: Sequence[Sequence[int]]):
        self.lists = [list(x) for x in lists]
        self.ptr = [0] * len(self.lists)
        self._sets = [set(x) for x in self.lists]

    @property
    def revealed(self) -> list[list[int]]:
        return [lst[:p] for lst, p in zip(self.lists, self.ptr)]

    def reveal(self, v: int) -> int | None:
        p = self.ptr[v]
        if p >= len(self.lists[v]):
            return None
        self.ptr[v] = p + 1
        return self.lists[v][p]

    def pointer(self, v: int) -> int:
        return self.ptr[v]

    def budget(self, v: int) -> int:
        return len(self.lists[v])

    def has_edge(self, v: int, w: int) -> bool:
        return w in self._sets[v]


# -- statistics ---------------------------------------------------------------------------

@dataclass
class TrialStats:
    """Reveal counts of one build.

    ``x_counts[i]`` is the number of reveals spent raising ``|P| + |C|`` from
    ``i + 1`` to ``i + 2``; the geometric dominations used to bound these
    (success probabilities ``alpha``, ``alpha(1-alpha)(1/40-alpha)`` and
    ``alpha(1-alpha) theta^(1/2) |U| / 6n``) are exposed by
    :func:`reference_success_probability` for comparison only.
    """

    x_counts: list[int] = field(default_factory=list)
    pending: int = 0
    endgame_trials: int = 0
    snapshots: list[tuple[int, int]] = field(default_factory=list)
    cases: Counter = field(default_factory=Counter)
    invariant_violations: int = 0
    first_violation: str | None = None
    invariant_checks: int = 0

    @property
    def total(self) -> int:
        return sum(self.x_counts) + self.pending + self.endgame_trials

    def summary(self) -> dict:
        return {
            "T": self.total,
            "main_trials": sum(self.x_counts) + self.pending,
            "endgame_trials": self.endgame_trials,
            "levels": len(self.x_counts),
            "max_x": max(self.x_counts, default=0),
            "cases": dict(sorted(self.cases.items())),
            "invariant_violations": self.invariant_violations,
        }


def reference_success_probability(u: int, n: int, alpha: float, theta: float) -> float:
    if u >= 2 * alpha * n:
        return alpha
    if u >= n / (theta * math.log(n)):
        return alpha * (1 - alpha) * (1 / 40 - alpha)
    return alpha * (1 - alpha) * math.sqrt(theta) * u / (6 * n)


# -- builder -------------------------------------------------------------------------------

@dataclass
class StepOutcome:
    case: str
    vertex: int
    revealed: int | None
    done: bool = False


class PathCycleState:
    """Path, cycle and unvisited set with incrementally maintained ``Ū*``.

    ``Ū*`` is the set of vertices outside ``U`` that lie in ``IN(u)`` for
    some ``u`` in ``U``; ``cover[v]`` counts those ``u``.
    """

    def __init__(
        self,
        n: int,
        alpha: float,
        in_sets: Sequence[Sequence[int]],
        lists,
        start: int = 0,
        strict_endgame: bool = True,
        close_via_in: bool = True,
        theta: float | None = None,
        monitor: bool = False,
        trace: list[str] | None = None,
    ):
        self.n = n
        self.alpha = alpha
        self.two_an = 2 * alpha * n
        self.theta = theta
        self.lists = lists
        self.in_sets = [list(s) for s in in_sets]
        self.in_lookup = [set(s) for s in self.in_sets]
        self.strict_endgame = strict_endgame
        self.close_via_in = close_via_in
        self.monitor = monitor
        self.trace = trace
        # inverse IN relation: inv[x] = sorted u with x in IN(u)
        inv: list[list[int]] = [[] for _ in range(n)]
        for u, s in enumerate(self.in_sets):
            for x in s:
                inv[x].append(u)
        self.inv = inv
        self.where = bytearray(n)
        self.P = [start]
        self.ppos = [-1] * n
        self.ppos[start] = 0
        self.C: list[int] = []
        self.cpos = [-1] * n
        self.u_size = n - 1
        self.cover = [len(inv[v]) for v in range(n)]
        self.where[start] = IN_P
        for v in self.in_sets[start]:
            self.cover[v] -= 1
        self.ubar: set[int] = {start} if self.cover[start] > 0 else set()
        self.stats = TrialStats()
        self.cycle: list[int] | None = None
        self.t = 0
        self._snapshot()

    def place(self, P: Sequence[int], C: Sequence[int] = ()) -> None:
        """Reset to a given path and cycle (the rest is ``U``), rebuilding ``Ū*`` from scratch."""
        n = self.n
        P, C = list(P), list(C)
        if not P or len(set(P) | set(C)) != len(P) + len(C):
            raise ValueError("P must be non-empty and disjoint from C")
        self.where = bytearray(n)
        self.ppos = [-1] * n
        self.cpos = [-1] * n
        for k, v in enumerate(P):
            self.where[v] = IN_P
            self.ppos[v] = k
        for k, v in enumerate(C):
            self.where[v] = IN_C
            self.cpos[v] = k
        self.P, self.C = P, C
        self.u_size = n - len(P) - len(C)
        self.cover = [sum(1 for u in self.inv[v] if self.where[u] == IN_U) for v in range(n)]
        self.ubar = {v for v in range(n) if self.where[v] != IN_U and self.cover[v] > 0}

    # -- views --
    @property
    def s(self) -> int:
        return self.P[0]

    @property
    def f(self) -> int:
        return self.P[-1]

    @property
    def U(self) -> set[int]:
        return {v for v in range(self.n) if self.where[v] == IN_U}

    @property
    def level(self) -> int:
        return len(self.P) + len(self.C)

    def pred(self, x: int) -> int | None:
        if self.where[x] == IN_P:
            i = self.ppos[x]
            return self.P[i - 1] if i > 0 else None
        if self.where[x] == IN_C:
            return self.C[self.cpos[x] - 1]
        return None

    def has_edge(self, v: int, w: int) -> bool:
        return self.lists.has_edge(v, w) or v in self.in_lookup[w]

    # -- bookkeeping --
    def _snapshot(self) -> None:
        if 1 <= self.u_size < self.two_an:
            self.stats.snapshots.append((self.u_size, len(self.ubar)))

    def _leave_u(self, u: int) -> None:
        self.u_size -= 1
        cover = self.cover
        for v in self.in_sets[u]:
            cover[v] -= 1
            if cover[v] == 0:
                self.ubar.discard(v)
        if cover[u] > 0:
            self.ubar.add(u)

    def _progress(self) -> None:
        st = self.stats
        st.x_counts.append(st.pending)
        st.pending = 0

    def _append_to_path(self, v: int) -> None:
        self.ppos[v] = len(self.P)
        self.P.append(v)
        self.where[v] = IN_P

    def _rotate(self, y: int) -> None:
        """``P <- P[s_P, pi(y)]`` and ``C <- P[y, f_P] + (f_P, y)``."""
        i = self.ppos[y]
        arc = self.P[i:]
        del self.P[i:]
        ppos, cpos, where = self.ppos, self.cpos, self.where
        for k, v in enumerate(arc):
            ppos[v] = -1
            cpos[v] = k
            where[v] = IN_C
        self.C = arc

    def _merge(self, y: int) -> None:
        """``P <- P + (f_P, y) + C[y, pi(y)]`` and ``C <- empty``."""
        j = self.cpos[y]
        arc = self.C[j:] + self.C[:j]
        base = len(self.P)
        ppos, cpos, where = self.ppos, self.cpos, self.where
        for k, v in enumerate(arc):
            ppos[v] = base + k
            cpos[v] = -1
            where[v] = IN_P
        self.P.extend(arc)
        self.C = []

    def _first_u_with_in(self, x: int) -> int | None:
        where = self.where
        for u in self.inv[x]:
            if where[u] == IN_U:
                return u
        return None

    def _reveal(self) -> int:
        f = self.P[-1]
        y = self.lists.reveal(f)
        if y is None:
            raise OutListExhausted(f)
        self.t += 1
        return y

    # -- steps --
    def step(self) -> StepOutcome:
        """One reveal of the main phase (``U`` non-empty)."""
        f = self.P[-1]
        y = self._reveal()
        self.stats.pending += 1
        where = self.where
        wy = where[y]
        case = "ADV"
        if y == self.P[0]:
            case = "SKIP"
        elif self.u_size >= self.two_an:
            if wy == IN_U:
                self._append_to_path(y)
                self._leave_u(y)
                self._progress()
                case = "1"
        elif self.C:
            if wy == IN_C:
                self._merge(y)
                case = "2a"
        elif wy == IN_P and len(self.P) - 1 - self.ppos[y] >= self.two_an:
            x = self.P[self.ppos[y] - 1]
            if x in self.ubar:
                u = self._first_u_with_in(x)
                self._rotate(y)
                self._append_to_path(u)
                self._leave_u(u)
                self._progress()
                case = "2c"
            else:
                self._rotate(y)
                case = "2b"
        return self._finish(case, f, y)

    def endgame_step(self) -> StepOutcome:
        """One reveal once ``P`` and ``C`` cover every vertex."""
        f = self.P[-1]
        y = self._reveal()
        self.stats.endgame_trials += 1
        wy = self.where[y]
        case = "ADV"
        if self.C:
            if wy == IN_C:
                self._merge(y)
                case = "END-MERGE"
        elif y == self.P[0] or (self.close_via_in and f in self.in_lookup[self.P[0]]):
            self.cycle = list(self.P)
            case = "END-CLOSE"
        elif wy == IN_P and (
            not self.strict_endgame or len(self.P) - 1 - self.ppos[y] >= self.two_an
        ):
            self._rotate(y)
            case = "END-ROT"
        return self._finish(case, f, y)

    def advance(self) -> StepOutcome:
        return self.endgame_step() if self.u_size == 0 else self.step()

    def _finish(self, case: str, f: int, y: int) -> StepOutcome:
        self.stats.cases[case] += 1
        if case in ("1", "2c"):
            self._snapshot()
        if self.trace is not None:
            self.trace.append(f"{self.t} {f} {y} {case} {self.u_size} {len(self.C)} {len(self.P)}")
        if self.monitor:
            self._check(case)
        return StepOutcome(case, f, y, done=self.cycle is not None)

    # -- checks --
    def invariant_errors(self, main_phase: bool = True) -> list[str]:
        n = self.n
        errs = []
        P, C = self.P, self.C
        if len(P) + len(C) + self.u_size != n:
            errs.append("P, C, U sizes do not add to n")
        where = np.frombuffer(self.where, dtype=np.uint8)
        Pa = np.asarray(P, dtype=np.int64)
        Ca = np.asarray(C, dtype=np.int64)
        # every P and C vertex tagged correctly and the tag counts match: disjoint simple sequences
        if (
            np.any(where[Pa] != IN_P) or np.any(where[Ca] != IN_C)
            or self.where.count(IN_P) != len(P) or self.where.count(IN_C) != len(C)
        ):
            errs.append("membership map disagrees with P or C")
        if self.where.count(IN_U) != self.u_size:
            errs.append("U size mismatch")
        if main_phase and C and len(C) < self.two_an:
            errs.append(f"|C|={len(C)} below 2 alpha n={self.two_an:g}")
        if np.any(np.asarray(self.ppos, dtype=np.int64)[Pa] != np.arange(len(P))):
            errs.append("path positions stale")
        if C and np.any(np.asarray(self.cpos, dtype=np.int64)[Ca] != np.arange(len(C))):
            errs.append("cycle positions stale")
        return errs

    def _check(self, case: str) -> None:
        st = self.stats
        st.invariant_checks += 1
        errs = self.invariant_errors(main_phase=not case.startswith("END"))
        if errs:
            st.invariant_violations += 1
            if st.first_violation is None:
                st.first_violation = f"t={self.t} case={case}: {'; '.join(errs)}"


def ubar_star(state: PathCycleState) -> set[int]:
    """Definitional ``Ū*``: vertices outside ``U`` that appear in ``IN(u)`` for some ``u`` in ``U``."""
    U = state.U
    return {v for v in range(state.n) if v not in U and any(v in state.in_lookup[u] for u in U)}


# -- construction -------------------------------------------------------------------------

def model_init(config: ModelConfig, rng: random.Random, **builder_kw):
    """Draw IN sets, set up deferred OUT lists and the starting state ``P = (0)``."""
    config.validate()
    n, K = config.n, config.k
    adversary = Adversary(n, config.candidate_size, config.adversary, rng)
    in_sets = []
    for v in range(n):
        ex = adversary.excluded("A", v)
        chosen: list[int] = []
        seen: set[int] = set()
        while len(chosen) < K:
            w = rng.randrange(n)
            if w != v and w not in ex and w not in seen:
                seen.add(w)
                chosen.append(w)
        in_sets.append(chosen)
    lists = LazyOutLists(adversary, K, rng)
    theta = builder_kw.pop("theta", K / math.log(n))
    state = PathCycleState(n, config.alpha, in_sets, lists, theta=theta, **builder_kw)
    return lists, in_sets, state


def from_maker_graph(game: GameState, K: int, alpha: float | None = None, **builder_kw):
    """Builder inputs from Maker's digraph: OUT lists in acquisition order, IN sets = Maker in-neighbours."""
    if min(game.dM_out) < K or min(game.dM_in) < K:
        raise DegreePhaseIncomplete(
            f"Maker min out/in degree {min(game.dM_out)}/{min(game.dM_in)} below K={K}"
        )
    alpha = game.config.alpha if alpha is None else alpha
    lists = FixedOutLists(game.maker_out)
    in_sets = [list(x) for x in game.maker_in]
    state = PathCycleState(game.n, alpha, in_sets, lists, **builder_kw)
    return lists, in_sets, state


def from_digraph(adj: Sequence[Sequence[int]], alpha: float, **builder_kw):
    """Builder over a fixed digraph: OUT lists are its adjacency lists in order."""
    n = len(adj)
    ins: list[list[int]] = [[] for _ in range(n)]
    for v, nbrs in enumerate(adj):
        for w in nbrs:
            ins[w].append(v)
    lists = FixedOutLists(adj)
    return lists, ins, PathCycleState(n, alpha, ins, lists, **builder_kw)


# -- driver ---------------------------------------------------------------------------------

@dataclass
class BuildResult:
    cycle: list[int] | None
    reason: str | None
    stats: TrialStats
    exhausted_vertex: int | None = None

    @property
    def success(self) -> bool:
        return self.cycle is not None


def run_builder(state: PathCycleState, budget: int | None = None, budget_factor: float = 100.0) -> BuildResult:
    """Step until a Hamilton cycle closes, an out-list runs dry, or ``budget`` reveals are spent."""
    if budget is None:
        budget = int(budget_factor * state.n)
    if state.n == 1:
        return BuildResult([state.P[0]], None, state.stats)
    try:
        while state.cycle is None:
            if state.t >= budget:
                return BuildResult(None, "BudgetExceeded", state.stats)
            state.advance()
    except OutListExhausted as exc:
        return BuildResult(None, "ListExhausted", state.stats, exhausted_vertex=exc.vertex)
    return BuildResult(state.cycle, None, state.stats)


def validate_hamilton_cycle(order: Sequence[int], n: int, has_edge: Callable[[int, int], bool]) -> list[str]:
    """Independent check: ``order`` is a permutation of ``range(n)`` and every hop, closing one included, is an edge."""
    errs = []
    if len(order) != n or sorted(order) != list(range(n)):
        errs.append("not a permutation of the vertex set")
        return errs
    for k in range(n):
        v, w = order[k], order[(k + 1) % n]
        if not has_edge(v, w):
            errs.append(f"hop ({v}, {w}) is not an available edge")
    return errs


# -- CPstar monitor -------------------------------------------------------------------------

@dataclass
class CPStarReport:
    relax: float
    large_regime: tuple[int, int]
    small_regime: tuple[int, int]

    @property
    def violations(self) -> int:
        return self.large_regime[0] + self.small_regime[0]

    @property
    def checked(self) -> int:
        return self.large_regime[1] + self.small_regime[1]

    @property
    def violation_fraction(self) -> float:
        return self.violations / self.checked if self.checked else 0.0

    def to_dict(self) -> dict:
        return {
            "relax": self.relax,
            "large_U": {"violations": self.large_regime[0], "snapshots": self.large_regime[1]},
            "small_U": {"violations": self.small_regime[0], "snapshots": self.small_regime[1]},
            "violation_fraction": self.violation_fraction,
        }


def cpstar_bound(u: int, n: int, theta: float) -> float:
    """Lower bound on ``|Ū*|``: ``n/20`` for ``|U| >= n/(theta ln n)``, else ``sqrt(theta) |U| ln n``."""
    if u >= n / (theta * math.log(n)):
        return n / 20
    return math.sqrt(theta) * u * math.log(n)


def cpstar_check(stats: TrialStats, n: int, theta: float, relax: float = 1.0) -> CPStarReport:
    """Count snapshots ``(|U|, |Ū*|)`` with ``|Ū*| < relax * bound``, split by regime."""
    if not 0 < relax <= 1:
        raise ValueError("relax must lie in (0, 1]")
    cut = n / (theta * math.log(n))
    large = [0, 0]
    small = [0, 0]
    for u, ub in stats.snapshots:
        if u < 1:
            continue
        bucket = large if u >= cut else small
        bucket[1] += 1
        if ub < relax * cpstar_bound(u, n, theta):
            bucket[0] += 1
    return CPStarReport(relax, tuple(large), tuple(small))
