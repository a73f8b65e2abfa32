"""Verification suites: one function per acceptance criterion.

Each check returns a :class:`CriterionResult`; suites group them. Oracles
used here (transitive closure, plain subset enumeration, brute-force danger)
are written independently of the code they check.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

from . import connectivity, hamilton
from .game_core import EdgeOwner, GameConfig, new_game
from .harness import (
    GameKind, RunSpec, SweepConfig, derive_seed, estimate_threshold, run_game, rows_to_csv, sweep,
)
from .strategies import BREAKERS, StrategyKind, play_degree_phase


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number:>2} {self.name}: {self.detail} ({self.seconds:.1f}s)"


@dataclass
class Context:
    """Shared state between checks of one verification session."""

    seed: int = 0
    workers: int = 1
    cache: dict = field(default_factory=dict)


def _timed(number: int, name: str):
    def wrap(fn: Callable[[Context], tuple[bool, str]]):
        def run(ctx: Context) -> CriterionResult:
            t0 = time.perf_counter()
            ok, detail = fn(ctx)
            return CriterionResult(number, name, ok, detail, time.perf_counter() - t0)
        run.number = number
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run
    return wrap


# -- 1 and 3: engine fuzz --------------------------------------------------------------------

@dataclass
class FuzzStats:
    games: int = 0
    positions: int = 0
    failures: list[str] = field(default_factory=list)
    maker_claims: int = 0
    danger_increases: int = 0


def fuzz_games(count: int = 10_000, seed: int = 0, n_max: int = 30) -> FuzzStats:
    """Random legal games to exhaustion, checking every position.

    Per position: the claimed cell holds the claimant's code, the row and
    column tallies recounted from the owner map match the cached degrees,
    claimed plus unclaimed covers the board once, and Maker's bipartite
    degrees sum to the same edge count on both sides. Per Maker claim the
    dangers of all ``2n`` bipartite vertices are recomputed from scratch.
    """
    rng = random.Random(seed)
    stats = FuzzStats()
    for g in range(count):
        n = rng.randint(2, n_max)
        b = rng.randint(1, max(1, n))
        st = new_game(GameConfig(n=n, b=b, seed=g), record_history=False)
        order = [(i, j) for i in range(n) for j in range(n) if i != j]
        rng.shuffle(order)
        own = st.owner
        two_b = 2 * b

        def dangers():
            return [st.dB_out[v] - two_b * st.dM_out[v] for v in range(n)] + [
                st.dB_in[v] - two_b * st.dM_in[v] for v in range(n)
            ]

        for i, j in order:
            player = st.to_move
            before = dangers() if player == EdgeOwner.MAKER else None
            st.claim(player, (i, j))
            stats.positions += 1
            code = int(player)
            row = own[i * n:(i + 1) * n]
            col = own[j::n]
            d_out, d_in = (st.dM_out, st.dM_in) if code == 1 else (st.dB_out, st.dB_in)
            bad = (
                own[i * n + j] != code
                or row.count(code) != d_out[i]
                or col.count(code) != d_in[j]
                or st.n_maker + st.n_breaker + st.unclaimed_count != n * (n - 1)
                or sum(st.dM_out) != st.n_maker
                or sum(st.dM_in) != st.n_maker
                or sum(st.dB_out) != st.n_breaker
                or sum(st.dB_in) != st.n_breaker
            )
            if bad and len(stats.failures) < 5:
                stats.failures.append(f"game {g} (n={n}, b={b}) after claim ({i},{j})")
            if before is not None:
                stats.maker_claims += 1
                after = dangers()
                if any(a > c for a, c in zip(after, before)):
                    stats.danger_increases += 1
        errs = st.check_consistency()
        if errs and len(stats.failures) < 5:
            stats.failures.append(f"game {g}: {errs}")
        if not st.is_exhausted():
            stats.failures.append(f"game {g} did not exhaust the board")
        stats.games += 1
    return stats


def _fuzz(ctx: Context) -> FuzzStats:
    if "fuzz" not in ctx.cache:
        t0 = time.perf_counter()
        ctx.cache["fuzz"] = fuzz_games(10_000, ctx.seed)
        ctx.cache["fuzz_seconds"] = time.perf_counter() - t0
    return ctx.cache["fuzz"]


@_timed(1, "engine fuzz")
def criterion_engine_fuzz(ctx: Context):
    s = _fuzz(ctx)
    secs = ctx.cache["fuzz_seconds"]
    ok = not s.failures and s.games == 10_000 and secs < 60
    return ok, f"{s.games} games, {s.positions} positions, {len(s.failures)} failures, {secs:.1f}s (limit 60s)"


@_timed(3, "danger monotonicity")
def criterion_danger_monotone(ctx: Context):
    s = _fuzz(ctx)
    return s.danger_increases == 0, f"{s.danger_increases} of {s.maker_claims} Maker claims raised some danger"


# -- 2: degree guarantee -------------------------------------------------------------------

@_timed(2, "degree guarantee")
def criterion_degree(ctx: Context):
    n, alpha, beta = 300, 0.5, 0.1
    K = math.ceil(2 * math.log(n))
    b = math.floor(beta * n / math.log(n))
    bad = []
    worst = 0
    runs = 0
    for kind in (StrategyKind.BREAKER_BOX, StrategyKind.BREAKER_RANDOM, StrategyKind.BREAKER_MAX_DEGREE):
        for rep in range(50):
            seed = derive_seed(ctx.seed, n, b, rep, list(StrategyKind).index(kind))
            st = new_game(GameConfig(n=n, b=b, alpha=alpha, beta=beta, theta=2.0, K=K, seed=seed), record_history=False)
            res, _ = play_degree_phase(st, random.Random(seed), BREAKERS[kind], K)
            runs += 1
            worst = max(worst, res.max_breaker_degree_unfinished)
            if not res.completed or res.rounds > 2 * K * n or res.max_breaker_degree_unfinished > alpha * n:
                bad.append(f"{kind.value}#{rep}")
    return not bad, (
        f"{runs - len(bad)}/{runs} runs reached min degree K={K} within 2Kn={2 * K * n} rounds "
        f"with Breaker degree <= {alpha * n:g} (worst {worst}); b={b}"
    )


# -- 4: strong components -------------------------------------------------------------------

def closure_components(adj) -> list[frozenset[int]]:
    """Mutual-reachability classes from a Floyd-Warshall transitive closure."""
    n = len(adj)
    reach = [[i == j for j in range(n)] for i in range(n)]
    for v, nbrs in enumerate(adj):
        for w in nbrs:
            reach[v][w] = True
    for k in range(n):
        for i in range(n):
            if reach[i][k]:
                ri, rk = reach[i], reach[k]
                for j in range(n):
                    if rk[j]:
                        ri[j] = True
    return sorted({frozenset(j for j in range(n) if reach[i][j] and reach[j][i]) for i in range(n)}, key=min)


def random_digraph(rng: random.Random, n: int, p: float) -> list[list[int]]:
    return [[w for w in range(n) if w != v and rng.random() < p] for v in range(n)]


@_timed(4, "SCC oracle")
def criterion_scc(ctx: Context):
    rng = random.Random(derive_seed(ctx.seed, 4))
    mismatches = 0
    for _ in range(1000):
        n = rng.randint(1, 8)
        adj = random_digraph(rng, n, rng.random() * 0.5)
        cond = connectivity.condense(adj)
        got = sorted((frozenset(m) for m in cond.members), key=min)
        if got != closure_components(adj):
            mismatches += 1
    return mismatches == 0, f"{1000 - mismatches}/1000 digraphs match the closure oracle"


# -- 5: expansion ---------------------------------------------------------------------------------

def k_out_k_in_digraph(rng: random.Random, n: int, K: int) -> list[list[int]]:
    """Each vertex picks ``K`` random out-neighbours and ``K`` random in-neighbours."""
    edges: set[tuple[int, int]] = set()
    for v in range(n):
        others = [w for w in range(n) if w != v]
        for w in rng.sample(others, K):
            edges.add((v, w))
        for w in rng.sample(others, K):
            edges.add((w, v))
    adj: list[list[int]] = [[] for _ in range(n)]
    for v, w in sorted(edges):
        adj[v].append(w)
    return adj


def smallest_violation_oracle(adj, max_size: int) -> tuple[int, ...] | None:
    """First set, by size then bitmask, that no edge leaves or no edge enters."""
    n = len(adj)
    edges = [(v, w) for v in range(n) for w in adj[v]]
    for s in range(1, min(max_size, n - 1) + 1):
        hits = []
        for S in combinations(range(n), s):
            inside = set(S)
            leaves = any(v in inside and w not in inside for v, w in edges)
            enters = any(w in inside and v not in inside for v, w in edges)
            if not leaves or not enters:
                hits.append(S)
        if hits:
            return min(hits, key=lambda S: sum(1 << v for v in S))
    return None


@_timed(5, "expansion checker")
def criterion_expansion(ctx: Context):
    rng = random.Random(derive_seed(ctx.seed, 5))
    n, K, alpha = 16, 4, 0.3
    top = connectivity.expansion_threshold(n, alpha)
    agree = 0
    violations = 0
    for _ in range(200):
        adj = k_out_k_in_digraph(rng, n, K)
        rep = connectivity.expansion_check(adj, alpha, mode="exhaustive")
        want = smallest_violation_oracle(adj, top)
        got = None if rep.ok else tuple(rep.violation)
        agree += got == want
        violations += want is not None
    return agree == 200, f"{agree}/200 agree with subset enumeration up to |S|={top} ({violations} violating graphs)"


# -- 6: strong connectivity end to end -------------------------------------------------------------

@_timed(6, "strong connectivity end to end")
def criterion_strong(ctx: Context):
    n, alpha = 500, 0.5
    cfg = SweepConfig(
        game="strong", n=[n], biases=[0.3], bias_mode="ratio", reps=50, breaker="BreakerBox",
        base_seed=ctx.seed, workers=ctx.workers, alpha=alpha, check_expansion=True,
    )
    report = sweep(cfg)
    wins = [r for r in report.runs if r.maker_won]
    limit = math.ceil((1 - alpha) ** -4) + 5
    short = sum(1 for r in wins if r.patch_moves is not None and r.patch_moves <= limit)
    rate = len(wins) / len(report.runs)
    ok = rate >= 0.9 and (not wins or short / len(wins) >= 0.9) and report.checks.get("winner_consistent", True)
    return ok, (
        f"b={report.rows[0].b}, Maker won {len(wins)}/{len(report.runs)} (need >= 90%); "
        f"{short}/{len(wins)} wins patched in <= {limit} moves; checks {report.checks}"
    )


# -- 7: box game -----------------------------------------------------------------------------------------

def box_thresholds(seed: int = 0, workers: int = 1, ns=(200, 400, 800)):
    """Exact Breaker-win thresholds of the box game over every integer bias in ``[0.5, 2] n / ln n``."""
    out = []
    for n in ns:
        lo = math.ceil(0.5 * n / math.log(n))
        hi = math.floor(2.0 * n / math.log(n))
        cfg = SweepConfig(
            game="box", n=[n], biases=list(range(lo, hi + 1)), reps=1, base_seed=seed, workers=workers,
        )
        out.append(estimate_threshold(sweep(cfg), n))
    return out


@_timed(7, "box game threshold")
def criterion_box(ctx: Context):
    est = box_thresholds(ctx.seed, ctx.workers)
    ratios = [e.ratio for e in est]
    in_band = all(e.censored is None and 0.5 <= e.ratio <= 2.0 for e in est)
    dist = [abs(r - 1) for r in ratios if r is not None]
    monotone = len(dist) == len(est) and all(a >= c for a, c in zip(dist, dist[1:]))
    parts = ", ".join(f"n={e.n}: b0={e.b_hat} ratio={e.ratio:.4f}" for e in est if e.ratio is not None)
    return in_band and monotone, (
        f"{parts}; ratios in [0.5, 2]: {in_band}; |ratio-1| = "
        + ", ".join(f"{d:.4f}" for d in dist) + f" non-increasing: {monotone}"
    )


# -- 8 to 11: Hamilton model --------------------------------------------------------------------------

def _model_runs(ctx: Context, K: int, monitor: bool):
    key = ("model", K, monitor)
    if key not in ctx.cache:
        n = 2000
        cfg = SweepConfig(
            game="model", n=[n], biases=[K], reps=30, base_seed=ctx.seed, workers=ctx.workers,
            alpha=0.1, check_invariants=monitor, check_cpstar=True, relax=0.25,
        )
        ctx.cache[key] = sweep(cfg).runs
    return ctx.cache[key]


def _main_model_runs(ctx: Context):
    return _model_runs(ctx, math.ceil(5 * math.log(2000)), True)


def _sanity_model_runs(ctx: Context):
    base = math.ceil(math.log(2000))
    return {m * base: _model_runs(ctx, m * base, True) for m in (2, 4, 8)}


@_timed(8, "Hamilton cycle validity")
def criterion_cycle_valid(ctx: Context):
    runs = list(_main_model_runs(ctx)) + [r for rs in _sanity_model_runs(ctx).values() for r in rs]
    cycles = [r for r in runs if r.hamilton_cycle]
    bad = [r for r in cycles if not r.checks.get("cycle_valid")]
    return not bad, f"{len(cycles) - len(bad)}/{len(cycles)} returned cycles pass the validator"


@_timed(9, "Hamilton model success")
def criterion_model_success(ctx: Context):
    n = 2000
    runs = _main_model_runs(ctx)
    wins = [r for r in runs if r.hamilton_cycle]
    rate = len(wins) / len(runs)
    fast = sum(1 for r in wins if r.trials["T"] <= 20 * n)
    sanity = _sanity_model_runs(ctx)
    rates = {K: sum(r.hamilton_cycle for r in rs) / len(rs) for K, rs in sanity.items()}
    Ks = sorted(rates)
    monotone = True
    for a, c in zip(Ks, Ks[1:]):
        pa, pc = rates[a], rates[c]
        sigma = math.sqrt((pa * (1 - pa) + pc * (1 - pc)) / 30)
        if pc < pa - 2 * sigma:
            monotone = False
    ok = rate >= 0.9 and (not wins or fast / len(wins) >= 0.95) and monotone
    sweep_txt = ", ".join(f"K={K}: {rates[K]:.2f}" for K in Ks)
    return ok, (
        f"K={runs[0].b}: success {len(wins)}/{len(runs)} (need >= 90%), T <= 20n in {fast}/{len(wins)}; "
        f"success by K {sweep_txt}, monotone within 2 sigma: {monotone}"
    )


@_timed(10, "builder invariants")
def criterion_builder_invariants(ctx: Context):
    runs = list(_main_model_runs(ctx)) + [r for rs in _sanity_model_runs(ctx).values() for r in rs]
    inv_ok = all(r.checks.get("invariants") for r in runs)
    budget_ok = all(r.checks.get("reveal_budget") for r in runs)
    failed = [r for r in runs if not r.hamilton_cycle]
    exhausted = sum(1 for r in failed if r.reason == "ListExhausted")
    avg = exhausted / len(failed) if failed else 0.0
    ok = inv_ok and budget_ok and avg <= 2
    return ok, (
        f"partition and cycle-size invariants held at every step of {len(runs)} runs: {inv_ok}; "
        f"reveals <= K per vertex: {budget_ok}; exhausted vertices per failed run {avg:.2f} (limit 2)"
    )


def ubar_snapshots(count: int = 500, seed: int = 0) -> tuple[int, int]:
    """Compare incremental ``Ū*`` with a from-scratch recomputation on random mid-build states."""
    rng = random.Random(seed)
    agree = 0
    for k in range(count):
        n = rng.randint(5, 50)
        K = rng.randint(1, 4)
        cfg = hamilton.ModelConfig(n=n, alpha=rng.choice([0.05, 0.1, 0.2]), K=K, seed=k)
        try:
            cfg.validate()
        except ValueError:
            cfg = hamilton.ModelConfig(n=n, alpha=0.1, K=1, seed=k)
        _, _, st = hamilton.model_init(cfg, rng)
        steps = rng.randint(0, 3 * n)
        try:
            for _ in range(steps):
                if st.cycle is not None:
                    break
                st.advance()
        except hamilton.OutListExhausted:
            pass
        agree += st.ubar == hamilton.ubar_star(st)
    return agree, count


@_timed(11, "U-bar-star oracle and CPstar monitor")
def criterion_ubar(ctx: Context):
    agree, total = ubar_snapshots(500, derive_seed(ctx.seed, 11))
    runs = _main_model_runs(ctx)
    large = [0, 0]
    small = [0, 0]
    for r in runs:
        cp = r.trials["cpstar"]
        large[0] += cp["large_U"]["violations"]
        large[1] += cp["large_U"]["snapshots"]
        small[0] += cp["small_U"]["violations"]
        small[1] += cp["small_U"]["snapshots"]
    total_snap = large[1] + small[1]
    frac = (large[0] + small[0]) / total_snap if total_snap else 0.0
    ok = agree == total and frac <= 0.05
    return ok, (
        f"{agree}/{total} snapshots match; CPstar at relax 0.25: {large[0]}/{large[1]} large-U, "
        f"{small[0]}/{small[1]} small-U violations, fraction {frac:.4f} (limit 0.05)"
    )


# -- 12: determinism -----------------------------------------------------------------------------------

def determinism_probe(seed: int = 0, workers: int = 2) -> list[tuple[str, bool]]:
    import json

    configs = {
        "strong": SweepConfig(game="strong", n=[40], biases=[1, 3], reps=3, base_seed=seed, check_expansion=True),
        "hamilton": SweepConfig(game="hamilton", n=[60], biases=[1], reps=2, base_seed=seed, alpha=0.1, theta=5.0),
        "model": SweepConfig(game="model", n=[300], biases=[2.0], bias_mode="ratio", reps=3, base_seed=seed,
                             check_invariants=True, check_cpstar=True),
        "box": SweepConfig(game="box", n=[100], biases=list(range(15, 30)), reps=1, base_seed=seed),
    }
    out = []
    for name, cfg in configs.items():
        blobs = []
        for w in (1, 1, workers):
            cfg.workers = w
            rep = sweep(cfg)
            blobs.append(json.dumps(rep.to_dict(), sort_keys=True) + rows_to_csv(rep.rows))
        out.append((name, len(set(blobs)) == 1))
    return out


@_timed(12, "determinism")
def criterion_determinism(ctx: Context):
    res = determinism_probe(ctx.seed, max(2, ctx.workers))
    ok = all(same for _, same in res)
    return ok, "byte-identical reports across repeats and worker counts: " + ", ".join(
        f"{name}={same}" for name, same in res
    )


# -- suites ---------------------------------------------------------------------------------------------

SUITES: dict[str, list] = {
    "engine": [criterion_engine_fuzz, criterion_danger_monotone],
    "degree": [criterion_degree],
    "scc": [criterion_scc],
    "expansion": [criterion_expansion],
    "strong": [criterion_strong],
    "box": [criterion_box],
    "hamilton": [criterion_cycle_valid, criterion_model_success, criterion_builder_invariants, criterion_ubar],
    "determinism": [criterion_determinism],
}
ALL_CHECKS = sorted({c for cs in SUITES.values() for c in cs}, key=lambda c: c.number)
SUITES["all"] = ALL_CHECKS


def run_suite(name: str, seed: int = 0, workers: int = 1, echo: Callable[[str], None] | None = None) -> list[CriterionResult]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    ctx = Context(seed=seed, workers=workers)
    results = []
    for check in SUITES[name]:
        res = check(ctx)
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
