"""Monte Carlo runner: full games, bias sweeps, threshold estimates, reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any

from scipy.stats import beta as beta_dist

from . import connectivity, hamilton
from .game_core import EdgeOwner, GameConfig, dump_position, new_game
from .strategies import BREAKERS, StrategyKind, box_game_play, play_degree_phase

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MASK64 = (1 << 64) - 1
CSV_HEADER = ["game", "n", "b", "R", "maker_wins", "win_rate", "ci_lo", "ci_hi", "mean_rounds"]


class GameKind(Enum):
    STRONG = "StrongConnectivity"
    HAMILTON = "Hamiltonicity"
    BOX = "BoxGame"
    MODEL = "HamiltonModel"

    @classmethod
    def parse(cls, name: str) -> "GameKind":
        aliases = {
            "strong": cls.STRONG, "hamilton": cls.HAMILTON, "ham": cls.HAMILTON,
            "box": cls.BOX, "boxgame": cls.BOX, "hamiltonmodel": cls.MODEL, "model": cls.MODEL,
        }
        key = name.replace("_", "").replace("-", "").lower()
        for kind in cls:
            aliases.setdefault(kind.value.lower(), kind)
        if key not in aliases:
            raise ValueError(f"unknown game {name!r}")
        return aliases[key]


# -- seeds --------------------------------------------------------------------------------

def mix64(z: int) -> int:
    """SplitMix64 finalizer."""
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(base: int, *parts: int) -> int:
    h = mix64(base & MASK64)
    for p in parts:
        h = mix64(h ^ (p & MASK64))
    return h


# -- configuration --------------------------------------------------------------------------

DEFAULT_ALPHA = {GameKind.STRONG: 0.5, GameKind.HAMILTON: 0.1, GameKind.BOX: 0.5, GameKind.MODEL: 0.1}


@dataclass
class SweepConfig:
    game: str = "strong"
    n: list[int] = field(default_factory=lambda: [50])
    biases: list[float] = field(default_factory=lambda: [2])
    bias_mode: str = "absolute"
    reps: int = 10
    maker: str = "MakerDegree"
    breaker: str = "BreakerBox"
    base_seed: int = 0
    workers: int = 1
    alpha: float | None = None
    beta: float = 0.1
    theta: float | None = None
    K: int | None = None
    adversary: str = "uniform"
    relax: float = 0.25
    budget_factor: float = 100.0
    check_expansion: bool = False
    check_cpstar: bool = False
    check_invariants: bool = False

    def validate(self) -> None:
        GameKind.parse(self.game)
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.bias_mode not in ("absolute", "ratio"):
            raise ValueError("bias_mode must be 'absolute' or 'ratio'")
        StrategyKind.parse(self.breaker)
        StrategyKind.parse(self.maker)

    def kind(self) -> GameKind:
        return GameKind.parse(self.game)

    def resolve_bias(self, n: int, value: float) -> int:
        """Absolute bias, or ``ceil(c n / ln n)`` (``ceil(c ln n)`` for the model's K) in ratio mode."""
        if self.bias_mode == "absolute":
            b = int(round(value))
        elif self.kind() == GameKind.MODEL:
            b = math.ceil(value * math.log(n) - 1e-9)
        else:
            b = math.ceil(value * n / math.log(n) - 1e-9)
        if b < 1:
            raise ValueError(f"bias {value} resolves to {b} < 1 at n={n}")
        return b

    def to_dict(self, include_workers: bool = False) -> dict:
        d = asdict(self)
        if not include_workers:
            d.pop("workers")
        return d


def default_K(kind: GameKind, n: int, alpha: float, theta: float | None) -> int:
    """Strong connectivity: smallest K with the expansion guarantee; Hamiltonicity: ``ceil(theta ln n)``."""
    if kind == GameKind.STRONG and theta is None:
        return math.ceil(connectivity.expansion_min_K(alpha))
    return math.ceil((theta if theta is not None else 5.0) * math.log(n))


# -- single runs -------------------------------------------------------------------------------

@dataclass
class RunResult:
    game: str
    n: int
    b: int
    rep: int
    seed: int
    winner: str
    rounds: int
    reason: str | None = None
    strongly_connected: bool | None = None
    hamilton_cycle: bool | None = None
    degree: dict | None = None
    patch_moves: int | None = None
    trials: dict | None = None
    checks: dict = field(default_factory=dict)

    @property
    def maker_won(self) -> bool:
        return self.winner == "Maker"

    @property
    def checks_passed(self) -> bool:
        return all(v for v in self.checks.values() if isinstance(v, bool))


@dataclass
class RunSpec:
    """Everything one run needs; plain data so it pickles into worker processes."""

    kind: GameKind
    n: int
    b: int
    rep: int
    seed: int
    alpha: float
    beta: float
    theta: float | None
    K: int | None
    breaker: str
    adversary: str = "uniform"
    relax: float = 0.25
    budget_factor: float = 100.0
    check_expansion: bool = False
    check_cpstar: bool = False
    check_invariants: bool = False


def run_game(spec: RunSpec, trace: list[str] | None = None) -> RunResult:
    """Play one game. ``trace`` collects the claim dump and builder steps when given."""
    log.debug("run %s n=%d b=%d rep=%d", spec.kind.value, spec.n, spec.b, spec.rep)
    if spec.kind == GameKind.BOX:
        res = box_game_play(spec.n, spec.n, spec.b)
        if trace is not None:
            trace.append(" ".join(str(x) for x in res.final_loads))
        return RunResult(spec.kind.value, spec.n, spec.b, spec.rep, spec.seed, res.winner, res.rounds)
    if spec.kind == GameKind.MODEL:
        return _run_model(spec, trace)
    return _run_digraph_game(spec, trace)


def _run_digraph_game(spec: RunSpec, trace: list[str] | None = None) -> RunResult:
    rng = random.Random(spec.seed)
    K = spec.K if spec.K is not None else default_K(spec.kind, spec.n, spec.alpha, spec.theta)
    theta = spec.theta if spec.theta is not None else K / math.log(spec.n)
    config = GameConfig(n=spec.n, b=spec.b, alpha=spec.alpha, beta=spec.beta, theta=theta, K=K, seed=spec.seed)
    state = new_game(config, record_history=trace is not None)
    breaker = BREAKERS[StrategyKind.parse(spec.breaker)]
    deg, _ = play_degree_phase(state, rng, breaker, K)
    result = RunResult(spec.kind.value, spec.n, spec.b, spec.rep, spec.seed, "Breaker", 0, degree=asdict(deg))
    if not deg.completed:
        result.reason = deg.error or "degree phase incomplete"
    if spec.kind == GameKind.STRONG:
        if spec.check_expansion and deg.completed:
            _expansion_checks(state, spec, rng, result)
        if deg.completed:
            patch = connectivity.maker_connectivity_endgame(state, rng, breaker)
            result.patch_moves = len(patch.moves)
            stuck = patch.stuck
        else:
            stuck = False
        sc = connectivity.is_strongly_connected(state.maker_out)
        result.strongly_connected = sc
        if sc:
            result.winner = "Maker"
            result.reason = None
        elif result.reason is None:
            result.reason = "Stuck" if stuck else "not strongly connected"
        result.checks["winner_consistent"] = sc == (result.winner == "Maker")
    else:
        found = False
        if deg.completed:
            steps = [] if trace is not None else None
            _, _, builder = hamilton.from_maker_graph(
                state, K, alpha=spec.alpha, monitor=spec.check_invariants, trace=steps
            )
            built = hamilton.run_builder(builder, budget_factor=spec.budget_factor)
            result.trials = built.stats.summary()
            if built.success:
                board = state.owner
                errs = hamilton.validate_hamilton_cycle(
                    built.cycle, spec.n, lambda v, w: board[v * spec.n + w] == EdgeOwner.MAKER
                )
                found = not errs
                result.checks["cycle_valid"] = found
            else:
                result.reason = built.reason
            if spec.check_invariants:
                result.checks["invariants"] = built.stats.invariant_violations == 0
        result.hamilton_cycle = found
        if found:
            result.winner = "Maker"
            result.reason = None
    result.rounds = state.round
    if trace is not None:
        trace.extend(dump_position(state).splitlines())
        if spec.kind == GameKind.HAMILTON and deg.completed:
            trace.extend(steps)
    return result


def _expansion_checks(state, spec: RunSpec, rng: random.Random, result: RunResult) -> None:
    adj = state.maker_out
    threshold = connectivity.expansion_threshold(spec.n, spec.alpha)
    report = connectivity.expansion_check(
        adj, spec.alpha, mode="sampled", samples=200, rng=random.Random(rng.getrandbits(64))
    )
    result.checks["expansion_ok"] = report.ok
    cond = connectivity.condense(adj)
    big = all(len(cond.members[c]) > threshold for c in cond.sources + cond.sinks)
    if cond.strongly_connected:
        big = True
    # no violation found must imply every source and sink is large
    result.checks["sources_sinks_large"] = big or not report.ok


def _run_model(spec: RunSpec, trace: list[str] | None = None) -> RunResult:
    rng = random.Random(spec.seed)
    cfg = hamilton.ModelConfig(n=spec.n, alpha=spec.alpha, K=spec.b, adversary=spec.adversary, seed=spec.seed)
    lists, _, state = hamilton.model_init(cfg, rng, monitor=spec.check_invariants, trace=trace)
    built = hamilton.run_builder(state, budget_factor=spec.budget_factor)
    result = RunResult(
        GameKind.MODEL.value, spec.n, spec.b, spec.rep, spec.seed,
        "Maker" if built.success else "Breaker", built.stats.total,
        reason=built.reason, trials=built.stats.summary(),
    )
    result.hamilton_cycle = built.success
    if built.success:
        result.checks["cycle_valid"] = not hamilton.validate_hamilton_cycle(built.cycle, spec.n, state.has_edge)
    if spec.check_invariants:
        result.checks["invariants"] = built.stats.invariant_violations == 0
        result.checks["reveal_budget"] = all(
            len(r) <= cfg.k and len(set(r)) == len(r) for r in lists.revealed
        )
    if spec.check_cpstar:
        cp = hamilton.cpstar_check(built.stats, spec.n, state.theta, spec.relax)
        result.trials["cpstar"] = cp.to_dict()
    return result


# -- sweeps -------------------------------------------------------------------------------------

@dataclass
class SweepRow:
    game: str
    n: int
    b: int
    R: int
    maker_wins: int
    win_rate: float
    ci_lo: float
    ci_hi: float
    mean_rounds: float


@dataclass
class SweepReport:
    config: dict
    rows: list[SweepRow] = field(default_factory=list)
    runs: list[RunResult] = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @property
    def checks_passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "config": self.config,
            "rows": [asdict(r) for r in self.rows],
            "runs": [asdict(r) for r in self.runs],
            "checks": self.checks,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {d.get('schema_version')!r}")
        return cls(
            config=d["config"],
            rows=[SweepRow(**r) for r in d["rows"]],
            runs=[RunResult(**r) for r in d["runs"]],
            checks=d["checks"],
        )


def clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    a = (1 - level) / 2
    lo = 0.0 if k == 0 else float(beta_dist.ppf(a, k, n - k + 1))
    hi = 1.0 if k == n else float(beta_dist.ppf(1 - a, k + 1, n - k))
    return lo, hi


def _specs(cfg: SweepConfig) -> list[RunSpec]:
    kind = cfg.kind()
    alpha = cfg.alpha if cfg.alpha is not None else DEFAULT_ALPHA[kind]
    specs = []
    for n in cfg.n:
        for value in cfg.biases:
            b = cfg.resolve_bias(n, value)
            for rep in range(cfg.reps):
                specs.append(RunSpec(
                    kind=kind, n=n, b=b, rep=rep, seed=derive_seed(cfg.base_seed, n, b, rep),
                    alpha=alpha, beta=cfg.beta, theta=cfg.theta, K=cfg.K, breaker=cfg.breaker,
                    adversary=cfg.adversary, relax=cfg.relax, budget_factor=cfg.budget_factor,
                    check_expansion=cfg.check_expansion, check_cpstar=cfg.check_cpstar,
                    check_invariants=cfg.check_invariants,
                ))
    return specs


def sweep(cfg: SweepConfig) -> SweepReport:
    """Run ``reps`` games per ``(n, b)``; the report does not depend on ``workers``."""
    cfg.validate()
    specs = _specs(cfg)
    log.info("sweep %s: %d runs on %d worker(s)", cfg.kind().value, len(specs), cfg.workers)
    if cfg.workers > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run_game, specs, chunksize=1))
    else:
        results = [run_game(s) for s in specs]
    results.sort(key=lambda r: (r.n, r.b, r.rep))
    report = SweepReport(config=cfg.to_dict(), runs=results)
    groups: dict[tuple[int, int], list[RunResult]] = {}
    for r in results:
        groups.setdefault((r.n, r.b), []).append(r)
    for (n, b), runs in groups.items():
        wins = sum(r.maker_won for r in runs)
        lo, hi = clopper_pearson(wins, len(runs))
        report.rows.append(SweepRow(
            game=cfg.kind().value, n=n, b=b, R=len(runs), maker_wins=wins,
            win_rate=wins / len(runs), ci_lo=lo, ci_hi=hi,
            mean_rounds=sum(r.rounds for r in runs) / len(runs),
        ))
    names = sorted({k for r in results for k in r.checks})
    for name in names:
        report.checks[name] = all(r.checks.get(name, True) for r in results)
    return report


# -- threshold ------------------------------------------------------------------------------------

class InsufficientPoints(ValueError):
    pass


@dataclass
class ThresholdEstimate:
    n: int
    b_hat: int | None
    ratio: float | None
    censored: str | None
    biases: list[int]
    win_rates: list[float]
    regularized: list[float]
    intervals: list[tuple[float, float]]


def pav_nonincreasing(values: list[float], weights: list[float]) -> list[float]:
    """Weighted least-squares non-increasing fit (pool adjacent violators)."""
    blocks: list[list[float]] = []  # [mean, weight, count]
    for v, w in zip(values, weights):
        blocks.append([v, w, 1])
        while len(blocks) > 1 and blocks[-2][0] < blocks[-1][0]:
            m2, w2, c2 = blocks.pop()
            m1, w1, c1 = blocks.pop()
            blocks.append([(m1 * w1 + m2 * w2) / (w1 + w2), w1 + w2, c1 + c2])
    out: list[float] = []
    for m, _, c in blocks:
        out.extend([m] * c)
    return out


def estimate_threshold(report: SweepReport, n: int) -> ThresholdEstimate:
    """Smallest swept bias whose monotone-regularized Maker win rate drops below 1/2."""
    rows = sorted((r for r in report.rows if r.n == n), key=lambda r: r.b)
    if len(rows) < 3:
        raise InsufficientPoints(f"need at least 3 bias points at n={n}, have {len(rows)}")
    rates = [r.win_rate for r in rows]
    fit = pav_nonincreasing(rates, [r.R for r in rows])
    b_hat = next((r.b for r, f in zip(rows, fit) if f < 0.5), None)
    censored = None
    if b_hat is None:
        censored = "above"
    elif b_hat == rows[0].b:
        censored = "below"
    return ThresholdEstimate(
        n=n,
        b_hat=b_hat,
        ratio=None if b_hat is None else b_hat * math.log(n) / n,
        censored=censored,
        biases=[r.b for r in rows],
        win_rates=rates,
        regularized=fit,
        intervals=[(r.ci_lo, r.ci_hi) for r in rows],
    )


# -- files -------------------------------------------------------------------------------------------

def rows_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.game, r.n, r.b, r.R, r.maker_wins, repr(r.win_rate), repr(r.ci_lo), repr(r.ci_hi), repr(r.mean_rounds)])
    return buf.getvalue()


def write_report(report: SweepReport, path: str | Path) -> None:
    path = Path(path)
    try:
        if path.suffix == ".csv":
            path.write_text(rows_to_csv(report.rows))
        else:
            path.write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def load_report(path: str | Path) -> SweepReport:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read report {path}: {exc}") from exc
    if path.suffix == ".csv":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"{path}: unexpected CSV header {reader.fieldnames}")
        rows = [
            SweepRow(
                game=d["game"], n=int(d["n"]), b=int(d["b"]), R=int(d["R"]),
                maker_wins=int(d["maker_wins"]), win_rate=float(d["win_rate"]),
                ci_lo=float(d["ci_lo"]), ci_hi=float(d["ci_hi"]), mean_rounds=float(d["mean_rounds"]),
            )
            for d in reader
        ]
        return SweepReport(config={}, rows=rows)
    return SweepReport.from_dict(json.loads(text))


def sweep_config_from_dict(d: dict[str, Any]) -> SweepConfig:
    known = {f.name for f in fields(SweepConfig)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return SweepConfig(**d)
