"""Command-line front door.

Subcommands: ``play`` (one game), ``sweep`` (bias sweep to CSV/JSON),
``hamilton-model`` (builder on the random out-list model), ``box-game``
(box game threshold search) and ``verify`` (acceptance suites).

Settings come from flags, then a flat JSON ``--config`` file, then defaults.
The base seed falls back to ``$DIGAME_SEED`` when neither sets it.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import harness, verify
from .harness import GameKind, RunSpec, SweepConfig

SUBCOMMANDS = ("play", "sweep", "hamilton-model", "box-game", "verify")


class UsageError(Exception):
    pass


@dataclass
class CliConfig:
    """One field per flag; ``None`` means "not set" so file values and defaults can fill in."""

    subcommand: str = "play"
    config: str | None = None
    game: str | None = None
    n: list[int] | None = None
    b: list[int] | None = None
    bias_ratio: list[float] | None = None
    alpha: float | None = None
    theta: float | None = None
    K: int | None = None
    reps: int | None = None
    seed: int | None = None
    maker: str | None = None
    breaker: str | None = None
    adversary_mode: str | None = None
    budget_factor: float | None = None
    out: str | None = None
    trace: bool | None = None
    workers: int | None = None
    relax: float | None = None
    check_expansion: bool | None = None
    check_cpstar: bool | None = None
    check_invariants: bool | None = None
    suite: str | None = None
    log_level: str | None = None

    # -- flag <-> field mapping --
    @staticmethod
    def flag_name(name: str) -> str:
        return "--" + name.replace("_", "-")

    def to_argv(self) -> list[str]:
        argv = [self.subcommand]
        for f in fields(self):
            if f.name == "subcommand":
                continue
            v = getattr(self, f.name)
            if v is None or v is False:
                continue
            flag = self.flag_name(f.name)
            if v is True:
                argv.append(flag)
            elif isinstance(v, list):
                argv.append(flag)
                argv.extend(repr(x) if isinstance(x, float) else str(x) for x in v)
            else:
                argv.extend([flag, repr(v) if isinstance(v, float) else str(v)])
        return argv

    def merged(self, file_values: dict) -> "CliConfig":
        """Fill unset fields from a config file; flags win."""
        known = {f.name for f in fields(self)} - {"subcommand", "config"}
        unknown = set(file_values) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        out = CliConfig(**asdict(self))
        for k, v in file_values.items():
            if getattr(out, k) is None:
                setattr(out, k, v)
        return out


DEFAULTS = {
    "game": "strong",
    "n": [50],
    "reps": 1,
    "maker": "MakerDegree",
    "breaker": "BreakerBox",
    "adversary_mode": "uniform",
    "budget_factor": 100.0,
    "trace": False,
    "workers": 1,
    "relax": 0.25,
    "suite": "all",
    "log_level": "WARNING",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    a = common.add_argument
    a("--config", help="flat JSON file whose keys are these flags with underscores; flags override it")
    a("--game", help="strong, hamilton, box or model (default strong)")
    a("--n", type=int, nargs="+", help="number of vertices, one or more (default 50)")
    bias = common.add_mutually_exclusive_group()
    bias.add_argument("--b", type=int, nargs="+", help="absolute Breaker bias values (model: K values)")
    bias.add_argument("--bias-ratio", type=float, nargs="+",
                      help="bias as c * n / ln n, rounded up (model: K = c * ln n)")
    a("--alpha", type=float, help="alpha (default 0.5 strong/box, 0.1 hamilton/model)")
    a("--theta", type=float, help="theta: K = ceil(theta ln n) when --K is absent")
    a("--K", type=int, help="target Maker degree / out-list length")
    a("--reps", type=int, help="repetitions per (n, b) point (default 1)")
    a("--seed", type=int, help="base seed (fallback $DIGAME_SEED, then 0)")
    a("--maker", help="Maker strategy (default MakerDegree)")
    a("--breaker", help="BreakerBox, BreakerRandom or BreakerMaxDegree (default BreakerBox)")
    a("--adversary-mode", help="model candidate sets: uniform, block or targeted (default uniform)")
    a("--budget-factor", type=float, help="builder gives up after this many reveals per vertex (default 100)")
    a("--out", help="output path: .csv for the sweep table, anything else gets the JSON report")
    a("--trace", action="store_true", default=None, help="write the move trace next to --out (or to stdout)")
    a("--workers", type=int, help="worker processes (default 1); results do not depend on it")
    a("--relax", type=float, help="CPstar monitor relaxation factor in (0, 1] (default 0.25)")
    a("--check-expansion", action="store_true", default=None, help="sampled expansion check after the degree phase")
    a("--check-cpstar", action="store_true", default=None, help="CPstar monitor on builder snapshots")
    a("--check-invariants", action="store_true", default=None, help="builder invariants at every step")
    a("--suite", help=f"verify suite: {', '.join(sorted(verify.SUITES))} (default all)")
    a("--log-level", help="DEBUG, INFO, WARNING or ERROR (default WARNING)")

    parser = argparse.ArgumentParser(prog="digame", description="Biased Maker-Breaker games on the complete digraph.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("play", parents=[common], help="play one game and print its outcome")
    sub.add_parser("sweep", parents=[common], help="sweep bias values and write a report")
    sub.add_parser("hamilton-model", parents=[common], help="run the Hamilton builder on random out-lists")
    sub.add_parser("box-game", parents=[common], help="locate the box game's critical bias")
    sub.add_parser("verify", parents=[common], help="run acceptance suites")
    return parser


def parse_cli(argv: list[str]) -> CliConfig:
    ns = build_parser().parse_args(argv)
    return CliConfig(**{f.name: getattr(ns, f.name) for f in fields(CliConfig)})


def resolve(cfg: CliConfig) -> CliConfig:
    """Apply the config file, ``$DIGAME_SEED`` and defaults."""
    if cfg.config is not None:
        path = Path(cfg.config)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise UsageError(f"config file not found: {path}") from None
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError(f"config {path} must hold a JSON object")
        cfg = cfg.merged(data)
    if cfg.seed is None:
        env = os.environ.get("DIGAME_SEED")
        if env is not None:
            try:
                cfg.seed = int(env)
            except ValueError:
                raise UsageError(f"DIGAME_SEED must be an integer, got {env!r}") from None
        else:
            cfg.seed = 0
    if cfg.subcommand == "hamilton-model" and cfg.game is None:
        cfg.game = "model"
    if cfg.subcommand == "box-game" and cfg.game is None:
        cfg.game = "box"
    for k, v in DEFAULTS.items():
        if getattr(cfg, k) is None:
            setattr(cfg, k, v)
    return cfg


def to_sweep_config(cfg: CliConfig) -> SweepConfig:
    try:
        kind = GameKind.parse(cfg.game)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    bias_mode = "absolute"
    if kind == GameKind.MODEL:
        if cfg.b is not None:
            biases = list(cfg.b)
        elif cfg.K is not None:
            biases = [cfg.K]
        elif cfg.bias_ratio is not None:
            biases, bias_mode = list(cfg.bias_ratio), "ratio"
        else:
            biases, bias_mode = [cfg.theta if cfg.theta is not None else 5.0], "ratio"
    elif cfg.b is not None:
        biases = list(cfg.b)
    elif cfg.bias_ratio is not None:
        biases, bias_mode = list(cfg.bias_ratio), "ratio"
    else:
        biases = [1]
    sc = SweepConfig(
        game=cfg.game, n=list(cfg.n), biases=biases, bias_mode=bias_mode, reps=cfg.reps,
        maker=cfg.maker, breaker=cfg.breaker, base_seed=cfg.seed, workers=cfg.workers,
        alpha=cfg.alpha, theta=cfg.theta, K=None if kind == GameKind.MODEL else cfg.K,
        adversary=cfg.adversary_mode, relax=cfg.relax, budget_factor=cfg.budget_factor,
        check_expansion=bool(cfg.check_expansion), check_cpstar=bool(cfg.check_cpstar),
        check_invariants=bool(cfg.check_invariants),
    )
    try:
        sc.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return sc


# -- subcommands ------------------------------------------------------------------------------

def _write(path: str, text: str) -> None:
    Path(path).write_text(text)


def cmd_play(cfg: CliConfig) -> int:
    sc = to_sweep_config(cfg)
    if len(sc.n) != 1 or len(sc.biases) != 1:
        raise UsageError("play takes a single --n and a single bias")
    spec = harness._specs(SweepConfig(**{**asdict(sc), "reps": 1}))[0]
    # play uses the seed as given rather than a derived one
    spec.seed = sc.base_seed
    if spec.kind == GameKind.STRONG and cfg.check_expansion is None:
        spec.check_expansion = True
    trace: list[str] | None = [] if cfg.trace else None
    result = harness.run_game(spec, trace)
    line = f"winner={result.winner} rounds={result.rounds} game={result.game} n={result.n} b={result.b} seed={result.seed}"
    if result.reason:
        line += f" reason={result.reason.replace(' ', '_')}"
    if result.checks:
        line += " checks=" + ",".join(f"{k}:{'ok' if v else 'FAIL'}" for k, v in sorted(result.checks.items()))
    print(line)
    if cfg.out:
        _write(cfg.out, json.dumps(asdict(result), indent=1, sort_keys=True) + "\n")
    if trace is not None:
        text = "\n".join(trace) + "\n"
        if cfg.out:
            _write(cfg.out + ".trace", text)
        else:
            sys.stdout.write(text)
    return 0 if result.checks_passed else 1


def _report_out(cfg: CliConfig, report: harness.SweepReport) -> None:
    if cfg.out:
        harness.write_report(report, cfg.out)


def cmd_sweep(cfg: CliConfig) -> int:
    sc = to_sweep_config(cfg)
    report = harness.sweep(sc)
    for r in report.rows:
        print(
            f"{r.game} n={r.n} b={r.b} R={r.R} maker_wins={r.maker_wins} "
            f"win_rate={r.win_rate:.3f} ci=[{r.ci_lo:.3f},{r.ci_hi:.3f}]"
        )
    for n in sc.n:
        try:
            est = harness.estimate_threshold(report, n)
        except harness.InsufficientPoints:
            continue
        print(_threshold_line(est))
    _report_out(cfg, report)
    status = "ok" if report.checks_passed else "FAILED"
    print(f"runs={len(report.runs)} checks={status}")
    return 0 if report.checks_passed else 1


def _threshold_line(est: harness.ThresholdEstimate) -> str:
    if est.b_hat is None:
        return f"threshold n={est.n} b0=censored-above"
    text = f"threshold n={est.n} b0={est.b_hat} ratio={est.ratio:.4f}"
    if est.censored:
        text += f" censored-{est.censored}"
    return text


def cmd_hamilton_model(cfg: CliConfig) -> int:
    if cfg.check_invariants is None:
        cfg.check_invariants = True
    if cfg.check_cpstar is None:
        cfg.check_cpstar = True
    sc = to_sweep_config(cfg)
    if sc.kind() != GameKind.MODEL:
        raise UsageError("hamilton-model only runs --game model")
    report = harness.sweep(sc)
    for r in report.rows:
        runs = [x for x in report.runs if x.n == r.n and x.b == r.b]
        T = sorted(x.trials["T"] for x in runs if x.hamilton_cycle)
        med = T[len(T) // 2] if T else 0
        print(
            f"model n={r.n} K={r.b} success={r.maker_wins}/{r.R} "
            f"median_T={med} median_T_over_n={med / r.n:.3f}"
        )
    _report_out(cfg, report)
    print(f"runs={len(report.runs)} checks={'ok' if report.checks_passed else 'FAILED'}")
    return 0 if report.checks_passed else 1


def cmd_box_game(cfg: CliConfig) -> int:
    if cfg.b is None and cfg.bias_ratio is None:
        # every integer bias in [0.5, 2] n / ln n, one n at a time
        lines = []
        reports = []
        for n in cfg.n:
            lo = math.ceil(0.5 * n / math.log(n))
            hi = max(lo + 2, math.floor(2.0 * n / math.log(n)))
            sub = CliConfig(**{**asdict(cfg), "n": [n], "b": list(range(lo, hi + 1))})
            rep = harness.sweep(to_sweep_config(sub))
            reports.append(rep)
            lines.append(_threshold_line(harness.estimate_threshold(rep, n)))
        report = harness.SweepReport(
            config=to_sweep_config(cfg).to_dict(),
            rows=[r for rep in reports for r in rep.rows],
            runs=[r for rep in reports for r in rep.runs],
        )
        for ln in lines:
            print(ln)
        _report_out(cfg, report)
        return 0
    return cmd_sweep(cfg)


def cmd_verify(cfg: CliConfig) -> int:
    try:
        results = verify.run_suite(cfg.suite, seed=cfg.seed, workers=cfg.workers, echo=print)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    passed = sum(r.passed for r in results)
    print(f"suite={cfg.suite} passed={passed}/{len(results)}")
    if cfg.out:
        _write(cfg.out, "\n".join(r.line() for r in results) + "\n")
    return 0 if passed == len(results) else 1


COMMANDS = {
    "play": cmd_play,
    "sweep": cmd_sweep,
    "hamilton-model": cmd_hamilton_model,
    "box-game": cmd_box_game,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        cfg = parse_cli(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(cfg)
        logging.basicConfig(level=getattr(logging, str(cfg.log_level).upper(), logging.WARNING),
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[cfg.subcommand](cfg)
    except UsageError as exc:
        print(f"digame: error: {exc}", file=sys.stderr)
        parser.print_help(sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
