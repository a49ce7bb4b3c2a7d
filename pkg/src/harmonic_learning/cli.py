"""Command-line front end.

Exit codes: 0 success, 1 a diagnostic failed, 2 the divergence guard fired,
64 bad usage, 65 malformed input data, 66 missing input file. Failures print a
single line ``error: <kind>: <message>`` on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .flow import NonFiniteStateError, continuous_regret, integrate_flow, recurrence_events
from .ftrl import (AlgoConfig, DivergenceError, StepSizeWarning, convergence_diagnostics,
                   discrete_regret, max_step_size, regret_bound, run_ftrl_plus, start_ranges,
                   summability_check, template_residual)
from .game import FiniteGame, GameFormatError, lipschitz_bound
from .harmonic import (HarmonicStructure, find_harmonic_measure, generate_harmonic, is_uniform_harmonic,
                       random_measure, random_scores)
from .regularizers import KINDS, RegularizerSpec

EX_DIAGNOSTIC = 1
EX_DIVERGED = 2
EX_USAGE = 64
EX_DATAERR = 65
EX_NOINPUT = 66

TEMPLATE_TOL = 1e-10
DRIFT_TOL = 1e-6


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _shape_name(counts) -> str:
    return "x".join(str(k) for k in counts)


def _regularizer(text: str, counts) -> RegularizerSpec:
    kinds = text.split(",")
    if len(kinds) == 1:
        kinds = kinds * len(counts)
    if len(kinds) != len(counts) or any(k not in KINDS for k in kinds):
        raise UsageError(f"--regularizer needs one of {KINDS} or one per player, got {text!r}")
    return RegularizerSpec.for_game(kinds, counts)


def _mode(text: str, n_players: int):
    if text in ("vanilla", "extra", "optimistic"):
        return text
    if text.startswith("mixed:"):
        alphas = [float(a) for a in text[6:].split(",")]
        if len(alphas) == 1:
            alphas = alphas * n_players
        if len(alphas) != n_players:
            raise UsageError(f"mixed mode needs 1 or {n_players} weights")
        return alphas
    raise UsageError(f"unknown mode {text!r}")


def _etas(text: str, game, structure, spec) -> np.ndarray:
    if text == "auto":
        if structure is None:
            raise UsageError("--eta auto needs a harmonic game")
        bound = max_step_size(game, structure, spec)
        return np.where(np.isfinite(bound), bound / 2, 1.0)
    vals = np.array([float(v) for v in text.split(",")])
    if vals.size not in (1, game.num_players):
        raise UsageError(f"--eta needs 1 or {game.num_players} values")
    return np.broadcast_to(vals, (game.num_players,)).copy()


def _initial(text: str | None, counts, seed: int):
    if text is None:
        return None
    if text == "random":
        return random_scores(counts, seed)
    blocks = [np.array([float(v) for v in b.split(",")]) for b in text.split(";")]
    if len(blocks) != len(counts) or any(b.shape != (k,) for b, k in zip(blocks, counts)):
        raise UsageError(f"--init needs {len(counts)} ';'-separated blocks of sizes {tuple(counts)}")
    return blocks


def _relative_drift(series: np.ndarray) -> float:
    dev = float(np.abs(series - series[0]).max())
    return dev / abs(float(series[0])) if abs(series[0]) > 1e-12 else dev


# -- subcommands -----------------------------------------------------------------


def analyze(game: FiniteGame) -> dict:
    structure = find_harmonic_measure(game)
    report = {
        "actions": list(game.action_counts),
        "uniform_harmonic": is_uniform_harmonic(game),
        "harmonic": structure is not None,
        "structure": structure.to_dict() if structure is not None else "not harmonic",
        "lipschitz": lipschitz_bound(game).tolist(),
        "max_step_size": None,
    }
    if structure is not None:
        report["max_step_size"] = {
            kind: _finite(max_step_size(game, structure, RegularizerSpec.for_game(kind, game.action_counts)))
            for kind in KINDS
        }
    return report


def _finite(arr) -> list:
    return [float(v) if np.isfinite(v) else "inf" for v in arr]


def cmd_analyze(args) -> int:
    game = io.resolve_game(args.game)
    if np.abs(game.payoffs).max() > 1e3:
        print("warning: payoffs exceed 1e3 in magnitude; detector tolerances assume O(1) payoffs",
              file=sys.stderr)
    report = analyze(game)
    report["game"] = args.game
    if args.out:
        io.write_json(args.out, report)
    else:
        print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def simulate_discrete(game, spec, structure, config: AlgoConfig, out: Path, expect_divergence=False,
                      gap_tol=1e-3, stride=1) -> tuple[dict, int]:
    summary = {"dynamic": "discrete", "evaluations": None}
    try:
        run = run_ftrl_plus(game, spec, config)
        code = 0
    except DivergenceError as exc:
        run = exc.record
        summary["divergence"] = str(exc)
        code = EX_DIVERGED
    io.write_run_csv(out / "run.csv", run, structure, spec, stride=stride)
    etas = run.etas
    conv = convergence_diagnostics(run, game)
    checks = {}
    tail = run.nash_gaps[-max(run.steps // 10, 1):]
    if expect_divergence:
        checks["non_convergence"] = bool(tail.min() > 0.1)
    else:
        checks["convergence"] = bool(conv.last_gap < gap_tol)
    regret = discrete_regret(run, game)
    summary.update(
        status=run.status, steps=run.steps, evaluations=run.evaluations,
        final_nash_gap=conv.last_gap, first_step_below_threshold=conv.first_below,
        tail_min_nash_gap=float(tail.min()), average_cce_gap=conv.cce_gap,
        regret=regret[-1].tolist(),
    )
    if structure is not None:
        limit = max_step_size(game, structure, spec)
        within = bool(np.all(etas <= limit * (1 + 1e-12)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", StepSizeWarning)
            bound = regret_bound(structure, spec, etas, game, config.initial_scores)
        summary["regret_bound"] = bound.tolist()
        summary["eta_within_bound"] = within
        if within:
            checks["regret"] = bool(np.all(regret <= bound))
        residual = template_residual(run, structure, spec, etas)
        summary["template_min_residual"] = float(residual.min())
        checks["template"] = bool(residual.min() >= -TEMPLATE_TOL)
        summ = summability_check(run, structure, spec, etas)
        summary["summability"] = {
            "applicable": summ.applicable, "reason": summ.reason, "passed": summ.passed,
            "final_sum": float(summ.partial_sums[-1]) if summ.partial_sums.size else None,
            "bound": float(summ.bound) if np.isfinite(summ.bound) else None,
        }
        if summ.applicable:
            checks["summability"] = summ.passed
    summary["checks"] = checks
    if code == 0 and not all(checks.values()):
        code = EX_DIAGNOSTIC
    return summary, code


def simulate_flow(game, spec, structure, y0, horizon, dt, epsilon, refractory, out: Path,
                  stride=1) -> tuple[dict, int]:
    traj = integrate_flow(game, spec, y0, horizon, dt, structure)
    io.write_flow_csv(out / "trajectory.csv", traj, stride=stride)
    checks = {}
    summary = {"dynamic": "flow", "steps": len(traj) - 1, "dt": dt}
    if traj.energy is not None:
        summary["energy_relative_drift"] = _relative_drift(traj.energy)
        checks["energy"] = summary["energy_relative_drift"] < DRIFT_TOL
    if traj.logit is not None:
        summary["logit_relative_drift"] = _relative_drift(traj.logit)
        checks["logit_constant"] = summary["logit_relative_drift"] < DRIFT_TOL
    regret = continuous_regret(traj, game, running=True)
    ranges = start_ranges(spec, y0)
    summary["regret"] = regret[-1].tolist()
    summary["regret_max"] = regret.max(axis=0).tolist()
    summary["regret_bound"] = ranges.tolist()
    checks["regret"] = bool(np.all(regret <= ranges + 1e-3))
    events = recurrence_events(traj, epsilon, refractory)
    summary["recurrence_events"] = [{"t": t, "distance": d} for t, d in events]
    summary["checks"] = checks
    return summary, 0 if all(checks.values()) else EX_DIAGNOSTIC


def cmd_simulate(args) -> int:
    game = io.resolve_game(args.game)
    counts = game.action_counts
    spec = _regularizer(args.regularizer, counts)
    structure = find_harmonic_measure(game)
    y0 = _initial(args.init, counts, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config_doc = {"game": args.game, "regularizer": list(spec.kinds), "seed": args.seed,
                  "initial_scores": None if y0 is None else [b.tolist() for b in y0]}
    if args.dynamic == "flow":
        horizon = args.horizon if args.horizon is not None else 100.0
        config_doc.update(dynamic="flow", horizon=horizon, dt=args.dt, epsilon=args.epsilon,
                          refractory=args.refractory)
        io.write_json(out / "config.json", config_doc)
        summary, code = simulate_flow(game, spec, structure, y0, horizon, args.dt, args.epsilon,
                                      args.refractory, out, args.stride)
    else:
        horizon = int(args.horizon) if args.horizon is not None else 10000
        etas = _etas(args.eta, game, structure, spec)
        mode = _mode(args.mode, game.num_players)
        config = AlgoConfig(mode=mode, learning_rate=etas, horizon=horizon, initial_scores=y0,
                            stop_gap=args.stop_gap)
        config_doc.update(dynamic="discrete", mode=mode, learning_rate=etas.tolist(), horizon=horizon,
                          stop_gap=args.stop_gap)
        io.write_json(out / "config.json", config_doc)
        summary, code = simulate_discrete(game, spec, structure, config, out, args.expect_divergence,
                                          args.gap_tol, args.stride)
    summary["harmonic"] = structure is not None
    io.write_json(out / "summary.json", summary)
    if code == EX_DIVERGED:
        print(f"error: diverged: {summary['divergence']}", file=sys.stderr)
    elif code:
        failed = ",".join(k for k, ok in summary["checks"].items() if not ok)
        print(f"error: diagnostics: failed {failed}", file=sys.stderr)
    return code


def cmd_generate(args) -> int:
    counts = tuple(args.shape)
    if len(counts) < 2 or any(k < 2 for k in counts):
        raise UsageError("shape needs at least two players with at least two actions each")
    kind = "random" if args.random else "uniform"
    measure = random_measure(counts, args.seed) if args.random else [np.ones(k) for k in counts]
    game = generate_harmonic(counts, measure, args.seed)
    structure = HarmonicStructure.from_measure(game, measure)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"harmonic_{_shape_name(counts)}_{kind}_seed{args.seed}"
    io.write_game(out / f"{stem}.json", game)
    (out / f"{stem}.structure.json").write_text(structure.to_json() + "\n")
    print(out / f"{stem}.json")
    return 0


def figure1(out: Path, seed: int = 1) -> dict:
    """Trajectory bundles for vanilla, extrapolated and continuous learning."""
    summary = {}
    mp = io.bundled_game("matching_pennies")
    mp_structure = find_harmonic_measure(mp)
    spec = RegularizerSpec.for_game("entropic", mp.action_counts)
    eta = max_step_size(mp, mp_structure, spec) / 2
    y0 = [np.array([0.5, 0.0]), np.array([0.5, 0.0])]

    bundle = out / "a_matching_pennies"
    bundle.mkdir(parents=True, exist_ok=True)
    io.write_game(bundle / "game.json", mp)
    vanilla = run_ftrl_plus(mp, spec, AlgoConfig("vanilla", eta, 20000, initial_scores=y0))
    io.write_run_csv(bundle / "vanilla.csv", vanilla, mp_structure, spec, stride=10)
    plus = run_ftrl_plus(mp, spec, AlgoConfig("optimistic", eta, 20000, initial_scores=y0))
    io.write_run_csv(bundle / "ftrl_plus.csv", plus, mp_structure, spec, stride=10)
    flow = integrate_flow(mp, spec, y0, 20.0, 1e-3, mp_structure)
    io.write_flow_csv(bundle / "flow.csv", flow, stride=10)
    events = recurrence_events(flow, 1e-2, 1.0)
    summary["a_matching_pennies"] = {
        "vanilla_min_probability": float(vanilla.base_states[-1].min()),
        "vanilla_final_nash_gap": float(vanilla.nash_gaps[-1]),
        "ftrl_plus_final_nash_gap": float(plus.nash_gaps[-1]),
        "flow_first_return": events[0] if events else None,
    }

    game = generate_harmonic((2, 2, 2), [np.ones(2)] * 3, seed)
    structure = find_harmonic_measure(game)
    spec = RegularizerSpec.for_game("entropic", game.action_counts)
    eta = max_step_size(game, structure, spec) / 2
    y0 = random_scores(game.action_counts, seed)
    vanilla = run_ftrl_plus(game, spec, AlgoConfig("vanilla", eta, 20000, initial_scores=y0))
    plus = run_ftrl_plus(game, spec, AlgoConfig("optimistic", eta, 10**6, initial_scores=y0, stop_gap=1e-4))
    for name, run in (("b_harmonic_2x2x2_vanilla", vanilla), ("c_harmonic_2x2x2_ftrl_plus", plus)):
        bundle = out / name
        bundle.mkdir(parents=True, exist_ok=True)
        io.write_game(bundle / "game.json", game)
        (bundle / "structure.json").write_text(structure.to_json() + "\n")
        io.write_run_csv(bundle / "run.csv", run, structure, spec, stride=max(run.steps // 5000, 1))
        summary[name] = {"steps": run.steps, "final_nash_gap": float(run.nash_gaps[-1])}
    io.write_json(out / "summary.json", summary)
    return summary


def cmd_figure1(args) -> int:
    summary = figure1(Path(args.out), args.seed)
    for name, info in summary.items():
        print(name, info)
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return 0 if run_selftest(quick=not args.full) else EX_DIAGNOSTIC


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="harmonic-learning", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="harmonic structure, Lipschitz bounds and step sizes of a game")
    p.add_argument("game", nargs="?", help="game JSON file (or a bundled game name)")
    p.add_argument("--game", dest="game_opt")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="run a learning dynamic and its diagnostics")
    p.add_argument("--game", required=True)
    p.add_argument("--dynamic", choices=("discrete", "flow"), default="discrete")
    p.add_argument("--regularizer", default="entropic")
    p.add_argument("--mode", default="optimistic", help="vanilla, extra, optimistic or mixed:<alpha list>")
    p.add_argument("--eta", default="auto", help="'auto' (half the guaranteed bound) or a comma list")
    p.add_argument("--horizon", type=float, help="steps (discrete) or time (flow)")
    p.add_argument("--dt", type=float, default=1e-2)
    p.add_argument("--epsilon", type=float, default=1e-2)
    p.add_argument("--refractory", type=float, default=1.0)
    p.add_argument("--init", help="initial scores 'a,b;c,d' per player, or 'random'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stop-gap", type=float, help="stop once the leading-state gap is below this")
    p.add_argument("--gap-tol", type=float, default=1e-3)
    p.add_argument("--stride", type=int, default=1, help="write every k-th row")
    p.add_argument("--expect-divergence", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("generate", help="random harmonic game for a given shape")
    p.add_argument("shape", type=int, nargs="+")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--uniform", action="store_true")
    group.add_argument("--random", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("figure1", help="vanilla vs extrapolated vs continuous trajectory bundles")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_figure1)

    p = sub.add_parser("selftest", help="run the invariant suite and print a pass/fail table")
    p.add_argument("--full", action="store_true", help="use the full sample sizes")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "analyze":
            args.game = args.game or args.game_opt
            if not args.game:
                raise UsageError("analyze needs a game file")
        return args.func(args)
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return EX_USAGE
    except GameFormatError as exc:
        print(f"error: parse: {exc}", file=sys.stderr)
        return EX_DATAERR
    except FileNotFoundError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EX_NOINPUT
    except NonFiniteStateError as exc:
        print(f"error: nonfinite: {exc}", file=sys.stderr)
        return EX_DIVERGED
    except ValueError as exc:
        print(f"error: invalid: {exc}", file=sys.stderr)
        return EX_DATAERR


if __name__ == "__main__":
    sys.exit(main())
