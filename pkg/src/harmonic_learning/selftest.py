"""Invariant suite behind ``harmonic-learning selftest``."""
from __future__ import annotations

import time

import numpy as np

from . import io
from .flow import integrate_flow, recurrence_events
from .ftrl import (AlgoConfig, discrete_regret, max_step_size, regret_bound, run_ftrl, run_ftrl_plus,
                   summability_check, template_residual)
from .game import FiniteGame, _field, mixed_payoff
from .harmonic import (center_identity_residual, find_harmonic_measure, generate_harmonic,
                       measure_from_interior_equilibrium, random_measure, rng_from_seed)
from .regularizers import RegularizerSpec, fenchel_coupling, mirror


def _siege():
    s = find_harmonic_measure(io.bundled_game("siege"))
    want = [np.array([1.0, 5.0]), np.array([2.0, 3.0])]
    err = max(np.abs(m - w).max() for m, w in zip(s.measure, want))
    return err < 1e-9 and s.residual < 1e-12, f"measure error {err:.1e}, residual {s.residual:.1e}"


def _payoff_identity(samples):
    rng = rng_from_seed(11)
    worst = 0.0
    for seed in range(5):
        game = FiniteGame(rng.standard_normal((3, 2, 3, 2)))
        for _ in range(samples):
            x = [rng.dirichlet(np.ones(k)) for k in game.action_counts]
            v = _field(game, x)
            worst = max(worst, np.abs(mixed_payoff(game, x) - [vi @ xi for vi, xi in zip(v, x)]).max())
    return worst < 1e-12, f"max deviation {worst:.1e}"


def _fenchel(samples):
    rng = rng_from_seed(3)
    worst = 0.0
    ok = True
    for kind in ("entropic", "euclidean"):
        spec = RegularizerSpec.for_game(kind, (4,))
        for _ in range(samples):
            p = [rng.dirichlet(np.ones(4))]
            y, y2 = [rng.normal(0, 2, 4)], [rng.normal(0, 2, 4)]
            q = mirror(spec, y)
            lhs = fenchel_coupling(spec, p, y2)
            rhs = fenchel_coupling(spec, p, y) + fenchel_coupling(spec, q, y2) + (y2[0] - y[0]) @ (q[0] - p[0])
            worst = max(worst, abs(lhs - rhs).max())
            f = fenchel_coupling(spec, p, y)[0]
            ok &= f >= 0.5 * spec.moduli[0] * np.abs(q[0] - p[0]).sum() ** 2 - 1e-12
    return ok and worst < 1e-10, f"three-point error {worst:.1e}"


def _detector(samples):
    worst = 0.0
    for shape in ((2, 2), (2, 3), (2, 2, 2), (3, 3)):
        for seed in range(samples):
            game = generate_harmonic(shape, random_measure(shape, seed), seed)
            s = find_harmonic_measure(game)
            if s is None:
                return False, f"missed {shape} seed {seed}"
            worst = max(worst, s.residual, center_identity_residual(game, s, 20, seed))
    return worst < 1e-9, f"max residual {worst:.1e}"


def _zero_sum_bridge():
    mp = io.bundled_game("matching_pennies")
    s = measure_from_interior_equilibrium(mp, [[0.5, 0.5], [0.5, 0.5]])
    return s.residual < 1e-12, f"residual {s.residual:.1e}"


def _divergence_law():
    mp = io.bundled_game("matching_pennies")
    eta = 0.05
    spec = RegularizerSpec.for_game("euclidean", (2, 2))
    run = run_ftrl(mp, spec, AlgoConfig("vanilla", eta, 10000, initial_scores=[[0.55, 0.45], [0.55, 0.45]]))
    x = run.base_states[:, [0, 2]]
    d = 0.5 * ((x - 0.5) ** 2).sum(axis=1)
    inside = np.all(run.base_states > 0, axis=1)
    interior = inside[:-1] & inside[1:]
    err = np.abs(d[1:] - (1 + 16 * eta ** 2) * d[:-1])[interior].max()
    cycling = run.nash_gaps[-1000:].min() > 0.1
    return err < 1e-12 and cycling, f"law error {err:.1e}, tail gap {run.nash_gaps[-1000:].min():.2f}"


def _flow():
    mp = io.bundled_game("matching_pennies")
    s = find_harmonic_measure(mp)
    spec = RegularizerSpec.for_game("entropic", (2, 2))
    traj = integrate_flow(mp, spec, [[0.5, 0.0], [0.5, 0.0]], 50.0, 1e-3, s)
    drift = np.abs(traj.energy - traj.energy[0]).max() / traj.energy[0]
    events = recurrence_events(traj, 1e-2, 1.0)
    return drift < 1e-6 and len(events) >= 3, f"energy drift {drift:.1e}, {len(events)} returns"


def _ftrl_plus(samples):
    worst_regret, worst_template, ok = 0.0, 0.0, True
    for shape in ((2, 2), (2, 2, 2)):
        for seed in range(samples):
            mu = random_measure(shape, seed)
            game = generate_harmonic(shape, mu, seed)
            s = find_harmonic_measure(game)
            spec = RegularizerSpec.for_game("entropic", shape)
            eta = max_step_size(game, s, spec) / 2
            run = run_ftrl_plus(game, spec, AlgoConfig("optimistic", eta, 10 ** 6, stop_gap=1e-3))
            ratio = (discrete_regret(run, game) / regret_bound(s, spec, eta, game)).max()
            worst_regret = max(worst_regret, ratio)
            worst_template = min(worst_template, template_residual(run, s, spec, eta).min())
            ok &= run.nash_gaps[-1] < 1e-3 and summability_check(run, s, spec, eta).passed
    ok &= worst_regret <= 1 and worst_template >= -1e-10
    return ok, f"regret/bound {worst_regret:.2f}, template min {worst_template:.1e}"


def _step_size():
    mp = io.bundled_game("matching_pennies")
    eta = max_step_size(mp, find_harmonic_measure(mp), RegularizerSpec.for_game("entropic", (2, 2)))
    return np.allclose(eta, 1 / 16, rtol=1e-12), f"eta {eta[0]:.6f}"


def run_selftest(quick: bool = True) -> bool:
    n = 1 if quick else 10
    checks = [
        ("siege structure", _siege),
        ("mixed payoff identity", lambda: _payoff_identity(20 * n)),
        ("fenchel coupling", lambda: _fenchel(100 * n)),
        ("detector round trip", lambda: _detector(5 * n)),
        ("zero-sum bridge", _zero_sum_bridge),
        ("step size bound", _step_size),
        ("vanilla divergence law", _divergence_law),
        ("flow conservation", _flow),
        ("extrapolated learning", lambda: _ftrl_plus(min(2 * n, 10))),
    ]
    all_ok = True
    width = max(len(name) for name, _ in checks)
    for name, check in checks:
        start = time.perf_counter()
        try:
            ok, detail = check()
        except Exception as exc:  # a crash counts as a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= bool(ok)
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {time.perf_counter() - start:6.2f}s  {detail}")
    print("all passed" if all_ok else "FAILURES")
    return all_ok
