import warnings

import numpy as np
import pytest

from harmonic_learning.ftrl import (CHUNK, AlgoConfig, DivergenceError, StepSizeWarning, average_joint,
                                    convergence_diagnostics, discrete_regret, energy_sequence, max_step_size,
                                    parse_mode, regret_bound, run_ftrl, run_ftrl_plus, start_ranges,
                                    summability_check, template_residual)
from harmonic_learning.flow import split
from harmonic_learning.game import FiniteGame
from harmonic_learning.harmonic import find_harmonic_measure, generate_harmonic, random_measure
from harmonic_learning.regularizers import RegularizerSpec

from reference import ftrl_plus_path

Y0 = [[0.5, 0.0], [0.5, 0.0]]


def test_parse_mode():
    assert parse_mode("vanilla") == (0.0, 0.0)
    assert parse_mode("extra") == (1.0, 0.0)
    assert parse_mode("optimistic") == (0.0, 1.0)
    assert parse_mode("mixed:0.25") == (0.25, 0.75)
    assert parse_mode(0.5) == (0.5, 0.5)
    for bad in ("sideways", 1.5, "mixed:-1"):
        with pytest.raises(ValueError):
            parse_mode(bad)


def test_config_validation():
    with pytest.raises(ValueError):
        AlgoConfig(horizon=0)
    with pytest.raises(ValueError):
        AlgoConfig(learning_rate=-1.0).etas(2)
    with pytest.raises(ValueError):
        AlgoConfig(mode=["extra"]).weights(2)


@pytest.mark.parametrize("mode, per_step", [("vanilla", 1), ("optimistic", 1), ("extra", 2),
                                            ("mixed:0.3", 2), (["extra", "optimistic"], 2)])
@pytest.mark.parametrize("kind", ["entropic", "euclidean"])
def test_kernel_matches_reference(mode, per_step, kind):
    shape = (2, 3)
    game = generate_harmonic(shape, random_measure(shape, 2), 2)
    spec = RegularizerSpec.for_game(kind, shape)
    y0 = [np.array([0.2, -0.1]), np.array([0.0, 0.3, -0.4])]
    cfg = AlgoConfig(mode, [0.05, 0.08], 60, initial_scores=y0)
    run = run_ftrl_plus(game, spec, cfg)
    w_cur, w_past = cfg.weights(2)
    scores, leads, evals = ftrl_plus_path(game, spec, y0, cfg.etas(2), w_cur, w_past, 60)
    full = run.full_scores()
    for n in (0, 1, 30, 60):
        assert np.allclose(full[n], np.concatenate(scores[n]), atol=1e-12)
    for n in (0, 29, 59):
        assert np.allclose(run.lead_states[n], np.concatenate(leads[n]), atol=1e-12)
    assert run.evaluations == evals == per_step * 60


def test_scores_are_pinned(pennies):
    spec = RegularizerSpec.for_game("entropic", (2, 2))
    run = run_ftrl_plus(pennies, spec, AlgoConfig("optimistic", 0.03, 200, initial_scores=Y0))
    assert np.all(run.base_scores[:, [0, 2]] == 0)
    # the leading score of a step uses the same shift as its base score
    lead_full = run.full_scores(run.lead_scores)
    assert np.allclose(lead_full - run.full_scores()[:-1], 0.03 * run.signals, atol=1e-12)


def test_run_spans_chunks(pennies):
    spec = RegularizerSpec.for_game("entropic", (2, 2))
    steps = CHUNK + 1000
    run = run_ftrl_plus(pennies, spec, AlgoConfig("optimistic", 0.01, steps, initial_scores=Y0))
    assert run.steps == steps and len(run.base_states) == steps + 1
    short = run_ftrl_plus(pennies, spec, AlgoConfig("optimistic", 0.01, 200, initial_scores=Y0))
    assert np.array_equal(short.base_states, run.base_states[:201])


def test_early_stop(pennies):
    spec = RegularizerSpec.for_game("entropic", (2, 2))
    run = run_ftrl_plus(pennies, spec, AlgoConfig("optimistic", 1 / 32, 10 ** 6, initial_scores=Y0,
                                                  stop_gap=1e-4))
    assert run.status == "converged"
    assert run.nash_gaps[-1] < 1e-4 and np.all(run.nash_gaps[:-1] >= 1e-4)


def test_vanilla_lead_is_base(pennies):
    spec = RegularizerSpec.for_game("euclidean", (2, 2))
    run = run_ftrl(pennies, spec, AlgoConfig("vanilla", 0.05, 100, initial_scores=Y0))
    assert run.is_vanilla and not run.extrapolates
    assert np.array_equal(run.lead_states, run.base_states[:-1])
    with pytest.raises(ValueError):
        run_ftrl(pennies, spec, AlgoConfig("extra", 0.05, 10))


def test_vanilla_distance_grows_geometrically(pennies):
    eta = 0.05
    spec = RegularizerSpec.for_game("euclidean", (2, 2))
    run = run_ftrl(pennies, spec, AlgoConfig("vanilla", eta, 10 ** 4, initial_scores=[[0.55, 0.45]] * 2))
    x = run.base_states[:, [0, 2]]
    d = 0.5 * ((x - 0.5) ** 2).sum(axis=1)
    inside = np.all(run.base_states > 0, axis=1)
    interior = inside[:-1] & inside[1:]
    assert interior.sum() > 10
    assert np.abs(d[1:] - (1 + 16 * eta ** 2) * d[:-1])[interior].max() < 1e-12
    assert run.nash_gaps[-1000:].min() > 0.1


def test_divergence_guard():
    game = FiniteGame.from_matrices([[1.0, 0.0], [0.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]])
    spec = RegularizerSpec.for_game("entropic", (2, 2))
    with pytest.raises(DivergenceError) as err:
        run_ftrl_plus(game, spec, AlgoConfig("optimistic", 1e8, 100))
    assert err.value.record.status == "diverged"
    assert err.value.step == err.value.record.steps


def test_spec_must_match(pennies):
    with pytest.raises(ValueError):
        run_ftrl_plus(pennies, RegularizerSpec.for_game("entropic", (2, 3)), AlgoConfig())
    with pytest.raises(ValueError):
        run_ftrl_plus(pennies, RegularizerSpec.for_game("entropic", (2, 2)),
                      AlgoConfig(initial_scores=[[0.0, 0.0, 0.0], [0.0, 0.0]]))


def test_step_size_and_bound_by_hand(pennies, siege):
    spec = RegularizerSpec.for_game("entropic", (2, 2))
    s = find_harmonic_measure(pennies)
    # masses 2, L = 2, N = 2: 2 / (2 * 4 * 2 * 2)
    assert np.allclose(max_step_size(pennies, s, spec), 1 / 16)
    eta = 1 / 32
    h = np.log(2)
    want = h / eta + 2 * 2 / 4 * (2 * h / (eta * 2))
    assert np.allclose(regret_bound(s, spec, eta, pennies), want)
    sg = find_harmonic_measure(siege)
    # masses (6, 5), L = (3, 4): scale 2 * 4 * max(18, 20)
    assert np.allclose(max_step_size(siege, sg, spec), np.array([6, 5]) / 160)


def test_bound_warns_above_range(pennies):
    s = find_harmonic_measure(pennies)
    spec = RegularizerSpec.for_game("entropic", (2, 2))
    with pytest.warns(StepSizeWarning):
        regret_bound(s, spec, 0.1, pennies)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        regret_bound(s, spec, 1 / 16, pennies)


def test_null_game_step_size():
    game = FiniteGame.zeros((2, 2))
    s = find_harmonic_measure(game)
    spec = RegularizerSpec.for_game("entropic", (2, 2))
    assert np.all(np.isinf(max_step_size(game, s, spec)))


def test_start_ranges():
    spec = RegularizerSpec.for_game(("entropic", "euclidean"), (2, 3))
    assert np.allclose(start_ranges(spec), spec.ranges)
    r = start_ranges(spec, [np.array([1.0, 0.0]), np.zeros(3)])
    # worst vertex for the logit start is the unfavoured action
    assert r[0] == pytest.approx(np.log(1 + np.e))
    assert r[1] == pytest.approx(spec.ranges[1])


@pytest.mark.parametrize("mode", ["optimistic", "extra"])
def test_diagnostics_on_pennies(pennies, mode):
    s = find_harmonic_measure(pennies)
    spec = RegularizerSpec.for_game("entropic", (2, 2))
    eta = 1 / 32
    run = run_ftrl_plus(pennies, spec, AlgoConfig(mode, eta, 20000, initial_scores=Y0, stop_gap=1e-4))
    for which in ("base", "lead"):
        reg = discrete_regret(run, pennies, which)
        assert reg.shape == (run.steps, 2)
        assert np.all(reg <= regret_bound(s, spec, eta, pennies, Y0))
    assert template_residual(run, s, spec, eta).min() >= -1e-10
    report = summability_check(run, s, spec, eta)
    assert report.applicable and report.passed
    energy = energy_sequence(run, s, spec, eta)
    assert len(energy) == run.steps + 1 and energy[-1] < energy[0]
    conv = convergence_diagnostics(run, pennies)
    assert conv.first_below == run.steps
    assert conv.cce_gap < 0.05


def test_summability_not_applicable(pennies):
    s = find_harmonic_measure(pennies)
    spec = RegularizerSpec.for_game("entropic", (2, 2))
    run = run_ftrl(pennies, spec, AlgoConfig("vanilla", 0.01, 10))
    assert not summability_check(run, s, spec, 0.01).applicable
    run = run_ftrl_plus(pennies, spec, AlgoConfig("extra", 0.2, 10))
    assert not summability_check(run, s, spec, 0.2).applicable


def test_average_joint():
    x = [np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([[0.5, 0.5], [1.0, 0.0]])]
    joint = average_joint(x)
    assert np.allclose(joint, [[0.25, 0.25], [0.5, 0.0]])


def test_split_blocks():
    parts = split(np.arange(10.0).reshape(2, 5), (2, 3))
    assert parts[0].shape == (2, 2) and parts[1].shape == (2, 3)


def test_pennies_bound_at_full_step(pennies):
    s = find_harmonic_measure(pennies)
    spec = RegularizerSpec.for_game("entropic", (2, 2))
    assert np.allclose(regret_bound(s, spec, 1 / 16, pennies), 32 * np.log(2))
    assert np.allclose(regret_bound(s, spec, 1 / 16, pennies), 22.18, atol=5e-3)


def test_bound_homogeneity(siege):
    s = find_harmonic_measure(siege)
    spec = RegularizerSpec.for_game("entropic", (2, 2))
    eta = np.array([0.005, 0.01])
    # every term scales like 1/eta, so doubling all rates halves the bound
    assert np.allclose(regret_bound(s, spec, 2 * eta, siege), regret_bound(s, spec, eta, siege) / 2)


def test_zero_game_runs():
    game = FiniteGame.zeros((2, 3))
    s = find_harmonic_measure(game)
    spec = RegularizerSpec.for_game("entropic", (2, 3))
    y0 = [np.array([0.4, 0.0]), np.array([0.0, 1.0, -1.0])]
    runs = [run_ftrl_plus(game, spec, AlgoConfig(m, 0.1, 50, initial_scores=y0))
            for m in ("extra", "optimistic", "vanilla")]
    for a in runs[1:]:
        for name in ("base_scores", "base_states", "lead_states", "nash_gaps"):
            assert np.array_equal(getattr(a, name), getattr(runs[0], name))
    run = runs[0]
    assert np.all(run.base_states == run.base_states[0]) and np.all(run.nash_gaps == 0)
    assert np.all(discrete_regret(run, game) == 0)
    energy = energy_sequence(run, s, spec, 0.1)
    assert np.all(energy == energy[0])
    residual = template_residual(run, s, spec, 0.1)
    assert residual.min() >= 0
    report = summability_check(run, s, spec, 0.1)
    assert report.passed and np.all(report.partial_sums == 0)
    assert np.allclose(regret_bound(s, spec, 0.1, game), spec.ranges / 0.1)


def test_equilibrium_start_stays(pennies):
    spec = RegularizerSpec.for_game("euclidean", (2, 2))
    run = run_ftrl(pennies, spec, AlgoConfig("vanilla", 0.05, 100))
    assert np.all(run.base_states == 0.5)
    s = find_harmonic_measure(pennies)
    assert energy_sequence(run, s, spec, 0.05)[0] == 0
    assert np.all(discrete_regret(run, pennies) == 0)


def test_optimistic_pennies_at_full_step(pennies):
    s = find_harmonic_measure(pennies)
    spec = RegularizerSpec.for_game("entropic", (2, 2))
    eta = 1 / 16
    run = run_ftrl_plus(pennies, spec, AlgoConfig("optimistic", eta, 10 ** 5, initial_scores=Y0))
    conv = convergence_diagnostics(run, pennies)
    assert conv.first_below is not None and conv.last_gap < 1e-4
    assert np.all(discrete_regret(run, pennies) <= regret_bound(s, spec, eta, pennies, Y0))
    assert summability_check(run, s, spec, eta).passed
    energy = energy_sequence(run, s, spec, eta)
    tail = energy[-10 ** 4:]
    assert tail.max() - tail.min() < 1e-6
    assert template_residual(run, s, spec, eta).min() >= -1e-10


def test_vanilla_pennies_keeps_cycling(pennies):
    spec = RegularizerSpec.for_game("euclidean", (2, 2))
    run = run_ftrl(pennies, spec, AlgoConfig("vanilla", 0.05, 5000, initial_scores=Y0))
    assert convergence_diagnostics(run, pennies).last_gap > 0.1


def test_template_holds_for_random_bases():
    shape = (2, 2, 2)
    game = generate_harmonic(shape, random_measure(shape, 3), 3)
    s = find_harmonic_measure(game)
    spec = RegularizerSpec.for_game("entropic", shape)
    eta = max_step_size(game, s, spec) / 2
    rng = np.random.default_rng(0)
    for mode in ("extra", "optimistic"):
        run = run_ftrl_plus(game, spec, AlgoConfig(mode, eta, 5000))
        for _ in range(3):
            base = [rng.dirichlet(np.ones(2)) for _ in shape]
            assert template_residual(run, s, spec, eta, base).min() >= -1e-10
