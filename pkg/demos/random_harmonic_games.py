"""Generate harmonic games, recover their measures and learn their equilibria.

For a few seeds and shapes: draw a random measure, project Gaussian payoffs
onto the games that are harmonic for it, let the detector find a measure
again, then run extra-gradient FTRL at half the guaranteed step size until
the Nash gap drops below 1e-3 or 10^6 steps pass. There is no rate guarantee,
and the 3x3 games can be slow.

Run: python demos/random_harmonic_games.py
"""
import numpy as np

from harmonic_learning.ftrl import (AlgoConfig, discrete_regret, max_step_size, regret_bound, run_ftrl_plus,
                                    summability_check, template_residual)
from harmonic_learning.game import FiniteGame
from harmonic_learning.harmonic import find_harmonic_measure, generate_harmonic, random_measure, rng_from_seed
from harmonic_learning.regularizers import RegularizerSpec

print("shape      seed  residual  steps    final gap  regret/bound  template min  summable")
for shape in [(2, 2), (3, 3), (2, 2, 2)]:
    for seed in range(3):
        game = generate_harmonic(shape, random_measure(shape, seed), seed)
        s = find_harmonic_measure(game)
        spec = RegularizerSpec.for_game("entropic", shape)
        eta = max_step_size(game, s, spec) / 2
        run = run_ftrl_plus(game, spec, AlgoConfig("extra", eta, 10 ** 6, stop_gap=1e-3))
        ratio = (discrete_regret(run, game) / regret_bound(s, spec, eta, game)).max()
        print(f"{str(shape):10s} {seed:4d}  {s.residual:8.1e}  {run.steps:7d}  {run.nash_gaps[-1]:9.2e}  {ratio:12.3f}  "
              f"{template_residual(run, s, spec, eta).min():12.1e}  {summability_check(run, s, spec, eta).passed}")

# a small perturbation destroys the structure and the detector notices
game = generate_harmonic((2, 2, 2), random_measure((2, 2, 2), 0), 0)
noisy = FiniteGame(game.payoffs + 1e-2 * rng_from_seed(99).standard_normal(game.payoffs.shape))
print("\nperturbed game harmonic:", find_harmonic_measure(noisy) is not None)
