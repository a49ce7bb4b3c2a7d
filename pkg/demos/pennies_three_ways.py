"""Matching Pennies under vanilla FTRL, optimistic FTRL and the continuous flow.

All three start from the same scores. Vanilla steps spiral out to the boundary,
the optimistic variant spirals in to the equilibrium and the flow keeps
circling on the level set of its conserved energy.

Run: python demos/pennies_three_ways.py
"""
import numpy as np

from harmonic_learning import io
from harmonic_learning.flow import continuous_regret, integrate_flow, recurrence_events
from harmonic_learning.ftrl import AlgoConfig, discrete_regret, max_step_size, regret_bound, run_ftrl_plus
from harmonic_learning.harmonic import find_harmonic_measure
from harmonic_learning.regularizers import RegularizerSpec

game = io.bundled_game("matching_pennies")
s = find_harmonic_measure(game)
spec = RegularizerSpec.for_game("entropic", game.action_counts)
eta = max_step_size(game, s, spec)[0] / 2
y0 = [np.array([0.5, 0.0]), np.array([0.5, 0.0])]
print(f"step size {eta:.5f}, start x = {np.exp(0.5) / (1 + np.exp(0.5)):.4f} on heads for both")

vanilla = run_ftrl_plus(game, spec, AlgoConfig("vanilla", eta, 20000, initial_scores=y0))
plus = run_ftrl_plus(game, spec, AlgoConfig("optimistic", eta, 20000, initial_scores=y0))

print("\n    step   vanilla gap  vanilla min prob   optimistic gap")
for n in (0, 100, 1000, 5000, 10000, 19999):
    print(f"{n + 1:8d}  {vanilla.nash_gaps[n]:12.4f}  {vanilla.lead_states[n].min():16.2e}  "
          f"{plus.nash_gaps[n]:15.2e}")

bound = regret_bound(s, spec, eta, game, y0)
print("\nregret after 20000 steps (bound {:.1f}):".format(bound[0]))
print("  vanilla   ", discrete_regret(vanilla, game)[-1].round(2))
print("  optimistic", discrete_regret(plus, game)[-1].round(2))

flow = integrate_flow(game, spec, y0, 50.0, 1e-3, s)
drift = np.abs(flow.energy - flow.energy[0]).max() / flow.energy[0]
events = recurrence_events(flow, 1e-2, 1.0)
print(f"\nflow: energy drift {drift:.1e} over t in [0, 50]")
print("returns to within 1e-2 of the start at t =", [round(t, 2) for t, _ in events])
print("continuous regret at t = 50:", continuous_regret(flow, game).round(4), f"(log 2 = {np.log(2):.4f})")
