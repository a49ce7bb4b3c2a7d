"""Find the hidden measure of the Siege game and check its strategic center.

Run: python demos/siege_structure.py
"""
import numpy as np

from harmonic_learning import io
from harmonic_learning.game import nash_gap, payoff_field
from harmonic_learning.harmonic import center_identity_residual, find_harmonic_measure, is_uniform_harmonic

game = io.bundled_game("siege")
print("row payoffs\n", game.payoffs[0])
print("column payoffs\n", game.payoffs[1])

# Siege is not harmonic with unit weights, so the detector has to search for a measure
print("uniformly harmonic:", is_uniform_harmonic(game))
s = find_harmonic_measure(game)
print("measure:", [m.round(9).tolist() for m in s.measure])
print("masses: ", s.masses.round(9).tolist())
print("center: ", [c.round(9).tolist() for c in s.center])
print(f"residual {s.residual:.1e}")

# the center is an equilibrium ...
print(f"nash gap at the center {nash_gap(game, list(s.center)):.1e}")

# ... and sum_i m_i <v_i(x), x_i - center_i> vanishes at every profile, not just there
x = [np.array([0.9, 0.1]), np.array([0.2, 0.8])]
v = payoff_field(game, x)
print("identity at one profile:",
      sum(m * vi @ (xi - ci) for m, vi, xi, ci in zip(s.masses, v, x, s.center)))
print(f"worst over 1000 random profiles {center_identity_residual(game, s, 1000):.1e}")
