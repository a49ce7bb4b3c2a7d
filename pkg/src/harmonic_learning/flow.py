"""Continuous-time regularized learning in score space, integrated with RK4."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import _kernels
from .game import FiniteGame, _field
from .harmonic import HarmonicStructure
from .regularizers import RegularizerSpec, fenchel_coupling, mirror


class NonFiniteStateError(FloatingPointError):
    def __init__(self, step: int):
        super().__init__(f"non-finite state at step {step}")
        self.step = step


@dataclass(frozen=True, eq=False)
class FlowTrajectory:
    t: np.ndarray
    y: list[np.ndarray]
    x: list[np.ndarray]
    energy: np.ndarray | None = None
    logit: np.ndarray | None = None

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def __len__(self):
        return len(self.t)


def kind_codes(spec: RegularizerSpec) -> np.ndarray:
    return np.array([0 if k == "entropic" else 1 for k in spec.kinds], dtype=np.int64)


def flat_scores(y, action_counts) -> np.ndarray:
    if y is None:
        return np.zeros(sum(action_counts))
    blocks = [np.asarray(b, dtype=float) for b in y]
    if len(blocks) != len(action_counts) or any(b.shape != (k,) for b, k in zip(blocks, action_counts)):
        raise ValueError(f"initial scores do not match action counts {tuple(action_counts)}")
    return np.concatenate(blocks)


def split(arr: np.ndarray, action_counts) -> list[np.ndarray]:
    return np.split(arr, np.cumsum(action_counts)[:-1], axis=-1)


def integrate_flow(game: FiniteGame, spec: RegularizerSpec, y0=None, horizon: float = 10.0,
                   dt: float = 1e-2, structure: HarmonicStructure | None = None) -> FlowTrajectory:
    """Integrate ``dy/dt = v(Q(y))`` from ``y0`` (default 0) with fixed-step RK4."""
    if not dt > 0 or not horizon >= dt:
        raise ValueError("need dt > 0 and horizon >= dt")
    counts = game.action_counts
    if spec.action_counts != counts:
        raise ValueError("regularizer spec does not match the game's action counts")
    steps = int(round(horizon / dt))
    utility, index, offsets = _kernels.flatten_game(game)
    n = offsets[-1]
    ys = np.empty((steps + 1, n))
    xs = np.empty((steps + 1, n))
    done, status = _kernels.rk4(flat_scores(y0, counts), float(dt), steps,
                                utility, index, offsets, kind_codes(spec), ys, xs)
    if status != _kernels.OK:
        raise NonFiniteStateError(done + 1)

    y, x = split(ys, counts), split(xs, counts)
    energy = logit = None
    if structure is not None:
        energy = conserved_energy(structure, spec, y)
        if all(k == "entropic" for k in spec.kinds):
            logit = logit_constant(structure, x)
    return FlowTrajectory(dt * np.arange(steps + 1), y, x, energy, logit)


def conserved_energy(structure: HarmonicStructure, spec: RegularizerSpec, y):
    """Mass-weighted Fenchel coupling between the strategic center and the scores."""
    return structure.masses @ fenchel_coupling(spec, structure.center, y)


def logit_constant(structure: HarmonicStructure, x):
    """``prod_i prod_a x_ia ** mu_ia`` (scalar, or one value per row for batched input)."""
    total = 0.0
    for mu, xi in zip(structure.measure, x):
        xi = np.asarray(xi, dtype=float)
        if np.any(xi <= 0):
            raise ValueError("logit constant needs a fully mixed profile")
        total = total + np.log(xi) @ mu
    return np.exp(total)


def project_scorediff(y) -> list[np.ndarray]:
    """Subtract each player's first score so the benchmark coordinate is exactly 0."""
    out = []
    for yi in y:
        yi = np.asarray(yi, dtype=float)
        out.append(yi - yi[..., :1])
    return out


def scorediff_field(game: FiniteGame, spec: RegularizerSpec, z) -> list[np.ndarray]:
    """Velocity of the score differences under the flow, at difference state ``z``."""
    v = _field(game, mirror(spec, z))
    return [vi - vi[..., :1] for vi in v]


def scorediff_divergence(game: FiniteGame, spec: RegularizerSpec, z, h: float = 1e-5) -> float:
    """Central-difference divergence of the difference-space field over its free coordinates."""
    z = [np.asarray(zi, dtype=float) for zi in z]
    total = 0.0
    for i, zi in enumerate(z):
        for a in range(1, zi.shape[-1]):
            up = [b.copy() for b in z]
            down = [b.copy() for b in z]
            up[i][a] += h
            down[i][a] -= h
            total += (scorediff_field(game, spec, up)[i][a] - scorediff_field(game, spec, down)[i][a]) / (2 * h)
    return float(total)


def recurrence_events(traj: FlowTrajectory, epsilon: float, refractory: float) -> list[tuple[float, float]]:
    """Local minima of the l1 distance to the initial strategy that dip below ``epsilon``.

    Consecutive hits (and the first hit, measured from t0) are at least
    ``refractory`` apart.
    """
    if not (epsilon > 0 and refractory > 0):
        raise ValueError("epsilon and refractory must be positive")
    dist = sum(np.abs(xi - xi[0]).sum(axis=-1) for xi in traj.x)
    t = traj.t
    interior = np.arange(1, len(t) - 1)
    is_min = (dist[interior] <= dist[interior - 1]) & (dist[interior] <= dist[interior + 1])
    candidates = interior[is_min & (dist[interior] < epsilon)]
    slack = 1e-9 * max(traj.dt, 1.0)
    events = []
    last = t[0]
    for k in candidates:
        if t[k] - last >= refractory - slack:
            events.append((float(t[k]), float(dist[k])))
            last = t[k]
    return events


def continuous_regret(traj: FlowTrajectory, game: FiniteGame, running: bool = False) -> np.ndarray:
    """Trapezoid regret against the best fixed pure action.

    Returns one value per player, or with ``running=True`` an array of shape
    ``(len(traj), N)`` holding the regret at every grid time.
    """
    v = _field(game, traj.x)
    out = []
    for vi, xi in zip(v, traj.x):
        inst = vi - np.sum(vi * xi, axis=-1, keepdims=True)
        cum = cumulative_trapezoid(inst, traj.t, axis=0, initial=0.0)
        out.append(cum.max(axis=-1))
    reg = np.stack(out, axis=-1)
    return reg if running else reg[-1]
