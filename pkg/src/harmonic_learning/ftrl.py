"""Discrete-time FTRL and its extrapolated variant, with run diagnostics.

Every step ``n`` goes through a leading state before updating the base state::

    Y_lead = Y_n + eta * (w_cur * v(X_n) + w_past * v(X_prev_lead))
    Y_next = Y_n + eta * v(Q(Y_lead))

Extra-gradient uses weights (1, 0), optimistic (0, 1), a mixed mode with
parameter alpha uses (alpha, 1 - alpha) and vanilla FTRL uses (0, 0), which
makes the leading state coincide with the base state.
"""
from __future__ import annotations

import string
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .flow import NonFiniteStateError, flat_scores, kind_codes, split
from .game import FiniteGame, _field, cce_gap, lipschitz_bound
from .harmonic import HarmonicStructure
from .regularizers import RegularizerSpec, fenchel_coupling

CHUNK = 1 << 16
GUARD = 1e9


class DivergenceError(RuntimeError):
    """Scores left the guard box; ``record`` holds the run up to that point."""

    def __init__(self, step: int, record: "RunRecord"):
        super().__init__(f"scores exceeded {GUARD:g} in sup norm at step {step}")
        self.step = step
        self.record = record


class StepSizeWarning(UserWarning):
    pass


def parse_mode(mode) -> tuple[float, float]:
    """Map one player's mode to the weights on (v(X_n), v(X_prev_lead))."""
    if isinstance(mode, (int, float)) and not isinstance(mode, bool):
        alpha = float(mode)
    elif mode == "vanilla":
        return 0.0, 0.0
    elif mode == "extra":
        alpha = 1.0
    elif mode == "optimistic":
        alpha = 0.0
    elif isinstance(mode, str) and mode.startswith("mixed:"):
        alpha = float(mode.split(":", 1)[1])
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"extrapolation weight must lie in [0, 1], got {alpha}")
    return alpha, 1.0 - alpha


@dataclass(frozen=True)
class AlgoConfig:
    mode: str | float | Sequence = "optimistic"
    learning_rate: float | Sequence[float] = 0.01
    horizon: int = 1000
    # extensions: a nonzero starting score and early stopping on the leading-state gap
    initial_scores: Sequence | None = None
    stop_gap: float | None = None

    def __post_init__(self):
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError("horizon must be a positive integer")

    def weights(self, num_players: int) -> tuple[np.ndarray, np.ndarray]:
        modes = [self.mode] * num_players if isinstance(self.mode, (str, int, float)) else list(self.mode)
        if len(modes) != num_players:
            raise ValueError(f"need one mode per player, got {len(modes)}")
        w = np.array([parse_mode(m) for m in modes])
        return w[:, 0].copy(), w[:, 1].copy()

    def etas(self, num_players: int) -> np.ndarray:
        eta = np.broadcast_to(np.asarray(self.learning_rate, dtype=float), (num_players,)).copy()
        if not np.all(eta > 0) or not np.all(np.isfinite(eta)):
            raise ValueError("learning rates must be positive and finite")
        return eta


@dataclass(frozen=True, eq=False)
class RunRecord:
    """Flattened run history; row ``k`` of the per-step arrays is step ``n = k + 1``.

    base_scores/base_states have one extra final row (the state after the last
    step). ``half_state`` is the leading state before the first step.

    Scores are stored with each player's first entry pinned to 0; the removed
    constant of step n is ``score_shift[n - 1, i]`` and applies to both the base
    and the leading score of that step. ``full_scores`` adds it back.
    """

    game: FiniteGame
    etas: np.ndarray
    w_cur: np.ndarray
    w_past: np.ndarray
    base_scores: np.ndarray
    base_states: np.ndarray
    score_shift: np.ndarray
    lead_scores: np.ndarray
    lead_states: np.ndarray
    signals: np.ndarray
    lead_signals: np.ndarray
    nash_gaps: np.ndarray
    half_state: np.ndarray
    evaluations: int
    status: str = "ok"
    extras: dict = field(default_factory=dict)

    @property
    def action_counts(self) -> tuple[int, ...]:
        return self.game.action_counts

    @property
    def steps(self) -> int:
        return len(self.nash_gaps)

    @property
    def is_vanilla(self) -> bool:
        return bool(np.all(self.w_cur == 0) and np.all(self.w_past == 0))

    @property
    def extrapolates(self) -> bool:
        """Every player extrapolates with weights summing to one."""
        return bool(np.allclose(self.w_cur + self.w_past, 1.0))

    def full_scores(self, arr: np.ndarray | None = None) -> np.ndarray:
        """Unpinned scores: base scores by default, or ``lead_scores`` if passed."""
        if arr is None:
            arr = self.base_scores
        shift = self.score_shift[: len(arr)]
        return arr + np.repeat(shift, self.action_counts, axis=1)

    def blocks(self, arr: np.ndarray) -> list[np.ndarray]:
        return split(arr, self.action_counts)

    @property
    def prev_lead_states(self) -> np.ndarray:
        """X_{n-1/2} for every step."""
        return np.vstack([self.half_state[None], self.lead_states[:-1]])

    @property
    def stepnorm2_lead(self) -> np.ndarray:
        """sum_i ||X_{n+1/2,i} - X_{n,i}||_1^2 per step."""
        return _block_sq(self.lead_states - self.base_states[:-1], self.action_counts)

    @property
    def stepnorm2_base(self) -> np.ndarray:
        """sum_i ||X_{n+1,i} - X_{n+1/2,i}||_1^2 per step."""
        return _block_sq(self.base_states[1:] - self.lead_states, self.action_counts)


def _block_sq(diff: np.ndarray, counts) -> np.ndarray:
    return sum(np.abs(b).sum(axis=-1) ** 2 for b in split(diff, counts))


def run_ftrl(game: FiniteGame, spec: RegularizerSpec, config: AlgoConfig) -> RunRecord:
    """Vanilla FTRL: ``Y_{n+1} = Y_n + eta * v(Q(Y_n))``."""
    w_cur, w_past = config.weights(game.num_players)
    if np.any(w_cur) or np.any(w_past):
        raise ValueError("run_ftrl needs mode='vanilla'; use run_ftrl_plus for extrapolation")
    return run_ftrl_plus(game, spec, config)


def run_ftrl_plus(game: FiniteGame, spec: RegularizerSpec, config: AlgoConfig) -> RunRecord:
    counts = game.action_counts
    if spec.action_counts != counts:
        raise ValueError("regularizer spec does not match the game's action counts")
    n_players = game.num_players
    etas = config.etas(n_players)
    w_cur, w_past = config.weights(n_players)
    utility, index, offsets = _kernels.flatten_game(game)
    kinds = kind_codes(spec)
    n = int(offsets[-1])

    y = flat_scores(config.initial_scores, counts)
    shift = np.zeros(n_players)
    _kernels.pin(y, shift, offsets)
    x = np.empty(n)
    _kernels.mirror(y, kinds, offsets, x)
    half_state = x.copy()
    v_prev = np.empty(n)
    _kernels.field(half_state, utility, index, offsets, v_prev)
    stop_gap = -1.0 if config.stop_gap is None else float(config.stop_gap)

    names = ("base_scores", "score_shift", "lead_scores", "lead_states", "base_states", "signals",
             "lead_signals")
    parts = {k: [] for k in names}
    gaps = []
    evaluations = 0
    remaining = int(config.horizon)
    status = _kernels.OK
    done_total = 0
    while remaining > 0:
        size = min(remaining, CHUNK)
        buf = {k: np.empty((size, n_players if k == "score_shift" else n)) for k in names}
        gap_buf = np.empty(size)
        done, evals, status = _kernels.ftrl_plus(
            y, shift, x, v_prev, etas, w_cur, w_past, utility, index, offsets, kinds,
            size, stop_gap, GUARD, *(buf[k] for k in names), gap_buf,
        )
        for k in names:
            parts[k].append(buf[k][:done])
        gaps.append(gap_buf[:done])
        evaluations += evals
        done_total += done
        remaining -= done
        if status != _kernels.OK or done < size or (done and gap_buf[done - 1] < stop_gap):
            break

    if status == _kernels.NONFINITE:
        raise NonFiniteStateError(done_total)
    arrays = {k: np.concatenate(v) for k, v in parts.items()}
    arrays["base_scores"] = np.vstack([arrays["base_scores"], y[None]])
    arrays["score_shift"] = np.vstack([arrays["score_shift"], shift[None]])
    arrays["base_states"] = np.vstack([arrays["base_states"], x[None]])
    gap_arr = np.concatenate(gaps)
    label = "diverged" if status == _kernels.DIVERGED else (
        "converged" if len(gap_arr) and gap_arr[-1] < stop_gap else "ok")
    record = RunRecord(game, etas, w_cur, w_past, nash_gaps=gap_arr, half_state=half_state,
                       evaluations=evaluations, status=label, **arrays)
    if status == _kernels.DIVERGED:
        raise DivergenceError(done_total, record)
    return record


# -- step sizes and regret ------------------------------------------------------


def max_step_size(game: FiniteGame, structure: HarmonicStructure, spec: RegularizerSpec) -> np.ndarray:
    """Largest learning rates covered by the constant-regret guarantee (inf for a null game)."""
    lips = lipschitz_bound(game)
    active = lips > 0
    if not np.any(active):
        return np.full(game.num_players, np.inf)
    scale = 2.0 * (game.num_players + 2) * np.max(structure.masses[active] * lips[active])
    return structure.masses * np.asarray(spec.moduli) / scale


def start_ranges(spec: RegularizerSpec, initial_scores=None) -> np.ndarray:
    """Largest coupling ``max_p F_i(p, y0_i)``; equals H_i when the start is 0."""
    if initial_scores is None:
        return spec.ranges
    out = []
    for i, (k, n) in enumerate(zip(spec.kinds, spec.action_counts)):
        sub = RegularizerSpec((k,), (spec.moduli[i],), (n,))
        # the coupling is convex in p, so a vertex attains the maximum
        out.append(fenchel_coupling(sub, [np.eye(n)], [np.asarray(initial_scores[i], dtype=float)])[0].max())
    return np.array(out)


def regret_bound(structure: HarmonicStructure, spec: RegularizerSpec, etas, game: FiniteGame,
                 initial_scores=None) -> np.ndarray:
    """``H_i/eta_i + (2 L_i/(N+2)) sum_j H_j/(eta_j L_j)``; players with L_j = 0 drop out of the sum."""
    etas = np.broadcast_to(np.asarray(etas, dtype=float), (game.num_players,))
    limit = max_step_size(game, structure, spec)
    if np.any(etas > limit * (1 + 1e-12)):
        warnings.warn("learning rate above the guaranteed range; bound shown for reference",
                      StepSizeWarning, stacklevel=2)
    h = start_ranges(spec, initial_scores)
    lips = lipschitz_bound(game)
    active = lips > 0
    coupled = np.sum(h[active] / (etas[active] * lips[active]))
    return h / etas + 2.0 * lips / (game.num_players + 2) * coupled


def discrete_regret(run: RunRecord, game: FiniteGame, which: str = "base") -> np.ndarray:
    """Running regret ``R_i(T')`` for every prefix, shape ``(steps, N)``.

    ``which="lead"`` measures it along the leading states with their payoff
    vectors instead of along the base states.
    """
    if which == "base":
        x = run.blocks(run.base_states[:-1])
        v = _field(game, x)
    elif which == "lead":
        x = run.blocks(run.lead_states)
        v = run.blocks(run.lead_signals)
    else:
        raise ValueError("which must be 'base' or 'lead'")
    out = []
    for vi, xi in zip(v, x):
        inst = vi - np.sum(vi * xi, axis=-1, keepdims=True)
        out.append(np.cumsum(inst, axis=0).max(axis=-1))
    return np.stack(out, axis=-1)


# -- energy, template and summability --------------------------------------------


def _weighted_coupling(structure, spec, etas, p, y) -> np.ndarray:
    w = structure.masses / np.asarray(etas, dtype=float)
    return w @ fenchel_coupling(spec, p, y)


def energy_sequence(run: RunRecord, structure: HarmonicStructure, spec: RegularizerSpec, etas, base=None) -> np.ndarray:
    """``E_n = sum_i (m_i/eta_i) F_i(p_i, Y_n,i)`` for n = 1 .. steps + 1 (p defaults to the center)."""
    p = structure.center if base is None else base
    return _weighted_coupling(structure, spec, etas, p, run.blocks(run.base_scores))


def template_residual(run: RunRecord, structure: HarmonicStructure, spec: RegularizerSpec, etas,
                      base=None) -> np.ndarray:
    """One-step energy bound minus the realized next energy, per step.

    The bound is E_n plus three payoff terms (progress at the leading state,
    leading-vs-current correction, current-vs-signal correction) minus the two
    coupling penalties at the leading and next states.
    """
    p = [np.asarray(b, dtype=float) for b in (structure.center if base is None else base)]
    m = structure.masses
    energy = energy_sequence(run, structure, spec, etas, p)
    base_x = run.blocks(run.base_states[:-1])
    next_x = run.blocks(run.base_states[1:])
    lead_x = run.blocks(run.lead_states)
    v_lead = run.blocks(run.lead_signals)
    g = run.blocks(run.signals)
    v_cur = _field(run.game, base_x)

    terms = np.zeros(run.steps)
    for i in range(len(m)):
        step = next_x[i] - lead_x[i]
        terms += m[i] * np.sum(v_lead[i] * (lead_x[i] - p[i]), axis=-1)
        terms += m[i] * np.sum((v_lead[i] - v_cur[i]) * step, axis=-1)
        terms += m[i] * np.sum((v_cur[i] - g[i]) * step, axis=-1)
    penalties = (_weighted_coupling(structure, spec, etas, next_x, run.blocks(run.lead_scores))
                 + _weighted_coupling(structure, spec, etas, lead_x, run.blocks(run.base_scores[:-1])))
    return energy[:-1] + terms - penalties - energy[1:]


@dataclass(frozen=True, eq=False)
class SummabilityReport:
    partial_sums: np.ndarray
    bound: float
    passed: bool
    applicable: bool
    reason: str = ""


def summability_check(run: RunRecord, structure: HarmonicStructure, spec: RegularizerSpec, etas) -> SummabilityReport:
    """Partial sums of squared extrapolation and staleness steps against their bound."""
    game = run.game
    etas = np.broadcast_to(np.asarray(etas, dtype=float), (len(structure.masses),))
    empty = np.zeros(0)
    if not run.extrapolates:
        return SummabilityReport(empty, np.nan, False, False, "mode lacks an extrapolation step")
    if np.any(etas > max_step_size(game, structure, spec) * (1 + 1e-12)):
        return SummabilityReport(empty, np.nan, False, False, "learning rate above the guaranteed range")
    lips = lipschitz_bound(game)
    scale = np.max(structure.masses * lips)
    e1 = float(energy_sequence(run, structure, spec, etas)[0])
    if scale == 0:
        bound = np.inf
    else:
        bound = 2.0 * e1 / ((game.num_players + 2) * scale)
    lead = run.stepnorm2_lead
    stale = _block_sq(run.base_states[:-1] - run.prev_lead_states, run.action_counts)
    stale[0] = 0.0
    sums = np.cumsum(lead + stale)
    return SummabilityReport(sums, bound, bool(np.all(sums <= bound + 1e-9)), True)


# -- convergence ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    gaps: np.ndarray
    last_gap: float
    first_below: int | None
    cce_gap: float


def average_joint(blocks: Sequence[np.ndarray]) -> np.ndarray:
    """Time average of the product distributions of a sequence of profiles."""
    letters = string.ascii_lowercase[: len(blocks)]
    spec = ",".join("Z" + c for c in letters) + "->" + letters
    return np.einsum(spec, *blocks, optimize=True) / len(blocks[0])


def convergence_diagnostics(run: RunRecord, game: FiniteGame, threshold: float = 1e-4) -> ConvergenceReport:
    gaps = run.nash_gaps
    below = np.flatnonzero(gaps < threshold)
    joint = average_joint(run.blocks(run.base_states[:-1]))
    return ConvergenceReport(gaps, float(gaps[-1]), int(below[0]) + 1 if below.size else None,
                             cce_gap(game, joint / joint.sum()))
