"""Finite normal-form games: payoff tensors, payoff fields and equilibrium gaps.

A game with ``N`` players and action counts ``(A_1, ..., A_N)`` stores its
payoffs as one dense array of shape ``(N, A_1, ..., A_N)``; ``payoffs[i]`` is
player ``i``'s utility tensor, indexed row-major with player 1 slowest.

Mixed profiles are plain sequences of 1-D probability vectors, one per player.
Most functions also accept vectors with leading batch dimensions, i.e. arrays of
shape ``(..., A_i)``, and then return batched results.
"""
from __future__ import annotations

import json
import string
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

SIMPLEX_TOL = 1e-12

Profile = Sequence[np.ndarray]


class GameFormatError(ValueError):
    """Raised when a game document is malformed; ``path`` names the bad field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True, eq=False)
class FiniteGame:
    payoffs: np.ndarray

    def __post_init__(self):
        u = np.array(self.payoffs, dtype=float)
        if u.ndim < 3 or u.shape[0] != u.ndim - 1:
            raise ValueError(
                f"payoff array must have shape (N, A_1, ..., A_N) with N >= 2, got {u.shape}"
            )
        if any(k < 2 for k in u.shape[1:]):
            raise ValueError(f"every player needs at least 2 actions, got {u.shape[1:]}")
        if not np.all(np.isfinite(u)):
            raise ValueError("payoffs must be finite")
        u.setflags(write=False)
        object.__setattr__(self, "payoffs", u)

    @property
    def num_players(self) -> int:
        return self.payoffs.shape[0]

    @property
    def action_counts(self) -> tuple[int, ...]:
        return self.payoffs.shape[1:]

    @property
    def num_profiles(self) -> int:
        return int(np.prod(self.action_counts))

    @cached_property
    def _field_subscripts(self) -> list[str]:
        # einsum specs "abc,...b,...c->...a" for every player
        letters = string.ascii_letters[: self.num_players]
        specs = []
        for i in range(self.num_players):
            ops = [letters] + ["..." + letters[j] for j in range(self.num_players) if j != i]
            specs.append(",".join(ops) + "->..." + letters[i])
        return specs

    def __repr__(self):
        return f"FiniteGame(actions={self.action_counts})"

    @classmethod
    def from_matrices(cls, *matrices) -> "FiniteGame":
        return cls(np.stack([np.asarray(m, dtype=float) for m in matrices]))

    @classmethod
    def zeros(cls, action_counts: Sequence[int]) -> "FiniteGame":
        return cls(np.zeros((len(action_counts), *action_counts)))


def as_profile(x) -> list[np.ndarray]:
    return [np.asarray(xi, dtype=float) for xi in x]


def check_profile(game: FiniteGame, x, tol: float = SIMPLEX_TOL) -> list[np.ndarray]:
    """Validate ``x`` as a mixed profile of ``game`` and return it as arrays."""
    x = as_profile(x)
    if len(x) != game.num_players:
        raise ValueError(f"profile has {len(x)} blocks, game has {game.num_players} players")
    for i, (xi, k) in enumerate(zip(x, game.action_counts)):
        if xi.shape[-1:] != (k,):
            raise ValueError(f"player {i}: expected {k} probabilities, got shape {xi.shape}")
        if np.any(xi < 0) or np.any(np.abs(xi.sum(axis=-1) - 1.0) > tol):
            raise ValueError(f"player {i}: not a point of the simplex")
    return x


def is_fully_mixed(x) -> bool:
    return all(np.all(np.asarray(xi) > 0) for xi in x)


def renormalize(x) -> list[np.ndarray]:
    """Divide every block by its sum (never applied implicitly)."""
    return [xi / xi.sum(axis=-1, keepdims=True) for xi in as_profile(x)]


def uniform_profile(action_counts: Sequence[int]) -> list[np.ndarray]:
    return [np.full(k, 1.0 / k) for k in action_counts]


def joint_distribution(x) -> np.ndarray:
    """Product distribution over pure profiles induced by a single mixed profile."""
    joint = np.ones(())
    for xi in as_profile(x):
        joint = np.multiply.outer(joint, xi)
    return joint


def payoff_field(game: FiniteGame, x) -> list[np.ndarray]:
    """Payoff vectors ``v_i(x) = (u_i(a_i; x_-i))_{a_i}`` for every player."""
    x = check_profile(game, x)
    return _field(game, x)


def _field(game: FiniteGame, x: list[np.ndarray]) -> list[np.ndarray]:
    out = []
    for i, spec in enumerate(game._field_subscripts):
        others = [x[j] for j in range(game.num_players) if j != i]
        out.append(np.einsum(spec, game.payoffs[i], *others, optimize=True))
    return out


def mixed_payoff(game: FiniteGame, x) -> np.ndarray:
    """Expected payoff of each player, summed over the joint product distribution."""
    x = check_profile(game, x)
    joint = joint_distribution(x)
    return np.tensordot(game.payoffs, joint, axes=game.num_players)


def lipschitz_bound(game: FiniteGame) -> np.ndarray:
    """Per-player modulus ``max_a |u_i(a)|`` of the payoff field.

    Valid for the profile norm ``sum_j ||x_j||_1`` with the sup-norm on payoff
    vectors: changing one opponent block by ``d`` moves ``v_i`` by at most
    ``max|u_i| * ||d||_1``, and the blocks telescope.
    """
    axes = tuple(range(1, game.num_players + 1))
    return np.abs(game.payoffs).max(axis=axes)


def nash_gap(game: FiniteGame, x) -> float | np.ndarray:
    """Largest gain any player gets from a unilateral pure deviation (clamped at 0)."""
    x = check_profile(game, x, tol=1e-9)
    return _nash_gap(_field(game, x), x)


def _nash_gap(v: Sequence[np.ndarray], x: Sequence[np.ndarray]):
    gains = [vi.max(axis=-1) - np.sum(vi * xi, axis=-1) for vi, xi in zip(v, x)]
    gap = np.maximum(np.max(np.stack(gains), axis=0), 0.0)
    return float(gap) if gap.ndim == 0 else gap


def cce_gap(game: FiniteGame, joint: np.ndarray) -> float:
    """Largest gain of a constant unilateral deviation against a joint distribution."""
    joint = np.asarray(joint, dtype=float)
    if joint.shape != game.action_counts:
        raise ValueError(f"joint has shape {joint.shape}, expected {game.action_counts}")
    if np.any(joint < 0) or abs(joint.sum() - 1.0) > 1e-9:
        raise ValueError("joint distribution must be nonnegative and sum to 1")
    n = game.num_players
    current = np.tensordot(game.payoffs, joint, axes=n)
    best = np.empty(n)
    for i in range(n):
        others = joint.sum(axis=i, keepdims=True)
        deviation = (game.payoffs[i] * others).sum(axis=tuple(j for j in range(n) if j != i))
        best[i] = deviation.max() - current[i]
    return max(float(best.max()), 0.0)


# -- serialization ---------------------------------------------------------------


def load_game(text: str) -> FiniteGame:
    """Parse a game-JSON document ``{"players", "actions", "payoffs"}``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameFormatError("$", f"invalid JSON ({exc.msg})") from None
    if not isinstance(doc, dict):
        raise GameFormatError("$", "document must be an object")
    for key in ("players", "actions", "payoffs"):
        if key not in doc:
            raise GameFormatError(f"$.{key}", "missing field")

    players = doc["players"]
    if isinstance(players, bool) or not isinstance(players, int) or players < 2:
        raise GameFormatError("$.players", "must be an integer >= 2")
    actions = doc["actions"]
    if not isinstance(actions, list) or len(actions) != players:
        raise GameFormatError("$.actions", f"must be a list of {players} integers")
    for k, a in enumerate(actions):
        if isinstance(a, bool) or not isinstance(a, int) or a < 2:
            raise GameFormatError(f"$.actions[{k}]", "must be an integer >= 2")

    flat = doc["payoffs"]
    expected = players * int(np.prod(actions))
    if not isinstance(flat, list) or len(flat) != expected:
        raise GameFormatError("$.payoffs", f"must be a flat list of {expected} numbers")
    for k, v in enumerate(flat):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise GameFormatError(f"$.payoffs[{k}]", "must be a number")
        if not np.isfinite(v):
            raise GameFormatError(f"$.payoffs[{k}]", "must be finite")
    return FiniteGame(np.array(flat, dtype=float).reshape(players, *actions))


def load_game_file(path) -> FiniteGame:
    with open(path) as fh:
        return load_game(fh.read())


def game_to_json(game: FiniteGame) -> str:
    doc = {
        "players": game.num_players,
        "actions": list(game.action_counts),
        "payoffs": [float(v) for v in game.payoffs.ravel()],
    }
    return json.dumps(doc)
