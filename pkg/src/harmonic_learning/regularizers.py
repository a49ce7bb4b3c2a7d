"""Entropic and Euclidean regularizers on the simplex.

Every block function works along the last axis, so a score array of shape
``(T, A_i)`` maps to ``T`` choices at once.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp, xlogy

KINDS = ("entropic", "euclidean")


# -- single blocks -----------------------------------------------------------


def logit(y: np.ndarray) -> np.ndarray:
    z = np.exp(y - y.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def simplex_projection(y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the simplex (sort, then threshold)."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    u = -np.sort(-y, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    k = np.arange(1, n + 1)
    # the positivity test is monotone in k, so the last hit is the support size
    rho = np.sum(u - css / k > 0, axis=-1, keepdims=True)
    theta = np.take_along_axis(css, rho - 1, axis=-1) / rho
    return np.maximum(y - theta, 0.0)


def _choice(kind: str, y):
    return logit(y) if kind == "entropic" else simplex_projection(y)


def _value(kind: str, x):
    if kind == "entropic":
        return xlogy(x, x).sum(axis=-1)
    return 0.5 * np.sum(x * x, axis=-1)


def _conjugate(kind: str, y):
    if kind == "entropic":
        return logsumexp(y, axis=-1)
    q = simplex_projection(y)
    return np.sum(y * q, axis=-1) - 0.5 * np.sum(q * q, axis=-1)


def _coupling(kind: str, p, y):
    # both forms are invariant under y -> y + c, so there is no cancellation when
    # scores drift along the all-ones direction
    if kind == "entropic":
        logq = y - logsumexp(y, axis=-1, keepdims=True)
        return np.sum(xlogy(p, p) - p * logq, axis=-1)
    q = simplex_projection(y)
    d = p - q
    slack = y - y.max(axis=-1, keepdims=True) - q
    return 0.5 * np.sum(d * d, axis=-1) - np.sum(slack * d, axis=-1)


def _range(kind: str, n: int) -> float:
    return float(np.log(n)) if kind == "entropic" else 0.5 * (1.0 - 1.0 / n)


def default_modulus(kind: str, n: int) -> float:
    """Strong-convexity modulus with respect to the l1 norm on an n-simplex.

    Entropic: 1 (Pinsker). Euclidean: 1/n, since ||d||_2^2 >= ||d||_1^2 / n.
    """
    return 1.0 if kind == "entropic" else 1.0 / n


# -- per-player specification -------------------------------------------------


@dataclass(frozen=True)
class RegularizerSpec:
    kinds: tuple[str, ...]
    moduli: tuple[float, ...]
    action_counts: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.kinds) == len(self.moduli) == len(self.action_counts)):
            raise ValueError("kinds, moduli and action_counts must have one entry per player")
        for k in self.kinds:
            if k not in KINDS:
                raise ValueError(f"unknown regularizer kind {k!r}; expected one of {KINDS}")
        if any(not (m > 0) for m in self.moduli):
            raise ValueError("strong-convexity moduli must be positive")

    @classmethod
    def for_game(cls, kinds, action_counts: Sequence[int], moduli=None) -> "RegularizerSpec":
        counts = tuple(int(k) for k in action_counts)
        if isinstance(kinds, str):
            kinds = (kinds,) * len(counts)
        kinds = tuple(kinds)
        if moduli is None:
            moduli = tuple(default_modulus(k, n) for k, n in zip(kinds, counts))
        return cls(kinds, tuple(float(m) for m in moduli), counts)

    @property
    def num_players(self) -> int:
        return len(self.kinds)

    @property
    def ranges(self) -> np.ndarray:
        """H_i = max h_i - min h_i over the simplex."""
        return np.array([_range(k, n) for k, n in zip(self.kinds, self.action_counts)])

    def _check(self, blocks):
        blocks = [np.asarray(b, dtype=float) for b in blocks]
        if len(blocks) != self.num_players:
            raise ValueError(f"expected {self.num_players} blocks, got {len(blocks)}")
        for i, (b, n) in enumerate(zip(blocks, self.action_counts)):
            if b.shape[-1:] != (n,):
                raise ValueError(f"player {i}: expected last axis of length {n}, got {b.shape}")
        return blocks


def mirror(spec: RegularizerSpec, y) -> list[np.ndarray]:
    """Regularized best response ``argmax_x <y_i, x> - h_i(x)`` for every player."""
    y = spec._check(y)
    return [_choice(k, yi) for k, yi in zip(spec.kinds, y)]


def conjugate(spec: RegularizerSpec, y) -> np.ndarray:
    y = spec._check(y)
    return np.array([_conjugate(k, yi) for k, yi in zip(spec.kinds, y)])


def regularizer_value(spec: RegularizerSpec, x) -> np.ndarray:
    x = spec._check(x)
    return np.array([_value(k, xi) for k, xi in zip(spec.kinds, x)])


def fenchel_coupling(spec: RegularizerSpec, p, y) -> np.ndarray:
    """``F_i(p_i, y_i) = h_i(p_i) + h_i*(y_i) - <y_i, p_i>``, stacked over players."""
    p, y = spec._check(p), spec._check(y)
    return np.array([np.maximum(_coupling(k, pi, yi), 0.0) for k, pi, yi in zip(spec.kinds, p, y)])


def interior_gradient(spec: RegularizerSpec, x) -> list[np.ndarray]:
    """A score that the mirror map sends back to ``x``."""
    x = spec._check(x)
    out = []
    for i, (k, xi) in enumerate(zip(spec.kinds, x)):
        if k == "entropic":
            if np.any(xi <= 0):
                raise ValueError(f"player {i}: entropic gradient needs a fully mixed point")
            out.append(1.0 + np.log(xi))
        else:
            out.append(xi.copy())
    return out
