"""Harmonic measures: detection, certification, generation and rescaling."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from .game import FiniteGame, _field, check_profile, nash_gap

log = logging.getLogger(__name__)

RANK_TOL = 1e-10
CERT_TOL = 1e-9


class NotApplicableError(ValueError):
    pass


def rng_from_seed(seed: int) -> np.random.Generator:
    """Counter-based Philox-4x64 stream keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def _as_measure(measure, action_counts=None) -> list[np.ndarray]:
    mu = [np.asarray(m, dtype=float) for m in measure]
    if action_counts is not None:
        if len(mu) != len(action_counts) or any(m.shape != (k,) for m, k in zip(mu, action_counts)):
            raise ValueError(f"measure shapes {[m.shape for m in mu]} do not match {tuple(action_counts)}")
    for i, m in enumerate(mu):
        if m.ndim != 1 or not np.all(m > 0):
            raise ValueError(f"player {i}: measure entries must be positive")
    return mu


@dataclass(frozen=True, eq=False)
class HarmonicStructure:
    measure: tuple[np.ndarray, ...]
    masses: np.ndarray
    center: tuple[np.ndarray, ...]
    residual: float

    @classmethod
    def from_measure(cls, game: FiniteGame, measure) -> "HarmonicStructure":
        mu = _as_measure(measure, game.action_counts)
        masses, center = strategic_center(mu)
        return cls(tuple(mu), masses, tuple(center), harmonic_residual(game, mu))

    @property
    def valid(self) -> bool:
        return self.residual <= CERT_TOL

    def to_dict(self) -> dict:
        return {
            "measure": [m.tolist() for m in self.measure],
            "masses": self.masses.tolist(),
            "center": [c.tolist() for c in self.center],
            "residual": float(self.residual),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, game: FiniteGame, text: str) -> "HarmonicStructure":
        # masses, center and residual are recomputed from the measure and checked
        return cls.from_measure(game, json.loads(text)["measure"])


def strategic_center(measure) -> tuple[np.ndarray, list[np.ndarray]]:
    mu = _as_measure(measure)
    masses = np.array([m.sum() for m in mu])
    return masses, [m / s for m, s in zip(mu, masses)]


def harmonic_residual(game: FiniteGame, measure) -> float:
    """Max over pure profiles of the measure-weighted sum of deviation losses."""
    mu = _as_measure(measure, game.action_counts)
    return float(np.abs(_residual_tensor(game, mu)).max())


def _residual_tensor(game: FiniteGame, mu) -> np.ndarray:
    total = np.zeros(game.action_counts)
    for i, m in enumerate(mu):
        u = game.payoffs[i]
        # sum_b mu_ib u_i(b; a_-i), broadcast back along axis i
        averaged = np.expand_dims(np.tensordot(m, u, axes=([0], [i])), i)
        total += m.sum() * u - averaged
    return total


def deviation_matrix(game: FiniteGame) -> np.ndarray:
    """Matrix ``C`` with ``(C mu)[a]`` the harmonic residual at pure profile ``a``.

    Rows follow the row-major profile order, columns the stacked measure entries.
    """
    cols = []
    for i, k in enumerate(game.action_counts):
        u = game.payoffs[i]
        for b in range(k):
            switched = np.expand_dims(np.take(u, b, axis=i), i)
            cols.append((u - switched).ravel())
    return np.column_stack(cols)


def _null_basis(mat: np.ndarray) -> np.ndarray:
    """Orthonormal null-space basis from a column-pivoted QR of the transpose."""
    n = mat.shape[1]
    q, r, _ = scipy.linalg.qr(mat.T, pivoting=True, mode="full")
    diag = np.abs(np.diag(r))
    rank = 0 if diag.size == 0 or diag[0] == 0 else int(np.sum(diag > RANK_TOL * diag[0]))
    return q[:, rank:n]


def find_harmonic_measure(game: FiniteGame) -> HarmonicStructure | None:
    """Return a certified harmonic structure, or ``None`` if the game is not harmonic.

    Among all valid measures this picks the one maximizing the smallest entry
    under a unit total, then rescales so the smallest entry is exactly 1.
    """
    counts = game.action_counts
    if not np.any(game.payoffs):
        return HarmonicStructure.from_measure(game, [np.ones(k) for k in counts])

    basis = _null_basis(deviation_matrix(game))
    dim = basis.shape[1]
    if dim == 0:
        return None

    # variables (w, t): maximize t s.t. Z w >= t, 1'Z w = 1
    nvar = basis.shape[0]
    c = np.zeros(dim + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-basis, np.ones((nvar, 1))])
    a_eq = np.append(basis.sum(axis=0), 0.0)[None, :]
    res = linprog(
        c, A_ub=a_ub, b_ub=np.zeros(nvar), A_eq=a_eq, b_eq=[1.0],
        bounds=[(None, None)] * dim + [(None, 1.0)], method="highs",
    )
    if res.status != 0 or -res.fun <= CERT_TOL:
        return None

    flat = basis @ res.x[:dim]
    flat = flat / flat.min()
    mu = np.split(flat, np.cumsum(counts)[:-1])
    structure = HarmonicStructure.from_measure(game, mu)
    if not structure.valid:
        log.debug("LP measure failed certification: residual %.3g", structure.residual)
        return None
    return structure


def is_uniform_harmonic(game: FiniteGame) -> bool:
    return harmonic_residual(game, [np.ones(k) for k in game.action_counts]) <= CERT_TOL


def center_identity_residual(game: FiniteGame, structure: HarmonicStructure, samples: int = 100, seed: int = 0) -> float:
    """Max of ``|sum_i m_i <v_i(x), x_i - center_i>|`` over random mixed profiles."""
    rng = rng_from_seed(seed)
    x = [rng.dirichlet(np.ones(k), size=samples) for k in game.action_counts]
    v = _field(game, x)
    total = sum(m * np.sum(vi * (xi - ci), axis=-1)
                for m, vi, xi, ci in zip(structure.masses, v, x, structure.center))
    return float(np.abs(total).max())


def harmonic_constraint_operator(action_counts: Sequence[int], measure) -> np.ndarray:
    """Linear map from stacked payoff tensors (player-major) to the residual tensor."""
    mu = _as_measure(measure, action_counts)
    size = int(np.prod(action_counts))
    blocks = []
    for i, m in enumerate(mu):
        avg = np.ones((1, 1))
        for j, k in enumerate(action_counts):
            avg = np.kron(avg, np.outer(np.ones(k), m) if j == i else np.eye(k))
        blocks.append(m.sum() * np.eye(size) - avg)
    return np.hstack(blocks)


def project_onto_harmonic(payoffs: np.ndarray, measure) -> np.ndarray:
    """Orthogonal projection of a payoff array onto the games harmonic for ``measure``."""
    payoffs = np.asarray(payoffs, dtype=float)
    op = harmonic_constraint_operator(payoffs.shape[1:], measure)
    _, s, vt = np.linalg.svd(op, full_matrices=False)
    rank = int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
    row_space = vt[:rank]
    flat = payoffs.ravel()
    return (flat - row_space.T @ (row_space @ flat)).reshape(payoffs.shape)


def generate_harmonic(action_counts: Sequence[int], measure, seed: int) -> FiniteGame:
    """Random game that is harmonic with respect to ``measure`` (deterministic in ``seed``)."""
    counts = tuple(int(k) for k in action_counts)
    if len(counts) < 2 or any(k < 2 for k in counts):
        raise ValueError(f"need at least 2 players with at least 2 actions each, got {counts}")
    _as_measure(measure, counts)
    raw = rng_from_seed(seed).standard_normal((len(counts), *counts))
    return FiniteGame(project_onto_harmonic(raw, measure))


def random_measure(action_counts: Sequence[int], seed: int) -> list[np.ndarray]:
    """Entries uniform on [0.5, 2], rescaled so the smallest is 1.

    Uses a jumped copy of the seed's stream, so it does not reuse the draws of
    ``generate_harmonic`` with the same seed.
    """
    rng = np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF).jumped(1))
    flat = rng.uniform(0.5, 2.0, size=sum(action_counts))
    flat /= flat.min()
    return np.split(flat, np.cumsum(action_counts)[:-1])


def random_scores(action_counts: Sequence[int], seed: int, scale: float = 0.5) -> list[np.ndarray]:
    """Gaussian initial scores from a second jumped copy of the seed's stream."""
    rng = np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF).jumped(2))
    flat = scale * rng.standard_normal(sum(action_counts))
    return np.split(flat, np.cumsum(action_counts)[:-1])


def comeasure_rescale(game: FiniteGame, comeasure) -> FiniteGame:
    """Multiply ``u_i(a)`` by ``kappa_i(a_-i)``; ``kappa_i`` is indexed by opponents in order."""
    n = game.num_players
    out = np.empty_like(game.payoffs)
    for i in range(n):
        kappa = np.asarray(comeasure[i], dtype=float)
        expected = game.action_counts[:i] + game.action_counts[i + 1:]
        if kappa.shape != expected:
            raise ValueError(f"player {i}: comeasure shape {kappa.shape}, expected {expected}")
        if not np.all(kappa > 0):
            raise ValueError(f"player {i}: comeasure weights must be positive")
        out[i] = game.payoffs[i] * np.expand_dims(kappa, i)
    return FiniteGame(out)


def measure_from_interior_equilibrium(game: FiniteGame, eq) -> HarmonicStructure:
    """Certify the interior equilibrium of a two-player zero-sum game as a measure."""
    if game.num_players != 2:
        raise NotApplicableError("needs exactly two players")
    if np.abs(game.payoffs[0] + game.payoffs[1]).max() > 1e-12:
        raise NotApplicableError("game is not zero-sum")
    eq = check_profile(game, eq, tol=1e-9)
    if not all(np.all(e > 0) for e in eq):
        raise NotApplicableError("equilibrium is not fully mixed")
    gap = nash_gap(game, eq)
    if gap > CERT_TOL:
        raise NotApplicableError(f"profile is not an equilibrium (gap {gap:.3g})")
    structure = HarmonicStructure.from_measure(game, eq)
    if not structure.valid:
        raise NotApplicableError(f"measure failed certification (residual {structure.residual:.3g})")
    return structure
