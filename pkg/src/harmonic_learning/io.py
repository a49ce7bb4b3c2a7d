"""CSV and JSON artifacts, and access to the bundled example games."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .flow import FlowTrajectory
from .ftrl import RunRecord, discrete_regret, energy_sequence
from .game import FiniteGame, game_to_json, load_game, load_game_file
from .harmonic import HarmonicStructure

BUNDLED = ("matching_pennies.json", "siege.json", "coordination.json")


def bundled_game(name: str) -> FiniteGame:
    if not name.endswith(".json"):
        name += ".json"
    return load_game(resources.files(__package__).joinpath("data", name).read_text())


def resolve_game(path: str) -> FiniteGame:
    """Load a game from disk, falling back to a bundled game of the same file name."""
    p = Path(path)
    if p.exists():
        return load_game_file(p)
    if p.name in BUNDLED or p.name + ".json" in BUNDLED:
        return bundled_game(p.name)
    raise FileNotFoundError(f"no such game file: {path}")


def _columns(prefix: str, counts) -> list[str]:
    return [f"{prefix}[{i}][{a}]" for i, k in enumerate(counts) for a in range(k)]


def thin(rows: int, stride: int) -> np.ndarray:
    """Every ``stride``-th row index, always keeping the last row."""
    idx = np.arange(0, rows, max(int(stride), 1))
    if rows and idx[-1] != rows - 1:
        idx = np.append(idx, rows - 1)
    return idx


def _save(path, header: list[str], data: np.ndarray):
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(header), comments="")


def write_flow_csv(path, traj: FlowTrajectory, stride: int = 1):
    counts = [xi.shape[-1] for xi in traj.x]
    header = ["t"] + _columns("x", counts)
    cols = [traj.t[:, None]] + list(traj.x)
    if traj.energy is not None:
        header.append("E")
        cols.append(traj.energy[:, None])
    if traj.logit is not None:
        header.append("G")
        cols.append(traj.logit[:, None])
    data = np.hstack(cols)
    _save(path, header, data[thin(len(data), stride)])


def write_run_csv(path, run: RunRecord, structure: HarmonicStructure | None = None, spec=None,
                  stride: int = 1):
    """One row per step: base and leading states, gap, energy, running regret, step norms."""
    counts = run.action_counts
    header = (["n"] + _columns("x", counts) + _columns("xlead", counts) + ["nash_gap", "E"]
              + [f"regret[{i}]" for i in range(len(counts))] + ["stepnorm2_lead", "stepnorm2_base"])
    steps = run.steps
    if structure is not None and spec is not None:
        energy = energy_sequence(run, structure, spec, run.etas)[:-1]
    else:
        energy = np.full(steps, np.nan)
    data = np.hstack([
        np.arange(1, steps + 1)[:, None],
        run.base_states[:-1],
        run.lead_states,
        run.nash_gaps[:, None],
        energy[:, None],
        discrete_regret(run, run.game),
        run.stepnorm2_lead[:, None],
        run.stepnorm2_base[:, None],
    ])
    _save(path, header, data[thin(steps, stride)])


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, k] for k, name in enumerate(names)}


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_game(path, game: FiniteGame):
    Path(path).write_text(game_to_json(game) + "\n")
