import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from harmonic_learning.regularizers import (RegularizerSpec, conjugate, fenchel_coupling, interior_gradient,
                                            logit, mirror, regularizer_value, simplex_projection)

scores = st.integers(2, 6).flatmap(
    lambda n: arrays(float, n, elements=st.floats(-20, 20, allow_nan=False)))


def single(kind, n, modulus=None):
    return RegularizerSpec.for_game(kind, (n,), None if modulus is None else (modulus,))


def test_known_values():
    assert np.allclose(simplex_projection(np.array([0.8, 0.4])), [0.7, 0.3])
    assert np.allclose(simplex_projection(np.array([3.0, 0.0, -1.0])), [1.0, 0.0, 0.0])
    spec = single("euclidean", 2)
    assert conjugate(spec, [[0.8, 0.4]])[0] == pytest.approx(0.8 * 0.7 + 0.4 * 0.3 - 0.5 * (0.49 + 0.09))
    ent = single("entropic", 2)
    f = fenchel_coupling(ent, [[0.5, 0.5]], [[1.0, 0.0]])[0]
    q = np.exp([1.0, 0.0]) / np.exp([1.0, 0.0]).sum()
    assert f == pytest.approx(0.5 * np.log(0.5 / q[0]) + 0.5 * np.log(0.5 / q[1]))


def test_ranges():
    spec = RegularizerSpec.for_game(("entropic", "euclidean"), (3, 4))
    assert np.allclose(spec.ranges, [np.log(3), 0.5 * (1 - 0.25)])
    assert spec.moduli == (1.0, 0.25)


def test_bad_spec():
    with pytest.raises(ValueError):
        RegularizerSpec.for_game("tsallis", (2,))
    with pytest.raises(ValueError):
        RegularizerSpec.for_game("entropic", (2,), moduli=(0.0,))
    with pytest.raises(ValueError):
        mirror(single("entropic", 2), [[0.0, 0.0, 0.0]])


@settings(max_examples=200, deadline=None)
@given(scores)
def test_projection_is_nearest_point(y):
    x = simplex_projection(y)
    assert abs(x.sum() - 1) < 1e-12 and x.min() >= 0
    # optimality: <y - x, z - x> <= 0 for every vertex z
    for z in np.eye(len(y)):
        assert (y - x) @ (z - x) <= 1e-9 * (1 + np.abs(y).max())


@settings(max_examples=200, deadline=None)
@given(scores, st.sampled_from(["entropic", "euclidean"]))
def test_mirror_is_argmax(y, kind):
    n = len(y)
    spec = single(kind, n)
    x = mirror(spec, [y])[0]
    best = y @ x - regularizer_value(spec, [x])[0]
    assert best == pytest.approx(conjugate(spec, [y])[0], abs=1e-9 * (1 + np.abs(y).max()))
    rng = np.random.default_rng(0)
    for z in rng.dirichlet(np.ones(n), size=10):
        assert y @ z - regularizer_value(spec, [z])[0] <= best + 1e-9


@settings(max_examples=200, deadline=None)
@given(scores, st.floats(-1e6, 1e6), st.sampled_from(["entropic", "euclidean"]))
def test_coupling_ignores_constant_shift(y, c, kind):
    spec = single(kind, len(y))
    p = np.full(len(y), 1 / len(y))
    a = fenchel_coupling(spec, [p], [y])[0]
    b = fenchel_coupling(spec, [p], [y + c])[0]
    assert abs(a - b) <= 1e-9 * (1 + abs(c) * 1e-6)
    assert np.allclose(mirror(spec, [y])[0], mirror(spec, [y + c])[0], atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 6), st.sampled_from(["entropic", "euclidean"]))
def test_coupling_lower_bounds(seed, n, kind):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(n))
    y = rng.normal(0, 3, n)
    q = mirror(single(kind, n), [y])[0]
    f = fenchel_coupling(single(kind, n), [p], [y])[0]
    assert f >= 0
    # l1 with the default modulus
    assert f >= 0.5 * single(kind, n).moduli[0] * np.abs(p - q).sum() ** 2 - 1e-12
    if kind == "euclidean":
        # and the sharper l2 statement with modulus 1
        assert f >= 0.5 * np.sum((p - q) ** 2) - 1e-12


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 6), st.sampled_from(["entropic", "euclidean"]))
def test_three_point_identity(seed, n, kind):
    rng = np.random.default_rng(seed)
    spec = single(kind, n)
    p = rng.dirichlet(np.ones(n))
    y, y2 = rng.normal(0, 2, n), rng.normal(0, 2, n)
    q = mirror(spec, [y])[0]
    lhs = fenchel_coupling(spec, [p], [y2])[0]
    rhs = fenchel_coupling(spec, [p], [y])[0] + fenchel_coupling(spec, [q], [y2])[0] + (y2 - y) @ (q - p)
    assert abs(lhs - rhs) < 1e-10


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 6), st.sampled_from(["entropic", "euclidean"]))
def test_mirror_lipschitz(seed, n, kind):
    rng = np.random.default_rng(seed)
    spec = single(kind, n)
    y, y2 = rng.normal(0, 2, n), rng.normal(0, 2, n)
    gap = np.abs(mirror(spec, [y])[0] - mirror(spec, [y2])[0]).sum()
    assert gap <= np.abs(y - y2).max() / spec.moduli[0] + 1e-12


def test_coupling_vanishes_on_choice():
    rng = np.random.default_rng(1)
    for kind in ("entropic", "euclidean"):
        spec = single(kind, 4)
        y = rng.normal(0, 1, 4)
        q = mirror(spec, [y])
        assert fenchel_coupling(spec, q, [y])[0] < 1e-12


def test_interior_gradient_inverts_mirror():
    spec = RegularizerSpec.for_game(("entropic", "euclidean"), (3, 3))
    x = [np.array([0.2, 0.3, 0.5]), np.array([0.1, 0.6, 0.3])]
    back = mirror(spec, interior_gradient(spec, x))
    assert all(np.allclose(a, b, atol=1e-14) for a, b in zip(back, x))
    with pytest.raises(ValueError):
        interior_gradient(spec, [np.array([0.0, 0.5, 0.5]), x[1]])


def test_logit_handles_large_scores():
    x = logit(np.array([1000.0, 999.0, -1000.0]))
    assert np.all(np.isfinite(x)) and x[0] == pytest.approx(1 / (1 + np.exp(-1)))


def test_batched_coupling():
    spec = RegularizerSpec.for_game("entropic", (2, 3))
    y = [np.zeros((4, 2)), np.zeros((4, 3))]
    p = [np.array([0.5, 0.5]), np.array([1.0, 0.0, 0.0])]
    f = fenchel_coupling(spec, p, y)
    assert f.shape == (2, 4)
    assert np.allclose(f[1], np.log(3))


def test_documented_values():
    ent = single("entropic", 2)
    assert np.allclose(mirror(ent, [[0.0, 0.0]])[0], [0.5, 0.5])
    assert np.allclose(mirror(ent, [[np.log(2), 0.0]])[0], [2 / 3, 1 / 3])
    assert conjugate(ent, [[0.0, 0.0]])[0] == pytest.approx(np.log(2))
    assert conjugate(ent, [[1.7, 1.7]])[0] == pytest.approx(1.7 + np.log(2))
    assert fenchel_coupling(ent, [[0.5, 0.5]], [[0.0, 0.0]])[0] == 0
    assert fenchel_coupling(ent, [[0.5, 0.5]], [[np.log(2), 0.0]])[0] == pytest.approx(0.05889, abs=1e-5)
    assert fenchel_coupling(ent, [[0.5, 0.5]], [[np.log(2), 0.0]])[0] == pytest.approx(
        -np.log(2) + np.log(3) - np.log(2) / 2, abs=1e-14)
    assert np.allclose(interior_gradient(ent, [[0.5, 0.5]])[0], 1 + np.log(0.5))
    euc = single("euclidean", 2)
    assert conjugate(euc, [[0.8, 0.4]])[0] == pytest.approx(0.39)
    assert np.array_equal(mirror(euc, interior_gradient(euc, [[0.7, 0.3]]))[0], [0.7, 0.3])
    with pytest.raises(ValueError):
        interior_gradient(ent, [[1.0, 0.0]])
