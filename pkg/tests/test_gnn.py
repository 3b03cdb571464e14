import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gcs.errors import DimensionMismatch, DomainError, NoBiases, Unsupported
from gcs.gnn import (
    GenerativeNetwork,
    augment_biases,
    difference_network,
    forward,
    load_network,
    log_region_bound,
    network_from_json,
    network_to_json,
    objective_value_grad,
    orthant_bound,
    relu,
    save_network,
    sigmoid,
)
from gcs.sampling import derive_rng, sample_fixed, apply
from gcs.transforms import dct2_operator


def random_network(widths, seed, biases=False, final="none"):
    rng = derive_rng(seed)
    ws = [rng.standard_normal((b, a)) for a, b in zip(widths[:-1], widths[1:])]
    bs = [rng.standard_normal(b) for b in widths[1:]] if biases else None
    return GenerativeNetwork(weights=ws, biases=bs, final_activation=final)


def forward_oracle(g, z):
    """Straight-line re-evaluation, written independently of gnn.forward."""
    h = np.asarray(z, dtype=float)
    for i in range(len(g.weights)):
        h = g.weights[i].dot(h)
        if g.biases is not None:
            h = h + g.biases[i]
        if i != len(g.weights) - 1:
            h = np.where(h > 0, h, 0.0)
    if g.final_activation == "sigmoid":
        h = 1.0 / (1.0 + np.exp(-h))
    return h


@pytest.mark.parametrize("biases", [False, True])
@pytest.mark.parametrize("final", ["none", "sigmoid"])
def test_forward_matches_oracle(biases, final):
    g = random_network([3, 6, 10], seed=0, biases=biases, final=final)
    rng = derive_rng(1)
    for _ in range(25):
        z = rng.standard_normal(3)
        np.testing.assert_allclose(forward(g, z), forward_oracle(g, z), atol=1e-12)


def test_forward_batched_agrees_with_single():
    g = random_network([2, 5, 7], seed=2)
    zs = derive_rng(3).standard_normal((2, 9))
    batched = forward(g, zs)
    for j in range(9):
        np.testing.assert_allclose(batched[:, j], forward(g, zs[:, j]), atol=1e-12)


@given(st.floats(0.0, 50.0, allow_nan=False), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_positive_homogeneity(c, seed):
    g = random_network([2, 4, 6], seed=11)
    z = np.random.default_rng(seed).standard_normal(2)
    np.testing.assert_allclose(forward(g, c * z), c * forward(g, z), atol=1e-8)


def test_network_validation():
    with pytest.raises(DimensionMismatch):
        GenerativeNetwork(weights=[])
    with pytest.raises(DimensionMismatch):
        GenerativeNetwork(weights=[np.ones((4, 1))])  # code dim < 2
    with pytest.raises(DimensionMismatch):
        # inner width below code dimension
        GenerativeNetwork(weights=[np.ones((2, 3)), np.ones((5, 2))])
    with pytest.raises(DimensionMismatch):
        GenerativeNetwork(weights=[np.ones((4, 2)), np.ones((5, 3))])  # chain broken
    with pytest.raises(DomainError):
        GenerativeNetwork(weights=[np.ones((4, 2))], final_activation="tanh")


def test_width_properties():
    g = random_network([4, 16, 64], seed=0)
    assert g.widths == [4, 16, 64]
    assert (g.code_dim, g.depth, g.ambient_dim) == (4, 2, 64)


def test_bias_augmentation_exact():
    g = random_network([3, 7, 9, 12], seed=5, biases=True)
    aug = augment_biases(g)
    assert aug.biases is None
    assert aug.code_dim == 4
    rng = derive_rng(6)
    for _ in range(100):
        z = rng.standard_normal(3)
        lhs = forward(g, z)
        rhs = forward(aug, np.concatenate([z, [1.0]]))
        assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_bias_augmentation_requires_biases():
    with pytest.raises(NoBiases):
        augment_biases(random_network([2, 4, 6], seed=0))


def test_difference_network_exact():
    g = random_network([3, 8, 5], seed=7)
    gbar = difference_network(g)
    assert gbar.widths == [6, 16, 5]
    rng = derive_rng(8)
    for _ in range(100):
        x, y = rng.standard_normal(3), rng.standard_normal(3)
        lhs = forward(gbar, np.concatenate([x, y]))
        rhs = forward(g, x) - forward(g, y)
        scale = np.linalg.norm(forward(g, x)) + np.linalg.norm(forward(g, y)) + 1.0
        assert np.linalg.norm(lhs - rhs) <= 1e-12 * scale


def test_difference_network_kills_diagonal():
    g = random_network([2, 4, 6], seed=9)
    gbar = difference_network(g)
    z = derive_rng(10).standard_normal(2)
    np.testing.assert_allclose(
        forward(gbar, np.concatenate([z, z])), np.zeros(6), atol=1e-12
    )


def test_difference_network_rejects_biased_or_sigmoid():
    with pytest.raises(Unsupported):
        difference_network(random_network([2, 4, 6], seed=0, biases=True))
    with pytest.raises(Unsupported):
        difference_network(random_network([2, 4, 6], seed=0, final="sigmoid"))


def test_log_region_bound_values():
    assert log_region_bound([3, 10]) == 0.0  # d = 1: a single cone
    val = log_region_bound([2, 4, 4, 8])
    assert val == pytest.approx(4 * math.log(4 * math.e))
    assert val == pytest.approx(9.545177444479562)


def test_log_region_bound_monotone_in_widths():
    assert log_region_bound([2, 8, 16]) > log_region_bound([2, 4, 16])
    with pytest.raises(DomainError):
        log_region_bound([4])


def test_log_region_bound_of_difference_network():
    # Doubling the widths turns k*sum(log(2e*k_i/k)) into 2k*sum(...) exactly.
    widths = [3, 9, 27, 81]
    doubled = [2 * w for w in widths[:-1]] + [widths[-1]]
    k = widths[0]
    expected = 2 * k * sum(math.log(2 * math.e * ki / k) for ki in widths[1:-1])
    assert log_region_bound(doubled) == pytest.approx(expected)


def test_orthant_bound_values():
    assert orthant_bound(4, 2) == 24
    assert orthant_bound(5, 5) == 2**5
    assert orthant_bound(3, 1) == 6
    assert orthant_bound(400, 200) == 2**200 * math.comb(400, 200)  # big ints exact
    with pytest.raises(DomainError):
        orthant_bound(3, 4)
    with pytest.raises(DomainError):
        orthant_bound(3, 0)


def test_line_orthant_crossings_below_bound():
    # A generic line in R^3 meets exactly 2 open orthants; the bound is 6.
    rng = derive_rng(12)
    v = rng.standard_normal(3)
    ts = np.linspace(-5, 5, 10001)
    pts = np.outer(ts, v)
    signs = {tuple(s) for s in np.sign(pts).astype(int) if np.all(s != 0)}
    assert len(signs) == 2 <= orthant_bound(3, 1)


def _away_from_kinks(g, z, tol=1e-3):
    h = np.asarray(z, dtype=float)
    for i, w in enumerate(g.weights[:-1]):
        h = w @ h
        if g.biases is not None:
            h = h + g.biases[i]
        if np.min(np.abs(h)) < tol:
            return False
        h = relu(h)
    return True


@pytest.mark.parametrize("final", ["none", "sigmoid"])
def test_gradient_matches_finite_differences(final):
    u = dct2_operator(16)
    g = random_network([3, 5, 16], seed=20, biases=True, final=final)
    a = sample_fixed(u, 8, seed=21)
    rng = derive_rng(22)
    checked = 0
    while checked < 10:
        z = rng.standard_normal(3)
        if not _away_from_kinks(g, z):
            continue
        b = apply(a, forward(g, rng.standard_normal(3)))
        val, grad = objective_value_grad(g, a, b, z)
        h = 1e-6
        fd = np.zeros(3)
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            vp, _ = objective_value_grad(g, a, b, z + e)
            vm, _ = objective_value_grad(g, a, b, z - e)
            fd[i] = (vp - vm) / (2 * h)
        denom = max(np.linalg.norm(grad), 1e-12)
        assert np.linalg.norm(grad - fd) / denom <= 1e-5
        checked += 1


def test_gradient_zero_at_global_minimum():
    g = random_network([2, 4, 8], seed=30)
    u = dct2_operator(8)
    a = sample_fixed(u, 8, seed=31)
    z = derive_rng(32).standard_normal(2)
    b = apply(a, forward(g, z))
    val, grad = objective_value_grad(g, a, b, z)
    assert val == pytest.approx(0.0, abs=1e-20)
    np.testing.assert_allclose(grad, np.zeros(2), atol=1e-12)


def test_relu_and_sigmoid_basics():
    np.testing.assert_array_equal(relu(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])
    assert sigmoid(np.array([0.0]))[0] == 0.5
    # numerically stable at extreme inputs
    assert sigmoid(np.array([-1000.0]))[0] == 0.0
    assert sigmoid(np.array([1000.0]))[0] == 1.0


@pytest.mark.parametrize("biases", [False, True])
def test_network_json_roundtrip(biases, tmp_path):
    g = random_network([2, 5, 7], seed=40, biases=biases, final="sigmoid")
    obj = network_to_json(g)
    g2 = network_from_json(obj)
    for w1, w2 in zip(g.weights, g2.weights):
        np.testing.assert_array_equal(w1, w2)
    if biases:
        for b1, b2 in zip(g.biases, g2.biases):
            np.testing.assert_array_equal(b1, b2)
    path = tmp_path / "net.json"
    save_network(g, str(path))
    g3 = load_network(str(path))
    z = derive_rng(41).standard_normal(2)
    np.testing.assert_array_equal(forward(g, z), forward(g3, z))
