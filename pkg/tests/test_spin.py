import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from elosslab.spin import (LatticeHamiltonian, SpinError, binary_entropy, bits_to_config,
                           cross_entropy_loss, ground_state_exhaustive, local_energy,
                           local_energy_loss, local_energy_loss_terms, local_field, margin_loss,
                           predict_config, sample_hamiltonian, true_energy, true_energy_loss,
                           true_field)
from elosslab.autodiff import Tensor

from oracles import (all_configs, binary_entropy_direct, central_difference, ising_brute_force,
                     neighbour_sum, rel_err)

seeds = st.integers(0, 2**32 - 1)
sides = st.sampled_from([2, 3, 4])


def random_spins(rng, shape):
    return rng.choice([-1.0, 1.0], size=shape)


def test_hamiltonian_validation_and_sampling():
    with pytest.raises(SpinError):
        LatticeHamiltonian(np.full((2, 1), 1.5), np.zeros((1, 2)))
    with pytest.raises(SpinError):
        LatticeHamiltonian(np.zeros((2, 1)), np.zeros((2, 2)))
    with pytest.raises(SpinError):
        sample_hamiltonian(1)
    a, b = sample_hamiltonian(4, seed=3), sample_hamiltonian(4, seed=3)
    assert np.array_equal(a.jh, b.jh) and np.array_equal(a.jv, b.jv)
    rng = np.random.default_rng(0)
    values = np.concatenate([sample_hamiltonian(10, rng).flat_couplings() for _ in range(600)])
    assert values.size >= 100_000
    assert np.all(np.abs(values) <= 1)
    assert abs(values.mean()) <= 3 * np.sqrt(1 / 3) / np.sqrt(values.size)


def test_true_energy_examples():
    rng = np.random.default_rng(0)
    zero = LatticeHamiltonian.uniform(3, 3, 0.0)
    assert all(true_energy(zero, random_spins(rng, (3, 3))) == 0 for _ in range(5))
    assert true_energy(LatticeHamiltonian.uniform(2, 2, 1.0), np.ones((2, 2))) == -4.0
    with pytest.raises(SpinError):
        true_energy(zero, np.ones((2, 2)))
    with pytest.raises(SpinError):
        true_energy(zero, np.zeros((3, 3)))


@settings(max_examples=50, deadline=None)
@given(seeds, sides)
def test_single_flip_energy_change(seed, L):
    rng = np.random.default_rng(seed)
    H = sample_hamiltonian(L, rng)
    s = random_spins(rng, (L, L))
    field = neighbour_sum(H.jh, H.jv, s)
    assert np.allclose(true_field(H, s), field, atol=1e-14)
    r, c = rng.integers(L), rng.integers(L)
    flipped = s.copy()
    flipped[r, c] *= -1
    delta = true_energy(H, flipped) - true_energy(H, s)
    assert delta == pytest.approx(2 * s[r, c] * field[r, c], abs=1e-12)
    assert true_energy(H, -s) == pytest.approx(true_energy(H, s), abs=1e-12)


def test_ground_state_examples():
    ferro = LatticeHamiltonian([[1.0]], np.zeros((0, 2)))
    s, e = ground_state_exhaustive(ferro)
    assert np.array_equal(s, [[1.0, 1.0]]) and e == -1.0
    s, e = ground_state_exhaustive(LatticeHamiltonian([[-1.0]], np.zeros((0, 2))))
    assert np.array_equal(s, [[1.0, -1.0]]) and e == -1.0
    s, e = ground_state_exhaustive(LatticeHamiltonian.uniform(3, 3, 1.0))
    assert np.all(s == 1.0) and e == -12.0
    with pytest.raises(SpinError):
        ground_state_exhaustive(LatticeHamiltonian.uniform(6, 5, 0.5))


@pytest.mark.parametrize("rows,cols", [(2, 2), (2, 3), (3, 3), (3, 4)])
def test_ground_state_matches_brute_force(rows, cols):
    rng = np.random.default_rng(rows * 10 + cols)
    for _ in range(5):
        H = LatticeHamiltonian(rng.uniform(-1, 1, (rows, cols - 1)), rng.uniform(-1, 1, (rows - 1, cols)))
        s, e = ground_state_exhaustive(H)
        best, argmins = ising_brute_force(H.jh.tolist(), H.jv.tolist())
        assert e == pytest.approx(best, abs=1e-12)
        assert s.flat[0] == 1.0
        assert any(np.array_equal(s, a) for a in argmins)


def test_ground_state_tie_rule_prefers_smallest_pattern():
    # zero couplings: every configuration ties, so pattern 0 (all +1) wins
    s, _ = ground_state_exhaustive(LatticeHamiltonian.uniform(2, 3, 0.0))
    assert np.array_equal(s, bits_to_config(0, (2, 3)))
    assert np.array_equal(bits_to_config(0b101, (2, 2)), [[1, -1], [1, -1]])


def test_local_field_examples():
    rng = np.random.default_rng(1)
    H = sample_hamiltonian(3, rng)
    y = random_spins(rng, (3, 3))
    assert np.allclose(local_field(H, y, 0.0), neighbour_sum(H.jh, H.jv, y), atol=1e-14)
    assert np.array_equal(local_field(LatticeHamiltonian.uniform(3, 3, 0.0), y, 5.0), 5.0 * y)
    with pytest.raises(SpinError):
        local_field(H, y, -1.0)


@settings(max_examples=30, deadline=None)
@given(seeds, st.sampled_from([2, 3]))
def test_ground_states_are_flip_stable(seed, L):
    H = sample_hamiltonian(L, seed)
    s, _ = ground_state_exhaustive(H)
    assert np.all(s * local_field(H, s, 0.0) >= -1e-12)


def test_local_energy_examples():
    rng = np.random.default_rng(2)
    H = sample_hamiltonian(2, rng)
    y = random_spins(rng, (2, 2))
    scores = [local_energy(c, y, H, 5.0) for c in all_configs(2, 2)]
    best = int(np.argmin(scores))
    assert np.array_equal(list(all_configs(2, 2))[best], y)
    assert sorted(scores)[1] > scores[best]
    assert local_energy(-y, y, H, 4.01) == pytest.approx(-local_energy(y, y, H, 4.01))
    g, _ = ground_state_exhaustive(H)
    ground_score = local_energy(g, g, H, 0.5)
    assert all(local_energy(c, g, H, 0.5) >= ground_score - 1e-12 for c in all_configs(2, 2))


def test_local_energy_needs_offset_for_non_ground_data():
    rng = np.random.default_rng(3)
    found = 0
    for _ in range(100):
        H = sample_hamiltonian(3, rng)
        y = random_spins(rng, (3, 3))
        scores = [local_energy(c, y, H, 0.0) for c in all_configs(3, 3)]
        if min(scores) < local_energy(y, y, H, 0.0) - 1e-12:
            found += 1
    assert found >= 1


def test_binary_entropy_matches_direct_formula():
    z = np.array([-30.0, -2.0, -0.3, 0.0, 0.4, 1.5, 30.0])
    got = binary_entropy(Tensor(z)).numpy()
    want = [binary_entropy_direct(math.tanh(v)) for v in z]
    assert np.allclose(got, want, atol=1e-12)
    assert got[3] == pytest.approx(math.log(2), abs=1e-15)


def test_logit_loss_examples():
    rng = np.random.default_rng(4)
    H = sample_hamiltonian(4, rng)
    y = random_spins(rng, (4, 4))
    z0 = np.zeros((4, 4))
    energy_term, entropy_term = local_energy_loss_terms(z0, y, H)
    assert energy_term == 0.0 and entropy_term == pytest.approx(16 * math.log(2))
    assert local_energy_loss(z0, y, H).value == pytest.approx(-16 * math.log(2), abs=1e-12)
    sat = local_energy_loss(50 * y, y, H, h0=4.01, T=0.1).value
    assert sat == pytest.approx(-np.sum(local_field(H, y, 4.01) * y) / 0.1, abs=1e-6)
    assert cross_entropy_loss(z0, y).value == pytest.approx(math.log(2), abs=1e-15)
    assert cross_entropy_loss(10 * y, y).value < 1e-8
    assert margin_loss(2 * y, y).value == 0.0
    assert margin_loss(z0, y).value == 1.0
    assert true_energy_loss(z0, H).value == pytest.approx(-16 * math.log(2), abs=1e-12)
    ferro = LatticeHamiltonian.uniform(4, 4, 1.0)
    assert true_energy_loss(50 * np.ones((4, 4)), ferro, T=0.1).value == pytest.approx(-24 / 0.1, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(0.05, 5.0), st.floats(0.5, 20.0))
def test_temperature_scales_only_the_energy_term(seed, T, c):
    rng = np.random.default_rng(seed)
    H = sample_hamiltonian(3, rng)
    y = random_spins(rng, (3, 3))
    z = rng.standard_normal((3, 3))
    e1, s1 = local_energy_loss_terms(z, y, H, T=T)
    e2, s2 = local_energy_loss_terms(z, y, H, T=c * T)
    assert e2 == pytest.approx(e1 / c, rel=1e-12)
    assert s2 == s1


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_logit_loss_gradients(seed):
    rng = np.random.default_rng(seed)
    H = sample_hamiltonian(3, rng)
    y = random_spins(rng, (3, 3))
    z = rng.standard_normal((3, 3)) * 2
    losses = {
        "local": lambda v: local_energy_loss(v, y, H),
        "true": lambda v: true_energy_loss(v, H),
        "ce": lambda v: cross_entropy_loss(v, y),
    }
    for fn in losses.values():
        assert rel_err(fn(z).grad, central_difference(lambda v: fn(v).value, z)) <= 1e-5
    # margin: keep every site away from the hinge
    zm = np.where(np.abs(1 - y * z) < 1e-3, z + 0.01, z)
    fd = central_difference(lambda v: margin_loss(v, y).value, zm)
    assert rel_err(margin_loss(zm, y).grad, fd) <= 1e-5


def test_predict_config_examples():
    y = np.array([[1.0, -1.0], [-1.0, 1.0]])
    assert np.array_equal(predict_config(y), y)
    assert np.all(predict_config(np.zeros((2, 2))) == 1.0)
    z = np.random.default_rng(0).standard_normal((3, 3))
    assert np.array_equal(predict_config(3.7 * z), predict_config(z))


@settings(max_examples=30, deadline=None)
@given(seeds, st.sampled_from([2, 3, 4]))
def test_saturated_local_loss_recovers_data(seed, L):
    # among saturated logits 50*c, the loss is smallest at c = y when h0 > 4
    rng = np.random.default_rng(seed)
    H = sample_hamiltonian(L, rng)
    y = random_spins(rng, (L, L))
    best = local_energy_loss(50 * y, y, H, h0=4.01, T=1e-3).value
    for _ in range(10):
        c = random_spins(rng, (L, L))
        if not np.array_equal(c, y):
            assert local_energy_loss(50 * c, y, H, h0=4.01, T=1e-3).value > best
    assert np.array_equal(predict_config(50 * y), y)
