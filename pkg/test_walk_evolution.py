import numpy as np
import pytest

from transfer_checker import bloch_samples
from walk_evolution import (
    detect_periodicity, evolve, evolve_map, fidelity, n_periodicity, probability_series,
    site_probability, site_probability_trace, transfer_block,
)
from walk_operators import coin_layer, recovery_from_transfer_block, step_operator
from walk_types import (
    CoinParameters, CoinState, Convention, Lattice, Topology, UnitaryOperator, bloch_to_coin,
    inner_product, localized_state,
)

HADAMARD = CoinParameters.hadamard()


def test_hadamard_four_cycle_returns_after_eight_steps():
    lattice = Lattice(Topology.CYCLE, 4)
    start = localized_state(lattice, CoinState.up())
    final = evolve(start, 8, step_operator(HADAMARD, lattice))
    assert final.step_count == 8
    assert abs(abs(inner_product(start, final)) - 1) < 1e-12
    assert site_probability(final, 1) == pytest.approx(1.0, abs=1e-12)


def test_zero_steps_is_identity():
    lattice = Lattice(Topology.LINE, 3)
    start = localized_state(lattice, bloch_to_coin(1.0, 2.0))
    final = evolve(start, 0, step_operator(HADAMARD, lattice))
    np.testing.assert_array_equal(final.amplitudes, start.amplitudes)


def test_evolve_rejects_bad_input():
    lattice = Lattice(Topology.LINE, 3)
    start = localized_state(lattice, CoinState.up())
    with pytest.raises(ValueError):
        evolve(start, -1, step_operator(HADAMARD, lattice))
    with pytest.raises(TypeError):
        evolve(start, 1.5, step_operator(HADAMARD, lattice))
    with pytest.raises(ValueError):
        evolve(start, 1, step_operator(HADAMARD, Lattice(Topology.LINE, 4)))


def test_two_line_half_coin_transfers_at_four_steps():
    lattice = Lattice(Topology.LINE, 2)
    psi = bloch_to_coin(0.7, 1.3)
    final = evolve_map(localized_state(lattice, psi), 4, HADAMARD)
    np.testing.assert_allclose(final.coin_at(2), [-psi.beta, psi.alpha], atol=1e-14)
    assert site_probability(final, 1) < 1e-28


def test_evolve_map_matches_dense_evolution():
    rng = np.random.default_rng(21)
    line = Lattice(Topology.LINE, 6)
    u = step_operator(HADAMARD, line)
    for _ in range(20):
        start = localized_state(line, bloch_to_coin(rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi)))
        np.testing.assert_allclose(evolve_map(start, 100, HADAMARD).amplitudes,
                                   evolve(start, 100, u).amplitudes, atol=1e-12)

    cycle = Lattice(Topology.CYCLE, 8)
    coin = CoinParameters(0.25)
    start = localized_state(cycle, bloch_to_coin(0.3, 0.9), 2)
    np.testing.assert_allclose(evolve_map(start, 50, coin).amplitudes,
                               evolve(start, 50, step_operator(coin, cycle)).amplitudes, atol=1e-12)


def test_evolve_map_matches_dense_on_random_cells():
    rng = np.random.default_rng(22)
    for _ in range(100):
        topology = Topology.LINE if rng.random() < 0.5 else Topology.CYCLE
        lattice = Lattice(topology, int(rng.integers(2, 9)))
        coin = CoinParameters(rng.uniform(0, 1), rng.uniform(0, 2 * np.pi), rng.uniform(0, 2 * np.pi))
        start = localized_state(lattice, bloch_to_coin(rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi)),
                                int(rng.integers(1, lattice.n_sites + 1)))
        steps = int(rng.integers(0, 40))
        np.testing.assert_allclose(evolve_map(start, steps, coin).amplitudes,
                                   evolve(start, steps, step_operator(coin, lattice)).amplitudes, atol=1e-12)


def test_evolve_map_rejects_local_convention():
    lattice = Lattice(Topology.CYCLE, 4, Convention.LOCAL)
    with pytest.raises(ValueError):
        evolve_map(localized_state(lattice, CoinState.up()), 3, CoinParameters.flip())


def test_norm_is_conserved_over_long_runs():
    lattice = Lattice(Topology.LINE, 6)
    state = evolve_map(localized_state(lattice, bloch_to_coin(1.1, 0.4)), 15000, HADAMARD)
    assert abs(state.norm_squared() - 1) < 1e-10


def test_fidelity_ignores_global_phase():
    lattice = Lattice(Topology.CYCLE, 4)
    state = evolve(localized_state(lattice, bloch_to_coin(0.8, 2.2)), 5, step_operator(HADAMARD, lattice))
    target = bloch_to_coin(1.2, 0.3)
    for phase in (1j, -1.0):
        rotated = type(state)(state.lattice, phase * state.amplitudes, state.step_count)
        assert abs(fidelity(rotated, target, 2) - fidelity(state, target, 2)) < 1e-14
    rotated_target = CoinState(np.exp(0.7j) * target.alpha, np.exp(0.7j) * target.beta)
    assert abs(fidelity(state, rotated_target, 2) - fidelity(state, target, 2)) < 1e-14


def test_site_probability_and_fidelity_of_localized_state():
    lattice = Lattice(Topology.LINE, 3)
    psi = bloch_to_coin(0.5, 0.5)
    state = localized_state(lattice, psi, 2)
    assert site_probability(state, 2) == pytest.approx(1.0)
    assert site_probability(state, 1) == 0.0
    assert fidelity(state, psi, 2) == pytest.approx(1.0)
    assert fidelity(state, psi.orthogonal(), 2) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        site_probability(state, 0)


def test_transfer_block_examples():
    u = step_operator(HADAMARD, Lattice(Topology.LINE, 2))
    block = transfer_block(u, 4, 1, 2)
    np.testing.assert_allclose(block.block, [[0, -1], [1, 0]], atol=1e-14)
    assert block.is_perfect()

    leaky = transfer_block(step_operator(HADAMARD, Lattice(Topology.LINE, 6)), 6, 1, 6)
    assert leaky.residual > 1e-3
    assert not leaky.is_perfect()


def test_perfect_block_means_probability_one_for_every_state():
    lattice = Lattice(Topology.LINE, 2)
    u = step_operator(CoinParameters(0.25), lattice)
    block = transfer_block(u, 6, 1, 2)
    assert block.is_perfect()
    for psi in bloch_samples():
        final = evolve(localized_state(lattice, psi), 6, u)
        assert 1 - site_probability(final, 2) < 1e-9

    imperfect = transfer_block(u, 5, 1, 2)
    assert not imperfect.is_perfect()
    probabilities = [site_probability(evolve(localized_state(lattice, psi), 5, u), 2) for psi in bloch_samples()]
    assert min(probabilities) < 1 - 1e-9


@pytest.mark.parametrize("lattice, rho, period", [
    (Lattice(Topology.LINE, 2), 0.75, 6),
    (Lattice(Topology.LINE, 2), 0.5, 8),
    (Lattice(Topology.LINE, 2), 0.25, 12),
    (Lattice(Topology.CYCLE, 4), 0.5, 8),
    (Lattice(Topology.CYCLE, 4), 0.25, 12),
    (Lattice(Topology.CYCLE, 4), 0.75, 6),
])
def test_detect_periodicity(lattice, rho, period):
    result = detect_periodicity(step_operator(CoinParameters(rho), lattice), 100)
    assert result is not None
    assert result.period == period
    assert result.n_period == 1


def test_identity_coin_line_period_is_twice_the_length():
    for n in range(2, 9):
        result = detect_periodicity(step_operator(CoinParameters.identity(0.2, 0.9), Lattice(Topology.LINE, n)), 100)
        assert result.period == 2 * n


def test_detect_periodicity_returns_none_within_short_horizon():
    assert detect_periodicity(step_operator(CoinParameters(0.25), Lattice(Topology.LINE, 2)), 11) is None


def composite_after_transfer(lattice, coin, t):
    u = step_operator(coin, lattice)
    block = transfer_block(u, t, lattice.source_site, lattice.target_site)
    recovery = recovery_from_transfer_block(block.block)
    return UnitaryOperator(coin_layer(recovery.params, lattice).matrix @ u.power(t), lattice)


def test_n_periodicity_examples():
    two_line = composite_after_transfer(Lattice(Topology.LINE, 2), CoinParameters(0.25), 6)
    assert n_periodicity(two_line, 1, 10) == 2

    identity_line = composite_after_transfer(Lattice(Topology.LINE, 5), CoinParameters.identity(0.4, 0.1), 5)
    assert n_periodicity(identity_line, 1, 20) == 2

    odd_cycle = Lattice(Topology.CYCLE, 5)
    u = step_operator(CoinParameters.identity(0.4, 0.1), odd_cycle)
    block = transfer_block(u, 5, 1, 1)
    recovery = recovery_from_transfer_block(block.block)
    composite = UnitaryOperator(coin_layer(recovery.params, odd_cycle).matrix @ u.power(5), odd_cycle)
    assert n_periodicity(composite, 1, 10) == 1


def test_n_periodicity_returns_none_when_walker_spreads():
    lattice = Lattice(Topology.LINE, 6)
    assert n_periodicity(step_operator(HADAMARD, lattice), 1, 30) is None


def test_probability_series_layout():
    lattice = Lattice(Topology.CYCLE, 4)
    series = probability_series(localized_state(lattice, CoinState.up()), step_operator(HADAMARD, lattice), 8)
    assert list(series.columns) == ["t", "x", "prob", "re_alpha", "im_alpha", "re_beta", "im_beta"]
    assert len(series) == 9 * 4
    totals = series.groupby("t")["prob"].sum()
    np.testing.assert_allclose(totals.values, 1.0, atol=1e-12)
    last = series[(series["t"] == 8) & (series["x"] == 1)]
    assert last["prob"].iloc[0] == pytest.approx(1.0, abs=1e-12)


def test_site_probability_trace_matches_series():
    lattice = Lattice(Topology.LINE, 4)
    u = step_operator(HADAMARD, lattice)
    start = localized_state(lattice, bloch_to_coin(0.4, 0.2))
    trace = site_probability_trace(start, u, 30, 4)
    series = probability_series(start, u, 30, sites=[4])
    np.testing.assert_allclose(trace, series["prob"].values, atol=1e-15)
