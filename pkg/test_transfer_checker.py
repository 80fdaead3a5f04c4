import numpy as np
import pytest

from transfer_checker import (
    TransferChecker, bloch_samples, check_pst, describe_coin_map, recovery_uniqueness, sweep,
    sweep_table, transfer_events, verify_recovery,
)
from walk_evolution import evolve, fidelity
from walk_operators import coin_layer, step_operator
from walk_types import (
    Coin, CoinParameters, Convention, Lattice, Topology, bloch_to_coin, localized_state,
)

LINE_2 = Lattice(Topology.LINE, 2)
CYCLE_4 = Lattice(Topology.CYCLE, 4)


def test_bloch_samples_cover_grid_and_poles():
    samples = bloch_samples()
    assert len(samples) == 66
    assert abs(samples[-2].alpha) == 1 and abs(samples[-1].beta) == 1


def test_two_line_quarter_coin_is_certified():
    report = check_pst(LINE_2, CoinParameters(0.25))
    assert report.certified
    assert report.transfer_time == 6
    assert report.target == 2
    assert report.recovery.rho == pytest.approx(0.0, abs=1e-12)
    assert np.exp(1j * report.recovery.phi) == pytest.approx(-1.0, abs=1e-12)
    assert report.period.period == 12
    assert report.n_period == 2
    assert report.residual < 1e-9
    assert report.later_transfer_times == tuple(range(18, 101, 12))


def test_two_line_half_coin_is_certified_at_four():
    report = check_pst(LINE_2, CoinParameters.hadamard())
    assert report.certified
    assert report.transfer_time == 4
    assert report.period.period == 8


def test_six_line_hadamard_is_not_certified():
    report = check_pst(Lattice(Topology.LINE, 6), CoinParameters.hadamard(), horizon=300)
    assert not report.certified
    assert report.transfer_time is None
    assert report.recovery is None
    assert "no perfect transfer" in report.diagnostics


def test_identity_coin_line_transfers_after_n_steps():
    for n in range(2, 9):
        report = check_pst(Lattice(Topology.LINE, n), CoinParameters.identity(0.3, 1.7))
        assert report.certified
        assert report.transfer_time == n
        assert report.period.period == 2 * n
        assert report.n_period == 2


def test_identity_coin_even_cycle_transfers_after_half_turn():
    report = check_pst(Lattice(Topology.CYCLE, 8), CoinParameters.identity())
    assert report.certified
    assert report.transfer_time == 4
    assert report.target == 5


def test_two_cycle_transfers_in_one_step_for_any_coin():
    lattice = Lattice(Topology.CYCLE, 2)
    for rho in np.linspace(0, 1, 9):
        report = check_pst(lattice, CoinParameters(rho, 0.6, 1.9))
        assert report.certified
        assert report.transfer_time == 1


def test_flip_coin_local_cycle_transfers_for_either_anchor():
    coin = CoinParameters.flip(0.5, 1.2)
    for anchor in (Coin.UP, Coin.DOWN):
        report = check_pst(Lattice(Topology.CYCLE, 6, Convention.LOCAL, anchor), coin)
        assert report.certified
        assert report.transfer_time == 3


def test_flip_coin_local_line_never_transfers():
    report = check_pst(Lattice(Topology.LINE, 4, Convention.LOCAL), CoinParameters.flip())
    assert not report.certified


def test_odd_cycle_is_rejected():
    with pytest.raises(ValueError):
        check_pst(Lattice(Topology.CYCLE, 5), CoinParameters.identity())


def test_horizon_must_be_positive():
    with pytest.raises(ValueError):
        check_pst(LINE_2, CoinParameters.hadamard(), horizon=0)


def test_certified_recovery_survives_replay_on_random_states():
    rng = np.random.default_rng(31)
    cases = [
        (LINE_2, CoinParameters(0.25)),
        (CYCLE_4, CoinParameters(0.5, np.pi, 0.0)),
        (Lattice(Topology.LINE, 7), CoinParameters.identity(2.0, 0.5)),
        (Lattice(Topology.CYCLE, 6, Convention.LOCAL), CoinParameters.flip(0.3, 0.8)),
    ]
    for lattice, coin in cases:
        report = check_pst(lattice, coin)
        assert report.certified
        u = step_operator(coin, lattice)
        recover = coin_layer(report.recovery, lattice)
        for _ in range(64):
            psi = bloch_to_coin(np.arccos(rng.uniform(-1, 1)), rng.uniform(0, 2 * np.pi))
            final = evolve(evolve(localized_state(lattice, psi), report.transfer_time, u), 1, recover)
            assert fidelity(final, psi, lattice.target_site) > 1 - 1e-9


def test_verify_recovery_detects_wrong_coin():
    report = check_pst(LINE_2, CoinParameters(0.25))
    assert verify_recovery(LINE_2, CoinParameters(0.25), 6, report.recovery) > 1 - 1e-12
    assert verify_recovery(LINE_2, CoinParameters(0.25), 6, CoinParameters.hadamard()) < 0.9


def test_recovery_is_unique_up_to_phase():
    assert recovery_uniqueness(LINE_2, CoinParameters(0.25), 6) < 1e-10
    assert recovery_uniqueness(CYCLE_4, CoinParameters.hadamard(), 4) < 1e-10


def test_checker_statistics_and_summary(capsys):
    checker = TransferChecker(LINE_2, CoinParameters.hadamard(), horizon=20)
    assert checker.get_statistics() is None
    report = checker.run()
    stats = checker.get_statistics()
    assert stats['first_transfer'] == 4
    assert stats['transfer_times'] == [4, 12, 20]
    checker.print_summary(report)
    err = capsys.readouterr().err
    assert "Transfer time:      4" in err
    assert "Transfer times:     [4, 12, 20]" in err
    assert "Closed-form check" not in err


@pytest.mark.parametrize("lattice, coin", [
    (Lattice(Topology.LINE, 5), CoinParameters.identity(0.7, 1.3)),
    (CYCLE_4, CoinParameters.identity(0.2, 2.1)),
    (Lattice(Topology.CYCLE, 6, Convention.LOCAL), CoinParameters.flip(0.4, 1.0)),
])
def test_certified_recovery_agrees_with_closed_form(lattice, coin):
    report = check_pst(lattice, coin)
    assert report.certified
    assert report.closed_form_deviation is not None
    assert report.closed_form_deviation < 1e-9
    assert report.to_record()["closed_form_deviation"] == report.closed_form_deviation


def test_closed_form_deviation_absent_without_known_family():
    assert check_pst(LINE_2, CoinParameters.hadamard()).closed_form_deviation is None
    assert check_pst(Lattice(Topology.LINE, 6), CoinParameters.hadamard(), horizon=300).closed_form_deviation is None


def test_report_record_has_schema_keys():
    record = check_pst(LINE_2, CoinParameters(0.25)).to_record()
    assert record["schema"] == 1
    for key in ("lattice", "coin", "transfer_time", "target", "recovery", "global_phase",
                "period", "n_period", "certified", "residual"):
        assert key in record


def test_describe_coin_map():
    assert describe_coin_map(np.eye(2)) == "psi0"
    assert describe_coin_map(-1j * np.eye(2)) == "psi0"
    assert describe_coin_map(np.array([[0, -1], [1, 0]])) == "-b|up>+a|down>"


def test_two_line_transfer_events():
    expected = {
        0.25: [(6, 2, "-b|up>+a|down>"), (12, 1, "psi0")],
        0.5: [(4, 2, "-b|up>+a|down>"), (8, 1, "psi0")],
        0.75: [(6, 1, "psi0")],
    }
    for rho, rows in expected.items():
        events = transfer_events(LINE_2, CoinParameters(rho))
        assert [(e.t, e.site, e.coin_state) for e in events] == rows


def test_four_cycle_transfer_events():
    expected = {
        0.25: [(6, 3), (12, 1)],
        0.5: [(4, 3), (8, 1)],
        0.75: [(6, 1)],
    }
    for rho, rows in expected.items():
        events = transfer_events(CYCLE_4, CoinParameters(rho))
        assert [(e.t, e.site) for e in events] == rows
        assert all(e.coin_state == "psi0" for e in events)
        assert all(e.phase == pytest.approx(0.0, abs=1e-9) for e in events)


def test_four_cycle_theta_pi_picks_up_a_sign():
    events = transfer_events(CYCLE_4, CoinParameters(0.5, np.pi, 0.0))
    assert (events[0].t, events[0].site) == (4, 3)
    assert events[0].phase == pytest.approx(np.pi, abs=1e-9)


def test_four_cycle_occupation_pattern_over_one_revival():
    lattice = CYCLE_4
    for rho, transfer, revival in ((0.5, 4, 8), (0.25, 6, 12)):
        u = step_operator(CoinParameters(rho), lattice)
        for psi in bloch_samples(4, 4):
            start = localized_state(lattice, psi)
            assert evolve(start, transfer, u).probabilities()[2] == pytest.approx(1.0, abs=1e-9)
            assert evolve(start, revival, u).probabilities()[0] == pytest.approx(1.0, abs=1e-9)


def catalogue(reports):
    return {(r.lattice.n_sites, r.coin.rho, r.transfer_time) for r in reports}


def test_line_sweep_finds_exactly_the_known_families():
    reports = sweep(Topology.LINE, range(2, 11))
    expected = {(2, 0.25, 6), (2, 0.5, 4)} | {(n, 1.0, n) for n in range(2, 11)}
    assert catalogue(reports) == expected


def test_cycle_sweep_finds_exactly_the_known_families():
    reports = sweep(Topology.CYCLE, range(2, 11))
    expected = {(2, k / 8, 1) for k in range(9)}
    expected |= {(4, 0.25, 6), (4, 0.5, 4)}
    expected |= {(n, 1.0, n // 2) for n in (4, 6, 8, 10)}
    assert catalogue(reports) == expected


def test_sweep_edge_cases():
    assert sweep(Topology.LINE, range(2, 5), rho_grid=[]) == []
    assert sweep(Topology.CYCLE, [3, 5, 7]) == []
    assert sweep_table([]).empty


def test_sweep_table_is_sorted():
    table = sweep_table(sweep(Topology.LINE, [3, 2], rho_grid=[1.0, 0.5]))
    assert list(zip(table["n_sites"], table["rho"])) == [(2, 0.5), (2, 1.0), (3, 1.0)]


def test_sweep_keeps_phi_at_zero_unless_a_phi_grid_is_given():
    reports = sweep(Topology.CYCLE, [2], rho_grid=[0.5], theta_grid=[np.pi / 2])
    assert len(reports) == 1
    assert reports[0].coin.theta == pytest.approx(np.pi / 2)
    assert reports[0].coin.phi == 0.0

    both = sweep(Topology.CYCLE, [2], rho_grid=[0.5], theta_grid=[np.pi / 2], phi_grid=[0.0, np.pi / 2])
    assert sorted(r.coin.phi for r in both) == [0.0, pytest.approx(np.pi / 2)]
