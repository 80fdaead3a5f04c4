from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from walk_evolution import site_probability_trace
from walk_operators import (
    RecoveryCase, closed_form_recovery, coin_matrix, phase_distance, recovery_from_transfer_block,
    step_operator,
)
from walk_types import (
    CoinParameters, CoinState, Convention, Lattice, Topology, localized_state,
)

DEFAULT_ANGLES = tuple(k * np.pi / 4 for k in range(8))


@dataclass(frozen=True, eq=False)
class ClosedFormReport:
    """Deviation of simulated evolution from each closed-form expression."""

    table: pd.DataFrame

    @property
    def max_deviation(self) -> float:
        return float(self.table["deviation"].max()) if len(self.table) else 0.0

    @property
    def max_recovery_deviation(self) -> float:
        column = self.table["recovery_deviation"].dropna()
        return float(column.max()) if len(column) else 0.0

    def passed(self, tol: float = 1e-10) -> bool:
        return self.max_deviation < tol and self.max_recovery_deviation < tol


def _expected_columns(lattice: Lattice, site: int, block: np.ndarray) -> np.ndarray:
    expected = np.zeros((lattice.dimension, 2), dtype=np.complex128)
    rows = list(lattice.site_rows(site))
    expected[rows, :] = block
    return expected


def _line_identity_cases(n: int, theta: float, phi: float, l_max: int):
    """(t, site, block, recovery case or None) for the identity coin on an N-line."""
    sigma = theta + phi
    big_theta = sigma * n + (n % 2) * np.pi
    transfer = np.array([[0.0, -np.exp(1j * sigma)], [1.0, 0.0]])
    for l in range(1, l_max + 1):
        yield n * (2 * l - 1), n, np.exp(1j * (l - 1) * big_theta) * transfer, (
            RecoveryCase.IDENTITY_LINE if l == 1 else None)
        yield 2 * n * l, 1, np.exp(1j * l * big_theta) * np.eye(2), None


def _cycle_identity_cases(n: int, theta: float, phi: float, l_max: int):
    """Identity coin on an N-cycle: |↑> runs right, |↓> runs left picking up -e^{iσ} per step."""
    shifted = theta + phi + np.pi
    for l in range(1, l_max + 1):
        if n % 2 == 0:
            t = (2 * l - 1) * n // 2
            case = RecoveryCase.IDENTITY_CYCLE_EVEN if l == 1 else None
            yield t, n // 2 + 1, np.diag([1.0, np.exp(1j * t * shifted)]), case
        t = l * n
        case = RecoveryCase.IDENTITY_CYCLE_ODD if (l == 1 and n % 2 == 1) else None
        yield t, 1, np.diag([1.0, np.exp(1j * t * shifted)]), case


def _flip_local_cycle_cases(n: int, theta: float, phi: float, l_max: int):
    """Flip coin on an even local-convention cycle: ballistic with alternating coin."""
    sigma = theta + phi
    for l in range(1, l_max + 1):
        k = (2 * l - 1) * n // 2
        if k % 2 == 1:
            j = (k - 1) // 2
            block = np.exp(1j * j * sigma) * np.array([[0.0, np.exp(1j * theta)], [np.exp(1j * phi), 0.0]])
        else:
            block = np.exp(1j * k * sigma / 2) * np.eye(2)
        case = RecoveryCase.FLIP_LOCAL_CYCLE_ODDHALF if (l == 1 and k % 2 == 1) else None
        yield k, n // 2 + 1, block, case
        yield l * n, 1, np.exp(1j * l * n * sigma / 2) * np.eye(2), None


def verify_closed_forms(max_n: int = 16, l_max: int = 3, angle_grid: Iterable[float] = DEFAULT_ANGLES) -> ClosedFormReport:
    """
    Compare U^t against the analytic states for every (N, l, θ, φ)

    Families: identity coin on lines and cycles (spatial), flip coin on even
    local-convention cycles. At the first transfer time the analytic recovery coin is
    also compared with the numerically derived one.

    Args:
        max_n: Largest lattice size, sizes start at 2
        l_max: Number of round trips checked
        angle_grid: Values used for both θ and φ

    Returns:
        ClosedFormReport with one row per (family, N, t, θ, φ)
    """
    if max_n < 2:
        raise ValueError(f"max_n must be at least 2, got {max_n}")
    if l_max < 1:
        raise ValueError(f"l_max must be at least 1, got {l_max}")
    angles = list(angle_grid)

    families = [
        ("identity-line", 1.0, Topology.LINE, Convention.SPATIAL, _line_identity_cases),
        ("identity-cycle", 1.0, Topology.CYCLE, Convention.SPATIAL, _cycle_identity_cases),
        ("flip-local-cycle", 0.0, Topology.CYCLE, Convention.LOCAL, _flip_local_cycle_cases),
    ]

    rows = []
    for family, rho, topology, convention, cases in families:
        for n in range(2, max_n + 1):
            if convention is Convention.LOCAL and n % 2 == 1:
                continue
            lattice = Lattice(topology, n, convention)
            source_cols = list(lattice.site_rows(lattice.source_site))
            for theta in angles:
                for phi in angles:
                    coin = CoinParameters(rho, theta, phi)
                    u = step_operator(coin, lattice)
                    for t, site, block, case in sorted(cases(n, theta, phi, l_max), key=lambda c: c[0]):
                        actual = u.power(t)[:, source_cols]
                        deviation = float(np.max(np.abs(actual - _expected_columns(lattice, site, block))))
                        recovery_deviation = np.nan
                        if case is not None:
                            simulated = actual[list(lattice.site_rows(site)), :]
                            numeric = recovery_from_transfer_block(simulated).params
                            analytic = closed_form_recovery(case, lattice, coin)
                            recovery_deviation = phase_distance(coin_matrix(numeric), coin_matrix(analytic))
                        rows.append({
                            "family": family, "n_sites": n, "t": t, "site": site,
                            "theta": theta, "phi": phi, "deviation": deviation,
                            "recovery_deviation": recovery_deviation,
                        })
    return ClosedFormReport(pd.DataFrame(rows))


@dataclass(frozen=True)
class FlipLineWitness:
    """Evidence that the flip coin on a local-convention line never transfers a qubit."""

    n_sites: int
    horizon: int
    initial: CoinState
    max_target_probability: float
    min_source_probability: float
    transfer_cap: float

    @property
    def transfers(self) -> bool:
        return self.max_target_probability > 1.0 - 1e-9

    def to_record(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "horizon": self.horizon,
            **self.initial.to_record(),
            "max_target_probability": self.max_target_probability,
            "min_source_probability": self.min_source_probability,
            "transfer_cap": self.transfer_cap,
            "transfers": self.transfers,
        }


def flip_line_no_pst_witness(n: int, horizon: Optional[int] = None, initial: Optional[CoinState] = None,
                             theta: float = 0.0, phi: float = 0.0) -> FlipLineWitness:
    """
    Run the flip coin on an N-line with the local convention

    The coin turns the |↑> part at site 1 into |↓>, which has no edge there, so the
    boundary sends it back as |↑> on the spot. Only |β|² can ever reach site N.

    Args:
        n: Line length
        horizon: Steps simulated, defaults to 50·N
        initial: Coin state at site 1, defaults to (|↑>+|↓>)/√2

    Returns:
        FlipLineWitness
    """
    lattice = Lattice(Topology.LINE, n, Convention.LOCAL)
    horizon = 50 * n if horizon is None else horizon
    initial = CoinState(2 ** -0.5, 2 ** -0.5) if initial is None else initial
    u = step_operator(CoinParameters.flip(theta, phi), lattice)
    state = localized_state(lattice, initial)
    target = site_probability_trace(state, u, horizon, n)
    source = site_probability_trace(state, u, horizon, 1)
    return FlipLineWitness(
        n_sites=n,
        horizon=horizon,
        initial=initial,
        max_target_probability=float(target[1:].max()),
        min_source_probability=float(source.min()),
        transfer_cap=abs(initial.beta) ** 2,
    )
