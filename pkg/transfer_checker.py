import sys
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from walk_evolution import detect_periodicity, extract_block, n_periodicity, localized_site
from walk_operators import (
    DecompositionResult, closed_form_recovery, coin_layer, coin_matrix, phase_distance,
    recovery_cases_for, recovery_from_transfer_block, step_operator,
)
from walk_types import (
    CoinParameters, CoinState, Convention, Lattice, PeriodicityResult, TRANSFER_TOLERANCE,
    Topology, UnitaryOperator, bloch_to_coin, canonical_angle, localized_state, unitarity_residual,
)

REPORT_SCHEMA = 1
DEFAULT_HORIZON_PER_SITE = 50
DEFAULT_RHO_GRID = tuple(k / 8 for k in range(9))
VERIFY_FIDELITY_TOLERANCE = 1e-9
UNIQUENESS_STATES = 10


def default_horizon(lattice: Lattice) -> int:
    return DEFAULT_HORIZON_PER_SITE * lattice.n_sites


def bloch_samples(n_theta: int = 8, n_phi: int = 8, include_poles: bool = True) -> List[CoinState]:
    """
    Coin states spread over the Bloch sphere

    Args:
        n_theta: Interior polar rows, θ_b = (i+1)π/(n_theta+1)
        n_phi: Azimuth columns, φ_b = 2πj/n_phi
        include_poles: Append |↑> and |↓>

    Returns:
        n_theta * n_phi (+2) coin states
    """
    states = [
        bloch_to_coin((i + 1) * np.pi / (n_theta + 1), 2.0 * np.pi * j / n_phi)
        for i in range(n_theta)
        for j in range(n_phi)
    ]
    if include_poles:
        states += [CoinState.up(), CoinState.down()]
    return states


@dataclass(frozen=True)
class TransferEvent:
    """A time and site where every coin state is found with probability 1."""

    t: int
    site: int
    block: np.ndarray = field(compare=False)
    phase: float = 0.0
    coin_state: str = "psi0"

    def to_record(self) -> dict:
        return {"t": self.t, "x": self.site, "coin_state": self.coin_state, "phase": self.phase}


@dataclass(frozen=True)
class PSTReport:
    """Outcome of a perfect-state-transfer check on one lattice/coin pair."""

    lattice: Lattice
    coin: CoinParameters
    target: int
    certified: bool
    residual: float
    horizon: int
    transfer_time: Optional[int] = None
    recovery: Optional[CoinParameters] = None
    global_phase: Optional[float] = None
    period: Optional[PeriodicityResult] = None
    n_period: Optional[int] = None
    later_transfer_times: tuple = ()
    verification_fidelity: Optional[float] = None
    uniqueness_deviation: Optional[float] = None
    closed_form_deviation: Optional[float] = None
    diagnostics: str = ""

    def to_record(self) -> dict:
        """JSON-ready report."""
        return {
            "schema": REPORT_SCHEMA,
            "lattice": self.lattice.to_record(),
            "coin": self.coin.to_record(),
            "transfer_time": self.transfer_time,
            "target": self.target,
            "recovery": None if self.recovery is None else self.recovery.to_record(),
            "global_phase": self.global_phase,
            "period": None if self.period is None else self.period.period,
            "period_phase": None if self.period is None else self.period.phase,
            "n_period": self.n_period,
            "certified": self.certified,
            "residual": self.residual,
            "horizon": self.horizon,
            "later_transfer_times": list(self.later_transfer_times),
            "verification_fidelity": self.verification_fidelity,
            "uniqueness_deviation": self.uniqueness_deviation,
            "closed_form_deviation": self.closed_form_deviation,
            "diagnostics": self.diagnostics,
        }

    def to_row(self) -> dict:
        """Flat row for sweep tables."""
        return {
            "topology": self.lattice.topology.value,
            "n_sites": self.lattice.n_sites,
            "convention": self.lattice.direction_convention.value,
            "rho": self.coin.rho,
            "theta": self.coin.theta,
            "phi": self.coin.phi,
            "certified": self.certified,
            "transfer_time": self.transfer_time,
            "target": self.target,
            "recovery_rho": None if self.recovery is None else self.recovery.rho,
            "recovery_theta": None if self.recovery is None else self.recovery.theta,
            "recovery_phi": None if self.recovery is None else self.recovery.phi,
            "global_phase": self.global_phase,
            "period": None if self.period is None else self.period.period,
            "n_period": self.n_period,
            "residual": self.residual,
        }


def verify_recovery(lattice: Lattice, coin: CoinParameters, transfer_time: int,
                    recovery: CoinParameters, samples: Optional[Sequence[CoinState]] = None) -> float:
    """
    Replay U^t followed by the recovery coin on sample states

    Returns:
        Minimum fidelity at the target over the samples
    """
    samples = bloch_samples() if samples is None else samples
    u = step_operator(coin, lattice)
    composite = coin_layer(recovery, lattice).matrix @ u.power(transfer_time)
    target = lattice.target_site
    rows = list(lattice.site_rows(target))

    worst = 1.0
    for psi in samples:
        final = composite @ localized_state(lattice, psi).amplitudes
        worst = min(worst, abs(np.vdot(psi.vector, final[rows])))
    return float(worst)


def recovery_uniqueness(lattice: Lattice, coin: CoinParameters, transfer_time: int,
                        n_states: int = UNIQUENESS_STATES, seed: int = 7) -> float:
    """
    Rebuild the transfer map from pairs of orthogonal initial states and compare
    the recoveries they imply

    Returns:
        Largest phase-insensitive deviation between any derived recovery and the first one
    """
    rng = np.random.default_rng(seed)
    u = step_operator(coin, lattice)
    power = u.power(transfer_time)
    rows = list(lattice.site_rows(lattice.target_site))

    recoveries = []
    for _ in range(n_states):
        psi = bloch_to_coin(np.arccos(rng.uniform(-1.0, 1.0)), rng.uniform(0.0, 2.0 * np.pi))
        psi_perp = psi.orthogonal()
        inputs = np.column_stack([psi.vector, psi_perp.vector])
        outputs = np.column_stack([
            (power @ localized_state(lattice, psi).amplitudes)[rows],
            (power @ localized_state(lattice, psi_perp).amplitudes)[rows],
        ])
        block = outputs @ inputs.conj().T
        recoveries.append(recovery_from_transfer_block(block).matrix())

    return max(phase_distance(r, recoveries[0]) for r in recoveries)


class TransferChecker:
    """Scan U^t for a perfect transfer from site 1 to the target site"""

    def __init__(self, lattice: Lattice, coin: CoinParameters, horizon: Optional[int] = None,
                 tolerance: float = TRANSFER_TOLERANCE):
        """
        Args:
            lattice: Lattice with a unique target site
            coin: Coin parameters of the walk
            horizon: Largest t scanned, defaults to 50·N
            tolerance: Residual max|B†B - I| accepted as perfect
        """
        horizon = default_horizon(lattice) if horizon is None else horizon
        if isinstance(horizon, bool) or not isinstance(horizon, (int, np.integer)):
            raise TypeError(f"horizon must be an integer, got {horizon!r}")
        if horizon <= 0:
            raise ValueError(f"horizon must be positive, got {horizon}")
        self.lattice = lattice
        self.coin = coin
        self.target = lattice.target_site
        self.horizon = int(horizon)
        self.tolerance = tolerance
        self.operator = step_operator(coin, lattice)
        self.transfer_times = []
        self.blocks = {}
        self.best_residual = np.inf
        self.best_time = None

    def scan(self) -> List[int]:
        """Every t in 1..horizon whose source-to-target block is unitary."""
        self.transfer_times = []
        self.blocks = {}
        power = np.eye(self.lattice.dimension, dtype=np.complex128)
        for t in range(1, self.horizon + 1):
            power = self.operator.matrix @ power
            block = extract_block(power, self.lattice, self.lattice.source_site, self.target)
            residual = unitarity_residual(block)
            if residual < self.best_residual:
                self.best_residual, self.best_time = residual, t
            if residual < self.tolerance:
                self.transfer_times.append(t)
                self.blocks[t] = block
        return self.transfer_times

    def run(self) -> PSTReport:
        """
        Certify the smallest transfer time and attach recovery and periodicity

        Returns:
            PSTReport, certified or not
        """
        self.scan()
        if not self.transfer_times:
            return PSTReport(
                lattice=self.lattice, coin=self.coin, target=self.target, certified=False,
                residual=float(self.best_residual), horizon=self.horizon,
                diagnostics=f"no perfect transfer within {self.horizon} steps; "
                            f"smallest residual {self.best_residual:.3e} at t={self.best_time}",
            )

        t = self.transfer_times[0]
        block = self.blocks[t]
        recovery: DecompositionResult = recovery_from_transfer_block(block, tol=self.tolerance)
        verification = verify_recovery(self.lattice, self.coin, t, recovery.params)
        uniqueness = recovery_uniqueness(self.lattice, self.coin, t)
        period = detect_periodicity(self.operator, max(self.horizon, 2 * t))

        composite = UnitaryOperator(
            coin_layer(recovery.params, self.lattice).matrix @ self.operator.power(t), self.lattice
        )
        n_period = n_periodicity(composite, self.lattice.source_site, 4 * self.lattice.n_sites + 4)

        certified = verification > 1.0 - VERIFY_FIDELITY_TOLERANCE and uniqueness < 1e-8
        closed_form = self.closed_form_deviation(recovery.params) if certified else None
        diagnostics = "" if certified else (
            f"transfer block found at t={t} but replay fidelity {verification:.12f}, "
            f"recovery spread {uniqueness:.3e}"
        )
        return PSTReport(
            lattice=self.lattice, coin=self.coin, target=self.target, certified=certified,
            residual=float(unitarity_residual(block)), horizon=self.horizon,
            transfer_time=t, recovery=recovery.params, global_phase=recovery.global_phase,
            period=period, n_period=n_period, later_transfer_times=tuple(self.transfer_times[1:]),
            verification_fidelity=verification, uniqueness_deviation=uniqueness,
            closed_form_deviation=closed_form, diagnostics=diagnostics,
        )

    def closed_form_deviation(self, recovery: CoinParameters) -> Optional[float]:
        """Largest phase-insensitive distance to a known analytic recovery, None when no family applies"""
        cases = recovery_cases_for(self.lattice, self.coin)
        if not cases:
            return None
        derived = coin_matrix(recovery)
        return max(
            phase_distance(coin_matrix(closed_form_recovery(case, self.lattice, self.coin)), derived)
            for case in cases
        )

    def get_statistics(self):
        """Scan summary, or None before a scan"""
        if self.best_time is None:
            return None
        return {
            'transfer_times': list(self.transfer_times),
            'first_transfer': self.transfer_times[0] if self.transfer_times else None,
            'best_residual': float(self.best_residual),
            'best_time': self.best_time,
        }

    def print_summary(self, report: PSTReport, stream=None):
        """Print a check result"""
        stream = sys.stderr if stream is None else stream
        print("\n" + "=" * 50, file=stream)
        print("TRANSFER CHECK", file=stream)
        print("=" * 50, file=stream)
        print(f"Lattice:            {self.lattice.describe()}", file=stream)
        print(f"Coin:               rho={self.coin.rho:.6g} theta={self.coin.theta:.6g} phi={self.coin.phi:.6g}", file=stream)
        print(f"Target site:        {self.target}", file=stream)
        print(f"Certified:          {report.certified}", file=stream)
        stats = self.get_statistics()
        if stats is not None:
            print(f"Transfer times:     {stats['transfer_times']}", file=stream)
            print(f"Best residual:      {stats['best_residual']:.3e} at t={stats['best_time']}", file=stream)
        if report.transfer_time is not None:
            rec = report.recovery
            print(f"Transfer time:      {report.transfer_time}", file=stream)
            print(f"Recovery coin:      rho={rec.rho:.6g} theta={rec.theta:.6g} phi={rec.phi:.6g}", file=stream)
            print(f"Global phase:       {report.global_phase:.6g}", file=stream)
            print(f"Period:             {report.period.period if report.period else 'none found'}", file=stream)
            print(f"n-period:           {report.n_period}", file=stream)
            if report.closed_form_deviation is not None:
                print(f"Closed-form check:  {report.closed_form_deviation:.3e}", file=stream)
        else:
            print(f"Diagnostics:        {report.diagnostics}", file=stream)
        print("=" * 50, file=stream)


def check_pst(lattice: Lattice, coin: CoinParameters, horizon: Optional[int] = None,
              tolerance: float = TRANSFER_TOLERANCE) -> PSTReport:
    """
    Certify perfect state transfer from site 1 to the target site

    Args:
        lattice: Line, or even cycle
        coin: Coin parameters
        horizon: Largest t scanned, defaults to 50·N

    Returns:
        PSTReport
    """
    return TransferChecker(lattice, coin, horizon, tolerance).run()


def _reference_entry(block: np.ndarray) -> complex:
    """Largest entry, scanning the a-column first."""
    column_major = block.T.reshape(-1)
    return complex(column_major[int(np.argmax(np.abs(column_major)))])


def describe_coin_map(block: np.ndarray, tol: float = 1e-9) -> str:
    """
    Readable form of the coin state B·(a, b) up to global phase

    Returns:
        'psi0' when B ∝ I, else e.g. '-b|up>+a|down>'
    """
    block = np.asarray(block, dtype=np.complex128)
    reference = _reference_entry(block)
    normalized = block * np.conj(reference) / abs(reference)
    if np.max(np.abs(normalized - np.eye(2))) < tol:
        return "psi0"

    terms = []
    for row, ket in enumerate(("|up>", "|down>")):
        for col, symbol in enumerate(("a", "b")):
            value = normalized[row, col]
            if abs(value) < tol:
                continue
            if abs(value - 1.0) < tol:
                coefficient = "+"
            elif abs(value + 1.0) < tol:
                coefficient = "-"
            elif abs(value.imag) < tol:
                coefficient = f"{value.real:+.6g}*"
            else:
                coefficient = f"+({value.real:.6g}{value.imag:+.6g}j)*"
            terms.append(f"{coefficient}{symbol}{ket}")
    text = "".join(terms)
    return text[1:] if text.startswith("+") else text


def transfer_events(lattice: Lattice, coin: CoinParameters, horizon: Optional[int] = None,
                    tolerance: float = TRANSFER_TOLERANCE) -> List[TransferEvent]:
    """
    Every (t, x) where all coin states sit on a single site, up to the first revival

    Args:
        lattice: Walk lattice
        coin: Coin parameters
        horizon: Largest t scanned, defaults to 50·N

    Returns:
        TransferEvent list ordered by t; ends at the first return to site 1 with B ∝ I
    """
    horizon = default_horizon(lattice) if horizon is None else horizon
    u = step_operator(coin, lattice)
    source = lattice.source_site
    events = []
    power = np.eye(lattice.dimension, dtype=np.complex128)
    for t in range(1, horizon + 1):
        power = u.matrix @ power
        site = localized_site(power, lattice, source, tolerance)
        if site is None:
            continue
        block = extract_block(power, lattice, source, site)
        label = describe_coin_map(block, tolerance)
        phase = canonical_angle(np.angle(_reference_entry(block))) if label == "psi0" else 0.0
        events.append(TransferEvent(t, site, block, phase, label))
        if site == source and label == "psi0":
            break
    return events


def sweep(topology: Topology, n_range: Iterable[int], rho_grid: Iterable[float] = DEFAULT_RHO_GRID,
          theta_grid: Iterable[float] = (0.0,), phi_grid: Optional[Iterable[float]] = None,
          horizon: Optional[int] = None, convention: Convention = Convention.SPATIAL,
          show_progress: bool = False) -> List[PSTReport]:
    """
    Run check_pst over a grid of lattices and coins

    Odd cycles have no antipode and are skipped.

    Args:
        topology: line or cycle
        n_range: Lattice sizes
        rho_grid: Coin ρ values
        theta_grid: Coin θ values
        phi_grid: Coin φ values, defaults to φ = 0
        horizon: Fixed horizon, defaults to 50·N per lattice

    Returns:
        Certified reports sorted by (N, ρ, θ, φ)
    """
    topology = Topology(topology)
    convention = Convention(convention)
    rho_grid, theta_grid = list(rho_grid), list(theta_grid)
    phis = [0.0] if phi_grid is None else list(phi_grid)

    cells = []
    for n in n_range:
        if topology is Topology.CYCLE and n % 2 == 1:
            continue
        for rho in rho_grid:
            for theta in theta_grid:
                for phi in phis:
                    cells.append((n, rho, theta, phi))

    results = []
    for n, rho, theta, phi in tqdm(cells, disable=not show_progress, desc="sweep", file=sys.stderr):
        lattice = Lattice(topology, n, convention)
        report = check_pst(lattice, CoinParameters(rho, theta, phi), horizon)
        if report.certified:
            results.append(report)

    results.sort(key=lambda r: (r.lattice.n_sites, r.coin.rho, r.coin.theta, r.coin.phi))
    return results


def sweep_table(reports: Sequence[PSTReport]) -> pd.DataFrame:
    """Sweep results as a DataFrame, one row per certified cell."""
    rows = [report.to_row() for report in reports]
    if not rows:
        return pd.DataFrame(columns=[
            "topology", "n_sites", "convention", "rho", "theta", "phi", "certified",
            "transfer_time", "target", "recovery_rho", "recovery_theta", "recovery_phi",
            "global_phase", "period", "n_period", "residual",
        ])
    return pd.DataFrame(rows)


def events_table(events: Sequence[TransferEvent], **labels) -> pd.DataFrame:
    """Transfer events as a DataFrame, with constant label columns prepended."""
    rows = [{**labels, **event.to_record()} for event in events]
    return pd.DataFrame(rows, columns=[*labels, "t", "x", "coin_state", "phase"])
