import sys
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from tqdm import tqdm

from walk_evolution import site_probability_trace
from walk_operators import coin_layer, step_operator
from walk_types import CoinParameters, CoinState, Lattice, UnitaryOperator, localized_state

PLATEAU_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class FidelityMap:
    """f(θ_b, φ_b) = max over 1 <= t <= horizon of the fidelity at the target site."""

    lattice: Lattice
    coin: CoinParameters
    horizon: int
    theta_b: NDArray[np.float64]
    phi_b: NDArray[np.float64]
    values: NDArray[np.float64]
    recovery: Optional[CoinParameters] = None

    def to_frame(self) -> pd.DataFrame:
        theta, phi = np.meshgrid(self.theta_b, self.phi_b, indexing="ij")
        return pd.DataFrame({
            "theta_b": theta.reshape(-1),
            "phi_b": phi.reshape(-1),
            "fidelity": self.values.reshape(-1),
        })


def fidelity_map(lattice: Lattice, coin: CoinParameters,
                 grid_resolution: Union[int, Tuple[int, int]] = 31,
                 horizon: Optional[int] = None, recovery: Optional[CoinParameters] = None,
                 show_progress: bool = False) -> FidelityMap:
    """
    Max-over-time transfer fidelity for every coin state on a Bloch grid

    Args:
        lattice: Walk lattice (its target site is measured)
        coin: Coin parameters
        grid_resolution: Points along θ_b ∈ [0, π] and φ_b ∈ [0, 2π], endpoints included
        horizon: Steps simulated, defaults to 50·N
        recovery: If given, each step is the composite (C'⊗I)·U

    Returns:
        FidelityMap with values shaped (n_theta, n_phi)
    """
    n_theta, n_phi = (grid_resolution, grid_resolution) if np.isscalar(grid_resolution) else grid_resolution
    if n_theta < 2 or n_phi < 2:
        raise ValueError(f"grid resolution must be at least 2x2, got {n_theta}x{n_phi}")
    horizon = 50 * lattice.n_sites if horizon is None else int(horizon)
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")

    u = step_operator(coin, lattice)
    if recovery is not None:
        u = coin_layer(recovery, lattice).compose(u)

    theta_b = np.linspace(0.0, np.pi, n_theta)
    phi_b = np.linspace(0.0, 2.0 * np.pi, n_phi)
    theta, phi = np.meshgrid(theta_b, phi_b, indexing="ij")
    alpha = np.cos(theta / 2.0).reshape(-1).astype(np.complex128)
    beta = (np.exp(1j * phi) * np.sin(theta / 2.0)).reshape(-1)

    # one column per grid state
    states = np.zeros((lattice.dimension, alpha.size), dtype=np.complex128)
    up, down = lattice.site_rows(lattice.source_site)
    states[up], states[down] = alpha, beta

    target_up, target_down = lattice.site_rows(lattice.target_site)
    best = np.zeros(alpha.size)
    for _ in tqdm(range(horizon), disable=not show_progress, desc="fidelity map", file=sys.stderr):
        states = u.matrix @ states
        overlap = np.abs(np.conj(alpha) * states[target_up] + np.conj(beta) * states[target_down])
        np.maximum(best, overlap, out=best)

    return FidelityMap(lattice, coin, horizon, theta_b, phi_b,
                       np.minimum(best, 1.0).reshape(n_theta, n_phi), recovery)


@dataclass(frozen=True, eq=False)
class PeakAnalysis:
    """Peaks of P_{t,site} above a threshold and the spacing between them."""

    site: int
    threshold: float
    horizon: int
    peak_times: NDArray[np.int64]
    peak_values: NDArray[np.float64]
    envelope_window: Optional[int] = None
    envelope_times: Optional[NDArray[np.int64]] = None
    envelope_values: Optional[NDArray[np.float64]] = None

    @property
    def gaps(self) -> NDArray[np.int64]:
        return np.diff(self.peak_times)

    @property
    def envelope_gaps(self) -> NDArray[np.int64]:
        if self.envelope_times is None:
            return np.array([], dtype=np.int64)
        return np.diff(self.envelope_times)

    def to_frame(self) -> pd.DataFrame:
        envelope = set() if self.envelope_times is None else set(self.envelope_times.tolist())
        return pd.DataFrame({
            "t": self.peak_times,
            "prob": self.peak_values,
            "gap": np.concatenate([[0], self.gaps]).astype(int) if len(self.peak_times) else [],
            "envelope": [int(t) in envelope for t in self.peak_times],
        })


class PeakDetector:
    """Finds local maxima in a probability trace"""

    def __init__(self, trace: NDArray[np.float64]):
        """
        Args:
            trace: P_t for t = 0..T
        """
        self.trace = np.asarray(trace, dtype=float)

    def find_peaks(self, threshold: float = 0.5) -> List[Tuple[int, float]]:
        """
        Strict local maxima at or above the threshold

        A flat run of equal values counts once, at its first step.

        Returns:
            List of (t, value) tuples
        """
        trace = self.trace
        if trace.size < 3:
            return []

        # collapse plateaus into runs
        change = np.abs(np.diff(trace)) > PLATEAU_TOLERANCE
        starts = np.concatenate([[0], np.nonzero(change)[0] + 1])
        values = trace[starts]

        peaks = []
        for k in range(1, len(starts) - 1):
            if values[k] > values[k - 1] and values[k] > values[k + 1] and values[k] >= threshold:
                peaks.append((int(starts[k]), float(values[k])))
        return peaks

    def find_envelope_peaks(self, peaks: List[Tuple[int, float]], window: int) -> List[Tuple[int, float]]:
        """
        Peaks that are the highest within ±window steps

        Args:
            peaks: (t, value) tuples from find_peaks
            window: Half-width in steps

        Returns:
            Subset of peaks; ties keep the earliest
        """
        if window <= 0:
            raise ValueError(f"envelope window must be positive, got {window}")
        times = np.array([t for t, _ in peaks], dtype=np.int64)
        values = np.array([v for _, v in peaks])

        envelope = []
        for i, (t, v) in enumerate(peaks):
            lo, hi = np.searchsorted(times, t - window), np.searchsorted(times, t + window, side="right")
            neighbours = values[lo:hi]
            earlier = values[lo:i]
            if v >= neighbours.max() and not np.any(earlier >= v):
                envelope.append((t, v))
        return envelope


def peak_analysis(lattice: Lattice, coin: CoinParameters, initial: CoinState,
                  site: Optional[int] = None, horizon: int = 1000, threshold: float = 0.5,
                  envelope_window: Optional[int] = None, u: Optional[UnitaryOperator] = None,
                  show_progress: bool = False) -> PeakAnalysis:
    """
    Long-time evolution of P_{t,site} and its peaks

    Args:
        lattice: Walk lattice
        coin: Coin parameters
        initial: Coin state placed on site 1
        site: Site observed, defaults to the lattice target
        horizon: Steps simulated
        threshold: Minimum probability of a reported peak
        envelope_window: If set, also report peaks dominant within ±window steps

    Returns:
        PeakAnalysis
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    site = lattice.target_site if site is None else lattice.check_site(site)
    u = step_operator(coin, lattice) if u is None else u
    trace = site_probability_trace(localized_state(lattice, initial), u, horizon, site, show_progress)

    detector = PeakDetector(trace)
    peaks = detector.find_peaks(threshold)
    times = np.array([t for t, _ in peaks], dtype=np.int64)
    values = np.array([v for _, v in peaks], dtype=float)

    envelope_times = envelope_values = None
    if envelope_window is not None:
        envelope = detector.find_envelope_peaks(peaks, envelope_window) if peaks else []
        envelope_times = np.array([t for t, _ in envelope], dtype=np.int64)
        envelope_values = np.array([v for _, v in envelope], dtype=float)

    return PeakAnalysis(site, threshold, horizon, times, values, envelope_window,
                        envelope_times, envelope_values)
