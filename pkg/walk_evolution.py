from typing import Iterable, Optional

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from tqdm import tqdm

from walk_types import (
    CoinParameters, CoinState, ComplexMatrix, Convention, Lattice, PERIODICITY_TOLERANCE,
    PeriodicityResult, TRANSFER_TOLERANCE, TransferBlock, UnitaryOperator, WalkState,
    canonical_angle,
)


def _check_steps(steps) -> int:
    if isinstance(steps, bool) or not isinstance(steps, (int, np.integer)):
        raise TypeError(f"steps must be an integer, got {steps!r}")
    if steps < 0:
        raise ValueError(f"steps must be non-negative, got {steps}")
    return int(steps)


def evolve(state: WalkState, steps: int, u: UnitaryOperator) -> WalkState:
    """
    Apply U `steps` times

    Args:
        state: Starting state
        steps: Number of walk steps (>= 0)
        u: One-step operator with the state's dimension

    Returns:
        New WalkState with step_count advanced
    """
    steps = _check_steps(steps)
    if u.dimension != state.lattice.dimension:
        raise ValueError(
            f"operator dimension {u.dimension} does not match state dimension {state.lattice.dimension}"
        )
    vector = np.array(state.amplitudes)
    for _ in range(steps):
        vector = u.matrix @ vector
    return WalkState(state.lattice, vector, state.step_count + steps)


def _map_step(a: np.ndarray, b: np.ndarray, coin: CoinParameters, cycle: bool):
    sr, sc = np.sqrt(coin.rho), np.sqrt(1.0 - coin.rho)
    e_theta, e_phi = np.exp(1j * coin.theta), np.exp(1j * coin.phi)
    up = sr * a + sc * e_theta * b
    down = sc * e_phi * a - sr * e_theta * e_phi * b

    if cycle:
        return np.roll(up, 1), np.roll(down, -1)

    new_a = np.empty_like(a)
    new_b = np.empty_like(b)
    new_a[1:] = up[:-1]
    new_a[0] = down[0]
    new_b[:-1] = down[1:]
    new_b[-1] = up[-1]
    return new_a, new_b


def evolve_map(state: WalkState, steps: int, coin: CoinParameters, lattice: Optional[Lattice] = None) -> WalkState:
    """
    Same evolution as `evolve` written as the per-site amplitude recurrence

    Only the spatial convention has a recurrence form here.

    Args:
        state: Starting state
        steps: Number of walk steps
        coin: Coin parameters
        lattice: Lattice, defaults to the state's lattice

    Returns:
        New WalkState
    """
    steps = _check_steps(steps)
    lattice = state.lattice if lattice is None else lattice
    if lattice.dimension != state.lattice.dimension:
        raise ValueError("state and lattice dimensions differ")
    if lattice.direction_convention is not Convention.SPATIAL:
        raise ValueError("evolve_map supports the spatial convention only; use evolve with step_operator")

    a = np.array(state.up_amplitudes)
    b = np.array(state.down_amplitudes)
    for _ in range(steps):
        a, b = _map_step(a, b, coin, lattice.is_cycle)
    return WalkState(lattice, np.concatenate([a, b]), state.step_count + steps)


def site_probability(state: WalkState, x: int) -> float:
    """P_{t,x} = |α_x|² + |β_x|²"""
    return float(np.sum(np.abs(state.coin_at(x)) ** 2))


def fidelity(state: WalkState, target_coin: CoinState, target_site: int) -> float:
    """
    |<ψ_target|φ_x>| for the unnormalized coin component at the target site

    Returns:
        Value in [0, 1]; invariant under global phase of either argument
    """
    local = state.coin_at(target_site)
    return float(min(abs(np.vdot(target_coin.vector, local)), 1.0))


def extract_block(matrix: np.ndarray, lattice: Lattice, source: int, target: int) -> ComplexMatrix:
    """Rows of the target coin, columns of the source coin."""
    rows = list(lattice.site_rows(target))
    cols = list(lattice.site_rows(source))
    return np.asarray(matrix)[np.ix_(rows, cols)]


def transfer_block(u: UnitaryOperator, t: int, source: int, target: int) -> TransferBlock:
    """
    2x2 block of U^t from the source coin to the target coin

    Args:
        u: Step operator carrying its lattice
        t: Number of steps
        source: 1-based source site
        target: 1-based target site

    Returns:
        TransferBlock with residual max|B†B - I|
    """
    t = _check_steps(t)
    if u.lattice is None:
        raise ValueError("transfer_block needs an operator built on a lattice")
    u.lattice.check_site(source)
    u.lattice.check_site(target)
    return TransferBlock(t, source, target, extract_block(u.power(t), u.lattice, source, target))


def _proportional_to_identity(matrix: np.ndarray, tol: float):
    """Phase φ with max|M - e^{iφ}I| < tol, or None."""
    diagonal = np.diag(matrix)
    k = int(np.argmax(np.abs(diagonal)))
    if abs(diagonal[k]) == 0.0:
        return None
    phase = diagonal[k] / abs(diagonal[k])
    deviation = np.max(np.abs(matrix - phase * np.eye(matrix.shape[0])))
    if deviation < tol:
        return float(np.angle(phase))
    return None


def detect_periodicity(u: UnitaryOperator, horizon: int, tol: float = PERIODICITY_TOLERANCE) -> Optional[PeriodicityResult]:
    """
    Smallest T in 1..horizon with U^T = e^{iφ} I

    Returns:
        PeriodicityResult, or None if no period is found within the horizon
    """
    horizon = _check_steps(horizon)
    power = np.eye(u.dimension, dtype=np.complex128)
    for t in range(1, horizon + 1):
        power = u.matrix @ power
        phase = _proportional_to_identity(power, tol)
        if phase is not None:
            return PeriodicityResult(period=t, phase=canonical_angle(phase), n_period=1)
    return None


def localized_site(matrix: np.ndarray, lattice: Lattice, start_site: int, tol: float = TRANSFER_TOLERANCE) -> Optional[int]:
    """Site the start coin is mapped onto in full, if any."""
    for site in range(1, lattice.n_sites + 1):
        block = extract_block(matrix, lattice, start_site, site)
        if np.max(np.abs(block.conj().T @ block - np.eye(2))) < tol:
            return site
    return None


def n_periodicity(u_composite: UnitaryOperator, start_site: int, horizon: int, tol: float = TRANSFER_TOLERANCE) -> Optional[int]:
    """
    Number of distinct sites the qubit visits under repeated composite steps
    before returning to the start with its coin restored up to phase

    Args:
        u_composite: Composite step, e.g. (C'⊗I)·U^t
        start_site: Site the qubit starts on
        horizon: Maximum number of composite steps

    Returns:
        n, or None if the qubit delocalizes or does not return within the horizon
    """
    horizon = _check_steps(horizon)
    lattice = u_composite.lattice
    if lattice is None:
        raise ValueError("n_periodicity needs an operator built on a lattice")
    lattice.check_site(start_site)

    visited = []
    power = np.eye(u_composite.dimension, dtype=np.complex128)
    for _ in range(horizon):
        power = u_composite.matrix @ power
        site = localized_site(power, lattice, start_site, tol)
        if site is None:
            return None
        if site not in visited:
            visited.append(site)
        if site == start_site:
            block = extract_block(power, lattice, start_site, site)
            if _proportional_to_identity(block, tol) is not None:
                return len(visited)
    return None


def site_probability_trace(state: WalkState, u: UnitaryOperator, steps: int, site: int,
                           show_progress: bool = False) -> NDArray[np.float64]:
    """
    P_{t,site} for t = 0..steps

    Returns:
        Array of length steps + 1
    """
    steps = _check_steps(steps)
    rows = list(state.lattice.site_rows(site))
    vector = np.array(state.amplitudes)
    trace = np.empty(steps + 1)
    trace[0] = np.sum(np.abs(vector[rows]) ** 2)
    for t in tqdm(range(1, steps + 1), disable=not show_progress, desc="evolving", leave=False):
        vector = u.matrix @ vector
        trace[t] = np.sum(np.abs(vector[rows]) ** 2)
    return trace


def probability_series(state: WalkState, u: UnitaryOperator, steps: int,
                       sites: Optional[Iterable[int]] = None, show_progress: bool = False) -> pd.DataFrame:
    """
    Tidy time series of the walk

    Args:
        state: Initial state
        u: Step operator
        steps: Number of steps
        sites: Sites to record, defaults to all

    Returns:
        DataFrame with columns t, x, prob, re_alpha, im_alpha, re_beta, im_beta
    """
    steps = _check_steps(steps)
    lattice = state.lattice
    sites = list(range(1, lattice.n_sites + 1)) if sites is None else [lattice.check_site(x) for x in sites]
    up_rows = [lattice.index(0, x) for x in sites]
    down_rows = [lattice.index(1, x) for x in sites]

    vector = np.array(state.amplitudes)
    alphas = np.empty((steps + 1, len(sites)), dtype=np.complex128)
    betas = np.empty_like(alphas)
    for t in tqdm(range(steps + 1), disable=not show_progress, desc="evolving", leave=False):
        if t > 0:
            vector = u.matrix @ vector
        alphas[t] = vector[up_rows]
        betas[t] = vector[down_rows]

    alpha, beta = alphas.reshape(-1), betas.reshape(-1)
    return pd.DataFrame({
        "t": np.repeat(np.arange(steps + 1), len(sites)),
        "x": np.tile(sites, steps + 1),
        "prob": np.abs(alpha) ** 2 + np.abs(beta) ** 2,
        "re_alpha": alpha.real,
        "im_alpha": alpha.imag,
        "re_beta": beta.real,
        "im_beta": beta.imag,
    })
