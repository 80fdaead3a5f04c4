from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Tuple

import numpy as np

from walk_types import (
    Coin, CoinParameters, ComplexMatrix, Convention, Lattice, TRANSFER_TOLERANCE,
    UnitaryOperator, canonical_angle, unitarity_residual,
)

DEGENERATE_MODULUS = 1e-13


def coin_matrix(params: CoinParameters) -> ComplexMatrix:
    """
    C(ρ, θ, φ) = [[√ρ, √(1-ρ)e^{iθ}], [√(1-ρ)e^{iφ}, -√ρ e^{i(θ+φ)}]]

    Args:
        params: Coin parameters

    Returns:
        2x2 complex unitary
    """
    a = np.sqrt(params.rho)
    b = np.sqrt(1.0 - params.rho)
    return np.array([
        [a, b * np.exp(1j * params.theta)],
        [b * np.exp(1j * params.phi), -a * np.exp(1j * (params.theta + params.phi))],
    ], dtype=np.complex128)


def _shift_targets(lattice: Lattice) -> Dict[Tuple[Coin, int], Tuple[Coin, int]]:
    """Image (coin, site) of every basis state (coin, site) under S. Sites are 1-based."""
    n = lattice.n_sites
    cycle = lattice.is_cycle
    targets = {}

    if lattice.direction_convention is Convention.SPATIAL:
        for x in range(1, n + 1):
            if cycle:
                targets[(Coin.UP, x)] = (Coin.UP, x % n + 1)
                targets[(Coin.DOWN, x)] = (Coin.DOWN, (x - 2) % n + 1)
            else:
                targets[(Coin.UP, x)] = (Coin.UP, x + 1) if x < n else (Coin.DOWN, n)
                targets[(Coin.DOWN, x)] = (Coin.DOWN, x - 1) if x > 1 else (Coin.UP, 1)
        return targets

    # local: follow the incident edge carrying the coin's label
    for x in range(1, n + 1):
        has_right = cycle or x < n
        has_left = cycle or x > 1
        left_of_x = x - 1 if x > 1 else n
        for c in (Coin.UP, Coin.DOWN):
            if has_right and lattice.edge_label(x) is c:
                image = (c, x % n + 1)
            elif has_left and lattice.edge_label(left_of_x) is c:
                image = (c, (x - 2) % n + 1)
            else:
                image = (c.flipped, x)
            moved = image[1] != x
            if not cycle and moved and image[1] in (1, n):
                image = (image[0].flipped, image[1])
            targets[(c, x)] = image
    return targets


def shift_operator(lattice: Lattice) -> UnitaryOperator:
    """
    Conditional shift S for the lattice and its direction convention

    Args:
        lattice: Walk lattice

    Returns:
        Permutation UnitaryOperator of dimension 2N
    """
    matrix = np.zeros((lattice.dimension, lattice.dimension), dtype=np.complex128)
    for (coin, site), (new_coin, new_site) in _shift_targets(lattice).items():
        matrix[lattice.index(new_coin, new_site), lattice.index(coin, site)] = 1.0
    return UnitaryOperator(matrix, lattice)


def step_operator(coin: CoinParameters, lattice: Lattice) -> UnitaryOperator:
    """U = S · (C ⊗ I_N)"""
    coin_part = np.kron(coin_matrix(coin), np.eye(lattice.n_sites))
    return UnitaryOperator(shift_operator(lattice).matrix @ coin_part, lattice)


def coin_layer(coin: CoinParameters, lattice: Lattice) -> UnitaryOperator:
    """C ⊗ I_N on its own, used to append a recovery coin."""
    return UnitaryOperator(np.kron(coin_matrix(coin), np.eye(lattice.n_sites)), lattice)


@dataclass(frozen=True)
class DecompositionResult:
    """M = e^{iγ} C(ρ', θ', φ')"""

    params: CoinParameters
    global_phase: float

    def matrix(self) -> ComplexMatrix:
        return np.exp(1j * self.global_phase) * coin_matrix(self.params)


def decompose_unitary2(m, tol: float = 1e-10) -> DecompositionResult:
    """
    Write a 2x2 unitary as a global phase times a coin matrix

    The global phase is chosen so that the √ρ' entry is real and non-negative.
    When ρ' = 0 the phase is 0; when ρ' = 1 the phase sits on m00 and θ' = 0.

    Args:
        m: 2x2 unitary
        tol: Unitarity tolerance

    Returns:
        DecompositionResult with canonical angles in [0, 2π)
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
    residual = unitarity_residual(m)
    if residual > tol:
        raise ValueError(f"matrix is not unitary (residual {residual:.3e} > {tol:.1e})")

    mod00, mod01 = abs(m[0, 0]), abs(m[0, 1])

    if mod00 < DEGENERATE_MODULUS:
        rho, gamma = 0.0, 0.0
        theta, phi = np.angle(m[0, 1]), np.angle(m[1, 0])
    elif mod01 < DEGENERATE_MODULUS:
        rho = 1.0
        gamma = float(np.angle(m[0, 0]))
        theta = 0.0
        phi = np.angle(-m[1, 1] * np.exp(-1j * gamma))
    else:
        rho = mod00 ** 2
        gamma = float(np.angle(m[0, 0]))
        rotated = m * np.exp(-1j * gamma)
        theta, phi = np.angle(rotated[0, 1]), np.angle(rotated[1, 0])

    return DecompositionResult(CoinParameters(rho, theta, phi), canonical_angle(gamma))


def nearest_unitary(m) -> ComplexMatrix:
    """Polar projection W = U V† of M = U Σ V†."""
    u, _, vh = np.linalg.svd(np.asarray(m, dtype=np.complex128))
    return u @ vh


def phase_distance(a, b) -> float:
    """
    max |a - e^{iγ} b| with γ taken from the largest entry of b

    Returns:
        0 when a and b agree up to a global phase
    """
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    k = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(b[k]) == 0.0:
        return float(np.max(np.abs(a)))
    ratio = a[k] / b[k]
    phase = ratio / abs(ratio) if abs(ratio) > 0 else 1.0
    return float(np.max(np.abs(a - phase * b)))


def equal_up_to_phase(a, b, tol: float = 1e-10) -> bool:
    return phase_distance(a, b) < tol


def recovery_from_transfer_block(m, tol: float = TRANSFER_TOLERANCE) -> DecompositionResult:
    """
    Coin C' that undoes a perfect transfer: C' ∝ M†

    Args:
        m: 2x2 transfer block
        tol: Residual max|M†M - I| accepted as a perfect transfer

    Returns:
        DecompositionResult of M† after projecting M onto the unitaries
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.shape != (2, 2):
        raise ValueError(f"transfer block must be 2x2, got shape {m.shape}")
    residual = unitarity_residual(m)
    if residual > tol:
        raise ValueError(
            f"transfer block is not unitary (residual {residual:.3e}); transfer is imperfect"
        )
    projected = nearest_unitary(m)
    return decompose_unitary2(projected.conj().T, tol=1e-9)


class RecoveryCase(str, Enum):
    IDENTITY_LINE = "identity-line"
    IDENTITY_CYCLE_EVEN = "identity-cycle-even"
    IDENTITY_CYCLE_ODD = "identity-cycle-odd"
    FLIP_LOCAL_CYCLE_ODDHALF = "flip-local-cycle-oddhalf"


def closed_form_recovery(case: RecoveryCase, lattice: Lattice, coin: CoinParameters) -> CoinParameters:
    """
    Analytic recovery coin for the solvable families

    Args:
        case: Which family
        lattice: Lattice the family lives on
        coin: Coin of the walk (its ρ must match the family)

    Returns:
        Recovery CoinParameters (equal to the numerical recovery up to global phase)
    """
    case = RecoveryCase(case)
    n = lattice.n_sites
    theta, phi = coin.theta, coin.phi
    sigma = theta + phi

    if case in (RecoveryCase.IDENTITY_LINE, RecoveryCase.IDENTITY_CYCLE_EVEN, RecoveryCase.IDENTITY_CYCLE_ODD):
        if not np.isclose(coin.rho, 1.0, atol=1e-12):
            raise ValueError(f"{case.value} needs the identity coin (rho=1), got rho={coin.rho}")
        if lattice.direction_convention is not Convention.SPATIAL:
            raise ValueError(f"{case.value} is defined for the spatial convention")

    if case is RecoveryCase.IDENTITY_LINE:
        if lattice.is_cycle:
            raise ValueError("identity-line needs a line lattice")
        return CoinParameters(0.0, 0.0, -sigma - np.pi)

    if case is RecoveryCase.IDENTITY_CYCLE_EVEN:
        if not lattice.is_cycle or n % 2 == 1:
            raise ValueError(f"identity-cycle-even needs an even cycle, got {lattice.describe()}")
        return CoinParameters(1.0, 0.0, -n * (sigma + np.pi) / 2.0 + np.pi)

    if case is RecoveryCase.IDENTITY_CYCLE_ODD:
        if not lattice.is_cycle or n % 2 == 0:
            raise ValueError(f"identity-cycle-odd needs an odd cycle, got {lattice.describe()}")
        return CoinParameters(1.0, 0.0, -n * (sigma + np.pi) + np.pi)

    # flip coin, local convention, N/2 odd
    if not np.isclose(coin.rho, 0.0, atol=1e-12):
        raise ValueError(f"{case.value} needs the flip coin (rho=0), got rho={coin.rho}")
    if not lattice.is_cycle or lattice.direction_convention is not Convention.LOCAL:
        raise ValueError(f"{case.value} needs a local-convention cycle, got {lattice.describe()}")
    if n % 4 != 2:
        raise ValueError(f"{case.value} needs N/2 odd, got N={n}")
    return CoinParameters(0.0, -phi, -theta)


def recovery_cases_for(lattice: Lattice, coin: CoinParameters) -> List[RecoveryCase]:
    """Closed-form families that apply to a lattice/coin pair."""
    cases = []
    if lattice.direction_convention is Convention.SPATIAL and np.isclose(coin.rho, 1.0, atol=1e-12):
        if not lattice.is_cycle:
            cases.append(RecoveryCase.IDENTITY_LINE)
        elif lattice.n_sites % 2 == 0:
            cases.append(RecoveryCase.IDENTITY_CYCLE_EVEN)
        else:
            cases.append(RecoveryCase.IDENTITY_CYCLE_ODD)
    if (lattice.is_cycle and lattice.direction_convention is Convention.LOCAL
            and np.isclose(coin.rho, 0.0, atol=1e-12) and lattice.n_sites % 4 == 2):
        cases.append(RecoveryCase.FLIP_LOCAL_CYCLE_ODDHALF)
    return cases
