from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from numpy.typing import NDArray

# Tolerances
NORMALIZATION_TOLERANCE = 1e-12
UNITARITY_TOLERANCE = 1e-12
TRANSFER_TOLERANCE = 1e-9
PERIODICITY_TOLERANCE = 1e-9
RHO_SLACK = 1e-12

TWO_PI = 2.0 * np.pi

ComplexMatrix = NDArray[np.complex128]
ComplexVector = NDArray[np.complex128]


def canonical_angle(angle: float) -> float:
    """Wrap an angle into [0, 2π)."""
    wrapped = float(np.mod(angle, TWO_PI))
    if wrapped >= TWO_PI or np.isclose(wrapped, TWO_PI, rtol=0.0, atol=1e-15):
        return 0.0
    return wrapped


class Topology(str, Enum):
    LINE = "line"
    CYCLE = "cycle"


class Convention(str, Enum):
    """How coin states are attached to directions of motion."""
    SPATIAL = "spatial"
    LOCAL = "local"


class Coin(int, Enum):
    UP = 0
    DOWN = 1

    @property
    def flipped(self) -> "Coin":
        return Coin.DOWN if self is Coin.UP else Coin.UP


@dataclass(frozen=True)
class Lattice:
    """An N-line or N-cycle together with its direction convention."""

    topology: Topology
    n_sites: int
    direction_convention: Convention = Convention.SPATIAL
    anchor: Coin = Coin.UP

    def __post_init__(self):
        object.__setattr__(self, "topology", Topology(self.topology))
        object.__setattr__(self, "direction_convention", Convention(self.direction_convention))
        object.__setattr__(self, "anchor", Coin(self.anchor))

        if isinstance(self.n_sites, bool) or not isinstance(self.n_sites, (int, np.integer)):
            raise TypeError(f"n_sites must be an integer, got {self.n_sites!r}")
        if self.n_sites < 2:
            raise ValueError(f"n_sites must be at least 2, got {self.n_sites}")
        if (self.topology is Topology.CYCLE
                and self.direction_convention is Convention.LOCAL
                and self.n_sites % 2 == 1):
            raise ValueError(
                f"local convention needs an even cycle, got N={self.n_sites}: "
                "edge labels cannot alternate around an odd cycle"
            )

    @property
    def dimension(self) -> int:
        return 2 * self.n_sites

    @property
    def is_cycle(self) -> bool:
        return self.topology is Topology.CYCLE

    @property
    def source_site(self) -> int:
        return 1

    @property
    def target_site(self) -> int:
        """
        Site the qubit should be transferred to

        Returns:
            N on a line, N/2 + 1 on an even cycle
        """
        if not self.is_cycle:
            return self.n_sites
        if self.n_sites % 2 == 1:
            raise ValueError(f"odd cycle N={self.n_sites} has no unique antipode of site 1")
        return self.n_sites // 2 + 1

    def check_site(self, site: int) -> int:
        if not 1 <= site <= self.n_sites:
            raise ValueError(f"site {site} outside 1..{self.n_sites}")
        return int(site)

    def index(self, coin: Coin, site: int) -> int:
        """Position of |coin, site> in the 2N-dimensional basis."""
        self.check_site(site)
        return int(Coin(coin)) * self.n_sites + (site - 1)

    def site_rows(self, site: int) -> Tuple[int, int]:
        return self.index(Coin.UP, site), self.index(Coin.DOWN, site)

    def edge_label(self, left: int) -> Coin:
        """
        Coin label of edge (left, left+1) under the local convention

        Args:
            left: 1-based left endpoint; N means the closing edge (N, 1) of a cycle
        """
        return self.anchor if (left - 1) % 2 == 0 else self.anchor.flipped

    def describe(self) -> str:
        text = f"{self.n_sites}-{self.topology.value} ({self.direction_convention.value})"
        if self.direction_convention is Convention.LOCAL and self.anchor is not Coin.UP:
            text += " anchor=down"
        return text

    def to_record(self) -> dict:
        return {
            "topology": self.topology.value,
            "n_sites": int(self.n_sites),
            "direction_convention": self.direction_convention.value,
            "anchor": "up" if self.anchor is Coin.UP else "down",
        }


@dataclass(frozen=True)
class CoinParameters:
    """Parameters (ρ, θ, φ) of the general 2x2 coin."""

    rho: float
    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        rho = float(self.rho)
        if not np.isfinite(rho) or rho < -RHO_SLACK or rho > 1.0 + RHO_SLACK:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        object.__setattr__(self, "rho", min(max(rho, 0.0), 1.0))
        object.__setattr__(self, "theta", canonical_angle(self.theta))
        object.__setattr__(self, "phi", canonical_angle(self.phi))

    @classmethod
    def hadamard(cls) -> "CoinParameters":
        return cls(0.5, 0.0, 0.0)

    @classmethod
    def identity(cls, theta: float = 0.0, phi: float = 0.0) -> "CoinParameters":
        return cls(1.0, theta, phi)

    @classmethod
    def flip(cls, theta: float = 0.0, phi: float = 0.0) -> "CoinParameters":
        return cls(0.0, theta, phi)

    def to_record(self) -> dict:
        return {"rho": self.rho, "theta": self.theta, "phi": self.phi}


def bloch_to_coin(theta_b: float, phi_b: float) -> "CoinState":
    """
    Coin state cos(θ_b/2)|↑> + e^{iφ_b} sin(θ_b/2)|↓>

    Args:
        theta_b: Polar angle in [0, π]
        phi_b: Azimuth in [0, 2π]

    Returns:
        Normalized CoinState
    """
    alpha = complex(np.cos(theta_b / 2.0))
    beta = complex(np.exp(1j * phi_b) * np.sin(theta_b / 2.0))
    return CoinState(alpha, beta)


@dataclass(frozen=True)
class CoinState:
    """Normalized 2-component coin state α|↑> + β|↓>."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        alpha, beta = complex(self.alpha), complex(self.beta)
        norm = abs(alpha) ** 2 + abs(beta) ** 2
        if abs(norm - 1.0) > NORMALIZATION_TOLERANCE:
            raise ValueError(f"coin state is not normalized: |a|^2+|b|^2 = {norm!r}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def up(cls) -> "CoinState":
        return cls(1.0, 0.0)

    @classmethod
    def down(cls) -> "CoinState":
        return cls(0.0, 1.0)

    @property
    def vector(self) -> ComplexVector:
        return np.array([self.alpha, self.beta], dtype=np.complex128)

    def orthogonal(self) -> "CoinState":
        return CoinState(-np.conj(self.beta), np.conj(self.alpha))

    def to_record(self) -> dict:
        return {
            "re_alpha": self.alpha.real, "im_alpha": self.alpha.imag,
            "re_beta": self.beta.real, "im_beta": self.beta.imag,
        }


@dataclass(frozen=True, eq=False)
class WalkState:
    """State vector of the walker over coin x position."""

    lattice: Lattice
    amplitudes: ComplexVector
    step_count: int = 0

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amplitudes.shape[0] != self.lattice.dimension:
            raise ValueError(
                f"state has {amplitudes.shape[0]} amplitudes, "
                f"lattice {self.lattice.describe()} needs {self.lattice.dimension}"
            )
        if self.step_count < 0:
            raise ValueError(f"step_count must be non-negative, got {self.step_count}")
        norm = float(np.vdot(amplitudes, amplitudes).real)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"walk state is not normalized: norm^2 = {norm!r}")
        amplitudes.flags.writeable = False
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def up_amplitudes(self) -> ComplexVector:
        return self.amplitudes[: self.lattice.n_sites]

    @property
    def down_amplitudes(self) -> ComplexVector:
        return self.amplitudes[self.lattice.n_sites:]

    def coin_at(self, site: int) -> ComplexVector:
        """Unnormalized coin amplitudes (α_x, β_x) at a site."""
        up, down = self.lattice.site_rows(site)
        return np.array([self.amplitudes[up], self.amplitudes[down]])

    def probabilities(self) -> NDArray[np.float64]:
        """P_x for every site, ordered 1..N."""
        return np.abs(self.up_amplitudes) ** 2 + np.abs(self.down_amplitudes) ** 2

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


def localized_state(lattice: Lattice, coin_state: CoinState, site: Optional[int] = None) -> WalkState:
    """
    Place a coin state at a single site

    Args:
        lattice: Walk lattice
        coin_state: Coin state of the qubit
        site: 1-based site, defaults to the source site 1

    Returns:
        WalkState with step_count 0
    """
    site = lattice.source_site if site is None else site
    up, down = lattice.site_rows(site)
    amplitudes = np.zeros(lattice.dimension, dtype=np.complex128)
    amplitudes[up] = coin_state.alpha
    amplitudes[down] = coin_state.beta
    return WalkState(lattice, amplitudes, 0)


def inner_product(a: WalkState, b: WalkState) -> complex:
    """<a|b>, conjugating the left argument."""
    if a.amplitudes.shape != b.amplitudes.shape:
        raise ValueError(
            f"states live on different dimensions: {a.amplitudes.shape[0]} vs {b.amplitudes.shape[0]}"
        )
    return complex(np.vdot(a.amplitudes, b.amplitudes))


@dataclass(frozen=True, eq=False)
class UnitaryOperator:
    """A unitary matrix acting on the walk Hilbert space."""

    matrix: ComplexMatrix
    lattice: Optional[Lattice] = None

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.complex128)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"operator must be a square matrix, got shape {matrix.shape}")
        if self.lattice is not None and matrix.shape[0] != self.lattice.dimension:
            raise ValueError(
                f"operator dimension {matrix.shape[0]} does not match lattice dimension "
                f"{self.lattice.dimension}"
            )
        residual = unitarity_residual(matrix)
        if residual > UNITARITY_TOLERANCE * max(1, matrix.shape[0]):
            raise ValueError(f"matrix is not unitary (residual {residual:.3e})")
        matrix.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def compose(self, other: "UnitaryOperator") -> "UnitaryOperator":
        """self · other, so that `other` acts first."""
        if other.dimension != self.dimension:
            raise ValueError(f"cannot compose {self.dimension}x{self.dimension} with {other.dimension}x{other.dimension}")
        return UnitaryOperator(self.matrix @ other.matrix, self.lattice or other.lattice)

    def power(self, t: int) -> ComplexMatrix:
        if t < 0:
            raise ValueError(f"power must be non-negative, got {t}")
        return np.linalg.matrix_power(self.matrix, t)


def unitarity_residual(matrix: np.ndarray) -> float:
    """max |M†M - I|"""
    m = np.asarray(matrix)
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[1]))))


@dataclass(frozen=True, eq=False)
class TransferBlock:
    """2x2 block of U^t mapping the coin at the source to the coin at the target."""

    t: int
    source: int
    target: int
    block: ComplexMatrix
    residual: float = field(default=float("nan"))

    def __post_init__(self):
        block = np.array(self.block, dtype=np.complex128)
        if block.shape != (2, 2):
            raise ValueError(f"transfer block must be 2x2, got {block.shape}")
        object.__setattr__(self, "block", block)
        object.__setattr__(self, "residual", unitarity_residual(block))

    def is_perfect(self, tol: float = TRANSFER_TOLERANCE) -> bool:
        return self.residual < tol


@dataclass(frozen=True)
class PeriodicityResult:
    """Smallest T with U^T = e^{iφ} I, and the n-periodicity of a composite step."""

    period: int
    phase: float
    n_period: int = 1
