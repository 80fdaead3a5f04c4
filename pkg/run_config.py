import json
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from transfer_checker import DEFAULT_RHO_GRID
from walk_types import Coin, CoinParameters, CoinState, Convention, Lattice, Topology, bloch_to_coin

ECHO_PREFIX = "# config."


def parse_real(text: str) -> float:
    """Float or a/b fraction."""
    text = str(text).strip()
    try:
        if "/" in text:
            return float(Fraction(text))
        return float(text)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"not a real number: {text!r}")


def parse_angle(text: str) -> float:
    """
    Angle in radians

    Args:
        text: A real, or 'pi:<multiple>' such as 'pi:0.5' or 'pi:1/3'

    Returns:
        Angle as float
    """
    text = str(text).strip()
    if text.lower().startswith("pi:"):
        return parse_real(text[3:]) * np.pi
    return parse_real(text)


def parse_complex(text: str) -> complex:
    try:
        return complex(str(text).strip().replace(" ", ""))
    except ValueError:
        raise ValueError(f"not a complex number: {text!r}")


def parse_int(text: str) -> int:
    try:
        return int(str(text).strip())
    except ValueError:
        raise ValueError(f"not an integer: {text!r}")


def parse_bool(text: str) -> bool:
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_sizes(text: str) -> Tuple[int, ...]:
    """'2-10' or '2,4,6'"""
    text = str(text).strip()
    if "-" in text and "," not in text:
        lo, hi = (parse_int(part) for part in text.split("-", 1))
        if hi < lo:
            raise ValueError(f"empty size range: {text!r}")
        return tuple(range(lo, hi + 1))
    return tuple(parse_int(part) for part in text.split(",") if part.strip())


def parse_reals(text: str) -> Tuple[float, ...]:
    text = str(text).strip()
    if text.lower() == "default":
        return DEFAULT_RHO_GRID
    return tuple(parse_real(part) for part in text.split(",") if part.strip())


def parse_angles(text: str) -> Tuple[float, ...]:
    return tuple(parse_angle(part) for part in str(text).split(",") if part.strip())


def _optional(parser):
    def parse(text):
        if text is None or str(text).strip().lower() in ("", "none"):
            return None
        return parser(text)
    return parse


def _choice(*allowed):
    def parse(text):
        value = str(text).strip().lower()
        if value not in allowed:
            raise ValueError(f"expected one of {', '.join(allowed)}, got {text!r}")
        return value
    return parse


PARSERS = {
    "topology": _choice("line", "cycle"),
    "n_sites": parse_int,
    "convention": _choice("spatial", "local"),
    "anchor": _choice("up", "down"),
    "rho": parse_real,
    "theta": parse_angle,
    "phi": parse_angle,
    "alpha": _optional(parse_complex),
    "beta": _optional(parse_complex),
    "bloch_theta": _optional(parse_angle),
    "bloch_phi": _optional(parse_angle),
    "steps": parse_int,
    "horizon": _optional(parse_int),
    "site": _optional(parse_int),
    "threshold": parse_real,
    "resolution": parse_int,
    "n_range": parse_sizes,
    "rho_grid": parse_reals,
    "theta_grid": parse_angles,
    "full_angles": parse_bool,
    "max_n": parse_int,
    "l_max": parse_int,
    "envelope_window": _optional(parse_int),
    "output": str,
    "format": _choice("csv", "json"),
}


@dataclass(frozen=True)
class RunConfig:
    """Every setting of a run, already parsed."""

    topology: str = "line"
    n_sites: int = 2
    convention: str = "spatial"
    anchor: str = "up"
    rho: float = 0.5
    theta: float = 0.0
    phi: float = 0.0
    alpha: Optional[complex] = None
    beta: Optional[complex] = None
    bloch_theta: Optional[float] = None
    bloch_phi: Optional[float] = None
    steps: int = 10
    horizon: Optional[int] = None
    site: Optional[int] = None
    threshold: float = 0.5
    resolution: int = 31
    n_range: Tuple[int, ...] = tuple(range(2, 11))
    rho_grid: Tuple[float, ...] = DEFAULT_RHO_GRID
    theta_grid: Tuple[float, ...] = (0.0,)
    full_angles: bool = False
    max_n: int = 10
    l_max: int = 3
    envelope_window: Optional[int] = None
    output: str = "-"
    format: str = "csv"

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError(f"steps must be non-negative, got {self.steps}")
        if self.horizon is not None and self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.resolution < 2:
            raise ValueError(f"resolution must be at least 2, got {self.resolution}")
        if (self.alpha is None) != (self.beta is None):
            raise ValueError("alpha and beta must be given together")
        if (self.bloch_theta is None) != (self.bloch_phi is None):
            raise ValueError("bloch_theta and bloch_phi must be given together")
        if self.alpha is not None and self.bloch_theta is not None:
            raise ValueError("give the initial coin either as alpha/beta or as bloch_theta/bloch_phi")

    def lattice(self) -> Lattice:
        return Lattice(Topology(self.topology), self.n_sites, Convention(self.convention),
                       Coin.UP if self.anchor == "up" else Coin.DOWN)

    def coin(self) -> CoinParameters:
        return CoinParameters(self.rho, self.theta, self.phi)

    def initial_coin(self) -> CoinState:
        """Initial coin state; |↑> unless given."""
        if self.alpha is not None:
            return CoinState(self.alpha, self.beta)
        if self.bloch_theta is not None:
            return bloch_to_coin(self.bloch_theta, self.bloch_phi)
        return CoinState.up()

    def resolved_horizon(self) -> int:
        return 50 * self.n_sites if self.horizon is None else self.horizon

    def to_items(self) -> Dict[str, str]:
        """Echo form: every value written so that parsing it gives the same value back."""
        items = {}
        for f in fields(self):
            items[f.name] = _format_value(getattr(self, f.name))
        return items


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, (float, complex)):
        return repr(value)
    return str(value)


def read_config_file(path) -> Dict[str, str]:
    """
    Raw key=value pairs from a config file or from an earlier run's output

    Args:
        path: Plain key=value file, CSV output with '# config.' header lines,
              or JSON output with a "config" object

    Returns:
        Dict of raw strings
    """
    path = Path(path)
    if not path.exists():
        raise ValueError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")

    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValueError(f"config file {path} is not valid JSON: {e}")
        section = data.get("config", data)
        return {str(k): str(v) for k, v in section.items()}

    values = {}
    echoed = ECHO_PREFIX in text
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith(ECHO_PREFIX):
            line = line[len(ECHO_PREFIX):]
        elif not line or line.startswith("#"):
            continue
        elif echoed:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{number}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def build_config(file_values: Optional[Dict[str, str]] = None, overrides: Optional[Dict[str, str]] = None) -> RunConfig:
    """
    Merge defaults, file values and flag overrides (later wins)

    Returns:
        Validated RunConfig
    """
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})

    unknown = sorted(set(merged) - set(PARSERS))
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")

    parsed = {}
    for key, raw in merged.items():
        try:
            parsed[key] = PARSERS[key](raw)
        except ValueError as e:
            raise ValueError(f"bad value for {key}: {e}")
    return replace(RunConfig(), **parsed)
