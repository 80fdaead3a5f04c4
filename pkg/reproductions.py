from typing import Callable, Dict

import numpy as np
import pandas as pd

from fidelity_analysis import fidelity_map, peak_analysis
from transfer_checker import events_table, transfer_events
from walk_evolution import probability_series
from walk_operators import step_operator
from walk_types import CoinParameters, CoinState, Lattice, Topology, localized_state

TABLE_RHOS = (0.25, 0.5, 0.75)
TRACE_STEPS = 100
LONG_RUNS = {"6-cycle": (Topology.CYCLE, 13000, 1500), "6-line": (Topology.LINE, 14000, 3500)}
FIG5_RHOS = (0.5, 0.25)
FIG5_STEPS = 12
MAP_RESOLUTION = 61
MAP_HORIZON = 100

DEMO_STATE = CoinState(2 ** -0.5, 1j * 2 ** -0.5)


def _events_for(topology: Topology, n: int) -> pd.DataFrame:
    lattice = Lattice(topology, n)
    frames = []
    for rho in TABLE_RHOS:
        events = transfer_events(lattice, CoinParameters(rho), horizon=50 * n)
        frames.append(events_table(events, rho=rho))
    return pd.concat(frames, ignore_index=True)


def table1(show_progress: bool = False) -> pd.DataFrame:
    """Times and sites where the Hadamard-family walk on the 2-line localizes."""
    return _events_for(Topology.LINE, 2)


def table2(show_progress: bool = False) -> pd.DataFrame:
    """Same on the 4-cycle."""
    return _events_for(Topology.CYCLE, 4)


def fig3(show_progress: bool = False) -> pd.DataFrame:
    """
    P_{t,B} for the Hadamard walk on 4- and 6-site lattices, plus long-run peaks

    Returns:
        Rows with panel, kind ('trace' or 'peak' or 'envelope'), t, prob
    """
    coin = CoinParameters.hadamard()
    frames = []
    for topology in (Topology.CYCLE, Topology.LINE):
        for n in (4, 6):
            lattice = Lattice(topology, n)
            u = step_operator(coin, lattice)
            series = probability_series(localized_state(lattice, DEMO_STATE), u, TRACE_STEPS,
                                        sites=[lattice.target_site])
            frames.append(pd.DataFrame({
                "panel": f"{n}-{topology.value}", "kind": "trace",
                "t": series["t"], "prob": series["prob"],
            }))

    for panel, (topology, horizon, window) in LONG_RUNS.items():
        lattice = Lattice(topology, 6)
        peaks = peak_analysis(lattice, coin, DEMO_STATE, horizon=horizon, threshold=0.5,
                              envelope_window=window, show_progress=show_progress)
        frames.append(pd.DataFrame({"panel": f"{panel}-long", "kind": "peak",
                                    "t": peaks.peak_times, "prob": peaks.peak_values}))
        frames.append(pd.DataFrame({"panel": f"{panel}-long", "kind": "envelope",
                                    "t": peaks.envelope_times, "prob": peaks.envelope_values}))
    return pd.concat(frames, ignore_index=True)


def fig4(show_progress: bool = False) -> pd.DataFrame:
    """Max-over-time fidelity maps on the 2-line for the identity and Hadamard coins."""
    lattice = Lattice(Topology.LINE, 2)
    frames = []
    for panel, coin in (("identity", CoinParameters.identity()), ("hadamard", CoinParameters.hadamard())):
        result = fidelity_map(lattice, coin, MAP_RESOLUTION, MAP_HORIZON, show_progress=show_progress)
        frame = result.to_frame()
        frame.insert(0, "panel", panel)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def fig5(show_progress: bool = False) -> pd.DataFrame:
    """Site occupation on the 4-cycle over one revival for ρ = 1/2 and 1/4."""
    lattice = Lattice(Topology.CYCLE, 4)
    frames = []
    for rho in FIG5_RHOS:
        u = step_operator(CoinParameters(rho), lattice)
        series = probability_series(localized_state(lattice, DEMO_STATE), u, FIG5_STEPS)
        frames.append(pd.DataFrame({
            "panel": f"rho={rho:g}", "t": series["t"], "x": series["x"],
            "prob": np.round(series["prob"], 12),
        }))
    return pd.concat(frames, ignore_index=True)


TARGETS: Dict[str, Callable[..., pd.DataFrame]] = {
    "table1": table1,
    "table2": table2,
    "fig3": fig3,
    "fig4": fig4,
    "fig5": fig5,
}


def reproduce(target: str, show_progress: bool = False) -> pd.DataFrame:
    if target not in TARGETS:
        raise ValueError(f"unknown reproduce target {target!r}; choose from {', '.join(TARGETS)}")
    return TARGETS[target](show_progress=show_progress)
