import argparse
import sys

import pandas as pd

from closed_forms import flip_line_no_pst_witness, verify_closed_forms
from fidelity_analysis import fidelity_map, peak_analysis
from reproductions import TARGETS, reproduce
from results_writer import write_results
from run_config import PARSERS, RunConfig, build_config, read_config_file
from transfer_checker import TransferChecker, sweep, sweep_table
from walk_evolution import probability_series
from walk_operators import step_operator
from walk_types import Topology, localized_state

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_CERTIFIED = 2


def status(message: str):
    print(message, file=sys.stderr)


def cmd_evolve(config: RunConfig, args) -> int:
    lattice = config.lattice()
    u = step_operator(config.coin(), lattice)
    series = probability_series(localized_state(lattice, config.initial_coin()), u, config.steps,
                                show_progress=args.progress)
    where = write_results(series, config, "evolve")
    status(f"✓ Evolved {lattice.describe()} for {config.steps} steps -> {where}")
    return EXIT_OK


def cmd_check_pst(config: RunConfig, args) -> int:
    checker = TransferChecker(config.lattice(), config.coin(), config.resolved_horizon())
    report = checker.run()
    record = report.to_record()
    write_results(record, config, "check-pst", table=pd.DataFrame([report.to_row()]))
    if args.verbose:
        checker.print_summary(report)
    if not report.certified:
        status(f"⚠️ No certified transfer: {report.diagnostics}")
        return EXIT_NOT_CERTIFIED
    status(f"✓ Perfect transfer at t={report.transfer_time} to site {report.target}")
    return EXIT_OK


def cmd_sweep(config: RunConfig, args) -> int:
    phi_grid = config.theta_grid if config.full_angles else None
    reports = sweep(Topology(config.topology), config.n_range, config.rho_grid, config.theta_grid,
                    phi_grid=phi_grid, horizon=config.horizon, convention=config.convention,
                    show_progress=args.progress)
    table = sweep_table(reports)
    where = write_results(table, config, "sweep")
    if table.empty:
        status("⚠️ Sweep found no certified cells")
    else:
        status(f"✓ Wrote {len(table)} certified cells to {where}")
    return EXIT_OK


def cmd_fidelity_map(config: RunConfig, args) -> int:
    result = fidelity_map(config.lattice(), config.coin(), config.resolution, config.resolved_horizon(),
                          show_progress=args.progress)
    frame = result.to_frame()
    where = write_results(frame, config, "fidelity-map")
    status(f"✓ Fidelity map {config.resolution}x{config.resolution}, max {frame['fidelity'].max():.12f} -> {where}")
    return EXIT_OK


def cmd_peaks(config: RunConfig, args) -> int:
    analysis = peak_analysis(config.lattice(), config.coin(), config.initial_coin(), site=config.site,
                             horizon=config.resolved_horizon(), threshold=config.threshold,
                             envelope_window=config.envelope_window, show_progress=args.progress)
    where = write_results(analysis.to_frame(), config, "peaks")
    if len(analysis.peak_times) == 0:
        status(f"⚠️ No peaks above {config.threshold}")
        return EXIT_NOT_CERTIFIED
    status(f"✓ {len(analysis.peak_times)} peaks above {config.threshold} -> {where}")
    return EXIT_OK


def cmd_verify_closed_forms(config: RunConfig, args) -> int:
    report = verify_closed_forms(config.max_n, config.l_max)
    where = write_results(report.table, config, "verify-closed-forms")
    if not report.passed():
        status(f"⚠️ Closed forms deviate: state {report.max_deviation:.3e}, "
               f"recovery {report.max_recovery_deviation:.3e}")
        return EXIT_NOT_CERTIFIED
    status(f"✓ Closed forms hold (max deviation {report.max_deviation:.3e}) -> {where}")
    return EXIT_OK


def cmd_flip_line(config: RunConfig, args) -> int:
    initial = config.initial_coin() if (config.alpha is not None or config.bloch_theta is not None) else None
    witness = flip_line_no_pst_witness(config.n_sites, config.resolved_horizon(), initial,
                                       config.theta, config.phi)
    where = write_results(witness.to_record(), config, "flip-line")
    status(f"✓ Flip-coin local line N={config.n_sites}: max P at site N = "
           f"{witness.max_target_probability:.12f} -> {where}")
    return EXIT_OK


def cmd_reproduce(config: RunConfig, args) -> int:
    frame = reproduce(args.target, show_progress=args.progress)
    where = write_results(frame, config, f"reproduce {args.target}")
    status(f"✓ Reproduced {args.target} ({len(frame)} rows) -> {where}")
    return EXIT_OK


COMMANDS = {
    "evolve": cmd_evolve,
    "check-pst": cmd_check_pst,
    "sweep": cmd_sweep,
    "fidelity-map": cmd_fidelity_map,
    "peaks": cmd_peaks,
    "verify-closed-forms": cmd_verify_closed_forms,
    "flip-line": cmd_flip_line,
    "reproduce": cmd_reproduce,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Perfect state transfer with discrete-time quantum walks')
    sub = parser.add_subparsers(dest='command', required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='key=value file, or the output of an earlier run')
    common.add_argument('--progress', action='store_true', help='Show progress bars on stderr')
    common.add_argument('--verbose', action='store_true', help='Print a summary block on stderr')
    for key in PARSERS:
        flag = '--' + key.replace('_', '-')
        common.add_argument(flag, dest=key, default=None, metavar=key.upper())

    for name in COMMANDS:
        command = sub.add_parser(name, parents=[common])
        if name == 'reproduce':
            command.add_argument('target', choices=sorted(TARGETS), help='Experiment to reproduce')
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        file_values = read_config_file(args.config) if args.config else {}
        overrides = {key: getattr(args, key) for key in PARSERS}
        config = build_config(file_values, overrides)
        return COMMANDS[args.command](config, args)
    except (ValueError, TypeError) as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
