"""
Command-line entry point: run, sweep, verify-gains and selftest.

Exit codes: 0 ok, 1 selftest failure, 2 configuration error, 3 validation
error, 4 simulation blow-up, 5 gain verification failure.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

from ..core.config import (
    TOOL_NAME, TOOL_VERSION, TRAJECTORY_FILE, METRICS_FILE, GAINS_FILE, SWEEP_FILE, SCALING_FILE, VERIFY_FILE,
    EXIT_OK, EXIT_SELFTEST_FAILED, EXIT_CONFIG_ERROR, EXIT_VALIDATION_ERROR, EXIT_BLOWUP, EXIT_VERIFY_FAILED,
    MIN_SWEEP_VALUES,
)
from ..core.errors import DistDiffError, ScenarioFileError, SimulationBlowUp
from ..core.settings_manager import load_settings
from ..core.scenario_loader import load_scenario
from ..core.simulator import Simulator, SWEEP_PARAMS
from ..core import analysis
from ..core import output_generator
from ..core import selftest

logger = logging.getLogger(__name__)


def _csv_floats(text):
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got '{text}'")


def _csv_ints(text):
    try:
        return [int(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got '{text}'")


def build_parser():
    parser = argparse.ArgumentParser(prog=TOOL_NAME, description="Distributed robust exact differentiator toolkit")
    parser.add_argument('--version', action='version', version=f"{TOOL_NAME} {TOOL_VERSION}")
    parser.add_argument('--settings', default=None, help='JSON file overriding tolerances and defaults')
    parser.add_argument('--verbose', action='store_true', help='Debug-level logging on stderr')
    sub = parser.add_subparsers(dest='command', required=True)

    run_p = sub.add_parser('run', help='Run a scenario and write trajectory.csv, metrics.json, gains.json')
    run_p.add_argument('--config', required=True, help='Scenario file path or bundled scenario name')
    run_p.add_argument('--out', required=True, help='Output directory')
    run_p.add_argument('--t-final', type=float, default=None, help='Override the scenario horizon')
    run_p.add_argument('--json', action='store_true', help='Print metrics JSON on stdout')

    sweep_p = sub.add_parser('sweep', help='Re-run a scenario over dt or eps values and fit accuracy exponents')
    sweep_p.add_argument('--config', required=True)
    sweep_p.add_argument('--param', required=True, choices=SWEEP_PARAMS)
    sweep_p.add_argument('--values', required=True, type=_csv_floats, help='Comma-separated values, at least three')
    sweep_p.add_argument('--seeds', type=_csv_ints, default=None, help='Comma-separated seeds to average over')
    sweep_p.add_argument('--out', required=True)
    sweep_p.add_argument('--t-final', type=float, default=None)
    sweep_p.add_argument('--json', action='store_true')

    verify_p = sub.add_parser('verify-gains', help='Check the gain conditions for a scenario')
    verify_p.add_argument('--config', required=True)
    verify_p.add_argument('--samples', type=int, default=None, help='Unit-sphere sample count')
    verify_p.add_argument('--seed', type=int, default=None, help='Unit-sphere sample seed')
    verify_p.add_argument('--out', default=None, help='Directory for verify_gains.json')
    verify_p.add_argument('--json', action='store_true')

    self_p = sub.add_parser('selftest', help='Run the built-in property suite')
    self_p.add_argument('--seed', type=int, default=0)
    self_p.add_argument('--json', action='store_true')
    return parser


def cmd_run(args, settings):
    loaded = load_scenario(args.config, settings)
    sc = loaded.scenario
    if args.t_final is not None:
        sc = replace(sc, t_final=args.t_final)
    simulator = Simulator(settings)
    log = simulator.run(sc)
    run_metrics = simulator.metrics(log)

    os.makedirs(args.out, exist_ok=True)
    output_generator.write_trajectory_csv(log, os.path.join(args.out, TRAJECTORY_FILE))
    payload = output_generator.metrics_payload(run_metrics, log)
    output_generator.write_json(payload, os.path.join(args.out, METRICS_FILE))
    output_generator.write_json(sc.gains.as_dict(), os.path.join(args.out, GAINS_FILE))
    if args.json:
        print(json.dumps(payload, indent=2, default=output_generator.json_default))
    logger.info(f"Steady-state errors: {run_metrics.steady_state_err}")
    return EXIT_OK


def cmd_sweep(args, settings):
    if len(args.values) < MIN_SWEEP_VALUES:
        logger.error(f"--values needs at least {MIN_SWEEP_VALUES} entries, got {len(args.values)}")
        return EXIT_CONFIG_ERROR
    if any(v <= 0 for v in args.values):
        logger.error(f"--values must be positive, got {args.values}")
        return EXIT_CONFIG_ERROR
    loaded = load_scenario(args.config, settings)
    sc = loaded.scenario
    if args.t_final is not None:
        sc = replace(sc, t_final=args.t_final)
    result = Simulator(settings).sweep(sc, args.param, args.values, seeds=args.seeds)

    os.makedirs(args.out, exist_ok=True)
    output_generator.write_sweep_csv(result, os.path.join(args.out, SWEEP_FILE))
    payload = output_generator.scaling_payload(result, sc)
    output_generator.write_json(payload, os.path.join(args.out, SCALING_FILE))
    if args.json:
        print(json.dumps(payload, indent=2, default=output_generator.json_default))
    for mu, ((exponent, r2), predicted) in enumerate(zip(result.fits, result.predicted)):
        logger.info(f"mu={mu}: exponent {exponent:.3f} (predicted {predicted:.3f}), r^2 {r2:.4f}")
    return EXIT_OK


def _print_report(report):
    print(f"verify-gains (m={report.m}, {report.mode})")
    if report.h is not None:
        print(f"  h = {report.h:.6g}   h* ~ {report.h_star:.6g}   2 lambda_max(H^-1) = {report.h_bound:.6g}")
    if report.m_margin is not None:
        print(f"  M(h) margin = {report.m_margin:.6g}")
    if report.k0_star is not None:
        print(f"  k0* ~ {report.k0_star:.6g}")
    for condition in report.conditions:
        status = 'pass' if condition.passed else 'FAIL'
        line = f"  [{status}] {condition.name}"
        if condition.value is not None:
            line += f" (value {condition.value:.6g})"
        print(line)
        if not condition.passed and condition.witness is not None:
            print(f"         witness {condition.witness}")
    for row in report.conformance or []:
        tag = 'follows recursion' if row['conforms'] else 'does not follow recursion'
        print(f"  k_{row['mu']} = {row['k']:.6g} vs recursion {row['k_recursion']:.6g}: {tag}")
    print(f"  overall: {'pass' if report.passed else 'FAIL'}")


def cmd_verify_gains(args, settings):
    loaded = load_scenario(args.config, settings)
    samples = args.samples if args.samples is not None else settings['sphere_samples']
    seed = args.seed if args.seed is not None else settings['sphere_seed']
    report = analysis.verify_gains(loaded.spectra, loaded.scenario.gains, samples, seed,
                                   safety=settings['h_safety'], eta0_tol=settings['eta0_tol'],
                                   reference_tilde=loaded.reference_tilde)
    payload = report.as_dict()
    payload['scenario'] = loaded.scenario.label
    if args.out:
        output_generator.write_json(payload, os.path.join(args.out, VERIFY_FILE))
    if args.json:
        print(json.dumps(payload, indent=2, default=output_generator.json_default))
    else:
        _print_report(report)
    if not report.passed:
        logger.error(f"Gain conditions failed: {report.failed_conditions}")
        return EXIT_VERIFY_FAILED
    return EXIT_OK


def cmd_selftest(args, settings):
    results = selftest.run_selftest(seed=args.seed)
    passed = sum(1 for r in results if r.passed)
    if args.json:
        print(json.dumps({'passed': passed, 'total': len(results),
                          'checks': [r.as_dict() for r in results]}, indent=2))
    else:
        for r in results:
            print(f"[{'pass' if r.passed else 'FAIL'}] {r.name}: {r.trials - r.failures}/{r.trials} {r.detail}")
        print(f"{passed}/{len(results)} checks passed")
    return EXIT_OK if passed == len(results) else EXIT_SELFTEST_FAILED


COMMANDS = {
    'run': cmd_run,
    'sweep': cmd_sweep,
    'verify-gains': cmd_verify_gains,
    'selftest': cmd_selftest,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2 on usage errors and 0 for --help/--version
        return e.code if isinstance(e.code, int) else EXIT_CONFIG_ERROR

    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    settings = load_settings(args.settings) if args.settings else load_settings()

    try:
        return COMMANDS[args.command](args, settings)
    except ScenarioFileError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG_ERROR
    except SimulationBlowUp as e:
        logger.error(str(e))
        return EXIT_BLOWUP
    except DistDiffError as e:
        logger.error(f"Validation error: {e}")
        return EXIT_VALIDATION_ERROR


if __name__ == '__main__':
    sys.exit(main())
