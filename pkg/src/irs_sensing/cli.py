"""Command-line front end.

``sense run`` executes a Monte Carlo preset and writes aggregate rows;
``sense limits`` prints the range window and unambiguous speed implied by
the waveform timing; ``sense crb`` emits bound curves over an SNR sweep.
Exit codes: 0 success, 2 configuration problem, 3 output I/O problem.
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .config import FullConfig, load_config
from .crb import compute_crb, compute_fim
from .errors import ConfigError
from .experiments import (DEFAULT_SEED, PRESET_NAMES, build_spec,
                          emit_results, run_experiment)
from .scene import (build_los_channel, derive_target_truth,
                    design_beamformers, design_phase_profiles, sensing_limits,
                    validate_scene)
from .synthesis import build_factor_matrices, noise_sigma_for_snr, \
    synthesize_echo_tensor

CRB_SNR_GRID = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sense",
        description="Simulation and estimation harness for surface-assisted "
                    "multi-target sensing with pulsed multicarrier waveforms.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a Monte Carlo experiment preset")
    run_p.add_argument("--config", required=True, help="YAML scene/waveform file")
    run_p.add_argument("--preset", required=True,
                       help=f"one of {', '.join(PRESET_NAMES)}")
    run_p.add_argument("--out", required=True, help="output file path")
    run_p.add_argument("--trials", type=int, default=None,
                       help="override the preset trial count")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the experiment seed")
    run_p.add_argument("--format", choices=("csv", "json"), default="csv")

    lim_p = sub.add_parser("limits",
                           help="print the waveform's sensing limits")
    lim_p.add_argument("--config", required=True)

    crb_p = sub.add_parser("crb", help="emit bound curves over a sweep")
    crb_p.add_argument("--config", required=True)
    crb_p.add_argument("--sweep", choices=("snr",), default="snr")
    crb_p.add_argument("--out", default=None,
                       help="output CSV path (default: stdout)")
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config)
    spec = build_spec(args.preset, trials=args.trials, seed=args.seed)
    rows = run_experiment(spec, config)
    emit_results(rows, args.out, args.format)
    return 0


def _cmd_limits(args) -> int:
    config = load_config(args.config)
    limits = sensing_limits(config.waveform)
    print(f"R_min_m {limits.min_range_m:.10g}")
    print(f"R_max_m {limits.max_range_m:.10g}")
    print(f"v_max_mps {limits.max_speed_mps:.10g}")
    return 0


def _crb_rows(config: FullConfig) -> tuple[list[str], list[list[str]]]:
    validate_scene(config.scene, config.waveform, config.arrays)
    rng = np.random.default_rng(DEFAULT_SEED)
    truth = derive_target_truth(config.scene, config.waveform, config.arrays,
                                rng)
    channel = build_los_channel(config.scene, config.arrays, rng)
    profiles = design_phase_profiles(config.scene.doa_prior_rad, config.arrays,
                                     config.scene.n_subarrays)
    combiner = design_beamformers(channel, config.waveform.n_pulses)
    tensors = [synthesize_echo_tensor(build_factor_matrices(
        truth, channel, prof, combiner, config.waveform, config.arrays))
        for prof in profiles]
    k_total = len(truth.targets)
    header = ["snr_db"]
    for fam in ("crb_theta", "crb_nu", "crb_tau"):
        header += [f"{fam}_{k + 1}" for k in range(k_total)]
    body = []
    for snr in CRB_SNR_GRID:
        noise_vars = tuple(noise_sigma_for_snr(t, snr) ** 2 for t in tensors)
        fim = compute_fim(truth, channel, profiles, combiner, config.waveform,
                          config.arrays, noise_vars)
        bounds = compute_crb(fim)
        cells = [f"{snr:.17e}"]
        for fam in (bounds.theta, bounds.doppler, bounds.delay):
            cells += [f"{v:.17e}" for v in fam]
        body.append(cells)
    return header, body


def _cmd_crb(args) -> int:
    config = load_config(args.config)
    header, body = _crb_rows(config)
    if args.out is None:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(body)
    else:
        with open(Path(args.out), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(body)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler = {"run": _cmd_run, "limits": _cmd_limits, "crb": _cmd_crb}
    try:
        return handler[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
