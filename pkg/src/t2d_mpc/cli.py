"""``simulate`` command line entry point.

Exit codes: 0 success, 1 invalid configuration, 2 numerical fault.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .integrator import IntegrationError
from .model import ParameterFileError, load_calibration
from .mpc import AllCandidatesDiverged
from .scenario import ConfigError, decision_rows, decisions_csv, load_config, run_scenario, trajectory_csv

log = logging.getLogger("t2d_mpc")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="simulate",
        description="Simulate T2D progression open loop or under MPC-recommended exercise.",
    )
    ap.add_argument("--config", required=True, type=Path, help="scenario INI file")
    ap.add_argument("--mode", choices=("open-loop", "mpc"), help="override the scenario mode")
    ap.add_argument("--out", type=Path, help="override the output directory")
    ap.add_argument("--seed-check", action="store_true",
                    help="rerun the scenario and verify the CSVs are byte-identical")
    ap.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.mode:
            cfg = cfg.with_mode(args.mode)
        if args.out:
            cfg = replace(cfg, output_dir=args.out)
        traj, decisions, report = run_scenario(cfg, write=True, figures=not args.no_figures)
    except (ConfigError, ParameterFileError) as exc:
        print(f"simulate: configuration error: {exc}", file=sys.stderr)
        return 1
    except (IntegrationError, AllCandidatesDiverged, FloatingPointError) as exc:
        print(f"simulate: numerical fault: {exc}", file=sys.stderr)
        return 2

    s = report.summary
    print(f"{cfg.mode}: {s['n_samples']} samples, {s['n_periods']} control periods")
    print(f"final G = {s['final_G']:.2f} mg/dl (min {s['min_G']:.2f}, max {s['max_G']:.2f})")
    if decisions:
        print(f"total prescribed exercise = {s['total_prescribed_minutes']:.0f} min; "
              f"{s['periods_meeting_who_minimum']}/{s['n_periods']} periods at >= 150 min/week")
    print(f"outputs in {cfg.output_dir}")

    if args.seed_check:
        traj2, decisions2, _ = run_scenario(cfg, write=False)
        cal = load_calibration(cfg.params_path)
        same = trajectory_csv(traj) == trajectory_csv(traj2) and (
            decisions_csv(decision_rows(decisions, cfg.u_bar, cfg.program_T, cal)[0])
            == decisions_csv(decision_rows(decisions2, cfg.u_bar, cfg.program_T, cal)[0]))
        print("seed check: " + ("identical" if same else "MISMATCH"))
        if not same:
            return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
