"""Command-line interface.

Subcommands: run (single trajectory), convergence (full study), spectrum
(eigenvalue table), probe (operator-estimate probes). Exit codes: 0 on
success, 2 for configuration problems, 3 for numerical failures, 4 when a
run aborts on the blow-up guard.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from .cutoff import CutoffProfile, bernstein_probe, dispersive_probe
from .diagnostics import AdmissiblePair, energy, strichartz_constant_probe
from .errors import BlowUpSuspected, ConfigError, NumericalFailure
from .flows import LambdaRule, SchemeConfig, run_scheme, write_snapshots
from .harness import (
    build_experiment,
    emit_report,
    load_config,
    run_convergence_study,
    write_probe_csv,
)
from .hamiltonian import State

PROBE_KINDS = ("dispersive", "bernstein", "strichartz")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpsplit",
                                     description="split-step solver and verification harness")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default="."):
        p.add_argument("--config", required=True, help="flat key=value config file")
        p.add_argument("--out", default=out_default, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--stride", type=int, default=None, help="snapshot stride override")

    common(sub.add_parser("run", help="run one trajectory and dump snapshots"))
    common(sub.add_parser("convergence", help="run the full convergence study"))
    spectrum = sub.add_parser("spectrum", help="print the eigenvalue table")
    common(spectrum, out_default=None)
    probe = sub.add_parser("probe", help="dispersive / bernstein / strichartz probes")
    probe.add_argument("kind", choices=PROBE_KINDS)
    common(probe)
    return parser


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "stride", None) is not None:
        cfg.snapshot_stride = args.stride
        cfg.validate()
    return cfg


def _cmd_run(args) -> int:
    cfg = _load(args)
    exp = build_experiment(cfg)
    scheme = SchemeConfig(
        tau=cfg.tau0, final_time=cfg.final_time, stepper=cfg.stepper_list[0],
        lambda_rule=LambdaRule(cfg.lambda_rule, cfg.lambda_c, cfg.lambda_gamma),
        profile=CutoffProfile(cfg.cutoff_profile, cfg.smoothstep_order),
        nonlinearity=exp.problem.nonlinearity,
    )
    traj = run_scheme(exp.u0, scheme, exp.w_values, stride=cfg.snapshot_stride,
                      guard_factor=cfg.blowup_guard_factor)
    os.makedirs(args.out, exist_ok=True)
    snap_path = os.path.join(args.out, "snapshots.txt")
    write_snapshots(traj, snap_path)
    energies = [energy(State.from_grid(exp.ham, s), exp.problem) for s in traj.states]
    sidecar = {
        "config": cfg.as_dict(),
        "stepper": scheme.stepper,
        "tau": repr(scheme.tau),
        "lambda": repr(scheme.lam if scheme.stepper == "cutoff_lie" else math.inf),
        "gauge_shift": repr(exp.ham.gauge_shift),
        "snapshot_file": "snapshots.txt",
        "snapshot_steps": [int(n) for n in traj.steps],
        "mass_series": [repr(float(m)) for m in traj.mass],
        "energy_series": [repr(float(e)) for e in energies],
    }
    with open(os.path.join(args.out, "run.json"), "w", encoding="ascii", newline="\n") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"wrote {snap_path} ({len(traj.steps)} snapshots)")
    return 0


def _cmd_convergence(args) -> int:
    cfg = _load(args)
    report = run_convergence_study(cfg)
    os.makedirs(args.out, exist_ok=True)
    for path in emit_report(report, args.out):
        print(f"wrote {path}")
    return 0


def _cmd_spectrum(args) -> int:
    cfg = _load(args)
    exp = build_experiment(cfg)
    ham = exp.ham
    lines = ["j,mu,mu_ungauged"]
    for j, mu in enumerate(ham.eigenvalues):
        lines.append(f"{j},{mu!r},{mu - ham.gauge_shift!r}")
    text = "\n".join(lines) + "\n"
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "spectrum.csv")
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_probe(args) -> int:
    cfg = _load(args)
    exp = build_experiment(cfg)
    profile = CutoffProfile(cfg.cutoff_profile, cfg.smoothstep_order)
    lams = [float(s) for s in cfg.probe_lambdas.split(",") if s.strip()]
    rows = []
    for lam in lams:
        if args.kind == "dispersive":
            tau = 1.0 / lam
            t_values = [tau * k for k in range(1, cfg.probe_t_count + 1)]
            rows += dispersive_probe(exp.ham, lam, profile, t_values,
                                     n_trials=cfg.probe_trials, seed=cfg.seed)
        elif args.kind == "bernstein":
            _, table = bernstein_probe(exp.ham, lam, profile, cfg.probe_p, cfg.probe_q,
                                       n_trials=cfg.probe_trials, seed=cfg.seed)
            rows += table
        else:
            pair = AdmissiblePair(cfg.probe_strichartz_q, cfg.probe_strichartz_r)
            _, table = strichartz_constant_probe(
                exp.ham, lam, 1.0 / lam, pair, n_trials=cfg.probe_trials,
                horizon=cfg.probe_horizon, profile=profile, seed=cfg.seed)
            rows += table
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"probe_{args.kind}.csv")
    write_probe_csv(rows, path)
    print(f"wrote {path}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "convergence": _cmd_convergence,
    "spectrum": _cmd_spectrum,
    "probe": _cmd_probe,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except BlowUpSuspected as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
