"""Command line interface.

Subcommands select the scenario kind; a config file supplies parameters and
flow settings, with a few common overrides as flags.  Exit codes: 0 when the
run finished and every invariant check passed, 2 when a run completed but
the dissipation ledger recorded a violation (all files are still written),
1 on configuration or runtime errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .errors import ChevronError
from .params import FlowConfig, default_preset
from .scenario import Scenario, load_config, run_scenario

_DEFAULT_SWEEPS = {
    "q_sweep": (25.0, 50.0, 100.0),
    "rho_sweep": (1e-2, 1e-3, 1e-4),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chevronflow",
        description="Gradient-flow simulator for smectic-C chevron cells",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("relax", "relax under a constant field"),
        ("switch", "flip the field sign at switch_time and continue"),
        ("q-sweep", "independent relaxations across wave numbers"),
        ("rho-sweep", "independent relaxations across regularization weights"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="key=value config file")
        p.add_argument("--out", metavar="DIR", help="output directory override")
        p.add_argument("--seed", type=int, metavar="N", help="seed recorded with outputs")
        p.add_argument(
            "--snapshot-every", type=int, metavar="K", help="snapshot stride override"
        )
    return parser


def _scenario_for(args) -> Scenario:
    kind = args.command.replace("-", "_")
    if args.config:
        sc = load_config(args.config)
        if sc.kind != kind:
            sc = dataclasses.replace(sc, kind=kind)
    else:
        sc = Scenario(
            kind=kind,
            params=default_preset(),
            flow=FlowConfig(),
            switch_time=FlowConfig().T / 2 if kind == "switch" else None,
            sweep_values=_DEFAULT_SWEEPS.get(kind, ()),
        )
    if args.out:
        sc = dataclasses.replace(sc, output_dir=args.out)
    if args.seed is not None:
        sc = dataclasses.replace(sc, seed=args.seed)
    if args.snapshot_every is not None:
        sc = dataclasses.replace(sc, snapshot_every=args.snapshot_every)
    return sc


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        sc = _scenario_for(args)
        result = run_scenario(sc)
    except ChevronError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    if not result.ok:
        print(f"completed with per-element errors: {result.details.get('errors')}",
              file=sys.stderr)
        return 1
    if not result.ledger_ok:
        print("completed, but the dissipation ledger recorded violations",
              file=sys.stderr)
        return 2
    print(f"ok: artifacts in {result.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
