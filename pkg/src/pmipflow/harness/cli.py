"""Command line front end.

Three subcommands: `run` executes one scenario file, `experiment` drives a
named preset, `validate` only loads and checks a scenario.  Exit codes: 0 on
success, 1 when a scenario fails validation, 2 on any runtime error.
"""
from __future__ import annotations

import argparse
import os
import sys

from ..netsim import run as run_scenario
from .experiments import PRESETS, run_experiment
from .metrics import emit_csv
from .scenario import (
    ScenarioInvalid,
    apply_overrides,
    build_scenario,
    packaged_scenario_text,
    parse_doc,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


def _scenario_text(ref: str) -> tuple[str, str]:
    """Scenario text from a filesystem path, else from the packaged set."""
    if os.path.exists(ref):
        with open(ref, "r", encoding="utf-8") as fh:
            return fh.read(), ref
    return packaged_scenario_text(ref), ref


def _load(ref: str, overrides: list[str]):
    text, name = _scenario_text(ref)
    doc = parse_doc(text, name)
    if overrides:
        apply_overrides(doc, overrides)
    return build_scenario(doc, name)


def _flow_rows(metrics) -> list[dict]:
    rows = []
    for fid in sorted(metrics.flows):
        fm = metrics.flows[fid]
        rows.append({"flow": fid, "emitted": fm.emitted, "delivered": fm.delivered,
                     "dropped": fm.dropped, "diverted": fm.diverted,
                     "released": fm.released, "in_flight": fm.in_flight})
    return rows


def _cmd_run(args) -> int:
    overrides = list(args.set or [])
    if args.horizon is not None:
        overrides.append(f"scenario.horizon_ms={args.horizon}")
    scenario = _load(args.scenario, overrides)
    result = run_scenario(scenario, args.seed)
    m = result.metrics
    m.check_conservation()

    print(f"scenario {scenario.name} seed {args.seed} "
          f"events {result.events_processed}")
    emitted = sum(f.emitted for f in m.flows.values())
    delivered = sum(f.delivered for f in m.flows.values())
    dropped = sum(f.dropped for f in m.flows.values())
    print(f"packets emitted {emitted} delivered {delivered} dropped {dropped}")
    for msg, count in sorted(m.msg_counts.items()):
        print(f"msg {msg} {count}")

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        trace_path = os.path.join(args.out, "trace.txt")
        result.trace.write(trace_path)
        emit_csv(os.path.join(args.out, "flows.csv"),
                 ["flow", "emitted", "delivered", "dropped", "diverted",
                  "released", "in_flight"], _flow_rows(m))
        emit_csv(os.path.join(args.out, "messages.csv"), ["msg", "count"],
                 [{"msg": k, "count": v} for k, v in sorted(m.msg_counts.items())])
        print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_experiment(args) -> int:
    result = run_experiment(args.preset, seed=args.seed,
                            overrides=list(args.set or []))
    for key, value in sorted(result.summary.items()):
        if isinstance(value, (int, float, bool, str)):
            print(f"{key} = {value}")
    if args.out:
        for path in result.write(args.out):
            print(f"wrote {path}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    scenario = _load(args.scenario, list(args.set or []))
    print(f"ok: {scenario.name}: {len(scenario.mags)} mags, "
          f"{len(scenario.mns)} mns, {len(scenario.flows)} flows, "
          f"horizon {scenario.horizon_us / 1000:g} ms")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmipflow",
        description="Deterministic flow-mobility protocol simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("scenario", help="scenario path or packaged name")
    p_run.add_argument("--seed", type=int, default=1)
    p_run.add_argument("--out", help="directory for trace and CSV output")
    p_run.add_argument("--horizon", type=float, metavar="MS",
                       help="override the scenario horizon")
    p_run.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a scenario value (repeatable)")
    p_run.set_defaults(func=_cmd_run)

    p_exp = sub.add_parser("experiment", help="run a named experiment preset")
    p_exp.add_argument("preset", choices=sorted(PRESETS) + [k.upper() for k in PRESETS],
                       help="preset name")
    p_exp.add_argument("--seed", type=int, default=1)
    p_exp.add_argument("--out", help="directory for CSV output")
    p_exp.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a scenario value (repeatable)")
    p_exp.set_defaults(func=_cmd_experiment)

    p_val = sub.add_parser("validate", help="load and validate a scenario")
    p_val.add_argument("scenario", help="scenario path or packaged name")
    p_val.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a scenario value (repeatable)")
    p_val.set_defaults(func=_cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioInvalid as exc:
        print(f"scenario invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports and exits
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
