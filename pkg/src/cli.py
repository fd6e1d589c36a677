"""
hetero-partition: plan, simulate and verify FPGA/GPU partitions of CNN modules.

    python src/cli.py plan --model builtin:fire --objective energy --out runs/fire
    python src/cli.py simulate --model fixtures/models/fire.model --plan runs/fire/plan.json
    python src/cli.py verify --model builtin:bottleneck --count 32 --seed 7
    python src/cli.py report runs/*/report.json --out runs
"""

import argparse
import sys

from errors import PartitionToolError
from planner.objective import Objective
from util.run_operations import RunConfig, parse_g_grid, run


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{text}'") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _objective(text: str) -> Objective:
    try:
        return Objective.parse(text)
    except PartitionToolError as e:
        raise argparse.ArgumentTypeError(e.message) from None


def _add_model_arguments(parser: argparse.ArgumentParser, plan_help: str):
    parser.add_argument("--model", required=True,
                        help="model file, or builtin:<template>[:key=value,...]")
    parser.add_argument("--device-config", help="device JSON (default: devices.json, then devices.sample.json)")
    parser.add_argument("--calibration", help="GPU calibration CSV (default: fixtures/calibration/fpga_favorable.csv)")
    parser.add_argument("--objective", type=_objective, default=Objective(),
                        help="latency | energy | weighted:<alpha> (default: energy)")
    parser.add_argument("--plan", help=plan_help)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--beam-width", type=_positive_int, default=32)
    parser.add_argument("--g-grid", help="extra ChannelSplit sizes, comma separated")
    parser.add_argument("--exact-transfers", action="store_true",
                        help="move channel-split partials at accumulator width (4 bytes per element)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetero-partition", description=__doc__.strip().splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True)

    plan = commands.add_parser("plan", help="optimize a partition and simulate it against the GPU-only baseline")
    _add_model_arguments(plan, "reuse this plan instead of optimizing")

    simulate = commands.add_parser("simulate", help="simulate a given plan (default: all layers on the GPU)")
    _add_model_arguments(simulate, "plan document to simulate")

    verify = commands.add_parser("verify", help="check partitioned execution is bit-identical to the reference")
    _add_model_arguments(verify, "plan document to verify (default: the optimized plan)")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--count", type=_positive_int, default=32, help="number of random cases (default: 32)")

    report = commands.add_parser("report", help="gain table over report documents")
    report.add_argument("reports", nargs="+", help="report.json files carrying their baseline")
    report.add_argument("--out", help="directory for gains.csv and gains.txt")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            config = RunConfig(out=args.out, reports=list(args.reports))
        else:
            config = RunConfig(
                model=args.model,
                device_config=args.device_config,
                calibration=args.calibration,
                objective=args.objective,
                plan=args.plan,
                out=args.out,
                seed=getattr(args, "seed", 0),
                count=getattr(args, "count", 32),
                beam_width=args.beam_width,
                g_grid=tuple(parse_g_grid(args.g_grid)),
                exact_transfers=args.exact_transfers,
            )
        return run(args.command, config)
    except PartitionToolError as e:
        print(f"error: {e.diagnostic()}", file=sys.stderr)
    except OSError as e:
        print(f"error: {e.filename or ''}: {e.strerror or e}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
