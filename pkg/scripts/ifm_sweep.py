#!/usr/bin/env python3
"""
Gains of a template as the input feature map shrinks.

    python scripts/ifm_sweep.py fire --calibration fixtures/calibration/crossover.csv > fire_ifm.csv
"""

import argparse
import csv
import os
import sys
from dataclasses import asdict, fields

sys.path.append(os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))

from device_manager import load_device_models
from planner.objective import Objective
from sweeps import IfmRow, ifm_ladder, ifm_sweep


def main():
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("template")
    parser.add_argument("--device-config")
    parser.add_argument("--calibration")
    parser.add_argument("--objective", default="energy")
    parser.add_argument("--start", type=int, default=224)
    parser.add_argument("--stop", type=int, default=4)
    args = parser.parse_args()

    models = load_device_models(args.device_config, args.calibration)
    rows = ifm_sweep(args.template, models, Objective.parse(args.objective), ifm_ladder(args.start, args.stop))

    writer = csv.DictWriter(sys.stdout, fieldnames=[f.name for f in fields(IfmRow)], lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(asdict(row))


if __name__ == "__main__":
    main()
