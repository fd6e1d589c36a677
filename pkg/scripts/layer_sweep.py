#!/usr/bin/env python3
"""
Per-layer FPGA vs GPU comparison over kernel sizes and filter counts.

    python scripts/layer_sweep.py > layers.csv
"""

import argparse
import csv
import os
import sys
from dataclasses import asdict, fields

sys.path.append(os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))

from device_manager import load_device_models
from sweeps import LayerRow, layer_sweep


def _ints(text: str):
    return tuple(int(v) for v in text.split(","))


def main():
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("--device-config")
    parser.add_argument("--calibration")
    parser.add_argument("--shape", type=_ints, default=(224, 224, 3), help="h,w,c")
    parser.add_argument("--kernels", type=_ints, default=(1, 3, 5, 7))
    parser.add_argument("--filters", type=_ints, default=(2, 4, 8, 16, 32, 64))
    args = parser.parse_args()

    models = load_device_models(args.device_config, args.calibration)
    h, w, c = args.shape
    rows = layer_sweep(models, h, w, c, args.kernels, args.filters)

    writer = csv.DictWriter(sys.stdout, fieldnames=[f.name for f in fields(LayerRow)], lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(asdict(row))
    infeasible = [f"k={r.k} n={r.n}" for r in rows if not r.fpga_feasible]
    if infeasible:
        print(f"FPGA budget exceeded for: {', '.join(infeasible)}", file=sys.stderr)


if __name__ == "__main__":
    main()
