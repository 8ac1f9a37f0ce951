"""Worst-case Richardson bound against the achieved error along a time grid."""

import argparse
from pathlib import Path

from analog_zne.config import load_config
from analog_zne.experiments import run_experiment, write_outputs

ROOT = Path(__file__).resolve().parents[1]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=ROOT / "configs" / "bounds_report.cfg")
    parser.add_argument("--out", default="out/bounds")
    args = parser.parse_args()

    out = run_experiment(load_config(args.config))
    write_outputs(out, args.out)
    print(f"{'time':>6} {'bound':>12} {'actual':>12}")
    for (t, _, rep), err in zip(out.bounds, out.bound_columns["actual_error"]):
        print(f"{t:6.2f} {rep.total:12.3e} {err:12.3e}")


if __name__ == "__main__":
    main()
