#!/usr/bin/env python3
"""Plot one or more sweep CSVs (T,value,std_error,perpetual) against the horizon.

    dynkin sweep --kind call --s0 140 --out call140.csv
    python3 tools/plot_sweep.py call140.csv -o call140.png
"""
import argparse
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    cols = {k: [float(r[k]) for r in rows] for k in ("T", "value", "std_error", "perpetual")}
    return cols


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("csv", nargs="+")
    parser.add_argument("-o", "--output", default="sweep.png")
    args = parser.parse_args()

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for path in args.csv:
        d = read(path)
        err = [2 * e for e in d["std_error"]]
        line = ax.errorbar(d["T"], d["value"], yerr=err, marker="o", capsize=3, label=path)
        ax.axhline(d["perpetual"][0], linestyle="--", color=line[0].get_color(), alpha=0.6)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("horizon T (years)")
    ax.set_ylabel("game option value")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.output, dpi=120)


if __name__ == "__main__":
    main()
