#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Utility script to plot a benchmark sweep.

Plots a time column of a ``lutpim bench`` CSV against a swept parameter,
one line per value of an optional grouping column (for example the
strategy). Failed points are dropped.

License: See the LICENSE file.

"""

import argparse

import clevercsv
import matplotlib.pyplot as plt
import pandas as pd

NUMERIC = ["M", "K", "N", "b_w", "b_a", "b_o", "p", "k", "num_banks"]


def parse_args():
    parser = argparse.ArgumentParser()
    parser.add_argument("-x", help="Swept column on the x axis", default="p")
    parser.add_argument(
        "-y", help="Time column on the y axis", default="wall_time_s"
    )
    parser.add_argument(
        "-g", "--group", help="Column to draw one line per value", default="strategy"
    )
    parser.add_argument("--log", help="Logarithmic y axis", action="store_true")
    parser.add_argument(
        "-o", "--output-file", help="Output file to save the figure to"
    )
    parser.add_argument("input", help="Bench output (in CSV format)")
    return parser.parse_args()


def load_sweep(filename):
    with open(filename, "r", newline="") as fp:
        reader = clevercsv.DictReader(
            fp, delimiter=",", quotechar='"', escapechar=""
        )
        rows = [r for r in reader if r["status"] == "ok"]
    df = pd.DataFrame(rows)
    if df.empty:
        return df
    for col in NUMERIC + [c for c in df.columns if c.endswith("_s")]:
        if col in df.columns:
            df[col] = pd.to_numeric(df[col], errors="coerce")
    return df


def main():
    args = parse_args()
    df = load_sweep(args.input)
    if df.empty:
        print("No successful points to plot.")
        return

    fig, ax = plt.subplots(1, 1)
    groups = df.groupby(args.group) if args.group in df.columns else [("", df)]
    for label, part in groups:
        part = part.sort_values(args.x)
        ax.scatter(part[args.x], part[args.y])
        ax.plot(part[args.x], part[args.y], label=str(label))
    ax.set_xlabel(args.x)
    ax.set_ylabel(args.y)
    if args.log:
        ax.set_yscale("log")
    if args.group in df.columns:
        ax.legend(title=args.group)
    fig.suptitle("%s against %s" % (args.y, args.x))
    if args.output_file:
        plt.savefig(args.output_file, transparent=True)
    else:
        plt.show()


if __name__ == "__main__":
    main()
