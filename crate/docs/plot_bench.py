#!/usr/bin/env python3
"""Grouped bars from `gproc bench` CSV: one group per kernel, one bar per
graph/mapping. Plots modeled speedup by default, energy with --energy."""

import argparse
import csv
from collections import OrderedDict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path):
    with open(path, newline="") as f:
        return [r for r in csv.DictReader(f) if not r["error"]]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv")
    ap.add_argument("out")
    ap.add_argument("--energy", action="store_true", help="plot sim/ref energy ratio")
    args = ap.parse_args()

    rows = load(args.csv)
    ref = {(r["kernel"], r["graph"], r["mode"], r["k"], r["dims"]): r for r in rows if r["model"] == "ref"}
    series = OrderedDict()
    kernels = []
    for r in rows:
        if r["model"] != "sim":
            continue
        key = (r["kernel"], r["graph"], r["mode"], r["k"], r["dims"])
        if args.energy:
            base = ref.get(key)
            if base is None or float(base["energy"]) == 0:
                continue
            value = float(base["energy"]) / float(r["energy"])
        else:
            value = float(r["speedup"])
        label = f'{r["graph"]} {r["mode"]} k={r["k"]} {r["dims"]}'
        series.setdefault(label, {})[r["kernel"]] = value
        if r["kernel"] not in kernels:
            kernels.append(r["kernel"])

    width = 0.8 / max(len(series), 1)
    fig, ax = plt.subplots(figsize=(max(6, len(kernels) * 1.5), 4))
    for i, (label, vals) in enumerate(series.items()):
        xs = [k + i * width for k in range(len(kernels))]
        ax.bar(xs, [vals.get(k, 0) for k in kernels], width, label=label)
    ax.set_xticks([k + width * (len(series) - 1) / 2 for k in range(len(kernels))])
    ax.set_xticklabels(kernels)
    ax.set_ylabel("reference / sim energy" if args.energy else "modeled speedup")
    ax.axhline(1.0, color="grey", linewidth=0.5)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
