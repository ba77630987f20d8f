"""Plots for the CSV tables written by upconv.

    python scripts/plot.py out/scan.csv [-o scan.png]

The table kind is read from the schema comment on the first line.
"""

import argparse
import csv
import math
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

TWO_PI = 2.0 * math.pi


def read(path):
    with open(path, newline="") as f:
        first = f.readline().split()
        if len(first) < 4 or first[:2] != ["#", "upconv"]:
            sys.exit(f"{path}: not an upconv table")
        kind, version = first[2], first[4]
        rows = list(csv.DictReader(f))
    return kind, version, rows


def column(rows, name):
    out = []
    for r in rows:
        try:
            out.append(float(r[name]))
        except ValueError:
            out.append(math.nan)
    return np.array(out)


def grid(rows, xname, yname, zname):
    x = column(rows, xname)
    y = column(rows, yname)
    z = column(rows, zname)
    xs = np.unique(x)
    ys = np.unique(y)
    img = np.full((len(ys), len(xs)), math.nan)
    for xi, yi, zi in zip(x, y, z):
        img[np.searchsorted(ys, yi), np.searchsorted(xs, xi)] = zi
    return xs, ys, img


def extent(xs, ys, scale_x, scale_y):
    return [xs[0] / scale_x, xs[-1] / scale_x, ys[0] / scale_y, ys[-1] / scale_y]


def coherence(rows, out):
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), constrained_layout=True)
    for ax, name, label in zip(axes, ["abs_rho12", "abs_rho13"], ["|ρ12|", "|ρ13|"]):
        xs, ys, img = grid(rows, "delta_a_mu", "delta_a_o", name)
        im = ax.imshow(
            img,
            origin="lower",
            aspect="auto",
            extent=extent(xs, ys, TWO_PI * 1e6, TWO_PI * 1e9),
        )
        fig.colorbar(im, ax=ax, label=label)
        if "locus_degenerate" in rows[0]:
            ax.plot(
                column(rows, "locus_degenerate") / (TWO_PI * 1e6),
                column(rows, "delta_a_o") / (TWO_PI * 1e9),
                "w.",
                ms=2,
                label="degeneracy",
            )
            ax.set_xlim(xs[0] / (TWO_PI * 1e6), xs[-1] / (TWO_PI * 1e6))
        ax.set_xlabel("δ_aμ / 2π (MHz)")
        ax.set_ylabel("δ_ao / 2π (GHz)")
    fig.savefig(out, dpi=150)


def efficiency(rows, out):
    xs, ys, img = grid(rows, "atom_drive_mu", "atom_drive_o", "efficiency")
    fig, ax = plt.subplots(figsize=(5.5, 4), constrained_layout=True)
    im = ax.imshow(
        img,
        origin="lower",
        aspect="auto",
        extent=extent(xs, ys, TWO_PI * 1e6, TWO_PI * 1e9),
    )
    fig.colorbar(im, ax=ax, label="efficiency |C_ab|²")
    ax.set_xlabel("atom − drive, microwave / 2π (MHz)")
    ax.set_ylabel("atom − drive, optical / 2π (GHz)")
    fig.savefig(out, dpi=150)


def sweep(rows, out):
    name = list(rows[0].keys())[0]
    x = column(rows, name)
    y = column(rows, "efficiency")
    fig, ax = plt.subplots(figsize=(5, 3.5), constrained_layout=True)
    ax.plot(x, y, "o-")
    if name == "temperature":
        ax.set_xscale("log")
        ax.set_xlabel("temperature (K)")
    elif name == "pump_power":
        ax.set_xlabel("pump power (W)")
    else:
        ax.set_xscale("log")
        ax.set_xlabel(name)
    ax.set_ylabel("optimized efficiency")
    fig.savefig(out, dpi=150)


PLOTS = {
    "scan-coherence": coherence,
    "scan-efficiency": efficiency,
    "sweep": sweep,
}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("table")
    p.add_argument("-o", "--output")
    args = p.parse_args()
    kind, version, rows = read(args.table)
    if kind not in PLOTS:
        sys.exit(f"no plot for table kind {kind!r}")
    if version != "v1":
        print(f"warning: schema {version}, expected v1", file=sys.stderr)
    if not rows:
        sys.exit("table has no rows")
    out = args.output or args.table.rsplit(".", 1)[0] + ".png"
    PLOTS[kind](rows, out)
    print(out)


if __name__ == "__main__":
    main()
