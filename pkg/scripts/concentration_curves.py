"""Regenerate the success-probability-vs-entanglement curve family.

Writes the CSV table for a grid of entanglement values and round counts,
and optionally renders the curves (plus the E ceiling) to an image.

Usage:
    python scripts/concentration_curves.py --output curves.csv
    python scripts/concentration_curves.py --rounds 1,2,3,4,5 --plot curves.png
"""

import argparse
import sys

from ecpsim.analytic import curve
from ecpsim.cli import _fmt_float


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--e-min", type=float, default=0.02)
    parser.add_argument("--e-max", type=float, default=1.0)
    parser.add_argument("--e-step", type=float, default=0.02)
    parser.add_argument("--rounds", default="1,2,3,4,5",
                        help="comma-separated round counts")
    parser.add_argument("--output", default="-", help="CSV path, - for stdout")
    parser.add_argument("--plot", help="optional image path (needs matplotlib)")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    rounds = [int(part) for part in args.rounds.split(",")]
    count = int((args.e_max - args.e_min) / args.e_step + 1e-9) + 1
    grid = [round(args.e_min + i * args.e_step, 12) for i in range(count)]
    table = curve(grid, rounds)

    lines = ["E,n,P_n,P_over_E"]
    for row in table.rows:
        lines.append(f"{_fmt_float(row.entanglement)},{row.rounds},"
                     f"{_fmt_float(row.p_success)},{_fmt_float(row.p_success / row.entanglement)}")
    text = "\n".join(lines) + "\n"
    if args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)

    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4.5))
        for n in rounds:
            points = [(r.entanglement, r.p_success) for r in table.rows if r.rounds == n]
            ax.plot(*zip(*points), label=f"n = {n}")
        ax.plot(grid, grid, "k--", linewidth=0.8, label="E (ceiling)")
        ax.set_xlabel("entanglement E")
        ax.set_ylabel("success probability P")
        ax.legend(loc="upper left")
        fig.tight_layout()
        fig.savefig(args.plot, dpi=150)
        print(f"wrote {args.plot}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
