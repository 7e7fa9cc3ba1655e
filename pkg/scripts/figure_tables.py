"""Print the figure data of a campaign as plain-text tables.

Table 1: mean trace distance to the reference estimate for the raw
(Strategy 1) and coarse-grained (Strategy 3) estimators against mu.
Table 2: percentage of states where coarse graining helps and the mean and
standard deviation of the percentage improvement, plus the performance range.

    python scripts/figure_tables.py runs/desk/summary.csv
"""
import argparse
import csv
import math
from collections import defaultdict

from tomocg.experiment import SummaryRow, performance_range


def load(path):
    with open(path, newline="") as fh:
        rows = []
        for r in csv.DictReader(fh):
            rows.append(SummaryRow(
                gamma=float(r["gamma"]), mu=float(r["mu"]),
                pct_states_cg_better=float(r["pct_states_cg_better"]),
                mean_pct_improvement=float(r["mean_pct_improvement"]),
                std_pct_improvement=float(r["std_pct_improvement"]),
                mean_td_raw=float(r["mean_td_raw"]), mean_td_cg=float(r["mean_td_cg"]),
            ))
    return rows


def fmt(x, spec):
    return "   n/a" if math.isnan(x) else format(x, spec)


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("summary")
    args = p.parse_args()
    by_gamma = defaultdict(list)
    for r in load(args.summary):
        by_gamma[r.gamma].append(r)

    for gamma, rows in sorted(by_gamma.items()):
        rows.sort(key=lambda r: r.mu)
        print(f"\ngamma = {gamma:g}")
        print("   mu   td_raw    td_cg  better%   impr%    std%")
        for r in rows:
            print(f"{r.mu:5.2f}  {fmt(r.mean_td_raw, '7.4f')}  {fmt(r.mean_td_cg, '7.4f')}  "
                  f"{fmt(r.pct_states_cg_better, '6.1f')}  {fmt(r.mean_pct_improvement, '6.1f')}  "
                  f"{fmt(r.std_pct_improvement, '6.1f')}")
        try:
            rng = performance_range(rows)
        except ValueError:
            rng = None
        print("performance range:", "none" if rng is None else f"[{rng[0]:.3f}, {rng[1]:.3f}]")


if __name__ == "__main__":
    main()
