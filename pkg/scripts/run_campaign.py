"""Run a Monte Carlo campaign and write trials.csv, summary.csv and config.txt.

    python scripts/run_campaign.py scripts/configs/desk.cfg --out runs/desk
"""
import argparse
import logging
import time
from pathlib import Path

from tomocg import experiment


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("config", help="key = value campaign file")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, help="process count (default: TOMOCG_THREADS or CPU count)")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    cfg = experiment.CampaignConfig.from_text(Path(args.config).read_text())
    t0 = time.perf_counter()
    trials, summary = experiment.run_campaign(cfg, args.workers)
    out = Path(args.out)
    experiment.write_outputs(out, trials, summary)
    (out / "config.txt").write_text(cfg.to_text())
    print(f"{len(trials)} trials in {time.perf_counter() - t0:.0f}s -> {out}")


if __name__ == "__main__":
    main()
