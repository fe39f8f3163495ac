"""Monte Carlo coverage for every config in configs/; one CSV per config.

    python3 scripts/run_coverage.py [--out results] [--workers N] [--reps R] [configs/x.ini ...]
"""
import argparse
import csv
import time
from dataclasses import replace
from pathlib import Path

from anytime_pacbayes.simulation import coverage, load_config

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("configs", nargs="*", type=Path)
    ap.add_argument("--out", type=Path, default=ROOT / "results")
    ap.add_argument("--workers", type=int)
    ap.add_argument("--reps", type=int)
    args = ap.parse_args()
    paths = args.configs or sorted((ROOT / "configs").glob("*.ini"))
    args.out.mkdir(parents=True, exist_ok=True)
    worst_ok = True
    for path in paths:
        cfg = load_config(path)
        if args.reps:
            cfg = replace(cfg, reps=args.reps)
        start = time.perf_counter()
        report = coverage(cfg, workers=args.workers)
        elapsed = time.perf_counter() - start
        target = args.out / f"{path.stem}_coverage.csv"
        with open(target, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bound", "kind", "violations", "violation_rate", "std_error", "threshold"])
            for row in zip(report.names, report.kinds, report.violations, report.violation_rate, report.std_error):
                w.writerow([row[0], row[1], int(row[2]), repr(float(row[3])), repr(float(row[4])), repr(report.threshold)])
        print(f"{path.stem}: {report.scenario}, {report.reps} reps x {report.horizon} steps, {elapsed:.1f} s")
        for name, rate in zip(report.names, report.violation_rate):
            flag = "ok" if rate <= report.threshold else "EXCEEDS"
            worst_ok &= rate <= report.threshold
            print(f"  {name:<24} {rate:.4f}  {flag}")
    print("all rates within threshold" if worst_ok else "some rates exceed the threshold")
    return 0 if worst_ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
