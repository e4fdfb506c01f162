"""Test error against truncation level for several targets and p values.

    python scripts/error_decay.py --paths 4000 --out runs/error_decay.csv
"""
import argparse
import csv
from pathlib import Path

from sigapprox.brownian import BrownianConfig
from sigapprox.config import ExperimentConfig, RegressionConfig, TargetConfig
from sigapprox.pipeline import run_fit

TARGETS = {
    "gbm": ("terminal-functional", {"name": "gbm", "mu": 0.05, "sigma": 0.2}),
    "gbm_em": ("terminal-functional", {"name": "gbm_em", "mu": 0.05, "sigma": 0.2}),
    "ou": ("process", {"name": "ou", "theta": 1.0, "sigma": 0.3}),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=4000)
    ap.add_argument("--K", type=int, default=512)
    ap.add_argument("--levels", type=int, default=5)
    ap.add_argument("--p", type=float, nargs="+", default=[2.0, 1.5])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/error_decay.csv")
    args = ap.parse_args()

    rows = []
    for name, (kind, spec) in TARGETS.items():
        for p in args.p:
            cfg = ExperimentConfig(
                brownian=BrownianConfig(d=1, K=args.K, seed=args.seed, n_paths=args.paths),
                regression=RegressionConfig(p=p, N_list=tuple(range(1, args.levels + 1))),
                target=TargetConfig(kind, spec),
            )
            for _, rep in run_fit(cfg):
                rows.append([name, p, rep.N, rep.train_error, rep.test_error, rep.test_rel_error, rep.converged])
                print(f"{name:7s} p={p:<4} N={rep.N}  test {rep.test_error:.3e}  rel {rep.test_rel_error:.3e}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["target", "p", "N", "train_error", "test_error", "test_rel_error", "converged"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
