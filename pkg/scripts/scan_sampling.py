"""Sync error of a registered transfer experiment as the sampling interval varies.

    python3 scripts/scan_sampling.py fig4a --dt 0.02 0.05 0.1 --seeds 3

Training and driving systems get the same dt (and substeps). Prints one line per dt
with the median of each check metric, which is how the per-family intervals in
the registry were chosen.
"""

import argparse
import tempfile
from dataclasses import replace

from rctransfer.harness import registry
from rctransfer.harness.runner import run_experiment


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("experiment")
    ap.add_argument("--dt", type=float, nargs="+", required=True)
    ap.add_argument("--substeps", type=int, nargs="*", help="one per dt; default keeps the registered value")
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args()
    [base] = registry.resolve(args.experiment)
    subs = args.substeps or [None] * len(args.dt)
    with tempfile.TemporaryDirectory() as tmp:
        for dt, k in zip(args.dt, subs):
            sys_kw = {"dt": dt} if k is None else {"dt": dt, "substeps": k}
            cfg = replace(
                base,
                train=replace(base.train, **sys_kw),
                drive=None if base.drive is None else replace(base.drive, **sys_kw),
                seeds=tuple(range(args.seeds)),
            )
            rep = run_experiment(cfg, tmp)
            vals = ", ".join(f"{c.check.metric}={c.value:.4g}" for c in rep.checks)
            print(f"dt={dt:g}: {vals}")


if __name__ == "__main__":
    main()
