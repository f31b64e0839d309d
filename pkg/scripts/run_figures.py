"""Run registered experiments, then write gnuplot tables for each.

    python3 scripts/run_figures.py [ids ...] [--seeds N] [--out DIR]

Defaults to every experiment over its configured seeds. Exit status 1 if any
check failed.
"""

import argparse
import sys

from rctransfer.harness import artifacts, registry
from rctransfer.harness.runner import default_out_root, run_experiment


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("ids", nargs="*", default=["all"])
    ap.add_argument("--seeds", type=int)
    ap.add_argument("--out")
    args = ap.parse_args()
    out = args.out or default_out_root()
    failed = []
    for name in args.ids:
        for cfg in registry.resolve(name):
            if args.seeds:
                cfg = cfg.with_seeds(range(args.seeds))
            rep = run_experiment(cfg, out, log=lambda s: print(s, file=sys.stderr, flush=True))
            artifacts.emit_plot_data(rep.out_dir)
            print("\n".join(rep.lines()))
            if not rep.passed:
                failed.append(cfg.id)
    print("failed: " + (", ".join(failed) if failed else "none"))
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
