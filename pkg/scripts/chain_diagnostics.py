"""Where does the relay chain lose accuracy?

    python3 scripts/chain_diagnostics.py [--seeds N]

For each chain stage: its sync error when driven directly by the physical drive,
and its error inside the chain (driven by the previous stage's relayed estimate).
"""

import argparse

import numpy as np

from rctransfer import seeding
from rctransfer.errors import DivergenceError
from rctransfer.harness import registry
from rctransfer.harness.runner import _dataset, _r0
from rctransfer.inference import ChainSpec, ChainStage, DriveMask, run_chain, run_driven
from rctransfer.metrics import sync_error
from rctransfer.training import train


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args()
    cfg = registry.REGISTRY["fig6"]
    alone, chained = [], []
    for seed in range(args.seeds):
        dv = _dataset(cfg.drive, seed, seeding.DRIVE_IC)
        stages, a_row = [], []
        for i, st in enumerate(cfg.stages, start=1):
            tr = _dataset(st.train, seed, seeding.TRAIN_IC, i, split=cfg.split)
            rc = st.reservoir.with_seed(seeding.child(seed, i))
            m = train(tr, rc, cfg.split)
            stages.append(ChainStage(m.weights, m.readout, rc))
            r0 = _r0(seed, seeding.DRIVE_R0, rc.N, i)
            try:
                out = run_driven(m.weights, m.readout, rc, DriveMask.build(3, (1,)), dv, r0, warmup=cfg.warmup)
                e = sync_error(dv, out, cfg.discard).errors
                a_row.append((e[0], e[2]))
            except DivergenceError:
                a_row.append((np.inf, np.inf))
        r0s = [_r0(seed, seeding.DRIVE_R0, s.config.N, i) for i, s in enumerate(stages, start=1)]
        outs = run_chain(ChainSpec(tuple(stages)), dv, r0s, warmup=cfg.warmup)
        chained.append([(e[0], e[2]) for e in (sync_error(dv, o, cfg.discard).errors for o in outs)])
        alone.append(a_row)
    alone, chained = np.median(alone, axis=0), np.median(chained, axis=0)
    print("stage  training          alone dx   dz     chain dx   dz")
    for i, st in enumerate(cfg.stages):
        rho = st.train.params["rho"]
        print(f"{i + 1:5d}  lorenz rho={rho:<6g}  {alone[i, 0]:8.3f} {alone[i, 1]:6.3f}  {chained[i, 0]:8.3f} {chained[i, 1]:6.3f}")


if __name__ == "__main__":
    main()
