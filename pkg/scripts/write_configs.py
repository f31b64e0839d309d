"""Regenerate configs/<id>.yaml from the experiment registry.

    python3 scripts/write_configs.py [--check]

With --check nothing is written; the exit status is 1 if any file is stale.
"""

import argparse
import sys
from pathlib import Path

from rctransfer.harness import config, registry

ROOT = Path(__file__).resolve().parents[1] / "configs"


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args()
    stale = []
    ROOT.mkdir(exist_ok=True)
    for exp_id, cfg in registry.REGISTRY.items():
        path = ROOT / f"{exp_id}.yaml"
        text = config.dumps(cfg)
        if path.exists() and path.read_text() == text:
            continue
        stale.append(path.name)
        if not args.check:
            path.write_text(text)
    if stale:
        print(("stale: " if args.check else "wrote: ") + ", ".join(stale))
    return 1 if (args.check and stale) else 0


if __name__ == "__main__":
    sys.exit(main())
