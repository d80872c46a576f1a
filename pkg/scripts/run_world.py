"""Write the synthetic world fixture and run every pipeline stage on it.

    python scripts/run_world.py --out /tmp/world --seed 0
"""

import argparse
import sys
from pathlib import Path

from cascade_forensics.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="world_run")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = Path(args.out)
    code = cli(["synth", "--out", str(out), "--seed", str(args.seed)])
    if code == 0:
        code = cli(["all", "--config", str(out / "config.json")])
    if code == 0:
        for p in sorted((out / "artifacts").glob("*/*.csv")):
            print(p.relative_to(out))
    return code


if __name__ == "__main__":
    sys.exit(main())
