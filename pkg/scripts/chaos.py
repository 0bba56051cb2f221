"""Fault-injection drill on the environment pool.

    python scripts/chaos.py --envs 64 --spares 16 --fault-prob 0.05 --episodes 500
"""

from __future__ import annotations

import argparse
import json

from guirl.trainer.chaos import run_chaos


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--envs", type=int, default=64)
    ap.add_argument("--spares", type=int, default=16)
    ap.add_argument("--fault-prob", type=float, default=0.05)
    ap.add_argument("--episodes", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    report = run_chaos(args.envs, args.spares, args.fault_prob, args.episodes, seed=args.seed)
    print(json.dumps(report.to_dict(), indent=1))
    ok = report.aborted == 0 and report.rotations == report.faults
    raise SystemExit(0 if ok else 1)


if __name__ == "__main__":
    main()
