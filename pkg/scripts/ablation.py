"""Step-level credit ablation: GiGPO vs GRPO on the variable-length tasks over several seeds.

Reports mean final greedy success for each estimator and the delta both in absolute
points and relative to the GRPO mean.

    python scripts/ablation.py --seeds 0 1 2 3 4 --updates 100
"""

from __future__ import annotations

import argparse
import json
import statistics

from guirl.envpool import PoolConfig
from guirl.trainer import RewardConfig, TrainConfig, train


def run(estimator: str, seed: int, updates: int, tags: tuple[str, ...]) -> float:
    cfg = TrainConfig(estimator=estimator, seed=seed, max_updates=updates, task_tags=tags,
                      reward=RewardConfig(lambda_step=0.0), eval_every=max(updates, 1),
                      pool=PoolConfig(pool_size=8, spare_count=2))
    report, _ = train(cfg)
    return report.final_sr


def ablation(seeds, updates: int = 100, tags: tuple[str, ...] = ("variable_length",)) -> dict:
    sr = {est: [run(est, s, updates, tags) for s in seeds] for est in ("gigpo", "grpo")}
    gi, gr = statistics.fmean(sr["gigpo"]), statistics.fmean(sr["grpo"])
    return {
        "seeds": list(seeds),
        "updates": updates,
        "per_seed": sr,
        "mean_gigpo": gi,
        "mean_grpo": gr,
        "delta_abs": gi - gr,
        "delta_rel": (gi - gr) / gr if gr else None,
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--updates", type=int, default=100)
    args = ap.parse_args()
    print(json.dumps(ablation(args.seeds, args.updates), indent=1))


if __name__ == "__main__":
    main()
