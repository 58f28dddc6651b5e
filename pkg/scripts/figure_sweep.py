"""Sum-rate-versus-N sweeps for each (b, L) setting: b in {1, 3}, L in {1, 2}.

Writes one CSV per setting into ``--out-dir``. Baselines are slow; pass
``--no-baselines`` for a quick look.

    python3 scripts/figure_sweep.py --config configs/full.toml --out-dir results
"""

import argparse
import dataclasses
import logging
import pathlib
import time

from chansep.cli import load
from chansep.harness import aggregate, run_sweep, write_csv

SETTINGS = [(1, 1), (3, 1), (1, 2), (3, 2)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/full.toml")
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--trials", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--no-baselines", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg, spec = load(args.config, args.seed, None, args.trials)
    if args.no_baselines:
        spec = dataclasses.replace(
            spec, methods=tuple(m for m in spec.methods if not m.startswith("Baseline")))
    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for b, L in SETTINGS:
        s = dataclasses.replace(spec, b=b, L=L)
        # the continuous methods do not depend on (b, L); run them once
        if (b, L) != SETTINGS[0]:
            s = dataclasses.replace(s, methods=tuple(m for m in s.methods if m.startswith("Muiq")) or ("Random",))
        t0 = time.time()
        path = out / f"sweep_b{b}_L{L}.csv"
        write_csv(aggregate(run_sweep(cfg, s, workers=args.workers)), path)
        logging.info("b=%d L=%d -> %s (%.0f s)", b, L, path, time.time() - t0)


if __name__ == "__main__":
    main()
