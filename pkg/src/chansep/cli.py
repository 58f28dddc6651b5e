"""Command line entry point: ``run``, ``validate`` and ``single``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

import numpy as np

from chansep.channel import SystemConfig, config_from_mapping, global_channel, read_toml, realize
from chansep.harness import (
    METHODS,
    SweepSpec,
    aggregate,
    design,
    sweep_from_mapping,
    to_csv,
    write_csv,
    run_sweep,
)
from chansep.metrics import DIRECT, MetricKind
from chansep.numerics import RankDeficiencyError
from chansep.separation import separate, w_of_phases

log = logging.getLogger("chansep")

SWEEP_KEYS = {f.name for f in dataclasses.fields(SweepSpec)}
SYSTEM_KEYS = {f.name for f in dataclasses.fields(SystemConfig)}


def load(path, seed=None, methods=None, trials=None):
    """SystemConfig and SweepSpec from a TOML file, with flag overrides."""
    raw = read_toml(path) if path else {}
    unknown = set(raw) - SWEEP_KEYS - SYSTEM_KEYS
    if unknown:
        raise KeyError(f"unknown config keys {sorted(unknown)}")
    sys_vals = {k: v for k, v in raw.items() if k in SYSTEM_KEYS and k not in SWEEP_KEYS}
    sweep_vals = {k: v for k, v in raw.items() if k in SWEEP_KEYS}
    if methods is not None:
        sweep_vals["methods"] = methods
    if trials is not None:
        sweep_vals["trials"] = trials
    if seed is not None:
        sys_vals["seed"] = seed
    cfg = config_from_mapping(sys_vals)
    spec = sweep_from_mapping(sweep_vals, seed=seed)
    return cfg, spec


def _complex(a):
    a = np.asarray(a)
    return {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}


def cmd_run(args):
    cfg, spec = load(args.config, args.seed, args.methods, args.trials)
    log.info("sweep: %d cells x %d trials, methods %s",
             sum(1 for _ in spec.cells()), spec.trials, ",".join(spec.methods))
    table = aggregate(run_sweep(cfg, spec, workers=args.workers))
    if args.out:
        write_csv(table, args.out)
    else:
        sys.stdout.write(to_csv(table))
    return 0


def cmd_validate(args):
    from chansep.acceptance import run_all

    results = run_all(quick=args.quick)
    failed = [c for c in results if not c.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


def cmd_single(args):
    cfg, spec = load(args.config, args.seed, args.methods, None)
    ny, nz = spec.n_grid[0]
    cfg = cfg.replace(N_y=ny, N_z=nz, K=spec.k_list[0], kappa_br=spec.kappa_br_list[0],
                      b=spec.b, L=spec.L)
    real = realize(cfg, seed=spec.seed, key=(args.trial,))
    sep = separate(real, cfg.sigma2, force=not real.pure_los)
    out = {
        "N": real.N, "K": real.K, "M": real.M, "kappa_br": str(cfg.kappa_br),
        "sigma2": cfg.sigma2, "pure_los": real.pure_los,
        "Q_sum": _complex(sep.Q_sum), "Q_zf": _complex(sep.Q_zf), "methods": {},
    }
    for method in spec.methods:
        entry = {}
        try:
            phases, evals, res = design(method, cfg, real, sep, spec, args.trial)
        except RankDeficiencyError as e:
            out["methods"][method] = {"error": str(e)}
            continue
        H = global_channel(real, phases)
        entry["phases"] = phases.phases.tolist()
        entry["w"] = _complex(w_of_phases(sep, phases))
        entry["evaluations"] = evals
        entry["warnings"] = list(res.warnings) if res is not None else []
        for kind in MetricKind:
            try:
                entry[kind.value] = DIRECT[kind](H, cfg.sigma2)
            except RankDeficiencyError:
                entry[kind.value] = None
        out["methods"][method] = entry
    text = json.dumps(out, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="chansep", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, trials=True):
        sp.add_argument("--config", help="TOML file with SystemConfig and sweep keys")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output path (stdout if omitted)")
        sp.add_argument("--methods", help=f"comma list from {','.join(METHODS)}")
        if trials:
            sp.add_argument("--trials", type=int)

    r = sub.add_parser("run", help="run a Monte Carlo sweep and write the CSV summary")
    common(r)
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="run the acceptance checks")
    v.add_argument("--quick", action="store_true", help="fewer trials, for smoke tests")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("single", help="one trial, dumped as JSON")
    common(s, trials=False)
    s.add_argument("--trial", type=int, default=0)
    s.set_defaults(func=cmd_single)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (KeyError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
