"""Seeded Monte Carlo sweeps over RIS size, user count and RIS-BS K-factor."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from chansep.channel import SystemConfig, global_channel, read_toml, realize, stream
from chansep.metrics import DIRECT, MetricKind
from chansep.numerics import RankDeficiencyError
from chansep.optimizers import (
    closed_form_mse_tot,
    closed_form_sum_rate,
    muiq,
    projected_ascent_baseline,
    random_phases,
)
from chansep.separation import separate

METHODS = (
    "Random", "MaxRSum", "MinMseTot", "MuiqSum", "MuiqZf", "MuiqMmse",
    "BaselineSum", "BaselineZf", "BaselineMmse", "BaselineMse",
)
METRICS = tuple(MetricKind)

# metric each method is designed for; Random has none
TARGET = {
    "MaxRSum": MetricKind.SumRate,
    "MinMseTot": MetricKind.MseTot,
    "MuiqSum": MetricKind.SumRate,
    "MuiqZf": MetricKind.ZfRate,
    "MuiqMmse": MetricKind.MmseRate,
    "BaselineSum": MetricKind.SumRate,
    "BaselineZf": MetricKind.ZfRate,
    "BaselineMmse": MetricKind.MmseRate,
    "BaselineMse": MetricKind.MseTot,
}

CSV_HEADER = ("N", "K", "kappa_br", "method", "metric", "mean", "stderr", "trials", "failures")


@dataclass(frozen=True)
class SweepSpec:
    n_grid: tuple = ((4, 4), (4, 8), (8, 8), (8, 16))
    k_list: tuple = (2, 5)
    kappa_br_list: tuple = (math.inf, 1.0)
    methods: tuple = METHODS
    trials: int = 200
    b: int = 1
    L: int = 1
    seed: int = 0
    restarts: int = 20

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.n_grid:
            raise ValueError("n_grid must be nonempty")
        if not self.k_list or not self.kappa_br_list:
            raise ValueError("k_list and kappa_br_list must be nonempty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {METHODS}")
        if self.b < 1 or self.L < 1 or self.restarts < 1:
            raise ValueError("b, L and restarts must be >= 1")
        for ny, nz in self.n_grid:
            if ny < 1 or nz < 1:
                raise ValueError(f"bad RIS grid {(ny, nz)}")

    def cells(self):
        for ny, nz in self.n_grid:
            for K in self.k_list:
                for kappa in self.kappa_br_list:
                    yield (int(ny), int(nz)), int(K), float(kappa)


@dataclass(frozen=True)
class TrialResult:
    trial: int
    N: int
    K: int
    kappa_br: float
    method: str
    metric: str
    value: float
    evaluations: int
    flags: tuple = ()
    objective: float | None = None
    realization: str = field(default="", compare=False)

    @property
    def failed(self):
        return not math.isfinite(self.value)


def parse_kappa(v):
    if isinstance(v, str):
        return float(v.strip().lower().replace("infinity", "inf"))
    return float(v)


def format_kappa(k):
    return "inf" if math.isinf(k) else format(k, ".12g")


def sweep_from_mapping(values, seed=None):
    kw = {}
    if "n_grid" in values:
        kw["n_grid"] = tuple(tuple(int(x) for x in pair) for pair in values["n_grid"])
    if "k_list" in values:
        kw["k_list"] = tuple(int(k) for k in values["k_list"])
    if "kappa_br_list" in values:
        kw["kappa_br_list"] = tuple(parse_kappa(k) for k in values["kappa_br_list"])
    if "methods" in values:
        m = values["methods"]
        kw["methods"] = tuple(s.strip() for s in (m.split(",") if isinstance(m, str) else m))
    for key in ("trials", "b", "L", "restarts"):
        if key in values:
            kw[key] = int(values[key])
    if seed is not None:
        kw["seed"] = int(seed)
    elif "seed" in values:
        kw["seed"] = int(values["seed"])
    return SweepSpec(**kw)


def load_sweep(path):
    return sweep_from_mapping(read_toml(path))


def method_stream(seed, trial, method):
    return stream(seed, trial, 3, METHODS.index(method))


def design(method, cfg, real, sep, spec, trial):
    """Phases for one method on one realisation."""
    if method == "Random":
        return random_phases(real.N, method_stream(spec.seed, trial, method)), 1, None
    if method == "MaxRSum":
        r = closed_form_sum_rate(sep)
    elif method == "MinMseTot":
        r = closed_form_mse_tot(sep)
    elif method.startswith("Muiq"):
        r = muiq(TARGET[method], sep, spec.b, spec.L, tie_accept=cfg.muiq_tie_accept)
    else:
        r = projected_ascent_baseline(
            TARGET[method], sep, spec.restarts, method_stream(spec.seed, trial, method),
            real=None if real.pure_los else real,
        )
    return r.phases, r.evaluations, r


def run_trial(cfg, spec, cell, trial):
    (ny, nz), K, kappa = cell
    c = cfg.replace(N_y=ny, N_z=nz, K=K, kappa_br=kappa, b=spec.b, L=spec.L)
    real = realize(c, seed=spec.seed, key=(trial,))
    sep = separate(real, c.sigma2, force=not real.pure_los)
    fp = real.fingerprint()
    base_flags = () if real.pure_los else ("forced-separation",)
    rows = []
    for method in spec.methods:
        try:
            phases, evals, res = design(method, c, real, sep, spec, trial)
        except RankDeficiencyError:
            for kind in METRICS:
                rows.append(TrialResult(trial, real.N, K, kappa, method, kind.value,
                                        math.nan, 0, base_flags + ("design-failed",),
                                        None, fp))
            continue
        H = global_channel(real, phases)
        for kind in METRICS:
            flags = base_flags
            try:
                value = DIRECT[kind](H, c.sigma2)
            except RankDeficiencyError:
                value, flags = math.nan, flags + ("zf-rank-deficient",)
            obj = res.objective if res is not None and TARGET.get(method) is kind else None
            rows.append(TrialResult(trial, real.N, K, kappa, method, kind.value, value,
                                    evals, flags, obj, fp))
    return rows


def _work(args):
    return run_trial(*args)


def run_sweep(cfg, spec, workers=1):
    """All trial results, ordered by cell, trial, method, metric.

    Per-trial randomness comes from streams keyed on ``(seed, trial)``, so
    the output does not depend on ``workers``.
    """
    if not isinstance(cfg, SystemConfig):
        raise TypeError("cfg must be a SystemConfig")
    jobs = [(cfg, spec, cell, t) for cell in spec.cells() for t in range(spec.trials)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            for rows in ex.map(_work, jobs, chunksize=4):
                yield from rows
    else:
        for job in jobs:
            yield from _work(job)


def aggregate(results):
    """Mean, standard error, count and failure count per (cell, method, metric)."""
    groups = {}
    for r in results:
        groups.setdefault((r.N, r.K, r.kappa_br, r.method, r.metric), []).append(r)
    if not groups:
        raise ValueError("aggregate needs at least one result")
    table = []
    for key, rows in groups.items():
        vals = np.array([r.value for r in rows if not r.failed])
        n = vals.size
        mean = float(vals.mean()) if n else math.nan
        stderr = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else (0.0 if n else math.nan)
        table.append(dict(
            N=key[0], K=key[1], kappa_br=key[2], method=key[3], metric=key[4],
            mean=mean, stderr=stderr, trials=n, failures=len(rows) - n,
        ))
    return table


def _fmt(x):
    return "nan" if not math.isfinite(x) else format(x, ".12g")


def to_csv(table):
    """CSV text for an aggregate table (12 significant digits)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in table:
        w.writerow([
            row["N"], row["K"], format_kappa(row["kappa_br"]), row["method"],
            row["metric"], _fmt(row["mean"]), _fmt(row["stderr"]), row["trials"],
            row["failures"],
        ])
    return buf.getvalue()


def write_csv(table, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv(table))


def summary_lookup(table):
    return {(r["N"], r["K"], r["kappa_br"], r["method"], r["metric"]): r for r in table}
