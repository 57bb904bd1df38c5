"""Multi-trial campaigns, sweeps and phase profiles with CSV/JSON output."""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import statistics
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from dqaoa.decomposition import ConfigError, Strategy, decompose, plan_to_dict
from dqaoa.formats import read_problem
from dqaoa.orchestrator import (
    DqaoaConfig,
    DqaoaResult,
    decomposition_seed,
    initial_solution,
    run_dqaoa,
)
from dqaoa.pool import WorkerPool
from dqaoa.qubo import (
    BRUTE_FORCE_MAX_N,
    QuboProblem,
    brute_force_solve,
    generate_dense_qubo,
    generate_maxcut,
    simulated_annealing_solve,
)

log = logging.getLogger(__name__)

CYCLE_COLUMNS = [
    "trial", "cycle", "energy", "ar_pct",
    "t_decompose_ms", "t_solve_ms", "t_aggregate_ms", "accepted",
]
SWEEP_COLUMNS = [
    "n", "strategy", "sub_size", "num_sub", "workers", "trial", "cycles", "converged",
    "final_energy", "final_ar_pct", "tts_s", "tts_censored", "wall_s",
]
PROFILE_COLUMNS = [
    "n", "strategy", "sub_size", "num_sub", "cycles",
    "t_decompose_ms", "t_solve_ms", "t_aggregate_ms", "t_cycle_ms",
]


class ReferenceUnavailable(ValueError):
    """No usable reference energy for the A.R."""


@dataclass(frozen=True)
class ProblemSpec:
    """Either a file path or a generator (``kind`` of dense/maxcut, ``n``, ``seed``)."""

    path: str | None = None
    kind: str = "dense"
    n: int = 60
    seed: int = 0

    @classmethod
    def parse(cls, text: str) -> ProblemSpec:
        """``dense:<n>[:<seed>]``, ``maxcut:<n>[:<seed>]`` or a file path."""
        head, _, rest = text.partition(":")
        if head in ("dense", "maxcut") and rest:
            parts = rest.split(":")
            try:
                n = int(parts[0])
                seed = int(parts[1]) if len(parts) > 1 else 0
            except ValueError:
                raise ConfigError(f"bad generator spec {text!r}; expected {head}:<n>[:<seed>]") from None
            return cls(kind=head, n=n, seed=seed)
        return cls(path=text)

    def with_n(self, n: int) -> ProblemSpec:
        if self.path is not None:
            raise ConfigError("size sweeps need a generator problem, not a file")
        return replace(self, n=n)

    def load(self) -> QuboProblem:
        if self.path is not None:
            return read_problem(self.path)
        if self.kind == "maxcut":
            return generate_maxcut(self.n, self.seed)[1]
        return generate_dense_qubo(self.n, self.seed)

    def describe(self) -> str:
        return self.path or f"{self.kind}:{self.n}:{self.seed}"


@dataclass(frozen=True)
class Reference:
    energy: float
    method: str
    shift: float = 0.0


def resolve_reference(q: QuboProblem, reference: float | str | None = "auto", seed: int = 0) -> Reference:
    """Reference energy for the A.R.

    ``"auto"`` uses brute force up to ``BRUTE_FORCE_MAX_N`` variables and
    simulated annealing beyond. A non-negative reference gets a shift that
    moves it to a negative value; the shift is reported with it.
    """
    if reference is None or reference == "auto":
        method = "brute" if q.n <= BRUTE_FORCE_MAX_N else "sa"
    elif isinstance(reference, str) and reference in ("brute", "sa"):
        method = reference
    else:
        try:
            energy = float(reference)
        except (TypeError, ValueError):
            raise ReferenceUnavailable(f"cannot interpret reference {reference!r}; pass --reference <energy>") from None
        if not math.isfinite(energy):
            raise ReferenceUnavailable("reference energy must be finite; pass --reference <energy>")
        method = "given"
    if method == "brute":
        if q.n > BRUTE_FORCE_MAX_N:
            raise ReferenceUnavailable(
                f"brute-force reference needs n <= {BRUTE_FORCE_MAX_N} (n={q.n}); pass --reference <energy>"
            )
        energy = brute_force_solve(q)[1]
    elif method == "sa":
        energy = simulated_annealing_solve(q, seed=seed)[1]
    shift = 0.0 if energy < 0 else energy + max(1.0, abs(energy))
    if shift:
        log.warning("reference %.6g is not negative; A.R. computed on energies shifted by %.6g", energy, shift)
    return Reference(energy, method, shift)


@dataclass
class TrialOutcome:
    trial: int
    result: DqaoaResult
    wall_s: float

    @property
    def tts_s(self) -> float:
        return self.wall_s


@dataclass
class Campaign:
    strategy: str
    trials: list[TrialOutcome] = field(default_factory=list)

    def cycle_rows(self) -> list[dict]:
        rows = []
        for t in self.trials:
            for r in t.result.reports:
                rows.append({
                    "trial": t.trial,
                    "cycle": r.cycle,
                    "energy": r.energy,
                    "ar_pct": r.approx_ratio_pct,
                    "t_decompose_ms": 1e3 * r.t_decompose,
                    "t_solve_ms": 1e3 * r.t_solve,
                    "t_aggregate_ms": 1e3 * r.t_aggregate,
                    "accepted": r.accepted_updates,
                })
        return rows

    def summary(self) -> dict:
        return summarize_rows(self.cycle_rows(), self.trials_meta(), self.strategy)

    def trials_meta(self) -> list[dict]:
        return [
            {
                "trial": t.trial,
                "cycles": len(t.result.reports),
                "converged": t.result.converged,
                "final_energy": t.result.energy,
                "tts_s": t.tts_s,
                "tts_censored": not t.result.converged,
            }
            for t in self.trials
        ]


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    values = list(values)
    if not values:
        return math.nan, math.nan
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


def summarize_rows(rows: Sequence[dict], trials: Sequence[dict], strategy: str) -> dict:
    """Summary statistics derived from per-cycle rows (final A.R. is each trial's last row).

    Standard deviations are sample (n - 1) deviations.
    """
    last: dict[int, dict] = {}
    for row in rows:
        last[int(row["trial"])] = row
    final_ar = [float(last[t]["ar_pct"]) for t in sorted(last)]
    final_e = [float(last[t]["energy"]) for t in sorted(last)]
    ar_mean, ar_std = _mean_std(final_ar)
    e_mean, e_std = _mean_std(final_e)
    converged = [t for t in trials if t["converged"]]
    tts_mean, tts_std = _mean_std([t["tts_s"] for t in converged])
    cycles_mean, _ = _mean_std([t["cycles"] for t in trials])
    conv_cycles, _ = _mean_std([t["cycles"] for t in converged])
    phases = {
        f"{col}_mean": statistics.fmean(float(r[col]) for r in rows) if rows else math.nan
        for col in ("t_decompose_ms", "t_solve_ms", "t_aggregate_ms")
    }
    return {
        "strategy": strategy,
        "trials": len(trials),
        "final_ar_pct_mean": ar_mean,
        "final_ar_pct_std": ar_std,
        "final_energy_mean": e_mean,
        "final_energy_std": e_std,
        "cycles_mean": cycles_mean,
        "converged_trials": len(converged),
        "censored_trials": len(trials) - len(converged),
        "cycles_to_convergence_mean": conv_cycles,
        "tts_s_mean": tts_mean,
        "tts_s_std": tts_std,
        **phases,
        "per_trial": list(trials),
    }


def trial_config(base: DqaoaConfig, trial: int) -> DqaoaConfig:
    """Trial ``t`` varies the solver seeds but keeps the initial bit string."""
    init = base.master_seed if base.init_seed is None else base.init_seed
    return replace(base, master_seed=base.master_seed + trial, init_seed=init)


def run_campaign(q: QuboProblem, base: DqaoaConfig, trials: int, pool: WorkerPool | None = None) -> Campaign:
    """Run ``trials`` independent DQAOA runs sequentially on one pool."""
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    if pool is None:
        with WorkerPool(base.workers, base.transport) as own:
            return run_campaign(q, base, trials, own)
    campaign = Campaign(base.decomposition.strategy.value)
    for t in range(trials):
        start = time.perf_counter()
        result = run_dqaoa(q, trial_config(base, t), pool)
        campaign.trials.append(TrialOutcome(t, result, time.perf_counter() - start))
    return campaign


def first_plan(q: QuboProblem, cfg: DqaoaConfig) -> dict:
    """The decomposition a run with ``cfg`` performs in its first cycle."""
    cfg = trial_config(cfg, 0)
    x = initial_solution(q.n, cfg.init_seed)
    dcfg = replace(cfg.decomposition, seed=decomposition_seed(cfg, 0))
    return plan_to_dict(dcfg, decompose(q, x, dcfg))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: str | Path, columns: Sequence[str], rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, default=float) + "\n")


def resolve_num_sub(value: int | str, n: int) -> int:
    """Integer count or a percentage of ``n`` such as ``"25%"`` (rounded, at least 1)."""
    if isinstance(value, str) and value.endswith("%"):
        return max(1, round(float(value[:-1]) * n / 100.0))
    return int(value)


@dataclass(frozen=True)
class SweepSpec:
    sub_sizes: tuple[int, ...]
    num_subs: tuple[int | str, ...]
    workers: tuple[int, ...] = (1,)
    strategies: tuple[str, ...] = ("ifd",)

    def __post_init__(self) -> None:
        for name in ("sub_sizes", "num_subs", "workers", "strategies"):
            if not getattr(self, name):
                raise ConfigError(f"sweep list {name} must not be empty")


def run_sweep(q: QuboProblem, base: DqaoaConfig, sweep: SweepSpec, trials: int) -> list[dict]:
    """One row per (cell, trial); cells the decomposition rejects are skipped."""
    rows = []
    for workers in sweep.workers:
        with WorkerPool(workers, base.transport) as pool:
            for strategy, k, m in itertools.product(sweep.strategies, sweep.sub_sizes, sweep.num_subs):
                m = resolve_num_sub(m, q.n)
                try:
                    dcfg = replace(base.decomposition, strategy=Strategy.parse(strategy), sub_size=k, num_sub=m)
                    first_plan(q, replace(base, decomposition=dcfg))
                except ConfigError as exc:
                    log.warning("skipping cell strategy=%s k=%d m=%d: %s", strategy, k, m, exc)
                    continue
                cfg = replace(base, decomposition=dcfg, workers=workers)
                for t in run_campaign(q, cfg, trials, pool).trials:
                    last = t.result.reports[-1]
                    rows.append({
                        "n": q.n, "strategy": dcfg.strategy.value, "sub_size": k, "num_sub": m,
                        "workers": workers, "trial": t.trial, "cycles": len(t.result.reports),
                        "converged": t.result.converged, "final_energy": t.result.energy,
                        "final_ar_pct": last.approx_ratio_pct, "tts_s": t.tts_s,
                        "tts_censored": not t.result.converged, "wall_s": t.wall_s,
                    })
    return rows


def run_profile(problem: ProblemSpec, sizes: Sequence[int], base: DqaoaConfig, trials: int) -> list[dict]:
    """Mean per-cycle phase times for each problem size."""
    rows = []
    with WorkerPool(base.workers, base.transport) as pool:
        for n in sizes:
            q = problem.with_n(n).load()
            reports = [r for t in run_campaign(q, base, trials, pool).trials for r in t.result.reports]
            rows.append({
                "n": n,
                "strategy": base.decomposition.strategy.value,
                "sub_size": base.decomposition.sub_size,
                "num_sub": base.decomposition.num_sub,
                "cycles": len(reports),
                "t_decompose_ms": 1e3 * statistics.fmean(r.t_decompose for r in reports),
                "t_solve_ms": 1e3 * statistics.fmean(r.t_solve for r in reports),
                "t_aggregate_ms": 1e3 * statistics.fmean(r.t_aggregate for r in reports),
                "t_cycle_ms": 1e3 * statistics.fmean(r.t_cycle for r in reports),
            })
    return rows
