"""The DQAOA cycle: decompose, solve sub-QUBOs on the worker pool, aggregate."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from dqaoa.decomposition import DecompositionConfig, aggregate, decompose
from dqaoa.pool import TRANSPORTS, WorkerFailure, WorkerPool, dispatch_cycle
from dqaoa.protocol import ProtocolError, TaskEnvelope, task_seed
from dqaoa.qaoa import QaoaConfig
from dqaoa.qubo import QuboProblem, qubo_energy

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DqaoaConfig:
    """Run settings.

    ``ar_tolerance`` is in percentage points. ``init_seed`` fixes the initial
    bit string independently of ``master_seed`` (defaults to it). ``ar_shift``
    is subtracted from both energy and reference before the A.R. is taken, for
    problems whose reference is not negative.
    """

    decomposition: DecompositionConfig
    qaoa: QaoaConfig = field(default_factory=QaoaConfig)
    max_cycles: int = 200
    ar_tolerance: float = 0.1
    ar_window: int = 5
    workers: int = 1
    reference_energy: float | None = None
    master_seed: int = 0
    init_seed: int | None = None
    transport: str = "auto"
    ar_shift: float = 0.0

    def __post_init__(self) -> None:
        if self.max_cycles < 1 or self.ar_window < 1 or self.workers < 1:
            raise ValueError("max_cycles, ar_window and workers must be >= 1")
        if self.ar_tolerance < 0:
            raise ValueError("ar_tolerance must be >= 0")
        if self.transport not in TRANSPORTS:
            raise ValueError(f"transport must be one of {TRANSPORTS}")


@dataclass(frozen=True)
class CycleReport:
    cycle: int
    energy: float
    approx_ratio_pct: float
    t_decompose: float
    t_solve: float
    t_aggregate: float
    t_cycle: float
    accepted_updates: int


@dataclass
class DqaoaResult:
    bits: np.ndarray
    energy: float
    reports: list[CycleReport]
    converged: bool
    initial_energy: float


class DqaoaAborted(RuntimeError):
    """The run stopped early; ``reports`` holds the cycles that completed."""

    def __init__(self, message: str, reports: list[CycleReport]):
        super().__init__(message)
        self.reports = reports


def approx_ratio_pct(energy: float, reference: float) -> float:
    """``100 * energy / reference`` for a negative reference energy."""
    if not reference < 0:
        raise ValueError(f"approximation ratio needs a negative reference energy, got {reference}")
    ratio = 100.0 * energy / reference
    if ratio > 100.0:
        log.info("energy %.6g beats the reference %.6g (A.R. %.3f%%)", energy, reference, ratio)
    return ratio


def check_convergence(reports, cfg: DqaoaConfig) -> bool:
    """True once the last ``ar_window`` A.R. changes all stay within ``ar_tolerance``."""
    window = cfg.ar_window + 1
    if len(reports) < window:
        return False
    ars = np.array([r.approx_ratio_pct for r in reports[-window:]], dtype=np.float64)
    if not np.all(np.isfinite(ars)):
        return False
    return bool(np.all(np.abs(np.diff(ars)) <= cfg.ar_tolerance))


def initial_solution(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, 2, size=n).astype(np.int8)


def decomposition_seed(cfg: DqaoaConfig, cycle: int) -> int:
    ss = np.random.SeedSequence([cfg.decomposition.seed, cfg.master_seed, cycle], spawn_key=(1,))
    return int(ss.generate_state(1, np.uint64)[0])


def run_dqaoa(q: QuboProblem, cfg: DqaoaConfig, pool: WorkerPool | None = None) -> DqaoaResult:
    """Iterate cycles until the A.R. settles or ``max_cycles`` is reached.

    Without a reference energy the A.R. is NaN and the run uses all cycles.
    A caller-supplied ``pool`` is reused and left open.
    """
    if cfg.reference_energy is not None:
        approx_ratio_pct(cfg.reference_energy - cfg.ar_shift, cfg.reference_energy - cfg.ar_shift)
    if pool is None:
        with WorkerPool(cfg.workers, cfg.transport) as own:
            return run_dqaoa(q, cfg, own)

    seed0 = cfg.master_seed if cfg.init_seed is None else cfg.init_seed
    x = initial_solution(q.n, seed0)
    energy = qubo_energy(q, x)
    initial_energy = energy
    reports: list[CycleReport] = []
    converged = False
    for cycle in range(cfg.max_cycles):
        t0 = time.perf_counter()
        dcfg = replace(cfg.decomposition, seed=decomposition_seed(cfg, cycle))
        subs = decompose(q, x, dcfg)
        t1 = time.perf_counter()
        tasks = [
            TaskEnvelope(i, cycle, sub, cfg.qaoa, task_seed(cfg.master_seed, cycle, i))
            for i, sub in enumerate(subs)
        ]
        try:
            results = dispatch_cycle(tasks, pool)
        except (WorkerFailure, ProtocolError, OSError) as exc:
            raise DqaoaAborted(f"cycle {cycle} aborted: {exc}", reports) from exc
        t2 = time.perf_counter()
        agg = aggregate(q, x, subs, [r.result.best_bits for r in results], energy=energy)
        t3 = time.perf_counter()
        x, energy = agg.bits, agg.energy
        ar = math.nan
        if cfg.reference_energy is not None:
            ar = approx_ratio_pct(energy - cfg.ar_shift, cfg.reference_energy - cfg.ar_shift)
        reports.append(CycleReport(cycle, energy, ar, t1 - t0, t2 - t1, t3 - t2, t3 - t0, agg.accepted))
        if check_convergence(reports, cfg):
            converged = True
            break
    return DqaoaResult(x, energy, reports, converged, initial_energy)
