"""Impact analysis, sub-QUBO extraction strategies and sub-solution aggregation."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import asdict, dataclass
from typing import NamedTuple, Sequence

import numpy as np

from dqaoa.qubo import QuboProblem, as_bits, flip_deltas, qubo_energy, qubo_energy_delta


class ConfigError(ValueError):
    """A decomposition configuration that cannot be applied to the problem."""


class Strategy(str, enum.Enum):
    RANDOM = "random"
    IFD = "ifd"
    BFS = "bfs"
    PFS = "pfs"

    @classmethod
    def parse(cls, value: str | Strategy) -> Strategy:
        try:
            return cls(str(value.value if isinstance(value, Strategy) else value).lower())
        except ValueError:
            raise ConfigError(f"unknown strategy {value!r}; choose from {[s.value for s in cls]}") from None


@dataclass(frozen=True)
class DecompositionConfig:
    """How to cut the problem into ``num_sub`` sub-QUBOs of ``sub_size`` variables.

    ``edge_threshold=None`` selects the median of the nonzero coupling
    magnitudes. ``stride`` spaces the IFD windows over the ranked variables.
    """

    strategy: Strategy = Strategy.IFD
    num_sub: int = 1
    sub_size: int = 1
    edge_threshold: float | None = None
    stride: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy))
        if self.num_sub < 1:
            raise ConfigError("num_sub must be >= 1")
        if self.sub_size < 1:
            raise ConfigError("sub_size must be >= 1")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if self.edge_threshold is not None and self.edge_threshold < 0:
            raise ConfigError("edge_threshold must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["strategy"] = self.strategy.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> DecompositionConfig:
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass(frozen=True)
class ImpactRanking:
    order: np.ndarray
    scores: np.ndarray


@dataclass(frozen=True, eq=False)
class SubQubo:
    """Principal sub-problem on ``indices`` (sorted) of a parent QUBO."""

    indices: np.ndarray
    coeffs: np.ndarray

    @property
    def k(self) -> int:
        return self.indices.shape[0]

    @property
    def n(self) -> int:
        return self.k

    def to_qubo(self) -> QuboProblem:
        return QuboProblem(self.coeffs)


class Aggregation(NamedTuple):
    bits: np.ndarray
    energy: float
    accepted: int


def extract_subqubo(q: QuboProblem, indices: Sequence[int]) -> SubQubo:
    idx = np.unique(np.asarray(indices, dtype=np.int64))
    if idx.shape[0] != len(indices):
        raise ConfigError("sub-QUBO indices must be distinct")
    if idx.shape[0] == 0 or idx[0] < 0 or idx[-1] >= q.n:
        raise ConfigError(f"sub-QUBO indices out of range for n={q.n}")
    coeffs = q.coeffs[np.ix_(idx, idx)]
    idx.setflags(write=False)
    coeffs.setflags(write=False)
    return SubQubo(idx, coeffs)


def impact_analysis(q: QuboProblem, x) -> ImpactRanking:
    """Rank variables by the magnitude of their single-flip energy change."""
    scores = np.abs(flip_deltas(q, x))
    order = np.argsort(-scores, kind="stable")
    return ImpactRanking(order=order, scores=scores)


def _check_windows(q: QuboProblem, cfg: DecompositionConfig, stride: int) -> None:
    span = (cfg.num_sub - 1) * stride + cfg.sub_size
    if cfg.sub_size > q.n or span > q.n:
        raise ConfigError(
            f"{cfg.strategy.value}: num_sub={cfg.num_sub}, sub_size={cfg.sub_size}, stride={stride} "
            f"need {span} ranked variables but n={q.n}"
        )


def decompose_random(q: QuboProblem, x, cfg: DecompositionConfig) -> list[SubQubo]:
    if cfg.sub_size > q.n:
        raise ConfigError(f"sub_size={cfg.sub_size} exceeds n={q.n}")
    rng = np.random.default_rng(cfg.seed)
    return [
        extract_subqubo(q, rng.choice(q.n, size=cfg.sub_size, replace=False))
        for _ in range(cfg.num_sub)
    ]


def decompose_ifd(q: QuboProblem, x, cfg: DecompositionConfig) -> list[SubQubo]:
    """Sliding windows over the impact ranking, one sub-QUBO per window."""
    _check_windows(q, cfg, cfg.stride)
    order = impact_analysis(q, x).order
    subs = []
    for i in range(cfg.num_sub):
        start = i * cfg.stride
        subs.append(extract_subqubo(q, order[start : start + cfg.sub_size]))
    return subs


def significance_threshold(q: QuboProblem, cfg: DecompositionConfig) -> tuple[float, bool]:
    """Return ``(threshold, inclusive)``.

    An explicit threshold keeps couplings strictly above it. The default median
    rule is inclusive so that uniform-weight graphs keep their edges.
    """
    if cfg.edge_threshold is not None:
        return float(cfg.edge_threshold), False
    mags = np.abs(q.coeffs[np.triu_indices(q.n, 1)])
    mags = mags[mags > 0]
    if mags.size == 0:
        return np.inf, False
    return float(np.median(mags)), True


def significance_graph(q: QuboProblem, cfg: DecompositionConfig) -> np.ndarray:
    """Boolean adjacency matrix of strongly interacting pairs."""
    thr, inclusive = significance_threshold(q, cfg)
    mags = np.abs(q.couplings)
    adj = mags >= thr if inclusive else mags > thr
    np.fill_diagonal(adj, False)
    return adj


def _fill(selected: list[int], chosen: np.ndarray, order: np.ndarray, k: int) -> None:
    for v in order:
        if len(selected) >= k:
            return
        if not chosen[v]:
            chosen[v] = True
            selected.append(int(v))


def _bfs_collect(seed: int, adj: np.ndarray, mags: np.ndarray, order: np.ndarray, k: int) -> list[int]:
    chosen = np.zeros(adj.shape[0], dtype=bool)
    chosen[seed] = True
    selected = [seed]
    queue = deque([seed])
    while queue and len(selected) < k:
        node = queue.popleft()
        nbrs = np.flatnonzero(adj[node])
        # strongest coupling first, ties by ascending index
        nbrs = nbrs[np.argsort(-mags[node, nbrs], kind="stable")]
        for v in nbrs:
            if len(selected) >= k:
                break
            if not chosen[v]:
                chosen[v] = True
                selected.append(int(v))
                queue.append(int(v))
    _fill(selected, chosen, order, k)
    return selected


def _pfs_collect(seed: int, adj: np.ndarray, scores: np.ndarray, order: np.ndarray, k: int) -> list[int]:
    chosen = np.zeros(adj.shape[0], dtype=bool)
    chosen[seed] = True
    selected = [seed]
    frontier = adj[seed].copy()
    while len(selected) < k:
        cand = np.flatnonzero(frontier & ~chosen)
        if cand.size == 0:
            break
        v = int(cand[np.argmax(scores[cand])])
        chosen[v] = True
        selected.append(v)
        frontier |= adj[v]
    _fill(selected, chosen, order, k)
    return selected


def _decompose_traversal(q: QuboProblem, x, cfg: DecompositionConfig, collect) -> list[SubQubo]:
    _check_windows(q, cfg, 1)
    ranking = impact_analysis(q, x)
    adj = significance_graph(q, cfg)
    weights = np.abs(q.couplings) if collect is _bfs_collect else ranking.scores
    return [
        extract_subqubo(q, collect(int(ranking.order[t]), adj, weights, ranking.order, cfg.sub_size))
        for t in range(cfg.num_sub)
    ]


def selection_order(q: QuboProblem, x, cfg: DecompositionConfig, t: int = 0) -> list[int]:
    """Variables of the ``t``-th BFS/PFS sub-QUBO in the order they were selected."""
    if cfg.strategy not in (Strategy.BFS, Strategy.PFS):
        raise ConfigError("selection order is defined for bfs and pfs only")
    x = as_bits(x, q.n)
    ranking = impact_analysis(q, x)
    adj = significance_graph(q, cfg)
    if cfg.strategy is Strategy.BFS:
        return _bfs_collect(int(ranking.order[t]), adj, np.abs(q.couplings), ranking.order, cfg.sub_size)
    return _pfs_collect(int(ranking.order[t]), adj, ranking.scores, ranking.order, cfg.sub_size)


def decompose_bfs(q: QuboProblem, x, cfg: DecompositionConfig) -> list[SubQubo]:
    """Breadth-first growth over significant couplings from each high-impact seed."""
    return _decompose_traversal(q, x, cfg, _bfs_collect)


def decompose_pfs(q: QuboProblem, x, cfg: DecompositionConfig) -> list[SubQubo]:
    """Grow each sub-QUBO by the highest-impact neighbour of the selected set."""
    return _decompose_traversal(q, x, cfg, _pfs_collect)


_STRATEGIES = {
    Strategy.RANDOM: decompose_random,
    Strategy.IFD: decompose_ifd,
    Strategy.BFS: decompose_bfs,
    Strategy.PFS: decompose_pfs,
}


def decompose(q: QuboProblem, x, cfg: DecompositionConfig) -> list[SubQubo]:
    x = as_bits(x, q.n)
    return _STRATEGIES[cfg.strategy](q, x, cfg)


def plan_to_dict(cfg: DecompositionConfig, subs: Sequence[SubQubo]) -> dict:
    """JSON-ready description of a decomposition."""
    return {
        "strategy": cfg.strategy.value,
        "config": cfg.to_dict(),
        "index_sets": [[int(i) for i in s.indices] for s in subs],
    }


def aggregate(
    q: QuboProblem,
    global_x,
    subs: Sequence[SubQubo],
    sub_solutions: Sequence,
    energy: float | None = None,
) -> Aggregation:
    """Write sub-solutions back one at a time, keeping only strict improvements.

    Parameters
    ----------
    energy : float, optional
        Energy of ``global_x`` if already known. Passing the value carried from
        the previous call keeps a chain of calls exactly non-increasing.
    """
    if len(subs) != len(sub_solutions):
        raise ValueError(f"{len(subs)} sub-QUBOs but {len(sub_solutions)} sub-solutions")
    x = as_bits(global_x, q.n).copy()
    current = qubo_energy(q, x) if energy is None else float(energy)
    accepted = 0
    for sub, sol in zip(subs, sub_solutions):
        sol = as_bits(sol, sub.k)
        changed = sub.indices[x[sub.indices] != sol]
        if changed.size == 0:
            continue
        candidate = current
        for i in changed:
            candidate += qubo_energy_delta(q, x, int(i))
            x[i] ^= 1
        if candidate < current:
            current = candidate
            accepted += 1
        else:
            x[changed] ^= 1
    return Aggregation(x, current, accepted)
