"""QUBO and Ising data model, energies, instance generators and reference solvers."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from dqaoa._kernels import anneal

BRUTE_FORCE_MAX_N = 26
_CHUNK_BITS = 16


class DimensionError(ValueError):
    """Raised when a bit string or index does not fit the problem."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class QuboProblem:
    """Minimize ``sum_{i<=j} Q[i, j] x_i x_j`` over binary ``x``.

    Only the upper triangle (diagonal included) is stored; the diagonal holds
    the linear terms since ``x_i**2 == x_i``.

    Parameters
    ----------
    coeffs : np.ndarray
        Upper-triangular ``(n, n)`` coefficient matrix.
    name : str
        Free-form label.
    seed : int, optional
        Generator seed the instance came from, if any.
    """

    coeffs: np.ndarray
    name: str = "qubo"
    seed: int | None = None

    def __post_init__(self) -> None:
        q = np.array(self.coeffs, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 1:
            raise ValueError(f"coeffs must be a non-empty square matrix, got shape {q.shape}")
        if np.any(np.tril(q, -1) != 0.0):
            raise ValueError("coeffs must be upper triangular; use QuboProblem.from_matrix")
        if not np.all(np.isfinite(q)):
            raise ValueError("coeffs must be finite")
        object.__setattr__(self, "coeffs", _frozen(q))

    @classmethod
    def from_matrix(cls, matrix, name: str = "qubo", seed: int | None = None) -> QuboProblem:
        """Fold an arbitrary square matrix into the equivalent upper-triangular form."""
        m = np.asarray(matrix, dtype=np.float64)
        upper = np.triu(m) + np.triu(m.T, 1)
        return cls(upper, name=name, seed=seed)

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @cached_property
    def diag(self) -> np.ndarray:
        return _frozen(np.diag(self.coeffs).copy())

    @cached_property
    def couplings(self) -> np.ndarray:
        """Symmetric off-diagonal couplings ``W`` with ``W[i, j] = Q[min, max]`` and zero diagonal."""
        off = np.triu(self.coeffs, 1)
        return _frozen(off + off.T)

    def entry(self, i: int, j: int) -> float:
        """Coefficient of the pair ``{i, j}`` regardless of argument order."""
        if i > j:
            i, j = j, i
        return float(self.coeffs[i, j])

    def nonzeros(self) -> int:
        return int(np.count_nonzero(self.coeffs))


@dataclass(frozen=True, eq=False)
class IsingCost:
    """``offset + sum_i h_i z_i + sum_{i<j} J_ij z_i z_j`` over spins ``z`` in {-1, +1}."""

    h: np.ndarray
    j: np.ndarray
    offset: float

    @property
    def k(self) -> int:
        return self.h.shape[0]


@dataclass(frozen=True)
class MaxCutInstance:
    """Undirected graph with ``(i, j, weight)`` edges, ``i < j``."""

    n: int
    edges: tuple[tuple[int, int, float], ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        seen = set()
        for i, j, _ in self.edges:
            if not 0 <= i < j < self.n:
                raise ValueError(f"invalid edge ({i}, {j}) for n={self.n}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))

    def cut(self, x) -> float:
        x = as_bits(x, self.n)
        return float(sum(w for i, j, w in self.edges if x[i] != x[j]))

    def to_qubo(self, name: str = "maxcut", seed: int | None = None) -> QuboProblem:
        """Minimization QUBO whose energy is ``-cut(x)``."""
        q = np.zeros((self.n, self.n))
        for i, j, w in self.edges:
            q[i, i] -= w
            q[j, j] -= w
            q[i, j] += 2.0 * w
        return QuboProblem(q, name=name, seed=seed)


@dataclass(frozen=True)
class SAConfig:
    """Geometric-cooling schedule for :func:`simulated_annealing_solve`.

    ``t_start=None`` means ``max |Q_ij|``.
    """

    sweeps: int = 10_000
    restarts: int = 10
    t_start: float | None = None
    t_end: float = 1e-3


def as_bits(x, n: int) -> np.ndarray:
    """Validate ``x`` as a length-``n`` 0/1 vector and return it as ``int8``."""
    bits = np.asarray(x)
    if bits.ndim != 1 or bits.shape[0] != n:
        raise DimensionError(f"bit string has shape {bits.shape}, expected ({n},)")
    if bits.dtype != np.int8:
        if np.any((bits != 0) & (bits != 1)):
            raise ValueError("bit string entries must be 0 or 1")
        bits = bits.astype(np.int8)
    return bits


def flip(x, i: int) -> np.ndarray:
    y = np.array(x, dtype=np.int8)
    y[i] ^= 1
    return y


def qubo_energy(q: QuboProblem, x) -> float:
    xf = as_bits(x, q.n).astype(np.float64)
    return float(xf @ q.coeffs @ xf)


def qubo_energy_delta(q: QuboProblem, x, i: int) -> float:
    """``E(flip_i(x)) - E(x)`` in O(n)."""
    x = as_bits(x, q.n)
    if not 0 <= i < q.n:
        raise IndexError(f"variable index {i} out of range for n={q.n}")
    sign = 1.0 - 2.0 * x[i]
    return float(sign * (q.diag[i] + q.couplings[i] @ x))


def flip_deltas(q: QuboProblem, x) -> np.ndarray:
    """Vector of all single-flip deltas, one matrix-vector product."""
    x = as_bits(x, q.n)
    sign = 1.0 - 2.0 * x
    return sign * (q.diag + q.couplings @ x.astype(np.float64))


def qubo_to_ising(q: QuboProblem) -> IsingCost:
    """Rewrite with ``x = (1 - z) / 2``."""
    u = q.coeffs
    d = np.diag(u)
    off = np.triu(u, 1)
    offset = d.sum() / 2.0 + off.sum() / 4.0
    h = -d / 2.0 - (off.sum(axis=1) + off.sum(axis=0)) / 4.0
    return IsingCost(h=_frozen(h), j=_frozen(off / 4.0), offset=float(offset))


def ising_energy(cost: IsingCost, z) -> float:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (cost.k,):
        raise DimensionError(f"spin vector has shape {z.shape}, expected ({cost.k},)")
    return float(cost.offset + cost.h @ z + z @ cost.j @ z)


def bits_from_index(z: int, n: int) -> np.ndarray:
    """Little-endian: bit ``i`` of ``z`` is variable ``i``."""
    return ((int(z) >> np.arange(n)) & 1).astype(np.int8)


def index_from_bits(x) -> int:
    return int(sum(int(b) << i for i, b in enumerate(x)))


def _lex_key(indices: np.ndarray, n: int) -> np.ndarray:
    """Sort key so that smaller key == lexicographically smaller (x_0, x_1, ...)."""
    indices = np.asarray(indices, dtype=np.int64)
    key = np.zeros_like(indices)
    for i in range(n):
        key |= ((indices >> i) & 1) << (n - 1 - i)
    return key


def lex_smallest(indices: Sequence[int], n: int) -> int:
    indices = np.asarray(indices, dtype=np.int64)
    return int(indices[np.argmin(_lex_key(indices, n))])


def _bit_matrix(n: int) -> np.ndarray:
    return ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(np.float64)


def brute_force_solve(q: QuboProblem) -> tuple[np.ndarray, float]:
    """Exhaustive minimum; ties go to the lexicographically smallest bit string."""
    n = q.n
    if n > BRUTE_FORCE_MAX_N:
        raise DimensionError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    lo = min(n, _CHUNK_BITS)
    hi = n - lo
    u = q.coeffs
    low_bits = _bit_matrix(lo)
    low_energy = np.einsum("si,ij,sj->s", low_bits, u[:lo, :lo], low_bits)
    cross = u[:lo, lo:]
    best_e = np.inf
    best_z = 0
    for h in range(1 << hi):
        hbits = ((h >> np.arange(hi)) & 1).astype(np.float64)
        e = low_energy + low_bits @ (cross @ hbits) + hbits @ u[lo:, lo:] @ hbits
        m = e.min()
        if m > best_e:
            continue
        ties = np.flatnonzero(e == m) + (h << lo)
        cand = lex_smallest(ties, n)
        if m < best_e:
            best_e, best_z = m, cand
        else:
            best_z = lex_smallest([best_z, cand], n)
    x = bits_from_index(best_z, n)
    return x, qubo_energy(q, x)


def simulated_annealing_solve(
    q: QuboProblem, schedule: SAConfig | None = None, seed: int = 0
) -> tuple[np.ndarray, float]:
    """Single-flip Metropolis annealing; returns the best state seen over all restarts."""
    schedule = schedule or SAConfig()
    t_start = schedule.t_start
    if t_start is None:
        t_start = float(np.abs(q.coeffs).max())
    if t_start <= 0.0:
        x = np.zeros(q.n, dtype=np.int8)
        return x, qubo_energy(q, x)
    seeds = np.random.SeedSequence(seed).generate_state(schedule.restarts)
    best_x, best_e = None, np.inf
    for s in seeds:
        x, e = anneal(
            np.ascontiguousarray(q.diag),
            np.ascontiguousarray(q.couplings),
            schedule.sweeps,
            float(t_start),
            float(schedule.t_end),
            int(s),
        )
        if e < best_e:
            best_x, best_e = x, e
    best_x = best_x.astype(np.int8)
    return best_x, qubo_energy(q, best_x)


def generate_dense_qubo(n: int, seed: int) -> QuboProblem:
    """Fully connected instance with upper-triangular entries i.i.d. U[-1, 1]."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    q = np.zeros((n, n))
    rows, cols = np.triu_indices(n)
    q[rows, cols] = rng.uniform(-1.0, 1.0, size=rows.shape[0])
    return QuboProblem(q, name=f"dense_n{n}_s{seed}", seed=seed)


def maxcut_edge_count(n: int) -> int:
    return n * (n - 1) // 8


def generate_maxcut(n: int, seed: int) -> tuple[MaxCutInstance, QuboProblem]:
    """Unit-weight random graph with ``floor(n(n-1)/8)`` edges and its QUBO."""
    if n < 3:
        raise ValueError("n must be >= 3")
    rng = np.random.default_rng(seed)
    rows, cols = np.triu_indices(n, 1)
    picked = np.sort(rng.choice(rows.shape[0], size=maxcut_edge_count(n), replace=False))
    edges = tuple((int(rows[p]), int(cols[p]), 1.0) for p in picked)
    inst = MaxCutInstance(n, edges)
    return inst, inst.to_qubo(name=f"maxcut_n{n}_s{seed}", seed=seed)
