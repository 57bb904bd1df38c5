"""Statevector QAOA for a single sub-QUBO.

Basis states are little-endian: bit ``i`` of a basis index is variable ``i``.
The cost Hamiltonian is diagonal, so it is kept as an energy table of all
``2**k`` basis energies and applied as a phase.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize

from dqaoa._kernels import mix_inplace
from dqaoa.qubo import DimensionError, QuboProblem, _lex_key, bits_from_index, qubo_energy

MAX_QUBITS = 26
OPTIMIZERS = ("cobyla", "nelder-mead")


@dataclass(frozen=True)
class QaoaParams:
    gammas: tuple[float, ...]
    betas: tuple[float, ...]

    def __post_init__(self) -> None:
        g = tuple(float(v) for v in self.gammas)
        b = tuple(float(v) for v in self.betas)
        if len(g) < 1 or len(g) != len(b):
            raise ValueError("need p >= 1 gammas and the same number of betas")
        if not all(np.isfinite(g + b)):
            raise ValueError("QAOA angles must be finite")
        object.__setattr__(self, "gammas", g)
        object.__setattr__(self, "betas", b)

    @property
    def p(self) -> int:
        return len(self.gammas)

    @classmethod
    def from_vector(cls, theta) -> QaoaParams:
        theta = np.asarray(theta, dtype=np.float64)
        p = theta.shape[0] // 2
        return cls(tuple(theta[:p]), tuple(theta[p:]))

    def to_vector(self) -> np.ndarray:
        return np.array(self.gammas + self.betas)


@dataclass(frozen=True)
class QaoaConfig:
    """Per-sub-QUBO solver settings.

    ``budget`` caps objective evaluations; ``tolerance`` is the optimizer's
    step tolerance.
    """

    p: int = 1
    shots: int = 1024
    budget: int = 200
    tolerance: float = 1e-3
    optimizer: str = "cobyla"

    def __post_init__(self) -> None:
        if self.p < 1 or self.shots < 1 or self.budget < 1:
            raise ValueError("p, shots and budget must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> QaoaConfig:
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass(frozen=True)
class QaoaResult:
    best_bits: np.ndarray
    best_energy: float
    params: QaoaParams
    evals: int
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "best_bits": [int(b) for b in self.best_bits],
            "best_energy": float(self.best_energy),
            "params": {"gammas": list(self.params.gammas), "betas": list(self.params.betas)},
            "evals": int(self.evals),
            "wall_time": float(self.wall_time),
        }

    @classmethod
    def from_dict(cls, d: dict) -> QaoaResult:
        return cls(
            best_bits=np.asarray(d["best_bits"], dtype=np.int8),
            best_energy=float(d["best_energy"]),
            params=QaoaParams(tuple(d["params"]["gammas"]), tuple(d["params"]["betas"])),
            evals=int(d["evals"]),
            wall_time=float(d["wall_time"]),
        )


def _as_qubo(sub) -> QuboProblem:
    return sub if isinstance(sub, QuboProblem) else QuboProblem(sub.coeffs)


def _check_k(k: int) -> None:
    if not 1 <= k <= MAX_QUBITS:
        raise DimensionError(f"statevector simulation supports 1 <= k <= {MAX_QUBITS}, got {k}")


def build_energy_table(sub) -> np.ndarray:
    """Energies of all ``2**k`` basis states, built by doubling one variable at a time."""
    u = np.asarray(sub.coeffs, dtype=np.float64)
    k = u.shape[0]
    _check_k(k)
    table = np.zeros(1)
    for t in range(k):
        # field[z] = sum_{j<t} Q[j, t] * bit_j(z) for every z < 2**t
        field = np.zeros(1)
        for j in range(t):
            field = np.concatenate((field, field + u[j, t]))
        table = np.concatenate((table, table + u[t, t] + field))
    return table


def prepare_plus_state(k: int) -> np.ndarray:
    _check_k(k)
    dim = 1 << k
    return np.full(dim, 1.0 / np.sqrt(dim), dtype=np.complex128)


def _check_len(psi: np.ndarray, table: np.ndarray) -> None:
    if psi.shape != table.shape:
        raise DimensionError(f"state has {psi.shape[0]} amplitudes, table has {table.shape[0]}")


def apply_cost_layer(psi: np.ndarray, table: np.ndarray, gamma: float) -> np.ndarray:
    _check_len(psi, table)
    return psi * np.exp(-1j * gamma * table)


def apply_mixer_layer(psi: np.ndarray, beta: float) -> np.ndarray:
    """Apply ``exp(i beta X)`` to every qubit, i.e. ``exp(-i beta H_X)`` with ``H_X = -sum X``."""
    out = np.array(psi, dtype=np.complex128)
    if out.shape[0] < 2 or out.shape[0] & (out.shape[0] - 1):
        raise DimensionError("state length must be a power of two >= 2")
    mix_inplace(out, float(beta))
    return out


def expectation(psi: np.ndarray, table: np.ndarray) -> float:
    _check_len(psi, table)
    return float(np.dot(psi.real**2 + psi.imag**2, table))


def ansatz_state(table: np.ndarray, params: QaoaParams) -> np.ndarray:
    """Cost then mixer for each layer, starting from the uniform superposition."""
    k = table.shape[0].bit_length() - 1
    psi = prepare_plus_state(k)
    for gamma, beta in zip(params.gammas, params.betas):
        psi *= np.exp(-1j * gamma * table)
        mix_inplace(psi, beta)
    return psi


def evaluate_ansatz(sub, params: QaoaParams, table: np.ndarray | None = None) -> float:
    if table is None:
        table = build_energy_table(sub)
    return expectation(ansatz_state(table, params), table)


class _BudgetExhausted(Exception):
    pass


def _optimize(table: np.ndarray, cfg: QaoaConfig, rng: np.random.Generator) -> tuple[QaoaParams, float, int]:
    theta0 = np.concatenate(
        (rng.uniform(0.0, 2 * np.pi, size=cfg.p), rng.uniform(0.0, np.pi, size=cfg.p))
    )
    best = {"theta": theta0, "value": np.inf, "evals": 0}

    def objective(theta):
        if best["evals"] >= cfg.budget:
            raise _BudgetExhausted
        best["evals"] += 1
        value = evaluate_ansatz(None, QaoaParams.from_vector(theta), table)
        if value < best["value"]:
            best["theta"], best["value"] = np.array(theta), value
        return value

    try:
        if cfg.optimizer == "cobyla":
            minimize(objective, theta0, method="COBYLA",
                     options={"maxiter": cfg.budget, "rhobeg": 0.5, "tol": cfg.tolerance})
        else:
            minimize(objective, theta0, method="Nelder-Mead",
                     options={"maxfev": cfg.budget, "xatol": cfg.tolerance, "fatol": cfg.tolerance})
    except _BudgetExhausted:
        pass
    return QaoaParams.from_vector(best["theta"]), best["value"], best["evals"]


def optimize_params(sub, opt: QaoaConfig, seed: int) -> QaoaParams:
    """Gradient-free search from a random start; returns the best parameters evaluated."""
    table = build_energy_table(sub)
    params, _, _ = _optimize(table, opt, np.random.default_rng(seed))
    return params


def _sample(sub, table: np.ndarray, params: QaoaParams, shots: int, rng: np.random.Generator) -> np.ndarray:
    psi = ansatz_state(table, params)
    probs = psi.real**2 + psi.imag**2
    probs /= probs.sum()
    seen = np.unique(rng.choice(probs.shape[0], size=shots, p=probs))
    energies = table[seen]
    ties = seen[energies == energies.min()]
    k = table.shape[0].bit_length() - 1
    return bits_from_index(int(ties[np.argmin(_lex_key(ties, k))]), k)


def sample_solution(sub, params: QaoaParams, shots: int, seed: int) -> QaoaResult:
    """Measure ``shots`` times and keep the lowest-energy outcome."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    start = time.perf_counter()
    table = build_energy_table(sub)
    bits = _sample(sub, table, params, shots, np.random.default_rng(seed))
    return QaoaResult(bits, qubo_energy(_as_qubo(sub), bits), params, 0, time.perf_counter() - start)


def solve_subqubo(sub, cfg: QaoaConfig | None = None, seed: int = 0) -> QaoaResult:
    """Energy table, parameter optimization and sampling for one sub-QUBO."""
    cfg = cfg or QaoaConfig()
    start = time.perf_counter()
    table = build_energy_table(sub)
    opt_seq, sample_seq = np.random.SeedSequence(seed).spawn(2)
    params, _, evals = _optimize(table, cfg, np.random.default_rng(opt_seq))
    bits = _sample(sub, table, params, cfg.shots, np.random.default_rng(sample_seq))
    energy = qubo_energy(_as_qubo(sub), bits)
    return QaoaResult(bits, energy, params, evals, time.perf_counter() - start)
