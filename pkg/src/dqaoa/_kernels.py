"""Compiled inner loops: the annealing chain and the QAOA mixer."""

import numpy as np
from numba import njit


@njit(cache=True)
def anneal(diag, couplings, sweeps, t_start, t_end, seed):
    np.random.seed(seed)
    n = diag.shape[0]
    x = np.empty(n, dtype=np.int64)
    for i in range(n):
        x[i] = 1 if np.random.random() < 0.5 else 0
    field = np.zeros(n)
    energy = 0.0
    for i in range(n):
        if x[i]:
            energy += diag[i]
            for j in range(n):
                field[j] += couplings[j, i]
    for i in range(n):
        if x[i]:
            energy += 0.5 * field[i]
    best = x.copy()
    best_e = energy
    ratio = 1.0 if sweeps <= 1 else (t_end / t_start) ** (1.0 / (sweeps - 1))
    t = t_start
    for _ in range(sweeps):
        for i in range(n):
            delta = (1 - 2 * x[i]) * (diag[i] + field[i])
            if delta <= 0.0 or np.random.random() < np.exp(-delta / t):
                step = 1 - 2 * x[i]
                x[i] ^= 1
                energy += delta
                for j in range(n):
                    field[j] += step * couplings[j, i]
                if energy < best_e:
                    best_e = energy
                    best[:] = x
        t *= ratio
    return best, best_e


@njit(cache=True)
def mix_inplace(psi, beta):
    c = np.cos(beta)
    s = 1j * np.sin(beta)
    dim = psi.shape[0]
    step = 1
    while step < dim:
        for base in range(0, dim, 2 * step):
            for j in range(base, base + step):
                a0 = psi[j]
                a1 = psi[j + step]
                psi[j] = c * a0 + s * a1
                psi[j + step] = s * a0 + c * a1
        step *= 2
