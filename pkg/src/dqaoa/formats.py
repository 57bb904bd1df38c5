"""Plain-text QUBO and Max-Cut file formats.

QUBO files start with ``QUBO n=<N>`` followed by ``i j value`` lines (``i <= j``);
Max-Cut files start with ``MAXCUT n=<N> m=<M>`` followed by ``i j weight`` lines.
Lines beginning with ``#`` are comments. Values use 17 significant digits so a
write/read cycle is bit-exact.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from dqaoa.qubo import MaxCutInstance, QuboProblem


class FormatError(ValueError):
    pass


_QUBO_HEADER = re.compile(r"^QUBO\s+n=(\d+)$")
_MAXCUT_HEADER = re.compile(r"^MAXCUT\s+n=(\d+)\s+m=(\d+)$")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _records(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, line


def dumps_qubo(q: QuboProblem) -> str:
    lines = [f"# {q.name}" + (f" seed={q.seed}" if q.seed is not None else ""), f"QUBO n={q.n}"]
    rows, cols = np.nonzero(q.coeffs)
    for i, j in zip(rows, cols):
        lines.append(f"{i} {j} {_fmt(q.coeffs[i, j])}")
    return "\n".join(lines) + "\n"


def loads_qubo(text: str, name: str = "qubo") -> QuboProblem:
    records = _records(text)
    try:
        lineno, header = next(records)
    except StopIteration:
        raise FormatError("empty QUBO file") from None
    m = _QUBO_HEADER.match(header)
    if not m:
        raise FormatError(f"line {lineno}: expected 'QUBO n=<N>' header, got {header!r}")
    n = int(m.group(1))
    q = np.zeros((n, n))
    for lineno, line in records:
        parts = line.split()
        if len(parts) != 3:
            raise FormatError(f"line {lineno}: expected 'i j value'")
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        if not 0 <= i <= j < n:
            raise FormatError(f"line {lineno}: index pair ({i}, {j}) invalid for n={n}")
        q[i, j] = v
    return QuboProblem(q, name=name)


def dumps_maxcut(inst: MaxCutInstance) -> str:
    lines = [f"MAXCUT n={inst.n} m={len(inst.edges)}"]
    lines.extend(f"{i} {j} {_fmt(w)}" for i, j, w in inst.edges)
    return "\n".join(lines) + "\n"


def loads_maxcut(text: str) -> MaxCutInstance:
    records = _records(text)
    try:
        lineno, header = next(records)
    except StopIteration:
        raise FormatError("empty MAXCUT file") from None
    m = _MAXCUT_HEADER.match(header)
    if not m:
        raise FormatError(f"line {lineno}: expected 'MAXCUT n=<N> m=<M>' header, got {header!r}")
    n, count = int(m.group(1)), int(m.group(2))
    edges = []
    for lineno, line in records:
        parts = line.split()
        if len(parts) != 3:
            raise FormatError(f"line {lineno}: expected 'i j weight'")
        try:
            edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
    if len(edges) != count:
        raise FormatError(f"header declares m={count} edges, found {len(edges)}")
    try:
        return MaxCutInstance(n, tuple(edges))
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def read_problem(path: str | Path) -> QuboProblem:
    """Load either format; Max-Cut files are converted to their QUBO."""
    path = Path(path)
    text = path.read_text()
    first = next((line for _, line in _records(text)), "")
    if first.startswith("MAXCUT"):
        return loads_maxcut(text).to_qubo(name=path.stem)
    return loads_qubo(text, name=path.stem)


def write_qubo(q: QuboProblem, path: str | Path) -> None:
    Path(path).write_text(dumps_qubo(q))


def write_maxcut(inst: MaxCutInstance, path: str | Path) -> None:
    Path(path).write_text(dumps_maxcut(inst))
