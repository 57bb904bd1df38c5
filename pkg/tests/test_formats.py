import numpy as np
import pytest

from dqaoa.formats import (
    FormatError,
    dumps_maxcut,
    dumps_qubo,
    loads_maxcut,
    loads_qubo,
    read_problem,
    write_maxcut,
    write_qubo,
)
from dqaoa.qubo import QuboProblem, generate_dense_qubo, generate_maxcut


def test_qubo_round_trip_bit_exact():
    q = generate_dense_qubo(25, 3)
    back = loads_qubo(dumps_qubo(q))
    assert back.coeffs.tobytes() == q.coeffs.tobytes()


def test_awkward_values_round_trip():
    vals = [0.1, 1 / 3, -2.2250738585072014e-308, 1e300, np.nextafter(1.0, 2.0)]
    q = QuboProblem(np.diag(vals))
    assert loads_qubo(dumps_qubo(q)).coeffs.tobytes() == q.coeffs.tobytes()


def test_comments_and_blank_lines():
    q = loads_qubo("# hello\n\nQUBO n=2\n# pair\n0 1 2.5\n1 1 -1\n")
    np.testing.assert_array_equal(q.coeffs, [[0.0, 2.5], [0.0, -1.0]])


@pytest.mark.parametrize("text", ["", "QUBO n=x\n", "QUBO n=2\n1 0 1.0\n", "QUBO n=2\n0 1\n", "QUBO n=2\n0 5 1\n"])
def test_bad_qubo(text):
    with pytest.raises(FormatError):
        loads_qubo(text)


def test_maxcut_round_trip(tmp_path):
    inst, q = generate_maxcut(30, 1)
    assert loads_maxcut(dumps_maxcut(inst)) == inst
    path = tmp_path / "g.maxcut"
    write_maxcut(inst, path)
    assert read_problem(path).coeffs.tobytes() == q.coeffs.tobytes()


def test_maxcut_edge_count_checked():
    with pytest.raises(FormatError):
        loads_maxcut("MAXCUT n=3 m=2\n0 1 1\n")


def test_write_read_file(tmp_path):
    q = generate_dense_qubo(10, 0)
    write_qubo(q, tmp_path / "p.qubo")
    back = read_problem(tmp_path / "p.qubo")
    assert back.name == "p"
    assert back.coeffs.tobytes() == q.coeffs.tobytes()
