from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cartan_coh.linalg import (
    CompositionNotZero, LabeledBasis, SparseMatrix, cohomology_at, rank, rank_kernel, solve,
)

small = st.integers(min_value=-3, max_value=3).map(Fraction)


def dense(rows):
    return SparseMatrix.from_dense(rows)


def test_rank_kernel_proportional_rows():
    r, ker = rank_kernel(dense([[1, 2], [2, 4]]))
    assert r == 1
    assert ker == [[Fraction(-2), Fraction(1)]]


def test_rank_kernel_zero_matrix():
    r, ker = rank_kernel(SparseMatrix.zero(3, 3))
    assert r == 0
    assert ker == [[1, 0, 0], [0, 1, 0], [0, 0, 1]]


def test_rank_kernel_row_vector():
    r, ker = rank_kernel(dense([[1, 1]]))
    assert r == 1
    assert ker == [[Fraction(-1), Fraction(1)]]


def test_empty_matrix():
    assert rank_kernel(SparseMatrix(0, 0)) == (0, [])
    assert rank_kernel(SparseMatrix(0, 2))[1] == [[1, 0], [0, 1]]


def test_solve_examples():
    assert solve(dense([[2]]), [1]) == [Fraction(1, 2)]
    x = solve(dense([[1, 1]]), [3])
    assert x[0] + x[1] == 3
    assert solve(dense([[1], [2]]), [1, 1]) is None
    with pytest.raises(ValueError):
        solve(dense([[1]]), [1, 2])


def test_cohomology_examples():
    g = cohomology_at(SparseMatrix(2, 0), dense([[1, 1]]))
    assert g.dimension == 1
    assert g.representatives == [[Fraction(-1), Fraction(1)]]
    assert not g.is_exact([1, -1])
    assert cohomology_at(SparseMatrix.identity(2), SparseMatrix(0, 2)).dimension == 0
    assert cohomology_at(SparseMatrix(3, 0), SparseMatrix(0, 3)).dimension == 3


def test_composition_not_zero():
    with pytest.raises(CompositionNotZero):
        cohomology_at(dense([[1], [0]]), dense([[1, 1]]))
    with pytest.raises(ValueError):
        cohomology_at(dense([[1]]), dense([[1, 1]]))


def test_matrix_roundtrip_and_product():
    a = dense([[1, Fraction(1, 2)], [0, 3]])
    b = SparseMatrix.from_json(a.to_json())
    assert a == b
    assert a.to_json()["entries"][1] == [0, 1, "1/2"]
    assert (a @ SparseMatrix.identity(2)) == a
    assert a.transpose().transpose() == a
    assert (a - a).is_zero()


def test_labeled_basis():
    b = LabeledBasis(["x", "y"])
    assert b.index("y") == 1 and len(b) == 2
    with pytest.raises(ValueError):
        LabeledBasis(["x", "x"])


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.data())
def test_kernel_property(m, n, data):
    rows = [[data.draw(small) for _ in range(n)] for _ in range(m)]
    mat = dense(rows)
    r, ker = rank_kernel(mat)
    assert r + len(ker) == n
    for k in ker:
        assert all(v == 0 for v in mat.apply(k))
    assert rank(SparseMatrix.from_dense(ker, n)) == len(ker) if ker else True


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.data())
def test_solve_matches_exactness(m, n, data):
    mat = dense([[data.draw(small) for _ in range(n)] for _ in range(m)])
    b = [data.draw(small) for _ in range(m)]
    x = solve(mat, b)
    if x is not None:
        assert mat.apply(x) == b
    grp = cohomology_at(mat, SparseMatrix(0, m))
    assert grp.is_exact(b) == (x is not None)


def test_determinism():
    rows = [[3, 1, 4, 1], [5, 9, 2, 6], [8, 10, 6, 7]]
    assert rank_kernel(dense(rows)) == rank_kernel(dense(rows))
