import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hcpfactor.dense import (
    gemm,
    gepp,
    householder_qr,
    householder_vector,
    invert_perm,
    norms,
    perm_matrix,
    read_matrix,
    trsm_lower_unit,
    trsm_upper,
    write_matrix,
)
from hcpfactor.errors import DimensionMismatch, SingularPivot

EPS = np.finfo(float).eps


def test_gepp_swap():
    res = gepp([[0.0, 1.0], [1.0, 0.0]])
    assert res.perm.tolist() == [1, 0]
    assert np.array_equal(res.l, np.eye(2)) and np.array_equal(res.u, np.eye(2))


def test_gepp_hand_step():
    res = gepp([[1.0, 1.0], [-1.0, 1.0]])
    assert res.perm.tolist() == [0, 1]
    assert np.array_equal(res.u, [[1.0, 1.0], [0.0, 2.0]])
    assert res.growth_trace.max() == 2.0


def test_gepp_identity():
    res = gepp(np.eye(5))
    assert res.perm.tolist() == list(range(5))
    assert np.array_equal(res.l, np.eye(5)) and np.array_equal(res.u, np.eye(5))


def test_gepp_tie_break_smallest_label():
    a = np.array([[2.0, 1.0, 0.0], [-2.0, 3.0, 1.0], [2.0, 0.0, 5.0]])
    assert gepp(a).perm[0] == 0


def test_gepp_singular():
    with pytest.raises(SingularPivot):
        gepp([[0.0, 1.0], [0.0, 2.0]])
    with pytest.raises(DimensionMismatch):
        gepp(np.ones((2, 3)))


def test_gepp_dominant_columns_keep_order(rng):
    a = rng.uniform(-1, 1, (8, 8)) + np.diag(np.full(8, 20.0))
    assert gepp(a).perm.tolist() == list(range(8))


@settings(max_examples=40, deadline=None)
@given(arrays(float, (6, 6), elements=st.floats(-10, 10, allow_subnormal=False)))
def test_gepp_residual_property(a):
    try:
        res = gepp(a)
    except SingularPivot:
        return
    assert np.all(np.abs(res.l) <= 1.0)
    scale = max(np.linalg.norm(a), 1.0) * max(res.growth_trace.max(), 1.0)
    assert np.linalg.norm(a[res.perm] - res.l @ res.u) <= 100 * 6 * EPS * scale


def test_householder_vector_nonnegative_beta():
    v, tau, beta = householder_vector(np.array([-3.0, 4.0]))
    h = np.eye(2) - tau * np.outer(v, v)
    assert beta == pytest.approx(5.0)
    assert np.allclose(h @ [-3.0, 4.0], [5.0, 0.0])


def test_qr_small_cases():
    assert householder_qr([[3.0], [4.0]]).r[0, 0] == pytest.approx(5.0)
    f = householder_qr(np.eye(4))
    assert np.array_equal(f.r, np.eye(4))
    assert np.abs(f.wy.q() - np.eye(4)).max() == 0.0


def test_qr_orthogonality(rng):
    a = rng.standard_normal((8, 4))
    f = householder_qr(a)
    q = f.wy.q()
    assert np.linalg.norm(q.T @ q - np.eye(8)) <= 1e-14
    assert np.linalg.norm(a - q[:, :4] @ f.r) <= 1e-14 * np.linalg.norm(a)
    assert np.all(np.diag(f.r) >= 0)


def test_qr_matches_cholesky(rng):
    a = rng.standard_normal((20, 6))
    r = householder_qr(a).r
    chol = np.linalg.cholesky(a.T @ a).T
    assert np.abs(r - chol).max() <= 1e-12 * np.linalg.norm(a)


def test_qr_rank_deficient_column():
    a = np.zeros((4, 2))
    a[:, 1] = 1.0
    f = householder_qr(a)
    assert f.r[0, 0] == 0.0
    assert np.allclose(f.wy.q()[:, :2] @ f.r, a)


def test_qr_wide(rng):
    a = rng.standard_normal((3, 5))
    f = householder_qr(a)
    assert f.r.shape == (3, 5)
    assert np.allclose(f.wy.q() @ f.r, a)


def test_trsm(rng):
    l = np.tril(rng.standard_normal((3, 3)), -1) + np.eye(3)
    u = np.triu(rng.standard_normal((3, 3))) + 3 * np.eye(3)
    b = rng.standard_normal((3, 2))
    assert np.abs(trsm_lower_unit(l, b) - np.linalg.inv(l) @ b).max() <= 1e-13
    assert np.abs(trsm_upper(u, b) - np.linalg.inv(u) @ b).max() <= 1e-13
    c = rng.standard_normal((2, 3))
    assert np.abs(trsm_upper(u, c, side="right") - c @ np.linalg.inv(u)).max() <= 1e-13
    assert np.array_equal(trsm_lower_unit(np.eye(3), b), b)
    with pytest.raises(DimensionMismatch):
        trsm_lower_unit(np.eye(3), np.ones((2, 2)))
    with pytest.raises(ValueError):
        trsm_upper(u, b, side="middle")


def test_gemm_and_norms(rng):
    b = rng.standard_normal((4, 3))
    assert np.array_equal(gemm(np.eye(4), b, np.zeros((4, 3)), 1.0, 0.0), b)
    c = rng.standard_normal((4, 3))
    assert np.allclose(gemm(np.eye(4), b, c, 2.0, -1.0), 2 * b - c)
    with pytest.raises(DimensionMismatch):
        gemm(np.ones((2, 3)), np.ones((2, 3)))
    m = np.array([[1.0, -2.0], [3.0, 4.0]])
    assert norms(m) == {"one": 6.0, "inf": 7.0, "fro": pytest.approx(30 ** 0.5), "maxabs": 4.0}


def test_perm_helpers():
    perm = np.array([2, 0, 1])
    a = np.arange(9.0).reshape(3, 3)
    assert np.array_equal(perm_matrix(perm) @ a, a[perm])
    assert np.array_equal(invert_perm(perm)[perm], np.arange(3))


def test_matrix_market_round_trip(tmp_path, rng):
    a = rng.standard_normal((5, 3))
    path = tmp_path / "a.mtx"
    write_matrix(path, a)
    assert path.read_text().startswith("%%MatrixMarket matrix array real general")
    assert np.array_equal(read_matrix(path), a)


def test_deterministic(rng):
    a = rng.standard_normal((10, 10))
    assert np.array_equal(gepp(a).u, gepp(a).u)
    assert np.array_equal(householder_qr(a).r, householder_qr(a).r)
