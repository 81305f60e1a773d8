import csv
import io

import numpy as np
import pytest

from hcpfactor.dense import gepp
from hcpfactor.errors import UnsupportedOrder
from hcpfactor.stability import (
    DEFAULT_GENERATORS,
    GENERATORS,
    STUDY_COLUMNS,
    MatrixGen,
    StudyConfig,
    backward_errors,
    generate,
    growth_factor,
    lu_solve,
    ratio,
    ratio_study,
)


def test_minij():
    assert np.array_equal(generate(MatrixGen("minij", 3)), [[1, 1, 1], [1, 2, 2], [1, 2, 3]])


def test_hadamard():
    h = generate(MatrixGen("hadamard", 8))
    assert np.array_equal(h.T @ h, 8 * np.eye(8))
    with pytest.raises(UnsupportedOrder):
        generate(MatrixGen("hadamard", 12))


def test_randsvd_condition():
    a = generate(MatrixGen("randsvd", 64, seed=3, params={"kappa": 1e7}))
    assert 1e6 <= np.linalg.cond(a, 1) <= 1e8
    for mode in (1, 2, 4):
        s = np.linalg.svd(generate(MatrixGen("randsvd", 16, params={"kappa": 1e4, "mode": mode})),
                          compute_uv=False)
        assert s[0] / s[-1] == pytest.approx(1e4, rel=1e-8)


def test_gfpp_growth():
    a = generate(MatrixGen("gfpp_growth", 10))
    assert growth_factor(a, gepp(a).u) == 2.0 ** 9


@pytest.mark.parametrize("name", sorted(GENERATORS))
def test_generators_deterministic(name):
    g = MatrixGen(name, 16, seed=4)
    a = generate(g)
    assert a.shape == (16, 16) and np.all(np.isfinite(a))
    assert np.array_equal(a, generate(g))


def test_unknown_generator():
    with pytest.raises(KeyError):
        generate(MatrixGen("nope", 4))
    with pytest.raises(ValueError):
        generate(MatrixGen("minij", 0))


def test_identity_system_zero_error():
    a = np.eye(8)
    b = np.eye(8)[:, 0]
    x = lu_solve(np.arange(8), a, a, b)
    err = backward_errors(a, np.arange(8), a, a, x, b)
    assert err.normwise == 0.0 and err.factor_relative == 0.0
    assert growth_factor(a, a) == 1.0


def test_gepp_backward_error_small(rng):
    a = rng.standard_normal((128, 128))
    res = gepp(a)
    x_true = rng.standard_normal(128)
    b = a @ x_true
    err = backward_errors(a, res.perm, res.l, res.u, lu_solve(res.perm, res.l, res.u, b), b)
    assert err.normwise <= 1e-13 and err.componentwise <= 1e-12


def test_ratio_edge_cases():
    assert ratio(0.0, 0.0) == 1.0
    assert ratio(1.0, 0.0) == float("inf")
    assert ratio(2.0, 4.0) == 0.5


def test_identity_study_ratios_one():
    report = ratio_study(["identity"], StudyConfig(n=64, p_rows=(2, 2), blocks=(4, 8)))
    row = report.rows[0]
    assert all(v == 1.0 for v in row.ratios.values())
    assert row.frac_tau_one == 1.0


def test_small_study_csv():
    config = StudyConfig(n=64, p_rows=(2, 2), blocks=(4, 8))
    report = ratio_study(["random_normal", "kms", "gfpp_growth"], config)
    assert report.fraction_within() == 1.0
    taus = report.all_taus()
    assert np.all((taus > 0) & (taus <= 1))
    rows = list(csv.DictReader(io.StringIO(report.to_csv())))
    assert tuple(rows[0]) == STUDY_COLUMNS
    assert [r["algo"] for r in rows] == ["mlcalu2d", "gepp"] * 3


def test_default_generators_count():
    assert len(DEFAULT_GENERATORS) == 12 and "identity" not in DEFAULT_GENERATORS
