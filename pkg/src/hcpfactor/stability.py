"""Test-matrix gallery, backward errors, and ML-CALU vs GEPP ratio studies."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .calu import LuResult, ml_calu, pivot_quality
from .dense import gepp, trsm_lower_unit, trsm_upper
from .errors import DimensionMismatch, UnsupportedOrder
from .platform import make_platform

__all__ = [
    "MatrixGen",
    "GENERATORS",
    "DEFAULT_GENERATORS",
    "generate",
    "BackwardErrors",
    "backward_errors",
    "lu_solve",
    "growth_factor",
    "ratio",
    "StudyConfig",
    "StudyRow",
    "StabilityReport",
    "ratio_study",
    "STUDY_COLUMNS",
]


@dataclass(frozen=True)
class MatrixGen:
    name: str
    n: int
    seed: int = 0
    params: dict = field(default_factory=dict)


def _rng(gen: MatrixGen) -> np.random.Generator:
    return np.random.default_rng(gen.seed)


def _random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def _hadamard(gen: MatrixGen) -> np.ndarray:
    n = gen.n
    if n & (n - 1):
        raise UnsupportedOrder(f"hadamard needs a power-of-two order, got {n}")
    return scipy.linalg.hadamard(n).astype(float)


def _lotkin(gen: MatrixGen) -> np.ndarray:
    i, j = np.indices((gen.n, gen.n))
    a = 1.0 / (i + j + 1.0)
    a[0, :] = 1.0
    return a


def _kms(gen: MatrixGen) -> np.ndarray:
    rho = gen.params.get("rho", 0.5)
    i, j = np.indices((gen.n, gen.n))
    return rho ** np.abs(i - j).astype(float)


def _moler(gen: MatrixGen) -> np.ndarray:
    alpha = gen.params.get("alpha", -1.0)
    t = np.triu(np.full((gen.n, gen.n), alpha), 1) + np.eye(gen.n)
    return t.T @ t


def _fiedler(gen: MatrixGen) -> np.ndarray:
    c = np.arange(1, gen.n + 1, dtype=float)
    return np.abs(c[:, None] - c[None, :])


def _minij(gen: MatrixGen) -> np.ndarray:
    i, j = np.indices((gen.n, gen.n))
    return np.minimum(i, j) + 1.0


def _randsvd(gen: MatrixGen) -> np.ndarray:
    n = gen.n
    kappa = float(gen.params.get("kappa", 1e7))
    mode = int(gen.params.get("mode", 3))
    rng = _rng(gen)
    if n == 1:
        sigma = np.ones(1)
    elif mode == 1:  # one large singular value
        sigma = np.full(n, 1.0 / kappa)
        sigma[0] = 1.0
    elif mode == 2:  # one small singular value
        sigma = np.ones(n)
        sigma[-1] = 1.0 / kappa
    elif mode == 3:  # geometric
        sigma = kappa ** (-np.arange(n) / (n - 1))
    elif mode == 4:  # arithmetic
        sigma = 1.0 - np.arange(n) / (n - 1) * (1.0 - 1.0 / kappa)
    else:
        raise ValueError(f"randsvd mode must be 1..4, got {mode}")
    return (_random_orthogonal(n, rng) * sigma) @ _random_orthogonal(n, rng).T


def _gfpp_growth(gen: MatrixGen) -> np.ndarray:
    # partial pivoting doubles the last column at every step
    n = gen.n
    a = np.eye(n) - np.tril(np.ones((n, n)), -1)
    a[:, -1] = 1.0
    return a


GENERATORS: dict[str, Callable[[MatrixGen], np.ndarray]] = {
    "random_uniform": lambda g: _rng(g).uniform(-1.0, 1.0, (g.n, g.n)),
    "random_normal": lambda g: _rng(g).standard_normal((g.n, g.n)),
    "hadamard": _hadamard,
    "circulant": lambda g: scipy.linalg.circulant(_rng(g).standard_normal(g.n)),
    "lotkin": _lotkin,
    "kms": _kms,
    "moler": _moler,
    "fiedler": _fiedler,
    "minij": _minij,
    "randsvd": _randsvd,
    "gfpp_growth": _gfpp_growth,
    "orthogonal_random": lambda g: _random_orthogonal(g.n, _rng(g)),
    "identity": lambda g: np.eye(g.n),
}

DEFAULT_GENERATORS = tuple(name for name in GENERATORS if name != "identity")


def generate(gen: MatrixGen) -> np.ndarray:
    if gen.n < 1:
        raise ValueError("matrix order must be >= 1")
    try:
        make = GENERATORS[gen.name]
    except KeyError:
        raise KeyError(f"unknown generator {gen.name!r}; known: {sorted(GENERATORS)}") from None
    return np.asarray(make(gen), dtype=float)


# ---------------------------------------------------------------------------
# errors


@dataclass(frozen=True)
class BackwardErrors:
    normwise: float
    componentwise: float
    factor_relative: float
    skipped_rows: int = 0  # zero denominators left out of the componentwise error


def lu_solve(perm, l, u, b) -> np.ndarray:
    """Solve ``A x = b`` from ``P A = L U`` by one forward and one backward substitution."""
    y = trsm_lower_unit(l, np.asarray(b, dtype=float)[np.asarray(perm)])
    return trsm_upper(u, y)


def backward_errors(a, perm, l, u, x_hat, b) -> BackwardErrors:
    a = np.asarray(a, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[0] != b.shape[0] or a.shape[1] != x_hat.shape[0]:
        raise DimensionMismatch(f"A {a.shape}, x {x_hat.shape}, b {b.shape}")
    r = b - a @ x_hat
    denom = np.linalg.norm(a, np.inf) * np.abs(x_hat).max() + np.abs(b).max()
    normwise = float(np.abs(r).max() / denom) if denom > 0 else 0.0
    scale = np.abs(a) @ np.abs(x_hat) + np.abs(b)
    ok = scale > 0
    componentwise = float((np.abs(r)[ok] / scale[ok]).max()) if ok.any() else 0.0
    anorm = np.linalg.norm(a, "fro")
    diff = np.linalg.norm(a[np.asarray(perm)] - np.asarray(l) @ np.asarray(u), "fro")
    rel = float(diff / anorm) if anorm > 0 else 0.0
    return BackwardErrors(normwise, componentwise, rel, int((~ok).sum()))


def growth_factor(a, u, growth_trace: Sequence[float] = ()) -> float:
    """``max(max|A|, trailing maxima, max|U|) / max|A|``."""
    amax = float(np.abs(a).max())
    if amax == 0:
        return 1.0
    peak = max(amax, float(np.abs(u).max()), *(float(g) for g in growth_trace))
    return peak / amax


def ratio(x: float, y: float) -> float:
    """``x / y`` with equal values (including two zeros) giving exactly 1."""
    if x == y:
        return 1.0
    if y == 0:
        return math.inf
    return x / y


# ---------------------------------------------------------------------------
# ratio study


@dataclass(frozen=True)
class StudyConfig:
    n: int = 256
    variant: str = "2d"
    p_rows: tuple[int, ...] = (2, 2, 4)
    p_cols: tuple[int, ...] | None = None  # defaults to p_rows (square grids)
    blocks: tuple[int, ...] = (8, 16, 32)
    seed: int = 0

    def platform(self):
        cols = self.p_cols if self.p_cols is not None else self.p_rows
        return make_platform(list(zip(self.p_rows, cols)))


@dataclass(frozen=True)
class StudyRow:
    matrix: str
    n: int
    algo: str
    growth: float
    nwise: float
    cwise: float
    rel: float
    gepp_growth: float
    gepp_nwise: float
    gepp_cwise: float
    gepp_rel: float
    tau_min: float
    frac_tau_one: float
    taus: np.ndarray = field(repr=False, compare=False, default_factory=lambda: np.empty(0))

    @property
    def ratios(self) -> dict[str, float]:
        return {
            "growth_ratio": ratio(self.growth, self.gepp_growth),
            "nwise_ratio": ratio(self.nwise, self.gepp_nwise),
            "cwise_ratio": ratio(self.cwise, self.gepp_cwise),
            "rel_ratio": ratio(self.rel, self.gepp_rel),
        }

    def within(self, lo: float = 1e-3, hi: float = 10.0) -> bool:
        return all(lo <= v <= hi for v in self.ratios.values())


STUDY_COLUMNS = ("matrix", "n", "algo", "growth", "nwise", "cwise", "rel", "growth_ratio",
                 "nwise_ratio", "cwise_ratio", "rel_ratio", "tau_min", "frac_tau_one")


@dataclass
class StabilityReport:
    config: StudyConfig
    rows: list[StudyRow]

    def fraction_within(self, lo: float = 1e-3, hi: float = 10.0) -> float:
        if not self.rows:
            return math.nan
        return sum(r.within(lo, hi) for r in self.rows) / len(self.rows)

    def all_taus(self) -> np.ndarray:
        if not self.rows:
            return np.empty(0)
        return np.concatenate([r.taus for r in self.rows])

    def csv_rows(self) -> list[dict]:
        out = []
        for r in self.rows:
            ratios = r.ratios
            out.append({"matrix": r.matrix, "n": r.n, "algo": r.algo, "growth": r.growth,
                        "nwise": r.nwise, "cwise": r.cwise, "rel": r.rel, **ratios,
                        "tau_min": r.tau_min, "frac_tau_one": r.frac_tau_one})
            out.append({"matrix": r.matrix, "n": r.n, "algo": "gepp", "growth": r.gepp_growth,
                        "nwise": r.gepp_nwise, "cwise": r.gepp_cwise, "rel": r.gepp_rel,
                        "growth_ratio": 1.0, "nwise_ratio": 1.0, "cwise_ratio": 1.0,
                        "rel_ratio": 1.0, "tau_min": 1.0, "frac_tau_one": 1.0})
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=STUDY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.csv_rows())
        return buf.getvalue()


def _errors_for(a: np.ndarray, perm, l, u, seed: int) -> BackwardErrors:
    x_true = np.random.default_rng(seed).standard_normal(a.shape[0])
    b = a @ x_true
    x_hat = lu_solve(perm, l, u, b)
    return backward_errors(a, perm, l, u, x_hat, b)


def _study_row(name: str, a: np.ndarray, config: StudyConfig, platform) -> StudyRow:
    ref = gepp(a)
    ref_err = _errors_for(a, ref.perm, ref.l, ref.u, config.seed)
    res: LuResult = ml_calu(a, platform, config.blocks, variant=config.variant)
    err = _errors_for(a, res.perm, res.l_factor, res.u_factor, config.seed)
    quality = pivot_quality(res)
    return StudyRow(
        matrix=name,
        n=a.shape[0],
        algo=f"mlcalu{config.variant}",
        growth=growth_factor(a, res.u_factor, res.growth_trace),
        nwise=err.normwise,
        cwise=err.componentwise,
        rel=err.factor_relative,
        gepp_growth=growth_factor(a, ref.u, ref.growth_trace),
        gepp_nwise=ref_err.normwise,
        gepp_cwise=ref_err.componentwise,
        gepp_rel=ref_err.factor_relative,
        tau_min=quality.tau_min,
        frac_tau_one=quality.fraction_tau_eq_one,
        taus=res.tau_trace,
    )


def ratio_study(gens: Sequence[str | MatrixGen] = DEFAULT_GENERATORS,
                config: StudyConfig | None = None) -> StabilityReport:
    """ML-CALU against GEPP on every generator; one row per matrix."""
    config = config or StudyConfig()
    platform = config.platform()
    specs = [g if isinstance(g, MatrixGen) else MatrixGen(g, config.n, config.seed) for g in gens]
    if any(g.n != config.n for g in specs):
        raise DimensionMismatch("all generators of a study must have the study's order")
    rows = [_study_row(g.name, generate(g), config, platform) for g in specs]
    return StabilityReport(config, rows)
