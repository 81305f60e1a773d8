"""Reference dense kernels: GEPP, Householder QR in compact WY form, BLAS-3 helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.linalg

from .errors import DimensionMismatch, SingularPivot

__all__ = [
    "CompactWY",
    "QrFactors",
    "GeppResult",
    "householder_vector",
    "householder_qr",
    "gepp",
    "trsm_lower_unit",
    "trsm_upper",
    "gemm",
    "norms",
    "perm_matrix",
    "invert_perm",
    "qr_flops",
    "lu_flops",
    "wy_apply_flops",
    "read_matrix",
    "write_matrix",
]


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class CompactWY:
    """Aggregated reflectors ``Q = I - Y T Y^T`` (Y unit lower trapezoidal, T upper)."""

    y: np.ndarray
    t: np.ndarray

    @property
    def rows(self) -> int:
        return self.y.shape[0]

    @property
    def count(self) -> int:
        return self.y.shape[1]

    def apply_qt(self, c: np.ndarray) -> np.ndarray:
        if self.count == 0:
            return np.array(c, dtype=float, copy=True)
        return c - self.y @ (self.t.T @ (self.y.T @ c))

    def apply_q(self, c: np.ndarray) -> np.ndarray:
        if self.count == 0:
            return np.array(c, dtype=float, copy=True)
        return c - self.y @ (self.t @ (self.y.T @ c))

    def q(self) -> np.ndarray:
        return self.apply_q(np.eye(self.rows))


@dataclass(frozen=True)
class QrFactors:
    wy: CompactWY
    r: np.ndarray


@dataclass(frozen=True)
class GeppResult:
    perm: np.ndarray  # row order: (P A)[i] = A[perm[i]]
    l: np.ndarray
    u: np.ndarray
    growth_trace: np.ndarray


def householder_vector(x: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Reflector ``H = I - tau v v^T`` with ``v[0] = 1`` and ``H x = beta e_1``, ``beta >= 0``."""
    x = np.asarray(x, dtype=float)
    v = np.zeros_like(x)
    if x.size == 0:
        return v, 0.0, 0.0
    v[0] = 1.0
    alpha = float(x[0])
    xnorm = float(np.linalg.norm(x[1:])) if x.size > 1 else 0.0
    if xnorm == 0.0:
        if alpha >= 0.0:
            return v, 0.0, alpha
        return v, 2.0, -alpha
    beta = math.hypot(alpha, xnorm)
    if alpha <= 0.0:
        denom = alpha - beta
    else:
        # avoids cancellation in alpha - beta
        denom = -(xnorm * xnorm) / (alpha + beta)
    v[1:] = x[1:] / denom
    tau = -denom / beta
    return v, tau, beta


def householder_qr(a) -> QrFactors:
    """Unblocked Householder QR with nonnegative diagonal of R.

    Works for any shape; ``min(m, n)`` reflectors are produced and R is the
    ``min(m, n) x n`` upper trapezoid.  Zero columns give identity reflectors.
    """
    a = _as_matrix(a)
    m, n = a.shape
    k = min(m, n)
    work = a.copy()
    y = np.zeros((m, k))
    taus = np.zeros(k)
    for j in range(k):
        v, tau, beta = householder_vector(work[j:, j])
        work[j:, j] = 0.0
        work[j, j] = beta
        if tau != 0.0 and j + 1 < n:
            w = v @ work[j:, j + 1:]
            work[j:, j + 1:] -= tau * np.outer(v, w)
        y[j:, j] = v
        taus[j] = tau
    t = np.zeros((k, k))
    for j in range(k):
        if j:
            t[:j, j] = -taus[j] * (t[:j, :j] @ (y[:, :j].T @ y[:, j]))
        t[j, j] = taus[j]
    return QrFactors(CompactWY(y, t), np.triu(work[:k]))


def gepp(a) -> GeppResult:
    """Gaussian elimination with partial pivoting on a square or tall matrix.

    Ties between equal-magnitude candidates go to the smallest original row
    index.  ``growth_trace[k]`` is the largest magnitude left in the trailing
    matrix after step ``k``.
    """
    a = _as_matrix(a)
    m, n = a.shape
    if m < n:
        raise DimensionMismatch("gepp needs a square or tall matrix")
    work = a.copy()
    perm = np.arange(m)
    growth = np.zeros(n)
    for k in range(n):
        col = np.abs(work[k:, k])
        big = col.max()
        if big == 0.0:
            raise SingularPivot(f"zero pivot column at step {k}")
        ties = np.flatnonzero(col == big)
        p = k + ties[np.argmin(perm[k + ties])]
        if p != k:
            work[[k, p]] = work[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        work[k + 1:, k] /= work[k, k]
        if k + 1 < n:
            work[k + 1:, k + 1:] -= np.outer(work[k + 1:, k], work[k, k + 1:])
            growth[k] = np.abs(work[k + 1:, k + 1:]).max() if k + 1 < m else 0.0
    l = np.tril(work[:, :n], -1)
    l[np.arange(n), np.arange(n)] = 1.0
    return GeppResult(perm, l, np.triu(work[:n]), growth)


def trsm_lower_unit(l, b) -> np.ndarray:
    """Solve ``L X = B`` with unit lower triangular ``L``."""
    l, b = _as_matrix(l), np.asarray(b, dtype=float)
    if l.shape[0] != l.shape[1] or l.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"trsm: L {l.shape} vs B {b.shape}")
    if b.size == 0:
        return b.copy()
    return scipy.linalg.solve_triangular(l, b, lower=True, unit_diagonal=True)


def trsm_upper(u, b, side: str = "left") -> np.ndarray:
    """Solve ``U X = B`` (``side="left"``) or ``X U = B`` (``side="right"``)."""
    u, b = _as_matrix(u), np.asarray(b, dtype=float)
    if u.shape[0] != u.shape[1]:
        raise DimensionMismatch(f"trsm: U must be square, got {u.shape}")
    if side == "left":
        if u.shape[0] != b.shape[0]:
            raise DimensionMismatch(f"trsm: U {u.shape} vs B {b.shape}")
        if b.size == 0:
            return b.copy()
        return scipy.linalg.solve_triangular(u, b, lower=False)
    if side == "right":
        if b.ndim != 2 or u.shape[0] != b.shape[1]:
            raise DimensionMismatch(f"trsm: B {b.shape} vs U {u.shape}")
        if b.size == 0:
            return b.copy()
        return scipy.linalg.solve_triangular(u, b.T, trans="T", lower=False).T
    raise ValueError(f"side must be 'left' or 'right', not {side!r}")


def gemm(a, b, c=None, alpha: float = 1.0, beta: float = 0.0) -> np.ndarray:
    """``alpha * A B + beta * C``."""
    a, b = _as_matrix(a), _as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"gemm: A {a.shape} vs B {b.shape}")
    out = alpha * (a @ b)
    if c is not None and beta != 0.0:
        c = _as_matrix(c)
        if c.shape != out.shape:
            raise DimensionMismatch(f"gemm: C {c.shape} vs AB {out.shape}")
        out = out + beta * c
    return out


def norms(a) -> dict[str, float]:
    a = _as_matrix(a)
    if a.size == 0:
        return {"one": 0.0, "inf": 0.0, "fro": 0.0, "maxabs": 0.0}
    return {
        "one": float(np.linalg.norm(a, 1)),
        "inf": float(np.linalg.norm(a, np.inf)),
        "fro": float(np.linalg.norm(a, "fro")),
        "maxabs": float(np.abs(a).max()),
    }


def perm_matrix(perm) -> np.ndarray:
    """Permutation matrix ``P`` with ``P A = A[perm]``."""
    perm = np.asarray(perm)
    p = np.zeros((perm.size, perm.size))
    p[np.arange(perm.size), perm] = 1.0
    return p


def invert_perm(perm) -> np.ndarray:
    perm = np.asarray(perm)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    return inv


# flop counts (leading terms, used by the instrumented algorithms)


def qr_flops(m: float, n: float) -> float:
    k = min(m, n)
    return max(0.0, 4.0 * (m * n * k - (m + n) * k * k / 2.0 + k ** 3 / 3.0))


def lu_flops(m: float, n: float) -> float:
    k = min(m, n)
    return max(0.0, 2.0 * (m * n * k - (m + n) * k * k / 2.0 + k ** 3 / 3.0))


def wy_apply_flops(m: float, k: float, width: float) -> float:
    return max(0.0, (4.0 * m * k - 2.0 * k * k) * width)


# MatrixMarket dense array files


def read_matrix(path: str | Path) -> np.ndarray:
    return _as_matrix(scipy.io.mmread(str(path)))


def write_matrix(path: str | Path, a) -> None:
    scipy.io.mmwrite(str(path), _as_matrix(a), field="real", symmetry="general")
