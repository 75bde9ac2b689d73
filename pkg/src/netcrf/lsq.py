"""Ordinary least squares with rank diagnostics; the shared numerical core.

Fitting goes through a column-pivoted QR factorization with tolerance-based
rank detection. Rank-deficient designs either raise (policy ``error``,
appropriate for the linear models, which should never be silently altered)
or drop the pivoted-out columns (policy ``drop``, appropriate for saturated
dummy designs whose empty cells legitimately produce zero columns). Normal
equations exist in the test suite only, as an independent oracle.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .design import DesignMatrix
from .errors import DegreesOfFreedomError, RankDeficiencyError

DEFAULT_RANK_TOL = 1e-10


@dataclass(frozen=True)
class FitResult:
    """OLS output: coefficients (NaN where a column was dropped), diagnostics,
    residuals, and both variance estimates over the retained columns."""

    coefficients: np.ndarray
    labels: tuple[str, ...]
    rank: int
    dropped_columns: tuple[str, ...]
    residuals: np.ndarray
    fitted: np.ndarray
    n: int
    vcov_classical: np.ndarray | None
    vcov_robust: np.ndarray

    @property
    def retained_labels(self) -> tuple[str, ...]:
        dropped = set(self.dropped_columns)
        return tuple(label for label in self.labels if label not in dropped)

    def coef(self, label: str) -> float | None:
        """Coefficient by column label; None when the column was dropped."""
        value = self.coefficients[self.labels.index(label)]
        return None if math.isnan(value) else float(value)

    def to_json_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "coefficients": [None if math.isnan(c) else c for c in self.coefficients],
            "rank": self.rank,
            "dropped_columns": list(self.dropped_columns),
            "n": self.n,
            "vcov_classical": None if self.vcov_classical is None else self.vcov_classical.tolist(),
            "vcov_robust": self.vcov_robust.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def fit(
    x: DesignMatrix,
    y: np.ndarray,
    on_rank_deficiency: str = "error",
    rank_tol: float = DEFAULT_RANK_TOL,
) -> FitResult:
    """Least-squares fit of ``y`` on the columns of ``x``.

    Rank is the number of leading pivots whose magnitude exceeds
    ``rank_tol`` times the largest pivot. With ``on_rank_deficiency="drop"``
    the pivoted-out columns are reported in ``dropped_columns`` and their
    coefficients are NaN; with ``"error"`` a deficient design raises
    :class:`RankDeficiencyError` listing the dependent columns.
    """
    if on_rank_deficiency not in ("error", "drop"):
        raise ValueError(f"unknown rank policy {on_rank_deficiency!r}")
    y = np.asarray(y, dtype=float)
    n, k = x.values.shape
    if y.shape != (n,):
        raise ValueError(f"y must have length {n}, got shape {y.shape}")
    if n < 1:
        raise ValueError("need at least one observation")

    q, r, pivots = scipy.linalg.qr(x.values, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    largest = diag[0] if diag.size else 0.0
    if largest == 0.0:
        rank = 0
    else:
        below = diag <= rank_tol * largest
        rank = int(np.argmax(below)) if below.any() else int(diag.size)

    dropped_idx = pivots[rank:]
    dropped = tuple(x.labels[i] for i in sorted(dropped_idx))
    if dropped and on_rank_deficiency == "error":
        raise RankDeficiencyError(dropped)

    coefficients = np.full(k, np.nan)
    if rank > 0:
        qty = q.T @ y
        beta = scipy.linalg.solve_triangular(r[:rank, :rank], qty[:rank])
        coefficients[pivots[:rank]] = beta
        fitted = x.values[:, pivots[:rank]] @ beta
    else:
        fitted = np.zeros(n)
    residuals = y - fitted

    vcov_classical, vcov_robust = _variance_matrices(x.values, pivots, rank, residuals, r)

    return FitResult(
        coefficients=coefficients,
        labels=x.labels,
        rank=rank,
        dropped_columns=dropped,
        residuals=residuals,
        fitted=fitted,
        n=n,
        vcov_classical=vcov_classical,
        vcov_robust=vcov_robust,
    )


def _variance_matrices(values, pivots, rank, residuals, r):
    n = values.shape[0]
    if rank == 0:
        empty = np.zeros((0, 0))
        return (empty if n > 0 else None), empty

    r_inv = scipy.linalg.solve_triangular(r[:rank, :rank], np.eye(rank))
    xtx_inv_piv = r_inv @ r_inv.T
    # reorder from pivot order to ascending original column order
    order = np.argsort(pivots[:rank])
    xtx_inv = xtx_inv_piv[np.ix_(order, order)]
    retained_cols = values[:, np.sort(pivots[:rank])]

    if n > rank:
        s2 = float(residuals @ residuals) / (n - rank)
        vcov_classical = _symmetrize(s2 * xtx_inv)
    else:
        vcov_classical = None

    weighted = retained_cols * residuals[:, None]
    meat = weighted.T @ weighted
    vcov_robust = _symmetrize(xtx_inv @ meat @ xtx_inv)
    return vcov_classical, vcov_robust


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def vcov(result: FitResult, kind: str = "classical") -> np.ndarray:
    """Coefficient variance matrix over the retained columns.

    ``classical`` is s^2 (X'X)^-1 and needs n > rank; ``robust`` is the
    heteroskedasticity-consistent sandwich with squared-residual weights.
    """
    if kind == "classical":
        if result.vcov_classical is None:
            raise DegreesOfFreedomError(
                f"classical variance needs n > rank, got n={result.n}, rank={result.rank}"
            )
        return result.vcov_classical
    if kind == "robust":
        return result.vcov_robust
    raise ValueError(f"unknown vcov kind {kind!r}")
