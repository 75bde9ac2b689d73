"""Translate fitted coefficients into causal effect estimates.

For a unit with f friends, the estimands are the baseline level E(Y^00|F=f),
the direct effect delta_0(f) of own treatment at zero treated friends, the
spillover level effect tau_0t(f) of t treated friends on an untreated unit,
and the net interaction effect tau_pm_t(f). The remaining two estimands
follow from the identities

    tau_1t(f) = tau_0t(f) + tau_pm_t(f),
    delta_t(f) = delta_0(f) + tau_pm_t(f),

so every effect table closes exactly. Each estimator maps its coefficients
into these quantities differently; empty or dropped cells yield absent
entries (never zeros) and are skipped by the aggregates with a logged
warning.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .dgp import SampleFrame
from .design import ModelKind, ModelSpec, format_model_spec
from .lsq import FitResult

logger = logging.getLogger(__name__)


def complete_effects(delta0: float, tau0: float, tau_pm: float) -> tuple[float, float]:
    """Complete (tau1, delta_t) from the identity-closing decomposition."""
    return tau0 + tau_pm, delta0 + tau_pm


def telescope_level_from_changes(changes) -> float:
    """Sum per-step change effects s = 1..t into the level effect at t.

    The change effect at step s compares s treated friends against s - 1;
    telescoping the steps recovers the level effect relative to zero.
    """
    values = list(changes)
    if not values:
        raise ValueError("changes must be nonempty")
    return float(sum(values))


@dataclass(frozen=True)
class EffectCell:
    """Effect estimates at one (f, t); None marks an absent (not zero) entry."""

    f: int
    t: int
    delta0: float | None
    tau0: float | None
    tau_pm: float | None
    tau1: float | None
    delta_t: float | None
    baseline: float | None


@dataclass(frozen=True)
class EffectAggregates:
    """Frame-weighted aggregate effects; None when no cell was available."""

    direct: float | None
    network: float | None
    interaction: float | None


@dataclass(frozen=True)
class EffectTable:
    cells: tuple[EffectCell, ...]
    aggregates: EffectAggregates
    model: str

    CSV_COLUMNS = ("f", "t", "delta0", "tau0", "tau_pm", "tau1", "delta_t", "baseline")

    def cell(self, f: int, t: int) -> EffectCell:
        for c in self.cells:
            if c.f == f and c.t == t:
                return c
        raise KeyError(f"no cell for (f={f}, t={t})")

    def to_csv_text(self) -> str:
        lines = [",".join(self.CSV_COLUMNS)]
        for c in self.cells:
            row = [str(c.f), str(c.t)]
            for name in self.CSV_COLUMNS[2:]:
                value = getattr(c, name)
                row.append("" if value is None else format(value, ".17g"))
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "model": self.model,
            "aggregates": {
                "direct": self.aggregates.direct,
                "network": self.aggregates.network,
                "interaction": self.aggregates.interaction,
            },
            "cells": [
                {name: getattr(c, name) for name in self.CSV_COLUMNS}
                for c in self.cells
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


class _CoefficientMissing(Exception):
    pass


def _require(fit: FitResult, label: str) -> float:
    if label not in fit.labels:
        raise _CoefficientMissing(label)
    value = fit.coef(label)
    if value is None:
        raise _CoefficientMissing(label)
    return value


def _poly(fit: FitResult, prefix: str, j_max: int, f: float) -> float:
    total = 0.0
    for j in range(j_max + 1):
        total += _require(fit, f"{prefix}F^{j}") * f**j
    return total


def _delta0(fit: FitResult, spec: ModelSpec, f: int) -> float:
    kind = spec.kind
    if kind in (ModelKind.T, ModelKind.R, ModelKind.TR):
        return _require(fit, "D")
    if kind == ModelKind.CRF2:
        return _poly(fit, "D:", spec.j, f)
    if kind == ModelKind.CRF1_LONG:
        return _require(fit, f"D:F={f}")
    if kind == ModelKind.CRF1_SHORT:
        if f != spec.f:
            raise _CoefficientMissing(f"F={f}")
        return _require(fit, "D")
    raise ValueError(f"unsupported model kind {kind}")  # pragma: no cover


def _tau0(fit: FitResult, spec: ModelSpec, f: int, t: int) -> float:
    kind = spec.kind
    if kind == ModelKind.T:
        return _require(fit, "T") * t
    if kind == ModelKind.R:
        return (_require(fit, "R") / f) * t
    if kind == ModelKind.TR:
        return (_require(fit, "T") + _require(fit, "R") / f) * t
    if kind == ModelKind.CRF2:
        value = _poly(fit, "T:", spec.j, f) * t
        if spec.t_order == 2:
            value += _poly(fit, "T^2:", spec.j, f) * t**2
        return value
    if kind == ModelKind.CRF1_LONG:
        return _require(fit, f"T={t}:F={f}")
    if kind == ModelKind.CRF1_SHORT:
        if f != spec.f:
            raise _CoefficientMissing(f"F={f}")
        return _require(fit, f"T={t}")
    raise ValueError(f"unsupported model kind {kind}")  # pragma: no cover


def _tau_pm(fit: FitResult, spec: ModelSpec, f: int, t: int) -> float:
    kind = spec.kind
    if kind in (ModelKind.T, ModelKind.R):
        # these designs rule the interaction out by construction
        return 0.0
    if kind == ModelKind.TR:
        return (_require(fit, "D:T") + _require(fit, "D:R") / f) * t
    if kind == ModelKind.CRF2:
        value = _poly(fit, "D:T:", spec.j, f) * t
        if spec.t_order == 2:
            value += _poly(fit, "D:T^2:", spec.j, f) * t**2
        return value
    if kind == ModelKind.CRF1_LONG:
        return _require(fit, f"D:T={t}:F={f}")
    if kind == ModelKind.CRF1_SHORT:
        if f != spec.f:
            raise _CoefficientMissing(f"F={f}")
        return _require(fit, f"D:T={t}")
    raise ValueError(f"unsupported model kind {kind}")  # pragma: no cover


def _baseline(fit: FitResult, spec: ModelSpec, f: int) -> float:
    kind = spec.kind
    if kind in (ModelKind.T, ModelKind.TR):
        return _require(fit, "1") + _require(fit, "F") * f
    if kind == ModelKind.R:
        return _require(fit, "1")
    if kind == ModelKind.CRF2:
        return _poly(fit, "", spec.j, f)
    if kind == ModelKind.CRF1_LONG:
        return _require(fit, f"F={f}")
    if kind == ModelKind.CRF1_SHORT:
        if f != spec.f:
            raise _CoefficientMissing(f"F={f}")
        return _require(fit, "1")
    raise ValueError(f"unsupported model kind {kind}")  # pragma: no cover


def _maybe(func, *args) -> float | None:
    try:
        return func(*args)
    except _CoefficientMissing:
        return None


def recover_effect_table(
    fit: FitResult,
    spec: ModelSpec,
    f_values,
    t_grid=None,
) -> EffectTable:
    """Build the effect table implied by a fit.

    ``f_values`` is the realized friend-count column of the analyzed frame
    (with multiplicity); unique values define the table rows and the
    multiplicities weight the aggregates. ``t_grid`` restricts the treated
    friend counts tabulated per f (default 1..f). Aggregates average the
    per-unit effect functions evaluated at one treated friend over the
    empirical f distribution, skipping absent cells with a warning.
    """
    f_values = np.asarray(f_values, dtype=np.int64)
    if f_values.size == 0:
        raise ValueError("f_values must be nonempty")
    if (f_values < 1).any():
        raise ValueError("all f_values must be >= 1")
    unique_f, counts = np.unique(f_values, return_counts=True)

    cells = []
    for f in unique_f:
        ts = [t for t in (t_grid if t_grid is not None else range(1, int(f) + 1)) if 1 <= t <= f]
        for t in ts:
            delta0 = _maybe(_delta0, fit, spec, int(f))
            tau0 = _maybe(_tau0, fit, spec, int(f), int(t))
            tau_pm = _maybe(_tau_pm, fit, spec, int(f), int(t))
            baseline = _maybe(_baseline, fit, spec, int(f))
            if tau0 is not None and tau_pm is not None and delta0 is not None:
                tau1, delta_t = complete_effects(delta0, tau0, tau_pm)
            else:
                tau1 = None if tau0 is None or tau_pm is None else tau0 + tau_pm
                delta_t = None if delta0 is None or tau_pm is None else delta0 + tau_pm
            cells.append(EffectCell(int(f), int(t), delta0, tau0, tau_pm, tau1, delta_t, baseline))

    direct = _weighted_aggregate(lambda f: _delta0(fit, spec, f), unique_f, counts, "direct")
    network = _weighted_aggregate(lambda f: _tau0(fit, spec, f, 1), unique_f, counts, "network")
    interaction = _weighted_aggregate(lambda f: _tau_pm(fit, spec, f, 1), unique_f, counts,
                                      "interaction")

    return EffectTable(
        cells=tuple(cells),
        aggregates=EffectAggregates(direct=direct, network=network, interaction=interaction),
        model=format_model_spec(spec),
    )


def _weighted_aggregate(evaluate, unique_f, counts, name) -> float | None:
    """Average one effect function at t = 1 over the empirical f distribution."""
    total = 0.0
    weight = 0
    skipped = 0
    for f, count in zip(unique_f, counts):
        try:
            value = evaluate(int(f))
        except _CoefficientMissing:
            skipped += int(count)
            continue
        total += value * count
        weight += int(count)
    if skipped:
        logger.warning(
            "aggregate %s effect skipped %d of %d units with absent cells",
            name, skipped, skipped + weight,
        )
    if weight == 0:
        return None
    return float(total / weight)


@dataclass(frozen=True)
class CellMeans:
    """Mean outcome and count per occupied (d, t, f) cell."""

    stats: dict = field(default_factory=dict)

    def mean(self, d: int, t: int, f: int) -> float:
        return self.stats[(d, t, f)][0]

    def count(self, d: int, t: int, f: int) -> int:
        return self.stats[(d, t, f)][1]

    def __contains__(self, key) -> bool:
        return key in self.stats

    def items(self):
        return self.stats.items()


def cell_means(frame: SampleFrame) -> CellMeans:
    """Arithmetic mean outcome per occupied (d, t, f) cell."""
    if frame.n_selected == 0:
        raise ValueError("frame must be nonempty")
    stats: dict[tuple[int, int, int], tuple[float, int]] = {}
    keys = np.stack([frame.d, frame.t, frame.f], axis=1)
    unique_keys, inverse = np.unique(keys, axis=0, return_inverse=True)
    for idx, key in enumerate(unique_keys):
        mask = inverse == idx
        stats[tuple(int(v) for v in key)] = (float(frame.y[mask].mean()), int(mask.sum()))
    return CellMeans(stats=stats)
