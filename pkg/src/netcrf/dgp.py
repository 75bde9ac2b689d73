"""Outcome simulation under randomized treatment on a network.

The outcome of a unit with f friends, own treatment d, and t treated friends is

    y = beta0 + beta_f*f + (beta_d + beta_f2*ln f)*d
        + (beta_tau + beta_r/f + beta_f2*ln f)*t
        + (beta_dtau + beta_dr/f + beta_f2*ln f)*d*t + u,

with u ~ Normal(0, noise_sd) drawn independently of (d, t, f). Four named
scenarios toggle the heterogeneity coefficients so that the count-based,
ratio-based, both, or neither of the linear estimators is correctly
specified. Estimation frames keep only units with f >= 1.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .graph import Network, treated_neighbor_counts
from .rng import child_seeds, rng_from_seed

SCENARIO_IDS = ("i", "ii", "iii", "iv")


@dataclass(frozen=True)
class DgpParams:
    """Coefficients of the simulated outcome equation."""

    beta0: float = 0.0
    beta_f: float = 0.0
    beta_d: float = 0.0
    beta_f2: float = 0.0
    beta_tau: float = 0.0
    beta_r: float = 0.0
    beta_dtau: float = 0.0
    beta_dr: float = 0.0
    noise_sd: float = 1.0
    p_treat: float = 0.5

    def __post_init__(self):
        if self.noise_sd < 0:
            raise ValueError(f"noise_sd must be >= 0, got {self.noise_sd}")
        if not 0.0 < self.p_treat < 1.0:
            raise ValueError(f"p_treat must be in (0, 1), got {self.p_treat}")


@dataclass(frozen=True)
class SampleFrame:
    """Per-unit rows (y, d, t, f) restricted to f >= 1.

    ``ids`` keeps the original unit indices so emitted files can be traced
    back to the simulated population; ``n_total`` is the population size
    before the f > 0 selection.
    """

    y: np.ndarray
    d: np.ndarray
    t: np.ndarray
    f: np.ndarray
    ids: np.ndarray
    n_total: int

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        d = np.asarray(self.d, dtype=np.int64)
        t = np.asarray(self.t, dtype=np.int64)
        f = np.asarray(self.f, dtype=np.int64)
        ids = np.asarray(self.ids, dtype=np.int64)
        n = y.shape[0]
        for name, arr in (("d", d), ("t", t), ("f", f), ("ids", ids)):
            if arr.shape != (n,):
                raise ValueError(f"{name} must have length {n}")
        if n:
            if not np.isin(d, (0, 1)).all():
                raise ValueError("d entries must be 0 or 1")
            if (f < 1).any():
                raise ValueError("frames only contain units with f >= 1")
            if ((t < 0) | (t > f)).any():
                raise ValueError("t must satisfy 0 <= t <= f")
        if n > self.n_total:
            raise ValueError("n_selected cannot exceed n_total")
        for name, arr in (("y", y), ("d", d), ("t", t), ("f", f), ("ids", ids)):
            object.__setattr__(self, name, arr)

    @property
    def n_selected(self) -> int:
        return int(self.y.shape[0])

    def restrict_to_f(self, value: int) -> "SampleFrame":
        """Subframe of rows with f equal to ``value``."""
        mask = self.f == value
        return SampleFrame(
            y=self.y[mask], d=self.d[mask], t=self.t[mask], f=self.f[mask],
            ids=self.ids[mask], n_total=self.n_total,
        )


@dataclass(frozen=True)
class PotentialOutcomeGrid:
    """Full y[d][t] grid per retained unit, sharing one noise draw per unit.

    ``values[i]`` has shape (2, f_i + 1): row 0 holds the untreated-unit
    outcomes for t = 0..f_i, row 1 the treated-unit outcomes.
    """

    f: np.ndarray
    u: np.ndarray
    values: tuple[np.ndarray, ...]

    def value(self, i: int, d: int, t: int) -> float:
        grid = self.values[i]
        if d not in (0, 1):
            raise ValueError("d must be 0 or 1")
        if not 0 <= t < grid.shape[1]:
            raise ValueError(f"t must be in [0, {grid.shape[1] - 1}] for unit {i}")
        return float(grid[d, t])

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class TrueEffects:
    """Aggregate direct, network, and interaction effects implied by a design."""

    direct: float
    network: float
    interaction: float


def dgp_scenario(scenario: str, **overrides) -> DgpParams:
    """Preset parameters for scenario ``i``, ``ii``, ``iii``, or ``iv``.

    All presets share beta0=0, beta_f=-2, beta_d=2, noise_sd=1, p_treat=0.5;
    keyword overrides replace any field.
    """
    base = dict(beta0=0.0, beta_f=-2.0, beta_d=2.0, noise_sd=1.0, p_treat=0.5)
    presets = {
        "i": dict(beta_tau=0.2),
        "ii": dict(beta_r=2.0),
        "iii": dict(beta_tau=0.2, beta_r=2.0, beta_dtau=0.2, beta_dr=2.0),
        "iv": dict(beta_f2=0.4, beta_tau=0.2, beta_r=2.0, beta_dtau=0.2, beta_dr=2.0),
    }
    if scenario not in presets:
        raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIO_IDS}")
    params = DgpParams(**base, **presets[scenario])
    return replace(params, **overrides) if overrides else params


def assign_treatment(n: int, p_treat: float, seed: int) -> np.ndarray:
    """Draw n i.i.d. Bernoulli(p_treat) treatment indicators, deterministic per seed."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not 0.0 < p_treat < 1.0:
        raise ValueError(f"p_treat must be in (0, 1), got {p_treat}")
    rng = rng_from_seed(seed)
    return (rng.random(n) < p_treat).astype(np.int64)


def count_treated_neighbors(network: Network, d: np.ndarray) -> np.ndarray:
    """T_i = number of treated friends of unit i; satisfies 0 <= T_i <= F_i."""
    return treated_neighbor_counts(network, d)


def _outcome_mean(params: DgpParams, f, d, t):
    f = np.asarray(f, dtype=float)
    log_f = np.log(f)
    return (
        params.beta0
        + params.beta_f * f
        + (params.beta_d + params.beta_f2 * log_f) * d
        + (params.beta_tau + params.beta_r / f + params.beta_f2 * log_f) * t
        + (params.beta_dtau + params.beta_dr / f + params.beta_f2 * log_f) * d * t
    )


def potential_outcome(params: DgpParams, f: int, d: int, t: int, u: float) -> float:
    """Outcome of one unit with f friends, own treatment d, t treated friends, noise u."""
    if f < 1:
        raise ValueError(f"f must be >= 1, got {f}")
    if d not in (0, 1):
        raise ValueError(f"d must be 0 or 1, got {d}")
    if not 0 <= t <= f:
        raise ValueError(f"t must satisfy 0 <= t <= f, got t={t}, f={f}")
    return float(_outcome_mean(params, f, d, t) + u)


def simulate_frame(
    network: Network,
    params: DgpParams,
    seed: int,
    track_grid: bool = False,
):
    """Simulate treatments and outcomes on a network; keep units with F > 0.

    Returns a :class:`SampleFrame`, or a ``(frame, grid)`` pair when
    ``track_grid`` is set. The tracked grid evaluates every (d, t) cell of a
    unit with the same realized noise draw, so the realized outcome equals
    the grid value at the realized (d, t).
    """
    if network.n < 1:
        raise ValueError("network must contain at least one unit")
    seed_d, seed_u = child_seeds(seed, 0, 2)
    d = assign_treatment(network.n, params.p_treat, seed_d)
    t = count_treated_neighbors(network, d)
    u = rng_from_seed(seed_u).normal(0.0, params.noise_sd, size=network.n)

    retained = network.degree > 0
    f_sel = network.degree[retained]
    d_sel = d[retained]
    t_sel = t[retained]
    u_sel = u[retained]
    y_sel = _outcome_mean(params, f_sel, d_sel, t_sel) + u_sel

    frame = SampleFrame(
        y=y_sel, d=d_sel, t=t_sel, f=f_sel,
        ids=np.flatnonzero(retained), n_total=network.n,
    )
    if not track_grid:
        return frame

    grids = []
    for fi, ui in zip(f_sel, u_sel):
        ts = np.arange(fi + 1)
        grid = np.vstack([
            _outcome_mean(params, float(fi), 0, ts) + ui,
            _outcome_mean(params, float(fi), 1, ts) + ui,
        ])
        grids.append(grid)
    return frame, PotentialOutcomeGrid(f=f_sel.copy(), u=u_sel.copy(), values=tuple(grids))


def true_aggregate_effects(params: DgpParams, f_values) -> TrueEffects:
    """Average the three per-friend effect functions over realized friend counts.

    direct:       E[beta_d + beta_f2*ln F]
    network:      E[beta_tau + beta_r/F + beta_f2*ln F]
    interaction:  E[beta_dtau + beta_dr/F + beta_f2*ln F]
    """
    f = np.asarray(f_values, dtype=float)
    if f.size == 0:
        raise ValueError("f_values must be nonempty")
    if (f < 1).any():
        raise ValueError("all f_values must be >= 1")
    log_f = np.log(f)
    return TrueEffects(
        direct=float(np.mean(params.beta_d + params.beta_f2 * log_f)),
        network=float(np.mean(params.beta_tau + params.beta_r / f + params.beta_f2 * log_f)),
        interaction=float(np.mean(params.beta_dtau + params.beta_dr / f + params.beta_f2 * log_f)),
    )
