"""
Closed-form SINR per bit, spectral efficiency and transmit-antenna planning.

With ``N_tot = N_t + N_r`` antennas split between the two ends, the upper
bound on the SINR per bit grows with ``N_t`` while the spectral efficiency
``N_r / (2 N_rt)`` shrinks. The planner finds the integer range of ``N_t``
where the bound exceeds ``ln 2`` and the efficiency exceeds a floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .phy import SystemConfig, disturbance_power

LN2 = math.log(2.0)


def to_db(x: float) -> float:
    if x == math.inf:
        return math.inf
    return 10.0 * math.log10(x)


def from_db(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def _check_counts(**counts):
    for name, v in counts.items():
        if v < 1:
            raise ValueError(f"{name} must be at least 1, got {v}")


def sinr_av_b(cfg: SystemConfig) -> float:
    """Average SINR per bit of one received copy (linear)."""
    num = 8 * cfg.sigma_h_sq**2 * cfg.n_t * (cfg.n_t + 1) * 2 * cfg.n_rt
    den = disturbance_power(cfg)
    if den == 0:
        return math.inf
    return num / den


def sinr_av_b_ub(n_t: int, n_r: int, n_rt: int) -> float:
    """Noise-free bound ``2 N_rt (N_t + 1) / (N_r - 1)``; ``inf`` when ``N_r = 1``."""
    _check_counts(n_t=n_t, n_r=n_r, n_rt=n_rt)
    if n_r == 1:
        return math.inf
    return 2 * n_rt * (n_t + 1) / (n_r - 1)


def spectral_efficiency(n_r: int, n_rt: int) -> float:
    """Bits per transmission, ``N_r / (2 N_rt)``."""
    _check_counts(n_r=n_r, n_rt=n_rt)
    return n_r / (2 * n_rt)


def sinr_av_b_combined(cfg: SystemConfig) -> float:
    """Average SINR per bit after averaging the ``N_rt`` copies (linear)."""
    num = 8 * cfg.sigma_h_sq**2 * cfg.n_t * (cfg.n_t * cfg.n_rt + 1) * 2
    den = disturbance_power(cfg)
    if den == 0:
        return math.inf
    return num / den


def combined_ub(n_t: int, n_r: int, n_rt: int) -> float:
    """Large-``N_t N_rt`` approximation ``2 N_rt N_t / (N_r - 1)`` of the
    noise-free combined SINR; ``inf`` when ``N_r = 1``."""
    _check_counts(n_t=n_t, n_r=n_r, n_rt=n_rt)
    if n_r == 1:
        return math.inf
    return 2 * n_rt * n_t / (n_r - 1)


def objective_f(n_t: float, n_tot: int, n_rt: int) -> float:
    """Sum of the SINR bound and the spectral efficiency at a fixed ``N_tot``."""
    if not 1 <= n_t <= n_tot - 2:
        raise ValueError(f"n_t must lie in [1, {n_tot - 2}], got {n_t}")
    return 2 * n_rt * (n_t + 1) / (n_tot - n_t - 1) + (n_tot - n_t) / (2 * n_rt)


def f_stationary_point(n_tot: int, n_rt: int) -> float:
    """Location of the minimum of :func:`objective_f`, ``N_tot - 2 N_rt sqrt(N_tot) - 1``.

    May fall outside the admissible range; callers decide what that means.
    """
    if n_tot < 2:
        raise ValueError(f"n_tot must be at least 2, got {n_tot}")
    return n_tot - 2 * n_rt * math.sqrt(n_tot) - 1


@dataclass(frozen=True)
class PlannerResult:
    n_tot: int
    n_rt: int
    eta_min: float
    n_t_min: int | None
    n_t_max: int | None
    stationary_n_t: float
    feasible: bool
    # Columns over n_t = 1 .. n_tot - 2.
    n_t: np.ndarray = field(repr=False)
    sinr_ub_db: np.ndarray = field(repr=False)
    eta_p: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)

    @property
    def empty(self) -> bool:
        return self.n_t_min is None

    def range(self) -> range:
        if self.empty:
            return range(0)
        return range(self.n_t_min, self.n_t_max + 1)


def plan_antenna_range(n_tot: int, n_rt: int, eta_min: float) -> PlannerResult:
    """Scan ``N_t = 1 .. N_tot - 2`` and return the admissible range.

    ``N_t`` is admissible when the SINR bound exceeds ``ln 2`` and the spectral
    efficiency exceeds ``eta_min`` (both strict). ``feasible`` is False when the
    minimum of the objective falls inside the admissible range and so cannot
    be avoided. An empty range is reported with ``n_t_min = n_t_max = None``.
    """
    if n_tot < 3:
        raise ValueError(f"n_tot must be at least 3, got {n_tot}")
    if not eta_min > 0:
        raise ValueError(f"eta_min must be positive, got {eta_min}")
    _check_counts(n_rt=n_rt)

    n_t = np.arange(1, n_tot - 1)
    n_r = n_tot - n_t
    sinr_ub = 2 * n_rt * (n_t + 1) / (n_r - 1)
    eta = n_r / (2 * n_rt)
    f = sinr_ub + eta
    ok = (sinr_ub > LN2) & (eta > eta_min)
    stationary = f_stationary_point(n_tot, n_rt)

    if ok.any():
        admissible = n_t[ok]
        lo, hi = int(admissible.min()), int(admissible.max())
        feasible = not (lo <= stationary <= hi)
    else:
        lo = hi = None
        feasible = False

    return PlannerResult(
        n_tot=n_tot,
        n_rt=n_rt,
        eta_min=eta_min,
        n_t_min=lo,
        n_t_max=hi,
        stationary_n_t=stationary,
        feasible=feasible,
        n_t=n_t,
        sinr_ub_db=10 * np.log10(sinr_ub),
        eta_p=eta,
        f=f,
    )
