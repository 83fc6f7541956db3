"""Utility surface evaluation and grid maximisation over (nu, mu).

The objective combines coverage, the long-run covered area fraction and an
optional mean-latency penalty.  Cells of the search grid are independent
analytic evaluations; a small thread pool may process them concurrently and
an ordered reduction keeps the argmax deterministic either way.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import numpy as np

from .core import (
    EmptyFeasibleSet,
    NetworkParams,
    QuadratureSpec,
    validate,
)
from .analytic import af_limit, coverage_probability, mean_latency

__all__ = [
    "UtilityWeights",
    "GridSpec",
    "SurfaceCell",
    "OptimizeResult",
    "utility",
    "optimize_grid",
    "feasible_domain",
]


@dataclass(frozen=True)
class UtilityWeights:
    """Weights of the aggregate objective w1*p_c + w2*AF - w3*E[W]."""

    w1: float
    w2: float
    w3: float = 0.0
    tau: float = 1.0

    def __post_init__(self) -> None:
        if self.w1 < 0 or self.w2 < 0 or self.w3 < 0:
            raise ValueError("weights must be nonnegative")
        if self.w1 + self.w2 <= 0:
            raise ValueError("at least one of w1, w2 must be positive")
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")


@dataclass(frozen=True)
class GridSpec:
    """Rectangular (nu, mu) search grid, endpoints included."""

    nu_range: tuple[float, float] = (0.1, 1.5)
    mu_range: tuple[float, float] = (0.25, 0.75)
    n_nu: int = 8
    n_mu: int = 4

    def __post_init__(self) -> None:
        for name, (lo, hi) in (("nu_range", self.nu_range), ("mu_range", self.mu_range)):
            if not (0 < lo < hi):
                raise ValueError(f"{name} must satisfy 0 < lo < hi, got ({lo}, {hi})")
        if self.n_nu < 2 or self.n_mu < 2:
            raise ValueError("need at least 2 grid points per axis")

    def nu_values(self) -> np.ndarray:
        return np.linspace(*self.nu_range, self.n_nu)

    def mu_values(self) -> np.ndarray:
        return np.linspace(*self.mu_range, self.n_mu)


@dataclass(frozen=True)
class SurfaceCell:
    """One evaluated grid cell of the utility surface."""

    nu: float
    mu: float
    p_c: float
    af: float
    latency: float
    utility: float
    feasible: bool


@dataclass(frozen=True)
class OptimizeResult:
    nu_opt: float
    mu_opt: float
    value: float
    surface: tuple[SurfaceCell, ...]
    coarse_nu_opt: float
    coarse_mu_opt: float


# Memoised building blocks; NetworkParams and QuadratureSpec are frozen and
# hashable, so repeated weights or refinement passes reuse evaluations.
@lru_cache(maxsize=65536)
def _pc(params: NetworkParams, tau: float, quad: QuadratureSpec) -> float:
    return coverage_probability(params, tau, quad)


@lru_cache(maxsize=65536)
def _af(params: NetworkParams) -> float:
    return af_limit(params)


@lru_cache(maxsize=65536)
def _latency(params: NetworkParams, quad: QuadratureSpec) -> float:
    value = mean_latency(params, quad)
    assert isinstance(value, float)  # default variant always converges
    return value


def utility(
    nu: float,
    mu: float,
    base: NetworkParams,
    weights: UtilityWeights,
    quad: QuadratureSpec = QuadratureSpec(),
) -> float:
    """Aggregate objective at one (nu, mu), other parameters from ``base``."""
    if nu <= 0 or mu <= 0:
        raise ValueError(f"nu and mu must be positive, got ({nu}, {mu})")
    params = validate(replace(base, nu=nu, mu=mu))
    value = 0.0
    if weights.w1 > 0:
        value += weights.w1 * _pc(params, weights.tau, quad)
    if weights.w2 > 0:
        value += weights.w2 * _af(params)
    if weights.w3 > 0:
        value -= weights.w3 * _latency(params, quad)
    return value


def _evaluate_cell(
    nu: float,
    mu: float,
    base: NetworkParams,
    weights: UtilityWeights,
    quad: QuadratureSpec,
    constraint: Optional[float],
) -> SurfaceCell:
    params = replace(base, nu=nu, mu=mu)
    p_c = _pc(params, weights.tau, quad) if weights.w1 > 0 else math.nan
    af = _af(params)
    need_latency = weights.w3 > 0 or constraint is not None
    latency = _latency(params, quad) if need_latency else math.nan
    value = weights.w1 * (p_c if weights.w1 > 0 else 0.0) + weights.w2 * af
    if weights.w3 > 0:
        value -= weights.w3 * latency
    feasible = constraint is None or latency < constraint
    return SurfaceCell(
        nu=nu, mu=mu, p_c=p_c, af=af, latency=latency, utility=value, feasible=feasible
    )


def _argmax(cells: list[SurfaceCell]) -> Optional[SurfaceCell]:
    # strict > over cells ordered by (nu, mu) ascending breaks ties toward
    # the smaller radius, then the smaller density
    best: Optional[SurfaceCell] = None
    for cell in cells:
        if not cell.feasible:
            continue
        if best is None or cell.utility > best.utility:
            best = cell
    return best


def _evaluate_many(
    pairs: list[tuple[float, float]],
    base: NetworkParams,
    weights: UtilityWeights,
    quad: QuadratureSpec,
    constraint: Optional[float],
    threads: int,
) -> list[SurfaceCell]:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(
                pool.map(
                    lambda nm: _evaluate_cell(nm[0], nm[1], base, weights, quad, constraint),
                    pairs,
                )
            )
    return [_evaluate_cell(nu, mu, base, weights, quad, constraint) for nu, mu in pairs]


def optimize_grid(
    base: NetworkParams,
    weights: UtilityWeights,
    grid: GridSpec = GridSpec(),
    constraint: Optional[float] = None,
    quad: QuadratureSpec = QuadratureSpec(),
    refine: bool = True,
    threads: int = 1,
) -> OptimizeResult:
    """Exhaustively maximise the utility over the grid.

    ``constraint`` excludes cells whose mean latency is not strictly below it.
    With ``refine`` the incumbent's neighbourhood is re-searched at half the
    grid step; the reported optimum comes from the union of both passes while
    ``surface`` always holds the full rectangular coarse grid.
    """
    validate(base)
    if constraint is not None and constraint < 0:
        raise ValueError(f"constraint must be >= 0, got {constraint}")
    nus = grid.nu_values()
    mus = grid.mu_values()
    pairs = [(float(nu), float(mu)) for nu in nus for mu in mus]
    cells = _evaluate_many(pairs, base, weights, quad, constraint, threads)
    best = _argmax(cells)
    if best is None:
        raise EmptyFeasibleSet(
            f"no grid cell satisfies mean latency < {constraint}"
        )
    coarse_nu, coarse_mu = best.nu, best.mu

    if refine:
        i = int(np.argmin(np.abs(nus - best.nu)))
        j = int(np.argmin(np.abs(mus - best.mu)))
        nu_lo, nu_hi = nus[max(i - 1, 0)], nus[min(i + 1, len(nus) - 1)]
        mu_lo, mu_hi = mus[max(j - 1, 0)], mus[min(j + 1, len(mus) - 1)]
        fine_pairs = [
            (float(nu), float(mu))
            for nu in np.linspace(nu_lo, nu_hi, 5)
            for mu in np.linspace(mu_lo, mu_hi, 5)
        ]
        fine = _evaluate_many(fine_pairs, base, weights, quad, constraint, threads)
        refined_best = _argmax(sorted(cells + fine, key=lambda c: (c.nu, c.mu)))
        if refined_best is not None:
            best = refined_best

    return OptimizeResult(
        nu_opt=best.nu,
        mu_opt=best.mu,
        value=best.utility,
        surface=tuple(cells),
        coarse_nu_opt=coarse_nu,
        coarse_mu_opt=coarse_mu,
    )


def feasible_domain(
    base: NetworkParams,
    grid: GridSpec,
    constraint: float,
    quad: QuadratureSpec = QuadratureSpec(),
) -> np.ndarray:
    """Boolean mask over (nu, mu) cells with mean latency below the bound."""
    validate(base)
    if constraint <= 0:
        raise ValueError(f"constraint must be > 0, got {constraint}")
    nus = grid.nu_values()
    mus = grid.mu_values()
    mask = np.zeros((len(nus), len(mus)), dtype=bool)
    for i, nu in enumerate(nus):
        for j, mu in enumerate(mus):
            params = replace(base, nu=float(nu), mu=float(mu))
            mask[i, j] = _latency(params, quad) < constraint
    return mask
