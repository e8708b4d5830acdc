"""The convex objective over spending, its derivatives, and feasibility data.

All operations work on a flat vector ``b`` over the market's edge set (in the
market's row-major edge order) plus a per-agent vector ``beta`` holding the
inverse best bang per buck.  Column sums of ``b`` are good prices; row sums
are agent spending.

The objective uses the row/column split form

    Phi(b, beta) = sum_j p_j log p_j - sum_i r_i log beta_i - sum_E b_ij log u_ij

with the convention 0 log 0 = 0.  On balanced points (row sums equal column
sums) this coincides with the entropic form sum_i p_i log(p_i / beta_i) of the
underlying program, and its exact partial derivative in b_ij is
``1 - log(beta_i u_ij / p_j)`` wherever column sums are positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoEdge, ZeroPrice
from .market import BijectiveMarket

__all__ = [
    "SpendState",
    "ProgramConstants",
    "ResidualReport",
    "prices",
    "row_spending",
    "objective",
    "gradient",
    "hessian_quadratic_form",
    "best_beta",
    "feasibility_residuals",
    "estimate_constants",
    "default_row_cap",
]


@dataclass
class SpendState:
    """One iterate: spending over edges and inverse best bang per buck."""

    b: np.ndarray
    beta: np.ndarray


def prices(market: BijectiveMarket, b: np.ndarray) -> np.ndarray:
    """Good prices: column sums of spending, p_j = sum_i b_ij."""
    return np.bincount(market.edge_cols, weights=b, minlength=market.n)


def row_spending(market: BijectiveMarket, b: np.ndarray) -> np.ndarray:
    """Per-agent total spending, r_i = sum_j b_ij."""
    return np.bincount(market.edge_rows, weights=b, minlength=market.n)


def objective(market: BijectiveMarket, b: np.ndarray, beta: np.ndarray) -> float:
    b = np.asarray(b, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if np.any(beta <= 0):
        raise ValueError("beta must be positive")
    p = prices(market, b)
    r = row_spending(market, b)
    plogp = float(np.sum(p[p > 0] * np.log(p[p > 0])))
    return plogp - float(r @ np.log(beta)) - float(b @ market.edge_log_u)


def _check_edge_prices(market: BijectiveMarket, p: np.ndarray) -> None:
    bad = p[market.edge_cols] <= 0
    if np.any(bad):
        raise ZeroPrice(int(market.edge_cols[np.argmax(bad)]))


def gradient(market: BijectiveMarket, b: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Edge-wise partial derivatives ``1 - log(beta_i u_ij / p_j)``."""
    beta = np.asarray(beta, dtype=float)
    if np.any(beta <= 0):
        raise ValueError("beta must be positive")
    p = prices(market, b)
    _check_edge_prices(market, p)
    return (
        1.0
        + np.log(p[market.edge_cols])
        - np.log(beta[market.edge_rows])
        - market.edge_log_u
    )


def hessian_quadratic_form(
    market: BijectiveMarket, b: np.ndarray, z: np.ndarray
) -> float:
    """Curvature along ``z``: sum_j (sum_i z_ij)^2 / p_j.

    Spending variables couple only through shared column sums, so the form
    is a per-good aggregate.  With all prices at least one it is bounded by
    n ||z||^2.
    """
    p = prices(market, b)
    _check_edge_prices(market, p)
    s = np.bincount(market.edge_cols, weights=z, minlength=market.n)
    used = market.in_degree > 0
    return float(np.sum(s[used] ** 2 / p[used]))


def best_beta(market: BijectiveMarket, p: np.ndarray) -> np.ndarray:
    """Per-agent optimum beta_i = min over edges (i, j) of p_j / u_ij.

    This is the largest beta the price constraints allow; since the
    objective is non-increasing in each beta_i it is the exact minimizer
    with spending fixed.
    """
    p = np.asarray(p, dtype=float)
    _check_edge_prices(market, p)
    beta = np.full(market.n, np.inf)
    np.minimum.at(beta, market.edge_rows, p[market.edge_cols] / market.edge_u)
    if np.any(np.isinf(beta)):
        raise NoEdge(int(np.argmax(np.isinf(beta))))
    return beta


@dataclass
class ResidualReport:
    """Worst violation of each constraint family of the feasible set."""

    nonnegativity: float
    row_floor: float
    row_cap: float
    column_floor: float
    balance: float
    balanced_mode: bool

    @property
    def max_residual(self) -> float:
        worst = max(self.nonnegativity, self.row_floor, self.row_cap, self.column_floor)
        if self.balanced_mode:
            worst = max(worst, self.balance)
        return worst

    def feasible(self, tol: float) -> bool:
        return self.max_residual <= tol


def column_floors(market: BijectiveMarket, beta: np.ndarray) -> np.ndarray:
    """Per-good price floors max(1, max_i beta_i u_ij), over goods with buyers.

    Goods without incoming edges carry no price variable and get floor 0.
    The extra floor of one keeps every used price at least one, which the
    curvature bound relies on.
    """
    floors = np.ones(market.n)
    np.maximum.at(floors, market.edge_cols, beta[market.edge_rows] * market.edge_u)
    floors[market.in_degree == 0] = 0.0
    return floors


def feasibility_residuals(
    market: BijectiveMarket,
    b: np.ndarray,
    beta: np.ndarray,
    row_cap: float,
    balanced: bool = True,
) -> ResidualReport:
    """Constraint-family violations of (b, beta) for the given row cap."""
    b = np.asarray(b, dtype=float)
    beta = np.asarray(beta, dtype=float)
    p = prices(market, b)
    r = row_spending(market, b)
    floors = column_floors(market, beta)
    return ResidualReport(
        nonnegativity=float(max(0.0, -b.min())) if b.size else 0.0,
        row_floor=float(max(0.0, (1.0 - r).max())),
        row_cap=float(max(0.0, (r - row_cap).max())),
        column_floor=float(max(0.0, (floors - p).max())),
        balance=float(np.abs(r - p).max()),
        balanced_mode=balanced,
    )


@dataclass
class ProgramConstants:
    """Bounds used by the step-size policies.

    ``smoothness`` caps the Hessian spectrum (equal to n given unit price
    floors); ``gradient_bound`` and ``diameter`` are deliberately loose
    envelopes over the row-capped feasible set, since no tight closed form
    exists.  Compare the trace's ``grad_norm`` column against
    ``gradient_bound`` to see how loose the envelope is on a given run.
    """

    smoothness: float
    gradient_bound: float
    diameter: float
    row_cap: float

    @property
    def eta_admissible(self) -> float:
        """Largest analytically admissible step, smoothness * diameter^2 / gradient_bound^2."""
        return self.smoothness * self.diameter**2 / self.gradient_bound**2


def default_row_cap(market: BijectiveMarket) -> float:
    """Default compactification cap n^2 * max(1, u_max/u_min)."""
    u_max = float(market.edge_u.max())
    u_min = float(market.edge_u.min())
    return market.n**2 * max(1.0, u_max / u_min)


def estimate_constants(
    market: BijectiveMarket, row_cap: float | None = None
) -> ProgramConstants:
    """Conservative envelope constants for the row-capped feasible set.

    Diameter: each agent's row lives in a box of l2 width at most
    row_cap * sqrt(2), summed in quadrature over n rows.  Gradient bound:
    sqrt(|E|) times a worst-case single component, evaluated with prices in
    [1, n * row_cap] and beta in [u_min / (n * row_cap * u_max),
    n * row_cap / u_min].
    """
    if row_cap is None:
        row_cap = default_row_cap(market)
    n = market.n
    u_max = float(market.edge_u.max())
    u_min = float(market.edge_u.min())
    beta_min = u_min / (n * row_cap * u_max)
    worst_component = 1.0 + float(
        np.abs(np.log(row_cap * u_max / (beta_min * market.edge_u))).max()
    )
    gradient_bound = math.sqrt(market.n_edges) * worst_component
    diameter = row_cap * math.sqrt(2.0 * n)
    return ProgramConstants(
        smoothness=float(n),
        gradient_bound=gradient_bound,
        diameter=diameter,
        row_cap=float(row_cap),
    )
