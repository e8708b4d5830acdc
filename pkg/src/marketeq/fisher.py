"""Linear Fisher market baseline solved by proportional response dynamics.

Buyers hold fixed budgets instead of endowment income.  The multiplicative
update reweights each buyer's spending by the utility-per-unit-price of each
good and renormalizes to her budget; it is the budget-simplex analogue of a
gradient step on the market's convex potential and needs no step size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateRow,
    InvalidBudget,
    InvalidInstance,
    NegativeValue,
    NoConvergence,
    NoDesiredGood,
)

__all__ = [
    "FisherMarket",
    "FisherSolution",
    "validate_fisher",
    "fisher_objective",
    "pr_update",
    "fisher_solve",
    "fisher_from_dict",
    "load_fisher",
]


@dataclass
class FisherMarket:
    """Buyers with budgets over unit-supply goods; dense utility matrix."""

    budgets: np.ndarray
    utilities: np.ndarray

    @property
    def n_buyers(self) -> int:
        return self.budgets.size

    @property
    def n_goods(self) -> int:
        return self.utilities.shape[1]


@dataclass
class FisherSolution:
    prices: np.ndarray
    allocations: np.ndarray
    spending: np.ndarray
    iterations: int


def validate_fisher(market: FisherMarket) -> FisherMarket:
    budgets = np.asarray(market.budgets, dtype=float)
    utilities = np.asarray(market.utilities, dtype=float)
    if utilities.ndim != 2 or utilities.shape[0] != budgets.size:
        raise InvalidInstance("utility matrix shape does not match budgets")
    for i, value in enumerate(budgets):
        if value <= 0:
            raise InvalidBudget(i, float(value))
    bad = np.argwhere(utilities < 0)
    if bad.size:
        i, j = bad[0]
        raise NegativeValue("utilities", (int(i), int(j)), float(utilities[i, j]))
    for i in range(budgets.size):
        if not np.any(utilities[i] > 0):
            raise NoDesiredGood(i)
    return FisherMarket(budgets, utilities)


def fisher_objective(market: FisherMarket, b: np.ndarray) -> float:
    """Potential sum_ij b_ij log(p_j / u_ij) with 0 log 0 = 0.

    Spending must live on the positive-utility support.
    """
    b = np.asarray(b, dtype=float)
    support = market.utilities > 0
    if np.any(b[~support] != 0):
        raise ValueError("spending off the positive-utility support")
    p = b.sum(axis=0)
    mask = support & (b > 0)
    cols = np.nonzero(mask)[1]
    return float(np.sum(b[mask] * (np.log(p[cols]) - np.log(market.utilities[mask]))))


def pr_update(market: FisherMarket, b: np.ndarray) -> np.ndarray:
    """One proportional-response step: b'_ij proportional to b_ij u_ij / p_j.

    Row sums are renormalized back to the budgets exactly.
    """
    b = np.asarray(b, dtype=float)
    p = b.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        weights = np.where(p > 0, b * market.utilities / np.where(p > 0, p, 1.0), 0.0)
    z = weights.sum(axis=1)
    if np.any(z <= 0):
        raise DegenerateRow(int(np.argmax(z <= 0)))
    return market.budgets[:, None] * weights / z[:, None]


def fisher_solve(
    market: FisherMarket, tol: float = 1e-10, max_iters: int = 100_000
) -> FisherSolution:
    """Iterate proportional response from the uniform-support start.

    Starts with each budget spread evenly over the buyer's desired goods
    (multiplicative updates never revive a zero entry, so the start must
    cover the support) and stops when prices move less than ``tol`` in sup
    norm.
    """
    market = validate_fisher(market)
    support = (market.utilities > 0).astype(float)
    b = market.budgets[:, None] * support / support.sum(axis=1)[:, None]
    p = b.sum(axis=0)
    delta = np.inf
    for t in range(max_iters):
        b = pr_update(market, b)
        p_next = b.sum(axis=0)
        delta = float(np.abs(p_next - p).max())
        if delta <= tol:
            with np.errstate(divide="ignore", invalid="ignore"):
                x = np.where(p_next > 0, b / np.where(p_next > 0, p_next, 1.0), 0.0)
            return FisherSolution(p_next, x, b, t + 1)
        p = p_next
    raise NoConvergence(max_iters, residual=delta, detail="fisher price change")


def fisher_from_dict(doc: dict) -> FisherMarket:
    """Parse the Fisher JSON schema: ``budgets`` array plus utility triplets."""
    if not isinstance(doc, dict):
        raise InvalidInstance("fisher document must be a JSON object")
    budgets = doc.get("budgets")
    if not isinstance(budgets, list) or not budgets:
        raise InvalidInstance('"budgets" must be a nonempty array')
    for value in budgets:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise InvalidInstance(f"non-numeric budget {value!r}")
    n = len(budgets)
    triplets = doc.get("utilities", [])
    if not isinstance(triplets, list):
        raise InvalidInstance('"utilities" must be a list of triplets')
    n_goods = doc.get("n_goods")
    if n_goods is None:
        n_goods = 1 + max(
            (item[1] for item in triplets if isinstance(item, (list, tuple)) and len(item) == 3),
            default=-1,
        )
    if not isinstance(n_goods, int) or n_goods < 1:
        raise InvalidInstance("cannot infer a positive number of goods")
    utilities = np.zeros((n, n_goods))
    seen = set()
    for item in triplets:
        if not (isinstance(item, (list, tuple)) and len(item) == 3):
            raise InvalidInstance(f"bad utility triplet {item!r}")
        i, j, u = item
        if not (isinstance(i, int) and isinstance(j, int)):
            raise InvalidInstance(f"non-integer index in triplet {item!r}")
        if not (0 <= i < n and 0 <= j < n_goods):
            raise InvalidInstance(f"index {(i, j)} out of range")
        if (i, j) in seen:
            raise InvalidInstance(f"duplicate utility entry {(i, j)}")
        seen.add((i, j))
        if not isinstance(u, (int, float)) or isinstance(u, bool):
            raise InvalidInstance(f"non-numeric utility in triplet {item!r}")
        if u < 0:
            raise NegativeValue("utilities", (i, j), float(u))
        utilities[i, j] = float(u)
    return FisherMarket(np.asarray(budgets, dtype=float), utilities)


def load_fisher(path) -> FisherMarket:
    with open(path, "r", encoding="utf-8") as fh:
        return fisher_from_dict(json.load(fh))
