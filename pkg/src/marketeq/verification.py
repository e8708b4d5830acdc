"""Equilibrium certificates: allocations, clearance, budgets, buyer optimality.

A state certifies as an equilibrium when every good is fully sold, every
agent's spending matches her income, every purchase is at the agent's best
bang per buck, and the program objective (whose optimum is zero) is small.
All checks are residuals; ``passed`` compares them to a single tolerance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ZeroPrice
from .market import BijectiveMarket, LiftedSolution, MarketInstance
from .program import SpendState, best_beta, objective, prices, row_spending

__all__ = [
    "EquilibriumCertificate",
    "ArrowDebreuCertificate",
    "allocations",
    "check_clearance",
    "check_budget_balance",
    "check_buyer_optimality",
    "certify",
    "certify_arrow_debreu",
    "certificate_to_dict",
]

DEFAULT_SUPPORT_EPS = 1e-8


@dataclass
class EquilibriumCertificate:
    """Residuals of all equilibrium conditions at one state."""

    prices: np.ndarray
    allocations: np.ndarray
    clearance_residual: float
    budget_residual: float
    optimality_gap: float
    objective_value: float
    epsilon: float
    passed: bool


@dataclass
class ArrowDebreuCertificate:
    """Residuals of a lifted solution checked against the original market."""

    prices: np.ndarray
    allocations: np.ndarray
    clearance_residual: float
    budget_residual: float
    optimality_gap: float
    epsilon: float
    passed: bool


def allocations(spending: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Allocations x_ij = b_ij / p_j; zero columns must carry no spending."""
    spending = np.asarray(spending, dtype=float)
    p = np.asarray(p, dtype=float)
    zero = p <= 0
    if np.any(zero & (np.abs(spending).sum(axis=0) > 0)):
        raise ZeroPrice(int(np.argmax(zero & (np.abs(spending).sum(axis=0) > 0))))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(zero[None, :], 0.0, spending / np.where(zero, 1.0, p)[None, :])


def check_clearance(x: np.ndarray) -> float:
    """Worst deviation of a good's total allocation from its unit supply."""
    return float(np.abs(np.asarray(x).sum(axis=0) - 1.0).max())


def check_budget_balance(x: np.ndarray, p: np.ndarray) -> float:
    """Worst relative gap between an agent's income p_i and her spending."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    spent = x @ p
    return float((np.abs(p - spent) / np.where(p > 0, p, 1.0)).max())


def check_buyer_optimality(
    x: np.ndarray,
    p: np.ndarray,
    u: np.ndarray,
    support_eps: float = DEFAULT_SUPPORT_EPS,
) -> float:
    """Worst relative bang-per-buck shortfall over supported purchases.

    For each agent, over goods bought beyond ``support_eps``, measure how far
    u_ij / p_j falls short of the agent's best ratio, relative to that best.
    The ratio form makes the gap invariant under rescaling any one agent's
    utility row.  Agents with empty support contribute zero.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        bang = np.where(p[None, :] > 0, u / p[None, :], np.inf)
        bang = np.where(u > 0, bang, 0.0)
    best = bang.max(axis=1)
    supported = x > support_eps
    gap = np.zeros_like(x)
    positive = best > 0
    gap[positive, :] = (best[positive, None] - bang[positive, :]) / best[positive, None]
    gap = np.where(supported, gap, 0.0)
    return float(gap.max(initial=0.0))


def certify(
    state: SpendState,
    market: BijectiveMarket,
    eps: float,
    support_eps: float = DEFAULT_SUPPORT_EPS,
) -> EquilibriumCertificate:
    """Assemble all residuals for a spending state on a bijective market.

    The objective is evaluated at the per-agent optimal beta for the state's
    prices, not at the iterate's beta, so the certificate is a property of
    the spending alone.
    """
    b = np.asarray(state.b, dtype=float)
    if b.shape != (market.n_edges,) or np.asarray(state.beta).shape != (market.n,):
        raise ValueError(
            f"state of shape {b.shape}/{np.asarray(state.beta).shape} does not "
            f"match market with {market.n_edges} edges and {market.n} agents"
        )
    p = prices(market, b)
    spending = market.spend_matrix(b)
    x = allocations(spending, p)
    usable = not np.any((p <= 0) & (market.in_degree > 0))
    if usable:
        obj = objective(market, b, best_beta(market, p))
    else:
        obj = math.inf
    clearance = check_clearance(x)
    budget = check_budget_balance(x, p)
    gap = check_buyer_optimality(x, p, market.utility_matrix(), support_eps)
    passed = (
        clearance <= eps and budget <= eps and gap <= eps and obj <= eps
    )
    return EquilibriumCertificate(
        prices=p,
        allocations=x,
        clearance_residual=clearance,
        budget_residual=budget,
        optimality_gap=gap,
        objective_value=float(obj),
        epsilon=eps,
        passed=passed,
    )


def certify_arrow_debreu(
    instance: MarketInstance,
    lifted: LiftedSolution,
    eps: float,
    support_eps: float = DEFAULT_SUPPORT_EPS,
) -> ArrowDebreuCertificate:
    """Check a lifted solution against the original (validated) market.

    Clearance and optimality run over endowed goods only; a good nobody owns
    has no supply and no price.  Budgets compare each agent's spending with
    the value of her endowment at the lifted prices.
    """
    q = lifted.prices
    endowed = np.zeros(instance.n_goods, dtype=bool)
    endowment = np.zeros((instance.n_agents, instance.n_goods))
    for (i, j), w in instance.endowments.items():
        endowed[j] = True
        endowment[i, j] = w
    utility = np.zeros((instance.n_agents, instance.n_goods))
    for (i, j), u in instance.utilities.items():
        utility[i, j] = u

    clearance = float(
        np.abs(lifted.allocations[:, endowed].sum(axis=0) - 1.0).max()
    )
    income = endowment @ q
    spent = lifted.spending.sum(axis=1)
    budget = float((np.abs(income - spent) / np.where(income > 0, income, 1.0)).max())
    gap = check_buyer_optimality(
        lifted.allocations[:, endowed],
        q[endowed],
        utility[:, endowed],
        support_eps,
    )
    passed = clearance <= eps and budget <= eps and gap <= eps
    return ArrowDebreuCertificate(
        prices=q,
        allocations=lifted.allocations,
        clearance_residual=clearance,
        budget_residual=budget,
        optimality_gap=gap,
        epsilon=eps,
        passed=passed,
    )


def certificate_to_dict(cert) -> dict:
    doc = {
        "passed": bool(cert.passed),
        "epsilon": cert.epsilon,
        "clearance_residual": cert.clearance_residual,
        "budget_residual": cert.budget_residual,
        "optimality_gap": cert.optimality_gap,
        "prices": [float(v) for v in cert.prices],
        "allocations": [[float(v) for v in row] for row in cert.allocations],
    }
    if isinstance(cert, EquilibriumCertificate):
        doc["objective_value"] = cert.objective_value
    return doc


def write_certificate(cert, path, extra: dict | None = None) -> None:
    doc = certificate_to_dict(cert)
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
