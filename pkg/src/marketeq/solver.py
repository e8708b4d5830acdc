"""The alternating solver: projected gradient on spending, closed-form beta update.

Each iteration takes one projected gradient step on the spending variables
with beta held fixed, then resets every beta_i to the largest value the new
prices allow (the per-agent optimum).  The second step can never increase the
objective; the first is a plain projected-gradient step whose step size comes
from one of three policies.

The run stops when the objective reaches ``objective_tol`` (its optimum is
zero on feasible instances), when progress stalls for a window of iterations,
or at the iteration cap.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import verification
from .errors import CapBindingWarning, NonPositiveEta, StepSizeWarning
from .market import BijectiveMarket, require_condition_star
from .program import (
    ProgramConstants,
    SpendState,
    best_beta,
    default_row_cap,
    estimate_constants,
    feasibility_residuals,
    gradient,
    objective,
    prices,
    row_spending,
)
from .projection import BalanceProjector, FeasibleSetSpec, project

__all__ = [
    "SolverConfig",
    "TraceRow",
    "IterationTrace",
    "SolveResult",
    "eta_from_policy",
    "initialize",
    "step_gradient",
    "step_beta",
    "solve",
]

ETA_POLICIES = ("paper_bound", "smoothness", "fixed")

TRACE_COLUMNS = (
    "iter",
    "obj_pre",
    "obj_post_grad",
    "obj_post_beta",
    "grad_norm",
    "step_norm",
    "max_residual",
    "cap_binding",
)


@dataclass
class SolverConfig:
    """Run parameters; defaults give a deterministic, monotone configuration.

    ``eta`` is only consulted by the ``fixed`` policy.  ``seed`` is reserved
    for perturbation experiments; the default initializer is deterministic
    and ignores it.
    """

    eta: float | None = None
    eta_policy: str = "smoothness"
    max_iters: int = 50_000
    objective_tol: float = 1e-8
    stall_tol: float = 1e-12
    stall_window: int = 50
    row_cap: float | None = None
    projection_tol: float = 1e-10
    projection_max_cycles: int = 100_000
    balanced: bool = True
    cert_eps: float = 1e-4
    seed: int | None = None

    def validate(self) -> "SolverConfig":
        if self.eta_policy not in ETA_POLICIES:
            raise ValueError(f"unknown eta policy {self.eta_policy!r}")
        for name in ("objective_tol", "stall_tol", "projection_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 0 or self.stall_window < 1:
            raise ValueError("bad iteration limits")
        return self


@dataclass
class TraceRow:
    iteration: int
    obj_pre: float
    obj_post_grad: float
    obj_post_beta: float
    grad_norm: float
    step_norm: float
    max_residual: float
    cap_binding: bool
    decrease_triggered: bool
    decrease_ok: bool


@dataclass
class IterationTrace:
    """Per-iteration diagnostics plus run metadata.

    ``meta`` records the step size, policy, envelope constants, and the
    sufficient-decrease audit thresholds, so a trace is self-describing.
    """

    rows: list[TraceRow] = field(default_factory=list)
    termination: str = "max_iters"
    meta: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.rows)

    def write_csv(self, path) -> None:
        """One row per iteration, floats at 17 significant digits.

        Under the ``paper_bound`` policy an extra ``sufficient_decrease_ok``
        column reports the per-iteration audit: 1 pass, 0 fail, -1 when the
        objective gap never triggered the guarantee.
        """
        audit = self.meta.get("eta_policy") == "paper_bound"
        header = ",".join(TRACE_COLUMNS + (("sufficient_decrease_ok",) if audit else ()))
        lines = [header]
        for row in self.rows:
            cells = [str(row.iteration)]
            cells += [
                format(value, ".17g")
                for value in (
                    row.obj_pre,
                    row.obj_post_grad,
                    row.obj_post_beta,
                    row.grad_norm,
                    row.step_norm,
                    row.max_residual,
                )
            ]
            cells.append(str(int(row.cap_binding)))
            if audit:
                cells.append(
                    str(int(row.decrease_ok)) if row.decrease_triggered else "-1"
                )
            lines.append(",".join(cells))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


@dataclass
class SolveResult:
    state: SpendState
    certificate: "verification.EquilibriumCertificate"
    trace: IterationTrace


def eta_from_policy(constants: ProgramConstants, config: SolverConfig) -> float:
    """Resolve the step size.

    ``paper_bound`` uses the admissible analytical bound
    smoothness * diameter^2 / gradient_bound^2; ``smoothness`` additionally
    caps it at 1/(2 * smoothness), which guarantees monotone descent
    everywhere; ``fixed`` takes the configured value and warns when it
    exceeds the analytical bound.
    """
    bound = constants.eta_admissible
    if config.eta_policy == "paper_bound":
        eta = bound
    elif config.eta_policy == "smoothness":
        eta = min(bound, 1.0 / (2.0 * constants.smoothness))
    else:
        eta = config.eta if config.eta is not None else 0.0
        if eta > bound:
            warnings.warn(
                f"fixed step {eta} exceeds the admissible bound {bound}",
                StepSizeWarning,
                stacklevel=2,
            )
    if not eta > 0:
        raise NonPositiveEta(eta)
    return float(eta)


def initialize(market: BijectiveMarket, config: SolverConfig | None = None) -> SpendState:
    """Deterministic starting point inside the feasible set.

    Spreads a common row total c uniformly over each agent's edges, with c
    just large enough that every row and column sum reaches one; beta then
    starts at its per-agent optimum.  In balanced mode the point is projected
    onto the balance subspace (with the floors) and beta recomputed.
    """
    config = (config or SolverConfig()).validate()
    require_condition_star(market)
    degree = market.out_degree
    weight = np.bincount(
        market.edge_cols, weights=1.0 / degree[market.edge_rows], minlength=market.n
    )
    used = market.in_degree > 0
    c = max(1.0, float((1.0 / weight[used]).max()))
    b = c / degree[market.edge_rows].astype(float)
    beta = best_beta(market, prices(market, b))
    if config.balanced:
        row_cap = config.row_cap if config.row_cap is not None else default_row_cap(market)
        spec = FeasibleSetSpec.from_beta(market, beta, row_cap, balanced=True)
        b = project(b, spec, config.projection_tol, config.projection_max_cycles)
        beta = best_beta(market, prices(market, b))
    return SpendState(b, beta)


def step_gradient(
    market: BijectiveMarket,
    state: SpendState,
    config: SolverConfig,
    eta: float | None = None,
    balance: BalanceProjector | None = None,
) -> np.ndarray:
    """One projected gradient step on spending, beta held fixed."""
    row_cap = config.row_cap if config.row_cap is not None else default_row_cap(market)
    if eta is None:
        eta = eta_from_policy(estimate_constants(market, row_cap), config)
    spec = FeasibleSetSpec.from_beta(
        market, state.beta, row_cap, balanced=config.balanced, balance=balance
    )
    raw = state.b - eta * gradient(market, state.b, state.beta)
    return project(raw, spec, config.projection_tol, config.projection_max_cycles)


def step_beta(
    market: BijectiveMarket, b: np.ndarray, beta_prev: np.ndarray | None = None
) -> np.ndarray:
    """Per-agent optimal beta for the new prices.

    When the previous beta is supplied, the result is clamped to never fall
    below it componentwise: with exact arithmetic the new optimum dominates
    the old feasible value, so the clamp only absorbs the projection's
    last-digit feasibility slack and keeps the beta step exactly monotone.
    """
    beta = best_beta(market, prices(market, b))
    if beta_prev is not None:
        beta = np.maximum(beta, beta_prev)
    return beta


def _cap_binding(r: np.ndarray, row_cap: float) -> bool:
    return bool(r.max(initial=0.0) >= row_cap - 1e-6 * max(1.0, row_cap))


def solve(market: BijectiveMarket, config: SolverConfig | None = None) -> SolveResult:
    """Run the alternating algorithm until convergence, stall, or the cap.

    Returns the final state, its equilibrium certificate, and the full
    iteration trace.  Raises ``ConditionStarViolated`` on infeasible desire
    digraphs; warns ``CapBindingWarning`` when a row-sum cap is active at
    termination.
    """
    config = (config or SolverConfig()).validate()
    row_cap = config.row_cap if config.row_cap is not None else default_row_cap(market)
    constants = estimate_constants(market, row_cap)
    eta = eta_from_policy(constants, config)
    balance = BalanceProjector(market.n, market.edge_rows, market.edge_cols)

    # Thresholds of the far-from-optimum guarantee: while the objective gap
    # is at least decrease_threshold, each gradient step must shed at least
    # decrease_bound.
    decrease_threshold = (
        constants.diameter
        * constants.gradient_bound
        * math.sqrt(6.0 * constants.smoothness * eta)
    )
    decrease_bound = 1.5 * constants.smoothness * eta**2 * constants.gradient_bound**2

    state = initialize(market, config)
    trace = IterationTrace(
        meta={
            "eta": eta,
            "eta_policy": config.eta_policy,
            "smoothness": constants.smoothness,
            "gradient_bound": constants.gradient_bound,
            "diameter": constants.diameter,
            "row_cap": row_cap,
            "balanced": config.balanced,
            "decrease_threshold": decrease_threshold,
            "decrease_bound": decrease_bound,
        }
    )

    stall_count = 0
    termination = "max_iters"
    for t in range(config.max_iters):
        obj_pre = objective(market, state.b, state.beta)
        if obj_pre <= config.objective_tol:
            termination = "converged"
            break
        grad = gradient(market, state.b, state.beta)
        spec = FeasibleSetSpec.from_beta(
            market, state.beta, row_cap, balanced=config.balanced, balance=balance
        )
        b_next = project(
            state.b - eta * grad,
            spec,
            config.projection_tol,
            config.projection_max_cycles,
        )
        obj_post_grad = objective(market, b_next, state.beta)
        beta_next = step_beta(market, b_next, state.beta)
        obj_post_beta = objective(market, b_next, beta_next)

        triggered = obj_pre >= decrease_threshold
        trace.rows.append(
            TraceRow(
                iteration=t,
                obj_pre=obj_pre,
                obj_post_grad=obj_post_grad,
                obj_post_beta=obj_post_beta,
                grad_norm=float(np.linalg.norm(grad)),
                step_norm=float(np.linalg.norm(b_next - state.b)),
                max_residual=spec.max_violation(b_next),
                cap_binding=_cap_binding(row_spending(market, b_next), row_cap),
                decrease_triggered=triggered,
                decrease_ok=(obj_pre - obj_post_grad) >= decrease_bound * (1 - 1e-6),
            )
        )
        state = SpendState(b_next, beta_next)

        relative_drop = (obj_pre - obj_post_beta) / max(abs(obj_pre), 1e-300)
        stall_count = stall_count + 1 if relative_drop < config.stall_tol else 0
        if stall_count >= config.stall_window:
            termination = "stalled"
            break
    if termination == "max_iters":
        if objective(market, state.b, state.beta) <= config.objective_tol:
            termination = "converged"

    trace.termination = termination
    trace.meta["final_objective"] = objective(market, state.b, state.beta)
    trace.meta["final_residuals"] = feasibility_residuals(
        market, state.b, state.beta, row_cap, config.balanced
    ).max_residual

    if _cap_binding(row_spending(market, state.b), row_cap):
        warnings.warn(
            "a row sum is at the cap; rerun with a larger row cap",
            CapBindingWarning,
            stacklevel=2,
        )
        trace.meta["cap_binding"] = True
    else:
        trace.meta["cap_binding"] = False

    certificate = verification.certify(state, market, config.cert_eps)
    return SolveResult(state, certificate, trace)
