"""Equilibria of linear exchange markets.

The package computes equilibria of bijective linear exchange markets by an
alternating scheme (projected gradient descent on spending, closed-form
update of the inverse best bang per buck), reduces general endowment markets
to bijective form, verifies equilibrium certificates, and ships a
proportional-response solver for linear Fisher markets as a baseline.
"""

from .errors import (
    CapBindingWarning,
    ConditionStarViolated,
    DegenerateRow,
    EmptyEndowment,
    EmptyFeasibleSet,
    InvalidBudget,
    InvalidInstance,
    MarketError,
    MissingOriginMap,
    NegativeValue,
    NoConvergence,
    NoDesiredGood,
    NoEdge,
    NonPositiveEta,
    StepSizeWarning,
    TooLarge,
    ValidationError,
    ZeroNormal,
    ZeroPrice,
)
from .market import (
    BijectiveMarket,
    ConditionStarReport,
    LiftedSolution,
    MarketInstance,
    OriginMap,
    bijective_from_dict,
    bijective_to_dict,
    check_condition_star,
    condition_star_of_edges,
    instance_from_dict,
    lift_solution,
    load_instance,
    reduce_to_bijective,
    validate_bijective,
    validate_instance,
)
from .program import (
    ProgramConstants,
    ResidualReport,
    SpendState,
    best_beta,
    default_row_cap,
    estimate_constants,
    feasibility_residuals,
    gradient,
    hessian_quadratic_form,
    objective,
    prices,
    row_spending,
)
from .projection import (
    BalanceProjector,
    FeasibleSetSpec,
    exact_projection_oracle,
    project,
    project_halfspace,
)
from .solver import (
    IterationTrace,
    SolveResult,
    SolverConfig,
    TraceRow,
    eta_from_policy,
    initialize,
    solve,
    step_beta,
    step_gradient,
)
from .fisher import (
    FisherMarket,
    FisherSolution,
    fisher_from_dict,
    fisher_objective,
    fisher_solve,
    load_fisher,
    pr_update,
    validate_fisher,
)
from .verification import (
    ArrowDebreuCertificate,
    EquilibriumCertificate,
    allocations,
    certify,
    certify_arrow_debreu,
    check_budget_balance,
    check_buyer_optimality,
    check_clearance,
)

__version__ = "0.1.0"
