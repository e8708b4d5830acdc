"""Exception and warning types shared across the package."""


class MarketError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(MarketError):
    """An instance failed structural or numeric validation."""


class InvalidInstance(ValidationError):
    """Malformed instance data (bad indices, missing fields, duplicates)."""


class NegativeValue(ValidationError):
    def __init__(self, field, index, value):
        self.field = field
        self.index = index
        self.value = value
        super().__init__(f"negative {field} entry {index}: {value}")


class EmptyEndowment(ValidationError):
    def __init__(self, agent):
        self.agent = agent
        super().__init__(f"agent {agent} holds no endowment")


class NoDesiredGood(ValidationError):
    def __init__(self, agent):
        self.agent = agent
        super().__init__(f"agent {agent} has an all-zero utility row")


class InvalidBudget(ValidationError):
    def __init__(self, buyer, value):
        self.buyer = buyer
        self.value = value
        super().__init__(f"buyer {buyer} has non-positive budget {value}")


class MissingOriginMap(MarketError):
    def __init__(self):
        super().__init__("market was not produced by a reduction: no origin map")


class ConditionStarViolated(MarketError):
    def __init__(self, report):
        self.report = report
        super().__init__(
            "desire digraph has loopless singleton components: "
            f"{list(report.violating_components)}"
        )


class ZeroPrice(MarketError):
    def __init__(self, good):
        self.good = good
        super().__init__(f"good {good} has zero price but carries an edge")


class NoEdge(MarketError):
    def __init__(self, agent):
        self.agent = agent
        super().__init__(f"agent {agent} has no outgoing edge")


class ZeroNormal(MarketError):
    def __init__(self):
        super().__init__("halfspace normal is the zero vector")


class EmptyFeasibleSet(MarketError):
    pass


class NoConvergence(MarketError):
    def __init__(self, iterations, residual=None, detail=""):
        self.iterations = iterations
        self.residual = residual
        msg = f"no convergence after {iterations} iterations"
        if residual is not None:
            msg += f" (residual {residual:.3e})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class TooLarge(MarketError):
    def __init__(self, size, limit):
        self.size = size
        self.limit = limit
        super().__init__(f"problem size {size} exceeds oracle limit {limit}")


class DegenerateRow(MarketError):
    def __init__(self, buyer):
        self.buyer = buyer
        super().__init__(f"buyer {buyer}: multiplicative update has an all-zero row")


class NonPositiveEta(MarketError):
    def __init__(self, value):
        self.value = value
        super().__init__(f"step size must be positive, got {value}")


class CapBindingWarning(UserWarning):
    """A row-sum cap is (nearly) active at termination; the cap may be too small."""


class StepSizeWarning(UserWarning):
    """A fixed step size exceeds the admissible analytical bound."""
