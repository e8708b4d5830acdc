"""Market data model, validation, reduction to bijective form, and feasibility checks.

A general linear exchange market has agents holding endowments of divisible
goods and linear utilities over goods.  Any such market reduces to a
*bijective* market (agent set = good set, each agent owns one unit of her own
good) by splitting every agent into one copy per endowed good.  All solver
machinery downstream operates on bijective markets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConditionStarViolated,
    EmptyEndowment,
    InvalidInstance,
    MissingOriginMap,
    NegativeValue,
    NoDesiredGood,
)

__all__ = [
    "MarketInstance",
    "BijectiveMarket",
    "OriginMap",
    "ConditionStarReport",
    "LiftedSolution",
    "validate_instance",
    "reduce_to_bijective",
    "check_condition_star",
    "condition_star_of_edges",
    "lift_solution",
    "instance_from_dict",
    "bijective_from_dict",
    "load_instance",
    "bijective_to_dict",
]


@dataclass
class MarketInstance:
    """A general linear exchange market.

    ``utilities`` and ``endowments`` are sparse maps ``(agent, good) -> value``;
    absent entries are zero.
    """

    n_agents: int
    n_goods: int
    utilities: dict[tuple[int, int], float]
    endowments: dict[tuple[int, int], float]


@dataclass
class OriginMap:
    """How bijective agents relate to the original market.

    ``pairs[c]`` is the (original agent, endowed good) pair that bijective
    agent ``c`` was split from.
    """

    n_agents: int
    n_goods: int
    pairs: tuple[tuple[int, int], ...]


@dataclass
class BijectiveMarket:
    """Exchange market with agent set = good set and unit own-good endowments.

    ``utilities`` is positive exactly on the edge set E of the desire digraph;
    off-edge pairs carry no spending variables at all.  Derived index arrays
    (row-major edge order) are computed once and treated as read-only.
    """

    n: int
    utilities: dict[tuple[int, int], float]
    origin_map: OriginMap | None = None

    edge_rows: np.ndarray = field(init=False, repr=False)
    edge_cols: np.ndarray = field(init=False, repr=False)
    edge_u: np.ndarray = field(init=False, repr=False)
    edge_log_u: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInstance("bijective market needs at least one agent")
        edges = sorted(self.utilities)
        for (i, j) in edges:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise InvalidInstance(f"edge {(i, j)} out of range for n={self.n}")
            if not self.utilities[i, j] > 0:
                raise InvalidInstance(
                    f"edge {(i, j)} must carry a positive utility, "
                    f"got {self.utilities[i, j]}"
                )
        self.edge_rows = np.array([i for i, _ in edges], dtype=np.intp)
        self.edge_cols = np.array([j for _, j in edges], dtype=np.intp)
        self.edge_u = np.array([self.utilities[e] for e in edges], dtype=float)
        self.edge_log_u = np.log(self.edge_u) if edges else np.empty(0)

    @property
    def n_edges(self) -> int:
        return self.edge_u.size

    @property
    def out_degree(self) -> np.ndarray:
        return np.bincount(self.edge_rows, minlength=self.n)

    @property
    def in_degree(self) -> np.ndarray:
        return np.bincount(self.edge_cols, minlength=self.n)

    def spend_matrix(self, b: np.ndarray) -> np.ndarray:
        """Scatter an edge vector into a dense n-by-n spending matrix."""
        m = np.zeros((self.n, self.n))
        m[self.edge_rows, self.edge_cols] = b
        return m

    def utility_matrix(self) -> np.ndarray:
        m = np.zeros((self.n, self.n))
        m[self.edge_rows, self.edge_cols] = self.edge_u
        return m


@dataclass
class ConditionStarReport:
    """Feasibility report for the desire digraph.

    ``violating_components`` lists every singleton strongly connected
    component whose node has no self-loop, ascending by member.
    """

    satisfied: bool
    violating_components: tuple[tuple[int, ...], ...]


@dataclass
class LiftedSolution:
    """A bijective solution carried back to the original market.

    Prices and spending are aggregated over copies; allocations are
    spending divided by the aggregated good price.
    """

    prices: np.ndarray
    spending: np.ndarray
    allocations: np.ndarray
    budgets: np.ndarray


def validate_instance(m: MarketInstance) -> MarketInstance:
    """Check an instance and return a normalized copy.

    Every good's endowment column is rescaled to sum to one (unit supply).
    Rejects agents holding no endowment, agents desiring no good, and any
    negative value.  Zero-valued sparse entries are dropped.
    """
    if m.n_agents < 1 or m.n_goods < 1:
        raise InvalidInstance("need at least one agent and one good")
    for (i, j), u in m.utilities.items():
        if not (0 <= i < m.n_agents and 0 <= j < m.n_goods):
            raise InvalidInstance(f"utility index {(i, j)} out of range")
        if u < 0:
            raise NegativeValue("utilities", (i, j), u)
    for (i, j), w in m.endowments.items():
        if not (0 <= i < m.n_agents and 0 <= j < m.n_goods):
            raise InvalidInstance(f"endowment index {(i, j)} out of range")
        if w < 0:
            raise NegativeValue("endowments", (i, j), w)

    utilities = {k: v for k, v in m.utilities.items() if v > 0}
    endowments = {k: v for k, v in m.endowments.items() if v > 0}

    for i in range(m.n_agents):
        if not any(a == i for a, _ in endowments):
            raise EmptyEndowment(i)
        if not any(a == i for a, _ in utilities):
            raise NoDesiredGood(i)

    column_sums = np.zeros(m.n_goods)
    for (_, j), w in endowments.items():
        column_sums[j] += w
    normalized = {
        (i, j): w / column_sums[j] for (i, j), w in endowments.items()
    }
    return MarketInstance(m.n_agents, m.n_goods, utilities, normalized)


def reduce_to_bijective(m: MarketInstance) -> BijectiveMarket:
    """Split every agent into one copy per positively endowed good.

    Copy ``(k, h)`` owns one unit of the renamed good "agent k's share of h",
    worth ``w_kh`` units of the original good h, so buyers value it at
    ``u_ih * w_kh`` per unit.  Each copy keeps its originator's utility row.
    Expects a validated (normalized) instance.
    """
    copies = sorted((k, h) for (k, h) in m.endowments)
    utilities: dict[tuple[int, int], float] = {}
    for buyer_copy, (i, _) in enumerate(copies):
        for good_copy, (k, h) in enumerate(copies):
            u = m.utilities.get((i, h), 0.0)
            if u > 0:
                utilities[buyer_copy, good_copy] = u * m.endowments[k, h]
    origin = OriginMap(m.n_agents, m.n_goods, tuple(copies))
    return BijectiveMarket(len(copies), utilities, origin)


def condition_star_of_edges(n: int, edges) -> ConditionStarReport:
    """Feasibility check on a raw digraph given as an iterable of (i, j) arcs.

    Computes strongly connected components (iterative Tarjan) and flags every
    singleton component without a self-loop.
    """
    adjacency: list[list[int]] = [[] for _ in range(n)]
    edge_set = set()
    for i, j in edges:
        if (i, j) not in edge_set:
            edge_set.add((i, j))
            adjacency[i].append(j)
    for neighbors in adjacency:
        neighbors.sort()

    index = [-1] * n
    lowlink = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    components: list[list[int]] = []
    counter = 0

    for root in range(n):
        if index[root] != -1:
            continue
        # Explicit DFS stack of (vertex, iterator position).
        work = [(root, 0)]
        while work:
            v, pos = work.pop()
            if pos == 0:
                index[v] = lowlink[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            recurse = False
            for k in range(pos, len(adjacency[v])):
                w = adjacency[v][k]
                if index[w] == -1:
                    work.append((v, k + 1))
                    work.append((w, 0))
                    recurse = True
                    break
                if on_stack[w]:
                    lowlink[v] = min(lowlink[v], index[w])
            if recurse:
                continue
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                components.append(sorted(comp))
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])

    violating = tuple(
        tuple(comp)
        for comp in sorted(components)
        if len(comp) == 1 and (comp[0], comp[0]) not in edge_set
    )
    return ConditionStarReport(satisfied=not violating, violating_components=violating)


def check_condition_star(market: BijectiveMarket) -> ConditionStarReport:
    """Feasibility check on a bijective market's desire digraph."""
    return condition_star_of_edges(
        market.n, zip(market.edge_rows.tolist(), market.edge_cols.tolist())
    )


def require_condition_star(market: BijectiveMarket) -> ConditionStarReport:
    report = check_condition_star(market)
    if not report.satisfied:
        raise ConditionStarViolated(report)
    return report


def validate_bijective(market: BijectiveMarket) -> BijectiveMarket:
    """Reject bijective markets with an agent desiring nothing."""
    degree = market.out_degree
    for i in range(market.n):
        if degree[i] == 0:
            raise NoDesiredGood(i)
    return market


def lift_solution(
    prices: np.ndarray, spending: np.ndarray, origin_map: OriginMap | None
) -> LiftedSolution:
    """Aggregate a bijective solution back to the original market.

    A good's price is the sum of its copies' prices, an agent's spending and
    budget are sums over her copies, and allocations are spending over price.
    Working in money units makes total money spent and earned carry over
    exactly.
    """
    if origin_map is None:
        raise MissingOriginMap()
    prices = np.asarray(prices, dtype=float)
    spending = np.asarray(spending, dtype=float)
    nb = len(origin_map.pairs)
    if prices.shape != (nb,) or spending.shape != (nb, nb):
        raise InvalidInstance(
            f"solution shape {prices.shape}/{spending.shape} does not match "
            f"{nb} bijective agents"
        )
    agent_of = np.array([a for a, _ in origin_map.pairs], dtype=np.intp)
    good_of = np.array([g for _, g in origin_map.pairs], dtype=np.intp)

    agent_ind = np.zeros((nb, origin_map.n_agents))
    agent_ind[np.arange(nb), agent_of] = 1.0
    good_ind = np.zeros((nb, origin_map.n_goods))
    good_ind[np.arange(nb), good_of] = 1.0

    lifted_prices = good_ind.T @ prices
    budgets = agent_ind.T @ prices
    lifted_spending = agent_ind.T @ spending @ good_ind
    with np.errstate(divide="ignore", invalid="ignore"):
        allocations = np.where(
            lifted_prices > 0, lifted_spending / lifted_prices, 0.0
        )
    return LiftedSolution(lifted_prices, lifted_spending, allocations, budgets)


def _triplets(raw, field_name, n_rows, n_cols) -> dict[tuple[int, int], float]:
    entries: dict[tuple[int, int], float] = {}
    if not isinstance(raw, list):
        raise InvalidInstance(f'"{field_name}" must be a list of [i, j, value] triplets')
    for item in raw:
        if not (isinstance(item, (list, tuple)) and len(item) == 3):
            raise InvalidInstance(f'bad "{field_name}" triplet: {item!r}')
        i, j, v = item
        if not (isinstance(i, int) and isinstance(j, int)):
            raise InvalidInstance(f'non-integer index in "{field_name}": {item!r}')
        if not (0 <= i < n_rows and 0 <= j < n_cols):
            raise InvalidInstance(f'index {(i, j)} out of range in "{field_name}"')
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise InvalidInstance(f'non-numeric value in "{field_name}": {item!r}')
        if (i, j) in entries:
            raise InvalidInstance(f'duplicate {(i, j)} in "{field_name}"')
        v = float(v)
        if v < 0:
            raise NegativeValue(field_name, (i, j), v)
        if v > 0:
            entries[i, j] = v
    return entries


def instance_from_dict(doc: dict) -> MarketInstance:
    """Parse the instance JSON schema.

    Expects integer ``n_agents``/``n_goods`` and sparse triplet arrays
    ``utilities`` and ``endowments`` (0-based indices).  A square instance may
    omit ``endowments``, which then defaults to the identity (bijective form).
    """
    if not isinstance(doc, dict):
        raise InvalidInstance("instance document must be a JSON object")
    try:
        n_agents = doc["n_agents"]
        n_goods = doc["n_goods"]
    except KeyError as exc:
        raise InvalidInstance(f"missing field {exc.args[0]!r}") from exc
    if not (isinstance(n_agents, int) and isinstance(n_goods, int)):
        raise InvalidInstance('"n_agents" and "n_goods" must be integers')
    if n_agents < 1 or n_goods < 1:
        raise InvalidInstance("need at least one agent and one good")
    utilities = _triplets(doc.get("utilities", []), "utilities", n_agents, n_goods)
    if "endowments" in doc:
        endowments = _triplets(doc["endowments"], "endowments", n_agents, n_goods)
    elif n_agents == n_goods:
        endowments = {(i, i): 1.0 for i in range(n_agents)}
    else:
        raise InvalidInstance(
            'non-square instance must carry an "endowments" field'
        )
    return MarketInstance(n_agents, n_goods, utilities, endowments)


def load_instance(path) -> MarketInstance:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_dict(json.load(fh))


def bijective_from_dict(doc: dict) -> BijectiveMarket:
    """Parse a square, endowment-free instance directly into bijective form."""
    if not isinstance(doc, dict):
        raise InvalidInstance("instance document must be a JSON object")
    n = doc.get("n_agents")
    if not isinstance(n, int) or n < 1:
        raise InvalidInstance('"n_agents" must be a positive integer')
    if doc.get("n_goods", n) != n:
        raise InvalidInstance("bijective instance must have n_goods == n_agents")
    utilities = _triplets(doc.get("utilities", []), "utilities", n, n)
    return BijectiveMarket(n, utilities)


def bijective_to_dict(market: BijectiveMarket) -> dict:
    doc = {
        "n_agents": market.n,
        "n_goods": market.n,
        "utilities": [
            [int(i), int(j), float(u)]
            for (i, j), u in sorted(market.utilities.items())
        ],
    }
    if market.origin_map is not None:
        doc["origin_map"] = [[int(a), int(g)] for a, g in market.origin_map.pairs]
    return doc
