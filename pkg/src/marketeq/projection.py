"""Euclidean projection onto the compactified feasible polyhedron.

The feasible set intersects, over the edge vector b:

  * the nonnegative orthant,
  * per-agent row-sum slabs ``1 <= r_i <= row_cap``,
  * per-good column floors ``p_j >= c_j`` (goods with buyers only),
  * optionally the balance subspace ``r_k = p_k`` for every agent k.

`project` runs Dykstra's alternating scheme over these four blocks.  Unlike
plain cyclic projection, Dykstra converges to the true Euclidean projection
onto the intersection, which the descent analysis needs.  Each block's
projection is closed-form: clamping for the orthant, a uniform shift for each
sum constraint (disjoint rows/columns, so one vectorized pass per block), and
a least-squares shift for the balance equalities.

`exact_projection_oracle` solves the same problem exactly by enumerating
candidate active sets, certifying a candidate through its KKT system; it is a
test oracle, quadratic-programming slow, and limited to small edge sets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .errors import EmptyFeasibleSet, NoConvergence, TooLarge, ZeroNormal
from .market import BijectiveMarket
from .program import column_floors

__all__ = [
    "FeasibleSetSpec",
    "BalanceProjector",
    "project",
    "project_halfspace",
    "exact_projection_oracle",
]

ORACLE_EDGE_LIMIT = 16


class BalanceProjector:
    """Orthogonal projector onto the subspace where row sums equal column sums.

    The subspace is the kernel of the linear map b -> (r_k(b) - p_k(b))_k,
    whose matrix has one redundant row (the map sums to zero), hence the
    pseudo-inverse.  Built once per edge set and reused across calls.
    """

    def __init__(self, n: int, rows: np.ndarray, cols: np.ndarray):
        self.n = n
        self.rows = rows
        self.cols = cols
        m = rows.size
        a = np.zeros((n, m))
        a[rows, np.arange(m)] += 1.0
        a[cols, np.arange(m)] -= 1.0
        self.matrix = a
        self._gram_pinv = np.linalg.pinv(a @ a.T)

    def imbalance(self, x: np.ndarray) -> np.ndarray:
        return np.bincount(self.rows, weights=x, minlength=self.n) - np.bincount(
            self.cols, weights=x, minlength=self.n
        )

    def apply(self, x: np.ndarray) -> np.ndarray:
        w = self._gram_pinv @ self.imbalance(x)
        return x - (w[self.rows] - w[self.cols])


@dataclass
class FeasibleSetSpec:
    """Floors, caps, and mode describing one projection target.

    ``col_floor`` entries for goods without buyers are zero and ignored.
    Construction rejects caps that make the set obviously empty.
    """

    n: int
    rows: np.ndarray
    cols: np.ndarray
    col_floor: np.ndarray
    row_cap: float
    balanced: bool = True
    balance: BalanceProjector | None = None

    row_floor: float = 1.0
    out_degree: np.ndarray = field(init=False, repr=False)
    in_degree: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.out_degree = np.bincount(self.rows, minlength=self.n)
        self.in_degree = np.bincount(self.cols, minlength=self.n)
        if np.any(self.out_degree == 0):
            raise EmptyFeasibleSet(
                f"agent {int(np.argmax(self.out_degree == 0))} has no edges, "
                "row floor is unreachable"
            )
        used = self.in_degree > 0
        floors = self.col_floor[used]
        if np.any(floors < 1.0):
            raise ValueError("column floors must be at least one on used goods")
        if self.row_cap < self.row_floor:
            raise EmptyFeasibleSet(
                f"row cap {self.row_cap} below row floor {self.row_floor}"
            )
        if floors.size and self.row_cap < floors.max():
            raise EmptyFeasibleSet(
                f"row cap {self.row_cap} below largest column floor {floors.max()}"
            )
        if floors.size and self.n * self.row_cap < floors.sum():
            raise EmptyFeasibleSet(
                "total row capacity cannot cover the column floors"
            )
        if self.balanced and self.balance is None:
            self.balance = BalanceProjector(self.n, self.rows, self.cols)

    @classmethod
    def from_beta(
        cls,
        market: BijectiveMarket,
        beta: np.ndarray,
        row_cap: float,
        balanced: bool = True,
        balance: BalanceProjector | None = None,
    ) -> "FeasibleSetSpec":
        return cls(
            n=market.n,
            rows=market.edge_rows,
            cols=market.edge_cols,
            col_floor=column_floors(market, np.asarray(beta, dtype=float)),
            row_cap=float(row_cap),
            balanced=balanced,
            balance=balance,
        )

    def _project_row_slab(self, x: np.ndarray) -> np.ndarray:
        r = np.bincount(self.rows, weights=x, minlength=self.n)
        shift = np.zeros(self.n)
        low = r < self.row_floor
        high = r > self.row_cap
        deg = np.maximum(self.out_degree, 1)
        shift[low] = (self.row_floor - r[low]) / deg[low]
        shift[high] = (self.row_cap - r[high]) / deg[high]
        return x + shift[self.rows]

    def _project_col_floor(self, x: np.ndarray) -> np.ndarray:
        p = np.bincount(self.cols, weights=x, minlength=self.n)
        shift = np.zeros(self.n)
        low = (p < self.col_floor) & (self.in_degree > 0)
        shift[low] = (self.col_floor[low] - p[low]) / self.in_degree[low]
        return x + shift[self.cols]

    def max_violation(self, x: np.ndarray) -> float:
        r = np.bincount(self.rows, weights=x, minlength=self.n)
        p = np.bincount(self.cols, weights=x, minlength=self.n)
        worst = max(
            max(0.0, float(-x.min())) if x.size else 0.0,
            max(0.0, float((self.row_floor - r).max())),
            max(0.0, float((r - self.row_cap).max())),
            max(0.0, float((self.col_floor - p).max())),
        )
        if self.balanced:
            worst = max(worst, float(np.abs(r - p).max()))
        return worst


def project_halfspace(x, a, rhs, sense=">="):
    """Project onto a single halfspace {z : <a, z> >= rhs} (or <=).

    Returns ``x`` unchanged when the constraint already holds, otherwise the
    closed-form shift x - ((<a, x> - rhs) / ||a||^2) a.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    norm_sq = float(a @ a)
    if norm_sq == 0.0:
        raise ZeroNormal()
    value = float(a @ x)
    if sense == ">=":
        if value >= rhs:
            return x
    elif sense == "<=":
        if value <= rhs:
            return x
    else:
        raise ValueError(f"sense must be '>=' or '<=', got {sense!r}")
    return x - ((value - rhs) / norm_sq) * a


def project(
    b_raw: np.ndarray,
    spec: FeasibleSetSpec,
    tol: float = 1e-10,
    max_cycles: int = 100_000,
) -> np.ndarray:
    """Euclidean projection of ``b_raw`` onto the feasible set.

    Dykstra's scheme keeps one correction vector per constraint block and
    cycles until the iterate moves less than ``tol`` (sup norm) over a full
    cycle and all residuals are within ``10 * tol``.  The orthant block runs
    last so the output is exactly nonnegative.
    """
    x = np.array(b_raw, dtype=float)
    blocks = [spec._project_row_slab, spec._project_col_floor]
    if spec.balanced:
        blocks.append(spec.balance.apply)
    blocks.append(lambda v: np.maximum(v, 0.0))
    corrections = [np.zeros_like(x) for _ in blocks]

    for _ in range(max_cycles):
        x_prev = x
        for k, block in enumerate(blocks):
            y = x + corrections[k]
            x = block(y)
            corrections[k] = y - x
        change = float(np.abs(x - x_prev).max()) if x.size else 0.0
        if change <= tol and spec.max_violation(x) <= 10.0 * tol:
            return x
    raise NoConvergence(max_cycles, residual=spec.max_violation(x), detail="projection")


def _inequality_system(spec: FeasibleSetSpec):
    """Stack all inequality constraints as G x >= h."""
    m = spec.rows.size
    blocks = [np.eye(m)]
    h = [np.zeros(m)]
    row_ind = np.zeros((spec.n, m))
    row_ind[spec.rows, np.arange(m)] = 1.0
    col_ind = np.zeros((spec.n, m))
    col_ind[spec.cols, np.arange(m)] = 1.0
    agents = np.where(spec.out_degree > 0)[0]
    goods = np.where(spec.in_degree > 0)[0]
    blocks += [row_ind[agents], -row_ind[agents], col_ind[goods]]
    h += [
        np.full(agents.size, spec.row_floor),
        np.full(agents.size, -spec.row_cap),
        spec.col_floor[goods],
    ]
    return np.vstack(blocks), np.concatenate(h)


def exact_projection_oracle(b_raw: np.ndarray, spec: FeasibleSetSpec) -> np.ndarray:
    """Exact projection by enumeration over candidate active sets.

    For each subset of inequality constraints (smallest first, constraints
    violated at the input tried first), solve the equality-constrained
    least-squares problem and accept the first candidate that is primal
    feasible and passes a nonnegative-multiplier KKT certificate.  Convexity
    makes any certified candidate the unique projection, so the search order
    only affects speed.  Intended for tests; cost grows combinatorially.
    """
    y = np.asarray(b_raw, dtype=float)
    m = y.size
    if m > ORACLE_EDGE_LIMIT:
        raise TooLarge(m, ORACLE_EDGE_LIMIT)
    g_mat, h_vec = _inequality_system(spec)
    eq = spec.balance.matrix if spec.balanced else np.zeros((0, m))
    scale = max(1.0, float(np.abs(y).max()), float(np.abs(h_vec).max()))
    feas_tol = 1e-9 * scale

    n_ineq = g_mat.shape[0]
    violation = h_vec - g_mat @ y
    order = np.argsort(-violation, kind="stable").tolist()

    def candidate(subset) -> np.ndarray | None:
        c_mat = np.vstack([g_mat[list(subset)], eq])
        d = np.concatenate([h_vec[list(subset)], np.zeros(eq.shape[0])])
        gram = c_mat @ c_mat.T
        w, *_ = np.linalg.lstsq(gram, d - c_mat @ y, rcond=None)
        x = y + c_mat.T @ w
        if np.abs(c_mat @ x - d).max(initial=0.0) > feas_tol:
            return None
        if (g_mat @ x - h_vec).min(initial=0.0) < -feas_tol:
            return None
        active = np.where(np.abs(g_mat @ x - h_vec) <= 10 * feas_tol)[0]
        basis = np.vstack([g_mat[active], eq, -eq]).T
        if basis.size == 0:
            return x if float(np.abs(x - y).max(initial=0.0)) <= feas_tol else None
        _, residual = nnls(basis, x - y)
        if residual > 1e-7 * max(1.0, float(np.abs(x - y).max())):
            return None
        return x

    for size in range(n_ineq + 1):
        for subset in itertools.combinations(order, size):
            x = candidate(subset)
            if x is not None:
                return x
    raise NoConvergence(n_ineq, detail="active-set enumeration found no KKT point")
