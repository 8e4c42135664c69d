"""Semantic cost matrices and optimal-transport solvers.

The bridge matrix between two class sets is the solution of a transportation
problem whose cost is one minus the cosine similarity of class-name
embeddings (optionally exponentiated base e to amplify differences). Three
solvers are provided: an exact transportation-specialized network simplex, a
log-domain Sinkhorn with marginal-projection rounding, and a partial variant
that ships a fixed mass fraction via a dummy row/column reduction.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .core import DenseMatrix, SolverError, ValidationError, _as2d
from . import bundle_io

logger = logging.getLogger("swab.transport")

MARGINAL_ATOL = 1e-8
_ENTER_TOL = 1e-11  # reduced-cost threshold for an improving pivot


class NoRelevantClassesError(ValidationError):
    """Source-class filtering removed every class."""


@dataclass(frozen=True)
class CostMatrix:
    """Nonnegative k_S x k_T transport cost; entries in [0, 2] pre-exponentiation."""

    values: np.ndarray
    exponentiated: bool = False

    def __post_init__(self):
        a = np.asarray(self.values, dtype=np.float64)
        if a.ndim != 2:
            raise ValidationError("cost matrix must be 2-D")
        if not np.all(np.isfinite(a)):
            raise ValidationError("cost matrix must be finite")
        if np.any(a < 0):
            raise ValidationError("cost matrix must be nonnegative")
        a = np.ascontiguousarray(a)
        a.setflags(write=False)
        object.__setattr__(self, "values", a)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class TransportPlan:
    """A transport plan with its marginals and provenance.

    For full OT the row/column sums match the marginals to 1e-8; for partial
    OT they are dominated by the marginals and the total shipped mass equals
    `total_mass` to 1e-8.
    """

    gamma: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray
    total_mass: float
    solver_tag: str
    objective: float
    is_partial: bool = False

    def __post_init__(self):
        g = np.ascontiguousarray(np.asarray(self.gamma, dtype=np.float64))
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        for name in ("row_marginal", "col_marginal"):
            a = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=np.float64))
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        self.validate()

    def validate(self, atol: float = MARGINAL_ATOL) -> None:
        g, u, v = self.gamma, self.row_marginal, self.col_marginal
        if g.shape != (u.size, v.size):
            raise ValidationError(f"plan shape {g.shape} does not match marginals")
        if np.any(g < -atol):
            raise ValidationError("plan has negative entries")
        rows, cols = g.sum(axis=1), g.sum(axis=0)
        if self.is_partial:
            if np.any(rows > u + atol) or np.any(cols > v + atol):
                raise ValidationError("partial plan exceeds a marginal")
            if abs(g.sum() - self.total_mass) > atol:
                raise ValidationError(
                    f"partial plan mass {g.sum():.12g} != {self.total_mass:.12g}"
                )
        else:
            if np.max(np.abs(rows - u)) > atol or np.max(np.abs(cols - v)) > atol:
                raise ValidationError("full plan marginals are off by more than 1e-8")

    @property
    def column_mass(self) -> np.ndarray:
        return self.gamma.sum(axis=0)


@dataclass(frozen=True)
class SinkhornParams:
    epsilon: float | None = None  # None: 0.01 * mean(cost)
    max_iter: int = 10000
    tol: float = 1e-9


def _cosine_matrix(src: np.ndarray, tgt: np.ndarray) -> np.ndarray:
    sn = np.linalg.norm(src, axis=1)
    tn = np.linalg.norm(tgt, axis=1)
    if np.any(sn == 0) or np.any(tn == 0):
        raise ValidationError("zero-norm embedding row")
    return (src / sn[:, None]) @ (tgt / tn[:, None]).T


def build_cost_matrix(
    src_emb: DenseMatrix | np.ndarray,
    tgt_emb: DenseMatrix | np.ndarray,
    exponentiate: bool = True,
) -> CostMatrix:
    """cost_ij = 1 - cos(src_i, tgt_j), optionally replaced by e^cost."""
    src, tgt = _as2d(src_emb), _as2d(tgt_emb)
    if src.shape[1] != tgt.shape[1]:
        raise ValidationError(
            f"embedding dims differ: {src.shape[1]} vs {tgt.shape[1]}"
        )
    if src.shape[0] < 1 or tgt.shape[0] < 1:
        raise ValidationError("need at least one row on each side")
    cost = np.clip(1.0 - _cosine_matrix(src, tgt), 0.0, 2.0)
    if exponentiate:
        return CostMatrix(np.exp(cost), exponentiated=True)
    return CostMatrix(cost, exponentiated=False)


def filter_source_classes(
    src_emb: DenseMatrix | np.ndarray,
    tgt_emb: DenseMatrix | np.ndarray,
    lam: float,
) -> list[int]:
    """Indices of source classes whose best target cosine exceeds lam."""
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda must be in [0, 1], got {lam}")
    sims = _cosine_matrix(_as2d(src_emb), _as2d(tgt_emb))
    keep = [i for i in range(sims.shape[0]) if sims[i].max() > lam]
    if not keep:
        raise NoRelevantClassesError("no relevant source classes")
    return keep


def _check_marginals(u: np.ndarray, v: np.ndarray) -> None:
    if np.any(u < 0) or np.any(v < 0):
        raise ValidationError("marginals must be nonnegative")
    if abs(u.sum() - v.sum()) > 1e-9:
        raise ValidationError(
            f"marginal sums differ: {u.sum():.12g} vs {v.sum():.12g}"
        )


def _northwest_corner(u: np.ndarray, v: np.ndarray):
    """Initial basic feasible solution; exactly m+n-1 basic cells."""
    m, n = u.size, v.size
    a, b = u.copy(), v.copy()
    basis: list[tuple[int, int]] = []
    flow: dict[tuple[int, int], float] = {}
    i = j = 0
    while True:
        t = max(0.0, min(a[i], b[j]))
        basis.append((i, j))
        flow[(i, j)] = t
        a[i] -= t
        b[j] -= t
        if i == m - 1 and j == n - 1:
            break
        # advance exactly one index per step so the basis stays a spanning tree
        if i == m - 1:
            j += 1
        elif j == n - 1:
            i += 1
        elif a[i] <= b[j]:
            i += 1
        else:
            j += 1
    return basis, flow


def _tree_potentials(m, n, adj, C):
    """alpha_i + beta_j = C_ij over the basis tree (alpha_0 = 0)."""
    alpha = np.full(m, np.nan)
    beta = np.full(n, np.nan)
    alpha[0] = 0.0
    stack = [0]  # node ids: rows 0..m-1, cols m..m+n-1
    seen = {0}
    while stack:
        node = stack.pop()
        for (i, j) in adj[node]:
            other = m + j if node == i else i
            if other in seen:
                continue
            seen.add(other)
            if node == i:  # row known -> set column
                beta[j] = C[i, j] - alpha[i]
            else:
                alpha[i] = C[i, j] - beta[j]
            stack.append(other)
    return alpha, beta


def _find_cycle_path(m, adj, entering):
    """Path of basic cells from the entering cell's column node to its row node."""
    i0, j0 = entering
    start, goal = m + j0, i0
    parent: dict[int, tuple[int, tuple[int, int]]] = {start: (-1, entering)}
    stack = [start]
    while stack:
        node = stack.pop()
        if node == goal:
            break
        for cell in adj[node]:
            i, j = cell
            other = m + j if node == i else i
            if other not in parent:
                parent[other] = (node, cell)
                stack.append(other)
    path = []
    node = goal
    while node != start:
        prev, cell = parent[node]
        path.append(cell)
        node = prev
    path.reverse()
    return path


def _transport_simplex(C: np.ndarray, u: np.ndarray, v: np.ndarray):
    """Exact network simplex on the dense transportation polytope.

    Entering arc by Bland's rule (first negative reduced cost in row-major
    order); leaving arc by minimum flow with lexicographic tie-break. Returns
    (plan, objective).
    """
    m, n = C.shape
    basis, flow = _northwest_corner(u, v)
    adj: list[set[tuple[int, int]]] = [set() for _ in range(m + n)]
    for cell in basis:
        i, j = cell
        adj[i].add(cell)
        adj[m + j].add(cell)
    in_basis = np.zeros((m, n), dtype=bool)
    for (i, j) in basis:
        in_basis[i, j] = True

    scale = max(1.0, float(np.abs(C).max()))
    tol = _ENTER_TOL * scale
    max_pivots = 1000 + 50 * (m + n) ** 2

    for _ in range(max_pivots):
        alpha, beta = _tree_potentials(m, n, adj, C)
        reduced = C - alpha[:, None] - beta[None, :]
        candidates = (reduced < -tol) & ~in_basis
        if not candidates.any():
            break
        flat = int(np.argmax(candidates.ravel()))  # Bland: first eligible cell
        entering = (flat // n, flat % n)

        path = _find_cycle_path(m, adj, entering)
        minus = path[0::2]  # path alternates -,+ starting at the entering column
        theta = np.inf
        leaving = None
        for cell in minus:
            f = flow[cell]
            if f < theta - 1e-15 or (abs(f - theta) <= 1e-15 and (leaving is None or cell < leaving)):
                theta, leaving = f, cell

        flow[entering] = theta
        for idx, cell in enumerate(path):
            flow[cell] += theta if idx % 2 else -theta
        i, j = entering
        adj[i].add(entering)
        adj[m + j].add(entering)
        in_basis[i, j] = True
        li, lj = leaving
        adj[li].discard(leaving)
        adj[m + lj].discard(leaving)
        in_basis[li, lj] = False
        del flow[leaving]
    else:
        raise SolverError(f"network simplex exceeded {max_pivots} pivots")

    gamma = np.zeros((m, n))
    for (i, j), f in flow.items():
        gamma[i, j] = max(f, 0.0)
    return gamma, float((gamma * C).sum())


def _round_to_marginals(P: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Project an almost-feasible nonnegative plan onto exact marginals."""
    r = P.sum(axis=1)
    P = P * np.where(r > 0, np.minimum(1.0, u / np.where(r > 0, r, 1.0)), 1.0)[:, None]
    c = P.sum(axis=0)
    P = P * np.where(c > 0, np.minimum(1.0, v / np.where(c > 0, c, 1.0)), 1.0)[None, :]
    du = np.maximum(u - P.sum(axis=1), 0.0)
    dv = np.maximum(v - P.sum(axis=0), 0.0)
    s = du.sum()
    if s > 0:
        P = P + np.outer(du, dv) / s
    return P


def _sinkhorn(C: np.ndarray, u: np.ndarray, v: np.ndarray, params: SinkhornParams):
    eps = params.epsilon if params.epsilon is not None else 0.01 * float(C.mean())
    if eps <= 0:
        raise ValidationError("sinkhorn epsilon must be positive")
    with np.errstate(divide="ignore"):
        logu = np.log(u)
        logv = np.log(v)
    f = np.zeros(u.size)
    g = np.zeros(v.size)
    residual = np.inf
    for _ in range(params.max_iter):
        logP = (f[:, None] + g[None, :] - C) / eps
        f = f + eps * (logu - logsumexp(logP, axis=1))
        logP = (f[:, None] + g[None, :] - C) / eps
        g = g + eps * (logv - logsumexp(logP, axis=0))
        P = np.exp((f[:, None] + g[None, :] - C) / eps)
        residual = max(
            float(np.abs(P.sum(axis=1) - u).max()),
            float(np.abs(P.sum(axis=0) - v).max()),
        )
        if residual <= params.tol:
            break
    else:
        raise SolverError(
            f"sinkhorn did not reach tol={params.tol:g} in {params.max_iter} "
            f"iterations (marginal residual {residual:.3e})"
        )
    P = _round_to_marginals(P, u, v)
    return P, float((P * C).sum())


def solve_ot(
    cost: CostMatrix | np.ndarray,
    u: np.ndarray,
    v: np.ndarray,
    method: str = "exact",
    params: SinkhornParams | None = None,
) -> TransportPlan:
    """Solve min <gamma, cost> s.t. gamma 1 = u, gamma^T 1 = v, gamma >= 0.

    "exact" returns an optimal vertex via the network simplex; "sinkhorn"
    minimizes the entropy-regularized objective and is then rounded so the
    marginals hold to 1e-8.
    """
    C = cost.values if isinstance(cost, CostMatrix) else np.asarray(cost, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if C.shape != (u.size, v.size):
        raise ValidationError(f"cost shape {C.shape} does not match marginals")
    if not np.all(np.isfinite(C)):
        raise ValidationError("cost matrix must be finite")
    _check_marginals(u, v)
    if method == "exact":
        gamma, objective = _transport_simplex(C, u, v)
        tag = "exact"
    elif method == "sinkhorn":
        gamma, objective = _sinkhorn(C, u, v, params or SinkhornParams())
        tag = "sinkhorn"
    else:
        raise ValidationError(f"unknown OT method {method!r}")
    return TransportPlan(
        gamma=gamma,
        row_marginal=u,
        col_marginal=v,
        total_mass=float(u.sum()),
        solver_tag=tag,
        objective=objective,
    )


def uniform_marginals(k_s: int, k_t: int) -> tuple[np.ndarray, np.ndarray]:
    """All classes equally important: u = 1/k_S, v = 1/k_T."""
    return np.full(k_s, 1.0 / k_s), np.full(k_t, 1.0 / k_t)


def solve_partial_ot(
    cost: CostMatrix | np.ndarray,
    u: np.ndarray,
    v: np.ndarray,
    mass_fraction: float,
) -> TransportPlan:
    """Ship only mass_fraction * min(|u|_1, |v|_1) under dominated marginals.

    Reduction: append one dummy row and one dummy column at zero cost that
    absorb the unshipped mass, solve the balanced problem exactly, strip the
    dummies. The dummy-dummy corner is penalized (2*max(cost)+1) so exactly
    the requested real mass is shipped even when zero-cost real cells exist.
    """
    if not 0.0 < mass_fraction <= 1.0:
        raise ValidationError(f"mass_fraction must be in (0, 1], got {mass_fraction}")
    C = cost.values if isinstance(cost, CostMatrix) else np.asarray(cost, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if np.any(u < 0) or np.any(v < 0):
        raise ValidationError("marginals must be nonnegative")
    if C.shape != (u.size, v.size):
        raise ValidationError(f"cost shape {C.shape} does not match marginals")

    mass = mass_fraction * min(u.sum(), v.sum())
    m, n = C.shape
    C_ext = np.zeros((m + 1, n + 1))
    C_ext[:m, :n] = C
    C_ext[m, n] = 2.0 * float(C.max()) + 1.0
    u_ext = np.append(u, v.sum() - mass)
    v_ext = np.append(v, u.sum() - mass)

    gamma_ext, _ = _transport_simplex(C_ext, u_ext, v_ext)
    gamma = gamma_ext[:m, :n]
    return TransportPlan(
        gamma=gamma,
        row_marginal=u,
        col_marginal=v,
        total_mass=mass,
        solver_tag="partial[exact]",
        objective=float((gamma * C).sum()),
        is_partial=True,
    )


def save_plan(plan: TransportPlan, path_prefix: str | Path, dataset_id: str = "") -> None:
    """Serialize as SWAB-MAT (role transport_plan) plus a JSON sidecar."""
    prefix = Path(path_prefix)
    bundle_io.write_matrix(prefix.with_suffix(".mat"), plan.gamma,
                           role="transport_plan", dataset_id=dataset_id)
    sidecar = {
        "objective": plan.objective,
        "solver_tag": plan.solver_tag,
        "mass": plan.total_mass,
        "is_partial": plan.is_partial,
    }
    with open(prefix.with_suffix(".json"), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=2)
        fh.write("\n")
