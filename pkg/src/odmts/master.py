"""Master problem of the Benders loop and the MILP backends that solve it.

Variables are the binary bus-arc flags ``z`` followed by one continuous
``theta`` per cut group (per trip, or a single one when cuts are
aggregated).  Minimise ``beta @ z + sum(theta)`` subject to

* frequency balance at each hub (integer coefficients, equality),
* at most one open arc among parallel bus arcs,
* ``theta[g] >= floor[g]`` and ``theta[g] >= const - sigma @ z`` per cut.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .errors import SolverLimitReached

log = logging.getLogger(__name__)

INT_TOL = 1e-6


@dataclass
class MasterProblem:
    costs: np.ndarray  # beta per bus arc
    balance: list[dict[int, int]]  # hub rows: var index -> +f / -f
    parallel: list[list[int]]  # groups with sum(z) <= 1
    floors: np.ndarray  # lower bound per theta
    forced_open: frozenset[int] = frozenset()
    cuts: list[tuple[int, float, np.ndarray]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.costs)

    @property
    def m(self) -> int:
        return len(self.floors)

    def add_cut(self, group: int, constant: float, sigma: np.ndarray) -> None:
        self.cuts.append((group, float(constant), np.asarray(sigma, dtype=float)))

    def theta_at(self, z: Sequence[int]) -> np.ndarray:
        theta = self.floors.astype(float).copy()
        zv = np.asarray(z, dtype=float)
        for g, const, sigma in self.cuts:
            theta[g] = max(theta[g], const - float(sigma @ zv))
        return theta

    def value(self, z: Sequence[int]) -> float:
        return float(self.costs @ np.asarray(z, dtype=float)) + float(self.theta_at(z).sum())

    def is_feasible(self, z: Sequence[int]) -> bool:
        """Exact integer check of balance, parallel and forced-open rows."""
        if any(z[i] != 1 for i in self.forced_open):
            return False
        if any(sum(z[i] for i in grp) > 1 for grp in self.parallel):
            return False
        return all(sum(c * z[i] for i, c in row.items()) == 0 for row in self.balance)

    def lp_arrays(self):
        n, m = self.n, self.m
        c = np.concatenate([self.costs, np.ones(m)])
        ub_rows, ub_rhs = [], []
        for grp in self.parallel:
            row = np.zeros(n + m)
            row[grp] = 1.0
            ub_rows.append(row)
            ub_rhs.append(1.0)
        for g, const, sigma in self.cuts:
            row = np.zeros(n + m)
            row[:n] = -sigma
            row[n + g] = -1.0
            ub_rows.append(row)
            ub_rhs.append(-const)
        eq_rows = []
        for bal in self.balance:
            row = np.zeros(n + m)
            for i, coef in bal.items():
                row[i] = coef
            eq_rows.append(row)
        a_ub = np.array(ub_rows) if ub_rows else None
        b_ub = np.array(ub_rhs) if ub_rows else None
        a_eq = np.array(eq_rows) if eq_rows else None
        b_eq = np.zeros(len(eq_rows)) if eq_rows else None
        return c, a_ub, b_ub, a_eq, b_eq


@dataclass(frozen=True)
class MasterResult:
    z: tuple[int, ...]
    value: float
    nodes: int = 0


class MasterBackend(Protocol):
    def solve(self, problem: MasterProblem) -> MasterResult: ...


def _tie_key(z: Sequence[int]) -> tuple[int, ...]:
    # variables are ordered by arc id, so this orders designs by open-id set
    return tuple(i for i, v in enumerate(z) if v)


class BranchAndBound:
    """Depth-first branch and bound with LP relaxations solved by HiGHS.

    The zero branch is explored first.  Among designs within ``rel_gap`` of
    each other the one with the smaller open-id sequence is kept.
    """

    def __init__(self, node_limit: int = 200_000, rel_gap: float = 1e-9):
        self.node_limit = node_limit
        self.rel_gap = rel_gap

    def solve(self, problem: MasterProblem) -> MasterResult:
        n = problem.n
        c, a_ub, b_ub, a_eq, b_eq = problem.lp_arrays()
        lo0 = np.zeros(n)
        for i in problem.forced_open:
            lo0[i] = 1.0
        hi0 = np.ones(n)
        theta_bounds = [(float(f), None) for f in problem.floors]

        best_z: tuple[int, ...] | None = None
        best_val = np.inf
        stack = [(lo0, hi0)]
        nodes = 0
        while stack:
            lo, hi = stack.pop()
            nodes += 1
            if nodes > self.node_limit:
                raise SolverLimitReached(
                    f"branch and bound stopped after {self.node_limit} nodes",
                    state=None if best_z is None else MasterResult(best_z, best_val, nodes),
                )
            res = linprog(
                c,
                A_ub=a_ub,
                b_ub=b_ub,
                A_eq=a_eq,
                b_eq=b_eq,
                bounds=list(zip(lo, hi)) + theta_bounds,
                method="highs",
            )
            if res.status == 2:  # infeasible
                continue
            if res.status != 0:
                raise RuntimeError(f"LP relaxation failed: {res.message}")
            tol = self.rel_gap * max(1.0, abs(best_val)) if np.isfinite(best_val) else 0.0
            if res.fun >= best_val - tol:
                continue
            zs = res.x[:n]
            frac = [i for i in range(n) if abs(zs[i] - round(zs[i])) > INT_TOL]
            if not frac:
                z = tuple(int(round(v)) for v in zs)
                if not problem.is_feasible(z):
                    raise RuntimeError("rounded LP solution violates master constraints")
                val = problem.value(z)
                if best_z is None or val < best_val - tol or (
                    val <= best_val + tol and _tie_key(z) < _tie_key(best_z)
                ):
                    best_z, best_val = z, val
                continue
            i = frac[0]
            up_lo, down_hi = lo.copy(), hi.copy()
            up_lo[i] = 1.0
            down_hi[i] = 0.0
            stack.append((up_lo, hi))
            stack.append((lo, down_hi))
        if best_z is None:
            raise RuntimeError("master problem is infeasible")
        return MasterResult(best_z, best_val, nodes)


class ScipyMilp:
    """Whole-problem solve with ``scipy.optimize.milp`` (HiGHS MIP)."""

    def solve(self, problem: MasterProblem) -> MasterResult:
        n, m = problem.n, problem.m
        c, a_ub, b_ub, a_eq, b_eq = problem.lp_arrays()
        cons = []
        if a_ub is not None:
            cons.append(LinearConstraint(a_ub, -np.inf, b_ub))
        if a_eq is not None:
            cons.append(LinearConstraint(a_eq, b_eq, b_eq))
        lo = np.concatenate([np.zeros(n), problem.floors])
        for i in problem.forced_open:
            lo[i] = 1.0
        hi = np.concatenate([np.ones(n), np.full(m, np.inf)])
        integrality = np.concatenate([np.ones(n), np.zeros(m)])
        res = milp(c, constraints=cons, bounds=Bounds(lo, hi), integrality=integrality,
                   options={"mip_rel_gap": 1e-9})
        if res.status != 0:
            raise RuntimeError(f"MILP failed: {res.message}")
        z = tuple(int(round(v)) for v in res.x[:n])
        return MasterResult(z, problem.value(z))
