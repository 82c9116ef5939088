"""Dense revised simplex with Bland's anti-cycling rule.

Solves   min c.x   s.t.  A x = b,  x >= 0

Two phases: artificial variables start as the basis; phase 1 minimises
their sum, phase 2 keeps any artificial left in the basis pinned at zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LPError(RuntimeError):
    pass


class InfeasibleError(LPError):
    pass


class UnboundedError(LPError):
    pass


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    fun: float
    basis: np.ndarray
    iterations: int


class _Tableau:
    def __init__(self, A, b, tol):
        self.A, self.b, self.tol = A, b, tol
        self.m, self.n = A.shape

    def refactor(self, basis):
        B = self.A[:, basis]
        self.Binv = np.linalg.inv(B)
        self.xB = self.Binv @ self.b

    def pivot(self, r, d):
        # eta update of B^{-1} for column with direction d entering at row r
        piv = d[r]
        row = self.Binv[r] / piv
        self.Binv -= np.outer(d, row)
        self.Binv[r] = row
        theta = self.xB[r] / piv
        self.xB -= theta * d
        self.xB[r] = theta


def _run_phase(tab: _Tableau, cost, basis, allowed, is_artificial, max_iter, refactor_every):
    tol = tab.tol
    it = 0
    tab.refactor(basis)
    in_basis = np.zeros(tab.n, dtype=bool)
    in_basis[basis] = True
    while True:
        if it >= max_iter:
            raise LPError(f"simplex iteration limit {max_iter} reached")
        y = cost[basis] @ tab.Binv
        reduced = cost - y @ tab.A
        candidates = np.flatnonzero((reduced < -tol) & allowed & ~in_basis)
        if candidates.size == 0:
            return basis, it
        j = candidates[0]  # Bland: lowest index
        d = tab.Binv @ tab.A[:, j]
        # artificials still basic are pinned at zero: any nonzero entry forces them out
        pinned = is_artificial[basis] & (np.abs(d) > tol)
        pos = d > tol
        if not np.any(pos | pinned):
            raise UnboundedError("LP objective unbounded below")
        ratios = np.full(tab.m, np.inf)
        ratios[pos] = np.maximum(tab.xB[pos], 0.0) / d[pos]
        ratios[pinned] = 0.0
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol)
        r = ties[np.argmin(basis[ties])]  # Bland: lowest basic index leaves
        tab.pivot(r, d)
        in_basis[basis[r]] = False
        basis[r] = j
        in_basis[j] = True
        it += 1
        if it % refactor_every == 0:
            tab.refactor(basis)


def simplex(c, A_eq, b_eq, tol: float = 1e-10, max_iter: int = 50_000, refactor_every: int = 50) -> LPResult:
    c = np.asarray(c, dtype=float)
    A = np.array(A_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    A_full = np.hstack([A, np.eye(m)])
    tab = _Tableau(A_full, b, tol)
    is_art = np.zeros(n + m, dtype=bool)
    is_art[n:] = True
    basis = np.arange(n, n + m)

    phase1_cost = is_art.astype(float)
    allowed = np.ones(n + m, dtype=bool)
    basis, it1 = _run_phase(tab, phase1_cost, basis, allowed, np.zeros(n + m, bool), max_iter, refactor_every)
    tab.refactor(basis)
    infeas = float(np.sum(tab.xB[is_art[basis]]))
    if infeas > 1e-8 * max(1.0, float(np.abs(b).max())):
        raise InfeasibleError(f"LP infeasible (phase-1 residual {infeas:.3g})")

    cost = np.concatenate([c, np.zeros(m)])
    allowed = ~is_art
    basis, it2 = _run_phase(tab, cost, basis, allowed, is_art, max_iter - it1, refactor_every)
    tab.refactor(basis)
    x = np.zeros(n + m)
    x[basis] = tab.xB
    x = x[:n]
    x[np.abs(x) < tol] = 0.0
    return LPResult(x, float(c @ x), basis.copy(), it1 + it2)
