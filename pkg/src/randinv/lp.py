"""Dense two-phase primal simplex with Bland's anti-cycling rule.

Intended for the tiny programs arising from minimax inversion (a few dozen
variables).  Solves::

    minimize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                x >= 0

The floating-point run is checked against the original data (primal
feasibility, dual feasibility of ``y = B^-T c_B`` and a zero duality gap).
Probability matrices with entries near 1e-20 can produce bases so badly
conditioned that the float tableau is meaningless; when the check fails the
program is re-solved in exact rational arithmetic, where Bland's rule
guarantees termination.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

TOL = 1e-9
PIVOT_TOL = 1e-7


class LPError(ArithmeticError):
    """The program is infeasible, unbounded, or the pivoting broke down."""


@dataclass
class LPResult:
    x: np.ndarray
    fun: float
    nit: int
    exact: bool = False


# ------------------------------------------------------------ float path


def _pivot(T: np.ndarray, r: int, j: int) -> None:
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])
    T[:, j] = 0.0
    T[r, j] = 1.0


def _tableau(A: np.ndarray, b: np.ndarray, cost: np.ndarray, basis: list[int], tol: float) -> np.ndarray:
    """Tableau for ``basis`` rebuilt from the original data (objective in the last row)."""
    m, n = A.shape
    try:
        BA = np.linalg.solve(A[:, basis], np.column_stack([A, b]))
    except np.linalg.LinAlgError as exc:
        raise LPError(f"singular basis: {exc}") from None
    rhs = BA[:, -1]
    rhs[(rhs < 0) & (rhs > -tol)] = 0.0
    T = np.empty((m + 1, n + 1))
    T[:m] = BA
    cb = cost[basis]
    T[-1, :n] = cost - cb @ BA[:, :n]
    T[-1, -1] = -cb @ rhs
    T[-1, basis] = 0.0
    return T


def _leaving(col: np.ndarray, rhs: np.ndarray, basis: list[int], tol: float) -> int | None:
    """Ratio test; ties go to the smallest basic index (Bland).

    Tied rows whose pivot element is tiny next to the largest tied one are
    skipped: on degenerate vertices they would make the next basis nearly
    singular.
    """
    rows = np.flatnonzero(col > tol)
    if rows.size == 0:
        return None
    ratios = rhs[rows] / col[rows]
    tied = rows[ratios <= ratios.min() + tol]
    big = col[tied].max()
    tied = [r for r in tied if col[r] >= 1e-3 * big]
    return min(tied, key=lambda r: basis[r])


def _run(A, b, cost, basis, tol, max_iter, stop_at=None):
    """Bland-rule iterations on a tableau rebuilt from the data every step.

    Entering columns whose pivot element would be below ``PIVOT_TOL`` are
    passed over while a better-conditioned improving column exists.
    ``stop_at`` ends the run once the objective drops to that value (phase 1
    needs feasibility only).
    """
    m, n = A.shape
    for it in range(max_iter):
        T = _tableau(A, b, cost, basis, tol)
        if stop_at is not None and -T[-1, -1] <= stop_at:
            return it, T
        choice, fallback = None, None
        for j in np.flatnonzero(T[-1, :n] < -tol):
            r = _leaving(T[:m, j], T[:m, -1], basis, tol)
            if r is None:
                # an improving column with no positive entry is a ray
                raise LPError("objective is unbounded")
            if T[r, j] >= PIVOT_TOL:
                choice = (r, j)
                break
            if fallback is None or T[r, j] > T[fallback]:
                fallback = (r, j)
        choice = choice or fallback
        if choice is None:
            return it, T
        basis[choice[0]] = int(choice[1])
    raise LPError(f"simplex did not converge in {max_iter} iterations")


def _float_solve(A, b, cost, tol, max_iter):
    m, nx = A.shape
    A1 = np.hstack([A, np.eye(m)])
    cost1 = np.concatenate([np.zeros(nx), np.ones(m)])
    basis = list(range(nx, nx + m))
    feas = tol * max(1.0, np.abs(b).max(initial=0.0))
    nit, T = _run(A1, b, cost1, basis, tol, max_iter, stop_at=feas)
    if -T[-1, -1] > feas:
        raise LPError("program is infeasible")

    # drive remaining artificials out of the basis; a row that cannot be
    # pivoted on is a combination of the others and is dropped
    drop = []
    for r in range(m):
        if basis[r] >= nx:
            j = int(np.argmax(np.abs(T[r, :nx])))
            if abs(T[r, j]) <= tol:
                drop.append(r)
                continue
            _pivot(T, r, j)
            basis[r] = j
    keep_rows = list(range(m))
    if drop:
        redundant = {basis[r] - nx for r in drop}
        keep_rows = [i for i in range(m) if i not in redundant]
        basis = [basis[r] for r in range(m) if r not in drop]
    A, b = A[keep_rows], b[keep_rows]

    it2, T = _run(A, b, cost, basis, tol, max_iter)
    x = np.zeros(nx)
    x[basis] = T[:-1, -1]
    return x, nit + it2, A, b, basis


def _certified(A, b, cost, x, basis, tol) -> bool:
    """Tolerance certificate of optimality computed from the original data."""
    scale_b = max(1.0, float(np.abs(b).max(initial=0.0)))
    scale_c = max(1.0, float(np.abs(cost).max(initial=0.0)))
    if x.min(initial=0.0) < -tol * scale_b or np.abs(A @ x - b).max(initial=0.0) > tol * scale_b:
        return False
    try:
        y = np.linalg.solve(A[:, basis].T, cost[basis])
    except np.linalg.LinAlgError:
        return False
    if not np.all(np.isfinite(y)):
        return False
    if (cost - A.T @ y).min(initial=0.0) < -tol * scale_c:
        return False
    return abs(cost @ x - b @ y) <= tol * scale_b * scale_c


# ------------------------------------------------------------ exact path


def _exact_pivot(T: list[list[Fraction]], r: int, j: int) -> None:
    piv = T[r][j]
    row = [v / piv for v in T[r]]
    T[r] = row
    for i, other in enumerate(T):
        if i != r:
            f = other[j]
            if f:
                T[i] = [a - f * c for a, c in zip(other, row)]


def _exact_run(T, basis, ncols, max_iter) -> int:
    m = len(T) - 1
    for it in range(max_iter):
        obj = T[-1]
        j = next((j for j in range(ncols) if obj[j] < 0), None)
        if j is None:
            return it
        best, best_ratio = None, None
        for r in range(m):
            if T[r][j] > 0:
                ratio = T[r][-1] / T[r][j]
                if best is None or ratio < best_ratio or (ratio == best_ratio and basis[r] < basis[best]):
                    best, best_ratio = r, ratio
        if best is None:
            raise LPError("objective is unbounded")
        _exact_pivot(T, best, j)
        basis[best] = j
    raise LPError(f"exact simplex did not converge in {max_iter} iterations")


def _exact_solve(A, b, cost, max_iter):
    m, nx = A.shape
    F = [[Fraction(float(v)) for v in row] for row in A]
    fb = [Fraction(float(v)) for v in b]
    fc = [Fraction(float(v)) for v in cost]
    zero, one = Fraction(0), Fraction(1)
    T = [F[i] + [one if k == i else zero for k in range(m)] + [fb[i]] for i in range(m)]
    T.append([-sum((T[i][k] for i in range(m)), zero) for k in range(nx)] + [zero] * m + [-sum(fb, zero)])
    basis = list(range(nx, nx + m))
    nit = _exact_run(T, basis, nx + m, max_iter)
    if T[-1][-1] != 0:
        raise LPError("program is infeasible")
    keep = []
    for r in range(m):
        if basis[r] >= nx:
            j = next((j for j in range(nx) if T[r][j] != 0), None)
            if j is None:
                continue
            _exact_pivot(T, r, j)
            basis[r] = j
        keep.append(r)
    T = [T[r][:nx] + [T[r][-1]] for r in keep]
    basis = [basis[r] for r in keep]
    objrow = fc + [zero]
    for r, j in enumerate(basis):
        cj = fc[j]
        if cj:
            objrow = [a - cj * v for a, v in zip(objrow, T[r])]
    T.append(objrow)
    nit += _exact_run(T, basis, nx, max_iter)
    x = np.zeros(nx)
    for r, j in enumerate(basis):
        x[j] = float(T[r][-1])
    return x, nit


# ------------------------------------------------------------- interface


def simplex(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, tol: float = TOL, max_iter: int = 10000) -> LPResult:
    c = np.asarray(c, dtype=np.float64)
    n = c.shape[0]
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=np.float64))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=np.float64)
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=np.float64))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=np.float64)
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # standard form over x (n) | slacks (m_ub), rows sign-flipped so b >= 0
    nx = n + m_ub
    A = np.zeros((m, nx))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    cost = np.concatenate([c, np.zeros(m_ub)])

    try:
        x, nit, Ak, bk, basis = _float_solve(A, b, cost, tol, max_iter)
        if _certified(Ak, bk, cost, x, basis, tol):
            return LPResult(x=x[:n], fun=float(c @ x[:n]), nit=nit)
    except LPError:
        pass  # possibly a rounding artefact; the exact run decides
    x, nit = _exact_solve(A, b, cost, max_iter)
    return LPResult(x=x[:n], fun=float(c @ x[:n]), nit=nit, exact=True)
