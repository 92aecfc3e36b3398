"""Left-preconditioned BiCGSTAB.

Classic van der Vorst iteration on M^{-1} A x = M^{-1} b with a callable
preconditioner (here: one AIR V-cycle).  Convergence is judged on the
preconditioned relative residual; the report also carries the true
(unpreconditioned) relative residual of the returned iterate, the
half-step residual history, and breakdown/restart bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["SolveReport", "BreakdownError", "bicgstab"]


class BreakdownError(RuntimeError):
    """rho or omega collapsed twice (restart did not help)."""


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residuals: list  # (step, preconditioned relative norm), half steps at k-0.5
    true_residual: float
    restarts: int = 0
    reason: str = ""

    @property
    def final_residual(self):
        return self.residuals[-1][1] if self.residuals else np.nan


def bicgstab(A, b, M=None, tol=1e-12, maxiter=5000, callback=None):
    """Solve A x = b from a zero initial guess.

    Parameters
    ----------
    A : sparse matrix or callable
    M : callable applying the left preconditioner to a vector, or None.
    tol : float
        Relative tolerance on the preconditioned residual norm.
    callback : callable(x, k), optional
        Invoked after every full step with the current iterate.

    Returns
    -------
    x : ndarray
    report : SolveReport
    """
    matvec = A if callable(A) else (lambda v: A @ v)
    prec = M if M is not None else (lambda v: v)
    b = np.asarray(b, dtype=float)
    n = len(b)
    x = np.zeros(n)

    r = prec(b)
    bnorm = np.linalg.norm(r)
    if bnorm == 0.0:
        return x, SolveReport(True, 0, [(0, 0.0)], 0.0, reason="zero right-hand side")
    rhat = r.copy()
    p = r.copy()
    rho = float(rhat @ r)
    resids = [(0, 1.0)]
    restarts = 0
    bnorm_true = np.linalg.norm(b)

    k = 0
    while k < maxiter:
        k += 1
        v = prec(matvec(p))
        denom = float(rhat @ v)
        if abs(denom) < 1e-30 * bnorm * bnorm:
            if restarts >= 1:
                raise BreakdownError(f"rhat'v breakdown at iteration {k}")
            restarts += 1
            r = prec(b - matvec(x))
            rhat = r.copy()
            p = r.copy()
            rho = float(rhat @ r)
            continue
        alpha = rho / denom
        s = r - alpha * v
        snorm = np.linalg.norm(s) / bnorm
        resids.append((k - 0.5, snorm))
        if snorm <= tol:
            x = x + alpha * p
            if callback is not None:
                callback(x, k)
            resids.append((k, snorm))
            break
        t = prec(matvec(s))
        tt = float(t @ t)
        if tt == 0.0:
            x = x + alpha * p
            if callback is not None:
                callback(x, k)
            resids.append((k, snorm))
            break
        omega = float(t @ s) / tt
        x = x + alpha * p + omega * s
        r = s - omega * t
        rnorm = np.linalg.norm(r) / bnorm
        resids.append((k, rnorm))
        if callback is not None:
            callback(x, k)
        if rnorm <= tol:
            break
        rho_new = float(rhat @ r)
        if abs(rho_new) < 1e-30 * bnorm * bnorm or abs(omega) < 1e-30:
            if restarts >= 1:
                raise BreakdownError(f"rho/omega breakdown at iteration {k}")
            restarts += 1
            r = prec(b - matvec(x))
            rhat = r.copy()
            p = r.copy()
            rho = float(rhat @ r)
            continue
        beta = (rho_new / rho) * (alpha / omega)
        rho = rho_new
        p = r + beta * (p - omega * v)

    final = resids[-1][1]
    converged = final <= tol
    true_res = float(np.linalg.norm(b - matvec(x)) /
                     (bnorm_true if bnorm_true > 0 else 1.0))
    return x, SolveReport(converged=converged, iterations=k, residuals=resids,
                          true_residual=true_res, restarts=restarts,
                          reason="" if converged else "maxiter reached")
