"""Damped Newton minimizer used as the ground-truth reference.

Convergence is declared in the Hessian-dual norm
``||grad^2 f(x)^{-1/2} grad f(x)||`` (the Newton decrement), which is the
natural scale-free measure for the certified comparisons downstream: a
decrement of ``1e-12`` pins the minimizer far below every tolerance the
bound checks use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HessianNotPd, LineSearchFailed, MaxIterExceeded
from .linalg import as_vector
from .oracle import Oracle

__all__ = ["SolveResult", "newton_minimize"]

ARMIJO_SLOPE = 1e-4
BACKTRACK_FACTOR = 0.5
MIN_STEP = 1e-18
# Below this Newton decrement the damping is dropped; see the loop body.
PURE_NEWTON_THRESHOLD = 1e-5


@dataclass
class SolveResult:
    xhat: np.ndarray
    value: float
    grad_norm_dual: float
    iterations: int
    converged: bool


def newton_minimize(
    f: Oracle,
    x0,
    tol: float | None = None,
    max_iter: int = 100,
) -> SolveResult:
    """Minimize ``f`` from ``x0`` by damped Newton with backtracking.

    Parameters
    ----------
    f : Oracle
        Objective; its Hessian must be positive definite along the path.
    x0 : array_like
        Starting point.
    tol : float, optional
        Target Newton decrement.  Defaults to ``1e-12 * (1 + |f(x0)|)``.
    max_iter : int
        Iteration cap; exceeding it raises :class:`MaxIterExceeded`.

    Returns
    -------
    SolveResult
        With ``converged=True`` and ``grad_norm_dual <= tol``.

    Raises
    ------
    HessianNotPd
        If a Cholesky factorization fails at some iterate.
    LineSearchFailed
        If backtracking underflows the step size.
    MaxIterExceeded
        If the tolerance is not reached within ``max_iter`` steps.
    """
    x = as_vector(x0, f.dim).copy()
    fx = f.value(x)
    if tol is None:
        tol = 1e-12 * (1.0 + abs(fx))
    dual_norm = np.inf

    for iteration in range(max_iter):
        g = f.gradient(x)
        H = f.hessian(x)
        try:
            np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            raise HessianNotPd(f"Hessian not positive definite at iteration {iteration}")
        d = -np.linalg.solve(H, g)
        decrement_sq = float(-g @ d)
        dual_norm = float(np.sqrt(max(decrement_sq, 0.0)))
        if dual_norm <= tol:
            return SolveResult(
                xhat=x, value=fx, grad_norm_dual=dual_norm,
                iterations=iteration, converged=True,
            )
        if dual_norm <= PURE_NEWTON_THRESHOLD:
            # Quadratic convergence zone: the Armijo decrease (~ decrement^2)
            # is below the floating-point resolution of the value, so take
            # the undamped step instead of comparing values.
            x = x + d
            fx = f.value(x)
            continue
        slope = float(g @ d)
        step = 1.0
        while True:
            trial = x + step * d
            ftrial = f.value(trial)
            if ftrial <= fx + ARMIJO_SLOPE * step * slope:
                break
            step *= BACKTRACK_FACTOR
            if step < MIN_STEP:
                raise LineSearchFailed(
                    f"step underflow at iteration {iteration} (value {fx:.6g})"
                )
        x = trial
        fx = ftrial

    raise MaxIterExceeded(f"Newton decrement {dual_norm:.3e} > {tol:.3e} after {max_iter} iterations")
