"""Differentiable problem oracles and perturbation constructors.

An :class:`Oracle` exposes value, gradient, Hessian, and directional third
and fourth derivatives of a smooth function.  The directional forms are the
only higher-order access the rest of the package ever needs:

``third_dir(x, u)``
    the vector ``<grad^3 f(x), u (x) u (x) e_i>`` over coordinates ``i``,
``fourth_dir(x, u)``
    the vector ``<grad^4 f(x), u (x) u (x) u (x) e_i>``.

Problems that lack analytic higher derivatives fall back to symmetric
finite differences of the Hessian; the ``has_third`` / ``has_fourth``
flags tell certified operations whether the analytic forms exist.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .diagnostics import CheckResult, DiagnosticsRecord
from .errors import BadLabels, DimensionMismatch, NotPsd
from .linalg import SpdOperator, as_vector, spd_from_dense

__all__ = [
    "Oracle",
    "QuadraticOracle",
    "PsdQuadraticOracle",
    "LogisticOracle",
    "LogSumExpOracle",
    "CustomOracle",
    "SumOracle",
    "ScaledOracle",
    "LinearPerturbation",
    "QuadraticPerturbation",
    "SmoothPerturbation",
    "PerturbationSpec",
    "linearly_perturb",
    "quadratically_penalize",
    "smoothly_penalize",
    "apply_perturbation",
    "make_quadratic",
    "make_logistic",
    "make_logsumexp",
    "fd_probe",
]

FD_DIR_STEP = 1e-4  # base step for Hessian differencing, scaled by 1/(1+|u|)


class Oracle:
    """Base class; concrete problems override the derivative methods.

    ``third_dir`` and ``fourth_dir`` have finite-difference defaults so
    diagnostics can always run; subclasses with closed forms set
    ``has_third`` / ``has_fourth`` to advertise certified accuracy.
    """

    dim: int
    has_third: bool = False
    has_fourth: bool = False

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, x) -> np.ndarray:
        raise NotImplementedError

    def third_dir(self, x, u) -> np.ndarray:
        x = as_vector(x, self.dim)
        u = as_vector(u, self.dim)
        h = FD_DIR_STEP / (1.0 + float(np.linalg.norm(u)))
        return (self.hessian(x + h * u) - self.hessian(x - h * u)) @ u / (2.0 * h)

    def fourth_dir(self, x, u) -> np.ndarray:
        x = as_vector(x, self.dim)
        u = as_vector(u, self.dim)
        h = FD_DIR_STEP / (1.0 + float(np.linalg.norm(u)))
        return (self.third_dir(x + h * u, u) - self.third_dir(x - h * u, u)) / (2.0 * h)


class QuadraticOracle(Oracle):
    """``f(x) = 0.5 (x - c)' F (x - c)`` with positive definite ``F``."""

    has_third = True
    has_fourth = True

    def __init__(self, curvature: SpdOperator, center=None) -> None:
        self.curvature = curvature
        self.dim = curvature.dim
        self.center = (
            np.zeros(self.dim) if center is None else as_vector(center, self.dim)
        )

    def value(self, x) -> float:
        d = as_vector(x, self.dim) - self.center
        return 0.5 * float(d @ self.curvature.apply(d))

    def gradient(self, x) -> np.ndarray:
        return self.curvature.apply(as_vector(x, self.dim) - self.center)

    def hessian(self, x) -> np.ndarray:
        as_vector(x, self.dim)
        return self.curvature.matrix.copy()

    def third_dir(self, x, u) -> np.ndarray:
        as_vector(x, self.dim)
        as_vector(u, self.dim)
        return np.zeros(self.dim)

    def fourth_dir(self, x, u) -> np.ndarray:
        as_vector(x, self.dim)
        as_vector(u, self.dim)
        return np.zeros(self.dim)


class PsdQuadraticOracle(Oracle):
    """``f(x) = 0.5 x' Q x`` for symmetric positive semidefinite ``Q``.

    Unlike :class:`QuadraticOracle` the matrix may be singular; this is the
    shape of a ridge penalty ``0.5 x' G^2 x``.
    """

    has_third = True
    has_fourth = True

    def __init__(self, Q) -> None:
        Q = np.asarray(Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {Q.shape}")
        scale = max(np.abs(Q).max(), 1e-300)
        if np.abs(Q - Q.T).max() > 1e-12 * scale:
            raise NotPsd("penalty matrix is not symmetric")
        lo = float(np.linalg.eigvalsh(0.5 * (Q + Q.T))[0])
        if lo < -1e-10 * scale:
            raise NotPsd(f"penalty matrix has negative eigenvalue {lo:.3e}")
        self.Q = 0.5 * (Q + Q.T)
        self.dim = Q.shape[0]

    def value(self, x) -> float:
        x = as_vector(x, self.dim)
        return 0.5 * float(x @ self.Q @ x)

    def gradient(self, x) -> np.ndarray:
        return self.Q @ as_vector(x, self.dim)

    def hessian(self, x) -> np.ndarray:
        as_vector(x, self.dim)
        return self.Q.copy()

    def third_dir(self, x, u) -> np.ndarray:
        as_vector(x, self.dim)
        as_vector(u, self.dim)
        return np.zeros(self.dim)

    def fourth_dir(self, x, u) -> np.ndarray:
        as_vector(x, self.dim)
        as_vector(u, self.dim)
        return np.zeros(self.dim)


def _sigmoid(t: np.ndarray) -> np.ndarray:
    # tanh form is overflow-free for any argument sign
    return 0.5 * (1.0 + np.tanh(0.5 * t))


class LogisticOracle(Oracle):
    """Regularized logistic loss.

    ``f(v) = (1/n) sum_i log(1 + exp(-y_i x_i' v)) + 0.5 reg ||v||^2``
    with labels ``y_i`` in ``{-1, +1}``.  With ``t = y x' v`` and
    ``s = sigmoid(t)`` the scalar loss derivatives are

    ``l' = s - 1``, ``l'' = s (1 - s)``, ``l''' = s (1 - s)(1 - 2 s)``,
    ``l'''' = s (1 - s)(1 - 6 s (1 - s))``,

    and the chain rule through ``t`` contributes one factor of ``y x`` per
    order (even powers of ``y`` cancel since ``y^2 = 1``).
    """

    has_third = True
    has_fourth = True

    def __init__(self, X, y, reg: float = 0.0) -> None:
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2:
            raise DimensionMismatch(f"design matrix must be 2-d, got {X.shape}")
        if y.shape != (X.shape[0],):
            raise DimensionMismatch(
                f"labels shape {y.shape} does not match {X.shape[0]} rows"
            )
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise BadLabels("labels must all be -1 or +1")
        if reg < 0:
            raise ValueError("reg must be nonnegative")
        self.X = X
        self.y = y
        self.reg = float(reg)
        self.n, self.dim = X.shape

    def _margins(self, v: np.ndarray) -> np.ndarray:
        return self.y * (self.X @ v)

    def value(self, x) -> float:
        v = as_vector(x, self.dim)
        t = self._margins(v)
        loss = float(np.mean(np.logaddexp(0.0, -t)))
        return loss + 0.5 * self.reg * float(v @ v)

    def gradient(self, x) -> np.ndarray:
        v = as_vector(x, self.dim)
        s = _sigmoid(self._margins(v))
        return self.X.T @ (self.y * (s - 1.0)) / self.n + self.reg * v

    def hessian(self, x) -> np.ndarray:
        v = as_vector(x, self.dim)
        s = _sigmoid(self._margins(v))
        w = s * (1.0 - s)
        H = (self.X.T * w) @ self.X / self.n
        return H + self.reg * np.eye(self.dim)

    def third_dir(self, x, u) -> np.ndarray:
        v = as_vector(x, self.dim)
        u = as_vector(u, self.dim)
        s = _sigmoid(self._margins(v))
        l3 = s * (1.0 - s) * (1.0 - 2.0 * s)
        proj = self.X @ u
        return self.X.T @ (l3 * self.y * proj**2) / self.n

    def fourth_dir(self, x, u) -> np.ndarray:
        v = as_vector(x, self.dim)
        u = as_vector(u, self.dim)
        s = _sigmoid(self._margins(v))
        l4 = s * (1.0 - s) * (1.0 - 6.0 * s * (1.0 - s))
        proj = self.X @ u
        return self.X.T @ (l4 * proj**3) / self.n


class LogSumExpOracle(Oracle):
    """Soft maximum of linear scores plus a ridge.

    ``f(v) = temp * log sum_i exp(x_i' v / temp) + 0.5 reg ||v||^2``.

    Derivatives are cumulants of the score projections under the softmax
    weights ``pi``: with ``beta = 1/temp``, ``s_i = x_i' u``, mean ``m``,
    variance ``V`` and third central moment ``k3`` of ``s`` under ``pi``,

    - gradient: ``sum_i pi_i x_i + reg v``
    - Hessian:  ``beta (sum_i pi_i x_i x_i' - mu mu') + reg I``
    - third:    ``beta^2 sum_i pi_i ((s_i - m)^2 - V) x_i``
    - fourth:   ``beta^3 sum_i pi_i ((s_i - m)^3 - 3 V (s_i - m) - k3) x_i``
    """

    has_third = True
    has_fourth = True

    def __init__(self, X, temp: float = 1.0, reg: float = 0.0) -> None:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise DimensionMismatch(f"design matrix must be 2-d, got {X.shape}")
        if temp <= 0:
            raise ValueError("temp must be positive")
        if reg < 0:
            raise ValueError("reg must be nonnegative")
        self.X = X
        self.temp = float(temp)
        self.reg = float(reg)
        self.n, self.dim = X.shape

    def _softmax(self, v: np.ndarray) -> np.ndarray:
        z = self.X @ v / self.temp
        z = z - z.max()
        e = np.exp(z)
        return e / e.sum()

    def value(self, x) -> float:
        v = as_vector(x, self.dim)
        z = self.X @ v / self.temp
        m = z.max()
        lse = m + np.log(np.exp(z - m).sum())
        return self.temp * float(lse) + 0.5 * self.reg * float(v @ v)

    def gradient(self, x) -> np.ndarray:
        v = as_vector(x, self.dim)
        pi = self._softmax(v)
        return self.X.T @ pi + self.reg * v

    def hessian(self, x) -> np.ndarray:
        v = as_vector(x, self.dim)
        pi = self._softmax(v)
        mu = self.X.T @ pi
        H = (self.X.T * pi) @ self.X - np.outer(mu, mu)
        return H / self.temp + self.reg * np.eye(self.dim)

    def third_dir(self, x, u) -> np.ndarray:
        v = as_vector(x, self.dim)
        u = as_vector(u, self.dim)
        pi = self._softmax(v)
        s = self.X @ u
        m = float(pi @ s)
        c = s - m
        V = float(pi @ c**2)
        beta = 1.0 / self.temp
        return beta**2 * (self.X.T @ (pi * (c**2 - V)))

    def fourth_dir(self, x, u) -> np.ndarray:
        v = as_vector(x, self.dim)
        u = as_vector(u, self.dim)
        pi = self._softmax(v)
        s = self.X @ u
        m = float(pi @ s)
        c = s - m
        V = float(pi @ c**2)
        k3 = float(pi @ c**3)
        beta = 1.0 / self.temp
        return beta**3 * (self.X.T @ (pi * (c**3 - 3.0 * V * c - k3)))


class CustomOracle(Oracle):
    """Wrap plain callables as an oracle; higher orders are optional."""

    def __init__(
        self,
        dim: int,
        value: Callable[[np.ndarray], float],
        gradient: Callable[[np.ndarray], np.ndarray],
        hessian: Callable[[np.ndarray], np.ndarray],
        third_dir: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
        fourth_dir: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
    ) -> None:
        self.dim = int(dim)
        self._value = value
        self._gradient = gradient
        self._hessian = hessian
        self._third = third_dir
        self._fourth = fourth_dir
        self.has_third = third_dir is not None
        self.has_fourth = fourth_dir is not None

    def value(self, x) -> float:
        return float(self._value(as_vector(x, self.dim)))

    def gradient(self, x) -> np.ndarray:
        return np.asarray(self._gradient(as_vector(x, self.dim)), dtype=float)

    def hessian(self, x) -> np.ndarray:
        return np.asarray(self._hessian(as_vector(x, self.dim)), dtype=float)

    def third_dir(self, x, u) -> np.ndarray:
        if self._third is None:
            return super().third_dir(x, u)
        return np.asarray(
            self._third(as_vector(x, self.dim), as_vector(u, self.dim)), dtype=float
        )

    def fourth_dir(self, x, u) -> np.ndarray:
        if self._fourth is None:
            return super().fourth_dir(x, u)
        return np.asarray(
            self._fourth(as_vector(x, self.dim), as_vector(u, self.dim)), dtype=float
        )


class SumOracle(Oracle):
    """Pointwise sum of two oracles on the same space."""

    def __init__(self, first: Oracle, second: Oracle) -> None:
        if first.dim != second.dim:
            raise DimensionMismatch(
                f"summands have dimensions {first.dim} and {second.dim}"
            )
        self.first = first
        self.second = second
        self.dim = first.dim
        self.has_third = first.has_third and second.has_third
        self.has_fourth = first.has_fourth and second.has_fourth

    def value(self, x) -> float:
        return self.first.value(x) + self.second.value(x)

    def gradient(self, x) -> np.ndarray:
        return self.first.gradient(x) + self.second.gradient(x)

    def hessian(self, x) -> np.ndarray:
        return self.first.hessian(x) + self.second.hessian(x)

    def third_dir(self, x, u) -> np.ndarray:
        return self.first.third_dir(x, u) + self.second.third_dir(x, u)

    def fourth_dir(self, x, u) -> np.ndarray:
        return self.first.fourth_dir(x, u) + self.second.fourth_dir(x, u)


class ScaledOracle(Oracle):
    """``c * f`` for a nonnegative weight ``c``."""

    def __init__(self, base: Oracle, weight: float) -> None:
        weight = float(weight)
        if weight < 0:
            raise ValueError(f"weight must be nonnegative, got {weight}")
        self.base = base
        self.weight = weight
        self.dim = base.dim
        self.has_third = base.has_third
        self.has_fourth = base.has_fourth

    def value(self, x) -> float:
        return self.weight * self.base.value(x)

    def gradient(self, x) -> np.ndarray:
        return self.weight * self.base.gradient(x)

    def hessian(self, x) -> np.ndarray:
        return self.weight * self.base.hessian(x)

    def third_dir(self, x, u) -> np.ndarray:
        return self.weight * self.base.third_dir(x, u)

    def fourth_dir(self, x, u) -> np.ndarray:
        return self.weight * self.base.fourth_dir(x, u)


class _LinearShiftOracle(Oracle):
    """``g(x) = f(x) + <x, A>``; all curvature is inherited from ``f``."""

    def __init__(self, base: Oracle, tilt: np.ndarray) -> None:
        self.base = base
        self.tilt = as_vector(tilt, base.dim)
        self.dim = base.dim
        self.has_third = base.has_third
        self.has_fourth = base.has_fourth

    def value(self, x) -> float:
        return self.base.value(x) + float(as_vector(x, self.dim) @ self.tilt)

    def gradient(self, x) -> np.ndarray:
        return self.base.gradient(x) + self.tilt

    def hessian(self, x) -> np.ndarray:
        return self.base.hessian(x)

    def third_dir(self, x, u) -> np.ndarray:
        return self.base.third_dir(x, u)

    def fourth_dir(self, x, u) -> np.ndarray:
        return self.base.fourth_dir(x, u)


# ---------------------------------------------------------------------------
# Perturbation specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearPerturbation:
    """Add the tilt ``<x, vector>`` to the objective."""

    vector: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "vector", as_vector(self.vector))


@dataclass(frozen=True, eq=False)
class QuadraticPerturbation:
    """Add the ridge ``0.5 x' penalty_sq x``; the matrix is ``G^2`` itself."""

    penalty_sq: np.ndarray

    def __post_init__(self) -> None:
        Q = np.asarray(self.penalty_sq, dtype=float)
        PsdQuadraticOracle(Q)  # validates symmetry and positive semidefiniteness
        object.__setattr__(self, "penalty_sq", 0.5 * (Q + Q.T))


@dataclass(frozen=True, eq=False)
class SmoothPerturbation:
    """Add a smooth convex penalty given as its own oracle."""

    penalty: Oracle


PerturbationSpec = Union[LinearPerturbation, QuadraticPerturbation, SmoothPerturbation]


def linearly_perturb(f: Oracle, A) -> Oracle:
    """Return ``g(x) = f(x) + <x, A>``."""
    return _LinearShiftOracle(f, A)


def quadratically_penalize(f: Oracle, penalty_sq) -> Oracle:
    """Return ``f(x) + 0.5 x' G^2 x`` for symmetric positive semidefinite ``G^2``."""
    pen = PsdQuadraticOracle(penalty_sq)
    if pen.dim != f.dim:
        raise DimensionMismatch(
            f"penalty has dimension {pen.dim}, objective has {f.dim}"
        )
    return SumOracle(f, pen)


def smoothly_penalize(f: Oracle, pen: Oracle, probe_seed: int = 0) -> Oracle:
    """Return ``f + pen`` after spot-checking that ``pen`` is convex.

    Convexity cannot be verified globally from black-box access; a handful
    of seeded probe points must have positive semidefinite penalty Hessians,
    which catches sign errors without pretending to be a proof.
    """
    if pen.dim != f.dim:
        raise DimensionMismatch(f"penalty has dimension {pen.dim}, objective has {f.dim}")
    rng = np.random.default_rng(probe_seed)
    for _ in range(5):
        point = rng.standard_normal(pen.dim)
        H = pen.hessian(point)
        scale = max(np.abs(H).max(), 1e-300)
        if float(np.linalg.eigvalsh(0.5 * (H + H.T))[0]) < -1e-8 * scale:
            raise NotPsd("penalty Hessian is indefinite at a probe point")
    return SumOracle(f, pen)


def apply_perturbation(f: Oracle, spec: PerturbationSpec) -> Oracle:
    """Dispatch a perturbation specification onto ``f``."""
    if isinstance(spec, LinearPerturbation):
        return linearly_perturb(f, spec.vector)
    if isinstance(spec, QuadraticPerturbation):
        return quadratically_penalize(f, spec.penalty_sq)
    if isinstance(spec, SmoothPerturbation):
        return smoothly_penalize(f, spec.penalty)
    raise TypeError(f"unknown perturbation spec {type(spec).__name__}")


def make_quadratic(F, center=None) -> QuadraticOracle:
    """Quadratic oracle from an :class:`SpdOperator` or dense SPD matrix."""
    if not isinstance(F, SpdOperator):
        F = spd_from_dense(F)
    return QuadraticOracle(F, center)


def make_logistic(X, y, reg: float = 0.0) -> LogisticOracle:
    return LogisticOracle(X, y, reg)


def make_logsumexp(X, temp: float = 1.0, reg: float = 0.0) -> LogSumExpOracle:
    return LogSumExpOracle(X, temp, reg)


# ---------------------------------------------------------------------------
# Finite-difference probing
# ---------------------------------------------------------------------------


def fd_probe(f: Oracle, x, directions: int = 8, seed: int = 0) -> DiagnosticsRecord:
    """Cross-check analytic derivatives against central finite differences.

    For each random unit direction the mismatch of order ``k`` is measured
    relative to the scale of the order-``k`` analytic quantity, and the
    worst case over directions is reported per order.  Orders 3 and 4 are
    only probed when the oracle advertises analytic forms.
    """
    x = as_vector(x, f.dim)
    rng = np.random.default_rng(seed)
    h1 = 1e-5 * (1.0 + float(np.linalg.norm(x)))
    h3 = FD_DIR_STEP / 2.0  # unit directions, so 1e-4 / (1 + |u|)

    g = f.gradient(x)
    H = f.hessian(x)
    gscale = 1.0 + float(np.linalg.norm(g))
    hscale = 1.0 + float(np.linalg.norm(H, 2))

    worst = {1: 0.0, 2: 0.0, 3: 0.0, 4: 0.0}
    for _ in range(directions):
        u = rng.standard_normal(f.dim)
        u /= np.linalg.norm(u)

        fd1 = (f.value(x + h1 * u) - f.value(x - h1 * u)) / (2.0 * h1)
        worst[1] = max(worst[1], abs(fd1 - float(g @ u)) / gscale)

        fd2 = (f.gradient(x + h1 * u) - f.gradient(x - h1 * u)) / (2.0 * h1)
        worst[2] = max(worst[2], float(np.linalg.norm(fd2 - H @ u)) / hscale)

        if f.has_third:
            fd3 = (f.hessian(x + h3 * u) - f.hessian(x - h3 * u)) @ u / (2.0 * h3)
            t3 = f.third_dir(x, u)
            scale3 = 1.0 + float(np.linalg.norm(t3))
            worst[3] = max(worst[3], float(np.linalg.norm(fd3 - t3)) / scale3)

        if f.has_fourth:
            fd4 = (f.third_dir(x + h3 * u, u) - f.third_dir(x - h3 * u, u)) / (2.0 * h3)
            t4 = f.fourth_dir(x, u)
            scale4 = 1.0 + float(np.linalg.norm(t4))
            worst[4] = max(worst[4], float(np.linalg.norm(fd4 - t4)) / scale4)

    tolerances = {1: 1e-6, 2: 1e-5, 3: 1e-3, 4: 1e-3}
    record = DiagnosticsRecord(
        name="fd_probe",
        metadata={"directions": directions, "seed": seed, "steps": {"h1": h1, "h3": h3}},
    )
    for order in (1, 2, 3, 4):
        if order == 3 and not f.has_third:
            continue
        if order == 4 and not f.has_fourth:
            continue
        record.checks.append(
            CheckResult(
                name=f"order_{order}",
                worst_ratio=worst[order] / tolerances[order],
                passed=worst[order] <= tolerances[order],
                details={"mismatch": worst[order], "tolerance": tolerances[order]},
            )
        )
    return record
