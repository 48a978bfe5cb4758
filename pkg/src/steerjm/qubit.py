"""Closed-form qubit tools: Bloch parametrization and incompatibility criteria.

A two-outcome qubit observable is written ``B_+ = ((1 + alpha) I + r.sigma)/2``
and ``B_- = I - B_+``. Three criteria are provided:

* :func:`busch_criterion`, ``|r1 + r2| + |r1 - r2|``; values above 2 certify
  incompatibility,
* :func:`yu_oh_criterion`, necessary and sufficient for two (possibly biased)
  observables,
* :func:`triple_criterion`, a Fermat-Torricelli sum for three unbiased
  observables; values above 4 certify incompatibility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .assemblage import MeasurementAssemblage, StateAssemblage, check
from .linalg import IDENTITY2, PAULI

__all__ = [
    "BlochObservable",
    "BlochEnsembleElement",
    "RankDeficientError",
    "WeiszfeldError",
    "YuOhResult",
    "bloch_of",
    "bloch_observables",
    "se_observables_closed_form",
    "busch_criterion",
    "yu_oh_criterion",
    "weiszfeld_ft_point",
    "triple_criterion",
]


class RankDeficientError(ValueError):
    pass


class WeiszfeldError(ArithmeticError):
    def __init__(self, message, best, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.best = best
        self.residual = residual


def _pauli_dot(v):
    return v[0] * PAULI[0] + v[1] * PAULI[1] + v[2] * PAULI[2]


@dataclass(frozen=True)
class BlochObservable:
    alpha: float
    r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float).reshape(3))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.r))

    def is_valid(self, tol=1e-10) -> bool:
        return self.norm <= 1.0 - abs(self.alpha) + tol

    def effect(self) -> np.ndarray:
        return 0.5 * ((1.0 + self.alpha) * IDENTITY2 + _pauli_dot(self.r))

    def povm(self) -> list[np.ndarray]:
        e = self.effect()
        return [e, IDENTITY2 - e]

    def scaled(self, eta) -> "BlochObservable":
        return BlochObservable(self.alpha, eta * self.r)

    @classmethod
    def from_effect(cls, op) -> "BlochObservable":
        el = bloch_of(op)
        return cls(2.0 * el.t - 1.0, 2.0 * el.s)

    @classmethod
    def sharp(cls, direction) -> "BlochObservable":
        v = np.asarray(direction, dtype=float)
        return cls(0.0, v / np.linalg.norm(v))


class BlochEnsembleElement(NamedTuple):
    """Operator ``t I + s.sigma``."""

    t: float
    s: np.ndarray

    def operator(self) -> np.ndarray:
        return self.t * IDENTITY2 + _pauli_dot(self.s)

    def is_positive(self, tol=1e-12) -> bool:
        return self.t >= np.linalg.norm(self.s) - tol


def bloch_of(op) -> BlochEnsembleElement:
    op = np.asarray(op)
    if op.shape != (2, 2):
        raise ValueError(f"expected a qubit operator, got shape {op.shape}")
    t = float(np.trace(op).real) / 2.0
    s = np.array([float(np.trace(op @ p).real) / 2.0 for p in PAULI])
    return BlochEnsembleElement(t, s)


def bloch_observables(m: MeasurementAssemblage) -> list[BlochObservable]:
    """First-outcome Bloch form of every setting of a two-outcome qubit assemblage."""
    if m.dim != 2 or any(n != 2 for n in m.outcomes_per_setting):
        raise ValueError("need two-outcome qubit measurements")
    return [BlochObservable.from_effect(s[0]) for s in m.elements]


def se_observables_closed_form(a: StateAssemblage, consistency_tol=1e-9) -> list[BlochObservable]:
    """SE observables of a full-rank two-outcome qubit assemblage in closed form.

    With ``rho_{+|x} = t I + s.sigma`` and ``rho_B = I/2 + m.sigma``, the square
    root is ``rho_B^{1/2} = beta0 I + beta.sigma`` with
    ``beta0 = sqrt(1 + sqrt(1 - 4|m|^2)) / 2`` and ``beta = m / (2 beta0)``, and
    ``Gamma = beta0^2 - |beta|^2``. Conjugating by ``(beta0 - beta.sigma)/Gamma``
    gives::

        1 + alpha = 2 (t (beta0^2 + |beta|^2) - 2 beta0 (beta.s)) / Gamma^2
        r         = 2 (Gamma s + 2 (beta.s) beta - 2 t beta0 beta) / Gamma^2
    """
    check(a)
    if a.dim != 2 or any(n != 2 for n in a.outcomes_per_setting):
        raise ValueError("closed form needs two-outcome settings on a qubit")
    elements = [(bloch_of(s[0]), bloch_of(s[1])) for s in a.elements]
    ms = [plus.s + minus.s for plus, minus in elements]
    lam = float(np.linalg.norm(ms[0]))
    for mx in ms[1:]:
        if abs(np.linalg.norm(mx) - lam) > consistency_tol:
            raise ValueError("reduced-state Bloch vector differs between settings")
    if 0.5 - lam <= 1e-9:
        raise RankDeficientError("reduced state is rank deficient; use the general path")
    m = np.mean(ms, axis=0)
    beta0 = 0.5 * math.sqrt(1.0 + math.sqrt(1.0 - 4.0 * lam * lam))
    beta = m / (2.0 * beta0)
    bb = float(beta @ beta)
    gamma = beta0 * beta0 - bb
    out = []
    for plus, _ in elements:
        t, s = plus.t, plus.s
        bs = float(beta @ s)
        alpha = -1.0 + 2.0 * (t * (beta0 * beta0 + bb) - 2.0 * beta0 * bs) / gamma ** 2
        r = 2.0 * (gamma * s + 2.0 * bs * beta - 2.0 * t * beta0 * beta) / gamma ** 2
        out.append(BlochObservable(alpha, r))
    return out


def busch_criterion(o1: BlochObservable, o2: BlochObservable) -> float:
    return float(np.linalg.norm(o1.r + o2.r) + np.linalg.norm(o1.r - o2.r))


class YuOhResult(NamedTuple):
    jm: bool
    margin: float  # rhs - lhs; >= 0 means jointly measurable
    reliable: bool = True


_F2_FLOOR = 1e-14


def _f_squared(alpha, rnorm2):
    p = math.sqrt(max((1.0 + alpha) ** 2 - rnorm2, 0.0))
    q = math.sqrt(max((1.0 - alpha) ** 2 - rnorm2, 0.0))
    return (0.5 * (p + q)) ** 2


def yu_oh_criterion(o1: BlochObservable, o2: BlochObservable) -> YuOhResult:
    """Exact joint-measurability test for two two-outcome qubit observables.

    Jointly measurable iff
    ``(1 - F1^2 - F2^2)(1 - a1^2/F1^2 - a2^2/F2^2) <= (r1.r2 - a1 a2)^2``
    with ``F = (sqrt((1+a)^2 - |r|^2) + sqrt((1-a)^2 - |r|^2))/2``. ``F`` only
    vanishes for sharp unbiased effects; there ``F^2`` is floored at 1e-14
    and a margin within 1e-6 of zero is flagged unreliable.
    """
    f1 = _f_squared(o1.alpha, float(o1.r @ o1.r))
    f2 = _f_squared(o2.alpha, float(o2.r @ o2.r))
    clamped = f1 < _F2_FLOOR or f2 < _F2_FLOOR
    f1, f2 = max(f1, _F2_FLOOR), max(f2, _F2_FLOOR)
    first = 1.0 - f1 - f2
    lhs = first * (1.0 - o1.alpha ** 2 / f1 - o2.alpha ** 2 / f2)
    rhs = (float(o1.r @ o2.r) - o1.alpha * o2.alpha) ** 2
    margin = rhs - lhs
    jm = margin >= 0.0 or first <= 0.0
    return YuOhResult(bool(jm), float(margin), not (clamped and abs(margin) < 1e-6))


def _ft_objective(points, x):
    return float(np.sum(np.linalg.norm(points - x, axis=1)))


def weiszfeld_ft_point(points, tol=1e-12, max_iter=10000, eps=1e-12):
    """Fermat-Torricelli point (geometric median) of ``points``.

    Weiszfeld's fixed point ``x <- sum w_i p_i / sum w_i`` with
    ``w_i = 1/|p_i - x|``, in the Vardi-Zhang form so that iterates landing
    on a data point either stop there (when the point is optimal) or move
    off it. Plain Weiszfeld is sublinear when the optimum sits next to a data
    point, so each step also tries a damped Newton step and the nearest data
    point, keeping whichever candidate has the lowest objective. Stops once
    ``|subgradient| * diameter <= tol``, which bounds the objective gap
    because iterates stay in the convex hull.

    Returns ``(point, total_distance)``.
    """
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[0] < 1:
        raise ValueError("need at least one point")
    diam = max(float(np.max(np.linalg.norm(p[:, None] - p[None], axis=2))), 1e-300)
    x = p.mean(axis=0)
    fx = _ft_objective(p, x)
    resid = math.inf
    for _ in range(max_iter):
        diff = p - x
        dist = np.linalg.norm(diff, axis=1)
        at = dist < eps
        w = np.zeros_like(dist)
        w[~at] = 1.0 / dist[~at]
        pull = (diff * w[:, None]).sum(axis=0)  # minus the gradient away from vertices
        pull_norm = float(np.linalg.norm(pull))
        mult = float(np.sum(at))
        resid = max(pull_norm - mult, 0.0)
        if resid * diam <= tol:
            return x, fx
        if not np.any(~at):
            return x, 0.0
        # nearest data point: optimal iff the others pull on it no harder than its multiplicity
        j = int(np.argmin(dist))
        if not at[j]:
            dj = p - p[j]
            nj = np.linalg.norm(dj, axis=1)
            same = nj < eps
            vpull = float(np.linalg.norm((dj[~same] / nj[~same, None]).sum(axis=0)))
            if vpull <= float(np.sum(same)):
                return p[j].copy(), _ft_objective(p, p[j])
        t = (p[~at] * w[~at, None]).sum(axis=0) / w[~at].sum()
        if mult > 0:
            k = min(1.0, mult / pull_norm)
            cands = [(1.0 - k) * t + k * x]
        else:
            cands = [t]
            u = diff * w[:, None]
            hess = np.eye(p.shape[1]) * w.sum() - (u.T * w) @ u
            hess += 1e-14 * np.trace(hess) * np.eye(p.shape[1])
            step = np.linalg.solve(hess, pull)
            for s in (1.0, 0.5, 0.25, 0.125):
                cands.append(x + s * step)
        vals = [_ft_objective(p, c) for c in cands]
        k = int(np.argmin(vals))
        if vals[k] >= fx and np.allclose(cands[k], x, rtol=0.0, atol=1e-17):
            return x, fx
        if vals[k] > fx:
            # rounding noise only; the Weiszfeld step is a descent step in exact arithmetic
            k = 0
        x, fx = cands[k], vals[k]
    raise WeiszfeldError("Weiszfeld iteration did not converge", x, resid * diam)


def triple_criterion(o1: BlochObservable, o2: BlochObservable, o3: BlochObservable,
                     tol=1e-12) -> float:
    """Sum of distances of ``R_1 = r1 + r2 + r3``, ``R_i = 2 r_{i-1} - R_1`` to their FT point."""
    r1 = o1.r + o2.r + o3.r
    pts = np.array([r1, 2 * o1.r - r1, 2 * o2.r - r1, 2 * o3.r - r1])
    _, total = weiszfeld_ft_point(pts, tol=tol)
    return total
