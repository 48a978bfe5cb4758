"""Incompatibility quantifiers.

* incompatibility robustness (IR): least ``t`` such that ``(M + t N)/(1 + t)``
  is jointly measurable for some measurement assemblage ``N``; the mixing
  weight ``t/(1+t)`` is the general-noise tolerance ``lambda_g``;
* white-noise robustness ``lambda_w``: least ``lambda`` such that
  ``(1 - lambda) M + lambda N`` is jointly measurable, with trivial noise
  ``N_{a|x} = p_a I`` (uniform, or biased ``p_a = (1 + a b)/2`` for two
  outcomes);
* incompatibility weight (IW): least weight of the incompatible part in a
  split ``M = (1 - w) O + w N`` with ``O`` jointly measurable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .assemblage import MeasurementAssemblage, check, validate
from .sdp import (
    FEASIBILITY_TOL,
    deterministic_strategies,
    solve_robustness,
    solve_visibility,
    solve_weight,
    trivial_noise,
)
from .semap import JointObservable, reconstruct

__all__ = [
    "RobustnessReport",
    "incompatibility_robustness",
    "white_noise_robustness",
    "incompatibility_weight",
    "channel_monotonicity_check",
    "half_bound_check",
    "mix_with_noise",
    "apply_heisenberg",
    "depolarizing_kraus",
    "random_unital_channel",
    "unitary_kraus",
]

log = logging.getLogger(__name__)

# robustness above which a mixture counts as incompatible during bisection;
# a few times the solver's attainable accuracy on degenerate boundary instances
BISECTION_DECISION_TOL = 2e-9


@dataclass
class RobustnessReport:
    kind: str  # "general", "white", "weight"
    value: float
    margin: float
    bias: float = 0.0
    noise: MeasurementAssemblage | None = None
    joint: JointObservable | None = None
    info: dict = field(default_factory=dict)

    @property
    def mixing_weight(self) -> float:
        """``t/(1+t)`` for the general robustness, the value itself otherwise."""
        if self.kind == "general":
            return self.value / (1.0 + self.value)
        return self.value


def _split(flat, outs):
    out, i = [], 0
    for n in outs:
        out.append(flat[i:i + n])
        i += n
    return out


def incompatibility_robustness(m: MeasurementAssemblage) -> RobustnessReport:
    """IR from the program ``min tr(sum G)/d`` with ``sum p G >= M``, ``sum G ~ I``."""
    check(m)
    d = m.dim
    eye = np.eye(d, dtype=complex)
    strat = deterministic_strategies(m.outcomes_per_setting)
    sol = solve_robustness([list(s) for s in m.elements], strat.response, eye / d, eye)
    t = max(sol.value - 1.0, 0.0)
    outs = m.outcomes_per_setting
    joint = JointObservable([g / (1.0 + t) for g in sol.parents], strat.response, outs)
    info = {"gap": sol.solution.relative_gap, "iterations": sol.solution.iterations,
            "raw_value": sol.value - 1.0}
    noise = None
    if t > 1e-9:
        noise = MeasurementAssemblage(_split([s / t for s in sol.slacks], outs))
        info["noise_violations"] = [str(v) for v in validate(noise)]
    return RobustnessReport("general", t, t, noise=noise, joint=joint, info=info)


def mix_with_noise(m: MeasurementAssemblage, lam, bias=0.0) -> MeasurementAssemblage:
    """``(1 - lam) M_{a|x} + lam p_a I``."""
    weights = trivial_noise(m.outcomes_per_setting, bias)
    eye = np.eye(m.dim)
    return MeasurementAssemblage([[(1.0 - lam) * op + lam * w[a] * eye for a, op in enumerate(s)]
                                  for s, w in zip(m.elements, weights)])


def _is_jm(m: MeasurementAssemblage, tol=BISECTION_DECISION_TOL) -> bool:
    # the decision rule of jm_feasible, judged on the dual objective: it is a
    # lower bound on the robustness, whereas the primal one overshoots by the gap
    d = m.dim
    eye = np.eye(d, dtype=complex)
    strat = deterministic_strategies(m.outcomes_per_setting)
    sol = solve_robustness([list(s) for s in m.elements], strat.response, eye / d, eye)
    return sol.solution.dual_value - 1.0 <= tol


def white_noise_robustness(m: MeasurementAssemblage, bias=0.0, tol=1e-7, method="bisection",
                           max_steps=40) -> RobustnessReport:
    """Least noise weight ``lambda`` making ``(1 - lambda) M + lambda p I`` jointly measurable.

    ``method="bisection"`` brackets ``lambda`` in [0, 1] with the robustness
    test, stopping when the bracket is below ``tol`` or after ``max_steps``.
    ``method="sdp"`` solves the visibility program once.

    The bisection is only as sharp as ``BISECTION_DECISION_TOL`` divided by
    the slope of the robustness in ``lambda``. That slope is small when the
    noise is rank deficient (``|bias| = 1``) and the observables are nearly
    parallel: for two sharp qubit observables at angle ``theta`` it is about
    ``0.07 theta^2``. The visibility program has no interior in that regime
    and may fail outright.
    """
    check(m)
    if not -1.0 <= bias <= 1.0:
        raise ValueError("bias must lie in [-1, 1]")
    weights = trivial_noise(m.outcomes_per_setting, bias)
    if method == "sdp":
        eye = np.eye(m.dim, dtype=complex)
        strat = deterministic_strategies(m.outcomes_per_setting)
        noise = [[w * eye for w in ws] for ws in weights]
        vis = solve_visibility([list(s) for s in m.elements], strat.response, noise, cap=1.0)
        lam = max(1.0 - vis.visibility, 0.0)
        return RobustnessReport("white", lam, lam, bias=bias, info={"method": "sdp"})
    if method != "bisection":
        raise ValueError(f"unknown method {method!r}")

    if _is_jm(m):
        return RobustnessReport("white", 0.0, 0.0, bias=bias, info={"method": "bisection", "steps": 0})
    lo, hi = 0.0, 1.0
    steps = 0
    while hi - lo > tol and steps < max_steps:
        mid = 0.5 * (lo + hi)
        if _is_jm(mix_with_noise(m, mid, bias)):
            hi = mid
        else:
            lo = mid
        steps += 1
    return RobustnessReport("white", hi, hi, bias=bias,
                            info={"method": "bisection", "steps": steps, "bracket": [lo, hi]})


def incompatibility_weight(m: MeasurementAssemblage) -> RobustnessReport:
    """IW from ``max tr(sum G)/d`` subject to ``sum p G <= M``, ``sum G ~ I``.

    The optimum ``s`` is the largest jointly measurable weight; ``IW = 1 - s``.
    The compatible part is ``sum p G / s`` and the remainder
    ``(M - sum p G)/(1 - s)``.
    """
    check(m)
    d = m.dim
    eye = np.eye(d, dtype=complex)
    outs = m.outcomes_per_setting
    strat = deterministic_strategies(outs)
    sol = solve_weight([list(s) for s in m.elements], strat.response, eye / d, eye)
    s = min(max(-sol.value, 0.0), 1.0)
    w = 1.0 - s
    compatible = reconstruct(strat.response, sol.parents, outs)
    rec = max(float(np.linalg.norm(compatible[x][a] + sol.slacks[i] - op))
              for i, ((x, a), op) in enumerate(m.items()))
    info = {"gap": sol.solution.relative_gap, "reconstruction": rec}
    joint = JointObservable([g / s for g in sol.parents], strat.response, outs) if s > 1e-9 else None
    noise = MeasurementAssemblage(_split([x / w for x in sol.slacks], outs)) if w > 1e-9 else None
    return RobustnessReport("weight", w, w, noise=noise, joint=joint, info=info)


# channels in the Heisenberg picture: X -> sum_k K_k^dag X K_k

def apply_heisenberg(m: MeasurementAssemblage, kraus, tol=1e-9) -> MeasurementAssemblage:
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    if any(k.shape[0] != m.dim for k in kraus):
        raise ValueError("Kraus operators do not match the measurement dimension")
    unit = sum(k.conj().T @ k for k in kraus)
    res = float(np.linalg.norm(unit - np.eye(unit.shape[0])))
    if res > tol:
        raise ValueError(f"channel is not unital in the Heisenberg picture (residual {res:.3e})")
    return m.map(lambda op: sum(k.conj().T @ op @ k for k in kraus))


def channel_monotonicity_check(m: MeasurementAssemblage, kraus):
    """IR before and after a unital Heisenberg-picture channel."""
    after_m = apply_heisenberg(m, kraus)
    before = incompatibility_robustness(m).value
    after = incompatibility_robustness(after_m).value
    return before, after


def depolarizing_kraus(p, d=2) -> list[np.ndarray]:
    """Kraus operators of ``X -> (1 - p) X + p tr(X) I/d``."""
    if d == 2:
        from .linalg import PAULI
        ops = [np.sqrt(1 - 3 * p / 4) * np.eye(2)] + [np.sqrt(p / 4) * s for s in PAULI]
        return [np.asarray(k, dtype=complex) for k in ops]
    out = [np.sqrt(1 - p) * np.eye(d, dtype=complex)]
    for i in range(d):
        for j in range(d):
            k = np.zeros((d, d), complex)
            k[i, j] = np.sqrt(p / d)
            out.append(k)
    return out


def unitary_kraus(u) -> list[np.ndarray]:
    return [np.asarray(u, dtype=complex)]


def random_unital_channel(d, n_kraus, rng) -> list[np.ndarray]:
    """Random channel from a Haar-random isometry ``C^d -> C^(d n)``."""
    g = rng.normal(size=(d * n_kraus, d)) + 1j * rng.normal(size=(d * n_kraus, d))
    q, r = np.linalg.qr(g)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return [q[k * d:(k + 1) * d] for k in range(n_kraus)]


def half_bound_check(m: MeasurementAssemblage, tol=1e-7):
    """General-noise and white-noise tolerances ``(lambda_g, lambda_w)``.

    For unbiased qubit effects ``(I + v.sigma)/2`` the anti-aligned noise
    ``(I - v.sigma)/2`` already gives ``lambda_g <= lambda_w / 2``.
    """
    check(m)
    if m.dim != 2:
        raise ValueError("half_bound_check needs qubit measurements")
    for (x, a), op in m.items():
        if abs(np.trace(op).real - 1.0) > 1e-9:
            raise ValueError(f"effect {(x, a)} is biased")
    lam_g = incompatibility_robustness(m).mixing_weight
    lam_w = white_noise_robustness(m, tol=tol).value
    if lam_g > lam_w / 2 + tol:
        log.warning("lambda_g = %.9f exceeds lambda_w/2 = %.9f", lam_g, lam_w / 2)
    return lam_g, lam_w
