"""Steering-equivalent observables and the LHS model <-> joint observable map.

A state assemblage ``rho_{a|x}`` with reduced state ``rho_B`` is mapped to
POVMs on ``range(rho_B)``::

    B_{a|x} = rho~_B^{-1/2} rho~_{a|x} rho~_B^{-1/2},   rho~ = P rho P^dag

where ``P`` maps onto the range. The assemblage is unsteerable exactly when
``{B_{a|x}}`` is jointly measurable, and LHS models correspond one-to-one to
joint observables through the same conjugation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .assemblage import MeasurementAssemblage, StateAssemblage, check
from .linalg import restricted_inv_sqrt

__all__ = [
    "SteeringEquivalentResult",
    "LhsModel",
    "JointObservable",
    "InconsistentModelError",
    "se_observables",
    "lhs_to_joint",
    "joint_to_lhs",
    "assemblage_from_measurements",
    "reconstruct",
    "response_array",
]

RECONSTRUCTION_TOL = 1e-7
NORMALIZATION_TOL = 1e-8
RANGE_TOL = 1e-8

log = logging.getLogger(__name__)


class InconsistentModelError(ValueError):
    pass


@dataclass(frozen=True)
class SteeringEquivalentResult:
    observables: MeasurementAssemblage
    proj: np.ndarray  # rank x dim, rows span range(rho_B)
    inv_sqrt: np.ndarray  # (P rho_B P^dag)^{-1/2}
    sqrt: np.ndarray  # (P rho_B P^dag)^{1/2}
    rank: int
    # largest ||P^dag P rho P^dag P - rho||_F over the assemblage
    range_residual: float = 0.0

    @property
    def trivially_jm(self) -> bool:
        return self.rank == 1

    def restrict(self, op) -> np.ndarray:
        return self.proj @ op @ self.proj.conj().T

    def embed(self, op) -> np.ndarray:
        return self.proj.conj().T @ op @ self.proj


def response_array(outcomes_per_setting, n_hidden, fill=0.0):
    """Dense response array indexed by (x, a, lambda); unused outcomes are zero."""
    return np.full((len(outcomes_per_setting), max(outcomes_per_setting), n_hidden), fill)


def reconstruct(response, ops, outcomes_per_setting):
    """``sum_lambda p(a|x, lambda) ops[lambda]`` for every (x, a)."""
    stack = np.asarray(ops)
    return [[np.tensordot(response[x, a], stack, axes=1) for a in range(n)]
            for x, n in enumerate(outcomes_per_setting)]


def _check_response(response, outcomes_per_setting, n_hidden):
    response = np.asarray(response, dtype=float)
    if response.shape != (len(outcomes_per_setting), max(outcomes_per_setting), n_hidden):
        raise ValueError(f"response array has shape {response.shape}")
    if np.any(response < -1e-12):
        raise ValueError("response probabilities must be nonnegative")
    for x, n in enumerate(outcomes_per_setting):
        if np.any(response[x, n:] != 0):
            raise ValueError(f"setting {x} has responses for nonexistent outcomes")
        if np.max(np.abs(response[x, :n].sum(axis=0) - 1.0), initial=0.0) > 1e-9:
            raise ValueError(f"responses for setting {x} do not sum to one")
    return response


@dataclass(frozen=True)
class LhsModel:
    """Hidden states ``sigma_lambda`` and responses ``p(a|x, lambda)``."""

    states: tuple
    response: np.ndarray
    outcomes_per_setting: tuple

    def __post_init__(self):
        states = tuple(np.asarray(s, dtype=complex) for s in self.states)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "outcomes_per_setting", tuple(self.outcomes_per_setting))
        object.__setattr__(self, "response", _check_response(
            self.response, self.outcomes_per_setting, len(states)))

    def assemblage(self) -> list[list[np.ndarray]]:
        return reconstruct(self.response, self.states, self.outcomes_per_setting)

    def residual(self, target: StateAssemblage) -> float:
        rec = self.assemblage()
        return max(float(np.linalg.norm(rec[x][a] - op)) for (x, a), op in target.items())

    def violations(self, target: StateAssemblage | None = None) -> list[str]:
        out = []
        for i, s in enumerate(self.states):
            if np.linalg.eigvalsh(s)[0] < -1e-8:
                out.append(f"hidden state {i} not PSD")
        tr = sum(np.trace(s).real for s in self.states)
        if abs(tr - 1.0) > NORMALIZATION_TOL:
            out.append(f"hidden states have total trace {tr:.10f}")
        if target is not None:
            res = self.residual(target)
            if res > RECONSTRUCTION_TOL:
                out.append(f"reconstruction residual {res:.3e}")
        return out


@dataclass(frozen=True)
class JointObservable:
    """Parent POVM ``G_lambda`` with post-processing ``p(a|x, lambda)``."""

    effects: tuple
    response: np.ndarray
    outcomes_per_setting: tuple
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        effects = tuple(np.asarray(g, dtype=complex) for g in self.effects)
        object.__setattr__(self, "effects", effects)
        object.__setattr__(self, "outcomes_per_setting", tuple(self.outcomes_per_setting))
        object.__setattr__(self, "response", _check_response(
            self.response, self.outcomes_per_setting, len(effects)))

    def marginals(self) -> MeasurementAssemblage:
        return MeasurementAssemblage(
            reconstruct(self.response, self.effects, self.outcomes_per_setting))

    def residual(self, target: MeasurementAssemblage) -> float:
        rec = reconstruct(self.response, self.effects, self.outcomes_per_setting)
        return max(float(np.linalg.norm(rec[x][a] - op)) for (x, a), op in target.items())

    def violations(self, target: MeasurementAssemblage | None = None) -> list[str]:
        out = []
        for i, g in enumerate(self.effects):
            if np.linalg.eigvalsh(g)[0] < -1e-8:
                out.append(f"effect {i} not PSD")
        d = self.effects[0].shape[0]
        res = float(np.linalg.norm(sum(self.effects) - np.eye(d)))
        if res > NORMALIZATION_TOL:
            out.append(f"effects sum to identity only up to {res:.3e}")
        if target is not None:
            res = self.residual(target)
            if res > RECONSTRUCTION_TOL:
                out.append(f"reconstruction residual {res:.3e}")
        return out


def se_observables(assemblage: StateAssemblage, rank_tol=1e-9) -> SteeringEquivalentResult:
    """Bob's steering-equivalent observables on ``range(rho_B)``.

    The basis of the range is the eigenbasis of ``rho_B`` in descending order
    of eigenvalue. ``range_residual`` records how far the elements stick out
    of the detected range; it is zero analytically.
    """
    check(assemblage)
    rho_b = assemblage.reduced_state
    proj, inv_sqrt = restricted_inv_sqrt(rho_b, rank_tol)
    sqrt = np.diag(1.0 / np.diag(inv_sqrt).real).astype(complex)
    keep = proj.conj().T @ proj
    range_res = max(float(np.linalg.norm(keep @ op @ keep - op)) for _, op in assemblage.items())
    if range_res > RANGE_TOL:
        log.warning("assemblage leaves the detected range of rho_B by %.3e; "
                    "the rank decision (rank_tol=%g) may be too aggressive", range_res, rank_tol)
    settings = []
    for s in assemblage.elements:
        povm = []
        for op in s:
            b = inv_sqrt @ (proj @ op @ proj.conj().T) @ inv_sqrt
            povm.append(0.5 * (b + b.conj().T))
        settings.append(povm)
    return SteeringEquivalentResult(
        observables=MeasurementAssemblage(settings),
        proj=proj,
        inv_sqrt=inv_sqrt,
        sqrt=sqrt,
        rank=proj.shape[0],
        range_residual=range_res,
    )


def lhs_to_joint(lhs: LhsModel, se: SteeringEquivalentResult, tol=RECONSTRUCTION_TOL) -> JointObservable:
    """Joint observable ``G = rho~_B^{-1/2} sigma~ rho~_B^{-1/2}`` for an LHS model."""
    effects = []
    for sigma in lhs.states:
        g = se.inv_sqrt @ se.restrict(sigma) @ se.inv_sqrt
        effects.append(0.5 * (g + g.conj().T))
    joint = JointObservable(effects, lhs.response, lhs.outcomes_per_setting)
    res = joint.residual(se.observables)
    if res > tol:
        raise InconsistentModelError(
            f"LHS model does not reproduce the assemblage behind these SE observables "
            f"(residual {res:.3e})")
    return joint


def joint_to_lhs(joint: JointObservable, se: SteeringEquivalentResult, tol=RECONSTRUCTION_TOL) -> LhsModel:
    """Inverse of :func:`lhs_to_joint`: ``sigma = P^dag rho~_B^{1/2} G rho~_B^{1/2} P``."""
    res = joint.residual(se.observables)
    if res > tol:
        raise InconsistentModelError(
            f"joint observable does not reproduce the SE observables (residual {res:.3e})")
    states = []
    for g in joint.effects:
        s = se.embed(se.sqrt @ g @ se.sqrt)
        states.append(0.5 * (s + s.conj().T))
    return LhsModel(states, joint.response, joint.outcomes_per_setting)


def assemblage_from_measurements(m: MeasurementAssemblage) -> StateAssemblage:
    """The steering problem ``{M_{a|x} / d}`` with ``rho_B = I/d`` behind a JM problem."""
    return StateAssemblage([[op / m.dim for op in s] for s in m.elements])
