"""Joint-measurability and LHS-model feasibility as semidefinite programs.

Every program here is posed over deterministic post-processings
``p(a|x, lambda) = delta(a, lambda_x)``, which lose no generality. Two kinds
of program are used:

* robustness programs, ``min <Omega, sum_l G_l>`` subject to
  ``sum_l p(a|x,l) G_l >= T_{a|x}`` and ``sum_l G_l`` proportional to a
  reference operator. With ``Omega = I/d`` and reference ``I`` this is the
  incompatibility robustness program (optimum ``1 + IR``). With
  ``Omega = I`` and reference ``rho_B`` it is the consistent steering
  robustness of a state assemblage, which the SE map sends exactly onto the
  former.
* visibility programs, ``max eta`` subject to ``eta T + (1 - eta) N`` being
  reproduced by a parent POVM (or LHS model), for a fixed trivial noise ``N``.

Feasibility is decided by thresholding the robustness at ``tol``; the
visibility program supplies a signed margin and an exact model.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .assemblage import MeasurementAssemblage, StateAssemblage, check
from .semap import JointObservable, LhsModel, reconstruct
from .solver import OPTIMAL, SdpProblem, SolverError, herm_basis, smat, solve, svec

__all__ = [
    "FEASIBILITY_TOL",
    "BOUNDARY_TOL",
    "DeterministicStrategySet",
    "deterministic_strategies",
    "Witness",
    "FeasibilityResult",
    "RobustnessSolution",
    "solve_robustness",
    "solve_visibility",
    "solve_weight",
    "trivial_noise",
    "jm_feasible",
    "lhs_feasible",
    "strictly_feasible_point",
]

FEASIBILITY_TOL = 1e-7
BOUNDARY_TOL = 1e-6
VISIBILITY_CAP = 2.0


@dataclass(frozen=True)
class DeterministicStrategySet:
    strategies: tuple  # one outcome per setting
    response: np.ndarray  # (x, a, lambda)
    outcomes_per_setting: tuple

    def __len__(self):
        return len(self.strategies)


def deterministic_strategies(outcomes_per_setting) -> DeterministicStrategySet:
    outs = tuple(int(n) for n in outcomes_per_setting)
    strategies = tuple(itertools.product(*[range(n) for n in outs]))
    response = np.zeros((len(outs), max(outs), len(strategies)))
    for lam, strat in enumerate(strategies):
        for x, a in enumerate(strat):
            response[x, a, lam] = 1.0
    response.setflags(write=False)
    return DeterministicStrategySet(strategies, response, outs)


def _pairs(outcomes):
    return [(x, a) for x, n in enumerate(outcomes) for a in range(n)]


def _targets(assemblage):
    return [list(s) for s in assemblage.elements]


def _response_for(assemblage, response):
    outs = assemblage.outcomes_per_setting
    if response is None:
        return deterministic_strategies(outs).response
    response = np.asarray(response, dtype=float)
    if response.shape[:2] != (len(outs), max(outs)):
        raise ValueError(f"response array of shape {response.shape} does not match outcomes {outs}")
    return response


def trivial_noise(outcomes_per_setting, bias=0.0) -> list[list[float]]:
    """Outcome weights ``p_a`` of the trivial noise ``p_a * I``.

    Uniform over outcomes for ``bias == 0``; for two outcomes and a nonzero
    bias ``b`` the weights are ``(1 + a b)/2`` with ``a = +1`` for the first
    outcome and ``a = -1`` for the second.
    """
    out = []
    for n in outcomes_per_setting:
        if bias == 0.0:
            out.append([1.0 / n] * n)
        elif n == 2:
            out.append([(1.0 + bias) / 2.0, (1.0 - bias) / 2.0])
        else:
            raise ValueError("biased noise is defined for two-outcome settings only")
    return out


@dataclass
class RobustnessSolution:
    value: float  # optimal objective of the program
    parents: list  # G_lambda (unnormalized)
    slacks: list  # S_{a|x}
    duals: list  # F_{a|x}, per (x, a)
    response: np.ndarray
    solution: object


def _check_solution(sol, what):
    if sol.status != OPTIMAL:
        raise SolverError(f"{what}: solver finished with status {sol.status} "
                          f"(gap {sol.gap:.2e}, {sol.info})", sol)
    return sol


def _parent_rows(response, x, a, k):
    return np.kron(response[x, a], np.eye(k))


def solve_robustness(targets, response, omega, ref, sign=1.0, tol=1e-9) -> RobustnessSolution:
    """Program ``min sign*<omega, sum G>`` s.t. ``sum p G - sign*S = T``, ``sum G ~ ref``.

    ``sign=+1`` gives robustness programs (``sum p G >= T``); ``sign=-1``
    gives the weight program (``sum p G <= T``), whose optimum is the
    negated largest compatible weight.
    """
    d = targets[0][0].shape[0]
    k = d * d
    outs = [len(s) for s in targets]
    pairs = _pairs(outs)
    nl = response.shape[2]
    nvars = k * (nl + len(pairs))
    rows = np.zeros((k * (len(pairs) + 1), nvars))
    b = np.zeros(k * (len(pairs) + 1))
    for i, (x, a) in enumerate(pairs):
        r = slice(i * k, (i + 1) * k)
        rows[r, : k * nl] = _parent_rows(response, x, a, k)
        rows[r, k * (nl + i): k * (nl + i + 1)] = -sign * np.eye(k)
        b[r] = svec(targets[x][a])
    # sum G - <omega, sum G> ref = 0
    r = slice(len(pairs) * k, (len(pairs) + 1) * k)
    rows[r, : k * nl] = np.tile(np.eye(k) - np.outer(svec(ref), svec(omega)), (1, nl))
    problem = SdpProblem([d] * (nl + len(pairs)),
                         [sign * omega] * nl + [np.zeros((d, d))] * len(pairs), rows, b)
    sol = _check_solution(solve(problem, tol=tol), "robustness program")
    duals = [smat(sol.y[i * k:(i + 1) * k], d) for i in range(len(pairs))]
    return RobustnessSolution(
        value=sol.primal_value,
        parents=sol.primal[:nl],
        slacks=sol.primal[nl:],
        duals=duals,
        response=response,
        solution=sol,
    )


def solve_weight(targets, response, omega, ref, tol=1e-9) -> RobustnessSolution:
    return solve_robustness(targets, response, omega, ref, sign=-1.0, tol=tol)


@dataclass
class VisibilitySolution:
    visibility: float
    parents: list  # reproduce eta*T + (1-eta)*N
    noise: list  # N_{a|x}
    response: np.ndarray
    solution: object


def solve_visibility(targets, response, noise, cap=VISIBILITY_CAP, tol=1e-9) -> VisibilitySolution:
    """Largest ``eta <= cap`` with ``eta T + (1 - eta) N`` reproducible by post-processing."""
    d = targets[0][0].shape[0]
    k = d * d
    outs = [len(s) for s in targets]
    pairs = _pairs(outs)
    nl = response.shape[2]
    nvars = k * nl + 2
    rows = np.zeros((k * len(pairs) + 1, nvars))
    b = np.zeros(k * len(pairs) + 1)
    for i, (x, a) in enumerate(pairs):
        r = slice(i * k, (i + 1) * k)
        rows[r, : k * nl] = _parent_rows(response, x, a, k)
        rows[r, k * nl] = -svec(targets[x][a] - noise[x][a])
        b[r] = svec(noise[x][a])
    rows[-1, k * nl] = rows[-1, k * nl + 1] = 1.0
    b[-1] = cap
    problem = SdpProblem([d] * nl + [1, 1],
                         [np.zeros((d, d))] * nl + [-np.ones((1, 1)), np.zeros((1, 1))], rows, b)
    sol = _check_solution(solve(problem, tol=tol), "visibility program")
    return VisibilitySolution(float(sol.primal[nl][0, 0].real), sol.primal[:nl], noise, response, sol)


@dataclass(frozen=True)
class Witness:
    """Linear witness ``F_{a|x}``: ``sum <F, T> <= 1`` for every compatible ``T``."""

    operators: tuple  # per setting, per outcome
    value: float  # sum <F, T> - 1 on the tested assemblage

    def evaluate(self, assemblage) -> float:
        return sum(float(np.real(np.vdot(self.operators[x][a], op)))
                   for (x, a), op in assemblage.items())


@dataclass
class FeasibilityResult:
    feasible: bool
    robustness: float
    margin: float  # > 0 incompatible/steerable, <= 0 otherwise
    model: object = None  # JointObservable or LhsModel when feasible
    witness: Witness | None = None
    solutions: list = field(default_factory=list)

    @property
    def status(self) -> str:
        if abs(self.margin) < BOUNDARY_TOL:
            return "boundary"
        return "feasible" if self.feasible else "infeasible"


def _group(flat, outs):
    out, i = [], 0
    for n in outs:
        out.append(tuple(flat[i:i + n]))
        i += n
    return tuple(out)


def _feasibility(assemblage, response, omega, ref, noise_ops, trivial_parent, make_model, tol):
    targets = _targets(assemblage)
    outs = assemblage.outcomes_per_setting
    rob = solve_robustness(targets, response, omega, ref)
    value = rob.value - 1.0
    sols = [rob.solution]
    if value > tol:
        witness = Witness(_group(rob.duals, outs), float(rob.solution.dual_value - 1.0))
        return FeasibilityResult(False, value, value, witness=witness, solutions=sols)

    vis = solve_visibility(targets, response, noise_ops)
    sols.append(vis.solution)
    eta = vis.visibility
    margin = 1.0 - eta
    if eta >= 1.0 and trivial_parent is not None:
        # T = (1/eta) [eta T + (1-eta) N] + (1 - 1/eta) N, both parts compatible
        parents = [g / eta + (1.0 - 1.0 / eta) * t for g, t in zip(vis.parents, trivial_parent)]
    else:
        parents = [g / (1.0 + value) for g in rob.parents]
    model = make_model(parents, response, outs)
    return FeasibilityResult(True, max(value, 0.0), margin, model=model, solutions=sols)


def _trivial_parents(response, weights, ref):
    """Parent operators ``q_lambda * ref`` reproducing the noise ``p_a * ref``.

    Deterministic responses admit the product weights directly; other
    post-processings get ``q`` from a small linear feasibility problem.
    """
    nl = response.shape[2]
    det = np.all((response == 0.0) | (response == 1.0))
    if det:
        q = np.ones(nl)
        for x, w in enumerate(weights):
            q *= np.asarray(w) @ response[x, : len(w)]
    else:
        rows = [response[x, a] for x, w in enumerate(weights) for a in range(len(w))]
        rhs = [p for w in weights for p in w]
        lp = linprog(np.zeros(nl), A_eq=np.array(rows + [np.ones(nl)]), b_eq=np.array(rhs + [1.0]),
                     bounds=(0, None), method="highs")
        if lp.status != 0:
            return None
        q = lp.x
    return [qi * ref for qi in q]


def jm_feasible(m: MeasurementAssemblage, tol=FEASIBILITY_TOL, response=None) -> FeasibilityResult:
    """Decide joint measurability of ``m``.

    Feasible instances carry a :class:`JointObservable`; infeasible ones an
    incompatibility :class:`Witness` whose value equals the robustness.
    ``response`` may replace the deterministic strategies by any
    (x, a, lambda) post-processing array.
    """
    check(m)
    response = _response_for(m, response)
    d = m.dim
    eye = np.eye(d, dtype=complex)
    weights = trivial_noise(m.outcomes_per_setting)
    noise = [[p * eye for p in w] for w in weights]

    def make(parents, resp, outs):
        return JointObservable(parents, resp, outs)

    return _feasibility(m, response, eye / d, eye, noise, _trivial_parents(response, weights, eye), make, tol)


def lhs_feasible(a: StateAssemblage, tol=FEASIBILITY_TOL, response=None) -> FeasibilityResult:
    """Decide whether ``a`` admits a local hidden state model.

    Works directly on ``rho_{a|x}`` (no SE map). The robustness used is the
    consistent steering robustness, whose noise assemblage shares Bob's
    reduced state; it coincides with the incompatibility robustness of the
    SE observables.
    """
    check(a)
    response = _response_for(a, response)
    rho_b = a.reduced_state
    d = a.dim
    weights = trivial_noise(a.outcomes_per_setting)
    noise = [[p * rho_b for p in w] for w in weights]

    def make(parents, resp, outs):
        return LhsModel(parents, resp, outs)

    return _feasibility(a, response, np.eye(d, dtype=complex), rho_b, noise,
                        _trivial_parents(response, weights, rho_b), make, tol)


def strictly_feasible_point(m: MeasurementAssemblage, scale=1.0):
    """Interior point ``G_lambda = scale * I`` of the robustness program.

    Returns the parents and the smallest eigenvalue of the slacks
    ``sum p G - M``; the point is strictly feasible when that is positive.
    With two or more settings ``scale = 1`` suffices; a single projective
    setting needs ``scale > 1``.
    """
    strat = deterministic_strategies(m.outcomes_per_setting)
    d = m.dim
    parents = [scale * np.eye(d, dtype=complex) for _ in range(len(strat))]
    rec = reconstruct(strat.response, parents, m.outcomes_per_setting)
    lo = min(np.linalg.eigvalsh(rec[x][a] - op)[0] for (x, a), op in m.items())
    total = sum(parents)
    norm_res = np.linalg.norm(total - np.trace(total).real / d * np.eye(d))
    return parents, float(lo), float(norm_res)
