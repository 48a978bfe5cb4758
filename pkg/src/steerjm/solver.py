"""Small dense semidefinite programming engine.

Problems are in the standard primal form over Hermitian blocks::

    minimize    sum_j <C_j, X_j>
    subject to  sum_j <A_ij, X_j> = b_i,   X_j >= 0

with dual ``maximize b.y  s.t.  S_j = C_j - sum_i y_i A_ij >= 0``. The inner
product is ``Re tr(A X)``. Hermitian blocks are flattened to real vectors in
an orthonormal basis, so every problem becomes a dense real system of modest
size and the Newton step is a single Cholesky solve.

The method is an infeasible-start primal-dual path-following scheme with
Nesterov-Todd scaling and a Mehrotra predictor-corrector.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

__all__ = [
    "SdpProblem",
    "SdpSolution",
    "SolverError",
    "solve",
    "herm_basis",
    "svec",
    "smat",
]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITER = "max_iter"

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


@lru_cache(maxsize=None)
def herm_basis(d: int) -> np.ndarray:
    """Orthonormal basis of d x d Hermitian matrices, shape (d*d, d, d)."""
    out = []
    for i in range(d):
        e = np.zeros((d, d), complex)
        e[i, i] = 1.0
        out.append(e)
    r = 1.0 / math.sqrt(2.0)
    for i in range(d):
        for j in range(i + 1, d):
            e = np.zeros((d, d), complex)
            e[i, j] = e[j, i] = r
            out.append(e)
            e = np.zeros((d, d), complex)
            e[i, j] = 1j * r
            e[j, i] = -1j * r
            out.append(e)
    basis = np.array(out)
    basis.setflags(write=False)
    return basis


def svec(x) -> np.ndarray:
    x = np.asarray(x)
    e = herm_basis(x.shape[0])
    return np.einsum("kij,ji->k", e, x).real


def smat(v, d: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if d is None:
        d = math.isqrt(v.size)
    return np.einsum("k,kij->ij", v, herm_basis(d))


@dataclass
class SdpProblem:
    """Dense standard-form SDP.

    ``a`` has one row per scalar equality and one column per real coordinate
    of the concatenated blocks (``sum(d*d)`` columns). Use
    :meth:`from_operators` to build from per-block coefficient matrices.
    """

    block_dims: list[int]
    objective: list[np.ndarray]
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.block_dims = [int(d) for d in self.block_dims]
        self.objective = [np.asarray(c, dtype=complex) for c in self.objective]
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
        self.b = np.asarray(self.b, dtype=float).ravel()
        if len(self.objective) != len(self.block_dims):
            raise ValueError("one objective matrix per block is required")
        for c, d in zip(self.objective, self.block_dims):
            if c.shape != (d, d):
                raise ValueError(f"objective block of shape {c.shape}, expected {(d, d)}")
            if np.max(np.abs(c - c.conj().T), initial=0.0) > 1e-12 * (1 + np.max(np.abs(c), initial=0.0)):
                raise ValueError("objective blocks must be Hermitian")
        if self.a.shape != (self.b.size, self.nvars):
            raise ValueError(f"constraint matrix shape {self.a.shape} does not match "
                             f"({self.b.size}, {self.nvars})")

    @property
    def offsets(self) -> list[int]:
        out, pos = [], 0
        for d in self.block_dims:
            out.append(pos)
            pos += d * d
        return out + [pos]

    @property
    def nvars(self) -> int:
        return sum(d * d for d in self.block_dims)

    @classmethod
    def from_operators(cls, block_dims, objective, constraints):
        """Build from ``constraints = [({block: A_ij, ...}, b_i), ...]``."""
        block_dims = [int(d) for d in block_dims]
        offsets = [0]
        for d in block_dims:
            offsets.append(offsets[-1] + d * d)
        a = np.zeros((len(constraints), offsets[-1]))
        b = np.zeros(len(constraints))
        for i, (coeffs, rhs) in enumerate(constraints):
            for j, op in coeffs.items():
                op = np.asarray(op, dtype=complex)
                if op.shape != (block_dims[j], block_dims[j]):
                    raise ValueError(f"constraint {i}: block {j} has shape {op.shape}")
                if np.max(np.abs(op - op.conj().T), initial=0.0) > 1e-12 * (1 + np.max(np.abs(op))):
                    raise ValueError(f"constraint {i}: block {j} is not Hermitian")
                a[i, offsets[j]:offsets[j + 1]] = svec(op)
            b[i] = rhs
        return cls(block_dims, objective, a, b)

    def split(self, v) -> list[np.ndarray]:
        off = self.offsets
        return [smat(v[off[j]:off[j + 1]], d) for j, d in enumerate(self.block_dims)]

    def objective_vector(self) -> np.ndarray:
        return np.concatenate([svec(c) for c in self.objective])


@dataclass
class SdpSolution:
    status: str
    primal_value: float
    dual_value: float
    primal: list[np.ndarray]
    dual_slack: list[np.ndarray]
    y: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    certificate: np.ndarray | None = None
    certificate_value: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return abs(self.primal_value - self.dual_value)

    @property
    def relative_gap(self) -> float:
        return self.gap / (1.0 + abs(self.primal_value))


def _scaling_operator(w, d):
    """Matrix of K -> W K W in svec coordinates."""
    e = herm_basis(d)
    q = e @ w
    return np.einsum("kij,lji->kl", q, q).real


def _max_step(lchol, dx):
    """Largest alpha with L L^H + alpha dX >= 0 (inf if unbounded)."""
    li = sla.solve_triangular(lchol, np.eye(lchol.shape[0]), lower=True)
    m = li @ dx @ li.conj().T
    lo = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
    return math.inf if lo >= 0 else -1.0 / lo


def _reduce_rows(a, b, rtol=1e-11):
    """Drop linearly dependent equality rows.

    Returns ``(a_red, b_red, back, resid)`` such that ``a x = b`` is equivalent
    to ``a_red x = b_red`` when ``resid`` is ~0, and ``y = back @ y_red``.
    """
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((0, a.shape[1])), np.zeros(0), np.zeros((a.shape[0], 0)), b.copy()
    r = int(np.sum(s > rtol * s[0]))
    ur, sr, vr = u[:, :r], s[:r], vt[:r]
    proj_b = ur.T @ b
    resid = b - ur @ proj_b
    return vr, proj_b / sr, ur / sr, resid


RETRY_STEP_FRACTIONS = (0.95, 0.9)


def solve(problem: SdpProblem, tol=1e-9, max_iter=100, step_fraction=0.98, refine=3) -> SdpSolution:
    """Solve an :class:`SdpProblem`.

    The status is ``optimal`` when primal and dual infeasibilities and the
    relative gap are all below ``tol``; ``infeasible`` when a dual improving
    ray (``A^T y <= 0`` with ``b.y > 0``) is found; ``unbounded`` for a primal
    improving ray; ``max_iter`` otherwise.

    Badly scaled problems sometimes stall a few digits short of ``tol``; those
    are retried with shorter steps. If every attempt stalls, the best iterate
    is returned as ``optimal`` with ``info["inaccurate"]`` set, provided its
    residuals are within ``max(100 tol, 1e-6)``.
    """
    fractions = [step_fraction] + [f for f in RETRY_STEP_FRACTIONS if f < step_fraction]
    fallback = None
    for frac in fractions:
        sol = _solve_once(problem, tol, max_iter, frac, refine)
        sol.info["step_fraction"] = frac
        if sol.status != MAX_ITER and not sol.info.get("inaccurate"):
            return sol
        log.debug("attempt with step fraction %.2f stalled", frac)
        if fallback is None or _score(sol) < _score(fallback):
            fallback = sol
    return fallback


def _score(sol):
    # stalled attempts are ranked by their worst residual, usable ones first
    worst = max(sol.info.get("pinf", math.inf), sol.info.get("dinf", math.inf), sol.info.get("rgap", math.inf))
    return (sol.status != OPTIMAL, worst)


def _solve_once(problem, tol, max_iter, step_fraction, refine):
    dims = problem.block_dims
    off = problem.offsets
    nblocks = len(dims)
    n = sum(dims)
    c = problem.objective_vector()
    a_full, b_full = problem.a, problem.b

    a, b, back, resid = _reduce_rows(a_full, b_full)
    if np.linalg.norm(resid) > 1e-9 * (1.0 + np.linalg.norm(b_full)):
        # inconsistent equalities: resid is orthogonal to range(A), so A^T resid = 0
        cert = resid / (resid @ b_full)
        return SdpSolution(INFEASIBLE, math.inf, math.inf, [], [], cert, 0,
                           float(np.linalg.norm(resid)), math.nan, cert,
                           float(cert @ b_full), {"reason": "inconsistent equalities"})
    m = a.shape[0]

    def blocks(v):
        return [smat(v[off[j]:off[j + 1]], dims[j]) for j in range(nblocks)]

    def vec(mats):
        return np.concatenate([svec(x) for x in mats])

    xi = max(10.0, math.sqrt(n), float(np.max(1.0 + np.abs(b), initial=1.0)))
    cmax = max((np.linalg.norm(x) for x in problem.objective), default=0.0)
    eta = max(10.0, math.sqrt(n), cmax)
    xb = [xi * np.eye(d, dtype=complex) for d in dims]
    sb = [eta * np.eye(d, dtype=complex) for d in dims]
    x, s = vec(xb), vec(sb)
    y = np.zeros(m)

    normb, normc = 1.0 + np.linalg.norm(b), 1.0 + np.linalg.norm(c)
    status = MAX_ITER
    cert, cert_val = None, 0.0
    it = 0
    pinf = dinf = rgap = math.inf
    best, best_score = None, math.inf
    stalled = 0
    for it in range(1, max_iter + 1):
        rp = b - a @ x
        rd = c - a.T @ y - s
        pobj, dobj = c @ x, b @ y
        mu = (x @ s) / n
        pinf = np.linalg.norm(rp) / normb
        dinf = np.linalg.norm(rd) / normc
        rgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        log.debug("it %d pinf %.2e dinf %.2e rgap %.2e mu %.2e pobj %.10g", it, pinf, dinf, rgap, mu, pobj)
        if pinf < tol and dinf < tol and rgap < tol:
            status = OPTIMAL
            break
        score = max(pinf, dinf, rgap)
        if score < best_score:
            best, best_score = (x, y, s, pinf, dinf, rgap), score

        # improving rays
        if dobj > 0:
            aty = a.T @ y
            worst = max(np.linalg.eigvalsh(smat(aty[off[j]:off[j + 1]], dims[j]))[-1]
                        for j in range(nblocks))
            if worst <= 1e-9 * dobj and dobj > 1e8 * (1.0 + abs(pobj)):
                status = INFEASIBLE
                cert = back @ (y / dobj)
                cert_val = 1.0 - max(worst / dobj, 0.0)
                break
        if pobj < 0 and np.linalg.norm(a @ x) <= 1e-9 * -pobj and -pobj > 1e8 * (1.0 + abs(dobj)):
            status = UNBOUNDED
            cert = x / -pobj
            cert_val = 1.0
            break

        xb, sb = blocks(x), blocks(s)
        try:
            lx = [np.linalg.cholesky(xj) for xj in xb]
            ls = [np.linalg.cholesky(sj) for sj in sb]
        except np.linalg.LinAlgError:
            log.debug("Cholesky of an iterate failed at iteration %d", it)
            break
        g, ginv, dvals, wops = [], [], [], []
        for j in range(nblocks):
            u, dv, vh = np.linalg.svd(ls[j].conj().T @ lx[j])
            gj = lx[j] @ vh.conj().T / np.sqrt(dv)
            g.append(gj)
            ginv.append((np.sqrt(dv)[:, None] * vh) @ np.linalg.inv(lx[j]))
            dvals.append(dv)
            wops.append(_scaling_operator(gj @ gj.conj().T, dims[j]))

        aw = np.empty_like(a)
        wrd = np.empty_like(rd)
        for j in range(nblocks):
            sl = slice(off[j], off[j + 1])
            aw[:, sl] = a[:, sl] @ wops[j]
            wrd[sl] = wops[j] @ rd[sl]
        schur = aw @ a.T
        schur = 0.5 * (schur + schur.T)
        try:
            factor = sla.cho_factor(schur)
        except np.linalg.LinAlgError:
            schur += 1e-14 * np.trace(schur) / max(m, 1) * np.eye(m)
            factor = sla.cho_factor(schur)

        def direction(rhat):
            rc = np.concatenate([
                svec(g[j] @ (2.0 * rhat[j] / (dvals[j][:, None] + dvals[j][None, :])) @ g[j].conj().T)
                for j in range(nblocks)
            ])
            dy = sla.cho_solve(factor, rp - a @ rc + a @ wrd)
            ds = rd - a.T @ dy
            dx = rc - np.concatenate([wops[j] @ ds[off[j]:off[j + 1]] for j in range(nblocks)])
            # iterative refinement: the Schur solve alone loses A dx = rp as mu -> 0
            for _ in range(refine):
                err = rp - a @ dx
                if np.linalg.norm(err) <= 1e-15 * normb:
                    break
                ddy = sla.cho_solve(factor, err)
                dy = dy + ddy
                corr = a.T @ ddy
                ds = ds - corr
                dx = dx + np.concatenate([wops[j] @ corr[off[j]:off[j + 1]] for j in range(nblocks)])
            return dx, dy, ds

        def steps(dx, ds):
            ap = min(_max_step(lx[j], smat(dx[off[j]:off[j + 1]], dims[j])) for j in range(nblocks))
            ad = min(_max_step(ls[j], smat(ds[off[j]:off[j + 1]], dims[j])) for j in range(nblocks))
            return ap, ad

        # predictor
        rhat = [-np.diag(dv ** 2).astype(complex) for dv in dvals]
        dx, dy, ds = direction(rhat)
        ap, ad = steps(dx, ds)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = ((x + ap * dx) @ (s + ad * ds)) / n
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3

        # corrector
        rhat = []
        for j in range(nblocks):
            sl = slice(off[j], off[j + 1])
            dxh = ginv[j] @ smat(dx[sl], dims[j]) @ ginv[j].conj().T
            dsh = g[j].conj().T @ smat(ds[sl], dims[j]) @ g[j]
            prod = dxh @ dsh
            rhat.append(sigma * mu * np.eye(dims[j]) - np.diag(dvals[j] ** 2)
                        - 0.5 * (prod + prod.conj().T))
        dx, dy, ds = direction(rhat)
        ap, ad = steps(dx, ds)
        ap = min(1.0, step_fraction * ap)
        ad = min(1.0, step_fraction * ad)
        x = x + ap * dx
        y = y + ad * dy
        s = s + ad * ds

        log.debug("   steps %.3f %.3f sigma %.2e", ap, ad, sigma)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            break
        stalled = stalled + 1 if max(ap, ad) < 1e-2 else 0
        if stalled >= 3:
            log.debug("steps collapsed at iteration %d", it)
            break

    info = {}
    if status == MAX_ITER and best is not None and best_score <= max(100.0 * tol, 1e-6):
        # end-game stall near a degenerate optimum: settle for the best iterate
        x, y, s, pinf, dinf, rgap = best
        status = OPTIMAL
        info["inaccurate"] = True

    y_full = back @ y
    return SdpSolution(
        status=status,
        primal_value=float(c @ x),
        dual_value=float(b @ y),
        primal=blocks(x),
        dual_slack=blocks(s),
        y=y_full,
        iterations=it,
        primal_residual=float(np.linalg.norm(b_full - a_full @ x)),
        dual_residual=float(np.linalg.norm(c - a_full.T @ y_full - s)),
        certificate=cert,
        certificate_value=cert_val,
        info={"pinf": pinf, "dinf": dinf, "rgap": rgap, **info},
    )
