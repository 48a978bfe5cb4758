"""State and measurement assemblages.

Both kinds of assemblage are stored as a tuple of settings, each a tuple of
Hermitian ``numpy`` arrays (one per outcome). Outcome counts may differ
between settings. Bipartite vectors use A-major ordering,
``index = i_A * dim_B + i_B``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.stats import unitary_group

from .linalg import as_hermitian, eig_hermitian, herm_sqrt

__all__ = [
    "Violation",
    "AssemblageError",
    "StateAssemblage",
    "MeasurementAssemblage",
    "BipartitePureState",
    "validate",
    "assemblage_from_state",
    "partial_trace_a",
    "random_povm",
    "random_projective",
    "random_pure_state",
    "random_unitary",
    "random_assemblage",
]

PSD_TOL = 1e-10
NOSIG_TOL = 1e-9
TRACE_TOL = 1e-9


@dataclass(frozen=True)
class Violation:
    kind: str  # "psd", "no-signaling", "trace", "completeness"
    index: tuple
    residual: float

    def __str__(self):
        return f"{self.kind} violation at {self.index}: residual {self.residual:.3e}"


class AssemblageError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


def _freeze(elements):
    settings = []
    for x, setting in enumerate(elements):
        ops = []
        for a, op in enumerate(setting):
            arr = as_hermitian(op, rtol=1e-10)
            arr = 0.5 * (arr + arr.conj().T)
            arr.setflags(write=False)
            ops.append(arr)
        if not ops:
            raise ValueError(f"setting {x} has no outcomes")
        settings.append(tuple(ops))
    if not settings:
        raise ValueError("an assemblage needs at least one setting")
    dims = {op.shape[0] for s in settings for op in s}
    if len(dims) != 1:
        raise ValueError(f"inconsistent operator dimensions {sorted(dims)}")
    return tuple(settings)


class _Assemblage:
    def __init__(self, elements):
        self.elements = _freeze(elements)

    @property
    def dim(self) -> int:
        return self.elements[0][0].shape[0]

    @property
    def settings(self) -> int:
        return len(self.elements)

    @property
    def outcomes_per_setting(self) -> list[int]:
        return [len(s) for s in self.elements]

    def __getitem__(self, key):
        x, a = key
        return self.elements[x][a]

    def __iter__(self):
        return iter(self.elements)

    def items(self):
        for x, setting in enumerate(self.elements):
            for a, op in enumerate(setting):
                yield (x, a), op

    def map(self, fn):
        """New assemblage of the same kind with ``fn`` applied to every element."""
        return type(self)([[fn(op) for op in s] for s in self.elements])

    def __eq__(self, other):
        if type(other) is not type(self) or self.outcomes_per_setting != other.outcomes_per_setting:
            return NotImplemented
        return all(np.array_equal(p, q) for (_, p), (_, q) in zip(self.items(), other.items()))

    __hash__ = None

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, outcomes={self.outcomes_per_setting})"


class StateAssemblage(_Assemblage):
    """Subnormalized states ``rho[x][a]`` with a setting-independent sum."""

    @property
    def dim_b(self) -> int:
        return self.dim

    @property
    def reduced_state(self) -> np.ndarray:
        """Bob's reduced state, averaged over settings."""
        return sum(sum(s) for s in self.elements) / self.settings

    def probabilities(self) -> list[list[float]]:
        return [[float(np.trace(op).real) for op in s] for s in self.elements]


class MeasurementAssemblage(_Assemblage):
    """POVMs ``M[x][a]`` acting on one Hilbert space."""


@dataclass(frozen=True)
class BipartitePureState:
    """Pure state ``sum_i c_i |a_i>|b_i>`` given by its Schmidt form."""

    schmidt: np.ndarray
    basis_a: np.ndarray
    basis_b: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.schmidt, dtype=float).ravel()
        ua = np.asarray(self.basis_a, dtype=complex)
        ub = np.asarray(self.basis_b, dtype=complex)
        if np.any(lam <= 0):
            raise ValueError("Schmidt coefficients must be positive")
        if abs(np.sum(lam ** 2) - 1.0) > 1e-10:
            raise ValueError("Schmidt coefficients must satisfy sum c_i^2 = 1")
        for name, u in (("basis_a", ua), ("basis_b", ub)):
            if u.ndim != 2 or u.shape[0] != u.shape[1]:
                raise ValueError(f"{name} must be square")
            if np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])) > 1e-10:
                raise ValueError(f"{name} must be unitary")
        if lam.size > min(ua.shape[0], ub.shape[0]):
            raise ValueError("more Schmidt coefficients than the smaller local dimension")
        object.__setattr__(self, "schmidt", lam)
        object.__setattr__(self, "basis_a", ua)
        object.__setattr__(self, "basis_b", ub)

    @classmethod
    def from_coefficients(cls, schmidt, dim_a=None, dim_b=None):
        """Schmidt form in the computational bases."""
        lam = np.asarray(schmidt, dtype=float)
        dim_a = dim_a or lam.size
        dim_b = dim_b or lam.size
        return cls(lam, np.eye(dim_a), np.eye(dim_b))

    @property
    def dim_a(self) -> int:
        return self.basis_a.shape[0]

    @property
    def dim_b(self) -> int:
        return self.basis_b.shape[0]

    def vector(self) -> np.ndarray:
        n = self.schmidt.size
        psi = np.zeros(self.dim_a * self.dim_b, complex)
        for i in range(n):
            psi += self.schmidt[i] * np.kron(self.basis_a[:, i], self.basis_b[:, i])
        return psi

    def density(self) -> np.ndarray:
        psi = self.vector()
        return np.outer(psi, psi.conj())

    def reduced_a(self) -> np.ndarray:
        ua = self.basis_a[:, : self.schmidt.size]
        return (ua * self.schmidt ** 2) @ ua.conj().T


def partial_trace_a(rho_ab, dim_a, dim_b, op_a=None):
    """``tr_A[(op_a (x) I) rho_ab]`` for A-major ordering."""
    r = np.asarray(rho_ab).reshape(dim_a, dim_b, dim_a, dim_b)
    if op_a is None:
        return np.einsum("ibic->bc", r)
    return np.einsum("ij,jbic->bc", np.asarray(op_a), r)


def assemblage_from_state(state, alice: MeasurementAssemblage) -> StateAssemblage:
    """Bob's conditional states ``tr_A[(A_{a|x} (x) I) rho]``.

    ``state`` may be a :class:`BipartitePureState` or a density matrix with
    ``state.shape == (dA*dB, dA*dB)``; in the latter case ``dim_a`` is taken
    from ``alice``.
    """
    if isinstance(state, BipartitePureState):
        if alice.dim != state.dim_a:
            raise ValueError(f"Alice's measurements act on dimension {alice.dim}, "
                             f"state has dim_A = {state.dim_a}")
        rho, da, db = state.density(), state.dim_a, state.dim_b
    else:
        rho = np.asarray(state, dtype=complex)
        da = alice.dim
        if rho.shape[0] % da:
            raise ValueError(f"state dimension {rho.shape[0]} is not a multiple of {da}")
        db = rho.shape[0] // da
    return StateAssemblage([[partial_trace_a(rho, da, db, op) for op in s] for s in alice])


def _psd_violations(assemblage, tol):
    out = []
    for (x, a), op in assemblage.items():
        lo = eig_hermitian(op).eigenvalues[-1]
        if lo < -tol:
            out.append(Violation("psd", (x, a), float(-lo)))
    return out


def validate(assemblage) -> list[Violation]:
    """All broken invariants of a state or measurement assemblage (empty if valid)."""
    out = _psd_violations(assemblage, PSD_TOL)
    if isinstance(assemblage, StateAssemblage):
        sums = [sum(s) for s in assemblage.elements]
        for x, xp in itertools.combinations(range(len(sums)), 2):
            res = float(np.linalg.norm(sums[x] - sums[xp]))
            if res > NOSIG_TOL:
                out.append(Violation("no-signaling", (x, xp), res))
        tr = float(np.trace(assemblage.reduced_state).real)
        if abs(tr - 1.0) > TRACE_TOL:
            out.append(Violation("trace", (), abs(tr - 1.0)))
    elif isinstance(assemblage, MeasurementAssemblage):
        eye = np.eye(assemblage.dim)
        for x, s in enumerate(assemblage.elements):
            res = float(np.linalg.norm(sum(s) - eye))
            if res > NOSIG_TOL:
                out.append(Violation("completeness", (x,), res))
    else:
        raise TypeError(f"cannot validate {type(assemblage).__name__}")
    return out


def check(assemblage):
    """Raise :class:`AssemblageError` if ``assemblage`` is invalid; return it otherwise."""
    violations = validate(assemblage)
    if violations:
        raise AssemblageError(violations)
    return assemblage


# random instances

def random_unitary(d, rng) -> np.ndarray:
    return unitary_group.rvs(d, random_state=rng) if d > 1 else np.ones((1, 1), complex)


def random_pure_state(dim_a, dim_b, rng, schmidt_rank=None) -> BipartitePureState:
    """Haar-random pure state, optionally truncated to a given Schmidt rank."""
    n = min(dim_a, dim_b) if schmidt_rank is None else schmidt_rank
    g = rng.normal(size=(dim_a, dim_b)) + 1j * rng.normal(size=(dim_a, dim_b))
    u, s, vh = np.linalg.svd(g)
    s = s[:n] / np.linalg.norm(s[:n])
    # |psi> = sum_i s_i |u[:, i]>|vh[i, :]>
    return BipartitePureState(s, u, vh.T)


def random_povm(d, outcomes, rng) -> list[np.ndarray]:
    """Random POVM from normalized Wishart-like positive operators."""
    ws = []
    for _ in range(outcomes):
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        ws.append(g @ g.conj().T)
    total = sum(ws)
    w, v = np.linalg.eigh(total)
    inv_half = (v / np.sqrt(w)) @ v.conj().T
    return [inv_half @ x @ inv_half for x in ws]


def random_projective(d, outcomes, rng) -> list[np.ndarray]:
    """Random projective measurement grouping a Haar basis into ``outcomes`` blocks."""
    u = random_unitary(d, rng)
    groups = np.array_split(np.arange(d), outcomes)
    return [u[:, g] @ u[:, g].conj().T for g in groups]


def random_assemblage(dim_b, settings, outcomes, rng, *, dim_a=None, visibility=None,
                      mixed=False) -> StateAssemblage:
    """Random state assemblage from a random bipartite state and noisy measurements.

    Alice measures noisy projective measurements with ``visibility`` (uniform
    in [0.4, 1] when not given) so that both steerable and unsteerable
    instances occur. With ``mixed=True`` the shared state is a random rank-2
    mixture.
    """
    dim_a = dim_a or dim_b
    if visibility is None:
        visibility = rng.uniform(0.4, 1.0)
    alice = []
    for _ in range(settings):
        proj = random_projective(dim_a, outcomes, rng)
        alice.append([visibility * p + (1 - visibility) * np.trace(p).real / dim_a * np.eye(dim_a)
                      for p in proj])
    alice = MeasurementAssemblage(alice)
    if mixed:
        rho = 0
        weights = rng.dirichlet([1.0, 1.0])
        for w in weights:
            psi = random_pure_state(dim_a, dim_b, rng).vector()
            rho = rho + w * np.outer(psi, psi.conj())
        return assemblage_from_state(rho, alice)
    return assemblage_from_state(random_pure_state(dim_a, dim_b, rng), alice)


def scaled_to_trace_one(elements) -> StateAssemblage:
    """Rescale an unnormalized assemblage so that its reduced state has unit trace."""
    total = sum(np.trace(op).real for op in elements[0])
    return StateAssemblage([[np.asarray(op) / total for op in s] for s in elements])


def sqrt_conjugate(rho_b, povms) -> StateAssemblage:
    """Assemblage ``rho_B^{1/2} M_{a|x} rho_B^{1/2}``."""
    root = herm_sqrt(rho_b)
    return StateAssemblage([[root @ m @ root for m in s] for s in povms])
