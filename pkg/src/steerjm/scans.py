"""Parameter scans behind the two figures, written as CSV.

Figure 1 family (trace-normalized so that ``rho_B = I/2``)::

    rho_{+-|1} = (I +- lam sigma_z)/4
    rho_{+|2}  = (t I + s.sigma)/2,   rho_{-|2} = ((1 - t) I - s.sigma)/2
    s = r (sin theta, 0, cos theta)

Its SE observables are ``B = 2 rho``. A grid point is steerable by the inner
test when the Busch value exceeds 2 and by the outer (exact) test when the
two-observable qubit criterion fails.

Figure 2 family: sharp ``sigma_z`` and a sharp observable at angle ``theta``
in the xz plane, scored by ``lambda_g`` from the robustness program and by
``lambda_w`` for biases 0, 0.5, 0.8 and 1.
"""

from __future__ import annotations

import concurrent.futures as cf
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .assemblage import MeasurementAssemblage, StateAssemblage
from .linalg import IDENTITY2, PAULI
from .qubit import busch_criterion, se_observables_closed_form, yu_oh_criterion
from .robustness import incompatibility_robustness, white_noise_robustness
from .solver import SolverError

__all__ = [
    "Grid",
    "ScanSpec",
    "ScanSpecError",
    "fig1_assemblage",
    "fig1_row",
    "fig2_row",
    "sharp_pair",
    "run_scan",
    "write_csv",
    "FIG1_COLUMNS",
    "FIG2_COLUMNS",
    "FIG2_BIASES",
]

FIG1_COLUMNS = ("lambda", "r", "theta", "busch_value", "yu_oh_margin",
                "steerable_inner", "steerable_outer", "valid")
FIG2_COLUMNS = ("theta", "lambda_g", "lambda_w_b0", "lambda_w_b05", "lambda_w_b08",
                "lambda_w_b1", "status")
FIG2_BIASES = (0.0, 0.5, 0.8, 1.0)


class ScanSpecError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    min: float
    max: float
    steps: int

    def validate(self, name):
        if self.steps < 2:
            raise ScanSpecError(f"grid {name}: steps must be at least 2")
        if not self.min < self.max:
            raise ScanSpecError(f"grid {name}: min must be below max")

    def points(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.steps)


def _default_grids(experiment):
    if experiment == "fig1":
        return {"lambda": Grid(0.0, 1.0, 50), "r": Grid(0.0, 0.45, 50), "theta": Grid(0.0, math.pi, 50)}
    return {"theta": Grid(math.pi / 200, math.pi / 2, 100)}


@dataclass(frozen=True)
class ScanSpec:
    experiment: str  # "fig1" or "fig2"
    grid: dict = field(default_factory=dict)
    fixed: dict = field(default_factory=dict)
    seed: int | None = None
    tol: float = 1e-7

    @classmethod
    def default(cls, experiment, **kw):
        fixed = {"t2": 0.45} if experiment == "fig1" else {}
        return cls(experiment, _default_grids(experiment) if experiment in ("fig1", "fig2") else {},
                   fixed, **kw)

    def validate(self):
        if self.experiment not in ("fig1", "fig2"):
            raise ScanSpecError(f"unknown experiment {self.experiment!r}")
        need = ("lambda", "r", "theta") if self.experiment == "fig1" else ("theta",)
        for name in need:
            if name not in self.grid:
                raise ScanSpecError(f"grid {name} is missing")
            self.grid[name].validate(name)
        if self.experiment == "fig2":
            th = self.grid["theta"]
            if th.min <= 0.0 or th.max > math.pi / 2 + 1e-12:
                raise ScanSpecError("fig2 needs a theta grid inside (0, pi/2]")
        if self.experiment == "fig1":
            t2 = self.fixed.get("t2", 0.45)
            if not 0.0 <= t2 <= 0.5:
                raise ScanSpecError("t2 must lie in [0, 1/2]")
        if not self.tol > 0:
            raise ScanSpecError("tol must be positive")
        return self

    def echo(self) -> dict:
        out = asdict(self)
        out["grid"] = {k: asdict(g) for k, g in self.grid.items()}
        return out


# figure 1

def fig1_assemblage(lam, r, theta, t2=0.45) -> StateAssemblage:
    s = r * np.array([math.sin(theta), 0.0, math.cos(theta)])
    sdot = s[0] * PAULI[0] + s[1] * PAULI[1] + s[2] * PAULI[2]
    return StateAssemblage([
        [(IDENTITY2 + lam * PAULI[2]) / 4, (IDENTITY2 - lam * PAULI[2]) / 4],
        [(t2 * IDENTITY2 + sdot) / 2, ((1 - t2) * IDENTITY2 - sdot) / 2],
    ])


def _fig1_valid(lam, r, t2):
    return 0.0 <= lam <= 1.0 and 0.0 <= r <= t2 <= 0.5


def fig1_row(lam, r, theta, t2=0.45) -> tuple:
    lam, r, theta = float(lam), float(r), float(theta)
    if not _fig1_valid(lam, r, t2):
        return (lam, r, theta, math.nan, math.nan, False, False, False)
    o1, o2 = se_observables_closed_form(fig1_assemblage(lam, r, theta, t2))
    busch = busch_criterion(o1, o2)
    yo = yu_oh_criterion(o1, o2)
    return (lam, r, theta, busch, yo.margin, bool(busch > 2.0), bool(not yo.jm), True)


# figure 2

def sharp_pair(theta) -> MeasurementAssemblage:
    n = math.cos(theta) * PAULI[2] + math.sin(theta) * PAULI[0]
    return MeasurementAssemblage([
        [(IDENTITY2 + PAULI[2]) / 2, (IDENTITY2 - PAULI[2]) / 2],
        [(IDENTITY2 + n) / 2, (IDENTITY2 - n) / 2],
    ])


def fig2_row(theta, tol=1e-7) -> tuple:
    theta = float(theta)
    m = sharp_pair(theta)
    try:
        lam_g = incompatibility_robustness(m).mixing_weight
        lam_w = [white_noise_robustness(m, b, tol=tol).value for b in FIG2_BIASES]
    except SolverError as e:
        return (theta,) + (math.nan,) * 5 + (f"solver failure: {e}",)
    return (theta, lam_g, *lam_w, "ok")


# running and writing

def _fig1_task(args):
    return fig1_row(*args)


def _fig2_task(args):
    return fig2_row(*args)


def _tasks(spec):
    if spec.experiment == "fig1":
        t2 = spec.fixed.get("t2", 0.45)
        return _fig1_task, [(lam, r, th, t2) for lam in spec.grid["lambda"].points()
                            for r in spec.grid["r"].points() for th in spec.grid["theta"].points()]
    return _fig2_task, [(th, spec.tol) for th in spec.grid["theta"].points()]


def run_scan(spec: ScanSpec, workers=1) -> list[tuple]:
    """All rows of the scan in grid order (lambda, then r, then theta for fig1)."""
    spec.validate()
    fn, tasks = _tasks(spec)
    if workers <= 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (8 * workers))
    with cf.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(fh, spec: ScanSpec, rows, version="0"):
    """CSV with ``#`` provenance lines; output depends only on (spec, rows)."""
    columns = FIG1_COLUMNS if spec.experiment == "fig1" else FIG2_COLUMNS
    fh.write(f"# steerjm {version}\n")
    fh.write(f"# experiment: {spec.experiment}\n")
    fh.write("# spec: " + json.dumps(spec.echo(), sort_keys=True) + "\n")
    fh.write(",".join(columns) + "\n")
    for row in rows:
        fh.write(",".join(_cell(v).replace(",", ";") for v in row) + "\n")
