"""Experiment drivers: mesh sequences, convergence tables, and reports.

A driver produces a sequence of meshes for a registered problem:

* ``uniform``        -- repeated uniform refinement;
* ``variant1``       -- one uniform refinement, then a single local
  refinement of one element containing the origin, then uniform;
* ``variant2``       -- six uniform refinements, then a single local
  refinement of one element containing the origin, then uniform;
* ``boundary-local`` -- data point j is rebuilt from the initial mesh:
  j-1 uniform refinements followed by j rounds of refining every element
  crossed by the circle |z| = 1 (fictitious-disk setting);
* ``adaptive``       -- estimator-driven loop with bulk marking.

``run_experiment`` solves on every mesh, tabulates the energy error, the
estimator, and timings, fits the tail convergence rate, and (optionally)
writes CSV/JSON reports plus matplotlib figures.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass

import numpy as np

from .assembly import solve_problem
from .estimator import adapt_loop, estimate
from .mesh import Mesh
from .problems import energy_error, make_problem

DRIVERS = ("uniform", "variant1", "variant2", "boundary-local", "adaptive")


@dataclass
class ExperimentConfig:
    problem: str
    variant: str = "averaging"
    driver: str = "uniform"
    theta: float = 0.5
    max_ndof: int = 250_000
    max_levels: int | None = None
    variant2_switch: int = 6
    load_order: int = 5
    error_order: int = 3
    error_singular_order: int = 3
    compute_eta: bool = True
    out: str | None = None

    def __post_init__(self):
        if self.driver not in DRIVERS:
            raise ValueError(f"unknown driver: {self.driver}")
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must lie in (0, 1]")

    @classmethod
    def from_json(cls, path, **overrides):
        with open(path) as fh:
            doc = json.load(fh)
        doc.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**doc)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class ConvergenceRow:
    level: int
    ndof: int
    sqrt_ndof: float
    error: float
    eta: float
    h_max: float
    seconds: float


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    mesh_hash: str
    slope: float
    slope_stderr: float

    def errors(self) -> np.ndarray:
        return np.array([r.error for r in self.rows])

    def sqrt_ndofs(self) -> np.ndarray:
        return np.array([r.sqrt_ndof for r in self.rows])


def fit_rate(sqrt_ndof, error, window: int = 4):
    """Least-squares slope of log(error) vs log(sqrt(ndof)) on the tail.

    Returns (slope, stderr); requires at least two points.
    """
    x = np.log(np.asarray(sqrt_ndof, dtype=float)[-window:])
    y = np.log(np.asarray(error, dtype=float)[-window:])
    if len(x) < 2:
        raise ValueError("rate fit needs at least two rows")
    if np.ptp(x) == 0.0:
        raise ValueError("degenerate abscissae in rate fit")
    coeffs, res, *_ = np.polyfit(x, y, 1, full=True)
    slope = float(coeffs[0])
    n = len(x)
    if n > 2 and res.size:
        var = float(res[0]) / (n - 2)
        stderr = float(np.sqrt(var / np.sum((x - x.mean()) ** 2)))
    else:
        stderr = 0.0
    return slope, stderr


def _local_refine_at_origin(mesh: Mesh) -> Mesh:
    """Refine exactly one element containing (0, 0), lowest id first."""
    cands = mesh.rects_containing(0.0, 0.0)
    if not cands:
        raise ValueError("no element contains the origin")
    return mesh.refine_marked([min(r.id for r in cands)])


def _touches_unit_circle(r) -> bool:
    nearest = np.hypot(min(max(0.0, r.x0), r.x1),
                       min(max(0.0, r.y0), r.y1))
    farthest = max(np.hypot(x, y) for x, y in r.corners())
    return nearest <= 1.0 <= farthest


def _boundary_local_mesh(initial: Mesh, j: int) -> Mesh:
    """Mesh for boundary-local data point ``j`` (j >= 1): j - 1 uniform
    refinements of the initial mesh followed by j rounds of refining all
    elements crossed by the unit circle (with 1-irregularity closure)."""
    mesh = initial
    for _ in range(j - 1):
        mesh = mesh.uniform_refine()
    for _ in range(j):
        marked = [r.id for r in mesh.rects if _touches_unit_circle(r)]
        mesh = mesh.refine_marked(marked)
    return mesh


def mesh_sequence(config: ExperimentConfig):
    """Unbounded iterator of meshes for the non-adaptive drivers."""
    problem = make_problem(config.problem)
    mesh = problem.initial_mesh()
    if config.driver == "boundary-local":
        j = 1
        while True:
            yield _boundary_local_mesh(mesh, j)
            j += 1
    level = 0
    while True:
        yield mesh
        if config.driver == "variant1" and level == 1:
            mesh = _local_refine_at_origin(mesh)
        elif (config.driver == "variant2"
              and level == config.variant2_switch):
            mesh = _local_refine_at_origin(mesh)
        else:
            mesh = mesh.uniform_refine()
        level += 1


def _solve_row(problem, mesh, config, level) -> tuple:
    t0 = time.perf_counter()
    dofs = problem.build_dofs(mesh, config.variant)
    u_h, _ = solve_problem(mesh, dofs, problem.f,
                           load_order=config.load_order)
    err = energy_error(u_h, problem, order=config.error_order,
                       singular_order=config.error_singular_order)
    eta = float("nan")
    report = None
    if config.compute_eta:
        report = estimate(mesh, u_h, problem.f,
                          singular_corner=problem.singular_corner)
        eta = report.eta
    seconds = time.perf_counter() - t0
    h_max = max(2.0 * max(r.hx, r.hy) for r in mesh.rects)
    row = ConvergenceRow(level, dofs.reported_ndof,
                         float(np.sqrt(dofs.reported_ndof)),
                         err.total, eta, h_max, seconds)
    return row, u_h, report


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    problem = make_problem(config.problem)
    rows = []
    hasher = hashlib.sha256()

    def record(mesh) -> bool:
        """Solve one level; False once the dof budget is exhausted."""
        level = len(rows)
        dofs_probe = problem.build_dofs(mesh, config.variant)
        if dofs_probe.reported_ndof > config.max_ndof:
            return False
        row, _, _ = _solve_row(problem, mesh, config, level)
        rows.append(row)
        hasher.update(mesh.to_json().encode())
        if config.max_levels is not None and level + 1 >= config.max_levels:
            return False
        return True

    if config.driver == "adaptive":
        records = adapt_loop(problem, config.variant, theta=config.theta,
                             max_ndof=config.max_ndof,
                             max_levels=config.max_levels)
        for level, mesh, u_h, _err, report in records:
            t0 = time.perf_counter()
            err = energy_error(u_h, problem, order=config.error_order,
                              singular_order=config.error_singular_order)
            seconds = time.perf_counter() - t0
            ndof = u_h.dofs.reported_ndof
            h_max = max(2.0 * max(r.hx, r.hy) for r in mesh.rects)
            rows.append(ConvergenceRow(level, ndof, float(np.sqrt(ndof)),
                                       err.total, report.eta, h_max,
                                       seconds))
            hasher.update(mesh.to_json().encode())
    else:
        for mesh in mesh_sequence(config):
            if not record(mesh):
                break

    slope, stderr = fit_rate([r.sqrt_ndof for r in rows],
                             [r.error for r in rows])
    result = ExperimentResult(config, rows, hasher.hexdigest(),
                              slope, stderr)
    if config.out is not None:
        write_reports(result)
    return result


# ----------------------------------------------------------------------
# reporting
# ----------------------------------------------------------------------
CSV_HEADER = "level,ndof,sqrt_ndof,error,eta,h_max,seconds"


def rows_to_csv(rows) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(f"{r.level},{r.ndof},{r.sqrt_ndof!r},{r.error!r},"
                     f"{r.eta!r},{r.h_max!r},{r.seconds:.3f}")
    return "\n".join(lines) + "\n"


def write_reports(result: ExperimentResult):
    import pathlib

    out = pathlib.Path(result.config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "convergence.csv").write_text(rows_to_csv(result.rows))
    doc = {
        "config": result.config.to_dict(),
        "mesh_sequence_sha256": result.mesh_hash,
        "slope": result.slope,
        "slope_stderr": result.slope_stderr,
        "rows": [dataclasses.asdict(r) for r in result.rows],
    }
    (out / "convergence.json").write_text(json.dumps(doc, indent=1))
    write_figure(result, out / "convergence.png")
    return out


def write_figure(result: ExperimentResult, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x = result.sqrt_ndofs()
    err = result.errors()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(x, err, "o-", label="energy error")
    etas = np.array([r.eta for r in result.rows])
    if np.all(np.isfinite(etas)):
        ax.loglog(x, etas, "s--", label="estimator")
    ref = err[-1] * (x / x[-1]) ** result.slope
    ax.loglog(x, ref, "k:",
              label=f"slope {result.slope:.2f}")
    ax.set_xlabel(r"$\sqrt{\mathrm{ndof}}$")
    ax.set_ylabel("broken energy norm")
    cfg = result.config
    ax.set_title(f"{cfg.problem} / {cfg.variant} / {cfg.driver}")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
