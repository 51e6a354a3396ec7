"""Convergence and locking sweeps over the structured mesh families."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

from ..assembly import ALGORITHMS, assemble_system
from ..mesh import build_uniform_tet_mesh, build_uniform_triangle_mesh, mesh_size
from ..solver import SolverError, solve_spd
from ..wg import DofMap
from .cases import ManufacturedCase, get_case
from .errors import both_errors

log = logging.getLogger(__name__)


@dataclass
class ConvergenceRow:
    level: int  # 1/h subdivisions in 2D, refinement level in 3D
    h: float
    energy_error: float
    l2_error: float
    energy_order: float | None = None
    l2_order: float | None = None
    solver: str = ""
    iterations: int | str = 0
    residual: float = 0.0
    seconds: float = 0.0


@dataclass
class ConvergenceReport:
    case: str
    algorithm: str
    mu: float
    lam: float
    dim: int
    rows: list[ConvergenceRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def level_label(self) -> str:
        return "1/h" if self.dim == 2 else "Level"

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.rows]

    def add_row(self, row: ConvergenceRow) -> None:
        if self.rows:
            prev = self.rows[-1]
            row.energy_order = observed_order(prev.energy_error, row.energy_error)
            row.l2_order = observed_order(prev.l2_error, row.l2_error)
        self.rows.append(row)


def observed_order(coarse: float, fine: float) -> float:
    """log2 of consecutive error ratios on a mesh family whose h halves."""
    return math.log2(coarse / fine)


def build_mesh(dim: int, level: int):
    return build_uniform_triangle_mesh(level) if dim == 2 else build_uniform_tet_mesh(level)


def solve_level(case: ManufacturedCase, algorithm: str, mu: float, lam: float, level: int,
                quad_rhs: int = 4, quad_err: int = 6, tol: float = 1e-12, method: str = "auto"):
    """Assemble, solve and measure one mesh; returns a :class:`ConvergenceRow`."""
    t0 = time.perf_counter()
    mesh = build_mesh(case.dim, level)
    dm = DofMap.from_mesh(mesh)
    u = case.solution(lam)
    system = assemble_system(mesh, dm, mu, lam, case.load(mu, lam), algorithm=algorithm,
                             quad_degree=quad_rhs, boundary=None if case.homogeneous else u,
                             boundary_degree=quad_err)
    try:
        x, report = solve_spd(system, tol=tol, method=method)
    except SolverError as exc:
        raise type(exc)(f"{case.name}/{algorithm} lam={lam:g} level {level}: {exc}", exc.report,
                        exc.solution) from exc
    uh = system.to_field(x)
    energy, l2 = both_errors(mesh, u, uh, quad_err)
    row = ConvergenceRow(level, mesh_size(mesh), energy, l2, solver=report.method,
                         iterations=report.iterations, residual=report.residual,
                         seconds=time.perf_counter() - t0)
    log.info("%s %s lam=%g level=%d: energy %.4e, l2 %.4e (%.1fs)", case.name, algorithm, lam,
             level, energy, l2, row.seconds)
    return row


def run_convergence(case, algorithm: str, mu: float, lam: float, levels, **options) -> ConvergenceReport:
    """Errors and observed orders for ``case`` over ascending ``levels``."""
    if isinstance(case, str):
        case = get_case(case)
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    levels = list(levels)
    if not levels or levels != sorted(levels) or len(set(levels)) != len(levels):
        raise ValueError(f"levels must be nonempty and strictly ascending, got {levels}")
    report = ConvergenceReport(case.name, algorithm, float(mu), float(lam), case.dim,
                               metadata={k: v for k, v in options.items()})
    for level in levels:
        report.add_row(solve_level(case, algorithm, mu, lam, level, **options))
    return report


def run_locking_sweep(case, algorithms, mu: float, lams, levels, **options) -> list[ConvergenceReport]:
    """One report per (algorithm, lam), in declaration order."""
    lams = list(lams)
    if not lams:
        raise ValueError("lambda list must be nonempty")
    return [run_convergence(case, alg, mu, lam, levels, **options)
            for alg in algorithms for lam in lams]
