"""Quick invariant checks of the discretization, runnable without pytest.

Each check returns a :class:`CheckResult`; :func:`run_selftest` runs them all
on small meshes in a few seconds.  The CLI turns failures into a nonzero exit
code and a JSON summary.
"""
from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass
from math import factorial

import numpy as np

from ..assembly import assemble_bilinear
from ..mesh import build_uniform_tet_mesh, build_uniform_triangle_mesh
from ..quadrature import MAX_DEGREE, simplex_rule
from ..solver import IndefiniteSystemError, pcg_jacobi
from ..wg import (
    DofMap,
    WGField,
    project_Qh,
    project_scalar_avg,
    project_tensor_avg,
    rt0_coefficients,
    rt0_divergence,
    triple_norm,
    weak_divergence,
    weak_gradient,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def __post_init__(self):
        # plain Python scalars so results serialize to JSON
        self.passed = bool(self.passed)
        self.value = float(self.value)
        self.threshold = float(self.threshold)

    def to_dict(self) -> dict:
        return asdict(self)


def _meshes():
    return [build_uniform_triangle_mesh(4), build_uniform_tet_mesh(2)]


def _random_field(mesh, rng) -> WGField:
    dm = DofMap.from_mesh(mesh)
    return WGField(rng.standard_normal(dm.n_dofs), dm)


def check_divergence_preservation(n_fields: int = 1000, seed: int = 0) -> CheckResult:
    """div R_T(v) equals the weak divergence of v on every cell."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    meshes = _meshes()
    for k in range(n_fields):
        mesh = meshes[k % len(meshes)]
        v = _random_field(mesh, rng)
        wd = weak_divergence(mesh, v)
        rd = rt0_divergence(mesh, rt0_coefficients(mesh, v))
        worst = max(worst, float(np.max(np.abs(rd - wd)) / max(1.0, np.max(np.abs(wd)))))
    return CheckResult("divergence_preservation", worst <= 1e-12, worst, 1e-12)


def check_trace_identity(seed: int = 1) -> CheckResult:
    """trace(grad_w v) equals div_w v."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for mesh in _meshes():
        v = _random_field(mesh, rng)
        tr = np.trace(weak_gradient(mesh, v), axis1=1, axis2=2)
        wd = weak_divergence(mesh, v)
        worst = max(worst, float(np.max(np.abs(tr - wd)) / max(1.0, np.max(np.abs(wd)))))
    return CheckResult("trace_identity", worst <= 1e-13, worst, 1e-13)


def check_commutativity_linear(seed: int = 2) -> CheckResult:
    """grad_w Q_h u = cell average of grad u (and likewise for div) for linear u."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for mesh in _meshes():
        d = mesh.dim
        A, c = rng.standard_normal((d, d)), rng.standard_normal(d)

        def u(x, A=A, c=c):
            return x @ A.T + c

        qh = project_Qh(mesh, u)
        G = project_tensor_avg(mesh, lambda x, A=A: np.broadcast_to(A, (len(x), d, d)))
        D = project_scalar_avg(mesh, lambda x, A=A: np.full(len(x), np.trace(A)))
        worst = max(worst, float(np.max(np.abs(weak_gradient(mesh, qh) - G))),
                    float(np.max(np.abs(weak_divergence(mesh, qh) - D))))
    return CheckResult("commutativity_linear", worst <= 1e-12, worst, 1e-12)


def check_symmetry_and_spd(seed: int = 3) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []
    worst_sym = 0.0
    spd_ok = True
    worst_coerc = np.inf
    for mesh, (mu, lam) in itertools.product(_meshes(), [(1.0, 1.0), (1.0, 1e8)]):
        dm = DofMap.from_mesh(mesh)
        system = assemble_bilinear(mesh, dm, mu, lam)
        A = system.matrix
        worst_sym = max(worst_sym, float(abs(A - A.T).max()) if A.nnz else 0.0)
        if lam == 1.0:
            b = rng.standard_normal(A.shape[0])
            try:
                _, _, rel = pcg_jacobi(A, b, tol=1e-10)
                spd_ok &= rel <= 1e-10
            except IndefiniteSystemError:
                spd_ok = False
        for _ in range(20):
            x = rng.standard_normal(A.shape[0])
            energy = float(x @ (A @ x))
            norm2 = triple_norm(mesh, system.to_field(x)) ** 2
            worst_coerc = min(worst_coerc, energy / (min(mu, 1.0) * norm2))
    out.append(CheckResult("matrix_symmetric", worst_sym == 0.0, worst_sym, 0.0))
    out.append(CheckResult("cg_spd", spd_ok, float(spd_ok), 1.0, "CG converged on every test matrix"))
    out.append(CheckResult("coercivity", worst_coerc >= 1.0 - 1e-12, worst_coerc, 1.0,
                           "min of x'Ax / (min(mu,1) |||x|||^2)"))
    return out


def check_quadrature_exactness() -> CheckResult:
    """Each rule integrates every monomial up to its degree exactly."""
    worst = 0.0
    for dim, degree in itertools.product((1, 2, 3), range(1, MAX_DEGREE + 1)):
        rule = simplex_rule(dim, degree)
        for alpha in itertools.product(range(degree + 1), repeat=dim):
            if sum(alpha) > degree:
                continue
            exact = np.prod([factorial(a) for a in alpha]) / factorial(sum(alpha) + dim)
            approx = rule.weights @ np.prod(rule.points ** np.array(alpha), axis=1)
            worst = max(worst, abs(approx - exact) / exact)
    return CheckResult("quadrature_exactness", worst <= 1e-13, worst, 1e-13)


def run_selftest() -> list[CheckResult]:
    results = [
        check_divergence_preservation(),
        check_trace_identity(),
        check_commutativity_linear(),
        check_quadrature_exactness(),
    ]
    results.extend(check_symmetry_and_spd())
    return results
