"""Manufactured solutions for the convergence and locking experiments.

Every evaluator takes an (m, d) array of points.  Body forces are assembled
from hand-derived Laplacians and gradients of the divergence,

    f = -mu * lap(u) - (lam + mu) * grad(div u),

except for ``ex2d6`` whose load is written out directly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

PI = np.pi


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    dim: int
    description: str
    homogeneous: bool  # exact solution vanishes on the boundary
    _u: Callable
    _grad: Callable
    _div: Callable
    _force: Callable

    def u_exact(self, x, lam: float = 1.0) -> np.ndarray:
        return self._u(np.atleast_2d(x), lam)

    def grad_u(self, x, lam: float = 1.0) -> np.ndarray:
        return self._grad(np.atleast_2d(x), lam)

    def div_u(self, x, lam: float = 1.0) -> np.ndarray:
        return self._div(np.atleast_2d(x), lam)

    def f(self, x, mu: float, lam: float) -> np.ndarray:
        return self._force(np.atleast_2d(x), mu, lam)

    # closures with the parameters bound, for assembly and projections
    def solution(self, lam: float):
        return lambda x: self.u_exact(x, lam)

    def load(self, mu: float, lam: float):
        return lambda x: self.f(x, mu, lam)


def _stack(*cols):
    return np.stack(cols, axis=-1)


def _mat(rows):
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def _from_parts(lap, grad_div):
    def force(x, mu, lam):
        return -mu * lap(x, lam) - (lam + mu) * grad_div(x, lam)
    return force


# -- sin(pi x) sin(pi y) in both components ---------------------------------

def _sinsin_parts(x):
    sx, sy = np.sin(PI * x[:, 0]), np.sin(PI * x[:, 1])
    cx, cy = np.cos(PI * x[:, 0]), np.cos(PI * x[:, 1])
    return sx, sy, cx, cy


def _ex2d1_u(x, lam):
    sx, sy, _, _ = _sinsin_parts(x)
    return _stack(sx * sy, sx * sy)


def _ex2d1_grad(x, lam):
    sx, sy, cx, cy = _sinsin_parts(x)
    row = (PI * cx * sy, PI * sx * cy)
    return _mat([row, row])


def _ex2d1_div(x, lam):
    return PI * np.sin(PI * (x[:, 0] + x[:, 1]))


def _ex2d1_lap(x, lam):
    return -2 * PI**2 * _ex2d1_u(x, lam)


def _ex2d1_grad_div(x, lam):
    c = PI**2 * np.cos(PI * (x[:, 0] + x[:, 1]))
    return _stack(c, c)


# -- 3D trigonometric field --------------------------------------------------

def _trig3(x):
    return np.sin(x[:, 0]), np.sin(x[:, 1]), np.sin(x[:, 2]), np.cos(x[:, 0]), np.cos(x[:, 1]), np.cos(x[:, 2])


def _ex3d1_u(x, lam):
    sx, sy, sz, cx, cy, cz = _trig3(x)
    return _stack(sx * sy * sz, cx * cy * cz, cx * sy * sz)


def _ex3d1_grad(x, lam):
    sx, sy, sz, cx, cy, cz = _trig3(x)
    return _mat([
        (cx * sy * sz, sx * cy * sz, sx * sy * cz),
        (-sx * cy * cz, -cx * sy * cz, -cx * cy * sz),
        (-sx * sy * sz, cx * cy * sz, cx * sy * cz),
    ])


def _ex3d1_div(x, lam):
    sx, sy, sz, cx, cy, cz = _trig3(x)
    return cx * sy * sz


def _ex3d1_lap(x, lam):
    return -3 * _ex3d1_u(x, lam)


def _ex3d1_grad_div(x, lam):
    sx, sy, sz, cx, cy, cz = _trig3(x)
    return _stack(-sx * sy * sz, cx * cy * sz, cx * sy * cz)


# -- divergence-free polynomial plus 1/lam sine perturbation -----------------

def _poly_factors(x):
    X, Y = x[:, 0], x[:, 1]
    a = X**4 - 2 * X**3 + X**2
    a1 = 4 * X**3 - 6 * X**2 + 2 * X
    a2 = 12 * X**2 - 12 * X + 2
    a3 = 24 * X - 12
    b = Y**5 - 2 * Y**4 + Y**3
    b1 = 5 * Y**4 - 8 * Y**3 + 3 * Y**2
    b2 = 20 * Y**3 - 24 * Y**2 + 6 * Y
    b3 = 60 * Y**2 - 48 * Y + 6
    return a, a1, a2, a3, b, b1, b2, b3


def _ex2d2_u(x, lam):
    a, a1, _, _, b, b1, _, _ = _poly_factors(x)
    return _stack(a * b1, -a1 * b) + _ex2d1_u(x, lam) / lam


def _ex2d2_grad(x, lam):
    a, a1, a2, _, b, b1, b2, _ = _poly_factors(x)
    poly = _mat([(a1 * b1, a * b2), (-a2 * b, -a1 * b1)])
    return poly + _ex2d1_grad(x, lam) / lam


def _ex2d2_div(x, lam):
    return _ex2d1_div(x, lam) / lam


def _ex2d2_lap(x, lam):
    a, a1, a2, a3, b, b1, b2, b3 = _poly_factors(x)
    poly = _stack(a2 * b1 + a * b3, -a3 * b - a1 * b2)
    return poly + _ex2d1_lap(x, lam) / lam


def _ex2d2_grad_div(x, lam):
    return _ex2d1_grad_div(x, lam) / lam


# -- 3D divergence-free field plus 1/lam perturbation ------------------------

def _ex3d2_u(x, lam):
    sx, sy, sz, cx, cy, cz = _trig3(x)
    z = x[:, 2]
    return _stack(z**3 * sx * sy + sx / lam, 5 * z**3 * cx * cy + sy / lam, z**4 * cx * sy + sz / lam)


def _ex3d2_grad(x, lam):
    sx, sy, sz, cx, cy, cz = _trig3(x)
    z = x[:, 2]
    return _mat([
        (z**3 * cx * sy + cx / lam, z**3 * sx * cy, 3 * z**2 * sx * sy),
        (-5 * z**3 * sx * cy, -5 * z**3 * cx * sy + cy / lam, 15 * z**2 * cx * cy),
        (-(z**4) * sx * sy, z**4 * cx * cy, 4 * z**3 * cx * sy + cz / lam),
    ])


def _ex3d2_div(x, lam):
    return (np.cos(x[:, 0]) + np.cos(x[:, 1]) + np.cos(x[:, 2])) / lam


def _ex3d2_lap(x, lam):
    sx, sy, sz, cx, cy, cz = _trig3(x)
    z = x[:, 2]
    return _stack(
        (-2 * z**3 + 6 * z) * sx * sy - sx / lam,
        (-10 * z**3 + 30 * z) * cx * cy - sy / lam,
        (-2 * z**4 + 12 * z**2) * cx * sy - sz / lam,
    )


def _ex3d2_grad_div(x, lam):
    return -np.sin(x) / lam


# -- unbounded lam * div(u) ---------------------------------------------------

def _ex2d6_u(x, lam):
    sx, sy, cx, cy = _sinsin_parts(x)
    return _stack(sx * cy, cx * sy)


def _ex2d6_grad(x, lam):
    sx, sy, cx, cy = _sinsin_parts(x)
    return PI * _mat([(cx * cy, -sx * sy), (-sx * sy, cx * cy)])


def _ex2d6_div(x, lam):
    _, _, cx, cy = _sinsin_parts(x)
    return 2 * PI * cx * cy


def _ex2d6_force(x, mu, lam):
    sx, sy, cx, cy = _sinsin_parts(x)
    w = _stack(-2 * PI**2 * sx * cy, -2 * PI**2 * cx * sy)
    return -mu * w - (lam + mu) * w


CASES = {
    "ex2d1": ManufacturedCase("ex2d1", 2, "u = sin(pi x) sin(pi y) (1, 1)", True,
                              _ex2d1_u, _ex2d1_grad, _ex2d1_div, _from_parts(_ex2d1_lap, _ex2d1_grad_div)),
    "ex3d1": ManufacturedCase("ex3d1", 3, "u = (sin x sin y sin z, cos x cos y cos z, cos x sin y sin z)", False,
                              _ex3d1_u, _ex3d1_grad, _ex3d1_div, _from_parts(_ex3d1_lap, _ex3d1_grad_div)),
    "ex2d2": ManufacturedCase("ex2d2", 2, "divergence-free polynomial + sin(pi x) sin(pi y) (1, 1) / lam", True,
                              _ex2d2_u, _ex2d2_grad, _ex2d2_div, _from_parts(_ex2d2_lap, _ex2d2_grad_div)),
    "ex3d2": ManufacturedCase("ex3d2", 3, "z^3-weighted divergence-free field + (sin x, sin y, sin z) / lam", False,
                              _ex3d2_u, _ex3d2_grad, _ex3d2_div, _from_parts(_ex3d2_lap, _ex3d2_grad_div)),
    "ex2d6": ManufacturedCase("ex2d6", 2, "u = (sin(pi x) cos(pi y), cos(pi x) sin(pi y)), unbounded lam div u", False,
                              _ex2d6_u, _ex2d6_grad, _ex2d6_div, _ex2d6_force),
}
ALIASES = {"ex2d3": "ex2d6"}


def case_library() -> list[ManufacturedCase]:
    return list(CASES.values())


def get_case(name: str) -> ManufacturedCase:
    key = ALIASES.get(name, name)
    try:
        return CASES[key]
    except KeyError:
        raise KeyError(f"unknown case {name!r}; available: {', '.join(CASES)}") from None
