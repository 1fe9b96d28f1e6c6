"""Benchmark problems: exact solutions, loads, domains, boundary data.

Five problems are registered:

* ``biquartic_square``  -- smooth biquartic on the clamped square;
* ``disk_fictitious``   -- unit disk embedded in a square background mesh,
  DOFs at vertices outside the disk zeroed;
* ``lshape_clamped``    -- Grisvard corner singularity, clamped L-shape;
* ``cusp_domain``       -- Grisvard singularity at opening 7*pi/4 on a
  square minus a corner triangle, treated as a fictitious domain on the
  full square background mesh (DOFs on the closed triangle zeroed);
* ``lshape_mixed``      -- simply-supported/clamped mix on the L-shape.

The singular solutions have the form u = b(x, y) * s(r, theta) with a
polynomial bubble b and a biharmonic singular factor s.  Their load
f = bilaplacian(u) is expanded by the Leibniz rule with the vanishing
term b * bilaplacian(s) dropped, so only derivatives of s up to third
order are needed and f stays locally integrable.  All factor derivatives
come from sympy and are evaluated through numpy lambdification.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dfield
from functools import lru_cache

import numpy as np
import sympy as sym
from scipy.optimize import brentq

from .element import dof_scaling, gauss_2d, adini_basis
from .dofs import build_dof_system
from .mesh import (Domain, Mesh, build_tensor_mesh, lshape_domain,
                   square_domain)

TWO_PI = 2.0 * np.pi


# ----------------------------------------------------------------------
# symbolic helpers
# ----------------------------------------------------------------------
_X, _Y = sym.symbols("x y", real=True)
_R = sym.Symbol("r", positive=True)
_T = sym.Symbol("t", real=True)


def _polar_dx(expr):
    return sym.diff(expr, _R) * sym.cos(_T) \
        - sym.diff(expr, _T) * sym.sin(_T) / _R


def _polar_dy(expr):
    return sym.diff(expr, _R) * sym.sin(_T) \
        + sym.diff(expr, _T) * sym.cos(_T) / _R


def _polar_derivative_table(s_expr, max_order: int = 3):
    """Lambdified Cartesian derivatives of a polar expression s(r, t).

    Returns {(i, j): fn(r, t)} for all i + j <= max_order; the chain rule
    is applied symbolically through dr = (cos t, sin t), dt = (-sin t,
    cos t)/r.
    """
    exprs = {(0, 0): s_expr}
    for i in range(1, max_order + 1):
        exprs[(i, 0)] = sym.simplify(_polar_dx(exprs[(i - 1, 0)]))
    for (i, j) in list(exprs):
        for k in range(1, max_order - i + 1):
            exprs[(i, k)] = sym.simplify(_polar_dy(exprs[(i, k - 1)]))
    return {k: sym.lambdify((_R, _T), v, "numpy") for k, v in exprs.items()}


def _cartesian_derivative_table(b_expr, max_order: int = 4):
    """Lambdified derivatives of a polynomial expression in x, y."""
    out = {}
    for i in range(max_order + 1):
        for j in range(max_order + 1 - i):
            d = sym.diff(b_expr, _X, i, _Y, j)
            out[(i, j)] = sym.lambdify((_X, _Y), d, "numpy")
    return out


def _polar_coords(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    t = np.arctan2(y, x)
    t = np.where(t < 0.0, t + TWO_PI, t)
    return r, t


class SingularProduct:
    """Callable bundle for u = b(x, y) * s(r, theta), s biharmonic."""

    def __init__(self, b_expr, s_expr):
        self.b = _cartesian_derivative_table(b_expr, max_order=4)
        self.s = _polar_derivative_table(s_expr, max_order=3)

    def _sval(self, key, x, y):
        r, t = _polar_coords(x, y)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = self.s[key](r, t)
        return np.broadcast_to(np.asarray(v, dtype=float), r.shape).copy()

    def _bval(self, key, x, y):
        v = self.b[key](np.asarray(x, float), np.asarray(y, float))
        return np.broadcast_to(np.asarray(v, dtype=float),
                               np.shape(x)).copy()

    def value(self, x, y):
        return self._bval((0, 0), x, y) * self._sval((0, 0), x, y)

    def grad(self, x, y):
        b, bx, by = (self._bval(k, x, y) for k in [(0, 0), (1, 0), (0, 1)])
        s, sx, sy = (self._sval(k, x, y) for k in [(0, 0), (1, 0), (0, 1)])
        return bx * s + b * sx, by * s + b * sy

    def hess(self, x, y):
        bk = {k: self._bval(k, x, y)
              for k in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]}
        sk = {k: self._sval(k, x, y)
              for k in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]}
        uxx = bk[(2, 0)] * sk[(0, 0)] + 2 * bk[(1, 0)] * sk[(1, 0)] \
            + bk[(0, 0)] * sk[(2, 0)]
        uxy = bk[(1, 1)] * sk[(0, 0)] + bk[(1, 0)] * sk[(0, 1)] \
            + bk[(0, 1)] * sk[(1, 0)] + bk[(0, 0)] * sk[(1, 1)]
        uyy = bk[(0, 2)] * sk[(0, 0)] + 2 * bk[(0, 1)] * sk[(0, 1)] \
            + bk[(0, 0)] * sk[(0, 2)]
        return uxx, uxy, uyy

    def load(self, x, y):
        """Bilaplacian of b*s with the b * (bilap s) = 0 term dropped."""
        b = {k: self._bval(k, x, y) for k in self.b}
        s = {k: self._sval(k, x, y) for k in self.s}
        bih_b = b[(4, 0)] + 2 * b[(2, 2)] + b[(0, 4)]
        lap_b = b[(2, 0)] + b[(0, 2)]
        lap_b_x = b[(3, 0)] + b[(1, 2)]
        lap_b_y = b[(2, 1)] + b[(0, 3)]
        lap_s = s[(2, 0)] + s[(0, 2)]
        lap_s_x = s[(3, 0)] + s[(1, 2)]
        lap_s_y = s[(2, 1)] + s[(0, 3)]
        return (s[(0, 0)] * bih_b
                + 4.0 * (lap_b_x * s[(1, 0)] + lap_b_y * s[(0, 1)])
                + 2.0 * lap_b * lap_s
                + 4.0 * (b[(2, 0)] * s[(2, 0)]
                         + 2 * b[(1, 1)] * s[(1, 1)]
                         + b[(0, 2)] * s[(0, 2)])
                + 4.0 * (b[(1, 0)] * lap_s_x + b[(0, 1)] * lap_s_y))


class PolynomialSolution:
    """Callable bundle for a globally polynomial exact solution."""

    def __init__(self, u_expr):
        self.tab = _cartesian_derivative_table(u_expr, max_order=4)

    def _v(self, key, x, y):
        v = self.tab[key](np.asarray(x, float), np.asarray(y, float))
        return np.broadcast_to(np.asarray(v, dtype=float),
                               np.shape(x)).copy()

    def value(self, x, y):
        return self._v((0, 0), x, y)

    def grad(self, x, y):
        return self._v((1, 0), x, y), self._v((0, 1), x, y)

    def hess(self, x, y):
        return (self._v((2, 0), x, y), self._v((1, 1), x, y),
                self._v((0, 2), x, y))

    def load(self, x, y):
        return (self._v((4, 0), x, y) + 2 * self._v((2, 2), x, y)
                + self._v((0, 4), x, y))


# ----------------------------------------------------------------------
# singular exponents
# ----------------------------------------------------------------------
def clamped_corner_exponent(omega: float, guess: float) -> float:
    """Root of sin^2(a*omega) = a^2 sin^2(omega) near the given guess."""
    def chi(a):
        return np.sin(a * omega) ** 2 - a**2 * np.sin(omega) ** 2
    return brentq(chi, guess - 1e-3, guess + 1e-3, xtol=1e-14)


def grisvard_angular_expr(alpha: float, omega: float):
    """The angular factor g(t) of the clamped corner singularity."""
    a = sym.Float(alpha, 30)
    w = sym.Float(omega, 30)

    def sm(z):
        return sym.sin((a - 1) * z)

    def sp(z):
        return sym.sin((a + 1) * z)

    def cm(z):
        return sym.cos((a - 1) * z)

    def cp(z):
        return sym.cos((a + 1) * z)

    return ((sm(w) / (a - 1) - sp(w) / (a + 1)) * (cm(_T) - cp(_T))
            - (sm(_T) / (a - 1) - sp(_T) / (a + 1)) * (cm(w) - cp(w)))


# ----------------------------------------------------------------------
# problem registry
# ----------------------------------------------------------------------
@dataclass
class Problem:
    name: str
    domain: Domain
    solution: object            # value/grad/hess/load bundle
    initial_nx: int
    initial_ny: int
    zero_vertex: object = None          # fictitious-domain DOF zeroing
    inside: object = None               # error-quadrature mask
    drop_element: object = None         # interior-approximation filter
    singular_corner: tuple | None = None
    boundary_augmentation: bool = False
    alpha: float | None = None
    omega: float | None = None

    @property
    def f(self):
        return self.solution.load

    def initial_background(self) -> Mesh:
        """Unfiltered tensor mesh; the refinement hierarchy lives here.

        Interior-approximation problems refine this background mesh and
        re-filter each level, so children of a dropped element reappear
        once they clear the excluded region.
        """
        return build_tensor_mesh(self.domain, self.initial_nx,
                                 self.initial_ny)

    def initial_mesh(self) -> Mesh:
        return self.filter_mesh(self.initial_background())

    def filter_mesh(self, mesh: Mesh) -> Mesh:
        """Drop excluded elements (interior approximation).

        Dropping only removes vertex/edge incidences, so a mesh obeying
        the 1-irregularity condition keeps it after filtering.
        """
        if self.drop_element is None:
            return mesh
        rects = [r for r in mesh.rects if not self.drop_element(r)]
        return Mesh(mesh.domain, rects, next_id=mesh.next_id,
                    aspect_bound=mesh.aspect_bound)

    def build_dofs(self, mesh: Mesh, variant: str):
        return build_dof_system(mesh, variant, zero_vertex=self.zero_vertex)


def _in_closed_triangle(x, y, eps=1e-12):
    """The removed corner triangle conv{(0,0), (1,-1), (1,0)}."""
    return (x >= -eps) and (y <= eps) and (y >= -x - eps)


@lru_cache(maxsize=None)
def make_problem(name: str) -> Problem:
    if name == "biquartic_square":
        u = -(_X**4 - 2 * _X**2 + 1) * (_Y**4 - 2 * _Y**2 + 1)
        return Problem(name, square_domain(), PolynomialSolution(u), 2, 2)

    if name == "disk_fictitious":
        u = (_X**2 + _Y**2 - 1) ** 2 / 64
        return Problem(
            name, square_domain(), PolynomialSolution(u), 2, 2,
            zero_vertex=lambda x, y: x * x + y * y >= 1.0,
            inside=lambda x, y: x * x + y * y <= 1.0)

    if name == "lshape_clamped":
        omega = 1.5 * np.pi
        alpha = clamped_corner_exponent(omega, 0.5444837)
        b = (_X**2 - 1) ** 2 * (_Y**2 - 1) ** 2
        s = _R ** (1 + sym.Float(alpha, 30)) \
            * grisvard_angular_expr(alpha, omega)
        return Problem(name, lshape_domain(), SingularProduct(b, s), 4, 4,
                       singular_corner=(0.0, 0.0), alpha=alpha, omega=omega)

    if name == "cusp_domain":
        omega = 1.75 * np.pi
        alpha = clamped_corner_exponent(omega, 0.50500969)
        b = (_X**2 - 1) ** 2 * (_Y**2 - 1) ** 2
        s = _R ** (1 + sym.Float(alpha, 30)) \
            * grisvard_angular_expr(alpha, omega)
        return Problem(
            name, square_domain(), SingularProduct(b, s), 2, 2,
            zero_vertex=lambda x, y: _in_closed_triangle(x, y),
            inside=lambda x, y: ~((np.asarray(x) > 0.0)
                                  & (np.asarray(y) < 0.0)
                                  & (np.asarray(y) > -np.asarray(x))),
            singular_corner=(0.0, 0.0), boundary_augmentation=True,
            alpha=alpha, omega=omega)

    if name == "lshape_mixed":
        b = (1 - _X**2) ** 2 * (1 - _Y**2) ** 2
        s = _R ** sym.Rational(4, 3) * sym.sin(4 * _T / 3)
        return Problem(name, lshape_domain(mixed=True),
                       SingularProduct(b, s), 4, 4,
                       singular_corner=(0.0, 0.0),
                       alpha=4.0 / 3.0, omega=1.5 * np.pi)

    raise ValueError(f"unknown problem: {name}")


PROBLEM_NAMES = ["biquartic_square", "disk_fictitious", "lshape_clamped",
                 "cusp_domain", "lshape_mixed"]


# ----------------------------------------------------------------------
# energy-norm error
# ----------------------------------------------------------------------
@dataclass
class ErrorReport:
    total: float
    per_element: np.ndarray
    order: int


def energy_error(field, problem: Problem, order: int = 7,
                 singular_order: int = 10) -> ErrorReport:
    """Broken Hessian norm of u - u_h by per-element Gauss quadrature.

    Elements whose closure contains the singular corner use the higher
    order rule; quadrature points outside problem.inside are skipped.
    """
    mesh = field.mesh
    n = len(mesh.rects)
    per = np.zeros(n)
    if problem.singular_corner is not None:
        cx, cy = problem.singular_corner
        singular = np.array([r.contains_point(cx, cy) for r in mesh.rects])
    else:
        singular = np.zeros(n, dtype=bool)

    for use_singular in (False, True):
        idx = np.nonzero(singular == use_singular)[0]
        if len(idx) == 0:
            continue
        q = singular_order if use_singular else order
        per[idx] = _group_error(field, problem, idx, q)
    total = float(np.sqrt(per.sum()))
    return ErrorReport(total, per, order)


def _group_error(field, problem, idx, order):
    mesh = field.mesh
    pts, w = gauss_2d(order)
    basis = adini_basis()
    tab = {d: basis.eval(pts[:, 0], pts[:, 1], deriv=d)
           for d in [(2, 0), (1, 1), (0, 2)]}
    hx = np.array([mesh.rects[k].hx for k in idx])
    hy = np.array([mesh.rects[k].hy for k in idx])
    mx = np.array([mesh.rects[k].mid[0] for k in idx])
    my = np.array([mesh.rects[k].mid[1] for k in idx])
    x = mx[:, None] + hx[:, None] * pts[:, 0]
    y = my[:, None] + hy[:, None] * pts[:, 1]
    uxx, uxy, uyy = problem.solution.hess(x.ravel(), y.ravel())
    uxx, uxy, uyy = (a.reshape(x.shape) for a in (uxx, uxy, uyy))
    scal = np.stack([dof_scaling(a, b) for a, b in zip(hx, hy)])
    c = field.local[idx] * scal
    dxx = (c @ tab[(2, 0)].T) / hx[:, None] ** 2
    dxy = (c @ tab[(1, 1)].T) / (hx * hy)[:, None]
    dyy = (c @ tab[(0, 2)].T) / hy[:, None] ** 2
    integrand = (dxx - uxx) ** 2 + 2 * (dxy - uxy) ** 2 + (dyy - uyy) ** 2
    if problem.inside is not None:
        integrand = integrand * problem.inside(x, y)
    return (hx * hy) * (integrand @ w)
