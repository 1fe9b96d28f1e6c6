"""Reference-element kernel for the 12-DOF Adini rectangle.

The shape space is P3 enriched by the monomials xi^3*eta and xi*eta^3.
Degrees of freedom are function value and both first partial derivatives
at the four corners of [-1,1]^2, corner order

    z1 = (-1,-1), z2 = (1,-1), z3 = (1,1), z4 = (-1,1)

and per-corner DOF order (value, d/dxi, d/deta).  Physical elements are
axis-aligned rectangles mapped by xi = (x - mx)/hx, eta = (y - my)/hy
with half-widths hx, hy, so a physical derivative DOF scales with the
corresponding half-width.

The Bogner-Fox-Schmit (Q3, 16-DOF) basis used by the averaging
diagnostics is built with the same functional-inversion machinery, with
the extra mixed-derivative DOF per corner.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .poly2d import poly_deriv, poly_eval, poly_integral, poly_mul

# Monomial order of the Adini space (exponents of xi, eta).
ADINI_EXPONENTS = [
    (0, 0), (1, 0), (0, 1),
    (2, 0), (1, 1), (0, 2),
    (3, 0), (2, 1), (1, 2), (0, 3),
    (3, 1), (1, 3),
]

BFS_EXPONENTS = [(i, j) for i in range(4) for j in range(4)]

CORNERS = np.array([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)])

# DOF multi-indices: value, d/dx, d/dy (plus d2/dxdy for BFS).
ADINI_DOF_DERIVS = [(0, 0), (1, 0), (0, 1)]
BFS_DOF_DERIVS = [(0, 0), (1, 0), (0, 1), (1, 1)]


def _mono_array(exp, size):
    c = np.zeros((size, size))
    c[exp] = 1.0
    return c


class ReferenceBasis:
    """Nodal basis on [-1,1]^2 given by inverting the DOF/monomial matrix."""

    def __init__(self, exponents, dof_derivs, size):
        self.exponents = list(exponents)
        self.dof_derivs = list(dof_derivs)
        self.ndof = len(exponents)
        nper = len(dof_derivs)
        vand = np.empty((self.ndof, self.ndof))
        for m, exp in enumerate(self.exponents):
            mono = _mono_array(exp, size)
            for ci, (cx, cy) in enumerate(CORNERS):
                for di, (dx, dy) in enumerate(dof_derivs):
                    vand[ci * nper + di, m] = poly_eval(
                        poly_deriv(mono, dx, dy), cx, cy)
        cond = np.linalg.cond(vand)
        if cond > 1e3:
            raise RuntimeError(f"nodal matrix badly conditioned: {cond:.3g}")
        inv = np.linalg.inv(vand)
        # coeffs[k] is the coefficient array of basis function k
        self.coeffs = np.zeros((self.ndof, size, size))
        for k in range(self.ndof):
            for m, exp in enumerate(self.exponents):
                self.coeffs[k][exp] += inv[m, k]
        self._deriv_cache = {}

    def deriv_coeffs(self, dx: int, dy: int) -> np.ndarray:
        """Coefficient arrays of the (dx,dy) derivative of every basis fn."""
        key = (dx, dy)
        if key not in self._deriv_cache:
            self._deriv_cache[key] = np.stack(
                [poly_deriv(c, dx, dy) for c in self.coeffs])
        return self._deriv_cache[key]

    def eval(self, xi, eta, deriv=(0, 0)) -> np.ndarray:
        """Tabulate all basis functions; output shape pts_shape + (ndof,)."""
        dc = self.deriv_coeffs(*deriv)
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        out = np.empty(np.broadcast(xi, eta).shape + (self.ndof,))
        for k in range(self.ndof):
            out[..., k] = poly_eval(dc[k], xi, eta)
        return out


@lru_cache(maxsize=None)
def adini_basis() -> ReferenceBasis:
    return ReferenceBasis(ADINI_EXPONENTS, ADINI_DOF_DERIVS, size=4)


@lru_cache(maxsize=None)
def bfs_basis() -> ReferenceBasis:
    return ReferenceBasis(BFS_EXPONENTS, BFS_DOF_DERIVS, size=4)


@lru_cache(maxsize=None)
def gauss_1d(n: int):
    x, w = leggauss(n)
    return x, w


@lru_cache(maxsize=None)
def gauss_2d(n: int):
    """Tensor Gauss rule on [-1,1]^2: points (n*n, 2), weights (n*n,)."""
    x, w = leggauss(n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    return pts, W.ravel()


@lru_cache(maxsize=None)
def reference_stiffness_blocks():
    """Exact integrals of products of reference second derivatives.

    Returns (Axx, Axy, Ayy) with
        Axx[i,j] = int phi_i,xixi phi_j,xixi  etc.
    """
    basis = adini_basis()
    n = basis.ndof
    blocks = []
    for d in [(2, 0), (1, 1), (0, 2)]:
        dc = basis.deriv_coeffs(*d)
        a = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                a[i, j] = a[j, i] = poly_integral(poly_mul(dc[i], dc[j]))
        blocks.append(a)
    return tuple(blocks)


def dof_scaling(hx: float, hy: float) -> np.ndarray:
    """Physical-DOF scaling: value 1, d/dx -> hx, d/dy -> hy, per corner."""
    return np.tile([1.0, hx, hy], 4)


def local_stiffness(hx: float, hy: float) -> np.ndarray:
    """Element matrix of the Hessian inner product on a rect with
    half-widths (hx, hy), in physical (value, d/dx, d/dy) DOFs."""
    axx, axy, ayy = reference_stiffness_blocks()
    kref = (hy / hx**3) * axx + (2.0 / (hx * hy)) * axy + (hx / hy**3) * ayy
    s = dof_scaling(hx, hy)
    return kref * np.outer(s, s)


@lru_cache(maxsize=None)
def load_tables(order: int):
    """Reference basis values at a tensor Gauss rule, for load assembly."""
    pts, w = gauss_2d(order)
    phi = adini_basis().eval(pts[:, 0], pts[:, 1])  # (npts, 12)
    return pts, w, phi


def local_load(hx, hy, mx, my, f, order: int = 5) -> np.ndarray:
    """Load vector int_T f phi_i for a single rect; f maps (x, y) arrays."""
    pts, w, phi = load_tables(order)
    x = mx + hx * pts[:, 0]
    y = my + hy * pts[:, 1]
    fv = np.asarray(f(x, y), dtype=float)
    return hx * hy * dof_scaling(hx, hy) * ((w * fv) @ phi)


def eval_local(coeffs: np.ndarray, hx: float, hy: float,
               xi, eta, deriv=(0, 0)):
    """Evaluate a local Adini function from its 12 physical DOF values.

    ``deriv=(i, j)`` requests the physical derivative d^(i+j)/dx^i dy^j
    with i + j <= 4; chain-rule factors 1/hx^i, 1/hy^j are applied.
    """
    i, j = deriv
    if i + j > 4 or i < 0 or j < 0:
        raise ValueError(f"unsupported derivative order {deriv}")
    ref = adini_basis().eval(xi, eta, deriv=deriv)
    c = np.asarray(coeffs, dtype=float) * dof_scaling(hx, hy)
    return (ref @ c) / (hx**i * hy**j)
