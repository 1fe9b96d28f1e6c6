"""Global assembly of the broken-Hessian bilinear form and sparse solve.

The unreduced system couples all three DOFs of every vertex; constraint
elimination happens algebraically through the expansion matrix C of the
DofSystem: K_red = C^T K C, b_red = C^T b.  Assembly is vectorized over
elements (the local matrix depends on the half-widths only through four
scalar factors) and deterministic: COO triplets are emitted in element
order and summed by scipy's canonical duplicate reduction.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .element import (adini_basis, dof_scaling, eval_local, gauss_2d,
                      load_tables, reference_stiffness_blocks)
from .dofs import DofSystem, FREE


def element_geometry(mesh):
    """Arrays (hx, hy, mx, my) over active elements in mesh order."""
    hx = np.array([r.hx for r in mesh.rects])
    hy = np.array([r.hy for r in mesh.rects])
    mx = np.array([0.5 * (r.x0 + r.x1) for r in mesh.rects])
    my = np.array([0.5 * (r.y0 + r.y1) for r in mesh.rects])
    return hx, hy, mx, my


def local_stiffness_batch(hx: np.ndarray, hy: np.ndarray) -> np.ndarray:
    """(nelem, 12, 12) element matrices for all elements at once."""
    axx, axy, ayy = reference_stiffness_blocks()
    kref = (hy / hx**3)[:, None, None] * axx \
        + (2.0 / (hx * hy))[:, None, None] * axy \
        + (hx / hy**3)[:, None, None] * ayy
    s = np.stack([dof_scaling(a, b) for a, b in zip(hx, hy)])
    return kref * s[:, :, None] * s[:, None, :]


def local_load_batch(hx, hy, mx, my, f, order: int = 5) -> np.ndarray:
    """(nelem, 12) load vectors; f is evaluated in one vectorized call."""
    pts, w, phi = load_tables(order)
    x = mx[:, None] + hx[:, None] * pts[:, 0]
    y = my[:, None] + hy[:, None] * pts[:, 1]
    fv = np.asarray(f(x.ravel(), y.ravel()), dtype=float).reshape(x.shape)
    s = np.stack([dof_scaling(a, b) for a, b in zip(hx, hy)])
    return (hx * hy)[:, None] * s * ((fv * w) @ phi)


class ReducedSystem:
    """Reduced SPD stiffness matrix and right-hand side."""

    def __init__(self, matrix: sp.csr_matrix, rhs: np.ndarray,
                 dofs: DofSystem):
        self.matrix = matrix
        self.rhs = rhs
        self.dofs = dofs

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def export_matrix_market(self, path):
        from scipy.io import mmwrite
        mmwrite(str(path), self.matrix.tocoo(), symmetry="symmetric")


def assemble(mesh, dofs: DofSystem, f, load_order: int = 5) -> ReducedSystem:
    """Assemble the constrained stiffness matrix and load vector."""
    hx, hy, mx, my = element_geometry(mesh)
    kloc = local_stiffness_batch(hx, hy)
    bloc = local_load_batch(hx, hy, mx, my, f, order=load_order)
    edofs = dofs.element_dofs()
    n_all = 3 * mesh.num_vertices

    rows = np.repeat(edofs, 12, axis=1).ravel()
    cols = np.tile(edofs, (1, 12)).ravel()
    k_all = sp.coo_matrix((kloc.ravel(), (rows, cols)),
                          shape=(n_all, n_all)).tocsr()
    b_all = np.zeros(n_all)
    np.add.at(b_all, edofs.ravel(), bloc.ravel())

    c = dofs.expansion
    k_red = (c.T @ k_all @ c).tocsr()
    b_red = c.T @ b_all
    return ReducedSystem(k_red, b_red, dofs)


def solve(system: ReducedSystem) -> np.ndarray:
    """Direct sparse solve with a residual check."""
    x = spsolve(system.matrix.tocsc(), system.rhs)
    bnorm = np.linalg.norm(system.rhs)
    if bnorm > 0:
        rel = np.linalg.norm(system.matrix @ x - system.rhs) / bnorm
        if rel > 1e-6:
            raise RuntimeError(f"sparse solve residual too large: {rel:.3e}")
    return x


class DiscreteField:
    """A member of the discrete space: free coefficients + constraint map,
    with cached per-element local DOF vectors."""

    def __init__(self, mesh, dofs: DofSystem, free: np.ndarray):
        self.mesh = mesh
        self.dofs = dofs
        self.free = np.asarray(free, dtype=float)
        self.all_dofs = dofs.expansion @ self.free
        self.local = self.all_dofs[dofs.element_dofs()]  # (nelem, 12)
        self._geom = element_geometry(mesh)

    @classmethod
    def from_vertex_data(cls, mesh, dofs: DofSystem, value, gradx, grady):
        """Adini interpolation: free DOFs from point data, the rest from
        the boundary/constraint rules."""
        coords = mesh.topo.vcoord
        data = np.empty(3 * mesh.num_vertices)
        data[0::3] = value(coords[:, 0], coords[:, 1])
        data[1::3] = gradx(coords[:, 0], coords[:, 1])
        data[2::3] = grady(coords[:, 0], coords[:, 1])
        free = data[dofs.status == FREE]
        return cls(mesh, dofs, free)

    def eval(self, elem: int, xi, eta, deriv=(0, 0)):
        """Piecewise derivative at reference points of element ``elem``
        (index into mesh.rects)."""
        hx, hy = self._geom[0][elem], self._geom[1][elem]
        return eval_local(self.local[elem], hx, hy, xi, eta, deriv)

    def eval_at_point(self, x: float, y: float, deriv=(0, 0), elem=None):
        """Evaluate at a physical point (first containing element wins)."""
        if elem is None:
            cands = self.mesh.rects_containing(x, y)
            if not cands:
                raise ValueError(f"point ({x}, {y}) outside the mesh")
            elem = self.mesh.topo.rect_index[cands[0].id]
        r = self.mesh.rects[elem]
        xi = (x - 0.5 * (r.x0 + r.x1)) / r.hx
        eta = (y - 0.5 * (r.y0 + r.y1)) / r.hy
        return self.eval(elem, xi, eta, deriv)

    def energy_norm_sq(self, order: int = 4) -> float:
        """Broken Hessian seminorm squared, by quadrature (diagnostic; the
        assembled matrix gives the same number via x^T K x)."""
        hx, hy, _, _ = self._geom
        pts, w = gauss_2d(order)
        basis = adini_basis()
        total = 0.0
        tab = {d: basis.eval(pts[:, 0], pts[:, 1], deriv=d)
               for d in [(2, 0), (1, 1), (0, 2)]}
        for k in range(len(self.mesh.rects)):
            s = dof_scaling(hx[k], hy[k]) * self.local[k]
            dxx = tab[(2, 0)] @ s / hx[k]**2
            dxy = tab[(1, 1)] @ s / (hx[k] * hy[k])
            dyy = tab[(0, 2)] @ s / hy[k]**2
            total += hx[k] * hy[k] * float(
                w @ (dxx**2 + 2 * dxy**2 + dyy**2))
        return total


def solve_problem(mesh, dofs: DofSystem, f, load_order: int = 5):
    """Assemble, solve, and wrap the solution as a DiscreteField."""
    system = assemble(mesh, dofs, f, load_order=load_order)
    x = solve(system)
    return DiscreteField(mesh, dofs, x), system
