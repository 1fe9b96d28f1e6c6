"""Interpolation and averaging operators between the discrete spaces.

Three operators are provided as executable diagnostics:

* ``q1_interpolate`` -- hanging-constrained piecewise bilinear
  interpolation Q: values at regular vertices are taken as given, the
  value at an irregular vertex is the affine interpolation between the
  two regular neighbours on its host edge;
* ``adini_interpolate`` -- the standard Adini interpolation with the
  active hanging-node constraint variant applied;
* ``bfs_average`` -- the C^1 averaging (quasi-interpolation) into the
  Bogner-Fox-Schmit space: at every regular vertex the four data values
  {v, v_x, v_y, v_xy} are the averages of the one-sided limits over the
  elements containing the vertex; at irregular vertices the data is
  inherited from the hosting coarse element's polynomial, which makes
  the result globally C^1.

Non-bicubic input to the averaging operator is first projected
element-wise onto bicubics (L^2 mass-matrix solve).
"""

from __future__ import annotations

import numpy as np

from .assembly import DiscreteField
from .element import bfs_basis, eval_local, gauss_2d
from .mesh import Mesh


def bfs_dof_scaling(hx: float, hy: float) -> np.ndarray:
    """Physical-DOF scaling for BFS corners: (1, hx, hy, hx*hy)."""
    return np.tile([1.0, hx, hy, hx * hy], 4)


class BilinearField:
    """Continuous piecewise bilinear field with hanging-node constraints.

    Values are stored per vertex; the value at an irregular vertex is
    derived from its host-edge neighbours, not stored independently.
    """

    def __init__(self, mesh: Mesh, values: np.ndarray):
        self.mesh = mesh
        vals = np.asarray(values, dtype=float).copy()
        for w, info in mesh.topo.hanging.items():
            lam = info.lam1 + info.lam2
            vals[w] = (info.lam2 * vals[info.z1]
                       + info.lam1 * vals[info.z2]) / lam
        self.values = vals

    def vertex_value(self, v: int) -> float:
        return float(self.values[v])

    def eval(self, elem: int, xi, eta):
        r = self.mesh.rects[elem]
        cv = self.mesh.topo.rect_corner_vids[elem]
        c = self.values[cv]
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        shapes = [(1 - xi) * (1 - eta), (1 + xi) * (1 - eta),
                  (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)]
        return 0.25 * sum(ci * s for ci, s in zip(c, shapes))

    def grad(self, elem: int, xi, eta):
        r = self.mesh.rects[elem]
        cv = self.mesh.topo.rect_corner_vids[elem]
        c = self.values[cv]
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        dxi = 0.25 * (-c[0] * (1 - eta) + c[1] * (1 - eta)
                      + c[2] * (1 + eta) - c[3] * (1 + eta))
        deta = 0.25 * (-c[0] * (1 - xi) - c[1] * (1 + xi)
                       + c[2] * (1 + xi) + c[3] * (1 - xi))
        return dxi / r.hx, deta / r.hy


def q1_interpolate(mesh: Mesh, value) -> BilinearField:
    """Bilinear interpolation of ``value(x, y)`` at the regular vertices."""
    coords = mesh.topo.vcoord
    vals = np.asarray(value(coords[:, 0], coords[:, 1]), dtype=float)
    return BilinearField(mesh, vals)


def adini_interpolate(mesh: Mesh, dofs, value, gradx, grady) -> DiscreteField:
    """Adini interpolation of C^1 point data with constraints applied."""
    return DiscreteField.from_vertex_data(mesh, dofs, value, gradx, grady)


class BfsField:
    """Piecewise bicubic C^1 field with per-vertex data {v, vx, vy, vxy}.

    Irregular-vertex rows hold the data inherited from the hosting
    coarse element, so every element can read its 16 local DOFs straight
    from its four corner rows.
    """

    def __init__(self, mesh: Mesh, data: np.ndarray):
        self.mesh = mesh
        self.data = np.asarray(data, dtype=float)   # (nv, 4)
        self.local = self.data[mesh.topo.rect_corner_vids].reshape(
            len(mesh.rects), 16)

    def eval(self, elem: int, xi, eta, deriv=(0, 0)):
        r = self.mesh.rects[elem]
        i, j = deriv
        ref = bfs_basis().eval(xi, eta, deriv=deriv)
        c = self.local[elem] * bfs_dof_scaling(r.hx, r.hy)
        return (ref @ c) / (r.hx**i * r.hy**j)

    def energy_norm_sq(self, order: int = 4) -> float:
        pts, w = gauss_2d(order)
        total = 0.0
        for k, r in enumerate(self.mesh.rects):
            dxx = self.eval(k, pts[:, 0], pts[:, 1], deriv=(2, 0))
            dxy = self.eval(k, pts[:, 0], pts[:, 1], deriv=(1, 1))
            dyy = self.eval(k, pts[:, 0], pts[:, 1], deriv=(0, 2))
            total += r.hx * r.hy * float(w @ (dxx**2 + 2 * dxy**2
                                              + dyy**2))
        return total


def project_q3(field) -> np.ndarray:
    """Element-wise L^2 projection onto bicubics, as (nelem, 16) BFS DOFs.

    Adini fields are already piecewise bicubic, so for a DiscreteField
    the projection reduces to an exact change of basis.
    """
    mesh = field.mesh
    basis = bfs_basis()
    pts, w = gauss_2d(5)
    phi = basis.eval(pts[:, 0], pts[:, 1])           # (npts, 16)
    mass = (phi * w[:, None]).T @ phi                # reference mass matrix
    out = np.empty((len(mesh.rects), 16))
    for k, r in enumerate(mesh.rects):
        vals = np.asarray(field.eval(k, pts[:, 0], pts[:, 1]), dtype=float)
        rhs = (phi * w[:, None]).T @ vals
        out[k] = np.linalg.solve(mass, rhs) / bfs_dof_scaling(r.hx, r.hy)
    return out


def bfs_average(field, zero_boundary: bool = False) -> BfsField:
    """C^1 averaging of a piecewise field into the BFS space.

    ``zero_boundary`` additionally zeroes all four data values at
    vertices on the domain boundary.
    """
    mesh = field.mesh
    t = mesh.topo
    nv = mesh.num_vertices
    local = project_q3(field)                         # (nelem, 16)
    basis = bfs_basis()

    data = np.zeros((nv, 4))
    counts = np.zeros(nv)
    corner_ref = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
    derivs = [(0, 0), (1, 0), (0, 1), (1, 1)]
    tab = np.stack([np.stack([basis.eval(cx, cy, deriv=d)
                              for d in derivs]) for cx, cy in corner_ref])
    hanging = set(t.hanging)
    for k, r in enumerate(mesh.rects):
        c = local[k] * bfs_dof_scaling(r.hx, r.hy)
        scale = np.array([1.0, 1.0 / r.hx, 1.0 / r.hy, 1.0 / (r.hx * r.hy)])
        cv = t.rect_corner_vids[k]
        for ci in range(4):
            v = cv[ci]
            if v in hanging:
                continue
            data[v] += scale * (tab[ci] @ c)
            counts[v] += 1.0
    mask = counts > 0
    data[mask] /= counts[mask, None]

    if zero_boundary:
        for v in range(nv):
            x, y = t.vcoord[v]
            if mesh.domain.boundary_tags(x, y):
                data[v] = 0.0

    # irregular vertices: inherit all four values from the host coarse
    # element's polynomial (resolved outside-in, hosts are coarser)
    pending = dict(t.hanging)
    rect_index = t.rect_index
    while pending:
        progressed = False
        for w_, info in list(pending.items()):
            host = mesh.rect_by_id[info.host_rect]
            hk = rect_index[host.id]
            cv = t.rect_corner_vids[hk]
            if any(int(c) in pending for c in cv):
                continue
            c = data[cv].reshape(16) * bfs_dof_scaling(host.hx, host.hy)
            x, y = t.vcoord[w_]
            xi = (x - host.mid[0]) / host.hx
            eta = (y - host.mid[1]) / host.hy
            vals = []
            for (i, j) in derivs:
                ref = basis.eval(xi, eta, deriv=(i, j))
                vals.append(float(ref @ c) / (host.hx**i * host.hy**j))
            data[w_] = vals
            del pending[w_]
            progressed = True
        if not progressed:
            raise RuntimeError("cyclic hanging-vertex dependency")
    return BfsField(mesh, data)
