"""Global degree-of-freedom bookkeeping and hanging-node constraints.

Every vertex carries three DOFs (value, d/dx, d/dy).  Essential boundary
conditions zero DOFs at boundary vertices; each hanging vertex gets three
affine constraint rows: value and tangential derivative from the cubic
Hermite trace of the host edge, and the normal derivative from either

* the averaging rule, distance-weighted linear interpolation of the two
  host-edge endpoint values, or
* the hard rule, the trace of the coarse host element's normal
  derivative at the hanging point.

Rows are expanded until they reference only free or zeroed DOFs.  For the
averaging/Hermite rows the mesh condition makes that immediate (the two
neighbours of a hanging vertex are regular); hard rows may reach a
hanging corner of the host element and are substituted recursively, which
terminates because host elements are strictly coarser.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .element import adini_basis, dof_scaling
from .mesh import CLAMPED, SIMPLY_SUPPORTED, Mesh

FREE = 0
ZERO = 1
CONSTRAINED = 2

AVERAGING = "averaging"
HARD = "hard"

# local DOF layout: per corner (value, d/dx, d/dy)
VAL, DX, DY = 0, 1, 2


def hermite_value_weights(s: float, length: float):
    """Cubic Hermite weights for the value at parameter s in [0,1] of an
    edge of the given length; data order (v1, dt1, v2, dt2)."""
    return np.array([
        1.0 - 3.0 * s**2 + 2.0 * s**3,
        length * s * (1.0 - s) ** 2,
        3.0 * s**2 - 2.0 * s**3,
        length * s**2 * (s - 1.0),
    ])


def hermite_deriv_weights(s: float, length: float):
    """Weights for the tangential derivative at parameter s."""
    return np.array([
        6.0 * (s**2 - s) / length,
        (1.0 - s) * (1.0 - 3.0 * s),
        6.0 * (s - s**2) / length,
        s * (3.0 * s - 2.0),
    ])


class DofSystem:
    """Partition of the 3-per-vertex DOFs into free / zero / constrained."""

    def __init__(self, mesh: Mesh, variant: str, status, free_index, rows,
                 reported_ndof: int):
        self.mesh = mesh
        self.variant = variant
        self.status = status                # (3*nv,) in {FREE, ZERO, CONSTRAINED}
        self.free_index = free_index        # (3*nv,) index into free vector, -1
        self.rows = rows                    # gdof -> [(gdof, weight)], fully expanded
        self.num_free = int((status == FREE).sum())
        self.reported_ndof = reported_ndof
        self._expansion = None

    @property
    def expansion(self) -> sp.csr_matrix:
        """Sparse C with (all DOFs) = C @ (free DOFs)."""
        if self._expansion is None:
            n = len(self.status)
            ii, jj, vv = [], [], []
            for g in range(n):
                if self.status[g] == FREE:
                    ii.append(g)
                    jj.append(self.free_index[g])
                    vv.append(1.0)
                elif self.status[g] == CONSTRAINED:
                    for h, w in self.rows[g]:
                        if self.status[h] == FREE:
                            ii.append(g)
                            jj.append(self.free_index[h])
                            vv.append(w)
            self._expansion = sp.csr_matrix(
                (vv, (ii, jj)), shape=(n, self.num_free))
        return self._expansion

    def element_dofs(self) -> np.ndarray:
        """(nelem, 12) global DOF ids in local (corner, value/dx/dy) order."""
        cv = self.mesh.topo.rect_corner_vids
        out = np.empty((cv.shape[0], 12), dtype=np.int64)
        for d in range(3):
            out[:, d::3] = 3 * cv + d
        return out

    def summary(self) -> dict:
        s = self.status
        return {
            "variant": self.variant,
            "vertices": self.mesh.num_vertices,
            "free": int((s == FREE).sum()),
            "zero": int((s == ZERO).sum()),
            "constrained": int((s == CONSTRAINED).sum()),
            "reported_ndof": self.reported_ndof,
        }


def _boundary_zero_dofs(mesh: Mesh, v: int, x: float, y: float):
    """Local DOF components zeroed at a boundary vertex by the BC tags."""
    segs = [s for s in mesh.domain.boundary if s.contains_point(x, y)]
    if not segs:
        return ()
    if any(s.tag == CLAMPED for s in segs):
        return (VAL, DX, DY)
    # simply supported: value and every incident tangential direction
    out = {VAL}
    for s in segs:
        horizontal = s.a[1] == s.b[1]
        out.add(DX if horizontal else DY)
    return tuple(sorted(out))


def build_dof_system(mesh: Mesh, variant: str = AVERAGING,
                     zero_vertex=None) -> DofSystem:
    """Classify all DOFs of the mesh and expand the constraint rows.

    ``zero_vertex(x, y) -> bool`` optionally zeroes all DOFs of further
    vertices (fictitious-domain runs); those do not reduce the reported
    DOF count, which by convention counts every vertex not eliminated by
    the geometric boundary conditions.
    """
    if variant not in (AVERAGING, HARD):
        raise ValueError(f"unknown constraint variant: {variant}")
    violations = mesh.check_mesh_condition()
    if violations:
        raise ValueError(f"mesh violates the 1-irregularity condition: "
                         f"{violations[0].detail}")
    t = mesh.topo
    nv = mesh.num_vertices
    status = np.full(3 * nv, FREE, dtype=np.int8)

    for v in range(nv):
        x, y = t.vcoord[v]
        for d in _boundary_zero_dofs(mesh, v, x, y):
            status[3 * v + d] = ZERO
    reported_ndof = int((status == FREE).sum())
    if zero_vertex is not None:
        for v in range(nv):
            if zero_vertex(*t.vcoord[v]):
                status[3 * v:3 * v + 3] = ZERO

    raw = {}
    for w, info in t.hanging.items():
        for d in (VAL, DX, DY):
            g = 3 * w + d
            if status[g] == ZERO:
                continue
            status[g] = CONSTRAINED
        # tangential axis: vertical host edge varies in y
        tang = DY if info.axis == 0 else DX
        norm = DX if info.axis == 0 else DY
        length = info.lam1 + info.lam2
        s = info.lam1 / length
        hv = hermite_value_weights(s, length)
        hd = hermite_deriv_weights(s, length)
        data = [3 * info.z1 + VAL, 3 * info.z1 + tang,
                3 * info.z2 + VAL, 3 * info.z2 + tang]
        raw[3 * w + VAL] = list(zip(data, hv))
        raw[3 * w + tang] = list(zip(data, hd))
        if variant == AVERAGING:
            raw[3 * w + norm] = [
                (3 * info.z1 + norm, info.lam2 / length),
                (3 * info.z2 + norm, info.lam1 / length)]
        else:
            raw[3 * w + norm] = _hard_row(mesh, w, info)

    rows = {}

    def expand(g, depth=0):
        if status[g] != CONSTRAINED:
            return [(g, 1.0)]
        if g in rows:
            return rows[g]
        if depth > 64:
            raise RuntimeError("constraint expansion did not terminate")
        acc = {}
        for h, wgt in raw[g]:
            for h2, w2 in expand(h, depth + 1):
                acc[h2] = acc.get(h2, 0.0) + wgt * w2
        rows[g] = [(h, w) for h, w in sorted(acc.items()) if w != 0.0]
        return rows[g]

    for g in list(raw):
        if status[g] == CONSTRAINED:
            expand(g)

    free_index = np.full(3 * nv, -1, dtype=np.int64)
    free_index[status == FREE] = np.arange(int((status == FREE).sum()))
    return DofSystem(mesh, variant, status, free_index, rows, reported_ndof)


def _hard_row(mesh: Mesh, w: int, info):
    """Normal derivative of the host element's polynomial at the hanging
    vertex, as weights over the host's 12 corner DOFs."""
    t = mesh.topo
    host = mesh.rect_by_id[info.host_rect]
    x, y = t.vcoord[w]
    mx, my = host.mid
    hx, hy = host.hx, host.hy
    xi, eta = (x - mx) / hx, (y - my) / hy
    deriv = (1, 0) if info.axis == 0 else (0, 1)
    ref = adini_basis().eval(xi, eta, deriv=deriv)
    scale = dof_scaling(hx, hy) / (hx if info.axis == 0 else hy)
    weights = ref * scale
    corners = t.rect_corner_vids[t.rect_index[host.id]]
    out = []
    for c in range(4):
        for d in range(3):
            wt = weights[3 * c + d]
            if wt != 0.0:
                out.append((3 * corners[c] + d, float(wt)))
    return out
