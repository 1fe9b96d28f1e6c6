"""Executable verification suites for the element and operator identities.

Each check exercises a structural property of the discretization with an
independent numerical oracle (quadrature, symbolic differentiation of
polynomials, or direct sampling) and reports a pass/fail verdict with the
measured residual.  ``verify_lemmas`` runs all suites; the CLI renders
the result as a table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .assembly import DiscreteField
from .dofs import AVERAGING, FREE, HARD, build_dof_system
from .element import eval_local, gauss_2d
from .mesh import Domain, Mesh, Rect, build_tensor_mesh
from .transfer import bfs_average


@dataclass
class LemmaCheck:
    name: str
    passed: bool
    residual: float
    tolerance: float
    detail: str = ""


def untagged_square(lo: float = -1.0, hi: float = 1.0) -> Domain:
    """Square domain without boundary conditions (no DOFs are zeroed)."""
    return Domain(cells=((lo, hi, lo, hi),), boundary=())


def fuzzed_hanging_mesh(seed: int, rounds: int = 2) -> Mesh:
    """Random 1-irregular mesh on the untagged square with hanging nodes."""
    rng = np.random.default_rng(seed)
    mesh = build_tensor_mesh(untagged_square(), 3, 3)
    for _ in range(rounds):
        ids = [r.id for r in mesh.rects]
        k = max(1, int(rng.integers(1, max(2, len(ids) // 3))))
        marked = rng.choice(ids, size=k, replace=False)
        mesh = mesh.refine_marked(int(i) for i in marked)
    if not mesh.topo.hanging:
        mesh = mesh.refine_marked([mesh.rects[0].id])
    return mesh


# ----------------------------------------------------------------------
# two-element nodal basis configuration: K = [-1,0]x[0,1], T = [0,rho]x[0,1]
# share the edge on the y-axis with common vertex z = (0, 0)
# ----------------------------------------------------------------------
def _two_rect_config(rho: float):
    rect_t = Rect(0, 0.0, rho, 0.0, 1.0)
    rect_k = Rect(1, -1.0, 0.0, 0.0, 1.0)
    return rect_t, rect_k


def _nodal_coeffs(rect: Rect, corner: int, alpha: int) -> np.ndarray:
    c = np.zeros(12)
    c[3 * corner + alpha] = 1.0
    return c


def _rect_integral(rect: Rect, coeffs, deriv, weight, order: int = 5):
    """Integral of weight(x, y) * (piecewise derivative) over the rect."""
    pts, w = gauss_2d(order)
    x = rect.mid[0] + rect.hx * pts[:, 0]
    y = rect.mid[1] + rect.hy * pts[:, 1]
    vals = eval_local(coeffs, rect.hx, rect.hy, pts[:, 0], pts[:, 1], deriv)
    return rect.hx * rect.hy * float(w @ (weight(x, y) * vals))


def check_nodal_integrals() -> list[LemmaCheck]:
    """Vanishing-moment identities of the corner basis functions on the
    two-element configuration, for width ratios rho in {1/2, 1, 2}."""
    tol = 1e-12
    qs = [lambda x, y: np.ones_like(y), lambda x, y: y, lambda x, y: y**2]
    out = []
    for rho in (0.5, 1.0, 2.0):
        rect_t, rect_k = _two_rect_config(rho)
        # z = (0,0) is corner 0 of T and corner 1 of K
        pieces = {0: (_nodal_coeffs(rect_t, 0, 0), _nodal_coeffs(rect_k, 1, 0)),
                  1: (_nodal_coeffs(rect_t, 0, 1), _nodal_coeffs(rect_k, 1, 1)),
                  2: (_nodal_coeffs(rect_t, 0, 2), _nodal_coeffs(rect_k, 1, 2))}

        def both(alpha, deriv, weight):
            ct, ck = pieces[alpha]
            return (_rect_integral(rect_t, ct, deriv, weight)
                    + _rect_integral(rect_k, ck, deriv, weight))

        res = 0.0
        # value basis function
        ct = pieces[0][0]
        for q in qs:
            res = max(res, abs(_rect_integral(rect_t, ct, (2, 0), q)))
            res = max(res, abs(both(0, (1, 1), q)))
        res = max(res, abs(both(0, (2, 0), lambda x, y: x)))
        out.append(LemmaCheck(f"nodal-integrals value-dof rho={rho}",
                              res < tol, res, tol))

        # d/dx basis function
        res = 0.0
        ct = pieces[1][0]
        res = max(res, abs(_rect_integral(rect_t, ct, (2, 0),
                                          lambda x, y: x)))
        for q in qs:
            res = max(res, abs(_rect_integral(rect_t, ct, (1, 1), q)))
            res = max(res, abs(both(1, (2, 0), q)))
        out.append(LemmaCheck(f"nodal-integrals dx-dof rho={rho}",
                              res < tol, res, tol))

        # d/dy basis function: cross moments vanish and d2/dxx is zero
        res = 0.0
        for q in qs:
            res = max(res, abs(both(2, (1, 1), q)))
        ct, ck = pieces[2]
        pts, _ = gauss_2d(5)
        for rect, c in ((rect_t, ct), (rect_k, ck)):
            v = eval_local(c, rect.hx, rect.hy, pts[:, 0], pts[:, 1], (2, 0))
            res = max(res, float(np.max(np.abs(v))))
        out.append(LemmaCheck(f"nodal-integrals dy-dof rho={rho}",
                              res < tol, res, tol))

        # non-vanishing Hessian integral: diag(0, gamma * diam(T))
        mat = np.array([[both(2, (2, 0), qs[0]), both(2, (1, 1), qs[0])],
                        [both(2, (1, 1), qs[0]), both(2, (0, 2), qs[0])]])
        gamma = mat[1, 1] / rect_t.diam
        res = max(abs(mat[0, 0]), abs(mat[0, 1]), abs(mat[1, 0]))
        ok = res < tol and 0.1 < abs(gamma) < 10.0
        out.append(LemmaCheck(
            f"hessian-integral dy-dof rho={rho}", ok, res, tol,
            detail=f"gamma={gamma:.6f}"))
    return out


def check_edge_defect_identity() -> LemmaCheck:
    """Linear-interpolation defect of d/dx along the edge xi = 1.

    For every local shape function w the pointwise identity

        (1 - Q) dx w = -(hy^3/3) d4_xyyy w (eta^3 - eta)
                       + (hy^2/2) d3_xyy w (eta^2 - 1)

    holds, with Q the two-point linear interpolant between the edge
    endpoints.
    """
    tol = 1e-12
    eta = np.linspace(-1.0, 1.0, 9)
    res = 0.0
    for hx, hy in ((1.0, 1.0), (0.75, 0.4)):
        for i in range(12):
            c = np.zeros(12)
            c[i] = 1.0
            gx = eval_local(c, hx, hy, np.ones_like(eta), eta, (1, 0))
            ends = eval_local(c, hx, hy, np.array([1.0, 1.0]),
                              np.array([-1.0, 1.0]), (1, 0))
            q_interp = 0.5 * ((1 - eta) * ends[0] + (1 + eta) * ends[1])
            d4 = eval_local(c, hx, hy, np.ones_like(eta), eta, (1, 3))
            d3 = eval_local(c, hx, hy, np.ones_like(eta), eta, (1, 2))
            rhs = (-(hy**3 / 3.0) * d4 * (eta**3 - eta)
                   + (hy**2 / 2.0) * d3 * (eta**2 - 1.0))
            res = max(res, float(np.max(np.abs(gx - q_interp - rhs))))
    return LemmaCheck("edge-defect identity", res < tol, res, tol)


# ----------------------------------------------------------------------
# averaging rule on the reference edge: z2 = (1,-1), z3 = (1,1),
# hanging point (1, r)
# ----------------------------------------------------------------------
def _averaging_l(dpx, r: float) -> float:
    lam1, lam2 = 1.0 + r, 1.0 - r
    return (lam2 * dpx(1.0, -1.0) + lam1 * dpx(1.0, 1.0)) / (lam1 + lam2)


def check_averaging_quadratic() -> LemmaCheck:
    """The averaging rule conserves normal derivatives of quadratics."""
    tol = 1e-13
    monos = [
        (lambda x, y: 0.0 * x, "1"),
        (lambda x, y: 1.0 + 0.0 * x, "x"),
        (lambda x, y: 0.0 * x, "y"),
        (lambda x, y: 2.0 * x, "x^2"),
        (lambda x, y: y, "xy"),
        (lambda x, y: 0.0 * x, "y^2"),
    ]
    res = 0.0
    for r in (-0.5, -0.25, 0.0, 0.25, 0.5):
        for dpx, _name in monos:
            res = max(res, abs(_averaging_l(dpx, r) - dpx(1.0, r)))
    return LemmaCheck("averaging quadratic preservation", res < tol,
                      res, tol)


def check_averaging_cubic_witness() -> LemmaCheck:
    """For p = (1-y^2)(1-x) the rule returns 0 while the true normal
    derivative at the hanging point is -(1-r^2)."""
    tol = 1e-12

    def dpx(x, y):
        return -(1.0 - y**2)

    res = 0.0
    for r in (-0.5, 0.0, 0.5):
        lval = _averaging_l(dpx, r)
        defect = abs(lval - dpx(1.0, r))
        res = max(res, abs(lval), abs(defect - (1.0 - r**2)))
    return LemmaCheck("averaging cubic-failure witness", res < tol,
                      res, tol)


def check_quadratic_pipeline() -> LemmaCheck:
    """Interpolating global quadratic data through the full constraint
    pipeline reproduces the quadratic on fuzzed hanging meshes."""
    tol = 1e-10
    coeff = np.array([[1.0, -0.7, -0.3], [2.0, 0.9, 0.0], [0.5, 0.0, 0.0]])

    def q(x, y):
        return npoly.polyval2d(x, y, coeff)

    def qx(x, y):
        return npoly.polyval2d(x, y, npoly.polyder(coeff, axis=0))

    def qy(x, y):
        return npoly.polyval2d(x, y, npoly.polyder(coeff, axis=1))

    rng = np.random.default_rng(7)
    res = 0.0
    for seed in range(5):
        mesh = fuzzed_hanging_mesh(100 + seed)
        for variant in (AVERAGING, HARD):
            dofs = build_dof_system(mesh, variant)
            field = DiscreteField.from_vertex_data(mesh, dofs, q, qx, qy)
            xi = rng.uniform(-1, 1, size=8)
            eta = rng.uniform(-1, 1, size=8)
            for k, r in enumerate(mesh.rects):
                x = r.mid[0] + r.hx * xi
                y = r.mid[1] + r.hy * eta
                res = max(res, float(np.max(np.abs(
                    field.eval(k, xi, eta) - q(x, y)))))
    return LemmaCheck("quadratic reproduction pipeline", res < tol,
                      res, tol)


def check_bfs_c1() -> LemmaCheck:
    """The C^1 averaging output has matching one-sided values, gradients,
    and mixed derivatives at every regular vertex and along every
    interior edge segment."""
    tol = 1e-12
    mesh = fuzzed_hanging_mesh(31, rounds=3)
    dofs = build_dof_system(mesh, AVERAGING)
    rng = np.random.default_rng(5)
    free = rng.standard_normal(dofs.num_free)
    field = DiscreteField(mesh, dofs, free)
    avg = bfs_average(field)
    t = mesh.topo
    scale = float(np.max(np.abs(avg.data))) or 1.0
    res = 0.0

    # one-sided corner data
    corner_ref = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
    for v in range(mesh.num_vertices):
        if v in t.hanging:
            continue
        sides = []
        for k in range(len(mesh.rects)):
            for c in range(4):
                if t.rect_corner_vids[k, c] == v:
                    xi, eta = corner_ref[c]
                    sides.append([avg.eval(k, xi, eta, deriv=d)
                                  for d in [(0, 0), (1, 0), (0, 1), (1, 1)]])
        arr = np.asarray(sides, dtype=float)
        res = max(res, float(np.max(arr.max(axis=0) - arr.min(axis=0))))

    # value + gradient continuity across interior edge segments
    s = np.linspace(0.05, 0.95, 5)
    for seg in t.edge_segs:
        if seg.rect_minus is None or seg.rect_plus is None:
            continue
        km = t.rect_index[seg.rect_minus]
        kp = t.rect_index[seg.rect_plus]
        if seg.axis == 0:
            x = np.full_like(s, seg.coord)
            y = seg.lo + seg.length * s
        else:
            x = seg.lo + seg.length * s
            y = np.full_like(s, seg.coord)
        for k in (km, kp):
            r = mesh.rects[k]
            xi = (x - r.mid[0]) / r.hx
            eta = (y - r.mid[1]) / r.hy
            vals = np.stack([avg.eval(k, xi, eta, deriv=d)
                             for d in [(0, 0), (1, 0), (0, 1)]])
            if k == km:
                minus = vals
            else:
                res = max(res, float(np.max(np.abs(vals - minus))))
    res /= scale
    return LemmaCheck("averaged field C1 matching", res < tol, res, tol)


def _poly_hessian_norm_sq(coeff: np.ndarray, mesh: Mesh) -> float:
    cxx = npoly.polyder(coeff, 2, axis=0)
    cxy = npoly.polyder(npoly.polyder(coeff, axis=0), axis=1)
    cyy = npoly.polyder(coeff, 2, axis=1)
    pts, w = gauss_2d(6)
    total = 0.0
    for r in mesh.rects:
        x = r.mid[0] + r.hx * pts[:, 0]
        y = r.mid[1] + r.hy * pts[:, 1]
        v = (npoly.polyval2d(x, y, cxx) ** 2
             + 2 * npoly.polyval2d(x, y, cxy) ** 2
             + npoly.polyval2d(x, y, cyy) ** 2)
        total += r.hx * r.hy * float(w @ v)
    return total


class _AnalyticField:
    """Minimal field adapter so analytic functions can be averaged."""

    def __init__(self, mesh: Mesh, fn):
        self.mesh = mesh
        self.fn = fn

    def eval(self, elem, xi, eta):
        r = self.mesh.rects[elem]
        return self.fn(r.mid[0] + r.hx * np.asarray(xi),
                       r.mid[1] + r.hy * np.asarray(eta))


def _qi_constant(mesh: Mesh, polys) -> float:
    dofs = build_dof_system(mesh, AVERAGING)
    worst = 0.0
    for coeff in polys:
        smooth = _AnalyticField(mesh, lambda x, y, c=coeff:
                                npoly.polyval2d(x, y, c))
        avg = bfs_average(smooth)
        data = np.empty(3 * mesh.num_vertices)
        data[0::3] = avg.data[:, 0]
        data[1::3] = avg.data[:, 1]
        data[2::3] = avg.data[:, 2]
        field = DiscreteField(mesh, dofs, data[dofs.status == FREE])
        num = np.sqrt(field.energy_norm_sq(order=4))
        den = np.sqrt(_poly_hessian_norm_sq(coeff, mesh))
        if den > 0:
            worst = max(worst, num / den)
    return worst


def check_qi_stability() -> LemmaCheck:
    """Interpolate-after-averaging is energy-stable with a constant that
    moves by less than 20% under one uniform refinement."""
    rng = np.random.default_rng(11)
    polys = [rng.standard_normal((4, 4)) for _ in range(10)]
    mesh = fuzzed_hanging_mesh(51, rounds=2)
    c0 = _qi_constant(mesh, polys)
    c1 = _qi_constant(mesh.uniform_refine(), polys)
    drift = abs(c1 - c0) / c0
    ok = drift <= 0.2
    return LemmaCheck("quasi-interpolation stability", ok, drift, 0.2,
                      detail=f"C0={c0:.4f} C1={c1:.4f}")


def verify_lemmas() -> list[LemmaCheck]:
    checks = []
    checks.extend(check_nodal_integrals())
    checks.append(check_edge_defect_identity())
    checks.append(check_averaging_quadratic())
    checks.append(check_averaging_cubic_witness())
    checks.append(check_quadratic_pipeline())
    checks.append(check_bfs_c1())
    checks.append(check_qi_stability())
    return checks


def format_table(checks: list[LemmaCheck]) -> str:
    width = max(len(c.name) for c in checks)
    lines = []
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        extra = f"  {c.detail}" if c.detail else ""
        lines.append(f"{c.name:<{width}}  {status}  "
                     f"residual={c.residual:.3e} tol={c.tolerance:.0e}"
                     f"{extra}")
    total = sum(c.passed for c in checks)
    lines.append(f"{total}/{len(checks)} checks passed")
    return "\n".join(lines)
