"""Residual a-posteriori error estimator, marking, and the adaptive loop.

The local contribution on an element T with mesh size h_T (the maximum
edge length of T) is

    eta^2(T) = h_T^4 ||f||_T^2
             + sum_{j=1..3} sum_{E in edges(T)} kappa_j^E h_T^(2j-3)
                   || [d^j u_h / dn^j]_E ||_E^2
             + || (1 - Pi^T) D^2 u_h ||_T^2

where Pi^T projects the Hessian componentwise onto affine functions on
elements whose vertices are all regular and onto constants otherwise.
Jumps are evaluated on the finest common subdivision of the skeleton, so
an edge hosting a hanging node contributes two segment integrals.  On
boundary edges the bracket is the trace and the kappa weights switch
components off according to the boundary condition: on clamped parts
only j = 1 is active, on simply supported parts only j = 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .element import adini_basis, dof_scaling, gauss_1d, gauss_2d
from .mesh import CLAMPED, SIMPLY_SUPPORTED, Mesh

#: weights kappa_j by boundary tag (None: interior edge), index j-1
_KAPPA = {
    None: (1.0, 1.0, 1.0),
    CLAMPED: (1.0, 0.0, 0.0),
    SIMPLY_SUPPORTED: (0.0, 1.0, 0.0),
}


@dataclass
class EstimateReport:
    """Per-element estimator components and the global total."""
    mesh: Mesh
    volume: np.ndarray       # h_T^4 ||f||_T^2
    jump: np.ndarray         # (nelem, 3), orders j = 1, 2, 3 with weights
    projection: np.ndarray   # ||(1 - Pi^T) D^2 u_h||_T^2
    eta_sq: np.ndarray = field(init=False)

    def __post_init__(self):
        self.eta_sq = self.volume + self.jump.sum(axis=1) + self.projection

    @property
    def eta(self) -> float:
        return float(np.sqrt(self.eta_sq.sum()))

    def to_csv(self, path):
        ids = [r.id for r in self.mesh.rects]
        with open(path, "w") as fh:
            fh.write("element,volume,jump1,jump2,jump3,projection,eta_sq\n")
            for k, rid in enumerate(ids):
                fh.write(f"{rid},{float(self.volume[k])!r},"
                         f"{float(self.jump[k, 0])!r},"
                         f"{float(self.jump[k, 1])!r},"
                         f"{float(self.jump[k, 2])!r},"
                         f"{float(self.projection[k])!r},"
                         f"{float(self.eta_sq[k])!r}\n")


@dataclass
class MarkingDecision:
    theta: float
    marked: list
    captured_fraction: float


def project_piT(u_h):
    """Projection defects ||(1 - Pi^T) D^2 u_h||_T^2 per element.

    Returns (defect_sq, coeffs) where coeffs[k] is a (3, 3) array of the
    projected-Hessian coefficients (1, xi, eta) per component; on
    elements with an irregular corner only the constant mode is kept.
    """
    mesh = u_h.mesh
    t = mesh.topo
    pts, w = gauss_2d(3)
    xi, eta = pts[:, 0], pts[:, 1]
    basis = adini_basis()
    tabs = [basis.eval(xi, eta, deriv=d) for d in [(2, 0), (1, 1), (0, 2)]]
    # orthogonal P1 modes on the reference square and their squared norms
    modes = np.stack([np.ones_like(xi), xi, eta])
    mode_sq = np.array([4.0, 4.0 / 3.0, 4.0 / 3.0])
    nelem = len(mesh.rects)
    defect = np.zeros(nelem)
    coeffs = np.zeros((nelem, 3, 3))
    for k, r in enumerate(mesh.rects):
        hx, hy = r.hx, r.hy
        s = dof_scaling(hx, hy) * u_h.local[k]
        comps = [tabs[0] @ s / hx**2, tabs[1] @ s / (hx * hy),
                 tabs[2] @ s / hy**2]
        nmodes = 3 if r.id not in t.irregular_rect_ids else 1
        frob = [1.0, 2.0, 1.0]
        for c, g in enumerate(comps):
            cf = (modes[:nmodes] * w) @ g / mode_sq[:nmodes]
            coeffs[k, c, :nmodes] = cf
            resid = g - cf @ modes[:nmodes]
            defect[k] += frob[c] * hx * hy * float(w @ resid**2)
    return defect, coeffs


def _segment_tag(mesh: Mesh, seg) -> str | None:
    """Boundary tag of a skeleton segment with only one neighbour."""
    if seg.axis == 0:
        p, q = (seg.coord, seg.lo), (seg.coord, seg.hi)
    else:
        p, q = (seg.lo, seg.coord), (seg.hi, seg.coord)
    tag = mesh.domain.segment_tag(p, q)
    # edges created by dropping elements (fictitious boundaries) default
    # to the essential clamped condition
    return tag if tag is not None else CLAMPED


def _normal_derivs(u_h, elem: int, seg, s_pts):
    """d^j u_h / dn^j for j = 1, 2, 3 from element ``elem`` at points of
    the segment parametrized by s in [0, 1]."""
    r = u_h.mesh.rects[elem]
    mx, my = r.mid
    if seg.axis == 0:
        x = np.full_like(s_pts, seg.coord)
        y = seg.lo + (seg.hi - seg.lo) * s_pts
        derivs = [(1, 0), (2, 0), (3, 0)]
    else:
        x = seg.lo + (seg.hi - seg.lo) * s_pts
        y = np.full_like(s_pts, seg.coord)
        derivs = [(0, 1), (0, 2), (0, 3)]
    xi = (x - mx) / r.hx
    eta = (y - my) / r.hy
    return [u_h.eval(elem, xi, eta, deriv=d) for d in derivs]


def estimate(mesh: Mesh, u_h, f, order: int = 5,
             singular_corner=None, singular_order: int = 12) -> EstimateReport:
    """Evaluate the estimator for a discrete field and load ``f``.

    ``order`` is the Gauss order of the volume term; elements whose
    closure contains ``singular_corner`` use ``singular_order`` instead.
    """
    nelem = len(mesh.rects)
    t = mesh.topo
    rect_index = t.rect_index

    # volume term h_T^4 ||f||_T^2
    volume = np.zeros(nelem)
    for k, r in enumerate(mesh.rects):
        n = order
        if singular_corner is not None and r.contains_point(*singular_corner):
            n = singular_order
        pts, w = gauss_2d(n)
        x = r.mid[0] + r.hx * pts[:, 0]
        y = r.mid[1] + r.hy * pts[:, 1]
        fv = np.asarray(f(x, y), dtype=float)
        h_t = 2.0 * max(r.hx, r.hy)
        volume[k] = h_t**4 * r.hx * r.hy * float(w @ fv**2)

    # jump terms on the fine skeleton, 4-point Gauss per segment
    gx, gw = gauss_1d(4)
    s_pts = 0.5 * (gx + 1.0)
    jump = np.zeros((nelem, 3))
    for seg in t.edge_segs:
        sides = [s for s in (seg.rect_minus, seg.rect_plus) if s is not None]
        if not sides:
            continue
        if len(sides) == 2:
            km = rect_index[seg.rect_minus]
            kp = rect_index[seg.rect_plus]
            dm = _normal_derivs(u_h, km, seg, s_pts)
            dp = _normal_derivs(u_h, kp, seg, s_pts)
            vals = [a - b for a, b in zip(dp, dm)]
            kappa = _KAPPA[None]
            targets = (km, kp)
        else:
            k0 = rect_index[sides[0]]
            vals = _normal_derivs(u_h, k0, seg, s_pts)
            kappa = _KAPPA[_segment_tag(mesh, seg)]
            targets = (k0,)
        half = 0.5 * seg.length
        norms = [half * float(gw @ v**2) for v in vals]
        for k in targets:
            r_k = mesh.rects[k]
            h_t = 2.0 * max(r_k.hx, r_k.hy)
            for j in range(3):
                jump[k, j] += kappa[j] * h_t ** (2 * (j + 1) - 3) * norms[j]

    projection, _ = project_piT(u_h)
    return EstimateReport(mesh, volume, jump, projection)


def doerfler_mark(report: EstimateReport, theta: float) -> MarkingDecision:
    """Minimal eta^2-sorted prefix carrying at least theta of the total."""
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    eta_sq = report.eta_sq
    total = eta_sq.sum()
    if total <= 0.0:
        return MarkingDecision(theta, [], 1.0)
    ids = np.array([r.id for r in report.mesh.rects])
    order = np.lexsort((ids, -eta_sq))
    acc = np.cumsum(eta_sq[order])
    count = int(np.searchsorted(acc, theta * total - 1e-15 * total) + 1)
    if theta == 1.0:
        count = int((eta_sq > 0.0).sum())
    marked = sorted(int(ids[i]) for i in order[:count])
    return MarkingDecision(theta, marked, float(acc[count - 1] / total))


def augmented_eta_sq(report: EstimateReport, local: bool = False) -> np.ndarray:
    """Boundary-touching augmentation of the element indicators.

    Elements owning a skeleton segment with only one neighbour receive an
    extra h_T^2-weighted term: the global eta^2 by default, their own
    eta^2(T) when ``local`` is set.
    """
    mesh = report.mesh
    rect_index = mesh.topo.rect_index
    touching = np.zeros(len(mesh.rects), dtype=bool)
    for seg in mesh.topo.edge_segs:
        if (seg.rect_minus is None) != (seg.rect_plus is None):
            rid = seg.rect_minus if seg.rect_minus is not None else seg.rect_plus
            touching[rect_index[rid]] = True
    h_sq = np.array([(2.0 * max(r.hx, r.hy))**2 for r in mesh.rects])
    extra = report.eta_sq if local else report.eta_sq.sum()
    out = report.eta_sq.copy()
    out[touching] += h_sq[touching] * (extra[touching] if local
                                       else float(extra))
    return out


def adapt_loop(problem, variant: str, theta: float = 0.5,
               max_ndof: int | None = None, max_levels: int | None = None,
               callback=None):
    """Solve -> estimate -> mark -> refine until a stopping bound.

    Yields one record per level: (level, mesh, u_h, error_report, report).
    """
    from .assembly import solve_problem
    from .problems import energy_error

    if max_ndof is None and max_levels is None:
        raise ValueError("need a stopping criterion (max_ndof or max_levels)")
    full = problem.initial_background()
    mesh = problem.filter_mesh(full)
    records = []
    level = 0
    while True:
        dofs = problem.build_dofs(mesh, variant)
        u_h, _ = solve_problem(mesh, dofs, problem.f)
        err = energy_error(u_h, problem)
        report = estimate(mesh, u_h, problem.f,
                          singular_corner=problem.singular_corner)
        records.append((level, mesh, u_h, err, report))
        if callback is not None:
            callback(records[-1])
        if max_levels is not None and level + 1 >= max_levels:
            break
        if max_ndof is not None and dofs.reported_ndof >= max_ndof:
            break
        indicators = report.eta_sq
        if problem.boundary_augmentation:
            indicators = augmented_eta_sq(report)
        marked = _mark_from(report, indicators, theta)
        if not marked:
            break
        full = full.refine_marked(marked)
        mesh = problem.filter_mesh(full)
        level += 1
    return records


def _mark_from(report: EstimateReport, indicators: np.ndarray,
               theta: float) -> list:
    proxy = EstimateReport(report.mesh, indicators,
                           np.zeros((len(indicators), 3)),
                           np.zeros(len(indicators)))
    return doerfler_mark(proxy, theta).marked
