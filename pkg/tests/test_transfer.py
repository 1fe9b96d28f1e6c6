import numpy as np

from adiniplate.dofs import AVERAGING, build_dof_system
from adiniplate.lemmas import untagged_square
from adiniplate.mesh import build_tensor_mesh, square_domain
from adiniplate.problems import energy_error, make_problem
from adiniplate.transfer import (BfsField, adini_interpolate, bfs_average,
                                 bfs_dof_scaling, project_q3, q1_interpolate)


def hanging_mesh(n=2):
    mesh = build_tensor_mesh(untagged_square(), n, n)
    return mesh.refine_marked([mesh.rects[0].id])


class AnalyticField:
    """Adapter exposing an analytic function like a discrete field."""

    def __init__(self, mesh, fun):
        self.mesh = mesh
        self.fun = fun

    def eval(self, elem, xi, eta, deriv=(0, 0)):
        r = self.mesh.rects[elem]
        x = r.mid[0] + r.hx * np.asarray(xi, dtype=float)
        y = r.mid[1] + r.hy * np.asarray(eta, dtype=float)
        return self.fun(x, y)


def test_q1_reproduces_affine_on_hanging_mesh():
    mesh = hanging_mesh()
    p = lambda x, y: 1.5 - 2.0 * x + 0.75 * y
    q = q1_interpolate(mesh, p)
    rng = np.random.default_rng(0)
    for k, r in enumerate(mesh.rects):
        xi = rng.uniform(-1, 1, 5)
        eta = rng.uniform(-1, 1, 5)
        x = r.mid[0] + r.hx * xi
        y = r.mid[1] + r.hy * eta
        assert np.max(np.abs(q.eval(k, xi, eta) - p(x, y))) < 1e-13


def test_q1_hanging_value_is_host_edge_average():
    # for x**2 the value at a hanging vertex comes from the host edge,
    # not from the function itself
    mesh = hanging_mesh()
    q = q1_interpolate(mesh, lambda x, y: x**2)
    t = mesh.topo
    assert t.hanging
    for w, info in t.hanging.items():
        lam = info.lam1 + info.lam2
        expect = (info.lam2 * q.values[info.z1]
                  + info.lam1 * q.values[info.z2]) / lam
        assert abs(q.values[w] - expect) < 1e-14
        x, y = t.vcoord[w]
        if info.axis == 1:          # host edge along x: x**2 is not affine
            assert abs(q.values[w] - x**2) > 1e-3


def test_bfs_average_reproduces_global_bicubic():
    mesh = hanging_mesh(3)
    p = lambda x, y: (1 + x + x**2 - 0.5 * x**3) * (2 - y + 0.25 * y**3)
    avg = bfs_average(AnalyticField(mesh, p))
    rng = np.random.default_rng(1)
    for k, r in enumerate(mesh.rects):
        xi = rng.uniform(-1, 1, 4)
        eta = rng.uniform(-1, 1, 4)
        x = r.mid[0] + r.hx * xi
        y = r.mid[1] + r.hy * eta
        assert np.max(np.abs(avg.eval(k, xi, eta) - p(x, y))) < 1e-12


def test_bfs_average_is_c1_on_hanging_mesh():
    # averaging an arbitrary discontinuous-gradient input yields matching
    # values/gradients at shared element corners
    mesh = hanging_mesh()
    avg = bfs_average(AnalyticField(mesh, lambda x, y: np.sin(2 * x) * y
                                    + np.cos(y) * x**2))
    t = mesh.topo
    for v in range(mesh.num_vertices):
        owners = [(k, ci) for k in range(len(mesh.rects))
                  for ci, c in enumerate(t.rect_corner_vids[k]) if c == v]
        ref = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
        vals = []
        for k, ci in owners:
            xi, eta = ref[ci]
            vals.append([float(avg.eval(k, xi, eta, deriv=d))
                         for d in [(0, 0), (1, 0), (0, 1)]])
        for other in vals[1:]:
            assert np.allclose(other, vals[0], atol=1e-11)


def test_project_q3_exact_on_adini_fields():
    mesh = hanging_mesh()
    dofs = build_dof_system(mesh, AVERAGING)
    rng = np.random.default_rng(5)
    from adiniplate.assembly import DiscreteField
    field = DiscreteField(mesh, dofs, rng.standard_normal(dofs.num_free))
    coeffs = project_q3(field)
    bfs = BfsField(mesh, np.zeros((mesh.num_vertices, 4)))
    bfs.local = coeffs
    xi = rng.uniform(-1, 1, 6)
    eta = rng.uniform(-1, 1, 6)
    for k in range(len(mesh.rects)):
        a = field.eval(k, xi, eta)
        b = bfs.eval(k, xi, eta)
        assert np.max(np.abs(a - b)) < 1e-11


def test_adini_interpolation_second_order():
    # ||D^2(u - I_h u)|| = O(h^2) on uniform meshes for the smooth
    # clamped benchmark
    prob = make_problem("biquartic_square")
    sol = prob.solution
    errs, hs = [], []
    mesh = prob.initial_mesh().uniform_refine()
    for _ in range(4):
        dofs = prob.build_dofs(mesh, AVERAGING)
        gx = lambda x, y: sol.grad(x, y)[0]
        gy = lambda x, y: sol.grad(x, y)[1]
        ih = adini_interpolate(mesh, dofs, sol.value, gx, gy)
        errs.append(energy_error(ih, prob).total)
        hs.append(max(2 * r.hx for r in mesh.rects))
        mesh = mesh.uniform_refine()
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert abs(slope - 2.0) < 0.1


def test_adini_interpolation_first_order_near_irregular_vertices():
    # on elements with an irregular vertex the area-normalized local
    # error ||D^2(u - I_h u)||_T / |T|^(1/2) degrades from O(h^2) to O(h)
    prob = make_problem("biquartic_square")
    sol = prob.solution
    errs, regs, hs = [], [], []
    for n in (8, 16, 32, 64, 128):
        mesh = build_tensor_mesh(square_domain(), n, n)
        target = next(r for r in mesh.rects
                      if r.contains_point(0.45, 0.45))
        mesh = mesh.refine_marked([target.id])
        dofs = prob.build_dofs(mesh, AVERAGING)
        gx = lambda x, y: sol.grad(x, y)[0]
        gy = lambda x, y: sol.grad(x, y)[1]
        ih = adini_interpolate(mesh, dofs, sol.value, gx, gy)
        err = energy_error(ih, prob)

        def normalized(idx):
            areas = np.array([4 * mesh.rects[k].hx * mesh.rects[k].hy
                              for k in idx])
            return float(np.sqrt((err.per_element[idx] / areas).sum()))

        irr = [mesh.topo.rect_index[i]
               for i in mesh.topo.irregular_rect_ids]
        assert irr
        reg = [k for k, r in enumerate(mesh.rects)
               if r.contains_point(-0.45, -0.45)]
        errs.append(normalized(irr))
        regs.append(normalized(reg))
        hs.append(1.0 / n)
    slope_irr = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    slope_reg = np.polyfit(np.log(hs), np.log(regs), 1)[0]
    assert abs(slope_irr - 1.0) < 0.25
    assert slope_reg - slope_irr > 0.7
