import json

import numpy as np
import pytest

from adiniplate.cli import main
from adiniplate.experiments import (ExperimentConfig, _boundary_local_mesh,
                                    fit_rate, mesh_sequence, run_experiment,
                                    rows_to_csv)
from adiniplate.problems import make_problem

PAPER_VAR2_SQRT = [12.124355652982141, 25.980762113533160, 53.693575034635195,
                   109.11920087683927, 219.97045256124741, 220.00454540758926]
PAPER_VAR2_ERR = [0.28800754816898716, 0.073756874928884331,
                  0.018545663212466982, 0.0046429767717423827,
                  0.0011611492073577174, 0.0011611867402397775]
PAPER_LSHAPE_SQRT = [3.8729833462074170, 9.9498743710661994,
                     21.977260975835911, 45.989129150267672,
                     93.994680700558789, 189.99736840282816]
PAPER_LSHAPE_ERR = [4.3022478091840046, 1.5788650946306912,
                    0.79281859223301021, 0.50551098045540577,
                    0.34217676500145439, 0.23404169829031551]


def test_fit_rate_exact_power():
    sqrt_ndof = np.array([10.0, 20.0, 40.0, 80.0, 160.0])
    err = 3.0 * sqrt_ndof**-1.0
    slope, stderr = fit_rate(sqrt_ndof, err, window=5)
    assert abs(slope + 1.0) < 1e-12
    assert stderr < 1e-12


def test_fit_rate_on_published_series():
    slope, _ = fit_rate(PAPER_VAR2_SQRT, PAPER_VAR2_ERR, window=6)
    assert abs(slope + 2.0) < 0.1
    slope, _ = fit_rate(PAPER_LSHAPE_SQRT, PAPER_LSHAPE_ERR, window=4)
    assert abs(slope + 0.544) < 0.05


def test_fit_rate_rejects_degenerate_input():
    with pytest.raises(ValueError):
        fit_rate([10.0], [1.0], window=4)
    with pytest.raises(ValueError):
        fit_rate([10.0, 10.0], [1.0, 0.5], window=2)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(problem="biquartic_square", driver="nope")
    with pytest.raises(ValueError):
        ExperimentConfig(problem="biquartic_square", theta=0.0)


def test_variant1_sequence_has_irregular_level():
    cfg = ExperimentConfig(problem="biquartic_square", driver="variant1")
    prob = make_problem("biquartic_square")
    gen = mesh_sequence(cfg)
    meshes = [next(gen) for _ in range(4)]
    assert not meshes[0].topo.hanging
    assert not meshes[1].topo.hanging
    assert meshes[2].topo.hanging            # after the local refinement
    assert meshes[3].topo.hanging            # inherited under uniform
    ndofs = [prob.build_dofs(m, "averaging").reported_ndof
             for m in meshes[:3]]
    assert [round(np.sqrt(n), 4) for n in ndofs] == [1.7321, 5.1962, 6.4807]


def test_variant2_switch_level():
    cfg = ExperimentConfig(problem="biquartic_square", driver="variant2",
                           variant2_switch=2)
    gen = mesh_sequence(cfg)
    meshes = [next(gen) for _ in range(4)]
    assert not meshes[2].topo.hanging
    assert meshes[3].topo.hanging


def test_boundary_local_mesh_dof_counts():
    prob = make_problem("disk_fictitious")
    initial = prob.initial_mesh()
    counts = []
    for j in (1, 2, 3):
        mesh = _boundary_local_mesh(initial, j)
        assert mesh.check_mesh_condition() == []
        counts.append(prob.build_dofs(mesh, "averaging").reported_ndof)
    assert counts == [27, 387, 2655]


def test_boundary_local_refines_only_near_circle():
    prob = make_problem("disk_fictitious")
    mesh = _boundary_local_mesh(prob.initial_mesh(), 3)
    finest = max(r.level for r in mesh.rects)
    for r in mesh.rects:
        if r.level == finest:
            far = max(np.hypot(x, y) for x, y in r.corners())
            near = np.hypot(min(max(0.0, r.x0), r.x1),
                            min(max(0.0, r.y0), r.y1))
            # finest elements sit on or next to the circle
            assert near <= 1.25 and far >= 0.75


def tiny_config(**kw):
    base = dict(problem="biquartic_square", driver="uniform",
                max_levels=3, compute_eta=False)
    base.update(kw)
    return ExperimentConfig(**base)


def test_csv_deterministic_except_seconds():
    a = run_experiment(tiny_config())
    b = run_experiment(tiny_config())
    strip = lambda text: [",".join(ln.split(",")[:-1])
                          for ln in text.strip().split("\n")]
    assert strip(rows_to_csv(a.rows)) == strip(rows_to_csv(b.rows))
    assert a.mesh_hash == b.mesh_hash


def test_reports_written(tmp_path):
    out = tmp_path / "rep"
    res = run_experiment(tiny_config(out=str(out), compute_eta=True))
    assert (out / "convergence.csv").is_file()
    assert (out / "convergence.png").is_file()
    doc = json.loads((out / "convergence.json").read_text())
    assert doc["config"]["problem"] == "biquartic_square"
    assert doc["mesh_sequence_sha256"] == res.mesh_hash
    assert len(doc["rows"]) == len(res.rows)
    header = (out / "convergence.csv").read_text().split("\n")[0]
    assert header == "level,ndof,sqrt_ndof,error,eta,h_max,seconds"


def test_cli_run_with_config_and_overrides(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "problem": "biquartic_square", "driver": "uniform",
        "max_levels": 4, "compute_eta": False}))
    out = tmp_path / "out"
    code = main(["run", "--config", str(cfg_path), "--max-levels", "2",
                 "--out", str(out)])
    assert code == 0
    text = capsys.readouterr().out
    assert "fitted tail slope" in text
    doc = json.loads((out / "convergence.json").read_text())
    assert doc["config"]["max_levels"] == 2    # flag overrides config file
    assert len(doc["rows"]) == 2


def test_cli_check_mesh(tmp_path, capsys):
    from adiniplate.mesh import build_tensor_mesh, square_domain

    mesh = build_tensor_mesh(square_domain(), 2, 2)
    mesh = mesh.refine_marked([mesh.rects[0].id])
    good = tmp_path / "good.json"
    good.write_text(mesh.to_json())
    assert main(["check-mesh", "--in", str(good)]) == 0
    assert "mesh condition: OK" in capsys.readouterr().out

    from adiniplate.mesh import mesh_from_rects
    boxes = [(-1.0, 0.0, -1.0 + 0.25 * k, -1.0 + 0.25 * (k + 1))
             for k in range(8)]
    boxes += [(0.0, 1.0, -1.0, 0.0), (0.0, 1.0, 0.0, 1.0)]
    bad = tmp_path / "bad.json"
    bad.write_text(mesh_from_rects(square_domain(), boxes).to_json())
    assert main(["check-mesh", "--in", str(bad)]) == 1
    assert "VIOLATION" in capsys.readouterr().out


def test_cli_requires_problem():
    assert main(["run", "--driver", "uniform"]) == 2
