"""Acceptance gate: the nine headline checks of the artifact.

Each test is one criterion and produces exactly one pass/fail line under
``pytest -v``.  Reference values are the published convergence series
(17 significant digits) for the five benchmark problems.  Experiment
runs are cached module-wide, so the suite solves each configuration
once; expect a total runtime of roughly ten minutes.

Known failures are asserted honestly rather than weakened; the analysis
of each discrepancy lives in the project notes outside the package.
"""

import numpy as np

from adiniplate.experiments import ExperimentConfig, fit_rate, run_experiment

# ---------------------------------------------------------------------
# published reference series
# ---------------------------------------------------------------------
VAR1_AVG_ERR = [2.0591764199176046, 1.0301870180234125, 1.0433594478581825,
                0.29807751680941419, 0.078992566072808329,
                0.021075215530947076, 0.0058258067324902449,
                0.0016965534353542029, 5.2326441128610864e-04]
VAR1_HARD_FINAL = 2.4204452211083146e-03
VAR2_AVG_POSTBREAK = 1.1611867402397775e-03
VAR2_HARD_POSTBREAK = 8.1792817454156008e-03
LSHAPE_UNIFORM_ROW1 = 1.5788650946306912
LSHAPE_UNIFORM_ROW5 = 0.23404169829031551

_CONFIGS = {
    "var1_avg": dict(problem="biquartic_square", variant="averaging",
                     driver="variant1", max_levels=9, compute_eta=False),
    "var1_hard": dict(problem="biquartic_square", variant="hard",
                      driver="variant1", max_levels=9, compute_eta=False),
    "var2_avg": dict(problem="biquartic_square", variant="averaging",
                     driver="variant2", max_levels=9, compute_eta=False),
    "var2_hard": dict(problem="biquartic_square", variant="hard",
                      driver="variant2", max_levels=9, compute_eta=False),
    "lshape_uniform": dict(problem="lshape_clamped", variant="averaging",
                           driver="uniform", max_ndof=40000,
                           compute_eta=True),
    "lshape_adaptive": dict(problem="lshape_clamped", variant="averaging",
                            driver="adaptive", theta=0.5, max_ndof=50000,
                            compute_eta=True),
    "disk_uniform": dict(problem="disk_fictitious", variant="averaging",
                         driver="uniform", max_ndof=120000,
                         compute_eta=False),
    "disk_blocal": dict(problem="disk_fictitious", variant="averaging",
                        driver="boundary-local", max_ndof=300000,
                        compute_eta=False),
    "mixed_uniform": dict(problem="lshape_mixed", variant="averaging",
                          driver="uniform", max_ndof=40000,
                          compute_eta=False),
    "mixed_adaptive": dict(problem="lshape_mixed", variant="averaging",
                           driver="adaptive", theta=0.5, max_ndof=40000,
                           compute_eta=True),
}
_CACHE: dict = {}


def series(tag):
    if tag not in _CACHE:
        _CACHE[tag] = run_experiment(ExperimentConfig(**_CONFIGS[tag]))
    return _CACHE[tag]


def rel_dev(value, reference):
    return (value - reference) / reference


def tail_slope(result, window):
    return fit_rate(result.sqrt_ndofs(), result.errors(), window=window)[0]


# ---------------------------------------------------------------------
# the nine criteria
# ---------------------------------------------------------------------
def test_criterion_1_variant1_averaging_values_and_rate():
    res = series("var1_avg")
    errors = res.errors()
    assert len(errors) == 9
    slope = tail_slope(res, window=9)
    assert abs(slope + 1.5) <= 0.1, f"full-series slope {slope:.4f}"
    devs = [rel_dev(e, p) for e, p in zip(errors, VAR1_AVG_ERR)]
    worst = max(abs(d) for d in devs)
    assert worst <= 0.01, (
        "per-level deviations (percent): "
        + ", ".join(f"{100 * d:+.2f}" for d in devs))


def test_criterion_2_variant1_hard_value_and_rate():
    res = series("var1_hard")
    final = res.errors()[-1]
    slope = tail_slope(res, window=4)
    problems = []
    if abs(rel_dev(final, VAR1_HARD_FINAL)) > 0.01:
        problems.append(
            f"final error {final:.7e} vs {VAR1_HARD_FINAL:.7e} "
            f"({100 * rel_dev(final, VAR1_HARD_FINAL):+.2f}%)")
    if abs(slope + 1.0) > 0.1:
        problems.append(f"tail slope {slope:.4f} outside -1.0 +/- 0.1")
    assert not problems, "; ".join(problems)


def test_criterion_3_variant2_prebreak_rate_and_jump():
    avg = series("var2_avg")
    hard = series("var2_hard")
    # identical uniform meshes before the level-7 local refinement
    for res in (avg, hard):
        pre = fit_rate(res.sqrt_ndofs()[2:7], res.errors()[2:7], window=5)[0]
        assert abs(pre + 2.0) <= 0.1, f"pre-break slope {pre:.4f}"
    e_avg = avg.errors()[7]
    e_hard = hard.errors()[7]
    assert 6.0 < e_hard / e_avg < 8.0, "deterioration jump not ~7x"
    assert abs(rel_dev(e_avg, VAR2_AVG_POSTBREAK)) <= 0.01, (
        f"averaging post-break {e_avg:.7e} "
        f"({100 * rel_dev(e_avg, VAR2_AVG_POSTBREAK):+.2f}%)")
    assert abs(rel_dev(e_hard, VAR2_HARD_POSTBREAK)) <= 0.01, (
        f"hard post-break {e_hard:.7e} "
        f"({100 * rel_dev(e_hard, VAR2_HARD_POSTBREAK):+.2f}%)")


def test_criterion_4_lshape_values_and_rates():
    uni = series("lshape_uniform")
    assert abs(rel_dev(uni.errors()[1], LSHAPE_UNIFORM_ROW1)) <= 0.01
    assert abs(rel_dev(uni.errors()[5], LSHAPE_UNIFORM_ROW5)) <= 0.01
    s_uni = tail_slope(uni, window=4)
    assert abs(s_uni + 0.544) <= 0.05, f"uniform slope {s_uni:.4f}"
    ada = series("lshape_adaptive")
    s_ada = tail_slope(ada, window=6)
    assert abs(s_ada + 1.0) <= 0.15, f"adaptive slope {s_ada:.4f}"


def test_criterion_5_estimator_two_sidedness():
    uni = series("lshape_uniform")
    ratios = np.array([r.eta / r.error for r in uni.rows])
    assert np.all((5.0 <= ratios) & (ratios <= 30.0)), (
        "eta/error ratios: " + ", ".join(f"{r:.2f}" for r in ratios))
    drift = np.maximum(ratios[1:] / ratios[:-1], ratios[:-1] / ratios[1:])
    assert np.all(drift < 2.0), (
        "level-to-level drift: " + ", ".join(f"{d:.2f}" for d in drift))


def test_criterion_6_disk_rates():
    uni = series("disk_uniform")
    s_uni = tail_slope(uni, window=4)
    assert abs(s_uni + 0.5) <= 0.1, f"uniform slope {s_uni:.4f}"
    loc = series("disk_blocal")
    s_loc = tail_slope(loc, window=4)
    assert abs(s_loc + 1.0) <= 0.15, f"boundary-local slope {s_loc:.4f}"


def test_criterion_7_mixed_bc_rates():
    uni = series("mixed_uniform")
    s_uni = tail_slope(uni, window=4)
    assert abs(s_uni + 1.0 / 3.0) <= 0.07, f"uniform slope {s_uni:.4f}"
    ada = series("mixed_adaptive")
    s_ada = tail_slope(ada, window=6)
    assert abs(s_ada + 1.0) <= 0.15, f"adaptive slope {s_ada:.4f}"


def test_criterion_8_property_suites():
    from adiniplate.lemmas import verify_lemmas

    checks = verify_lemmas()
    failing = [c.name for c in checks if not c.passed]
    assert failing == [], f"failing property checks: {failing}"


def test_criterion_9_refinement_fuzz():
    from adiniplate.lemmas import untagged_square
    from adiniplate.mesh import build_tensor_mesh

    rng = np.random.default_rng(20260823)
    mesh = build_tensor_mesh(untagged_square(), 2, 2)
    area = mesh.domain.area
    for step in range(1000):
        ids = [r.id for r in mesh.rects]
        k = int(rng.integers(0, len(ids)))
        mesh = mesh.refine_marked([ids[k]])
        assert mesh.check_mesh_condition() == [], f"violation at step {step}"
        assert abs(mesh.total_area() - area) < 1e-12 * area, (
            f"area drift at step {step}")
