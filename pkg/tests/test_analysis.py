import numpy as np
import pytest

from hypatk.analysis import (
    MisclassMatrix,
    accuracy,
    comparative_matrix,
    epsilon_sweep,
    misclass_matrix,
    rasterize_decision_regions,
    read_sweep_csv,
    render_raster_svg,
    render_raster_text,
    render_sweep_svg,
    write_comparative_csv,
    write_matrix_csv,
    write_sweep_csv,
)
from hypatk.attacks import AttackFamily, RecordSet
from hypatk.model import MlrParams, ObjectiveKind, predict
from hypatk.sampling import LabeledDataset

from conftest import ball_points


def make_records(true, adv, clean=None):
    true = np.asarray(true, dtype=np.int64)
    adv = np.asarray(adv, dtype=np.int64)
    clean = true.copy() if clean is None else np.asarray(clean, dtype=np.int64)
    n = true.shape[0]
    return RecordSet(
        sample_id=np.arange(n, dtype=np.int64),
        true_label=true,
        clean_pred=clean,
        adv_pred=adv,
        attack=np.full(n, "hyperbolic_fgm", dtype="U16"),
        objective=np.full(n, "ce", dtype="U4"),
        epsilon=np.full(n, 1.0),
        achieved_distance=np.full(n, 1.0),
        zero_gradient=np.zeros(n, dtype=bool),
        clean_incorrect=clean != true,
    )


# ------------------------------------------------------------------ accuracy


def test_accuracy_all_correct():
    assert accuracy(make_records([0, 1, 2], [0, 1, 2])) == 1.0


def test_accuracy_none_correct():
    assert accuracy(make_records([0, 1, 2], [1, 2, 0])) == 0.0


def test_accuracy_two_thirds():
    assert accuracy(make_records([0, 1, 2], [0, 1, 0])) == pytest.approx(2 / 3)


def test_accuracy_empty_errors():
    with pytest.raises(ValueError):
        accuracy(make_records([], []))


# ------------------------------------------------------- misclass matrices


def brute_force_matrix(y, pred, C):
    counts = [[0] * C for _ in range(C)]
    for yi, pi in zip(y, pred):
        if pi != yi:
            counts[yi][pi] += 1
    values = np.zeros((C, C))
    row_counts = np.zeros(C, dtype=np.int64)
    for i in range(C):
        row_counts[i] = sum(counts[i])
        if row_counts[i]:
            for j in range(C):
                values[i, j] = counts[i][j] / row_counts[i]
    return values, row_counts


def test_no_misclassification_gives_zero_matrix():
    m = misclass_matrix(make_records([0, 1, 2], [0, 1, 2]), num_classes=3)
    assert np.all(m.values == 0)
    assert np.all(m.row_counts == 0)


def test_single_target_row_is_one():
    m = misclass_matrix(make_records([0, 0, 0], [2, 2, 2]), num_classes=3)
    assert m.values[0, 2] == 1.0
    assert m.row_counts[0] == 3


def test_matrix_matches_brute_force_oracle(rng):
    C = 5
    for _ in range(20):
        n = int(rng.integers(1, 200))
        y = rng.integers(0, C, size=n)
        pred = rng.integers(0, C, size=n)
        m = misclass_matrix(make_records(y, pred), num_classes=C)
        values, row_counts = brute_force_matrix(y, pred, C)
        assert np.allclose(m.values, values, atol=1e-15)
        assert np.array_equal(m.row_counts, row_counts)
        sums = m.values.sum(axis=1)
        assert np.all(np.abs(sums[m.row_counts > 0] - 1.0) <= 1e-12)
        assert np.all(sums[m.row_counts == 0] == 0)
        assert np.all(np.diagonal(m.values) == 0)


def test_matrix_rejects_out_of_range_labels():
    with pytest.raises(ValueError):
        misclass_matrix(make_records([0, 5], [1, 1]), num_classes=3)


def test_matrix_invariant_validation():
    bad = np.array([[0.0, 0.5], [0.0, 0.0]])
    with pytest.raises(ValueError):
        MisclassMatrix(values=bad, row_counts=np.array([3, 0]))
    with pytest.raises(ValueError):
        MisclassMatrix(
            values=np.array([[0.5, 0.5], [0.0, 0.0]]),
            row_counts=np.array([2, 0]),
        )


# ----------------------------------------------------- comparative matrices


def rand_matrix(rng, C=4):
    y = rng.integers(0, C, size=100)
    pred = rng.integers(0, C, size=100)
    return misclass_matrix(make_records(y, pred), num_classes=C)


def test_identical_groups_give_zero(rng):
    mats = [rand_matrix(rng) for _ in range(3)]
    comp = comparative_matrix(mats, mats)
    assert np.all(comp == 0)


def test_single_pair_is_difference(rng):
    a = rand_matrix(rng)
    b = rand_matrix(rng)
    comp = comparative_matrix([a], [b])
    assert np.allclose(comp, a.values - b.values, atol=1e-15)


def test_averaging_matches_direct_sum(rng):
    A = [rand_matrix(rng) for _ in range(3)]
    B = [rand_matrix(rng) for _ in range(2)]
    comp = comparative_matrix(A, B)
    direct = sum(m.values for m in A) / 3 - sum(m.values for m in B) / 2
    assert np.allclose(comp, direct, atol=1e-14)


def test_populated_rows_sum_to_zero(rng):
    A = [rand_matrix(rng) for _ in range(3)]
    B = [rand_matrix(rng) for _ in range(3)]
    comp = comparative_matrix(A, B)
    popA = np.all([m.row_counts > 0 for m in A], axis=0)
    popB = np.all([m.row_counts > 0 for m in B], axis=0)
    both = popA & popB
    assert np.all(np.abs(comp.sum(axis=1)[both]) <= 1e-12)


def test_comparative_rejects_mismatched_classes(rng):
    a = rand_matrix(rng, C=3)
    b = rand_matrix(rng, C=4)
    with pytest.raises(ValueError):
        comparative_matrix([a], [b])
    with pytest.raises(ValueError):
        comparative_matrix([], [a])


# --------------------------------------------------------------------- sweep


def small_model_and_data(rng):
    params = MlrParams(
        p=ball_points(rng, 3, max_frac=0.5),
        a=rng.standard_normal((3, 2)),
        curvature=1.0,
    )
    pts = ball_points(rng, 150, max_frac=0.7)
    labels = rng.integers(0, 3, size=150)
    return params, LabeledDataset(points=pts, labels=labels, split="test")


def test_sweep_row_count_and_order(rng):
    params, ds = small_model_and_data(rng)
    families = [AttackFamily.HYPERBOLIC_FGM, AttackFamily.EUCLIDEAN_FGM]
    objectives = [ObjectiveKind.CE, ObjectiveKind.NFL]
    eps = [1.0, 0.5]  # deliberately unsorted
    sweep = epsilon_sweep(params, ds, families, objectives, eps)
    assert len(sweep) == 8
    assert list(sweep.attack[:4]) == ["hyperbolic_fgm"] * 4
    assert list(sweep.objective[:2]) == ["ce", "ce"]
    assert list(sweep.epsilon[:2]) == [0.5, 1.0]


def test_sweep_infinitesimal_budget_equals_clean(rng):
    params, ds = small_model_and_data(rng)
    clean_acc = float(np.mean(predict(params, ds.points) == ds.labels))
    sweep = epsilon_sweep(
        params, ds,
        [AttackFamily.HYPERBOLIC_FGM, AttackFamily.HYPERBOLIC_PGD],
        [ObjectiveKind.CE],
        [1e-12],
    )
    assert np.all(sweep.accuracy == clean_acc)


def test_sweep_empty_grid_errors(rng):
    params, ds = small_model_and_data(rng)
    with pytest.raises(ValueError):
        epsilon_sweep(params, ds, [], [ObjectiveKind.CE], [1.0])
    with pytest.raises(ValueError):
        epsilon_sweep(params, ds, [AttackFamily.HYPERBOLIC_FGM], [ObjectiveKind.CE], [])


def test_sweep_per_run_callback_order(rng):
    params, ds = small_model_and_data(rng)
    seen = []
    epsilon_sweep(
        params, ds,
        [AttackFamily.HYPERBOLIC_FGM],
        [ObjectiveKind.CE, ObjectiveKind.LL],
        [0.5, 0.25],
        per_run=lambda spec, rec: seen.append(
            (spec.family.value, spec.objective.value, spec.epsilon, len(rec))
        ),
    )
    assert seen == [
        ("hyperbolic_fgm", "ce", 0.25, 150),
        ("hyperbolic_fgm", "ce", 0.5, 150),
        ("hyperbolic_fgm", "ll", 0.25, 150),
        ("hyperbolic_fgm", "ll", 0.5, 150),
    ]


def test_sweep_csv_roundtrip(rng, tmp_path):
    params, ds = small_model_and_data(rng)
    sweep = epsilon_sweep(
        params, ds, [AttackFamily.EUCLIDEAN_FGM], [ObjectiveKind.SL], [0.5, 1.0]
    )
    p1 = tmp_path / "s1.csv"
    p2 = tmp_path / "s2.csv"
    write_sweep_csv(sweep, p1)
    back = read_sweep_csv(p1)
    write_sweep_csv(back, p2)
    assert p1.read_bytes() == p2.read_bytes()


# ----------------------------------------------------------------- matrices IO


def test_matrix_csv_layout(tmp_path):
    m = misclass_matrix(make_records([0, 0, 1], [1, 1, 1]), num_classes=2)
    path = tmp_path / "m.csv"
    write_matrix_csv(m, path)
    assert path.read_text() == "0,1,row_count\n0,1,2\n0,0,0\n"


def test_comparative_csv_layout(tmp_path):
    comp = np.array([[0.0, 0.25], [-0.25, 0.0]])
    path = tmp_path / "c.csv"
    write_comparative_csv(comp, path)
    assert path.read_text() == "0,1\n0,0.25\n-0.25,0\n"


# -------------------------------------------------------------------- raster


def two_class_split_params():
    return MlrParams(
        p=np.zeros((2, 2)),
        a=np.array([[1.0, 0.0], [-1.0, 0.0]]),
        curvature=1.0,
    )


def test_raster_single_class_region():
    params = MlrParams(p=np.zeros((1, 2)), a=np.array([[1.0, 0.5]]), curvature=1.0)
    raster = rasterize_decision_regions(params, 21)
    inside = raster.labels >= 0
    assert np.any(inside)
    assert np.all(raster.labels[inside] == 0)


def test_raster_partitions_ball(rng):
    params = MlrParams(
        p=ball_points(rng, 4, max_frac=0.5),
        a=rng.standard_normal((4, 2)),
        curvature=1.0,
    )
    raster = rasterize_decision_regions(params, 33)
    inside = raster.labels >= 0
    assert np.all(raster.labels[inside] < 4)
    center_norms = np.linalg.norm(
        np.stack(
            np.meshgrid(
                np.linspace(-1, 1, 33), -np.linspace(-1, 1, 33)
            ),
            axis=-1,
        ),
        axis=-1,
    )
    assert np.array_equal(inside, center_norms < 1.0 - 1e-9 / 2)


def test_raster_agrees_with_predict():
    params = two_class_split_params()
    raster = rasterize_decision_regions(params, 17)
    centers = np.linspace(-1.0, 1.0, 17)
    for i in range(17):
        for j in range(17):
            pt = np.array([centers[j], -centers[i]])
            if np.dot(pt, pt) >= 1.0 - 1e-9:
                assert raster.labels[i, j] == -1
            else:
                assert raster.labels[i, j] == predict(params, pt)


def test_raster_left_right_split():
    params = two_class_split_params()
    raster = rasterize_decision_regions(params, 41)
    centers = np.linspace(-1.0, 1.0, 41)
    mid = 20  # row through y = 0
    right = np.where(centers == 0.5)[0][0]
    left = np.where(centers == -0.5)[0][0]
    assert raster.labels[mid, right] == 0
    assert raster.labels[mid, left] == 1
    assert np.any(raster.traces)


def test_raster_rejects_bad_inputs(rng):
    p3 = MlrParams(
        p=np.zeros((2, 3)), a=np.ones((2, 3)), curvature=1.0
    )
    with pytest.raises(ValueError):
        rasterize_decision_regions(p3, 10)
    with pytest.raises(ValueError):
        rasterize_decision_regions(two_class_split_params(), 1)


def test_raster_text_rendering():
    params = two_class_split_params()
    raster = rasterize_decision_regions(params, 9)
    text = render_raster_text(raster)
    lines = text.splitlines()
    assert len(lines) == 9
    assert all(len(line) == 9 for line in lines)
    assert set("".join(lines)) <= {".", "0", "1"}
    assert lines[0][0] == "."  # corners are outside the ball


def test_raster_svg_smoke():
    params = two_class_split_params()
    raster = rasterize_decision_regions(params, 15)
    svg = render_raster_svg(raster)
    assert svg.startswith("<svg ")
    assert "<circle" in svg and "<rect" in svg
    assert svg.rstrip().endswith("</svg>")


def test_sweep_svg_smoke(rng, tmp_path):
    params, ds = small_model_and_data(rng)
    sweep = epsilon_sweep(
        params, ds,
        [AttackFamily.HYPERBOLIC_FGM, AttackFamily.EUCLIDEAN_FGM],
        [ObjectiveKind.CE, ObjectiveKind.NFL],
        [0.25, 0.5, 1.0],
    )
    svg = render_sweep_svg(sweep)
    assert svg.startswith("<svg ")
    assert svg.count("<polyline") == 4
    assert "stroke-dasharray" in svg
    # deterministic rendering
    assert svg == render_sweep_svg(sweep)
