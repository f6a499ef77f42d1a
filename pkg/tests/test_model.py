"""Hyperbolic MLR: logits, objectives, analytic gradients, Riemannian SGD.

Every hand-derived gradient is checked against central finite differences
(h = 1e-6) at relative error 1e-5. Instances where the true gradient is
near zero or where an argmax tie sits within the FD step are excluded: the
difference quotient carries ~|J| * 5e-11 of roundoff noise, so certifying
1e-5 relative error needs gradients comfortably above that floor.
"""

import math

import numpy as np
import pytest

from hypatk import geometry as geo
from hypatk.model import (
    InvalidParamsError,
    MlrParams,
    ObjectiveKind,
    TrainConfig,
    grad_input,
    grad_logits_input,
    grad_params,
    init_params,
    load_checkpoint,
    mlr_logits,
    objective_grad_logits,
    objective_value,
    predict,
    rsgd_step,
    save_checkpoint,
    train,
)
from hypatk.sampling import DatasetSpec, generate_dataset

# mpmath (50 digits) evaluations of the logit closed form, frozen.
ORACLE_PARAMS = dict(
    p=np.array([[0.2, -0.1], [-0.3, 0.25]]),
    a=np.array([[0.7, 0.3], [-0.4, 1.1]]),
)
ORACLE_X = np.array([0.35, 0.4])
ORACLE_X2 = np.array([-0.55, 0.1])
ORACLE_LOGITS_C1 = np.array([1.19694278147076756787, -1.84820416462053553465])
ORACLE_LOGITS_C01 = np.array([1.03457076730423162751, -0.47140620015602089299])
ORACLE_LOGITS_X2_C1 = np.array([-2.34496934907821895151, -0.710348121734196868924])

ALL_KINDS = [ObjectiveKind.CE, ObjectiveKind.NFL, ObjectiveKind.SL, ObjectiveKind.LL]


def _random_model(rng, num_classes=4, dim=2, c=1.0):
    p = rng.uniform(-0.5, 0.5, size=(num_classes, dim)) / math.sqrt(c)
    a = rng.standard_normal((num_classes, dim))
    return MlrParams(p=p, a=a, curvature=c)


def _objective_fn(kind, params, y):
    def f(x):
        return objective_value(kind, mlr_logits(params, x), y)

    return f


def _fd_gradient(f, x, h=1e-6):
    g = np.empty_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def _tie_safe(logits, gap=1e-3):
    s = np.sort(logits)
    return (s[-1] - s[-2] > gap) and (s[1] - s[0] > gap)


class TestMlrParams:
    def test_zero_normal_rejected(self):
        with pytest.raises(InvalidParamsError):
            MlrParams(p=np.zeros((2, 2)), a=np.array([[1.0, 0.0], [0.0, 0.0]]), curvature=1.0)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(InvalidParamsError):
            MlrParams(p=np.zeros((2, 2)), a=np.ones((3, 2)), curvature=1.0)

    def test_base_points_clamped_into_ball(self):
        params = MlrParams(p=np.array([[5.0, 0.0], [0.0, 0.1]]), a=np.ones((2, 2)), curvature=1.0)
        assert np.all(np.linalg.norm(params.p, axis=-1) < 1.0)


class TestMlrLogits:
    def test_frozen_oracle_c1(self):
        params = MlrParams(curvature=1.0, **ORACLE_PARAMS)
        np.testing.assert_allclose(mlr_logits(params, ORACLE_X), ORACLE_LOGITS_C1, rtol=1e-14)

    def test_frozen_oracle_c01(self):
        params = MlrParams(curvature=0.1, **ORACLE_PARAMS)
        np.testing.assert_allclose(mlr_logits(params, ORACLE_X), ORACLE_LOGITS_C01, rtol=1e-14)

    def test_batch_matches_single(self):
        params = MlrParams(curvature=1.0, **ORACLE_PARAMS)
        batch = mlr_logits(params, np.stack([ORACLE_X, ORACLE_X2]))
        np.testing.assert_allclose(batch[0], ORACLE_LOGITS_C1, rtol=1e-14)
        np.testing.assert_allclose(batch[1], ORACLE_LOGITS_X2_C1, rtol=1e-14)

    def test_own_base_point_gives_zero_logit(self, rng):
        params = _random_model(rng)
        for k in range(params.num_classes):
            s = mlr_logits(params, params.p[k])
            assert abs(s[k]) < 1e-12

    def test_negating_normal_negates_logit(self, rng):
        params = _random_model(rng)
        x = rng.uniform(-0.5, 0.5, size=2)
        flipped = MlrParams(p=params.p, a=-params.a, curvature=1.0)
        np.testing.assert_allclose(
            mlr_logits(flipped, x), -mlr_logits(params, x), rtol=1e-12
        )

    def test_dim_mismatch_rejected(self):
        params = MlrParams(curvature=1.0, **ORACLE_PARAMS)
        with pytest.raises(InvalidParamsError):
            mlr_logits(params, np.zeros(3))


class TestPredict:
    def test_tie_breaks_to_lowest_index(self):
        # symmetric construction: both hyperplanes produce identical logits
        params = MlrParams(
            p=np.zeros((2, 2)), a=np.array([[1.0, 0.0], [1.0, 0.0]]), curvature=1.0
        )
        assert predict(params, np.array([0.3, 0.1])) == 0

    def test_batch_shape(self, rng):
        params = _random_model(rng)
        x = rng.uniform(-0.4, 0.4, size=(17, 2))
        out = predict(params, x)
        assert out.shape == (17,) and out.dtype == np.int64


class TestObjectiveValue:
    def test_uniform_logits_ce(self):
        assert abs(objective_value(ObjectiveKind.CE, np.zeros(4), 2) - math.log(4)) < 1e-15

    def test_direct_definitions(self):
        s = np.array([3.0, 1.0, 2.0])
        assert objective_value(ObjectiveKind.NFL, s) == -3.0
        assert objective_value(ObjectiveKind.SL, s) == 2.0
        assert objective_value(ObjectiveKind.LL, s) == 1.0

    def test_ce_against_logsumexp_oracle(self, rng):
        for _ in range(200):
            s = rng.standard_normal(5) * rng.uniform(0.5, 30)
            y = int(rng.integers(5))
            expect = math.log(sum(math.exp(v - max(s)) for v in s)) + max(s) - (s[y] - max(s)) - max(s)
            got = objective_value(ObjectiveKind.CE, s, y)
            assert abs(got - expect) <= 1e-12 * max(1.0, abs(expect))

    def test_sl_needs_two_classes(self):
        with pytest.raises(ValueError):
            objective_value(ObjectiveKind.SL, np.array([1.0]))

    def test_ce_needs_label(self):
        with pytest.raises(ValueError):
            objective_value(ObjectiveKind.CE, np.zeros(3))


class TestObjectiveGradLogits:
    def test_ce_is_softmax_minus_onehot(self):
        s = np.array([2.0, 0.5, -1.0])
        w = objective_grad_logits(ObjectiveKind.CE, s, 1)
        e = np.exp(s - np.max(s))
        sm = e / e.sum()
        sm[1] -= 1.0
        np.testing.assert_allclose(w, sm, rtol=1e-14)

    def test_selector_gradients(self):
        s = np.array([3.0, 1.0, 2.0])
        np.testing.assert_array_equal(objective_grad_logits(ObjectiveKind.NFL, s), [-1, 0, 0])
        np.testing.assert_array_equal(objective_grad_logits(ObjectiveKind.SL, s), [0, 0, 1])
        np.testing.assert_array_equal(objective_grad_logits(ObjectiveKind.LL, s), [0, 1, 0])

    def test_ties_counted_and_broken_low(self):
        geo.diagnostics.reset()
        w = objective_grad_logits(ObjectiveKind.NFL, np.array([2.0, 2.0, 1.0]))
        np.testing.assert_array_equal(w, [-1, 0, 0])
        assert geo.diagnostics.gradient_ties >= 1
        geo.diagnostics.reset()


class TestGradInput:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    @pytest.mark.parametrize("c", [1.0, 0.1])
    def test_against_central_differences(self, kind, c):
        rng = np.random.default_rng(907)
        checked = 0
        while checked < 60:
            params = _random_model(rng, c=c)
            x = rng.uniform(-0.6, 0.6, size=2) / math.sqrt(c)
            y = int(rng.integers(4))
            s = mlr_logits(params, x)
            if kind is not ObjectiveKind.CE and not _tie_safe(s):
                continue
            g = grad_input(kind, params, x, y)
            if np.linalg.norm(g) < 1e-3:
                continue
            fd = _fd_gradient(_objective_fn(kind, params, y), x)
            rel = np.linalg.norm(fd - g) / np.linalg.norm(g)
            assert rel <= 1e-5, f"{kind} rel err {rel}"
            checked += 1

    def test_ce_chain_rule_composition(self, rng):
        # CE gradient must equal sum_k (softmax_k - onehot_k) * grad logit_k
        params = _random_model(rng)
        x = rng.uniform(-0.5, 0.5, size=2)
        y = 1
        s = mlr_logits(params, x)
        w = objective_grad_logits(ObjectiveKind.CE, s, y)
        per_logit = grad_logits_input(params, x)
        np.testing.assert_allclose(
            grad_input(ObjectiveKind.CE, params, x, y), w @ per_logit, rtol=1e-12
        )

    def test_batch_matches_per_sample(self, rng):
        params = _random_model(rng)
        X = rng.uniform(-0.5, 0.5, size=(8, 2))
        Y = rng.integers(4, size=8)
        batch = grad_input(ObjectiveKind.CE, params, X, Y)
        for i in range(8):
            single = grad_input(ObjectiveKind.CE, params, X[i], int(Y[i]))
            np.testing.assert_allclose(batch[i], single, rtol=1e-12)

    def test_stationary_at_ce_maximum(self):
        # a symmetric two-class model has a CE saddle on the axis of
        # symmetry; the analytic gradient must vanish there
        params = MlrParams(
            p=np.array([[0.3, 0.0], [-0.3, 0.0]]),
            a=np.array([[1.0, 0.0], [-1.0, 0.0]]),
            curvature=1.0,
        )
        g = grad_input(ObjectiveKind.CE, params, np.array([0.0, 0.2]), 0)
        assert abs(g[0]) > 1e-3  # pushes across the boundary
        assert abs(g[1]) < 1e-12  # no lateral component by symmetry


class TestGradParams:
    @pytest.mark.parametrize("c", [1.0, 0.1])
    def test_against_central_differences(self, c):
        rng = np.random.default_rng(331)
        h = 1e-6
        for _ in range(6):
            params = _random_model(rng, c=c)
            X = rng.uniform(-0.5, 0.5, size=(5, 2)) / math.sqrt(c)
            Y = rng.integers(4, size=5)
            gp, ga = grad_params(params, X, Y)

            def batch_ce(p, a):
                m = MlrParams(p=p, a=a, curvature=c)
                return float(
                    np.mean(objective_value(ObjectiveKind.CE, mlr_logits(m, X), Y))
                )

            for arr, grad, name in ((params.p, gp, "p"), (params.a, ga, "a")):
                fd = np.empty_like(arr)
                for k in range(arr.shape[0]):
                    for i in range(arr.shape[1]):
                        bump = np.zeros_like(arr)
                        bump[k, i] = h
                        if name == "p":
                            fd[k, i] = (
                                batch_ce(arr + bump, params.a) - batch_ce(arr - bump, params.a)
                            ) / (2 * h)
                        else:
                            fd[k, i] = (
                                batch_ce(params.p, arr + bump) - batch_ce(params.p, arr - bump)
                            ) / (2 * h)
                rel = np.linalg.norm(fd - grad) / max(np.linalg.norm(grad), 1e-12)
                assert rel <= 1e-5, f"{name} rel err {rel}"

    def test_duplicated_sample_equals_single(self, rng):
        params = _random_model(rng)
        x = rng.uniform(-0.5, 0.5, size=2)
        gp1, ga1 = grad_params(params, x[None, :], [2])
        gp4, ga4 = grad_params(params, np.tile(x, (4, 1)), [2, 2, 2, 2])
        np.testing.assert_allclose(gp4, gp1, rtol=1e-12)
        np.testing.assert_allclose(ga4, ga1, rtol=1e-12)

    def test_permutation_bit_identical(self, rng):
        params = _random_model(rng)
        X = rng.uniform(-0.5, 0.5, size=(32, 2))
        Y = rng.integers(4, size=32)
        gp, ga = grad_params(params, X, Y)
        perm = rng.permutation(32)
        gp2, ga2 = grad_params(params, X[perm], Y[perm])
        assert gp.tobytes() == gp2.tobytes()
        assert ga.tobytes() == ga2.tobytes()

    def test_empty_batch_rejected(self, rng):
        params = _random_model(rng)
        with pytest.raises(ValueError):
            grad_params(params, np.empty((0, 2)), np.empty(0, dtype=int))


class TestRsgdStep:
    def test_zero_gradient_no_move(self, rng):
        params = _random_model(rng)
        out = rsgd_step(params, np.zeros((4, 2)), np.zeros((4, 2)), 0.1)
        assert np.array_equal(out.p, params.p)
        assert np.array_equal(out.a, params.a)

    def test_single_step_decreases_ce(self, rng):
        params = _random_model(rng)
        x = np.array([[0.4, 0.1]])
        y = np.array([3])
        before = float(objective_value(ObjectiveKind.CE, mlr_logits(params, x[0]), 3))
        gp, ga = grad_params(params, x, y)
        stepped = rsgd_step(params, gp, ga, 1e-3)
        after = float(objective_value(ObjectiveKind.CE, mlr_logits(stepped, x[0]), 3))
        assert after < before

    def test_base_point_moves_along_manifold(self, rng):
        params = _random_model(rng)
        gp = rng.standard_normal((4, 2))
        out = rsgd_step(params, gp, np.zeros((4, 2)), 1e-2)
        # the step length in hyperbolic distance equals lr times the
        # Riemannian gradient norm: d = lam * ||lr * g / lam^2|| = lr ||g|| / lam
        lam = geo.conformal_factor(params.p, 1.0)
        expect = 1e-2 * np.linalg.norm(gp, axis=-1) / lam
        d = geo.distance(params.p, out.p, 1.0)
        np.testing.assert_allclose(d, expect, rtol=1e-9)


class TestTrain:
    def test_separable_toy_reaches_full_accuracy(self):
        rng = np.random.default_rng(5)
        n_per = 60
        left = np.column_stack([rng.uniform(-0.7, -0.3, n_per), rng.uniform(-0.2, 0.2, n_per)])
        right = np.column_stack([rng.uniform(0.3, 0.7, n_per), rng.uniform(-0.2, 0.2, n_per)])

        class _DS:
            points = np.vstack([left, right])
            labels = np.repeat([0, 1], n_per)

        cfg = TrainConfig(learning_rate=0.05, batch_size=32, epochs=60, seed=9, loss_reduction="mean")
        params, history = train(_DS, cfg, curvature=1.0)
        assert history[-1][2] == 1.0

    def test_deterministic(self):
        spec = DatasetSpec(
            num_classes=4, circle_radius_hyp=1.5, variance=0.25,
            samples_per_class_train=50, samples_per_class_test=10,
            curvature=1.0, dim=2, seed=77,
        )
        ds, _ = generate_dataset(spec)
        cfg = TrainConfig(learning_rate=5e-5, batch_size=64, epochs=3, seed=123)
        pa, ha = train(ds, cfg, curvature=1.0)
        pb, hb = train(ds, cfg, curvature=1.0)
        assert pa.p.tobytes() == pb.p.tobytes()
        assert pa.a.tobytes() == pb.a.tobytes()
        assert ha == hb

    def test_zero_epochs_returns_init(self):
        spec = DatasetSpec(
            num_classes=4, circle_radius_hyp=1.5, variance=0.25,
            samples_per_class_train=5, samples_per_class_test=5,
            curvature=1.0, dim=2, seed=77,
        )
        ds, _ = generate_dataset(spec)
        cfg = TrainConfig(learning_rate=5e-5, batch_size=64, epochs=0, seed=123)
        params, history = train(ds, cfg, curvature=1.0)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(123)))
        expect = init_params(4, 2, 1.0, rng)
        assert np.array_equal(params.p, expect.p)
        assert np.array_equal(params.a, expect.a)
        assert history == []

    def test_history_length(self):
        spec = DatasetSpec(
            num_classes=4, circle_radius_hyp=1.5, variance=0.25,
            samples_per_class_train=20, samples_per_class_test=5,
            curvature=1.0, dim=2, seed=3,
        )
        ds, _ = generate_dataset(spec)
        cfg = TrainConfig(learning_rate=5e-5, batch_size=32, epochs=7, seed=1)
        _, history = train(ds, cfg, curvature=1.0)
        assert [row[0] for row in history] == list(range(7))


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, tmp_path, rng):
        params = _random_model(rng)
        path = tmp_path / "model.json"
        save_checkpoint(params, path)
        back = load_checkpoint(path)
        assert np.array_equal(back.p, params.p)
        assert np.array_equal(back.a, params.a)
        assert back.curvature == params.curvature

    def test_rewrite_identical_bytes(self, tmp_path, rng):
        params = _random_model(rng)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_checkpoint(params, p1)
        save_checkpoint(params, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"curvature": 1, "dim": 2}')
        with pytest.raises(ValueError):
            load_checkpoint(path)

    def test_valid_json(self, tmp_path, rng):
        import json

        params = _random_model(rng)
        path = tmp_path / "model.json"
        save_checkpoint(params, path)
        doc = json.loads(path.read_text())
        assert doc["num_classes"] == 4 and doc["dim"] == 2
