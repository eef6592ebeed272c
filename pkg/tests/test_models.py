import numpy as np
import pytest

from lcirsp.errors import InvalidSpec, ReceptiveFieldTooSmall, ShapeMismatch, TaskMismatch
from lcirsp.models import Model, ModelSpec, TaskSet, build_model, mtl_loss
from lcirsp.nn_core import TcnConfig, Tensor, backward, mse_loss

from test_nn_tensor import fd_check

RNG = np.random.default_rng(31)

SMALL_TCN = dict(tcn=TcnConfig(n_filters=8, dropout=0.0))


def small_spec(kind, head="classifier", tasks=(), mtl=False, seed=0, L=16, D=5):
    return ModelSpec(kind=kind, head=head, tasks=tasks, mtl=mtl,
                     window_length=L, input_dim=D, lstm_units=6,
                     tower_hidden=8, seed=seed, **SMALL_TCN)


class TestSpecValidation:
    def test_classifier_with_tasks_invalid(self):
        with pytest.raises(InvalidSpec):
            ModelSpec(head="classifier", tasks=("vx",)).validate()

    def test_regressor_needs_tasks(self):
        with pytest.raises(InvalidSpec):
            ModelSpec(head="regressor", tasks=()).validate()

    def test_unknown_kind(self):
        with pytest.raises(InvalidSpec):
            ModelSpec(kind="transformer").validate()

    def test_duplicate_tasks(self):
        with pytest.raises(InvalidSpec):
            ModelSpec(head="regressor", tasks=("vx", "vx")).validate()

    def test_taskset_disjoint(self):
        with pytest.raises(InvalidSpec):
            TaskSet(related=("vx", "vy"), independent=("vx",))

    def test_receptive_field_too_small(self):
        spec = ModelSpec(kind="tcn", window_length=150,
                         tcn=TcnConfig(dilations=(1, 2, 4)))
        with pytest.raises(ReceptiveFieldTooSmall):
            Model(spec)

    def test_spec_json_roundtrip(self):
        spec = small_spec("tcn_lstm", head="regressor", tasks=("vx", "vy"), mtl=True)
        Model(spec)  # resolves dilations
        doc = spec.to_json()
        back = ModelSpec.from_json(doc)
        assert back == spec


class TestClassifierContract:
    @pytest.mark.parametrize("kind", ["tcn", "lstm", "tcn_lstm"])
    def test_output_rows_sum_to_one(self, kind):
        model = Model(small_spec(kind))
        x = RNG.random((4, 16, 5))
        out = model(x).data
        assert out.shape == (4, 3)
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(out >= 0.0) and np.all(out <= 1.0)

    def test_identical_inputs_identical_rows(self):
        model = Model(small_spec("tcn_lstm"))
        row = RNG.random((1, 16, 5))
        x = np.repeat(row, 3, axis=0)
        out = model(x).data
        np.testing.assert_allclose(out[0], out[1], atol=1e-12)
        np.testing.assert_allclose(out[0], out[2], atol=1e-12)

    def test_batch_permutation_equivariance(self):
        model = Model(small_spec("lstm"))
        x = RNG.random((5, 16, 5))
        perm = np.array([3, 0, 4, 1, 2])
        np.testing.assert_allclose(model(x).data[perm], model(x[perm]).data, atol=1e-12)

    def test_wrong_window_length_raises(self):
        model = Model(small_spec("lstm"))
        with pytest.raises(ShapeMismatch):
            model(RNG.random((2, 9, 5)))

    def test_zero_head_gives_uniform(self):
        model = Model(small_spec("tcn"))
        tower = model.towers["intent"]
        tower.out.W.data[...] = 0.0
        tower.out.b.data[...] = 0.0
        out = model(RNG.random((3, 16, 5))).data
        np.testing.assert_allclose(out, 1.0 / 3.0, atol=1e-12)


class TestRegressorContract:
    def test_per_task_outputs_in_unit_interval(self):
        spec = small_spec("lstm", head="regressor",
                          tasks=("vx", "vy", "theta"), mtl=True)
        model = Model(spec)
        out = model(RNG.random((4, 16, 5)))
        assert set(out) == {"vx", "vy", "theta"}
        for task, pred in out.items():
            assert pred.data.shape == (4, 2)
            assert np.all(pred.data >= 0.0) and np.all(pred.data <= 1.0)

    def test_mtl_one_task_equals_single_task(self):
        a = Model(small_spec("tcn", head="regressor", tasks=("vx",), mtl=True, seed=9))
        b = Model(small_spec("tcn", head="regressor", tasks=("vx",), mtl=False, seed=9))
        assert a.n_parameters() == b.n_parameters()
        x = RNG.random((3, 16, 5))
        np.testing.assert_array_equal(a(x)["vx"].data, b(x)["vx"].data)

    def test_build_deterministic(self):
        a = Model(small_spec("tcn_lstm", seed=4))
        b = Model(small_spec("tcn_lstm", seed=4))
        for (na, pa), (nb, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert na == nb
            np.testing.assert_array_equal(pa.data, pb.data)

    def test_different_seed_different_params(self):
        a = Model(small_spec("lstm", seed=1))
        b = Model(small_spec("lstm", seed=2))
        assert any(
            not np.array_equal(pa.data, pb.data)
            for (_, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters())
        )


class TestMtlLoss:
    def _pair(self, mses, weights=None):
        outputs, targets = {}, {}
        for i, m in enumerate(mses):
            t = np.zeros((4, 2))
            p = t + np.sqrt(m)
            outputs[f"t{i}"] = Tensor(p)
            targets[f"t{i}"] = Tensor(t)
        return outputs, targets

    def test_all_perfect_zero(self):
        o, t = self._pair([0.0, 0.0])
        assert mtl_loss(o, t).item() == 0.0

    def test_direct_sum_oracle(self):
        o, t = self._pair([0.5, 1.5])
        assert mtl_loss(o, t).item() == pytest.approx(2.0, rel=1e-12)

    def test_weight_linearity(self):
        o, t = self._pair([0.5, 1.5])
        base = mtl_loss(o, t).item()
        up = mtl_loss(o, t, {"t0": 2.0, "t1": 1.0}).item()
        assert up - base == pytest.approx(0.5, rel=1e-12)

    def test_equal_weights_equals_sum_of_mses(self):
        rng = np.random.default_rng(3)
        outputs = {k: Tensor(rng.random((5, 2))) for k in ("a", "b", "c")}
        targets = {k: Tensor(rng.random((5, 2))) for k in ("a", "b", "c")}
        total = mtl_loss(outputs, targets).item()
        parts = sum(mse_loss(outputs[k], targets[k]).item() for k in outputs)
        assert total == pytest.approx(parts, abs=1e-12)

    def test_task_mismatch(self):
        o, t = self._pair([0.1])
        with pytest.raises(TaskMismatch):
            mtl_loss(o, {"other": Tensor(np.zeros((4, 2)))})
        with pytest.raises(TaskMismatch):
            mtl_loss(o, t, weights={"bogus": 1.0})

    def test_tower_isolation_gradients(self):
        # gradient of the summed loss w.r.t. tower-k parameters equals the
        # gradient from task k's loss alone
        spec = small_spec("lstm", head="regressor", tasks=("vx", "vy"), mtl=True, seed=2)
        x = RNG.random((3, 16, 5))
        targets = {"vx": Tensor(RNG.random((3, 2))), "vy": Tensor(RNG.random((3, 2)))}

        model = Model(spec)
        out = model(x)
        model.zero_grad()
        backward(mtl_loss(out, targets))
        joint = {n: p.grad.copy() for n, p in model.named_parameters()
                 if n.startswith("towers.vx.") and p.grad is not None}

        model2 = Model(small_spec("lstm", head="regressor", tasks=("vx", "vy"), mtl=True, seed=2))
        out2 = model2(x)
        model2.zero_grad()
        backward(mse_loss(out2["vx"], targets["vx"]))
        solo = {n: p.grad for n, p in model2.named_parameters()
                if n.startswith("towers.vx.") and p.grad is not None}

        assert set(joint) == set(solo)
        for n in joint:
            np.testing.assert_allclose(joint[n], solo[n], atol=1e-12)


def jitter_parameters(model, seed=0, scale=0.05):
    """Small random offsets keep every preactivation away from the ReLU kink,
    where central differences are invalid."""
    rng = np.random.default_rng(seed)
    for _, p in model.named_parameters():
        p.data += rng.uniform(-scale, scale, size=p.data.shape)


class TestFullModelGradients:
    @pytest.mark.parametrize("kind", ["tcn", "lstm", "tcn_lstm"])
    def test_classifier_fd(self, kind):
        from lcirsp.nn_core import categorical_cross_entropy, one_hot

        model = Model(small_spec(kind, L=12))
        jitter_parameters(model, seed=1)
        x = RNG.random((3, 12, 5))
        y = one_hot(RNG.integers(0, 3, 3), 3)
        f = lambda: categorical_cross_entropy(model(x, training=False), y)
        assert fd_check(f, model.parameters(), n_coords=3) <= 1e-4

    def test_mtl_regressor_fd(self):
        model = Model(small_spec("tcn_lstm", head="regressor",
                                 tasks=("vx", "ay"), mtl=True, L=12))
        jitter_parameters(model, seed=2)
        x = RNG.random((2, 12, 5))
        targets = {"vx": Tensor(RNG.random((2, 2))), "ay": Tensor(RNG.random((2, 2)))}
        f = lambda: mtl_loss(model(x, training=False), targets)
        assert fd_check(f, model.parameters(), n_coords=3) <= 1e-4


def test_build_model_helper_and_describe():
    model = build_model(small_spec("tcn_lstm"))
    text = model.describe()
    assert "tcn" in text and "lstm" in text
    assert "total parameters" in text
    assert str(model.n_parameters()) in text
