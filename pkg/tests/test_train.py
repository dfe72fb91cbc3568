import numpy as np
import pytest

from tsvit import data as D
from tsvit import model as M
from tsvit import train as T
from tsvit.errors import ConfigError, ContractError
from tsvit.tensor import Rng

SMALL = dict(signal_len=32, channels=1, patch_len=8, embed_dim=8, heads=2, blocks=1,
             mlp_dim=16, num_classes=4, encoder_dropout=0.0, embed_dropout=0.0)


def small_dataset(n_per_class=5, length=32, seed=0):
    full = D.gen_synthetic(n_per_class, max(length, 64), seed)
    return D.Dataset(full.signals[:, :length], full.labels, full.class_names)


class TestAdam:
    def test_zero_gradient_leaves_parameters(self):
        model = M.init_model(M.TsvitConfig(**SMALL), Rng(0))
        state = T.AdamState(model)
        before = {n: p.copy() for n, p in M.named_parameters(model)}
        zero = {n: np.zeros_like(p) for n, p in M.named_parameters(model)}
        for t in range(1, 6):
            T.adam_step(model, zero, state, t, T.TrainConfig(epochs=1, trials=1))
        for name, p in M.named_parameters(model):
            np.testing.assert_array_equal(p, before[name])

    def test_first_step_magnitude_closed_form(self):
        # with g = 1 the bias-corrected ratio m_hat / sqrt(v_hat) is exactly 1,
        # so the first update is lr / (1 + eps-scale) ~ lr
        model = M.init_model(M.TsvitConfig(**SMALL), Rng(1))
        state = T.AdamState(model)
        cfg = T.TrainConfig(learning_rate=1e-4, epochs=1, trials=1)
        grads = {n: np.zeros_like(p) for n, p in M.named_parameters(model)}
        grads["b_class"] = np.ones_like(model.b_class)
        before = model.b_class.copy()
        T.adam_step(model, grads, state, 1, cfg)
        delta = model.b_class - before
        np.testing.assert_allclose(delta, -1e-4, rtol=1e-5)

    def test_rejects_step_index_zero(self):
        model = M.init_model(M.TsvitConfig(**SMALL), Rng(2))
        state = T.AdamState(model)
        grads = {n: np.zeros_like(p) for n, p in M.named_parameters(model)}
        with pytest.raises(ContractError):
            T.adam_step(model, grads, state, 0, T.TrainConfig(epochs=1, trials=1))

    def test_rejects_shape_mismatch(self):
        model = M.init_model(M.TsvitConfig(**SMALL), Rng(3))
        state = T.AdamState(model)
        grads = {n: np.zeros_like(p) for n, p in M.named_parameters(model)}
        grads["b_class"] = np.zeros(7)
        with pytest.raises(ContractError):
            T.adam_step(model, grads, state, 1, T.TrainConfig(epochs=1, trials=1))


class TestTrainEpoch:
    def test_zero_learning_rate_freezes_weights_and_matches_eval(self):
        ds = small_dataset(6, seed=4)
        model = M.init_model(M.TsvitConfig(**SMALL), Rng(4))
        state = T.AdamState(model)
        cfg = T.TrainConfig(learning_rate=0.0, batch_size=5, epochs=1, trials=1)
        before = {n: p.copy() for n, p in M.named_parameters(model)}
        stats = T.train_epoch(model, ds, cfg, Rng(5), state)
        for name, p in M.named_parameters(model):
            np.testing.assert_array_equal(p, before[name])
        eval_loss, eval_acc, _ = T.evaluate(model, ds)
        # dropout probabilities are zero, so train-mode loss is the same
        # mean over the same samples
        np.testing.assert_allclose(stats.loss, eval_loss, rtol=1e-6)
        np.testing.assert_allclose(stats.accuracy, eval_acc, rtol=1e-12)

    def test_single_sample_memorization(self):
        ds = small_dataset(1, seed=6).subset(np.array([0]))
        model = M.init_model(M.TsvitConfig(**SMALL), Rng(6))
        state = T.AdamState(model)
        cfg = T.TrainConfig(learning_rate=0.05, batch_size=1, epochs=1, trials=1)
        rng = Rng(7)
        loss = None
        for _ in range(250):
            loss = T.train_epoch(model, ds, cfg, rng, state).loss
            if loss < 1e-3:
                break
        assert loss < 1e-3

    def test_dataset_model_mismatch(self):
        ds = small_dataset(3, length=32, seed=8)
        model = M.init_model(M.TsvitConfig(**{**SMALL, "signal_len": 64}), Rng(8))
        state = T.AdamState(model)
        with pytest.raises(ConfigError):
            T.train_epoch(model, ds, T.TrainConfig(epochs=1, trials=1), Rng(9), state)


class TestEvaluate:
    def test_memorized_model_perfect_confusion(self):
        ds = small_dataset(2, seed=10)
        model = M.init_model(M.TsvitConfig(**SMALL), Rng(10))
        state = T.AdamState(model)
        cfg = T.TrainConfig(learning_rate=0.03, batch_size=8, epochs=1, trials=1)
        rng = Rng(11)
        for _ in range(300):
            stats = T.train_epoch(model, ds, cfg, rng, state)
            if stats.accuracy == 1.0 and stats.loss < 1e-2:
                break
        loss, acc, confusion = T.evaluate(model, ds)
        assert acc == 1.0
        np.testing.assert_array_equal(confusion, np.diag(ds.class_counts()))

    def test_confusion_totals_and_accuracy_definition(self):
        ds = small_dataset(4, seed=12)
        model = M.init_model(M.TsvitConfig(**SMALL), Rng(12))
        _, acc, confusion = T.evaluate(model, ds)
        assert confusion.sum() == len(ds)
        assert acc == np.trace(confusion) / len(ds)
        np.testing.assert_array_equal(confusion.sum(axis=1), ds.class_counts())

    def test_single_misclassification_rounds_like_reference(self):
        # one wrong sample out of 2255 prints as 99.96%
        assert f"{2254 / 2255:.4f}" == "0.9996"

    def test_class_count_mismatch_rejected(self):
        ds = small_dataset(3, seed=21)
        model = M.init_model(M.TsvitConfig(**{**SMALL, "num_classes": 10}), Rng(21))
        with pytest.raises(ConfigError, match="classes"):
            T.evaluate(model, ds)


class TestTrials:
    def test_single_trial_degenerate_sweep(self):
        ds = small_dataset(4, seed=13)
        cfg = M.TsvitConfig(**SMALL)
        tc = T.TrainConfig(learning_rate=1e-3, batch_size=8, epochs=2, seed=13, trials=1)
        sweep, reports = T.run_trials(ds, cfg, tc)
        assert sweep.max_acc == sweep.min_acc == sweep.avg_acc == reports[0].best_accuracy

    def test_sweep_arithmetic(self):
        accs = [1.0, 0.9996, 1.0]
        sweep = T.SweepReport(max(accs), min(accs), sum(accs) / len(accs))
        assert sweep.max_acc == 1.0
        assert sweep.min_acc == 0.9996
        assert round(sweep.avg_acc, 5) == 0.99987
        assert sweep.min_acc <= sweep.avg_acc <= sweep.max_acc

    def test_sweep_invariant_under_trial_order(self):
        import itertools

        accs = [0.97, 1.0, 0.9996]
        def build(values):
            return T.SweepReport(max(values), min(values), sum(values) / len(values))
        reference = build(accs)
        for perm in itertools.permutations(accs):
            assert build(list(perm)) == reference

    def test_trial_reports_shape(self):
        ds = small_dataset(4, seed=14)
        cfg = M.TsvitConfig(**SMALL)
        tc = T.TrainConfig(learning_rate=1e-3, batch_size=8, epochs=3, seed=14, trials=2)
        sweep, reports = T.run_trials(ds, cfg, tc)
        assert len(reports) == 2
        for r in reports:
            assert len(r.train_losses) == len(r.test_accs) == 3
            assert 1 <= r.best_epoch <= 3
            assert r.confusion.sum() == len(ds) - len(ds) * 8 // 10

    def test_deterministic_trial_bitwise(self):
        ds = small_dataset(4, seed=15)
        cfg = M.TsvitConfig(**SMALL)
        tc = T.TrainConfig(learning_rate=1e-3, batch_size=8, epochs=2, seed=15, trials=1)
        train_set, test_set = D.split(ds, D.SplitSpec(0.8, 15))
        a = T.run_trial(train_set, test_set, cfg, tc, seed=15)
        b = T.run_trial(train_set, test_set, cfg, tc, seed=15)
        assert a.train_losses == b.train_losses
        assert a.test_accs == b.test_accs
        for (_, pa), (_, pb) in zip(M.named_parameters(a.best_model),
                                    M.named_parameters(b.best_model)):
            assert pa.tobytes() == pb.tobytes()

    def test_loss_trend_on_synthetic(self):
        # mirrors the training-curve behaviour: after warmup the loss should
        # not increase beyond noise
        ds = D.gen_synthetic(20, 256, 16)
        cfg = M.TsvitConfig(signal_len=256, channels=1, patch_len=32, embed_dim=16,
                            heads=2, blocks=2, mlp_dim=32, num_classes=4,
                            encoder_dropout=0.0, embed_dropout=0.0)
        tc = T.TrainConfig(learning_rate=1e-3, batch_size=16, epochs=10, seed=16, trials=1)
        _, reports = T.run_trials(ds, cfg, tc)
        losses = reports[0].train_losses
        for i in range(3, len(losses) - 1):
            assert losses[i + 1] <= losses[i] * 1.05


class TestReportsOnDisk:
    def test_metrics_csv_layout(self, tmp_path):
        report = T.TrialReport(trial=1, train_losses=[1.0, 0.5], train_accs=[0.5, 0.75],
                               test_losses=[1.1, 0.6], test_accs=[0.4, 0.7])
        path = tmp_path / "metrics.csv"
        T.write_metrics_csv(path, [report])
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "trial,epoch,train_loss,train_acc,test_loss,test_acc"
        assert lines[1] == "1,1,1.000000,0.500000,1.100000,0.400000"
        assert len(lines) == 3

    def test_confusion_csv_layout(self, tmp_path):
        confusion = np.array([[3, 1], [0, 4]])
        path = tmp_path / "confusion.csv"
        T.write_confusion_csv(path, confusion, ["a", "b"])
        lines = path.read_text().strip().splitlines()
        assert lines == ["a,b", "3,1", "0,4"]


class TestExportFeatures:
    def test_record_count_and_round_trip(self, tmp_path):
        ds = small_dataset(2, seed=17)
        model = M.init_model(M.TsvitConfig(**SMALL), Rng(17))
        path = tmp_path / "features.tsvf"
        T.export_features(model, ds, path)
        feats = T.read_features(path)
        assert len(feats.vectors) == len(ds) * (model.config.blocks + 1)
        assert feats.embed_dim == model.config.embed_dim
        assert feats.blocks == model.config.blocks
        np.testing.assert_array_equal(np.unique(feats.layer),
                                      np.arange(model.config.blocks + 1))

    def test_block_vectors_match_encoder_outputs_bitwise(self, tmp_path):
        ds = small_dataset(2, seed=18)
        cfg = M.TsvitConfig(**{**SMALL, "blocks": 2})
        model = M.init_model(cfg, Rng(18))
        path = tmp_path / "features.tsvf"
        T.export_features(model, ds, path)
        feats = T.read_features(path)
        z0, _ = M.embed(ds.signals, model, None, training=False)
        _, outputs, _ = M.encoder_forward(z0, model, None, training=False)
        for sample in range(len(ds)):
            for layer in (1, 2):
                rec = feats.vectors[(feats.sample_index == sample) & (feats.layer == layer)]
                assert rec[0].tobytes() == outputs[layer - 1][sample, 0].astype("<f4").tobytes()
            assert feats.label[feats.sample_index == sample][0] == ds.labels[sample]

    def test_export_deterministic(self, tmp_path):
        ds = small_dataset(2, seed=19)
        model = M.init_model(M.TsvitConfig(**SMALL), Rng(19))
        p1, p2 = tmp_path / "a.tsvf", tmp_path / "b.tsvf"
        T.export_features(model, ds, p1)
        T.export_features(model, ds, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_rejects_incompatible_dataset(self, tmp_path):
        ds = small_dataset(2, length=32, seed=20)
        model = M.init_model(M.TsvitConfig(**{**SMALL, "signal_len": 64}), Rng(20))
        with pytest.raises(ConfigError):
            T.export_features(model, ds, tmp_path / "f.tsvf")
