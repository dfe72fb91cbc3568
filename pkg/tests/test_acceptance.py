"""Acceptance suite: one test per release criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s``.  The long check is the
desk-scale convergence run (several minutes of CPU); everything else is
seconds.  The measured-corpus reproduction is opt-in via the
TSVIT_CWRU_TRAIN / TSVIT_CWRU_TEST environment variables because it needs
hours and the converted recordings.
"""

import os
import time

import numpy as np
import pytest

from gradcheck import assert_grad_close, central_diff
from tsvit import cli
from tsvit import data as D
from tsvit import model as M
from tsvit import tensor
from tsvit import train as T
from tsvit.tensor import Rng

TABLE_CONFIG = dict(signal_len=2048, channels=1, patch_len=32, embed_dim=192,
                    heads=8, blocks=8, mlp_dim=768, num_classes=10)

# Published per-row reference figures for the compatibility subset
# (hyperparameter overrides, flops in M, params in M).  Three rows are marked
# infeasible: they list different parameter totals for models whose learnable
# arrays are element-for-element identical in count (the patch kernel and
# position table swap sizes exactly when patch_len and the patch count trade
# places), so no counting convention can reproduce them; see the row comments.
PUBLISHED_ROWS = [
    ("baseline", {}, 309.88, 2.39, True),
    ("patch-64", {"patch_len": 64}, 158.10, 2.40, False),    # same multiset as baseline, listed +0.01M
    ("patch-128", {"patch_len": 128}, 82.21, 2.42, False),   # same multiset as patch-16, listed +0.04M apart
    ("patch-16", {"patch_len": 16}, 613.44, 2.38, False),    # same multiset as patch-128, listed -0.04M apart
    ("heads-4", {"heads": 4}, 309.88, 2.39, True),
    ("heads-6", {"heads": 6}, 309.88, 2.39, True),
    ("heads-12", {"heads": 12}, 309.88, 2.39, True),
    ("blocks-4", {"blocks": 4}, 155.73, 1.20, True),
    ("blocks-6", {"blocks": 6}, 232.81, 1.79, True),
    ("blocks-10", {"blocks": 10}, 386.96, 2.98, True),
    ("blocks-12", {"blocks": 12}, 464.03, 3.57, True),
    ("mlp-256", {"mlp_dim": 256}, 105.41, 0.81, True),
    ("mlp-512", {"mlp_dim": 512}, 207.65, 1.60, True),
    ("mlp-1024", {"mlp_dim": 1024}, 412.12, 3.18, True),
    ("embed-64", {"embed_dim": 64}, 103.29, 0.80, True),
    ("embed-128", {"embed_dim": 128}, 206.59, 1.59, True),
    ("embed-256", {"embed_dim": 256}, 413.18, 3.18, True),
    ("no-dp", {"use_post_embedding_dropout": False}, 309.88, 2.39, True),
    ("no-pe", {"use_position_embedding": False}, 309.88, 2.39, True),
]


def report(name, detail=""):
    print(f"\nACCEPTANCE {name}: PASS {detail}")


class TestGradientCorrectness:
    def test_every_parameter_matches_finite_differences(self):
        started = time.time()
        cfg = M.TsvitConfig(signal_len=8, channels=1, patch_len=4, embed_dim=4,
                            heads=2, blocks=2, mlp_dim=8, num_classes=3,
                            encoder_dropout=0.0, embed_dropout=0.0)
        model = M.cast_model(M.init_model(cfg, Rng(3)), np.float64)
        # difference quotients need O(1) weight scale: at the production init
        # scale the layer norms sit in a near-singular regime whose curvature
        # swamps the central-difference estimate (the analytic gradient is
        # unaffected)
        rng = np.random.default_rng(7)
        for name, p in M.named_parameters(model):
            M.set_parameter(model, name, rng.normal(0.0, 0.5, p.shape))
        M.zero_grads(model)
        x = rng.normal(size=(2, 8, 1))
        probe = rng.normal(size=(2, 3))

        def loss():
            logits, _ = M.model_forward(x, model, None, training=False)
            return float((logits * probe).sum())

        _, cache = M.model_forward(x, model, None, training=False)
        grads = M.model_backward(model, cache, probe)
        worst = 0.0
        count = 0
        for name, param in M.named_parameters(model):
            numeric = central_diff(loss, param)
            assert_grad_close(grads[name], numeric, name)
            worst = max(worst, float(np.abs(grads[name] - numeric).max()
                                     / max(np.abs(numeric).max(), 1.0)))
            count += param.size
        elapsed = time.time() - started
        assert elapsed < 60.0, f"gradient check took {elapsed:.0f}s"
        report("gradient-correctness",
               f"({count} parameters, worst rel err {worst:.2e}, {elapsed:.1f}s)")


class TestParameterAccounting:
    def test_reference_total_and_allocation_agree(self):
        cfg = M.TsvitConfig(**TABLE_CONFIG)
        closed_form = M.count_params(cfg)
        allocated = sum(p.size for _, p in M.named_parameters(M.init_model(cfg, Rng(0))))
        assert closed_form == 3_580_234
        assert closed_form == allocated
        report("parameter-accounting-total", f"(count_params = {closed_form:,} = allocation)")

    @pytest.mark.parametrize(
        "name,overrides,_flops_m,params_m,feasible",
        [pytest.param(*row, marks=() if row[4] else pytest.mark.xfail(
            strict=True,
            reason="published table lists different totals for identical parameter multisets"))
         for row in PUBLISHED_ROWS],
    )
    def test_published_params_within_001m(self, name, overrides, _flops_m, params_m, feasible):
        cfg = M.TsvitConfig(**{**TABLE_CONFIG, **overrides})
        subset = M.count_params_paper_compatible(cfg) / 1e6
        assert abs(subset - params_m) <= 0.01, (
            f"{name}: subset {subset:.4f}M vs published {params_m}M")

    def test_summary_line(self):
        feasible = [r for r in PUBLISHED_ROWS if r[4]]
        report("parameter-accounting-published",
               f"({len(feasible)}/19 rows within 0.01M; 3 patch-length rows "
               f"are internally inconsistent in the source table)")


class TestFlopAccounting:
    def test_matmul_closed_form_equals_instrumented(self):
        cfg = M.TsvitConfig(**TABLE_CONFIG)
        closed_form = M.count_flops(cfg).matmul_total
        model = M.init_model(cfg, Rng(1))
        with tensor.count_matmul_flops() as counter:
            M.model_forward(np.zeros((1, 2048, 1), np.float32), model, None, training=False)
        assert closed_form == 486_811_392
        assert counter.matmul_flops == closed_form
        report("flop-accounting-matmul", f"(closed form = instrumented = {closed_form:,})")

    def test_compatibility_subset_tracks_published_total(self):
        subset = M.count_flops(M.TsvitConfig(**TABLE_CONFIG)).paper_compatible
        assert subset == 307_494_912
        assert abs(subset / 1e6 - 309.88) / 309.88 < 0.01
        report("flop-accounting-subset", f"(subset {subset:,} within 1% of 309.88M)")

    def test_flops_invariant_in_head_count(self):
        reference = M.count_flops(M.TsvitConfig(**TABLE_CONFIG))
        for heads in (4, 6, 12):
            fb = M.count_flops(M.TsvitConfig(**{**TABLE_CONFIG, "heads": heads}))
            assert fb.as_dict() == reference.as_dict()
        report("flop-accounting-head-invariance", "(h in {4,6,8,12} identical)")


class TestArchitectureInvariants:
    def test_invariants_within_budget(self):
        started = time.time()

        # class-token permutation invariance at full reference scale
        cfg = M.TsvitConfig(**{**TABLE_CONFIG, "use_position_embedding": False,
                               "use_post_embedding_dropout": False})
        model = M.init_model(cfg, Rng(5))
        rng = np.random.default_rng(6)
        x = rng.normal(size=(2048, 1)).astype(np.float32)
        perm = rng.permutation(64)
        x_perm = x.reshape(64, 32)[perm].reshape(2048, 1)
        base, _ = M.model_forward(x[None], model, None, training=False)
        moved, _ = M.model_forward(x_perm[None], model, None, training=False)
        rel = np.abs(base - moved).max() / max(np.abs(base).max(), 1e-12)
        assert rel < 1e-4

        # softmax row-normalisation and layer-norm moments
        z = rng.normal(0, 3, size=(64, 129)).astype(np.float32)
        probs = tensor.softmax_rows(z)
        assert np.abs(probs.sum(axis=-1) - 1.0).max() < 1e-6
        normed, _ = tensor.layer_norm(z, np.ones(129, np.float32), np.zeros(129, np.float32))
        assert np.abs(normed.mean(axis=-1)).max() < 1e-5
        assert np.abs(normed.var(axis=-1) - 1.0).max() < 1e-3

        # patch embedding shift equivariance, exact
        table_cfg = M.TsvitConfig(**TABLE_CONFIG)
        table_model = M.init_model(table_cfg, Rng(7))
        shifted = np.concatenate([x[32:], rng.normal(size=(32, 1)).astype(np.float32)])
        base_pe = M.patch_embed(x, table_model.patch, table_cfg)
        moved_pe = M.patch_embed(shifted, table_model.patch, table_cfg)
        assert base_pe[1:].tobytes() == moved_pe[:-1].tobytes()

        elapsed = time.time() - started
        assert elapsed < 120.0
        report("architecture-invariants",
               f"(permutation rel {rel:.1e}; shift equivariance bitwise; {elapsed:.1f}s)")


class TestDeskScaleConvergence:
    def test_three_trials_reach_99_percent(self):
        started = time.time()
        dataset = D.gen_synthetic(500, 2048, seed=42)
        model_cfg = M.TsvitConfig(signal_len=2048, channels=1, patch_len=32,
                                  embed_dim=64, heads=4, blocks=4, mlp_dim=256,
                                  num_classes=4, encoder_dropout=0.0, embed_dropout=0.0)
        train_cfg = T.TrainConfig(learning_rate=3e-4, batch_size=32, epochs=30,
                                  seed=42, trials=3)
        sweep, reports = T.run_trials(dataset, model_cfg, train_cfg, workers=3)
        elapsed = time.time() - started
        for r in reports:
            assert r.best_accuracy >= 0.99, (
                f"trial {r.trial}: best accuracy {r.best_accuracy:.4f} < 0.99")
        assert elapsed < 900.0, f"desk-scale run took {elapsed:.0f}s"
        report("desk-scale-convergence",
               f"(accuracies {[f'{r.best_accuracy:.4f}' for r in reports]}, "
               f"{elapsed / 60:.1f} min)")


class TestDeterminism:
    def test_cmd_train_byte_identical(self, tmp_path):
        data = tmp_path / "d.tsvd"
        assert cli.main(["gen-synth", "--out", str(data), "--per-class", "6",
                         "--length", "256", "--seed", "5"]) == 0
        config = tmp_path / "run.cfg"
        config.write_text(
            "signal_len = 256\npatch_len = 32\nembed_dim = 16\nheads = 2\n"
            "blocks = 2\nmlp_dim = 32\nnum_classes = 4\n"
            "encoder_dropout = 0.1\nembed_dropout = 0.1\n"
            "learning_rate = 0.001\nbatch_size = 8\nepochs = 3\nseed = 9\ntrials = 2\n"
        )
        dirs = (tmp_path / "a", tmp_path / "b")
        for out in dirs:
            assert cli.main(["train", "--data", str(data), "--config", str(config),
                             "--out-dir", str(out)]) == 0
        for name in ("trial01_best.tsvm", "trial02_best.tsvm", "metrics.csv", "summary.txt"):
            a = (dirs[0] / name).read_bytes()
            b = (dirs[1] / name).read_bytes()
            assert a == b, f"{name} differs between identical runs"
        report("determinism", "(checkpoints + metrics byte-identical)")


@pytest.mark.skipif(
    not (os.environ.get("TSVIT_CWRU_TRAIN") and os.environ.get("TSVIT_CWRU_TEST")),
    reason="extended measured-corpus run; set TSVIT_CWRU_TRAIN/TSVIT_CWRU_TEST to enable",
)
class TestMeasuredCorpusExtended:
    def test_reference_configuration_reaches_99_percent(self):
        train_set = D.read_dataset(os.environ["TSVIT_CWRU_TRAIN"])
        test_set = D.read_dataset(os.environ["TSVIT_CWRU_TEST"])
        model_cfg = M.TsvitConfig(**TABLE_CONFIG)
        train_cfg = T.TrainConfig(learning_rate=1e-4, batch_size=32, epochs=20,
                                  seed=0, trials=1)
        result = T.run_trial(train_set, test_set, model_cfg, train_cfg, seed=0)
        assert result.best_accuracy >= 0.99
        report("measured-corpus-extended", f"(best accuracy {result.best_accuracy:.4f})")
