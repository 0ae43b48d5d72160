import numpy as np
import pytest

from polcnn.cnn import ModelConfig, init_model, model_to_bytes
from polcnn.corpus import Corpus, LabeledSentence, split_corpus
from polcnn.embeddings import ContextualProvider, StaticProvider
from polcnn.errors import SuiteError, TrainingError
from polcnn.fixtures import polysemy_fixture, separable_fixture
from polcnn.training import (
    EpochStats,
    TrainConfig,
    evaluate,
    load_history,
    report_from_predictions,
    run_suite,
    save_history,
    train,
    transfer_evaluate,
)


@pytest.fixture(scope="module")
def separable():
    corpus, table = separable_fixture(seed=0)
    return split_corpus(corpus, seed=0), StaticProvider(table)


def small_config(provider, seed=0, **kw):
    return TrainConfig(seed=seed, provider=provider, **kw)


class TestMetrics:
    def test_hand_computed_two_class_fixture(self):
        # confusion [[8, 2], [3, 7]] worked out by hand from the
        # precision/recall definitions
        y_true = [0] * 10 + [1] * 10
        y_pred = [0] * 8 + [1] * 2 + [0] * 3 + [1] * 7
        r = report_from_predictions(y_true, y_pred, classes=2)
        np.testing.assert_array_equal(r.confusion, [[8, 2], [3, 7]])
        assert r.accuracy == pytest.approx(0.75)
        assert r.per_class[1].f1 == pytest.approx(16 / 21, abs=1e-9)
        assert r.per_class[2].f1 == pytest.approx(14 / 19, abs=1e-9)
        assert r.macro_f1 == pytest.approx(0.7494, abs=1e-4)

    def test_perfect_predictions(self):
        y = [0, 1, 2, 3, 4, 5, 6] * 3
        r = report_from_predictions(y, y, classes=7)
        assert r.accuracy == 1.0
        assert r.macro_f1 == 1.0

    def test_absent_class_scores_zero_f1(self):
        r = report_from_predictions([0, 0, 1], [0, 0, 1], classes=3)
        assert r.per_class[3].f1 == 0.0
        assert r.macro_f1 == pytest.approx(2 / 3)

    def test_internal_consistency_random(self):
        rng = np.random.default_rng(0)
        y_true = rng.integers(0, 7, 500).tolist()
        y_pred = rng.integers(0, 7, 500).tolist()
        r = report_from_predictions(y_true, y_pred, classes=7)
        assert r.accuracy == pytest.approx(np.trace(r.confusion) / r.n, abs=1e-12)
        np.testing.assert_array_equal(r.confusion.sum(axis=1), np.bincount(y_true, minlength=7))
        recomputed = np.mean([r.per_class[c].f1 for c in range(1, 8)])
        assert r.macro_f1 == pytest.approx(recomputed, abs=1e-12)

    def test_matches_sklearn_oracle(self):
        sklearn_metrics = pytest.importorskip("sklearn.metrics")
        rng = np.random.default_rng(7)
        for _ in range(5):
            y_true = rng.integers(0, 7, 200)
            y_pred = rng.integers(0, 7, 200)
            r = report_from_predictions(y_true.tolist(), y_pred.tolist(), classes=7)
            assert r.macro_f1 == pytest.approx(
                sklearn_metrics.f1_score(
                    y_true, y_pred, labels=range(7), average="macro", zero_division=0
                ),
                abs=1e-12,
            )
            assert r.accuracy == pytest.approx(
                sklearn_metrics.accuracy_score(y_true, y_pred), abs=1e-12
            )
            for c in range(7):
                assert r.per_class[c + 1].precision == pytest.approx(
                    sklearn_metrics.precision_score(
                        y_true, y_pred, labels=[c], average="macro", zero_division=0
                    ),
                    abs=1e-12,
                )


class TestEvaluate:
    def test_fixed_class_predictor_on_balanced_corpus(self, separable):
        split, provider = separable
        cfg = ModelConfig(d=provider.dim)
        model = init_model(cfg, seed=0)
        for _, p in model.param_items():
            p[...] = 0.0
        model.dense_b[3] = 5.0  # always predicts class index 3
        corpus, _ = separable_fixture(seed=0)
        r = evaluate(model, corpus, provider)
        assert r.accuracy == pytest.approx(1 / 7)
        assert all(r.confusion[:, c].sum() == 0 for c in range(7) if c != 3)

    def test_no_labels_error(self, separable):
        _, provider = separable
        model = init_model(ModelConfig(d=provider.dim), seed=0)
        empty = Corpus(
            (LabeledSentence.from_text("u1", "marker1a marker1b", None),), name="unlabeled"
        )
        with pytest.raises(TrainingError, match="no labeled"):
            evaluate(model, empty, provider)

    def test_embedding_failure_names_sentence(self):
        fix = polysemy_fixture(seed=0)
        provider = ContextualProvider(fix.contextual_stores["clean"])
        model = init_model(ModelConfig(d=provider.dim), seed=0)
        stranger = Corpus(
            (LabeledSentence.from_text("not-in-store", "bank river note", 1),), name="x"
        )
        with pytest.raises(TrainingError, match="not-in-store"):
            evaluate(model, stranger, provider)


class TestTrain:
    def test_deterministic_bytes_and_history(self, separable):
        split, provider = separable
        cfg = dict(max_epochs=4, patience=4)
        m1, h1 = train(split, small_config(provider, seed=5, **cfg))
        m2, h2 = train(split, small_config(provider, seed=5, **cfg))
        assert model_to_bytes(m1) == model_to_bytes(m2)
        assert h1 == h2
        m3, _ = train(split, small_config(provider, seed=6, **cfg))
        assert model_to_bytes(m3) != model_to_bytes(m1)

    def test_returned_model_has_best_validation_f1(self, separable):
        split, provider = separable
        model, history = train(split, small_config(provider, max_epochs=12, patience=3))
        best = max(h.val_macro_f1 for h in history)
        assert evaluate(model, split.validation, provider).macro_f1 == pytest.approx(best, abs=1e-12)

    def test_early_stopping_respects_patience(self, separable):
        split, provider = separable
        _, history = train(split, small_config(provider, max_epochs=50, patience=2))
        if len(history) < 50:
            best = max(h.val_macro_f1 for h in history)
            # The last `patience` epochs did not improve on the running best.
            assert all(h.val_macro_f1 <= best for h in history[-2:])
            assert history[-1].val_macro_f1 <= max(h.val_macro_f1 for h in history[:-2])

    def test_overfits_separable_fixture(self, separable):
        split, provider = separable
        model, history = train(
            split, small_config(provider, max_epochs=200, patience=200, batch_size=10)
        )
        assert evaluate(model, split.train, provider).accuracy == 1.0
        assert history[0].train_loss < np.log(7)

    def test_provider_failure_names_sentence(self):
        fix = polysemy_fixture(seed=0)
        store = fix.contextual_stores["clean"]
        # Drop a whole class; the train split necessarily contains one of them.
        for sid in [s.id for s in fix.source if s.label == 1]:
            del store.records[sid]
        split = split_corpus(fix.source, seed=0)
        with pytest.raises(TrainingError, match="poly-src-1-"):
            train(split, small_config(ContextualProvider(store), max_epochs=1, patience=1))


class TestTransferEvaluate:
    def test_no_parameter_updates(self, separable):
        split, provider = separable
        model, _ = train(split, small_config(provider, max_epochs=2, patience=2))
        before = model_to_bytes(model)
        corpus, _ = separable_fixture(seed=0)
        transfer_evaluate(model, corpus, provider)
        assert model_to_bytes(model) == before

    def test_equals_evaluate_on_same_corpus(self, separable):
        split, provider = separable
        model, _ = train(split, small_config(provider, max_epochs=2, patience=2))
        a = evaluate(model, split.test, provider)
        b = transfer_evaluate(model, split.test, provider)
        assert a.accuracy == b.accuracy and a.macro_f1 == b.macro_f1
        np.testing.assert_array_equal(a.confusion, b.confusion)


class TestHistoryCsv:
    def test_round_trip(self, tmp_path):
        history = [EpochStats(1, 1.9, 0.3), EpochStats(2, 1.2345678901234567, 0.52)]
        path = tmp_path / "h.csv"
        save_history(history, path)
        assert path.read_text().splitlines()[0] == "epoch,train_loss,val_macro_f1"
        assert load_history(path) == history


@pytest.fixture(scope="module")
def poly_files(tmp_path_factory):
    from polcnn.embeddings import save_static_vectors, write_semb

    tmp = tmp_path_factory.mktemp("poly")
    fix = polysemy_fixture(seed=0)
    paths = {}
    for name, table in fix.static_tables.items():
        paths[name] = tmp / f"{name}.txt"
        save_static_vectors(table, paths[name])
    for name, store in fix.contextual_stores.items():
        paths[name] = tmp / f"{name}.semb"
        write_semb(store, paths[name])
    return fix, paths


class TestRunSuite:
    def test_four_rows_and_contextual_wins(self, poly_files):
        from polcnn.training import ExperimentSpec

        fix, paths = poly_files
        specs = [
            ExperimentSpec("M1", "static", str(paths["w2v-like"])),
            ExperimentSpec("M2", "static", str(paths["glove-like"])),
            ExperimentSpec("M3", "contextual", str(paths["noisy"])),
            ExperimentSpec("M4", "contextual", str(paths["clean"])),
        ]
        split = split_corpus(fix.source, seed=0)
        provider = StaticProvider(fix.static_tables["w2v-like"])
        report = run_suite(specs, split, fix.target, small_config(provider, seed=0))
        assert [r.experiment for r in report.rows] == ["M1", "M2", "M3", "M4"]
        static_acc = max(report.rows[0].source_accuracy, report.rows[1].source_accuracy)
        for ctx_row in report.rows[2:]:
            assert ctx_row.source_accuracy > static_acc
        assert report.metadata["seed"] == 0
        assert "providers" in report.metadata

    def test_single_spec(self, poly_files):
        from polcnn.training import ExperimentSpec

        fix, paths = poly_files
        specs = [ExperimentSpec("only", "static", str(paths["w2v-like"]))]
        split = split_corpus(fix.source, seed=0)
        provider = StaticProvider(fix.static_tables["w2v-like"])
        report = run_suite(
            specs, split, fix.target, small_config(provider, max_epochs=2, patience=2)
        )
        assert len(report.rows) == 1

    def test_missing_provider_names_experiment(self, poly_files):
        from polcnn.training import ExperimentSpec

        fix, paths = poly_files
        specs = [ExperimentSpec("broken", "static", "/nonexistent/vectors.txt")]
        split = split_corpus(fix.source, seed=0)
        provider = StaticProvider(fix.static_tables["w2v-like"])
        with pytest.raises(SuiteError, match="broken"):
            run_suite(specs, split, fix.target, small_config(provider, max_epochs=1, patience=1))

    def test_empty_suite_rejected(self, poly_files):
        fix, _ = poly_files
        split = split_corpus(fix.source, seed=0)
        provider = StaticProvider(fix.static_tables["w2v-like"])
        with pytest.raises(SuiteError, match="at least one"):
            run_suite([], split, fix.target, small_config(provider))
