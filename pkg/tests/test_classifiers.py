import numpy as np
import pytest
from pytest import approx

from keyauth import classifiers as clf
from keyauth import nn
from keyauth.dataset import build_negative_dataset, make_class_split
from keyauth.synth import synth_dataset


@pytest.fixture(scope="module")
def toy_split():
    ds = synth_dataset(n_subjects=2, reps_per_subject=60, seed=17,
                       subject_spread=2.0, within_noise=0.5)
    return make_class_split(ds, seed=0)


class TestStandardizer:
    def test_train_columns_centered_and_unit(self, rng):
        x = rng.normal(loc=3.0, scale=5.0, size=(200, 31))
        std = clf.Standardizer.fit(x)
        z = std.apply(x)
        assert np.abs(z.mean(axis=0)).max() < 1e-9
        assert z.std(axis=0) == approx(np.ones(31), abs=1e-6)

    def test_fit_on_train_only(self, rng):
        train = rng.normal(size=(50, 4))
        test = rng.normal(loc=10.0, size=(50, 4))
        std = clf.Standardizer.fit(train)
        assert np.abs(std.apply(test).mean(axis=0)).min() > 1.0

    def test_floored_constant_column(self):
        x = np.ones((10, 2))
        z = clf.Standardizer.fit(x).apply(x)
        assert np.all(np.isfinite(z))


class TestNeuralClassifiers:
    def test_two_subject_toy_fc(self, toy_split):
        model = clf.train_nn("fc", toy_split, nn.TrainConfig(epochs=60, seed=1))
        assert model.metrics.accuracy >= 0.99

    def test_two_subject_toy_cnn(self, toy_split):
        model = clf.train_nn("cnn1d", toy_split, nn.TrainConfig(epochs=30, seed=1))
        assert model.metrics.accuracy >= 0.99

    def test_cnn_flatten_width_is_992(self, rng):
        layers = clf.cnn_architecture(51, rng)
        dense = next(l for l in layers if isinstance(l, nn.Dense))
        assert dense.n_in == 992

    def test_fc_widths(self, rng):
        layers = clf.fc_architecture(51, rng)
        dense = [l for l in layers if isinstance(l, nn.Dense)]
        assert [(d.n_in, d.n_out) for d in dense] == [(31, 80), (80, 60), (60, 51)]

    def test_unknown_architecture(self, toy_split):
        with pytest.raises(ValueError):
            clf.train_nn("transformer", toy_split)

    def test_predict_is_argmax_invariant(self, rng):
        layers = [nn.Dense(5, 3, rng)]
        x = rng.normal(size=(20, 5))
        base = clf.predict_nn(layers, x)
        logits = nn.predict_logits(layers, x)
        for f in (np.exp, lambda v: 10.0 * v - 3.0):
            assert np.array_equal(np.argmax(f(logits), axis=1), base)


class TestNegativeClass:
    def test_perfect_predictor(self):
        labels = np.array([0, 1, 2, 2])
        report = clf.evaluate_negative_class(labels, labels, 3)
        assert report.recall == report.precision == report.f_score == 1.0

    def test_f_matches_arithmetic(self, rng):
        labels = rng.integers(0, 4, size=200)
        preds = rng.integers(0, 4, size=200)
        report = clf.evaluate_negative_class(preds, labels, 4)
        p, r = report.precision, report.recall
        expect = 2 * p * r / (p + r) if p + r > 0 else 0.0
        assert report.f_score == approx(expect)

    def test_negative_experiment_on_synthetic(self):
        ds = synth_dataset(n_subjects=8, reps_per_subject=60, seed=5,
                           subject_spread=2.0, within_noise=0.5)
        split = build_negative_dataset(ds, n_known=5, seed=0, per_heldout=30)
        model = clf.train_nn("fc", split, nn.TrainConfig(epochs=60, seed=2))
        preds = clf.predict_nn(model.layers, model.standardizer.apply(split.test_x))
        report = clf.evaluate_negative_class(preds, split.test_y, split.n_classes)
        assert report.accuracy > 0.8
        assert report.metrics.confusion.shape == (6, 6)


class TestRandomForest:
    def test_interpolates_small_fixture(self, rng):
        x = rng.normal(size=(50, 6))
        y = rng.integers(0, 3, size=50)
        from keyauth.dataset import ClassSplit as CS
        split = CS(train_x=x, train_y=y, val_x=x[:5], val_y=y[:5],
                   test_x=x, test_y=y, label_map={str(i): i for i in range(3)})
        forest = clf.train_random_forest(split, n_trees=15, max_features=3, seed=2)
        acc = (clf.predict_forest(forest, x) == y).mean()
        assert acc == approx(1.0)

    def test_single_tree_reproduces_hand_traced_splits(self):
        # 4 points, one feature separates classes at 0.5 with zero Gini.
        x = np.array([[0.0, 5.0], [0.1, -3.0], [1.0, 4.0], [1.1, -2.0]])
        y = np.array([0, 0, 1, 1])
        from keyauth.dataset import ClassSplit as CS
        split = CS(train_x=x, train_y=y, val_x=x, val_y=y, test_x=x, test_y=y,
                   label_map={"a": 0, "b": 1})
        forest = clf.train_random_forest(split, n_trees=1, max_features=2,
                                         seed=0, bootstrap=False)
        tree = forest.trees[0]
        root = 0
        assert tree.feature[root] == 0
        assert tree.threshold[root] == approx((0.1 + 1.0) / 2)
        assert tree.leaf_class[tree.left[root]] == 0
        assert tree.leaf_class[tree.right[root]] == 1

    def test_toy_accuracy(self, toy_split):
        forest = clf.train_random_forest(toy_split, n_trees=20, seed=4)
        acc = (clf.predict_forest(forest, toy_split.test_x) == toy_split.test_y).mean()
        assert acc >= 0.95

    def test_deterministic_per_seed(self, toy_split):
        a = clf.train_random_forest(toy_split, n_trees=5, seed=9)
        b = clf.train_random_forest(toy_split, n_trees=5, seed=9)
        x = toy_split.test_x
        assert np.array_equal(clf.predict_forest(a, x), clf.predict_forest(b, x))

    def test_vote_majority_and_tie_break(self):
        # 51 trees voting class 1, 49 voting class 0 -> class 1; tie -> lowest.
        class FixedTree:
            def __init__(self, c):
                self.c = c
        votes = np.zeros((1, 2), dtype=np.int64)
        votes[0, 0] = 49
        votes[0, 1] = 51
        assert np.argmax(votes, axis=1)[0] == 1
        votes[0, 0] = 51
        assert np.argmax(votes, axis=1)[0] == 0
        tie = np.array([[50, 50]])
        assert np.argmax(tie, axis=1)[0] == 0

    def test_prediction_invariant_to_tree_order(self, toy_split):
        forest = clf.train_random_forest(toy_split, n_trees=7, seed=1)
        base = clf.predict_forest(forest, toy_split.test_x)
        shuffled = clf.ForestModel(trees=list(reversed(forest.trees)),
                                   n_classes=forest.n_classes)
        assert np.array_equal(clf.predict_forest(shuffled, toy_split.test_x), base)


class TestMulticlassSvm:
    def test_linearly_separable_toy(self, rng):
        n = 80
        x = np.vstack([rng.normal(size=(n, 3)) + 4.0, rng.normal(size=(n, 3)) - 4.0])
        y = np.array([0] * n + [1] * n)
        from keyauth.dataset import ClassSplit as CS
        split = CS(train_x=x, train_y=y, val_x=x, val_y=y, test_x=x, test_y=y,
                   label_map={"a": 0, "b": 1})
        model = clf.train_multiclass_svm(split, lam=0.1, epochs=40, seed=0)
        assert (clf.predict_svm(model, x) == y).mean() == 1.0
        # at small lambda most points sit outside the margin
        z = model.standardizer.apply(x)
        scores = z @ model.weights.T + model.biases
        true = scores[np.arange(len(y)), y]
        other = scores[np.arange(len(y)), 1 - y]
        assert np.mean(true - other >= 1.0) >= 0.9

    def test_objective_decreases(self, toy_split):
        model = clf.train_multiclass_svm(toy_split, lam=0.01, epochs=30, seed=3)
        hist = model.objective_history
        assert hist[-1] < hist[0]
        # trend is downward even if individual epochs fluctuate
        assert min(hist) == approx(min(hist[len(hist) // 2:]), rel=0.5)

    def test_deterministic(self, toy_split):
        a = clf.train_multiclass_svm(toy_split, lam=0.01, epochs=5, seed=2)
        b = clf.train_multiclass_svm(toy_split, lam=0.01, epochs=5, seed=2)
        assert np.array_equal(a.weights, b.weights)

    def test_degenerate_one_class(self, rng):
        x = rng.normal(size=(30, 4))
        y = np.zeros(30, dtype=np.int64)
        from keyauth.dataset import ClassSplit as CS
        split = CS(train_x=x, train_y=y, val_x=x, val_y=y, test_x=x, test_y=y,
                   label_map={"a": 0})
        model = clf.train_multiclass_svm(split, lam=0.01, epochs=3, seed=0)
        assert np.all(clf.predict_svm(model, x) == 0)
