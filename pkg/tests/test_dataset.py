import numpy as np
import pytest
from pytest import approx

from keyauth.dataset import (
    NEGATIVE_CLASS_LABEL, Dataset, build_negative_dataset, filter_outliers,
    load_dataset, make_anomaly_splits, make_class_split, parse_csv, save_dataset,
)
from keyauth.errors import SchemaError, SubjectTooSmall
from keyauth.features import FEATURE_NAMES, KeystrokeSample
from keyauth.synth import synth_dataset, write_benchmark_csv

HEADER = "subject,sessionIndex,rep," + ",".join(FEATURE_NAMES)


def _row(subject, session, rep, value):
    return f"{subject},{session},{rep}," + ",".join(["%g" % value] * 31)


class TestParseCsv:
    def test_first_row(self, tmp_path):
        path = tmp_path / "bench.csv"
        path.write_text(HEADER + "\n" + _row("s002", 1, 1, 0.1) + "\n")
        ds = parse_csv(path)
        s = ds.samples[0]
        assert (s.subject, s.session, s.repetition) == ("s002", 1, 1)
        assert s.vector == approx(np.full(31, 0.1))

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(SchemaError):
            parse_csv(path)

    def test_wrong_column_count(self, tmp_path):
        path = tmp_path / "short.csv"
        short = ",".join(_row("s002", 1, 1, 0.1).split(",")[:-1])
        path.write_text(HEADER + "\n" + short + "\n")
        with pytest.raises(SchemaError, match=":2"):
            parse_csv(path)

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "hdr.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(SchemaError):
            parse_csv(path)

    def test_non_numeric_cell_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        row = _row("s002", 1, 1, 0.1).replace("0.1", "oops", 1)
        path.write_text(HEADER + "\n" + row + "\n")
        with pytest.raises(ValueError, match=":2"):
            parse_csv(path)

    def test_synth_csv_parses(self, tmp_path, small_dataset):
        path = tmp_path / "synth.csv"
        write_benchmark_csv(small_dataset, path)
        ds = parse_csv(path)
        assert len(ds) == len(small_dataset)
        assert ds.subjects == small_dataset.subjects


class TestNormalizedFile:
    def test_roundtrip_full_precision(self, tmp_path, small_dataset):
        path = tmp_path / "ds.kds"
        save_dataset(small_dataset, path)
        back = load_dataset(path)
        assert len(back) == len(small_dataset)
        for a, b in zip(back.samples, small_dataset.samples):
            assert a.subject == b.subject
            assert np.array_equal(a.vector, b.vector)  # bit-exact

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "junk.kds"
        path.write_text("not a dataset\n")
        with pytest.raises(SchemaError):
            load_dataset(path)


class TestFilterOutliers:
    def test_infinite_cut_removes_nothing(self, small_dataset):
        ds, removed = filter_outliers(small_dataset, z_cut=np.inf)
        assert removed == 0
        assert len(ds) == len(small_dataset)

    def test_gross_outlier_removed(self):
        rng = np.random.default_rng(5)
        rows = [KeystrokeSample("s001", 1, i + 1,
                                0.1 + 0.001 * rng.normal(size=31))
                for i in range(30)]
        spiked = np.asarray(rows[-1].vector).copy()
        spiked[3] = 10.0
        rows[-1] = KeystrokeSample("s001", 1, 30, spiked)
        ds, removed = filter_outliers(Dataset.from_samples(rows), z_cut=4.0)
        assert removed == 1
        assert all(s.vector[3] < 1.0 for s in ds.samples)

    def test_matches_brute_force(self, small_dataset):
        filtered, removed = filter_outliers(small_dataset, z_cut=2.5)
        brute = 0
        for subj in small_dataset.subjects:
            mat = np.array([s.vector for s in small_dataset.by_subject(subj)])
            mean, std = mat.mean(axis=0), mat.std(axis=0)
            for row in mat:
                if any(std[i] > 0 and abs(row[i] - mean[i]) / std[i] > 2.5
                       for i in range(31)):
                    brute += 1
        assert removed == brute
        assert len(filtered) == len(small_dataset) - removed


class TestAnomalySplits:
    def test_sizes_and_disjointness(self, small_dataset):
        splits = make_anomaly_splits(small_dataset, train_reps=20, impostor_reps=5)
        assert len(splits) == 5
        for split in splits:
            assert split.train.shape == (20, 31)
            assert split.genuine_test.shape == (20, 31)
            assert split.impostor_test.shape == (4 * 5, 31)

    def test_train_is_first_sessions(self, small_dataset):
        split = make_anomaly_splits(small_dataset, train_reps=20)[0]
        rows = small_dataset.by_subject(split.subject)
        assert np.array_equal(split.train, np.array([s.vector for s in rows[:20]]))

    def test_two_subject_toy(self):
        ds = synth_dataset(n_subjects=2, reps_per_subject=30, seed=3)
        splits = make_anomaly_splits(ds, train_reps=20, impostor_reps=5)
        assert splits[0].impostor_test.shape == (5, 31)

    def test_subject_too_small(self):
        ds = synth_dataset(n_subjects=2, reps_per_subject=30, seed=3)
        with pytest.raises(SubjectTooSmall):
            make_anomaly_splits(ds, train_reps=30)

    def test_deterministic(self, small_dataset):
        a = make_anomaly_splits(small_dataset, train_reps=20)
        b = make_anomaly_splits(small_dataset, train_reps=20)
        assert all(np.array_equal(x.impostor_test, y.impostor_test)
                   for x, y in zip(a, b))


class TestClassSplit:
    def test_counts_for_400(self):
        ds = synth_dataset(n_subjects=2, reps_per_subject=400, seed=9)
        split = make_class_split(ds, seed=0)
        # per subject: 400 * 0.75 = 300 train, 10% of that validation
        assert split.train_x.shape[0] == 2 * 270
        assert split.val_x.shape[0] == 2 * 30
        assert split.test_x.shape[0] == 2 * 100

    def test_same_seed_identical(self, small_dataset):
        a = make_class_split(small_dataset, seed=42)
        b = make_class_split(small_dataset, seed=42)
        assert np.array_equal(a.train_x, b.train_x)
        assert np.array_equal(a.test_y, b.test_y)

    def test_different_seed_differs(self, small_dataset):
        a = make_class_split(small_dataset, seed=1)
        b = make_class_split(small_dataset, seed=2)
        assert not np.array_equal(a.train_x, b.train_x)

    def test_label_map_covers_subjects(self, small_dataset):
        split = make_class_split(small_dataset, seed=0)
        assert sorted(split.label_map.values()) == list(range(len(small_dataset.subjects)))

    def test_partition(self, small_dataset):
        split = make_class_split(small_dataset, seed=0)
        total = (split.train_x.shape[0] + split.val_x.shape[0]
                 + split.test_x.shape[0])
        assert total == len(small_dataset)
        rows = np.vstack([split.train_x, split.val_x, split.test_x])
        unique = np.unique(rows, axis=0)
        assert unique.shape[0] == rows.shape[0]  # disjoint sets


class TestNegativeDataset:
    def test_composition(self, medium_dataset):
        # 8 subjects: 5 known, 3 held out, 10 vectors each in the negative pool
        split = build_negative_dataset(medium_dataset, n_known=5, seed=0,
                                       per_heldout=10)
        assert split.n_classes == 6
        neg_total = sum((split.train_y == 5).sum() + (split.val_y == 5).sum()
                        + (split.test_y == 5).sum() for _ in [0])
        assert neg_total == 30
        assert split.label_map[NEGATIVE_CLASS_LABEL] == 5

    def test_negative_samples_not_from_known(self, medium_dataset):
        split = build_negative_dataset(medium_dataset, n_known=5, seed=0,
                                       per_heldout=10)
        known = medium_dataset.subjects[:5]
        known_rows = {tuple(s.vector) for subj in known
                      for s in medium_dataset.by_subject(subj)}
        for x, y in [(split.train_x, split.train_y), (split.test_x, split.test_y)]:
            for row in x[y == 5]:
                assert tuple(row) not in known_rows

    def test_seeded_repeatability(self, medium_dataset):
        a = build_negative_dataset(medium_dataset, n_known=5, seed=4, per_heldout=10)
        b = build_negative_dataset(medium_dataset, n_known=5, seed=4, per_heldout=10)
        assert np.array_equal(a.train_x, b.train_x)
