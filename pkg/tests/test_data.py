import numpy as np
import pytest

from kdx.data import Dataset, load_csv, save_csv
from kdx.errors import IngestionError, InvalidInputError


def test_dataset_invariants():
    ds = Dataset(np.zeros((3, 2)), np.array([0, 1, 0]))
    assert ds.class_count == 2
    assert ds.sample_count == 3 and ds.feature_count == 2


def test_dataset_rejects_empty():
    with pytest.raises(InvalidInputError):
        Dataset(np.zeros((0, 2)), np.zeros(0, dtype=int))


def test_dataset_rejects_nonfinite():
    with pytest.raises(InvalidInputError):
        Dataset(np.array([[0.0, np.nan]]), np.array([0]))


def test_dataset_rejects_label_out_of_range():
    with pytest.raises(InvalidInputError):
        Dataset(np.zeros((2, 1)), np.array([0, 3]), class_count=2)


def test_dataset_priors():
    ds = Dataset(np.zeros((4, 1)), np.array([0, 0, 0, 1]))
    assert np.allclose(ds.priors(), [0.75, 0.25])


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    ds = Dataset(rng.normal(size=(20, 3)), rng.integers(0, 3, size=20))
    path = tmp_path / "data.csv"
    save_csv(ds, path)
    back = load_csv(path)
    assert np.array_equal(back.features, ds.features)
    assert np.array_equal(back.labels, ds.labels)
    assert back.class_count == ds.class_count


def test_csv_rejects_non_numeric_features(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,label\n1.0,x,0\n2.0,y,1\n")
    with pytest.raises(IngestionError) as err:
        load_csv(path)
    assert "b" in err.value.columns


def test_csv_rejects_non_integer_labels(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,label\n1.0,0.5\n2.0,1\n")
    with pytest.raises(IngestionError):
        load_csv(path)


def test_csv_rejects_empty(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(IngestionError):
        load_csv(path)
