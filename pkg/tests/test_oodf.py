import numpy as np
import pytest

from marginlab.errors import FormatError
from marginlab.numeric import make_rng
from marginlab.oodf import (FLAG_NA, EmbeddingSet, read_embedding_set,
                            write_oodf)


def sample_set(n=7, d=3, flags=True):
    rng = make_rng(99)
    return EmbeddingSet(
        features=rng.normal(size=(n, d)),
        labels=rng.integers(0, 4, size=n),
        ood_flags=rng.integers(0, 2, size=n).astype(bool) if flags else None,
    )


def test_binary_roundtrip(tmp_path):
    ds = sample_set()
    path = tmp_path / "x.oodf"
    write_oodf(ds, path)
    back = read_embedding_set(path)
    np.testing.assert_array_equal(back.features,
                                  ds.features.astype(np.float32).astype(np.float64))
    np.testing.assert_array_equal(back.labels, ds.labels)
    np.testing.assert_array_equal(back.ood_flags, ds.ood_flags)


def test_flags_not_applicable_roundtrip(tmp_path):
    ds = sample_set(flags=False)
    path = tmp_path / "x.oodf"
    write_oodf(ds, path)
    assert read_embedding_set(path).ood_flags is None
    raw = path.read_bytes()
    assert raw[-ds.n:] == bytes([FLAG_NA]) * ds.n


def test_write_is_deterministic(tmp_path):
    ds = sample_set()
    p1, p2 = tmp_path / "a.oodf", tmp_path / "b.oodf"
    write_oodf(ds, p1)
    write_oodf(ds, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_truncated_file_reports_offset(tmp_path):
    ds = sample_set()
    path = tmp_path / "x.oodf"
    write_oodf(ds, path)
    raw = path.read_bytes()
    short = tmp_path / "short.oodf"
    short.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(FormatError, match="truncated at byte"):
        read_embedding_set(short)


def test_bad_version_rejected(tmp_path):
    ds = sample_set()
    path = tmp_path / "x.oodf"
    write_oodf(ds, path)
    raw = bytearray(path.read_bytes())
    raw[4] = 0
    bad = tmp_path / "v0.oodf"
    bad.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="version 0"):
        read_embedding_set(bad)


def test_trailing_bytes_rejected(tmp_path):
    ds = sample_set()
    path = tmp_path / "x.oodf"
    write_oodf(ds, path)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(FormatError, match="trailing"):
        read_embedding_set(path)


def test_csv_input_accepted(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("label,flag,f0,f1\n"
                    "3,0,1.5,-2.0\n"
                    "9,1,0.25,0.75\n")
    ds = read_embedding_set(path)
    np.testing.assert_array_equal(ds.labels, [3, 9])
    np.testing.assert_array_equal(ds.ood_flags, [False, True])
    np.testing.assert_allclose(ds.features, [[1.5, -2.0], [0.25, 0.75]])


def test_csv_na_flags(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("label,flag,f0\n1,255,0.5\n2,255,1.5\n")
    assert read_embedding_set(path).ood_flags is None


def test_csv_bad_header(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(FormatError, match="header"):
        read_embedding_set(path)


def test_csv_bad_field_count(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("label,flag,f0,f1\n1,0,0.5\n")
    with pytest.raises(FormatError, match="line 2"):
        read_embedding_set(path)


def test_non_finite_features_rejected():
    with pytest.raises(ValueError, match="finite"):
        EmbeddingSet(features=np.array([[np.inf, 0.0]]), labels=np.array([1]))
