import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labelreach import (
    ClassEntry,
    ClassTable,
    DataError,
    EmbeddingRaster,
    GridFormatError,
    GridManifest,
    LabelRaster,
    NODATA,
    read_grid,
    validate_pair,
    write_grid,
)
from labelreach.grid import HEADER_SIZE


def test_header_is_24_bytes(tmp_path):
    r = EmbeddingRaster(np.zeros((1, 1, 1), dtype=np.float32))
    path = tmp_path / "a.grd"
    write_grid(r, path)
    assert path.stat().st_size == 24 + 4
    assert HEADER_SIZE == 24


def test_label_payload_little_endian(tmp_path):
    labels = LabelRaster(np.array([[3, NODATA]], dtype=np.uint16))
    path = tmp_path / "l.grd"
    write_grid(labels, path)
    payload = path.read_bytes()[HEADER_SIZE:]
    assert payload == bytes([0x03, 0x00, 0xFF, 0xFF])


def test_roundtrip_embedding(tmp_path):
    rng = np.random.default_rng(0)
    r = EmbeddingRaster(rng.normal(size=(3, 5, 7)).astype(np.float32))
    path = tmp_path / "e.grd"
    write_grid(r, path)
    back = read_grid(path)
    assert isinstance(back, EmbeddingRaster)
    assert back == r


def test_roundtrip_labels(tmp_path):
    ids = np.array([[0, 1, NODATA], [2, 2, 0]], dtype=np.uint16)
    path = tmp_path / "l.grd"
    write_grid(LabelRaster(ids), path)
    back = read_grid(path)
    assert isinstance(back, LabelRaster)
    assert np.array_equal(back.ids, ids)


def test_write_is_byte_identical(tmp_path):
    rng = np.random.default_rng(1)
    r = EmbeddingRaster(rng.normal(size=(2, 4, 4)).astype(np.float32))
    write_grid(r, tmp_path / "a.grd")
    write_grid(r, tmp_path / "b.grd")
    assert (tmp_path / "a.grd").read_bytes() == (tmp_path / "b.grd").read_bytes()


@settings(max_examples=25, deadline=None)
@given(
    bands=st.integers(1, 4),
    h=st.integers(1, 9),
    w=st.integers(1, 9),
    seed=st.integers(0, 2**31),
)
def test_roundtrip_property(tmp_path_factory, bands, h, w, seed):
    rng = np.random.default_rng(seed)
    r = EmbeddingRaster(rng.normal(size=(bands, h, w)).astype(np.float32))
    path = tmp_path_factory.mktemp("rt") / "r.grd"
    write_grid(r, path)
    assert read_grid(path) == r


def test_bad_magic(tmp_path):
    path = tmp_path / "x.grd"
    path.write_bytes(b"XXXX" + b"\x00" * 24)
    with pytest.raises(GridFormatError, match="not a GRD1 file"):
        read_grid(path)


def test_truncated_payload(tmp_path):
    r = EmbeddingRaster(np.zeros((1, 4, 4), dtype=np.float32))
    path = tmp_path / "t.grd"
    write_grid(r, path)
    path.write_bytes(path.read_bytes()[: HEADER_SIZE + 10])
    with pytest.raises(GridFormatError, match="truncated"):
        read_grid(path)


def test_unsupported_dtype(tmp_path):
    r = EmbeddingRaster(np.zeros((1, 1, 1), dtype=np.float32))
    path = tmp_path / "d.grd"
    write_grid(r, path)
    blob = bytearray(path.read_bytes())
    blob[20] = 9
    path.write_bytes(bytes(blob))
    with pytest.raises(GridFormatError, match="unsupported dtype"):
        read_grid(path)


def test_non_finite_rejected():
    with pytest.raises(DataError, match="finite"):
        EmbeddingRaster(np.array([[[np.nan]]], dtype=np.float32))


def test_validate_pair_ok():
    emb = EmbeddingRaster(np.zeros((8, 64, 64), dtype=np.float32))
    labels = LabelRaster(np.zeros((64, 64), dtype=np.uint16))
    validate_pair(emb, labels)


def test_validate_pair_mismatch():
    emb = EmbeddingRaster(np.zeros((8, 64, 64), dtype=np.float32))
    labels = LabelRaster(np.zeros((64, 32), dtype=np.uint16))
    with pytest.raises(DataError, match="64x64.*32x64"):
        validate_pair(emb, labels)


def test_validate_pair_degenerate_empty():
    emb = EmbeddingRaster(np.zeros((1, 0, 0), dtype=np.float32))
    labels = LabelRaster(np.zeros((0, 0), dtype=np.uint16))
    validate_pair(emb, labels)


def test_class_table_roundtrip(tmp_path):
    table = ClassTable(
        [
            ClassEntry(0, "water", 30, 0.3),
            ClassEntry(2, "forest", 70, 0.7),
        ]
    )
    path = tmp_path / "c.csv"
    table.write_csv(path)
    back = ClassTable.read_csv(path)
    assert back == table


def test_class_table_rejects_unsorted():
    with pytest.raises(DataError, match="ascending"):
        ClassTable([ClassEntry(2, "b", 1, 0.5), ClassEntry(0, "a", 1, 0.5)])


def test_class_table_fraction_sum_checked():
    with pytest.raises(DataError, match="fractions"):
        ClassTable([ClassEntry(0, "a", 10, 0.4), ClassEntry(1, "b", 10, 0.4)])


def test_manifest_roundtrip_and_validate(tmp_path):
    emb = EmbeddingRaster(np.zeros((2, 3, 3), dtype=np.float32))
    labels = LabelRaster(np.zeros((3, 3), dtype=np.uint16))
    write_grid(emb, tmp_path / "e.grd")
    write_grid(labels, tmp_path / "l.grd")
    ClassTable([ClassEntry(0, "only", 9, 1.0)]).write_csv(tmp_path / "c.csv")
    m = GridManifest(embedding_path="e.grd", label_path="l.grd", class_table_path="c.csv")
    m.write_json(tmp_path / "m.json")
    back = GridManifest.read_json(tmp_path / "m.json")
    assert back == m
    back.validate(tmp_path)
