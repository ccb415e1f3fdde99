import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ckamatch.errors import FormatError, IdLookupError, ValidationError
from ckamatch.store import (
    EmbeddingSet,
    PairingManifest,
    align_by_manifest,
    concat_columns,
    load_embeddings,
    load_manifest,
    save_embeddings,
    save_manifest,
)


def make_set(data, ids=None, tag="image"):
    data = np.asarray(data, dtype=float)
    if ids is None:
        ids = [f"id{i}" for i in range(data.shape[1])]
    return EmbeddingSet(data=data, ids=tuple(ids), modality_tag=tag)


class TestEmbeddingSetInvariants:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValidationError):
            make_set(np.ones((2, 2)), ids=["a", "a"])

    def test_id_count_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            make_set(np.ones((2, 3)), ids=["a", "b"])

    def test_nan_rejected(self):
        data = np.ones((2, 2))
        data[0, 1] = np.nan
        with pytest.raises(ValidationError):
            make_set(data)

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            make_set(np.ones((2, 0)), ids=[])

    def test_data_is_immutable(self):
        emb = make_set(np.ones((2, 2)))
        with pytest.raises(ValueError):
            emb.data[0, 0] = 5.0


class TestSaveLoad:
    def test_round_trip_bit_exact(self, tmp_path):
        emb = make_set([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], ids=["a", "b", "c"])
        path = tmp_path / "x.emb"
        save_embeddings(emb, path)
        loaded = load_embeddings(path)
        assert loaded.ids == emb.ids
        assert loaded.modality_tag == emb.modality_tag
        assert loaded.data.tobytes() == emb.data.tobytes()

    def test_file_layout(self, tmp_path):
        emb = make_set([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], ids=["a", "b", "c"])
        path = tmp_path / "x.emb"
        save_embeddings(emb, path)
        blob = path.read_bytes()
        assert blob[:4] == b"EMB1"
        (header_len,) = struct.unpack("<I", blob[4:8])
        header = json.loads(blob[8 : 8 + header_len])
        assert header == {"dim": 2, "count": 3, "modality_tag": "image", "ids": ["a", "b", "c"]}
        payload = blob[8 + header_len :]
        assert len(payload) == 2 * 3 * 8 == 48
        assert len(blob) == 4 + 4 + header_len + 48
        # column-major: first 16 bytes are column 0
        col0 = np.frombuffer(payload[:16], dtype="<f8")
        np.testing.assert_array_equal(col0, [1.0, 4.0])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.emb"
        path.write_bytes(b"XXXX" + b"\x00" * 32)
        with pytest.raises(FormatError):
            load_embeddings(path)

    def test_truncated_payload(self, tmp_path):
        emb = make_set(np.arange(20, dtype=float).reshape(2, 10))
        path = tmp_path / "x.emb"
        save_embeddings(emb, path)
        blob = path.read_bytes()
        # header declares 10 columns; drop one column of payload
        path.write_bytes(blob[: len(blob) - 2 * 8])
        with pytest.raises(FormatError):
            load_embeddings(path)

    def test_nan_payload_rejected_on_load(self, tmp_path):
        emb = make_set(np.ones((2, 2)))
        path = tmp_path / "x.emb"
        save_embeddings(emb, path)
        blob = bytearray(path.read_bytes())
        blob[-8:] = struct.pack("<d", float("nan"))
        path.write_bytes(bytes(blob))
        with pytest.raises(ValidationError):
            load_embeddings(path)

    @settings(max_examples=25, deadline=None)
    @given(
        dim=st.integers(1, 8),
        count=st.integers(1, 8),
        seed=st.integers(0, 2**31),
    )
    def test_round_trip_property(self, tmp_path_factory, dim, count, seed):
        rng = np.random.default_rng(seed)
        emb = make_set(rng.standard_normal((dim, count)) * rng.uniform(1e-8, 1e8))
        path = tmp_path_factory.mktemp("emb") / "p.emb"
        save_embeddings(emb, path)
        loaded = load_embeddings(path)
        assert loaded.data.tobytes() == emb.data.tobytes()
        assert loaded.ids == emb.ids


class TestManifest:
    def test_round_trip(self, tmp_path):
        manifest = PairingManifest(pairs=(("a", "x"), ("b", "y")), role="base")
        path = tmp_path / "m.json"
        save_manifest(manifest, path)
        assert load_manifest(path) == manifest

    def test_duplicate_side_rejected(self):
        with pytest.raises(ValidationError):
            PairingManifest(pairs=(("a", "x"), ("a", "y")))

    def test_bad_role(self):
        with pytest.raises(ValidationError):
            PairingManifest(pairs=(("a", "x"),), role="other")


class TestAlignByManifest:
    def setup_method(self):
        self.left = make_set([[1.0, 2.0, 3.0]], ids=["a", "b", "c"])
        self.right = make_set([[10.0, 20.0, 30.0]], ids=["x", "y", "z"], tag="text")

    def test_identity(self):
        manifest = PairingManifest(pairs=(("a", "x"), ("b", "y"), ("c", "z")))
        al, ar = align_by_manifest(self.left, self.right, manifest)
        np.testing.assert_array_equal(al.data, self.left.data)
        np.testing.assert_array_equal(ar.data, self.right.data)

    def test_reversed(self):
        manifest = PairingManifest(pairs=(("c", "z"), ("b", "y"), ("a", "x")))
        al, ar = align_by_manifest(self.left, self.right, manifest)
        np.testing.assert_array_equal(al.data, [[3.0, 2.0, 1.0]])
        np.testing.assert_array_equal(ar.data, [[30.0, 20.0, 10.0]])
        assert al.ids == ("c", "b", "a")

    def test_unknown_id(self):
        manifest = PairingManifest(pairs=(("zz", "x"),))
        with pytest.raises(IdLookupError, match="zz"):
            align_by_manifest(self.left, self.right, manifest)

    def test_pure_column_selection(self):
        manifest = PairingManifest(pairs=(("b", "y"), ("c", "x")))
        al, ar = align_by_manifest(self.left, self.right, manifest)
        # multiset of selected columns preserved
        assert sorted(al.data[0]) == [2.0, 3.0]
        assert sorted(ar.data[0]) == [10.0, 20.0]


def test_concat_columns_keeps_ids():
    a = make_set([[1.0, 2.0]], ids=["a", "b"])
    b = make_set([[3.0]], ids=["c"])
    both = concat_columns(a, b)
    assert both.ids == ("a", "b", "c")
    np.testing.assert_array_equal(both.data, [[1.0, 2.0, 3.0]])
