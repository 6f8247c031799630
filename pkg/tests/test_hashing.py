"""Tests for w1.perfsan.hashing module."""

from hypothesis import given
from hypothesis import strategies as st

from w1.perfsan.hashing import canonical_key_bytes, fnv1a_64, hash32, key_hash


class TestFnv1a:
    """Tests for the FNV-1a 64 hash."""

    def test_known_values(self) -> None:
        assert fnv1a_64(b"") == 0xCBF29CE484222325
        assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C

    def test_hash32_is_low_half(self) -> None:
        assert hash32(b"a") == 0x8601EC8C

    @given(st.binary(max_size=64))
    def test_fits_widths(self, data: bytes) -> None:
        assert 0 <= fnv1a_64(data) < 1 << 64
        assert 0 <= hash32(data) < 1 << 32


class TestCanonicalKeyBytes:
    """Tests for map key canonicalization."""

    def test_strings_and_bytes(self) -> None:
        assert canonical_key_bytes("k") == b"s:k"
        assert canonical_key_bytes(b"k") == b"b:k"

    def test_type_tag_separates_equal_renderings(self) -> None:
        assert canonical_key_bytes(1) != canonical_key_bytes("1")
        assert canonical_key_bytes((1, 2)) != canonical_key_bytes([1, 2])

    def test_equal_numeric_keys_encode_alike(self) -> None:
        assert canonical_key_bytes(True) == canonical_key_bytes(1) == b"int:1"
        assert key_hash(2.0) == key_hash(2)
        assert key_hash((True, "a")) == key_hash((1, "a"))
        assert key_hash(frozenset({True, 2})) == key_hash(frozenset({1, 2}))
        assert key_hash(1.5) != key_hash(1)

    def test_mapping_keys_are_sorted(self) -> None:
        assert canonical_key_bytes({"b": 1, "a": 2}) == canonical_key_bytes(
            {"a": 2, "b": 1}
        )

    @given(st.one_of(st.integers(), st.text(), st.tuples(st.integers(), st.text())))
    def test_key_hash_is_deterministic(self, key: object) -> None:
        assert key_hash(key) == key_hash(key)
        assert key_hash(key) == hash32(canonical_key_bytes(key))
