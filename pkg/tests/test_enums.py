"""Tests for w1.perfsan.enums module."""

import pytest

from w1.perfsan.enums import HistogramKind, Opcode, RuleId, ShimClass, ShimMethod


class TestOpcode:
    """Tests for Opcode enum."""

    def test_wire_values(self) -> None:
        assert [int(op) for op in Opcode] == [1, 2, 3, 4, 5]

    def test_compact_event_value(self) -> None:
        assert Opcode.COMPACT_EVENT == 5


class TestShimClass:
    """Tests for ShimClass enum."""

    def test_logged_names(self) -> None:
        assert [str(c) for c in ShimClass] == [
            "vector",
            "string",
            "map",
            "unordered_map",
            "shared_ptr",
        ]

    def test_inline_threshold(self) -> None:
        assert ShimClass.STRING.inline_threshold == 15
        assert ShimClass.VECTOR.inline_threshold == 0

    def test_shared_ptr_is_not_a_container(self) -> None:
        assert not ShimClass.SHARED_PTR.is_container
        assert ShimClass.MAP.is_container

    def test_families(self) -> None:
        assert ShimClass.STRING.is_sequence
        assert not ShimClass.MAP.is_sequence
        assert ShimClass.UNORDERED_MAP.is_map
        assert not ShimClass.VECTOR.is_map


class TestShimMethod:
    """Tests for ShimMethod enum."""

    def test_vocabulary_size(self) -> None:
        assert len(ShimMethod) == 17

    def test_string_comparison(self) -> None:
        assert ShimMethod.PUSH_BACK == "push_back"

    @pytest.mark.parametrize(
        "method", [ShimMethod.CTOR, ShimMethod.COPY_CTOR, ShimMethod.MOVE_CTOR]
    )
    def test_construction(self, method: ShimMethod) -> None:
        assert method.is_construction

    def test_lookups(self) -> None:
        lookups = {m for m in ShimMethod if m.is_lookup}
        assert lookups == {ShimMethod.COUNT, ShimMethod.FIND, ShimMethod.SUBSCRIPT}

    def test_allocations(self) -> None:
        assert ShimMethod.REALLOC.is_allocation
        assert not ShimMethod.PUSH_BACK.is_allocation


class TestRuleId:
    """Tests for RuleId enum."""

    def test_thirteen_rules(self) -> None:
        assert len(RuleId) == 13

    def test_ordinal_is_catalog_position(self) -> None:
        assert RuleId.SHORT_LIFETIME.ordinal == 1
        assert RuleId.HIGH_REFCOUNT.ordinal == 13

    def test_from_cli_string(self) -> None:
        assert RuleId("double-lookup") is RuleId.DOUBLE_LOOKUP

    def test_invalid_value(self) -> None:
        with pytest.raises(ValueError):
            RuleId("growth")


class TestHistogramKind:
    """Tests for HistogramKind enum."""

    def test_values(self) -> None:
        assert [str(k) for k in HistogramKind] == [
            "size",
            "lifetime",
            "refcount",
            "string-dup",
        ]
