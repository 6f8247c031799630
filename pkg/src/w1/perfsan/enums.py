"""Enumeration types for w1-perfsan.

Text enums inherit from `StrEnum` so class names, method names and rule ids
serialize as the exact strings that are interned into the log and accepted
on the command line.
"""

from enum import IntEnum, StrEnum


class Opcode(IntEnum):
    """Wire opcode stored in bits [0, 4) of a command's first word.

    Attributes:
        REGISTER_STRING: Bind a string id to UTF-8 text
        REGISTER_TRACE_NODE: Add one node to the stack-trace trie
        REGISTER_CODE_SEGMENT: Describe a loaded code region
        REGULAR_EVENT: Full-width method event (5 words)
        COMPACT_EVENT: Reduced-width method event (3 words)
    """

    REGISTER_STRING = 1
    REGISTER_TRACE_NODE = 2
    REGISTER_CODE_SEGMENT = 3
    REGULAR_EVENT = 4
    COMPACT_EVENT = 5


class ShimClass(StrEnum):
    """Class names logged by the instrumented containers.

    Attributes:
        VECTOR: GrowableArray
        STRING: TextBuffer
        MAP: OrderedMap
        UNORDERED_MAP: HashedMap
        SHARED_PTR: SharedHandle
    """

    VECTOR = "vector"
    STRING = "string"
    MAP = "map"
    UNORDERED_MAP = "unordered_map"
    SHARED_PTR = "shared_ptr"

    @property
    def inline_threshold(self) -> int:
        """Bytes/elements held without a heap allocation."""
        return 15 if self is ShimClass.STRING else 0

    @property
    def is_container(self) -> bool:
        return self is not ShimClass.SHARED_PTR

    @property
    def is_sequence(self) -> bool:
        return self in (ShimClass.VECTOR, ShimClass.STRING)

    @property
    def is_map(self) -> bool:
        return self in (ShimClass.MAP, ShimClass.UNORDERED_MAP)


class ShimMethod(StrEnum):
    """Method names logged by the instrumented containers."""

    CTOR = "ctor"
    COPY_CTOR = "copy_ctor"
    MOVE_CTOR = "move_ctor"
    DTOR = "dtor"
    PUSH_BACK = "push_back"
    EMPLACE_BACK = "emplace_back"
    INSERT = "insert"
    RESERVE = "reserve"
    REALLOC = "realloc"
    SHRINK_TO_FIT = "shrink_to_fit"
    SUBSCRIPT = "subscript"
    COUNT = "count"
    FIND = "find"
    ITER_ORDERED = "iter_ordered"
    APPEND = "append"
    INCREF = "incref"
    DECREF = "decref"

    @property
    def is_construction(self) -> bool:
        return self in (ShimMethod.CTOR, ShimMethod.COPY_CTOR, ShimMethod.MOVE_CTOR)

    @property
    def is_lookup(self) -> bool:
        return self in (ShimMethod.COUNT, ShimMethod.FIND, ShimMethod.SUBSCRIPT)

    @property
    def is_allocation(self) -> bool:
        """Events whose payload is (new capacity, old capacity)."""
        return self in (
            ShimMethod.REALLOC,
            ShimMethod.RESERVE,
            ShimMethod.SHRINK_TO_FIT,
        )


class RuleId(StrEnum):
    """Stable identifiers of the diagnostics catalog, in catalog order.

    Attributes:
        SHORT_LIFETIME: Allocating instance destroyed shortly after creation
        GROWTH_REALLOC: Vector/string reallocated repeatedly while growing
        DATA_SHIFT: Inserts into the low part of a vector shift many elements
        PUSH_BACK_COPY: push_back of a copied element instead of emplace
        SHRINK_TO_FIT: Vector destroyed with large unused capacity
        VALUE_COPY: Allocating container copied (passed by value)
        SMALL_VECTOR: Vectors at a site always stay small but allocate
        UNIQUE_SHARED: Shared handle never shared
        DUPLICATE_STRING: Same string content held by many instances
        UNORDERED_MAP: Ordered map never traversed in order
        DOUBLE_LOOKUP: Lookup of a key immediately repeated
        UNUSED_INSTANCE: Constructed and destroyed with nothing in between
        HIGH_REFCOUNT: Shared handle with a very high reference count
    """

    SHORT_LIFETIME = "short-lifetime"
    GROWTH_REALLOC = "growth-realloc"
    DATA_SHIFT = "data-shift"
    PUSH_BACK_COPY = "push-back-copy"
    SHRINK_TO_FIT = "shrink-to-fit"
    VALUE_COPY = "value-copy"
    SMALL_VECTOR = "small-vector"
    UNIQUE_SHARED = "unique-shared"
    DUPLICATE_STRING = "duplicate-string"
    UNORDERED_MAP = "unordered-map"
    DOUBLE_LOOKUP = "double-lookup"
    UNUSED_INSTANCE = "unused-instance"
    HIGH_REFCOUNT = "high-refcount"

    @property
    def ordinal(self) -> int:
        """1-based position in the catalog."""
        return list(RuleId).index(self) + 1


class HistogramKind(StrEnum):
    """Histogram families rendered by the report tool.

    Attributes:
        SIZE: Container size at destruction, power-of-two buckets
        LIFETIME: floor(log2(lifetime ticks)) buckets
        REFCOUNT: Max shared-handle refcount, power-of-two buckets
        STRING_DUP: Number of strings sharing a content hash
    """

    SIZE = "size"
    LIFETIME = "lifetime"
    REFCOUNT = "refcount"
    STRING_DUP = "string-dup"
