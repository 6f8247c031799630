"""Instrumented containers.

Each shim behaves like its plain counterpart (``list``, ``str``, ``dict``,
a sorted ``dict``, a reference-counted pointer) and reports the calls that
matter for the diagnostics rules to an `EventLogger`.

Payload conventions:

- sequences log ``ctor``/``copy_ctor``/``move_ctor``/``push_back``/
  ``emplace_back``/``insert``/``append``/``dtor`` with a=size, b=capacity;
- ``realloc``, ``reserve`` and ``shrink_to_fit`` log a=new capacity,
  b=old capacity. Growth out of a buffer that owns no heap memory is an
  allocation without a free and is logged as an implicit ``reserve`` (c=1);
  every later growth is a ``realloc``;
- map lookups log a=key hash; ``count``/``find`` b=1 if the key is present,
  ``subscript``/``insert`` b=size after the call;
- shared handles log a=refcount after the transition.

Destruction is explicit (`destroy`, or leaving a ``with`` block); ``__del__``
is the fallback. Exactly one ``dtor`` is logged per instance.
"""

from __future__ import annotations

import bisect
import contextlib
from collections.abc import (
    Callable,
    Iterable,
    Iterator,
    Mapping,
    MutableMapping,
    MutableSequence,
)
from collections.abc import ItemsView as _ItemsViewBase
from collections.abc import ValuesView as _ValuesViewBase
from types import TracebackType
from typing import Any, ClassVar, Generic, Self, TypeVar, overload

from w1.perfsan.enums import ShimClass, ShimMethod
from w1.perfsan.hashing import hash32, key_hash
from w1.perfsan.logger import EventLogger, active_logger

E = TypeVar("E")
K = TypeVar("K")
V = TypeVar("V")
T = TypeVar("T")

INLINE_TEXT_BYTES = ShimClass.STRING.inline_threshold


class _Instrumented:
    """Logging plumbing shared by every shim."""

    shim_class: ClassVar[ShimClass]

    def __init__(self, logger: EventLogger | None) -> None:
        self._logger = logger if logger is not None else active_logger()
        self._destroyed = False

    @property
    def address(self) -> int:
        """Instance address used to key the instance's timeline."""
        return id(self)

    @property
    def destroyed(self) -> bool:
        return self._destroyed

    def _log(self, method: ShimMethod, a: int = 0, b: int = 0, c: int = 0) -> None:
        if self._logger is not None:
            self._logger.log_event(self.shim_class, method, self.address, a, b, c)

    def _dtor_payload(self) -> tuple[int, int, int]:
        return (0, 0, 0)

    def destroy(self) -> None:
        """End the instance's lifetime; logs ``dtor`` once."""
        if self._destroyed:
            return
        self._destroyed = True
        self._log(ShimMethod.DTOR, *self._dtor_payload())

    def __enter__(self) -> Self:
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        self.destroy()

    def __del__(self) -> None:
        if getattr(self, "_destroyed", True):
            return
        with contextlib.suppress(Exception):
            self.destroy()


def _grown_capacity(capacity: int, needed: int) -> int:
    return max(needed, capacity * 2, 1)


# ---------------------------------------------------------------------------
# GrowableArray
# ---------------------------------------------------------------------------


class GrowableArray(_Instrumented, MutableSequence[E]):
    """Vector-like sequence with an explicit, doubling capacity.

    Capacity starts at the constructor's ``capacity`` (or the initial element
    count) and doubles whenever a push needs room, beginning at 1 when the
    array owns no buffer.
    """

    shim_class = ShimClass.VECTOR

    def __init__(
        self,
        iterable: Iterable[E] = (),
        *,
        capacity: int = 0,
        logger: EventLogger | None = None,
    ) -> None:
        super().__init__(logger)
        self._items: list[E] = list(iterable)
        if capacity < 0:
            raise ValueError("capacity must be >= 0")
        self._capacity = max(capacity, len(self._items))
        self._log(ShimMethod.CTOR, len(self._items), self._capacity)

    @classmethod
    def _from_state(
        cls,
        items: list[E],
        capacity: int,
        method: ShimMethod,
        logger: EventLogger | None,
        source_size: int,
    ) -> GrowableArray[E]:
        new = cls.__new__(cls)
        _Instrumented.__init__(new, logger)
        new._items = items
        new._capacity = capacity
        new._log(method, source_size, capacity)
        return new

    @property
    def capacity(self) -> int:
        return self._capacity

    def _dtor_payload(self) -> tuple[int, int, int]:
        return (len(self._items), self._capacity, 0)

    def _ensure(self, needed: int) -> None:
        if needed <= self._capacity:
            return
        old = self._capacity
        self._capacity = _grown_capacity(old, needed)
        if old == 0:
            self._log(ShimMethod.RESERVE, self._capacity, old, 1)
        else:
            self._log(ShimMethod.REALLOC, self._capacity, old)

    # -- instrumented operations -----------------------------------------

    def push_back(self, element: E, *, was_copied: bool = False) -> None:
        """Append ``element``; ``was_copied`` marks a copy-constructed element."""
        self._ensure(len(self._items) + 1)
        self._items.append(element)
        size = len(self._items)
        self._log(ShimMethod.PUSH_BACK, size, self._capacity, int(was_copied))

    def emplace_back(self, factory: Callable[..., E], *args: Any, **kwargs: Any) -> E:
        """Construct an element in place from ``factory(*args, **kwargs)``."""
        element = factory(*args, **kwargs)
        self._ensure(len(self._items) + 1)
        self._items.append(element)
        self._log(ShimMethod.EMPLACE_BACK, len(self._items), self._capacity, 0)
        return element

    def append(self, value: E) -> None:
        self.push_back(value)

    def insert(self, index: int, value: E) -> None:
        """Insert before ``index`` with ``list.insert`` index semantics.

        Logs c = number of elements shifted towards the end.
        """
        size = len(self._items)
        position = index + size if index < 0 else index
        position = min(max(position, 0), size)
        self._ensure(size + 1)
        self._items.insert(position, value)
        self._log(ShimMethod.INSERT, size + 1, self._capacity, size - position)

    def reserve(self, capacity: int) -> None:
        old = self._capacity
        self._capacity = max(old, capacity)
        self._log(ShimMethod.RESERVE, self._capacity, old, 0)

    def shrink_to_fit(self) -> None:
        old = self._capacity
        self._capacity = len(self._items)
        self._log(ShimMethod.SHRINK_TO_FIT, self._capacity, old)

    def copy(self) -> GrowableArray[E]:
        """Copy-construct: the copy's capacity equals its size."""
        size = len(self._items)
        return self._from_state(
            list(self._items), size, ShimMethod.COPY_CTOR, self._logger, size
        )

    __copy__ = copy

    def take(self) -> GrowableArray[E]:
        """Move-construct: steal the buffer, leaving this array empty."""
        items, capacity = self._items, self._capacity
        self._items, self._capacity = [], 0
        return self._from_state(
            items, capacity, ShimMethod.MOVE_CTOR, self._logger, len(items)
        )

    # -- sequence protocol -----------------------------------------------

    @overload
    def __getitem__(self, index: int) -> E: ...

    @overload
    def __getitem__(self, index: slice) -> list[E]: ...

    def __getitem__(self, index: int | slice) -> E | list[E]:
        if isinstance(index, slice):
            return self._items[index]
        value = self._items[index]
        self._log(ShimMethod.SUBSCRIPT, index % len(self._items), len(self._items))
        return value

    @overload
    def __setitem__(self, index: int, value: E) -> None: ...

    @overload
    def __setitem__(self, index: slice, value: Iterable[E]) -> None: ...

    def __setitem__(self, index: int | slice, value: Any) -> None:
        if isinstance(index, slice):
            self._items[index] = value
            if len(self._items) > self._capacity:
                self._ensure(len(self._items))
            return
        self._items[index] = value
        self._log(ShimMethod.SUBSCRIPT, index % len(self._items), len(self._items))

    def __delitem__(self, index: int | slice) -> None:
        del self._items[index]

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[E]:
        return iter(self._items)

    def __contains__(self, value: object) -> bool:
        return value in self._items

    def clear(self) -> None:
        self._items.clear()

    def pop(self, index: int = -1) -> E:
        return self._items.pop(index)

    def to_list(self) -> list[E]:
        return list(self._items)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, GrowableArray):
            return self._items == other._items
        if isinstance(other, list):
            return self._items == other
        return NotImplemented

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"GrowableArray({self._items!r}, capacity={self._capacity})"


# ---------------------------------------------------------------------------
# TextBuffer
# ---------------------------------------------------------------------------


class TextBuffer(_Instrumented):
    """String-like byte buffer with small-string storage.

    Up to 15 bytes live in the inline buffer; longer contents move to a heap
    buffer whose capacity doubles as it grows. The destructor reports the
    size, capacity and 32-bit content hash.
    """

    shim_class = ShimClass.STRING

    def __init__(
        self,
        text: str | bytes = "",
        *,
        logger: EventLogger | None = None,
    ) -> None:
        super().__init__(logger)
        self._data = bytearray(_as_bytes(text))
        self._capacity = max(INLINE_TEXT_BYTES, len(self._data))
        self._log(ShimMethod.CTOR, len(self._data), self._capacity)

    @property
    def capacity(self) -> int:
        return self._capacity

    @property
    def size(self) -> int:
        return len(self._data)

    @property
    def is_inline(self) -> bool:
        return self._capacity <= INLINE_TEXT_BYTES

    @property
    def data(self) -> bytes:
        return bytes(self._data)

    @property
    def value(self) -> str:
        return self._data.decode("utf-8")

    def content_hash(self) -> int:
        return hash32(bytes(self._data))

    def _dtor_payload(self) -> tuple[int, int, int]:
        return (len(self._data), self._capacity, self.content_hash())

    def _ensure(self, needed: int) -> None:
        if needed <= self._capacity:
            return
        old = self._capacity
        self._capacity = _grown_capacity(old, needed)
        if old <= INLINE_TEXT_BYTES:
            self._log(ShimMethod.RESERVE, self._capacity, old, 1)
        else:
            self._log(ShimMethod.REALLOC, self._capacity, old)

    def append(self, text: str | bytes) -> Self:
        chunk = _as_bytes(text)
        self._ensure(len(self._data) + len(chunk))
        self._data += chunk
        self._log(ShimMethod.APPEND, len(self._data), self._capacity, len(chunk))
        return self

    def __iadd__(self, text: str | bytes) -> Self:
        return self.append(text)

    def reserve(self, capacity: int) -> None:
        old = self._capacity
        self._capacity = max(old, capacity)
        self._log(ShimMethod.RESERVE, self._capacity, old, 0)

    def shrink_to_fit(self) -> None:
        old = self._capacity
        self._capacity = max(INLINE_TEXT_BYTES, len(self._data))
        self._log(ShimMethod.SHRINK_TO_FIT, self._capacity, old)

    def clear(self) -> None:
        self._data.clear()

    def copy(self) -> TextBuffer:
        """Copy-construct; the copy allocates exactly what it needs."""
        new = TextBuffer.__new__(TextBuffer)
        _Instrumented.__init__(new, self._logger)
        new._data = bytearray(self._data)
        new._capacity = max(INLINE_TEXT_BYTES, len(new._data))
        new._log(ShimMethod.COPY_CTOR, len(self._data), new._capacity)
        return new

    __copy__ = copy

    def __len__(self) -> int:
        return len(self._data)

    def __str__(self) -> str:
        return self.value

    def __bytes__(self) -> bytes:
        return bytes(self._data)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, TextBuffer):
            return self._data == other._data
        if isinstance(other, str):
            return self._data == other.encode("utf-8")
        if isinstance(other, (bytes, bytearray)):
            return self._data == other
        return NotImplemented

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"TextBuffer({bytes(self._data)!r}, capacity={self._capacity})"


def _as_bytes(text: str | bytes | bytearray) -> bytes:
    return text.encode("utf-8") if isinstance(text, str) else bytes(text)


# ---------------------------------------------------------------------------
# Maps
# ---------------------------------------------------------------------------

_MISSING: Any = object()


class _ItemsView(_ItemsViewBase[K, V]):
    def __iter__(self) -> Iterator[tuple[K, V]]:
        yield from self._mapping._iter_items()  # type: ignore[attr-defined]


class _ValuesView(_ValuesViewBase[V]):
    def __iter__(self) -> Iterator[V]:
        for _, value in self._mapping._iter_items():  # type: ignore[attr-defined]
            yield value


class _MapShim(_Instrumented, MutableMapping[K, V]):
    """Behavior shared by `OrderedMap` and `HashedMap`.

    ``m[k]`` follows ``dict`` semantics, or ``defaultdict`` semantics when a
    ``default_factory`` is given (a missing key is inserted, like C++
    ``operator[]``). Reads and assignments through ``m[k]`` both log
    ``subscript`` with a=key hash, b=size after.
    """

    def __init__(
        self,
        items: Mapping[K, V] | Iterable[tuple[K, V]] = (),
        *,
        default_factory: Callable[[], V] | None = None,
        logger: EventLogger | None = None,
    ) -> None:
        super().__init__(logger)
        self.default_factory = default_factory
        self._store: dict[K, V] = {}
        for key, value in dict(items).items():
            self._store_set(key, value)
        self._log(ShimMethod.CTOR, len(self._store))

    # storage hooks overridden by OrderedMap
    def _store_set(self, key: K, value: V) -> None:
        self._store[key] = value

    def _store_del(self, key: K) -> None:
        del self._store[key]

    def _keys(self) -> Iterator[K]:
        return iter(self._store)

    def _traversal_begins(self) -> None:
        """Hook called when a traversal starts."""

    def _iter_items(self) -> Iterator[tuple[K, V]]:
        self._traversal_begins()
        for key in list(self._keys()):
            yield key, self._store[key]

    def _dtor_payload(self) -> tuple[int, int, int]:
        return (len(self._store), 0, 0)

    # -- instrumented lookups -------------------------------------------

    def __getitem__(self, key: K) -> V:
        present = key in self._store
        if not present and self.default_factory is not None:
            self._store_set(key, self.default_factory())
            present = True
        self._log(ShimMethod.SUBSCRIPT, key_hash(key), len(self._store))
        if not present:
            raise KeyError(key)
        return self._store[key]

    def __setitem__(self, key: K, value: V) -> None:
        self._store_set(key, value)
        self._log(ShimMethod.SUBSCRIPT, key_hash(key), len(self._store))

    def __contains__(self, key: object) -> bool:
        present = key in self._store
        self._log(ShimMethod.COUNT, key_hash(key), int(present))
        return present

    def count(self, key: K) -> int:
        """C++-style membership count: 1 if present else 0."""
        return int(key in self)

    def get(self, key: K, default: Any = None) -> Any:
        present = key in self._store
        self._log(ShimMethod.FIND, key_hash(key), int(present))
        return self._store[key] if present else default

    find = get

    # -- uninstrumented mapping protocol --------------------------------

    def __delitem__(self, key: K) -> None:
        if key not in self._store:
            raise KeyError(key)
        self._store_del(key)

    def pop(self, key: K, default: Any = _MISSING) -> Any:
        if key in self._store:
            value = self._store[key]
            self._store_del(key)
            return value
        if default is _MISSING:
            raise KeyError(key)
        return default

    def setdefault(self, key: K, default: Any = None) -> Any:
        if key not in self._store:
            self._store_set(key, default)
        return self._store[key]

    def clear(self) -> None:
        for key in list(self._store):
            self._store_del(key)

    def __iter__(self) -> Iterator[K]:
        self._traversal_begins()
        return iter(list(self._keys()))

    def __len__(self) -> int:
        return len(self._store)

    def items(self) -> _ItemsView[K, V]:  # type: ignore[override]
        return _ItemsView(self)

    def values(self) -> _ValuesView[V]:  # type: ignore[override]
        return _ValuesView(self)

    def to_dict(self) -> dict[K, V]:
        return {key: self._store[key] for key in self._keys()}

    def _copy_into(self, new: _MapShim[K, V]) -> None:
        _Instrumented.__init__(new, self._logger)
        new.default_factory = self.default_factory
        new._store = {}
        for key in self._keys():
            new._store_set(key, self._store[key])
        new._log(ShimMethod.COPY_CTOR, len(self._store))

    def __eq__(self, other: object) -> bool:
        if isinstance(other, _MapShim):
            return self._store == other._store
        if isinstance(other, Mapping):
            return self._store == dict(other)
        return NotImplemented

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_dict()!r})"


class HashedMap(_MapShim[K, V]):
    """Hash map (``unordered_map``); iteration is in insertion order and unlogged."""

    shim_class = ShimClass.UNORDERED_MAP

    def copy(self) -> HashedMap[K, V]:
        new: HashedMap[K, V] = HashedMap.__new__(HashedMap)
        self._copy_into(new)
        return new

    __copy__ = copy


class OrderedMap(_MapShim[K, V]):
    """Key-ordered map (``map``); every traversal logs ``iter_ordered`` once."""

    shim_class = ShimClass.MAP

    def __init__(
        self,
        items: Mapping[K, V] | Iterable[tuple[K, V]] = (),
        *,
        default_factory: Callable[[], V] | None = None,
        logger: EventLogger | None = None,
    ) -> None:
        self._sorted_keys: list[K] = []
        super().__init__(items, default_factory=default_factory, logger=logger)

    def _store_set(self, key: K, value: V) -> None:
        if key not in self._store:
            bisect.insort(self._sorted_keys, key)  # type: ignore[type-var]
        self._store[key] = value

    def _store_del(self, key: K) -> None:
        del self._store[key]
        index = bisect.bisect_left(self._sorted_keys, key)  # type: ignore[type-var]
        del self._sorted_keys[index]

    def _keys(self) -> Iterator[K]:
        return iter(self._sorted_keys)

    def _traversal_begins(self) -> None:
        self._log(ShimMethod.ITER_ORDERED, len(self._store))

    def copy(self) -> OrderedMap[K, V]:
        new: OrderedMap[K, V] = OrderedMap.__new__(OrderedMap)
        new._sorted_keys = []
        self._copy_into(new)
        return new

    __copy__ = copy


# ---------------------------------------------------------------------------
# SharedHandle
# ---------------------------------------------------------------------------


class _ControlBlock(Generic[T]):
    __slots__ = ("payload", "refcount")

    def __init__(self, payload: T) -> None:
        self.payload: T | None = payload
        self.refcount = 1


class SharedHandle(_Instrumented, Generic[T]):
    """Reference-counted handle (``shared_ptr``).

    All handles that share a payload share one control block; its address
    keys the timeline, so one timeline covers the object's whole lifetime.
    ``copy`` increments the count (``incref``), ``release`` decrements it
    (``decref``) and the last release logs ``dtor`` with a=1.
    """

    shim_class = ShimClass.SHARED_PTR

    def __init__(self, payload: T, *, logger: EventLogger | None = None) -> None:
        super().__init__(logger)
        self._block: _ControlBlock[T] = _ControlBlock(payload)
        self._log(ShimMethod.CTOR, 1)

    @property
    def address(self) -> int:
        return id(self._block)

    @property
    def use_count(self) -> int:
        return 0 if self._destroyed else self._block.refcount

    def get(self) -> T:
        if self._destroyed:
            raise ValueError("handle already released")
        return self._block.payload  # type: ignore[return-value]

    @property
    def value(self) -> T:
        return self.get()

    def copy(self) -> SharedHandle[T]:
        if self._destroyed:
            raise ValueError("cannot copy a released handle")
        new: SharedHandle[T] = SharedHandle.__new__(SharedHandle)
        _Instrumented.__init__(new, self._logger)
        new._block = self._block
        self._block.refcount += 1
        new._log(ShimMethod.INCREF, self._block.refcount)
        return new

    __copy__ = copy

    def release(self) -> None:
        """Drop this handle; the last one destroys the payload."""
        if self._destroyed:
            return
        self._destroyed = True
        block = self._block
        block.refcount -= 1
        if block.refcount > 0:
            self._log(ShimMethod.DECREF, block.refcount)
        else:
            self._log(ShimMethod.DTOR, 1)
            block.payload = None

    destroy = release

    def __repr__(self) -> str:
        state = "released" if self._destroyed else f"use_count={self._block.refcount}"
        return f"SharedHandle({state})"
