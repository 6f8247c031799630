"""Prefix tree of call stacks.

Stacks are keyed outermost frame first, so traces that share callers share
nodes. Node 0 is the implicit root; every other node has a parent chain
that ends at 0. A full trace is identified by the id of its last node.
"""

from collections.abc import Sequence

from w1.perfsan.errors import IdSpaceExhaustedError, UnknownTraceError
from w1.perfsan.wirefmt import NODE_ID_BITS, ROOT_NODE_ID, RegisterTraceNode

MAX_NODE_ID = (1 << NODE_ID_BITS) - 1


class StackTrie:
    """Stack-trace trie shared by the logger (writer) and the trace db (reader)."""

    def __init__(self, max_node_id: int = MAX_NODE_ID) -> None:
        self.max_node_id = max_node_id
        self._nodes: dict[int, tuple[int, int]] = {}
        self._children: dict[int, dict[int, int]] = {}
        self._next_id = 1

    def __len__(self) -> int:
        return len(self._nodes)

    def __contains__(self, node_id: object) -> bool:
        return node_id == ROOT_NODE_ID or node_id in self._nodes

    @property
    def nodes(self) -> dict[int, tuple[int, int]]:
        """Copy of node_id -> (parent_id, frame)."""
        return dict(self._nodes)

    def insert(self, frames: Sequence[int]) -> tuple[int, list[RegisterTraceNode]]:
        """Walk or extend the trie along ``frames`` (outermost first).

        Returns:
            The leaf node id and one registration per newly created node, the
            last of which is flagged as a leaf.

        Raises:
            ValueError: ``frames`` is empty.
            IdSpaceExhaustedError: The 24-bit node id space is used up. The
                trie is left unchanged.
        """
        if not frames:
            raise ValueError("a trace needs at least one frame")

        node = ROOT_NODE_ID
        depth = 0
        while depth < len(frames):
            child = self._children.get(node, {}).get(frames[depth])
            if child is None:
                break
            node = child
            depth += 1

        missing = len(frames) - depth
        if missing and self._next_id + missing - 1 > self.max_node_id:
            raise IdSpaceExhaustedError("trace node id space exhausted")

        created: list[RegisterTraceNode] = []
        for i in range(depth, len(frames)):
            node_id = self._next_id
            self._next_id += 1
            self.add_node(node_id, node, frames[i])
            created.append(
                RegisterTraceNode(
                    node_id=node_id,
                    parent_id=node,
                    is_leaf=i == len(frames) - 1,
                    frame=frames[i],
                )
            )
            node = node_id
        return node, created

    def add_node(self, node_id: int, parent_id: int, frame: int) -> None:
        """Register a node decoded from a log."""
        if node_id == ROOT_NODE_ID or node_id in self._nodes:
            raise ValueError(f"node {node_id} cannot be registered")
        if parent_id not in self:
            raise UnknownTraceError(parent_id)
        self._nodes[node_id] = (parent_id, frame)
        self._children.setdefault(parent_id, {})[frame] = node_id
        self._next_id = max(self._next_id, node_id + 1)

    def resolve(self, node_id: int) -> list[int]:
        """Frames from ``node_id`` up to the root, innermost first.

        Raises:
            UnknownTraceError: ``node_id`` was never registered.
        """
        if node_id not in self:
            raise UnknownTraceError(node_id)
        frames: list[int] = []
        while node_id != ROOT_NODE_ID:
            node_id, frame = self._nodes[node_id]
            frames.append(frame)
        return frames
