"""Canonical Merkle commitment over a result set.

The tree is built over the sorted, de-duplicated list of drop ids (UTF-8 byte
order), so any two parties holding the same id set compute the same root.
Leaves and interior nodes use distinct hash domains, which kills
second-preimage tricks that reinterpret an interior node as a leaf.  When a
level has an odd node count the trailing node is paired with itself.

A membership path is the ordered list of (side, sibling) steps from leaf to
root; `side` records where the sibling sits.  For n leaves every path has
exactly ceil(log2(n)) steps (zero for a single leaf), which keeps path sizes
and verification cost uniform across the whole tree.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

from .canon import lp_encode

DOMAIN_LEAF = "SBPP-LEAF"
DOMAIN_NODE = "SBPP-NODE"

SIDE_LEFT = 0  # sibling is the left child
SIDE_RIGHT = 1  # sibling is the right child


class MerkleError(ValueError):
    pass


class NotAMemberError(MerkleError):
    pass


def leaf_hash(drop_id: str) -> bytes:
    return hashlib.sha256(lp_encode([DOMAIN_LEAF, drop_id])).digest()


def node_hash(left: bytes, right: bytes) -> bytes:
    if len(left) != 32 or len(right) != 32:
        raise MerkleError("interior nodes take 32-byte children")
    return hashlib.sha256(lp_encode([DOMAIN_NODE, left, right])).digest()


@dataclass(frozen=True)
class PathStep:
    side: int  # SIDE_LEFT or SIDE_RIGHT, position of the sibling
    sibling: bytes


@dataclass(frozen=True)
class MerklePath:
    steps: tuple[PathStep, ...]

    def serialize(self) -> bytes:
        if len(self.steps) > 255:
            raise MerkleError("path too deep to serialize")
        out = bytearray([len(self.steps)])
        for step in self.steps:
            if step.side not in (SIDE_LEFT, SIDE_RIGHT):
                raise MerkleError("invalid path step side")
            if len(step.sibling) != 32:
                raise MerkleError("sibling hash must be 32 bytes")
            out.append(step.side)
            out += step.sibling
        return bytes(out)

    @classmethod
    def parse(cls, raw: bytes) -> "MerklePath":
        if len(raw) < 1:
            raise MerkleError("empty path frame")
        count = raw[0]
        if len(raw) != 1 + count * 33:
            raise MerkleError("path frame length mismatch")
        steps = []
        pos = 1
        for _ in range(count):
            side = raw[pos]
            if side not in (SIDE_LEFT, SIDE_RIGHT):
                raise MerkleError("invalid path step side")
            steps.append(PathStep(side, raw[pos + 1 : pos + 33]))
            pos += 33
        return cls(tuple(steps))


class MerkleTree:
    """Tree over sorted unique ids; keeps all levels for path extraction."""

    def __init__(self, ids: list[str]):
        if not ids:
            raise MerkleError("cannot commit to an empty result set")
        ordered = sorted(set(ids), key=lambda s: s.encode("utf-8"))
        if ordered != list(ids):
            raise MerkleError("result set ids must be unique and sorted")
        self.ids = list(ids)
        self._index = {drop_id: i for i, drop_id in enumerate(ids)}
        levels = [[leaf_hash(drop_id) for drop_id in ids]]
        while len(levels[-1]) > 1:
            prev = levels[-1]
            nxt = []
            for i in range(0, len(prev), 2):
                left = prev[i]
                right = prev[i + 1] if i + 1 < len(prev) else prev[i]
                nxt.append(node_hash(left, right))
            levels.append(nxt)
        self._levels = levels

    @property
    def root(self) -> bytes:
        return self._levels[-1][0]

    @property
    def depth(self) -> int:
        return len(self._levels) - 1

    def prove_membership(self, drop_id: str) -> MerklePath:
        if drop_id not in self._index:
            raise NotAMemberError(f"{drop_id!r} is not in the committed set")
        index = self._index[drop_id]
        steps = []
        for level in self._levels[:-1]:
            sibling_index = index ^ 1
            if sibling_index >= len(level):
                sibling_index = index  # odd tail: node is its own sibling
            side = SIDE_LEFT if sibling_index < index else SIDE_RIGHT
            steps.append(PathStep(side, level[sibling_index]))
            index //= 2
        return MerklePath(tuple(steps))


def build_tree(ids: list[str]) -> MerkleTree:
    return MerkleTree(ids)


def verify_membership(root: bytes, drop_id: str, path: MerklePath) -> bool:
    """Recompute the root from the leaf and path; True iff it matches."""
    if len(root) != 32:
        return False
    node = leaf_hash(drop_id)
    for step in path.steps:
        if step.side not in (SIDE_LEFT, SIDE_RIGHT) or len(step.sibling) != 32:
            return False
        if step.side == SIDE_LEFT:
            node = node_hash(step.sibling, node)
        else:
            node = node_hash(node, step.sibling)
    return node == root


def expected_depth(n: int) -> int:
    """Path length for an n-leaf tree: ceil(log2 n), 0 for a single leaf."""
    if n < 1:
        raise MerkleError("tree size must be positive")
    return math.ceil(math.log2(n)) if n > 1 else 0
