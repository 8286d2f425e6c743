"""Discrete membership signatures identifying the polytope a point falls in.

A forest signature is the vector of leaf ids the point reaches, one per
tree. A net signature is one activation bit per hidden-layer node, 1 iff
the node's pre-activation input is non-negative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

FOREST = "forest"
NET = "net"


@dataclass(frozen=True)
class MembershipSignature:
    kind: str
    forest_leaves: np.ndarray | None = None
    net_activations: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        if self.kind == FOREST:
            if self.forest_leaves is None or self.net_activations is not None:
                raise InvalidInputError("forest signature requires forest_leaves only")
            leaves = np.ascontiguousarray(self.forest_leaves, dtype=np.int64)
            if leaves.ndim != 1 or leaves.size == 0:
                raise InvalidInputError("forest_leaves must be a non-empty vector")
            leaves.flags.writeable = False
            object.__setattr__(self, "forest_leaves", leaves)
        elif self.kind == NET:
            if self.net_activations is None or self.forest_leaves is not None:
                raise InvalidInputError("net signature requires net_activations only")
            layers = []
            for bits in self.net_activations:
                arr = np.ascontiguousarray(bits, dtype=np.uint8)
                if arr.ndim != 1 or arr.size == 0:
                    raise InvalidInputError("each layer bit-vector must be a non-empty vector")
                if not np.isin(arr, (0, 1)).all():
                    raise InvalidInputError("activation bits must be 0 or 1")
                arr.flags.writeable = False
                layers.append(arr)
            if not layers:
                raise InvalidInputError("net signature needs at least one hidden layer")
            object.__setattr__(self, "net_activations", tuple(layers))
        else:
            raise InvalidInputError(f"unknown signature kind: {self.kind!r}")

    @property
    def tree_count(self) -> int:
        if self.kind != FOREST:
            raise InvalidInputError("tree_count is defined for forest signatures only")
        return self.forest_leaves.shape[0]

    @property
    def layer_widths(self) -> tuple[int, ...]:
        if self.kind != NET:
            raise InvalidInputError("layer_widths is defined for net signatures only")
        return tuple(a.shape[0] for a in self.net_activations)

    def key(self) -> bytes:
        """Hashable identity: two signatures share a key iff they are identical."""
        if self.kind == FOREST:
            return b"f" + self.forest_leaves.tobytes()
        head = np.array(self.layer_widths, dtype=np.int64).tobytes()
        return b"n" + head + b"".join(a.tobytes() for a in self.net_activations)
