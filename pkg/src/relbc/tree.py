"""Complete n-ary tree topology: node addressing, coloring, liveness.

Nodes are strings over the digit alphabet ``'0'..'n-1'`` (``'0'`` = left,
``'1'`` = right for the binary tree); the root is the empty string.  Depth
equals string length, and lexicographic order of equal-length strings is
the left-to-right order of a level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Optional

ROOT = ""

ALIVE = "alive"
DEAD = "dead"
UNQUERIED = "unqueried"


def depth(v: str) -> int:
    return len(v)


def parent(v: str) -> str:
    if not v:
        raise ValueError("the root has no parent")
    return v[:-1]


def brother(v: str) -> str:
    """The other child of v's parent (binary trees only)."""
    if not v:
        raise ValueError("the root has no brother")
    t = v[-1]
    if t not in "01":
        raise ValueError("brother() is defined for binary trees; use siblings()")
    return v[:-1] + ("1" if t == "0" else "0")


def siblings(v: str, arity: int) -> list[str]:
    if not v:
        raise ValueError("the root has no siblings")
    return [v[:-1] + str(t) for t in range(arity) if str(t) != v[-1]]


def child(v: str, t: int, arity: int = 2) -> str:
    if not 0 <= t < arity:
        raise ValueError(f"child index {t} out of range for arity {arity}")
    return v + str(t)


def children(v: str, arity: int = 2) -> list[str]:
    return [v + str(t) for t in range(arity)]


def nodes_at_depth(j: int, arity: int = 2) -> Iterator[str]:
    """All depth-j nodes in left-to-right order."""
    if j == 0:
        yield ROOT
        return
    from itertools import product

    digits = [str(t) for t in range(arity)]
    for combo in product(digits, repeat=j):
        yield "".join(combo)


def from_lr(s: str) -> str:
    """Convenience parser for binary node labels written with l/r letters."""
    table = {"l": "0", "r": "1"}
    return "".join(table[ch] for ch in s)


def to_lr(v: str) -> str:
    table = {"0": "l", "1": "r"}
    return "".join(table[ch] for ch in v) if v else "root"


class Coloring:
    """Station assignment for every node of the depth-k complete tree.

    With ``n_stations`` stations the tree has arity ``n_stations - 1`` and
    every internal node's family {v} + children(v) must use all station
    colors exactly once.  Colors are 1-based.
    """

    def __init__(self, k: int, n_stations: int, assignment: dict[str, int]):
        if k < 1:
            raise ValueError("depth k must be >= 1")
        if n_stations < 3:
            raise ValueError("need at least 3 stations")
        self.k = k
        self.n_stations = n_stations
        self.arity = n_stations - 1
        self.assignment = assignment
        self.validate()

    def color(self, v: str) -> int:
        return self.assignment[v]

    def validate(self) -> None:
        all_colors = set(range(1, self.n_stations + 1))
        for j in range(self.k):
            for v in nodes_at_depth(j, self.arity):
                family = {self.assignment[v]}
                family.update(self.assignment[c] for c in children(v, self.arity))
                if family != all_colors:
                    raise ValueError(
                        f"coloring violated at node {v!r}: family colors {family}"
                    )

    @classmethod
    def canonical(cls, k: int, n_stations: int = 3) -> "Coloring":
        """Root gets color 1; children of v get the colors != c(v) in
        increasing order, left to right."""
        arity = n_stations - 1
        assignment = {ROOT: 1}
        frontier = [ROOT]
        for _ in range(k):
            nxt = []
            for v in frontier:
                missing = sorted(set(range(1, n_stations + 1)) - {assignment[v]})
                for t, color in enumerate(missing):
                    w = v + str(t)
                    assignment[w] = color
                    nxt.append(w)
            frontier = nxt
        return cls(k, n_stations, assignment)

    def child_colors(self, color: int) -> list[int]:
        """Colors of the children of any node with the given color, in
        left-to-right order (canonical rule: increasing)."""
        return sorted(set(range(1, self.n_stations + 1)) - {color})


@lru_cache(maxsize=64)
def make_coloring(k: int, n_stations: int = 3) -> Coloring:
    # colorings are read-only after construction, so sharing one instance
    # per (k, n_stations) across runs is safe and skips the O(2^k) rebuild
    return Coloring.canonical(k, n_stations)


@dataclass
class Liveness:
    """Per-node status map; nodes never touched by the receiver stay
    unqueried."""

    status: dict[str, str] = field(default_factory=dict)

    def set(self, v: str, st: str) -> None:
        if st not in (ALIVE, DEAD, UNQUERIED):
            raise ValueError(f"unknown status {st!r}")
        self.status[v] = st

    def get(self, v: str) -> str:
        return self.status.get(v, UNQUERIED)

    def is_alive(self, v: str) -> bool:
        return self.status.get(v) == ALIVE

    def snapshot(self) -> "Liveness":
        return Liveness(dict(self.status))


def leftmost_alive(j: int, live: Liveness, arity: int = 2) -> Optional[str]:
    """Leftmost depth-j node whose whole root path is alive, or None.

    Depth-first with backtracking: a branch that goes dead above depth j
    does not hide alive nodes further right.
    """
    if not live.is_alive(ROOT):
        return None
    stack = [ROOT]
    while stack:
        v = stack.pop()
        if depth(v) == j:
            return v
        for t in reversed(range(arity)):
            w = v + str(t)
            if live.is_alive(w):
                stack.append(w)
    return None


def accessible_set(v: str, coloring: Coloring, acc_delay: int = 2) -> set[str]:
    """Nodes whose challenge values are available to the agent answering v.

    Everything at least ``acc_delay`` rounds old is globally known (the
    signal had time to reach every station); same-color history is local
    and always known.  The committed bit is tracked separately and is not
    part of this set.  Only internal nodes carry challenges.
    """
    dv = depth(v)
    acc: set[str] = set()
    limit = min(dv - 1, coloring.k - 1)
    for j in range(limit + 1):
        if j <= dv - acc_delay:
            acc.update(nodes_at_depth(j, coloring.arity))
        else:
            acc.update(
                w
                for w in nodes_at_depth(j, coloring.arity)
                if coloring.color(w) == coloring.color(v)
            )
    return acc
