"""Classical value of restricted-input CHSH-type games over F_q.

Two players receive x (uniform on a subset S of F_q) and y (from a given
distribution with max probability p) and must output a, b with
a + b = x*y in F_q.  The exact classical value is found by exhaustive
search over deterministic strategies; the analytic ceiling is
p + sqrt(2/|S|).

Input distributions are exact rationals so that the max-entry check and
the reported value carry no float drift.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Sequence

from .field import Field
from .sim import ResourceGuardError

DEFAULT_BUDGET = 5_000_000


@dataclass(frozen=True)
class GameSpec:
    """One game instance: modulus, first player's input support, second
    player's input distribution."""

    field: Field
    support: tuple[int, ...]
    y_dist: tuple[Fraction, ...]

    def __post_init__(self):
        q = self.field.q
        if not self.support:
            raise ValueError("input support must be nonempty")
        if sorted(set(self.support)) != sorted(self.support) or any(
            not 0 <= x < q for x in self.support
        ):
            raise ValueError("support must be distinct residues mod q")
        if len(self.y_dist) != q:
            raise ValueError(f"y distribution needs one entry per residue ({q})")
        if any(p < 0 for p in self.y_dist) or sum(self.y_dist) != 1:
            raise ValueError("y distribution must be a probability vector")

    @property
    def max_y_prob(self) -> Fraction:
        return max(self.y_dist)

    @classmethod
    def uniform(cls, field: Field, support: Sequence[int] | None = None) -> "GameSpec":
        support = tuple(support) if support is not None else tuple(range(field.q))
        w = Fraction(1, field.q)
        return cls(field, support, tuple(w for _ in range(field.q)))


@dataclass
class GameValue:
    value: Fraction
    f: dict[int, int]  # first player's answer table over the support
    g: dict[int, int]  # second player's table over supp(y_dist)

    def to_json(self, spec: GameSpec) -> str:
        bound = chsh_bound(float(spec.max_y_prob), len(spec.support))
        return json.dumps(
            {
                "q": spec.field.q,
                "S": list(spec.support),
                "p": str(spec.max_y_prob),
                "value": str(self.value),
                "value_float": float(self.value),
                "bound": bound,
                "gap": bound - float(self.value),
                "f": self.f,
                "g": self.g,
            },
            indent=2,
        )


def win_probability(spec: GameSpec, f: dict[int, int], g: dict[int, int]) -> Fraction:
    """Exact success probability of a fixed deterministic strategy pair."""
    field = spec.field
    total = Fraction(0)
    px = Fraction(1, len(spec.support))
    for x in spec.support:
        for y, py in enumerate(spec.y_dist):
            if py == 0:
                continue
            if field.add(f[x], g[y]) == field.mul(x, y):
                total += px * py
    return total


def chsh_value(spec: GameSpec, budget: int = DEFAULT_BUDGET) -> GameValue:
    """Exact classical value by exhausting the first player's tables.

    For a fixed f the second player's optimum decouples per input y:
    g(y) = argmax_c sum over x of [c = x*y - f(x)], so only the q**|S|
    f-tables are enumerated.  Ties break lexicographically for
    reproducible optimal strategies.
    """
    field = spec.field
    q = field.q
    supp_y = [y for y, py in enumerate(spec.y_dist) if py > 0]
    cost = q ** len(spec.support) * len(spec.support) * len(supp_y)
    if cost > budget:
        raise ResourceGuardError(
            f"game enumeration cost {cost} exceeds budget {budget}"
        )
    px = Fraction(1, len(spec.support))
    best: GameValue | None = None
    for f_tab in product(range(q), repeat=len(spec.support)):
        f = dict(zip(spec.support, f_tab))
        value = Fraction(0)
        g: dict[int, int] = {}
        for y in supp_y:
            scores = [Fraction(0)] * q
            for x in spec.support:
                scores[field.sub(field.mul(x, y), f[x])] += px
            c_best = max(range(q), key=lambda c: (scores[c], -c))
            g[y] = c_best
            value += spec.y_dist[y] * scores[c_best]
        if best is None or value > best.value:
            best = GameValue(value, f, g)
    assert best is not None
    assert win_probability(spec, best.f, best.g) == best.value
    return best


def chsh_bound(p: float, s_size: int) -> float:
    """Analytic ceiling on the classical value: p + sqrt(2/|S|)."""
    if not 0 < p <= 1:
        raise ValueError(f"max input probability must be in (0,1], got {p}")
    if s_size < 1:
        raise ValueError("support size must be >= 1")
    return p + math.sqrt(2 / s_size)
