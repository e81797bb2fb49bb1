"""
Set/tuple machinery and hypercube-permutation enumeration.

Sets are represented as sorted tuples throughout so that iteration order is
stable; "unordered" products are realised as sorted sequences.

A hypercube permutation of ``D*t`` points split into ``t`` dimensions of ``D``
points each is an ordering in which all points of one dimension sit at
positions that are congruent modulo ``t``.  A circular hypercube permutation
is a rotation class of those; its canonical representative is the rotation
that starts with the smallest point label.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

DEFAULT_MAX_POINTS = 12


class InvalidInputError(ValueError):
    """Raised when arguments violate an operation's preconditions."""


class EnumerationLimitError(RuntimeError):
    """Raised when an enumeration would exceed the configured point cap."""


@dataclass(frozen=True)
class DimensionPartition:
    """Points partitioned into ``t`` disjoint dimensions of ``D`` points.

    Parameters
    ----------
    groups : sequence of sequences of int
        One group of point labels per dimension.  Group order defines the
        dimension index; labels inside a group are stored sorted.
    """

    groups: tuple[tuple[int, ...], ...]
    _dim_of: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        groups = tuple(tuple(sorted(int(u) for u in g)) for g in self.groups)
        if not groups or not groups[0]:
            raise InvalidInputError("a partition needs at least one non-empty dimension")
        size = len(groups[0])
        if any(len(g) != size for g in groups):
            raise InvalidInputError("every dimension must hold the same number of points")
        dim_of = {}
        for k, g in enumerate(groups):
            for u in g:
                if u in dim_of:
                    raise InvalidInputError(f"point {u} appears in more than one dimension")
                dim_of[u] = k
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "_dim_of", dim_of)

    @classmethod
    def standard(cls, D: int, t: int) -> "DimensionPartition":
        """Points ``0..D*t-1`` with dimension ``i = {u : u // D == i}``."""
        if D < 1 or t < 1:
            raise InvalidInputError("D and t must be positive")
        return cls(tuple(tuple(range(i * D, (i + 1) * D)) for i in range(t)))

    @property
    def point_count_per_dim(self) -> int:
        return len(self.groups[0])

    @property
    def dim_count(self) -> int:
        return len(self.groups)

    @property
    def points(self) -> tuple[int, ...]:
        return tuple(sorted(self._dim_of))

    def dim_of(self, u: int) -> int:
        try:
            return self._dim_of[u]
        except KeyError:
            raise InvalidInputError(f"point {u} is not in the partition") from None


def unordered_product(sets: Sequence[Iterable[int]]) -> list[tuple[int, ...]]:
    """All sets ``{a_0, ..., a_{m-1}}`` with ``a_i`` drawn from ``sets[i]``.

    The inputs must be pairwise disjoint.  Each result is a sorted tuple and
    the list is in lexicographic order.
    """
    sets = [sorted(set(s)) for s in sets]
    seen: set[int] = set()
    for s in sets:
        if seen.intersection(s):
            raise InvalidInputError("unordered_product requires pairwise disjoint sets")
        seen.update(s)
    return sorted(tuple(sorted(combo)) for combo in itertools.product(*sets))


def k_subsets(S: Iterable[int], s: int) -> list[tuple[int, ...]]:
    """All size-``s`` subsets of ``S`` as sorted tuples, lexicographically."""
    items = sorted(set(S))
    if s < 1 or s > len(items):
        raise InvalidInputError(f"subset size {s} outside 1..{len(items)}")
    return list(itertools.combinations(items, s))


def is_hypercube_permutation(p: Sequence[int], part: DimensionPartition) -> bool:
    """True iff same-dimension points of ``p`` sit at positions congruent mod ``t``."""
    if len(p) != len(part.points) or set(p) != set(part.points):
        raise InvalidInputError("permutation does not cover exactly the partition's points")
    t = part.dim_count
    residue = {}
    for pos, u in enumerate(p):
        k = part.dim_of(u)
        if residue.setdefault(k, pos % t) != pos % t:
            return False
    return True


def iter_hypercube_permutations(part: DimensionPartition,
                                prefix: Sequence[int] = ()) -> Iterator[tuple[int, ...]]:
    """Yield hypercube permutations extending ``prefix``, in lexicographic order.

    Backtracking over positions: the first point placed at residue class
    ``r = pos mod t`` fixes the dimension owning that class.
    """
    t = part.dim_count
    points = part.points
    n = len(points)
    owner: list[Optional[int]] = [None] * t
    owned: set[int] = set()
    used: set[int] = set()
    order: list[int] = []

    def place(u: int) -> bool:
        r = len(order) % t
        k = part.dim_of(u)
        if u in used:
            return False
        if owner[r] is None:
            if k in owned:
                return False
            owner[r] = k
            owned.add(k)
        elif owner[r] != k:
            return False
        used.add(u)
        order.append(u)
        return True

    def unplace():
        u = order.pop()
        used.discard(u)
        r = len(order) % t
        # the class owner is released when its first slot is vacated
        if len(order) < t:
            owned.discard(owner[r])
            owner[r] = None

    for u in prefix:
        if not place(u):
            return

    def rec():
        if len(order) == n:
            yield tuple(order)
            return
        for u in points:
            if place(u):
                yield from rec()
                unplace()

    yield from rec()


def _check_cap(part: DimensionPartition, max_points: Optional[int]):
    n = len(part.points)
    if max_points is not None and n > max_points:
        raise EnumerationLimitError(
            f"{n} points exceeds the enumeration cap of {max_points}; "
            "use hcb_count/circ_count for closed-form sizes")


def enumerate_hypercube_permutations(part: DimensionPartition,
                                     max_points: Optional[int] = DEFAULT_MAX_POINTS
                                     ) -> list[tuple[int, ...]]:
    """All ``(D!)^t t!`` hypercube permutations of ``part``, lexicographically."""
    _check_cap(part, max_points)
    return list(iter_hypercube_permutations(part))


def enumerate_circular_hypercube_permutations(part: DimensionPartition,
                                              max_points: Optional[int] = DEFAULT_MAX_POINTS
                                              ) -> list[tuple[int, ...]]:
    """One representative per rotation class: the rotation led by the minimum label."""
    _check_cap(part, max_points)
    return list(iter_hypercube_permutations(part, prefix=(part.points[0],)))


def rotate(p: Sequence[int], shift: int) -> tuple[int, ...]:
    """``[p(shift), p(shift+1), ...]`` with wrap-around."""
    n = len(p)
    return tuple(p[(shift + i) % n] for i in range(n))


def canonical_rotation(p: Sequence[int]) -> tuple[int, ...]:
    return rotate(p, list(p).index(min(p)))


def cyclic_slice(p: Sequence[int], start: int, stop: int) -> tuple[int, ...]:
    """Positions ``start..stop`` inclusive, 0-based, wrapping modulo ``len(p)``.

    An empty tuple is returned when ``stop < start``.
    """
    n = len(p)
    return tuple(p[i % n] for i in range(start, stop + 1))


def hcb_count(D: int, t: int) -> int:
    """Number of hypercube permutations, ``(D!)^t * t!``."""
    return math.factorial(D) ** t * math.factorial(t)


def circ_count(D: int, t: int) -> int:
    """Number of circular hypercube permutations, ``(D!)^t (t-1)! / D``."""
    return math.factorial(D) ** t * math.factorial(t - 1) // D
