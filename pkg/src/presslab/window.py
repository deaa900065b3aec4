"""Rectangular windows in Z^d and their K-boundaries."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

GroupElement = tuple  # tuple[int, ...], a lattice translation


def _as_coords(v, d=None) -> tuple:
    if isinstance(v, (int, np.integer)):
        if d is None:
            d = 1
        return (int(v),) * d
    out = tuple(int(x) for x in v)
    if d is not None and len(out) != d:
        raise ValueError(f"expected {d} coordinates, got {len(out)}")
    return out


@dataclass(frozen=True)
class BoxWindow:
    """Axis-aligned box ``[lower, upper]`` in Z^d, inclusive on both ends."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = _as_coords(self.lower)
        hi = _as_coords(self.upper, len(lo))
        if len(lo) == 0:
            raise ValueError("dimension must be >= 1")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"empty box: lower={lo} upper={hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, d: int, lo: int, hi: int) -> "BoxWindow":
        return cls((lo,) * d, (hi,) * d)

    @classmethod
    def interval(cls, lo: int, hi: int) -> "BoxWindow":
        return cls((lo,), (hi,))

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def shape(self) -> tuple:
        return tuple(b - a + 1 for a, b in zip(self.lower, self.upper))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=object))

    def __len__(self) -> int:
        return self.size

    def __contains__(self, g) -> bool:
        g = _as_coords(g, self.d)
        return all(a <= x <= b for a, x, b in zip(self.lower, g, self.upper))

    def __iter__(self) -> Iterator[tuple]:
        ranges = [range(a, b + 1) for a, b in zip(self.lower, self.upper)]
        return iter(itertools.product(*ranges))

    def sites(self) -> np.ndarray:
        """All sites in lexicographic order (last coordinate fastest), shape (|F|, d)."""
        grids = np.meshgrid(
            *[np.arange(a, b + 1) for a, b in zip(self.lower, self.upper)], indexing="ij"
        )
        return np.stack([g.ravel() for g in grids], axis=1)

    def index_of(self, sites) -> np.ndarray:
        """Flat lexicographic index of each site (rows of ``sites``) inside this box."""
        sites = np.atleast_2d(np.asarray(sites, dtype=np.int64))
        rel = sites - np.asarray(self.lower)
        if np.any(rel < 0) or np.any(rel >= np.asarray(self.shape)):
            raise ValueError("site outside window")
        return np.ravel_multi_index(tuple(rel.T), self.shape)

    def translate(self, g) -> "BoxWindow":
        g = _as_coords(g, self.d)
        return BoxWindow(
            tuple(a + x for a, x in zip(self.lower, g)),
            tuple(b + x for b, x in zip(self.upper, g)),
        )

    def inflate(self, c: int) -> "BoxWindow":
        if c < 0:
            raise ValueError("inflation radius must be >= 0")
        return BoxWindow(tuple(a - c for a in self.lower), tuple(b + c for b in self.upper))

    def minkowski(self, other: "BoxWindow") -> "BoxWindow":
        """The box ``{a + b : a in self, b in other}``."""
        self._check(other)
        return BoxWindow(
            tuple(a + b for a, b in zip(self.lower, other.lower)),
            tuple(a + b for a, b in zip(self.upper, other.upper)),
        )

    def erode(self, other: "BoxWindow") -> "BoxWindow | None":
        """The box ``{g : g + other ⊆ self}``, or None when empty."""
        self._check(other)
        lo = tuple(a - k for a, k in zip(self.lower, other.lower))
        hi = tuple(b - k for b, k in zip(self.upper, other.upper))
        if any(x > y for x, y in zip(lo, hi)):
            return None
        return BoxWindow(lo, hi)

    def hull(self, other: "BoxWindow") -> "BoxWindow":
        self._check(other)
        return BoxWindow(
            tuple(min(a, b) for a, b in zip(self.lower, other.lower)),
            tuple(max(a, b) for a, b in zip(self.upper, other.upper)),
        )

    def intersect(self, other: "BoxWindow") -> "BoxWindow | None":
        self._check(other)
        lo = tuple(max(a, b) for a, b in zip(self.lower, other.lower))
        hi = tuple(min(a, b) for a, b in zip(self.upper, other.upper))
        if any(x > y for x, y in zip(lo, hi)):
            return None
        return BoxWindow(lo, hi)

    def issubset(self, other: "BoxWindow") -> bool:
        self._check(other)
        return all(b <= a for a, b in zip(self.lower, other.lower)) and all(
            a <= b for a, b in zip(self.upper, other.upper)
        )

    def side(self) -> int:
        """Side length of a cube; raises for non-cubes."""
        s = set(self.shape)
        if len(s) != 1:
            raise ValueError(f"{self} is not a cube")
        return s.pop()

    def _check(self, other):
        if other.d != self.d:
            raise ValueError(f"dimension mismatch: {self.d} vs {other.d}")

    def __repr__(self):
        return f"BoxWindow({list(self.lower)}, {list(self.upper)})"


def standard_folner(d: int, n: int) -> BoxWindow:
    """The cube ``[0, n-1]^d``; n = 1, 2, ... is a Følner sequence for Z^d."""
    if d < 1 or n < 1:
        raise ValueError("standard_folner needs d >= 1 and n >= 1")
    return BoxWindow.cube(d, 0, n - 1)


@dataclass(frozen=True)
class BoundarySet:
    """``∂_K(Ω)`` for boxes: the sites of ``outer`` not in ``inner``.

    ``outer`` holds every g with K+g meeting Ω, ``inner`` every g with
    K+g ⊆ Ω (None when no translate fits).
    """

    outer: BoxWindow
    inner: "BoxWindow | None"

    def __len__(self) -> int:
        return self.outer.size - (self.inner.size if self.inner is not None else 0)

    def __contains__(self, g) -> bool:
        return g in self.outer and (self.inner is None or g not in self.inner)

    def __iter__(self):
        for g in self.outer:
            if self.inner is None or g not in self.inner:
                yield g

    @property
    def elements(self) -> frozenset:
        return frozenset(self)


def k_boundary(omega: BoxWindow, k: BoxWindow) -> BoundarySet:
    """Sites g whose translate ``K + g`` meets both Ω and its complement."""
    outer = BoxWindow(
        tuple(a - kh for a, kh in zip(omega.lower, k.upper)),
        tuple(b - kl for b, kl in zip(omega.upper, k.lower)),
    )
    return BoundarySet(outer, omega.erode(k))


def boundary_ratio(omega: BoxWindow, k: BoxWindow) -> float:
    return len(k_boundary(omega, k)) / omega.size


def symmetric_difference_size(omega: BoxWindow, g: Sequence[int]) -> int:
    """``|(Ω + g) Δ Ω|`` by inclusion-exclusion on boxes."""
    moved = omega.translate(g)
    common = omega.intersect(moved)
    return 2 * omega.size - 2 * (common.size if common is not None else 0)
