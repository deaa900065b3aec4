"""Locally constant potentials, Birkhoff sums and cylinder suprema."""

from __future__ import annotations

import logging
import math

import numpy as np

from .errors import CapExceededError, WindowTooSmallError
from .shiftspace import (
    MAX_MASK_ENTRIES,
    BlockCode,
    Pattern,
    ShiftSystem,
    all_words,
    local_codes,
    pattern_array,
    powers,
)
from .window import BoxWindow

log = logging.getLogger(__name__)


class Potential:
    """``f(x) = table[code of x on [-r, r]^d]``.

    Entries for inadmissible centre patterns are kept at zero and never
    read, so the sup-norm is taken over admissible entries only.
    """

    def __init__(self, system: ShiftSystem, radius: int, table):
        if radius < 0:
            raise ValueError("radius must be >= 0")
        self.system = system
        self.radius = int(radius)
        self.shape = BoxWindow.cube(system.d, -radius, radius)
        n = self.shape.size
        if system.k**n > MAX_MASK_ENTRIES:
            raise ValueError("potential table too large")
        table = np.asarray(table, dtype=np.float64).ravel()
        if table.shape != (system.k**n,):
            raise ValueError(f"table must have {system.k ** n} entries, got {table.size}")
        if not np.all(np.isfinite(table)):
            raise ValueError("potential values must be finite")
        adm = pattern_array(system, self.shape).astype(np.int64) @ powers(system.k, n)
        self.admissible = np.zeros(table.size, dtype=bool)
        self.admissible[adm] = True
        table = np.where(self.admissible, table, 0.0)
        table.setflags(write=False)
        self.table = table
        self.sup_norm = float(np.max(np.abs(table[self.admissible])))
        self.max = float(np.max(table[self.admissible]))
        self.min = float(np.min(table[self.admissible]))

    # constructors

    @classmethod
    def constant(cls, system: ShiftSystem, c: float) -> "Potential":
        return cls(system, 0, np.full(system.k, float(c)))

    @classmethod
    def symbol_values(cls, system: ShiftSystem, values) -> "Potential":
        """Radius-0 potential reading the symbol at the origin."""
        return cls(system, 0, values)

    @classmethod
    def from_function(cls, system: ShiftSystem, radius: int, fn) -> "Potential":
        """``fn`` receives the centre pattern as a flat tuple in lexicographic site order."""
        n = (2 * radius + 1) ** system.d
        words = all_words(system.k, n)
        return cls(system, radius, [fn(tuple(int(s) for s in w)) for w in words])

    @classmethod
    def from_entries(cls, system: ShiftSystem, radius: int, entries) -> "Potential":
        """Build from ``{pattern: value}``; admissible patterns left out default to 0.0."""
        n = (2 * radius + 1) ** system.d
        pw = powers(system.k, n)
        table = np.zeros(system.k**n)
        seen = np.zeros(system.k**n, dtype=bool)
        for key, val in dict(entries).items():
            key = np.asarray(key, dtype=np.int64).ravel()
            if key.size != n:
                raise ValueError(f"entry {key.tolist()} does not match radius {radius}")
            table[int(key @ pw)] = val
            seen[int(key @ pw)] = True
        f = cls(system, radius, table)
        missing = int(np.sum(f.admissible & ~seen))
        if missing:
            log.warning("%d admissible entries missing from potential table; set to 0.0", missing)
        return f

    @classmethod
    def random(cls, system: ShiftSystem, radius: int, rng: np.random.Generator, scale: float = 1.0):
        n = (2 * radius + 1) ** system.d
        return cls(system, radius, rng.uniform(-scale, scale, size=system.k**n))

    # arithmetic

    def with_radius(self, radius: int) -> "Potential":
        """Same function read through a larger centre cube."""
        if radius < self.radius:
            raise ValueError("cannot shrink a potential's radius")
        if radius == self.radius:
            return self
        big = BoxWindow.cube(self.system.d, -radius, radius)
        words = all_words(self.system.k, big.size)
        codes = local_codes(words, big, self.shape, BoxWindow.cube(self.system.d, 0, 0), self.system.k)
        return Potential(self.system, radius, self.table[codes[:, 0]])

    def _align(self, other: "Potential"):
        if not self.system.same_as(other.system):
            raise ValueError("potentials live on different systems")
        r = max(self.radius, other.radius)
        return self.with_radius(r), other.with_radius(r)

    def __add__(self, other):
        if isinstance(other, Potential):
            a, b = self._align(other)
            return Potential(self.system, a.radius, a.table + b.table)
        return Potential(self.system, self.radius, self.table + float(other))

    __radd__ = __add__

    def __neg__(self):
        return Potential(self.system, self.radius, -self.table)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        return Potential(self.system, self.radius, self.table * float(c))

    __rmul__ = __mul__

    def dominated_by(self, other: "Potential") -> bool:
        a, b = self._align(other)
        return bool(np.all(a.table[a.admissible] <= b.table[a.admissible]))

    def distance(self, other: "Potential") -> float:
        """Sup-norm of the difference."""
        return (self - other).sup_norm

    def shifted(self, g) -> "Potential":
        """``x -> f(g x)``, where ``(g x)_v = x_{v + g}``."""
        g = tuple(int(t) for t in np.broadcast_to(np.asarray(g), (self.system.d,)))
        R = self.radius + max(abs(t) for t in g)
        big = BoxWindow.cube(self.system.d, -R, R)
        words = all_words(self.system.k, big.size)
        out = BoxWindow(g, g)
        codes = local_codes(words, big, self.shape, out, self.system.k)
        return Potential(self.system, R, self.table[codes[:, 0]])

    def compose(self, code: BlockCode) -> "Potential":
        """``f ∘ code`` as a potential on the code's source system."""
        if not code.target.same_as(self.system):
            raise ValueError("code target is not this potential's system")
        src = code.source
        R = self.radius + code.radius
        big = BoxWindow.cube(src.d, -R, R)
        if src.k**big.size > MAX_MASK_ENTRIES:
            raise ValueError("composed potential table too large")
        words = pattern_array(src, big)
        centre = big.erode(code.shape)
        image = code.outputs(words, big, centre)
        vals = local_codes(image, centre, self.shape, BoxWindow.cube(src.d, 0, 0), self.system.k)
        table = np.zeros(src.k**big.size)
        table[words.astype(np.int64) @ powers(src.k, big.size)] = self.table[vals[:, 0]]
        return Potential(src, R, table)

    def site_values(self, P: np.ndarray, src: BoxWindow, w: BoxWindow) -> np.ndarray:
        """f at every site of ``w`` for each pattern row on ``src``: array (N, |w|)."""
        return self.table[local_codes(P, src, self.shape, w, self.system.k)]

    def __repr__(self):
        return f"Potential(r={self.radius}, sup_norm={self.sup_norm:.6g})"


def birkhoff_sum(f: Potential, p: Pattern, w: BoxWindow | None = None) -> float:
    """``S_w f`` on any point extending ``p``."""
    if w is None:
        w = p.window.erode(f.shape)
        if w is None:
            raise WindowTooSmallError(f"{p.window} too small for radius {f.radius}")
    if not w.minkowski(f.shape).issubset(p.window):
        raise WindowTooSmallError(f"pattern window {p.window} does not contain {w} inflated by {f.radius}")
    vals = f.site_values(p.symbols.reshape(1, -1), p.window, w)[0]
    return math.fsum(vals)


def interior_and_edge(f: Potential, b: BoxWindow, w: BoxWindow):
    """Split ``w`` into sites whose f-window lies in ``b`` and the rest; returns (interior box or None, edge count)."""
    inner = b.erode(f.shape)
    inner = inner.intersect(w) if inner is not None else None
    n_inner = inner.size if inner is not None else 0
    return inner, w.size - n_inner


def cylinder_sup(
    f: Potential,
    b: Pattern,
    sys: ShiftSystem | None = None,
    w: BoxWindow | None = None,
    *,
    fallback: bool = False,
    with_flag: bool = False,
    cap: int | None = None,
):
    """Maximum of ``S_w f`` over admissible extensions of ``b`` to ``b.window ∪ (w + [-r, r]^d)``.

    ``w`` defaults to ``b.window``.  On cap overflow, ``fallback=True`` returns
    the interior sum plus ``‖f‖∞`` per edge site (a certified upper bound);
    ``with_flag`` additionally returns whether the value is exact.
    """
    sys = f.system if sys is None else sys
    w = b.window if w is None else w
    ext = b.window.hull(w.minkowski(f.shape))
    fixed = dict(zip(ext.index_of(b.window.sites()).tolist(), b.symbols.ravel().tolist()))
    try:
        E = pattern_array(sys, ext, cap=cap, fixed=fixed)
        if len(E) == 0:
            raise ValueError(f"{b} has no admissible extension")
        val = float(np.max(f.site_values(E, ext, w).sum(axis=1)))
        exact = True
    except CapExceededError:
        if not fallback:
            raise
        inner, n_edge = interior_and_edge(f, b.window, w)
        val = n_edge * f.sup_norm
        if inner is not None:
            val += birkhoff_sum(f, b, inner)
        exact = False
    return (val, exact) if with_flag else val


def integrate(f: Potential, mu) -> float:
    """``∫ f dμ`` for any measure exposing ``marginal(window) -> (patterns, probs)``."""
    P, probs = mu.marginal(f.shape)
    vals = f.table[P.astype(np.int64) @ powers(f.system.k, f.shape.size)]
    return math.fsum(vals * probs)
