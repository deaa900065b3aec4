"""Shifts of finite type over Z^d, sliding-block codes and fiber products.

Patterns are stored as integer arrays shaped like their window; whenever a
pattern is flattened, sites are taken in lexicographic order (last
coordinate fastest) and encoded big-endian in base ``k``.

Admissibility is *local*: a pattern on a window is admissible when no
forbidden pattern sits entirely inside the window.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import CapExceededError, EmptySystemError, WindowTooSmallError
from .window import BoxWindow

log = logging.getLogger(__name__)

DEFAULT_CAP = 10**7
DEFAULT_MEMORY_BYTES = 2 * 1024**3
MAX_MASK_ENTRIES = 1 << 24


def powers(k: int, n: int) -> np.ndarray:
    """Big-endian place values for encoding ``n`` base-``k`` digits."""
    return k ** np.arange(n - 1, -1, -1, dtype=np.int64)


def decode(codes, k: int, n: int) -> np.ndarray:
    """Inverse of the big-endian encoding: digits array of shape (len(codes), n)."""
    codes = np.asarray(codes, dtype=np.int64)
    return (codes[:, None] // powers(k, n)[None, :]) % k


def all_words(k: int, n: int) -> np.ndarray:
    return decode(np.arange(k**n, dtype=np.int64), k, n)


def _symbol_dtype(k):
    return np.uint8 if k <= 255 else np.int32


@dataclass(frozen=True)
class Alphabet:
    size: int
    labels: tuple | None = None

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("alphabet size must be >= 1")
        if self.labels is not None and len(self.labels) != self.size:
            raise ValueError("label count does not match alphabet size")


class Pattern:
    """Symbols on a box window."""

    __slots__ = ("window", "symbols")

    def __init__(self, window: BoxWindow, symbols):
        arr = np.array(symbols, dtype=np.int64).reshape(window.shape)
        arr.setflags(write=False)
        self.window = window
        self.symbols = arr

    @classmethod
    def word(cls, symbols: Sequence[int], start: int = 0) -> "Pattern":
        symbols = list(symbols)
        return cls(BoxWindow.interval(start, start + len(symbols) - 1), symbols)

    @classmethod
    def from_nested(cls, nested, lower=None) -> "Pattern":
        arr = np.asarray(nested, dtype=np.int64)
        if lower is None:
            lower = (0,) * arr.ndim
        upper = tuple(a + s - 1 for a, s in zip(lower, arr.shape))
        return cls(BoxWindow(tuple(lower), upper), arr)

    @property
    def flat(self) -> tuple:
        return tuple(int(s) for s in self.symbols.ravel())

    def restrict(self, w: BoxWindow) -> "Pattern":
        if not w.issubset(self.window):
            raise WindowTooSmallError(f"{w} is not inside {self.window}")
        sl = tuple(
            slice(a - b, c - b + 1) for a, b, c in zip(w.lower, self.window.lower, w.upper)
        )
        return Pattern(w, self.symbols[sl])

    def translate(self, g) -> "Pattern":
        return Pattern(self.window.translate(g), self.symbols)

    def __eq__(self, other):
        return (
            isinstance(other, Pattern)
            and self.window == other.window
            and np.array_equal(self.symbols, other.symbols)
        )

    def __hash__(self):
        return hash((self.window, self.flat))

    def __repr__(self):
        if self.window.d == 1:
            return f"Pattern({''.join(map(str, self.flat))} @ {self.window.lower[0]})"
        return f"Pattern({self.window}, {self.symbols.tolist()})"


class ShiftSystem:
    """A shift of finite type on Z^d.

    Parameters
    ----------
    d : int
        Lattice dimension.
    alphabet : int or Alphabet
    forbidden : sequence
        Forbidden patterns, each a :class:`Pattern` or a nested list with
        ``d`` levels (its shape is read from the nesting).
    constraints : sequence of (BoxWindow, bool array), optional
        Allowed-masks given directly; used for derived systems.
    """

    def __init__(
        self,
        d: int,
        alphabet,
        forbidden=(),
        *,
        constraints=(),
        name: str | None = None,
        cap: int = DEFAULT_CAP,
        check: bool = True,
    ):
        if d < 1:
            raise ValueError("dimension must be >= 1")
        self.d = int(d)
        self.alphabet = alphabet if isinstance(alphabet, Alphabet) else Alphabet(int(alphabet))
        self.name = name
        self.cap = cap
        k = self.k
        masks: dict[BoxWindow, np.ndarray] = {}
        self.forbidden = []
        for item in forbidden:
            p = item if isinstance(item, Pattern) else Pattern.from_nested(item)
            if p.window.d != self.d:
                raise ValueError(f"forbidden pattern {p} has wrong dimension")
            if np.any(p.symbols >= k) or np.any(p.symbols < 0):
                raise ValueError(f"forbidden pattern {p} uses symbols outside the alphabet")
            shape = BoxWindow(tuple(0 for _ in p.window.shape), tuple(s - 1 for s in p.window.shape))
            mask = masks.get(shape)
            if mask is None:
                if k ** shape.size > MAX_MASK_ENTRIES:
                    raise ValueError(f"forbidden shape {shape.shape} too large for alphabet {k}")
                mask = masks[shape] = np.ones(k**shape.size, dtype=bool)
            mask[int(np.dot(p.symbols.ravel(), powers(k, shape.size)))] = False
            self.forbidden.append(p.translate(tuple(-a for a in p.window.lower)))
        for shape, mask in constraints:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != (k**shape.size,):
                raise ValueError("constraint mask has the wrong length")
            if shape in masks:
                masks[shape] = masks[shape] & mask
            else:
                masks[shape] = mask.copy()
        self.constraints = tuple((s, m) for s, m in masks.items() if not m.all())
        for _, m in self.constraints:
            m.setflags(write=False)
        if check:
            probe = BoxWindow.cube(self.d, 0, 3 if self.d == 1 else 1)
            if count_patterns(self, probe) == 0:
                raise EmptySystemError(f"system {name or ''} has no admissible pattern on {probe}")
            if self.d >= 2 and self.constraints and not self.safe_symbols():
                log.warning(
                    "system %s has no safe symbol; local pattern counts may exceed "
                    "globally extendable ones",
                    name or "",
                )

    @property
    def k(self) -> int:
        return self.alphabet.size

    @property
    def memory(self) -> int:
        """For d = 1: longest constraint span minus one."""
        return max((s.size for s, _ in self.constraints), default=1) - 1

    def is_full(self) -> bool:
        return not self.constraints

    def safe_symbols(self) -> list[int]:
        """Symbols that can overwrite any site without creating a forbidden pattern."""
        k = self.k
        safe = []
        for s in range(k):
            ok = True
            for shape, mask in self.constraints:
                n = shape.size
                allowed = all_words(k, n)[mask]
                pw = powers(k, n)
                for i in range(n):
                    rep = allowed.copy()
                    rep[:, i] = s
                    if not mask[rep @ pw].all():
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                safe.append(s)
        return safe

    def admits(self, p: Pattern) -> bool:
        """Local admissibility of a single pattern."""
        arr = pattern_array(self, p.window, restrict_to=p.symbols.ravel()[None, :])
        return len(arr) == 1

    def same_as(self, other: "ShiftSystem") -> bool:
        if self is other:
            return True
        if self.d != other.d or self.k != other.k or len(self.constraints) != len(other.constraints):
            return False
        mine = {s: m for s, m in self.constraints}
        return all(s in mine and np.array_equal(mine[s], m) for s, m in other.constraints)

    def __repr__(self):
        return f"ShiftSystem(name={self.name!r}, d={self.d}, k={self.k}, constraints={len(self.constraints)})"


def _placements(sys: ShiftSystem, w: BoxWindow):
    """Per-site list of (site indices, place values, mask) for constraints whose last site is that site."""
    n = w.size
    per_site = [[] for _ in range(n)]
    for shape, mask in sys.constraints:
        region = w.erode(shape)
        if region is None:
            continue
        offs = region.sites()
        rel = shape.sites()
        pw = powers(sys.k, shape.size)
        idx = np.stack([w.index_of(rel + g) for g in offs])  # (placements, |shape|)
        last = idx.max(axis=1)
        for j in np.unique(last):
            per_site[j].append((idx[last == j], pw, mask))
    return per_site


def pattern_array(
    sys: ShiftSystem, w: BoxWindow, cap: int | None = None, restrict_to=None, fixed=None
) -> np.ndarray:
    """All locally admissible patterns on ``w`` as an array (N, |w|), rows in lexicographic order.

    Built site by site; at each site every constraint placement ending there
    is checked, so partial patterns are pruned as early as possible.
    ``fixed`` maps flat site indices to prescribed symbols.
    """
    fixed = {} if fixed is None else {int(i): int(v) for i, v in dict(fixed).items()}
    cap = sys.cap if cap is None else cap
    k = sys.k
    n = w.size
    dtype = _symbol_dtype(k)
    checks = _placements(sys, w)
    if restrict_to is not None:
        P = np.asarray(restrict_to, dtype=dtype).reshape(-1, n)
        for j in range(n):
            P = _apply_checks(P, checks[j])
        return P
    P = np.zeros((1, n), dtype=dtype)
    row_bytes = max(n * np.dtype(dtype).itemsize, 1)
    for j in range(n):
        N = len(P)
        if j in fixed:
            Q = P.copy()
            Q[:, j] = fixed[j]
        else:
            if N * k * row_bytes > DEFAULT_MEMORY_BYTES:
                raise CapExceededError(f"enumeration on {w} exceeds the memory limit", window=w)
            Q = np.repeat(P, k, axis=0)
            Q[:, j] = np.tile(np.arange(k, dtype=dtype), N)
        P = _apply_checks(Q, checks[j])
        if len(P) > cap:
            raise CapExceededError(f"more than {cap} admissible patterns on {w}", window=w)
    return P


def local_codes(P: np.ndarray, src: BoxWindow, shape: BoxWindow, out: BoxWindow, k: int) -> np.ndarray:
    """Codes of the sub-patterns on ``g + shape`` for every g in ``out``: array (N, |out|)."""
    rel = shape.sites()
    pw = powers(k, shape.size)
    res = np.empty((len(P), out.size), dtype=np.int64)
    for j, g in enumerate(out.sites()):
        res[:, j] = P[:, src.index_of(rel + g)].astype(np.int64) @ pw
    return res


def _apply_checks(P, checks):
    for idx, pw, mask in checks:
        if len(P) == 0:
            break
        keep = np.ones(len(P), dtype=bool)
        for row in idx:
            keep &= mask[P[:, row].astype(np.int64) @ pw]
        P = P[keep]
    return P


def enumerate_patterns(sys: ShiftSystem, w: BoxWindow, cap: int | None = None) -> Iterator[Pattern]:
    """Yield each locally admissible pattern on ``w`` once, in lexicographic order."""
    P = pattern_array(sys, w, cap)
    if len(P) == 0:
        raise EmptySystemError(f"no admissible pattern on {w}")
    for row in P:
        yield Pattern(w, row)


def suffix_ok(sys: ShiftSystem, m: int) -> np.ndarray:
    """For d = 1: allowed-mask over words of length m + 1 for constraints ending at the last symbol."""
    k = sys.k
    ok = np.ones(k ** (m + 1), dtype=bool)
    codes = np.arange(k ** (m + 1), dtype=np.int64)
    for shape, mask in sys.constraints:
        span = shape.size
        if span > m + 1:
            raise ValueError("memory too short for constraint")
        ok &= mask[codes % (k**span)]
    return ok


def count_patterns(sys: ShiftSystem, w: BoxWindow, cap: int | None = None) -> int:
    """Number of locally admissible patterns on ``w``.

    For d = 1 this walks the transfer matrix on (memory)-blocks with exact
    integer arithmetic and never materialises patterns.
    """
    if sys.d == 1:
        n = w.size
        m = sys.memory
        if n <= m + 1:
            return len(pattern_array(sys, w, cap))
        k = sys.k
        start = pattern_array(sys, BoxWindow.interval(0, m - 1), cap) if m > 0 else np.zeros((1, 0), int)
        v = np.zeros(k**m, dtype=object)
        v[start.astype(np.int64) @ powers(k, m) if m > 0 else np.zeros(1, np.int64)] = 1
        ok = suffix_ok(sys, m).astype(object).reshape(k**m, k)
        for _ in range(n - m):
            # v[s] -> w = s*k + a ; new state = w mod k^m
            vw = (v[:, None] * ok).reshape(-1)
            v = vw.reshape(k, k**m).sum(axis=0) if m > 0 else np.array([vw.sum()], dtype=object)
        return int(v.sum())
    return len(pattern_array(sys, w, cap))


# ---------------------------------------------------------------- block codes


class BlockCode:
    """Sliding-block code: output at site g is ``rule(x restricted to g + shape)``.

    ``shape`` defaults to the cube ``[-radius, radius]^d``; the rule is a table
    indexed by the big-endian code of the source pattern on ``shape``.
    """

    def __init__(self, source: ShiftSystem, target: ShiftSystem, rule, *, radius: int = 0,
                 shape: BoxWindow | None = None, check: bool = True, name: str | None = None):
        if source.d != target.d:
            raise ValueError("source and target dimensions differ")
        if shape is None:
            shape = BoxWindow.cube(source.d, -radius, radius)
        if shape.d != source.d:
            raise ValueError("code shape has the wrong dimension")
        self.source = source
        self.target = target
        self.shape = shape
        self.name = name
        n = shape.size
        size = source.k**n
        if size > MAX_MASK_ENTRIES:
            raise ValueError("code rule table too large")
        if callable(rule):
            table = np.array([rule(tuple(int(s) for s in wd)) for wd in all_words(source.k, n)], dtype=np.int64)
        elif isinstance(rule, dict):
            table = np.full(size, -1, dtype=np.int64)
            pw = powers(source.k, n)
            for key, val in rule.items():
                key = (key,) if isinstance(key, (int, np.integer)) else tuple(key)
                table[int(np.dot(key, pw))] = val
        else:
            table = np.asarray(rule, dtype=np.int64).ravel()
        if table.shape != (size,):
            raise ValueError(f"rule table must have {size} entries, got {table.shape}")
        if np.any(table >= target.k):
            raise ValueError("rule maps outside the target alphabet")
        # totality on admissible source patterns of the rule shape
        adm = pattern_array(source, shape)
        codes = adm.astype(np.int64) @ powers(source.k, n)
        if np.any(table[codes] < 0):
            raise ValueError("rule is not total on admissible source patterns")
        table = np.where(table < 0, 0, table)
        table.setflags(write=False)
        self.rule = table
        if check:
            self._check_surjective()

    @property
    def radius(self) -> int:
        return max(max(abs(a), abs(b)) for a, b in zip(self.shape.lower, self.shape.upper))

    def is_single_site(self) -> bool:
        return self.shape.size == 1

    def outputs(self, P: np.ndarray, src: BoxWindow, out: BoxWindow) -> np.ndarray:
        """Vectorised coding of pattern rows on ``src`` to rows on ``out``."""
        codes = local_codes(P, src, self.shape, out, self.source.k)
        return self.rule[codes].astype(_symbol_dtype(self.target.k))

    def _check_surjective(self):
        probes = [BoxWindow.cube(self.source.d, 0, 0)]
        if self.source.d == 1:
            probes.append(BoxWindow.interval(0, 1))
        for w in probes:
            src = w.minkowski(self.shape)
            try:
                P = pattern_array(self.source, src)
                T = pattern_array(self.target, w)
            except CapExceededError:
                continue
            img = {row.tobytes() for row in self.outputs(P, src, w)}
            missing = [row for row in T if row.astype(_symbol_dtype(self.target.k)).tobytes() not in img]
            if missing:
                raise ValueError(
                    f"code is not onto the target: target pattern {missing[0].tolist()} on {w} has no preimage"
                )

    def __repr__(self):
        return f"BlockCode({self.name or ''} {self.source.name}->{self.target.name}, shape={self.shape})"


def apply_code(code: BlockCode, p: Pattern) -> Pattern:
    """Code a pattern; the result lives on the window eroded by the code shape."""
    out = p.window.erode(code.shape)
    if out is None:
        raise WindowTooSmallError(f"{p.window} is too small for code shape {code.shape}")
    row = code.outputs(p.symbols.reshape(1, -1), p.window, out)[0]
    return Pattern(out, row)


@dataclass
class FiberSystem:
    system: ShiftSystem
    varphi: BlockCode  # fiber -> X
    Pi: BlockCode  # fiber -> Y'
    k_y: int = field(default=1)

    def pair(self, x: int, y: int) -> int:
        return x * self.k_y + y


def _lift(constraints, kx: int, ky: int, first: bool):
    """Lift constraint masks to the pair alphabet, pair (x, y) encoded as x * ky + y."""
    out = []
    kk = kx * ky
    for shape, mask in constraints:
        n = shape.size
        if kk**n > MAX_MASK_ENTRIES:
            raise ValueError("lifted constraint too large")
        digits = all_words(kk, n)
        if first:
            out.append((shape, mask[(digits // ky) @ powers(kx, n)]))
        else:
            out.append((shape, mask[(digits % ky) @ powers(ky, n)]))
    return out


def fiber_product(pi: BlockCode, phi: BlockCode, name: str | None = None) -> FiberSystem:
    """``{(x, y) : π(x) = φ(y)}`` as an SFT over the product alphabet, with both projections."""
    if not pi.target.same_as(phi.target):
        raise ValueError("pi and phi must share the same target system")
    X, Yp = pi.source, phi.source
    if X.d != Yp.d:
        raise ValueError("dimension mismatch between X and Y'")
    kx, ky = X.k, Yp.k
    kk = kx * ky
    cons = _lift(X.constraints, kx, ky, True) + _lift(Yp.constraints, kx, ky, False)
    hull = pi.shape.hull(phi.shape)
    n = hull.size
    if kk**n > MAX_MASK_ENTRIES:
        raise ValueError("compatibility constraint too large")
    digits = all_words(kk, n)
    ix = hull.index_of(pi.shape.sites())
    iy = hull.index_of(phi.shape.sites())
    xs = (digits[:, ix] // ky) @ powers(kx, pi.shape.size)
    ys = (digits[:, iy] % ky) @ powers(ky, phi.shape.size)
    compat = pi.rule[xs] == phi.rule[ys]
    # constraints are translation invariant, so anchor the hull at the origin
    anchored = BoxWindow((0,) * hull.d, tuple(s - 1 for s in hull.shape))
    cons.append((anchored, compat))
    fiber = ShiftSystem(X.d, kk, constraints=cons, name=name or f"{X.name}x_{Yp.name}")
    varphi = BlockCode(fiber, X, [s // ky for s in range(kk)], name="varphi")
    Pi = BlockCode(fiber, Yp, [s % ky for s in range(kk)], name="Pi")
    return FiberSystem(fiber, varphi, Pi, k_y=ky)


# ---------------------------------------------------------------- presets


def full_shift(k: int, d: int = 1, name: str | None = None) -> ShiftSystem:
    return ShiftSystem(d, k, name=name or f"full{k}")


def golden_mean() -> ShiftSystem:
    return ShiftSystem(1, 2, [[1, 1]], name="golden_mean")


def hard_square() -> ShiftSystem:
    return ShiftSystem(2, 2, [[[1, 1]], [[1], [1]]], name="hard_square")


def identity_code(sys: ShiftSystem) -> BlockCode:
    return BlockCode(sys, sys, list(range(sys.k)), name="identity")


def collapse_code(sys: ShiftSystem) -> BlockCode:
    """Factor onto the one-point system."""
    return BlockCode(sys, full_shift(1, sys.d, name="point"), [0] * sys.k, name="collapse")


def symbol_map(source: ShiftSystem, target: ShiftSystem, mapping: Sequence[int], name=None) -> BlockCode:
    return BlockCode(source, target, list(mapping), name=name)


def product_shift(a: int, b: int, d: int = 1) -> tuple[ShiftSystem, BlockCode]:
    """Full shift on pairs {0..a-1} x {0..b-1} (symbol i*b + j) and its first-coordinate code."""
    X = full_shift(a * b, d, name=f"full{a}x{b}")
    Y = full_shift(a, d, name=f"full{a}")
    return X, BlockCode(X, Y, [s // b for s in range(a * b)], name="first_coordinate")
