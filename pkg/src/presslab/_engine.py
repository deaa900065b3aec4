"""Evaluation of weighted partition sums.

For a window w with collar c, a factor code π with shape K and a potential
of radius r, three boxes are involved:

* ``W_Y = w + [-c, c]^d``: the Y-cylinder an A-pattern fixes;
* ``W_X = hull(W_Y, W_Y + K)``: the X-cylinder a B-pattern fixes (it
  determines its A-pattern);
* ``W_ext = hull(W_X, w + [-r, r]^d)``: sites outside ``W_X`` are free and
  maximised over, which realises ``sup_B S_w f``.

``log Z = logsumexp_A ( ω · log Σ_{B → A} exp(sup_B S_w f) )``.

Two engines compute the same thing: a brute-force enumerator (any d) and a
transfer-matrix chain (d = 1) whose state is the last ``m`` symbols.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .potential import Potential
from .shiftspace import BlockCode, ShiftSystem, decode, local_codes, pattern_array, powers
from .window import BoxWindow


@dataclass(frozen=True)
class Windows:
    w: BoxWindow
    y: BoxWindow
    x: BoxWindow
    ext: BoxWindow


def windows_for(w: BoxWindow, code: BlockCode, radius: int, collar: int) -> Windows:
    wy = w.inflate(collar)
    wx = wy.hull(wy.minkowski(code.shape))
    ext = wx.hull(w.inflate(radius))
    return Windows(w, wy, wx, ext)


@dataclass
class PartitionTables:
    """Per-A log partition sums; ``a_patterns`` rows are in lexicographic order."""

    windows: Windows
    a_patterns: np.ndarray  # (nA, |W_Y|)
    log_za: np.ndarray  # (nA,)
    log_z: float
    # filled by the brute engine only
    b_patterns: np.ndarray | None = None  # (nB, |W_X|)
    b_sup: np.ndarray | None = None  # (nB,)
    b_to_a: np.ndarray | None = None  # (nB,)


def combine(log_za: np.ndarray, omega: float) -> float:
    if len(log_za) == 0:
        return -np.inf
    return float(logsumexp(omega * np.asarray(log_za)))


def _group_rows(M: np.ndarray):
    """Unique rows (lexicographic) and the inverse map."""
    if M.shape[1] == 0:
        return M[:1], np.zeros(len(M), dtype=np.int64)
    uniq, inv = np.unique(M, axis=0, return_inverse=True)
    return uniq, inv.ravel()


def brute_tables(X: ShiftSystem, code: BlockCode, f: Potential, omega: float, wins: Windows,
                 cap: int | None = None) -> PartitionTables:
    E = pattern_array(X, wins.ext, cap=cap)
    if len(E) == 0:
        return PartitionTables(wins, np.zeros((0, wins.y.size), np.int64), np.zeros(0), -np.inf)
    S = f.site_values(E, wins.ext, wins.w).sum(axis=1)
    xcols = wins.ext.index_of(wins.x.sites())
    B, inv = _group_rows(E[:, xcols])
    sup = np.full(len(B), -np.inf)
    np.maximum.at(sup, inv, S)
    A_all = code.outputs(B, wins.x, wins.y)
    A, b_to_a = _group_rows(A_all)
    order = np.argsort(b_to_a, kind="stable")
    starts = np.searchsorted(b_to_a[order], np.arange(len(A)))
    log_za = np.array([
        logsumexp(sup[order[s:e]])
        for s, e in zip(starts, list(starts[1:]) + [len(B)])
    ])
    return PartitionTables(wins, A.astype(np.int64), log_za, combine(log_za, omega), B, sup, b_to_a)


# ---------------------------------------------------------------- chain engine


def chain_memory(X: ShiftSystem, code: BlockCode, f: Potential) -> int:
    spans = [s.size for s, _ in X.constraints] + [2 * f.radius + 1, code.shape.size]
    return max(spans) - 1


def chain_applicable(X: ShiftSystem, code: BlockCode, f: Potential, wins: Windows) -> bool:
    return X.d == 1 and wins.x.size >= chain_memory(X, code, f)


class _Chain:
    """Positions of ``W_ext`` with the factors and events that end at each."""

    def __init__(self, X, code, f, wins):
        self.k = X.k
        self.m = chain_memory(X, code, f)
        self.L = wins.ext.lower[0]
        self.R = wins.ext.upper[0]
        self.a = wins.x.lower[0]
        self.b = wins.x.upper[0]
        self.ky = code.target.k
        k = self.k
        self.cons = [(s.size, m) for s, m in X.constraints]
        self.fspan = 2 * f.radius + 1
        self.fsites = {g + f.radius for g in range(wins.w.lower[0], wins.w.upper[0] + 1)}
        self.ftable = f.table
        self.kspan = code.shape.size
        self.rule = code.rule
        self.ysites = {y + code.shape.upper[0] for y in range(wins.y.lower[0], wins.y.upper[0] + 1)}
        self._cache = {}

    def word_log_factor(self, p: int, length: int) -> np.ndarray:
        """Log weight of every word of ``length`` symbols ending at position p (-inf if forbidden)."""
        key = (p in self.fsites, length, tuple(
            s for s, _ in self.cons if p - s + 1 >= self.L))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        k = self.k
        codes = np.arange(k**length, dtype=np.int64)
        out = np.zeros(k**length)
        for span, mask in self.cons:
            if p - span + 1 >= self.L:
                out[~mask[codes % k**span]] = -np.inf
        if p in self.fsites:
            out += self.ftable[codes % k**self.fspan]
        self._cache[key] = out
        return out

    def y_output(self, p: int, length: int):
        if p not in self.ysites:
            return None
        codes = np.arange(self.k**length, dtype=np.int64)
        return self.rule[codes % self.k**self.kspan]

    def right_potential(self) -> np.ndarray:
        """Best log weight of the right extension, as a function of the state at ``b``."""
        k, m = self.k, self.m
        psi = np.zeros(k**m)
        for p in range(self.R, self.b, -1):
            wf = self.word_log_factor(p, m + 1).reshape(k**m, k)
            # word = state * k + a ; next state = word % k^m
            nxt = (np.arange(k ** (m + 1)) % k**m).reshape(k**m, k)
            psi = np.max(wf + psi[nxt], axis=1)
        return psi


def chain_tables(X: ShiftSystem, code: BlockCode, f: Potential, omega: float, wins: Windows) -> PartitionTables:
    ch = _Chain(X, code, f, wins)
    k, m = ch.k, ch.m
    V = np.zeros((1, 1))  # rows: A prefixes, cols: states of current length
    prefixes = np.zeros(1, dtype=np.int64)
    length = 0
    for p in range(ch.L, ch.b + 1):
        W = (V[:, :, None] + ch.word_log_factor(p, length + 1).reshape(1, -1, k)).reshape(len(V), -1)
        out = ch.y_output(p, length + 1)
        if out is not None:
            parts = [np.where(out[None, :] == o, W, -np.inf) for o in range(ch.ky)]
            W = np.stack(parts, axis=1).reshape(len(V) * ch.ky, -1)
            prefixes = (prefixes[:, None] * ch.ky + np.arange(ch.ky)[None, :]).ravel()
        if length + 1 > m:
            W = W.reshape(len(W), k, k**m)
            if p - m < ch.a:
                W = np.max(W, axis=1)
            else:
                W = logsumexp(W, axis=1)
        else:
            length += 1
        alive = np.any(W > -np.inf, axis=1)
        V, prefixes = W[alive], prefixes[alive]
    log_za = logsumexp(V + ch.right_potential()[None, :], axis=1)
    keep = log_za > -np.inf
    log_za, prefixes = log_za[keep], prefixes[keep]
    A = decode(prefixes, ch.ky, wins.y.size) if wins.y.size else np.zeros((len(prefixes), 0), np.int64)
    return PartitionTables(wins, A, log_za, combine(log_za, omega))


def tables(X, code, f, omega, wins, engine="auto", cap=None) -> PartitionTables:
    if engine == "chain" or (engine == "auto" and chain_applicable(X, code, f, wins)):
        if not chain_applicable(X, code, f, wins):
            raise ValueError("chain engine needs d = 1 and a long enough window")
        return chain_tables(X, code, f, omega, wins)
    return brute_tables(X, code, f, omega, wins, cap=cap)
