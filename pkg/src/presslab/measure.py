"""Shift-invariant parametric measures, block entropies and pushforwards.

Every measure exposes ``marginal(window) -> (patterns, probs)`` with
patterns as rows in lexicographic order, which is what ``integrate`` and
the finite-window checks consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import entr, logsumexp

from . import _engine
from .errors import WindowTooSmallError
from .shiftspace import BlockCode, ShiftSystem, all_words, decode, pattern_array, powers
from .window import BoxWindow

PROB_TOL = 1e-12


def _entropy(probs) -> float:
    """``-Σ p log p`` with ``0 log 0 = 0``."""
    return math.fsum(entr(np.asarray(probs, dtype=np.float64)))


def _check_probs(p, tol, what):
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0):
        raise ValueError(f"{what} has negative entries")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"{what} sums to {p.sum()!r}, not 1")
    return p


def adjacency(sys: ShiftSystem) -> np.ndarray:
    """Allowed one-step transitions of a one-dimensional system with memory <= 1."""
    if sys.d != 1 or sys.memory > 1:
        raise ValueError("adjacency needs a one-dimensional system with memory <= 1")
    k = sys.k
    codes = np.arange(k * k)
    ok = np.ones(k * k, dtype=bool)
    for s, mask in sys.constraints:
        if s.size == 2:
            ok &= mask
        else:
            ok &= mask[codes // k] & mask[codes % k]
    return ok.reshape(k, k)


class ProductMeasure:
    """I.i.d. symbols with law ``p`` at every site (any d)."""

    family = "bernoulli"

    def __init__(self, system: ShiftSystem, p):
        self.system = system
        p = _check_probs(p, PROB_TOL, "probability vector")
        if p.shape != (system.k,):
            raise ValueError("probability vector does not match the alphabet")
        p = p / p.sum()
        support = np.flatnonzero(p > 0)
        for shape, mask in system.constraints:
            words = all_words(len(support), shape.size)
            if not mask[support[words] @ powers(system.k, shape.size)].all():
                raise ValueError("support of the product measure allows forbidden patterns")
        self.p = p
        self.p.setflags(write=False)

    @property
    def params(self) -> np.ndarray:
        return self.p.copy()

    def cylinder_prob(self, pat) -> float:
        return float(np.prod(self.p[pat.symbols.ravel()]))

    def marginal(self, w: BoxWindow):
        P = pattern_array(self.system, w)
        probs = np.prod(self.p[P.astype(np.int64)], axis=1) if w.size else np.ones(len(P))
        return P, probs

    def markov_form(self):
        k = self.system.k
        return self.p.copy(), np.tile(self.p, (k, 1))

    def entropy_rate(self) -> float:
        return _entropy(self.p)

    def __repr__(self):
        return f"ProductMeasure({np.round(self.p, 6).tolist()})"


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """A stationary law of ``P``; the unique one when ``P`` is irreducible.

    Uses a least-squares solve and falls back to the lazy chain started
    from the uniform law, iterated by repeated squaring.
    """
    k = len(P)
    M = np.vstack([P.T - np.eye(k), np.ones((1, k))])
    rhs = np.zeros(k + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    if np.all(pi > -1e-13) and np.abs(pi @ P - pi).max() < 1e-13:
        pi = np.clip(pi, 0, None)
        return pi / pi.sum()
    Q = 0.5 * (np.eye(k) + P)
    for _ in range(64):
        Q = Q @ Q
        Q /= Q.sum(axis=1, keepdims=True)
    pi = np.full(k, 1.0 / k) @ Q
    return pi / pi.sum()


class MarkovMeasure:
    """Stationary first-order Markov chain on a one-dimensional system with memory <= 1."""

    family = "markov"

    def __init__(self, system: ShiftSystem, transition, stationary=None, *, degenerate: bool = False):
        if system.d != 1:
            raise ValueError("Markov measures are one-dimensional")
        T = np.asarray(transition, dtype=np.float64)
        k = system.k
        if T.shape != (k, k):
            raise ValueError("transition matrix does not match the alphabet")
        if np.any(T < 0) or np.abs(T.sum(axis=1) - 1).max() > 1e-10:
            raise ValueError("transition matrix must be row-stochastic")
        allowed = adjacency(system)
        if np.any(T[~allowed] > 0):
            raise ValueError("transition matrix puts mass on forbidden adjacencies")
        T = T / T.sum(axis=1, keepdims=True)
        pi = stationary_distribution(T) if stationary is None else _check_probs(stationary, 1e-10, "stationary")
        if np.abs(pi @ T - pi).max() > 1e-10:
            raise ValueError("stationary vector is not invariant under the transition matrix")
        self.system = system
        self.P = T
        self.pi = pi
        self.degenerate = degenerate
        self.P.setflags(write=False)
        self.pi.setflags(write=False)

    @classmethod
    def parry(cls, system: ShiftSystem) -> "MarkovMeasure":
        """Maximal-entropy chain built from the adjacency matrix's Perron data."""
        A = adjacency(system).astype(float)
        vals, vecs = np.linalg.eig(A)
        i = int(np.argmax(vals.real))
        lam = vals[i].real
        r = np.abs(vecs[:, i].real)
        vals_l, vecs_l = np.linalg.eig(A.T)
        l = np.abs(vecs_l[:, int(np.argmax(vals_l.real))].real)
        T = A * r[None, :] / (lam * r[:, None])
        pi = l * r / (l @ r)
        return cls(system, T / T.sum(axis=1, keepdims=True), pi)

    @property
    def params(self) -> np.ndarray:
        return self.P[adjacency(self.system)].copy()

    def cylinder_prob(self, pat) -> float:
        x = pat.symbols.ravel()
        return float(self.pi[x[0]] * np.prod(self.P[x[:-1], x[1:]]))

    def marginal(self, w: BoxWindow):
        P = pattern_array(self.system, w).astype(np.int64)
        probs = self.pi[P[:, 0]] * np.prod(self.P[P[:, :-1], P[:, 1:]], axis=1)
        return P, probs

    def markov_form(self):
        return self.pi.copy(), self.P.copy()

    def entropy_rate(self) -> float:
        return math.fsum(self.pi * entr(self.P).sum(axis=1))

    def __repr__(self):
        return f"MarkovMeasure(P={np.round(self.P, 6).tolist()})"


class MixtureMeasure:
    """Convex combination of invariant measures on the same system."""

    family = "mixture"

    def __init__(self, components, weights):
        self.components = list(components)
        self.weights = _check_probs(weights, 1e-12, "mixture weights")
        if len(self.components) != len(self.weights) or not self.components:
            raise ValueError("need one weight per component")
        self.system = self.components[0].system

    def cylinder_prob(self, pat) -> float:
        return math.fsum(w * c.cylinder_prob(pat) for w, c in zip(self.weights, self.components))

    def marginal(self, w: BoxWindow):
        P = None
        total = None
        for wt, c in zip(self.weights, self.components):
            Q, pr = c.marginal(w)
            if P is None:
                P, total = Q, wt * pr
            else:
                total = total + wt * pr
        return P, total

    def entropy_rate(self) -> float:
        return math.fsum(w * c.entropy_rate() for w, c in zip(self.weights, self.components))


@dataclass
class PatternWeights:
    """A probability vector over pattern rows on ``window``."""

    window: BoxWindow
    patterns: np.ndarray
    weights: np.ndarray
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.patterns = np.asarray(self.patterns)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.patterns.shape != (len(self.weights), self.window.size):
            raise ValueError("patterns and weights do not line up with the window")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-10:
            raise ValueError("pattern weights must be a probability vector")

    def marginal(self, w: BoxWindow):
        """Law of the restriction to ``w``; rows in lexicographic order."""
        if not w.issubset(self.window):
            raise WindowTooSmallError(f"{w} is not inside {self.window}")
        sub = self.patterns[:, self.window.index_of(w.sites())]
        uniq, inv = _engine._group_rows(sub)
        probs = np.zeros(len(uniq))
        np.add.at(probs, inv, self.weights)
        return uniq, probs

    def as_dict(self) -> dict:
        return {tuple(int(s) for s in row): float(v) for row, v in zip(self.patterns, self.weights)}


@dataclass(frozen=True)
class EntropyEstimate:
    """Entropy per site; ``lower`` is a certified lower bound (equal to ``value`` when exact)."""

    value: float
    kind: str  # exact | block-upper | conditional
    lower: float

    def __float__(self):
        return float(self.value)


# ---------------------------------------------------------------- basic operations


def cylinder_prob(mu, pattern) -> float:
    return mu.cylinder_prob(pattern)


def partition_entropy(weights) -> float:
    if isinstance(weights, PatternWeights):
        weights = weights.weights
    return _entropy(weights)


def entropy_rate(mu) -> EntropyEstimate:
    h = mu.entropy_rate()
    return EntropyEstimate(h, "exact", h)


def block_entropy(mu, w: BoxWindow) -> float:
    return _entropy(mu.marginal(w)[1])


# ---------------------------------------------------------------- pushforwards


def _hidden_forward(mu, code: BlockCode, n: int, pin_first: bool = False, with_labels: bool = False):
    """Probabilities of Y-words of length n under the image of a Markov/product measure.

    Only words of positive probability are returned, in increasing order of
    their big-endian codes; ``with_labels`` also returns those codes.  With
    ``pin_first`` the first output is replaced by the whole X-block it reads,
    giving the joint law of (first X-block, Y_2 .. Y_n).
    """
    pi0, T = mu.markov_form()
    k = mu.system.k
    s = code.shape.size
    q = max(s - 1, 1)
    N = n + s - 1
    rule = code.rule
    ky = code.target.k
    with np.errstate(divide="ignore"):
        logT = np.log(T)
        logpi = np.log(pi0)
    # initial block of q symbols
    words = all_words(k, q)
    lp = logpi[words[:, 0]] + (logT[words[:, :-1], words[:, 1:]].sum(axis=1) if q > 1 else 0.0)
    V = lp[None, :]
    labels = np.zeros(1, dtype=np.int64)

    def split(V, labels, out, nout):
        parts = np.stack([np.where(out[None, :] == o, V, -np.inf) for o in range(nout)], axis=1)
        labels = (labels[:, None] * nout + np.arange(nout)[None, :]).ravel()
        V = parts.reshape(len(labels), -1)
        alive = np.any(V > -np.inf, axis=1)
        return V[alive], labels[alive]

    codes_q = np.arange(k**q, dtype=np.int64)
    for y in range(0, q - s + 1):  # outputs already determined by the initial block
        if y == 0 and pin_first:
            out, nout = codes_q // k ** (q - s), k**s
        else:
            shift = q - (y + s)
            out, nout = rule[(codes_q // k**shift) % k**s], ky
        V, labels = split(V, labels, out, nout)
    codes = np.arange(k ** (q + 1), dtype=np.int64)
    step = logT[(codes // k) % k, codes % k]
    for p in range(q, N):
        W = (V[:, :, None] + step.reshape(1, k**q, k)).reshape(len(V), -1)
        y = p - s + 1
        if y == 0 and pin_first:
            W, labels = split(W, labels, codes % k**s, k**s)
        else:
            W, labels = split(W, labels, rule[codes % k**s], ky)
        V = logsumexp(W.reshape(len(W), k, k**q), axis=1)
    probs = np.exp(logsumexp(V, axis=1))
    return (labels, probs) if with_labels else probs


def pushforward_weights(mu, code: BlockCode, w: BoxWindow) -> PatternWeights:
    """Law of the coded configuration on ``w``."""
    src = w.minkowski(code.shape)
    if isinstance(mu, PatternWeights) or mu.system.d != 1 or not hasattr(mu, "markov_form"):
        P, probs = mu.marginal(src)
        A = code.outputs(P, src, w)
        uniq, inv = _engine._group_rows(A)
        out = np.zeros(len(uniq))
        np.add.at(out, inv, probs)
        keep = out > 0
        return PatternWeights(w, uniq[keep], out[keep] / out[keep].sum())
    labels, probs = _hidden_forward(mu, code, w.size, with_labels=True)
    keep = probs > 0
    return PatternWeights(w, decode(labels[keep], code.target.k, w.size), probs[keep] / probs[keep].sum())


def _single_site_image(mu, code: BlockCode):
    """Image of a product measure under a single-site code: a product measure on symbol images."""
    q = np.zeros(code.target.k)
    np.add.at(q, code.rule[: mu.system.k], mu.p)
    return q


def pushforward_entropy(mu, code: BlockCode, maxwin: int = 10) -> EntropyEstimate:
    """Entropy rate of the coded measure.

    Exact when the image is i.i.d. or a bijective copy; otherwise in one
    dimension the conditional block estimate ``H_n - H_{n-1}`` (an upper
    estimate, non-increasing in n) with the lower bound
    ``H(Y_n | Y_1..Y_{n-1}, first hidden block)``; in higher dimension
    ``H(block) / |block|``.
    """
    if isinstance(mu, MixtureMeasure):
        parts = [pushforward_entropy(c, code, maxwin) for c in mu.components]
        val = math.fsum(w * e.value for w, e in zip(mu.weights, parts))
        low = math.fsum(w * e.lower for w, e in zip(mu.weights, parts))
        kinds = {e.kind for e in parts}
        return EntropyEstimate(val, kinds.pop() if len(kinds) == 1 else "conditional", low)
    sys = mu.system
    if code.target.k == 1:
        return EntropyEstimate(0.0, "exact", 0.0)
    if code.is_single_site():
        adm = pattern_array(sys, BoxWindow.cube(sys.d, 0, 0)).ravel().astype(np.int64)
        if len(set(code.rule[adm].tolist())) == len(adm):
            h = mu.entropy_rate()
            return EntropyEstimate(h, "exact", h)
        if isinstance(mu, ProductMeasure):
            h = _entropy(_single_site_image(mu, code))
            return EntropyEstimate(h, "exact", h)
    if sys.d == 1 and hasattr(mu, "markov_form"):
        n = max(int(maxwin), 1)
        hn = _entropy(_hidden_forward(mu, code, n))
        hn1 = _entropy(_hidden_forward(mu, code, n - 1)) if n > 1 else 0.0
        upper = max(hn - hn1, 0.0)
        if n > 1:
            jn = _entropy(_hidden_forward(mu, code, n, pin_first=True))
            jn1 = _entropy(_hidden_forward(mu, code, n - 1, pin_first=True))
            lower = max(jn - jn1, 0.0)
        else:
            lower = 0.0
        return EntropyEstimate(upper, "conditional", min(lower, upper))
    w = BoxWindow.cube(sys.d, 0, max(int(maxwin), 1) - 1)
    h = partition_entropy(pushforward_weights(mu, code, w)) / w.size
    return EntropyEstimate(h, "block-upper", 0.0)


def conditional_block_entropies(mu, code: BlockCode, nmax: int) -> list:
    """``H_n - H_{n-1}`` for n = 1 .. nmax (one-dimensional)."""
    H = [0.0] + [_entropy(_hidden_forward(mu, code, n)) for n in range(1, nmax + 1)]
    return [H[n] - H[n - 1] for n in range(1, nmax + 1)]


@dataclass(frozen=True)
class WeightedEntropy:
    value: float
    lower: float
    kinds: tuple

    def __float__(self):
        return float(self.value)


def weighted_entropy_parts(mu, code: BlockCode, omega: float, maxwin: int = 10) -> WeightedEntropy:
    hx = entropy_rate(mu)
    if omega == 1.0:
        return WeightedEntropy(hx.value, hx.lower, (hx.kind,))
    hy = pushforward_entropy(mu, code, maxwin)
    val = omega * hx.value + (1 - omega) * hy.value
    low = omega * hx.lower + (1 - omega) * hy.lower
    return WeightedEntropy(val, low, (hx.kind, hy.kind))


def weighted_entropy(mu, code: BlockCode, omega: float, maxwin: int = 10) -> float:
    """``ω h_μ + (1 - ω) h_{π*μ}``."""
    return weighted_entropy_parts(mu, code, omega, maxwin).value


# ---------------------------------------------------------------- Gibbs candidate


def gibbs_candidate(inst, w: BoxWindow, cap=None, tables=None) -> PatternWeights:
    """``δ(B) ∝ Z_{A(B)}^(ω-1) · exp(sup_B S_w f)`` over X-patterns on the cylinder window."""
    if tables is None:
        wins = _engine.windows_for(w, inst.pi, inst.f.radius, inst.collar)
        tables = _engine.brute_tables(inst.X, inst.pi, inst.f, inst.omega, wins, cap=cap)
    t = tables
    logw = (inst.omega - 1.0) * t.log_za[t.b_to_a] + t.b_sup - t.log_z
    wts = np.exp(logw)
    wts = wts / math.fsum(wts)
    return PatternWeights(t.windows.x, t.b_patterns, wts, notes={"b_sup": t.b_sup, "log_z": t.log_z})


def project_to_family(weights: PatternWeights, family: str, system: ShiftSystem):
    """Average single-site (or adjacent-pair) frequencies over the window."""
    P = weights.patterns.astype(np.int64)
    k = system.k
    if family == "bernoulli":
        freq = np.zeros(k)
        for j in range(P.shape[1]):
            np.add.at(freq, P[:, j], weights.weights)
        freq /= freq.sum()
        return ProductMeasure(system, freq)
    if family == "markov":
        if system.d != 1 or weights.window.size < 2:
            raise ValueError("Markov projection needs a one-dimensional window of at least 2 sites")
        counts = np.zeros((k, k))
        for j in range(P.shape[1] - 1):
            np.add.at(counts, (P[:, j], P[:, j + 1]), weights.weights)
        allowed = adjacency(system)
        rows = counts.sum(axis=1)
        degenerate = bool(np.any(rows <= 0))
        T = np.where(rows[:, None] > 0, counts / np.where(rows > 0, rows, 1)[:, None], 0.0)
        empty = rows <= 0
        T[empty] = allowed[empty] / np.maximum(allowed[empty].sum(axis=1, keepdims=True), 1)
        return MarkovMeasure(system, T, degenerate=degenerate)
    raise ValueError(f"unknown family {family!r}")
