"""Weighted partition functions and windowed pressure estimates.

With cylinder suprema taken over all admissible extensions, ``F -> log Z_F``
is exactly subadditive and translation invariant, so every cube estimate
``log Z_F / |F|`` is itself a certified upper bound for the limit.  The
reported ``fekete_bound`` is the minimum over recorded windows.

In one dimension a second certificate is available whenever the weighted
sum reduces to an ordinary pressure (ω = 1, a trivial factor, or an
injective single-site code): the Collatz-Wielandt bound on the transfer
operator over blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from . import _engine
from .potential import Potential
from .shiftspace import BlockCode, ShiftSystem, collapse_code, pattern_array, powers
from .window import BoxWindow, standard_folner

STABILITY_TOL = 1e-3


@dataclass(frozen=True)
class WeightedInstance:
    pi: BlockCode
    f: Potential
    omega: float
    collar: int = 0

    def __post_init__(self):
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError(f"omega must lie in [0, 1], got {self.omega}")
        if self.collar < 0:
            raise ValueError("collar must be >= 0")
        if not self.f.system.same_as(self.pi.source):
            raise ValueError("potential and code live on different systems")

    @property
    def X(self) -> ShiftSystem:
        return self.pi.source

    @property
    def Y(self) -> ShiftSystem:
        return self.pi.target

    def with_potential(self, f: Potential) -> "WeightedInstance":
        return WeightedInstance(self.pi, f, self.omega, self.collar)

    def with_omega(self, omega: float) -> "WeightedInstance":
        return WeightedInstance(self.pi, self.f, omega, self.collar)


@dataclass(frozen=True)
class PressureRow:
    window: BoxWindow
    volume: int
    log_z: float
    estimate: float
    exact_sup: bool = True

    @property
    def side(self) -> int:
        return max(self.window.shape)


@dataclass
class PressureReport:
    rows: list
    fekete_bound: float
    spectral_bound: float | None = None
    stabilized: bool = False
    notes: dict = field(default_factory=dict)

    @property
    def upper(self) -> float:
        """Best certified upper bound on the limit."""
        if self.spectral_bound is None:
            return self.fekete_bound
        return min(self.fekete_bound, self.spectral_bound)

    @property
    def estimates(self) -> list:
        return [r.estimate for r in self.rows]

    @property
    def last(self) -> float:
        return self.rows[-1].estimate

    def csv_rows(self) -> list:
        header = ["window_side", "volume", "logZ", "estimate", "fekete_bound", "exact_sup_flag"]
        out = [header]
        best = np.inf
        for r in self.rows:
            best = min(best, r.estimate)
            out.append([r.side, r.volume, r.log_z, r.estimate, best, int(r.exact_sup)])
        return out


def partition_tables(inst: WeightedInstance, w: BoxWindow, engine: str = "auto", cap=None):
    wins = _engine.windows_for(w, inst.pi, inst.f.radius, inst.collar)
    return _engine.tables(inst.X, inst.pi, inst.f, inst.omega, wins, engine=engine, cap=cap)


def weighted_partition(inst: WeightedInstance, w: BoxWindow, engine: str = "auto", cap=None):
    """``(log Z_F, {A-pattern tuple: log Z_{F,A}})``; A-patterns live on ``w`` inflated by the collar."""
    t = partition_tables(inst, w, engine=engine, cap=cap)
    per_a = {tuple(int(s) for s in a): float(v) for a, v in zip(t.a_patterns, t.log_za)}
    return t.log_z, per_a


def log_partition(inst: WeightedInstance, w: BoxWindow, engine: str = "auto") -> float:
    return partition_tables(inst, w, engine=engine).log_z


def _as_windows(windows, d: int) -> list:
    out = []
    for w in windows:
        out.append(w if isinstance(w, BoxWindow) else standard_folner(d, int(w)))
    if not out:
        raise ValueError("at least one window is required")
    return out


# ---------------------------------------------------------------- spectral certificate


def transfer_radius_bound(sys: ShiftSystem, g: Potential, iters: int = 2000, tol: float = 1e-14) -> float:
    """Certified upper bound on ``log`` of the spectral radius of the block transfer operator.

    The operator acts on blocks of ``m`` symbols, ``m + 1`` covering every
    constraint and the potential's window; for any ``v ≥ 0`` supported on
    the states with arbitrarily long forward paths,
    ``ρ ≤ max_i (T v)_i / v_i``.
    """
    if sys.d != 1:
        raise ValueError("transfer bound is one-dimensional")
    k = sys.k
    m = max([s.size for s, _ in sys.constraints] + [2 * g.radius + 1, 2]) - 1
    codes = np.arange(k ** (m + 1), dtype=np.int64)
    logw = g.table[codes % k ** (2 * g.radius + 1)].astype(np.float64)
    for s, mask in sys.constraints:
        logw[~mask[codes % k**s.size]] = -np.inf
    logw = logw.reshape(k**m, k)
    nxt = (codes % k**m).reshape(k**m, k)

    def apply(lv):
        return logsumexp(logw + lv[nxt], axis=1)

    lv = np.zeros(k**m)
    # drop states with no forward continuation of length k^m (they carry no growth)
    for _ in range(k**m):
        lv = apply(lv)
        lv = np.where(np.isfinite(lv), 0.0, -np.inf)
    if not np.any(np.isfinite(lv)):
        return -np.inf
    best = np.inf
    for _ in range(iters):
        tv = apply(lv)
        live = np.isfinite(lv)
        ratio = tv[live] - lv[live]
        best = min(best, float(np.max(ratio)))
        if float(np.max(ratio) - np.min(ratio)) < tol:
            break
        top = np.max(tv)
        lv = tv - top
    return best


def spectral_bound(inst: WeightedInstance) -> float | None:
    X, pi = inst.X, inst.pi
    if X.d != 1:
        return None
    if inst.omega == 1.0:
        return transfer_radius_bound(X, inst.f)
    if pi.target.k == 1:
        return inst.omega * transfer_radius_bound(X, inst.f)
    if pi.is_single_site():
        adm = pattern_array(X, BoxWindow.interval(0, 0)).ravel().astype(np.int64)
        imgs = pi.rule[adm]
        if len(set(imgs.tolist())) == len(adm):
            return transfer_radius_bound(X, inst.f * inst.omega)
    return None


# ---------------------------------------------------------------- reports


def _report(rows, spectral=None, tol=STABILITY_TOL) -> PressureReport:
    est = [r.estimate for r in rows]
    stable = len(est) >= 2 and abs(est[-1] - est[-2]) <= tol
    return PressureReport(rows, float(min(est)), spectral, stable)


def pressure_estimate(inst: WeightedInstance, windows: Sequence, engine: str = "auto",
                      tol: float = STABILITY_TOL, spectral: bool = True) -> PressureReport:
    """Rows ``log Z_F / |F|`` over increasing windows with certified upper bounds."""
    rows = []
    for w in _as_windows(windows, inst.X.d):
        lz = log_partition(inst, w, engine=engine)
        rows.append(PressureRow(w, w.size, lz, lz / w.size, True))
    return _report(rows, spectral_bound(inst) if spectral else None, tol)


def plain_pressure(sys: ShiftSystem, f: Potential, windows: Sequence, **kw) -> PressureReport:
    """Ordinary pressure: ω = 1 over the one-point factor."""
    return pressure_estimate(WeightedInstance(collapse_code(sys), f, 1.0, 0), windows, **kw)


def conditional_entropy_top(pi: BlockCode, windows: Sequence, collar: int = 0,
                            engine: str = "auto") -> PressureReport:
    """Per window, ``max_A log #{B coding to A} / |F|``."""
    zero = Potential.constant(pi.source, 0.0)
    inst = WeightedInstance(pi, zero, 1.0, collar)
    rows = []
    for w in _as_windows(windows, pi.source.d):
        t = partition_tables(inst, w, engine=engine)
        lz = float(np.max(t.log_za))
        rows.append(PressureRow(w, w.size, lz, lz / w.size, True))
    return _report(rows)
