"""Lower bounds from parametric measures, sandwich certificates and the property checks.

The objective for a measure μ is ``ω h_μ + (1 - ω) h_{π*μ} + ω ∫ f dμ``.
It is maximised over Bernoulli or first-order Markov families by
multi-start Nelder-Mead in softmax coordinates.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import CapExceededError, ConfigError
from .measure import (
    MarkovMeasure,
    PatternWeights,
    ProductMeasure,
    adjacency,
    gibbs_candidate,
    project_to_family,
    weighted_entropy_parts,
)
from .potential import Potential, integrate
from .pressure import (
    PressureReport,
    WeightedInstance,
    _as_windows,
    log_partition,
    pressure_estimate,
)
from .shiftspace import BlockCode, ShiftSystem, all_words, full_shift, pattern_array, powers
from .window import BoxWindow, k_boundary

TIE_TOL = 1e-9


@dataclass(frozen=True)
class Budget:
    restarts: int = 8
    maxiter_per_param: int = 200
    fatol: float = 1e-9
    xatol: float = 1e-7
    seed: int = 0
    warm_start: bool = True
    warm_window: int = 6
    entropy_window: int = 8

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("budget needs at least one restart")


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("PRESSLAB_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------- families


def family_size(system: ShiftSystem, family: str) -> int:
    if family == "bernoulli":
        return system.k
    if family == "markov":
        return int(adjacency(system).sum())
    raise ConfigError(f"unknown measure family {family!r}")


def measure_from_theta(system: ShiftSystem, family: str, theta):
    """Softmax map from unconstrained coordinates to a family member."""
    theta = np.asarray(theta, dtype=np.float64)
    if family == "bernoulli":
        z = np.exp(theta - theta.max())
        return ProductMeasure(system, z / z.sum())
    if family == "markov":
        allowed = adjacency(system)
        T = np.full(allowed.shape, -np.inf)
        T[allowed] = theta
        T = np.exp(T - np.max(T, axis=1, keepdims=True))
        T[~allowed] = 0.0
        return MarkovMeasure(system, T / T.sum(axis=1, keepdims=True))
    raise ConfigError(f"unknown measure family {family!r}")


def theta_from_measure(mu, family: str, floor: float = -30.0) -> np.ndarray:
    with np.errstate(divide="ignore"):
        if family == "bernoulli":
            return np.maximum(np.log(mu.p), floor)
        if family == "markov":
            return np.maximum(np.log(mu.P[adjacency(mu.system)]), floor)
    raise ConfigError(f"unknown measure family {family!r}")


def check_family(system: ShiftSystem, family: str):
    if family == "bernoulli":
        try:
            ProductMeasure(system, np.full(system.k, 1.0 / system.k))
        except ValueError as exc:
            raise ConfigError(f"Bernoulli family with full support is not supported by this system: {exc}")
    elif family == "markov":
        if system.d != 1 or system.memory > 1:
            raise ConfigError("Markov family needs a one-dimensional system with memory <= 1")
    else:
        raise ConfigError(f"unknown measure family {family!r}")


@dataclass(frozen=True)
class MeasureValue:
    value: float  # objective with the entropy estimate
    lower: float  # certified lower bound
    entropy_kinds: tuple
    integral: float


def evaluate_measure(inst: WeightedInstance, mu, entropy_window: int = 8) -> MeasureValue:
    parts = weighted_entropy_parts(mu, inst.pi, inst.omega, entropy_window)
    integral = integrate(inst.f, mu)
    return MeasureValue(
        parts.value + inst.omega * integral,
        parts.lower + inst.omega * integral,
        parts.kinds,
        integral,
    )


# ---------------------------------------------------------------- optimizer


@dataclass
class VariationalResult:
    best_measure: object
    params: np.ndarray
    lower_bound: float
    value: float
    trace: list
    restarts: int
    seed: int
    converged: bool
    entropy_kinds: tuple = ()
    family: str = "bernoulli"


def _run_restart(inst, family, theta0, budget):
    trace = []

    def neg(theta):
        try:
            mu = measure_from_theta(inst.X, family, theta)
        except ValueError:
            return np.inf
        v = evaluate_measure(inst, mu, budget.entropy_window).lower
        trace.append(v)
        return -v

    n = len(theta0)
    res = minimize(
        neg,
        np.asarray(theta0, dtype=np.float64),
        method="Nelder-Mead",
        options={
            "maxiter": budget.maxiter_per_param * n,
            "maxfev": 4 * budget.maxiter_per_param * n,
            "fatol": budget.fatol,
            "xatol": budget.xatol,
        },
    )
    mu = measure_from_theta(inst.X, family, res.x)
    return -float(res.fun), mu, bool(res.success), trace


def optimize(inst: WeightedInstance, family: str = "bernoulli", budget: Budget | None = None) -> VariationalResult:
    """Maximise the certified objective over a measure family; deterministic given the seed."""
    budget = Budget() if budget is None else budget
    check_family(inst.X, family)
    n = family_size(inst.X, family)
    rng = np.random.default_rng(budget.seed)
    starts = [np.zeros(n)] + [rng.normal(scale=1.5, size=n) for _ in range(budget.restarts - 1)]
    if budget.warm_start:
        try:
            warm = gibbs_warm_start(inst, BoxWindow.cube(inst.X.d, 0, budget.warm_window - 1), family)
            starts.append(theta_from_measure(warm, family))
        except (CapExceededError, ValueError):  # the warm start is optional
            pass
    workers = min(thread_count(), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(lambda t: _run_restart(inst, family, t, budget), starts))
    else:
        results = [_run_restart(inst, family, t, budget) for t in starts]
    best = max(r[0] for r in results)
    close = [r for r in results if r[0] >= best - TIE_TOL]
    chosen = min(close, key=lambda r: tuple(r[1].params.tolist()))
    mu = chosen[1]
    # recompute the reported bound from the chosen measure alone
    mv = evaluate_measure(inst, mu, budget.entropy_window)
    trace = [(i, v) for i, v in enumerate(chosen[3])]
    return VariationalResult(
        mu, mu.params, mv.lower, mv.value, trace, len(starts), budget.seed, chosen[2], mv.entropy_kinds, family
    )


def gibbs_warm_start(inst: WeightedInstance, w: BoxWindow, family: str):
    """Project the finite-window Gibbs candidate onto the family."""
    weights = gibbs_candidate(inst, w)
    return project_to_family(weights, family, inst.X)


@dataclass
class SandwichCertificate:
    upper: PressureReport
    lower: VariationalResult
    gap: float

    @property
    def ok(self) -> bool:
        return self.gap >= -1e-9


def sandwich(inst: WeightedInstance, windows, family: str = "bernoulli", budget: Budget | None = None,
             engine: str = "auto") -> SandwichCertificate:
    rep = pressure_estimate(inst, windows, engine=engine)
    low = optimize(inst, family, budget)
    gap = rep.upper - low.lower_bound
    if gap < -1e-9:
        raise AssertionError(f"upper bound {rep.upper} below lower bound {low.lower_bound}")
    return SandwichCertificate(rep, low, gap)


# ---------------------------------------------------------------- pressure properties


@dataclass
class CheckResult:
    name: str
    passed: bool = True
    worst: float = -np.inf  # largest violation seen (positive means failure)
    witness: dict = field(default_factory=dict)
    count: int = 0

    def record(self, violation: float, tol: float, **witness):
        self.count += 1
        if violation > self.worst:
            self.worst = float(violation)
            if violation > tol or not self.witness:
                self.witness = {k: v for k, v in witness.items()}
        if violation > tol:
            self.passed = False


@dataclass
class SuiteReport:
    checks: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def summary(self) -> dict:
        return {
            name: {"passed": c.passed, "worst_violation": c.worst, "count": c.count, "witness": c.witness}
            for name, c in self.checks.items()
        }


def _abs_potential(h: Potential) -> Potential:
    return Potential(h.system, h.radius, np.abs(h.table))


def pressure_properties_suite(pi: BlockCode, windows, pairs, omegas, collar: int = 0,
                              lambdas=(0.25, 0.5, 0.75), shift_c: float = 0.37, g=None,
                              tol: float = 1e-10, exact_tol: float = 1e-12) -> SuiteReport:
    """Finite-window checks of monotonicity, bounds, Lipschitz, convexity, constant shift,
    cocycle invariance and subadditivity for each potential pair (f, h)."""
    X = pi.source
    names = ["monotone", "bounds", "lipschitz", "convex", "constant_shift", "cocycle", "subadditive",
             "anchors", "omega_monotone"]
    checks = {n: CheckResult(n) for n in names}
    ws = _as_windows(windows, X.d)
    g = (1,) + (0,) * (X.d - 1) if g is None else tuple(g)
    zero = Potential.constant(X, 0.0)
    ny = {}
    for w in ws:
        nx = len(pattern_array(X, w))
        wy = w.inflate(collar)
        ny[w] = len(pattern_array(pi.target, wy))
        # anchors at f = 0
        e1 = log_partition(WeightedInstance(pi, zero, 1.0, collar), w) / w.size
        e0 = log_partition(WeightedInstance(pi, zero, 0.0, collar), w) / w.size
        if collar == 0:
            wx = w.hull(w.minkowski(pi.shape))
            nx = len(pattern_array(X, wx))
            checks["anchors"].record(abs(e1 - math.log(nx) / w.size), exact_tol, window=repr(w), omega=1.0)
            checks["anchors"].record(abs(e0 - math.log(ny[w]) / w.size), exact_tol, window=repr(w), omega=0.0)
        prev = -np.inf
        for om in sorted(set(list(omegas) + [0.0, 1.0])):
            e = log_partition(WeightedInstance(pi, zero, om, collar), w) / w.size
            checks["omega_monotone"].record(prev - e, tol, window=repr(w), omega=om)
            prev = e
    bdry = {w: len(k_boundary(w, BoxWindow(tuple(min(0, t) for t in g), tuple(max(0, t) for t in g)))) for w in ws}
    for idx, (f, h) in enumerate(pairs):
        fh_up = f + _abs_potential(h)
        for om in omegas:
            def est(pot, w, om=om):
                return log_partition(WeightedInstance(pi, pot, om, collar), w) / w.size

            for w in ws:
                wit = {"pair": idx, "omega": om, "window": repr(w)}
                ef, eh, e0 = est(f, w), est(h, w), est(zero, w)
                checks["monotone"].record(ef - est(fh_up, w), tol, **wit)
                checks["bounds"].record(max(e0 + om * f.min - ef, ef - e0 - om * f.max), tol, **wit)
                checks["lipschitz"].record(abs(ef - eh) - om * f.distance(h), tol, **wit)
                for lam in lambdas:
                    mix = f * lam + h * (1 - lam)
                    checks["convex"].record(est(mix, w) - (lam * ef + (1 - lam) * eh), tol, lam=lam, **wit)
                checks["constant_shift"].record(abs(est(f + shift_c, w) - (ef + om * shift_c)), exact_tol, **wit)
                cob = f + h.shifted(g) - h
                bound = 2 * om * h.sup_norm * bdry[w] / w.size
                checks["cocycle"].record(abs(est(cob, w) - ef) - bound, tol, bound=bound, **wit)
                checks["subadditive"].record(est(f + h, w) - (ef + eh), tol, **wit)
    return SuiteReport(checks)


# ---------------------------------------------------------------- measures and pressure


def _integral(f: Potential, mu) -> float:
    return integrate(f, mu)


def measure_criterion(mu, pi: BlockCode, omega: float, potentials, windows, collar: int = 0):
    """Largest ``ω ∫ f dμ - P_upper(f)`` over the potentials, with its witness index."""
    worst, arg = -np.inf, None
    for i, f in enumerate(potentials):
        rep = pressure_estimate(WeightedInstance(pi, f, omega, collar), windows)
        v = omega * _integral(f, mu) - rep.upper
        if v > worst:
            worst, arg = v, i
    return float(worst), arg


def search_violation(weights: PatternWeights, pi: BlockCode, omega: float, radius: int, windows,
                     steps: int = 60, start_scale: float = 1.0, stop_at: float = 0.25):
    """Ascent on a radius-``radius`` table for ``ω ∫ f dν - P_upper(f)``.

    ``ν`` only needs an exact marginal on ``[-r, r]^d``; for an invariant ν the
    supremum is ``-h^ω ≤ 0``, so a positive value certifies non-invariance.
    The search stops once the value exceeds ``stop_at``.
    """
    X = pi.source
    shape = BoxWindow.cube(X.d, -radius, radius)
    P, probs = weights.marginal(shape)
    codes = P.astype(np.int64) @ powers(X.k, shape.size)
    n = X.k**shape.size
    nu = np.zeros(n)
    np.add.at(nu, codes, probs)

    def J(theta):
        f = Potential(X, radius, theta)
        rep = pressure_estimate(WeightedInstance(pi, f, omega, 0), windows, spectral=False)
        return omega * float(nu @ f.table) - rep.upper

    theta = start_scale * (nu == nu.max()).astype(float)
    val = J(theta)
    step = 1.0
    for _ in range(steps):
        if val > stop_at:
            break
        grad = np.zeros(n)
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1e-5
            grad[i] = (J(theta + e) - J(theta - e)) / 2e-5
        if np.linalg.norm(grad) < 1e-10:
            break
        improved = False
        while step > 1e-6:
            cand = theta + step * grad / np.linalg.norm(grad)
            cv = J(cand)
            if cv > val:
                theta, val, improved = cand, cv, True
                step = min(step * 1.5, 8.0)
                break
            step *= 0.5
        if not improved:
            break
    return float(val), Potential(X, radius, theta)


def _conditional_table(mu, r: int) -> np.ndarray:
    """``μ(x_0 | x_{-r} .. x_{-1})`` as a table on ``[-r, r]`` (one-dimensional)."""
    X = mu.system
    shape = BoxWindow.cube(1, -r, r)
    Pj, pj = mu.marginal(BoxWindow((-r,), (0,)))
    Pl, pl = mu.marginal(BoxWindow((-r,), (-1,)))
    joint = np.zeros(X.k ** (r + 1))
    joint[Pj.astype(np.int64) @ powers(X.k, r + 1)] = pj
    left = np.zeros(X.k**r)
    left[Pl.astype(np.int64) @ powers(X.k, r)] = pl
    words = all_words(X.k, shape.size)
    jc = words[:, : r + 1] @ powers(X.k, r + 1)
    lc = words[:, :r] @ powers(X.k, r)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(left[lc] > 0, joint[jc] / np.where(left[lc] > 0, left[lc], 1.0), 0.0)


def potential_grid(mu, radii=(0, 1), clips=(5.0, 10.0, 20.0, 40.0), betas=np.linspace(-3, 3, 13)):
    """Constants, ``β · symbol`` and clipped log-probability potentials of μ's local laws."""
    X = mu.system
    grid = [Potential.constant(X, 0.0)]
    for b in betas:
        grid.append(Potential.symbol_values(X, b * np.arange(X.k)))
    for r in radii:
        if r == 0:
            P, probs = mu.marginal(BoxWindow.cube(X.d, 0, 0))
            cond = np.zeros(X.k)
            cond[P.astype(np.int64).ravel()] = probs
        elif X.d == 1:
            cond = _conditional_table(mu, r)
        else:
            continue
        for clip in clips:
            with np.errstate(divide="ignore"):
                grid.append(Potential(X, r, np.maximum(np.log(cond), -clip)))
    return grid


def entropy_from_pressure(mu, pi: BlockCode, omega: float, grid, windows, collar: int = 0) -> float:
    """``min_f (P_upper(f) - ω ∫ f dμ)`` over the grid."""
    vals = []
    for f in grid:
        rep = pressure_estimate(WeightedInstance(pi, f, omega, collar), windows)
        vals.append(rep.upper - omega * _integral(f, mu))
    return float(min(vals))


@dataclass
class EquilibriumCheck:
    measure: object
    pressure: float
    objective: float
    defect: float
    is_equilibrium: bool
    tangent_ok: bool | None
    tangent_worst: float | None = None


def equilibrium_check(inst: WeightedInstance, mu, windows, tol: float = 1e-6, tangents=None,
                      seed: int = 0, n_tangent: int = 10, entropy_window: int = 8) -> EquilibriumCheck:
    """Defect ``P_upper - (h^ω_μ + ω ∫ f dμ)``; when it is within ``tol`` also test that μ
    is tangent: ``P(f + h) - P(f) ≥ ω ∫ h dμ`` for sampled h."""
    rep = pressure_estimate(inst, windows)
    mv = evaluate_measure(inst, mu, entropy_window)
    defect = rep.upper - mv.value
    eq = defect <= tol
    tangent_ok, worst = None, None
    if eq:
        if tangents is None:
            rng = np.random.default_rng(seed)
            tangents = [Potential.random(inst.X, 0, rng) for _ in range(n_tangent)]
        worst = -np.inf
        for h in tangents:
            up = pressure_estimate(inst.with_potential(inst.f + h), windows).upper
            worst = max(worst, inst.omega * _integral(h, mu) - (up - rep.upper))
        tangent_ok = worst <= tol
    return EquilibriumCheck(mu, rep.upper, mv.value, float(defect), bool(eq), tangent_ok, worst)


def perturbation_sweep(inst: WeightedInstance, family: str, eps=(1e-3, 1e-2, 1e-1), seed: int = 0,
                       budget: Budget | None = None) -> list:
    """Distance between optimizer parameters at f and at f + ε h for a random h."""
    rng = np.random.default_rng(seed)
    h = Potential.random(inst.X, inst.f.radius, rng)
    base = optimize(inst, family, budget)
    out = []
    for e in eps:
        r = optimize(inst.with_potential(inst.f + h * e), family, budget)
        out.append((float(e), float(np.max(np.abs(r.params - base.params)))))
    return out


# ---------------------------------------------------------------- carpets


def mcmullen_dimension(digits, n: int, m: int) -> float:
    """Closed form ``log_m Σ_j a_j^(log_n m)``, a_j the number of digits in row j."""
    rows = {}
    for col, row in set(map(tuple, digits)):
        rows[row] = rows.get(row, 0) + 1
    expo = math.log(m) / math.log(n)
    return math.log(math.fsum(a**expo for a in rows.values())) / math.log(m)


@dataclass
class CarpetResult:
    dimension: float
    oracle: float
    omega: float
    result: VariationalResult


def carpet_system(digits, n: int, m: int):
    digits = sorted(set((int(c), int(r)) for c, r in digits))
    if not digits:
        raise ValueError("digit set is empty")
    if not (n >= m >= 2):
        raise ValueError("need n >= m >= 2")
    for c, r in digits:
        if not (0 <= c < n and 0 <= r < m):
            raise ValueError(f"digit {(c, r)} outside the {n}x{m} grid")
    rows = sorted({r for _, r in digits})
    X = full_shift(len(digits), name="digits")
    Y = full_shift(len(rows), name="rows")
    pi = BlockCode(X, Y, [rows.index(r) for _, r in digits], name="row")
    return X, pi


def carpet_dimension(digits, n: int, m: int, budget: Budget | None = None) -> CarpetResult:
    X, pi = carpet_system(digits, n, m)
    omega = math.log(m) / math.log(n)
    inst = WeightedInstance(pi, Potential.constant(X, 0.0), omega, 0)
    res = optimize(inst, "bernoulli", budget)
    return CarpetResult(res.lower_bound / math.log(m), mcmullen_dimension(digits, n, m), omega, res)
