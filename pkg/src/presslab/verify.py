"""Cross-module invariant checks run by ``presslab verify``."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp

from . import _engine
from .measure import gibbs_candidate, partition_entropy, pushforward_weights
from .potential import Potential
from .pressure import WeightedInstance, log_partition
from .shiftspace import BlockCode, full_shift, identity_code, fiber_product
from .variational import CheckResult, pressure_properties_suite
from .window import BoxWindow


def suite_code() -> BlockCode:
    """Full 3-shift onto the full 2-shift by 0 -> 0, 1 -> 1, 2 -> 1."""
    X, Y = full_shift(3, name="full3"), full_shift(2, name="full2")
    return BlockCode(X, Y, [0, 1, 1], name="merge12")


def check_log_sum_inequality(seed: int = 0, samples: int = 200, tol: float = 1e-12) -> CheckResult:
    """``Σ p_i (x_i - log p_i) ≤ log Σ exp(x_i)`` on random probability vectors."""
    rng = np.random.default_rng(seed)
    out = CheckResult("log_sum_inequality")
    for i in range(samples):
        n = int(rng.integers(1, 9))
        p = rng.dirichlet(np.ones(n))
        x = rng.normal(scale=3.0, size=n)
        lhs = math.fsum(p * x) + partition_entropy(p)
        out.record(lhs - float(logsumexp(x)), tol, sample=i)
    return out


def check_gibbs_identity(instances: int = 50, seed: int = 0, max_len: int = 10, tol: float = 1e-9,
                         weighted_partition_impl=None) -> CheckResult:
    """``ω H(δ) + (1 - ω) H(π*δ) + ω Σ δ sup S f = log Z`` for the finite-window Gibbs candidate.

    ``weighted_partition_impl(log_za, omega) -> log Z`` replaces the reduction
    over A-patterns; it exists so a faulty reduction can be shown to fail.
    """
    impl = _engine.combine if weighted_partition_impl is None else weighted_partition_impl
    rng = np.random.default_rng(seed)
    pi = suite_code()
    X = pi.source
    out = CheckResult("gibbs_identity")
    for i in range(instances):
        f = Potential.random(X, 0, rng, scale=2.0)
        omega = (0.3, 0.7)[i % 2]
        n = int(rng.integers(1, max_len + 1))
        w = BoxWindow.interval(0, n - 1)
        inst = WeightedInstance(pi, f, omega, 0)
        wins = _engine.windows_for(w, pi, f.radius, 0)
        t = _engine.brute_tables(X, pi, f, omega, wins)
        t.log_z = float(impl(t.log_za, omega))
        delta = gibbs_candidate(inst, w, tables=t)
        image = pushforward_weights(delta, pi, wins.y)
        lhs = (omega * partition_entropy(delta) + (1 - omega) * partition_entropy(image)
               + omega * math.fsum(delta.weights * t.b_sup))
        out.record(abs(lhs - t.log_z), tol, instance=i, omega=omega, length=n, lhs=lhs, log_z=t.log_z)
    return out


def check_fiber_inequality(windows=(1, 2, 4, 6, 8), seed: int = 0, tol: float = 1e-9) -> dict:
    """Per-window ``log Z(π, f) ≤ log Z(Π, f ∘ φ)``, with equality for φ = identity."""
    rng = np.random.default_rng(seed)
    pi = suite_code()
    X, Y = pi.source, pi.target
    f = Potential.random(X, 0, rng)
    eq = CheckResult("fiber_identity_equal")
    ineq = CheckResult("fiber_inequality")
    Yp = full_shift(4, name="full4")
    parity = BlockCode(Yp, Y, [0, 1, 0, 1], name="parity")
    for phi, check, exact in ((identity_code(Y), eq, True), (parity, ineq, False)):
        fib = fiber_product(pi, phi)
        g = f.compose(fib.varphi)
        for omega in (0.0, 0.3, 0.7, 1.0):
            for n in windows:
                w = BoxWindow.interval(0, n - 1)
                a = log_partition(WeightedInstance(pi, f, omega), w) / n
                b = log_partition(WeightedInstance(fib.Pi, g, omega), w) / n
                v = abs(a - b) if exact else a - b
                check.record(v, tol, omega=omega, length=n, lhs=a, rhs=b)
    return {eq.name: eq, ineq.name: ineq}


def check_properties(pairs: int = 20, seed: int = 0, windows=(8, 12), omegas=(0.3, 0.7)) -> dict:
    rng = np.random.default_rng(seed)
    pi = suite_code()
    X = pi.source
    ps = [(Potential.random(X, 0, rng), Potential.random(X, 0, rng)) for _ in range(pairs)]
    rep = pressure_properties_suite(pi, windows, ps, omegas)
    return {f"properties.{k}": v for k, v in rep.checks.items()}


def run_verify(seed: int = 0, weighted_partition_impl=None, quick: bool = False) -> dict:
    """Run every invariant; returns ``{name: CheckResult}``."""
    checks = {}
    c = check_log_sum_inequality(seed)
    checks[c.name] = c
    c = check_gibbs_identity(20 if quick else 50, seed, weighted_partition_impl=weighted_partition_impl)
    checks[c.name] = c
    checks.update(check_fiber_inequality(seed=seed))
    checks.update(check_properties(5 if quick else 20, seed))
    return checks
