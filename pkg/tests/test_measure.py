import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import logsumexp

from oracles import golden_parry
from presslab import _engine
from presslab.measure import (
    MarkovMeasure,
    MixtureMeasure,
    PatternWeights,
    ProductMeasure,
    block_entropy,
    conditional_block_entropies,
    cylinder_prob,
    entropy_rate,
    gibbs_candidate,
    partition_entropy,
    project_to_family,
    pushforward_entropy,
    pushforward_weights,
    weighted_entropy,
)
from presslab.potential import Potential, integrate
from presslab.pressure import WeightedInstance, log_partition
from presslab.shiftspace import (
    BlockCode,
    Pattern,
    ShiftSystem,
    collapse_code,
    count_patterns,
    full_shift,
    golden_mean,
    identity_code,
    pattern_array,
    product_shift,
)
from presslab.window import BoxWindow

LOG_PHI = math.log((1 + math.sqrt(5)) / 2)


def parity():
    return BlockCode(full_shift(4), full_shift(2), [0, 1, 0, 1])


def xor_code(X):
    return BlockCode(X, full_shift(2), lambda w: (w[0] + w[1]) % 2, shape=BoxWindow.interval(0, 1))


def random_markov(X, rng):
    A = np.ones((X.k, X.k))
    from presslab.measure import adjacency

    A = adjacency(X) * rng.uniform(0.05, 1.0, size=(X.k, X.k))
    return MarkovMeasure(X, A / A.sum(axis=1, keepdims=True))


# ---------------------------------------------------------------- cylinders and entropies


def test_cylinder_examples():
    X = full_shift(2)
    assert cylinder_prob(ProductMeasure(X, [0.5, 0.5]), Pattern.word([1, 0, 1])) == 0.125
    assert cylinder_prob(ProductMeasure(X, [1.0, 0.0]), Pattern.word([0, 1, 0])) == 0.0


def test_parry_cylinder():
    mu = MarkovMeasure.parry(golden_mean())
    stat, P = golden_parry()
    assert cylinder_prob(mu, Pattern.word([1, 0])) == pytest.approx(stat[1] * P[1][0], abs=1e-12)
    assert cylinder_prob(mu, Pattern.word([1, 0])) == pytest.approx(0.276393202250021, abs=1e-12)
    assert cylinder_prob(mu, Pattern.word([1, 1])) == 0.0


def test_partition_entropy_examples():
    assert partition_entropy(np.full(8, 1 / 8)) == pytest.approx(math.log(8), abs=1e-15)
    assert partition_entropy([1.0, 0.0]) == 0.0
    assert partition_entropy([0.25, 0.75]) == pytest.approx(0.5623351446188083, abs=1e-15)


def test_entropy_rate_examples():
    X = full_shift(2)
    assert entropy_rate(ProductMeasure(X, [0.5, 0.5])).value == pytest.approx(math.log(2), abs=1e-15)
    assert entropy_rate(ProductMeasure(X, [0.3, 0.7])).value == pytest.approx(0.6108643020548935, abs=1e-15)
    h = entropy_rate(MarkovMeasure.parry(golden_mean()))
    assert h.kind == "exact" and h.value == pytest.approx(LOG_PHI, abs=1e-12)


def test_product_measure_support_checked():
    with pytest.raises(ValueError):
        ProductMeasure(golden_mean(), [0.5, 0.5])
    ProductMeasure(golden_mean(), [1.0, 0.0])


def test_markov_rejects_forbidden_mass():
    with pytest.raises(ValueError):
        MarkovMeasure(golden_mean(), [[0.5, 0.5], [0.5, 0.5]])


@pytest.mark.parametrize("n", [1, 4, 7])
def test_cylinders_sum_to_one(n):
    w = BoxWindow.interval(0, n - 1)
    rng = np.random.default_rng(n)
    for mu in (ProductMeasure(full_shift(3), rng.dirichlet(np.ones(3))),
               MarkovMeasure.parry(golden_mean()),
               random_markov(ShiftSystem(1, 3, [[0, 2], [2, 2]]), rng)):
        P = pattern_array(mu.system, w)
        total = math.fsum(cylinder_prob(mu, Pattern(w, r)) for r in P)
        assert total == pytest.approx(1.0, abs=1e-12)
    mu2 = ProductMeasure(full_shift(2, 2), [0.2, 0.8])
    P = pattern_array(mu2.system, BoxWindow.cube(2, 0, 1))
    assert math.fsum(mu2.marginal(BoxWindow.cube(2, 0, 1))[1]) == pytest.approx(1.0, abs=1e-14)
    assert len(P) == 16


def test_markov_stationary():
    rng = np.random.default_rng(0)
    mu = random_markov(ShiftSystem(1, 3, [[1, 1]]), rng)
    assert np.abs(mu.pi @ mu.P - mu.pi).max() <= 1e-10
    assert np.allclose(mu.P.sum(axis=1), 1.0)


# ---------------------------------------------------------------- pushforwards


def test_pushforward_identity_is_marginal():
    mu = MarkovMeasure.parry(golden_mean())
    w = BoxWindow.interval(0, 4)
    pw = pushforward_weights(mu, identity_code(golden_mean()), w)
    P, probs = mu.marginal(w)
    assert {tuple(r): v for r, v in zip(P.tolist(), probs) if v > 0} == pytest.approx(pw.as_dict(), abs=1e-14)


def test_pushforward_collapse_is_point_mass():
    pw = pushforward_weights(ProductMeasure(full_shift(2), [0.3, 0.7]), collapse_code(full_shift(2)),
                             BoxWindow.interval(0, 3))
    assert pw.as_dict() == {(0, 0, 0, 0): 1.0}


def test_pushforward_parity_uniform():
    pw = pushforward_weights(ProductMeasure(full_shift(4), np.full(4, 0.25)), parity(), BoxWindow.interval(0, 3))
    assert len(pw.weights) == 16
    assert np.allclose(pw.weights, 1 / 16, atol=1e-15)


@pytest.mark.parametrize("n", [1, 3, 6])
def test_pushforward_entropy_examples(n):
    X = full_shift(2)
    assert pushforward_entropy(ProductMeasure(X, [0.5, 0.5]), identity_code(X), n).value == pytest.approx(math.log(2))
    assert pushforward_entropy(ProductMeasure(X, [0.5, 0.5]), collapse_code(X), n).value == 0.0
    e = pushforward_entropy(ProductMeasure(full_shift(4), np.full(4, 0.25)), parity(), n)
    assert e.value == pytest.approx(math.log(2), abs=1e-14)


def test_pushforward_entropy_markov_image():
    # x -> x0 xor x1 of a Bernoulli(p) source is a 1-dependent binary process
    mu = ProductMeasure(full_shift(2), [0.2, 0.8])
    e = pushforward_entropy(mu, xor_code(mu.system), 10)
    assert e.kind == "conditional"
    assert e.lower <= e.value
    # the source is recovered from the image up to one symbol, so both rates agree
    assert e.lower <= mu.entropy_rate() + 1e-12
    assert e.lower == pytest.approx(mu.entropy_rate(), abs=1e-9)


def _marginal_route(mu, code, w):
    src = w.minkowski(code.shape)
    P, probs = mu.marginal(src)
    return pushforward_weights(PatternWeights(src, P, probs / probs.sum()), code, w)


@pytest.mark.parametrize("seed", range(4))
def test_hidden_forward_matches_marginals(seed):
    rng = np.random.default_rng(seed)
    X = ShiftSystem(1, 3, [[2, 2]])
    mu = random_markov(X, rng)
    code = BlockCode(X, full_shift(2), lambda w: int(w[0] == 2 or w[1] == 0), shape=BoxWindow.interval(-1, 0))
    w = BoxWindow.interval(0, 5)
    a = pushforward_weights(mu, code, w).as_dict()
    b = _marginal_route(mu, code, w).as_dict()
    assert a.keys() == b.keys()
    for k in a:
        assert a[k] == pytest.approx(b[k], abs=1e-13)


@pytest.mark.parametrize("seed", range(4))
def test_pushforward_translation_consistent(seed):
    rng = np.random.default_rng(seed)
    X = golden_mean()
    mu = random_markov(X, rng)
    code = xor_code(X)
    big = pushforward_weights(mu, code, BoxWindow.interval(0, 5))
    left = pushforward_weights(mu, code, BoxWindow.interval(0, 4))
    P, probs = big.marginal(BoxWindow.interval(1, 5))
    Q, qprobs = big.marginal(BoxWindow.interval(0, 4))
    lp = left.as_dict()
    for rows, vals in ((P, probs), (Q, qprobs)):
        got = {tuple(r): v for r, v in zip(rows.tolist(), vals)}
        assert got.keys() == lp.keys()
        for k in lp:
            assert got[k] == pytest.approx(lp[k], abs=1e-13)


def shipped_examples():
    X2 = full_shift(2)
    gm = golden_mean()
    rng = np.random.default_rng(5)
    return [
        (ProductMeasure(X2, [0.2, 0.8]), xor_code(X2)),
        (MarkovMeasure.parry(gm), xor_code(gm)),
        (random_markov(ShiftSystem(1, 3, [[2, 2]]), rng), BlockCode(ShiftSystem(1, 3, [[2, 2]]), X2, [0, 1, 1])),
        (random_markov(gm, rng), BlockCode(gm, X2, lambda w: w[0] | w[1], shape=BoxWindow.interval(0, 1))),
    ]


@pytest.mark.parametrize("case", range(4))
def test_conditional_entropies_non_increasing(case):
    mu, code = shipped_examples()[case]
    h = conditional_block_entropies(mu, code, 10)
    assert all(b <= a + 1e-12 for a, b in zip(h, h[1:]))
    e = pushforward_entropy(mu, code, 10)
    assert e.lower <= e.value + 1e-15
    assert e.lower >= 0.0


def test_pushforward_lower_bound_tightens():
    mu, code = shipped_examples()[1]
    lows = [pushforward_entropy(mu, code, n).lower for n in (3, 6, 10)]
    highs = [pushforward_entropy(mu, code, n).value for n in (3, 6, 10)]
    assert all(b >= a - 1e-12 for a, b in zip(lows, lows[1:]))
    assert highs[-1] - lows[-1] < highs[0] - lows[0]


def test_weighted_entropy_examples():
    X = full_shift(2)
    mu = ProductMeasure(X, [0.3, 0.7])
    assert weighted_entropy(mu, collapse_code(X), 1.0) == pytest.approx(mu.entropy_rate(), abs=1e-15)
    assert weighted_entropy(mu, collapse_code(X), 0.0) == 0.0
    X6, pi = product_shift(2, 3)
    u = ProductMeasure(X6, np.full(6, 1 / 6))
    assert weighted_entropy(u, pi, 0.5) == pytest.approx(0.5 * math.log(6) + 0.5 * math.log(2), abs=1e-14)


def test_mixture_entropy_is_affine():
    X = full_shift(2)
    a, b = ProductMeasure(X, [0.1, 0.9]), ProductMeasure(X, [0.6, 0.4])
    mix = MixtureMeasure([a, b], [0.3, 0.7])
    assert mix.entropy_rate() == pytest.approx(0.3 * a.entropy_rate() + 0.7 * b.entropy_rate(), abs=1e-15)
    assert block_entropy(mix, BoxWindow.interval(0, 0)) == pytest.approx(partition_entropy([0.45, 0.55]))


# ---------------------------------------------------------------- Gibbs candidate and projection


def test_gibbs_uniform_at_zero_potential():
    gm = golden_mean()
    i = WeightedInstance(collapse_code(gm), Potential.constant(gm, 0.0), 1.0)
    d = gibbs_candidate(i, BoxWindow.interval(0, 5))
    assert len(d.weights) == count_patterns(gm, BoxWindow.interval(0, 5))
    assert np.allclose(d.weights, 1 / len(d.weights), atol=1e-15)


def test_gibbs_product_weights():
    X = full_shift(2)
    i = WeightedInstance(collapse_code(X), Potential.symbol_values(X, [0.0, 1.0]), 1.0)
    d = gibbs_candidate(i, BoxWindow.interval(0, 3))
    ones = d.patterns.sum(axis=1)
    expected = np.exp(ones) / (1 + math.e) ** 4
    assert np.allclose(d.weights, expected, atol=1e-15)


def test_gibbs_omega_zero_fiber_normalised():
    pi = BlockCode(full_shift(3), full_shift(2), [0, 1, 1])
    i = WeightedInstance(pi, Potential.constant(pi.source, 0.0), 0.0)
    n = 3
    d = gibbs_candidate(i, BoxWindow.interval(0, n - 1))
    for row, wt in zip(d.patterns, d.weights):
        fiber = 2 ** int(np.sum(row > 0))
        assert wt == pytest.approx(1 / fiber / 2**n, abs=1e-15)


def test_project_examples():
    X = full_shift(2)
    w = BoxWindow.interval(0, 2)
    P = pattern_array(X, w)
    mu = project_to_family(PatternWeights(w, P, np.full(8, 1 / 8)), "bernoulli", X)
    assert np.allclose(mu.p, [0.5, 0.5])
    mu = project_to_family(PatternWeights(w, np.zeros((1, 3), int), [1.0]), "bernoulli", X)
    assert np.allclose(mu.p, [1.0, 0.0])
    i = WeightedInstance(collapse_code(X), Potential.symbol_values(X, [0.0, 1.0]), 1.0)
    mu = project_to_family(gibbs_candidate(i, BoxWindow.interval(0, 5)), "bernoulli", X)
    assert mu.p == pytest.approx([0.2689414213699951, 0.7310585786300049], abs=1e-12)


def test_project_markov_degenerate_rows():
    gm = golden_mean()
    w = BoxWindow.interval(0, 3)
    mu = project_to_family(PatternWeights(w, np.zeros((1, 4), int), [1.0]), "markov", gm)
    assert mu.degenerate
    assert np.allclose(mu.P, [[1.0, 0.0], [1.0, 0.0]])


# ---------------------------------------------------------------- finite-window identities


def _gibbs_sides(pi, f, omega, n):
    i = WeightedInstance(pi, f, omega)
    w = BoxWindow.interval(0, n - 1)
    wins = _engine.windows_for(w, pi, f.radius, 0)
    t = _engine.brute_tables(pi.source, pi, f, omega, wins)
    d = gibbs_candidate(i, w, tables=t)
    image = pushforward_weights(d, pi, wins.y)
    lhs = omega * partition_entropy(d) + (1 - omega) * partition_entropy(image) + omega * math.fsum(d.weights * t.b_sup)
    return lhs, t.log_z


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.floats(0, 1), st.integers(1, 6), st.integers(0, 1))
def test_gibbs_identity(seed, omega, n, r):
    rng = np.random.default_rng(seed)
    X = golden_mean() if seed % 2 else full_shift(3)
    pi = xor_code(X) if seed % 3 else collapse_code(X)
    lhs, lz = _gibbs_sides(pi, Potential.random(X, r, rng, 2.0), omega, n)
    assert lhs == pytest.approx(lz, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=1, max_size=12), st.integers(0, 10**6))
def test_log_sum_inequality(x, seed):
    p = np.random.default_rng(seed).dirichlet(np.ones(len(x)))
    assert partition_entropy(p) + math.fsum(p * np.array(x)) <= logsumexp(x) + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.floats(0, 1), st.integers(1, 6))
def test_finite_window_variational_inequality(seed, omega, n):
    rng = np.random.default_rng(seed)
    X = golden_mean() if seed % 2 else full_shift(2)
    mu = random_markov(X, rng) if seed % 2 else ProductMeasure(X, rng.dirichlet(np.ones(2)))
    pi = xor_code(X)
    f = Potential.random(X, 0, rng)
    w = BoxWindow.interval(0, n - 1)
    wx = w.minkowski(pi.shape)
    hx = partition_entropy(mu.marginal(wx)[1])
    hy = partition_entropy(pushforward_weights(mu, pi, w))
    lhs = omega * hx + (1 - omega) * hy + omega * n * integrate(f, mu)
    assert lhs <= log_partition(WeightedInstance(pi, f, omega), w) + 1e-12
