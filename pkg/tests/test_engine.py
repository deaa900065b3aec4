import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings, strategies as st

from oracles import weighted_logz, words_1d
from presslab import _engine
from presslab.errors import EmptySystemError
from presslab.potential import Potential
from presslab.shiftspace import BlockCode, ShiftSystem, full_shift, golden_mean
from presslab.window import BoxWindow


def random_instance(rng):
    k = int(rng.integers(2, 4))
    forbidden = [list(rng.integers(0, k, size=int(rng.integers(2, 4)))) for _ in range(int(rng.integers(0, 3)))]
    X = ShiftSystem(1, k, forbidden)
    lo = int(rng.integers(-1, 1))
    shape = BoxWindow.interval(lo, lo + int(rng.integers(0, 2)))
    Y = full_shift(2)
    table = rng.integers(0, 2, size=k**shape.size)
    table[0], table[-1] = 0, 1
    try:
        code = BlockCode(X, Y, table, shape=shape)
    except ValueError:
        code = BlockCode(X, full_shift(1), [0] * k**shape.size, shape=shape)
    r = int(rng.integers(0, 2))
    f = Potential.random(X, r, rng)
    return X, forbidden, code, f


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10**6), st.integers(1, 6), st.sampled_from([0.0, 0.3, 1.0]), st.integers(0, 1))
def test_engines_match_definition(seed, n, omega, collar):
    rng = np.random.default_rng(seed)
    try:
        X, forbidden, code, f = random_instance(rng)
    except EmptySystemError:
        assume(False)
    wins = _engine.windows_for(BoxWindow.interval(0, n - 1), code, f.radius, collar)
    assume(wins.ext.size <= 9)
    shape_offs = list(range(code.shape.lower[0], code.shape.upper[0] + 1))

    def fval(w):
        return float(f.table[int(np.dot(w, X.k ** np.arange(len(w) - 1, -1, -1)))])

    expected, za = weighted_logz(X.k, words_1d(forbidden), shape_offs, lambda w: int(code.rule[int(np.dot(w, X.k ** np.arange(len(w) - 1, -1, -1)))]),
                                 f.radius, fval, omega, 0, n - 1, collar)
    b = _engine.brute_tables(X, code, f, omega, wins)
    assert b.log_z == pytest.approx(expected, abs=1e-10)
    assert len(b.a_patterns) == len(za)
    if _engine.chain_applicable(X, code, f, wins):
        c = _engine.chain_tables(X, code, f, omega, wins)
        assert c.log_z == pytest.approx(b.log_z, abs=1e-10)
        cb = {tuple(a): v for a, v in zip(c.a_patterns.tolist(), c.log_za)}
        bb = {tuple(a): v for a, v in zip(b.a_patterns.tolist(), b.log_za)}
        assert cb.keys() == bb.keys()
        for a in bb:
            assert cb[a] == pytest.approx(bb[a], abs=1e-10)


@pytest.mark.parametrize("seed", range(8))
def test_chain_matches_brute_longer(seed):
    rng = np.random.default_rng(100 + seed)
    try:
        X, _, code, f = random_instance(rng)
    except EmptySystemError:
        pytest.skip("empty random system")
    for n in (6, 8):
        for omega in (0.25, 0.8):
            wins = _engine.windows_for(BoxWindow.interval(0, n - 1), code, f.radius, 1)
            c = _engine.chain_tables(X, code, f, omega, wins)
            b = _engine.brute_tables(X, code, f, omega, wins)
            assert c.log_z == pytest.approx(b.log_z, abs=1e-9)


def test_combine_is_weighted_logsumexp():
    v = np.array([0.5, 2.0, -1.0])
    assert _engine.combine(v, 0.4) == pytest.approx(np.log(np.sum(np.exp(0.4 * v))), abs=1e-14)
    # large values stay finite
    assert np.isfinite(_engine.combine(np.array([800.0, 799.0]), 1.0))


def test_window_layout():
    X = golden_mean()
    code = BlockCode(X, X, lambda w: w[1], shape=BoxWindow.interval(0, 1))
    wins = _engine.windows_for(BoxWindow.interval(0, 4), code, 2, 1)
    assert wins.y == BoxWindow.interval(-1, 5)
    assert wins.x == BoxWindow.interval(-1, 6)
    assert wins.ext == BoxWindow.interval(-2, 6)
