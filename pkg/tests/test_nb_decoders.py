import numpy as np
import pytest

from lmpqsc.channel import QscChannel, transmit
from lmpqsc.ensemble import sample_graph
from lmpqsc.nb_decoders import lm1_mb_decode, lm1_nb_decode, lm2_mb_decode, lm2_nb_decode


def instance(dd, n, p, seed, m=32):
    ss = np.random.SeedSequence(seed)
    gs, zs = ss.spawn(2)
    g = sample_graph(dd, n, seed=gs, field=m)
    y = transmit(np.zeros(n, dtype=np.uint64), QscChannel(p, m), seed=np.random.default_rng(zs))
    return g, y


@pytest.mark.parametrize("dec", [lm1_mb_decode, lm2_mb_decode])
def test_mb_noiseless(dd36, dec):
    g, y = instance(dd36, 1000, 0.0, 1)
    rep = dec(g, y)
    assert rep.verified.all() and rep.iterations <= 2


@pytest.mark.parametrize("dec", [lm1_nb_decode, lm2_nb_decode])
def test_nb_noiseless_all_removed(dd36, dec):
    g, y = instance(dd36, 1000, 0.0, 1)
    rep = dec(g, y)
    assert rep.verified.all() and rep.n_symbol_errors == 0


def test_single_error_pinned(dd36):
    g, _ = instance(dd36, 1000, 0.0, 2)
    y = np.zeros(1000, dtype=np.uint64)
    y[17] = 123456789
    for dec in (lm1_nb_decode, lm2_nb_decode, lm1_mb_decode, lm2_mb_decode):
        rep = dec(g, y)
        assert rep.verified.all() and rep.n_symbol_errors == 0


@pytest.mark.parametrize("p", [.1, .15, .169])
def test_lm1_mb_nb_sets_equal(dd36, p):
    for seed in range(60):
        g, y = instance(dd36, 1000, p, seed)
        a = lm1_nb_decode(g, y)
        b = lm1_mb_decode(g, y, max_iterations=10_000)
        assert np.array_equal(a.verified, b.verified)


@pytest.mark.parametrize("p", [.2, .25, .28])
def test_lm2_contains_lm1(dd36, p):
    for seed in range(40):
        g, y = instance(dd36, 1000, p, seed)
        a = lm1_nb_decode(g, y).verified
        b = lm2_nb_decode(g, y).verified
        assert np.all(b[a])


@pytest.mark.parametrize("dec", [lm1_nb_decode, lm2_nb_decode])
def test_peeling_confluent(dd36, dec):
    for seed in range(20):
        g, y = instance(dd36, 1000, .2 if dec is lm1_nb_decode else .26, seed)
        ref = dec(g, y).verified
        for k in range(5):
            assert np.array_equal(dec(g, y, order="random", seed=k).verified, ref)


@pytest.mark.parametrize("dec", [lm1_nb_decode, lm2_nb_decode])
def test_genie_matches_valuewise_at_q32(dd36, dec):
    for seed in range(20):
        g, y = instance(dd36, 1000, .2, seed)
        truth = np.zeros(1000, dtype=np.uint64)
        a = dec(g, y, truth=truth)
        b = dec(g, y, truth=truth, genie=True)
        assert np.array_equal(a.verified, b.verified)
        assert a.n_false_verified == 0


def test_small_field_can_false_verify(dd36):
    """Value-wise rules at q = 4 admit false verification."""
    fv = 0
    for seed in range(30):
        g, y = instance(dd36, 500, .2, seed, m=2)
        fv += lm1_nb_decode(g, y).n_false_verified
    assert fv > 0


def test_bad_order(dd36):
    g, y = instance(dd36, 100, .1, 0)
    with pytest.raises(ValueError):
        lm1_nb_decode(g, y, order="lifo")
    with pytest.raises(ValueError):
        lm1_nb_decode(g, y, genie=True)


def fer(dec, dd, p, n, trials, **kw):
    return np.mean([dec(*instance(dd, n, p, 10_000 + t), **kw).frame_error for t in range(trials)])


@pytest.mark.slow
def test_waterfalls(dd36):
    assert fer(lm1_mb_decode, dd36, .16, 10_000, 100) < .05
    assert fer(lm2_mb_decode, dd36, .20, 10_000, 100) < .1


@pytest.mark.slow
def test_lm2_nb_waterfall_large_n(dd36):
    assert fer(lm2_nb_decode, dd36, .25, 100_000, 20) < .2
    assert fer(lm2_nb_decode, dd36, .27, 100_000, 20) > .8
