import itertools

import numpy as np
import pytest

from lmpqsc.channel import QscChannel, transmit
from lmpqsc.ensemble import sample_graph
from lmpqsc.galois import gf
from lmpqsc.lmp_decoder import (DecoderConfig, ListMessage, Status, check_update, decode,
                                decode_reference, variable_update)
from lmpqsc.nb_decoders import lm2_mb_decode

F8 = gf(8)
U, V, E = ListMessage.unverified, ListMessage.verified, ListMessage.erasure


def test_message_validation():
    with pytest.raises(ValueError):
        ListMessage(Status.VERIFIED, (1, 2))
    with pytest.raises(ValueError):
        ListMessage(Status.UNVERIFIED, ())
    assert U((3, 1, 3)).symbols == (1, 3)


def test_check_all_verified_unit_weights():
    out = check_update([V(3), V(5), V(9)], [1, 1, 1, 1], 4, F8)
    assert out == V(3 ^ 5 ^ 9)


def test_check_all_verified_weighted(rng):
    for _ in range(50):
        vals = [int(v) for v in rng.integers(0, 256, 4)]
        w = [int(x) for x in rng.integers(1, 256, 5)]
        out = check_update([V(v) for v in vals], w, 2, F8)
        s = 0
        for wi, vi in zip(w, vals):
            s ^= F8.mul(wi, vi)
        assert F8.add(s, F8.mul(w[-1], out.symbols[0])) == 0


def test_check_erasure_absorbs():
    assert check_update([V(1), E(), U((2,))], [1, 1, 1, 1], 8, F8) == E()


@pytest.mark.parametrize("s_max", [8, 11, 12, 16])
def test_check_list_product(s_max):
    a, b = U((1, 2, 3)), U((16, 32, 64, 128))
    w = [7, 11, 13]
    combos = {F8.mul(F8.add(F8.mul(w[0], x), F8.mul(w[1], y)), F8.inv(w[2]))
              for x, y in itertools.product(a.symbols, b.symbols)}
    out = check_update([a, b], w, s_max, F8)
    if len(combos) > s_max:
        assert out == E()
    else:
        assert out == U(tuple(combos))


def test_variable_all_erasure_gives_channel():
    assert variable_update([E(), E()], 42, 4) == U((42,))


def test_variable_single_verified():
    assert variable_update([V(7), E(), E()], 42, 4) == V(7)


def test_variable_verified_disagreement():
    assert variable_update([V(7), V(8)], 42, 4) == U((42,))


def test_variable_list_intersection(rng):
    for _ in range(100):
        u = int(rng.integers(1000, 2000))
        a = set(rng.choice(500, 3, replace=False).tolist()) | {u}
        b = set((500 + rng.choice(500, 2, replace=False)).tolist()) | {u}
        common = a & b
        assert common == {u}
        assert variable_update([U(tuple(a)), U(tuple(b))], 9999, 16) == V(u)


def test_variable_channel_match_verifies():
    assert variable_update([U((3, 4)), E()], 4, 4) == V(4)


def test_variable_union_and_truncation():
    assert variable_update([U((3,)), U((5,))], 7, 4) == U((3, 5, 7))
    assert variable_update([U((3,)), U((5,))], 7, 2) == U((7,))


def test_single_symbol_lists_stay_single(rng):
    """s_max = 1 on a (3,6) code: check outputs never truncate."""
    for _ in range(200):
        ins = [U((int(x),)) if rng.random() < .7 else V(int(x)) for x in rng.integers(0, 256, 5)]
        out = check_update(ins, [int(x) for x in rng.integers(1, 256, 6)], 1, F8)
        assert out.status != Status.ERASURE and len(out.symbols) == 1


@pytest.mark.parametrize("s_max", [1, 8])
def test_noiseless_verified_in_two_iterations(dd36, s_max):
    g = sample_graph(dd36, 1000, seed=1)
    rep = decode(g, np.zeros(1000, dtype=np.uint64), DecoderConfig(s_max=s_max))
    assert rep.verified.all() and rep.n_symbol_errors == 0 and rep.iterations <= 2


@pytest.mark.parametrize("s_max,p", [(1, .15), (1, .2), (2, .2), (3, .25), (8, .2)])
def test_compiled_matches_reference(dd36, s_max, p):
    g = sample_graph(dd36, 120, seed=int(p * 100) + s_max, field=8)
    y = transmit(np.zeros(120, dtype=np.uint64), QscChannel(p, 8), seed=s_max)
    cfg = DecoderConfig(s_max=s_max, max_iterations=30)
    a = decode(g, y, cfg)
    b = decode_reference(g, y, cfg)
    assert np.array_equal(a.verified, b.verified)
    assert np.array_equal(a.estimates, b.estimates)
    assert a.trajectory == pytest.approx(b.trajectory, abs=0)


@pytest.mark.parametrize("p", [.1, .18, .2, .22])
def test_lmp1_equals_lm2_mb_on_36(dd36, p):
    for seed in range(5):
        g = sample_graph(dd36, 2000, seed=seed)
        y = transmit(np.zeros(2000, dtype=np.uint64), QscChannel(p), seed=seed)
        a = decode(g, y, DecoderConfig(s_max=1))
        b = lm2_mb_decode(g, y)
        assert a.trajectory == b.trajectory
        assert np.array_equal(a.verified, b.verified)


def test_no_false_verification_at_q32(dd36):
    g = sample_graph(dd36, 5000, seed=2)
    for p in (.15, .2, .25):
        for s_max in (1, 8):
            y = transmit(np.zeros(5000, dtype=np.uint64), QscChannel(p), seed=3)
            rep = decode(g, y, DecoderConfig(s_max=s_max))
            assert rep.n_false_verified == 0


def test_early_iterations_no_fv(dd36):
    """Within girth/2 iterations no type-II false verification can happen."""
    g = sample_graph(dd36, 3000, seed=5)
    y = transmit(np.zeros(3000, dtype=np.uint64), QscChannel(.25), seed=5)
    rep = decode(g, y, DecoderConfig(s_max=4, max_iterations=3))
    assert rep.n_false_verified == 0


def test_bad_length(dd36):
    g = sample_graph(dd36, 100, seed=0)
    with pytest.raises(ValueError):
        decode(g, np.zeros(99, dtype=np.uint64), DecoderConfig())
    with pytest.raises(ValueError):
        DecoderConfig(s_max=0)


def _fer(dd, p, trials, n=10_000, s_max=1):
    errs = 0
    for t in range(trials):
        ss = np.random.SeedSequence(2024, spawn_key=(int(p * 1000), t))
        gs, zs = ss.spawn(2)
        g = sample_graph(dd, n, seed=gs)
        y = transmit(np.zeros(n, dtype=np.uint64), QscChannel(p), seed=np.random.default_rng(zs))
        errs += decode(g, y, DecoderConfig(s_max=s_max)).frame_error
    return errs / trials


@pytest.mark.slow
def test_waterfall_lmp1(dd36):
    assert _fer(dd36, .18, 200) < .05
    assert _fer(dd36, .25, 200) > .95
