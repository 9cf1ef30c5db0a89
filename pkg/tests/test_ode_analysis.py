import numpy as np
import pytest

from lmpqsc.density_evolution import threshold_mb
from lmpqsc.ensemble import sample_graph
from lmpqsc.ode_analysis import (Lm1OdeState, Lm2OdeState, _edge_effects, integrate, lm1_derivative,
                                 lm1_graph_state, lm1_init, lm1_parts, lm1_simulated_drift,
                                 lm2_derivative, lm2_graph_state, lm2_init, lm2_simulated_drift,
                                 simulate_lm1_peeling, socket_probabilities, threshold_ode)


@pytest.fixture(scope="module")
def big_graph():
    from lmpqsc.ensemble import DegreeDistribution
    return sample_graph(DegreeDistribution.regular(3, 6), 1_000_000, seed=1)


def block_error(sim, ode, name):
    """max |sim - ode| relative to the block's sup-norm."""
    a, b = getattr(sim, name), getattr(ode, name)
    scale = np.abs(b).max()
    diff = np.abs(a - b).max()
    return float(diff / scale) if scale > 0 else float(diff)


# ---------------------------------------------------------------------------
# initial conditions
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("p", [0.0, 0.1, 0.3, 1.0])
def test_init_normalization(dd36, p):
    for st in (lm1_init(dd36, p), lm2_init(dd36, p)):
        assert st.n.sum() == pytest.approx(1.0, abs=1e-12)
        assert st.e_l + st.e_r == pytest.approx(1.0, abs=1e-12)


def test_init_examples(dd36):
    st = lm1_init(dd36, 0.1)
    assert st.n[5, 1] == pytest.approx(6 * 0.9 ** 5 * 0.1, abs=1e-12)
    assert st.n[5, 1] == pytest.approx(0.354294, abs=1e-6)
    assert lm1_init(dd36, 0.0).r.sum() == 0 and lm2_init(dd36, 0.0).r.sum() == 0
    assert lm1_init(dd36, 1.0).l.sum() == 0 and lm2_init(dd36, 1.0).l.sum() == 0
    with pytest.raises(ValueError):
        lm1_init(dd36, 1.5)


@pytest.mark.parametrize("p", [0.05, 0.2, 0.5])
def test_socket_partition(dd36, p):
    g = socket_probabilities(lm1_init(dd36, p).n, p)
    assert sum(g) == pytest.approx(1.0, abs=1e-12)
    # at t = 0 no check has lost its correct edges: IER1 sockets need a (0, 1) check
    assert g[2] == 0.0
    assert g[1] == pytest.approx((1 - p) ** 5, abs=1e-12)


def test_socket_census(dd36, big_graph):
    p = 0.2
    correct = np.random.default_rng(7).random(big_graph.n) >= p
    emp = lm2_graph_state(big_graph, correct)
    e0, e1, e2 = emp.eta_variable()
    census = np.array([e0, e2, e1]) / emp.e_r
    g = np.array(socket_probabilities(lm2_init(dd36, p).n, p))
    assert np.all(np.abs(census - g) <= 0.01 * g)


# ---------------------------------------------------------------------------
# derivatives
# ---------------------------------------------------------------------------

def test_weights_pure_cer(dd36):
    st = lm1_init(dd36, 0.1)
    st.n[0, 1] = 0.0
    assert st.weights() == (1.0, 0.0)


def test_cer_only_dl(dd36):
    st = lm1_init(dd36, 0.2)
    cer, _ = lm1_parts(st)
    k = np.arange(st.l.size)
    assert np.allclose(cer.l, -k * st.l / st.e_l, atol=1e-15)
    c1, _ = st.weights()
    assert np.allclose(lm1_derivative(st).l, c1 * cer.l, atol=1e-15)


def test_edge_conservation_of_parts(dd36):
    """Each move removes as many check-side edges as variable-side edges."""
    for p in (0.1, 0.2):
        st = lm1_init(dd36, p)
        for part in lm1_parts(st):
            assert part.n.sum() == pytest.approx(part.l.sum() + part.r.sum(), abs=1e-12)
        st2 = lm2_init(dd36, p)
        d = lm2_derivative(st2)
        assert d.n.sum() == pytest.approx(d.l.sum() + d.r.sum(), abs=1e-12)


def test_ier1_effect_only_at_01(dd36):
    n = lm1_init(dd36, 0.2).n
    _, _, w = _edge_effects(n, 0.3, 0.2)
    mask = np.ones_like(w, dtype=bool)
    mask[0, 1] = False
    assert np.all(w[mask] == 0) and w[0, 1] != 0


def test_lm2_collapses_to_cer(dd36):
    base = lm1_init(dd36, 0.15)
    n = base.n.copy()
    n[:, 1] = 0.0  # no IER1 / IER2 checks
    n /= n.sum()
    e_r = float((np.arange(n.shape[1]) * n / np.maximum(np.add.outer(np.arange(7), np.arange(7)), 1)).sum())
    r = np.zeros((4, 4, 4))
    r[3, 0, 0] = e_r  # degree-3 incorrect nodes, all edges NIE
    l = base.l * (1 - e_r) / base.l.sum()
    s2 = Lm2OdeState(l, r, n)
    assert s2.weights() == pytest.approx((1.0, 0.0, 0.0))
    s1 = Lm1OdeState(l, np.array([0, 0, 0, e_r]), n)
    d1, d2 = lm1_derivative(s1), lm2_derivative(s2)
    assert np.allclose(d1.l, d2.l, atol=1e-14) and np.allclose(d1.n, d2.n, atol=1e-14)
    assert np.allclose(d2.r, 0.0)


def test_lm1_drift_oracle(dd36, big_graph):
    p = 0.1
    correct = np.random.default_rng(8).random(big_graph.n) >= p
    sim = lm1_simulated_drift(big_graph, correct)
    ode = lm1_derivative(lm1_init(dd36, p))
    for name in ("l", "r", "n"):
        assert block_error(sim, ode, name) < 0.02, name
    # same comparison from the graph's own empirical state
    emp = lm1_derivative(lm1_graph_state(big_graph, correct))
    for name in ("l", "r", "n"):
        assert block_error(sim, emp, name) < 0.02, name


def test_lm2_drift_oracle(dd36, big_graph):
    p = 0.2
    correct = np.random.default_rng(7).random(big_graph.n) >= p
    sim = lm2_simulated_drift(big_graph, correct)
    ode = lm2_derivative(lm2_init(dd36, p))
    for name in ("l", "r", "n"):
        assert block_error(sim, ode, name) < 0.02, name


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("system", ["lm1", "lm2"])
def test_noiseless_success(dd36, system):
    res = integrate(system, dd36, 0.0, record_every=10)
    assert res.success and all(row[2] == 0 for row in res.trajectory)


@pytest.mark.parametrize("system,p,ok", [("lm1", .16, True), ("lm1", .18, False),
                                         ("lm2", .25, True), ("lm2", .27, False)])
def test_success_examples(dd36, system, p, ok):
    assert integrate(system, dd36, p).success is ok


def test_trajectory_invariants(dd36):
    res = integrate("lm1", dd36, 0.15, record_every=1)
    traj = np.array(res.trajectory)
    assert np.all(traj[:, 1:] >= -1e-9)
    # the recorded state itself: recompute edge balance along a re-run
    st = lm1_init(dd36, 0.15)
    drift = []
    x = st.pack()
    h = 1e-4
    for _ in range(3000):
        cur = st.unpack(x)
        drift.append(abs(cur.n.sum() - cur.e_l - cur.e_r))
        k1 = lm1_derivative(cur).pack()
        k2 = lm1_derivative(st.unpack(x + h / 2 * k1)).pack()
        k3 = lm1_derivative(st.unpack(x + h / 2 * k2)).pack()
        k4 = lm1_derivative(st.unpack(x + h * k3)).pack()
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    assert max(drift) < 1e-5


def test_success_ends_at_all_removed(dd36):
    res = integrate("lm1", dd36, 0.12)
    assert res.success and res.t_end == pytest.approx(1 / 3, abs=1e-4)


@pytest.mark.parametrize("eps_stop,delta", [(1e-7, 1e-5), (1e-9, 1e-7)])
def test_stop_rules_insensitive(dd36, eps_stop, delta):
    assert integrate("lm1", dd36, .165, eps_stop=eps_stop, delta_succ=delta).success
    assert not integrate("lm1", dd36, .173, eps_stop=eps_stop, delta_succ=delta).success


def test_bad_dt(dd36):
    with pytest.raises(ValueError):
        integrate("lm1", dd36, 0.1, dt=0.01)
    with pytest.raises(ValueError):
        integrate("lm3", dd36, 0.1)


def test_lm1_threshold(dd36):
    thr = threshold_ode("lm1", dd36)
    assert thr == pytest.approx(0.169, abs=3e-3)
    assert thr == pytest.approx(threshold_mb(dd36, "lm1"), abs=3e-3)


@pytest.mark.slow
def test_lm2_threshold(dd36):
    assert threshold_ode("lm2", dd36) == pytest.approx(0.259, abs=4e-3)


@pytest.mark.slow
def test_step_size_convergence(dd36):
    a = threshold_ode("lm1", dd36, tol=2e-5, dt=1e-4, lo=.16, hi=.18)
    b = threshold_ode("lm1", dd36, tol=2e-5, dt=5e-5, lo=.16, hi=.18)
    assert abs(a - b) < 1e-4


def test_peeling_simulation_small(dd36):
    g = sample_graph(dd36, 20_000, seed=3)
    ok = np.random.default_rng(3).random(g.n) >= 0.1
    run = simulate_lm1_peeling(g, ok, seed=1, stride=500)
    assert run.e_r_final == 0 and not run.alive.any()
    assert run.steps == g.n
    bad = np.random.default_rng(3).random(g.n) >= 0.25
    run = simulate_lm1_peeling(g, bad, seed=1, stride=500)
    assert run.e_r_final > 0.1


def test_lm1_drift_oracle_mid_trajectory(dd36):
    g = sample_graph(dd36, 200_000, seed=4)
    correct = np.random.default_rng(4).random(g.n) >= 0.15
    run = simulate_lm1_peeling(g, correct, seed=2, max_steps=30_000)
    st = lm1_graph_state(g, correct, run.alive)
    assert 0 < st.weights()[1] < 1  # both move types active
    sim = lm1_simulated_drift(g, correct, run.alive)
    ode = lm1_derivative(st)
    for name in ("l", "r", "n"):
        assert block_error(sim, ode, name) < 0.02, name
