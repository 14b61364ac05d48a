import numpy as np
import pytest

from ndda import algorithms as alg
from ndda.graph import Topology, erdos_renyi, metropolis_weights
from ndda.problem import LeastSquares, ProblemInstance, Quadratic, generate_lasso
from ndda.prox import L1Ball, Unconstrained


@pytest.fixture(scope="module")
def desk():
    inst, _ = generate_lasso(6, 20, 4, 0.01, 3, seed=2)
    P = metropolis_weights(erdos_renyi(6, 0.5, 2))
    return inst, P


def identical_instance(n=4, m=6):
    rng = np.random.default_rng(3)
    A, y = rng.normal(size=(3, m)), rng.normal(size=3)
    inst = ProblemInstance([LeastSquares(A, y) for _ in range(n)], L1Ball(m, 0.7))
    return inst, metropolis_weights(Topology.path(n))


def single_agent(m=5, seed=4):
    inst, _ = generate_lasso(1, m, 4, 0.01, 2, seed=seed)
    return inst, np.ones((1, 1))


def test_control_sequences():
    c = alg.ControlSequence("inverse_sqrt", 2.0)
    assert c(0) == 2.0 and c(3) == pytest.approx(1.0)
    assert alg.ControlSequence("constant", 0.3)(100) == 0.3
    with pytest.raises(ValueError):
        alg.ControlSequence("constant", 0.0)


def test_ndda_init(desk):
    inst, P = desk
    st = alg.ndda_init(inst, P)
    g0 = inst.gradients(np.zeros((inst.n, inst.m)))
    assert not np.any(st.x) and not np.any(st.z)
    for arr in (st.s, st.h, st.grad):
        np.testing.assert_array_equal(arr, g0)


def test_ndda_init_zero_data():
    inst, _ = generate_lasso(3, 5, 2, 0.0, 0, seed=1)
    st = alg.ndda_init(inst, metropolis_weights(Topology.path(3)))
    assert not np.any(st.s) and not np.any(st.h)


def test_ndda_init_single_agent():
    inst, P = single_agent()
    st = alg.ndda_init(inst, P)
    np.testing.assert_allclose(st.s[0], inst.gradient(np.zeros(inst.m)), rtol=1e-14)
    np.testing.assert_array_equal(st.s, st.h)


def test_ndda_conservation(desk):
    inst, P = desk
    st = alg.ndda_init(inst, P)
    for _ in range(300):
        st = alg.ndda_round(st, inst, P, 1e-3)
        g = st.grad.mean(axis=0)
        scale = 1e-9 * (1 + np.linalg.norm(g))
        assert np.linalg.norm(st.h.mean(axis=0) - g) <= scale
        assert np.linalg.norm(st.s.mean(axis=0) - g) <= scale


def test_ndda_accumulator_matches_literal_sum(desk):
    inst, P = desk
    a = 2e-3
    st = alg.ndda_init(inst, P)
    hs = []
    for _ in range(50):
        hs.append(st.h)
        st = alg.ndda_round(st, inst, P, a)
        np.testing.assert_allclose(st.z, sum(a * h for h in hs), rtol=1e-12, atol=1e-12)


def test_ndda_round_is_pure(desk):
    inst, P = desk
    st = alg.ndda_init(inst, P)
    for _ in range(5):
        st = alg.ndda_round(st, inst, P, 1e-3)
    before = st.x.tobytes()
    a, b = alg.ndda_round(st, inst, P, 1e-3), alg.ndda_round(st, inst, P, 1e-3)
    assert st.x.tobytes() == before
    for k in ("x", "s", "h", "z", "grad"):
        assert getattr(a, k).tobytes() == getattr(b, k).tobytes()


def test_ndda_single_agent_is_cda():
    inst, P = single_agent()
    a = 0.5 / inst.L
    st, c = alg.ndda_init(inst, P), alg.cda_init(inst)
    for _ in range(1000):
        st, c = alg.ndda_round(st, inst, P, a), alg.cda_round(c, inst, a)
        assert np.max(np.abs(st.x[0] - c.x)) <= 1e-12


def test_feasibility_every_round(desk):
    inst, P = desk
    R = inst.feasible_set.radius
    cs = alg.ControlSequence("inverse_sqrt", 1.0)
    n_st, d_st, p_st = alg.ndda_init(inst, P), alg.dda_init(inst, P), alg.dpg_init(inst, P)
    for t in range(200):
        n_st = alg.ndda_round(n_st, inst, P, 1e-3)
        d_st = alg.dda_round(d_st, inst, P, cs(t))
        p_st = alg.dpg_round(p_st, inst, P, cs(t))
        for X in (n_st.x, d_st.x, p_st.x):
            assert np.all(np.abs(X).sum(axis=1) <= R * (1 + 1e-12))


def test_symmetry_all_algorithms():
    inst, P = identical_instance()
    cs = alg.ControlSequence("inverse_sqrt", 0.05)
    n_st, d_st, p_st = alg.ndda_init(inst, P), alg.dda_init(inst, P), alg.dpg_init(inst, P)
    for t in range(200):
        n_st = alg.ndda_round(n_st, inst, P, 0.01)
        d_st = alg.dda_round(d_st, inst, P, cs(t))
        p_st = alg.dpg_round(p_st, inst, P, cs(t))
        for X in (n_st.x, n_st.h, d_st.x, p_st.x):
            assert np.max(np.ptp(X, axis=0)) <= 1e-12


def test_cda_stays_at_optimum():
    inst = ProblemInstance([Quadratic(np.eye(2), np.zeros(2))], Unconstrained(2))
    st = alg.cda_init(inst)
    for _ in range(10):
        st = alg.cda_round(st, inst, 0.5)
        assert not np.any(st.x)


def test_cda_scalar_recursion():
    # f(x) = (x - 1)^2 / 2: x_t = 1 - (1 - a)^t solves x_{t+1} = -a sum_k (x_k - 1)
    inst = ProblemInstance([Quadratic(np.eye(1), -np.ones(1))], Unconstrained(1))
    a = 0.3
    st = alg.cda_init(inst)
    for t in range(1, 60):
        st = alg.cda_round(st, inst, a)
        assert st.x[0] == pytest.approx(1 - (1 - a) ** t, abs=1e-14)


def test_cda_first_step_independent_of_schedule(desk):
    inst, _ = desk
    c1 = alg.cda_round(alg.cda_init(inst), inst, alg.ControlSequence("constant", 0.01)(0))
    c2 = alg.cda_round(alg.cda_init(inst), inst, alg.ControlSequence("inverse_sqrt", 0.01)(0))
    np.testing.assert_array_equal(c1.x, c2.x)


def test_dda_single_agent_is_lagged_cda():
    # q_{t+1} = q_t + grad f(x_t) is exactly the CDA accumulator
    inst, P = single_agent()
    cs = alg.ControlSequence("inverse_sqrt", 0.2 / inst.L)
    d, c = alg.dda_init(inst, P), alg.cda_init(inst)
    for t in range(500):
        d, c = alg.dda_round(d, inst, P, cs(t)), alg.cda_round(c, inst, cs(t))
        assert np.max(np.abs(d.x[0] - c.x)) <= 1e-12


def test_dpg_zero_step_is_averaging(desk):
    inst, P = desk
    rng = np.random.default_rng(0)
    x0 = np.stack([inst.feasible_set.project(v) for v in rng.normal(size=(inst.n, inst.m))])
    st = alg.dpg_init(inst, P, x0)
    for _ in range(400):
        st = alg.dpg_round(st, inst, P, 0.0)
    np.testing.assert_allclose(st.x, np.tile(x0.mean(axis=0), (inst.n, 1)), atol=1e-10)


def test_dpg_single_agent_is_gradient_descent():
    Q = np.diag([1.0, 4.0])
    inst = ProblemInstance([Quadratic(Q, np.array([1.0, -1.0]))], Unconstrained(2))
    st = alg.dpg_init(inst, np.ones((1, 1)))
    x = np.zeros(2)
    for _ in range(30):
        st = alg.dpg_round(st, inst, np.ones((1, 1)), 0.1)
        x = x - 0.1 * (Q @ x + np.array([1.0, -1.0]))
        np.testing.assert_allclose(st.x[0], x, rtol=1e-14, atol=1e-15)


def test_auxiliary_sequence():
    inst, _ = single_agent()
    aux = alg.auxiliary_init(inst.m)
    assert not np.any(aux.y)
    c = alg.cda_init(inst)
    a = 0.3 / inst.L
    x = np.zeros(inst.m)
    for _ in range(100):
        aux = alg.auxiliary_round(aux, inst.gradient(x), a, inst)
        c = alg.cda_round(c, inst, a)
        x = c.x
        np.testing.assert_allclose(aux.y, c.x, atol=1e-13)


def test_running_averages(rng):
    seq = [rng.normal(size=3) for _ in range(10)]
    avgs = alg.running_averages(seq)
    np.testing.assert_array_equal(avgs[0], seq[0])
    for t in range(1, 11):
        assert np.max(np.abs(avgs[t - 1] - np.sum(seq[:t], axis=0) / t)) <= 1e-15
    const = alg.running_averages([np.ones(2)] * 7)
    np.testing.assert_array_equal(const[-1], np.ones(2))
    ya, xa = alg.running_averages(seq, [np.tile(s, (2, 1)) for s in seq])
    np.testing.assert_array_equal(xa[-1][0], ya[-1])


def test_divergence_is_reported():
    inst, _ = generate_lasso(3, 5, 4, 0.0, 2, seed=1)
    inst = ProblemInstance(inst.locals, Unconstrained(5))
    P = metropolis_weights(Topology.path(3))
    st = alg.dpg_init(inst, P)
    with pytest.raises(alg.DivergenceError, match="agent"):
        for t in range(10_000):
            st = alg.dpg_round(st, inst, P, 10.0)
