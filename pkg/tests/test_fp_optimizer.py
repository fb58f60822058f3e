import numpy as np
import pytest

from cfisac.config import SystemConfig
from cfisac.feasibility import fixed_positions
from cfisac.fp_optimizer import (NoFeasibleStep, OptimizerState, Problem, fpa_baseline, initial_solution, run,
                                 structurally_feasible, update_auxiliaries, update_beamformers, update_positions)
from cfisac.geometry import draw_scenario
from cfisac.numerics import gaussian_complex, make_rng


@pytest.fixture(scope="module")
def setup():
    cfg = SystemConfig()
    sc = draw_scenario(cfg, 0)
    return cfg, sc, Problem(cfg, sc, robust=True)


def _random_state(cfg, sc, rng):
    sol = initial_solution(cfg, sc)
    W = gaussian_complex(rng, sol.W.shape)
    W *= np.sqrt(cfg.p_t) / np.linalg.norm(W, axis=(1, 2), keepdims=True)
    return OptimizerState(sol.copy(W=W, mu=rng.uniform(0, 5, cfg.n_ue), zeta=gaussian_complex(rng, cfg.n_ue) * 1e4))


def test_auxiliaries_idempotent(setup):
    cfg, sc, problem = setup
    st = update_auxiliaries(_random_state(cfg, sc, make_rng(0)), problem)
    mu, zeta = st.sol.mu.copy(), st.sol.zeta.copy()
    st = update_auxiliaries(st, problem)
    assert np.allclose(st.sol.mu, mu, rtol=1e-12) and np.allclose(st.sol.zeta, zeta, rtol=1e-12)


@pytest.mark.parametrize("robust", [True, False])
def test_auxiliaries_ascend(setup, robust):
    cfg, sc, _ = setup
    problem = Problem(cfg, sc, robust=robust)
    rng = make_rng(1)
    for _ in range(100):
        st = _random_state(cfg, sc, rng)
        before = problem.objective(st.sol)
        assert problem.objective(update_auxiliaries(st, problem).sol) >= before - 1e-12 * abs(before)


def test_auxiliaries_zero_beamformer(setup):
    cfg, sc, problem = setup
    st = _random_state(cfg, sc, make_rng(2))
    st.sol = st.sol.copy(W=np.zeros_like(st.sol.W))
    st = update_auxiliaries(st, problem)
    assert np.all(st.sol.mu == 0) and np.all(st.sol.zeta == 0)


def test_beamformer_step_monotone_and_feasible(setup):
    cfg, sc, problem = setup
    st = update_auxiliaries(OptimizerState(initial_solution(cfg, sc), step_w=cfg.step_w), problem)
    for _ in range(5):
        before = problem.objective(st.sol)
        try:
            st = update_beamformers(st, problem)
        except NoFeasibleStep:
            break
        assert problem.objective(st.sol) >= before
        assert structurally_feasible(problem, st.sol)


def test_position_step_monotone_and_feasible(setup):
    cfg, sc, problem = setup
    st = update_auxiliaries(OptimizerState(initial_solution(cfg, sc), step_p=cfg.step_p), problem)
    before = problem.objective(st.sol)
    st = update_positions(st, problem)
    assert problem.objective(st.sol) >= before
    assert structurally_feasible(problem, st.sol)


def test_zero_budget_returns_start(setup):
    cfg, sc, _ = setup
    st = run(cfg, budget=0, scenario=sc)
    start = initial_solution(cfg, sc)
    assert np.array_equal(st.sol.W, start.W) and np.array_equal(st.sol.p_t, start.p_t)
    assert st.rounds == 0 and st.objective_history == []


def test_unknown_mode(setup):
    with pytest.raises(ValueError):
        run(setup[0], mode="sideways", budget=1)


@pytest.fixture(scope="module")
def full_run(setup):
    cfg, sc, _ = setup
    return run(cfg, "robust", scenario=sc)


def test_trace_monotone(full_run):
    assert np.all(np.diff(full_run.objective_history) >= 0)
    assert len(full_run.objective_history) == full_run.rounds + 1


def test_solution_feasible(setup, full_run):
    assert structurally_feasible(setup[2], full_run.sol)
    rep = full_run.feasibility
    assert rep["power"] >= -1e-9 and rep["spacing"] >= -1e-9 and rep["bounds"] >= -1e-9


def test_fpa_positions_frozen(setup):
    cfg, sc, _ = setup
    st = fpa_baseline(cfg, budget=3, scenario=sc)
    assert np.array_equal(st.sol.p_t, np.tile(fixed_positions(cfg.n_t, 0.5, cfg.p_min, cfg.p_max), (cfg.n_tap, 1)))
    assert np.array_equal(st.sol.p_r, np.tile(fixed_positions(cfg.n_r, 0.5, cfg.p_min, cfg.p_max), (cfg.n_sap, 1)))


def test_paper_scale_fpa_allows_larger_array():
    from cfisac.config import paper_scale

    cfg = paper_scale()
    pos = fixed_positions(cfg.n_t, 0.5, cfg.p_min, cfg.p_max)
    assert pos.size == 16 and pos.min() >= cfg.p_min and pos.max() <= cfg.p_max
