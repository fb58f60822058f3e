"""Alternating robust optimizer: closed-form auxiliaries, then projected ascent.

A round is ``update_auxiliaries -> solve_epsilon (robust) -> update_beamformers
-> update_positions -> update_auxiliaries``. Every accepted step keeps the
surrogate objective non-decreasing and the CRLB constraint satisfied, so the
recorded objective trace is monotone.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from . import objective as ob
from .comm import LinkBudget, Solution, robust_auxiliaries, robust_fp_objective, with_auxiliaries
from .config import SystemConfig
from .feasibility import (fixed_positions, positions_ok, power_ok, project_positions, project_power,
                          uniform_positions)
from .geometry import ChannelSet, Scenario, draw_scenario
from .pa import PaParams
from .robust import solve_epsilon, theta_set, worst_case_crlb
from .sensing import fim_terms

log = logging.getLogger(__name__)

MAX_HALVINGS = 20
FD_STEP = 1e-4


class NoFeasibleStep(RuntimeError):
    pass


@dataclass
class Problem:
    """Everything that stays fixed while one instance is optimized."""

    cfg: SystemConfig
    scenario: Scenario
    robust: bool = True
    freeze_positions: bool = False

    @property
    def eps(self) -> float:
        return self.cfg.epsilon if self.robust else 0.0

    @property
    def budget(self) -> LinkBudget:
        return LinkBudget(self.cfg.noise, self.cfg.noise)

    @property
    def params(self) -> PaParams:
        return PaParams(self.cfg.beta1, (0.0,), self.eps)

    def channels(self, sol: Solution) -> ChannelSet:
        return self.scenario.channels(sol.p_t, sol.p_r)

    def objective(self, sol: Solution, ch: Optional[ChannelSet] = None) -> float:
        ch = self.channels(sol) if ch is None else ch
        return robust_fp_objective(ch, sol, self.budget, self.params)

    def crlb(self, sol: Solution, ch: Optional[ChannelSet] = None) -> np.ndarray:
        """Certified CRLB-trace bound per sAP (the nominal trace when eps is 0)."""
        ch = self.channels(sol) if ch is None else ch
        terms = fim_terms(ch.dH, sol.W, self.cfg.noise)
        return np.array([worst_case_crlb(self.eps, theta_set(terms, b, self.cfg.beta1))
                         for b in range(ch.dH.shape[0])])

    def crlb_slack(self, sol: Solution, ch: Optional[ChannelSet] = None) -> float:
        tr = self.crlb(sol, ch)
        return float(self.cfg.gamma_b - np.max(tr)) if np.all(np.isfinite(tr)) else -np.inf


@dataclass
class OptimizerState:
    sol: Solution
    epsilon_star: float = 0.0
    objective_history: list = field(default_factory=list)
    feasibility: dict = field(default_factory=dict)
    step_w: float = 0.05
    step_p: float = 0.05
    rounds: int = 0
    converged: bool = False
    rejected: int = 0

    @property
    def crlb_ok(self) -> bool:
        return self.feasibility.get("crlb", -np.inf) >= 0


def feasibility_report(problem: Problem, sol: Solution) -> dict:
    cfg = problem.cfg
    power = cfg.p_t - np.sum(np.abs(sol.W) ** 2, axis=(1, 2))
    gaps = [np.min(np.diff(np.sort(P, axis=1), axis=1)) - cfg.d0 if P.shape[1] > 1 else np.inf
            for P in (sol.p_t, sol.p_r)]
    lo = min(sol.p_t.min(), sol.p_r.min()) - cfg.p_min
    hi = cfg.p_max - max(sol.p_t.max(), sol.p_r.max())
    return dict(power=float(power.min()), spacing=float(min(gaps)), bounds=float(min(lo, hi)),
                crlb=problem.crlb_slack(sol))


def structurally_feasible(problem: Problem, sol: Solution, tol: float = 1e-9) -> bool:
    cfg = problem.cfg
    return (power_ok(sol.W, cfg.p_t, tol)
            and positions_ok(sol.p_t, cfg.d0, cfg.p_min, cfg.p_max, tol)
            and positions_ok(sol.p_r, cfg.d0, cfg.p_min, cfg.p_max, tol))


def initial_solution(cfg: SystemConfig, scenario: Scenario, freeze_positions: bool = False) -> Solution:
    """Maximum-ratio beamformers at power P_t/K per user over a uniform layout."""
    if freeze_positions:
        pt = fixed_positions(cfg.n_t, 0.5, cfg.p_min, cfg.p_max)
        pr = fixed_positions(cfg.n_r, 0.5, cfg.p_min, cfg.p_max)
    else:
        pt = uniform_positions(cfg.n_t, cfg.d0, cfg.p_min, cfg.p_max)
        pr = uniform_positions(cfg.n_r, cfg.d0, cfg.p_min, cfg.p_max)
    p_t = np.tile(pt, (cfg.n_tap, 1))
    p_r = np.tile(pr, (cfg.n_sap, 1))
    h = scenario.channels(p_t, p_r).h
    norms = np.linalg.norm(h, axis=2, keepdims=True)
    W = np.transpose(h / np.where(norms > 0, norms, 1.0), (0, 2, 1)) * np.sqrt(cfg.p_t / cfg.n_ue)
    return Solution(project_power(W, cfg.p_t), p_t, p_r)


def _accept(problem, state, new_sol, old_obj, old_slack):
    """Acceptance test shared by all block updates."""
    ch = problem.channels(new_sol)
    new_obj = problem.objective(new_sol, ch)
    new_slack = problem.crlb_slack(new_sol, ch)
    ok_obj = new_obj >= old_obj
    ok_crlb = new_slack >= 0 or (old_slack < 0 and new_slack >= old_slack)
    return ok_obj and ok_crlb, new_obj, new_slack


def update_auxiliaries(state: OptimizerState, problem: Problem) -> OptimizerState:
    ch = problem.channels(state.sol)
    mu, zeta = robust_auxiliaries(ch, state.sol.W, problem.budget, problem.params)
    state.sol = with_auxiliaries(state.sol, mu, zeta)
    return state


def beamformer_gradient(problem: Problem, sol: Solution, ch: ChannelSet) -> np.ndarray:
    Wt = ad.leaf(sol.W)
    f = ob.robust_surrogate_t(ch.h, Wt, sol.mu, sol.zeta, problem.eps, problem.cfg.beta1, problem.cfg.noise)
    f.backward()
    return Wt.grad


def _backtrack(problem, state, propose, step, old_obj, old_slack):
    alpha = step
    for _ in range(MAX_HALVINGS + 1):
        cand = propose(alpha)
        ok, obj, slack = _accept(problem, state, cand, old_obj, old_slack)
        if ok:
            return cand, alpha, obj
        alpha *= 0.5
    raise NoFeasibleStep("no acceptable step after step halvings")


def update_beamformers(state: OptimizerState, problem: Problem) -> OptimizerState:
    """One projected-gradient ascent step on the surrogate over all ``W_a``.

    The step is normalised to a fraction of ``sqrt(P_t)``; raises
    :class:`NoFeasibleStep` (state untouched) when halvings are exhausted.
    """
    sol = state.sol
    ch = problem.channels(sol)
    old_obj, old_slack = problem.objective(sol, ch), problem.crlb_slack(sol, ch)
    grad = beamformer_gradient(problem, sol, ch)
    gnorm = np.linalg.norm(grad)
    if not np.isfinite(gnorm) or gnorm == 0:
        raise NoFeasibleStep("zero or non-finite beamformer gradient")
    direction = grad / gnorm * np.sqrt(problem.cfg.p_t)
    propose = lambda a: sol.copy(W=project_power(sol.W + a * direction, problem.cfg.p_t))
    new, alpha, _ = _backtrack(problem, state, propose, state.step_w, old_obj, old_slack)
    state.sol = new
    state.step_w = min(alpha * 1.5, 0.5)
    return state


def _fd_grad(fun, x, h=FD_STEP):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def update_positions(state: OptimizerState, problem: Problem) -> OptimizerState:
    """Projected ascent on the tAP positions, then CRLB-margin ascent on the sAP positions.

    Gradients are central differences with step ``1e-4`` wavelengths. The sAP
    arrays do not enter the rate, so they are moved to enlarge the CRLB slack.
    """
    if problem.freeze_positions:
        return state
    cfg = problem.cfg
    proj = lambda P: project_positions(P, cfg.d0, cfg.p_min, cfg.p_max)
    sol = state.sol
    ch = problem.channels(sol)
    old_obj, old_slack = problem.objective(sol, ch), problem.crlb_slack(sol, ch)
    g = _fd_grad(lambda P: problem.objective(sol.copy(p_t=P)), sol.p_t)
    gn = np.linalg.norm(g)
    if np.isfinite(gn) and gn > 0:
        direction = g / gn
        propose = lambda a: sol.copy(p_t=proj(sol.p_t + a * direction))
        try:
            sol, alpha, _ = _backtrack(problem, state, propose, state.step_p, old_obj, old_slack)
            state.step_p = min(alpha * 1.5, 1.0)
        except NoFeasibleStep:
            state.rejected += 1
    state.sol = sol

    def slack_of(P):
        s = problem.crlb_slack(sol.copy(p_r=P))
        return s if np.isfinite(s) else -1e6

    base = slack_of(sol.p_r)
    g = _fd_grad(slack_of, sol.p_r)
    gn = np.linalg.norm(g)
    if np.isfinite(gn) and gn > 0:
        alpha = state.step_p
        for _ in range(MAX_HALVINGS + 1):
            cand = sol.copy(p_r=proj(sol.p_r + alpha * g / gn))
            if slack_of(cand.p_r) >= base:
                state.sol = cand
                break
            alpha *= 0.5
    return state


def restore_feasibility(state: OptimizerState, problem: Problem, max_steps: int = 50) -> OptimizerState:
    """Descend the largest certified CRLB trace over ``W`` until the budget is met."""
    cfg = problem.cfg
    step = 0.1
    for _ in range(max_steps):
        sol = state.sol
        ch = problem.channels(sol)
        slack = problem.crlb_slack(sol, ch)
        if slack >= 0:
            break
        Wt = ad.leaf(sol.W)
        tr, ok = ob.worst_case_crlb_t(ch.dH, Wt, problem.eps, cfg.beta1, cfg.noise)
        if not np.all(ok):
            # bound not certifiable: grow the weakest diagonal Fisher information
            terms = ad.tsum(ad.real(ad.einsum("bapri,bcprj,cjk,aik->bp", ad.conj(ch.dH), ch.dH, Wt,
                                              ad.conj(Wt))))
            (-terms).backward()
        else:
            ad.tsum(tr).backward()
        g = Wt.grad
        gn = np.linalg.norm(g)
        if not np.isfinite(gn) or gn == 0:
            break
        moved = False
        for _ in range(MAX_HALVINGS + 1):
            cand = sol.copy(W=project_power(sol.W - step * np.sqrt(cfg.p_t) * g / gn, cfg.p_t))
            if problem.crlb_slack(cand) > slack:
                state.sol, moved = cand, True
                break
            step *= 0.5
        if not moved:
            break
        step = min(step * 2, 0.5)
    return state


def certified_epsilon(problem: Problem, sol: Solution) -> float:
    """Largest radius whose certified CRLB bound meets the budget at every sAP."""
    ch = problem.channels(sol)
    terms = fim_terms(ch.dH, sol.W, problem.cfg.noise)
    stars = []
    for b in range(ch.dH.shape[0]):
        res = solve_epsilon(theta_set(terms, b, problem.cfg.beta1), problem.cfg.gamma_b)
        stars.append(res.epsilon_star if res.feasible else 0.0)
    return float(min(stars))


def run(cfg: SystemConfig, mode: str = "robust", budget: Optional[int] = None, seed: Optional[int] = None,
        scenario: Optional[Scenario] = None, freeze_positions: bool = False, tol: float = 1e-5,
        inner_steps: int = 3, init: Optional[Solution] = None) -> OptimizerState:
    """Optimize one instance; ``mode`` is ``"robust"`` or ``"non_robust"`` (beta3 taken as 0).

    ``init`` replaces the default maximum-ratio start (used to warm-start the
    movable-antenna run from the fixed-array optimum).
    """
    if mode not in ("robust", "non_robust"):
        raise ValueError(f"unknown mode {mode!r}")
    seed = cfg.seed if seed is None else seed
    scenario = draw_scenario(cfg, seed) if scenario is None else scenario
    problem = Problem(cfg, scenario, robust=(mode == "robust"), freeze_positions=freeze_positions)
    budget = cfg.iterations if budget is None else budget
    start = initial_solution(cfg, scenario, freeze_positions) if init is None else init.copy()
    state = OptimizerState(start, step_w=cfg.step_w,
                           step_p=cfg.step_p)
    if budget <= 0:
        state.feasibility = feasibility_report(problem, state.sol)
        return state
    state = restore_feasibility(update_auxiliaries(state, problem), problem)
    state = update_auxiliaries(state, problem)
    state.objective_history.append(problem.objective(state.sol))
    for r in range(budget):
        if problem.robust:
            state.epsilon_star = certified_epsilon(problem, state.sol)
        for _ in range(inner_steps):
            try:
                state = update_beamformers(state, problem)
            except NoFeasibleStep:
                state.rejected += 1
                break
        state = update_positions(state, problem)
        state = update_auxiliaries(state, problem)
        state.objective_history.append(problem.objective(state.sol))
        state.rounds = r + 1
        if abs(state.objective_history[-1] - state.objective_history[-2]) < tol:
            state.converged = True
            break
    state.sol.kappa = state.objective_history[-1]
    state.epsilon_star = certified_epsilon(problem, state.sol) if problem.robust else 0.0
    state.feasibility = feasibility_report(problem, state.sol)
    log.debug("run %s seed=%s rounds=%d kappa=%.4f", mode, seed, state.rounds, state.sol.kappa)
    return state


def fpa_baseline(cfg: SystemConfig, mode: str = "robust", **kwargs) -> OptimizerState:
    """Beamformer-only optimization over fixed half-wavelength arrays."""
    return run(cfg, mode, freeze_positions=True, **kwargs)


def ma_optimize(cfg: SystemConfig, mode: str = "robust", seed: Optional[int] = None,
                scenario: Optional[Scenario] = None, budget: Optional[int] = None) -> OptimizerState:
    """Joint beamformer and antenna-position optimization.

    Starts from the fixed-array optimum and then frees the positions; because
    every accepted step is non-decreasing, the result is never below the
    fixed-array surrogate value once that start is CRLB-feasible.
    """
    seed = cfg.seed if seed is None else seed
    scenario = draw_scenario(cfg, seed) if scenario is None else scenario
    fixed = fpa_baseline(cfg, mode, seed=seed, scenario=scenario, budget=budget)
    return run(cfg, mode, seed=seed, scenario=scenario, budget=budget, init=fixed.sol)
