"""Experiment orchestration: methods x sweep points x seeds -> CSV rows."""

from __future__ import annotations

import csv
import io
import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import __version__
from .comm import LinkBudget, Solution, sum_rate, worst_case_rate_bound
from .config import SystemConfig
from .fp_optimizer import Problem, fpa_baseline, ma_optimize, structurally_feasible
from .geometry import Scenario, draw_scenario
from .gnn.graph import build_graph
from .gnn.model import GnnPolicy
from .gnn.train import train
from .pa import PaParams, bussgang_model
from .robust import theta_set, worst_case_crlb
from .sensing import crlb_traces, fim_terms

log = logging.getLogger(__name__)

METHODS = ("robust_gnn", "nonrobust_gnn", "fp", "fpa", "fp_nonrobust")
DEFAULT_METHODS = ("robust_gnn", "nonrobust_gnn", "fp", "fpa")
PHASE_GRID = 64
VERSION = f"v{__version__}"

COLUMNS = ["config_hash", "version", "method", "seed", "sweep", "epsilon", "status", "feasible",
           "sum_rate", "adversarial_rate", "worst_case_rate", "crlb_nominal", "crlb_adversarial",
           "crlb_certified", "epsilon_star", "iterations"]


@dataclass
class ExperimentResult:
    rows: list = field(default_factory=list)
    wall_time: dict = field(default_factory=dict)  # (method, sweep, seed) -> seconds, not in the CSV

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\r\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _fmt(row.get(k, "")) for k in COLUMNS})
        return buf.getvalue()

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def adversarial_phase(channels, sol: Solution, cfg: SystemConfig, eps: float):
    """Common phase of ``beta3 = eps*exp(j*phi)`` that minimises the sum rate on a 64-point grid."""
    budget = LinkBudget(cfg.noise, cfg.noise)
    best = (np.inf, 0.0)
    for i in range(PHASE_GRID):
        phi = 2 * np.pi * i / PHASE_GRID
        params = PaParams(cfg.beta1, (eps * np.exp(1j * phi),), eps)
        rate = sum_rate(channels, bussgang_model(sol.W, params), sol, budget)
        if rate < best[0]:
            best = (rate, phi)
    return best


def evaluate_solution(cfg: SystemConfig, scenario: Scenario, sol: Solution) -> dict:
    """Nominal, adversarial and certified metrics at the configured epsilon."""
    eps = cfg.epsilon
    ch = scenario.channels(sol.p_t, sol.p_r)
    budget = LinkBudget(cfg.noise, cfg.noise)
    nominal = PaParams(cfg.beta1, (0.0,), eps)
    adv_rate, phi = adversarial_phase(ch, sol, cfg, eps)
    terms = fim_terms(ch.dH, sol.W, cfg.noise)
    crlb_nom = float(np.max(crlb_traces(terms, nominal)))
    crlb_adv = float(np.max(crlb_traces(terms, PaParams(cfg.beta1, (eps * np.exp(1j * phi),), eps))))
    certified = float(max(worst_case_crlb(eps, theta_set(terms, b, cfg.beta1)) for b in range(cfg.n_sap)))
    structural = structurally_feasible(Problem(cfg, scenario), sol)
    return dict(
        sum_rate=sum_rate(ch, bussgang_model(sol.W, nominal), sol, budget),
        adversarial_rate=adv_rate,
        worst_case_rate=worst_case_rate_bound(ch, sol.W, budget, nominal),
        crlb_nominal=crlb_nom, crlb_adversarial=crlb_adv, crlb_certified=certified,
        feasible=bool(structural and certified <= cfg.gamma_b),
    )


def expand_sweep(sweeps) -> list:
    """A dict of lists becomes its Cartesian grid; a list of dicts is used as is."""
    if not sweeps:
        return []
    if isinstance(sweeps, dict):
        keys = sorted(sweeps)
        return [dict(zip(keys, vals)) for vals in itertools.product(*(sweeps[k] for k in keys))]
    return [dict(p) for p in sweeps]


def _sweep_label(point: dict) -> str:
    return ";".join(f"{k}={point[k]!r}" for k in sorted(point))


class _PolicyCache:
    """One trained policy per (robust flag, config) so seeds share the training run."""

    def __init__(self, checkpoints: Optional[dict] = None):
        self.cache = {}
        self.checkpoints = checkpoints or {}

    def get(self, cfg: SystemConfig, robust: bool) -> GnnPolicy:
        key = (robust, cfg.digest())
        if key not in self.cache:
            tag = "robust_gnn" if robust else "nonrobust_gnn"
            if tag in self.checkpoints:
                policy = GnnPolicy(cfg, np.random.default_rng(cfg.seed))
                policy.params = dict(self.checkpoints[tag])
            else:
                policy = train(cfg, rng=np.random.default_rng(cfg.seed), robust=robust).policy
            self.cache[key] = policy
        return self.cache[key]


def gnn_infer(policy: GnnPolicy, cfg: SystemConfig, scenario: Scenario, eps: float) -> Solution:
    """Graph on the policy's reference layout, then one forward pass and projection."""
    ref_t, ref_r = policy.reference_layout()
    p_t, p_r = np.tile(ref_t, (cfg.n_tap, 1)), np.tile(ref_r, (cfg.n_sap, 1))
    graph = build_graph(cfg, scenario.channels(p_t, p_r), scenario.geometry, p_t, p_r, eps)
    return policy(graph).sol


def run_cell(cfg: SystemConfig, method: str, seed: int, policies: _PolicyCache) -> tuple:
    """Solve and evaluate one (method, config, seed) cell; returns ``(metrics, eps_star, iterations)``."""
    scenario = draw_scenario(cfg, seed)
    if method in ("fp", "fp_nonrobust"):
        state = ma_optimize(cfg, "robust" if method == "fp" else "non_robust", seed=seed, scenario=scenario)
        sol, eps_star, iters = state.sol, state.epsilon_star, state.rounds
    elif method == "fpa":
        state = fpa_baseline(cfg, "robust" if cfg.robust else "non_robust", seed=seed, scenario=scenario)
        sol, eps_star, iters = state.sol, state.epsilon_star, state.rounds
    elif method in ("robust_gnn", "nonrobust_gnn"):
        robust = method == "robust_gnn"
        policy = policies.get(cfg, robust)
        sol = gnn_infer(policy, cfg, scenario, cfg.epsilon if robust else 0.0)
        eps_star, iters = 0.0, 0
    else:
        raise ValueError(f"unknown method {method!r}")
    return evaluate_solution(cfg, scenario, sol), eps_star, iters


def run_experiment(cfg: SystemConfig, methods: Iterable[str] = DEFAULT_METHODS, sweeps=None,
                   seeds: Optional[Iterable[int]] = None, checkpoints: Optional[dict] = None,
                   out=None) -> ExperimentResult:
    """Evaluate every method x sweep point x seed; failures are recorded per row.

    ``sweeps`` is a dict of parameter lists (Cartesian grid) or a list of
    override dicts; pass ``[{}]`` to evaluate the base configuration once.
    """
    methods = list(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    seeds = [cfg.seed] if seeds is None else list(seeds)
    result = ExperimentResult()
    policies = _PolicyCache(checkpoints)
    for point in expand_sweep(sweeps):
        try:
            cell_cfg = cfg.with_(**point)
        except Exception as exc:  # invalid sweep point: one row per method/seed records it
            cell_cfg, bad = cfg, f"error: {exc}"
        else:
            bad = None
        for method in methods:
            for seed in seeds:
                row = dict(config_hash=cell_cfg.digest(), version=VERSION, method=method, seed=seed,
                           sweep=_sweep_label(point), epsilon=cell_cfg.epsilon)
                t0 = time.perf_counter()
                if bad:
                    row.update(status=bad, feasible=False)
                else:
                    try:
                        metrics, eps_star, iters = run_cell(cell_cfg, method, seed, policies)
                        row.update(metrics, status="ok", epsilon_star=eps_star, iterations=iters)
                    except Exception as exc:
                        log.warning("cell %s/%s/%s failed: %s", method, row["sweep"], seed, exc)
                        row.update(status=f"error: {type(exc).__name__}: {exc}", feasible=False)
                result.wall_time[(method, row["sweep"], seed)] = time.perf_counter() - t0
                result.rows.append(row)
    if out is not None:
        result.write(out)
    return result


def plot_data(rows: list, x: str = "epsilon", y: str = "adversarial_rate") -> list:
    """Mean and count of ``y`` per (method, x), sorted; rows with errors are skipped."""
    groups = {}
    for row in rows:
        if row.get("status") != "ok":
            continue
        key = (row["method"], float(row[x]))
        groups.setdefault(key, []).append(float(row[y]))
    return [dict(method=m, **{x: xv}, mean=float(np.mean(v)), n=len(v))
            for (m, xv), v in sorted(groups.items())]


def read_csv(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
