"""Unsupervised training of the graph policy on random channel draws."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import autodiff as ad
from .. import objective as ob
from ..comm import LinkBudget, worst_case_rate_bound
from ..config import SystemConfig
from ..geometry import Scenario, draw_scenario
from ..pa import PaParams
from .graph import build_graph
from .model import GnnPolicy, reference_grid

log = logging.getLogger(__name__)

UNCERTIFIED_PENALTY = 1.0


def composite_loss(kappa: float, n_ue: int, violations: int, lam: float) -> float:
    """Reported loss ``-K*kappa + lam * (number of violated constraints)``."""
    return -n_ue * kappa + lam * violations


@dataclass
class Sample:
    scenario: Scenario
    graph: object


def make_sample(cfg: SystemConfig, seed: int, eps: float, stream: int = 1) -> Sample:
    """Scenario plus its graph measured on the policy's reference layout."""
    sc = draw_scenario(cfg, seed, stream=stream)
    s = 0.5 * cfg.d0
    ref_t = reference_grid(cfg.n_t, cfg.d0, cfg.p_min, cfg.p_max, s)
    ref_r = reference_grid(cfg.n_r, cfg.d0, cfg.p_min, cfg.p_max, s)
    p_t, p_r = np.tile(ref_t, (cfg.n_tap, 1)), np.tile(ref_r, (cfg.n_sap, 1))
    return Sample(sc, build_graph(cfg, sc.channels(p_t, p_r), sc.geometry, p_t, p_r, eps))


def sample_loss(policy: GnnPolicy, sample: Sample, eps: float, lam: float, params=None,
                differentiable: bool = True):
    """Training loss for one sample and the policy output.

    ``-K*kappa + lam * sum_b phi(x_b)`` with kappa the certified worst-case
    sum-rate bound, ``x_b = max(0, ln(trace_b/gamma_b))`` and
    ``phi(x) = x/(1+x)``. The penalty is bounded and increasing, and an
    uncertifiable CRLB (trace taken as infinite) costs its limit ``lam`` with
    no gradient, so the loss never rewards giving up certification.
    """
    cfg = policy.cfg
    out = policy(sample.graph, params, differentiable)
    h, dH = ob.channels_t(sample.scenario, out.p_t_t, out.p_r_t)
    kappa = ob.worst_case_rate_t(h, out.W_t, eps, cfg.beta1, cfg.noise)
    traces, ok = ob.worst_case_crlb_t(dH, out.W_t, eps, cfg.beta1, cfg.noise)
    loss = kappa * (-float(cfg.n_ue))
    for b in range(len(ok)):
        if ok[b]:
            x = ad.relu(ad.log(traces[b] * (1.0 / cfg.gamma_b)))
            loss = loss + x / (x + 1.0) * lam
        else:
            loss = loss + lam * UNCERTIFIED_PENALTY
    violations = int(np.sum(~ok | (traces.value > cfg.gamma_b)))
    return loss, out, float(kappa.value), violations


class Adam:
    def __init__(self, params: dict, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict):
        self.t += 1
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            mh = self.m[k] / (1 - self.b1 ** self.t)
            vh = self.v[k] / (1 - self.b2 ** self.t)
            params[k] = params[k] - self.lr * mh / (np.sqrt(vh) + self.eps)


@dataclass
class TrainResult:
    policy: GnnPolicy
    losses: list = field(default_factory=list)  # per step
    epoch_losses: list = field(default_factory=list)
    steps: int = 0
    stopped: str = "budget"
    best_epoch: int = -1
    val_losses: list = field(default_factory=list)


def evaluate(policy: GnnPolicy, samples, eps: float) -> float:
    """Mean certified worst-case sum rate over the samples."""
    cfg = policy.cfg
    rates = []
    for s in samples:
        out = policy(s.graph)
        ch = s.scenario.channels(out.sol.p_t, out.sol.p_r)
        rates.append(worst_case_rate_bound(ch, out.sol.W, LinkBudget(cfg.noise, cfg.noise),
                                           PaParams(cfg.beta1, (0.0,), eps)))
    return float(np.mean(rates))


def train(cfg: SystemConfig, episodes: Optional[int] = None, rng: Optional[np.random.Generator] = None,
          n_train: int = 16, robust: Optional[bool] = None, policy: Optional[GnnPolicy] = None,
          patience: int = 10, seed_offset: int = 1000, n_val: int = 8) -> TrainResult:
    """Mini-batch Adam on the composite loss; ``episodes`` counts epochs over the training draws.

    Model selection and early stopping use the mean loss on ``n_val`` separate
    validation draws (the training loss when ``n_val`` is 0). The returned
    policy carries the parameters with the lowest such loss, the initial ones
    included.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    episodes = cfg.epochs if episodes is None else episodes
    robust = cfg.robust if robust is None else robust
    eps = cfg.epsilon if robust else 0.0
    policy = GnnPolicy(cfg, rng) if policy is None else policy
    result = TrainResult(policy)
    if episodes <= 0:
        return result
    base = seed_offset + cfg.seed * 10_000
    samples = [make_sample(cfg, base + i, eps) for i in range(n_train)]
    held = [make_sample(cfg, base + 5_000 + i, eps) for i in range(n_val)]

    def mean_loss(group):
        return float(np.mean([sample_loss(policy, s, eps, cfg.penalty, differentiable=False)[0].value
                              for s in group]))

    opt = Adam(policy.params, cfg.lr)
    # divergence reference: mean loss over the training draws before any update
    limit = 10 * max(abs(mean_loss(samples)), 1.0)
    best = mean_loss(held) if held else math.inf
    stale = 0
    best_params = {k: v.copy() for k, v in policy.params.items()}
    for epoch in range(episodes):
        order = rng.permutation(n_train)
        epoch_loss = []
        for start in range(0, n_train, cfg.batch):
            batch = order[start:start + cfg.batch]
            grads = {k: np.zeros_like(v) for k, v in policy.params.items()}
            total = 0.0
            for i in batch:
                loss, out, _, _ = sample_loss(policy, samples[i], eps, cfg.penalty)
                loss.backward()
                for k, leaf in out.P.items():
                    if leaf.grad is not None:
                        grads[k] += leaf.grad / len(batch)
                total += float(loss.value) / len(batch)
            if not np.isfinite(total) or total > limit:
                result.stopped = "diverged"
                policy.params = best_params
                return result
            opt.step(policy.params, grads)
            result.steps += 1
            if result.steps % 100 == 0:
                opt.lr *= 0.995
            result.losses.append(total)
            epoch_loss.append(total)
        mean = float(np.mean(epoch_loss))
        result.epoch_losses.append(mean)
        score = mean_loss(held) if held else mean
        result.val_losses.append(score)
        if score < best - 1e-9:
            best, stale = score, 0
            best_params = {k: v.copy() for k, v in policy.params.items()}
            result.best_epoch = epoch
        else:
            stale += 1
            if stale >= patience:
                result.stopped = "early"
                break
    # keep the best validated parameters, not the last ones
    policy.params = best_params
    log.debug("trained %d steps, best epoch %d", result.steps, result.best_epoch)
    return result
