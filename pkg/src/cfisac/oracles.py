"""Independent numerical oracles for the analytic models.

Each check returns an :class:`OracleResult` with the measured error and the
tolerance it is held to. They back the ``validate`` command and the
acceptance tests.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import kernels
from . import objective as ob
from .comm import (LinkBudget, Solution, delta, delta_robust_lower, fp_objective, sum_rate, sindr_all,
                   with_auxiliaries, zeta_star_all)
from .config import SystemConfig
from .feasibility import uniform_positions
from .geometry import (Geometry, SensingLink, draw_scenario, sensing_channel, sensing_link,
                       steering_derivatives)
from .numerics import gaussian_complex, make_rng
from .pa import PaParams, bussgang_gain, bussgang_model, distortion_covariance, pa_apply, sample_transmit
from .robust import (constraint_lhs, fim_bounds, g_exact, g_sca, product_bounds, solve_epsilon,
                     theta_set, valid_region, worst_case_crlb)
from .sensing import crlb_traces, fim_expected, fim_terms, sample_fim


@dataclass
class OracleResult:
    name: str
    error: float
    tolerance: float
    seconds: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tolerance)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark} {self.name}: error={self.error:.3g} tol={self.tolerance:g} ({self.seconds:.2f}s) {self.detail}"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def default_instance(cfg: SystemConfig = None, seed: int = 0, W_seed: int = 1):
    """Default scenario on the uniform layout with a random full-power W."""
    cfg = SystemConfig() if cfg is None else cfg
    sc = draw_scenario(cfg, seed)
    p_t = np.tile(uniform_positions(cfg.n_t, cfg.d0, cfg.p_min, cfg.p_max), (cfg.n_tap, 1))
    p_r = np.tile(uniform_positions(cfg.n_r, cfg.d0, cfg.p_min, cfg.p_max), (cfg.n_sap, 1))
    W = gaussian_complex(make_rng(W_seed), (cfg.n_tap, cfg.n_t, cfg.n_ue))
    W *= np.sqrt(cfg.p_t) / np.linalg.norm(W, axis=(1, 2), keepdims=True)
    return cfg, sc, sc.channels(p_t, p_r), Solution(W, p_t, p_r)


@_timed
def bussgang_fidelity(n_draws: int = 100_000, seed: int = 0, n_t: int = 4, beta3=0.15 * np.exp(0.7j)):
    """Analytic gain and distortion covariance vs sample moments of the PA output.

    Returns the worse of the two relative errors normalised by its own
    tolerance (gain 2%, distortion 5%), so ``error <= 1`` means pass.
    """
    rng = make_rng(seed)
    W = gaussian_complex(rng, (n_t, n_t)) * 0.5  # full-rank input covariance
    s = W @ gaussian_complex(rng, (n_t, n_draws))
    c = pa_apply(s, 1.0, beta3)
    r_cs, r_ss = kernels.pa_sample_moments(s, c)
    xi_mc = r_cs @ np.linalg.inv(r_ss)
    xi = bussgang_gain(W, 1.0, beta3)
    err_xi = np.linalg.norm(xi_mc - xi) / np.linalg.norm(xi)
    d = c - xi @ s
    xi_hat_mc = d @ d.conj().T / n_draws
    xi_hat = distortion_covariance(W, beta3)
    err_hat = np.linalg.norm(xi_hat_mc - xi_hat) / np.linalg.norm(xi_hat)
    return OracleResult("bussgang", max(err_xi / 0.02, err_hat / 0.05), 1.0, 0.0,
                        f"gain rel={err_xi:.2e} distortion rel={err_hat:.2e}")


def random_comm_instance(rng, A=2, K=2, n_t=4, power=0.2):
    from .geometry import ChannelSet

    h = gaussian_complex(rng, (A, K, n_t)) * 1e-3
    W = gaussian_complex(rng, (A, n_t, K))
    W *= np.sqrt(power) / np.linalg.norm(W, axis=(1, 2), keepdims=True)
    ch = ChannelSet(h, np.zeros((1, A, 1, n_t), complex), np.zeros((1, A, 2, 1, n_t), complex))
    beta3 = 0.2 * rng.uniform(0, 1, A) * np.exp(2j * np.pi * rng.uniform(0, 1, A))
    return ch, Solution(W, np.zeros((A, n_t)), np.zeros((1, 1))), PaParams(1.0, tuple(beta3), 0.2)


@_timed
def fp_equivalence(n_instances: int = 100, seed: int = 0):
    """The reformulated objective at the closed-form auxiliaries equals the sum rate."""
    rng = make_rng(seed, 7)
    worst = 0.0
    for _ in range(n_instances):
        ch, sol, params = random_comm_instance(rng)
        budget = LinkBudget(1e-9, 1e-9)
        bm = bussgang_model(sol.W, params)
        mu = sindr_all(ch, bm, sol, budget)
        sol = with_auxiliaries(sol, mu, zeta_star_all(ch, bm, sol, budget, mu))
        rate = sum_rate(ch, bm, sol, budget)
        worst = max(worst, abs(fp_objective(ch, bm, sol, budget) - rate) / abs(rate))
    return OracleResult("fp_equivalence", worst, 1e-9, 0.0, f"{n_instances} instances")


@_timed
def fim_oracle(n_draws: int = 200_000, seed: int = 0, beta3_max: float = 0.2):
    """Expected FIM vs the sample average of per-draw Fisher information."""
    cfg, sc, ch, sol = default_instance()
    rng = make_rng(seed, 11)
    beta3 = beta3_max * rng.uniform(0.5, 1, cfg.n_tap) * np.exp(2j * np.pi * rng.uniform(0, 1, cfg.n_tap))
    params = PaParams(cfg.beta1, tuple(beta3), beta3_max)
    F = fim_expected(fim_terms(ch.dH, sol.W, cfg.noise), params)
    acc = np.zeros_like(F)
    chunk = 50_000
    for start in range(0, n_draws, chunk):
        n = min(chunk, n_draws - start)
        _, lin, d = sample_transmit(sol.W, params, rng, n)
        acc += sample_fim(ch.dH, lin, d, cfg.noise) * n
    F_mc = acc / n_draws
    err = max(np.linalg.norm(F_mc[b] - F[b]) / np.linalg.norm(F[b]) for b in range(F.shape[0]))
    return OracleResult("fim", err, 0.03, 0.0, f"|beta3|={np.round(np.abs(beta3), 3).tolist()}")


def _rel(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(np.linalg.norm(np.asarray(b)), 1e-300)


@_timed
def derivative_oracle(h: float = 1e-6):
    """Steering derivatives and autodiff gradients vs central differences."""
    cfg, sc, ch, sol = default_instance()
    geo = sc.geometry
    errs = {}
    # target derivative of the sensing channel (reflection factor held fixed)
    worst = 0.0
    for b in range(cfg.n_sap):
        for a in range(cfg.n_tap):
            link = sc.links[b][a]
            dH = steering_derivatives(link, geo, a, b, sol.p_t[a], sol.p_r[b], cfg.f_s)
            for n in range(2):
                e = np.zeros(2)
                e[n] = h * cfg.ring_radius

                def H_at(t):
                    g = Geometry(t, geo.tap_positions, geo.sap_positions, geo.ue_positions)
                    moved = sensing_link(g, a, b, link.rcs)
                    fixed = SensingLink(link.rcs, link.delay, moved.phi_a, moved.phi_b)
                    return sensing_channel(fixed, sol.p_t[a], sol.p_r[b], cfg.f_s)

                fd = (H_at(geo.target + e) - H_at(geo.target - e)) / (2 * e[n])
                worst = max(worst, _rel(dH[n], fd))
    errs["steering"] = worst

    def fd_complex(f, X):
        g = np.zeros_like(X, dtype=complex)
        for idx in np.ndindex(X.shape):
            E = np.zeros_like(X, dtype=complex)
            E[idx] = h
            g[idx] = (f(X + E) - f(X - E)) / (2 * h) + 1j * (f(X + 1j * E) - f(X - 1j * E)) / (2 * h)
        return g

    def fd_real(f, X):
        g = np.zeros_like(X)
        for idx in np.ndindex(X.shape):
            E = np.zeros_like(X)
            E[idx] = h
            g[idx] = (f(X + E) - f(X - E)) / (2 * h)
        return g

    eps = 0.1
    W = sol.W
    f_rate = lambda X: ob.worst_case_rate_t(ch.h, X, eps, 1.0, cfg.noise).value
    Wt = ad.leaf(W)
    ob.worst_case_rate_t(ch.h, Wt, eps, 1.0, cfg.noise).backward()
    errs["rate_W"] = _rel(Wt.grad, fd_complex(lambda X: f_rate(X), W))

    f_crlb = lambda X: float(np.sum(ob.worst_case_crlb_t(ch.dH, X, eps, 1.0, cfg.noise)[0].value))
    Wt = ad.leaf(W)
    ad.tsum(ob.worst_case_crlb_t(ch.dH, Wt, eps, 1.0, cfg.noise)[0]).backward()
    errs["crlb_W"] = _rel(Wt.grad, fd_complex(f_crlb, W))

    f_pos = lambda P: float(np.sum(ob.worst_case_crlb_t(sc.channels(P, sol.p_r).dH, W, eps, 1.0, cfg.noise)[0].value)
                            + ob.worst_case_rate_t(sc.channels(P, sol.p_r).h, W, eps, 1.0, cfg.noise).value)
    Pt = ad.leaf(sol.p_t)
    h_t, dH_t = ob.channels_t(sc, Pt, sol.p_r)
    (ad.tsum(ob.worst_case_crlb_t(dH_t, W, eps, 1.0, cfg.noise)[0])
     + ob.worst_case_rate_t(h_t, W, eps, 1.0, cfg.noise)).backward()
    errs["positions"] = _rel(Pt.grad, fd_real(f_pos, sol.p_t))
    worst = max(errs.values())
    return OracleResult("derivatives", worst, 1e-4, 0.0,
                        " ".join(f"{k}={v:.1e}" for k, v in errs.items()))


def toy_config() -> SystemConfig:
    """Six-node graph: one two-element tAP, one two-element sAP, two UEs."""
    return SystemConfig(n_tap=1, n_sap=1, n_ue=2, n_t=2, n_r=2, d_model=8, heads=2, layers=2, epsilon=0.1)


@_timed
def gnn_gradient_oracle(seed: int = 0, h: float = 1e-6):
    """Directional derivative of the training loss along a random direction, per parameter block."""
    from .gnn.model import GnnPolicy
    from .gnn.train import make_sample, sample_loss

    cfg = toy_config()
    rng = np.random.default_rng(seed)
    policy = GnnPolicy(cfg, rng)
    for k in policy.params:  # move position heads off zero so every block carries gradient
        if k.startswith("dec_p") and k.endswith("W2"):
            policy.params[k] = rng.normal(0, 0.3, policy.params[k].shape)
    sample = make_sample(cfg, seed, cfg.epsilon)
    loss, out, _, _ = sample_loss(policy, sample, cfg.epsilon, cfg.penalty)
    loss.backward()
    worst, names = 0.0, []
    for name, leaf in out.P.items():
        v = rng.normal(size=leaf.shape)
        v /= np.linalg.norm(v)
        analytic = 0.0 if leaf.grad is None else float(np.sum(leaf.grad * v))

        def f(t):
            params = dict(policy.params)
            params[name] = policy.params[name] + t * v
            return float(sample_loss(policy, sample, cfg.epsilon, cfg.penalty, params, False)[0].value)

        fd = (f(h) - f(-h)) / (2 * h)
        err = abs(analytic - fd) / max(abs(fd), abs(analytic), 1e-6)
        if err > worst:
            worst, names = err, [name]
    return OracleResult("gnn_gradients", worst, 1e-3, 0.0, f"{len(out.P)} blocks, worst {names}")


def random_disk_beta3(rng, A, eps):
    return eps * np.sqrt(rng.uniform(0, 1, A)) * np.exp(2j * np.pi * rng.uniform(0, 1, A))


@_timed
def bound_sandwich(n_draws: int = 1000, eps: float = 0.15, seed: int = 0, slack: float = 1e-9):
    """Entry, product, trace and rate bounds hold for random beta3 inside the disk.

    ``error`` counts violations beyond ``slack`` (relative to each quantity).
    """
    cfg, sc, ch, sol = default_instance()
    terms = fim_terms(ch.dH, sol.W, cfg.noise)
    ths = [theta_set(terms, b, cfg.beta1) for b in range(cfg.n_sap)]
    rng = make_rng(seed, 13)
    budget = LinkBudget(cfg.noise, cfg.noise)
    from .comm import robust_auxiliaries

    mu, zeta = robust_auxiliaries(ch, sol.W, budget, PaParams(cfg.beta1, (0.0,), eps))
    sol = with_auxiliaries(sol, mu, zeta)
    lower_delta = delta_robust_lower(ch, sol, budget, PaParams(cfg.beta1, (0.0,), eps))
    violations = 0
    for _ in range(n_draws):
        beta3 = random_disk_beta3(rng, cfg.n_tap, eps)
        params = PaParams(cfg.beta1, tuple(beta3), eps)
        F = fim_expected(terms, params)
        for b, th in enumerate(ths):
            tol = slack * np.abs(F[b]).max()
            for p in range(2):
                for q in range(2):
                    lo, hi = fim_bounds((p, q), eps, th)
                    violations += int(F[b, p, q] < lo - tol) + int(F[b, p, q] > hi + tol)
            dl, ou = product_bounds(eps, th)
            violations += int(F[b, 0, 0] * F[b, 1, 1] < dl - slack * abs(dl))
            violations += int(F[b, 0, 1] * F[b, 1, 0] > ou + slack * abs(ou))
            violations += int(F[b, 0, 0] + F[b, 1, 1] > constraint_lhs(eps, th) + tol)
        traces = crlb_traces(terms, params)
        violations += sum(int(traces[b] > worst_case_crlb(eps, ths[b]) * (1 + slack)) for b in range(cfg.n_sap))
        d = delta(ch, bussgang_model(sol.W, params), sol, budget)
        violations += int(d < lower_delta - slack * abs(d))
    return OracleResult("bound_sandwich", violations, 0, 0.0, f"{n_draws} draws at eps={eps}")


def brute_force_epsilon(th, gamma_b: float, eps_max: float = 0.5, n: int = 100_000) -> float:
    """Largest grid epsilon whose exact robust constraint holds (0 if none)."""
    grid = np.linspace(0.0, eps_max, n)
    ok = valid_region(grid, th) & (constraint_lhs(grid, th) <= g_exact(grid, th, gamma_b))
    return float(grid[ok].max()) if ok.any() else 0.0


def sca_instances(n: int = 50, seed: int = 0):
    """Theta sets from random layouts and beamformers over a range of powers."""
    out = []
    rng = make_rng(seed, 17)
    for i in range(n):
        cfg = SystemConfig(p_t=float(rng.uniform(0.05, 0.6)))
        _, sc, ch, sol = default_instance(cfg, seed=i, W_seed=1000 + i)
        terms = fim_terms(ch.dH, sol.W, cfg.noise)
        out.append((theta_set(terms, int(rng.integers(cfg.n_sap)), cfg.beta1), cfg.gamma_b))
    return out


@_timed
def sca_oracle(n_instances: int = 50, seed: int = 0):
    """SCA fixed point vs the brute-force largest feasible epsilon, plus surrogate tangency."""
    worst_gap, worst_tan, n_feasible = 0.0, 0.0, 0
    rng = make_rng(seed, 19)
    for th, gamma in sca_instances(n_instances, seed):
        res = solve_epsilon(th, gamma)
        ref = brute_force_epsilon(th, gamma)
        n_feasible += int(ref > 0)
        worst_gap = max(worst_gap, abs(res.epsilon_star - ref))
        e0 = float(rng.uniform(0.01, 0.4))
        scale = max(abs(float(g_exact(e0, th, gamma))), 1e-300)
        dh = 1e-6
        slope = (g_exact(e0 + dh, th, gamma) - g_exact(e0 - dh, th, gamma)) / (2 * dh)
        slope_s = (g_sca(e0 + dh, e0, th, gamma) - g_sca(e0 - dh, e0, th, gamma)) / (2 * dh)
        tan = max(abs(float(g_sca(e0, e0, th, gamma) - g_exact(e0, th, gamma))) / scale,
                  abs(float(slope - slope_s)) / max(abs(float(slope)), scale))
        worst_tan = max(worst_tan, tan)
    err = max(worst_gap / 1e-4, worst_tan / 1e-6)
    return OracleResult("sca", err, 1.0, 0.0,
                        f"max|eps*-brute|={worst_gap:.2e} tangency={worst_tan:.1e} feasible={n_feasible}/{n_instances}")


ALL = (bussgang_fidelity, fp_equivalence, fim_oracle, derivative_oracle, gnn_gradient_oracle, bound_sandwich,
       sca_oracle)


def run_all(stream=None) -> bool:
    ok = True
    for check in ALL:
        res = check()
        ok &= res.passed
        if stream is not None:
            print(res.line(), file=stream)
    return ok
