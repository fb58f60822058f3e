import numpy as np
import pytest

from cfisac.comm import (LinkBudget, Solution, delta, delta_robust_lower, fp_objective, mu_star,
                         quadratic_transform_term, robust_auxiliaries, robust_fp_objective, sindr, sindr_all,
                         sum_rate, with_auxiliaries, worst_case_rate_bound, worst_case_sindr, zeta_star,
                         zeta_star_all)
from cfisac.geometry import ChannelSet
from cfisac.numerics import gaussian_complex, make_rng
from cfisac.oracles import random_comm_instance, random_disk_beta3
from cfisac.pa import PaParams, bussgang_model, linear_model, sample_transmit

BUDGET = LinkBudget(1e-9, 1e-9)


def _channels(h):
    A, K, n_t = h.shape
    return ChannelSet(h, np.zeros((1, A, 1, n_t), complex), np.zeros((1, A, 2, 1, n_t), complex))


def _sol(W):
    return Solution(W, np.zeros(W.shape[:2]), np.zeros((1, 1)))


def _instances(n=20, seed=0):
    rng = make_rng(seed, 3)
    return [random_comm_instance(rng) for _ in range(n)]


def test_zero_beamformer_gives_zero():
    ch, sol, params = random_comm_instance(make_rng(0))
    zero = sol.copy(W=np.zeros_like(sol.W))
    bm = bussgang_model(zero.W, params)
    assert sindr(0, ch, bm, zero, BUDGET) == 0.0
    assert mu_star(1, ch, bm, zero, BUDGET) == 0.0
    assert zeta_star(0, ch, bm, zero, BUDGET) == 0.0
    assert delta(ch, bm, zero, BUDGET) == 0.0


def test_single_link_snr():
    rng = make_rng(1)
    h = gaussian_complex(rng, (1, 1, 3))
    W = gaussian_complex(rng, (1, 3, 1))
    budget = LinkBudget(0.5, 0.5)
    expected = abs(h[0, 0].conj() @ W[0, :, 0]) ** 2 * 0.8 ** 2 / 0.5
    assert np.isclose(sindr(0, _channels(h), linear_model(W, 0.8), _sol(W), budget), expected)


def test_sindr_monte_carlo():
    rng = make_rng(2)
    ch, sol, params = random_comm_instance(rng)
    budget = LinkBudget(1e-7, 1e-7)
    bm = bussgang_model(sol.W, params)
    x, lin, d = sample_transmit(sol.W, params, rng, 100_000)
    n = gaussian_complex(rng, (2, 100_000), budget.noise_k)
    y = np.einsum("akn,and->kd", ch.h.conj(), lin + d) + n
    desired = np.abs(np.mean(y * x.conj(), axis=1)) ** 2
    rest = np.mean(np.abs(y) ** 2, axis=1) - desired
    analytic = sindr_all(ch, bm, sol, budget)
    assert np.allclose(desired / rest, analytic, rtol=0.03)


def test_sum_rate_unit_sindr():
    h = np.eye(2, dtype=complex)[None]  # orthogonal UEs
    W = np.sqrt(BUDGET.noise_k) * np.eye(2, dtype=complex)[None]
    assert np.isclose(sum_rate(_channels(h), linear_model(W), _sol(W), BUDGET), 2.0)


def test_sum_rate_zero():
    h = gaussian_complex(make_rng(3), (1, 2, 2))
    W = np.zeros((1, 2, 2), complex)
    assert sum_rate(_channels(h), linear_model(W), _sol(W), BUDGET) == 0.0


def test_single_user_rate_monotone():
    rng = make_rng(4)
    h = gaussian_complex(rng, (1, 1, 3)) * 1e-4
    W = gaussian_complex(rng, (1, 3, 1))
    rates = [sum_rate(_channels(h), linear_model(s * W), _sol(s * W), BUDGET) for s in (1, 1.5, 2, 4)]
    assert np.all(np.diff(rates) >= 0)


def test_mu_star_is_sindr():
    for ch, sol, params in _instances(100):
        bm = bussgang_model(sol.W, params)
        s = sindr_all(ch, bm, sol, BUDGET)
        assert np.allclose([mu_star(k, ch, bm, sol, BUDGET) for k in range(2)], s, rtol=1e-12)


def test_fp_equivalence():
    for ch, sol, params in _instances(100):
        bm = bussgang_model(sol.W, params)
        mu = sindr_all(ch, bm, sol, BUDGET)
        full = with_auxiliaries(sol, mu, zeta_star_all(ch, bm, sol, BUDGET, mu))
        assert np.isclose(fp_objective(ch, bm, full, BUDGET), sum_rate(ch, bm, sol, BUDGET), rtol=1e-9)


def test_quadratic_transform_recovers_ratio():
    for ch, sol, params in _instances():
        bm = bussgang_model(sol.W, params)
        mu = sindr_all(ch, bm, sol, BUDGET)
        full = with_auxiliaries(sol, mu, zeta_star_all(ch, bm, sol, BUDGET, mu))
        for k in range(2):
            # at the optimal zeta the term equals (1+mu) * gamma / (1+gamma)
            assert np.isclose(quadratic_transform_term(k, ch, bm, full, BUDGET), mu[k], rtol=1e-9)


def test_zeta_conjugates_with_channels():
    ch, sol, params = random_comm_instance(make_rng(5))
    lin = PaParams(1.0, (0.0,), 0.0)
    W_conj = sol.copy(W=sol.W.conj())
    a = zeta_star_all(ch, bussgang_model(sol.W, lin), sol.copy(mu=np.ones(2)), BUDGET)
    b = zeta_star_all(ch.conj(), bussgang_model(W_conj.W, lin), W_conj.copy(mu=np.ones(2)), BUDGET)
    assert np.allclose(b, a.conj())


def test_delta_concave_in_beamformer():
    rng = make_rng(6)
    for ch, sol, params in _instances():
        bm = bussgang_model(sol.W, params)
        sol = with_auxiliaries(sol, rng.uniform(0, 3, 2), gaussian_complex(rng, 2) * 1e3)
        W2 = sol.W.copy()
        W2[1, :, 0] = gaussian_complex(rng, 4) * 0.3
        f = lambda W: delta(ch, bm, sol.copy(W=W), BUDGET)  # Bussgang model held fixed
        assert f(0.5 * (sol.W + W2)) >= 0.5 * (f(sol.W) + f(W2)) - 1e-9 * abs(f(sol.W))


def test_robust_lower_at_zero_radius():
    rng = make_rng(7)
    for ch, sol, _ in _instances():
        sol = with_auxiliaries(sol, rng.uniform(0, 3, 2), gaussian_complex(rng, 2) * 1e3)
        nominal = delta(ch, bussgang_model(sol.W, PaParams(1.0, (0.0,), 0.0)), sol, BUDGET)
        assert np.isclose(delta_robust_lower(ch, sol, BUDGET, PaParams(1.0, (0.0,), 0.0)), nominal)


def test_robust_lower_sandwich():
    rng = make_rng(8)
    ch, sol, _ = random_comm_instance(rng)
    eps = 0.2
    params = PaParams(1.0, (0.0,), eps)
    sol = with_auxiliaries(sol, *robust_auxiliaries(ch, sol.W, BUDGET, params))
    low = delta_robust_lower(ch, sol, BUDGET, params)
    for _ in range(1000):
        b3 = random_disk_beta3(rng, 2, eps)
        assert low <= delta(ch, bussgang_model(sol.W, PaParams(1.0, tuple(b3), eps)), sol, BUDGET) + 1e-12


def test_robust_lower_monotone_in_radius():
    rng = make_rng(9)
    for ch, sol, _ in _instances(100):
        sol = with_auxiliaries(sol, rng.uniform(0, 3, 2), gaussian_complex(rng, 2) * 1e3)
        vals = [delta_robust_lower(ch, sol, BUDGET, PaParams(1.0, (0.0,), e)) for e in np.linspace(0, 0.3, 7)]
        assert np.all(np.diff(vals) <= 1e-12 * np.abs(vals).max())


def test_printed_bound_option():
    ch, sol, _ = random_comm_instance(make_rng(10))
    params = PaParams(1.0, (0.0,), 0.1)
    sol = with_auxiliaries(sol, np.ones(2), np.ones(2) * 1e3)
    tight = delta_robust_lower(ch, sol, BUDGET, params)
    assert np.isfinite(delta_robust_lower(ch, sol, BUDGET, params, bound="printed"))
    assert tight <= delta_robust_lower(ch, sol, BUDGET, params, bound="printed")
    with pytest.raises(ValueError):
        delta_robust_lower(ch, sol, BUDGET, params, bound="other")


def test_worst_case_sindr_below_every_draw():
    rng = make_rng(11)
    ch, sol, _ = random_comm_instance(rng)
    eps = 0.15
    wc = worst_case_sindr(ch, sol.W, BUDGET, PaParams(1.0, (0.0,), eps))
    for _ in range(300):
        params = PaParams(1.0, tuple(random_disk_beta3(rng, 2, eps)), eps)
        assert np.all(wc <= sindr_all(ch, bussgang_model(sol.W, params), sol, BUDGET) * (1 + 1e-12))


def test_robust_objective_at_auxiliaries_is_rate_bound():
    for ch, sol, _ in _instances():
        params = PaParams(1.0, (0.0,), 0.1)
        full = with_auxiliaries(sol, *robust_auxiliaries(ch, sol.W, BUDGET, params))
        assert np.isclose(robust_fp_objective(ch, full, BUDGET, params),
                          worst_case_rate_bound(ch, sol.W, BUDGET, params), rtol=1e-9)


def test_budget_rejects_nonpositive_noise():
    with pytest.raises(ValueError):
        LinkBudget(0.0, 1.0)
