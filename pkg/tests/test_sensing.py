import numpy as np
import pytest

from cfisac.numerics import SingularFimError, make_rng
from cfisac.pa import PaParams, sample_transmit
from cfisac.sensing import (crlb_feasible, crlb_trace, crlb_traces, fim_entry_expected, fim_expected, fim_matrix,
                            fim_terms, sample_fim)

LINEAR = PaParams(1.0, (0.0,), 0.0)


def test_zero_beamformer(instance):
    cfg, _, ch, sol = instance
    terms = fim_terms(ch.dH, np.zeros_like(sol.W), cfg.noise)
    assert np.array_equal(fim_matrix(0, terms, LINEAR), np.zeros((2, 2)))
    assert fim_entry_expected(1, 0, 1, terms, PaParams(1.0, (0.1, 0.05j), 0.1)) == 0.0
    assert np.all(np.isinf(crlb_traces(terms, LINEAR)))
    assert not crlb_feasible(terms, LINEAR, np.inf).any()


def test_linear_matches_monte_carlo(instance):
    cfg, _, ch, sol = instance
    F = fim_expected(fim_terms(ch.dH, sol.W, cfg.noise), LINEAR)
    _, lin, d = sample_transmit(sol.W, LINEAR, make_rng(0, 5), 100_000)
    F_mc = sample_fim(ch.dH, lin, d, cfg.noise)
    for b in range(cfg.n_sap):
        assert np.linalg.norm(F_mc[b] - F[b]) <= 0.03 * np.linalg.norm(F[b])


def test_entries_symmetric(instance):
    cfg, _, ch, sol = instance
    terms = fim_terms(ch.dH, sol.W, cfg.noise)
    rng = make_rng(1)
    for _ in range(20):
        params = PaParams(1.0, tuple(0.2 * (rng.uniform(-1, 1, 2) + 1j * rng.uniform(-1, 1, 2))), 0.3)
        for b in range(cfg.n_sap):
            a, c = fim_entry_expected(b, 0, 1, terms, params), fim_entry_expected(b, 1, 0, terms, params)
            assert np.isclose(a, c, rtol=1e-9)


def test_psd_on_random_solutions(instance):
    cfg, sc, _, sol = instance
    rng = make_rng(2)
    for _ in range(100):
        W = rng.normal(size=sol.W.shape) + 1j * rng.normal(size=sol.W.shape)
        W *= np.sqrt(cfg.p_t) / np.linalg.norm(W, axis=(1, 2), keepdims=True)
        p_t = np.sort(rng.uniform(cfg.p_min, cfg.p_max, sol.p_t.shape), axis=1)
        ch = sc.channels(p_t, sol.p_r)
        params = PaParams(1.0, tuple(0.2 * rng.uniform(0, 1, 2) * np.exp(2j * np.pi * rng.uniform(0, 1, 2))), 0.2)
        for J in fim_expected(fim_terms(ch.dH, W, cfg.noise), params):
            assert np.linalg.eigvalsh(J).min() >= -1e-9 * np.abs(J).max()


def test_noise_scaling(instance):
    cfg, _, ch, sol = instance
    params = PaParams(1.0, (0.1, -0.07j), 0.1)
    F1 = fim_expected(fim_terms(ch.dH, sol.W, cfg.noise), params)
    F4 = fim_expected(fim_terms(ch.dH, sol.W, 4 * cfg.noise), params)
    assert np.allclose(F4, F1 / 4)


def test_crlb_trace_examples():
    assert np.isclose(crlb_trace(np.diag([4.0, 2.0])), 0.75)
    assert np.isclose(crlb_trace(np.eye(2)), 2.0)
    with pytest.raises(SingularFimError):
        crlb_trace(np.zeros((2, 2)))


def test_more_power_lowers_crlb(instance):
    cfg, _, ch, sol = instance
    t1 = crlb_traces(fim_terms(ch.dH, sol.W, cfg.noise), LINEAR)
    t2 = crlb_traces(fim_terms(ch.dH, 1.5 * sol.W, cfg.noise), LINEAR)
    assert np.all(t2 < t1)


def test_gate(instance):
    cfg, _, ch, sol = instance
    terms = fim_terms(ch.dH, sol.W, cfg.noise)
    tr = crlb_traces(terms, LINEAR)
    assert np.array_equal(crlb_feasible(terms, LINEAR, 0.05), tr <= 0.05)
    assert crlb_feasible(terms, LINEAR, np.inf).all()
