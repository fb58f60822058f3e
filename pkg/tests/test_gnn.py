import numpy as np
import pytest

from cfisac import autodiff as ad
from cfisac.config import SystemConfig
from cfisac.feasibility import positions_ok, power_ok
from cfisac.geometry import ChannelSet, Geometry, draw_scenario
from cfisac.gnn import GnnPolicy, HetGraph, build_graph, composite_loss, train
from cfisac.gnn.checkpoint import load_checkpoint, save_checkpoint
from cfisac.gnn.graph import SAP, TAP, UE
from cfisac.gnn.model import project, reference_grid
from cfisac.gnn.train import evaluate, make_sample
from cfisac.oracles import gnn_gradient_oracle


@pytest.fixture(scope="module")
def cfg():
    return SystemConfig()


@pytest.fixture(scope="module")
def sample(cfg):
    return make_sample(cfg, 5, cfg.epsilon)


def test_graph_counts(sample):
    g = sample.graph
    assert g.n_nodes == 14
    assert g.count_edges(0) == 16
    assert g.count_edges(1) == 2 * 4 * 2 * 2
    assert np.array_equal(np.bincount(g.node_type), [8, 4, 2])


def test_graph_without_users(cfg):
    sc = draw_scenario(cfg, 0)
    p_t, p_r = np.zeros((2, 4)) + [-1.5, -0.5, 0.5, 1.5], np.zeros((2, 2)) + [-0.5, 0.5]
    ch = sc.channels(p_t, p_r)
    empty = ChannelSet(ch.h[:, :0], ch.H, ch.dH, ch.comm_pl[:, :0])
    geo = Geometry(sc.geometry.target, sc.geometry.tap_positions, sc.geometry.sap_positions, np.zeros((0, 2)))
    g = build_graph(cfg, empty, geo, p_t, p_r)
    assert g.count_edges(0) == 0 and g.n_nodes == 12


def _tiny_graph(edge_feat):
    """Node 0 attends to nodes 1 and 2."""
    return HetGraph(np.array([TAP, TAP, TAP]), {TAP: np.zeros((3, 1)), SAP: np.zeros((0, 1)), UE: np.zeros((0, 5))},
                    np.array([1, 2]), np.array([0, 0]), np.asarray(edge_feat, float), np.array([0, 0]),
                    1, 0, 0, 3, 1)


def _scalar_policy():
    policy = GnnPolicy(SystemConfig(d_model=1, heads=1, layers=1), np.random.default_rng(0))
    P = {k: ad.Tensor(v) for k, v in policy.params.items()}
    P["l0_Wq"] = ad.Tensor(np.ones((1, 1)))
    P["l0_Wk"] = ad.Tensor(np.ones((1, 1)))
    P["l0_We"] = ad.Tensor(np.zeros((5, 1)))
    return policy, P


def test_softmax_hand_value():
    policy, P = _scalar_policy()
    alpha, _ = policy.attention(_tiny_graph(np.zeros((2, 5))), ad.Tensor(np.array([[1.0], [1.0], [0.0]])), P, 0)
    assert np.allclose(alpha.value[:, 0], [0.7311, 0.2689], atol=1e-4)


def test_identical_keys_split_evenly():
    policy, P = _scalar_policy()
    alpha, _ = policy.attention(_tiny_graph(np.zeros((2, 5))), ad.Tensor(np.array([[0.3], [2.0], [2.0]])), P, 0)
    assert np.allclose(alpha.value[:, 0], 0.5)


def test_single_neighbour_gets_all_weight():
    policy, P = _scalar_policy()
    g = _tiny_graph(np.zeros((2, 5)))
    g.src, g.dst, g.edge_feat, g.edge_kind = g.src[:1], g.dst[:1], g.edge_feat[:1], g.edge_kind[:1]
    alpha, _ = policy.attention(g, ad.Tensor(np.array([[5.0], [-3.0], [0.0]])), P, 0)
    assert np.allclose(alpha.value, 1.0)


def test_attention_normalised(cfg, sample):
    policy = GnnPolicy(cfg, np.random.default_rng(1))
    P = policy.leaves()
    h = policy.embed(sample.graph, P)
    alpha, _ = policy.attention(sample.graph, h, P, 0)
    sums = np.zeros((sample.graph.n_nodes, cfg.heads))
    np.add.at(sums, sample.graph.dst, alpha.value)
    assert np.allclose(sums, 1.0)


def test_decode_zero_state(cfg, sample):
    policy = GnnPolicy(cfg, np.random.default_rng(2))
    g = sample.graph
    g0 = HetGraph(g.node_type, g.features, g.src, g.dst, np.zeros_like(g.edge_feat), g.edge_kind,
                  g.n_tap, g.n_sap, g.n_ue, g.n_t, g.n_r)
    P = {k: ad.Tensor(v) for k, v in policy.params.items()}
    W, p_t, p_r = policy.decode(g0, ad.Tensor(np.zeros((g.n_nodes, cfg.d_model))), P)
    ref_t, ref_r = policy.reference_layout()
    assert np.array_equal(W.value, np.zeros((2, 4, 2)))
    assert np.allclose(p_t.value, ref_t) and np.allclose(p_r.value, ref_r)


def test_pooled_positions_permutation_invariant(cfg, sample):
    rng = np.random.default_rng(3)
    policy = GnnPolicy(cfg, rng)
    policy.params["dec_pt_W2"] = rng.normal(size=policy.params["dec_pt_W2"].shape)
    P = {k: ad.Tensor(v) for k, v in policy.params.items()}
    h = rng.normal(size=(sample.graph.n_nodes, cfg.d_model))
    perm = np.arange(sample.graph.n_nodes)
    perm[:4] = [2, 0, 3, 1]  # shuffle the antennas of the first array
    _, a, _ = policy.decode(sample.graph, ad.Tensor(h), P)
    _, b, _ = policy.decode(sample.graph, ad.Tensor(h[perm]), P)
    assert np.allclose(a.value, b.value)


def test_ue_relabelling_permutes_beamformers(cfg, sample):
    """Swapping the two UE nodes swaps the beamformer columns."""
    policy = GnnPolicy(cfg, np.random.default_rng(4))
    g = sample.graph
    off_u = g.offsets()[2]
    swap = np.arange(g.n_nodes)
    swap[off_u], swap[off_u + 1] = off_u + 1, off_u
    feats = dict(g.features)
    feats[UE] = g.features[UE][::-1]
    g2 = HetGraph(g.node_type, feats, swap[g.src], swap[g.dst], g.edge_feat, g.edge_kind,
                  g.n_tap, g.n_sap, g.n_ue, g.n_t, g.n_r)
    a, b = policy(g).W_hat, policy(g2).W_hat
    assert np.allclose(a, b[:, :, ::-1])


def test_output_shapes_and_feasible(cfg, sample):
    out = GnnPolicy(cfg, np.random.default_rng(5))(sample.graph)
    assert out.W_hat.shape == (2, 4, 2) and out.sol.p_t.shape == (2, 4) and out.sol.p_r.shape == (2, 2)
    assert power_ok(out.sol.W, cfg.p_t)
    assert positions_ok(out.sol.p_t, cfg.d0, cfg.p_min, cfg.p_max)
    assert positions_ok(out.sol.p_r, cfg.d0, cfg.p_min, cfg.p_max)


def test_project_halves_and_is_idempotent(cfg):
    W = np.ones((2, 4, 2), complex) * np.sqrt(4 * cfg.p_t / 8)  # ||W_a||^2 = 4 P_t
    p_t = np.tile(reference_grid(4, cfg.d0, cfg.p_min, cfg.p_max, 0.25), (2, 1))
    p_r = np.zeros((2, 2)) + [0.0, 0.1]
    out = project(W, p_t, p_r, cfg)
    assert np.allclose(out.sol.W, W / 2)
    assert np.allclose(out.sol.p_r, [[0.0, 0.5], [0.0, 0.5]])
    again = project(out.sol.W, out.sol.p_t, out.sol.p_r, cfg)
    assert np.allclose(again.sol.W, out.sol.W) and np.array_equal(again.sol.p_t, out.sol.p_t)
    assert np.array_equal(again.sol.p_r, out.sol.p_r)


def test_composite_loss_examples():
    assert composite_loss(2.0, 1, 0, 10.0) == -2.0
    assert composite_loss(0.0, 2, 1, 10.0) == 10.0
    assert composite_loss(1.5, 2, 3, 0.0) == -3.0


def test_gradients_match_differences():
    res = gnn_gradient_oracle()
    assert res.passed, res.line()


def test_zero_episodes_keep_parameters(cfg):
    policy = GnnPolicy(cfg, np.random.default_rng(6))
    before = {k: v.copy() for k, v in policy.params.items()}
    res = train(cfg, episodes=0, policy=policy)
    assert res.steps == 0
    assert all(np.array_equal(before[k], policy.params[k]) for k in before)


def test_checkpoint_round_trip(tmp_path, cfg):
    policy = GnnPolicy(cfg, np.random.default_rng(7))
    path = tmp_path / "policy.ckpt"
    save_checkpoint(path, policy.params, {"note": "x"})
    params, meta = load_checkpoint(path)
    assert meta == {"note": "x"}
    assert params.keys() == policy.params.keys()
    assert all(np.array_equal(params[k], policy.params[k]) for k in params)


def test_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_text("hello\n")
    with pytest.raises(ValueError):
        load_checkpoint(path)


@pytest.fixture(scope="module")
def trained(cfg):
    return train(cfg, rng=np.random.default_rng(0))


def test_training_trend(trained):
    losses = np.array(trained.losses)
    ma = np.convolve(losses, np.ones(20) / 20, mode="valid")
    best_step = (trained.best_epoch + 1) * 4  # 16 draws, batch 4
    assert ma[:max(best_step - 19, 1)].min() < ma[0]
    assert trained.val_losses[trained.best_epoch] == min(trained.val_losses)
    assert len(trained.val_losses) == len(trained.epoch_losses)
    assert trained.stopped in ("early", "budget")


def test_trained_beats_untrained(cfg, trained):
    held = [make_sample(cfg, 900_000 + i, cfg.epsilon, stream=2) for i in range(100)]
    untrained = GnnPolicy(cfg, np.random.default_rng(0))
    assert evaluate(trained.policy, held, cfg.epsilon) > evaluate(untrained, held, cfg.epsilon)
