import itertools
import math

import numpy as np
import pytest

from normembed import tasks
from normembed.engine import TrainConfig
from normembed.graphs import Graph
from normembed.spaces import parse_space
from normembed.tasks import InteractionSet, RecsysModel


def toy_model(spec_text="l2:2", n_users=1, n_items=2, seed=0, margin=1.0):
    spec = parse_space(spec_text)
    rng = np.random.default_rng(seed)
    n = n_users + n_items
    return RecsysModel(spec, n_users, rng.normal(size=(n, spec.total_dim)) * 0.5,
                       rng.normal(size=n), rng.normal(size=n), margin)


def params(model):
    return [model.points, model.bias_lhs, model.bias_rhs]


def fd_check(model, loss_fn, grads, h=1e-6):
    """Relative error of the analytic gradient over all parameters jointly."""
    nums = []
    for arr in params(model):
        num = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = loss_fn()
            arr[idx] = old - h
            down = loss_fn()
            arr[idx] = old
            num[idx] = (up - down) / (2 * h)
        nums.append(num.ravel())
    num = np.concatenate(nums)
    ana = np.concatenate([g.ravel() for g in grads])
    return np.linalg.norm(num - ana) / max(np.linalg.norm(num), np.linalg.norm(ana), 1e-12)


def two_cliques(k=12):
    edges = [(a, b) for a, b in itertools.combinations(range(k), 2)]
    edges += [(a + k, b + k) for a, b in itertools.combinations(range(k), 2)]
    return Graph.from_edges(2 * k, edges)


def test_score_examples():
    m = toy_model()
    m.bias_lhs[:] = 0
    m.bias_rhs[:] = 0
    m.points[:] = 0
    assert tasks.score(m, 0, 0) == 0
    m.points[2] = [2.0, 0.0]
    assert tasks.score(m, 0, 1) == -4.0
    m.points[1] = [1.0, 0.0]
    assert tasks.score(m, 0, 0) > tasks.score(m, 0, 1)


def test_score_monotone_in_distance(rng):
    m = toy_model("l1:3", n_items=1)
    direction = rng.normal(size=3)
    values = []
    for r in np.linspace(0, 5, 50):
        m.points[1] = m.points[0] + r * direction
        values.append(tasks.score(m, 0, 0))
    assert all(a > b for a, b in zip(values, values[1:]))


def test_hinge_examples():
    m = toy_model(margin=0.5)
    m.bias_lhs[:] = m.bias_rhs[:] = 0
    m.points[:] = 0
    # equal scores: each negative contributes the margin
    assert tasks.hinge_loss(m, [0], [0], [[1, 1, 1]]) == pytest.approx(1.5)
    # positive far ahead of the negative: no loss
    m.points[2] = [3.0, 0.0]
    assert tasks.hinge_loss(m, [0], [0], [[1]]) == 0
    # reversed roles are penalised
    assert tasks.hinge_loss(m, [0], [1], [[0]]) == pytest.approx(9.5)


@pytest.mark.parametrize("text", ["l1:3", "l2:2", "linf:3", "poincare:2", "l1:2*poincare:2"])
def test_hinge_gradient(text):
    for seed in range(5):
        m = toy_model(text, n_users=2, n_items=3, seed=seed, margin=2.0)
        if m.spec.factors[-1].kind == "poincare":
            m.points[:, -2:] *= 0.5
        users, pos, negs = [0, 1], [0, 2], [[1, 2], [0, 1]]
        loss, grads = tasks.hinge_loss_and_grad(m, users, pos, negs)
        assert loss > 0
        assert fd_check(m, lambda: tasks.hinge_loss(m, users, pos, negs), grads) <= 1e-5


@pytest.mark.parametrize("text", ["l1:3", "l2:2", "poincare:2"])
def test_bce_gradient(text):
    m = toy_model(text, n_users=2, n_items=2, seed=3)
    if text.startswith("poincare"):
        m.points *= 0.5
    users, items, labels = [0, 1, 0, 1], [0, 1, 1, 0], [1, 1, 0, 0]
    _, grads = tasks.bce_loss_and_grad(m, users, items, labels)
    assert fd_check(m, lambda: tasks.bce_recsys_loss(m, users, items, labels), grads) <= 1e-5


def test_bce_examples():
    m = toy_model()
    m.bias_lhs[:] = m.bias_rhs[:] = 0
    m.points[:] = 0
    assert tasks.bce_recsys_loss(m, [0], [0], [1]) == pytest.approx(math.log(2))
    m.bias_lhs[0] = 800.0
    assert tasks.bce_recsys_loss(m, [0], [0], [1]) == pytest.approx(0.0, abs=1e-300)
    # phi for the positive and -phi for the negative give equal terms
    m.bias_lhs[0] = 0
    m.bias_rhs[1], m.bias_rhs[2] = 1.3, -1.3
    pos = tasks.bce_recsys_loss(m, [0], [0], [1])
    neg = tasks.bce_recsys_loss(m, [0], [1], [0])
    assert pos == pytest.approx(neg)


def test_interaction_set_validation():
    with pytest.raises(ValueError):
        InteractionSet(2, 2, [(0, 0)], [], [(0, 0)])
    with pytest.raises(ValueError):
        InteractionSet(2, 2, [(0, 0)], [], [(1, 1)])
    with pytest.raises(ValueError):
        InteractionSet(2, 2, [(0, 5)], [], [])
    d = InteractionSet(2, 3, [(0, 0), (1, 1)], [(0, 1)], [(0, 2)])
    assert d.complement(0).tolist() == []
    assert d.complement(1).tolist() == [0, 2]


def test_interaction_files_roundtrip(tmp_path):
    d = tasks.planted_blocks(2, 3, 4, seed=1)
    tasks.write_interactions(d, tmp_path / "toy")
    back = tasks.load_interactions(tmp_path / "toy")
    assert (back.num_users, back.num_items) == (d.num_users, d.num_items)
    for split in ("train", "dev", "test"):
        raw = [(back.user_names[u], back.item_names[i]) for u, i in getattr(back, split).tolist()]
        assert raw == [(str(u), str(i)) for u, i in getattr(d, split).tolist()]


def test_missing_split_files_explain_layout(tmp_path):
    with pytest.raises(FileNotFoundError, match=r"ml\.train\.tsv.*ml\.dev\.tsv.*ml\.test\.tsv"):
        tasks.load_interactions(tmp_path / "ml")


def test_leave_one_out_split():
    d = tasks.planted_blocks(3, 4, 5, seed=2)
    assert len(d.test) == len(d.dev) == 12
    assert len(d.train) == 12 * 5 - 24
    for u in range(12):
        block = u // 4
        assert d.user_items[u] == set(range(block * 5, block * 5 + 5))


def test_candidates_and_ranks(rng):
    d = tasks.planted_blocks(seed=0)
    cands = tasks.candidate_sets(d, d.test, seed=4)
    assert cands.shape == (len(d.test), 101)
    assert np.array_equal(cands[:, 0], d.test[:, 1])
    for (u, _), row in zip(d.test.tolist(), cands):
        assert not set(row[1:].tolist()) & d.user_items[u]
    assert np.array_equal(cands, tasks.candidate_sets(d, d.test, seed=4))
    # rank of column 0 against a full sort, ties placed against the target
    scores = rng.integers(0, 30, size=(500, 101)).astype(float)
    ranks = tasks.target_ranks(scores)
    for row, r in zip(scores, ranks):
        order = sorted(range(101), key=lambda j: (-row[j], j == 0))
        assert order.index(0) + 1 == r


def test_random_scores_give_chance_hit_rate(rng):
    ranks = tasks.target_ranks(rng.random(size=(200_000, 101)))
    hr = np.mean([r <= 10 for r in ranks])
    assert hr == pytest.approx(10 / 101, abs=0.003)


def test_one_user_two_items():
    d = InteractionSet(1, 2, [(0, 0)], [], [])
    m, res = tasks.train_recsys(d, parse_space("l2:2"), tasks.recsys_config(max_epochs=60, patience=50),
                                loss_kind="hinge", n_negatives=1)
    assert tasks.score(m, 0, 0) > tasks.score(m, 0, 1)


def test_recsys_config_schedule():
    cfg = tasks.recsys_config()
    assert (cfg.max_epochs, cfg.patience, cfg.burn_in_epochs, cfg.burn_in_factor) == (500, 50, 10, 10)
    assert cfg.optimizer == "sgd"


def test_planted_blocks_are_recovered():
    d = tasks.planted_blocks(4, 10, 10, seed=0)
    _, res = tasks.train_recsys(d, parse_space("l1:20"), tasks.recsys_config(seed=0), loss_kind="bce")
    assert res["hr10"] >= 0.9
    assert res["epochs"] <= 500


def test_fermi_dirac():
    assert tasks.fermi_dirac(math.sqrt(2.0), 2.0, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert tasks.fermi_dirac(0.0, 2.0, 1.0) == pytest.approx(1 / (1 + math.exp(-2)))
    assert tasks.fermi_dirac(0.0, 2.0, 1.0) == pytest.approx(0.8807970779778823)
    d = np.linspace(0, 5, 100)
    p = tasks.fermi_dirac(d, 2.0, 0.7)
    assert np.all(np.diff(p) < 0) and np.all((p > 0) & (p < 1))
    with pytest.raises(ValueError):
        tasks.fermi_dirac(1.0, 2.0, 0.0)


def test_linkpred_gradient(rng):
    spec = parse_space("l2:2*poincare:2")
    pts = rng.normal(size=(6, 4)) * 0.3
    model = tasks.LinkPredModel(spec, pts, r=1.5, t=0.8)
    pos, neg = np.array([[0, 1], [2, 3]]), np.array([[0, 4], [1, 5], [3, 5]])
    loss, g_pts, g_r, g_t = tasks.linkpred_loss_and_grad(model, pos, neg)

    def f():
        return tasks.linkpred_loss_and_grad(model, pos, neg)[0]

    h = 1e-6
    num = np.zeros_like(pts)
    for idx in np.ndindex(pts.shape):
        old = pts[idx]
        pts[idx] = old + h
        up = f()
        pts[idx] = old - h
        down = f()
        pts[idx] = old
        num[idx] = (up - down) / (2 * h)
    assert np.linalg.norm(num - g_pts) / np.linalg.norm(num) <= 1e-5
    for attr, g in (("r", g_r), ("t", g_t)):
        old = getattr(model, attr)
        setattr(model, attr, old + h)
        up = f()
        setattr(model, attr, old - h)
        down = f()
        setattr(model, attr, old)
        assert (up - down) / (2 * h) == pytest.approx(g, rel=1e-5)


def test_link_split_is_disjoint():
    g = two_cliques()
    split = tasks.make_link_split(g, seed=3)
    pos = [split.train_pos, split.dev_pos, split.test_pos]
    assert sum(map(len, pos)) == g.num_edges
    assert [len(p) for p in pos] == [len(split.train_neg), len(split.dev_neg), len(split.test_neg)]
    keys = [set(map(tuple, p.tolist())) for p in pos]
    assert not (keys[0] & keys[1]) and not (keys[0] & keys[2]) and not (keys[1] & keys[2])
    edges = set(zip(g.src.tolist(), g.dst.tolist()))
    negs = np.concatenate([split.train_neg, split.dev_neg, split.test_neg])
    assert len(set(map(tuple, negs.tolist()))) == len(negs)
    assert all(a < b and (a, b) not in edges for a, b in negs.tolist())


def test_perfect_decoder_auc():
    spec = parse_space("l1:1")
    model = tasks.LinkPredModel(spec, np.array([[0.0], [0.1], [5.0], [5.1]]))
    assert tasks.link_auc(model, np.array([[0, 1], [2, 3]]), np.array([[0, 2], [1, 3]])) == 1.0


def test_two_cliques_are_separable():
    g = two_cliques()
    split = tasks.make_link_split(g, seed=0)
    model, auc = tasks.train_linkpred(g, split, parse_space("l2:8"),
                                      TrainConfig(learning_rate=0.01, max_epochs=1000, patience=200))
    assert auc >= 0.95
    assert model.t > 0
