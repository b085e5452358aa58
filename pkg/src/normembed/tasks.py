"""Shallow downstream models: metric recommender and Fermi-Dirac link predictor."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import expit, log_expit

from . import metrics, spaces
from .engine import TrainConfig, TrainingAborted
from .graphs import Graph
from .spaces import SpaceSpec

log = logging.getLogger(__name__)

N_NEGATIVES = 100
N_CANDIDATES = 100
PLATEAU_FACTOR = 5.0


def recsys_config(**overrides) -> TrainConfig:
    """TrainConfig with the recommender schedule: 500 epochs, 10 burn-in, 50 patience."""
    base = TrainConfig(learning_rate=0.01, batch_size=1024, max_grad_norm=10.0, max_epochs=500,
                       patience=50, burn_in_epochs=10, burn_in_factor=10.0, optimizer="sgd")
    return replace(base, **overrides)


# ---------------------------------------------------------------------------
# data


@dataclass
class InteractionSet:
    """User-item interactions. Items are numbered from 0 independently of users."""

    num_users: int
    num_items: int
    train: np.ndarray
    dev: np.ndarray
    test: np.ndarray
    user_names: list[str] | None = None
    item_names: list[str] | None = None
    user_items: list[set[int]] = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("train", "dev", "test"):
            arr = np.asarray(getattr(self, name), dtype=np.int64).reshape(-1, 2)
            setattr(self, name, arr)
            if len(arr) and (arr[:, 0].min() < 0 or arr[:, 0].max() >= self.num_users
                             or arr[:, 1].min() < 0 or arr[:, 1].max() >= self.num_items):
                raise ValueError(f"{name} split has ids out of range")
        train_set = set(map(tuple, self.train.tolist()))
        if any(tuple(p) in train_set for p in self.test.tolist()):
            raise ValueError("test interactions overlap the training set")
        train_users = set(self.train[:, 0].tolist())
        if not set(self.test[:, 0].tolist()) <= train_users:
            raise ValueError("every test user must appear in train")
        self.user_items = [set() for _ in range(self.num_users)]
        for arr in (self.train, self.dev, self.test):
            for u, i in arr.tolist():
                self.user_items[u].add(i)

    def complement(self, user: int) -> np.ndarray:
        mask = np.ones(self.num_items, dtype=bool)
        mask[list(self.user_items[user])] = False
        return np.flatnonzero(mask)


def _read_pairs(path, users: dict, items: dict) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected 'user<TAB>item'")
            rows.append((users.setdefault(parts[0], len(users)), items.setdefault(parts[1], len(items))))
    return np.array(rows, dtype=np.int64).reshape(-1, 2)


def load_interactions(prefix) -> InteractionSet:
    """Read ``<prefix>.train.tsv``, ``<prefix>.dev.tsv``, ``<prefix>.test.tsv``."""
    prefix = Path(prefix)
    paths = {s: prefix.with_name(prefix.name + f".{s}.tsv") for s in ("train", "dev", "test")}
    missing = [str(p) for p in paths.values() if not p.exists()]
    if missing:
        raise FileNotFoundError(
            "missing split files: " + ", ".join(missing)
            + f". Expected {prefix}.train.tsv, {prefix}.dev.tsv and {prefix}.test.tsv,"
            " one 'user<TAB>item' pair per line."
        )
    users: dict[str, int] = {}
    items: dict[str, int] = {}
    splits = {s: _read_pairs(p, users, items) for s, p in paths.items()}
    return InteractionSet(len(users), len(items), splits["train"], splits["dev"], splits["test"],
                          user_names=list(users), item_names=list(items))


def write_interactions(data: InteractionSet, prefix) -> None:
    prefix = Path(prefix)
    un = data.user_names or [str(i) for i in range(data.num_users)]
    it = data.item_names or [str(i) for i in range(data.num_items)]
    for split in ("train", "dev", "test"):
        with open(prefix.with_name(prefix.name + f".{split}.tsv"), "w", encoding="utf-8") as fh:
            for u, i in getattr(data, split).tolist():
                fh.write(f"{un[u]}\t{it[i]}\n")


def split_leave_one_out(num_users: int, num_items: int, pairs, seed: int = 0) -> InteractionSet:
    """Hold out one interaction per user for test and one for dev (users with >= 3)."""
    rng = np.random.default_rng(seed)
    by_user: dict[int, list[int]] = {}
    for u, i in np.asarray(pairs).tolist():
        by_user.setdefault(u, [])
        if i not in by_user[u]:
            by_user[u].append(i)
    train, dev, test = [], [], []
    for u in sorted(by_user):
        items = rng.permutation(by_user[u]).tolist()
        if len(items) >= 3:
            test.append((u, items.pop()))
            dev.append((u, items.pop()))
        train.extend((u, i) for i in items)
    return InteractionSet(num_users, num_items, train, dev, test)


def planted_blocks(n_blocks: int = 8, users_per_block: int = 15, items_per_block: int = 15,
                   seed: int = 0) -> InteractionSet:
    """Synthetic recommender data: every user interacts with all items of its block."""
    pairs = [
        (b * users_per_block + u, b * items_per_block + i)
        for b in range(n_blocks) for u in range(users_per_block) for i in range(items_per_block)
    ]
    return split_leave_one_out(n_blocks * users_per_block, n_blocks * items_per_block, pairs, seed)


# ---------------------------------------------------------------------------
# recommender model


@dataclass
class RecsysModel:
    spec: SpaceSpec
    num_users: int
    points: np.ndarray
    bias_lhs: np.ndarray
    bias_rhs: np.ndarray
    margin: float = 1.0
    loss_kind: str = "hinge"

    def entity(self, item: int | np.ndarray):
        return self.num_users + np.asarray(item)


def init_recsys(spec: SpaceSpec, data: InteractionSet, seed: int, margin: float = 1.0,
                loss_kind: str = "hinge", init_scale: float = 1e-3) -> RecsysModel:
    n = data.num_users + data.num_items
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-init_scale, init_scale, size=(n, spec.total_dim))
    return RecsysModel(spec, data.num_users, pts, np.zeros(n), np.zeros(n), margin, loss_kind)


def phi(model: RecsysModel, e1, e2) -> np.ndarray:
    """Similarity ``b_lhs(e1) + b_rhs(e2) - d(e1, e2)**2`` over entity ids."""
    e1, e2 = np.atleast_1d(e1), np.atleast_1d(e2)
    d = spaces.distances(model.spec, model.points[e1], model.points[e2])
    return model.bias_lhs[e1] + model.bias_rhs[e2] - d * d


def score(model: RecsysModel, user: int, item: int) -> float:
    return float(phi(model, user, model.entity(item))[0])


def _phi_backward(model: RecsysModel, e1, e2, coef, g_pts, g_lhs, g_rhs) -> None:
    """Accumulate ``coef * grad phi(e1, e2)`` into the gradient buffers."""
    x, y = model.points[e1], model.points[e2]
    d = spaces.distances(model.spec, x, y)
    gx, gy, _ = spaces.distance_grads(model.spec, x, y)
    w = (-2.0 * d * coef)[:, None]
    np.add.at(g_pts, e1, w * gx)
    np.add.at(g_pts, e2, w * gy)
    np.add.at(g_lhs, e1, coef)
    np.add.at(g_rhs, e2, coef)


def _zero_grads(model: RecsysModel):
    return np.zeros_like(model.points), np.zeros_like(model.bias_lhs), np.zeros_like(model.bias_rhs)


def hinge_loss_and_grad(model: RecsysModel, users, pos_items, negatives):
    """Sum of ``[m - phi(u, v) + phi(u, w)]_+`` over positives and their negatives.

    ``negatives`` has one row of item ids per positive.
    """
    users = np.asarray(users)
    negatives = np.asarray(negatives).reshape(len(users), -1)
    k = negatives.shape[1]
    u_rep = np.repeat(users, k)
    v_ent = np.repeat(model.entity(pos_items), k)
    w_ent = model.entity(negatives.ravel())
    h = model.margin - phi(model, u_rep, v_ent) + phi(model, u_rep, w_ent)
    active = h > 0
    grads = _zero_grads(model)
    if np.any(active):
        ones = np.ones(int(active.sum()))
        _phi_backward(model, u_rep[active], v_ent[active], -ones, *grads)
        _phi_backward(model, u_rep[active], w_ent[active], ones, *grads)
    return float(np.sum(h[active])), grads


def hinge_loss(model: RecsysModel, users, pos_items, negatives) -> float:
    return hinge_loss_and_grad(model, users, pos_items, negatives)[0]


def bce_loss_and_grad(model: RecsysModel, users, items, labels):
    """``sum -y log sigma(phi) - (1 - y) log(1 - sigma(phi))``."""
    users = np.asarray(users)
    ents = model.entity(items)
    y = np.asarray(labels, dtype=np.float64)
    s = phi(model, users, ents)
    loss = float(-np.sum(y * log_expit(s) + (1.0 - y) * log_expit(-s)))
    grads = _zero_grads(model)
    _phi_backward(model, users, ents, expit(s) - y, *grads)
    return loss, grads


def bce_recsys_loss(model: RecsysModel, users, items, labels) -> float:
    return bce_loss_and_grad(model, users, items, labels)[0]


def _sample_from(rng, pool: np.ndarray, k: int) -> np.ndarray:
    return rng.choice(pool, size=k, replace=len(pool) < k)


def candidate_sets(data: InteractionSet, split: np.ndarray, seed: int, n: int = N_CANDIDATES):
    """Held-out item followed by ``n`` uninteracted items, one row per split pair."""
    rows = []
    for u, item in split.tolist():
        rng = np.random.default_rng([seed, u, item])
        rows.append(np.concatenate([[item], _sample_from(rng, data.complement(u), n)]))
    return np.array(rows, dtype=np.int64).reshape(len(split), n + 1)


def target_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based rank of column 0 in each row; ties go against the target."""
    return 1 + np.sum(scores[:, 1:] >= scores[:, :1], axis=1)


def rank_metrics(model: RecsysModel, data: InteractionSet, split: np.ndarray, cands: np.ndarray, k: int = 10):
    if len(split) == 0:
        return float("nan"), float("nan")
    users = np.repeat(split[:, 0], cands.shape[1])
    scores = phi(model, users, model.entity(cands.ravel())).reshape(cands.shape)
    ranks = target_ranks(scores)
    hr = np.mean([metrics.hr_at_k(int(r), k) for r in ranks])
    nd = np.mean([metrics.ndcg_at_k(int(r), k) for r in ranks])
    return float(hr), float(nd)


def _apply_update(model: RecsysModel, grads, lr: float, max_norm: float) -> None:
    g_pts, g_lhs, g_rhs = grads
    g_pts = spaces.riemannian_scale(model.spec, model.points, g_pts)
    norm = math.sqrt(float(np.sum(g_pts**2) + np.sum(g_lhs**2) + np.sum(g_rhs**2)))
    if not math.isfinite(norm):
        raise FloatingPointError("non-finite gradient")
    s = max_norm / norm if norm > max_norm else 1.0
    model.points -= lr * s * g_pts
    model.bias_lhs -= lr * s * g_lhs
    model.bias_rhs -= lr * s * g_rhs
    model.points[:] = spaces.project(model.spec, model.points)


def train_recsys(data: InteractionSet, spec: SpaceSpec, cfg: TrainConfig | None = None,
                 loss_kind: str = "hinge", margin: float = 1.0, n_negatives: int = N_NEGATIVES):
    """Riemannian SGD with burn-in and a single plateau decay.

    The learning rate drops by 5x after ``cfg.patience`` epochs without dev
    nDCG@10 improvement; a second such plateau stops training. Returns the
    best-on-dev model and a dict of dev/test HR@10 and nDCG@10.
    """
    cfg = cfg or recsys_config()
    if loss_kind not in ("hinge", "bce"):
        raise ValueError(f"unknown loss {loss_kind!r}")
    model = init_recsys(spec, data, cfg.seed, margin, loss_kind)
    rng = np.random.default_rng(cfg.seed)
    pools = [data.complement(u) for u in range(data.num_users)]
    dev_cands = candidate_sets(data, data.dev, cfg.seed)
    test_cands = candidate_sets(data, data.test, cfg.seed + 1)
    train = data.train
    batch = len(train) if cfg.batch_size < 0 else cfg.batch_size

    lr = cfg.learning_rate
    decayed = False
    best_dev = -math.inf
    best_state = None
    stale = 0
    history = []
    for epoch in range(1, cfg.max_epochs + 1):
        step_lr = lr / cfg.burn_in_factor if epoch <= cfg.burn_in_epochs else lr
        if loss_kind == "hinge":
            negs = np.stack([_sample_from(rng, pools[u], n_negatives) for u in range(data.num_users)])
            users, items = train[:, 0], train[:, 1]
            labels = None
        else:
            neg_items = np.array([_sample_from(rng, pools[u], 1)[0] for u in train[:, 0]])
            users = np.concatenate([train[:, 0], train[:, 0]])
            items = np.concatenate([train[:, 1], neg_items])
            labels = np.concatenate([np.ones(len(train)), np.zeros(len(train))])
        order = rng.permutation(len(users))
        epoch_loss = 0.0
        for lo in range(0, len(order), batch):
            idx = order[lo:lo + batch]
            if loss_kind == "hinge":
                loss, grads = hinge_loss_and_grad(model, users[idx], items[idx], negs[users[idx]])
            else:
                loss, grads = bce_loss_and_grad(model, users[idx], items[idx], labels[idx])
            if not math.isfinite(loss):
                raise TrainingAborted(epoch, lo // batch)
            try:
                _apply_update(model, grads, step_lr, cfg.max_grad_norm)
            except FloatingPointError:
                raise TrainingAborted(epoch, lo // batch, "non-finite gradient") from None
            epoch_loss += loss
        dev_hr, dev_nd = rank_metrics(model, data, data.dev, dev_cands)
        history.append((epoch, epoch_loss, dev_hr, dev_nd))
        if dev_nd > best_dev:
            best_dev = dev_nd
            best_state = (model.points.copy(), model.bias_lhs.copy(), model.bias_rhs.copy())
            stale = 0
        elif epoch > cfg.burn_in_epochs:
            stale += 1
            if stale >= cfg.patience:
                if decayed:
                    break
                lr /= PLATEAU_FACTOR
                decayed = True
                stale = 0
    if best_state is not None:
        model.points, model.bias_lhs, model.bias_rhs = best_state
    dev_hr, dev_nd = rank_metrics(model, data, data.dev, dev_cands)
    test_hr, test_nd = rank_metrics(model, data, data.test, test_cands)
    return model, {"dev_hr10": dev_hr, "dev_ndcg10": dev_nd, "hr10": test_hr, "ndcg10": test_nd,
                   "epochs": len(history), "history": history}


# ---------------------------------------------------------------------------
# link prediction


@dataclass
class LinkPredModel:
    spec: SpaceSpec
    points: np.ndarray
    r: float = 2.0
    t: float = 1.0


@dataclass
class LinkSplit:
    train_pos: np.ndarray
    dev_pos: np.ndarray
    test_pos: np.ndarray
    train_neg: np.ndarray
    dev_neg: np.ndarray
    test_neg: np.ndarray


def fermi_dirac(d, r: float, t: float):
    """Edge probability ``1 / (1 + exp((d**2 - r) / t))``."""
    if not t > 0:
        raise ValueError("temperature must be positive")
    return expit((r - np.square(d)) / t)


def fd_logits(model: LinkPredModel, pairs: np.ndarray) -> np.ndarray:
    d = spaces.distances(model.spec, model.points[pairs[:, 0]], model.points[pairs[:, 1]])
    return (model.r - d * d) / model.t


def make_link_split(g: Graph, seed: int = 0, fractions=(0.7, 0.1, 0.2)) -> LinkSplit:
    """Random edge split with equally many non-edges per part, sampled uniformly."""
    rng = np.random.default_rng(seed)
    edges = np.stack([g.src, g.dst], axis=1)
    edges = edges[rng.permutation(len(edges))]
    n_train = int(round(fractions[0] * len(edges)))
    n_dev = int(round(fractions[1] * len(edges)))
    parts = [edges[:n_train], edges[n_train:n_train + n_dev], edges[n_train + n_dev:]]
    existing = set(map(tuple, edges.tolist()))
    n = g.num_nodes
    total_neg = sum(len(p) for p in parts)
    if n * (n - 1) // 2 - len(existing) < total_neg:
        raise ValueError("graph too dense to sample enough non-edges")
    negs: list[tuple[int, int]] = []
    taken: set[tuple[int, int]] = set()
    while len(negs) < total_neg:
        a, b = rng.integers(0, n, size=2).tolist()
        key = (min(a, b), max(a, b))
        if a == b or key in existing or key in taken:
            continue
        taken.add(key)
        negs.append(key)
    negs_arr = np.array(negs, dtype=np.int64).reshape(-1, 2)
    cuts = np.cumsum([len(p) for p in parts])
    return LinkSplit(parts[0], parts[1], parts[2], negs_arr[:cuts[0]], negs_arr[cuts[0]:cuts[1]],
                     negs_arr[cuts[1]:])


def linkpred_loss_and_grad(model: LinkPredModel, pos: np.ndarray, neg: np.ndarray):
    """BCE on Fermi-Dirac logits; gradients for points, r and t."""
    pairs = np.concatenate([pos, neg])
    y = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    x, z = model.points[pairs[:, 0]], model.points[pairs[:, 1]]
    d = spaces.distances(model.spec, x, z)
    logit = (model.r - d * d) / model.t
    loss = float(-np.sum(y * log_expit(logit) + (1.0 - y) * log_expit(-logit)))
    dz = expit(logit) - y
    g_r = float(np.sum(dz) / model.t)
    g_t = float(np.sum(-dz * logit / model.t))
    gx, gz, _ = spaces.distance_grads(model.spec, x, z)
    w = (dz * (-2.0 * d / model.t))[:, None]
    g_pts = np.zeros_like(model.points)
    np.add.at(g_pts, pairs[:, 0], w * gx)
    np.add.at(g_pts, pairs[:, 1], w * gz)
    return loss, g_pts, g_r, g_t


def link_auc(model: LinkPredModel, pos: np.ndarray, neg: np.ndarray) -> float:
    return metrics.auc(fd_logits(model, pos), fd_logits(model, neg))


def train_linkpred(g: Graph, split: LinkSplit, spec: SpaceSpec, cfg: TrainConfig | None = None,
                   init_scale: float = 0.1):
    """Full-batch Adam on node coordinates and the decoder scalars ``r``, ``t``.

    Early-stops on dev loss. Returns ``(model, test_auc)``.
    """
    cfg = cfg or TrainConfig(learning_rate=0.01, max_epochs=1000, patience=200)
    rng = np.random.default_rng(cfg.seed)
    pts = spaces.project(spec, rng.uniform(-init_scale, init_scale, size=(g.num_nodes, spec.total_dim)))
    model = LinkPredModel(spec, pts)
    params = [model.points, np.array([model.r]), np.array([model.t])]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2, eps = 0.9, 0.999, 1e-8
    best = (math.inf, None)
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        loss, g_pts, g_r, g_t = linkpred_loss_and_grad(model, split.train_pos, split.train_neg)
        if not math.isfinite(loss):
            raise TrainingAborted(epoch, 0)
        grads = [spaces.riemannian_scale(spec, model.points, g_pts), np.array([g_r]), np.array([g_t])]
        norm = math.sqrt(sum(float(np.sum(gr**2)) for gr in grads))
        if norm > cfg.max_grad_norm:
            grads = [gr * (cfg.max_grad_norm / norm) for gr in grads]
        lr = cfg.learning_rate / cfg.burn_in_factor if epoch <= cfg.burn_in_epochs else cfg.learning_rate
        for i, gr in enumerate(grads):
            m[i] = b1 * m[i] + (1 - b1) * gr
            v[i] = b2 * v[i] + (1 - b2) * gr * gr
            params[i] -= lr * (m[i] / (1 - b1**epoch)) / (np.sqrt(v[i] / (1 - b2**epoch)) + eps)
        params[0][:] = spaces.project(spec, params[0])
        params[2][0] = max(params[2][0], 1e-3)
        model.r, model.t = float(params[1][0]), float(params[2][0])
        dev_loss = linkpred_loss_and_grad(model, split.dev_pos, split.dev_neg)[0] if len(split.dev_pos) else loss
        if dev_loss < best[0]:
            best = (dev_loss, (model.points.copy(), model.r, model.t))
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    model.points, model.r, model.t = best[1]
    return model, link_auc(model, split.test_pos, split.test_neg)
