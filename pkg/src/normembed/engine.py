"""Reconstruction training: loss, gradients, training loop and grid search."""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernels as K
from . import spaces
from .graphs import Graph, PairStore
from .spaces import SpaceSpec

log = logging.getLogger(__name__)

FULL = -1  # batch_size sentinel: every pair in one step

DEFAULT_GRID = {
    "learning_rate": [0.1, 0.01, 0.001],
    "batch_size": [512, 1024, 2048, FULL],
    "max_grad_norm": [10.0, 50.0, 250.0],
}


class TrainingAborted(RuntimeError):
    def __init__(self, epoch: int, batch: int, message: str = "non-finite loss"):
        super().__init__(f"{message} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = FULL
    max_grad_norm: float = 50.0
    max_epochs: int = 3000
    patience: int = 200
    burn_in_epochs: int = 0
    burn_in_factor: float = 10.0
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size != FULL and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1 or FULL (-1)")
        if not self.max_grad_norm > 0:
            raise ValueError("max_grad_norm must be positive")
        if self.patience > self.max_epochs:
            raise ValueError("patience must not exceed max_epochs")
        if not 0 <= self.burn_in_epochs < self.max_epochs:
            raise ValueError("burn_in_epochs must be in [0, max_epochs)")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class RunReport:
    final_d_avg: float
    final_map: float
    best_epoch: int
    loss_curve: list[tuple[int, float]]
    wall_time_seconds: float
    config_echo: TrainConfig
    space_echo: str
    d_avg_curve: list[tuple[int, float]] = field(default_factory=list)
    max_step_grad_norm: float = 0.0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["loss_curve"] = [list(p) for p in self.loss_curve]
        out["d_avg_curve"] = [list(p) for p in self.d_avg_curve]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        data = dict(data)
        data["config_echo"] = TrainConfig(**data["config_echo"])
        data["loss_curve"] = [tuple(p) for p in data["loss_curve"]]
        data["d_avg_curve"] = [tuple(p) for p in data.get("d_avg_curve", [])]
        return cls(**data)


def pair_loss(d_embed: float, d_graph: float) -> float:
    """``|(d_embed / d_graph)**2 - 1|``."""
    if not d_graph > 0:
        raise ValueError(f"graph distance must be positive, got {d_graph}")
    return abs((d_embed / d_graph) ** 2 - 1.0)


def batch_loss_and_grad(spec: SpaceSpec, points: np.ndarray, batch: PairStore):
    """Loss summed over ``batch`` and its exact ambient gradient (vectorised)."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    x, y = points[batch.u], points[batch.v]
    d = spaces.distances(spec, x, y)
    q = (d / batch.dist) ** 2 - 1.0
    loss = float(np.sum(np.abs(q)))
    dl = np.sign(q) * 2.0 * d / batch.dist**2
    gx, gy, _ = spaces.distance_grads(spec, x, y)
    grads = np.zeros_like(points)
    np.add.at(grads, batch.u, dl[:, None] * gx)
    np.add.at(grads, batch.v, dl[:, None] * gy)
    return loss, grads


def _best_map(graph: Graph | None, spec: SpaceSpec, points: np.ndarray) -> float:
    from .metrics import map_score

    if graph is None or graph.is_weighted:
        return float("nan")
    return map_score(spec, points, graph)


def train(
    pairs: PairStore,
    spec: SpaceSpec,
    cfg: TrainConfig,
    graph: Graph | None = None,
    init: np.ndarray | None = None,
):
    """Minimise the reconstruction loss; returns ``(best_points, RunReport)``.

    The best-so-far coordinates by average distortion are returned. ``graph``
    is only used to score mAP of the result.
    """
    if len(pairs) == 0:
        raise ValueError("no connected pairs to train on")
    kern = K.kernels_for(spec)  # compiles on first use; kept out of the timing
    t0 = time.perf_counter()
    X = spaces.init_points(spec, pairs.num_nodes, cfg.seed) if init is None else np.array(init, dtype=np.float64)
    X = np.ascontiguousarray(X)
    pu = np.ascontiguousarray(pairs.u, dtype=np.int64)
    pv = np.ascontiguousarray(pairs.v, dtype=np.int64)
    pd = np.ascontiguousarray(pairs.dist, dtype=np.float64)
    M = np.zeros_like(X)
    V = np.zeros_like(X)
    G = np.zeros_like(X)
    batch = len(pairs) if cfg.batch_size == FULL else min(cfg.batch_size, len(pairs))
    norms = np.zeros((len(pairs) + batch - 1) // batch)
    rng = np.random.default_rng(cfg.seed)
    opt = K.ADAM if cfg.optimizer == "adam" else K.SGD

    best = math.inf
    best_epoch = 0
    best_X = X.copy()
    loss_curve: list[tuple[int, float]] = []
    d_curve: list[tuple[int, float]] = []
    max_norm_seen = 0.0
    step = 0
    for epoch in range(1, cfg.max_epochs + 1):
        lr = cfg.learning_rate / cfg.burn_in_factor if epoch <= cfg.burn_in_epochs else cfg.learning_rate
        perm = rng.permutation(len(pairs)) if batch < len(pairs) else np.arange(len(pairs))
        loss, step, bad = kern.run_epoch(X, pu, pv, pd, perm, batch, lr, cfg.max_grad_norm,
                                         opt, M, V, step, G, norms)
        if bad >= 0:
            raise TrainingAborted(epoch, bad)
        max_norm_seen = max(max_norm_seen, float(norms.max()))
        d_avg = kern.mean_distortion(X, pu, pv, pd)
        if not math.isfinite(d_avg):
            raise TrainingAborted(epoch, -1, "non-finite distortion")
        loss_curve.append((epoch, float(loss)))
        d_curve.append((epoch, float(d_avg)))
        if d_avg < best:
            best = d_avg
            best_epoch = epoch
            best_X[:] = X
        elif epoch - best_epoch >= cfg.patience:
            log.debug("early stop at epoch %d (best %d)", epoch, best_epoch)
            break

    report = RunReport(
        final_d_avg=float(best),
        final_map=_best_map(graph, spec, best_X),
        best_epoch=best_epoch,
        loss_curve=loss_curve,
        wall_time_seconds=time.perf_counter() - t0,
        config_echo=cfg,
        space_echo=str(spec),
        d_avg_curve=d_curve,
        max_step_grad_norm=max_norm_seen,
    )
    return best_X, report


def expand_grid(grids: dict[str, Sequence], base: TrainConfig) -> list[TrainConfig]:
    """Configs for the product of ``grids`` in lr x batch x clip order."""
    keys = [k for k in ("learning_rate", "batch_size", "max_grad_norm") if k in grids]
    extra = [k for k in grids if k not in keys]
    keys += extra
    if not keys or any(len(grids[k]) == 0 for k in keys):
        raise ValueError("grid search needs non-empty grids")
    return [replace(base, **dict(zip(keys, combo))) for combo in itertools.product(*(grids[k] for k in keys))]


def grid_search(
    pairs: PairStore,
    spec: SpaceSpec,
    grids: dict[str, Sequence],
    base: TrainConfig = TrainConfig(),
    graph: Graph | None = None,
    init: np.ndarray | None = None,
):
    """Train every grid point and keep the lowest final distortion.

    Returns ``(best_points, best_report, all_reports)``; aborted runs appear
    as ``None`` in ``all_reports``. Ties go to the earlier grid point.
    """
    best = None
    reports: list[RunReport | None] = []
    for cfg in expand_grid(grids, base):
        try:
            pts, rep = train(pairs, spec, cfg, init=init)
        except TrainingAborted as exc:
            log.warning("grid point %s aborted: %s", cfg, exc)
            reports.append(None)
            continue
        reports.append(rep)
        if best is None or rep.final_d_avg < best[1].final_d_avg:
            best = (pts, rep)
    if best is None:
        raise TrainingAborted(-1, -1, "every grid point aborted")
    pts, rep = best
    rep.final_map = _best_map(graph, spec, pts)
    return pts, rep, reports
