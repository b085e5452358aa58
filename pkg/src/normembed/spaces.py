"""Embedding spaces: lp normed spaces, Poincare balls and their L2 products.

Points are rows of a float64 matrix; a :class:`SpaceSpec` says which column
blocks belong to which factor. All functions here are vectorised over rows.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

BALL_MARGIN = 1e-5
INIT_SCALE = 1e-3

KINDS = ("l1", "l2", "linf", "poincare")


class SpaceError(ValueError):
    """Bad space grammar or an infeasible point."""


@dataclass(frozen=True)
class Factor:
    kind: str
    dim: int
    c: float = -1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpaceError(f"unknown factor {self.kind!r}; valid factors: {', '.join(KINDS)}")
        if self.dim < 1:
            raise SpaceError(f"factor dimension must be >= 1, got {self.dim}")
        if self.kind == "poincare" and not self.c < 0:
            raise SpaceError(f"poincare curvature must be negative, got {self.c}")

    @property
    def radius(self) -> float:
        return 1.0 / np.sqrt(-self.c)

    def __str__(self) -> str:
        if self.kind == "poincare" and self.c != -1.0:
            return f"poincare:{self.dim}:{self.c:g}"
        return f"{self.kind}:{self.dim}"


@dataclass(frozen=True)
class SpaceSpec:
    factors: tuple[Factor, ...]
    combiner: str = "l2"

    def __post_init__(self):
        if not self.factors:
            raise SpaceError("space needs at least one factor")
        if self.combiner != "l2":
            raise SpaceError(f"unsupported combiner {self.combiner!r}")

    @property
    def total_dim(self) -> int:
        return sum(f.dim for f in self.factors)

    def blocks(self):
        """Yield ``(factor, slice)`` pairs over the coordinate columns."""
        start = 0
        for f in self.factors:
            yield f, slice(start, start + f.dim)
            start += f.dim

    def __str__(self) -> str:
        return "*".join(str(f) for f in self.factors)


_FACTOR_RE = re.compile(r"^(l1|l2|linf|poincare):(\d+)(?::(-?[0-9.eE+-]+))?$")


def parse_space(text: str) -> SpaceSpec:
    """Parse ``l1:10*linf:10`` style specs; ``poincare:20:-0.5`` sets curvature."""
    factors = []
    for token in text.strip().split("*"):
        m = _FACTOR_RE.match(token.strip())
        if not m:
            raise SpaceError(
                f"cannot parse factor {token!r}; expected one of "
                "l1:<dim>, l2:<dim>, linf:<dim>, poincare:<dim>[:<c>]"
            )
        kind, dim, c = m.group(1), int(m.group(2)), m.group(3)
        if c is not None and kind != "poincare":
            raise SpaceError(f"curvature only applies to poincare factors: {token!r}")
        factors.append(Factor(kind, dim, float(c) if c is not None else -1.0))
    return SpaceSpec(tuple(factors))


# ---------------------------------------------------------------------------
# per-factor distances


def _as_rows(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x[None, :] if x.ndim == 1 else x


def _poincare_dist(f: Factor, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    k = -f.c
    xx = np.sum(x * x, axis=1)
    yy = np.sum(y * y, axis=1)
    alpha = 1.0 - k * xx
    beta = 1.0 - k * yy
    if np.any(alpha <= 0) or np.any(beta <= 0):
        raise SpaceError("point outside the Poincare ball")
    diff = x - y
    s = np.sum(diff * diff, axis=1)
    gamma = np.maximum(1.0 + 2.0 * k * s / (alpha * beta), 1.0)
    return np.arccosh(gamma) / np.sqrt(k)


def factor_distances(f: Factor, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = x - y
    if f.kind == "l1":
        return np.sum(np.abs(diff), axis=1)
    if f.kind == "l2":
        return np.sqrt(np.sum(diff * diff, axis=1))
    if f.kind == "linf":
        return np.max(np.abs(diff), axis=1)
    return _poincare_dist(f, x, y)


def distances(spec: SpaceSpec, x, y) -> np.ndarray:
    """Row-wise distances between two stacks of points."""
    x, y = _as_rows(x), _as_rows(y)
    if len(spec.factors) == 1:
        return factor_distances(spec.factors[0], x, y)
    total = np.zeros(len(x))
    for f, sl in spec.blocks():
        total += factor_distances(f, x[:, sl], y[:, sl]) ** 2
    return np.sqrt(total)


def distance(spec: SpaceSpec, x, y) -> float:
    return float(distances(spec, x, y)[0])


def distance_matrix(spec: SpaceSpec, points: np.ndarray) -> np.ndarray:
    """All-pairs distance matrix of the rows of ``points``."""
    n = len(points)
    out = np.empty((n, n))
    for i in range(n):
        out[i] = distances(spec, np.broadcast_to(points[i], points.shape), points)
    out[np.arange(n), np.arange(n)] = 0.0
    return out


# ---------------------------------------------------------------------------
# gradients


def _factor_grads(f: Factor, x: np.ndarray, y: np.ndarray):
    diff = x - y
    if f.kind == "l1":
        gx = np.sign(diff)
        return gx, -gx
    if f.kind == "l2":
        norm = np.sqrt(np.sum(diff * diff, axis=1, keepdims=True))
        gx = np.divide(diff, norm, out=np.zeros_like(diff), where=norm > 0)
        return gx, -gx
    if f.kind == "linf":
        absd = np.abs(diff)
        idx = np.argmax(absd, axis=1)  # first maximal coordinate on ties
        rows = np.arange(len(diff))
        gx = np.zeros_like(diff)
        gx[rows, idx] = np.sign(diff[rows, idx])
        return gx, -gx
    k = -f.c
    xx = np.sum(x * x, axis=1, keepdims=True)
    yy = np.sum(y * y, axis=1, keepdims=True)
    alpha = 1.0 - k * xx
    beta = 1.0 - k * yy
    s = np.sum(diff * diff, axis=1, keepdims=True)
    gamma = 1.0 + 2.0 * k * s / (alpha * beta)
    root = np.sqrt(np.maximum(gamma * gamma - 1.0, 0.0))
    coef = np.divide(1.0, np.sqrt(k) * root, out=np.zeros_like(root), where=root > 0)
    dgx = (2.0 * k / beta) * (2.0 * diff / alpha + 2.0 * k * s * x / alpha**2)
    dgy = (2.0 * k / alpha) * (-2.0 * diff / beta + 2.0 * k * s * y / beta**2)
    return coef * dgx, coef * dgy


def distance_grads(spec: SpaceSpec, x, y):
    """Ambient gradients of the row-wise distances.

    Returns ``(grad_x, grad_y, degenerate)`` where ``degenerate`` flags rows
    with ``x == y``; their gradients are zero.
    """
    x, y = _as_rows(x), _as_rows(y)
    gx = np.zeros_like(x)
    gy = np.zeros_like(y)
    if len(spec.factors) == 1:
        f = spec.factors[0]
        gx[:], gy[:] = _factor_grads(f, x, y)
        d = factor_distances(f, x, y)
    else:
        dists = []
        for f, sl in spec.blocks():
            dists.append(factor_distances(f, x[:, sl], y[:, sl]))
        d = np.sqrt(np.sum(np.square(dists), axis=0))
        safe = np.where(d > 0, d, 1.0)
        for (f, sl), df in zip(spec.blocks(), dists):
            fx, fy = _factor_grads(f, x[:, sl], y[:, sl])
            w = (df / safe)[:, None]
            gx[:, sl] = w * fx
            gy[:, sl] = w * fy
    degenerate = d == 0
    gx[degenerate] = 0.0
    gy[degenerate] = 0.0
    return gx, gy, degenerate


def distance_grad(spec: SpaceSpec, x, y):
    """Gradient of ``distance(spec, x, y)`` w.r.t. ``x`` and ``y``."""
    gx, gy, degenerate = distance_grads(spec, x, y)
    return gx[0], gy[0], bool(degenerate[0])


# ---------------------------------------------------------------------------
# geometry helpers


def riemannian_scale(spec: SpaceSpec, x, ambient_grad) -> np.ndarray:
    """Rescale ambient gradients by ``(1 / lambda_x)**2`` on Poincare blocks."""
    x = np.asarray(x, dtype=np.float64)
    g = np.array(ambient_grad, dtype=np.float64, copy=True)
    single = x.ndim == 1
    x2, g2 = _as_rows(x), _as_rows(g)
    for f, sl in spec.blocks():
        if f.kind != "poincare":
            continue
        xx = np.sum(x2[:, sl] ** 2, axis=1, keepdims=True)
        g2[:, sl] *= ((1.0 + f.c * xx) / 2.0) ** 2
    return g2[0] if single else g2


def project(spec: SpaceSpec, x) -> np.ndarray:
    """Pull Poincare blocks with norm above ``radius * (1 - 1e-5)`` back onto that sphere."""
    x = np.array(x, dtype=np.float64, copy=True)
    x2 = _as_rows(x)
    for f, sl in spec.blocks():
        if f.kind != "poincare":
            continue
        limit = f.radius * (1.0 - BALL_MARGIN)
        norms = np.linalg.norm(x2[:, sl], axis=1)
        over = norms > limit
        if not over.any():
            continue
        block = x2[over, sl] * (limit / norms[over])[:, None]
        # rounding can leave a row one ulp outside; shrink it so a second call is a no-op
        still = np.linalg.norm(block, axis=1) > limit
        block[still] *= 1.0 - 4 * np.finfo(float).eps
        x2[over, sl] = block
    return x


def is_feasible(spec: SpaceSpec, points) -> bool:
    pts = _as_rows(points)
    if not np.all(np.isfinite(pts)):
        return False
    for f, sl in spec.blocks():
        if f.kind == "poincare":
            if np.any(np.linalg.norm(pts[:, sl], axis=1) > f.radius * (1.0 - BALL_MARGIN)):
                return False
    return True


def init_points(spec: SpaceSpec, n: int, seed: int) -> np.ndarray:
    """Uniform coordinates in ``(-1e-3, 1e-3)``."""
    if n < 1:
        raise SpaceError("need at least one point")
    rng = np.random.default_rng(seed)
    return rng.uniform(-INIT_SCALE, INIT_SCALE, size=(n, spec.total_dim))


# ---------------------------------------------------------------------------
# embedding files


def save_embedding(path, spec: SpaceSpec, points: np.ndarray) -> None:
    n, d = points.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# space={spec} nodes={n} dim={d}\n")
        for i, row in enumerate(points):
            fh.write(f"{i} " + " ".join(repr(float(v)) for v in row) + "\n")


def load_embedding(path) -> tuple[SpaceSpec, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        m = re.match(r"#\s*space=(\S+)\s+nodes=(\d+)\s+dim=(\d+)", header)
        if not m:
            raise SpaceError(f"{path}: missing '# space=... nodes=... dim=...' header")
        spec = parse_space(m.group(1))
        n, d = int(m.group(2)), int(m.group(3))
        points = np.empty((n, d))
        for line in fh:
            if not line.strip():
                continue
            parts = line.split()
            points[int(parts[0])] = [float(t) for t in parts[1:]]
    return spec, points
