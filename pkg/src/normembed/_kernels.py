"""Compiled inner loops for reconstruction training.

Kernels are generated per space: each factor's kind, column range and
curvature are closure constants, so numba specialises the arithmetic for
that space. :func:`kernels_for` caches the compiled set per spec.
"""

from __future__ import annotations

import functools
import math
from types import SimpleNamespace

import numba as nb
import numpy as np

from .spaces import BALL_MARGIN, SpaceSpec

SGD, ADAM = 0, 1

# numpy error model: no zero-division checks, which lets loops vectorise
_jit = nb.njit(error_model="numpy")
_inline = nb.njit(inline="always", error_model="numpy")
BETA1, BETA2, ADAM_EPS = 0.9, 0.999, 1e-8


@_inline
def _sign(t):
    return 1.0 if t > 0.0 else (-1.0 if t < 0.0 else 0.0)


def _factor_fns(kind: str, a: int, b: int, c: float):
    """``(sq, sq_grad)`` for one factor.

    ``sq`` returns the squared factor distance. ``sq_grad`` returns it too and
    writes ``d_f * grad d_f`` (half the gradient of ``d_f**2``) into the
    factor's columns of ``gu`` and ``gv``.
    """
    if kind == "l1":

        def sq(X, u, v):
            s = 0.0
            for j in range(a, b):
                s += abs(X[u, j] - X[v, j])
            return s * s

        def sq_grad(X, u, v, gu, gv):
            s = 0.0
            for j in range(a, b):
                s += abs(X[u, j] - X[v, j])
            for j in range(a, b):
                t = s * _sign(X[u, j] - X[v, j])
                gu[j] = t
                gv[j] = -t
            return s * s

    elif kind == "l2":

        def sq(X, u, v):
            s = 0.0
            for j in range(a, b):
                t = X[u, j] - X[v, j]
                s += t * t
            return s

        def sq_grad(X, u, v, gu, gv):
            s = 0.0
            for j in range(a, b):
                t = X[u, j] - X[v, j]
                gu[j] = t
                gv[j] = -t
                s += t * t
            return s

    elif kind == "linf":

        def sq(X, u, v):
            s = 0.0
            for j in range(a, b):
                t = abs(X[u, j] - X[v, j])
                if t > s:
                    s = t
            return s * s

        def sq_grad(X, u, v, gu, gv):
            s = -1.0
            arg = a
            for j in range(a, b):
                t = abs(X[u, j] - X[v, j])
                gu[j] = 0.0
                gv[j] = 0.0
                if t > s:
                    s = t
                    arg = j
            t = s * _sign(X[u, arg] - X[v, arg])
            gu[arg] = t
            gv[arg] = -t
            return s * s

    elif kind == "poincare":
        k = -c
        rk = math.sqrt(k)

        def sq(X, u, v):
            xx = 0.0
            yy = 0.0
            s = 0.0
            for j in range(a, b):
                xx += X[u, j] * X[u, j]
                yy += X[v, j] * X[v, j]
                t = X[u, j] - X[v, j]
                s += t * t
            gamma = 1.0 + 2.0 * k * s / ((1.0 - k * xx) * (1.0 - k * yy))
            d = math.acosh(max(gamma, 1.0)) / rk
            return d * d

        def sq_grad(X, u, v, gu, gv):
            xx = 0.0
            yy = 0.0
            s = 0.0
            for j in range(a, b):
                xx += X[u, j] * X[u, j]
                yy += X[v, j] * X[v, j]
                t = X[u, j] - X[v, j]
                s += t * t
            alpha = 1.0 - k * xx
            beta = 1.0 - k * yy
            gamma = max(1.0 + 2.0 * k * s / (alpha * beta), 1.0)
            d = math.acosh(gamma) / rk
            root = gamma * gamma - 1.0
            coef = d / (rk * math.sqrt(root)) if root > 0.0 else 0.0
            cu = coef * 2.0 * k / beta
            cv = coef * 2.0 * k / alpha
            for j in range(a, b):
                t = X[u, j] - X[v, j]
                gu[j] = cu * (2.0 * t / alpha + 2.0 * k * s * X[u, j] / (alpha * alpha))
                gv[j] = cv * (-2.0 * t / beta + 2.0 * k * s * X[v, j] / (beta * beta))
            return d * d

    else:
        raise ValueError(kind)
    return _inline(sq), _inline(sq_grad)


def _chain(first, second):
    """Sum two squared-distance functions over disjoint column blocks."""
    f_sq, f_grad = first
    s_sq, s_grad = second

    def sq(X, u, v):
        return f_sq(X, u, v) + s_sq(X, u, v)

    def sq_grad(X, u, v, gu, gv):
        return f_grad(X, u, v, gu, gv) + s_grad(X, u, v, gu, gv)

    return _inline(sq), _inline(sq_grad)


@functools.lru_cache(maxsize=None)
def kernels_for(spec: SpaceSpec) -> SimpleNamespace:
    fns = [_factor_fns(f.kind, sl.start, sl.stop, f.c) for f, sl in spec.blocks()]
    single = len(fns) == 1
    sq, sq_grad = functools.reduce(_chain, fns)
    dim = spec.total_dim
    balls = [(sl.start, sl.stop, f.c) for f, sl in spec.blocks() if f.kind == "poincare"]
    n_balls = len(balls)
    ball_start = np.array([blk[0] for blk in balls] or [0], dtype=np.int64)
    ball_stop = np.array([blk[1] for blk in balls] or [0], dtype=np.int64)
    ball_c = np.array([blk[2] for blk in balls] or [-1.0])
    col_ball = np.full(dim, -1, dtype=np.int64)
    for f, (a0, b0, _) in enumerate(balls):
        col_ball[a0:b0] = f

    # single factor: take the factor distance itself, not sqrt of its square
    if single and spec.factors[0].kind in ("l1", "linf"):
        is_l1 = spec.factors[0].kind == "l1"
        a, b = 0, dim

        @_inline
        def root_sq(X, u, v):
            s = 0.0
            for j in range(a, b):
                t = abs(X[u, j] - X[v, j])
                if is_l1:
                    s += t
                elif t > s:
                    s = t
            return s

    else:

        @_inline
        def root_sq(X, u, v):
            return math.sqrt(sq(X, u, v))

    @_jit
    def distance(X, u, v):
        return root_sq(X, u, v)

    @_jit
    def distance_grad(X, u, v, gu, gv):
        """Distance of rows u, v; its gradients are written to gu, gv."""
        d = math.sqrt(sq_grad(X, u, v, gu, gv))
        inv = 1.0 / d if d > 0.0 else 0.0
        for j in range(dim):
            gu[j] *= inv
            gv[j] *= inv
        return d

    @_jit
    def batch_loss_grad(X, pu, pv, pd, idx, G):
        """Reconstruction loss over ``idx`` pairs; ambient gradient added into G."""
        gu = np.empty(dim)
        gv = np.empty(dim)
        loss = 0.0
        for t in range(idx.shape[0]):
            p = idx[t]
            u = pu[p]
            v = pv[p]
            g = pd[p]
            d2 = sq_grad(X, u, v, gu, gv)
            q = d2 / (g * g) - 1.0
            loss += abs(q)
            # sign(q) * 2 d / g^2 * grad d, and gu holds d * grad d
            if q > 0.0:
                w = 2.0 / (g * g)
            elif q < 0.0:
                w = -2.0 / (g * g)
            else:
                continue
            for j in range(dim):
                G[u, j] += w * gu[j]
                G[v, j] += w * gv[j]
        return loss

    @_jit
    def mean_distortion(X, pu, pv, pd):
        tot = 0.0
        for p in range(pu.shape[0]):
            d = root_sq(X, pu[p], pv[p])
            tot += abs(d - pd[p]) / pd[p]
        return tot / pu.shape[0]

    @_jit
    def riemannian_rescale(X, G):
        for f in range(n_balls):
            a = ball_start[f]
            b = ball_stop[f]
            c = ball_c[f]
            for i in range(X.shape[0]):
                xx = 0.0
                for j in range(a, b):
                    xx += X[i, j] * X[i, j]
                s = (1.0 + c * xx) / 2.0
                s = s * s
                for j in range(a, b):
                    G[i, j] *= s

    @_jit
    def project(X):
        for f in range(n_balls):
            a = ball_start[f]
            b = ball_stop[f]
            limit = (1.0 / math.sqrt(-ball_c[f])) * (1.0 - BALL_MARGIN)
            for i in range(X.shape[0]):
                nn = 0.0
                for j in range(a, b):
                    nn += X[i, j] * X[i, j]
                nn = math.sqrt(nn)
                if nn > limit:
                    r = limit / nn
                    for j in range(a, b):
                        X[i, j] *= r

    @_jit
    def run_epoch(X, pu, pv, pd, perm, batch, lr, max_norm, optimizer, M, V, step, G, clipped_norms):
        """One pass over ``perm`` in minibatches; returns ``(loss, step, bad_batch)``.

        ``bad_batch`` is -1 unless a non-finite loss or gradient appeared; the
        epoch then stops before updating, so X holds the last good state.
        ``clipped_norms[i]`` receives the post-clip gradient norm of step i.
        """
        total = 0.0
        lam2 = np.ones(max(n_balls, 1))
        n_pairs = perm.shape[0]
        n_batches = (n_pairs + batch - 1) // batch
        for bi in range(n_batches):
            lo = bi * batch
            hi = min(lo + batch, n_pairs)
            G[:, :] = 0.0
            loss = batch_loss_grad(X, pu, pv, pd, perm[lo:hi], G)
            if not math.isfinite(loss):
                return total, step, bi
            total += loss
            riemannian_rescale(X, G)
            sqn = 0.0
            for i in range(G.shape[0]):
                for j in range(dim):
                    sqn += G[i, j] * G[i, j]
            norm = math.sqrt(sqn)
            if not math.isfinite(norm):
                return total, step, bi
            if norm > max_norm:
                s = max_norm / norm
                for i in range(G.shape[0]):
                    for j in range(dim):
                        G[i, j] *= s
                norm = max_norm
            clipped_norms[bi] = norm
            step += 1
            if optimizer == ADAM:
                c1 = 1.0 - BETA1**step
                c2 = 1.0 - BETA2**step
                for i in range(G.shape[0]):
                    # squared conformal factor of each ball block at the current point:
                    # the second moment tracks the Riemannian norm lambda^2 * g^2
                    for f in range(n_balls):
                        xx = 0.0
                        for j in range(ball_start[f], ball_stop[f]):
                            xx += X[i, j] * X[i, j]
                        lam = 2.0 / (1.0 + ball_c[f] * xx)
                        lam2[f] = lam * lam
                    for j in range(dim):
                        g = G[i, j]
                        w = lam2[col_ball[j]] if col_ball[j] >= 0 else 1.0
                        M[i, j] = BETA1 * M[i, j] + (1.0 - BETA1) * g
                        V[i, j] = BETA2 * V[i, j] + (1.0 - BETA2) * w * g * g
                        X[i, j] -= lr * (M[i, j] / c1) / (math.sqrt(V[i, j] / c2) + ADAM_EPS)
            else:
                for i in range(G.shape[0]):
                    for j in range(dim):
                        X[i, j] -= lr * G[i, j]
            project(X)
        return total, step, -1

    kern = SimpleNamespace(
        distance=distance,
        distance_grad=distance_grad,
        batch_loss_grad=batch_loss_grad,
        mean_distortion=mean_distortion,
        riemannian_rescale=riemannian_rescale,
        project=project,
        run_epoch=run_epoch,
    )
    _warm_up(kern, spec.total_dim)
    return kern


def _warm_up(kern: SimpleNamespace, dim: int) -> None:
    """Compile every kernel now so that training timings exclude JIT cost."""
    X = np.full((2, dim), 1e-3)
    X[1] = -1e-3
    u = np.array([0], dtype=np.int64)
    v = np.array([1], dtype=np.int64)
    d = np.ones(1)
    idx = np.zeros(1, dtype=np.int64)
    G, M, V = np.zeros_like(X), np.zeros_like(X), np.zeros_like(X)
    kern.distance(X, 0, 1)
    kern.distance_grad(X, 0, 1, np.empty(dim), np.empty(dim))
    kern.batch_loss_grad(X, u, v, d, idx, G)
    kern.mean_distortion(X, u, v, d)
    kern.riemannian_rescale(X, G)
    kern.project(X)
    for opt in (SGD, ADAM):
        kern.run_epoch(X.copy(), u, v, d, idx, 1, 1e-3, 1.0, opt, M.copy(), V.copy(), 0, G, np.zeros(1))
