"""Hot numeric kernels for the training loop.

Two interchangeable backends: numba-jitted loops (default when numba imports)
and pure numpy. Set ``DSTRAIN_NO_NUMBA=1`` to force the numpy path. Both
compute the same quantities; summation order differs, so agreement is to
floating-point tolerance, not bitwise. Within one backend results are
deterministic.

The active backend is chosen once at import; ``BACKEND`` names it and
``benchmarks/bench_kernels.py`` times the two against each other.
"""

from __future__ import annotations

import os

import numpy as np

# --------------------------------------------------------------------------
# numpy implementations
# --------------------------------------------------------------------------


def _np_affine_batch(w, b, x):
    """Rows of x through the affine map: x @ w.T + b."""
    return x @ w.T + b


def _np_batch_loss_grads(cw, cb, bw, bb, x, y, gt):
    """Mean cross-entropy + smooth-L1 over a batch, with analytic gradients.

    Returns (cls_loss, loc_loss, g_cw, g_cb, g_bw, g_bb); gradients are of the
    unweighted per-term means, so injection factors scale them directly.
    """
    n = x.shape[0]
    rows = np.arange(n)

    logits = x @ cw.T + cb
    mx = logits.max(axis=1)
    exp = np.exp(logits - mx[:, None])
    denom = exp.sum(axis=1)
    lse = mx + np.log(denom)
    cls_loss = float((lse - logits[rows, y]).mean())
    gl = exp / denom[:, None]
    gl[rows, y] -= 1.0
    gl /= n
    g_cw = gl.T @ x
    g_cb = gl.sum(axis=0)

    pred = x @ bw.T + bb
    r = pred - gt
    a = np.abs(r)
    quad = a < 1.0
    loc_loss = float(np.where(quad, 0.5 * r * r, a - 0.5).sum(axis=1).mean())
    gr = np.where(quad, r, np.sign(r)) / n
    g_bw = gr.T @ x
    g_bb = gr.sum(axis=0)

    return cls_loss, loc_loss, g_cw, g_cb, g_bw, g_bb


def _np_adagrad_update(param, grad, acc, lr, eps):
    """In-place Adagrad step: acc += g^2; param -= lr * g / (sqrt(acc) + eps)."""
    acc += grad * grad
    param -= lr * grad / (np.sqrt(acc) + eps)


# --------------------------------------------------------------------------
# loop implementations (jitted when numba is active)
# --------------------------------------------------------------------------


def _loop_affine_batch(w, b, x):
    n, d = x.shape
    m = w.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            s = b[j]
            for k in range(d):
                s += w[j, k] * x[i, k]
            out[i, j] = s
    return out


def _loop_batch_loss_grads(cw, cb, bw, bb, x, y, gt):
    n, d = x.shape
    c = cw.shape[0]
    g_cw = np.zeros((c, d))
    g_cb = np.zeros(c)
    g_bw = np.zeros((4, d))
    g_bb = np.zeros(4)
    cls_loss = 0.0
    loc_loss = 0.0
    logits = np.empty(c)
    for i in range(n):
        for j in range(c):
            s = cb[j]
            for k in range(d):
                s += cw[j, k] * x[i, k]
            logits[j] = s
        mx = logits[0]
        for j in range(1, c):
            if logits[j] > mx:
                mx = logits[j]
        denom = 0.0
        for j in range(c):
            denom += np.exp(logits[j] - mx)
        cls_loss += mx + np.log(denom) - logits[y[i]]
        for j in range(c):
            g = np.exp(logits[j] - mx) / denom
            if j == y[i]:
                g -= 1.0
            g_cb[j] += g
            for k in range(d):
                g_cw[j, k] += g * x[i, k]
        for j in range(4):
            s = bb[j]
            for k in range(d):
                s += bw[j, k] * x[i, k]
            r = s - gt[i, j]
            a = abs(r)
            if a < 1.0:
                loc_loss += 0.5 * r * r
                g = r
            else:
                loc_loss += a - 0.5
                g = 1.0 if r > 0.0 else -1.0
            g_bb[j] += g
            for k in range(d):
                g_bw[j, k] += g * x[i, k]
    inv = 1.0 / n
    return cls_loss * inv, loc_loss * inv, g_cw * inv, g_cb * inv, g_bw * inv, g_bb * inv


def _loop_adagrad_update(param, grad, acc, lr, eps):
    p = param.ravel()
    g = grad.ravel()
    a = acc.ravel()
    for i in range(p.size):
        a[i] += g[i] * g[i]
        p[i] -= lr * g[i] / (np.sqrt(a[i]) + eps)


# --------------------------------------------------------------------------
# backend selection
# --------------------------------------------------------------------------

NUMPY_KERNELS = {
    "affine_batch": _np_affine_batch,
    "batch_loss_grads": _np_batch_loss_grads,
    "adagrad_update": _np_adagrad_update,
}


def _build_numba_kernels():
    from numba import njit

    jit = njit(cache=True, fastmath=False)
    return {
        "affine_batch": jit(_loop_affine_batch),
        "batch_loss_grads": jit(_loop_batch_loss_grads),
        "adagrad_update": jit(_loop_adagrad_update),
    }


def _disabled_by_env() -> bool:
    return os.environ.get("DSTRAIN_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")


BACKEND = "numpy"
_active = NUMPY_KERNELS
if not _disabled_by_env():
    try:
        _active = _build_numba_kernels()
        BACKEND = "numba"
    except ImportError:
        pass

affine_batch = _active["affine_batch"]
batch_loss_grads = _active["batch_loss_grads"]
adagrad_update = _active["adagrad_update"]
