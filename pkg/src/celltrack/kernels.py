"""Hot numeric kernels with paired numba / numpy implementations.

Each kernel ``foo`` exists as ``foo_numpy`` (vectorised reference) and
``foo_numba`` (explicit loops, compiled lazily). The public name ``foo`` is
bound to one of them according to :data:`celltrack._accel.USE_NUMBA`.

Kernels:

* ``pair_counts``  -- label co-occurrence counts between two label maps
* ``pair_scores``  -- Siamese similarity for every (row, column) feature pair
* ``sgd_epoch``    -- one pass of per-example momentum SGD over a pair set
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

# Momentum velocities below this are flushed to zero. Without the flush,
# velocities of dead relu units decay into subnormals and stall there
# (0.9 * 4 ulp rounds back to 4 ulp), slowing every later step.
VELOCITY_FLOOR = 1e-200

# ---------------------------------------------------------------------------
# pair_counts


def pair_counts_numpy(a, b, ua, ub):
    """Count pixels carrying label ``ua[i]`` in ``a`` and ``ub[j]`` in ``b``.

    ``a`` and ``b`` are flat int64 arrays of equal length; ``ua``/``ub`` are
    sorted unique nonzero labels. Labels absent from ``ua``/``ub`` are ignored.
    Returns an int64 matrix of shape ``(len(ua), len(ub))``.
    """
    na, nb = len(ua), len(ub)
    if na == 0 or nb == 0:
        return np.zeros((na, nb), dtype=np.int64)
    ia = np.searchsorted(ua, a)
    ib = np.searchsorted(ub, b)
    ia_c = np.minimum(ia, na - 1)
    ib_c = np.minimum(ib, nb - 1)
    keep = (ua[ia_c] == a) & (ub[ib_c] == b)
    flat = ia_c[keep] * nb + ib_c[keep]
    return np.bincount(flat, minlength=na * nb).reshape(na, nb).astype(np.int64)


def _pair_counts_loop(a, b, ua, ub):
    na = ua.shape[0]
    nb = ub.shape[0]
    out = np.zeros((na, nb), dtype=np.int64)
    if na == 0 or nb == 0:
        return out
    for k in range(a.shape[0]):
        la = a[k]
        lb = b[k]
        if la == 0 or lb == 0:
            continue
        i = np.searchsorted(ua, la)
        if i >= na or ua[i] != la:
            continue
        j = np.searchsorted(ub, lb)
        if j >= nb or ub[j] != lb:
            continue
        out[i, j] += 1
    return out


pair_counts_numba = njit(_pair_counts_loop)

# ---------------------------------------------------------------------------
# pair_scores


def pair_scores_numpy(W1, b1, W2, b2, X, Y):
    """Similarity matrix ``S[i, j] = sigmoid(W2 . |relu(W1 x_i + b1) - relu(W1 y_j + b1)| + b2)``."""
    ex = np.maximum(X @ W1.T + b1, 0.0)
    ey = np.maximum(Y @ W1.T + b1, 0.0)
    d = np.abs(ex[:, None, :] - ey[None, :, :])
    s = d @ W2 + b2
    return _sigmoid_array(s)


def _sigmoid_array(s):
    out = np.empty_like(s, dtype=np.float64)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    e = np.exp(s[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _pair_scores_loop(W1, b1, W2, b2, X, Y):
    H = W1.shape[0]
    m = X.shape[0]
    k = Y.shape[0]
    ex = np.empty((m, H))
    ey = np.empty((k, H))
    for i in range(m):
        for h in range(H):
            z = b1[h]
            for c in range(W1.shape[1]):
                z += W1[h, c] * X[i, c]
            ex[i, h] = z if z > 0.0 else 0.0
    for j in range(k):
        for h in range(H):
            z = b1[h]
            for c in range(W1.shape[1]):
                z += W1[h, c] * Y[j, c]
            ey[j, h] = z if z > 0.0 else 0.0
    out = np.empty((m, k))
    for i in range(m):
        for j in range(k):
            s = b2
            for h in range(H):
                s += W2[h] * abs(ex[i, h] - ey[j, h])
            if s >= 0.0:
                out[i, j] = 1.0 / (1.0 + math.exp(-s))
            else:
                e = math.exp(s)
                out[i, j] = e / (1.0 + e)
    return out


pair_scores_numba = njit(_pair_scores_loop)

# ---------------------------------------------------------------------------
# per-example loss and gradients (numpy reference, also used by the fallback)


def head_loss_grads(W1, b1, W2, b2, a, b, y, eps):
    """Clamped BCE loss of one pair and its exact gradients.

    Returns ``(score, loss, gW1, gb1, gW2, gb2)``. Kinks of relu and abs use
    subgradient 0; inside the clamped region the loss is flat, so all
    gradients vanish there.
    """
    za = W1 @ a + b1
    zb = W1 @ b + b1
    u = np.maximum(za, 0.0) - np.maximum(zb, 0.0)
    d = np.abs(u)
    s = float(W2 @ d + b2)
    p = _sigmoid(s)
    pc = min(max(p, eps), 1.0 - eps)
    loss = -(y * math.log(pc) + (1.0 - y) * math.log(1.0 - pc))
    g = p - y if eps < p < 1.0 - eps else 0.0
    gW2 = g * d
    du = g * W2 * np.sign(u)
    dza = du * (za > 0.0)
    dzb = -du * (zb > 0.0)
    gW1 = np.outer(dza, a) + np.outer(dzb, b)
    gb1 = dza + dzb
    return p, loss, gW1, gb1, gW2, g


def _sigmoid(s):
    if s >= 0.0:
        return 1.0 / (1.0 + math.exp(-s))
    e = math.exp(s)
    return e / (1.0 + e)


# ---------------------------------------------------------------------------
# sgd_epoch


def sgd_epoch_numpy(W1, b1, W2, b2, vW1, vb1, vW2, vb2, A, B, y, order, lr, momentum, eps):
    """One epoch of batch-size-1 momentum SGD, updating arrays in place.

    ``b2`` and ``vb2`` are shape-(1,) arrays so they can be mutated. The
    velocity follows ``v <- momentum * v + grad; w <- w - lr * v``. Returns
    the per-step losses (evaluated before each update) in visiting order.
    """
    losses = np.empty(order.shape[0])
    for step, k in enumerate(order):
        _, loss, gW1, gb1, gW2, gb2 = head_loss_grads(W1, b1, W2, b2[0], A[k], B[k], y[k], eps)
        losses[step] = loss
        vW1 *= momentum
        vW1 += gW1
        vb1 *= momentum
        vb1 += gb1
        vW2 *= momentum
        vW2 += gW2
        vb2[0] = momentum * vb2[0] + gb2
        for v in (vW1, vb1, vW2, vb2):
            v[np.abs(v) < VELOCITY_FLOOR] = 0.0
        W1 -= lr * vW1
        b1 -= lr * vb1
        W2 -= lr * vW2
        b2[0] -= lr * vb2[0]
    return losses


def _sgd_epoch_loop(W1, b1, W2, b2, vW1, vb1, vW2, vb2, A, B, y, order, lr, momentum, eps):
    H, D = W1.shape
    losses = np.empty(order.shape[0])
    za = np.empty(H)
    zb = np.empty(H)
    dza = np.empty(H)
    dzb = np.empty(H)
    d = np.empty(H)
    for step in range(order.shape[0]):
        k = order[step]
        s = b2[0]
        for h in range(H):
            pa = b1[h]
            pb = b1[h]
            for c in range(D):
                pa += W1[h, c] * A[k, c]
                pb += W1[h, c] * B[k, c]
            za[h] = pa
            zb[h] = pb
            ea = pa if pa > 0.0 else 0.0
            eb = pb if pb > 0.0 else 0.0
            d[h] = ea - eb
            s += W2[h] * abs(ea - eb)
        if s >= 0.0:
            p = 1.0 / (1.0 + math.exp(-s))
        else:
            e = math.exp(s)
            p = e / (1.0 + e)
        pc = min(max(p, eps), 1.0 - eps)
        yk = y[k]
        losses[step] = -(yk * math.log(pc) + (1.0 - yk) * math.log(1.0 - pc))
        g = p - yk if (p > eps and p < 1.0 - eps) else 0.0
        for h in range(H):
            u = d[h]
            sg = 1.0 if u > 0.0 else (-1.0 if u < 0.0 else 0.0)
            du = g * W2[h] * sg
            dza[h] = du if za[h] > 0.0 else 0.0
            dzb[h] = -du if zb[h] > 0.0 else 0.0
            # d[h] becomes |u| for the W2 gradient
            d[h] = abs(u)
        for h in range(H):
            for c in range(D):
                v = momentum * vW1[h, c] + (dza[h] * A[k, c] + dzb[h] * B[k, c])
                vW1[h, c] = v if abs(v) >= VELOCITY_FLOOR else 0.0
                W1[h, c] -= lr * vW1[h, c]
            v = momentum * vb1[h] + (dza[h] + dzb[h])
            vb1[h] = v if abs(v) >= VELOCITY_FLOOR else 0.0
            b1[h] -= lr * vb1[h]
            v = momentum * vW2[h] + g * d[h]
            vW2[h] = v if abs(v) >= VELOCITY_FLOOR else 0.0
            W2[h] -= lr * vW2[h]
        v = momentum * vb2[0] + g
        vb2[0] = v if abs(v) >= VELOCITY_FLOOR else 0.0
        b2[0] -= lr * vb2[0]
    return losses


sgd_epoch_numba = njit(_sgd_epoch_loop)

if USE_NUMBA:
    pair_counts = pair_counts_numba
    pair_scores = pair_scores_numba
    sgd_epoch = sgd_epoch_numba
else:
    pair_counts = pair_counts_numpy
    pair_scores = pair_scores_numpy
    sgd_epoch = sgd_epoch_numpy
