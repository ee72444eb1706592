"""Independent reference computations used by several test modules."""
import math
from fractions import Fraction

import numpy as np


def straight_line_score(W1, b1, W2, b2, a, b):
    """Scalar loops, no numpy linear algebra."""
    H, D = W1.shape
    s = b2
    for h in range(H):
        za = b1[h] + sum(W1[h, c] * a[c] for c in range(D))
        zb = b1[h] + sum(W1[h, c] * b[c] for c in range(D))
        s += W2[h] * abs(max(za, 0.0) - max(zb, 0.0))
    return 1.0 / (1.0 + math.exp(-s))


def batched_loss(W1s, b1s, W2s, b2s, a, b, y, eps=1e-7):
    """Clamped BCE for a batch of parameter sets (leading axis P)."""
    za = np.einsum("phd,d->ph", W1s, a) + b1s
    zb = np.einsum("phd,d->ph", W1s, b) + b1s
    d = np.abs(np.maximum(za, 0.0) - np.maximum(zb, 0.0))
    s = np.einsum("ph,ph->p", W2s, d) + b2s
    p = 1.0 / (1.0 + np.exp(-s))
    p = np.clip(p, eps, 1 - eps)
    return -(y * np.log(p) + (1 - y) * np.log(1 - p))


def finite_difference_grads(head, a, b, y, step=1e-5):
    """Central differences of the loss w.r.t. every parameter; returns (gW1, gb1, gW2, gb2)."""
    H, D = head.W1.shape
    P = H * D + H + H + 1
    base = (head.W1, head.b1, head.W2, head.b2)

    def perturbed(sign):
        W1s = np.broadcast_to(base[0], (P, H, D)).copy()
        b1s = np.broadcast_to(base[1], (P, H)).copy()
        W2s = np.broadcast_to(base[2], (P, H)).copy()
        b2s = np.full(P, base[3])
        k = 0
        W1s[np.arange(H * D), np.repeat(np.arange(H), D), np.tile(np.arange(D), H)] += sign * step
        k = H * D
        b1s[k + np.arange(H), np.arange(H)] += sign * step
        k += H
        W2s[k + np.arange(H), np.arange(H)] += sign * step
        k += H
        b2s[k] += sign * step
        return batched_loss(W1s, b1s, W2s, b2s, a, b, y)

    g = (perturbed(+1) - perturbed(-1)) / (2 * step)
    return (g[:H * D].reshape(H, D), g[H * D:H * D + H], g[H * D + H:H * D + 2 * H], g[-1])


def kink_units(head, a, b, step=1e-5, margin=1e-8):
    """Hidden units whose relu/abs kink could be crossed by a step-sized perturbation."""
    za = head.W1 @ a + head.b1
    zb = head.W1 @ b + head.b1
    u = np.maximum(za, 0) - np.maximum(zb, 0)
    reach = margin + 2 * step * max(1.0, float(np.abs(a).max()), float(np.abs(b).max()))
    return (np.abs(za) < reach) | (np.abs(zb) < reach) | ((np.abs(u) < reach) & ((za > 0) | (zb > 0)))


def max_relative_error(analytic, numeric, exclude_units, floor=1e-6):
    """Max |ga - gn| / max(|ga|, |gn|, floor) over non-excluded components.

    The floor keeps components whose true gradient is below the finite
    difference rounding noise (~1e-11) from dominating the ratio.
    """
    worst = 0.0
    for ga, gn, unit_axis in zip(analytic, numeric, (0, 0, None, None)):
        ga = np.atleast_1d(np.asarray(ga, dtype=float))
        gn = np.atleast_1d(np.asarray(gn, dtype=float))
        keep = np.ones(ga.shape, dtype=bool)
        if unit_axis == 0:
            keep[exclude_units] = False
        err = np.abs(ga - gn) / np.maximum(np.maximum(np.abs(ga), np.abs(gn)), floor)
        if keep.any():
            worst = max(worst, float(err[keep].max()))
    return worst


def random_head_and_pair(rng, dim=None):
    from celltrack.siamese import PairExample, SiameseHead

    dim = dim or int(rng.integers(2, 9))
    head = SiameseHead.init(dim, rng)
    head.b1 = rng.normal(0, 0.1, size=head.b1.shape)
    head.b2 = float(rng.normal(0, 0.5))
    a = rng.normal(0, 1, size=dim)
    b = rng.normal(0, 1, size=dim)
    pair = PairExample(a, b, int(rng.integers(0, 2)))
    return head, pair


def scattered_scene(rng, n_cells, size=64, region=40, max_pix=8):
    """Label map whose cells are random pixel sets inside the top-left ``region`` square."""
    m = np.zeros((size, size), dtype=np.int64)
    free = rng.permutation(region * region)
    pos = 0
    labels = rng.choice(np.arange(1, 500), size=n_cells, replace=False)
    for lab in labels:
        k = int(rng.integers(1, max_pix + 1))
        for p in free[pos:pos + k]:
            m[p // region, p % region] = lab
        pos += k
    return m


def oracle_encoding(target, others, n, width, height):
    """Exact-rational centroids, full sort by (distance, label), one rounding per output."""
    tx = Fraction(target.coord_sum[0], target.area)
    ty = Fraction(target.coord_sum[1], target.area)
    rows = []
    for o in others:
        dx = Fraction(o.coord_sum[0], o.area) - tx
        dy = Fraction(o.coord_sum[1], o.area) - ty
        fx, fy = float(dx), float(dy)
        rows.append((fx * fx + fy * fy, o.label, dx, dy))
    rows.sort(key=lambda r: (r[0], r[1]))
    out = [0.0] * (2 * n)
    for k, (_, _, dx, dy) in enumerate(rows[:n]):
        out[2 * k] = float(dx / width)
        out[2 * k + 1] = float(dy / height)
    return out
