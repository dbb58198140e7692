"""Slow, independent reference implementations used only by the tests."""

import math

import numpy as np


def naive_dft2_centered(x):
    h, w = x.shape
    out = np.zeros((h, w), dtype=np.complex128)
    for u in range(h):
        for v in range(w):
            acc = 0j
            for r in range(h):
                for c in range(w):
                    acc += x[r, c] * np.exp(-2j * np.pi * (u * r / h + v * c / w))
            out[(u + h // 2) % h, (v + w // 2) % w] = acc
    return out


def naive_dft2_centered_fast(x):
    # matrix form of the same double sum, no FFT involved
    h, w = x.shape
    fh = np.exp(-2j * np.pi * np.outer(np.arange(h), np.arange(h)) / h)
    fw = np.exp(-2j * np.pi * np.outer(np.arange(w), np.arange(w)) / w)
    spec = fh @ x @ fw.T
    return np.roll(spec, (h // 2, w // 2), axis=(0, 1))


def gray_loop(r, g, b):
    out = np.zeros(r.shape)
    for i in range(r.shape[0]):
        for j in range(r.shape[1]):
            out[i, j] = 0.299 * r[i, j] + 0.587 * g[i, j] + 0.114 * b[i, j]
    return out


def pixel_sets(lm):
    sets = {}
    for (r, c), v in np.ndenumerate(lm):
        if v > 0:
            sets.setdefault(int(v), set()).add((r, c))
    return sets


def brute_aji(gt, pred):
    G, P = pixel_sets(gt), pixel_sets(pred)
    if not G and not P:
        return 1.0
    if not G or not P:
        return 0.0
    used = set()
    num = den = 0
    for gl in sorted(G):
        g = G[gl]
        best, best_iou = None, 0.0
        for pl in sorted(P):
            if pl in used:
                continue
            iou = len(g & P[pl]) / len(g | P[pl])
            if iou > best_iou:
                best, best_iou = pl, iou
        if best is None:
            den += len(g)
        else:
            used.add(best)
            num += len(g & P[best])
            den += len(g | P[best])
    den += sum(len(P[pl]) for pl in P if pl not in used)
    return num / den


def brute_pq(gt, pred):
    G, P = pixel_sets(gt), pixel_sets(pred)
    ious = []
    for g in G.values():
        for p in P.values():
            iou = len(g & p) / len(g | p)
            if iou > 0.5:
                ious.append(iou)
    tp = len(ious)
    return tp, len(P) - tp, len(G) - tp, sorted(ious)


def random_rect_label_map(rng, h=32, w=32, max_inst=6):
    lm = np.zeros((h, w), dtype=np.int32)
    for k in range(1, rng.integers(0, max_inst + 1) + 1):
        r0, c0 = rng.integers(0, h - 2), rng.integers(0, w - 2)
        r1 = rng.integers(r0 + 1, min(h, r0 + 14) + 1)
        c1 = rng.integers(c0 + 1, min(w, c0 + 14) + 1)
        lm[r0:r1, c0:c1] = k
    return lm


def info_nce_two_loop(z, pos, tau, n_anchors=None):
    n = len(z)
    m = n if n_anchors is None else n_anchors
    total = 0.0
    for i in range(m):
        denom = 0.0
        for j in range(n):
            denom += math.exp(float(np.dot(z[i], z[j])) / tau)
        total += -math.log(math.exp(float(np.dot(z[i], z[pos[i]])) / tau) / denom)
    return total / m


def central_diff(f, x, h=1e-5):
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp.flat[i] += h
        xm.flat[i] -= h
        g.flat[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def disk_scene(speck=False, size=256, radius=8):
    """Ten white disks on black, well separated; returns (image, disk masks)."""
    yy, xx = np.mgrid[:size, :size]
    img = np.zeros((size, size))
    disks = []
    for i in range(10):
        cx, cy = 40 + (i % 5) * 45, 60 + (i // 5) * 120
        d = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius**2
        disks.append(d)
        img[d] = 1.0
    if speck:
        img[10, 10:13] = 1.0
    return img, disks
