"""Brute-force reference implementations used to check the production code.

Nothing here imports the code under test beyond plain data containers.
"""

from __future__ import annotations

import numpy as np


def _zscore(values):
    v = np.asarray(values, dtype=float)
    sd = v.std()
    if sd < 1e-8:
        return np.zeros_like(v)
    return (v - v.mean()) / sd


def brute_grpo(rewards):
    """rewards: list of per-step reward lists. Returns per-step combined advantages."""
    totals = [sum(r) for r in rewards]
    z = _zscore(totals)
    return [[float(z[i])] * len(r) for i, r in enumerate(rewards)]


def brute_gigpo(rewards, anchors, gamma, omega):
    """Quadratic-time bucket search and explicit discounted sums."""
    ep = _zscore([sum(r) for r in rewards])
    cells = [(i, t) for i, r in enumerate(rewards) for t in range(len(r))]

    def ret(i, t):
        return sum(gamma ** k * rewards[i][t + k] for k in range(len(rewards[i]) - t))

    out = []
    for i, r in enumerate(rewards):
        row = []
        for t in range(len(r)):
            peers = [(j, s) for (j, s) in cells if anchors[j][s] == anchors[i][t]]
            step = 0.0
            if len(peers) > 1:
                vals = [ret(j, s) for j, s in peers]
                z = _zscore(vals)
                step = float(z[peers.index((i, t))])
            row.append(float(ep[i]) + omega * step)
        out.append(row)
    return out


def objective(W, decisions, advantages, temperature):
    """sum A * log pi(chosen) with scores x_c . W[:, tau_c], written out candidate by candidate."""
    total = 0.0
    for (X, tau, idx), a in zip(decisions, advantages):
        s = np.array([X[c] @ W[:, tau[c]] for c in range(len(tau))]) / temperature
        m = s.max()
        total += a * (s[idx] - m - np.log(np.sum(np.exp(s - m))))
    return total


def finite_difference(W, decisions, advantages, temperature, eps=1e-6):
    g = np.zeros_like(W)
    for k in np.ndindex(W.shape):
        up, dn = W.copy(), W.copy()
        up[k] += eps
        dn[k] -= eps
        g[k] = (objective(up, decisions, advantages, temperature)
                - objective(dn, decisions, advantages, temperature)) / (2 * eps)
    return g


def rasterize_polygon(vertices, width, height):
    """Membership of every integer pixel, by scanline crossings plus exact edge tests.

    Row y is scanned once: crossings of the horizontal line with each non-horizontal
    edge (half-open in y) split the row into inside/outside runs; pixels lying exactly
    on an edge are added afterwards.
    """
    from fractions import Fraction

    mask = np.zeros((height + 1, width + 1), dtype=bool)
    vs = [(Fraction(x), Fraction(y)) for x, y in vertices]
    n = len(vs)
    for y in range(height + 1):
        xs = []
        for i in range(n):
            (ax, ay), (bx, by) = vs[i], vs[(i + 1) % n]
            if (ay > y) != (by > y):
                xs.append(ax + (y - ay) * (bx - ax) / (by - ay))
        xs.sort()
        for a, b in zip(xs[0::2], xs[1::2]):
            lo = max(0, int(np.ceil(float(a))))
            hi = min(width, int(np.floor(float(b))))
            for x in range(lo, hi + 1):
                if a < x < b:
                    mask[y, x] = True
    for i in range(n):
        (ax, ay), (bx, by) = vs[i], vs[(i + 1) % n]
        for x in range(int(min(ax, bx)), int(max(ax, bx)) + 1):
            for y in range(int(min(ay, by)), int(max(ay, by)) + 1):
                if 0 <= x <= width and 0 <= y <= height and (bx - ax) * (y - ay) == (by - ay) * (x - ax):
                    mask[y, x] = True
    return mask
