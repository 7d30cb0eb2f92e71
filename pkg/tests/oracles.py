"""Independent brute-force oracles used by the tests.

These deliberately share no code with the library's solve paths: rates come
from closed-form power splits evaluated on exhaustive phase grids (plus
root-finding along the decoding-order boundary, where constrained optima
live), shortest paths from Bellman-Ford relaxation to a fixpoint, and
line-of-sight from dense segment sampling.
"""

from __future__ import annotations

import math

import numpy as np


def rate_given_gains(prob, lam_m: float, lam_s: float) -> float | None:
    """Best mobile-user rate for fixed gains, or None when infeasible."""
    s2, p = prob.sigma2, prob.p_max
    if prob.scheme == "oma":
        p_s = (2.0 ** (2.0 * prob.rs_target) - 1.0) * s2 / (2.0 * lam_s)
        if p_s > p:
            return None
        return 0.5 * math.log2(1.0 + 2.0 * lam_m * (p - p_s) / s2)
    beta = 2.0 ** prob.rs_target - 1.0
    if prob.order == "sru_strong":
        if lam_s < lam_m * (1.0 - 1e-12):
            return None
        p_s = beta * s2 / lam_s
        if p_s > p:
            return None
        return math.log2(1.0 + (p - p_s) / (p_s + s2 / lam_m))
    if lam_m < lam_s * (1.0 - 1e-12):
        return None
    p_m = (p - beta * s2 / lam_s) / (1.0 + beta)
    if p_m < 0:
        return None
    return math.log2(1.0 + lam_m * p_m / s2)


def _gains(prob, t1: np.ndarray, t2: np.ndarray):
    v = np.stack(
        [np.exp(1j * t1), np.exp(1j * t2), np.ones_like(t1, dtype=complex)], axis=-1
    )
    lam_m = np.abs(v @ prob.row_m) ** 2 + prob.tau_m
    lam_s = np.abs(v @ prob.row_s) ** 2 + prob.tau_s
    return lam_m, lam_s


def _best_over(prob, t1: np.ndarray, t2: np.ndarray) -> float | None:
    lam_m, lam_s = _gains(prob, t1, t2)
    best = None
    for lm, ls in zip(np.ravel(lam_m), np.ravel(lam_s)):
        r = rate_given_gains(prob, float(lm), float(ls))
        if r is not None and (best is None or r > best):
            best = r
    return best


def _boundary_candidates(prob, samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Points where the two users' gains cross, found by 1-D bisection."""
    sweep = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
    cand1, cand2 = [], []
    for axis in (0, 1):
        for fixed in sweep:
            f_fixed = np.full_like(sweep, fixed)
            t1, t2 = (f_fixed, sweep) if axis == 0 else (sweep, f_fixed)
            lam_m, lam_s = _gains(prob, t1, t2)
            diff = lam_s - lam_m
            sign_change = diff[:-1] * np.roll(diff, -1)[:-1] < 0
            for k in np.nonzero(sign_change)[0]:
                lo, hi = sweep[k], sweep[k + 1]
                for _ in range(60):
                    mid = (lo + hi) / 2.0
                    pt = (fixed, mid) if axis == 0 else (mid, fixed)
                    lm, ls = _gains(prob, np.array([pt[0]]), np.array([pt[1]]))
                    if (float(ls[0] - lm[0]) > 0) == (diff[k] > 0):
                        lo = mid
                    else:
                        hi = mid
                pt = (fixed, (lo + hi) / 2.0) if axis == 0 else ((lo + hi) / 2.0, fixed)
                cand1.append(pt[0])
                cand2.append(pt[1])
    return np.array(cand1), np.array(cand2)


def rate_oracle(prob, levels: int = 64, boundary_samples: int = 192) -> float | None:
    """Brute-force maximum of the cell rate problem (two phases only)."""
    assert prob.row_m.shape == (3,), "oracle supports two sub-surfaces"
    th = np.linspace(0.0, 2.0 * np.pi, levels, endpoint=False)
    t1, t2 = np.meshgrid(th, th, indexing="ij")
    best = _best_over(prob, t1.ravel(), t2.ravel())
    if prob.scheme == "noma":
        b1, b2 = _boundary_candidates(prob, boundary_samples)
        if b1.size:
            bb = _best_over(prob, b1, b2)
            if bb is not None and (best is None or bb > best):
                best = bb
    return best


def bellman_ford_distance(mask: np.ndarray, dx: float, dy: float,
                          start, goal) -> float | None:
    """Fixpoint of dist[v] = min(dist[v], dist[u] + w) over the 8-neighbor grid."""
    nx, ny = mask.shape
    diag = math.hypot(dx, dy)
    steps = [(1, 0, dx), (-1, 0, dx), (0, 1, dy), (0, -1, dy),
             (1, 1, diag), (1, -1, diag), (-1, 1, diag), (-1, -1, diag)]
    if not mask[start[0] - 1, start[1] - 1] or not mask[goal[0] - 1, goal[1] - 1]:
        return None
    dist = {
        (i + 1, j + 1): math.inf for i in range(nx) for j in range(ny) if mask[i, j]
    }
    dist[start] = 0.0
    changed = True
    while changed:
        changed = False
        for (i, j) in dist:
            d = dist[(i, j)]
            if not math.isfinite(d):
                continue
            for di, dj, w in steps:
                v = (i + di, j + dj)
                if v in dist and d + w < dist[v]:
                    dist[v] = d + w
                    changed = True
    return dist[goal] if math.isfinite(dist[goal]) else None


def sampled_segment_blocked(obstacles, a, b, n: int = 40_000) -> bool:
    """Dense sampling of the open segment against closed boxes."""
    ts = np.linspace(1e-6, 1.0 - 1e-6, n)
    pa = np.array(a.as_tuple())
    pb = np.array(b.as_tuple())
    pts = pa[None, :] + ts[:, None] * (pb - pa)[None, :]
    for ob in obstacles:
        (xlo, xhi), (ylo, yhi), (zlo, zhi) = ob.bounds()
        inside = (
            (pts[:, 0] >= xlo) & (pts[:, 0] <= xhi)
            & (pts[:, 1] >= ylo) & (pts[:, 1] <= yhi)
            & (pts[:, 2] >= zlo) & (pts[:, 2] <= zhi)
        )
        if inside.any():
            return True
    return False
