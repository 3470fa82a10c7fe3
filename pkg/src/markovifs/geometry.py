"""Planar polygon helpers: even-odd containment, edge distances, simplicity."""

import numpy as np


def _edges(poly):
    poly = np.asarray(poly, dtype=float)
    if np.allclose(poly[0], poly[-1]) and len(poly) > 3:
        poly = poly[:-1]
    return poly, np.roll(poly, -1, axis=0)


def points_in_polygon(points, poly):
    """Even-odd rule. Points exactly on an edge may land either side."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a, b = _edges(poly)
    x = pts[:, 0:1]
    y = pts[:, 1:2]
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    straddle = (ay > y) != (by > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = ax + (y - ay) * (bx - ax) / (by - ay)
    crossings = np.count_nonzero(straddle & (x < xcross), axis=1)
    return crossings % 2 == 1


def distance_to_segments(points, a, b, chunk=4096):
    """Distance from each point to the nearest of the segments ``a[k]-b[k]``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    ll = np.einsum("ij,ij->i", ab, ab)
    ll = np.where(ll > 0, ll, 1.0)
    out = np.empty(len(pts))
    step = max(1, chunk * 64 // max(len(a), 1))
    for s in range(0, len(pts), step):
        p = pts[s:s + step, None, :]
        t = np.clip(np.einsum("pkj,kj->pk", p - a, ab) / ll, 0.0, 1.0)
        proj = a + t[..., None] * ab
        out[s:s + step] = np.sqrt(((p - proj) ** 2).sum(-1)).min(axis=1)
    return out


def signed_distance_polygon(points, poly):
    """Positive inside, negative outside."""
    a, b = _edges(poly)
    d = distance_to_segments(points, a, b)
    return np.where(points_in_polygon(points, poly), d, -d)


def _segments_intersect(p1, p2, q1, q2):
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-15 else (1 if v > 0 else -1)

    def on_seg(a, b, c):
        return min(a[0], b[0]) - 1e-15 <= c[0] <= max(a[0], b[0]) + 1e-15 and \
            min(a[1], b[1]) - 1e-15 <= c[1] <= max(a[1], b[1]) + 1e-15

    o1, o2, o3, o4 = orient(p1, p2, q1), orient(p1, p2, q2), orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return (o1 == 0 and on_seg(p1, p2, q1)) or (o2 == 0 and on_seg(p1, p2, q2)) or \
        (o3 == 0 and on_seg(q1, q2, p1)) or (o4 == 0 and on_seg(q1, q2, p2))


def polygon_is_simple(poly) -> bool:
    a, b = _edges(poly)
    n = len(a)
    if n < 3:
        return False
    if abs(polygon_area(a)) < 1e-15:
        return False
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                # adjacent edges share exactly one vertex; reject folding back
                continue
            if _segments_intersect(a[i], b[i], a[j], b[j]):
                return False
    for i in range(n):
        # adjacent edges must not overlap collinearly
        u = b[i] - a[i]
        v = b[(i + 1) % n] - a[(i + 1) % n]
        cross = u[0] * v[1] - u[1] * v[0]
        if abs(cross) < 1e-15 and np.dot(u, v) < 0:
            return False
    return True


def polygon_area(poly) -> float:
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
