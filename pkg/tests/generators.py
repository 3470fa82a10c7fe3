"""Seeded random sets for property and acceptance tests."""

import numpy as np
from scipy import ndimage

FACE = ((1, 0), (-1, 0), (0, 1), (0, -1))


def _face_count(occ, c):
    n = 0
    for dx, dy in FACE:
        x, y = c[0] + dx, c[1] + dy
        if 0 <= x < occ.shape[0] and 0 <= y < occ.shape[1] and occ[x, y]:
            n += 1
    return n


def sparse_tree_set(rng, side=None, size=None):
    """Thin face-connected set grown from a random seed (few cycles, so path searches stay small)."""
    side = int(rng.integers(8, 25)) if side is None else side
    size = int(rng.integers(15, 61)) if size is None else size
    occ = np.zeros((side, side), bool)
    start = tuple(int(v) for v in rng.integers(0, side, 2))
    occ[start] = True
    cells = [start]
    for _ in range(size * 50):
        if len(cells) >= size:
            break
        base = cells[int(rng.integers(len(cells)))]
        dx, dy = FACE[int(rng.integers(4))]
        c = (base[0] + dx, base[1] + dy)
        if not (0 <= c[0] < side and 0 <= c[1] < side) or occ[c]:
            continue
        k = _face_count(occ, c)
        if k <= 1 or (k == 2 and rng.random() < 0.3):
            occ[c] = True
            cells.append(c)
    return occ


def random_walk_set(rng, shape, steps, start=None, thickness=0):
    """Face-connected random walk, optionally thickened by a square brush."""
    shape = tuple(shape)
    pos = np.array(start if start is not None else [s // 2 for s in shape])
    occ = np.zeros(shape, bool)
    moves = np.concatenate([np.eye(len(shape), dtype=int), -np.eye(len(shape), dtype=int)])
    for _ in range(steps):
        lo = np.maximum(pos - thickness, 0)
        hi = np.minimum(pos + thickness + 1, shape)
        occ[tuple(slice(a, b) for a, b in zip(lo, hi))] = True
        pos = np.clip(pos + moves[int(rng.integers(len(moves)))], 0, np.array(shape) - 1)
    return occ


def disk(shape, centre, radius, inner=0.0):
    i, j = np.indices(shape)
    r = np.hypot(i - centre[0], j - centre[1])
    return (r <= radius) & (r >= inner)


def separated_pair(rng, side=256, gap=8):
    """Two face-connected blobs at centre distance >= gap cells, and one cell of each.

    Mixes random-walk blobs, disks, and rings that enclose the other blob,
    so both "x inside" and "y in a hole" configurations occur.
    """
    kind = rng.integers(3)
    while True:
        if kind == 0:
            a = random_walk_set(rng, (side, side), int(rng.integers(200, 1500)),
                                start=rng.integers(side // 8, side // 2, 2), thickness=int(rng.integers(0, 3)))
            b = random_walk_set(rng, (side, side), int(rng.integers(200, 1500)),
                                start=rng.integers(side // 2, 7 * side // 8, 2), thickness=int(rng.integers(0, 3)))
        else:
            c = rng.integers(side // 3, 2 * side // 3, 2)
            r = float(rng.uniform(side / 16, side / 6))
            core = disk((side, side), c, r * 0.5)
            ring = disk((side, side), c, r + gap + 2 + rng.uniform(0, side / 8), inner=r + gap + 2)
            if rng.random() < 0.5:
                ring[c[0] - 1:c[0] + 2, :c[1]] = False  # cut the ring open into a horseshoe
            a, b = (core, ring) if kind == 1 else (ring, core)
        b &= ~a
        if not a.any() or not b.any():
            continue
        la, _ = ndimage.label(a)
        lb, _ = ndimage.label(b)
        a = la == 1
        b = lb == 1
        d = ndimage.distance_transform_edt(~a)[b].min()
        if d >= gap:
            x = tuple(np.argwhere(a)[int(rng.integers(a.sum()))])
            y = tuple(np.argwhere(b)[int(rng.integers(b.sum()))])
            return a | b, x, y, float(d)
