"""Slow, obviously-correct reference implementations used as test oracles.

Nothing here imports the package's algorithms; inputs and outputs are
plain numpy arrays and python containers.
"""

from collections import deque
from itertools import combinations, product

import numpy as np


def centres(shape, lo, hi):
    shape = np.array(shape)
    h = (np.array(hi, float) - np.array(lo, float)) / shape
    idx = np.array(list(product(*[range(n) for n in shape])))
    return idx, np.array(lo, float) + (idx + 0.5) * h


def brute_edt(occ, lo=None, hi=None):
    """Distance from each cell centre to the nearest occupied centre, by exhaustive search."""
    occ = np.asarray(occ, bool)
    lo = np.zeros(occ.ndim) if lo is None else lo
    hi = np.ones(occ.ndim) if hi is None else hi
    idx, pts = centres(occ.shape, lo, hi)
    on = pts[occ[tuple(idx.T)]]
    d = np.sqrt(((pts[:, None, :] - on[None, :, :]) ** 2).sum(-1)).min(axis=1)
    return d.reshape(occ.shape)


def brute_hausdorff(a, b, lo=None, hi=None):
    a = np.asarray(a, bool)
    b = np.asarray(b, bool)
    lo = np.zeros(a.ndim) if lo is None else lo
    hi = np.ones(a.ndim) if hi is None else hi
    idx, pts = centres(a.shape, lo, hi)
    pa = pts[a[tuple(idx.T)]]
    pb = pts[b[tuple(idx.T)]]
    d = np.sqrt(((pa[:, None, :] - pb[None, :, :]) ** 2).sum(-1))
    return max(d.min(axis=1).max(), d.min(axis=0).max())


def face_neighbours(cell, shape):
    for k in range(len(shape)):
        for s in (-1, 1):
            nb = list(cell)
            nb[k] += s
            if 0 <= nb[k] < shape[k]:
                yield tuple(nb)


def vertex_neighbours(cell, shape):
    for off in product((-1, 0, 1), repeat=len(shape)):
        if any(off):
            nb = tuple(c + o for c, o in zip(cell, off))
            if all(0 <= v < n for v, n in zip(nb, shape)):
                yield nb


def bfs_components(occ, adjacency="face"):
    """Component count and a dict cell -> component id (ids in lexicographic order of first cell)."""
    occ = np.asarray(occ, bool)
    nbrs = face_neighbours if adjacency == "face" else vertex_neighbours
    comp = {}
    n = 0
    for cell in map(tuple, np.argwhere(occ)):
        if cell in comp:
            continue
        n += 1
        comp[cell] = n
        q = deque([cell])
        while q:
            c = q.popleft()
            for nb in nbrs(c, occ.shape):
                if occ[nb] and nb not in comp:
                    comp[nb] = n
                    q.append(nb)
    return n, comp


def bfs_ball_radius(occ, x, y, h=1.0):
    """Smallest r among the distinct centre distances such that y is reachable from x
    through occupied cells inside the closed ball B(x, r) (face adjacency)."""
    occ = np.asarray(occ, bool)
    cells = [tuple(c) for c in np.argwhere(occ)]
    px = np.array(x, float)
    dist = {c: float(np.linalg.norm((np.array(c) - px) * h)) for c in cells}
    for r in sorted(set(dist.values())):
        if dist[tuple(y)] > r:
            continue
        seen = {tuple(x)}
        q = deque([tuple(x)])
        while q:
            c = q.popleft()
            if c == tuple(y):
                return r
            for nb in face_neighbours(c, occ.shape):
                if occ[nb] and nb not in seen and dist[nb] <= r + 1e-12:
                    seen.add(nb)
                    q.append(nb)
    return np.inf


def _prune_leaves(nbrs, allowed, keep):
    """Drop allowed cells of degree <= 1 (other than ``keep``) until none remain; no simple path between
    the kept cells passes through them."""
    alive = set(np.flatnonzero(allowed).tolist())
    deg = {i: sum(j in alive for j in nbrs[i]) for i in alive}
    stack = [i for i in alive if deg[i] <= 1 and i not in keep]
    while stack:
        i = stack.pop()
        if i not in alive:
            continue
        alive.discard(i)
        for j in nbrs[i]:
            if j in alive:
                deg[j] -= 1
                if deg[j] <= 1 and j not in keep:
                    stack.append(j)
    return alive


def _reaches(nbrs, alive, start, goal, blocked):
    seen = {start}
    q = deque([start])
    while q:
        c = q.popleft()
        if c == goal:
            return True
        for j in nbrs[c]:
            if j in alive and j not in seen and j not in blocked:
                seen.add(j)
                q.append(j)
    return False


def min_connected_diameter(occ, x, y, budget=200_000):
    """Smallest diameter (centre metric, cell units) of a face-connected set of occupied cells holding x and y.

    Any such set contains a grid path from x to y, and that path is a
    connected set of no larger diameter, so it suffices to search simple
    paths. For each candidate diameter D (the distinct pairwise centre
    distances, ascending) a depth-first search extends simple paths from x
    through cells whose distance to every cell already on the path is <= D.
    Dead-end branches are pruned first, and a partial path is abandoned as
    soon as y is unreachable without crossing it. Exponential in the worst
    case; meant for small sparse sets.
    """
    occ = np.asarray(occ, bool)
    cells = [tuple(c) for c in np.argwhere(occ)]
    index = {c: i for i, c in enumerate(cells)}
    arr = np.array(cells, float)
    dists = np.sqrt(((arr[:, None] - arr[None]) ** 2).sum(-1))
    ix, iy = index[tuple(x)], index[tuple(y)]
    if ix == iy:
        return 0.0
    nbrs = [[index[nb] for nb in face_neighbours(c, occ.shape) if occ[nb]] for c in cells]
    cand = np.unique(dists)
    spent = 0
    for D in cand[cand >= dists[ix, iy] - 1e-12]:
        tol = D + 1e-9
        alive = _prune_leaves(nbrs, (dists[ix] <= tol) & (dists[iy] <= tol), {ix, iy})
        if not _reaches(nbrs, alive, ix, iy, set()):
            continue
        stack = [(ix, (ix,))]
        while stack:
            end, path = stack.pop()
            spent += 1
            if spent > budget:
                raise RuntimeError("oracle budget exceeded")
            on_path = set(path)
            for j in nbrs[end]:
                if j not in alive or j in on_path:
                    continue
                if any(dists[j, c] > tol for c in path):
                    continue
                if j == iy:
                    return float(D)
                if _reaches(nbrs, alive, j, iy, on_path):
                    stack.append((j, path + (j,)))
    return np.inf


def brute_words(M, n):
    M = np.asarray(M)
    m = len(M)
    return [w for w in product(range(1, m + 1), repeat=n)
            if all(M[a - 1][b - 1] for a, b in zip(w, w[1:]))]


def pairwise_ratio_max(f, pts):
    best = 0.0
    fp = f(pts)
    for i, j in combinations(range(len(pts)), 2):
        d = np.linalg.norm(pts[i] - pts[j])
        if d > 0:
            best = max(best, np.linalg.norm(fp[i] - fp[j]) / d)
    return best


def brute_edt_sq_cells(occ):
    """Squared centre distance, in cell units, from each cell to the nearest occupied cell (exact integers)."""
    occ = np.asarray(occ, bool)
    idx = np.indices(occ.shape).reshape(occ.ndim, -1).T
    on = np.argwhere(occ)
    best = np.full(len(idx), np.iinfo(np.int64).max)
    for start in range(0, len(on), 256):
        d = ((idx[:, None, :] - on[None, start:start + 256, :]) ** 2).sum(-1)
        best = np.minimum(best, d.min(axis=1))
    return best.reshape(occ.shape)
