"""Connectivity and local-connectivity diagnostics on voxel sets.

Everything here works on the graph whose vertices are occupied cells and
whose edges join face (or vertex) neighbours; distances are between cell
centres. The central quantity is the connecting radius

    eps*(x, y) = min { r : y is reachable from x inside A ∩ B(x, r) },

computed exactly as a bottleneck (minimax) path value.
"""

from __future__ import annotations

import heapq
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse import csgraph
from scipy.spatial import cKDTree

from ..attractor import AttractorApprox, piece_approx
from ..contractions import MarkovIfs
from ..errors import DomainError, GeometryError, GuardError, InvariantError
from ..setrep import VoxelSet, adjacency_structure, connected_components, dilate, hausdorff_distance
from ..symbolic import DEFAULT_WORD_CAP, admissible_words, count_admissible

log = logging.getLogger(__name__)

SEED = 0x5EED


# -- cell graph ----------------------------------------------------------

def neighbour_offsets(dim: int, adjacency: str = "face") -> np.ndarray:
    if adjacency == "face":
        eye = np.eye(dim, dtype=np.int64)
        return np.concatenate([eye, -eye])
    if adjacency == "vertex":
        offs = np.array(list(itertools.product((-1, 0, 1), repeat=dim)), dtype=np.int64)
        return offs[np.any(offs != 0, axis=1)]
    raise DomainError("adjacency must be 'face' or 'vertex'", adjacency=adjacency)


@dataclass
class CellGraph:
    """Occupied cells of a VoxelSet with their neighbour graph (CSR)."""

    cells: np.ndarray          # (n, d) integer indices, lexicographic
    centers: np.ndarray        # (n, d)
    adj: sparse.csr_matrix
    flat: np.ndarray           # sorted flat indices
    shape: tuple

    @classmethod
    def build(cls, A: VoxelSet, adjacency: str = "face") -> "CellGraph":
        flat = np.flatnonzero(A.occupancy)
        cells = np.stack(np.unravel_index(flat, A.shape), axis=-1) if len(flat) else np.zeros((0, A.dim), int)
        n = len(flat)
        rows, cols = [], []
        shape = np.array(A.shape)
        for off in neighbour_offsets(A.dim, adjacency):
            nb = cells + off
            inside = np.all((nb >= 0) & (nb < shape), axis=1)
            src = np.flatnonzero(inside)
            nf = np.ravel_multi_index(tuple(nb[inside].T), A.shape) if len(src) else np.zeros(0, np.int64)
            pos = np.searchsorted(flat, nf)
            pos = np.minimum(pos, max(n - 1, 0))
            hit = (flat[pos] == nf) if n else np.zeros(0, bool)
            rows.append(src[hit])
            cols.append(pos[hit])
        r = np.concatenate(rows) if rows else np.zeros(0, np.int64)
        c = np.concatenate(cols) if cols else np.zeros(0, np.int64)
        adj = sparse.csr_matrix((np.ones(len(r), dtype=np.int8), (r, c)), shape=(n, n))
        return cls(cells, A.centers(cells), adj, flat, A.shape)

    def __len__(self):
        return len(self.flat)

    def index_of(self, cell) -> int:
        f = np.ravel_multi_index(tuple(np.asarray(cell, dtype=np.int64)), self.shape)
        k = int(np.searchsorted(self.flat, f))
        if k >= len(self.flat) or self.flat[k] != f:
            raise DomainError("cell is not occupied", cell=[int(v) for v in cell])
        return k

    def components(self):
        return csgraph.connected_components(self.adj, directed=False)

    def degree(self) -> np.ndarray:
        return np.asarray(self.adj.sum(axis=1)).ravel()


def minimax_sweep(graph: CellGraph, source: int, targets: Optional[Sequence[int]] = None, stop_at: float = np.inf):
    """Connecting radius eps*(source, y) for every y reached (bottleneck Prim order).

    Returns an array with ``inf`` for cells not reached. With ``targets`` the
    sweep stops once all of them are settled; with ``stop_at`` it stops at
    that radius.
    """
    n = len(graph)
    d = np.linalg.norm(graph.centers - graph.centers[source], axis=1)
    eps = np.full(n, np.inf)
    seen = np.zeros(n, dtype=bool)
    indptr, indices = graph.adj.indptr, graph.adj.indices
    pending = None if targets is None else set(int(t) for t in targets)
    heap = [(0.0, source)]
    seen[source] = True
    level = 0.0
    while heap:
        dist, v = heapq.heappop(heap)
        if dist > stop_at:
            break
        level = max(level, dist)
        eps[v] = level
        if pending is not None:
            pending.discard(v)
            if not pending:
                break
        for u in indices[indptr[v]:indptr[v + 1]]:
            if not seen[u]:
                seen[u] = True
                heapq.heappush(heap, (d[u], u))
    return eps


def connecting_radius(A: VoxelSet, x_cell, y_cell, adjacency: str = "face", graph: CellGraph = None) -> float:
    g = CellGraph.build(A, adjacency) if graph is None else graph
    i, j = g.index_of(x_cell), g.index_of(y_cell)
    return float(minimax_sweep(g, i, [j])[j])


def reachable_within(graph: CellGraph, source: int, radius: float) -> np.ndarray:
    """Cells reachable from ``source`` through cells in the closed ball B(source, radius)."""
    d = np.linalg.norm(graph.centers - graph.centers[source], axis=1)
    inside = np.flatnonzero(d <= radius)
    sub = graph.adj[inside][:, inside]
    _, lab = csgraph.connected_components(sub, directed=False)
    me = lab[np.searchsorted(inside, source)]
    out = np.zeros(len(graph), dtype=bool)
    out[inside[lab == me]] = True
    return out


def connecting_radius_bisect(graph: CellGraph, i: int, j: int, granularity: float) -> float:
    """eps* by bisection on the radius with ball-restricted reachability.

    Slow reference path; the result is within ``granularity`` of
    :func:`minimax_sweep`.
    """
    d = float(np.linalg.norm(graph.centers[i] - graph.centers[j]))
    lo, hi = d, float(np.linalg.norm(graph.centers - graph.centers[i], axis=1).max())
    if not reachable_within(graph, i, hi)[j]:
        return np.inf
    if reachable_within(graph, i, lo)[j]:
        return lo
    while hi - lo > granularity:
        mid = 0.5 * (lo + hi)
        if reachable_within(graph, i, mid)[j]:
            hi = mid
        else:
            lo = mid
    return hi


# -- connectivity ------------------------------------------------------

@dataclass
class ConnectivityVerdict:
    connected: bool
    components: int
    adjacency: str
    tolerance: Optional[float] = None
    dilated_components: Optional[int] = None

    @property
    def connected_at_tolerance(self) -> Optional[bool]:
        return None if self.dilated_components is None else self.dilated_components == 1

    def to_dict(self):
        return {
            "connected": self.connected,
            "components": self.components,
            "adjacency": self.adjacency,
            "tolerance": self.tolerance,
            "dilated_components": self.dilated_components,
            "connected_at_tolerance": self.connected_at_tolerance,
        }


def connectivity_verdict(A: VoxelSet, error_bound: Optional[float] = None,
                         adjacency: str = "face") -> ConnectivityVerdict:
    """Component count of A. With ``error_bound`` also tests the dilation by twice that amount."""
    if A.is_empty:
        raise GeometryError("set has no occupied cells")
    _, n = connected_components(A, adjacency)
    verdict = ConnectivityVerdict(n == 1, n, adjacency)
    if error_bound is not None:
        tol = 2.0 * error_bound
        _, nd = connected_components(dilate(A, tol), adjacency)
        verdict.tolerance = tol
        verdict.dilated_components = nd
    return verdict


# -- piece graph -------------------------------------------------------

@dataclass
class PieceGraph:
    words: list
    edges: list
    distances: dict
    tol: float
    components: int
    labels: list

    @property
    def connected(self) -> bool:
        return self.components == 1

    def to_dict(self):
        return {
            "words": [list(w) for w in self.words],
            "edges": [[list(a), list(b)] for a, b in self.edges],
            "tol": self.tol,
            "components": self.components,
            "connected": self.connected,
            "labels": self.labels,
        }


def piece_graph(ifs: MarkovIfs, n: int, base: AttractorApprox, tol: Optional[float] = None,
                cap: int = 4096) -> PieceGraph:
    """Graph on level-n puzzle pieces, joined when their approximants come within ``tol``.

    Diagnostic only: a connected graph shows the union of pieces is
    tol-connected, nothing more.
    """
    min_tol = 2.0 * base.error_bound
    tol = min_tol if tol is None else tol
    if tol < min_tol:
        raise DomainError("tol must be at least twice the approximation error bound", tol=tol, minimum=min_tol)
    if count_admissible(ifs.matrix, n) > cap:
        raise GuardError("too many level-n pieces", count=count_admissible(ifs.matrix, n), cap=cap)
    words = admissible_words(ifs.matrix, n, cap)
    pieces = [piece_approx(ifs, w, base) if n > 1 else base.pieces[w[0] - 1] for w in words]
    nonempty = [i for i, p in enumerate(pieces) if not p.is_empty]
    trees = {i: cKDTree(pieces[i].centers()) for i in nonempty}
    edges, dists = [], {}
    rows, cols = [], []
    for a, b in itertools.combinations(nonempty, 2):
        # distance between approximants, stopping early at tol
        ta, tb = trees[a], trees[b]
        small, big = (ta, tb) if ta.n <= tb.n else (tb, ta)
        dd, _ = big.query(small.data, k=1, distance_upper_bound=tol * (1 + 1e-12))
        dmin = float(dd.min())
        if dmin <= tol * (1 + 1e-12):
            edges.append((words[a], words[b]))
            dists[(words[a], words[b])] = dmin
            rows += [a, b]
            cols += [b, a]
    adj = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(words), len(words)))
    ncomp, lab = csgraph.connected_components(adj, directed=False)
    # empty pieces are isolated vertices that carry no points; do not count them
    live = sorted(set(int(lab[i]) for i in nonempty))
    return PieceGraph(words, edges, dists, tol, len(live), [int(v) for v in lab])


# -- local connectivity profile ---------------------------------------

@dataclass
class LcRecord:
    x: list
    y: list
    delta: float
    eps: float

    def to_dict(self):
        return {"x": self.x, "y": self.y, "delta": self.delta, "eps_star": self.eps}


@dataclass
class LcProfile:
    records: list
    adjacency: str
    sampling: dict

    def to_dict(self):
        return {"adjacency": self.adjacency, "sampling": self.sampling,
                "records": [r.to_dict() for r in self.records]}

    def max_ratio(self) -> float:
        return max((r.eps / r.delta for r in self.records if r.delta > 0), default=0.0)

    def to_rows(self):
        for r in self.records:
            yield [*r.x, *r.y, r.delta, r.eps]


def _candidate_pairs(graph: CellGraph, delta_max: float, exhaustive_limit: int, n_random: int, rng):
    tree = cKDTree(graph.centers)
    pairs = tree.query_pairs(delta_max * (1 + 1e-12), output_type="ndarray")
    mode = "all"
    if len(pairs) > exhaustive_limit:
        mode = "stratified"
        # stratify by distance so short pairs are not swamped by long ones
        d = np.linalg.norm(graph.centers[pairs[:, 0]] - graph.centers[pairs[:, 1]], axis=1)
        bins = np.digitize(d, np.geomspace(max(d.min(), 1e-12), d.max() + 1e-12, 9))
        chosen = []
        per = max(1, n_random // max(len(np.unique(bins)), 1))
        for b in np.unique(bins):
            members = np.flatnonzero(bins == b)
            take = members if len(members) <= per else rng.choice(members, per, replace=False)
            chosen.append(np.sort(take))
        pairs = pairs[np.concatenate(chosen)]
    return pairs, mode


def _profile_groups(graph: CellGraph, groups) -> list:
    records = []
    for src, tgts in groups:
        eps = minimax_sweep(graph, src, tgts)
        for t in tgts:
            if not np.isfinite(eps[t]):
                raise InvariantError("pair in one component is unreachable", x=graph.cells[src].tolist(),
                                     y=graph.cells[t].tolist())
            delta = float(np.linalg.norm(graph.centers[src] - graph.centers[t]))
            records.append(LcRecord(graph.centers[src].tolist(), graph.centers[t].tolist(), delta, float(eps[t])))
    return records


_WORKER_GRAPH = None


def _set_worker_graph(graph):
    global _WORKER_GRAPH
    _WORKER_GRAPH = graph


def _profile_groups_worker(groups):
    return _profile_groups(_WORKER_GRAPH, groups)


def lc_profile(A: VoxelSet, delta_max: Optional[float] = None, adjacency: str = "face",
               exhaustive_limit: int = 10_000, n_random: int = 2_000, seed: int = SEED,
               pairs: Optional[Sequence] = None, workers: int = 1) -> LcProfile:
    """eps* for pairs of occupied cells, sorted by pair distance.

    Pairs are all occupied-cell pairs within ``delta_max`` when there are at
    most ``exhaustive_limit`` of them, else a distance-stratified random
    sample of ``n_random`` (RNG seeded with ``seed``). Explicit ``pairs`` of
    cell indices override sampling. Pairs in different components are skipped.
    With ``workers > 1`` the sweeps run in forked processes; the sorted
    result does not depend on the worker count.
    """
    if A.is_empty:
        raise GeometryError("set has no occupied cells")
    graph = CellGraph.build(A, adjacency)
    _, comp = graph.components()
    rng = np.random.default_rng(seed)
    delta_max = 8 * A.h if delta_max is None else delta_max
    if pairs is None:
        idx_pairs, mode = _candidate_pairs(graph, delta_max, exhaustive_limit, n_random, rng)
    else:
        idx_pairs = np.array([[graph.index_of(a), graph.index_of(b)] for a, b in pairs], dtype=np.int64)
        mode = "explicit"
    idx_pairs = idx_pairs.reshape(-1, 2)
    idx_pairs = idx_pairs[comp[idx_pairs[:, 0]] == comp[idx_pairs[:, 1]]]
    order = np.argsort(idx_pairs[:, 0], kind="stable")
    groups = [(src, [p[1] for p in g]) for src, g in itertools.groupby(idx_pairs[order].tolist(), key=lambda p: p[0])]
    if workers > 1 and len(groups) > 1:
        chunks = [groups[k::workers] for k in range(workers)]
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(workers, mp_context=ctx, initializer=_set_worker_graph, initargs=(graph,)) as pool:
            records = [r for part in pool.map(_profile_groups_worker, chunks) for r in part]
    else:
        records = _profile_groups(graph, groups)
    records.sort(key=lambda r: (r.delta, r.x, r.y))
    return LcProfile(records, adjacency, {"mode": mode, "delta_max": delta_max, "seed": seed,
                                          "pairs": len(records)})


# -- non-local-connectivity witness -----------------------------------

@dataclass
class WitnessResult:
    found: bool
    threshold: float
    pairs: list = field(default_factory=list)
    sources_examined: int = 0
    candidates: int = 0
    min_pairs: int = 3

    @property
    def verdict(self) -> str:
        return "witness found" if self.found else "none found at this resolution"

    def to_dict(self):
        return {"verdict": self.verdict, "found": self.found, "threshold": self.threshold,
                "min_pairs": self.min_pairs, "sources_examined": self.sources_examined,
                "candidates": self.candidates, "pairs": [p.to_dict() for p in self.pairs]}


def _boundary_cells(graph: CellGraph, adjacency: str) -> np.ndarray:
    full = len(neighbour_offsets(graph.cells.shape[1], adjacency))
    return np.flatnonzero(graph.degree() < full)


def _stratified_sources(graph: CellGraph, pool: np.ndarray, limit: int, rng) -> np.ndarray:
    if len(pool) <= limit:
        return pool
    c = graph.cells[pool]
    span = np.maximum(c.max(axis=0) - c.min(axis=0) + 1, 1)
    strata_per_axis = max(1, int(round(limit ** (1.0 / c.shape[1]) / 2)))
    key = np.ravel_multi_index(tuple(((c - c.min(axis=0)) * strata_per_axis // span).T),
                               (strata_per_axis,) * c.shape[1])
    out = []
    groups = np.unique(key)
    per = max(1, limit // len(groups))
    for g in groups:
        members = pool[key == g]
        out.append(members if len(members) <= per else np.sort(rng.choice(members, per, replace=False)))
    return np.sort(np.concatenate(out))


_DENSE_WINDOW_LIMIT = 400_000


def _banded_nearest(d2: np.ndarray, lab: np.ndarray, me: int, h: float):
    """Indices of the nearest cell outside component ``me``, one per dyadic distance band (delta/h)."""
    other = np.flatnonzero((lab > 0) & (lab != me)) if lab.ndim else np.zeros(0, int)
    if not len(other):
        return []
    d = np.sqrt(d2[other])
    band = np.floor(np.log2(np.maximum(d / h, 1.0))).astype(int)
    order = np.lexsort((d, band))
    _, first = np.unique(band[order], return_index=True)
    return [(float(d[order[k]]), int(other[order[k]])) for k in first]


def _nearest_other_dense(A: VoxelSet, cell, x, c, radius_cells, structure):
    """Cells outside x's component within the open ball B(x, c), nearest per dyadic band (dense window)."""
    lo = np.maximum(cell - radius_cells, 0)
    hi = np.minimum(cell + radius_cells + 1, A.shape)
    sl = tuple(slice(l, h) for l, h in zip(lo, hi))
    grids = np.ogrid[sl]
    d2 = sum(((g + 0.5) * A.spacing[k] + A.lo[k] - x[k]) ** 2 for k, g in enumerate(grids))
    win = A.occupancy[sl] & (d2 < c * c)
    lab, n = ndimage.label(win, structure=structure)
    if n < 2:
        return []
    me = lab[tuple(cell - lo)]
    d2 = np.broadcast_to(d2, lab.shape).ravel()
    hits = _banded_nearest(d2, lab.ravel(), me, A.h)
    return [(delta, lo + np.array(np.unravel_index(k, lab.shape))) for delta, k in hits]


def halving_chain(deltas: Sequence[float]) -> list:
    """Indices of the longest chain with each delta at most half the previous (greedy from the smallest)."""
    order = np.argsort(deltas, kind="stable")
    chain = []
    last = None
    for k in order:
        if last is None or deltas[k] >= 2 * last * (1 - 1e-12):
            chain.append(int(k))
            last = deltas[k]
    return chain[::-1]


def non_lc_witness(A: VoxelSet, c: float, N: int = 5, adjacency: str = "face", max_sources: int = 2000,
                   min_pairs: int = 3, seed: int = SEED) -> WitnessResult:
    """Search for pairs (x, y) with shrinking distance and eps*(x, y) >= c.

    For each sampled source x (boundary cells, stratified over the set), the
    set is restricted to the open ball of radius c about x; every occupied
    cell outside x's component there makes a pair with eps* >= c and
    distance below c. The nearest such cell in each dyadic distance band
    (delta / h in [2^j, 2^(j+1))) is kept as a candidate. From all such pairs the longest chain whose distances
    at least halve at every step is kept, and its N smallest are returned.
    A witness is declared when the chain has at least ``min_pairs`` pairs.
    """
    if A.is_empty:
        raise GeometryError("set has no occupied cells")
    graph = CellGraph.build(A, adjacency)
    rng = np.random.default_rng(seed)
    pool = _boundary_cells(graph, adjacency)
    sources = _stratified_sources(graph, pool, max_sources, rng)
    cand = []  # (delta, x, y)
    first = graph.centers[:, 0]  # non-decreasing: cells are in lexicographic order
    radius_cells = np.ceil(c / A.spacing).astype(int) + 1
    window_volume = int(np.prod(np.minimum(2 * radius_cells + 1, A.shape)))
    structure = adjacency_structure(A.dim, adjacency)
    for s in sources:
        x = graph.centers[s]
        if window_volume <= _DENSE_WINDOW_LIMIT:
            for delta, cell in _nearest_other_dense(A, graph.cells[s], x, c, radius_cells, structure):
                cand.append((delta, int(s), graph.index_of(cell)))
            continue
        a, b = np.searchsorted(first, [x[0] - c, x[0] + c], side="left")
        d2 = ((graph.centers[a:b] - x) ** 2).sum(axis=1)
        local = np.flatnonzero(d2 < c * c)
        if len(local) < 2:
            continue
        block = graph.adj[a:b][:, a:b]
        sub = block[local][:, local]
        _, lab = csgraph.connected_components(sub, directed=False)
        me = lab[np.searchsorted(local, s - a)]
        for delta, k in _banded_nearest(d2[local], lab + 1, me + 1, A.h):
            cand.append((delta, int(s), int(a + local[k])))
    result = WitnessResult(False, c, [], len(sources), len(cand), min_pairs)
    if not cand:
        return result
    deltas = np.array([p[0] for p in cand])
    chain = halving_chain(deltas)
    chain = chain[-N:] if len(chain) > N else chain
    for k in chain:
        delta, s, t = cand[k]
        eps = float(minimax_sweep(graph, s, [t])[t])
        if eps < c:
            raise InvariantError("witness pair connects inside the ball", eps=eps, c=c)
        result.pairs.append(LcRecord(graph.centers[s].tolist(), graph.centers[t].tolist(), delta, eps))
    result.found = len(result.pairs) >= min_pairs
    return result


# -- Hausdorff limits --------------------------------------------------

@dataclass
class CauchyReport:
    distances: list
    ratio: float
    residual: Optional[float]
    limit: VoxelSet

    def to_dict(self):
        return {"distances": self.distances, "ratio": self.ratio, "residual": self.residual,
                "limit": self.limit.geometry() | {"occupied": self.limit.count}}


def hausdorff_cauchy_limit(seq: Sequence[VoxelSet]) -> CauchyReport:
    """Successive Hausdorff distances, a fitted geometric ratio, and the last set as limit proxy.

    The ratio is the least-squares slope of log-distance against index over the
    positive distances (0 when every distance is 0). The residual bound is
    ``last / (1 - ratio)``.
    """
    if len(seq) < 2:
        raise DomainError("need at least two sets")
    for s in seq[1:]:
        seq[0].require_same_geometry(s)
    dists = [hausdorff_distance(a, b) for a, b in zip(seq, seq[1:])]
    pos = [(i, d) for i, d in enumerate(dists) if d > 0]
    if not pos:
        ratio = 0.0
    elif len(pos) == 1:
        ratio = 0.0 if dists[-1] == 0 else 1.0
    else:
        i, d = np.array(pos).T
        slope = np.polyfit(i, np.log(d), 1)[0]
        ratio = float(np.exp(slope))
    last = dists[-1]
    if last > 0 and ratio >= 1:
        raise GuardError("not Cauchy at this resolution", distances=dists, ratio=ratio)
    residual = 0.0 if last == 0 else last / (1 - ratio)
    return CauchyReport(dists, ratio, residual, seq[-1])
