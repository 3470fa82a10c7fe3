"""Symbolic layer: transition matrices and admissible finite words.

Symbols are 1-indexed at every public boundary and stored 0-indexed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, GuardError

DEFAULT_WORD_CAP = 2**24


@dataclass(frozen=True)
class TransitionMatrix:
    """Square 0/1 matrix restricting which symbol may follow which."""

    entries: tuple

    def __post_init__(self):
        rows = tuple(tuple(int(bool(v)) for v in row) for row in self.entries)
        m = len(rows)
        if m < 1 or any(len(r) != m for r in rows):
            raise DomainError("transition matrix must be square with m >= 1", shape=[len(r) for r in rows])
        for row in self.entries:
            for v in row:
                if v not in (0, 1, True, False):
                    raise DomainError("transition matrix entries must be 0 or 1", value=repr(v))
        object.__setattr__(self, "entries", rows)

    @classmethod
    def from_array(cls, array) -> "TransitionMatrix":
        return cls(tuple(tuple(int(v) for v in row) for row in np.asarray(array)))

    @classmethod
    def full(cls, m: int) -> "TransitionMatrix":
        return cls(tuple((1,) * m for _ in range(m)))

    @classmethod
    def block_diagonal(cls, *sizes: int) -> "TransitionMatrix":
        m = sum(sizes)
        a = np.zeros((m, m), dtype=int)
        start = 0
        for s in sizes:
            a[start:start + s, start:start + s] = 1
            start += s
        return cls.from_array(a)

    @property
    def m(self) -> int:
        return len(self.entries)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64)

    def __getitem__(self, ij):
        """1-indexed lookup ``M[i, j]``."""
        i, j = ij
        check_symbol(self, i)
        check_symbol(self, j)
        return self.entries[i - 1][j - 1]

    def to_json(self) -> list:
        return [list(r) for r in self.entries]

    def restrict(self, symbols: Iterable[int]) -> "TransitionMatrix":
        """Submatrix on the given 1-indexed symbols (in the given order)."""
        idx = [s - 1 for s in symbols]
        for s in symbols:
            check_symbol(self, s)
        return TransitionMatrix.from_array(self.array[np.ix_(idx, idx)])

    def zero_rows(self) -> list[int]:
        return [i + 1 for i, r in enumerate(self.entries) if not any(r)]

    def zero_columns(self) -> list[int]:
        a = self.array
        return [j + 1 for j in range(self.m) if not a[:, j].any()]


def check_symbol(M: TransitionMatrix, s) -> None:
    if isinstance(s, bool) or not isinstance(s, (int, np.integer)) or not 1 <= s <= M.m:
        raise DomainError(f"symbol {s!r} out of range 1..{M.m}", symbol=repr(s))


def is_admissible(M: TransitionMatrix, w: Sequence[int]) -> bool:
    for s in w:
        check_symbol(M, s)
    return all(M.entries[a - 1][b - 1] for a, b in zip(w, w[1:]))


def follower_set(M: TransitionMatrix, s: int) -> frozenset:
    check_symbol(M, s)
    return frozenset(j + 1 for j, v in enumerate(M.entries[s - 1]) if v)


def count_admissible(M: TransitionMatrix, n: int) -> int:
    """Number of admissible words of length ``n`` (exact integer arithmetic)."""
    if n < 0:
        raise DomainError("word length must be >= 0", n=n)
    if n == 0:
        return 1
    a = [[int(v) for v in row] for row in M.entries]
    counts = [1] * M.m  # words ending in each symbol
    for _ in range(n - 1):
        counts = [sum(counts[i] for i in range(M.m) if a[i][j]) for j in range(M.m)]
    return sum(counts)


def admissible_words(M: TransitionMatrix, n: int, cap: int = DEFAULT_WORD_CAP) -> list:
    """All admissible words of length ``n`` in lexicographic order.

    Raises :class:`GuardError` when the count would exceed ``cap``.
    """
    total = count_admissible(M, n)
    if total > cap:
        raise GuardError(f"{total} admissible words of length {n} exceed cap {cap}", count=total, cap=cap)
    if n == 0:
        return [()]
    followers = [sorted(follower_set(M, s)) for s in range(1, M.m + 1)]
    words = [(s,) for s in range(1, M.m + 1)]
    for _ in range(n - 1):
        words = [w + (t,) for w in words for t in followers[w[-1] - 1]]
    return words


def iter_admissible_words(M: TransitionMatrix, n: int):
    """Lazy lexicographic enumeration, no cap."""
    if n == 0:
        yield ()
        return
    followers = [sorted(follower_set(M, s)) for s in range(1, M.m + 1)]

    def extend(w):
        if len(w) == n:
            yield w
            return
        for t in followers[w[-1] - 1]:
            yield from extend(w + (t,))

    for s in range(1, M.m + 1):
        yield from extend((s,))


def subshift_nonempty(M: TransitionMatrix):
    """Return ``(True, cycle)`` if the graph of M has a cycle, else ``(False, None)``.

    The cycle is a tuple of 1-indexed symbols ``(s0, ..., sk, s0)``; a self loop
    is reported as ``(s, s)``. The search prefers self loops, then the
    lexicographically first cycle found by depth-first search.
    """
    a = M.array
    for i in range(M.m):
        if a[i, i]:
            return True, (i + 1, i + 1)
    WHITE, GREY, BLACK = 0, 1, 2
    colour = [WHITE] * M.m
    for root in range(M.m):
        if colour[root] != WHITE:
            continue
        stack = [(root, iter(np.flatnonzero(a[root])))]
        path = [root]
        colour[root] = GREY
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                colour[node] = BLACK
                stack.pop()
                path.pop()
                continue
            nxt = int(nxt)
            if colour[nxt] == GREY:
                cyc = path[path.index(nxt):] + [nxt]
                return True, tuple(s + 1 for s in cyc)
            if colour[nxt] == WHITE:
                colour[nxt] = GREY
                path.append(nxt)
                stack.append((nxt, iter(np.flatnonzero(a[nxt]))))
    return False, None


def diagnose(M: TransitionMatrix) -> dict:
    """Structural facts about M that the attractor code relies on."""
    ok, cycle = subshift_nonempty(M)
    # symbols from which an infinite admissible path starts
    alive = np.ones(M.m, dtype=bool)
    a = M.array.astype(bool)
    while True:
        nxt = alive & (a & alive[None, :]).any(axis=1)
        if (nxt == alive).all():
            break
        alive = nxt
    return {
        "m": M.m,
        "subshift_nonempty": ok,
        "cycle": list(cycle) if cycle else None,
        "zero_rows": M.zero_rows(),
        "zero_columns": M.zero_columns(),
        "dead_symbols": [i + 1 for i in range(M.m) if not alive[i]],
    }
