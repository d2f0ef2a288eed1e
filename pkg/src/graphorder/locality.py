"""Pairwise vertex similarity and the windowed locality score.

The similarity of two distinct vertices is the number of common in-neighbors
(sibling count) plus the number of arcs between them in either direction
(neighbor count).  An ordering's locality score sums the similarity of every
vertex pair whose positions are at most ``w`` apart.
"""
from __future__ import annotations

from typing import Iterable, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .graph import Graph

__all__ = [
    "DENSE_SIMILARITY_CAP",
    "SimilaritySource",
    "MatrixSimilarity",
    "GraphSimilarity",
    "as_similarity",
    "sibling_count",
    "neighbor_count",
    "similarity",
    "dense_similarity",
    "locality_score",
    "candidate_gain",
    "window_set_score",
    "check_permutation",
    "load_permutation",
    "format_permutation",
    "load_similarity_matrix",
    "format_similarity_matrix",
]

# Largest n for which a graph's similarity is materialized as a dense matrix.
DENSE_SIMILARITY_CAP = 2000


def sibling_count(g: Graph, u: int, v: int) -> int:
    """Number of common in-neighbors of two distinct vertices."""
    if u == v:
        raise ValueError("sibling count is undefined for a vertex with itself")
    return int(np.intersect1d(g.in_neighbors(u), g.in_neighbors(v),
                              assume_unique=True).size)


def neighbor_count(g: Graph, u: int, v: int) -> int:
    """Number of arcs between two distinct vertices, in {0, 1, 2}."""
    if u == v:
        raise ValueError("neighbor count is undefined for a vertex with itself")
    return int(g.has_arc(u, v)) + int(g.has_arc(v, u))


def similarity(g: Graph, u: int, v: int) -> int:
    """Pairwise similarity: sibling count plus neighbor count.  Symmetric."""
    return sibling_count(g, u, v) + neighbor_count(g, u, v)


def dense_similarity(g: Graph) -> np.ndarray:
    """Full n-by-n similarity matrix (int64, zero diagonal)."""
    n = g.n
    if g.arc_count == 0:
        return np.zeros((n, n), dtype=np.int64)
    a = sp.csr_matrix(
        (np.ones(g.arc_count, dtype=np.int64), (g.arcs[:, 0], g.arcs[:, 1])),
        shape=(n, n),
    )
    sib = (a.T @ a).toarray()
    np.fill_diagonal(sib, 0)
    adj = a.toarray()
    return sib + adj + adj.T


class SimilaritySource:
    """Supplies integer pair similarities for all vertex pairs."""

    n: int

    def score(self, u: int, v: int) -> int:
        raise NotImplementedError

    def add_scores_of(self, acc: np.ndarray, x: int, sign: int = 1) -> None:
        """Accumulate ``sign * S(x, v)`` into ``acc[v]`` for every v != x."""
        for v in range(self.n):
            if v != x:
                acc[v] += sign * self.score(x, v)

    def scores_against(self, members: Sequence[int]) -> np.ndarray:
        """Vector of summed similarities of every vertex against a set."""
        acc = np.zeros(self.n, dtype=np.int64)
        for u in members:
            self.add_scores_of(acc, int(u))
        return acc


class MatrixSimilarity(SimilaritySource):
    """Similarity backed by an explicit symmetric integer matrix.  The
    diagonal is ignored."""

    def __init__(self, matrix: np.ndarray | Sequence[Sequence[int]]):
        mat = np.array(matrix, dtype=np.int64)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("similarity matrix must be square")
        np.fill_diagonal(mat, 0)
        if mat.size and mat.min() < 0:
            raise ValueError("similarity values must be non-negative")
        if not np.array_equal(mat, mat.T):
            raise ValueError("similarity matrix must be symmetric")
        mat.flags.writeable = False
        self.matrix = mat
        self.n = int(mat.shape[0])

    def score(self, u: int, v: int) -> int:
        if u == v:
            raise ValueError("similarity is undefined for a vertex with itself")
        return int(self.matrix[u, v])

    def add_scores_of(self, acc: np.ndarray, x: int, sign: int = 1) -> None:
        if sign == 1:
            acc += self.matrix[x]
        else:
            acc -= self.matrix[x]

    def scores_against(self, members: Sequence[int]) -> np.ndarray:
        members = np.asarray(members, dtype=np.int64)
        return self.matrix[members].sum(axis=0)


class GraphSimilarity(SimilaritySource):
    """On-demand similarity over a graph, with an optional memo table.

    Used when the graph is too large to materialize densely.  The memo is a
    plain dict keyed by the unordered pair; pre-populate it or guard it with
    a lock if several threads will write concurrently.
    """

    def __init__(self, g: Graph, memo: bool = True):
        self.graph = g
        self.n = g.n
        self._memo: dict[tuple[int, int], int] | None = {} if memo else None
        self._in_sets: dict[int, set[int]] = {}

    def _in_set(self, v: int) -> set[int]:
        s = self._in_sets.get(v)
        if s is None:
            s = set(self.graph.in_neighbors(v).tolist())
            self._in_sets[v] = s
        return s

    def score(self, u: int, v: int) -> int:
        if u == v:
            raise ValueError("similarity is undefined for a vertex with itself")
        key = (u, v) if u < v else (v, u)
        if self._memo is not None:
            cached = self._memo.get(key)
            if cached is not None:
                return cached
        a, b = self._in_set(u), self._in_set(v)
        if len(b) < len(a):
            a, b = b, a
        value = sum(1 for z in a if z in b)
        g = self.graph
        value += int(g.has_arc(u, v)) + int(g.has_arc(v, u))
        if self._memo is not None:
            self._memo[key] = value
        return value

    def add_scores_of(self, acc: np.ndarray, x: int, sign: int = 1) -> None:
        # Nonzero S(x, v) needs v adjacent to x or sharing an in-neighbor.
        g = self.graph
        for u in g.out_neighbors(x):
            acc[u] += sign
        for u in g.in_neighbors(x):
            acc[u] += sign
        for z in g.in_neighbors(x):
            for v in g.out_neighbors(z):
                if v != x:
                    acc[v] += sign


SimilarityLike = Union[Graph, SimilaritySource, np.ndarray, Sequence[Sequence[int]]]


def as_similarity(source: SimilarityLike,
                  dense_cap: int = DENSE_SIMILARITY_CAP) -> SimilaritySource:
    """Coerce a Graph, matrix, or existing source into a SimilaritySource.

    Graphs at or below ``dense_cap`` vertices are materialized densely; larger
    ones are evaluated on demand with a memo table.
    """
    if isinstance(source, SimilaritySource):
        return source
    if isinstance(source, Graph):
        if source.n <= dense_cap:
            return MatrixSimilarity(dense_similarity(source))
        return GraphSimilarity(source)
    return MatrixSimilarity(np.asarray(source))


def check_permutation(order: Sequence[int] | np.ndarray, n: int) -> np.ndarray:
    """Validate and return ``order`` as an int64 bijection on [0, n)."""
    arr = np.asarray(order, dtype=np.int64)
    if arr.shape != (n,) or not np.array_equal(np.sort(arr), np.arange(n)):
        raise ValueError(f"not a permutation of [0, {n})")
    return arr


def _check_partial(order, n: int) -> np.ndarray:
    arr = np.asarray(order, dtype=np.int64)
    if arr.ndim != 1 or arr.size > n:
        raise ValueError(f"expected at most {n} distinct vertex ids")
    if arr.size and (arr.min() < 0 or arr.max() >= n):
        raise ValueError(f"vertex id out of range [0, {n})")
    if np.unique(arr).size != arr.size:
        raise ValueError("ordering repeats a vertex")
    return arr


def locality_score(source: SimilarityLike, order: Sequence[int] | np.ndarray,
                   w: int) -> int:
    """Sum of pair similarities over all position pairs at gap 1..w.

    ``order`` may be a full permutation or any prefix of one (distinct ids).
    """
    if w < 1:
        raise ValueError("window size must be at least 1")
    src = as_similarity(source)
    perm = _check_partial(order, src.n)
    length = perm.size
    if isinstance(src, MatrixSimilarity):
        total = 0
        for gap in range(1, min(w, length - 1) + 1):
            total += int(src.matrix[perm[:-gap], perm[gap:]].sum())
        return total
    total = 0
    for i in range(length):
        for j in range(i + 1, min(i + w, length - 1) + 1):
            total += src.score(int(perm[i]), int(perm[j]))
    return total


def candidate_gain(source: SimilarityLike, recent: Sequence[int] | np.ndarray,
                   v: int) -> int:
    """Summed similarity of ``v`` against the recently placed vertices."""
    src = as_similarity(source)
    recent = np.asarray(recent, dtype=np.int64)
    if np.any(recent == v):
        raise ValueError("candidate vertex is already among the recent ones")
    return int(sum(src.score(int(u), v) for u in recent))


def window_set_score(source: SimilarityLike, members: Sequence[int] | np.ndarray) -> int:
    """Locality contribution of a vertex set occupying one full window:
    the sum of similarities over all unordered pairs, order-free."""
    src = as_similarity(source)
    members = np.asarray(members, dtype=np.int64)
    total = 0
    for i in range(members.size):
        for j in range(i + 1, members.size):
            total += src.score(int(members[i]), int(members[j]))
    return total


def load_permutation(source: str | Iterable[str]) -> np.ndarray:
    """Read a permutation file: one vertex id per line, position order."""
    lines = source.splitlines() if isinstance(source, str) else source
    ids = [int(line.strip()) for line in lines if line.strip()]
    return check_permutation(ids, len(ids))


def format_permutation(order: Sequence[int] | np.ndarray) -> str:
    return "\n".join(str(int(v)) for v in order) + "\n"


def load_similarity_matrix(source: str | Iterable[str]) -> MatrixSimilarity:
    """Read a similarity-matrix fixture: an ``n`` header line, then n rows of
    n integers.  The diagonal is ignored."""
    lines = [ln.strip() for ln in
             (source.splitlines() if isinstance(source, str) else source)]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError("empty similarity matrix")
    n = int(lines[0])
    if len(lines) != n + 1:
        raise ValueError(f"expected {n} matrix rows, got {len(lines) - 1}")
    rows = [[int(tok) for tok in ln.split()] for ln in lines[1:]]
    if any(len(r) != n for r in rows):
        raise ValueError("matrix row length mismatch")
    return MatrixSimilarity(rows)


def format_similarity_matrix(source: MatrixSimilarity | np.ndarray) -> str:
    mat = source.matrix if isinstance(source, MatrixSimilarity) else np.asarray(source)
    out = [str(mat.shape[0])]
    out.extend(" ".join(str(int(x)) for x in row) for row in mat)
    return "\n".join(out) + "\n"
