"""Directed graph container, edge-list ingestion, synthetic generators, and
the degree-1 fan merging preprocessor."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

__all__ = [
    "Graph",
    "VertexGroups",
    "LoadResult",
    "EdgeListError",
    "load_edge_list",
    "format_edge_list",
    "gen_erdos_renyi",
    "gen_power_law",
    "merge_degree_one",
    "expand_permutation",
]


class EdgeListError(ValueError):
    """Raised when an edge-list stream cannot be parsed."""


class Graph:
    """Immutable simple directed graph.

    Arcs are stored as a read-only ``(m, 2)`` int64 array sorted by
    ``(u, v)``; in/out adjacency are CSR views derived from the arcs, so the
    two are consistent by construction.  Safe for concurrent readers.
    """

    __slots__ = (
        "n",
        "arcs",
        "_arc_codes",
        "_out_indptr",
        "_out_indices",
        "_in_indptr",
        "_in_indices",
        "_degrees",
    )

    def __init__(self, n: int, arcs: Iterable[tuple[int, int]] | np.ndarray = ()):
        if n < 0:
            raise ValueError(f"vertex count must be non-negative, got {n}")
        arr = np.asarray(list(arcs) if not isinstance(arcs, np.ndarray) else arcs,
                         dtype=np.int64)
        if arr.size == 0:
            arr = np.empty((0, 2), dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("arcs must be pairs (u, v)")
        if arr.size:
            if arr.min() < 0 or arr.max() >= n:
                raise ValueError("arc endpoint out of range [0, n)")
            if np.any(arr[:, 0] == arr[:, 1]):
                raise ValueError("self-loops are not allowed")
        codes = arr[:, 0] * n + arr[:, 1]
        order = np.argsort(codes, kind="stable")
        codes = codes[order]
        if codes.size and np.any(np.diff(codes) == 0):
            raise ValueError("duplicate arcs are not allowed")
        arr = arr[order]

        self.n = int(n)
        self.arcs = arr
        self._arc_codes = codes
        self._out_indptr, self._out_indices = _build_csr(n, arr[:, 0], arr[:, 1])
        self._in_indptr, self._in_indices = _build_csr(n, arr[:, 1], arr[:, 0])
        self._degrees = np.bincount(arr.ravel(), minlength=n).astype(np.int64)
        for a in (self.arcs, self._arc_codes, self._out_indptr, self._out_indices,
                  self._in_indptr, self._in_indices, self._degrees):
            a.flags.writeable = False

    @classmethod
    def from_undirected(cls, n: int, pairs: np.ndarray | Iterable[tuple[int, int]]) -> "Graph":
        """Build a bidirected graph: every undirected pair yields both arcs."""
        arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs,
                         dtype=np.int64)
        if arr.size == 0:
            return cls(n)
        arr = arr.reshape(-1, 2)
        lo = np.minimum(arr[:, 0], arr[:, 1])
        hi = np.maximum(arr[:, 0], arr[:, 1])
        uniq = np.unique(lo * n + hi)
        lo, hi = uniq // n, uniq % n
        both = np.concatenate([np.stack([lo, hi], axis=1), np.stack([hi, lo], axis=1)])
        return cls(n, both)

    @property
    def arc_count(self) -> int:
        return int(self.arcs.shape[0])

    def out_neighbors(self, v: int) -> np.ndarray:
        """Sorted successors of ``v``."""
        return self._out_indices[self._out_indptr[v]:self._out_indptr[v + 1]]

    def in_neighbors(self, v: int) -> np.ndarray:
        """Sorted predecessors of ``v``."""
        return self._in_indices[self._in_indptr[v]:self._in_indptr[v + 1]]

    def has_arc(self, u: int, v: int) -> bool:
        code = u * self.n + v
        i = np.searchsorted(self._arc_codes, code)
        return bool(i < self._arc_codes.size and self._arc_codes[i] == code)

    def total_degrees(self) -> np.ndarray:
        """In-degree + out-degree per vertex (read-only array)."""
        return self._degrees

    def undirected_edges(self) -> np.ndarray:
        """Distinct undirected edges as a ``(k, 2)`` array with u < v, sorted."""
        if self.arc_count == 0:
            return np.empty((0, 2), dtype=np.int64)
        lo = np.minimum(self.arcs[:, 0], self.arcs[:, 1])
        hi = np.maximum(self.arcs[:, 0], self.arcs[:, 1])
        uniq = np.unique(lo * self.n + hi)
        return np.stack([uniq // self.n, uniq % self.n], axis=1)

    def __repr__(self) -> str:  # pragma: no cover
        return f"Graph(n={self.n}, arcs={self.arc_count})"


def _build_csr(n: int, src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((dst, src))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, dst[order]


class LoadResult(NamedTuple):
    graph: Graph
    self_loops_dropped: int
    duplicates_dropped: int


def load_edge_list(source: str | Iterable[str]) -> LoadResult:
    """Parse whitespace-separated ``u v`` lines into a Graph.

    Lines starting with ``#`` are comments.  An optional first content line
    ``n <int>`` declares the vertex count; otherwise it is one past the
    largest id seen.  Self-loops and duplicate arcs are dropped and counted.
    """
    lines = source.splitlines() if isinstance(source, str) else source
    declared_n: int | None = None
    seen_content = False
    pairs: list[tuple[int, int]] = []
    max_id = -1
    self_loops = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if not seen_content and tokens[0] == "n" and len(tokens) == 2:
            try:
                declared_n = int(tokens[1])
            except ValueError:
                raise EdgeListError(f"line {lineno}: bad vertex count {tokens[1]!r}")
            if declared_n < 0:
                raise EdgeListError(f"line {lineno}: negative vertex count")
            seen_content = True
            continue
        seen_content = True
        if len(tokens) != 2:
            raise EdgeListError(f"line {lineno}: expected two ids, got {line!r}")
        try:
            u, v = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise EdgeListError(f"line {lineno}: non-integer id in {line!r}")
        if u < 0 or v < 0:
            raise EdgeListError(f"line {lineno}: negative id in {line!r}")
        if declared_n is not None and (u >= declared_n or v >= declared_n):
            raise EdgeListError(
                f"line {lineno}: id out of declared range [0, {declared_n})")
        if u == v:
            self_loops += 1
            continue
        pairs.append((u, v))
        max_id = max(max_id, u, v)

    n = declared_n if declared_n is not None else max_id + 1
    unique = sorted(set(pairs))
    graph = Graph(n, unique)
    return LoadResult(graph, self_loops, len(pairs) - len(unique))


def format_edge_list(g: Graph) -> str:
    """Serialize a Graph in the same text format, with an ``n`` header."""
    out = [f"n {g.n}"]
    out.extend(f"{u} {v}" for u, v in g.arcs)
    return "\n".join(out) + "\n"


def gen_erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """Random graph: each unordered pair is kept with probability ``p`` and
    yields both arcs.  Deterministic per seed."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability must be in [0, 1], got {p}")
    if n < 0:
        raise ValueError("n must be non-negative")
    n_pairs = n * (n - 1) // 2
    if n_pairs == 0 or p == 0.0:
        return Graph(n)
    # offsets[u] = number of pairs (a, b), a < b, with a < u
    us = np.arange(n, dtype=np.int64)
    offsets = us * n - us * (us + 1) // 2
    if p == 1.0:
        codes = np.arange(n_pairs, dtype=np.int64)
    else:
        # Bernoulli process over pair codes via geometric gap skipping.
        rng = np.random.default_rng(seed)
        chunks: list[np.ndarray] = []
        pos = -1
        est = int(n_pairs * p + 10 * np.sqrt(n_pairs * p * (1 - p)) + 16)
        while pos < n_pairs:
            gaps = rng.geometric(p, size=est)
            hits = pos + np.cumsum(gaps)
            chunks.append(hits)
            pos = int(hits[-1])
        codes = np.concatenate(chunks)
        codes = codes[codes < n_pairs]
    u = np.searchsorted(offsets, codes, side="right") - 1
    v = codes - offsets[u] + u + 1
    return Graph.from_undirected(n, np.stack([u, v], axis=1))


def gen_power_law(n: int, gamma: float, seed: int) -> Graph:
    """Power-law graph: degrees drawn from a truncated discrete power law
    (support 1..n-1, exponent ``gamma``) by inverse-transform sampling, paired
    with the configuration model; self-loops and multi-edges are dropped.
    Deterministic per seed."""
    if gamma <= 1.0:
        raise ValueError(f"exponent must exceed 1, got {gamma}")
    if n < 1:
        raise ValueError("n must be at least 1")
    if n == 1:
        return Graph(1)
    rng = np.random.default_rng(seed)
    support = np.arange(1, n, dtype=np.float64)
    weights = support ** (-gamma)
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    degrees = np.searchsorted(cdf, rng.random(n), side="right") + 1
    if degrees.sum() % 2 == 1:
        degrees[0] += 1 if degrees[0] < n - 1 else -1
    stubs = np.repeat(np.arange(n, dtype=np.int64), degrees)
    rng.shuffle(stubs)
    a, b = stubs[0::2], stubs[1::2]
    keep = a != b
    return Graph.from_undirected(n, np.stack([a[keep], b[keep]], axis=1))


@dataclass(frozen=True)
class VertexGroups:
    """Mapping from merged-graph vertex ids to the original vertices each
    one stands for.  Groups with several members are degree-1 fans sharing
    one sole neighbor and arc direction, so they are interchangeable in any
    ordering."""

    merged_to_members: tuple[tuple[int, ...], ...]
    original_n: int

    def __post_init__(self):
        seen: list[int] = []
        for members in self.merged_to_members:
            if not members:
                raise ValueError("empty vertex group")
            seen.extend(members)
        if sorted(seen) != list(range(self.original_n)):
            raise ValueError("groups must partition the original vertex set")

    @property
    def merged_n(self) -> int:
        return len(self.merged_to_members)


def merge_degree_one(g: Graph) -> tuple[Graph, VertexGroups]:
    """Collapse every set of total-degree-1 vertices that hang off one common
    neighbor with the same arc direction into a single representative.

    All other vertices map to singleton groups.  Merged ids are assigned in
    order of each group's smallest original member, so fan-free graphs come
    back unchanged.
    """
    degrees = g.total_degrees()
    fan_key: dict[tuple[int, bool], list[int]] = {}
    singles: list[int] = []
    for v in range(g.n):
        if degrees[v] == 1:
            out = g.out_neighbors(v)
            if out.size == 1:
                fan_key.setdefault((int(out[0]), True), []).append(v)
            else:
                fan_key.setdefault((int(g.in_neighbors(v)[0]), False), []).append(v)
        else:
            singles.append(v)

    groups = [tuple(sorted(members)) for members in fan_key.values()]
    groups.extend((v,) for v in singles)
    groups.sort(key=lambda m: m[0])

    old_to_new = np.empty(g.n, dtype=np.int64)
    for new_id, members in enumerate(groups):
        for v in members:
            old_to_new[v] = new_id
    if g.arc_count:
        mapped = old_to_new[g.arcs]
        mapped = np.unique(mapped[:, 0] * len(groups) + mapped[:, 1])
        arcs = np.stack([mapped // len(groups), mapped % len(groups)], axis=1)
    else:
        arcs = np.empty((0, 2), dtype=np.int64)
    merged = Graph(len(groups), arcs)
    return merged, VertexGroups(tuple(groups), g.n)


def expand_permutation(perm_merged: np.ndarray | Iterable[int],
                       groups: VertexGroups, seed: int) -> np.ndarray:
    """Expand a merged-graph permutation to the original vertex set, placing
    each group's members consecutively in a seeded-random order."""
    perm = np.asarray(list(perm_merged) if not isinstance(perm_merged, np.ndarray)
                      else perm_merged, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(groups.merged_n)):
        raise ValueError("permutation does not match the merged vertex set")
    rng = np.random.default_rng(seed)
    out = np.empty(groups.original_n, dtype=np.int64)
    pos = 0
    for gid in perm:
        members = np.asarray(groups.merged_to_members[gid], dtype=np.int64)
        out[pos:pos + members.size] = members[rng.permutation(members.size)]
        pos += members.size
    return out
