"""Downstream uses of a vertex ordering: adjacency-block compression cost and
ordering-derived edge partitioning, with random and greedy partitioners as
baselines."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .locality import check_permutation

__all__ = [
    "EdgePartition",
    "compression_cost",
    "partition_from_order",
    "replication_factor",
    "random_partition",
    "greedy_partition",
    "format_partition_csv",
]


def compression_cost(g: Graph, order, b: int) -> tuple[int, float]:
    """Count the nonempty b-by-b blocks of the reordered adjacency matrix.

    Cell (i, j) is set when there is an arc from the vertex at position i to
    the vertex at position j.  Returns the raw count and its fraction of the
    ceil(n/b)^2 blocks.
    """
    if b < 1:
        raise ValueError("block width must be positive")
    perm = check_permutation(order, g.n)
    if g.n == 0:
        return 0, 0.0
    pos = np.empty(g.n, dtype=np.int64)
    pos[perm] = np.arange(g.n)
    nb = math.ceil(g.n / b)
    if g.arc_count == 0:
        return 0, 0.0
    bi = pos[g.arcs[:, 0]] // b
    bj = pos[g.arcs[:, 1]] // b
    nonzero = int(np.unique(bi * nb + bj).size)
    return nonzero, nonzero / (nb * nb)


@dataclass
class EdgePartition:
    """Assignment of every undirected edge to one of k parts."""

    assignment: dict[tuple[int, int], int]
    k: int

    def __post_init__(self):
        for (u, v), pid in self.assignment.items():
            if not 0 <= pid < self.k:
                raise ValueError(f"part id {pid} out of range [0, {self.k})")
            if u >= v:
                raise ValueError(f"edge key {(u, v)} must satisfy u < v")

    def sizes(self) -> list[int]:
        out = [0] * self.k
        for pid in self.assignment.values():
            out[pid] += 1
        return out


def replication_factor(g: Graph, part: EdgePartition) -> float:
    """Average number of parts each vertex appears in: the summed count of
    distinct endpoint vertices per part, divided by the vertex count."""
    if g.n == 0:
        return 0.0
    endpoint_sets: list[set[int]] = [set() for _ in range(part.k)]
    for (u, v), pid in part.assignment.items():
        endpoint_sets[pid].add(u)
        endpoint_sets[pid].add(v)
    return sum(len(s) for s in endpoint_sets) / g.n


def partition_from_order(g: Graph, order, k: int) -> EdgePartition:
    """Sweep the permutation and hand out each edge at its earlier-positioned
    endpoint, cutting over to the next part on a balanced schedule.

    Part sizes follow the balanced split of the edge count (the first
    ``m mod k`` parts take one extra edge), so all k parts are non-empty
    whenever there are at least k edges.
    """
    if k < 1:
        raise ValueError("partition count must be positive")
    perm = check_permutation(order, g.n)
    edges = g.undirected_edges()
    m = edges.shape[0]
    if m < k:
        raise ValueError(f"cannot split {m} edges into {k} non-empty parts")
    pos = np.empty(g.n, dtype=np.int64)
    pos[perm] = np.arange(g.n)
    early = np.minimum(pos[edges[:, 0]], pos[edges[:, 1]])
    late = np.maximum(pos[edges[:, 0]], pos[edges[:, 1]])
    sweep = np.lexsort((late, early))
    base, extra = divmod(m, k)
    sizes = [base + 1 if i < extra else base for i in range(k)]
    pids = np.repeat(np.arange(k), sizes)
    assignment = {
        (int(edges[e, 0]), int(edges[e, 1])): int(pid)
        for e, pid in zip(sweep, pids)
    }
    return EdgePartition(assignment, k)


def random_partition(g: Graph, k: int, seed: int) -> EdgePartition:
    """Assign every edge independently and uniformly to one of k parts."""
    if k < 1:
        raise ValueError("partition count must be positive")
    edges = g.undirected_edges()
    rng = np.random.default_rng(seed)
    pids = rng.integers(0, k, size=edges.shape[0])
    assignment = {(int(u), int(v)): int(pid) for (u, v), pid in zip(edges, pids)}
    return EdgePartition(assignment, k)


def greedy_partition(g: Graph, k: int, slack: float = 0.1) -> EdgePartition:
    """Stream edges in a fixed order, preferring parts that already hold the
    edge's endpoints (+2 for both, +1 for one) minus a load penalty of
    size/capacity.  Ties go to the least-loaded, then smallest-id part; a
    hard cap of ceil(m/k)*(1+slack) keeps parts from overfilling.
    """
    if k < 1:
        raise ValueError("partition count must be positive")
    edges = g.undirected_edges()
    m = edges.shape[0]
    if m == 0:
        return EdgePartition({}, k)
    capacity = math.ceil(m / k)
    hard_cap = math.ceil(capacity * (1.0 + slack))
    held: list[set[int]] = [set() for _ in range(k)]
    sizes = [0] * k
    assignment: dict[tuple[int, int], int] = {}
    for u, v in edges:
        u, v = int(u), int(v)
        best_pid, best_key = None, None
        for pid in range(k):
            if sizes[pid] >= hard_cap:
                continue
            score = (u in held[pid]) + (v in held[pid]) - sizes[pid] / capacity
            key = (score, -sizes[pid], -pid)
            if best_key is None or key > best_key:
                best_key, best_pid = key, pid
        if best_pid is None:  # all parts at the cap; take the least loaded
            best_pid = int(np.argmin(sizes))
        assignment[(u, v)] = best_pid
        sizes[best_pid] += 1
        held[best_pid].update((u, v))
    return EdgePartition(assignment, k)


def format_partition_csv(part: EdgePartition) -> str:
    lines = ["u,v,part"]
    lines.extend(f"{u},{v},{pid}" for (u, v), pid in sorted(part.assignment.items()))
    return "\n".join(lines) + "\n"
