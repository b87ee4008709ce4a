"""Undirected connected graphs, generators, and the edge-list file format."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass


@dataclass(frozen=True)
class Topology:
    """A validated, connected, undirected graph.

    Attributes:
        node_count: Number of nodes, ids 0 .. node_count-1.
        edges: Deduplicated edges as sorted (u, v) pairs with u < v.
        neighbors: Per-node sorted neighbor tuples.
        diameter: Longest shortest path; 0 for a single node.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...]
    neighbors: tuple[tuple[int, ...], ...]
    diameter: int


def bfs_distances(neighbors: tuple[tuple[int, ...], ...], source: int) -> list[int]:
    """Hop distances from ``source``; -1 marks unreachable nodes."""
    dist = [-1] * len(neighbors)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in neighbors[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def build(edge_list: list[tuple[int, int]], node_count: int) -> Topology:
    """Validates an edge list and precomputes adjacency and diameter.

    Args:
        edge_list: Undirected edges; duplicates are merged.
        node_count: Number of nodes (>= 1).

    Returns:
        The Topology.

    Raises:
        ValueError: On self-loops, out-of-range ids, or a disconnected graph.
    """
    if node_count < 1:
        raise ValueError(f"node_count must be >= 1, got {node_count}")
    seen: set[tuple[int, int]] = set()
    for u, v in edge_list:
        if u == v:
            raise ValueError(f"self-loop at node {u}")
        if not (0 <= u < node_count and 0 <= v < node_count):
            raise ValueError(f"edge ({u}, {v}) out of range for {node_count} nodes")
        seen.add((u, v) if u < v else (v, u))
    edges = tuple(sorted(seen))
    adj: list[list[int]] = [[] for _ in range(node_count)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    neighbors = tuple(tuple(sorted(a)) for a in adj)
    dist0 = bfs_distances(neighbors, 0)
    if min(dist0) < 0:
        raise ValueError("graph is not connected")
    diameter = 0
    for s in range(node_count):
        diameter = max(diameter, max(bfs_distances(neighbors, s)))
    return Topology(node_count=node_count, edges=edges, neighbors=neighbors, diameter=diameter)


KINDS = ("line", "star", "clique", "ring", "random_connected")


def generate(
    kind: str,
    size: int,
    seed: int | None = None,
    extra_edge_probability: float = 0.1,
) -> Topology:
    """Builds one of the standard topologies.

    Args:
        kind: One of line, star, clique, ring, random_connected.
        size: Node count (>= 1; star needs >= 2 to have a hub).
        seed: Required for random_connected; ignored otherwise.
        extra_edge_probability: Chance to add each non-tree edge in
            random_connected.

    Returns:
        The Topology.
    """
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    if kind == "line":
        edges = [(i, i + 1) for i in range(size - 1)]
    elif kind == "star":
        if size < 2:
            raise ValueError("star needs at least 2 nodes")
        edges = [(0, i) for i in range(1, size)]
    elif kind == "clique":
        edges = [(u, v) for u in range(size) for v in range(u + 1, size)]
    elif kind == "ring":
        if size <= 2:
            edges = [(i, i + 1) for i in range(size - 1)]
        else:
            edges = [(i, (i + 1) % size) for i in range(size)]
    elif kind == "random_connected":
        if seed is None:
            raise ValueError("random_connected requires a seed")
        edges = _random_connected_edges(size, seed, extra_edge_probability)
    else:
        raise ValueError(f"unknown topology kind {kind!r}")
    return build(edges, size)


def _random_connected_edges(
    size: int, seed: int, extra_edge_probability: float
) -> list[tuple[int, int]]:
    # Uniform labeled spanning tree via a random parent sequence, then
    # independent extra edges.
    rng = random.Random(seed)
    edges: list[tuple[int, int]] = []
    if size >= 2:
        order = list(range(size))
        rng.shuffle(order)
        for i in range(1, size):
            j = rng.randrange(i)
            edges.append((order[j], order[i]))
    tree = {(min(u, v), max(u, v)) for u, v in edges}
    for u in range(size):
        for v in range(u + 1, size):
            if (u, v) not in tree and rng.random() < extra_edge_probability:
                edges.append((u, v))
    return edges


def format_topology(topology: Topology) -> str:
    """Serializes to the edge-list text format: header 'n <count>', then 'u v' lines."""
    lines = [f"n {topology.node_count}"]
    lines.extend(f"{u} {v}" for u, v in topology.edges)
    return "\n".join(lines) + "\n"


def parse_topology(text: str) -> Topology:
    """Parses the edge-list text format produced by :func:`format_topology`.

    Raises:
        ValueError: On malformed header or edge lines, or an invalid graph.
    """
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValueError("empty topology file")
    header = lines[0].split()
    if len(header) != 2 or header[0] != "n":
        raise ValueError(f"bad header {lines[0]!r}, expected 'n <count>'")
    node_count = int(header[1])
    edges: list[tuple[int, int]] = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"bad edge line {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return build(edges, node_count)


def load_topology(path: str) -> Topology:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_topology(fh.read())


def save_topology(topology: Topology, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_topology(topology))
