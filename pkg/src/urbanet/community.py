"""Leiden community detection with resolution-scaled weighted modularity.

Quality convention: self-loop weight counts once in the total weight and once
in a community's internal weight; node strength counts it twice so that
contracting a community into a single node leaves the quality of any coarser
partition unchanged. That exactness is what keeps the quality trace of the
local-move / refine / aggregate cycle non-decreasing.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass

from .inet import INet

# a full pass that improves quality by less than this has converged
CONVERGENCE_EPS = 1e-10
# gains closer than this are treated as ties (lowest community id wins)
TIE_EPS = 1e-14


@dataclass
class _Graph:
    n: int
    neighbors: list[list[tuple[int, float]]]  # excludes self-loops
    loops: list[float]
    strength: list[float]
    total_weight: float


def _graph_from_inet(net: INet) -> tuple[_Graph, list[str]]:
    nodes = sorted(net.nodes)
    index = {node: i for i, node in enumerate(nodes)}
    neighbors: list[list[tuple[int, float]]] = [[] for _ in nodes]
    loops = [0.0] * len(nodes)
    for (a, b), w in sorted(net.edges.items()):
        i, j = index[a], index[b]
        neighbors[i].append((j, float(w)))
        neighbors[j].append((i, float(w)))
    for a, w in net.self_loops.items():
        loops[index[a]] += float(w)
    strength = [sum(w for _, w in neighbors[i]) + 2.0 * loops[i] for i in range(len(nodes))]
    total = sum(w for _, w in net.edges.items()) + sum(net.self_loops.values())
    return _Graph(n=len(nodes), neighbors=neighbors, loops=loops, strength=strength,
                  total_weight=float(total)), nodes


def _quality(g: _Graph, comm: list[int], gamma: float) -> float:
    W = g.total_weight
    if W <= 0:
        return 0.0
    internal: dict[int, float] = {}
    strength_sum: dict[int, float] = {}
    for v in range(g.n):
        c = comm[v]
        strength_sum[c] = strength_sum.get(c, 0.0) + g.strength[v]
        internal[c] = internal.get(c, 0.0) + g.loops[v]
        for u, w in g.neighbors[v]:
            if u > v and comm[u] == c:
                internal[c] = internal.get(c, 0.0) + w
    q = 0.0
    for c, a_c in strength_sum.items():
        q += internal.get(c, 0.0) / W - gamma * (a_c / (2.0 * W)) ** 2
    return q


def modularity(net: INet, partition: dict, gamma: float = 1.0) -> float:
    """Weighted modularity of a partition (mapping node -> community label)."""
    g, nodes = _graph_from_inet(net)
    missing = [n for n in nodes if n not in partition]
    if missing:
        raise ValueError(f"partition missing {len(missing)} nodes, e.g. {missing[0]!r}")
    labels = {}
    comm = []
    for node in nodes:
        comm.append(labels.setdefault(partition[node], len(labels)))
    return _quality(g, comm, gamma)


def _gain(g: _Graph, gamma: float, w_to_new: float, w_to_old: float,
          k_v: float, a_new: float, a_old_rest: float) -> float:
    W = g.total_weight
    return (w_to_new - w_to_old) / W - gamma * 2.0 * k_v * (a_new - a_old_rest) / (2.0 * W) ** 2


def _choose_improving(options: list[tuple[int, float]], rng: random.Random) -> tuple[int, float]:
    """Pick one improving move, weighted by exp(gain / theta) with theta set
    from the best gain. Near-greedy, but different seeds can leave different
    basins; exact gain ties collapse to the lowest community id because the
    options arrive sorted by id and share a weight."""
    best_gain = max(gain for _, gain in options)
    if len(options) == 1:
        return options[0]
    theta = best_gain / 3.0
    weights = [math.exp((gain - best_gain) / theta) for _, gain in options]
    pick = rng.random() * sum(weights)
    acc = 0.0
    for (c, gain), w in zip(options, weights):
        acc += w
        if pick <= acc:
            return c, gain
    return options[-1]


def _local_move(g: _Graph, comm: list[int], gamma: float, rng: random.Random) -> bool:
    a: dict[int, float] = {}
    for v in range(g.n):
        a[comm[v]] = a.get(comm[v], 0.0) + g.strength[v]
    next_free = max(a) + 1

    order = list(range(g.n))
    rng.shuffle(order)
    queue = deque(order)
    queued = [True] * g.n
    moved_any = False
    while queue:
        v = queue.popleft()
        queued[v] = False
        c_old = comm[v]
        w_to: dict[int, float] = {}
        for u, w in g.neighbors[v]:
            cu = comm[u]
            w_to[cu] = w_to.get(cu, 0.0) + w
        w_old = w_to.get(c_old, 0.0)
        a_old_rest = a[c_old] - g.strength[v]
        k_v = g.strength[v]

        candidates = sorted(c for c in w_to if c != c_old)
        if a_old_rest > 0.0:  # splitting off can pay when the rest is heavy
            candidates.append(next_free)
        improving: list[tuple[int, float]] = []
        for c in candidates:
            gain = _gain(g, gamma, w_to.get(c, 0.0), w_old, k_v, a.get(c, 0.0), a_old_rest)
            if gain > TIE_EPS:
                improving.append((c, gain))
        best_c, best_gain = (c_old, 0.0) if not improving else _choose_improving(improving, rng)
        if best_c != c_old:
            moved_any = True
            a[c_old] = a_old_rest
            if a[c_old] == 0.0:
                del a[c_old]
            a[best_c] = a.get(best_c, 0.0) + k_v
            comm[v] = best_c
            if best_c == next_free:
                next_free += 1
            for u, _ in g.neighbors[v]:
                if comm[u] != best_c and not queued[u]:
                    queue.append(u)
                    queued[u] = True
    return moved_any


def _refine(g: _Graph, comm: list[int], gamma: float, rng: random.Random) -> list[int]:
    """Split each community into well-connected refined parts by greedily
    merging singleton nodes within their parent community."""
    ref = list(range(g.n))
    a_ref = list(g.strength)
    size = [1] * g.n

    by_parent: dict[int, list[int]] = {}
    for v in range(g.n):
        by_parent.setdefault(comm[v], []).append(v)

    for parent in sorted(by_parent):
        members = by_parent[parent]
        rng.shuffle(members)
        for v in members:
            if size[ref[v]] > 1:
                continue
            w_to: dict[int, float] = {}
            for u, w in g.neighbors[v]:
                if comm[u] == parent and ref[u] != ref[v]:
                    w_to[ref[u]] = w_to.get(ref[u], 0.0) + w
            best_c, best_gain = ref[v], 0.0
            for c in sorted(w_to):
                gain = _gain(g, gamma, w_to[c], 0.0, g.strength[v], a_ref[c], a_ref[ref[v]] - g.strength[v])
                if gain > best_gain + TIE_EPS:
                    best_c, best_gain = c, gain
            if best_c != ref[v]:
                size[best_c] += 1
                size[ref[v]] -= 1
                a_ref[best_c] += g.strength[v]
                a_ref[ref[v]] -= g.strength[v]
                ref[v] = best_c
    return ref


def _aggregate(g: _Graph, comm: list[int], ref: list[int]) -> tuple[_Graph, list[int], list[int]]:
    """Contract refined communities into nodes. Returns the aggregate graph,
    the node->aggregate mapping, and the parent community of each aggregate
    node (the starting partition for the next pass)."""
    compact: dict[int, int] = {}
    for v in range(g.n):  # node order fixes aggregate ids deterministically
        compact.setdefault(ref[v], len(compact))
    m = len(compact)
    node_of = [compact[ref[v]] for v in range(g.n)]

    loops = [0.0] * m
    parent = [0] * m
    edge_w: dict[tuple[int, int], float] = {}
    for v in range(g.n):
        nv = node_of[v]
        parent[nv] = comm[v]
        loops[nv] += g.loops[v]
        for u, w in g.neighbors[v]:
            if u > v:
                nu = node_of[u]
                if nu == nv:
                    loops[nv] += w
                else:
                    key = (nv, nu) if nv < nu else (nu, nv)
                    edge_w[key] = edge_w.get(key, 0.0) + w

    neighbors: list[list[tuple[int, float]]] = [[] for _ in range(m)]
    for (i, j), w in sorted(edge_w.items()):
        neighbors[i].append((j, w))
        neighbors[j].append((i, w))
    strength = [sum(w for _, w in neighbors[i]) + 2.0 * loops[i] for i in range(m)]
    agg = _Graph(n=m, neighbors=neighbors, loops=loops, strength=strength,
                 total_weight=g.total_weight)
    return agg, node_of, parent


def _converged_run(g0: _Graph, gamma: float, rng: random.Random) -> tuple[list[int], list[float]]:
    """One full Leiden run: iterate until an iteration improves quality by
    less than the convergence threshold.

    Each iteration descends through local-move / refine / aggregate levels and
    then restarts from the original graph with the flattened partition, so
    individual nodes can still relocate after earlier merges.
    """
    membership = list(range(g0.n))
    trace: list[float] = [_quality(g0, membership, gamma)]
    q_prev = trace[0]
    for _ in range(100):  # safety cap; convergence normally stops much earlier
        g = g0
        comm = list(membership)
        assignment = list(range(g0.n))  # original node -> current aggregate node
        while True:
            _local_move(g, comm, gamma, rng)
            trace.append(_quality(g, comm, gamma))
            if len(set(comm)) == g.n:  # nothing merged at this level
                break
            ref = _refine(g, comm, gamma, rng)
            new_g, node_of, comm = _aggregate(g, comm, ref)
            assignment = [node_of[a] for a in assignment]
            if new_g.n == g.n:  # refinement kept singletons: no contraction
                g = new_g
                break
            g = new_g
        membership = [comm[assignment[v]] for v in range(g0.n)]
        q_now = trace[-1]
        if q_now - q_prev < CONVERGENCE_EPS:
            break
        q_prev = q_now
    return membership, trace


def leiden_partition(
    net: INet,
    gamma: float = 1.0,
    seed: int = 0,
    n_restarts: int = 10,
) -> tuple[dict[str, int], float, list[float]]:
    """Best of `n_restarts` converged Leiden runs with rng streams derived
    from the seed (local moves sample among improving candidates, so restarts
    explore different basins). Returns (membership, final modularity, quality
    trace of the winning run); zone labels are canonical, numbered by size
    descending with ties broken by smallest member.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if not net.nodes:
        raise ValueError("empty network")
    if n_restarts < 1:
        raise ValueError("n_restarts must be >= 1")
    g0, names = _graph_from_inet(net)

    membership: list[int] = []
    trace: list[float] = []
    final_q = -math.inf
    for attempt in range(n_restarts):
        rng = random.Random(seed * 1_000_003 + attempt)
        candidate, cand_trace = _converged_run(g0, gamma, rng)
        if cand_trace[-1] > final_q + 1e-12:
            membership, trace, final_q = candidate, cand_trace, cand_trace[-1]

    membership_by_name = {names[v]: membership[v] for v in range(len(names))}

    groups: dict[int, list[str]] = {}
    for node, label in membership_by_name.items():
        groups.setdefault(label, []).append(node)
    ordered = sorted(groups.values(), key=lambda ms: (-len(ms), min(ms)))
    relabel = {min(ms): i for i, ms in enumerate(ordered)}
    canonical = {}
    for ms in ordered:
        zone = relabel[min(ms)]
        for node in ms:
            canonical[node] = zone
    return canonical, final_q, trace
