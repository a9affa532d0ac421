"""Statistical comparators for interest networks plus the per-factor
distance/similarity metrics between regions.

Correlations are delegated to scipy.stats; partition agreement (NMI, Rand,
adjusted Rand) and the factor formulas are computed here because their edge
conventions are part of this package's contract.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .inet import INet, edge_key
from .ingest import Region

FACTORS = (
    "geographic", "population", "income", "education", "employment",
    "vote", "race", "scenes", "venue_categories",
)
SIMILARITY_FACTORS = ("venue_categories",)


class UndefinedCorrelation(ValueError):
    pass


class MetricUnavailable(ValueError):
    """A factor metric could not be computed because context is missing."""


@dataclass(frozen=True)
class FactorMetricSpec:
    factor: str
    kind: str  # "distance" or "similarity"

    def __post_init__(self):
        if self.factor not in FACTORS:
            raise ValueError(f"unknown factor {self.factor!r}")
        expected = "similarity" if self.factor in SIMILARITY_FACTORS else "distance"
        if self.kind != expected:
            raise ValueError(f"{self.factor} is a {expected} metric")

    @classmethod
    def for_factor(cls, factor: str) -> "FactorMetricSpec":
        return cls(factor=factor, kind="similarity" if factor in SIMILARITY_FACTORS else "distance")


def _check_pair(x, y, min_len=2):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be 1-d and the same length")
    if len(x) < min_len:
        raise ValueError(f"need at least {min_len} observations")
    return x, y


def pearson(x, y) -> float:
    x, y = _check_pair(x, y)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelation("zero variance input")
    return float(stats.pearsonr(x, y).statistic)


def spearman(x, y) -> float:
    x, y = _check_pair(x, y)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelation("zero variance input")
    return float(stats.spearmanr(x, y).statistic)


def kendall_tau(x, y) -> float:
    """Kendall tau-b (tie-corrected)."""
    x, y = _check_pair(x, y)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelation("all-tied input")
    return float(stats.kendalltau(x, y, variant="b").statistic)


def _largest_component(net: INet) -> set[str]:
    adjacency: dict[str, set[str]] = {n: set() for n in net.nodes}
    for a, b in net.edges:
        adjacency[a].add(b)
        adjacency[b].add(a)
    seen: set[str] = set()
    best: set[str] = set()
    for start in sorted(net.nodes):
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        while stack:
            node = stack.pop()
            for nbr in adjacency[node]:
                if nbr not in comp:
                    comp.add(nbr)
                    stack.append(nbr)
        seen |= comp
        # strictly larger wins; the sorted scan makes ties deterministic
        if len(comp) > len(best):
            best = comp
    return best


class CentralityNotConverged(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"power iteration residual {residual:.3e} after {iterations} iterations")
        self.residual = residual


def eigenvector_centrality(net: INet, tol: float = 1e-10, max_iter: int = 1000) -> dict[str, float]:
    """Dominant eigenvector of the weighted adjacency (self-loops on the
    diagonal), L2-normalized and nonnegative, over the largest connected
    component; nodes outside it score 0.

    Iterates on A + sigma*I so bipartite-like spectra cannot oscillate.
    """
    if not net.nodes:
        raise ValueError("empty network")
    comp = sorted(_largest_component(net))
    index = {n: i for i, n in enumerate(comp)}
    n = len(comp)
    A = np.zeros((n, n))
    for (a, b), w in net.edges.items():
        if a in index and b in index:
            A[index[a], index[b]] = w
            A[index[b], index[a]] = w
    for a, w in net.self_loops.items():
        if a in index:
            A[index[a], index[a]] = w

    scores = {node: 0.0 for node in net.nodes}
    if n == 1:
        scores[comp[0]] = 1.0
        return scores

    sigma = max(1.0, A.sum(axis=1).max())
    x = np.full(n, 1.0 / math.sqrt(n))
    residual = math.inf
    for _ in range(max_iter):
        nxt = A @ x + sigma * x
        nxt /= np.linalg.norm(nxt)
        residual = float(np.abs(nxt - x).sum())
        x = nxt
        if residual < n * tol:
            x = np.abs(x)
            x /= np.linalg.norm(x)
            for node, i in index.items():
                scores[node] = float(x[i])
            return scores
    raise CentralityNotConverged(residual, max_iter)


@dataclass
class CompareReport:
    mode: str
    n_pairs: int
    pearson: float | None
    spearman: float | None
    kendall_centrality: float | None
    shared_nodes: int
    shared_edges: int
    nodes_a: int
    nodes_b: int
    edges_a: int
    edges_b: int
    notes: list[str]

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def paired_edge_series(net_a: INet, net_b: INet, mode: str = "intersection"):
    """Edge keys with weights from both networks, either over the shared keys
    or over the union with zero fill."""
    if mode == "intersection":
        keys = sorted(set(net_a.edges) & set(net_b.edges))
    elif mode == "union":
        keys = sorted(set(net_a.edges) | set(net_b.edges))
    else:
        raise ValueError(f"unknown pairing mode {mode!r}")
    return keys, [net_a.edges.get(k, 0) for k in keys], [net_b.edges.get(k, 0) for k in keys]


def compare_inets(net_a: INet, net_b: INet, mode: str = "intersection") -> CompareReport:
    if net_a.level != net_b.level:
        raise ValueError(f"levels differ: {net_a.level} vs {net_b.level}")
    keys, wa, wb = paired_edge_series(net_a, net_b, mode)
    notes: list[str] = []
    r = rho = None
    if len(keys) < 2:
        notes.append("fewer than 2 paired edges; correlations unavailable")
    else:
        try:
            r = pearson(wa, wb)
            rho = spearman(wa, wb)
        except UndefinedCorrelation as exc:
            notes.append(f"edge-weight correlation undefined: {exc}")

    tau = None
    cent_a = eigenvector_centrality(net_a)
    cent_b = eigenvector_centrality(net_b)
    shared = sorted(n for n in net_a.nodes & net_b.nodes if cent_a[n] > 0 and cent_b[n] > 0)
    if len(shared) >= 2:
        try:
            tau = kendall_tau([cent_a[n] for n in shared], [cent_b[n] for n in shared])
        except UndefinedCorrelation as exc:
            notes.append(f"centrality agreement undefined: {exc}")
    else:
        notes.append("fewer than 2 shared central nodes; kendall unavailable")

    return CompareReport(
        mode=mode,
        n_pairs=len(keys),
        pearson=r,
        spearman=rho,
        kendall_centrality=tau,
        shared_nodes=len(net_a.nodes & net_b.nodes),
        shared_edges=len(set(net_a.edges) & set(net_b.edges)),
        nodes_a=len(net_a.nodes),
        nodes_b=len(net_b.nodes),
        edges_a=len(net_a.edges),
        edges_b=len(net_b.edges),
        notes=notes,
    )


def _entropy(counts: Counter, n: int) -> float:
    return -sum((c / n) * math.log(c / n) for c in counts.values())


def nmi(part_a: dict, part_b: dict) -> float:
    """Normalized mutual information with arithmetic-mean normalization.

    Two single-cluster partitions agree perfectly (1.0); one trivial
    partition against a non-trivial one shares nothing (0.0).
    """
    if set(part_a) != set(part_b):
        raise ValueError("partitions must cover the same elements")
    n = len(part_a)
    if n == 0:
        raise ValueError("empty partitions")
    ca = Counter(part_a.values())
    cb = Counter(part_b.values())
    if len(ca) == 1 and len(cb) == 1:
        return 1.0
    ha, hb = _entropy(ca, n), _entropy(cb, n)
    if ha == 0.0 or hb == 0.0:
        return 0.0
    joint = Counter((part_a[k], part_b[k]) for k in part_a)
    mi = sum(
        (c / n) * math.log(n * c / (ca[la] * cb[lb]))
        for (la, lb), c in joint.items()
    )
    return max(0.0, min(1.0, mi / ((ha + hb) / 2.0)))


def rand_index(part_a: dict, part_b: dict) -> dict[str, float]:
    """Rand index and Hubert-Arabie adjusted Rand index."""
    if set(part_a) != set(part_b):
        raise ValueError("partitions must cover the same elements")
    n = len(part_a)
    if n < 2:
        raise ValueError("need at least 2 elements")

    def c2(k):
        return k * (k - 1) // 2

    joint = Counter((part_a[k], part_b[k]) for k in part_a)
    ca = Counter(part_a.values())
    cb = Counter(part_b.values())
    sum_ij = sum(c2(c) for c in joint.values())
    sum_a = sum(c2(c) for c in ca.values())
    sum_b = sum(c2(c) for c in cb.values())
    total = c2(n)
    rand = (total + 2 * sum_ij - sum_a - sum_b) / total
    expected = sum_a * sum_b / total
    maximum = (sum_a + sum_b) / 2.0
    ari = 1.0 if maximum == expected else (sum_ij - expected) / (maximum - expected)
    return {"rand": rand, "adjusted_rand": ari}


def _require(region: Region, attr: str):
    value = getattr(region.context, attr, None) if region.context else None
    if value is None:
        raise MetricUnavailable(f"region {region.region_id} has no {attr}")
    return value


_SCALAR_ATTR = {"population": "population", "income": "income", "education": "education",
                "employment": "employment", "vote": "vote_share"}


def factor_metric(spec: FactorMetricSpec, r: Region, s: Region) -> float:
    """Distance (or, for venue categories, cosine similarity) between two
    regions on one contextual factor."""
    if spec.factor == "geographic":
        return math.dist(r.centroid, s.centroid)
    if spec.factor in _SCALAR_ATTR:
        attr = _SCALAR_ATTR[spec.factor]
        return abs(_require(r, attr) - _require(s, attr))
    if spec.factor == "race":
        return race_distance(r, s)
    if spec.factor == "scenes":
        a = np.asarray(_require(r, "scene_vector"), dtype=float)
        b = np.asarray(_require(s, "scene_vector"), dtype=float)
        return float(np.linalg.norm(a - b))
    if spec.factor == "venue_categories":
        return category_cosine(r, s)
    raise ValueError(f"unknown factor {spec.factor!r}")


def race_distance(r: Region, s: Region) -> float:
    """Half the L1 distance between population-normalized racial shares."""
    counts_r = _require(r, "race_counts")
    counts_s = _require(s, "race_counts")
    pop_r = _require(r, "population")
    pop_s = _require(s, "population")
    if pop_r <= 0 or pop_s <= 0:
        raise MetricUnavailable("race shares need a positive population")
    total = 0.0
    for cat in set(counts_r) | set(counts_s):
        total += abs(counts_r.get(cat, 0.0) / pop_r - counts_s.get(cat, 0.0) / pop_s)
    return total / 2.0


def category_cosine(r: Region, s: Region) -> float:
    """Cosine similarity of raw venue-category frequency vectors."""
    fr = _require(r, "category_freq")
    fs = _require(s, "category_freq")
    cats = sorted(set(fr) | set(fs))
    a = np.array([fr.get(c, 0) for c in cats], dtype=float)
    b = np.array([fs.get(c, 0) for c in cats], dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise MetricUnavailable("empty category frequency vector")
    return float(a @ b / (na * nb))


def correlate_edges_with_factor(
    net: INet,
    spec: FactorMetricSpec,
    regions_by_id: dict[str, Region],
) -> dict:
    """Spearman correlation between edge weights and the per-edge factor
    value; edges whose endpoints lack the factor are dropped and counted.

    Callers following the reference procedure pass a network already trimmed
    to its top 75% of edges by weight.
    """
    weights: list[float] = []
    values: list[float] = []
    dropped = 0
    for (a, b), w in sorted(net.edges.items()):
        ra, rb = regions_by_id.get(a), regions_by_id.get(b)
        if ra is None or rb is None:
            dropped += 1
            continue
        try:
            values.append(factor_metric(spec, ra, rb))
        except MetricUnavailable:
            dropped += 1
            continue
        weights.append(w)
    if len(weights) < 3:
        raise ValueError(f"only {len(weights)} usable edges for factor {spec.factor}")
    return {
        "factor": spec.factor,
        "kind": spec.kind,
        "spearman": spearman(weights, values),
        "n_edges_used": len(weights),
        "n_edges_dropped": dropped,
    }
