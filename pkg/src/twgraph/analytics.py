"""Analytics over the temporal web graph.

Windowed graphs and PageRank, top-k overlap and Kendall tau between rank
tables, inlink anchor-text timelines, crawl-coverage counts and the
scale-up cost estimators.
"""
from __future__ import annotations

import calendar
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .uri import uri_id

WHOLE = None
_MONTHS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun",
           "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")


class EmptyGraphError(ValueError):
    pass


def month_window(spec: str):
    """``"2010-01"`` -> inclusive 14-digit bounds of that UTC calendar month."""
    year, month = (int(x) for x in spec.split("-"))
    if not 1 <= month <= 12:
        raise ValueError("bad month %r" % spec)
    last = calendar.monthrange(year, month)[1]
    return ("%04d%02d01000000" % (year, month), "%04d%02d%02d235959" % (year, month, last))


def parse_window(spec):
    if spec is None or str(spec).lower() == "whole":
        return WHOLE
    if isinstance(spec, tuple):
        return spec
    return month_window(spec)


@dataclass(frozen=True)
class WindowedGraph:
    """Nodes are SURT keys; ``ids`` maps each to its UriId."""

    window: Optional[tuple]
    nodes: frozenset
    edges: frozenset
    ids: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_edges(cls, edges, nodes=(), window=WHOLE):
        edges = frozenset(edges)
        allnodes = frozenset(nodes) | {n for e in edges for n in e}
        return cls(window, allnodes, edges)

    def id_of(self, node):
        return self.ids.get(node) or uri_id(node)


def _in_window(ts, window):
    return window is None or window[0] <= ts <= window[1]


def build_window_graph(store, window=WHOLE) -> WindowedGraph:
    """Edge x->y iff some memento of x captured inside `window` links to y."""
    window = parse_window(window)
    edges, ids = set(), {}
    cache = {}
    for obs in store.observations():
        if not _in_window(obs.datetime, window):
            continue
        outs = cache.get(obs.checksum)
        if outs is None:
            outs = cache[obs.checksum] = store.content(obs.checksum)
        for o in outs:
            edges.add((obs.source_surt, o.target_surt))
            ids[obs.source_surt] = obs.source_id
            ids[o.target_surt] = o.target_id
    nodes = frozenset(n for e in edges for n in e)
    return WindowedGraph(window, nodes, frozenset(edges), ids)


@dataclass
class RankTable:
    scores: dict  # node (SURT) -> probability
    ids: dict = field(default_factory=dict)
    iterations: int = 0
    converged: bool = False

    def ordered(self):
        """Nodes by descending score, SURT ascending among (near-)ties."""
        return sorted(self.scores, key=lambda n: (-round(self.scores[n], 12), n))

    def top(self, k):
        return self.ordered()[:k]

    def ranks(self):
        return {n: i + 1 for i, n in enumerate(self.ordered())}

    def __len__(self):
        return len(self.scores)


def pagerank(graph: WindowedGraph, damping=0.85, epsilon=1e-8, max_iter=100,
             personalization=None, callback=None) -> RankTable:
    """Power-iteration PageRank with uniform redistribution of dangling mass.

    Stops once the L1 change between iterations drops below `epsilon`.
    `personalization` maps nodes to teleport weights (normalized here);
    `callback(iteration, scores)` sees every iterate.
    """
    if not graph.nodes:
        raise EmptyGraphError("cannot rank an empty graph")
    if not 0 < damping < 1:
        raise ValueError("damping must lie in (0, 1)")
    nodes = sorted(graph.nodes)
    index = {n: i for i, n in enumerate(nodes)}
    n = len(nodes)
    src = np.fromiter((index[a] for a, _ in graph.edges), dtype=np.int64, count=len(graph.edges))
    dst = np.fromiter((index[b] for _, b in graph.edges), dtype=np.int64, count=len(graph.edges))
    outdeg = np.bincount(src, minlength=n).astype(float)
    dangling = outdeg == 0
    # transition[j, i] = 1/outdeg(i) for every edge i -> j
    transition = sp.csr_matrix((1.0 / outdeg[src], (dst, src)), shape=(n, n))

    if personalization is None:
        teleport = np.full(n, 1.0 / n)
    else:
        teleport = np.array([float(personalization.get(v, 0.0)) for v in nodes])
        if teleport.sum() <= 0 or (teleport < 0).any():
            raise ValueError("personalization needs non-negative weights with positive sum")
        teleport /= teleport.sum()

    x = np.full(n, 1.0 / n)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new = damping * (transition @ x + x[dangling].sum() / n) + (1 - damping) * teleport
        delta = np.abs(new - x).sum()
        x = new
        if callback is not None:
            callback(it, x)
        if delta < epsilon:
            converged = True
            break
    scores = {v: float(x[i]) for i, v in enumerate(nodes)}
    return RankTable(scores, {v: graph.id_of(v) for v in nodes}, it, converged)


def top_k_overlap(a: RankTable, b: RankTable, k: int) -> int:
    if k < 1:
        raise ValueError("k must be >= 1")
    return len(set(a.top(k)) & set(b.top(k)))


def kendall_tau_topk(a: RankTable, b: RankTable, k: int) -> float:
    """Kendall tau over the items common to both top-k lists.

    Each item is placed by its rank in the full table. Returns NaN when
    fewer than two items are shared.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    common = sorted(set(a.top(k)) & set(b.top(k)))
    if len(common) < 2:
        return math.nan
    ra, rb = a.ranks(), b.ranks()
    concordant = discordant = 0
    for x, y in combinations(common, 2):
        s = (ra[x] - ra[y]) * (rb[x] - rb[y])
        if s > 0:
            concordant += 1
        elif s < 0:
            discordant += 1
    pairs = len(common) * (len(common) - 1) // 2
    return (concordant - discordant) / pairs


@dataclass(frozen=True)
class Comparison:
    first: str
    second: str
    overlap: int
    tau: float


def compare_tables(tables: dict, pairs, k=50):
    return [Comparison(x, y, top_k_overlap(tables[x], tables[y], k),
                       kendall_tau_topk(tables[x], tables[y], k)) for x, y in pairs]


def format_date(ts):
    """``20091104...`` -> ``04-Nov-09``."""
    return "%s-%s-%s" % (ts[6:8], _MONTHS[int(ts[4:6]) - 1], ts[2:4])


def inlink_anchor_timeline(store, uri):
    """``(DD-Mon-YY, anchor text)`` rows of every inlink to `uri`, oldest first."""
    entries = store.inlinks_for(uri)
    entries.sort(key=lambda e: (e.datetime, e.source_surt, e.link_type.value, e.text))
    return [(format_date(e.datetime), e.text) for e in entries]


@dataclass(frozen=True)
class CoverageReport:
    node_count: int
    edge_count: int
    observed_count: int
    uncrawled_target_count: int

    @property
    def uncrawled_fraction(self):
        return self.uncrawled_target_count / self.node_count if self.node_count else 0.0


def coverage_report(store) -> CoverageReport:
    observed = {obs.source_surt for obs in store.observations()}
    graph = build_window_graph(store, WHOLE)
    nodes = observed | graph.nodes
    return CoverageReport(len(nodes), len(graph.edges), len(observed), len(nodes - observed))


# per-million-memento rates measured on a 100-node Hadoop cluster
FILTER_SEC_PER_MILLION = 88.0
FILTER_SURVIVAL = 0.30
EXTRACT_HRS_PER_MILLION = 5.5
OUTLINK_SHARE = 0.05
INLINK_SHARE = 0.05
LINKID_SHARE = 0.002


@dataclass(frozen=True)
class CostEstimate:
    filtering_time_sec: float
    filtering_survivors: float
    extraction_time_hrs: float
    storage_size: float

    @property
    def filtering_time_hrs(self):
        return self.filtering_time_sec / 3600.0

    @property
    def extraction_time_days(self):
        return self.extraction_time_hrs / 24.0


def filtering_time(n, m):
    return n / 1e6 * FILTER_SEC_PER_MILLION / m


def filtering_reduction(n):
    return n * FILTER_SURVIVAL


def extraction_time(n, m):
    return n / 1e6 * EXTRACT_HRS_PER_MILLION / m


def storage_size(collection_size):
    return (collection_size * OUTLINK_SHARE + collection_size * INLINK_SHARE
            + collection_size * LINKID_SHARE)


def cost_model(n_mementos, m_machines, collection_size, chained=True) -> CostEstimate:
    """Scale-up estimate; with `chained`, extraction runs on the filter survivors."""
    if n_mementos < 1 or m_machines < 1:
        raise ValueError("need n >= 1 mementos and m >= 1 machines")
    if collection_size < 0:
        raise ValueError("collection size must be >= 0")
    survivors = filtering_reduction(n_mementos)
    return CostEstimate(
        filtering_time_sec=filtering_time(n_mementos, m_machines),
        filtering_survivors=survivors,
        extraction_time_hrs=extraction_time(survivors if chained else n_mementos, m_machines),
        storage_size=storage_size(collection_size),
    )


def observed_months(store):
    return sorted({"%s-%s" % (o.datetime[:4], o.datetime[4:6]) for o in store.observations()})
