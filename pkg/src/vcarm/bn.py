"""Discrete Bayesian-network generator: BIC hill climbing plus ancestral sampling.

Numeric columns are discretized into quantile bins before structure search;
sampled bin indices are materialized uniformly within the bin edges on the
way out. Structure search hill-climbs over add/delete/reverse edge moves
maximizing the BIC score (decomposable, so only the affected families are
rescored), with a bounded in-degree and a few random restarts. Conditional
probability tables use the add-one (Dirichlet) posterior mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Tuple

import numpy as np

from ._seeding import derive_seed
from .cohort import CohortError
from .impute import ImputedTable

MAX_IN_DEGREE = 4
RANDOM_RESTARTS = 3
DEFAULT_BINS = 5


def quantile_bins(col: np.ndarray, bins: int) -> np.ndarray:
    """Bin edges (including min/max) from quantiles, duplicates collapsed."""
    edges = np.unique(np.quantile(col, np.linspace(0, 1, bins + 1)))
    if len(edges) < 2:
        edges = np.array([edges[0], edges[0]])
    return edges


def discretize(col: np.ndarray, edges: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(edges, col, side="right") - 1
    return np.clip(idx, 0, len(edges) - 2)


def family_score(disc: np.ndarray, levels: np.ndarray, v: int,
                 parents: Tuple[int, ...]) -> float:
    """BIC contribution of one node given its parents (max log-lik - penalty)."""
    n = disc.shape[0]
    r_v = int(levels[v])
    q = 1
    code = np.zeros(n, dtype=np.int64)
    for u in parents:
        code = code * int(levels[u]) + disc[:, u]
        q *= int(levels[u])
    counts = np.bincount(code * r_v + disc[:, v], minlength=q * r_v).reshape(q, r_v)
    row_tot = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ll = np.where(counts > 0, counts * np.log(counts / row_tot), 0.0).sum()
    penalty = 0.5 * np.log(n) * (r_v - 1) * q
    return float(ll - penalty)


def dag_score(disc: np.ndarray, levels: np.ndarray,
              parent_sets: List[Tuple[int, ...]]) -> float:
    """Total BIC of a DAG given per-node parent tuples."""
    return sum(family_score(disc, levels, v, tuple(sorted(ps)))
               for v, ps in enumerate(parent_sets))


class _ScoreCache:
    def __init__(self, disc, levels):
        self.disc = disc
        self.levels = levels
        self.cache: Dict[Tuple[int, FrozenSet[int]], float] = {}

    def __call__(self, v: int, parents) -> float:
        key = (v, frozenset(parents))
        if key not in self.cache:
            self.cache[key] = family_score(self.disc, self.levels, v,
                                           tuple(sorted(parents)))
        return self.cache[key]


def _creates_cycle(parents: List[set], u: int, v: int) -> bool:
    """Would adding u -> v close a cycle (i.e. is v an ancestor of u)?"""
    stack, seen = [u], set()
    while stack:
        node = stack.pop()
        if node == v:
            return True
        for parent in parents[node]:
            if parent not in seen:
                seen.add(parent)
                stack.append(parent)
    return False


def _hill_climb(score: _ScoreCache, p: int, start: List[set]) -> Tuple[List[set], float]:
    parents = [set(s) for s in start]
    node_scores = [score(v, parents[v]) for v in range(p)]
    while True:
        best_delta = 1e-9
        best_move = None
        for v in range(p):
            for u in range(p):
                if u == v:
                    continue
                if u in parents[v]:
                    # delete u -> v
                    delta = score(v, parents[v] - {u}) - node_scores[v]
                    if delta > best_delta:
                        best_delta, best_move = delta, ("del", u, v)
                    # reverse u -> v (becomes v -> u)
                    if len(parents[u]) < MAX_IN_DEGREE and not _creates_cycle(
                        [ps - {u} if i == v else ps for i, ps in enumerate(parents)], v, u
                    ):
                        delta = (
                            score(v, parents[v] - {u}) - node_scores[v]
                            + score(u, parents[u] | {v}) - node_scores[u]
                        )
                        if delta > best_delta:
                            best_delta, best_move = delta, ("rev", u, v)
                elif len(parents[v]) < MAX_IN_DEGREE and not _creates_cycle(parents, u, v):
                    delta = score(v, parents[v] | {u}) - node_scores[v]
                    if delta > best_delta:
                        best_delta, best_move = delta, ("add", u, v)
        if best_move is None:
            break
        op, u, v = best_move
        if op == "add":
            parents[v].add(u)
        elif op == "del":
            parents[v].remove(u)
        else:
            parents[v].remove(u)
            parents[u].add(v)
            node_scores[u] = score(u, parents[u])
        node_scores[v] = score(v, parents[v])
    return parents, float(sum(node_scores))


def _random_dag(p: int, rng: np.random.Generator) -> List[set]:
    order = rng.permutation(p)
    parents = [set() for _ in range(p)]
    for pos in range(1, p):
        if rng.random() < 0.5:
            parents[order[pos]].add(int(order[rng.integers(0, pos)]))
    return parents


@dataclass
class BnModel:
    parent_sets: Tuple[Tuple[int, ...], ...]
    cpts: List[np.ndarray]              # per node: (q_parents, r_v) rows sum to 1
    levels: np.ndarray
    edges: Tuple[Tuple[str, str], ...]  # (parent_name, child_name)
    bic: float
    bin_edges: Dict[int, np.ndarray]    # numeric column -> quantile edges
    topo_order: Tuple[int, ...]
    diagnostics: Dict = field(default_factory=dict)


def fit_bn(table: ImputedTable, bins: int = DEFAULT_BINS, seed: int = 0) -> BnModel:
    """Learn structure and parameters of a discrete Bayesian network."""
    if bins < 2:
        raise CohortError("bins must be >= 2")
    schema = table.schema
    values = table.values
    n, p = values.shape

    disc = np.empty((n, p), dtype=np.int64)
    levels = np.empty(p, dtype=np.int64)
    bin_edges: Dict[int, np.ndarray] = {}
    for j, spec in enumerate(schema.columns):
        if spec.kind == "categorical":
            disc[:, j] = values[:, j].astype(np.int64)
            levels[j] = len(spec.categories)
        else:
            edges = quantile_bins(values[:, j], bins)
            bin_edges[j] = edges
            disc[:, j] = discretize(values[:, j], edges)
            levels[j] = len(edges) - 1
        if len(np.unique(disc[:, j])) < 2:
            raise CohortError(
                f"column {spec.name!r} has a single observed level after binning"
            )

    score = _ScoreCache(disc, levels)
    rng = np.random.default_rng(derive_seed(seed, "bn-structure"))
    best_parents, best_score = _hill_climb(score, p, [set() for _ in range(p)])
    for _ in range(RANDOM_RESTARTS):
        parents, total = _hill_climb(score, p, _random_dag(p, rng))
        if total > best_score + 1e-9:
            best_parents, best_score = parents, total

    parent_sets = tuple(tuple(sorted(ps)) for ps in best_parents)

    cpts = []
    for v in range(p):
        ps = parent_sets[v]
        r_v = int(levels[v])
        q = int(np.prod([levels[u] for u in ps])) if ps else 1
        code = np.zeros(n, dtype=np.int64)
        for u in ps:
            code = code * int(levels[u]) + disc[:, u]
        counts = np.bincount(code * r_v + disc[:, v],
                             minlength=q * r_v).reshape(q, r_v).astype(float)
        cpts.append((counts + 1.0) / (counts.sum(axis=1, keepdims=True) + r_v))

    order = []
    placed = set()
    while len(order) < p:
        for v in range(p):
            if v not in placed and all(u in placed for u in parent_sets[v]):
                order.append(v)
                placed.add(v)

    names = schema.names
    edges_named = tuple(
        (names[u], names[v]) for v in range(p) for u in parent_sets[v]
    )
    return BnModel(
        parent_sets=parent_sets, cpts=cpts, levels=levels,
        edges=edges_named, bic=best_score, bin_edges=bin_edges,
        topo_order=tuple(order),
        diagnostics={"bic": best_score, "n_edges": len(edges_named)},
    )


def sample_bn(model: BnModel, m: int, seed: int = 0) -> np.ndarray:
    """Ancestral sampling in topological order; numeric bins filled uniformly."""
    p = len(model.parent_sets)
    out = np.empty((m, p))
    if m == 0:
        return out
    rng = np.random.default_rng(derive_seed(seed, "bn-sample"))
    disc = np.empty((m, p), dtype=np.int64)
    for v in model.topo_order:
        ps = model.parent_sets[v]
        code = np.zeros(m, dtype=np.int64)
        for u in ps:
            code = code * int(model.levels[u]) + disc[:, u]
        probs = model.cpts[v][code]
        cum = np.cumsum(probs, axis=1)
        u01 = rng.random((m, 1))
        disc[:, v] = np.argmax(u01 <= cum, axis=1)
    for j in range(p):
        if j in model.bin_edges:
            edges = model.bin_edges[j]
            lo = edges[disc[:, j]]
            hi = edges[disc[:, j] + 1]
            out[:, j] = lo + rng.random(m) * (hi - lo)
        else:
            out[:, j] = disc[:, j]
    return out
