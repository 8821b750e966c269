"""Reduction of the reduced ordering model to an edge-weighted cut problem.

One graph node per variable class plus a reference node 0.  Every class c
gets a *root edge* (0, c+1) of weight 0 -- its cut value carries the class's
0/1 assignment.  Every aggregated crossing term becomes a *pair edge* between
its two classes with net weight (xor weight - xnor weight); the constant xnor
part moves into the offset.  For a cut vector y (y_e = 1 iff e crosses the
cut), ``offset + sum_e w_e y_e`` equals the crossing count of the assignment
``x_c = y_(0,c+1)``, so minimizing crossings is a minimum/maximum cut problem
depending on sign -- we keep everything as "minimize the weighted cut".

Cut vectors are exactly the 0/1 vectors with even overlap with every cycle;
fractional LP points are separated by odd-cycle inequalities

    sum_{e in F} y_e - sum_{e in C\\F} y_e <= |F| - 1,   F subset of cycle C, |F| odd,

found via shortest paths in a doubled graph (each node split into an even and
an odd copy; arcs for edge e: same-side of length y_e, side-switching of
length 1 - y_e; an even->odd path shorter than 1 yields a violated
inequality).  Transitivity of the underlying ordering is separated by
complete enumeration over the stored class triples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .mlcm import Solution
from .ordering import (
    XNOR,
    XOR,
    ClassTriple,
    ReducedModel,
    classes_of_solution,
    decode_assignment,
    separate_transitivity_values,
)

__all__ = [
    "MaxCutGraph",
    "OddCycleInequality",
    "TransitivityCut",
    "build_maxcut",
    "evaluate_cut",
    "cut_consistency",
    "separate_odd_cycles",
    "separate_transitivity",
    "cut_to_solution",
    "cut_from_solution",
]

# sparse graphs drop explicit zeros, so zero-length arcs get this floor; the
# error (<= 2 * n_edges * 1e-12) is far below the separation tolerance and
# every returned inequality is re-checked exactly against y anyway
_LENGTH_FLOOR = 1e-12


@dataclass(frozen=True)
class MaxCutGraph:
    """Cut instance.  Edge c is the root edge (0, c+1) for every class c."""

    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    weights: tuple[int, ...]
    offset: int

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_root_edges(self) -> int:
        return self.n_nodes - 1

    def root_edge(self, cls: int) -> int:
        return cls


def build_maxcut(reduced: ReducedModel) -> MaxCutGraph:
    """Build the cut graph; keeps pair edges even when their net weight is 0."""
    n_classes = reduced.n_classes
    edges: list[tuple[int, int]] = [(0, c + 1) for c in range(n_classes)]
    weights: list[int] = [0] * n_classes
    offset = reduced.offset
    net: dict[tuple[int, int], int] = {}
    for t in reduced.terms:
        u, v = t.var_a + 1, t.var_b + 1
        if u > v:
            u, v = v, u
        if t.parity == XOR:
            net[(u, v)] = net.get((u, v), 0) + t.weight
        else:
            net[(u, v)] = net.get((u, v), 0) - t.weight
            offset += t.weight
    for (u, v), w in sorted(net.items()):
        edges.append((u, v))
        weights.append(w)
    return MaxCutGraph(n_classes + 1, tuple(edges), tuple(weights), offset)


def evaluate_cut(graph: MaxCutGraph, y) -> float:
    """offset + sum of edge weights on the cut (exact for integral y)."""
    total = graph.offset
    for e, w in enumerate(graph.weights):
        if w:
            total += w * y[e]
    return total


@dataclass(frozen=True)
class OddCycleInequality:
    """sum_{e in odd_set} y_e - sum_{e in cycle-odd_set} y_e <= |odd_set| - 1."""

    cycle: tuple[int, ...]
    odd_set: frozenset[int]

    def violation(self, y) -> float:
        lhs = 0.0
        for e in self.cycle:
            lhs += y[e] if e in self.odd_set else -y[e]
        return lhs - (len(self.odd_set) - 1)

    def lp_row(self) -> tuple[dict[int, float], float]:
        coefs = {e: (1.0 if e in self.odd_set else -1.0) for e in self.cycle}
        return coefs, float(len(self.odd_set) - 1)

    def key(self) -> tuple:
        return ("oddcycle", tuple(sorted(self.cycle)), tuple(sorted(self.odd_set)))


@dataclass(frozen=True)
class TransitivityCut:
    """Transitivity of three classes, written over their root-edge variables."""

    triple: ClassTriple
    sense: str  # "upper": x_a + x_b - x_c <= 1;  "lower": -x_a - x_b + x_c <= 0

    def lp_row(self) -> tuple[dict[int, float], float]:
        a, b, c = self.triple.a, self.triple.b, self.triple.c
        if self.sense == "upper":
            return {a: 1.0, b: 1.0, c: -1.0}, 1.0
        return {a: -1.0, b: -1.0, c: 1.0}, 0.0

    def violation(self, y) -> float:
        coefs, rhs = self.lp_row()
        return sum(w * y[e] for e, w in coefs.items()) - rhs

    def key(self) -> tuple:
        return ("transitivity", self.triple.a, self.triple.b, self.triple.c, self.sense)


def _spanning_tree(graph: MaxCutGraph) -> tuple[list[int], list[int], list[int]]:
    """BFS tree from node 0: (parent node, parent edge, visit order) per node."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(graph.n_nodes)]
    for e, (u, v) in enumerate(graph.edges):
        adj[u].append((v, e))
        adj[v].append((u, e))
    parent = [-1] * graph.n_nodes
    parent_edge = [-1] * graph.n_nodes
    seen = [False] * graph.n_nodes
    seen[0] = True
    queue = [0]
    order = [0]
    while queue:
        nxt = []
        for u in queue:
            for v, e in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    parent[v] = u
                    parent_edge[v] = e
                    nxt.append(v)
        order.extend(nxt)
        queue = nxt
    return parent, parent_edge, order


def cut_consistency(graph: MaxCutGraph, y) -> tuple[bool, OddCycleInequality | None]:
    """Check that integral y is a cut; on failure return a violated odd cycle.

    Labels nodes by parity along a spanning tree, then verifies every edge.
    The witness is the tree path between a failing edge's endpoints plus the
    edge itself -- a cycle with an odd number of y=1 edges.
    """
    parent, parent_edge, order = _spanning_tree(graph)
    label = [0] * graph.n_nodes
    for v in order:
        if parent[v] >= 0:
            label[v] = label[parent[v]] ^ int(round(y[parent_edge[v]]))
    for e, (u, v) in enumerate(graph.edges):
        if (label[u] ^ label[v]) != int(round(y[e])):
            cycle = [e] + _tree_path_edges(parent, parent_edge, u, v)
            odd = frozenset(c for c in cycle if int(round(y[c])) == 1)
            return False, OddCycleInequality(tuple(cycle), odd)
    return True, None


def _depth(parent: list[int], v: int) -> int:
    d = 0
    while parent[v] >= 0:
        v = parent[v]
        d += 1
    return d


def _tree_path_edges(parent: list[int], parent_edge: list[int], u: int, v: int) -> list[int]:
    pu, pv = [], []
    du, dv = _depth(parent, u), _depth(parent, v)
    while du > dv:
        pu.append(parent_edge[u])
        u = parent[u]
        du -= 1
    while dv > du:
        pv.append(parent_edge[v])
        v = parent[v]
        dv -= 1
    while u != v:
        pu.append(parent_edge[u])
        pv.append(parent_edge[v])
        u, v = parent[u], parent[v]
    return pu + pv[::-1]


def _best_odd_set(cycle: list[int], y) -> tuple[frozenset[int], float]:
    """Most-violated odd subset for a given simple cycle.

    Per edge the cheaper slack is min(y_e, 1-y_e) (in F when y_e is the
    larger); parity is fixed by flipping the edge where flipping costs least.
    """
    in_f = [y[e] > 0.5 for e in cycle]
    slack = sum((1.0 - y[e]) if f else y[e] for e, f in zip(cycle, in_f))
    if sum(in_f) % 2 == 0:
        flip = min(range(len(cycle)), key=lambda i: abs(1.0 - 2.0 * y[cycle[i]]))
        slack += abs(1.0 - 2.0 * y[cycle[flip]])
        in_f[flip] = not in_f[flip]
    odd = frozenset(e for e, f in zip(cycle, in_f) if f)
    return odd, 1.0 - slack


def _extract_simple_odd_cycle(nodes: list[int], steps: list[tuple[int, bool]]) -> list[int]:
    """Reduce a closed odd walk to a simple odd cycle (edge index list).

    ``nodes`` has length len(steps)+1 with nodes[0] == nodes[-1]; each step is
    (edge index, switches sides).  Splitting at a repeated node yields two
    closed walks whose side-switch parities sum to the total, so one of them
    is odd; recurse on it.  Lengths strictly decrease, so this terminates.
    """
    while True:
        seen: dict[int, int] = {}
        split = None
        for idx, v in enumerate(nodes[:-1]):
            if v in seen:
                split = (seen[v], idx)
                break
            seen[v] = idx
        if split is None:
            return [e for e, _ in steps]
        i, j = split
        inner_nodes = nodes[i:j + 1]
        inner_steps = steps[i:j]
        outer_nodes = nodes[:i + 1] + nodes[j + 1:]
        outer_steps = steps[:i] + steps[j:]
        if sum(1 for _, cross in inner_steps if cross) % 2 == 1:
            nodes, steps = inner_nodes, inner_steps
        else:
            nodes, steps = outer_nodes, outer_steps


def separate_odd_cycles(
    graph: MaxCutGraph,
    y,
    tolerance: float = 1e-6,
    max_cuts: int = 500,
) -> list[OddCycleInequality]:
    """Find violated odd-cycle inequalities at fractional y.

    Shortest even->odd paths in the doubled graph; every path of length < 1
    projects to a closed walk with an odd number of side switches, which is
    reduced to a simple odd cycle and re-checked exactly.  Complete: a
    violated inequality exists iff some such path is shorter than 1.
    Returns at most ``max_cuts`` inequalities, most violated first.
    """
    n = graph.n_nodes
    m = graph.n_edges
    if m == 0 or n < 3:
        return []
    yv = np.clip(np.asarray(y, dtype=float)[:m], 0.0, 1.0)

    # doubled graph: node v -> 2v (even side) and 2v+1 (odd side)
    rows = np.empty(8 * m, dtype=np.int64)
    cols = np.empty(8 * m, dtype=np.int64)
    data = np.empty(8 * m, dtype=float)
    same = np.maximum(yv, _LENGTH_FLOOR)
    cross = np.maximum(1.0 - yv, _LENGTH_FLOOR)
    for e, (u, v) in enumerate(graph.edges):
        base = 8 * e
        pairs = (
            (2 * u, 2 * v, same[e]), (2 * v, 2 * u, same[e]),
            (2 * u + 1, 2 * v + 1, same[e]), (2 * v + 1, 2 * u + 1, same[e]),
            (2 * u, 2 * v + 1, cross[e]), (2 * v + 1, 2 * u, cross[e]),
            (2 * u + 1, 2 * v, cross[e]), (2 * v, 2 * u + 1, cross[e]),
        )
        for k, (a, b, w) in enumerate(pairs):
            rows[base + k] = a
            cols[base + k] = b
            data[base + k] = w
    doubled = csr_matrix((data, (rows, cols)), shape=(2 * n, 2 * n))

    sources = np.arange(n) * 2
    dist, pred = dijkstra(doubled, directed=True, indices=sources,
                          return_predecessors=True, limit=1.0)

    edge_index = {tuple(e): i for i, e in enumerate(graph.edges)}
    found: dict[tuple, OddCycleInequality] = {}
    order: list[tuple[float, tuple, OddCycleInequality]] = []
    for si in range(n):
        target = 2 * si + 1
        if dist[si, target] >= 1.0 - tolerance or not np.isfinite(dist[si, target]):
            continue
        # walk the predecessor chain target .. source
        chain = [target]
        guard = 0
        while chain[-1] != 2 * si:
            p = pred[si, chain[-1]]
            if p < 0 or guard > 4 * n:
                chain = []
                break
            chain.append(int(p))
            guard += 1
        if not chain:
            continue
        chain.reverse()
        nodes = [c // 2 for c in chain]
        steps: list[tuple[int, bool]] = []
        ok = True
        for a, b in zip(chain, chain[1:]):
            ga, gb = a // 2, b // 2
            key = (ga, gb) if ga < gb else (gb, ga)
            e = edge_index.get(key)
            if e is None:
                ok = False
                break
            steps.append((e, (a & 1) != (b & 1)))
        if not ok or not steps:
            continue
        cycle = _extract_simple_odd_cycle(nodes, steps)
        odd, violation = _best_odd_set(cycle, yv)
        if violation <= tolerance:
            continue
        ineq = OddCycleInequality(tuple(cycle), odd)
        k = ineq.key()
        if k not in found:
            found[k] = ineq
            order.append((-violation, k, ineq))

    order.sort(key=lambda t: (t[0], t[1]))
    return [ineq for _, _, ineq in order[:max_cuts]]


def separate_transitivity(reduced: ReducedModel, y, tolerance: float = 1e-6) -> list[TransitivityCut]:
    """Violated transitivity constraints, read off the root-edge values of y."""
    z = np.asarray(y, dtype=float)[:reduced.n_classes]
    out = []
    for triple, sense, violation in separate_transitivity_values(reduced, z, tolerance):
        out.append(TransitivityCut(triple, sense))
    return out


def cut_from_solution(graph: MaxCutGraph, reduced: ReducedModel, solution: Solution) -> np.ndarray:
    """Cut vector of a tree-consistent solution (root edges carry the classes)."""
    z = classes_of_solution(reduced, solution)
    y = np.zeros(graph.n_edges, dtype=float)
    for e, (u, v) in enumerate(graph.edges):
        zu = 0 if u == 0 else z[u - 1]
        zv = 0 if v == 0 else z[v - 1]
        y[e] = float(zu ^ zv)
    return y


def cut_to_solution(reduced: ReducedModel, y, tolerance: float = 1e-6) -> Solution:
    """Decode a (near-)integral consistent cut vector into a solution."""
    z = []
    for c in range(reduced.n_classes):
        val = float(y[c])
        r = round(val)
        if abs(val - r) > tolerance or r not in (0, 1):
            raise ValueError(f"root edge of class {c} is not integral: {val}")
        z.append(int(r))
    return decode_assignment(reduced.model, reduced.expand(z))
