"""Quadratic ordering model over above/below variables, and its reduction.

For every layer and every position pair ``i < j`` (positions taken in a fixed
*index ordering* of the layer) there is a binary variable that is 1 iff the
node indexed i is drawn above the node indexed j.  Crossing counts decompose
into xor/xnor terms between variables of consecutive layers; permutations are
exactly the assignments satisfying all transitivity triples; tree
consistency is captured by equalities between same-layer variables.

The equalities express "outsiders cannot separate a bundle" and are complete
only when the index ordering itself is tree-consistent (otherwise a bundle
{first, last} with a free middle index would need a *complement* relation,
which equalities cannot state).  ``build_model`` therefore reindexes every
layer by a tree-consistent ordering: the caller's, or a canonical DFS order.

Variable identification merges equality-connected variables into classes and
rewrites terms and triples over class representatives; xnor terms whose two
variables collapse into one class become constant and move into the offset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mlcm import MlcmInstance, Solution, is_tree_consistent, lca

__all__ = [
    "CrossingTerm",
    "TransitivityTriple",
    "TreeEquality",
    "ClassTriple",
    "OrderingModel",
    "ReducedModel",
    "NotTransitive",
    "build_model",
    "canonical_orders",
    "encode_solution",
    "decode_assignment",
    "objective_value",
    "identify_variables",
    "classes_of_solution",
    "separate_transitivity_values",
    "dump_model",
]

XOR = "xor"
XNOR = "xnor"


@dataclass(frozen=True)
class CrossingTerm:
    """Crossing contribution ``weight * (a XOR b)`` or ``weight * (a XNOR b)``."""

    var_a: int
    var_b: int
    parity: str
    weight: int


@dataclass(frozen=True)
class TransitivityTriple:
    """``0 <= x_hi + x_ij - x_hj <= 1`` for positions h < i < j of one layer."""

    layer: int
    var_hi: int
    var_ij: int
    var_hj: int


@dataclass(frozen=True)
class TreeEquality:
    var_a: int
    var_b: int


@dataclass(frozen=True)
class ClassTriple:
    """Transitivity over classes: ``0 <= x_a + x_b - x_c <= 1`` (a < b)."""

    a: int
    b: int
    c: int


class NotTransitive(ValueError):
    """Assignment violates a transitivity triple; carries one witness."""

    def __init__(self, triple: TransitivityTriple):
        self.triple = triple
        super().__init__(f"assignment is not transitive at layer {triple.layer}: "
                         f"vars ({triple.var_hi}, {triple.var_ij}, {triple.var_hj})")


@dataclass(frozen=True)
class OrderingModel:
    instance: MlcmInstance
    orders: tuple[tuple[int, ...], ...]  # index ordering per layer (node ids)
    n_vars: int
    layer_offsets: tuple[int, ...]
    var_layer: tuple[int, ...]
    var_pos: tuple[tuple[int, int], ...]  # (i, j) positions, i < j
    terms: tuple[CrossingTerm, ...]
    triples: tuple[TransitivityTriple, ...]
    equalities: tuple[TreeEquality, ...]

    def var_id(self, r: int, i: int, j: int) -> int:
        """Variable for positions i < j on layer r."""
        n = self.instance.layer_sizes[r]
        if not (0 <= i < j < n):
            raise ValueError(f"bad position pair ({i}, {j}) on layer {r}")
        return self.layer_offsets[r] + i * n - i * (i + 1) // 2 + (j - i - 1)


@dataclass(frozen=True)
class ReducedModel:
    model: OrderingModel
    n_classes: int
    class_of: tuple[int, ...]  # var id -> class id
    members: tuple[tuple[int, ...], ...]  # class id -> var ids
    class_layer: tuple[int, ...]
    terms: tuple[CrossingTerm, ...]  # var_a/var_b are class ids here
    triples: tuple[ClassTriple, ...]
    offset: int

    def expand(self, z) -> list[int]:
        """Class assignment -> full model assignment."""
        return [int(z[c]) for c in self.class_of]


def canonical_orders(instance: MlcmInstance) -> Solution:
    """Deterministic tree-consistent ordering per layer (DFS leaf order)."""
    return Solution(tuple(t.canonical_leaf_order() for t in instance.trees))


def build_model(instance: MlcmInstance, order: Solution | None = None) -> OrderingModel:
    """Build the quadratic model; ``order`` fixes each layer's index ordering.

    The ordering must be tree-consistent per layer (defaults to the canonical
    DFS order).  Raises ValueError otherwise.
    """
    if order is None:
        order = canonical_orders(instance)
    if len(order.orders) != instance.p:
        raise ValueError("index ordering must cover every layer")
    for r, t in enumerate(instance.trees):
        if not is_tree_consistent(t, order.orders[r]):
            raise ValueError(f"index ordering for layer {r + 1} is not tree-consistent")

    sizes = instance.layer_sizes
    offsets = []
    total = 0
    for n in sizes:
        offsets.append(total)
        total += n * (n - 1) // 2

    var_layer: list[int] = []
    var_pos: list[tuple[int, int]] = []
    for r, n in enumerate(sizes):
        for i in range(n):
            for j in range(i + 1, n):
                var_layer.append(r)
                var_pos.append((i, j))

    def vid(r: int, i: int, j: int) -> int:
        n = sizes[r]
        return offsets[r] + i * n - i * (i + 1) // 2 + (j - i - 1)

    pos: list[dict[int, int]] = [{v: i for i, v in enumerate(order.orders[r])} for r in range(instance.p)]

    # crossing terms: aggregate equal (var_a, var_b, parity) contributions
    agg: dict[tuple[int, int, str], int] = {}
    for r, gap_edges in enumerate(instance.edges):
        pu, pv = pos[r], pos[r + 1]
        m = len(gap_edges)
        for a in range(m):
            ua, va = gap_edges[a]
            for b in range(a + 1, m):
                ub, vb = gap_edges[b]
                if ua == ub or va == vb:
                    continue
                i, j = pu[ua], pu[ub]
                k, l = pv[va], pv[vb]
                if i > j:
                    i, j = j, i
                    k, l = l, k
                upper = vid(r, i, j)
                if k < l:
                    key = (upper, vid(r + 1, k, l), XOR)
                else:
                    key = (upper, vid(r + 1, l, k), XNOR)
                agg[key] = agg.get(key, 0) + 1
    terms = tuple(CrossingTerm(a, b, par, w) for (a, b, par), w in sorted(agg.items()))

    triples: list[TransitivityTriple] = []
    equalities: set[tuple[int, int]] = set()
    for r in range(instance.p):
        n = sizes[r]
        tree = instance.trees[r]
        leaf_at = order.orders[r]
        for h in range(n):
            for i in range(h + 1, n):
                v_hi = vid(r, h, i)
                p_hi = lca(tree, leaf_at[h], leaf_at[i])
                for j in range(i + 1, n):
                    v_ij = vid(r, i, j)
                    v_hj = vid(r, h, j)
                    triples.append(TransitivityTriple(r, v_hi, v_ij, v_hj))
                    c = leaf_at[j]
                    if lca(tree, p_hi, c) != p_hi:
                        # j is outside the {h,i} bundle: it cannot separate them
                        equalities.add((min(v_hj, v_ij), max(v_hj, v_ij)))
                    p_ij = lca(tree, leaf_at[i], c)
                    if lca(tree, leaf_at[h], p_ij) != p_ij:
                        equalities.add((min(v_hi, v_hj), max(v_hi, v_hj)))

    return OrderingModel(
        instance=instance,
        orders=tuple(tuple(o) for o in order.orders),
        n_vars=total,
        layer_offsets=tuple(offsets),
        var_layer=tuple(var_layer),
        var_pos=tuple(var_pos),
        terms=terms,
        triples=tuple(triples),
        equalities=tuple(TreeEquality(a, b) for a, b in sorted(equalities)),
    )


def encode_solution(model: OrderingModel, solution: Solution) -> list[int]:
    """0/1 assignment of a solution: var is 1 iff its lower-index node is higher."""
    x = [0] * model.n_vars
    for r in range(model.instance.p):
        sol_pos = {v: i for i, v in enumerate(solution.orders[r])}
        leaf_at = model.orders[r]
        n = model.instance.layer_sizes[r]
        base = model.layer_offsets[r]
        k = 0
        for i in range(n):
            for j in range(i + 1, n):
                x[base + k] = 1 if sol_pos[leaf_at[i]] < sol_pos[leaf_at[j]] else 0
                k += 1
    return x


def decode_assignment(model: OrderingModel, x) -> Solution:
    """Assignment -> per-layer permutations (top to bottom).

    Requires transitivity (raises :class:`NotTransitive` with a witness
    triple) and the tree equalities (ValueError), which together make each
    layer a transitive tournament whose win counts are all distinct.
    """
    for t in model.triples:
        if int(x[t.var_hi]) + int(x[t.var_ij]) - int(x[t.var_hj]) not in (0, 1):
            raise NotTransitive(t)
    for e in model.equalities:
        if int(x[e.var_a]) != int(x[e.var_b]):
            raise ValueError(f"assignment breaks tree equality x{e.var_a} == x{e.var_b}")
    orders = []
    for r in range(model.instance.p):
        n = model.instance.layer_sizes[r]
        wins = [0] * n
        base = model.layer_offsets[r]
        k = 0
        for i in range(n):
            for j in range(i + 1, n):
                if int(x[base + k]):
                    wins[i] += 1
                else:
                    wins[j] += 1
                k += 1
        by_height = sorted(range(n), key=lambda i: -wins[i])
        orders.append(tuple(model.orders[r][i] for i in by_height))
    return Solution(tuple(orders))


def objective_value(model, x) -> int:
    """Exact crossing count of an assignment under a model or reduced model."""
    total = getattr(model, "offset", 0)
    for t in model.terms:
        differ = int(x[t.var_a]) != int(x[t.var_b])
        if t.parity == XOR:
            total += t.weight * differ
        else:
            total += t.weight * (not differ)
    return total


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra > rb:
                ra, rb = rb, ra
            self.parent[rb] = ra


def identify_variables(model: OrderingModel) -> ReducedModel:
    """Merge equality-connected variables into classes; rewrite terms and triples.

    Terms between merged endpoints become constant: an xor of a class with
    itself is 0 (dropped), an xnor is 1 (weight moves to the offset).  A
    transitivity triple is dropped when two or three of its variables share a
    class (the constraint is then implied by the 0/1 bounds); surviving
    triples are deduplicated.
    """
    uf = _UnionFind(model.n_vars)
    for e in model.equalities:
        uf.union(e.var_a, e.var_b)

    root_to_class: dict[int, int] = {}
    class_of = [0] * model.n_vars
    members: list[list[int]] = []
    for v in range(model.n_vars):
        r = uf.find(v)
        if r not in root_to_class:
            root_to_class[r] = len(members)
            members.append([])
        c = root_to_class[r]
        class_of[v] = c
        members[c].append(v)

    offset = 0
    agg: dict[tuple[int, int, str], int] = {}
    for t in model.terms:
        ca, cb = class_of[t.var_a], class_of[t.var_b]
        if ca == cb:
            if t.parity == XNOR:
                offset += t.weight
            continue
        if ca > cb:
            ca, cb = cb, ca
        key = (ca, cb, t.parity)
        agg[key] = agg.get(key, 0) + t.weight
    terms = tuple(CrossingTerm(a, b, par, w) for (a, b, par), w in sorted(agg.items()))

    triple_set: set[ClassTriple] = set()
    for t in model.triples:
        a, b, c = class_of[t.var_hi], class_of[t.var_ij], class_of[t.var_hj]
        if a == b or a == c or b == c:
            continue
        if a > b:
            a, b = b, a
        triple_set.add(ClassTriple(a, b, c))
    triples = tuple(sorted(triple_set, key=lambda t: (t.a, t.b, t.c)))

    class_layer = tuple(model.var_layer[ms[0]] for ms in members)
    return ReducedModel(
        model=model,
        n_classes=len(members),
        class_of=tuple(class_of),
        members=tuple(tuple(ms) for ms in members),
        class_layer=class_layer,
        terms=terms,
        triples=triples,
        offset=offset,
    )


def classes_of_solution(reduced: ReducedModel, solution: Solution) -> list[int]:
    """Class assignment of a tree-consistent solution (members must agree)."""
    x = encode_solution(reduced.model, solution)
    z = [0] * reduced.n_classes
    for c, ms in enumerate(reduced.members):
        vals = {x[v] for v in ms}
        if len(vals) != 1:
            raise ValueError(f"solution is not tree-consistent: class {c} members disagree")
        z[c] = vals.pop()
    return z


def separate_transitivity_values(reduced: ReducedModel, z: np.ndarray, tolerance: float = 1e-6):
    """Violated class-triple constraints at fractional values ``z`` (by class id).

    Yields ``(triple, sense, violation)`` with sense "upper" for
    ``x_a + x_b - x_c <= 1`` and "lower" for ``x_a + x_b - x_c >= 0``.
    Vectorized over all stored triples.
    """
    if not reduced.triples:
        return []
    za = np.asarray(z, dtype=float)
    a = np.fromiter((t.a for t in reduced.triples), dtype=np.int64, count=len(reduced.triples))
    b = np.fromiter((t.b for t in reduced.triples), dtype=np.int64, count=len(reduced.triples))
    c = np.fromiter((t.c for t in reduced.triples), dtype=np.int64, count=len(reduced.triples))
    val = za[a] + za[b] - za[c]
    out = []
    for idx in np.nonzero(val > 1.0 + tolerance)[0]:
        out.append((reduced.triples[int(idx)], "upper", float(val[idx] - 1.0)))
    for idx in np.nonzero(val < -tolerance)[0]:
        out.append((reduced.triples[int(idx)], "lower", float(-val[idx])))
    return out


def dump_model(model: OrderingModel) -> str:
    """Stable text dump for golden tests and debugging."""
    out = [f"n_vars={model.n_vars}"]
    for v in range(model.n_vars):
        r = model.var_layer[v]
        i, j = model.var_pos[v]
        a, b = model.orders[r][i], model.orders[r][j]
        out.append(f"x{v}: layer {r + 1} pos ({i},{j}) nodes ({model.instance.label(r, a)},{model.instance.label(r, b)})")
    for t in model.terms:
        out.append(f"term x{t.var_a} x{t.var_b} {t.parity} w={t.weight}")
    for t in model.triples:
        out.append(f"triple x{t.var_hi} + x{t.var_ij} - x{t.var_hj} in [0,1]")
    for e in model.equalities:
        out.append(f"equal x{e.var_a} = x{e.var_b}")
    return "\n".join(out) + "\n"
