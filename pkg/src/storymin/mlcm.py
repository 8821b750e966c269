"""Multi-layer crossing minimization instances with per-layer tree constraints.

An instance has ``p`` layers of nodes, edges only between consecutive layers,
and a rooted tree per layer whose leaves are exactly that layer's nodes.  A
node ordering of a layer is *admissible* only if it is tree-consistent: the
leaves of every subtree must occupy a contiguous block.  For storyline
instances the internal nodes are scene gatherings, so tree consistency keeps
each scene's characters bundled.

Orientation convention (pinned for the whole package): earlier in a layer's
permutation = drawn higher.  ``orders[r][0]`` is the topmost node of layer r.

Node ids within a layer are dense ints ``0..n_r-1``; ids are per-layer (node 3
of layer 0 and node 3 of layer 1 are unrelated).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property

from .validation import FormatError, ValidationReport

__all__ = [
    "LayerTree",
    "MlcmInstance",
    "Solution",
    "InstanceFormatError",
    "lca",
    "is_tree_consistent",
    "count_crossings",
    "validate_instance",
    "parse_instance",
    "format_instance",
    "parse_solution",
    "format_solution",
]

ROOT_LABEL = "root"
_ID_RE = re.compile(r"[A-Za-z0-9_.]+\Z")


class InstanceFormatError(FormatError):
    """Malformed instance or solution text."""


@dataclass(frozen=True)
class LayerTree:
    """Rooted tree over one layer.

    Leaves are node ids ``0..n_leaves-1``; internal nodes get the ids
    ``n_leaves..n_nodes-1``.  ``parent[v]`` is -1 exactly for the root.
    ``internal_labels`` names internal nodes (scene ids; a synthetic root is
    labeled ``"root"``).  Labels whose value starts with ``"root"`` mark
    non-scene internals for rendering purposes.
    """

    n_leaves: int
    parent: tuple[int, ...]
    internal_labels: tuple[str, ...] = ()

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    @cached_property
    def root(self) -> int:
        roots = [v for v, p in enumerate(self.parent) if p == -1]
        if len(roots) != 1:
            raise ValueError(f"tree must have exactly one root, found {len(roots)}")
        return roots[0]

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        kids: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for v, p in enumerate(self.parent):
            if p >= 0:
                kids[p].append(v)
        return tuple(tuple(k) for k in kids)

    @cached_property
    def depth(self) -> tuple[int, ...]:
        d = [0] * self.n_nodes
        for v in self._topo_order():
            p = self.parent[v]
            if p >= 0:
                d[v] = d[p] + 1
        return tuple(d)

    def _topo_order(self) -> list[int]:
        """Root first, children after parents (iterative DFS)."""
        order: list[int] = []
        stack = [self.root]
        while stack:
            v = stack.pop()
            order.append(v)
            stack.extend(reversed(self.children[v]))
        return order

    def is_leaf(self, v: int) -> bool:
        return v < self.n_leaves

    def label_of(self, v: int) -> str | None:
        if self.is_leaf(v) or not self.internal_labels:
            return None
        return self.internal_labels[v - self.n_leaves]

    @cached_property
    def leaf_sets(self) -> tuple[frozenset[int], ...]:
        """Leaves under each node (by node id)."""
        sets: list[set[int]] = [set() for _ in range(self.n_nodes)]
        for v in reversed(self._topo_order()):
            if self.is_leaf(v):
                sets[v].add(v)
            p = self.parent[v]
            if p >= 0:
                sets[p] |= sets[v]
        return tuple(frozenset(s) for s in sets)

    def scene_nodes(self) -> tuple[int, ...]:
        """Internal nodes that stand for a scene (label not starting 'root')."""
        out = []
        for v in range(self.n_leaves, self.n_nodes):
            lbl = self.label_of(v)
            if lbl is not None and not lbl.startswith(ROOT_LABEL):
                out.append(v)
        return tuple(out)

    def canonical_leaf_order(self) -> tuple[int, ...]:
        """Leaves in DFS order with children taken as stored (tree-consistent)."""
        return tuple(v for v in self._topo_order() if self.is_leaf(v))

    @staticmethod
    def from_nested(spec, n_leaves: int) -> "LayerTree":
        """Build from nested lists: leaf ids and ``(label, [children...])`` pairs.

        Example: ``("root", [("s1", [0, 1]), 2])`` for leaves {0,1,2}.
        """
        parents: dict[int, int] = {}
        labels: list[str] = []
        next_id = [n_leaves]

        def walk(node) -> int:
            if isinstance(node, int):
                return node
            label, kids = node
            my_id = next_id[0]
            next_id[0] += 1
            labels.append(str(label))
            for k in kids:
                parents[walk(k)] = my_id
            return my_id

        walk(spec)
        n_nodes = next_id[0]
        parent = [-1] * n_nodes
        for v, p in parents.items():
            parent[v] = p
        return LayerTree(n_leaves, tuple(parent), tuple(labels))


@dataclass(frozen=True)
class MlcmInstance:
    """A ``p``-layer instance: layers are implicit (sizes), edges per gap, tree per layer.

    ``edges[r]`` holds ``(u, v)`` pairs with ``u`` in layer r and ``v`` in
    layer r+1.  ``labels[r]``, when present, names layer r's nodes (character
    names for storyline instances) and is what the text format shows.
    """

    layer_sizes: tuple[int, ...]
    edges: tuple[tuple[tuple[int, int], ...], ...]
    trees: tuple[LayerTree, ...]
    labels: tuple[tuple[str, ...], ...] | None = None

    @property
    def p(self) -> int:
        return len(self.layer_sizes)

    @property
    def n_nodes(self) -> int:
        return sum(self.layer_sizes)

    @property
    def n_edges(self) -> int:
        return sum(len(e) for e in self.edges)

    def label(self, r: int, v: int) -> str:
        if self.labels is not None:
            return self.labels[r][v]
        return str(v)


@dataclass(frozen=True)
class Solution:
    """One permutation per layer, top to bottom."""

    orders: tuple[tuple[int, ...], ...]


def lca(tree: LayerTree, a: int, b: int) -> int:
    """Lowest common ancestor of two nodes (parent-pointer walk)."""
    da, db = tree.depth[a], tree.depth[b]
    while da > db:
        a = tree.parent[a]
        da -= 1
    while db > da:
        b = tree.parent[b]
        db -= 1
    while a != b:
        a = tree.parent[a]
        b = tree.parent[b]
    return a


def is_tree_consistent(tree: LayerTree, order: tuple[int, ...] | list[int]) -> bool:
    """True iff every subtree's leaves form a contiguous block in ``order``."""
    if sorted(order) != list(range(tree.n_leaves)):
        raise ValueError("order must be a permutation of the layer's leaves")
    pos = {v: i for i, v in enumerate(order)}
    for v in range(tree.n_leaves, tree.n_nodes):
        leaves = tree.leaf_sets[v]
        ps = [pos[x] for x in leaves]
        if max(ps) - min(ps) + 1 != len(ps):
            return False
    return True


def _inversions(values: list[int]) -> int:
    """Strict inversions (i<j with v[i] > v[j]) via a Fenwick tree."""
    if not values:
        return 0
    size = max(values) + 1
    fen = [0] * (size + 1)

    def add(i: int) -> None:
        i += 1
        while i <= size:
            fen[i] += 1
            i += i & (-i)

    def count_le(i: int) -> int:  # count of added values <= i
        i += 1
        s = 0
        while i > 0:
            s += fen[i]
            i -= i & (-i)
        return s

    inv = 0
    seen = 0
    for v in values:
        inv += seen - count_le(v)  # previously added values strictly greater
        add(v)
        seen += 1
    return inv


def count_crossings(instance: MlcmInstance, solution: Solution) -> int:
    """Number of edge pairs that cross, summed over consecutive-layer gaps.

    Two edges of the same gap cross iff their endpoints appear in opposite
    relative order on the two layers.  Edges sharing an endpoint never cross.
    """
    if len(solution.orders) != instance.p:
        raise ValueError("solution layer count does not match instance")
    total = 0
    for r, gap_edges in enumerate(instance.edges):
        if not gap_edges:
            continue
        pos_u = {v: i for i, v in enumerate(solution.orders[r])}
        pos_v = {v: i for i, v in enumerate(solution.orders[r + 1])}
        pairs = sorted((pos_u[u], pos_v[v]) for u, v in gap_edges)
        total += _inversions([b for _, b in pairs])
    return total


def validate_instance(instance: MlcmInstance) -> ValidationReport:
    """Check structural invariants; empty report == well-formed instance."""
    report = ValidationReport()
    if len(instance.edges) != max(instance.p - 1, 0):
        report.add("bad-shape", f"expected {max(instance.p - 1, 0)} edge groups, got {len(instance.edges)}")
    if len(instance.trees) != instance.p:
        report.add("bad-shape", f"expected {instance.p} trees, got {len(instance.trees)}")
        return report
    if instance.labels is not None and len(instance.labels) != instance.p:
        report.add("bad-shape", "labels present but not one group per layer")

    for r, tree in enumerate(instance.trees):
        n = instance.layer_sizes[r]
        loc = f"tree {r + 1}"
        if tree.n_leaves != n:
            report.add("tree-leaf-mismatch", f"layer has {n} nodes but tree has {tree.n_leaves} leaves", loc)
            continue
        roots = [v for v, p in enumerate(tree.parent) if p == -1]
        if len(roots) != 1:
            report.add("not-a-tree", f"{len(roots)} roots", loc)
            continue
        # reachability + acyclicity: every node must reach the root
        ok = True
        for v in range(tree.n_nodes):
            seen = set()
            x = v
            while x != -1 and x not in seen:
                seen.add(x)
                x = tree.parent[x]
            if x != -1:
                report.add("not-a-tree", f"parent cycle through node {v}", loc)
                ok = False
                break
        if not ok:
            continue
        if tree.n_nodes == tree.n_leaves:
            report.add("no-internal-node", "tree has no internal node", loc)
            continue
        if n > 0 and tree.is_leaf(tree.root):
            report.add("leaf-root", "root must be internal", loc)
        for v in range(tree.n_leaves, tree.n_nodes):
            if not tree.children[v]:
                report.add("childless-internal", f"internal node {v} has no children", loc)
        if instance.labels is not None and len(instance.labels[r]) != n:
            report.add("label-mismatch", f"layer {r + 1} has {n} nodes but {len(instance.labels[r])} labels", loc)

    for r, gap_edges in enumerate(instance.edges):
        loc = f"edges {r + 1}"
        if r + 1 >= instance.p:
            break
        nu, nv = instance.layer_sizes[r], instance.layer_sizes[r + 1]
        seen_e = set()
        for u, v in gap_edges:
            if not (0 <= u < nu and 0 <= v < nv):
                report.add("edge-out-of-range", f"edge {u}-{v} out of range", loc)
            if (u, v) in seen_e:
                report.add("parallel-edge", f"edge {u}-{v} repeated", loc)
            seen_e.add((u, v))
    return report


# ---------------------------------------------------------------------------
# text format
#
#   p=3
#   layer 1: a b c
#   tree 1: (root (s1 a b) c)
#   ...
#   edges 1: a-a, b-c
#
# Layers are 1-based in the format.  Ids must match [A-Za-z0-9_.]+ so that
# the "-" edge separator stays unambiguous.  Edge endpoints are resolved in
# the namespaces of layer r and layer r+1 respectively.
# ---------------------------------------------------------------------------


def _check_id(name: str, location: str) -> str:
    if not _ID_RE.match(name):
        raise InstanceFormatError("bad-id", f"id {name!r} must match [A-Za-z0-9_.]+", location)
    return name


def _parse_tree_text(text: str, names: list[str], location: str) -> LayerTree:
    """Parse a parenthesized tree like ``(root (s1 a b) c)`` over named leaves."""
    tokens = re.findall(r"\(|\)|[^\s()]+", text)
    if not tokens:
        raise InstanceFormatError("bad-tree", "empty tree", location)
    name_to_id = {nm: i for i, nm in enumerate(names)}
    n_leaves = len(names)
    parent: list[int] = [-1] * n_leaves
    labels: list[str] = []
    pos = 0

    def parse_node() -> int:
        nonlocal pos
        if pos >= len(tokens):
            raise InstanceFormatError("bad-tree", "unexpected end of tree", location)
        tok = tokens[pos]
        if tok == "(":
            pos += 1
            if pos >= len(tokens) or tokens[pos] in "()":
                raise InstanceFormatError("bad-tree", "internal node needs a label", location)
            label = tokens[pos]
            pos += 1
            my_id = n_leaves + len(labels)
            labels.append(label)
            parent.append(-1)
            kids = 0
            while pos < len(tokens) and tokens[pos] != ")":
                child = parse_node()
                if parent[child] != -1:
                    raise InstanceFormatError("bad-tree", "node used twice", location)
                parent[child] = my_id
                kids += 1
            if pos >= len(tokens):
                raise InstanceFormatError("bad-tree", "missing ')'", location)
            pos += 1  # consume ')'
            if kids == 0:
                raise InstanceFormatError("bad-tree", f"internal node {label!r} has no children", location)
            return my_id
        if tok == ")":
            raise InstanceFormatError("bad-tree", "unexpected ')'", location)
        pos += 1
        if tok not in name_to_id:
            raise InstanceFormatError("bad-tree", f"unknown leaf {tok!r}", location)
        return name_to_id[tok]

    root = parse_node()
    if pos != len(tokens):
        raise InstanceFormatError("bad-tree", "trailing tokens after tree", location)
    if root < n_leaves:
        raise InstanceFormatError("bad-tree", "root must be an internal node", location)
    missing = [names[v] for v in range(n_leaves) if parent[v] == -1 and v != root]
    if missing:
        raise InstanceFormatError("bad-tree", f"leaves not attached: {missing}", location)
    return LayerTree(n_leaves, tuple(parent), tuple(labels))


def parse_instance(text: str) -> MlcmInstance:
    """Parse the instance text format (see module docstring of this section)."""
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(no, ln) for no, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise InstanceFormatError("bad-shape", "empty instance text")
    no, first = lines[0]
    m = re.match(r"p\s*=\s*(\d+)\Z", first)
    if not m:
        raise InstanceFormatError("bad-shape", "first line must be 'p=<count>'", f"line {no}")
    p = int(m.group(1))

    layer_names: dict[int, list[str]] = {}
    tree_texts: dict[int, tuple[str, int]] = {}
    edge_texts: dict[int, tuple[str, int]] = {}
    for no, ln in lines[1:]:
        m = re.match(r"(layer|tree|edges)\s+(\d+)\s*:\s*(.*)\Z", ln)
        if not m:
            raise InstanceFormatError("bad-shape", f"unrecognized line {ln!r}", f"line {no}")
        kind, idx_s, rest = m.groups()
        idx = int(idx_s)
        if kind == "layer":
            if not (1 <= idx <= p):
                raise InstanceFormatError("bad-shape", f"layer {idx} out of range 1..{p}", f"line {no}")
            if idx in layer_names:
                raise InstanceFormatError("bad-shape", f"duplicate layer {idx}", f"line {no}")
            names = rest.split()
            if len(set(names)) != len(names):
                raise InstanceFormatError("duplicate-node", f"layer {idx} repeats a node id", f"line {no}")
            for nm in names:
                _check_id(nm, f"line {no}")
            layer_names[idx] = names
        elif kind == "tree":
            if not (1 <= idx <= p):
                raise InstanceFormatError("bad-shape", f"tree {idx} out of range 1..{p}", f"line {no}")
            if idx in tree_texts:
                raise InstanceFormatError("bad-shape", f"duplicate tree {idx}", f"line {no}")
            tree_texts[idx] = (rest, no)
        else:
            if not (1 <= idx <= p - 1):
                raise InstanceFormatError("bad-shape", f"edges {idx} out of range 1..{p - 1}", f"line {no}")
            if idx in edge_texts:
                raise InstanceFormatError("bad-shape", f"duplicate edges {idx}", f"line {no}")
            edge_texts[idx] = (rest, no)

    for r in range(1, p + 1):
        if r not in layer_names:
            raise InstanceFormatError("bad-shape", f"missing 'layer {r}:' line")
        if r not in tree_texts:
            raise InstanceFormatError("bad-shape", f"missing 'tree {r}:' line")

    trees = []
    for r in range(1, p + 1):
        ttext, no = tree_texts[r]
        trees.append(_parse_tree_text(ttext, layer_names[r], f"line {no}"))

    edges: list[tuple[tuple[int, int], ...]] = []
    for r in range(1, p):
        rest, no = edge_texts.get(r, ("", -1))
        loc = f"line {no}" if no > 0 else f"edges {r}"
        id_u = {nm: i for i, nm in enumerate(layer_names[r])}
        id_v = {nm: i for i, nm in enumerate(layer_names[r + 1])}
        gap: list[tuple[int, int]] = []
        rest = rest.strip()
        if rest:
            for part in rest.split(","):
                part = part.strip()
                if not part:
                    raise InstanceFormatError("bad-shape", "empty edge entry", loc)
                bits = part.split("-")
                if len(bits) != 2:
                    raise InstanceFormatError("bad-shape", f"edge {part!r} must be 'u-v'", loc)
                us, vs = bits[0].strip(), bits[1].strip()
                if us not in id_u:
                    raise InstanceFormatError("unknown-node", f"edge endpoint {us!r} not in layer {r}", loc)
                if vs not in id_v:
                    raise InstanceFormatError("unknown-node", f"edge endpoint {vs!r} not in layer {r + 1}", loc)
                e = (id_u[us], id_v[vs])
                if e in gap:
                    raise InstanceFormatError("parallel-edge", f"edge {part!r} repeated", loc)
                gap.append(e)
        edges.append(tuple(gap))

    instance = MlcmInstance(
        layer_sizes=tuple(len(layer_names[r]) for r in range(1, p + 1)),
        edges=tuple(edges),
        trees=tuple(trees),
        labels=tuple(tuple(layer_names[r]) for r in range(1, p + 1)),
    )
    report = validate_instance(instance)
    if not report.ok:
        v = report.violations[0]
        raise InstanceFormatError(v.code, v.message, v.location)
    return instance


def _format_tree(tree: LayerTree, names: list[str]) -> str:
    def fmt(v: int) -> str:
        if tree.is_leaf(v):
            return names[v]
        label = tree.label_of(v) or f"n{v}"
        inner = " ".join(fmt(c) for c in tree.children[v])
        return f"({label} {inner})"

    return fmt(tree.root)


def format_instance(instance: MlcmInstance) -> str:
    """Instance text format; inverse of :func:`parse_instance`."""
    report = validate_instance(instance)
    if not report.ok:
        raise ValueError("refusing to format an invalid instance: " + report.summary())
    out = [f"p={instance.p}"]
    names_per_layer: list[list[str]] = []
    for r in range(instance.p):
        names = [instance.label(r, v) for v in range(instance.layer_sizes[r])]
        if len(set(names)) != len(names):
            raise ValueError(f"layer {r + 1} labels are not unique")
        for nm in names:
            _check_id(nm, f"layer {r + 1}")
        names_per_layer.append(names)
        out.append(f"layer {r + 1}: " + " ".join(names))
        out.append(f"tree {r + 1}: " + _format_tree(instance.trees[r], names))
    for r, gap_edges in enumerate(instance.edges):
        parts = [f"{names_per_layer[r][u]}-{names_per_layer[r + 1][v]}" for u, v in gap_edges]
        out.append(f"edges {r + 1}: " + ", ".join(parts))
    return "\n".join(out) + "\n"


def parse_solution(text: str, instance: MlcmInstance) -> Solution:
    """Parse the solution text format against an instance (names resolved per layer).

    The trailing ``crossings=<int>`` line is verified against a recount when
    present.
    """
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(no, ln) for no, ln in lines if ln and not ln.startswith("#")]
    orders: dict[int, tuple[int, ...]] = {}
    claimed: int | None = None
    for no, ln in lines:
        m = re.match(r"crossings\s*=\s*(\d+)\Z", ln)
        if m:
            claimed = int(m.group(1))
            continue
        m = re.match(r"layer\s+(\d+)\s*:\s*(.*)\Z", ln)
        if not m:
            raise InstanceFormatError("bad-shape", f"unrecognized line {ln!r}", f"line {no}")
        idx = int(m.group(1))
        if not (1 <= idx <= instance.p):
            raise InstanceFormatError("bad-shape", f"layer {idx} out of range", f"line {no}")
        if idx in orders:
            raise InstanceFormatError("bad-shape", f"duplicate layer {idx}", f"line {no}")
        names = m.group(2).split()
        r = idx - 1
        lookup = {instance.label(r, v): v for v in range(instance.layer_sizes[r])}
        if sorted(names) != sorted(lookup):
            raise InstanceFormatError("bad-permutation", f"layer {idx} is not a permutation of the layer's nodes", f"line {no}")
        orders[idx] = tuple(lookup[nm] for nm in names)
    for r in range(1, instance.p + 1):
        if r not in orders:
            raise InstanceFormatError("bad-shape", f"missing 'layer {r}:' line")
    sol = Solution(tuple(orders[r] for r in range(1, instance.p + 1)))
    if claimed is not None:
        actual = count_crossings(instance, sol)
        if actual != claimed:
            raise InstanceFormatError("crossings-mismatch", f"file claims {claimed} crossings, recount gives {actual}")
    return sol


def format_solution(instance: MlcmInstance, solution: Solution) -> str:
    """Solution text format with the trailing crossings line."""
    out = []
    for r, order in enumerate(solution.orders):
        out.append(f"layer {r + 1}: " + " ".join(instance.label(r, v) for v in order))
    out.append(f"crossings={count_crossings(instance, solution)}")
    return "\n".join(out) + "\n"
