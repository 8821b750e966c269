"""Story -> layered instance construction, plus layer merging.

Construction: one layer per distinct scene-boundary time (duplicate times
collapse to one layer), a node per character alive at that time, a path edge
per character between consecutive layers it is alive on, an internal tree
node per scene active at that time, and a synthetic root unless a single
active scene already gathers the whole layer.  Trees built this way always
have height <= 2.

Merging: consecutive layers are merged when their path edges form a perfect
matching and the matching is a tree isomorphism (the layers admit exactly the
same bundlings).  Crossing counts are preserved: inside a merged run the
matched orders are forced equal, so no crossings are lost or invented.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .mlcm import LayerTree, MlcmInstance, Solution
from .story import Story, all_lifespans, validate_story
from .validation import ValidationReport

__all__ = [
    "TransformTrace",
    "MergeMap",
    "InvalidStoryError",
    "build_instance",
    "merge_layers",
    "expand_solution",
    "identity_merge_map",
]


class InvalidStoryError(ValueError):
    """build_instance was given a story that fails validation."""

    def __init__(self, report: ValidationReport):
        self.report = report
        super().__init__("story fails validation:\n" + report.summary())


@dataclass(frozen=True)
class TransformTrace:
    """Provenance of a constructed instance.

    ``alive[r]`` lists the characters of layer r in node-id order (so it
    doubles as the label table), ``active_scenes[r]`` the scene ids whose
    intervals contain the layer's time.
    """

    time_points: tuple[Fraction, ...]
    alive: tuple[tuple[str, ...], ...]
    active_scenes: tuple[tuple[str, ...], ...]


def build_instance(story: Story) -> tuple[MlcmInstance, TransformTrace]:
    """Construct the layered instance for a validated story."""
    report = validate_story(story)
    if not report.ok:
        raise InvalidStoryError(report)

    times = sorted({t for s in story.scenes for t in (s.begin, s.end)})
    spans = all_lifespans(story)

    alive: list[tuple[str, ...]] = []
    active: list[tuple[str, ...]] = []
    for t in times:
        alive.append(tuple(c for c in story.characters if spans[c].begin <= t <= spans[c].end))
        active.append(tuple(s.id for s in story.scenes if s.begin <= t <= s.end))

    scene_by_id = {s.id: s for s in story.scenes}
    trees: list[LayerTree] = []
    for r, t in enumerate(times):
        chars = alive[r]
        char_id = {c: i for i, c in enumerate(chars)}
        n = len(chars)
        groups = [(sid, sorted(char_id[c] for c in scene_by_id[sid].members)) for sid in active[r]]
        covered = {v for _, vs in groups for v in vs}
        free = [v for v in range(n) if v not in covered]
        if len(groups) == 1 and not free:
            sid, vs = groups[0]
            parent = [n] * n + [-1]
            trees.append(LayerTree(n, tuple(parent), (sid,)))
        else:
            # scene nodes n..n+k-1, synthetic root last
            k = len(groups)
            root = n + k
            parent = [0] * n + [root] * k + [-1]
            labels = [sid for sid, _ in groups] + ["root"]
            for gi, (_, vs) in enumerate(groups):
                for v in vs:
                    parent[v] = n + gi
            for v in free:
                parent[v] = root
            trees.append(LayerTree(n, tuple(parent), tuple(labels)))

    edges: list[tuple[tuple[int, int], ...]] = []
    for r in range(len(times) - 1):
        up = {c: i for i, c in enumerate(alive[r])}
        down = {c: i for i, c in enumerate(alive[r + 1])}
        edges.append(tuple((up[c], down[c]) for c in alive[r] if c in down))

    instance = MlcmInstance(
        layer_sizes=tuple(len(a) for a in alive),
        edges=tuple(edges),
        trees=tuple(trees),
        labels=tuple(alive),
    )
    trace = TransformTrace(tuple(times), tuple(alive), tuple(active))
    return instance, trace


@dataclass(frozen=True)
class MergeMap:
    """How original layers map onto merged layers.

    ``layer_of[r]`` is the merged index of original layer r; ``rep_layer[m]``
    the original index whose nodes the merged layer m reuses; ``node_maps[r]``
    sends original node ids of layer r to the representative's ids.
    """

    layer_of: tuple[int, ...]
    rep_layer: tuple[int, ...]
    node_maps: tuple[tuple[int, ...], ...]


def identity_merge_map(instance: MlcmInstance) -> MergeMap:
    return MergeMap(
        layer_of=tuple(range(instance.p)),
        rep_layer=tuple(range(instance.p)),
        node_maps=tuple(tuple(range(n)) for n in instance.layer_sizes),
    )


def _matching_bijection(instance: MlcmInstance, r: int) -> list[int] | None:
    """If gap r's edges are a perfect matching, return phi with phi[u] = v."""
    nu, nv = instance.layer_sizes[r], instance.layer_sizes[r + 1]
    if nu != nv or len(instance.edges[r]) != nu or nu == 0:
        return None
    phi = [-1] * nu
    hit_v = [False] * nv
    for u, v in instance.edges[r]:
        if phi[u] != -1 or hit_v[v]:
            return None
        phi[u] = v
        hit_v[v] = True
    return phi


def _laminar_family(tree: LayerTree) -> set[frozenset[int]]:
    return {tree.leaf_sets[v] for v in range(tree.n_leaves, tree.n_nodes)}


def _mergeable(instance: MlcmInstance, r: int) -> list[int] | None:
    """Bijection for merging layers r and r+1, or None.

    Requires a perfect matching whose induced leaf relabeling carries layer
    r's bundling structure exactly onto layer r+1's.
    """
    phi = _matching_bijection(instance, r)
    if phi is None:
        return None
    fam_r = {frozenset(phi[x] for x in s) for s in _laminar_family(instance.trees[r])}
    if fam_r != _laminar_family(instance.trees[r + 1]):
        return None
    return phi


def merge_layers(instance: MlcmInstance) -> tuple[MlcmInstance, MergeMap]:
    """Collapse maximal runs of mergeable consecutive layers.

    The first layer of each run is kept as representative.  Idempotent:
    merging a merged instance changes nothing (a merged gap is never a
    perfect-matching tree isomorphism again only because runs were maximal).
    """
    p = instance.p
    if p == 0:
        return instance, identity_merge_map(instance)

    phis: list[list[int] | None] = [_mergeable(instance, r) for r in range(p - 1)]

    layer_of = [0] * p
    rep_layer = [0]
    node_maps: list[list[int]] = [list(range(instance.layer_sizes[0]))]
    for r in range(1, p):
        phi = phis[r - 1]
        if phi is not None:
            layer_of[r] = layer_of[r - 1]
            inv = [0] * len(phi)
            for u, v in enumerate(phi):
                inv[v] = u
            prev = node_maps[r - 1]
            node_maps.append([prev[inv[v]] for v in range(len(phi))])
        else:
            layer_of[r] = layer_of[r - 1] + 1
            rep_layer.append(r)
            node_maps.append(list(range(instance.layer_sizes[r])))

    m = len(rep_layer)
    new_edges: list[tuple[tuple[int, int], ...]] = []
    for g in range(m - 1):
        boundary = rep_layer[g + 1] - 1  # last original layer of run g
        psi = node_maps[boundary]
        new_edges.append(tuple((psi[u], v) for u, v in instance.edges[boundary]))

    merged = MlcmInstance(
        layer_sizes=tuple(instance.layer_sizes[r] for r in rep_layer),
        edges=tuple(new_edges),
        trees=tuple(instance.trees[r] for r in rep_layer),
        labels=None if instance.labels is None else tuple(instance.labels[r] for r in rep_layer),
    )
    mm = MergeMap(tuple(layer_of), tuple(rep_layer), tuple(tuple(nm) for nm in node_maps))
    return merged, mm


def expand_solution(mm: MergeMap, merged_solution: Solution) -> Solution:
    """Pull a merged-instance solution back to the original layering."""
    orders = []
    for r, m in enumerate(mm.layer_of):
        to_rep = mm.node_maps[r]
        inv = {rep: orig for orig, rep in enumerate(to_rep)}
        orders.append(tuple(inv[v] for v in merged_solution.orders[m]))
    return Solution(tuple(orders))
