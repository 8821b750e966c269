"""SVG rendering of solved instances.

Characters run left to right as polylines, one column per layer.  Vertical
positions come from a compact slot assignment: walking a layer's permutation
top to bottom, a node sits 1 slot below its predecessor when both belong to
the same scene bundle (their lowest common ancestor is a scene node) and 2
slots below otherwise, so bundles read as tight blocks with a visible gap
around them.  Lines are straight by default, which makes drawn line
intersections correspond exactly to counted crossings; ``smooth`` switches to
cubic curves for nicer posters.  Output is byte-deterministic for a given
(instance, solution, options) triple.
"""

from __future__ import annotations

from dataclasses import dataclass

from .mlcm import MlcmInstance, Solution, count_crossings, lca

__all__ = ["RenderOptions", "assign_slots", "render_svg", "PALETTE"]

PALETTE = (
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b",
)


@dataclass(frozen=True)
class RenderOptions:
    width: int = 100
    row_height: int = 24
    margin: int = 48
    smooth: bool = False
    stroke_width: float = 2.5
    font_size: int = 11


def assign_slots(instance: MlcmInstance, solution: Solution) -> list[list[int]]:
    """Slot per node (indexed by node id) for every layer."""
    out: list[list[int]] = []
    for r, order in enumerate(solution.orders):
        tree = instance.trees[r]
        scene = set(tree.scene_nodes())
        slots = [0] * instance.layer_sizes[r]
        slot = 0
        for k, node in enumerate(order):
            if k > 0:
                slot += 1 if lca(tree, order[k - 1], node) in scene else 2
            slots[node] = slot
        out.append(slots)
    return out


def _char_points(instance: MlcmInstance, solution: Solution,
                 slots: list[list[int]]) -> list[tuple[str, list[tuple[int, int]]]]:
    """(name, [(layer, slot), ...]) per drawn line, in first-appearance order."""
    if instance.labels is not None:
        names: list[str] = []
        pts: dict[str, list[tuple[int, int]]] = {}
        for r in range(instance.p):
            for node in solution.orders[r]:
                c = instance.labels[r][node]
                if c not in pts:
                    pts[c] = []
                    names.append(c)
                pts[c].append((r, slots[r][node]))
        return [(c, pts[c]) for c in names]
    # unlabeled instances: one two-point line per edge
    lines = []
    for r, gap_edges in enumerate(instance.edges):
        for u, v in gap_edges:
            lines.append((f"e{r + 1}.{u}.{v}", [(r, slots[r][u]), (r + 1, slots[r + 1][v])]))
    return lines


def render_svg(instance: MlcmInstance, solution: Solution,
               options: RenderOptions | None = None) -> str:
    opt = options or RenderOptions()
    slots = assign_slots(instance, solution)
    crossings = count_crossings(instance, solution)

    def x(r: int) -> float:
        return opt.margin + r * opt.width

    def y(slot: int) -> float:
        return opt.margin + slot * opt.row_height

    max_slot = max((s for layer in slots for s in layer), default=0)
    width = 2 * opt.margin + max(instance.p - 1, 0) * opt.width
    height = 2 * opt.margin + max_slot * opt.row_height + 2 * opt.font_size

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]

    lines = _char_points(instance, solution, slots)
    for idx, (name, pts) in enumerate(lines):
        color = PALETTE[idx % len(PALETTE)]
        coords = [(x(r), y(s)) for r, s in pts]
        if opt.smooth and len(coords) > 1:
            d = [f"M {coords[0][0]:.1f} {coords[0][1]:.1f}"]
            for (x0, y0), (x1, y1) in zip(coords, coords[1:]):
                mid = (x0 + x1) / 2.0
                d.append(f"C {mid:.1f} {y0:.1f} {mid:.1f} {y1:.1f} {x1:.1f} {y1:.1f}")
            parts.append(f'<path d="{" ".join(d)}" fill="none" stroke="{color}" '
                         f'stroke-width="{opt.stroke_width}"/>')
        else:
            points = " ".join(f"{px:.1f},{py:.1f}" for px, py in coords)
            parts.append(f'<polyline points="{points}" fill="none" stroke="{color}" '
                         f'stroke-width="{opt.stroke_width}"/>')
        lx, ly = coords[0]
        safe = _escape(name)
        parts.append(f'<text x="{lx - 6:.1f}" y="{ly + 4:.1f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="{opt.font_size}" '
                     f'fill="{color}">{safe}</text>')

    parts.append(f'<text id="crossing-count" x="{opt.margin}" y="{height - opt.font_size}" '
                 f'font-family="sans-serif" font-size="{opt.font_size}" '
                 f'fill="#333333">crossings={crossings}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;"))
