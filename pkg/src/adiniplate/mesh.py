"""Axis-aligned rectangular partitions with 1-irregular hanging nodes.

A mesh is a flat list of active rectangles over a rectilinear domain.
Refinement always splits a rectangle into its four midpoint children, so
meshes with dyadic initial coordinates keep exactly representable vertex
coordinates and vertex identity is plain float equality.

Vertex classification follows the usual convention: a vertex is regular
if it is a corner of every element containing it, otherwise it hangs in
the interior of exactly one element side (the host edge).  The mesh
condition requires the two host-edge endpoints of every hanging vertex
to be regular and at most one hanging vertex per edge.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

CLAMPED = "C"
SIMPLY_SUPPORTED = "S"


@dataclass(frozen=True)
class BoundarySegment:
    """Closed axis-aligned segment of the domain boundary with a BC tag."""
    a: tuple[float, float]
    b: tuple[float, float]
    tag: str = CLAMPED

    def contains_point(self, x: float, y: float) -> bool:
        (ax, ay), (bx, by) = self.a, self.b
        if ax == bx:
            return x == ax and min(ay, by) <= y <= max(ay, by)
        if ay == by:
            return y == ay and min(ax, bx) <= x <= max(ax, bx)
        raise ValueError("boundary segment is not axis aligned")

    def contains_segment(self, p, q) -> bool:
        return self.contains_point(*p) and self.contains_point(*q)


@dataclass(frozen=True)
class Domain:
    """Union of axis-aligned rectangles with a tagged boundary polyline."""
    cells: tuple  # ((x0, x1, y0, y1), ...)
    boundary: tuple  # BoundarySegment, ...

    @property
    def area(self) -> float:
        return sum((x1 - x0) * (y1 - y0) for x0, x1, y0, y1 in self.cells)

    def bbox(self):
        xs = [c[0] for c in self.cells] + [c[1] for c in self.cells]
        ys = [c[2] for c in self.cells] + [c[3] for c in self.cells]
        return min(xs), max(xs), min(ys), max(ys)

    def contains_rect(self, x0, x1, y0, y1) -> bool:
        """The rect lies in the union (assumes grid-aligned construction)."""
        cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        for a0, a1, b0, b1 in self.cells:
            if a0 <= cx <= a1 and b0 <= cy <= b1:
                return a0 <= x0 and x1 <= a1 and b0 <= y0 and y1 <= b1
        return False

    def boundary_tags(self, x: float, y: float) -> set[str]:
        return {s.tag for s in self.boundary if s.contains_point(x, y)}

    def segment_tag(self, p, q) -> str | None:
        for s in self.boundary:
            if s.contains_segment(p, q):
                return s.tag
        return None


def _rect_boundary(cells) -> list[BoundarySegment]:
    """Derive the boundary of a union of cells (edges that appear once)."""
    from collections import Counter
    edges = Counter()
    for x0, x1, y0, y1 in cells:
        for p, q in [((x0, y0), (x1, y0)), ((x1, y0), (x1, y1)),
                     ((x0, y1), (x1, y1)), ((x0, y0), (x0, y1))]:
            edges[(p, q)] += 1
    return [BoundarySegment(p, q) for (p, q), n in edges.items() if n == 1]


def square_domain(lo: float = -1.0, hi: float = 1.0) -> Domain:
    s = [BoundarySegment((lo, lo), (hi, lo)), BoundarySegment((hi, lo), (hi, hi)),
         BoundarySegment((lo, hi), (hi, hi)), BoundarySegment((lo, lo), (lo, hi))]
    return Domain(cells=((lo, hi, lo, hi),), boundary=tuple(s))


def lshape_domain(mixed: bool = False) -> Domain:
    """(-1,1)^2 minus the fourth-quadrant square [0,1]x[-1,0].

    With ``mixed=True`` the two reentrant legs ({0} x [-1,0] and
    [0,1] x {0}) are tagged simply supported, the rest clamped.
    """
    cells = ((-1.0, 0.0, -1.0, 0.0), (-1.0, 0.0, 0.0, 1.0), (0.0, 1.0, 0.0, 1.0))
    leg_tag = SIMPLY_SUPPORTED if mixed else CLAMPED
    segs = [
        BoundarySegment((-1.0, -1.0), (0.0, -1.0)),
        BoundarySegment((-1.0, -1.0), (-1.0, 1.0)),
        BoundarySegment((-1.0, 1.0), (1.0, 1.0)),
        BoundarySegment((1.0, 0.0), (1.0, 1.0)),
        BoundarySegment((0.0, -1.0), (0.0, 0.0), tag=leg_tag),
        BoundarySegment((0.0, 0.0), (1.0, 0.0), tag=leg_tag),
    ]
    return Domain(cells=cells, boundary=tuple(segs))


@dataclass(frozen=True)
class Rect:
    id: int
    x0: float
    x1: float
    y0: float
    y1: float
    level: int = 0
    parent: int | None = None

    @property
    def hx(self) -> float:
        return 0.5 * (self.x1 - self.x0)

    @property
    def hy(self) -> float:
        return 0.5 * (self.y1 - self.y0)

    @property
    def mid(self):
        return 0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)

    @property
    def diam(self) -> float:
        return float(np.hypot(self.x1 - self.x0, self.y1 - self.y0))

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def corners(self):
        # counterclockwise from lower left
        return ((self.x0, self.y0), (self.x1, self.y0),
                (self.x1, self.y1), (self.x0, self.y1))

    def contains_point(self, x, y) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def children(self, next_id: int):
        xm, ym = self.mid
        lv, p = self.level + 1, self.id
        return [
            Rect(next_id + 0, self.x0, xm, self.y0, ym, lv, p),
            Rect(next_id + 1, xm, self.x1, self.y0, ym, lv, p),
            Rect(next_id + 2, self.x0, xm, ym, self.y1, lv, p),
            Rect(next_id + 3, xm, self.x1, ym, self.y1, lv, p),
        ]


# Vertex classification codes
REGULAR = 0
IRREGULAR = 1


@dataclass
class HangingInfo:
    """Geometry of a hanging vertex on the edge of a coarse host element."""
    host_rect: int           # id of the rect owning the hosting edge
    axis: int                # 0: edge normal to x (vertical), 1: normal to y
    z1: int                  # vertex id of the host-edge endpoint below/left
    z2: int                  # vertex id of the endpoint above/right
    lam1: float              # |z - z1|
    lam2: float              # |z - z2|


@dataclass
class EdgeSeg:
    """Maximal interval shared by exactly two elements (or one + boundary)."""
    axis: int                # 0: segment on a vertical line, 1: horizontal
    coord: float             # the line coordinate (x for axis 0)
    lo: float
    hi: float
    rect_minus: int | None   # element on the side of smaller coordinate
    rect_plus: int | None

    @property
    def length(self) -> float:
        return self.hi - self.lo


@dataclass
class Violation:
    kind: str                # "irregular-neighbor" | "multiple-hanging"
    vertex: tuple | None
    host_rect: int
    detail: str = ""


class Mesh:
    """Immutable rectangular partition; refinement returns a new Mesh."""

    def __init__(self, domain: Domain, rects: Iterable[Rect],
                 next_id: int | None = None, aspect_bound: float = 4.0):
        self.domain = domain
        self.rects = sorted(rects, key=lambda r: r.id)
        self.rect_by_id = {r.id: r for r in self.rects}
        self.next_id = next_id if next_id is not None else (
            1 + max((r.id for r in self.rects), default=-1))
        self.aspect_bound = aspect_bound
        for r in self.rects:
            if not (r.x0 < r.x1 and r.y0 < r.y1):
                raise ValueError(f"degenerate rect {r}")
            q = r.hx / r.hy
            if max(q, 1.0 / q) > aspect_bound + 1e-12:
                raise ValueError(f"aspect ratio of rect {r.id} exceeds bound")
        self._topo = None

    # ------------------------------------------------------------------
    # topology
    # ------------------------------------------------------------------
    @property
    def topo(self):
        if self._topo is None:
            self._topo = _build_topology(self)
        return self._topo

    @property
    def vertices(self) -> np.ndarray:
        return self.topo.vcoord

    @property
    def num_vertices(self) -> int:
        return len(self.topo.vcoord)

    def vertex_id(self, x: float, y: float) -> int:
        return self.topo.vid[(x, y)]

    def is_boundary_vertex(self, v: int) -> bool:
        return self.topo.vert_boundary_tags[v] is not None

    def check_mesh_condition(self) -> list[Violation]:
        return _check_condition(self)

    def total_area(self) -> float:
        return sum(r.area for r in self.rects)

    def rects_containing(self, x: float, y: float) -> list[Rect]:
        return [r for r in self.rects if r.contains_point(x, y)]

    # ------------------------------------------------------------------
    # refinement
    # ------------------------------------------------------------------
    def _split(self, ids: set[int]) -> "Mesh":
        out = []
        nid = self.next_id
        for r in self.rects:
            if r.id in ids:
                out.extend(r.children(nid))
                nid += 4
            else:
                out.append(r)
        return Mesh(self.domain, out, next_id=nid,
                    aspect_bound=self.aspect_bound)

    def uniform_refine(self) -> "Mesh":
        mesh = self._split({r.id for r in self.rects})
        assert not mesh.check_mesh_condition(), \
            "uniform refinement broke the 1-irregularity condition"
        return mesh

    def refine_marked(self, marked: Iterable[int]) -> "Mesh":
        """Split the marked rects plus the minimal closure set."""
        marked = set(marked)
        unknown = marked - set(self.rect_by_id)
        if unknown:
            raise ValueError(f"marked ids not active: {sorted(unknown)}")
        if not marked:
            return self
        mesh = self._split(marked)
        # fixpoint of forced splits: each pass splits exactly the hosts of
        # offending hanging vertices
        while True:
            violations = mesh.check_mesh_condition()
            if not violations:
                return mesh
            forced = sorted({v.host_rect for v in violations})
            mesh = mesh._split(set(forced))

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------
    def to_json(self) -> str:
        doc = {
            "domain": {
                "cells": [list(c) for c in self.domain.cells],
                "boundary": [
                    {"a": list(s.a), "b": list(s.b), "tag": s.tag}
                    for s in self.domain.boundary],
            },
            "aspect_bound": self.aspect_bound,
            "next_id": self.next_id,
            "rects": [
                {"id": r.id, "box": [r.x0, r.x1, r.y0, r.y1],
                 "level": r.level, "parent": r.parent}
                for r in self.rects],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Mesh":
        doc = json.loads(text)
        domain = Domain(
            cells=tuple(tuple(c) for c in doc["domain"]["cells"]),
            boundary=tuple(
                BoundarySegment(tuple(s["a"]), tuple(s["b"]), s["tag"])
                for s in doc["domain"]["boundary"]))
        rects = [Rect(d["id"], *d["box"], level=d["level"], parent=d["parent"])
                 for d in doc["rects"]]
        return cls(domain, rects, next_id=doc["next_id"],
                   aspect_bound=doc["aspect_bound"])


def build_tensor_mesh(domain: Domain, nx: int, ny: int,
                      aspect_bound: float = 4.0) -> Mesh:
    """Regular nx-by-ny grid over the domain bounding box; grid cells not
    contained in the domain are dropped, partial overlap is rejected."""
    if nx < 1 or ny < 1:
        raise ValueError("nx, ny must be >= 1")
    ax0, ax1, ay0, ay1 = domain.bbox()
    xs = ax0 + (ax1 - ax0) * np.arange(nx + 1) / nx
    ys = ay0 + (ay1 - ay0) * np.arange(ny + 1) / ny
    rects, covered = [], 0.0
    rid = 0
    for j in range(ny):
        for i in range(nx):
            x0, x1, y0, y1 = xs[i], xs[i + 1], ys[j], ys[j + 1]
            if domain.contains_rect(x0, x1, y0, y1):
                rects.append(Rect(rid, x0, x1, y0, y1, level=0))
                covered += (x1 - x0) * (y1 - y0)
                rid += 1
    if abs(covered - domain.area) > 1e-12 * max(domain.area, 1.0):
        raise ValueError(
            f"{nx}x{ny} grid does not tile the domain "
            f"(covered {covered}, domain area {domain.area})")
    return Mesh(domain, rects, aspect_bound=aspect_bound)


def mesh_from_rects(domain: Domain, boxes, aspect_bound: float = 4.0) -> Mesh:
    """Mesh from explicit (x0, x1, y0, y1) boxes, e.g. hand-made configs."""
    rects = [Rect(i, *b) for i, b in enumerate(boxes)]
    return Mesh(domain, rects, aspect_bound=aspect_bound)


# ----------------------------------------------------------------------
# topology construction
# ----------------------------------------------------------------------
class _Topology:
    __slots__ = ("vid", "vcoord", "rect_corner_vids", "rect_index",
                 "vclass", "hanging", "vert_boundary_tags", "edge_segs",
                 "side_interior", "irregular_rect_ids")


def _build_topology(mesh: Mesh) -> _Topology:
    t = _Topology()
    vid: dict[tuple, int] = {}
    coords: list[tuple] = []

    def get_vid(p):
        i = vid.get(p)
        if i is None:
            i = len(coords)
            vid[p] = i
            coords.append(p)
        return i

    nr = len(mesh.rects)
    t.rect_index = {r.id: k for k, r in enumerate(mesh.rects)}
    t.rect_corner_vids = np.empty((nr, 4), dtype=np.int64)
    for k, r in enumerate(mesh.rects):
        for c, p in enumerate(r.corners()):
            t.rect_corner_vids[k, c] = get_vid(p)

    # vertices grouped on grid lines, for hanging detection and adjacency
    on_vline: dict[float, list] = {}
    on_hline: dict[float, list] = {}
    for (x, y), i in vid.items():
        on_vline.setdefault(x, []).append(y)
        on_hline.setdefault(y, []).append(x)
    for lst in on_vline.values():
        lst.sort()
    for lst in on_hline.values():
        lst.sort()

    def interior_points(line_map, c, lo, hi):
        arr = line_map.get(c)
        if arr is None:
            return []
        i0 = bisect.bisect_right(arr, lo)
        i1 = bisect.bisect_left(arr, hi)
        return arr[i0:i1]

    nv = len(coords)
    t.vid = vid
    t.vcoord = np.array(coords)
    t.vclass = np.zeros(nv, dtype=np.int8)
    t.hanging = {}
    t.side_interior = {}

    # sides: (rect, side) with side 0:left 1:right 2:bottom 3:top
    for r in mesh.rects:
        sides = [
            (0, on_vline, r.x0, r.y0, r.y1),
            (1, on_vline, r.x1, r.y0, r.y1),
            (2, on_hline, r.y0, r.x0, r.x1),
            (3, on_hline, r.y1, r.x0, r.x1),
        ]
        for side, line_map, c, lo, hi in sides:
            pts = interior_points(line_map, c, lo, hi)
            if not pts:
                continue
            vertical = side in (0, 1)
            ids = []
            for p in pts:
                xy = (c, p) if vertical else (p, c)
                w = vid[xy]
                ids.append(w)
                t.vclass[w] = IRREGULAR
                z1 = vid[(c, lo) if vertical else (lo, c)]
                z2 = vid[(c, hi) if vertical else (hi, c)]
                t.hanging[w] = HangingInfo(
                    host_rect=r.id, axis=0 if vertical else 1,
                    z1=z1, z2=z2, lam1=p - lo, lam2=hi - p)
            t.side_interior[(r.id, side)] = ids

    t.vert_boundary_tags = []
    for x, y in coords:
        tags = mesh.domain.boundary_tags(x, y)
        t.vert_boundary_tags.append(_combine_tags(tags))

    t.irregular_rect_ids = set()
    for k, r in enumerate(mesh.rects):
        if any(t.vclass[t.rect_corner_vids[k]] == IRREGULAR):
            t.irregular_rect_ids.add(r.id)

    t.edge_segs = _build_edge_segs(mesh, vid, on_vline, on_hline)
    return t


def _combine_tags(tags: set[str]) -> str | None:
    """Corner precedence: clamped wins; two meeting S segments clamp too,
    which is handled later from edge incidence (here just pick a tag)."""
    if not tags:
        return None
    if CLAMPED in tags:
        return CLAMPED
    return SIMPLY_SUPPORTED


def _build_edge_segs(mesh: Mesh, vid, on_vline, on_hline) -> list[EdgeSeg]:
    """Pairwise-matched edge segments on the finest common subdivision."""
    # line -> list of (lo, hi, rect_id, +1 if rect on plus side)
    lines: dict[tuple, list] = {}
    for r in mesh.rects:
        lines.setdefault((0, r.x0), []).append((r.y0, r.y1, r.id, +1))
        lines.setdefault((0, r.x1), []).append((r.y0, r.y1, r.id, -1))
        lines.setdefault((1, r.y0), []).append((r.x0, r.x1, r.id, +1))
        lines.setdefault((1, r.y1), []).append((r.x0, r.x1, r.id, -1))
    segs = []
    for (axis, coord), items in sorted(lines.items()):
        minus = sorted(x for x in items if x[3] < 0)
        plus = sorted(x for x in items if x[3] > 0)
        # breakpoints: all interval endpoints plus any vertex on the line
        cuts = sorted({v for it in items for v in it[:2]})
        line_map = on_vline if axis == 0 else on_hline
        cuts = sorted(set(cuts) | set(line_map.get(coord, [])))
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            rm = _covering(minus, lo, hi)
            rp = _covering(plus, lo, hi)
            if rm is None and rp is None:
                continue
            segs.append(EdgeSeg(axis, coord, lo, hi, rm, rp))
    return segs


def _covering(intervals, lo, hi):
    """Id of the (unique) interval covering [lo, hi], if any."""
    for a, b, rid, _ in intervals:
        if a <= lo and hi <= b:
            return rid
    return None


def _check_condition(mesh: Mesh) -> list[Violation]:
    t = mesh.topo
    out = []
    for w, info in sorted(t.hanging.items()):
        for z in (info.z1, info.z2):
            if t.vclass[z] == IRREGULAR:
                host = t.hanging[z].host_rect
                out.append(Violation(
                    kind="irregular-neighbor",
                    vertex=tuple(t.vcoord[z]),
                    host_rect=host,
                    detail=f"neighbour of hanging vertex "
                           f"{tuple(t.vcoord[w])} is itself hanging"))
    for (rid, side), ids in sorted(t.side_interior.items()):
        if len(ids) > 1:
            out.append(Violation(
                kind="multiple-hanging",
                vertex=None,
                host_rect=rid,
                detail=f"edge (rect {rid}, side {side}) hosts "
                       f"{len(ids)} hanging vertices"))
    return out
