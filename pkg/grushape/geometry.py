"""Domains with parametric boundaries and their triangulations.

A domain is a closed counter-clockwise loop of smooth segments.
Each segment maps t in [0,1] to the plane and knows its first and
second derivatives, so normals and curvature are exact.
"""

import functools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.spatial import Delaunay, cKDTree

from grushape.parsing import ShapeSpec, parse_shape
from grushape.shapelog import getLogger

__all__ = (
    'GeometryError', 'Segment', 'Domain', 'Mesh', 'BoundaryGeometry',
    'build_domain', 'triangulate', 'boundary_geometry', 'measure',
    'rectangle_domain', 'mesh_tables',
)

log = getLogger('grushape.geometry')

OSpec = Tuple[float, float, float, float]

# gap allowed between consecutive segment ends
JOIN_TOL = 1e-9
# joints with tangent turn above this are corners
CORNER_ANGLE = 1e-6
# longest triangle edge allowed, in units of h_target
MAX_EDGE_FACTOR = 2.0
# unstructured node spacing relative to h_target
_SPACING = 0.85
# samples per segment for validation and membership
_CHECK_PIECES = 48
_INSIDE_PIECES = 256
_INSIDE_CHUNK = 2048


class GeometryError(ValueError):
    """Invalid domain or mesh."""


@dataclass(frozen=True)
class Segment:
    """Smooth boundary piece.

    kind is one of 'line', 'arc', 'ellipse_arc', params:

    - line: x0, y0, x1, y1
    - arc: cx, cy, r, th0, th1 (counter-clockwise when th1 > th0)
    - ellipse_arc: cx, cy, rx, ry, th0, th1
    """
    kind: str
    params: Tuple[float, ...]

    def point(self, t: np.ndarray) -> np.ndarray:
        """Curve points, shape (len(t), 2)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        p = self.params
        if self.kind == 'line':
            x = p[0] + t * (p[2] - p[0])
            y = p[1] + t * (p[3] - p[1])
            return np.column_stack([x, y])
        cx, cy, rx, ry, th = self._ellipse(t)
        return np.column_stack([cx + rx * np.cos(th), cy + ry * np.sin(th)])

    def d1(self, t: np.ndarray) -> np.ndarray:
        """First derivative along t."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        p = self.params
        if self.kind == 'line':
            return np.tile([p[2] - p[0], p[3] - p[1]], (len(t), 1))
        _, _, rx, ry, th = self._ellipse(t)
        dth = self._dtheta()
        return np.column_stack([-rx * dth * np.sin(th), ry * dth * np.cos(th)])

    def d2(self, t: np.ndarray) -> np.ndarray:
        """Second derivative along t."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.kind == 'line':
            return np.zeros((len(t), 2))
        _, _, rx, ry, th = self._ellipse(t)
        dth2 = self._dtheta() ** 2
        return np.column_stack([-rx * dth2 * np.cos(th), -ry * dth2 * np.sin(th)])

    def x_extent(self) -> Tuple[float, float]:
        """Exact (min, max) of x over the segment."""
        p = self.params
        if self.kind == 'line':
            return min(p[0], p[2]), max(p[0], p[2])
        cx, _, rx, _, th = self._ellipse(np.array([0.0, 1.0]))
        lo, hi = float(th.min()), float(th.max())
        # cos is extremal at multiples of pi
        ks = np.arange(math.ceil(lo / math.pi), math.floor(hi / math.pi) + 1)
        xs = np.concatenate([cx + rx * np.cos(th), cx + rx * np.cos(ks * math.pi)])
        return float(xs.min()), float(xs.max())

    def _dtheta(self) -> float:
        p = self.params
        return p[-1] - p[-2]

    def _ellipse(self, t: np.ndarray) -> Tuple[float, float, float, float, np.ndarray]:
        p = self.params
        if self.kind == 'arc':
            cx, cy, rx, ry = p[0], p[1], p[2], p[2]
        elif self.kind == 'ellipse_arc':
            cx, cy, rx, ry = p[0], p[1], p[2], p[3]
        else:
            raise GeometryError("unknown segment kind: %r" % self.kind)
        th = p[-2] + t * (p[-1] - p[-2])
        return cx, cy, rx, ry, th

    def normal(self, t: np.ndarray) -> np.ndarray:
        """Outward unit normal for a counter-clockwise loop."""
        d = self.d1(t)
        nrm = np.hypot(d[:, 0], d[:, 1])
        return np.column_stack([d[:, 1], -d[:, 0]]) / nrm[:, None]

    def curvature(self, t: np.ndarray) -> np.ndarray:
        """Signed curvature, positive where the loop is convex."""
        d = self.d1(t)
        dd = self.d2(t)
        speed = np.hypot(d[:, 0], d[:, 1])
        return (d[:, 0] * dd[:, 1] - d[:, 1] * dd[:, 0]) / speed ** 3

    def speed(self, t: np.ndarray) -> np.ndarray:
        d = self.d1(t)
        return np.hypot(d[:, 0], d[:, 1])

    def arclength(self, t0: np.ndarray, t1: np.ndarray, order: int = 8) -> np.ndarray:
        """Length of the curve between parameters t0 and t1."""
        t0 = np.atleast_1d(np.asarray(t0, dtype=float))
        t1 = np.atleast_1d(np.asarray(t1, dtype=float))
        if self.kind == 'line' or self.kind == 'arc':
            # constant speed
            return self.speed(np.zeros(1))[0] * np.abs(t1 - t0)
        xg, wg = leggauss(order)
        half = 0.5 * (t1 - t0)
        mid = 0.5 * (t1 + t0)
        tq = mid[:, None] + half[:, None] * xg[None, :]
        sp = self.speed(tq.ravel()).reshape(tq.shape)
        return np.abs(half) * (sp @ wg)

    def length(self) -> float:
        return float(self.arclength(np.zeros(1), np.ones(1), order=32)[0])

    def params_by_arclength(self, count: int) -> np.ndarray:
        """count+1 parameters splitting the segment into equal-length pieces."""
        if self.kind == 'line' or self.kind == 'arc':
            return np.linspace(0.0, 1.0, count + 1)
        tt = np.linspace(0.0, 1.0, 64 * count + 1)
        cum = np.concatenate([[0.0], np.cumsum(self.arclength(tt[:-1], tt[1:]))])
        target = np.linspace(0.0, cum[-1], count + 1)
        res = np.interp(target, cum, tt)
        res[0], res[-1] = 0.0, 1.0
        return res


@dataclass(frozen=True)
class Domain:
    """Bounded planar domain with parametric boundary.

    o_spec is the rectangle (xmin, xmax, ymin, ymax) standing for the
    neighbourhood of the degenerate line x=0, None when the closed
    domain avoids that line.
    """
    segments: Tuple[Segment, ...]
    s: int
    o_spec: Optional[OSpec] = None
    name: str = ''
    rect: Optional[Tuple[float, float, float, float]] = None

    @functools.cached_property
    def polygon(self) -> np.ndarray:
        """Dense boundary sample used for membership tests."""
        tt = np.linspace(0.0, 1.0, _INSIDE_PIECES, endpoint=False)
        return np.vstack([seg.point(tt) for seg in self.segments])

    @property
    def bbox(self) -> Tuple[float, float, float, float]:
        poly = self.polygon
        return (float(poly[:, 0].min()), float(poly[:, 0].max()),
                float(poly[:, 1].min()), float(poly[:, 1].max()))

    def inside(self, pts: np.ndarray) -> np.ndarray:
        """Even-odd membership test against the boundary sample."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        poly = self.polygon
        x0, y0 = poly[:, 0], poly[:, 1]
        x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
        with np.errstate(divide='ignore', invalid='ignore'):
            slope = (x1 - x0) / (y1 - y0)
        res = np.empty(len(pts), dtype=bool)
        for start in range(0, len(pts), _INSIDE_CHUNK):
            chunk = pts[start:start + _INSIDE_CHUNK]
            px = chunk[:, 0][:, None]
            py = chunk[:, 1][:, None]
            crosses = (y0[None, :] > py) != (y1[None, :] > py)
            with np.errstate(invalid='ignore'):
                xint = x0[None, :] + (py - y0[None, :]) * slope[None, :]
            hit = crosses & (px < xint)
            res[start:start + _INSIDE_CHUNK] = np.count_nonzero(hit, axis=1) % 2 == 1
        return res

    def meets_degenerate_set(self) -> bool:
        """Whether the closed domain touches the line x=0."""
        # the closure is connected, so it meets x=0 iff its x-range does
        ext = [seg.x_extent() for seg in self.segments]
        xmin = min(lo for lo, _ in ext)
        xmax = max(hi for _, hi in ext)
        return xmin <= JOIN_TOL and xmax >= -JOIN_TOL

    def in_o(self, pts: np.ndarray) -> np.ndarray:
        """Membership in the degenerate-set neighbourhood."""
        pts = np.atleast_2d(pts)
        if self.o_spec is None:
            return np.zeros(len(pts), dtype=bool)
        xmin, xmax, ymin, ymax = self.o_spec
        return ((pts[:, 0] > xmin) & (pts[:, 0] < xmax)
                & (pts[:, 1] > ymin) & (pts[:, 1] < ymax))

    def corners(self) -> List[int]:
        """Indexes of segments whose start is a non-tangent joint."""
        res = []
        for i, seg in enumerate(self.segments):
            prev = self.segments[i - 1]
            t_in = prev.d1(np.ones(1))[0]
            t_out = seg.d1(np.zeros(1))[0]
            cross = t_in[0] * t_out[1] - t_in[1] * t_out[0]
            dot = float(np.dot(t_in, t_out))
            ang = math.atan2(cross, dot)
            if abs(ang) > CORNER_ANGLE:
                res.append(i)
        return res

    def perimeter(self) -> float:
        return sum(seg.length() for seg in self.segments)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation linked to a parametric boundary.

    Boundary edges run counter-clockwise; edge k goes from node
    boundary_edges[k, 0] to boundary_edges[k, 1] and covers
    parameters edge_params[k] of segment edge_segment[k].
    """
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_segment: np.ndarray
    edge_params: np.ndarray
    interior_mask: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def areas(self) -> np.ndarray:
        """Signed triangle areas."""
        return triangle_areas(self.nodes, self.triangles)

    @functools.cached_property
    def edge_triangle(self) -> np.ndarray:
        """Index of the triangle adjacent to each boundary edge."""
        lookup: Dict[Tuple[int, int], int] = {}
        for ti, tri in enumerate(self.triangles.tolist()):
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                lookup[(a, b)] = ti
        res = np.empty(len(self.boundary_edges), dtype=int)
        for k, (a, b) in enumerate(self.boundary_edges.tolist()):
            ti = lookup.get((a, b), -1)
            if ti < 0:
                raise GeometryError("boundary edge %d (%d, %d) has no adjacent triangle" % (k, a, b))
            res[k] = ti
        return res

    def edge_lengths(self) -> np.ndarray:
        """Lengths of all triangle edges."""
        p = self.nodes[self.triangles]
        return np.concatenate([
            np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
            np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
            np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
        ])


@dataclass(frozen=True, eq=False)
class BoundaryGeometry:
    """Per boundary edge data.

    midpoint is the chord midpoint, point the curve point at the
    midpoint parameter where normal and curvature are evaluated.
    weight is the chord length, arc_weight the exact curve length of
    the edge's parameter interval.
    """
    midpoint: np.ndarray
    point: np.ndarray
    normal: np.ndarray
    curvature: np.ndarray
    weight: np.ndarray
    arc_weight: np.ndarray
    segment: np.ndarray
    t_mid: np.ndarray
    arc_position: np.ndarray = field(default_factory=lambda: np.zeros(0))


def triangle_areas(nodes: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = nodes[triangles]
    return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))


#
# domain construction
#

def rectangle_domain(a: float, b: float, c: float, d: float, s: int,
                     o_spec: Optional[OSpec] = None, o_margin: Optional[float] = None) -> Domain:
    """Rectangle [a,b] x [c,d]."""
    segs = (
        Segment('line', (a, c, b, c)),
        Segment('line', (b, c, b, d)),
        Segment('line', (b, d, a, d)),
        Segment('line', (a, d, a, c)),
    )
    name = 'rectangle(%r, %r, %r, %r)' % (a, b, c, d)
    return _finish_domain(segs, s, o_spec, o_margin, name, rect=(a, b, c, d))


def _segments_from_shape(shape: ShapeSpec) -> Tuple[Tuple[Segment, ...], Optional[Tuple[float, float, float, float]]]:
    if shape.kind in ('rectangle', 'square'):
        if shape.kind == 'square':
            a, b = shape.args
            c, d = shape.args
        elif len(shape.args) == 3:
            a, b, d = shape.args
            c = 0.0
        else:
            a, b, c, d = shape.args
        if not (a < b and c < d):
            raise GeometryError("empty rectangle")
        segs = (
            Segment('line', (a, c, b, c)),
            Segment('line', (b, c, b, d)),
            Segment('line', (b, d, a, d)),
            Segment('line', (a, d, a, c)),
        )
        return segs, (a, b, c, d)
    if shape.kind == 'disk':
        cx, cy, r = shape.args
        if r <= 0:
            raise GeometryError("disk radius must be positive")
        return (Segment('arc', (cx, cy, r, 0.0, 2 * math.pi)),), None
    if shape.kind == 'ellipse':
        cx, cy, rx, ry = shape.args
        if rx <= 0 or ry <= 0:
            raise GeometryError("ellipse radii must be positive")
        return (Segment('ellipse_arc', (cx, cy, rx, ry, 0.0, 2 * math.pi)),), None
    segs = []
    for name, vals in shape.pieces:
        if name == 'line':
            segs.append(Segment('line', vals))
        elif name == 'arc':
            if vals[2] <= 0:
                raise GeometryError("arc radius must be positive")
            segs.append(Segment('arc', vals))
        else:
            if vals[2] <= 0 or vals[3] <= 0:
                raise GeometryError("ellipse radii must be positive")
            segs.append(Segment('ellipse_arc', vals))
    return tuple(segs), None


def build_domain(spec: str, s: int = 1, o_spec: Optional[OSpec] = None,
                 o_margin: Optional[float] = None) -> Domain:
    """Parse domain description and validate it.

    When the closed domain meets x=0 and no o_spec is given, the
    neighbourhood defaults to {|x| < margin} with margin o_margin or
    10% of the x-extent.
    """
    try:
        shape = parse_shape(spec)
    except ValueError as ex:
        raise GeometryError(str(ex)) from None
    segs, rect = _segments_from_shape(shape)
    return _finish_domain(segs, s, o_spec, o_margin, spec.strip(), rect)


def _finish_domain(segs: Tuple[Segment, ...], s: int, o_spec: Optional[OSpec],
                   o_margin: Optional[float], name: str,
                   rect: Optional[Tuple[float, float, float, float]] = None) -> Domain:
    if s < 0:
        raise GeometryError("s must be >= 0, got %r" % s)
    if not segs:
        raise GeometryError("domain without segments")
    for seg in segs:
        if seg.speed(np.array([0.0, 0.5, 1.0])).min() <= 0:
            raise GeometryError("degenerate segment: %r" % (seg,))
    _check_closed(segs)
    _check_orientation(segs)
    _check_simple(segs)

    dom = Domain(segs, int(s), None, name, rect)
    if dom.meets_degenerate_set():
        xmin, xmax, ymin, ymax = dom.bbox
        if o_spec is None:
            if o_margin is None:
                o_margin = 0.1 * (xmax - xmin)
            if o_margin <= 0:
                raise GeometryError("o_margin must be positive")
            o_spec = (-o_margin, o_margin, -math.inf, math.inf)
        ox0, ox1, oy0, oy1 = o_spec
        # closure of the domain on x=0 must lie inside O
        if not (ox0 < 0.0 < ox1) or oy0 > ymin or oy1 < ymax:
            raise GeometryError("neighbourhood %r does not contain the domain's part of x=0" % (o_spec,))
    dom = Domain(segs, int(s), o_spec, name, rect)
    log.debug("domain %s: %d segments, s=%d, O=%r", name, len(segs), s, o_spec)
    return dom


def _check_closed(segs: Sequence[Segment]) -> None:
    for i, seg in enumerate(segs):
        nxt = segs[(i + 1) % len(segs)]
        gap = np.linalg.norm(seg.point(np.ones(1))[0] - nxt.point(np.zeros(1))[0])
        if gap > JOIN_TOL:
            raise GeometryError("segments %d and %d do not join (gap %g)" % (i, (i + 1) % len(segs), gap))


def _check_orientation(segs: Sequence[Segment]) -> None:
    tt = np.linspace(0.0, 1.0, _CHECK_PIECES * 4, endpoint=False)
    poly = np.vstack([seg.point(tt) for seg in segs])
    x, y = poly[:, 0], poly[:, 1]
    area = 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
    if area <= 0:
        raise GeometryError("boundary is not positively oriented (signed area %g)" % area)


def _check_simple(segs: Sequence[Segment]) -> None:
    """Sampled pairwise test for proper crossings of boundary pieces."""
    tt = np.linspace(0.0, 1.0, _CHECK_PIECES, endpoint=False)
    poly = np.vstack([seg.point(tt) for seg in segs])
    p0 = poly
    p1 = np.roll(poly, -1, axis=0)
    npc = len(poly)

    def orient(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
        return np.sign((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
                       - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0]))

    A, B = p0[:, None, :], p1[:, None, :]
    C, D = p0[None, :, :], p1[None, :, :]
    o1 = orient(A, B, C)
    o2 = orient(A, B, D)
    o3 = orient(C, D, A)
    o4 = orient(C, D, B)
    hit = (o1 * o2 < 0) & (o3 * o4 < 0)
    idx = np.arange(npc)
    dist = np.abs(idx[:, None] - idx[None, :])
    near = (dist <= 1) | (dist >= npc - 1)
    hit &= ~near
    if np.any(hit):
        i, j = np.argwhere(hit)[0]
        raise GeometryError("boundary intersects itself near pieces %d and %d" % (i, j))


#
# triangulation
#

def triangulate(domain: Domain, h_target: Optional[float] = None, n: Optional[int] = None) -> Mesh:
    """Triangulate domain.

    Rectangles use a structured n x n grid (n from h_target when not
    given), other domains a Delaunay mesh of boundary nodes, an offset
    layer and a hexagonal interior lattice. Triangle edges stay below
    MAX_EDGE_FACTOR * h_target; a longer edge is logged.
    """
    if domain.rect is not None:
        if n is None:
            if h_target is None or h_target <= 0:
                raise GeometryError("need positive h_target or n")
            a, b, c, d = domain.rect
            n = max(2, int(math.ceil(max(b - a, d - c) / h_target - 1e-9)))
        mesh = _structured_rectangle(domain.rect, n)
        a, b, c, d = domain.rect
        h_target = max(b - a, d - c) / n
    else:
        if h_target is None:
            if n is None:
                raise GeometryError("need positive h_target or n")
            xmin, xmax, ymin, ymax = domain.bbox
            h_target = max(xmax - xmin, ymax - ymin) / n
        if h_target <= 0:
            raise GeometryError("h_target must be positive")
        mesh = _unstructured(domain, _SPACING * h_target)
    longest = float(mesh.edge_lengths().max())
    if longest > MAX_EDGE_FACTOR * h_target:
        log.warning("longest edge %.4g exceeds %g * h_target (%g)", longest, MAX_EDGE_FACTOR, h_target)
    log.debug("mesh: %d nodes, %d triangles, %d boundary edges",
              mesh.n_nodes, mesh.n_triangles, len(mesh.boundary_edges))
    return mesh


def _freeze(*arrays: np.ndarray) -> None:
    for a in arrays:
        a.setflags(write=False)


def _structured_rectangle(rect: Tuple[float, float, float, float], n: int) -> Mesh:
    if n < 2:
        raise GeometryError("structured mesh needs n >= 2")
    a, b, c, d = rect
    xs = a + (b - a) * np.arange(n + 1) / n
    ys = c + (d - c) * np.arange(n + 1) / n
    # exact corners
    xs[-1], ys[-1] = b, d
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i: np.ndarray, j: np.ndarray) -> np.ndarray:
        return j * (n + 1) + i

    ii, jj = np.meshgrid(np.arange(n), np.arange(n))
    ii, jj = ii.ravel(), jj.ravel()
    p00, p10 = nid(ii, jj), nid(ii + 1, jj)
    p01, p11 = nid(ii, jj + 1), nid(ii + 1, jj + 1)
    # diagonal p00-p11 is symmetric under x <-> y, so modes are even or odd under
    # the swap; that does not keep a double eigenvalue double on this grid
    tri = np.empty((2 * n * n, 3), dtype=np.int64)
    tri[0::2] = np.column_stack([p00, p10, p11])
    tri[1::2] = np.column_stack([p00, p11, p01])

    k = np.arange(n)
    t0 = k / n
    t1 = (k + 1) / n
    edges = np.vstack([
        np.column_stack([nid(k, 0), nid(k + 1, 0)]),
        np.column_stack([nid(n, k), nid(n, k + 1)]),
        np.column_stack([nid(n - k, n), nid(n - k - 1, n)]),
        np.column_stack([nid(0, n - k), nid(0, n - k - 1)]),
    ])
    edge_seg = np.repeat(np.arange(4), n)
    edge_par = np.tile(np.column_stack([t0, t1]), (4, 1))

    mask = np.ones(len(nodes), dtype=bool)
    mask[edges[:, 0]] = False
    mesh = Mesh(nodes, tri, edges, edge_seg, edge_par, mask)
    _freeze(nodes, tri, edges, edge_seg, edge_par, mask)
    return mesh


def _hex_lattice(bbox: Tuple[float, float, float, float], h: float) -> np.ndarray:
    xmin, xmax, ymin, ymax = bbox
    dy = h * math.sqrt(3.0) / 2.0
    rows = int(math.ceil((ymax - ymin) / dy)) + 1
    cols = int(math.ceil((xmax - xmin) / h)) + 2
    j = np.arange(rows)
    i = np.arange(cols)
    I, J = np.meshgrid(i, j)
    x = xmin + h * I + 0.5 * h * (J % 2)
    y = ymin + dy * J
    return np.column_stack([x.ravel(), y.ravel()])


def _unstructured(domain: Domain, h: float) -> Mesh:
    # boundary nodes, approx h apart along each segment
    bnodes: List[np.ndarray] = []
    bseg: List[np.ndarray] = []
    bpar: List[np.ndarray] = []
    for si, seg in enumerate(domain.segments):
        cnt = max(1, int(math.ceil(seg.length() / h - 1e-9)))
        tt = seg.params_by_arclength(cnt)
        bnodes.append(seg.point(tt[:-1]))
        bseg.append(np.full(cnt, si))
        bpar.append(np.column_stack([tt[:-1], tt[1:]]))
    bpts = np.vstack(bnodes)
    edge_seg = np.concatenate(bseg)
    edge_par = np.vstack(bpar)
    nb = len(bpts)
    if nb < 8:
        raise GeometryError("h_target %g too coarse: only %d boundary nodes" % (h, nb))

    # offset layer below edge midpoints
    depth1 = h * math.sqrt(3.0) / 2.0
    tm = 0.5 * (edge_par[:, 0] + edge_par[:, 1])
    offs = []
    for si, seg in enumerate(domain.segments):
        sel = edge_seg == si
        offs.append(seg.point(tm[sel]) - depth1 * seg.normal(tm[sel]))
    layer = np.vstack(offs)

    # distance to boundary from a dense sample
    dense = []
    for seg in domain.segments:
        cnt = max(8, int(math.ceil(10 * seg.length() / h)))
        dense.append(seg.point(np.linspace(0.0, 1.0, cnt, endpoint=False)))
    tree = cKDTree(np.vstack(dense))

    dist, _ = tree.query(layer)
    keep = domain.inside(layer) & (dist > 0.6 * depth1)
    layer = layer[keep]
    # thin out layer points crowding each other at concave joints
    if len(layer) > 1:
        ltree = cKDTree(layer)
        drop = np.zeros(len(layer), dtype=bool)
        for i, j in sorted(ltree.query_pairs(0.5 * h)):
            if not drop[i] and not drop[j]:
                drop[j] = True
        layer = layer[~drop]

    # interior lattice kept clear of the offset layer
    xmin, xmax, ymin, ymax = domain.bbox
    lat = _hex_lattice((xmin, xmax, ymin, ymax), h)
    lat = lat[domain.inside(lat)]
    if len(lat):
        dist, _ = tree.query(lat)
        lat = lat[dist >= depth1 + 0.6 * h]

    pts = np.vstack([bpts, layer, lat])
    dl = Delaunay(pts)
    tri = np.asarray(dl.simplices, dtype=np.int64)

    # drop triangles outside the domain
    cen = pts[tri].mean(axis=1)
    tri = tri[domain.inside(cen)]
    # also drop hull triangles spanning across a concave boundary
    bb = tri < nb
    allb = bb.all(axis=1)
    if np.any(allb):
        i0, i1, i2 = tri[allb, 0], tri[allb, 1], tri[allb, 2]
        ok = _consecutive(i0, i1, nb) | _consecutive(i1, i2, nb) | _consecutive(i2, i0, nb)
        bad = np.flatnonzero(allb)[~ok]
        tri = np.delete(tri, bad, axis=0)

    # orient positively
    ar = triangle_areas(pts, tri)
    neg = ar < 0
    tri[neg] = tri[neg][:, [0, 2, 1]]
    ar = np.abs(ar)
    if np.any(ar <= 1e-14 * h * h):
        raise GeometryError("degenerate triangle in mesh")

    # drop unused nodes, keeping boundary nodes first
    used = np.zeros(len(pts), dtype=bool)
    used[tri.ravel()] = True
    if not used[:nb].all():
        raise GeometryError("boundary node left out of triangulation, h_target %g too coarse" % h)
    remap = -np.ones(len(pts), dtype=np.int64)
    remap[used] = np.arange(np.count_nonzero(used))
    nodes = pts[used]
    tri = remap[tri]

    edges = np.column_stack([np.arange(nb), (np.arange(nb) + 1) % nb]).astype(np.int64)
    _check_boundary_recovered(tri, edges)

    mask = np.ones(len(nodes), dtype=bool)
    mask[:nb] = False
    mesh = Mesh(nodes, tri, edges, edge_seg, edge_par, mask)
    _freeze(nodes, tri, edges, edge_seg, edge_par, mask)
    return mesh


def _consecutive(i: np.ndarray, j: np.ndarray, nb: int) -> np.ndarray:
    return ((j - i) % nb == 1) | ((i - j) % nb == 1)


def _check_boundary_recovered(tri: np.ndarray, edges: np.ndarray) -> None:
    """Topological boundary of the triangulation must be the boundary loop."""
    half = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    directed = {(int(a), int(b)) for a, b in half}
    free = {(a, b) for a, b in directed if (b, a) not in directed}
    want = {(int(a), int(b)) for a, b in edges}
    if free != want:
        raise GeometryError("triangulation does not recover the boundary loop "
                            "(%d free edges, %d expected)" % (len(free), len(want)))


#
# boundary data and measures
#

def boundary_geometry(domain: Domain, mesh: Mesh) -> BoundaryGeometry:
    """Exact normal, curvature and weights per boundary edge."""
    ne = len(mesh.boundary_edges)
    if np.any(mesh.edge_segment < 0) or np.any(mesh.edge_segment >= len(domain.segments)):
        raise GeometryError("boundary edge without valid segment tag")
    p = mesh.nodes[mesh.boundary_edges]
    midpoint = 0.5 * (p[:, 0] + p[:, 1])
    weight = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
    t_mid = 0.5 * (mesh.edge_params[:, 0] + mesh.edge_params[:, 1])

    point = np.empty((ne, 2))
    normal = np.empty((ne, 2))
    curv = np.empty(ne)
    arc_w = np.empty(ne)
    for si, seg in enumerate(domain.segments):
        sel = mesh.edge_segment == si
        if not np.any(sel):
            continue
        tm = t_mid[sel]
        point[sel] = seg.point(tm)
        normal[sel] = seg.normal(tm)
        curv[sel] = seg.curvature(tm)
        arc_w[sel] = seg.arclength(mesh.edge_params[sel, 0], mesh.edge_params[sel, 1])
    arc_pos = np.cumsum(arc_w) - 0.5 * arc_w
    return BoundaryGeometry(midpoint, point, normal, curv, weight, arc_w,
                            mesh.edge_segment.copy(), t_mid, arc_pos)


def measure(mesh: Mesh) -> Tuple[float, float]:
    """Volume and polygonal perimeter."""
    ar = mesh.areas()
    if np.any(ar <= 0):
        raise GeometryError("mesh has non-positive triangle area")
    p = mesh.nodes[mesh.boundary_edges]
    per = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
    return float(ar.sum()), float(per.sum())


def mesh_tables(mesh: Mesh) -> Dict[str, List[List[object]]]:
    """Rows for nodes.csv, triangles.csv and boundary.csv."""
    nodes: List[List[object]] = [['node', 'x', 'y', 'interior']]
    for i, (x, y) in enumerate(mesh.nodes.tolist()):
        nodes.append([i, x, y, int(mesh.interior_mask[i])])
    tris: List[List[object]] = [['triangle', 'n0', 'n1', 'n2']]
    for i, t in enumerate(mesh.triangles.tolist()):
        tris.append([i] + t)
    bnd: List[List[object]] = [['edge', 'n0', 'n1', 'segment', 't0', 't1']]
    for i, (e, sg, tp) in enumerate(zip(mesh.boundary_edges.tolist(),
                                        mesh.edge_segment.tolist(),
                                        mesh.edge_params.tolist())):
        bnd.append([i, e[0], e[1], sg, tp[0], tp[1]])
    return {'nodes': nodes, 'triangles': tris, 'boundary': bnd}
