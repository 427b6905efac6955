"""Perturbation fields, map families and mesh transport.

Fields are closed-form named families so they serialize into config
files and have exact jacobians.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from grushape.geometry import Domain, Mesh, triangle_areas
from grushape.parsing import parse_number_list
from grushape.shapelog import getLogger

__all__ = (
    'PerturbationError', 'PerturbationField', 'MapFamily', 'AdmissibilityReport',
    'make_field', 'check_admissible', 'map_mesh', 'combine_fields',
    'affine_family', 'dilation_family', 'compose_maps', 'field_from_params',
    'DILATION', 'AXIS_STRETCH', 'SPLIT_POLYNOMIAL', 'BOUNDARY_BUMP', 'ZERO',
    'RADIAL', 'SHEAR', 'COMBINATION', 'FIELD_KINDS',
)

log = getLogger('grushape.perturbation')

DILATION = 'dilationGenerator'
AXIS_STRETCH = 'axisStretch'
SPLIT_POLYNOMIAL = 'splitPolynomial'
BOUNDARY_BUMP = 'boundaryBump'
ZERO = 'zero'
RADIAL = 'radial'
SHEAR = 'shear'
COMBINATION = 'combination'

FIELD_KINDS = (DILATION, AXIS_STRETCH, SPLIT_POLYNOMIAL, BOUNDARY_BUMP,
               ZERO, RADIAL, SHEAR, COMBINATION)

# split structure tolerance inside O
SPLIT_TOL = 1e-10
# duplicate node images
DUP_TOL = 1e-12

PointMap = Callable[[np.ndarray], np.ndarray]


class PerturbationError(ValueError):
    """Bad field parameters or non-injective map."""


def _bump(u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """C2 bump (4u(1-u))^3 on [0,1] and its derivative."""
    inside = (u > 0) & (u < 1)
    uu = np.where(inside, u, 0.0)
    q = 4.0 * uu * (1.0 - uu)
    val = np.where(inside, q ** 3, 0.0)
    der = np.where(inside, 3.0 * q ** 2 * 4.0 * (1.0 - 2.0 * uu), 0.0)
    return val, der


@dataclass(frozen=True)
class PerturbationField:
    """Vector field psi used as deformation direction.

    support_avoids_o tells that psi vanishes on the domain's part of
    the degenerate-set neighbourhood.
    """
    kind: str
    params: Mapping[str, Any]
    support_avoids_o: bool = False
    terms: Tuple[Tuple[float, "PerturbationField"], ...] = field(default=())

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        """psi at points z, shape (k, 2)."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        x, y = z[:, 0], z[:, 1]
        p = self.params
        if self.kind == ZERO:
            return np.zeros_like(z)
        if self.kind == DILATION:
            return np.column_stack([x, (1.0 + p['s']) * y])
        if self.kind == AXIS_STRETCH:
            if p['axis'] == 'x':
                return np.column_stack([x, np.zeros_like(y)])
            return np.column_stack([np.zeros_like(x), y])
        if self.kind == SPLIT_POLYNOMIAL:
            px = np.polynomial.polynomial.polyval(x, p['cx'])
            py = np.polynomial.polynomial.polyval(y, p['cy'])
            return np.column_stack([px * np.ones_like(x), py * np.ones_like(y)])
        if self.kind == BOUNDARY_BUMP:
            xmin, xmax, ymin, ymax = p['support']
            bx, _ = _bump((x - xmin) / (xmax - xmin))
            by, _ = _bump((y - ymin) / (ymax - ymin))
            amp = p['amplitude'] * bx * by
            dx, dy = p['direction']
            return np.column_stack([amp * dx, amp * dy])
        if self.kind == RADIAL:
            cx, cy = p['center']
            return np.column_stack([(x - cx) / p['radius'], (y - cy) / p['radius']])
        if self.kind == SHEAR:
            return np.column_stack([p['a'] * y, np.zeros_like(x)])
        if self.kind == COMBINATION:
            res = np.zeros_like(z)
            for coef, fld in self.terms:
                res += coef * fld.evaluate(z)
            return res
        raise PerturbationError("unknown field kind: %r" % self.kind)

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        """D psi at points z, shape (k, 2, 2), row i is grad psi_i."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        x, y = z[:, 0], z[:, 1]
        k = len(z)
        p = self.params
        res = np.zeros((k, 2, 2))
        if self.kind == ZERO:
            return res
        if self.kind == DILATION:
            res[:, 0, 0] = 1.0
            res[:, 1, 1] = 1.0 + p['s']
        elif self.kind == AXIS_STRETCH:
            if p['axis'] == 'x':
                res[:, 0, 0] = 1.0
            else:
                res[:, 1, 1] = 1.0
        elif self.kind == SPLIT_POLYNOMIAL:
            res[:, 0, 0] = np.polynomial.polynomial.polyval(x, np.polynomial.polynomial.polyder(p['cx']))
            res[:, 1, 1] = np.polynomial.polynomial.polyval(y, np.polynomial.polynomial.polyder(p['cy']))
        elif self.kind == BOUNDARY_BUMP:
            xmin, xmax, ymin, ymax = p['support']
            wx, wy = xmax - xmin, ymax - ymin
            bx, dbx = _bump((x - xmin) / wx)
            by, dby = _bump((y - ymin) / wy)
            gx = p['amplitude'] * dbx / wx * by
            gy = p['amplitude'] * bx * dby / wy
            dx, dy = p['direction']
            res[:, 0, 0] = dx * gx
            res[:, 0, 1] = dx * gy
            res[:, 1, 0] = dy * gx
            res[:, 1, 1] = dy * gy
        elif self.kind == RADIAL:
            res[:, 0, 0] = 1.0 / p['radius']
            res[:, 1, 1] = 1.0 / p['radius']
        elif self.kind == SHEAR:
            res[:, 0, 1] = p['a']
        elif self.kind == COMBINATION:
            for coef, fld in self.terms:
                res += coef * fld.jacobian(z)
        else:
            raise PerturbationError("unknown field kind: %r" % self.kind)
        return res

    def describe(self) -> Dict[str, Any]:
        """Plain dict for reports."""
        if self.kind == COMBINATION:
            return {'kind': self.kind,
                    'terms': [[c, f.describe()] for c, f in self.terms]}
        params = {k: (list(v) if isinstance(v, (tuple, list, np.ndarray)) else v)
                  for k, v in self.params.items()}
        return {'kind': self.kind, 'params': params}


@dataclass(frozen=True)
class MapFamily:
    """One-parameter family of maps with its generator."""
    name: str
    apply_fn: Callable[[float, np.ndarray], np.ndarray]
    jacobian_fn: Callable[[float, np.ndarray], np.ndarray]
    generator: PerturbationField
    identity_param: float = 0.0

    def apply(self, param: float, z: np.ndarray) -> np.ndarray:
        return self.apply_fn(param, np.atleast_2d(np.asarray(z, dtype=float)))

    def jacobian(self, param: float, z: np.ndarray) -> np.ndarray:
        return self.jacobian_fn(param, np.atleast_2d(np.asarray(z, dtype=float)))

    def at(self, param: float) -> PointMap:
        """Map z -> phi_param(z)."""
        return lambda z: self.apply(param, z)


@dataclass
class AdmissibilityReport:
    """Result of sampled admissibility checks."""
    passed: bool
    violation: Optional[str]
    lipschitz_lower: float
    min_jacobian_det: float
    samples: int
    o_samples: int

    def as_dict(self) -> Dict[str, Any]:
        return {
            'passed': self.passed,
            'violation': self.violation,
            'lipschitz_lower': self.lipschitz_lower,
            'min_jacobian_det': self.min_jacobian_det,
            'samples': self.samples,
            'o_samples': self.o_samples,
        }


#
# construction
#

def _pair(val: Any, name: str) -> Tuple[float, float]:
    try:
        a, b = (float(v) for v in val)
    except (TypeError, ValueError):
        raise PerturbationError("%s needs 2 numbers, got %r" % (name, val)) from None
    return a, b


def _rect_disjoint(r1: Tuple[float, float, float, float], r2: Tuple[float, float, float, float]) -> bool:
    return r1[1] <= r2[0] or r2[1] <= r1[0] or r1[3] <= r2[2] or r2[3] <= r1[2]


def make_field(kind: str, params: Optional[Mapping[str, Any]] = None,
               domain: Optional[Domain] = None) -> PerturbationField:
    """Build a named field, checking its parameters against the domain."""
    params = dict(params or {})
    s = domain.s if domain is not None else int(params.get('s', 1))
    has_o = domain is not None and domain.o_spec is not None

    if kind == ZERO:
        return PerturbationField(ZERO, {}, support_avoids_o=True)
    if kind == DILATION:
        s = int(params.get('s', s))
        return PerturbationField(DILATION, {'s': s}, support_avoids_o=not has_o)
    if kind == AXIS_STRETCH:
        axis = str(params.get('axis', 'x')).lower()
        if axis not in ('x', 'y'):
            raise PerturbationError("axisStretch axis must be x or y")
        return PerturbationField(AXIS_STRETCH, {'axis': axis}, support_avoids_o=not has_o)
    if kind == SPLIT_POLYNOMIAL:
        cx = [float(v) for v in params.get('cx', [0.0])]
        cy = [float(v) for v in params.get('cy', [0.0])]
        if cx and cx[0] != 0.0:
            raise PerturbationError("splitPolynomial: psi_x must vanish at x=0, constant term %r" % cx[0])
        return PerturbationField(SPLIT_POLYNOMIAL, {'cx': tuple(cx), 'cy': tuple(cy)},
                                 support_avoids_o=not has_o)
    if kind == BOUNDARY_BUMP:
        try:
            xmin, xmax, ymin, ymax = (float(v) for v in params['support'])
        except (KeyError, TypeError, ValueError):
            raise PerturbationError("boundaryBump needs support = xmin, xmax, ymin, ymax") from None
        if not (xmin < xmax and ymin < ymax):
            raise PerturbationError("boundaryBump support is empty")
        direction = _pair(params.get('direction', (1.0, 0.0)), 'direction')
        amplitude = float(params.get('amplitude', 1.0))
        if has_o and domain is not None and domain.o_spec is not None:
            if not _rect_disjoint((xmin, xmax, ymin, ymax), domain.o_spec):
                raise PerturbationError("boundaryBump support %r intersects O %r"
                                        % ((xmin, xmax, ymin, ymax), domain.o_spec))
        return PerturbationField(BOUNDARY_BUMP, {
            'support': (xmin, xmax, ymin, ymax),
            'direction': direction,
            'amplitude': amplitude,
        }, support_avoids_o=True)
    if kind == RADIAL:
        center = _pair(params.get('center', (0.0, 0.0)), 'center')
        radius = float(params.get('radius', 1.0))
        if radius <= 0:
            raise PerturbationError("radial field needs positive radius")
        return PerturbationField(RADIAL, {'center': center, 'radius': radius},
                                 support_avoids_o=not has_o)
    if kind == SHEAR:
        return PerturbationField(SHEAR, {'a': float(params.get('a', 1.0))},
                                 support_avoids_o=not has_o)
    raise PerturbationError("unknown field kind: %r" % kind)


def combine_fields(terms: Sequence[Tuple[float, PerturbationField]]) -> PerturbationField:
    """Linear combination sum(a_i * psi_i)."""
    if not terms:
        raise PerturbationError("empty combination")
    avoids = all(f.support_avoids_o or c == 0 for c, f in terms)
    return PerturbationField(COMBINATION, {}, support_avoids_o=avoids,
                             terms=tuple((float(c), f) for c, f in terms))


def field_from_params(params: Mapping[str, str], domain: Domain) -> PerturbationField:
    """Build field from a config section (string values)."""
    kind = params.get('kind')
    if not kind:
        raise PerturbationError("field section needs 'kind'")
    conv: Dict[str, Any] = {}
    for k, v in params.items():
        if k == 'kind':
            continue
        if k == 'axis':
            conv[k] = v.strip()
        elif k in ('support', 'direction', 'center', 'cx', 'cy'):
            conv[k] = parse_number_list(v)
        else:
            try:
                conv[k] = parse_number_list(v)[0]
            except (ValueError, IndexError):
                conv[k] = v
    return make_field(kind, conv, domain)


#
# map families
#

def affine_family(psi: PerturbationField) -> MapFamily:
    """phi_eps = id + eps * psi."""
    def apply(eps: float, z: np.ndarray) -> np.ndarray:
        return z + eps * psi.evaluate(z)

    def jac(eps: float, z: np.ndarray) -> np.ndarray:
        return np.eye(2)[None, :, :] + eps * psi.jacobian(z)

    return MapFamily('affine', apply, jac, psi, 0.0)


def dilation_family(s: int) -> MapFamily:
    """delta_t(x, y) = (t x, t^(1+s) y), identity at t=1."""
    def apply(t: float, z: np.ndarray) -> np.ndarray:
        return np.column_stack([t * z[:, 0], t ** (1 + s) * z[:, 1]])

    def jac(t: float, z: np.ndarray) -> np.ndarray:
        res = np.zeros((len(z), 2, 2))
        res[:, 0, 0] = t
        res[:, 1, 1] = t ** (1 + s)
        return res

    gen = PerturbationField(DILATION, {'s': s})
    return MapFamily('dilation', apply, jac, gen, 1.0)


def compose_maps(outer: PointMap, inner: PointMap) -> PointMap:
    """z -> outer(inner(z))."""
    return lambda z: outer(inner(z))


#
# admissibility
#

def _sample_domain(domain: Domain, count: int, rng: np.random.Generator,
                   region: Optional[Tuple[float, float, float, float]] = None) -> np.ndarray:
    xmin, xmax, ymin, ymax = domain.bbox
    if region is not None:
        xmin, xmax = max(xmin, region[0]), min(xmax, region[1])
        ymin, ymax = max(ymin, region[2]), min(ymax, region[3])
        if xmin >= xmax or ymin >= ymax:
            return np.zeros((0, 2))
    res: List[np.ndarray] = []
    got = 0
    for _ in range(50):
        pts = np.column_stack([rng.uniform(xmin, xmax, 4 * count), rng.uniform(ymin, ymax, 4 * count)])
        pts = pts[domain.inside(pts)]
        res.append(pts)
        got += len(pts)
        if got >= count:
            break
    if not res:
        return np.zeros((0, 2))
    return np.vstack(res)[:count]


def check_admissible(obj: Union[PerturbationField, MapFamily], domain: Domain,
                     samples: int = 400, param: Optional[float] = None,
                     seed: int = 0) -> AdmissibilityReport:
    """Sampled checks for the admissible class.

    For a field the map is id + param * psi (param defaults to 1),
    for a family it is family.apply(param, .).  Failures are reported,
    not raised.
    """
    if samples < 100:
        raise PerturbationError("need at least 100 samples")
    rng = np.random.default_rng(seed)

    if isinstance(obj, PerturbationField):
        fam = affine_family(obj)
        eps = 1.0 if param is None else float(param)
    else:
        fam = obj
        eps = fam.identity_param if param is None else float(param)
    phi = fam.at(eps)

    pts = _sample_domain(domain, samples, rng)
    bpts = np.vstack([seg.point(np.linspace(0, 1, 16, endpoint=False)) for seg in domain.segments])
    pts = np.vstack([pts, bpts])

    # bi-Lipschitz lower bound over random pairs
    i = rng.integers(0, len(pts), 4 * samples)
    j = rng.integers(0, len(pts), 4 * samples)
    sel = i != j
    z1, z2 = pts[i[sel]], pts[j[sel]]
    dz = np.linalg.norm(z1 - z2, axis=1)
    ok = dz > 1e-12
    ratio = np.linalg.norm(phi(z1[ok]) - phi(z2[ok]), axis=1) / dz[ok]
    lip = float(ratio.min()) if len(ratio) else math.inf

    jac = fam.jacobian(eps, pts)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    min_det = float(det.min())
    # local bound from the smallest singular value
    sv = np.linalg.svd(jac, compute_uv=False)[:, -1]
    lip = min(lip, float(sv.min()))

    violation: Optional[str] = None
    if min_det <= 0:
        violation = "jacobian determinant %g <= 0" % min_det
    elif lip <= 1e-8:
        violation = "bi-Lipschitz lower bound %g too small" % lip

    o_count = 0
    if violation is None and domain.o_spec is not None and domain.meets_degenerate_set():
        opts = _sample_domain(domain, samples, rng, domain.o_spec)
        opts = opts[domain.in_o(opts)]
        o_count = len(opts)
        if o_count:
            if isinstance(obj, PerturbationField):
                dpsi = obj.jacobian(opts)
            else:
                dpsi = fam.jacobian(eps, opts)
            cross = np.maximum(np.abs(dpsi[:, 0, 1]), np.abs(dpsi[:, 1, 0]))
            k = int(np.argmax(cross))
            if cross[k] > SPLIT_TOL:
                violation = ("split structure broken at (%g, %g): mixed derivative %g"
                             % (opts[k, 0], opts[k, 1], cross[k]))
        if violation is None:
            # the line x=0 must stay in place
            _, _, ymin, ymax = domain.bbox
            ys = np.linspace(ymin, ymax, 33)
            zero = np.column_stack([np.zeros_like(ys), ys])
            zero = zero[domain.in_o(zero)]
            if isinstance(obj, PerturbationField):
                vx = obj.evaluate(zero)[:, 0]
            else:
                vx = fam.apply(eps, zero)[:, 0]
            if len(vx) and np.abs(vx).max() > SPLIT_TOL:
                violation = "psi_x(0) = %g, x=0 is not kept fixed" % float(vx[np.argmax(np.abs(vx))])

    rep = AdmissibilityReport(violation is None, violation, lip, min_det, len(pts), o_count)
    if not rep.passed:
        log.debug("admissibility failed: %s", violation)
    return rep


#
# mesh transport
#

def map_mesh(mesh: Mesh, fmap: PointMap) -> Mesh:
    """New mesh with node coordinates replaced by their images."""
    new_nodes = np.asarray(fmap(mesh.nodes), dtype=float)
    if new_nodes.shape != mesh.nodes.shape:
        raise PerturbationError("map returned shape %r" % (new_nodes.shape,))
    order = np.lexsort((new_nodes[:, 1], new_nodes[:, 0]))
    srt = new_nodes[order]
    gap = np.abs(np.diff(srt, axis=0)).max(axis=1) if len(srt) > 1 else np.zeros(0)
    if np.any(gap < DUP_TOL):
        raise PerturbationError("map is not injective on the node set")
    ar = triangle_areas(new_nodes, mesh.triangles)
    if np.any(ar <= 0):
        raise PerturbationError("map inverts %d triangles" % int(np.count_nonzero(ar <= 0)))
    new_nodes.setflags(write=False)
    return replace(mesh, nodes=new_nodes)
