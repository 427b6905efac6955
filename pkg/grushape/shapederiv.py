"""Shape derivatives of eigenvalues and their symmetric functions.

Three independent routes: the volume form (integrals over the domain
with D psi), the boundary (Hadamard) form with squared normal
derivatives, and finite differences over mapped meshes that keep the
connectivity.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from grushape.assembly import MASS_REF, quadrature_x, triangle_gradients, weight_integrals
from grushape.eigensolver import (
    FORM_ORTHONORMAL, MASS_ORTHONORMAL, EigenSystem, SolveSettings, solve_mesh,
)
from grushape.geometry import BoundaryGeometry, Domain, Mesh, boundary_geometry
from grushape.perturbation import PerturbationError, PerturbationField, affine_family, check_admissible, map_mesh
from grushape.shapelog import getLogger

__all__ = (
    'DerivativeError', 'RegularityError', 'NormalizationError',
    'SymmetricFunctionSpec', 'FDReport', 'BranchSlopes', 'DerivativeReport',
    'symmetric_function', 'normal_derivative_trace', 'normal_derivative_of',
    'hadamard_matrix', 'volume_form_matrix', 'd_lambda', 'fd_derivative',
    'branch_slopes', 'branches_resolved', 'derivative_report', 'boundary_integral', 'boundary_matrix',
    'VOLUME_FORM', 'BOUNDARY_FORM', 'FD_SLOPE_RANGE', 'RESOLVE_FACTOR',
)

log = getLogger('grushape.shapederiv')

VOLUME_FORM = 'volumeForm'
BOUNDARY_FORM = 'boundaryForm'

# eps * slope gap over discrete cluster spread needed for one-sided FD;
# the mean-base error then stays below about 5% of the slope gap
RESOLVE_FACTOR = 3.0

# accepted log-log slope of |central - richardson| against eps
FD_SLOPE_RANGE = (1.7, 2.3)


class DerivativeError(ValueError):
    """Bad derivative request."""


class RegularityError(DerivativeError):
    """Boundary form refused near the degenerate set."""


class NormalizationError(DerivativeError):
    """Eigenvectors not normalized as the formula needs."""


@dataclass(frozen=True)
class SymmetricFunctionSpec:
    """Cluster F (0-based indexes) and order tau of the symmetric function."""
    indices: Tuple[int, ...]
    tau: int = 1

    def __post_init__(self) -> None:
        if not self.indices:
            raise DerivativeError("empty cluster")
        if not 1 <= self.tau <= len(self.indices):
            raise DerivativeError("tau=%d out of range [1, %d]" % (self.tau, len(self.indices)))

    @property
    def size(self) -> int:
        return len(self.indices)


def symmetric_function(values: Sequence[float], tau: int) -> float:
    """Elementary symmetric polynomial of order tau."""
    vals = np.asarray(values, dtype=float)
    if not 1 <= tau <= len(vals):
        raise DerivativeError("tau=%d out of range [1, %d]" % (tau, len(vals)))
    # poly() gives coefficients of prod(x - v)
    coef = np.poly(vals)
    return float((-1) ** tau * coef[tau])


def _check_normalization(esys: EigenSystem) -> None:
    if esys.normalization not in (MASS_ORTHONORMAL, FORM_ORTHONORMAL):
        raise NormalizationError("unknown normalization %r" % esys.normalization)


def _cluster_value(esys: EigenSystem, indices: Sequence[int]) -> float:
    return float(np.mean(esys.values[list(indices)]))


def _prefactor(esys: EigenSystem, spec: SymmetricFunctionSpec, lam: float) -> float:
    """lambda_F^(tau-1) * C(|F|-1, tau-1)."""
    return lam ** (spec.tau - 1) * math.comb(spec.size - 1, spec.tau - 1)


#
# boundary machinery
#

def normal_derivative_of(nodal: np.ndarray, mesh: Mesh, domain: Domain,
                         bgeom: Optional[BoundaryGeometry] = None) -> np.ndarray:
    """d/dn of piecewise linear nodal functions on each boundary edge.

    nodal is (N,) or (N, k); the gradient comes from the triangle
    adjacent to the edge, n is the exact normal at the midpoint parameter.
    """
    bg = bgeom if bgeom is not None else boundary_geometry(domain, mesh)
    u = np.asarray(nodal, dtype=float)
    single = u.ndim == 1
    if single:
        u = u[:, None]
    tri_idx = mesh.edge_triangle
    tris = mesh.triangles[tri_idx]
    g, _ = triangle_gradients(mesh.nodes, tris)
    grad = np.einsum('eki,ekd->eid', u[tris], g)
    dn = np.einsum('eid,ed->ei', grad, bg.normal)
    return dn[:, 0] if single else dn


def normal_derivative_trace(esys: EigenSystem, mesh: Mesh, domain: Domain,
                            bgeom: Optional[BoundaryGeometry] = None) -> np.ndarray:
    """(E, m) normal derivatives of all eigenvectors."""
    if mesh.n_nodes != esys.forms.mesh.n_nodes:
        raise DerivativeError("mesh does not match eigen system")
    return normal_derivative_of(esys.forms.expand(esys.vectors), mesh, domain, bgeom)


def grushin_normal_weight(bg: BoundaryGeometry, s: int) -> np.ndarray:
    """|n_G|^2 = n_x^2 + x^(2s) n_y^2 at edge evaluation points."""
    x = bg.point[:, 0]
    return bg.normal[:, 0] ** 2 + x ** (2 * s) * bg.normal[:, 1] ** 2


def boundary_integral(values: np.ndarray, bg: BoundaryGeometry) -> float:
    """Edge-midpoint rule with exact arclength weights."""
    return float(np.dot(bg.arc_weight, values))


def boundary_matrix(dn: np.ndarray, psi_n: np.ndarray, bg: BoundaryGeometry, s: int) -> np.ndarray:
    """-int (psi.n) dn_i dn_j |n_G|^2 for the columns of dn."""
    wt = bg.arc_weight * psi_n * grushin_normal_weight(bg, s)
    mat = -(dn.T * wt[None, :]) @ dn
    return 0.5 * (mat + mat.T)


def _regularity_gate(domain: Domain, psi: PerturbationField) -> None:
    if domain.s > 0 and domain.meets_degenerate_set() and not psi.support_avoids_o:
        raise RegularityError("boundary form needs a field vanishing on O "
                              "when the domain meets x=0")


def hadamard_matrix(esys: EigenSystem, indices: Sequence[int], psi: PerturbationField,
                    mesh: Mesh, domain: Domain) -> np.ndarray:
    """Boundary-form branch matrix of a cluster.

    Mass-normalized vectors give the matrix directly, form-normalized
    vectors carry the extra factor lambda_F; both have the same
    eigenvalues.
    """
    _check_normalization(esys)
    _regularity_gate(domain, psi)
    idx = list(indices)
    bg = boundary_geometry(domain, mesh)
    dn = normal_derivative_trace(esys, mesh, domain, bg)[:, idx]
    psi_n = np.einsum('ed,ed->e', psi.evaluate(bg.point), bg.normal)
    mat = boundary_matrix(dn, psi_n, bg, domain.s)
    if esys.normalization == FORM_ORTHONORMAL:
        mat = mat * _cluster_value(esys, idx)
    return mat


#
# volume form
#

def volume_form_matrix(esys: EigenSystem, indices: Sequence[int], psi: PerturbationField,
                       mesh: Optional[Mesh] = None) -> np.ndarray:
    """Volume-form branch matrix, psi taken through its nodal interpolant.

    Its eigenvalues are the slopes of the discrete eigenvalue branches
    under node transport by id + eps psi.
    """
    _check_normalization(esys)
    forms = esys.forms
    mesh = mesh if mesh is not None else forms.mesh
    s = forms.s
    idx = list(indices)
    lam = _cluster_value(esys, idx)

    tri = mesh.triangles
    g, area = triangle_gradients(mesh.nodes, tri)
    wint = weight_integrals(mesh.nodes, tri, s)
    u = forms.expand(esys.vectors[:, idx])          # (N, k)
    ut = u[tri]                                     # (T, 3, k)
    gv = np.einsum('tak,tad->tkd', ut, g)           # (T, k, 2)
    gx, gy = gv[:, :, 0], gv[:, :, 1]

    psi_nodes = psi.evaluate(mesh.nodes)
    dpsi = np.einsum('tai,taj->tij', psi_nodes[tri], g)
    a, b = dpsi[:, 0, 0], dpsi[:, 0, 1]
    c, d = dpsi[:, 1, 0], dpsi[:, 1, 1]
    div = a + d

    # int v_i v_j div psi
    mloc = np.einsum('tai,ab,tbj->tij', ut, MASS_REF, ut) * area[:, None, None]
    vv = np.einsum('t,tij->ij', div, mloc)

    xx = np.einsum('ti,tj->tij', gx, gx)
    yy = np.einsum('ti,tj->tij', gy, gy)
    xy = np.einsum('ti,tj->tij', gx, gy)
    xy = xy + np.transpose(xy, (0, 2, 1))

    grad_div = np.einsum('t,tij->ij', div * area, xx) + np.einsum('t,tij->ij', div * wint, yy)
    stretch = (np.einsum('t,tij->ij', 2.0 * a * area, xx)
               + np.einsum('t,tij->ij', b * wint + c * area, xy)
               + np.einsum('t,tij->ij', 2.0 * d * wint, yy))

    if s > 0:
        xq, w, bary = quadrature_x(mesh.nodes, tri, 2 * s)
        psix_q = bary @ psi_nodes[tri][:, :, 0].T       # (q, T)
        wder = area * (w @ (2.0 * s * xq ** (2 * s - 1) * psix_q))
        weight_term = np.einsum('t,tij->ij', wder, yy)
    else:
        weight_term = np.zeros((len(idx), len(idx)))

    bracket = lam * vv - grad_div + stretch - weight_term
    mat = -bracket
    if esys.normalization == FORM_ORTHONORMAL:
        mat = mat * lam
    return 0.5 * (mat + mat.T)


def d_lambda(esys: EigenSystem, spec: SymmetricFunctionSpec, psi: PerturbationField,
             mode: str = VOLUME_FORM, mesh: Optional[Mesh] = None,
             domain: Optional[Domain] = None) -> float:
    """Directional derivative of Lambda_{F,tau} along psi."""
    _check_normalization(esys)
    if max(spec.indices) >= esys.m or min(spec.indices) < 0:
        raise DerivativeError("cluster %r outside computed range" % (spec.indices,))
    lam = _cluster_value(esys, spec.indices)
    mesh = mesh if mesh is not None else esys.forms.mesh
    if mode == VOLUME_FORM:
        mat = volume_form_matrix(esys, spec.indices, psi, mesh)
    elif mode == BOUNDARY_FORM:
        if domain is None:
            raise DerivativeError("boundary form needs the domain")
        mat = hadamard_matrix(esys, spec.indices, psi, mesh, domain)
    else:
        raise DerivativeError("unknown mode %r" % mode)
    # matrices already carry the normalization factor
    return _prefactor(esys, spec, lam) * float(np.trace(mat))


#
# finite differences
#

@dataclass
class FDReport:
    """Central differences of Lambda over +-eps sweeps."""
    eps: List[float]
    plus: List[float]
    minus: List[float]
    central: List[float]
    base: float
    richardson: float
    convergence_slope: Optional[float]
    ambiguous: bool

    @property
    def second_order(self) -> bool:
        """Observed log-log slope lies in FD_SLOPE_RANGE."""
        if self.convergence_slope is None:
            return False
        lo, hi = FD_SLOPE_RANGE
        return lo <= self.convergence_slope <= hi

    def rows(self) -> List[List[float]]:
        return [[e, p, m, c] for e, p, m, c in zip(self.eps, self.plus, self.minus, self.central)]

    def as_dict(self) -> Dict[str, Any]:
        return {
            'eps': self.eps,
            'lambda_plus': self.plus,
            'lambda_minus': self.minus,
            'central': self.central,
            'base': self.base,
            'richardson': self.richardson,
            'convergence_slope': self.convergence_slope,
            'second_order': self.second_order,
            'ambiguous': self.ambiguous,
        }


def _check_family(domain: Domain, psi: PerturbationField, params: Sequence[float], samples: int) -> None:
    for p in params:
        rep = check_admissible(psi, domain, samples, param=p)
        if not rep.passed:
            raise PerturbationError("id + %g psi is not admissible: %s" % (p, rep.violation))


def _sweep(mesh: Mesh, s: int, psi: PerturbationField, params: Sequence[float],
           settings: SolveSettings) -> List[np.ndarray]:
    """Sorted eigenvalues on id + p psi meshes, in the order of params."""
    fam = affine_family(psi)

    def job(p: float) -> np.ndarray:
        return solve_mesh(map_mesh(mesh, fam.at(p)), s, settings).values

    if settings.threads > 1 and len(params) > 1:
        with ThreadPoolExecutor(max_workers=settings.threads) as pool:
            return list(pool.map(job, params))
    return [job(p) for p in params]


def _richardson(eps: Sequence[float], diffs: Sequence[float]) -> float:
    order = np.argsort(eps)
    e2, e1 = eps[order[0]], eps[order[1]]
    d2, d1 = diffs[order[0]], diffs[order[1]]
    return (e1 ** 2 * d2 - e2 ** 2 * d1) / (e1 ** 2 - e2 ** 2)


def _loglog_slope(eps: Sequence[float], err: Sequence[float]) -> Optional[float]:
    pts = [(math.log(e), math.log(abs(r))) for e, r in zip(eps, err) if abs(r) > 0]
    if len(pts) < 2:
        return None
    arr = np.array(pts)
    return float(np.polyfit(arr[:, 0], arr[:, 1], 1)[0])


def _tracking_ambiguous(vals: np.ndarray, idx: Sequence[int], rel_tol: float) -> bool:
    lo, hi = min(idx), max(idx)
    lam = float(np.mean(vals[list(idx)]))
    if lo > 0 and vals[lo] - vals[lo - 1] <= rel_tol * lam:
        return True
    if hi + 1 < len(vals) and vals[hi + 1] - vals[hi] <= rel_tol * lam:
        return True
    return False


def fd_derivative(domain: Domain, mesh: Mesh, target: Union[SymmetricFunctionSpec, int],
                  psi: PerturbationField, eps_list: Sequence[float],
                  settings: Optional[SolveSettings] = None) -> FDReport:
    """Central differences of Lambda_{F,tau} on id +- eps psi meshes.

    Eigenvalues are tracked by sorted index; a branch coming too close
    to the cluster, or a spread that shrinks as eps grows, marks the
    sweep ambiguous.
    """
    settings = settings or SolveSettings()
    spec = target if isinstance(target, SymmetricFunctionSpec) else SymmetricFunctionSpec((int(target),), 1)
    eps = [float(e) for e in eps_list]
    if len(set(eps)) < 2 or any(e <= 0 for e in eps):
        raise DerivativeError("eps_list needs >= 2 distinct positive values")
    if max(spec.indices) >= settings.m:
        raise DerivativeError("cluster %r needs m > %d" % (spec.indices, max(spec.indices)))

    params = [0.0]
    for e in eps:
        params += [e, -e]
    _check_family(domain, psi, params[1:], settings.samples)
    vals = _sweep(mesh, domain.s, psi, params, settings)

    idx = list(spec.indices)
    base = symmetric_function(vals[0][idx], spec.tau)
    plus, minus, central = [], [], []
    ambiguous = False
    spreads: List[Tuple[float, float]] = []
    for k, e in enumerate(eps):
        vp, vm = vals[1 + 2 * k], vals[2 + 2 * k]
        lp = symmetric_function(vp[idx], spec.tau)
        lm = symmetric_function(vm[idx], spec.tau)
        plus.append(lp)
        minus.append(lm)
        central.append((lp - lm) / (2 * e))
        for v in (vp, vm):
            if _tracking_ambiguous(v, idx, settings.cluster_tol):
                ambiguous = True
        spreads.append((e, float(max(np.ptp(vp[idx]), np.ptp(vm[idx])))))
    if len(idx) > 1:
        spreads.sort()
        for (_, s0), (_, s1) in zip(spreads, spreads[1:]):
            if s1 < s0:
                ambiguous = True
    if ambiguous:
        log.warning("branch tracking ambiguous for cluster %r", idx)

    rich = _richardson(eps, central)
    # two steps are used up by the extrapolation, a slope needs a third
    slope: Optional[float] = None
    if len(eps) > 2 and any(c != 0 for c in central):
        slope = _loglog_slope(eps, [c - rich for c in central])
    return FDReport(eps, plus, minus, central, base, rich, slope, ambiguous)


@dataclass
class BranchSlopes:
    """Formula and one-sided finite difference branch slopes."""
    formula: List[float]
    fd: List[float]
    matrix: np.ndarray
    eps: float
    mode: str
    resolved: bool = True

    def as_dict(self) -> Dict[str, Any]:
        return {
            'formula': self.formula,
            'fd': self.fd,
            'resolved': self.resolved,
            'matrix': self.matrix.tolist(),
            'eps': self.eps,
            'mode': self.mode,
        }


def branch_slopes(domain: Domain, mesh: Mesh, esys: EigenSystem, indices: Sequence[int],
                  psi: PerturbationField, eps: float = 1e-3,
                  settings: Optional[SolveSettings] = None,
                  mode: str = BOUNDARY_FORM) -> BranchSlopes:
    """Eigenvalues of the branch matrix against one-sided FD slopes.

    The FD slopes use the second order forward rule from the cluster
    mean at eps=0, sorted branches at eps and 2*eps.  The mean stands
    in for the multiple eigenvalue the mesh has split; its error decays
    like (spread / eps)^2, so the result is marked unresolved unless
    eps times the smallest slope gap dominates the spread.
    """
    settings = settings or SolveSettings()
    idx = list(indices)
    if eps <= 0:
        raise DerivativeError("eps must be positive")
    if mode == BOUNDARY_FORM:
        mat = hadamard_matrix(esys, idx, psi, mesh, domain)
    elif mode == VOLUME_FORM:
        mat = volume_form_matrix(esys, idx, psi, mesh)
    else:
        raise DerivativeError("unknown mode %r" % mode)
    formula = sorted(float(v) for v in np.linalg.eigvalsh(mat))

    _check_family(domain, psi, [eps, 2 * eps], settings.samples)
    v1, v2 = _sweep(mesh, domain.s, psi, [eps, 2 * eps], settings)
    base = _cluster_value(esys, idx)
    fd = sorted(float((-3.0 * base + 4.0 * v1[i] - v2[i]) / (2.0 * eps)) for i in idx)
    resolved = branches_resolved(esys, idx, formula, eps)
    if not resolved:
        log.warning("eps=%g does not resolve cluster %r, spread %.3g", eps, idx,
                    float(np.ptp(esys.values[idx])))
    return BranchSlopes(formula, fd, mat, eps, mode, resolved)


def branches_resolved(esys: EigenSystem, indices: Sequence[int], slopes: Sequence[float],
                      eps: float, factor: float = RESOLVE_FACTOR) -> bool:
    """True when eps * (smallest slope gap) >= factor * discrete spread."""
    idx = list(indices)
    spread = float(np.ptp(esys.values[idx]))
    if len(idx) < 2 or spread == 0.0:
        return True
    gaps = np.diff(sorted(slopes))
    gap = float(gaps.min())
    if gap <= 0.0:
        return False
    return eps * gap >= factor * spread


#
# combined report
#

@dataclass
class DerivativeReport:
    """Volume form, boundary form and FD values for one spec and field."""
    spec: SymmetricFunctionSpec
    eigenvalues: List[float]
    volume_form: float
    boundary_form: Optional[float]
    boundary_refused: Optional[str]
    branch_matrix: np.ndarray
    branch_slopes: List[float]
    hadamard_matrix: Optional[np.ndarray]
    hadamard_slopes: Optional[List[float]]
    fd: Optional[FDReport] = None
    normalization: str = MASS_ORTHONORMAL
    extra: Dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, Any]:
        res: Dict[str, Any] = {
            'cluster': [i + 1 for i in self.spec.indices],
            'tau': self.spec.tau,
            'eigenvalues': self.eigenvalues,
            'volume_form': self.volume_form,
            'boundary_form': self.boundary_form,
            'boundary_refused': self.boundary_refused,
            'branch_matrix': self.branch_matrix.tolist(),
            'branch_slopes': self.branch_slopes,
            'hadamard_matrix': None if self.hadamard_matrix is None else self.hadamard_matrix.tolist(),
            'hadamard_slopes': self.hadamard_slopes,
            'normalization': self.normalization,
            'fd': None if self.fd is None else self.fd.as_dict(),
        }
        res.update(self.extra)
        return res


def derivative_report(esys: EigenSystem, spec: SymmetricFunctionSpec, psi: PerturbationField,
                      mesh: Mesh, domain: Domain, eps_list: Optional[Sequence[float]] = None,
                      settings: Optional[SolveSettings] = None) -> DerivativeReport:
    """Bundle all derivative routes; boundary form is skipped behind the gate."""
    vol = d_lambda(esys, spec, psi, VOLUME_FORM, mesh, domain)
    bmat = volume_form_matrix(esys, spec.indices, psi, mesh)
    bslopes = sorted(float(v) for v in np.linalg.eigvalsh(bmat))

    bnd: Optional[float] = None
    refused: Optional[str] = None
    hmat: Optional[np.ndarray] = None
    hslopes: Optional[List[float]] = None
    try:
        hmat = hadamard_matrix(esys, spec.indices, psi, mesh, domain)
        hslopes = sorted(float(v) for v in np.linalg.eigvalsh(hmat))
        bnd = d_lambda(esys, spec, psi, BOUNDARY_FORM, mesh, domain)
    except RegularityError as ex:
        refused = str(ex)
        log.info("boundary form skipped: %s", ex)

    fd = None
    if eps_list:
        fd = fd_derivative(domain, mesh, spec, psi, eps_list, settings)
    return DerivativeReport(spec, [float(esys.values[i]) for i in spec.indices],
                            vol, bnd, refused, bmat, bslopes, hmat, hslopes, fd,
                            esys.normalization)
