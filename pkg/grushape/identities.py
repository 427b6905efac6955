"""Closed identities and criticality residuals.

pohozaev_residual:  lambda = 1/2 int (du/dn)^2 |n_G|^2 ((x, (1+s)y).n)
scaling_check:      t^2 lambda_j(delta_t mesh) = lambda_j
constraint differentials and the overdetermined-condition residuals
for volume and perimeter constraints.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from grushape.eigensolver import (
    FORM_ORTHONORMAL, MASS_ORTHONORMAL, EigenSystem, SolveSettings, renormalize, solve_mesh,
)
from grushape.geometry import Domain, Mesh, boundary_geometry
from grushape.perturbation import DILATION, PerturbationField, dilation_family, make_field, map_mesh
from grushape.shapederiv import (
    VOLUME_FORM, DerivativeError, SymmetricFunctionSpec, boundary_matrix,
    d_lambda, grushin_normal_weight, normal_derivative_trace,
)
from grushape.shapelog import getLogger

__all__ = (
    'PohozaevResult', 'ScalingResult', 'CriticalityResult', 'LagrangeResult',
    'pohozaev_residual', 'scaling_check', 'constraint_differential',
    'criticality_residual', 'criticality_from_profile', 'lagrange_multipliers',
    'VOLUME', 'PERIMETER', 'DEGENERATE_EDGE_TOL',
)

log = getLogger('grushape.identities')

VOLUME = 'volume'
PERIMETER = 'perimeter'

# edges with chord midpoint this close to x=0 are left out of statistics
DEGENERATE_EDGE_TOL = 1e-10


#
# Rellich-Pohozaev
#

@dataclass
class PohozaevResult:
    index: int
    lhs: float
    rhs: float
    residual: float
    hadamard_dilation: float

    def as_dict(self) -> Dict[str, Any]:
        return {
            'index': self.index + 1,
            'lambda': self.lhs,
            'rhs': self.rhs,
            'residual': self.residual,
            'hadamard_dilation': self.hadamard_dilation,
            'matching_defect': self.rhs + 0.5 * self.hadamard_dilation,
        }


def pohozaev_residual(esys: EigenSystem, index: int, mesh: Mesh, domain: Domain) -> PohozaevResult:
    """Boundary integral against the eigenvalue, 0-based index.

    Uses the same edge rule and traces as the boundary form, so
    rhs equals -1/2 of the dilation boundary value to rounding.
    """
    if not 0 <= index < esys.m:
        raise DerivativeError("eigen index %d out of range [1, %d]" % (index + 1, esys.m))
    if esys.normalization != MASS_ORTHONORMAL:
        esys = renormalize(esys, MASS_ORTHONORMAL)
    bg = boundary_geometry(domain, mesh)
    dn = normal_derivative_trace(esys, mesh, domain, bg)[:, [index]]
    gen = make_field(DILATION, {'s': domain.s})
    gen_n = np.einsum('ed,ed->e', gen.evaluate(bg.point), bg.normal)
    hval = float(boundary_matrix(dn, gen_n, bg, domain.s)[0, 0])
    lam = float(esys.values[index])
    # same sum as hval with the sign flipped and halved
    rhs = 0.5 * float(np.dot(bg.arc_weight * gen_n * grushin_normal_weight(bg, domain.s), dn[:, 0] ** 2))
    res = abs(lam - rhs) / lam
    log.debug("pohozaev j=%d: lambda=%.12g rhs=%.12g residual=%.3g", index + 1, lam, rhs, res)
    return PohozaevResult(index, lam, rhs, res, hval)


#
# dilation scaling
#

@dataclass
class ScalingResult:
    t: float
    base: List[float]
    scaled: List[float]
    deviations: List[float]

    @property
    def max_deviation(self) -> float:
        return max(self.deviations)

    def as_dict(self) -> Dict[str, Any]:
        return {
            't': self.t,
            'lambda': self.base,
            'lambda_scaled': self.scaled,
            'deviations': self.deviations,
            'max_deviation': self.max_deviation,
        }


def scaling_check(domain: Domain, mesh: Mesh, t: float, m: int = 5,
                  settings: Optional[SolveSettings] = None,
                  base: Optional[np.ndarray] = None) -> ScalingResult:
    """Worst |t^2 lambda_j(delta_t mesh) - lambda_j| / lambda_j over j <= m.

    base may carry eigenvalues already computed on mesh.
    """
    if t <= 0:
        raise ValueError("t must be positive, got %r" % t)
    settings = settings or SolveSettings(m=m)
    if settings.m != m:
        settings = SolveSettings(m, settings.tol, settings.seed, settings.cluster_tol,
                                 settings.threads, settings.samples)
    if base is None:
        base = solve_mesh(mesh, domain.s, settings).values
    fam = dilation_family(domain.s)
    scaled = solve_mesh(map_mesh(mesh, fam.at(t)), domain.s, settings).values
    dev = np.abs(t * t * scaled - base) / base
    return ScalingResult(float(t), base.tolist(), scaled.tolist(), dev.tolist())


#
# constraint differentials
#

def constraint_differential(mesh: Mesh, domain: Domain, psi: PerturbationField, which: str) -> float:
    """First variation of volume or perimeter along psi.

    Volume uses the polygon rule on boundary nodes, which is the exact
    derivative of the mesh volume under node transport. Perimeter uses
    psi.n H on the exact curve with arclength weights.
    """
    if which == VOLUME:
        p = mesh.nodes[mesh.boundary_edges]
        d = p[:, 1] - p[:, 0]
        nvec = np.column_stack([d[:, 1], -d[:, 0]])
        pav = 0.5 * (psi.evaluate(p[:, 0]) + psi.evaluate(p[:, 1]))
        return float(np.einsum('ed,ed->', nvec, pav))
    if which == PERIMETER:
        corners = domain.corners()
        if corners:
            log.warning("perimeter differential on domain with %d corners, corners carry no curvature",
                        len(corners))
        bg = boundary_geometry(domain, mesh)
        psi_n = np.einsum('ed,ed->e', psi.evaluate(bg.point), bg.normal)
        return float(np.dot(bg.arc_weight, psi_n * bg.curvature))
    raise ValueError("unknown constraint %r" % which)


#
# criticality
#

@dataclass
class CriticalityResult:
    """Boundary profile and its fit against a constant or c*H."""
    constraint: str
    profile: np.ndarray
    curvature: np.ndarray
    weights: np.ndarray
    arc_position: np.ndarray
    included: np.ndarray
    constant: Optional[float]
    deviation: Optional[float]
    applicable: bool = True

    def profile_rows(self) -> List[List[object]]:
        rows: List[List[object]] = [['arclength', 'g', 'H', 'weight', 'included']]
        for a, g, h, w, inc in zip(self.arc_position.tolist(), self.profile.tolist(),
                                   self.curvature.tolist(), self.weights.tolist(),
                                   self.included.tolist()):
            rows.append([a, g, h, w, int(inc)])
        return rows

    def as_dict(self) -> Dict[str, Any]:
        return {
            'constraint': self.constraint,
            'constant': self.constant,
            'deviation': self.deviation,
            'applicable': self.applicable,
            'edges': int(len(self.profile)),
            'edges_excluded': int(np.count_nonzero(~self.included)),
        }


def criticality_from_profile(g: np.ndarray, weights: np.ndarray, constraint: str,
                             curvature: Optional[np.ndarray] = None,
                             included: Optional[np.ndarray] = None,
                             arc_position: Optional[np.ndarray] = None) -> CriticalityResult:
    """Fit g to c (volume) or c*H (perimeter) with weighted least squares."""
    g = np.asarray(g, dtype=float)
    w = np.asarray(weights, dtype=float)
    hv = np.zeros_like(g) if curvature is None else np.asarray(curvature, dtype=float)
    inc = np.ones(len(g), dtype=bool) if included is None else np.asarray(included, dtype=bool)
    pos = np.cumsum(w) - 0.5 * w if arc_position is None else np.asarray(arc_position)
    gi, wi, hi = g[inc], w[inc], hv[inc]
    wsum = wi.sum()
    if wsum <= 0:
        raise ValueError("no boundary weight left for criticality statistics")

    if constraint == VOLUME:
        c = float(np.dot(wi, gi) / wsum)
        if c == 0:
            return CriticalityResult(constraint, g, hv, w, pos, inc, c, None, False)
        rms = float(np.sqrt(np.dot(wi, (gi - c) ** 2) / wsum))
        return CriticalityResult(constraint, g, hv, w, pos, inc, c, rms / c)
    if constraint == PERIMETER:
        hh = float(np.dot(wi, hi * hi))
        if hh <= 1e-12 * wsum:
            log.info("perimeter criticality not applicable: curvature vanishes")
            return CriticalityResult(constraint, g, hv, w, pos, inc, None, None, False)
        c = float(np.dot(wi, gi * hi) / hh)
        rms = float(np.sqrt(np.dot(wi, (gi - c * hi) ** 2) / wsum))
        scale = float(np.dot(wi, np.abs(gi)) / wsum)
        dev = rms / scale if scale > 0 else None
        return CriticalityResult(constraint, g, hv, w, pos, inc, c, dev, dev is not None)
    raise ValueError("unknown constraint %r" % constraint)


def criticality_residual(esys: EigenSystem, indices: Sequence[int], mesh: Mesh, domain: Domain,
                         constraint: str = VOLUME, rel_tol: float = 1e-6) -> CriticalityResult:
    """g = sum_l (dv_l/dn)^2 |n_G|^2 over cluster F, fitted per constraint."""
    if esys.normalization != FORM_ORTHONORMAL:
        esys = renormalize(esys, FORM_ORTHONORMAL, rel_tol)
    idx = list(indices)
    if not idx or max(idx) >= esys.m or min(idx) < 0:
        raise DerivativeError("cluster %r outside computed range" % (idx,))
    bg = boundary_geometry(domain, mesh)
    dn = normal_derivative_trace(esys, mesh, domain, bg)[:, idx]
    g = np.sum(dn ** 2, axis=1) * grushin_normal_weight(bg, domain.s)
    included = np.abs(bg.midpoint[:, 0]) >= DEGENERATE_EDGE_TOL
    if constraint == PERIMETER and domain.corners():
        log.warning("perimeter criticality on domain with corners")
    return criticality_from_profile(g, bg.arc_weight, constraint, bg.curvature,
                                    included, bg.arc_position)


#
# multipliers
#

@dataclass
class LagrangeResult:
    names: List[str]
    d_lambda: List[float]
    d_volume: List[float]
    multipliers: List[float]

    @property
    def spread(self) -> float:
        """(max - min) / |mean| of the multipliers."""
        arr = np.array(self.multipliers)
        return float(np.ptp(arr) / abs(arr.mean()))

    def as_dict(self) -> Dict[str, Any]:
        return {
            'fields': self.names,
            'd_lambda': self.d_lambda,
            'd_volume': self.d_volume,
            'multipliers': self.multipliers,
            'spread': self.spread,
        }


def lagrange_multipliers(esys: EigenSystem, spec: SymmetricFunctionSpec,
                         fields: Sequence[Tuple[str, PerturbationField]],
                         mesh: Mesh, domain: Domain, mode: str = VOLUME_FORM) -> LagrangeResult:
    """Multiplier -dLambda(psi)/dVol(psi) per field.

    A volume-critical shape gives the same value for every field.
    """
    if len(fields) < 2:
        raise ValueError("need at least 2 fields to compare multipliers")
    names, dls, dvs, mults = [], [], [], []
    for name, psi in fields:
        dl = d_lambda(esys, spec, psi, mode, mesh, domain)
        dv = constraint_differential(mesh, domain, psi, VOLUME)
        if abs(dv) < 1e-14:
            raise ValueError("field %r does not change the volume" % name)
        names.append(name)
        dls.append(dl)
        dvs.append(dv)
        mults.append(-dl / dv)
    return LagrangeResult(names, dls, dvs, mults)
