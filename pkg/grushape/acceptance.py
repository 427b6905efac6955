"""Acceptance battery run by the 'suite' command.

Each criterion builds its own domains and meshes, measures and
returns its values with a pass flag.  Failures inside a criterion are
recorded, the battery continues.
"""

import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from grushape.eigensolver import SolveSettings, cluster, solve_mesh
from grushape.geometry import Domain, Mesh, build_domain, triangulate
from grushape.identities import (
    VOLUME, constraint_differential, criticality_residual, lagrange_multipliers,
    pohozaev_residual, scaling_check,
)
from grushape.oracle1d import bessel_disk_eigenvalue, rectangle_spectrum
from grushape.perturbation import (
    AXIS_STRETCH, BOUNDARY_BUMP, DILATION, PerturbationField, make_field,
)
from grushape.shapederiv import (
    BOUNDARY_FORM, VOLUME_FORM, SymmetricFunctionSpec, branch_slopes, d_lambda,
    fd_derivative, hadamard_matrix,
)
from grushape.shapelog import getLogger

__all__ = ('CriterionResult', 'SuiteResult', 'run_suite', 'CRITERIA')

log = getLogger('grushape.acceptance')

RECT = 'rectangle(0.2, 1.2, 1)'
WIDE_RECT = 'rectangle(-1, 1, 1)'
PI_SQUARE = 'square(0, pi)'
UNIT_DISK = 'disk(0, 0, 1)'


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    values: Dict[str, Any]
    seconds: float = 0.0
    error: Optional[str] = None

    def as_dict(self) -> Dict[str, Any]:
        return {
            'number': self.number,
            'title': self.title,
            'passed': self.passed,
            'values': self.values,
            'seconds': self.seconds,
            'error': self.error,
        }


@dataclass
class SuiteResult:
    criteria: List[CriterionResult] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    @property
    def errors(self) -> int:
        return sum(1 for c in self.criteria if c.error)

    def as_dict(self) -> Dict[str, Any]:
        return {
            'passed': self.passed,
            'failed': [c.number for c in self.criteria if not c.passed],
            'criteria': [c.as_dict() for c in self.criteria],
            'seconds': self.seconds,
        }


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


def _setup(spec: str, s: int, n: Optional[int] = None, h: Optional[float] = None) -> Tuple[Domain, Mesh]:
    dom = build_domain(spec, s)
    return dom, triangulate(dom, h_target=h, n=n)


def _bump(domain: Domain, support: Sequence[float]) -> PerturbationField:
    return make_field(BOUNDARY_BUMP, {'support': support, 'direction': (1.0, 0.0)}, domain)


#
# criteria
#

def crit_scaling(st: SolveSettings) -> Tuple[bool, Dict[str, Any]]:
    """Discrete dilation scaling law."""
    worst = 0.0
    vals: Dict[str, Any] = {}
    for s in (1, 2):
        dom, mesh = _setup(RECT, s, n=32)
        base = solve_mesh(mesh, s, st).values
        for t in (0.5, 2.0):
            dev = scaling_check(dom, mesh, t, st.m, st, base).max_deviation
            vals['s%d_t%g' % (s, t)] = dev
            worst = max(worst, dev)
    vals['max_deviation'] = worst
    return worst <= 1e-10, vals


def crit_oracle(st: SolveSettings) -> Tuple[bool, Dict[str, Any]]:
    """FEM against the 1D oracle, with convergence rate."""
    ref = np.array(rectangle_spectrum(0.2, 1.2, 1.0, 1, st.m).values)
    hs, errs = [], []
    for n in (32, 64, 128):
        dom, mesh = _setup(RECT, 1, n=n)
        lam = solve_mesh(mesh, 1, st).values
        hs.append(1.0 / n)
        errs.append(float(np.max(np.abs(lam - ref) / ref)))
    slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    vals = {'oracle': ref.tolist(), 'errors': errs, 'slope': slope}
    return errs[-1] < 0.01 and 1.8 <= slope <= 2.2, vals


def crit_classical(st: SolveSettings) -> Tuple[bool, Dict[str, Any]]:
    """s=0 square reproduces j^2 + k^2."""
    dom, mesh = _setup(PI_SQUARE, 0, n=64)
    lam = solve_mesh(mesh, 0, st).values[:5]
    exact = np.array([2.0, 5.0, 5.0, 8.0, 10.0])
    err = float(np.max(np.abs(lam - exact) / exact))
    return err < 0.005, {'eigenvalues': lam.tolist(), 'max_error': err}


def crit_hadamard_fd(st: SolveSettings) -> Tuple[bool, Dict[str, Any]]:
    """Boundary form against central differences for a simple eigenvalue."""
    dom, mesh = _setup(RECT, 1, n=128)
    esys = solve_mesh(mesh, 1, st)
    psi = _bump(dom, (0.9, 1.5, 0.2, 0.8))
    spec = SymmetricFunctionSpec((0,), 1)
    bnd = d_lambda(esys, spec, psi, BOUNDARY_FORM, mesh, dom)
    fd = fd_derivative(dom, mesh, spec, psi, (2e-3, 1e-3, 5e-4), st)
    dis = _rel(bnd, fd.richardson)
    slope = fd.convergence_slope
    vals = {'boundary_form': bnd, 'fd': fd.richardson, 'disagreement': dis,
            'fd_error_slope': slope, 'central': fd.central}
    return dis <= 0.02 and fd.second_order, vals


def crit_volume_boundary(st: SolveSettings) -> Tuple[bool, Dict[str, Any]]:
    """Volume form against boundary form, also across x=0."""
    vals: Dict[str, Any] = {}
    ok = True
    cases = ((RECT, (0.9, 1.5, 0.2, 0.8)), (WIDE_RECT, (0.7, 1.3, 0.2, 0.8)))
    for name, (spec_txt, support) in zip(('away', 'across'), cases):
        dom, mesh = _setup(spec_txt, 1, n=128)
        esys = solve_mesh(mesh, 1, st)
        psi = _bump(dom, support)
        spec = SymmetricFunctionSpec((0,), 1)
        vol = d_lambda(esys, spec, psi, VOLUME_FORM, mesh, dom)
        bnd = d_lambda(esys, spec, psi, BOUNDARY_FORM, mesh, dom)
        dis = _rel(bnd, vol)
        vals[name] = {'volume_form': vol, 'boundary_form': bnd, 'disagreement': dis}
        ok = ok and dis <= 0.02
    return ok, vals


def crit_dilation(st: SolveSettings) -> Tuple[bool, Dict[str, Any]]:
    """Dilation derivative is -2 lambda; Pohozaev matches the boundary form."""
    dom, mesh = _setup(RECT, 1, n=64)
    esys = solve_mesh(mesh, 1, st)
    psi = make_field(DILATION, {}, dom)
    lam = float(esys.values[0])
    vol = d_lambda(esys, SymmetricFunctionSpec((0,), 1), psi, VOLUME_FORM, mesh, dom)
    hmat = hadamard_matrix(esys, [0], psi, mesh, dom)
    poh = pohozaev_residual(esys, 0, mesh, dom)
    defect = abs(poh.rhs + 0.5 * float(hmat[0, 0])) / lam
    vals = {'lambda': lam, 'volume_form': vol, 'ratio': vol / lam, 'matching_defect': defect}
    return _rel(vol, -2 * lam) <= 0.01 and defect <= 1e-10, vals


def crit_pohozaev(st: SolveSettings) -> Tuple[bool, Dict[str, Any]]:
    """Rellich-Pohozaev residual and its decay under refinement."""
    vals: Dict[str, Any] = {}
    ok = True
    cases = (('rectangle_s1', RECT, 1, (128, 256), None),
             ('disk_s0', UNIT_DISK, 0, None, (1.0 / 64, 1.0 / 128)))
    for name, spec_txt, s, ns, hs in cases:
        res = []
        for k in range(2):
            dom, mesh = _setup(spec_txt, s, n=ns[k] if ns else None, h=hs[k] if hs else None)
            esys = solve_mesh(mesh, s, st)
            res.append(pohozaev_residual(esys, 0, mesh, dom).residual)
        ratio = res[1] / res[0] if res[0] > 0 else 0.0
        vals[name] = {'residuals': res, 'ratio': ratio}
        ok = ok and res[0] < 0.02 and ratio <= 0.6
    return ok, vals


def crit_bifurcation(st: SolveSettings) -> Tuple[bool, Dict[str, Any]]:
    """Branch slopes at the double eigenvalue 5 of the square."""
    dom, mesh = _setup(PI_SQUARE, 0, n=64)
    st2 = SolveSettings(st.m, st.tol, st.seed, 1e-3, st.threads, st.samples)
    esys = solve_mesh(mesh, 0, st2)
    idx = list(cluster(esys, 1e-3).find(1).indices)
    psi = make_field(AXIS_STRETCH, {'axis': 'x'}, dom)
    br = branch_slopes(dom, mesh, esys, idx, psi, 1e-2, st2)
    analytic = [-8.0, -2.0]
    fd2 = fd_derivative(dom, mesh, SymmetricFunctionSpec(tuple(idx), 2), psi, (1e-3, 5e-4), st2)
    ok = len(idx) == 2 and br.resolved
    if ok:
        ok = (all(_rel(f, a) <= 0.05 for f, a in zip(br.formula, analytic))
              and all(_rel(f, m) <= 0.05 for f, m in zip(br.fd, br.formula))
              and _rel(fd2.richardson, -50.0) <= 0.05)
    vals = {'cluster': [i + 1 for i in idx], 'matrix_slopes': br.formula,
            'fd_slopes': br.fd, 'resolved': br.resolved, 'analytic': analytic, 'lambda_f2_fd': fd2.richardson}
    return ok, vals


def crit_criticality(st: SolveSettings) -> Tuple[bool, Dict[str, Any]]:
    """Volume criticality of the disk, non-criticality of the square."""
    dom, mesh = _setup(UNIT_DISK, 0, h=0.02)
    esys = solve_mesh(mesh, 0, st)
    disk = criticality_residual(esys, [0], mesh, dom, VOLUME)
    fields = [
        ('dilation', make_field(DILATION, {}, dom)),
        ('stretch_x', make_field(AXIS_STRETCH, {'axis': 'x'}, dom)),
        ('bump', _bump(dom, (0.5, 1.2, -0.5, 0.5))),
    ]
    mult = lagrange_multipliers(esys, SymmetricFunctionSpec((0,), 1), fields, mesh, dom)

    sdom, smesh = _setup(PI_SQUARE, 0, n=64)
    sq = criticality_residual(solve_mesh(smesh, 0, st), [0], smesh, sdom, VOLUME)
    ref = bessel_disk_eigenvalue(1)
    vals = {
        'disk_deviation': disk.deviation,
        'square_deviation': sq.deviation,
        'multipliers': mult.multipliers,
        'multiplier_spread': mult.spread,
        'disk_lambda': float(esys.values[0]),
        'disk_lambda_exact': ref,
        'volume_differential_dilation': constraint_differential(mesh, dom, fields[0][1], VOLUME),
    }
    ok = (disk.deviation is not None and disk.deviation < 0.02
          and sq.deviation is not None and sq.deviation > 0.2
          and mult.spread <= 0.05)
    return ok, vals


CRITERIA: List[Tuple[int, str, Callable[[SolveSettings], Tuple[bool, Dict[str, Any]]]]] = [
    (1, 'dilation scaling law', crit_scaling),
    (2, 'oracle agreement', crit_oracle),
    (3, 'classical reduction', crit_classical),
    (4, 'boundary form vs finite differences', crit_hadamard_fd),
    (5, 'volume form vs boundary form', crit_volume_boundary),
    (6, 'dilation derivative', crit_dilation),
    (7, 'Rellich-Pohozaev identity', crit_pohozaev),
    (8, 'branch slopes at a double eigenvalue', crit_bifurcation),
    (9, 'volume criticality', crit_criticality),
]

#: wall clock limit for the whole battery
SUITE_TIME_LIMIT = 300.0


def run_suite(settings: Optional[SolveSettings] = None,
              only: Optional[Sequence[int]] = None) -> SuiteResult:
    """Run criteria in order, the last one is the run time itself."""
    st = settings or SolveSettings()
    res = SuiteResult()
    t0 = time.time()
    for num, title, fn in CRITERIA:
        if only and num not in only:
            continue
        c0 = time.time()
        try:
            passed, vals = fn(st)
            err = None
        except Exception as ex:  # pylint: disable=broad-except
            log.exception("criterion %d failed with error", num)
            passed, vals, err = False, {}, '%s: %s' % (ex.__class__.__name__, ex)
        dt = time.time() - c0
        log.info("criterion %d (%s): %s in %.1fs", num, title, 'pass' if passed else 'FAIL', dt)
        res.criteria.append(CriterionResult(num, title, bool(passed), vals, dt, err))
    res.seconds = time.time() - t0
    if not only or 10 in only:
        ok = res.seconds < SUITE_TIME_LIMIT and not res.errors
        res.criteria.append(CriterionResult(10, 'suite run time', ok,
                                            {'seconds': res.seconds, 'limit': SUITE_TIME_LIMIT,
                                             'reported': len(res.criteria)}, res.seconds))
    return res
