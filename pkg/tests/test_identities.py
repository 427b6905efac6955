
import math

import numpy as np
import pytest

from grushape.eigensolver import SolveSettings, solve_mesh
from grushape.geometry import build_domain, triangulate
from grushape.identities import (
    PERIMETER, VOLUME, constraint_differential, criticality_from_profile,
    criticality_residual, lagrange_multipliers, pohozaev_residual, scaling_check,
)
from grushape.perturbation import AXIS_STRETCH, DILATION, RADIAL, make_field
from grushape.shapederiv import DerivativeError, SymmetricFunctionSpec, hadamard_matrix

RECT = 'rectangle(0.2, 1.2, 1)'


def _setup(spec: str, s: int, n=None, h=None, m: int = 3):
    dom = build_domain(spec, s=s)
    mesh = triangulate(dom, n=n, h_target=h)
    return dom, mesh, solve_mesh(mesh, s, SolveSettings(m=m))


def test_pohozaev() -> None:
    dom, mesh, esys = _setup(RECT, 1, n=16)
    res = pohozaev_residual(esys, 0, mesh, dom)
    assert res.lhs == esys.values[0]
    assert res.residual < 0.25
    # same edge sum as the boundary form along the dilation generator
    hmat = hadamard_matrix(esys, [0], make_field(DILATION, {}, dom), mesh, dom)
    assert res.hadamard_dilation == pytest.approx(float(hmat[0, 0]), rel=1e-12)
    d = res.as_dict()
    assert d['index'] == 1
    assert abs(d['matching_defect']) <= 1e-10 * res.lhs

    with pytest.raises(DerivativeError):
        pohozaev_residual(esys, 3, mesh, dom)


def test_pohozaev_refines() -> None:
    coarse = _setup(RECT, 1, n=8, m=1)
    fine = _setup(RECT, 1, n=32, m=1)
    r0 = pohozaev_residual(coarse[2], 0, coarse[1], coarse[0]).residual
    r1 = pohozaev_residual(fine[2], 0, fine[1], fine[0]).residual
    assert r1 < r0


@pytest.mark.parametrize('s,t', [(1, 2.0), (1, 0.5), (2, 2.0)])
def test_scaling(s: int, t: float) -> None:
    dom = build_domain(RECT, s=s)
    mesh = triangulate(dom, n=8)
    res = scaling_check(dom, mesh, t, m=3)
    assert len(res.deviations) == 3
    assert res.max_deviation < 1e-9
    assert res.as_dict()['max_deviation'] == res.max_deviation
    assert res.scaled[0] == pytest.approx(res.base[0] / t ** 2)


def test_scaling_errors() -> None:
    dom = build_domain(RECT, s=1)
    mesh = triangulate(dom, n=4)
    with pytest.raises(ValueError):
        scaling_check(dom, mesh, 0.0)


def test_volume_differential() -> None:
    dom = build_domain(RECT, s=1)
    mesh = triangulate(dom, n=4)
    # div (x, 2y) = 3
    assert constraint_differential(mesh, dom, make_field(DILATION, {}, dom), VOLUME) == pytest.approx(3.0)
    assert constraint_differential(mesh, dom, make_field(AXIS_STRETCH, {'axis': 'y'}, dom), VOLUME) \
        == pytest.approx(1.0)
    with pytest.raises(ValueError):
        constraint_differential(mesh, dom, make_field(DILATION, {}, dom), 'area')


def test_perimeter_differential() -> None:
    dom = build_domain('disk(0, 0, 1)', s=0)
    mesh = triangulate(dom, h_target=0.2)
    psi = make_field(RADIAL, {'center': [0.0, 0.0]})
    assert constraint_differential(mesh, dom, psi, PERIMETER) == pytest.approx(2 * math.pi, rel=1e-6)

    rect = build_domain(RECT, s=1)
    rmesh = triangulate(rect, n=4)
    assert constraint_differential(rmesh, rect, make_field(DILATION, {}, rect), PERIMETER) == 0.0


def test_criticality_from_profile() -> None:
    w = np.full(8, 0.5)
    res = criticality_from_profile(np.full(8, 3.0), w, VOLUME)
    assert res.constant == pytest.approx(3.0)
    assert res.deviation == pytest.approx(0.0)
    assert res.applicable

    g = np.array([1.0, 3.0] * 4)
    res = criticality_from_profile(g, w, VOLUME)
    assert res.deviation == pytest.approx(0.5)

    res = criticality_from_profile(np.ones(8), w, PERIMETER)
    assert not res.applicable
    assert res.constant is None

    res = criticality_from_profile(2.0 * np.ones(8), w, PERIMETER, curvature=np.ones(8))
    assert res.constant == pytest.approx(2.0)
    assert res.deviation == pytest.approx(0.0)

    res = criticality_from_profile(np.zeros(8), w, VOLUME)
    assert not res.applicable

    with pytest.raises(ValueError):
        criticality_from_profile(g, w, VOLUME, included=np.zeros(8, dtype=bool))
    with pytest.raises(ValueError):
        criticality_from_profile(g, w, 'mass')


def test_criticality_disk_vs_square() -> None:
    ddom, dmesh, desys = _setup('disk(0, 0, 1)', 0, h=0.08, m=1)
    disk = criticality_residual(desys, [0], dmesh, ddom, VOLUME)
    sdom, smesh, sesys = _setup('square(0, pi)', 0, n=16, m=1)
    square = criticality_residual(sesys, [0], smesh, sdom, VOLUME)
    assert disk.deviation is not None and square.deviation is not None
    assert disk.deviation < square.deviation
    assert square.deviation > 0.2

    rows = disk.profile_rows()
    assert rows[0] == ['arclength', 'g', 'H', 'weight', 'included']
    assert len(rows) == len(dmesh.boundary_edges) + 1

    with pytest.raises(DerivativeError):
        criticality_residual(desys, [1], dmesh, ddom)


def test_criticality_excludes_degenerate_edges() -> None:
    dom, mesh, esys = _setup('rectangle(-1, 1, 1)', 1, n=5, m=1)
    res = criticality_residual(esys, [0], mesh, dom, VOLUME)
    # one chord on the bottom and one on the top are centred on x=0
    assert res.as_dict()['edges_excluded'] == 2
    assert np.count_nonzero(res.included) == len(mesh.boundary_edges) - 2


def test_lagrange_multipliers() -> None:
    dom, mesh, esys = _setup('disk(0, 0, 1)', 0, h=0.08, m=1)
    fields = [
        ('dilation', make_field(DILATION, {}, dom)),
        ('stretch_x', make_field(AXIS_STRETCH, {'axis': 'x'}, dom)),
    ]
    res = lagrange_multipliers(esys, SymmetricFunctionSpec((0,)), fields, mesh, dom)
    assert res.names == ['dilation', 'stretch_x']
    assert res.multipliers[0] == pytest.approx(esys.values[0] / res.d_volume[0] * 2.0, rel=1e-8)
    assert res.spread < 0.05
    assert res.as_dict()['spread'] == res.spread

    with pytest.raises(ValueError):
        lagrange_multipliers(esys, SymmetricFunctionSpec((0,)), fields[:1], mesh, dom)
