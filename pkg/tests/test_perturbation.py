
import numpy as np
import pytest

from grushape.geometry import build_domain, measure, triangulate
from grushape.perturbation import (
    AXIS_STRETCH, BOUNDARY_BUMP, COMBINATION, DILATION, RADIAL, SHEAR, SPLIT_POLYNOMIAL, ZERO,
    PerturbationError, affine_family, check_admissible, combine_fields, compose_maps,
    dilation_family, field_from_params, make_field, map_mesh,
)

RECT = 'rectangle(0.2, 1.2, 1)'
WIDE_RECT = 'rectangle(-1, 1, 1)'


def _numeric_jacobian(psi, z: np.ndarray, h: float = 1e-6) -> np.ndarray:
    res = np.zeros((len(z), 2, 2))
    for j in range(2):
        dz = np.zeros(2)
        dz[j] = h
        res[:, :, j] = (psi.evaluate(z + dz) - psi.evaluate(z - dz)) / (2 * h)
    return res


def test_dilation_field() -> None:
    dom = build_domain(RECT, s=1)
    psi = make_field(DILATION, {}, dom)
    assert psi.params == {'s': 1}
    assert np.allclose(psi.evaluate(np.array([[1.0, 2.0]])), [[1.0, 4.0]])
    assert np.allclose(psi.jacobian(np.array([[1.0, 2.0]])), [[[1.0, 0.0], [0.0, 2.0]]])
    assert psi.support_avoids_o

    wide = build_domain(WIDE_RECT, s=2)
    psi = make_field(DILATION, {}, wide)
    assert psi.params == {'s': 2}
    assert not psi.support_avoids_o


@pytest.mark.parametrize('kind,params', [
    (AXIS_STRETCH, {'axis': 'x'}),
    (AXIS_STRETCH, {'axis': 'y'}),
    (SPLIT_POLYNOMIAL, {'cx': [0.0, 1.0, 0.5], 'cy': [0.2, 0.0, 1.0]}),
    (BOUNDARY_BUMP, {'support': [0.9, 1.5, 0.2, 0.8], 'direction': [1.0, 0.5], 'amplitude': 2.0}),
    (RADIAL, {'center': [0.5, 0.5], 'radius': 2.0}),
    (SHEAR, {'a': 0.3}),
])
def test_field_jacobians(kind: str, params: dict) -> None:
    dom = build_domain(RECT, s=1)
    psi = make_field(kind, params, dom)
    rng = np.random.default_rng(1)
    z = np.column_stack([rng.uniform(0.2, 1.2, 50), rng.uniform(0.0, 1.0, 50)])
    assert np.allclose(psi.jacobian(z), _numeric_jacobian(psi, z), atol=1e-6)


def test_bump_support() -> None:
    dom = build_domain(RECT, s=1)
    psi = make_field(BOUNDARY_BUMP, {'support': [0.9, 1.5, 0.2, 0.8]}, dom)
    out = np.array([[0.5, 0.5], [1.0, 0.1], [1.0, 0.9]])
    assert np.all(psi.evaluate(out) == 0.0)
    assert np.all(psi.jacobian(out) == 0.0)
    # peak of the bump is at the support centre
    assert np.allclose(psi.evaluate(np.array([[1.2, 0.5]])), [[1.0, 0.0]])


def test_zero_field() -> None:
    psi = make_field(ZERO)
    assert np.all(psi.evaluate(np.ones((3, 2))) == 0.0)
    assert psi.support_avoids_o


def test_make_field_errors() -> None:
    wide = build_domain(WIDE_RECT, s=1)
    with pytest.raises(PerturbationError):
        make_field('vortex', {}, wide)
    with pytest.raises(PerturbationError):
        make_field(SPLIT_POLYNOMIAL, {'cx': [0.1, 1.0]}, wide)
    with pytest.raises(PerturbationError):
        make_field(BOUNDARY_BUMP, {}, wide)
    with pytest.raises(PerturbationError):
        make_field(BOUNDARY_BUMP, {'support': [0.5, 0.4, 0.0, 1.0]}, wide)
    with pytest.raises(PerturbationError):
        make_field(BOUNDARY_BUMP, {'support': [-0.1, 0.5, 0.2, 0.8]}, wide)
    with pytest.raises(PerturbationError):
        make_field(AXIS_STRETCH, {'axis': 'z'}, wide)
    with pytest.raises(PerturbationError):
        make_field(RADIAL, {'radius': 0.0}, wide)

    psi = make_field(BOUNDARY_BUMP, {'support': [0.5, 0.9, 0.2, 0.8]}, wide)
    assert psi.support_avoids_o


def test_field_from_params() -> None:
    dom = build_domain(RECT, s=1)
    psi = field_from_params({
        'kind': 'boundaryBump',
        'support': '0.9, 1.5, 0.2, 0.8',
        'direction': '0, 1',
        'amplitude': '0.5',
    }, dom)
    assert psi.kind == BOUNDARY_BUMP
    assert psi.params['support'] == (0.9, 1.5, 0.2, 0.8)
    assert psi.params['direction'] == (0.0, 1.0)
    assert psi.params['amplitude'] == 0.5

    psi = field_from_params({'kind': 'axisStretch', 'axis': ' y '}, dom)
    assert psi.params == {'axis': 'y'}

    with pytest.raises(PerturbationError):
        field_from_params({'support': '0, 1, 0, 1'}, dom)


def test_combination() -> None:
    dom = build_domain(RECT, s=1)
    a = make_field(DILATION, {}, dom)
    b = make_field(SHEAR, {'a': 2.0}, dom)
    psi = combine_fields([(2.0, a), (-1.0, b)])
    assert psi.kind == COMBINATION
    z = np.array([[0.5, 0.25], [1.0, 1.0]])
    assert np.allclose(psi.evaluate(z), 2 * a.evaluate(z) - b.evaluate(z))
    assert np.allclose(psi.jacobian(z), 2 * a.jacobian(z) - b.jacobian(z))
    desc = psi.describe()
    assert desc['kind'] == COMBINATION
    assert desc['terms'][0] == [2.0, {'kind': DILATION, 'params': {'s': 1}}]
    with pytest.raises(PerturbationError):
        combine_fields([])


def test_families() -> None:
    fam = dilation_family(1)
    assert fam.identity_param == 1.0
    z = np.array([[0.5, 0.5]])
    assert np.allclose(fam.apply(2.0, z), [[1.0, 2.0]])
    assert np.allclose(fam.jacobian(2.0, z), [[[2.0, 0.0], [0.0, 4.0]]])

    psi = make_field(DILATION, {'s': 1})
    aff = affine_family(psi)
    assert np.allclose(aff.apply(0.1, z), [[0.55, 0.6]])

    both = compose_maps(fam.at(2.0), aff.at(0.1))
    assert np.allclose(both(z), [[1.1, 2.4]])


def test_admissible_pass() -> None:
    wide = build_domain(WIDE_RECT, s=1)
    rep = check_admissible(make_field(DILATION, {}, wide), wide, param=1e-2)
    assert rep.passed
    assert rep.violation is None
    assert rep.min_jacobian_det > 0
    assert rep.o_samples > 0

    rep = check_admissible(dilation_family(1), wide, param=2.0)
    assert rep.passed
    assert rep.as_dict()['passed'] is True


def test_admissible_failures() -> None:
    wide = build_domain(WIDE_RECT, s=1)

    rep = check_admissible(make_field(DILATION, {}, wide), wide, param=-0.75)
    assert not rep.passed
    assert 'determinant' in (rep.violation or '')

    rep = check_admissible(make_field(SHEAR, {'a': 1.0}, wide), wide, param=1e-2)
    assert not rep.passed
    assert 'split structure' in (rep.violation or '')

    rep = check_admissible(make_field(RADIAL, {'center': [0.5, 0.5]}, wide), wide, param=1e-2)
    assert not rep.passed
    assert 'x=0' in (rep.violation or '')

    with pytest.raises(PerturbationError):
        check_admissible(make_field(ZERO), wide, samples=10)


def test_shear_allowed_away_from_o() -> None:
    dom = build_domain(RECT, s=1)
    rep = check_admissible(make_field(SHEAR, {'a': 0.5}, dom), dom, param=1e-2)
    assert rep.passed
    assert rep.o_samples == 0


def test_map_mesh() -> None:
    dom = build_domain(RECT, s=1)
    mesh = triangulate(dom, n=4)
    moved = map_mesh(mesh, dilation_family(1).at(2.0))
    assert measure(moved)[0] == pytest.approx(8.0 * measure(mesh)[0])
    assert moved.triangles is mesh.triangles
    assert not moved.nodes.flags.writeable

    with pytest.raises(PerturbationError):
        map_mesh(mesh, lambda z: np.column_stack([-z[:, 0], z[:, 1]]))
    with pytest.raises(PerturbationError):
        map_mesh(mesh, lambda z: np.zeros_like(z))
