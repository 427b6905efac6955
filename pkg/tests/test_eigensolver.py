
import numpy as np
import pytest
import scipy.linalg as la

from grushape.assembly import assemble
from grushape.eigensolver import (
    DENSE_LIMIT, FORM_ORTHONORMAL, MASS_ORTHONORMAL, EigenSystem, SolverError,
    SolveSettings, cluster, renormalize, solve_lowest, solve_mesh, solve_report,
)
from grushape.geometry import build_domain, triangulate
from grushape.oracle1d import rectangle_spectrum


def _square_forms(n: int):
    dom = build_domain('square(0, pi)', s=0)
    return assemble(triangulate(dom, n=n), 0)


def test_solve_square() -> None:
    forms = _square_forms(16)
    assert forms.ndof <= DENSE_LIMIT
    esys = solve_lowest(forms, 4)
    assert esys.m == 4
    assert esys.normalization == MASS_ORTHONORMAL
    assert np.allclose(esys.values, [2.0, 5.0, 5.0, 8.0], rtol=5e-2)
    assert np.all(np.diff(esys.values) >= 0)
    assert np.allclose(esys.gram(), np.eye(4), atol=1e-10)
    assert np.all(esys.residuals / esys.values < 1e-8)
    assert np.allclose(esys.reciprocals(), 1.0 / esys.values)

    # the diagonal mesh splits the double eigenvalue 5 by about 1%
    assert cluster(esys, 1e-6).index_lists() == [[0], [1], [2], [3]]
    cl = cluster(esys, 2e-2)
    assert cl.index_lists() == [[0], [1, 2], [3]]
    assert not cl.ambiguous
    assert cl.find(2).size == 2
    assert cl.find(1).common_value == pytest.approx(0.5 * (esys.values[1] + esys.values[2]))
    with pytest.raises(IndexError):
        cl.find(7)

    u = esys.nodal(0)
    assert u.shape == forms.node_to_dof.shape
    assert np.all(u[forms.node_to_dof < 0] == 0.0)


def test_sparse_matches_dense() -> None:
    forms = _square_forms(24)
    assert forms.ndof > DENSE_LIMIT
    esys = solve_lowest(forms, 5, seed=3)
    ref = la.eigh(forms.stiffness.toarray(), forms.mass.toarray(),
                  eigvals_only=True, subset_by_index=[0, 4])
    assert np.allclose(esys.values, ref, rtol=1e-8)
    assert np.allclose(esys.gram(), np.eye(5), atol=1e-8)


def test_renormalize() -> None:
    esys = solve_lowest(_square_forms(12), 4)
    same = renormalize(esys, MASS_ORTHONORMAL)
    assert same is esys

    form = renormalize(esys, FORM_ORTHONORMAL)
    assert form.normalization == FORM_ORTHONORMAL
    assert np.allclose(form.gram(), np.eye(4), atol=1e-8)
    assert np.allclose(form.gram(MASS_ORTHONORMAL), np.diag(1.0 / esys.values), atol=1e-8)
    assert np.all(form.values == esys.values)

    with pytest.raises(ValueError):
        renormalize(esys, 'l2')


def test_solver_errors() -> None:
    forms = _square_forms(4)
    with pytest.raises(SolverError):
        solve_lowest(forms, 0)
    with pytest.raises(SolverError):
        solve_lowest(forms, forms.ndof)
    with pytest.raises(SolverError):
        solve_lowest(forms, 2, tol=0.0)
    with pytest.raises(SolverError):
        solve_lowest(forms, 2, tol=1e-3)


def test_cluster_ambiguous() -> None:
    esys = solve_lowest(_square_forms(4), 3)
    fake = EigenSystem(np.array([1.0, 1.0 + 1.5e-6, 3.0]), esys.vectors,
                       MASS_ORTHONORMAL, esys.residuals, esys.forms)
    cl = cluster(fake, 1e-6)
    assert cl.index_lists() == [[0], [1], [2]]
    assert cl.ambiguous

    cl = cluster(fake, 1e-5)
    assert cl.index_lists() == [[0, 1], [2]]
    assert not cl.ambiguous

    with pytest.raises(ValueError):
        cluster(fake, 0.0)


def test_solve_report() -> None:
    esys = solve_lowest(_square_forms(6), 3)
    rep = solve_report(esys)
    assert sorted(rep) == ['eigenvalues', 'ndof', 'normalization', 'reciprocals', 'residuals']
    assert rep['ndof'] == 25
    assert rep['normalization'] == MASS_ORTHONORMAL
    assert len(rep['eigenvalues']) == 3


def test_grushin_rectangle_vs_oracle() -> None:
    dom = build_domain('rectangle(0.2, 1.2, 1)', s=1)
    mesh = triangulate(dom, n=32)
    esys = solve_mesh(mesh, 1, SolveSettings(m=2))
    ref = rectangle_spectrum(0.2, 1.2, 1.0, 1, 2)
    assert esys.values[0] == pytest.approx(ref.values[0], rel=5e-3)
    assert esys.values[1] == pytest.approx(ref.values[1], rel=2e-2)
    # P1 eigenvalues lie above the exact ones
    assert esys.values[0] > ref.values[0]
