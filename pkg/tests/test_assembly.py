
import math
from dataclasses import replace

import numpy as np
import pytest

from grushape.assembly import (
    AssemblyError, assemble, element_matrices, matrix_to_coo_text,
    rayleigh_quotient, triangle_gradients, triangle_quadrature, weight_integrals,
)
from grushape.geometry import build_domain, triangulate

REF_NODES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
REF_TRI = np.array([[0, 1, 2]])


@pytest.mark.parametrize('degree', [0, 1, 2, 4, 6])
def test_triangle_quadrature(degree: int) -> None:
    bary, w = triangle_quadrature(degree)
    assert w.sum() == pytest.approx(1.0)
    assert np.allclose(bary.sum(axis=1), 1.0)
    xi, eta = bary[:, 1], bary[:, 2]
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = 2.0 * math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            assert w @ (xi ** a * eta ** b) == pytest.approx(exact, rel=1e-12)

    with pytest.raises(AssemblyError):
        triangle_quadrature(-1)


def test_triangle_gradients() -> None:
    g, area = triangle_gradients(REF_NODES, REF_TRI)
    assert area[0] == pytest.approx(0.5)
    assert np.allclose(g[0], [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    assert np.allclose(g.sum(axis=1), 0.0)


def test_weight_integrals() -> None:
    assert weight_integrals(REF_NODES, REF_TRI, 0)[0] == pytest.approx(0.5)
    assert weight_integrals(REF_NODES, REF_TRI, 1)[0] == pytest.approx(1.0 / 12.0)
    assert weight_integrals(REF_NODES, REF_TRI, 2)[0] == pytest.approx(1.0 / 30.0)
    shifted = REF_NODES + [-0.5, 0.0]
    # int_T (x-1/2)^2 over the reference triangle
    assert weight_integrals(shifted, REF_TRI, 1)[0] == pytest.approx(1.0 / 12.0 - 1.0 / 6.0 + 1.0 / 8.0)


def test_element_energy() -> None:
    dom = build_domain('rectangle(0.2, 1.2, 1)', s=1)
    mesh = triangulate(dom, n=4)
    kx, ky, me = element_matrices(mesh, 1)
    ux = mesh.nodes[:, 0][mesh.triangles]
    uy = mesh.nodes[:, 1][mesh.triangles]
    # linear functions are represented exactly
    assert np.einsum('ti,tij,tj->', ux, kx, ux) == pytest.approx(1.0)
    assert np.einsum('ti,tij,tj->', uy, kx, uy) == pytest.approx(0.0, abs=1e-14)
    assert np.einsum('ti,tij,tj->', uy, ky, uy) == pytest.approx((1.2 ** 3 - 0.2 ** 3) / 3.0)
    ones = np.ones_like(ux)
    assert np.einsum('ti,tij,tj->', ones, me, ones) == pytest.approx(1.0)
    assert np.allclose(kx, np.transpose(kx, (0, 2, 1)))
    assert np.allclose(ky, np.transpose(ky, (0, 2, 1)))


def test_assemble() -> None:
    dom = build_domain('rectangle(-1, 1, 1)', s=1)
    mesh = triangulate(dom, n=6)
    forms = assemble(mesh, 1)
    assert forms.ndof == 25
    assert forms.stiffness.shape == (25, 25)
    assert abs(forms.stiffness - forms.stiffness.T).max() == 0.0
    assert abs(forms.mass - forms.mass.T).max() == 0.0
    assert np.all(np.linalg.eigvalsh(forms.stiffness.toarray()) > 0)
    assert np.all(forms.node_to_dof[~mesh.interior_mask] == -1)
    assert np.all(forms.node_to_dof[forms.dof_map] == np.arange(forms.ndof))

    u = np.arange(forms.ndof, dtype=float)
    nodal = forms.expand(u)
    assert nodal.shape == (mesh.n_nodes,)
    assert np.all(nodal[~mesh.interior_mask] == 0.0)
    assert np.all(forms.restrict(nodal) == u)
    assert forms.expand(np.ones((forms.ndof, 2))).shape == (mesh.n_nodes, 2)


def test_assemble_laplace() -> None:
    dom = build_domain('square(0, pi)', s=0)
    mesh = triangulate(dom, n=16)
    forms = assemble(mesh, 0)
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    u = forms.restrict(np.sin(x) * np.sin(y))
    assert rayleigh_quotient(u, forms) == pytest.approx(2.0, rel=2e-2)
    u = forms.restrict(np.sin(2 * x) * np.sin(y))
    assert rayleigh_quotient(u, forms) == pytest.approx(5.0, rel=5e-2)


def test_assemble_errors() -> None:
    dom = build_domain('rectangle(0.2, 1.2, 1)', s=1)
    mesh = triangulate(dom, n=4)
    with pytest.raises(AssemblyError):
        assemble(mesh, -1)
    forms = assemble(mesh, 1)
    with pytest.raises(AssemblyError):
        rayleigh_quotient(np.zeros(forms.ndof), forms)
    no_dofs = replace(mesh, interior_mask=np.zeros(mesh.n_nodes, dtype=bool))
    with pytest.raises(AssemblyError):
        assemble(no_dofs, 1)


def test_matrix_to_coo_text() -> None:
    dom = build_domain('rectangle(0.2, 1.2, 1)', s=1)
    forms = assemble(triangulate(dom, n=3), 1)
    txt = matrix_to_coo_text(forms.mass)
    lines = txt.splitlines()
    assert lines[0] == '4 4 %d' % forms.mass.nnz
    r, c, v = lines[1].split()
    assert (r, c) == ('0', '0')
    assert float(v) == forms.mass[0, 0]
