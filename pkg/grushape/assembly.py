"""Linear finite element forms for the Grushin operator.

stiffness(u, v) = sum_T int_T (u_x v_x + x^(2s) u_y v_y)
mass(u, v)      = sum_T int_T u v

Dirichlet nodes are removed from the system, not penalized.
"""

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
import scipy.sparse as sp
from numpy.polynomial.legendre import leggauss

from grushape.geometry import Mesh
from grushape.shapelog import getLogger

__all__ = (
    'AssemblyError', 'DiscreteForms', 'assemble', 'rayleigh_quotient',
    'triangle_quadrature', 'triangle_gradients', 'weight_integrals',
    'element_matrices', 'matrix_to_coo_text',
)

log = getLogger('grushape.assembly')

MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


class AssemblyError(ValueError):
    """Cannot assemble forms."""


@dataclass(frozen=True, eq=False)
class DiscreteForms:
    """Stiffness and mass over interior DoFs.

    dof_map[i] is the node of DoF i, node_to_dof is -1 on Dirichlet nodes.
    """
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    dof_map: np.ndarray
    node_to_dof: np.ndarray
    s: int
    mesh: Mesh

    @property
    def ndof(self) -> int:
        return len(self.dof_map)

    def expand(self, u: np.ndarray) -> np.ndarray:
        """DoF vector(s) to nodal values, zero on the boundary."""
        u = np.asarray(u)
        shape = (self.mesh.n_nodes,) + u.shape[1:]
        res = np.zeros(shape)
        res[self.dof_map] = u
        return res

    def restrict(self, nodal: np.ndarray) -> np.ndarray:
        """Nodal values to DoF vector."""
        return np.asarray(nodal)[self.dof_map]


def triangle_quadrature(degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """Collapsed Gauss-Legendre rule on the reference triangle.

    Returns barycentric points (q, 3) and weights (q,) summing to 1,
    exact for polynomials up to the given degree.
    """
    if degree < 0:
        raise AssemblyError("negative quadrature degree")
    npt = max(1, int(math.ceil((degree + 2) / 2.0)))
    xg, wg = leggauss(npt)
    u = 0.5 * (xg + 1.0)
    wu = 0.5 * wg
    U, V = np.meshgrid(u, u, indexing='ij')
    WU, WV = np.meshgrid(wu, wu, indexing='ij')
    xi = U.ravel()
    eta = (V * (1.0 - U)).ravel()
    w = (WU * WV * (1.0 - U)).ravel()
    w = w / w.sum()
    bary = np.column_stack([1.0 - xi - eta, xi, eta])
    return bary, w


def triangle_gradients(nodes: np.ndarray, triangles: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Gradients of the three hat functions per triangle and areas.

    Returns grads (T, 3, 2) and signed areas (T,).
    """
    p = nodes[triangles]
    x0, y0 = p[:, 0, 0], p[:, 0, 1]
    x1, y1 = p[:, 1, 0], p[:, 1, 1]
    x2, y2 = p[:, 2, 0], p[:, 2, 1]
    det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    g = np.empty((len(triangles), 3, 2))
    g[:, 0, 0] = y1 - y2
    g[:, 0, 1] = x2 - x1
    g[:, 1, 0] = y2 - y0
    g[:, 1, 1] = x0 - x2
    g[:, 2, 0] = y0 - y1
    g[:, 2, 1] = x1 - x0
    g /= det[:, None, None]
    return g, 0.5 * det


def quadrature_x(nodes: np.ndarray, triangles: np.ndarray, degree: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """x at quadrature points (q, T), weights and barycentrics."""
    bary, w = triangle_quadrature(degree)
    xt = nodes[triangles][:, :, 0]
    return bary @ xt.T, w, bary


def weight_integrals(nodes: np.ndarray, triangles: np.ndarray, s: int) -> np.ndarray:
    """Exact int_T x^(2s) per triangle."""
    area = np.abs(triangle_gradients(nodes, triangles)[1])
    if s == 0:
        return area
    xq, w, _ = quadrature_x(nodes, triangles, 2 * s)
    return area * (w @ xq ** (2 * s))


def element_matrices(mesh: Mesh, s: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Element matrices (T, 3, 3): x-gradient part, y-gradient part, mass."""
    if s < 0:
        raise AssemblyError("s must be >= 0, got %r" % s)
    g, area = triangle_gradients(mesh.nodes, mesh.triangles)
    if np.any(area <= 0):
        raise AssemblyError("mesh has non-positive triangle area")
    wint = weight_integrals(mesh.nodes, mesh.triangles, s)
    gx = g[:, :, 0]
    gy = g[:, :, 1]
    # outer products first so element matrices are exactly symmetric
    kx = (gx[:, :, None] * gx[:, None, :]) * area[:, None, None]
    ky = (gy[:, :, None] * gy[:, None, :]) * wint[:, None, None]
    me = area[:, None, None] * MASS_REF[None, :, :]
    return kx, ky, me


def _global(mesh: Mesh, elem: np.ndarray) -> sp.csr_matrix:
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_nodes
    return sp.coo_matrix((elem.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble(mesh: Mesh, s: int) -> DiscreteForms:
    """Assemble stiffness and mass, eliminating Dirichlet nodes."""
    if s < 0:
        raise AssemblyError("s must be >= 0, got %r" % s)
    dofs = np.flatnonzero(mesh.interior_mask)
    if len(dofs) == 0:
        raise AssemblyError("mesh has no interior degrees of freedom")
    kx, ky, me = element_matrices(mesh, s)
    kglob = _global(mesh, kx + ky)
    mglob = _global(mesh, me)
    stiff = kglob[dofs][:, dofs].tocsr()
    mass = mglob[dofs][:, dofs].tocsr()
    node_to_dof = -np.ones(mesh.n_nodes, dtype=np.int64)
    node_to_dof[dofs] = np.arange(len(dofs))
    log.debug("assembled s=%d: %d dofs, %d nnz", s, len(dofs), stiff.nnz)
    return DiscreteForms(stiff, mass, dofs, node_to_dof, int(s), mesh)


def rayleigh_quotient(u: np.ndarray, forms: DiscreteForms) -> float:
    """(u'Ku) / (u'Mu)."""
    u = np.asarray(u, dtype=float)
    den = float(u @ (forms.mass @ u))
    if den <= 0:
        raise AssemblyError("rayleigh quotient of zero vector")
    return float(u @ (forms.stiffness @ u)) / den


def matrix_to_coo_text(mat: sp.spmatrix) -> str:
    """Coordinate format: one 'row col value' line per nonzero."""
    coo = sp.coo_matrix(mat)
    order = np.lexsort((coo.col, coo.row))
    lines: List[str] = ['%d %d %d' % (coo.shape[0], coo.shape[1], coo.nnz)]
    for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
        lines.append('%d %d %.17g' % (r, c, v))
    return '\n'.join(lines) + '\n'
