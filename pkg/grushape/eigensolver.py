"""Lowest eigenpairs of the stiffness/mass pencil and clustering.
"""

from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as sla

from grushape.assembly import DiscreteForms, assemble
from grushape.geometry import Mesh
from grushape.shapelog import getLogger

__all__ = (
    'SolverError', 'EigenSystem', 'Cluster', 'Clustering',
    'solve_lowest', 'cluster', 'renormalize', 'solve_report',
    'SolveSettings', 'solve_mesh',
    'MASS_ORTHONORMAL', 'FORM_ORTHONORMAL',
)

log = getLogger('grushape.eigensolver')

MASS_ORTHONORMAL = 'massOrthonormal'
FORM_ORTHONORMAL = 'formOrthonormal'
NORMALIZATIONS = (MASS_ORTHONORMAL, FORM_ORTHONORMAL)

# below this many DoFs use dense LAPACK
DENSE_LIMIT = 400
# extra Lanczos vectors on top of m
GUARD_VECTORS = 5


class SolverError(RuntimeError):
    """Eigensolver failure."""


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Ascending eigenvalues with normalized eigenvectors (columns)."""
    values: np.ndarray
    vectors: np.ndarray
    normalization: str
    residuals: np.ndarray
    forms: DiscreteForms

    @property
    def m(self) -> int:
        return len(self.values)

    def reciprocals(self) -> np.ndarray:
        """mu_j = 1 / lambda_j."""
        return 1.0 / self.values

    def nodal(self, j: int) -> np.ndarray:
        """Eigenvector j on all mesh nodes."""
        return self.forms.expand(self.vectors[:, j])

    def gram(self, which: Optional[str] = None) -> np.ndarray:
        """Gram matrix of the vectors in the mass or form product."""
        which = which or self.normalization
        mat = self.forms.mass if which == MASS_ORTHONORMAL else self.forms.stiffness
        return self.vectors.T @ (mat @ self.vectors)


@dataclass(frozen=True)
class Cluster:
    """Run of (0-based) indexes with nearly equal eigenvalues."""
    indices: Tuple[int, ...]
    common_value: float

    @property
    def size(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class Clustering:
    clusters: Tuple[Cluster, ...]
    ambiguous: bool
    rel_tol: float

    def find(self, index: int) -> Cluster:
        """Cluster containing index."""
        for c in self.clusters:
            if index in c.indices:
                return c
        raise IndexError("eigen index %d not in clustering" % index)

    def index_lists(self) -> List[List[int]]:
        return [list(c.indices) for c in self.clusters]


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    sgn = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    sgn[sgn == 0] = 1.0
    return vecs * sgn[None, :]


def _orthonormalize(vecs: np.ndarray, mat: object) -> np.ndarray:
    """Make vecs orthonormal in the product given by mat."""
    gram = vecs.T @ (mat @ vecs)
    gram = 0.5 * (gram + gram.T)
    try:
        chol = la.cholesky(gram, lower=True)
    except la.LinAlgError:
        raise SolverError("eigenvectors are linearly dependent") from None
    return la.solve_triangular(chol, vecs.T, lower=True).T


def _residuals(forms: DiscreteForms, vals: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    mu = forms.mass @ vecs
    r = forms.stiffness @ vecs - mu * vals[None, :]
    return np.linalg.norm(r, axis=0) / np.linalg.norm(mu, axis=0)


def _sparse_solve(forms: DiscreteForms, m: int, tol: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    n = forms.ndof
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    ncv = min(n - 1, max(2 * (m + GUARD_VECTORS) + 1, 20))
    scale = float(forms.stiffness.diagonal().mean() / forms.mass.diagonal().mean())
    last: Optional[Exception] = None
    for sigma in (0.0, -1e-6 * scale):
        try:
            vals, vecs = sla.eigsh(forms.stiffness, k=m, M=forms.mass, sigma=sigma,
                                   which='LM', v0=v0, ncv=ncv, tol=tol * 1e-2,
                                   maxiter=max(1000, 10 * n))
            return vals, vecs
        except sla.ArpackNoConvergence as ex:
            raise SolverError("eigsh did not converge: %s" % ex) from None
        except RuntimeError as ex:
            # singular factorization, try shifted once
            log.warning("factorization failed at shift %g: %s", sigma, ex)
            last = ex
    raise SolverError("factorization failed: %s" % last)


def solve_lowest(forms: DiscreteForms, m: int, tol: float = 1e-10, seed: int = 0) -> EigenSystem:
    """Lowest m eigenpairs, mass-orthonormal, ascending."""
    n = forms.ndof
    if m < 1:
        raise SolverError("m must be >= 1")
    if m >= n:
        raise SolverError("m=%d must be below number of DoFs %d" % (m, n))
    if not 0 < tol <= 1e-4:
        raise SolverError("tol must be in (0, 1e-4], got %r" % tol)

    if n <= DENSE_LIMIT:
        try:
            vals, vecs = la.eigh(forms.stiffness.toarray(), forms.mass.toarray(),
                                 subset_by_index=[0, m - 1])
        except la.LinAlgError as ex:
            raise SolverError("dense eigensolver failed: %s" % ex) from None
    else:
        vals, vecs = _sparse_solve(forms, m, tol, seed)

    order = np.argsort(vals, kind='stable')
    vals = np.asarray(vals[order], dtype=float)
    vecs = np.asarray(vecs[:, order], dtype=float)
    if np.any(vals <= 0):
        raise SolverError("non-positive eigenvalue %g" % vals.min())

    vecs = _fix_signs(_orthonormalize(vecs, forms.mass))
    res = _residuals(forms, vals, vecs)
    worst = float((res / vals).max())
    if worst > max(tol, 1e-6):
        log.warning("large relative eigen residual %g", worst)
    log.debug("solved %d pairs on %d dofs: lambda_1=%.12g residual=%.3g", m, n, vals[0], worst)
    return EigenSystem(vals, vecs, MASS_ORTHONORMAL, res, forms)


def cluster(esys: EigenSystem, rel_tol: float = 1e-6) -> Clustering:
    """Group consecutive eigenvalues whose relative spread is <= rel_tol.

    A gap between rel_tol and 2*rel_tol marks the clustering ambiguous.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    vals = esys.values
    groups: List[List[int]] = [[0]]
    ambiguous = False
    for j in range(1, len(vals)):
        start = vals[groups[-1][0]]
        gap = vals[j] - vals[j - 1]
        if vals[j] - start <= rel_tol * vals[j]:
            groups[-1].append(j)
        else:
            groups.append([j])
            if gap <= 2 * rel_tol * vals[j]:
                ambiguous = True
    clusters = tuple(Cluster(tuple(g), float(np.mean(vals[g]))) for g in groups)
    if ambiguous:
        log.warning("ambiguous clustering at rel_tol %g: %s", rel_tol,
                    [list(c.indices) for c in clusters])
    return Clustering(clusters, ambiguous, rel_tol)


def renormalize(esys: EigenSystem, target: str, rel_tol: float = 1e-6) -> EigenSystem:
    """Re-orthonormalize each cluster in the mass or form product."""
    if target not in NORMALIZATIONS:
        raise ValueError("unknown normalization: %r" % target)
    if target == esys.normalization:
        return esys
    mat = esys.forms.mass if target == MASS_ORTHONORMAL else esys.forms.stiffness
    vecs = esys.vectors.copy()
    for c in cluster(esys, rel_tol).clusters:
        idx = list(c.indices)
        vecs[:, idx] = _orthonormalize(vecs[:, idx], mat)
    return replace(esys, vectors=vecs, normalization=target)


def solve_report(esys: EigenSystem) -> Dict[str, object]:
    """Plain dict of eigenvalues and residuals."""
    return {
        'eigenvalues': esys.values.tolist(),
        'reciprocals': esys.reciprocals().tolist(),
        'residuals': esys.residuals.tolist(),
        'normalization': esys.normalization,
        'ndof': esys.forms.ndof,
    }


@dataclass(frozen=True)
class SolveSettings:
    """Solver knobs shared by sweeps over mapped meshes."""
    m: int = 5
    tol: float = 1e-10
    seed: int = 0
    cluster_tol: float = 1e-6
    threads: int = 1
    samples: int = 400


def solve_mesh(mesh: Mesh, s: int, settings: SolveSettings) -> EigenSystem:
    """Assemble on mesh and solve for the lowest settings.m pairs."""
    return solve_lowest(assemble(mesh, s), settings.m, settings.tol, settings.seed)
