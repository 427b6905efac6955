"""Reference spectra from one-dimensional reductions.

On (a,b) x (0,L) the eigenfunctions are X(x) sin(k pi y / L) with

    -X'' + (k pi / L)^2 x^(2s) X = lambda X,    X(a) = X(b) = 0.

The 1D problem is solved by second order finite differences on a
sequence of grids with h halving, then Romberg extrapolation in h^2.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq
from scipy.special import jn_zeros

from grushape.shapelog import getLogger

__all__ = (
    'OracleError', 'OracleSpectrum', 'SturmLiouvilleResult',
    'sturm_liouville_eigs', 'sturm_liouville_solve', 'sturm_liouville_vectors',
    'rectangle_spectrum', 'tune_crossing', 'bessel_disk_eigenvalue', 'bessel_disk_spectrum',
)

log = getLogger('grushape.oracle1d')

#: interior points on the coarsest grid, next grid is 2*n + 1
BASE_POINTS = 127
#: refinement levels before giving up
MAX_LEVELS = 6
#: y-modes tried before certification gives up
MAX_BRANCHES = 400
#: levels used by crossing search, fixed so the function is smooth in L
CROSSING_LEVELS = 3


class OracleError(RuntimeError):
    """Extrapolation or certification failed.

    values/errors hold the best estimates reached.
    """
    def __init__(self, msg: str, values: Optional[Sequence[float]] = None,
                 errors: Optional[Sequence[float]] = None) -> None:
        super().__init__(msg)
        self.values = list(values) if values is not None else []
        self.errors = list(errors) if errors is not None else []


@dataclass
class SturmLiouvilleResult:
    values: np.ndarray
    errors: np.ndarray
    grids: List[int]


def _fd_eigs(a: float, b: float, c: float, s: int, count: int, npts: int) -> np.ndarray:
    h = (b - a) / (npts + 1)
    x = a + h * np.arange(1, npts + 1)
    diag = 2.0 / (h * h) + c * x ** (2 * s)
    off = np.full(npts - 1, -1.0 / (h * h))
    return eigh_tridiagonal(diag, off, eigvals_only=True, select='i',
                            select_range=(0, count - 1))


def _romberg(rows: List[np.ndarray]) -> List[List[np.ndarray]]:
    """Romberg table in h^2 with h halving per row."""
    table: List[List[np.ndarray]] = []
    for k, r0 in enumerate(rows):
        row = [r0]
        for j in range(1, k + 1):
            prev = table[k - 1][j - 1]
            row.append(row[j - 1] + (row[j - 1] - prev) / (4.0 ** j - 1.0))
        table.append(row)
    return table


def _check_args(a: float, b: float, c: float, s: int, count: int) -> None:
    if not a < b:
        raise ValueError("need a < b, got (%r, %r)" % (a, b))
    if c < 0:
        raise ValueError("coefficient must be >= 0")
    if s < 0:
        raise ValueError("s must be >= 0")
    if count < 1 or count > BASE_POINTS // 4:
        raise ValueError("count must be in [1, %d]" % (BASE_POINTS // 4))


def sturm_liouville_solve(a: float, b: float, c: float, s: int, count: int,
                          tol: float = 1e-9, max_levels: int = MAX_LEVELS) -> SturmLiouvilleResult:
    """Lowest eigenvalues with Romberg error estimates.

    Refines until the change of the diagonal Romberg entry is below
    tol * max(1, |lambda|) for every eigenvalue.
    """
    _check_args(a, b, c, s, count)
    if not 0 < tol <= 1e-8:
        raise ValueError("tol must be in (0, 1e-8], got %r" % tol)
    rows: List[np.ndarray] = []
    grids: List[int] = []
    npts = BASE_POINTS
    best = err = None
    for level in range(max_levels + 1):
        rows.append(_fd_eigs(a, b, c, s, count, npts))
        grids.append(npts)
        if level > 0:
            table = _romberg(rows)
            best = table[level][level]
            err = np.abs(best - table[level - 1][level - 1])
            scale = np.maximum(1.0, np.abs(best))
            log.trace("sl level %d n=%d err=%.3g", level, npts, float(np.max(err / scale)))
            if np.all(err < tol * scale):
                return SturmLiouvilleResult(best, err, grids)
        npts = 2 * npts + 1
    raise OracleError("no convergence on (%g, %g) c=%g s=%d after %d grids"
                      % (a, b, c, s, len(grids)),
                      None if best is None else best.tolist(),
                      None if err is None else err.tolist())


def sturm_liouville_eigs(a: float, b: float, c: float, s: int, count: int,
                         tol: float = 1e-9) -> np.ndarray:
    """Ascending eigenvalues of -X'' + c x^(2s) X on (a, b), Dirichlet."""
    return sturm_liouville_solve(a, b, c, s, count, tol).values


def sturm_liouville_vectors(a: float, b: float, c: float, s: int, count: int,
                            npts: int = 255) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Grid, eigenvalues and eigenvectors on a single grid."""
    _check_args(a, b, c, s, count)
    h = (b - a) / (npts + 1)
    x = a + h * np.arange(1, npts + 1)
    diag = 2.0 / (h * h) + c * x ** (2 * s)
    off = np.full(npts - 1, -1.0 / (h * h))
    vals, vecs = eigh_tridiagonal(diag, off, select='i', select_range=(0, count - 1))
    return x, vals, vecs


def _fixed_eig(a: float, b: float, c: float, s: int, n: int, levels: int = CROSSING_LEVELS) -> float:
    """n-th (1-based) eigenvalue from a fixed Romberg table."""
    rows = []
    npts = BASE_POINTS
    for _ in range(levels + 1):
        rows.append(_fd_eigs(a, b, c, s, n, npts))
        npts = 2 * npts + 1
    return float(_romberg(rows)[levels][levels][n - 1])


#
# rectangles
#

@dataclass
class OracleSpectrum:
    """Entries (lambda, n, k) ascending, with error estimates."""
    entries: List[Tuple[float, int, int]]
    errors: List[float]
    grid_sizes: List[int]
    branches: int = 0
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def values(self) -> List[float]:
        return [e[0] for e in self.entries]

    def rows(self) -> List[List[object]]:
        res: List[List[object]] = [['lambda', 'n', 'k', 'error']]
        for (lam, n, k), err in zip(self.entries, self.errors):
            res.append([lam, n, k, err])
        return res

    def as_dict(self) -> Dict[str, Any]:
        return {
            'eigenvalues': self.values,
            'modes': [[n, k] for _, n, k in self.entries],
            'errors': self.errors,
            'grid_sizes': self.grid_sizes,
            'branches': self.branches,
        }


def _branch_lower_bound(a: float, b: float, s: int, c: float) -> Optional[float]:
    """Lower bound of a branch when the weight is bounded below."""
    if s == 0 or a > 0 or b < 0:
        xmin = 1.0 if s == 0 else min(abs(a), abs(b))
        return c * xmin ** (2 * s) + (math.pi / (b - a)) ** 2
    return None


def rectangle_spectrum(a: float, b: float, L: float, s: int, count: int,
                       tol: float = 1e-9) -> OracleSpectrum:
    """Lowest count eigenvalues on (a, b) x (0, L).

    Branches k = 1, 2, ... are added until the next branch provably
    starts above the current count-th value. Ties sort by (k, n).
    """
    if L <= 0:
        raise ValueError("L must be positive")
    _check_args(a, b, 0.0, s, count)
    found: List[Tuple[float, int, int, float]] = []
    grids: List[int] = []
    k = 0
    for k in range(1, MAX_BRANCHES + 1):
        c = (k * math.pi / L) ** 2
        if len(found) >= count:
            cur = sorted(found)[count - 1][0]
            bound = _branch_lower_bound(a, b, s, c)
            if bound is not None and bound > cur:
                k -= 1
                break
        res = sturm_liouville_solve(a, b, c, s, count, tol)
        if len(res.grids) > len(grids):
            grids = res.grids
        if len(found) >= count and res.values[0] > sorted(found)[count - 1][0]:
            # c-monotone: later branches start even higher
            break
        for n, (lam, err) in enumerate(zip(res.values, res.errors), 1):
            found.append((float(lam), k, n, float(err)))
    else:
        raise OracleError("branch certification failed after %d y-modes" % MAX_BRANCHES,
                          [f[0] for f in sorted(found)[:count]])
    found.sort(key=lambda e: (e[0], e[1], e[2]))
    top = found[:count]
    log.debug("rectangle spectrum (%g, %g)x(0, %g) s=%d: %d branches", a, b, L, s, k)
    return OracleSpectrum([(lam, n, kk) for lam, kk, n, _ in top],
                          [err for _, _, _, err in top], grids, k)


def tune_crossing(a: float, b: float, s: int, modes: Sequence[Tuple[int, int]],
                  bracket: Tuple[float, float]) -> Tuple[float, float]:
    """Height L* where modes (n1, k1) and (n2, k2) share an eigenvalue.

    Returns L* and the common value.
    """
    if len(modes) != 2:
        raise ValueError("need exactly 2 modes")
    (n1, k1), (n2, k2) = modes
    if min(n1, k1, n2, k2) < 1:
        raise ValueError("mode indexes are 1-based")
    lo, hi = float(bracket[0]), float(bracket[1])
    if not 0 < lo < hi:
        raise ValueError("bad bracket %r" % (bracket,))

    def lam(n: int, k: int, L: float) -> float:
        return _fixed_eig(a, b, (k * math.pi / L) ** 2, s, n)

    def diff(L: float) -> float:
        return lam(n1, k1, L) - lam(n2, k2, L)

    f_lo, f_hi = diff(lo), diff(hi)
    if f_lo * f_hi > 0:
        raise OracleError("no sign change of mode difference on [%g, %g]" % (lo, hi))
    if f_lo == 0:
        root = lo
    elif f_hi == 0:
        root = hi
    else:
        root = brentq(diff, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    l1, l2 = lam(n1, k1, root), lam(n2, k2, root)
    if abs(l1 - l2) > 1e-10 * abs(l1):
        raise OracleError("crossing plug-back failed: %g vs %g" % (l1, l2), [l1, l2])
    return float(root), 0.5 * (l1 + l2)


#
# disks
#

def bessel_disk_spectrum(count: int, radius: float = 1.0) -> List[Tuple[float, int, int]]:
    """Lowest count Dirichlet Laplacian eigenvalues on a disk.

    Entries are (lambda, order, zero number); orders >= 1 appear twice.
    """
    if count < 1 or radius <= 0:
        raise ValueError("need count >= 1 and radius > 0")
    res: List[Tuple[float, int, int]] = []
    for order in range(count + 1):
        for num, z in enumerate(jn_zeros(order, count), 1):
            lam = float(z * z / (radius * radius))
            res.extend([(lam, order, num)] * (1 if order == 0 else 2))
    res.sort()
    return res[:count]


def bessel_disk_eigenvalue(index: int, radius: float = 1.0) -> float:
    """index-th (1-based) eigenvalue of the disk, with multiplicity."""
    return bessel_disk_spectrum(index, radius)[index - 1][0]
