"""Complex transfer operator ``P_z f(x) = sum_j p_j e^{z sigma(g_j, x)} f(g_j x)`` on S^1.

Functions live on a uniform angular grid and are read off-grid by periodic
linear interpolation, so ``P_z`` is a sparse matrix with ``2k`` entries per row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from . import _rng
from .errors import DimensionNot2, NoConvergence

RE_WINDOW = 0.5


@dataclass(frozen=True, eq=False)
class CircleGrid:
    n_points: int

    def __post_init__(self):
        if self.n_points < 64:
            raise ValueError("n_points must be >= 64")

    @property
    def angles(self):
        return 2 * math.pi * np.arange(self.n_points) / self.n_points

    @property
    def points(self):
        a = self.angles
        return np.stack([np.cos(a), np.sin(a)], axis=1)


@dataclass(eq=False)
class _Pattern:
    """Interpolation stencil and cocycle values of a law on a grid."""

    rows: np.ndarray
    cols: np.ndarray
    interp: np.ndarray  # p_j times the interpolation weight
    sigma: np.ndarray
    n: int
    _cache: dict = field(default_factory=dict)

    def matrix(self, z):
        z = complex(z)
        if z not in self._cache:
            data = self.interp * np.exp(z * self.sigma)
            self._cache[z] = sparse.csr_matrix((data, (self.rows, self.cols)), shape=(self.n, self.n))
        return self._cache[z]


_patterns = {}


def _pattern(law, grid):
    key = (id(law), grid.n_points)
    hit = _patterns.get(key)
    if hit is not None and hit[0] is law:
        return hit[1]
    n = grid.n_points
    x = grid.points
    rows, cols, w, sig = [], [], [], []
    base = np.arange(n)
    for g, p in zip(law.matrices, law.weights):
        y = x @ g.T
        nrm = np.linalg.norm(y, axis=1)
        pos = np.mod(np.arctan2(y[:, 1], y[:, 0]), 2 * math.pi) * n / (2 * math.pi)
        i0 = np.floor(pos).astype(int)
        frac = pos - i0
        i0 %= n
        s = np.log(nrm)
        rows += [base, base]
        cols += [i0, (i0 + 1) % n]
        w += [p * (1.0 - frac), p * frac]
        sig += [s, s]
    pat = _Pattern(np.concatenate(rows), np.concatenate(cols), np.concatenate(w), np.concatenate(sig), n)
    _patterns[key] = (law, pat)
    return pat


def _check(law, z):
    if law.dim != 2:
        raise DimensionNot2(f"transfer operator is implemented on S^1 only, got d = {law.dim}")
    if abs(complex(z).real) > RE_WINDOW:
        raise ValueError(f"Re z = {complex(z).real} outside [-{RE_WINDOW}, {RE_WINDOW}]")


def transfer_apply(law, z, values, grid=None):
    """One application of ``P_z`` to nodal values."""
    _check(law, z)
    values = np.asarray(values)
    grid = grid or CircleGrid(len(values))
    return _pattern(law, grid).matrix(z) @ values


@dataclass(frozen=True)
class ModulusResult:
    value: float
    converged: bool
    spread: float
    n_iter: int


def start_vector(n):
    a = 2 * math.pi * np.arange(n) / n
    return (1.0 + 0.3 * np.cos(a) + 0.2 * np.sin(3 * a) + 0.1 * np.cos(7 * a + 0.5)).astype(complex)


def leading_modulus(law, z, grid=None, n_iter=400, window=50, tol=1e-4, strict=False):
    """Growth factor of sup-norm power iteration for ``P_z``.

    The value is the geometric mean of the last ``window`` one-step ratios
    ``|P f|_inf / |f|_inf``. Single ratios oscillate when the top of the
    spectrum is a rotating pair, so ``spread`` compares the geometric means of
    the last two windows instead. With ``strict`` a spread above ``tol``
    raises :class:`NoConvergence`.
    """
    _check(law, z)
    grid = grid or CircleGrid(2048)
    if 2 * window > n_iter:
        raise ValueError("n_iter must cover two windows")
    m = _pattern(law, grid).matrix(z)
    f = start_vector(grid.n_points)
    f /= np.max(np.abs(f))
    logs = np.empty(n_iter)
    for i in range(n_iter):
        f = m @ f
        r = np.max(np.abs(f))
        if r == 0:
            return ModulusResult(0.0, True, 0.0, i + 1)
        logs[i] = math.log(r)
        f /= r
    value = math.exp(logs[-window:].mean())
    spread = abs(value - math.exp(logs[-2 * window:-window].mean()))
    ok = spread <= tol
    if strict and not ok:
        raise NoConvergence(f"ratio spread {spread:.3g} after {n_iter} iterations", spread)
    return ModulusResult(value, ok, spread, n_iter)


def invariant_axes(law, tol=1e-9):
    """Unit vectors whose line is mapped to itself by every matrix of the law."""
    found = []
    for g in law.matrices:
        vals, vecs = np.linalg.eig(g)
        for k in range(len(vals)):
            if abs(vals[k].imag) > 1e-12:
                continue
            v = np.real(vecs[:, k])
            v /= np.linalg.norm(v)
            ok = all(abs((h @ v)[0] * v[1] - (h @ v)[1] * v[0]) <= tol * np.linalg.norm(h @ v)
                     for h in law.matrices)
            if ok and not any(abs(abs(v @ u) - 1) < 1e-9 for u in found):
                found.append(v)
    return found


def restricted_modulus(law, axis, z):
    """Spectral radius of ``P_z`` on functions on the two points ``+-axis``."""
    k = np.zeros((2, 2), dtype=complex)
    pts = [axis, -axis]
    for g, p in zip(law.matrices, law.weights):
        for i, x in enumerate(pts):
            y = g @ x
            j = 0 if y @ axis > 0 else 1
            k[i, j] += p * np.exp(complex(z) * math.log(np.linalg.norm(y)))
    return float(np.max(np.abs(np.linalg.eigvals(k))))


@dataclass
class SpectralScan:
    a: float
    b_grid: np.ndarray
    leading_modulus: np.ndarray
    converged: np.ndarray
    n_points: int
    n_iter: int
    signature: str
    restricted: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("a,b,leading_modulus,n_points,n_iter,converged\n")
            for b, m, c in zip(self.b_grid, self.leading_modulus, self.converged):
                fh.write(f"{self.a!r},{float(b)!r},{float(m)!r},{self.n_points},{self.n_iter},{str(bool(c)).lower()}\n")


def classify(b_grid, moduli, flat_tol=1e-6, gap=0.01, b_min=1.0):
    """``arithmetic`` if flat at 1, ``gap`` if every ``|b| >= b_min`` dips below ``1 - gap``."""
    b_grid, moduli = np.asarray(b_grid), np.asarray(moduli)
    if np.all(np.abs(moduli - 1) <= flat_tol):
        return "arithmetic"
    far = np.abs(b_grid) >= b_min
    if far.any() and np.all(moduli[far] < 1 - gap):
        return "gap"
    return "mixed"


def spectral_scan(law, a, b_grid, grid=None, n_iter=400, window=50):
    """``leading_modulus`` along ``a + i b``; flags invariant axes that behave like a 1D walk."""
    grid = grid or CircleGrid(2048)
    b_grid = np.asarray(b_grid, dtype=float)
    _check(law, complex(a, 0))
    res = _rng.pmap(lambda b: leading_modulus(law, complex(a, b), grid, n_iter, window), b_grid)
    mod = np.array([r.value for r in res])
    conv = np.array([r.converged for r in res])
    scan = SpectralScan(float(a), b_grid, mod, conv, grid.n_points, n_iter, classify(b_grid, mod))
    for k, axis in enumerate(invariant_axes(law)):
        rm = np.array([restricted_modulus(law, axis, complex(a, b)) for b in b_grid])
        scan.restricted[f"axis_{k}"] = {"axis": axis.tolist(), "modulus": rm.tolist()}
        scan.flags.append(
            f"reducible: line through {np.round(axis, 6).tolist()} is invariant; "
            f"restricted modulus reaches {rm[b_grid != 0].max() if (b_grid != 0).any() else rm.max():.4f}"
        )
    if not conv.all():
        scan.flags.append(f"{int((~conv).sum())} scan points did not converge")
    return scan
