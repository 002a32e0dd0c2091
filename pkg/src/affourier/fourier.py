"""Fourier transform of self-affine measures, Frostman exponents and the
pairwise quantities behind the Fourier decay argument.

The transform uses the kernel ``exp(-2 pi i xi.x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import _rng
from .errors import BudgetExceeded, EmptyPool, InsufficientSamples
from .ifs import all_words, attractor_ball, stopping_set

TWO_PI = 2.0 * math.pi
DEFAULT_RECURSION_CAP = 5 * 10**7


def barycenter(system):
    """Mean of the self-affine measure: solves ``(Id - sum p_j A_j) c = sum p_j b_j``."""
    p = system.weights
    m = np.eye(system.dim) - np.einsum("k,kij->ij", p, system.linear)
    return np.linalg.solve(m, p @ system.translation)


def default_burn_in(system):
    rho = system.max_norm
    if rho == 0.0:
        return 1
    return max(1, math.ceil(math.log(1e-12) / math.log(rho)))


@dataclass(frozen=True, eq=False)
class SamplePool:
    points: np.ndarray
    seed: int
    burn_in: int

    def __len__(self):
        return len(self.points)


BLOCK_TABLE = 4096


def _block_table(system, burn_in):
    """All words of a block length ``L`` with ``k^L <= BLOCK_TABLE``.

    Applying ``ceil(burn_in / L)`` random block maps has the same law as
    that many times ``L`` single steps.
    """
    k = system.size
    length = 1 if k == 1 else max(1, int(math.log(BLOCK_TABLE) / math.log(k)))
    length = min(length, burn_in)
    return all_words(system, length), -(-burn_in // length)


def _chaos_chunk(system, table, n_blocks, seed, k, n):
    rng = _rng.stream(seed, _rng.TAG_CHAOS, k)
    letters = _rng.draw_letters(rng, table.weights, (n_blocks, n))
    x = np.repeat(system.fixed_points[:1], n, axis=0)
    A, b = table.products, table.translations
    for row in letters:
        x = np.einsum("nij,nj->ni", A[row], x) + b[row]
    return x


def chaos_sample(system, count, seed=0, burn_in=None):
    """Draw ``count`` points from the self-affine measure.

    Each point is the state after at least ``burn_in`` forward steps
    ``x <- f_J(x)`` of its own chain started at the fixed point of the first
    map, so the pool is i.i.d. and every point lies in the attractor ball.
    Steps are taken in blocks of precomputed words (see :func:`_block_table`).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if burn_in is None:
        burn_in = default_burn_in(system)
    table, n_blocks = _block_table(system, burn_in)
    bounds = _rng.chunk_bounds(count)
    parts = _rng.pmap(
        lambda kb: _chaos_chunk(system, table, n_blocks, seed, kb[0], kb[1][1] - kb[1][0]),
        list(enumerate(bounds)),
    )
    return SamplePool(np.concatenate(parts), int(seed), int(burn_in))


@dataclass(frozen=True)
class FourierValue:
    value: complex
    error: float  # standard error (mc) or certified bound (recursive)
    method: str
    nodes: int = 0

    def __abs__(self):
        return abs(self.value)


def fourier_mc(pool, xi):
    """Sample mean of ``exp(-2 pi i xi.x)`` over the pool, with plug-in standard error."""
    pts = pool.points if isinstance(pool, SamplePool) else np.asarray(pool, dtype=float)
    if len(pts) == 0:
        raise EmptyPool("empty sample pool")
    xi = np.asarray(xi, dtype=float)
    e = np.exp(-1j * TWO_PI * (pts @ xi))
    m = e.mean()
    var = float(np.mean(np.abs(e - m) ** 2))
    return FourierValue(complex(m), math.sqrt(var / len(pts)), "montecarlo")


def leaf_bound(eta_norm, radius):
    """Bound on ``|mu_hat(eta) - exp(-2 pi i eta.c)|`` for a measure centred at its mean ``c``.

    With ``theta = 2 pi eta.(x - c)``, ``|theta| <= 2 pi |eta| R``; the linear
    term integrates to zero, leaving ``theta^2 / 2``.
    """
    x = TWO_PI * eta_norm * radius
    return np.minimum(np.minimum(x, 0.5 * x * x), 2.0)


def _linear_classes(mats):
    """Groups of letter indices with bitwise equal linear parts, in first-seen order."""
    classes = []
    for j, a in enumerate(mats):
        for cl in classes:
            if np.array_equal(mats[cl[0]], a):
                cl.append(j)
                break
        else:
            classes.append([j])
    return classes


def fourier_recursive(system, xi, tol=1e-6, cap=DEFAULT_RECURSION_CAP):
    """``mu_hat(xi)`` from ``mu_hat(xi) = sum_j p_j e^{-2 pi i xi.b_j} mu_hat(A_j^T xi)``.

    A branch with accumulated weight ``p_w`` at frequency ``eta`` gets the
    tolerance ``tol * p_w``; it is closed with the barycentre phase once
    :func:`leaf_bound` is below that, so the certified total error is at
    most ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    xi = np.asarray(xi, dtype=float)
    c = barycenter(system)
    _, radius = attractor_ball(system, center=c)
    At = system.transposes()
    p, b = system.weights, system.translation
    classes = _linear_classes(system.linear)
    merge = len(classes) < system.size
    if merge:
        At = At[[cl[0] for cl in classes]]
        member = np.zeros((system.size, len(classes)))
        for i, cl in enumerate(classes):
            member[cl, i] = 1.0
    k = len(At)

    eta = xi[None, :]
    coef = np.ones(1, dtype=complex)
    wts = np.ones(1)
    total = 0j
    err = 0.0
    nodes = 0
    while len(wts):
        nodes += len(wts)
        if nodes > cap:
            raise BudgetExceeded(f"recursion exceeded {cap} nodes at xi={xi.tolist()}")
        bound = leaf_bound(np.sqrt(np.einsum("ni,ni->n", eta, eta)), radius)
        leaf = bound <= tol
        if leaf.any():
            total += np.sum(coef[leaf] * np.exp(-1j * TWO_PI * (eta[leaf] @ c)))
            err += float(np.sum(wts[leaf] * bound[leaf]))
        live = ~leaf
        if not live.any():
            break
        eta, coef, wts = eta[live], coef[live], wts[live]
        m = len(wts)
        phase = np.exp(-1j * TWO_PI * (eta @ b.T))  # (m, k)
        terms = coef[:, None] * p[None, :] * phase
        if merge:
            coef = (terms @ member).ravel()
            wts = (wts[:, None] * (p @ member)[None, :]).ravel()
        else:
            coef = terms.ravel()
            wts = (wts[:, None] * p[None, :]).ravel()
        eta = np.einsum("kij,mj->mki", At, eta).reshape(m * k, -1)
    return FourierValue(complex(total), err, "recursive", nodes)


@dataclass(frozen=True)
class FourierQuery:
    frequency: tuple
    method: str = "recursive"
    tolerance: float = 1e-6
    samples: int = 100_000

    def __post_init__(self):
        if self.method not in ("recursive", "montecarlo"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.samples < 1:
            raise ValueError("sample count must be >= 1")


def evaluate(system, query, seed=0, pool=None):
    if query.method == "recursive":
        return fourier_recursive(system, query.frequency, query.tolerance)
    if pool is None:
        pool = chaos_sample(system, query.samples, seed)
    return fourier_mc(pool, query.frequency)


# --------------------------------------------------------------------------
# Frostman exponents


@dataclass(frozen=True)
class FrostmanEstimate:
    s1: float
    s2_hat: float
    C1: float
    C2: float
    radii: tuple
    sup_mass: tuple


def frostman_lower_exponent(system):
    """``s1 = max_j log p_j / log ||A_j||``."""
    return float(np.max(np.log(system.weights) / np.log(system.norms)))


def _fit_line(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def frostman(system, pool, radii, n_centers=200, target_neighbours=50_000):
    """Closed-form lower exponent and a fitted upper exponent.

    ``sup_x mu(B(x, r))`` is estimated over ``n_centers`` pool points by ball
    counts; for large radii only a prefix of the pool is counted so that a
    ball holds about ``target_neighbours`` points.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or len(radii) < 2 or np.any(np.diff(radii) >= 0) or radii[-1] <= 0:
        raise ValueError("radii must be a decreasing sequence of positive numbers")
    pts = pool.points if isinstance(pool, SamplePool) else np.asarray(pool, dtype=float)
    n = len(pts)
    if n < 1000:
        raise InsufficientSamples(f"need at least 1000 samples, got {n}")
    centers = pts[:: max(1, n // n_centers)][:n_centers]

    sup_mass = []
    pilot = cKDTree(pts[: min(n, 20_000)])
    full = None
    for r in radii:
        m0 = pilot.query_ball_point(centers, r, return_length=True).max() / pilot.n
        n_use = n if m0 <= 0 else int(min(n, max(20_000, target_neighbours / m0)))
        if n_use == n:
            if full is None:
                full = cKDTree(pts)
            tree = full
        else:
            tree = cKDTree(pts[:n_use])
        counts = tree.query_ball_point(centers, r, return_length=True)
        sup_mass.append(counts.max() / n_use)
    sup_mass = np.array(sup_mass)
    if np.any(sup_mass <= 0):
        raise InsufficientSamples("empty balls at the smallest radii; use more samples")

    slope, intercept = _fit_line(np.log(radii), np.log(sup_mass))
    s1 = frostman_lower_exponent(system)
    _, radius = attractor_ball(system, center=barycenter(system))
    diam = max(2.0 * radius, 1e-300)
    rmin = float(np.min(system.norms))
    c1 = min(1.0, rmin / (2.0 * diam)) ** s1
    return FrostmanEstimate(s1, slope, c1, math.exp(intercept), tuple(radii), tuple(sup_mass))


# --------------------------------------------------------------------------
# pairwise checks


@dataclass(frozen=True)
class CSReport:
    """Both sides of ``|mu_hat(xi)|^2 <= sum_w p_w |mu_hat(A_w^T xi)|^2``."""

    lhs: float
    lhs_stderr: float
    rhs: float
    rhs_stderr: float
    diff_stderr: float
    violated: bool
    n_words: int


def check_cs_bound(system, pool, xi, t, sigmas=4.0, block=4_000_000):
    """Monte Carlo check of the stopping-time Cauchy-Schwarz bound.

    Both sides are averages over the same independent pairs ``(x, y)``
    (first and second half of the pool) of ``cos(2 pi xi.(x - y))`` and
    ``sum_w p_w cos(2 pi A_w^T xi.(x - y))``.
    """
    xi = np.asarray(xi, dtype=float)
    nxi = float(np.linalg.norm(xi))
    if nxi == 0.0:
        return CSReport(1.0, 0.0, 1.0, 0.0, 0.0, False, 0)
    pts = pool.points if isinstance(pool, SamplePool) else np.asarray(pool, dtype=float)
    half = len(pts) // 2
    if half < 2:
        raise InsufficientSamples("need at least 4 samples")
    diff = pts[:half] - pts[half: 2 * half]
    st = stopping_set(system, xi / nxi, t)
    etas = nxi * np.exp(st.cocycles)[:, None] * st.directions  # rows A_w^T xi
    lhs_terms = np.cos(TWO_PI * (diff @ xi))
    rhs_terms = np.empty(half)
    step = max(1, block // len(st))
    for lo in range(0, half, step):
        hi = min(half, lo + step)
        rhs_terms[lo:hi] = np.cos(TWO_PI * (diff[lo:hi] @ etas.T)) @ st.weights
    d = rhs_terms - lhs_terms
    se = lambda v: float(np.std(v, ddof=1) / math.sqrt(len(v)))
    lhs, rhs = float(lhs_terms.mean()), float(rhs_terms.mean())
    dse = se(d)
    return CSReport(lhs, se(lhs_terms), rhs, se(rhs_terms), dse, bool(lhs - rhs > sigmas * dse), len(st))


def tube_mass(pool, delta, max_pairs=10**7):
    """U-statistic estimate of ``(mu x mu){|x - y| <= delta}`` with its standard error.

    At most ``max_pairs`` pairs are used: the estimate runs over the first
    ``m`` pool points with ``m (m - 1) / 2 <= max_pairs``.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    pts = pool.points if isinstance(pool, SamplePool) else np.asarray(pool, dtype=float)
    m = min(len(pts), int((1 + math.sqrt(1 + 8 * max_pairs)) // 2))
    if m < 2:
        raise InsufficientSamples("need at least 2 samples")
    sub = pts[:m]
    tree = cKDTree(sub)
    counts = tree.query_ball_point(sub, delta, return_length=True) - 1
    h = counts / (m - 1)
    est = float(h.mean())
    return est, float(2.0 * np.std(h) / math.sqrt(m))
