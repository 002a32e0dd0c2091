"""Monte Carlo for the stopping-time renewal operator, its limit and the residue operator.

For a start direction ``x`` and threshold ``t`` the walk ``S_n = X_n ... X_1``
runs until ``-sigma(S_n, x) > t``. At that crossing we record

* ``y = S_n x`` (direction) and the overshoot ``u = sigma(S_n, x) + t``,
* ``gy = S_{n-1} x``, the last jump ``v = sigma(X_n, S_{n-1} x)`` and
  ``w = sigma(S_{n-1}, x) + t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .errors import NonNegativeLyapunov, StepCapExceeded
from .sphere import apply_letters, lyapunov, stationary, unit

STEP_CAP = 100_000


@dataclass(frozen=True)
class TestFunction:
    """A function ``f(y, u)`` on sphere x line, vectorised over rows of ``y``.

    The bounds are metadata; :meth:`spot_check` samples them.
    """

    __test__ = False  # not a pytest class

    evaluator: object
    sup_bound: float = 1.0
    lipschitz: float = 1.0
    support: tuple = (-math.inf, math.inf)
    name: str = "f"

    def __call__(self, y, u):
        return np.asarray(self.evaluator(y, u), dtype=complex) * np.ones(len(u))

    def scaled(self, a, other=None, b=0.0):
        """``a f + b other`` with summed bounds."""
        if other is None:
            return TestFunction(lambda y, u: a * self(y, u), abs(a) * self.sup_bound,
                                abs(a) * self.lipschitz, self.support, f"{a}*{self.name}")
        return TestFunction(
            lambda y, u: a * self(y, u) + b * other(y, u),
            abs(a) * self.sup_bound + abs(b) * other.sup_bound,
            abs(a) * self.lipschitz + abs(b) * other.lipschitz,
            (min(self.support[0], other.support[0]), max(self.support[1], other.support[1])),
            f"{a}*{self.name}+{b}*{other.name}",
        )

    def spot_check(self, dim, rng, n=2000, u_range=(-5.0, 1.0)):
        y = rng.normal(size=(n, dim))
        y /= np.linalg.norm(y, axis=1, keepdims=True)
        u = rng.uniform(*u_range, size=n)
        vals = self(y, u)
        ok = np.all(np.abs(vals) <= self.sup_bound * (1 + 1e-12))
        lo, hi = self.support
        outside = (u < lo) | (u > hi)
        return bool(ok and np.all(vals[outside] == 0))


def constant(c=1.0):
    return TestFunction(lambda y, u: np.full(len(u), c), abs(c), 0.0, name=f"const({c})")


def bump(center=-0.4, width=0.5, direction=None, tilt=0.5):
    """Smooth ``exp(-((u - center)/width)^2) * (1 + tilt * a.y)`` with unit ``a``."""

    def ev(y, u):
        g = np.exp(-(((u - center) / width) ** 2))
        if direction is None:
            return g
        return g * (1.0 + tilt * (y @ np.asarray(direction, dtype=float)))

    lip = math.sqrt(2 / math.e) / width * (1 + abs(tilt)) + abs(tilt)
    return TestFunction(ev, 1.0 + abs(tilt) * (direction is not None), lip, name="bump")


def lattice_wave(period, phase=0.0):
    """``cos(2 pi u / period + phase)``: resonates with an arithmetic cocycle of that period."""
    k = 2 * math.pi / period
    return TestFunction(lambda y, u: np.cos(k * u + phase), 1.0, k, name="lattice_wave")


def nonpositive_indicator():
    return TestFunction(lambda y, u: (u <= 0).astype(float), 1.0, math.inf, (-math.inf, 0.0), "1[u<=0]")


def identity_u():
    return TestFunction(lambda y, u: u, math.inf, 1.0, name="u")


@dataclass(frozen=True)
class Estimate:
    value: complex
    stderr: float


def step_bound(law, t):
    """Largest possible stopping time: each step lowers sigma by at least ``-log max ||g||``."""
    worst = -math.log(float(np.max(np.linalg.norm(law.matrices, 2, axis=(1, 2)))))
    return int(math.floor(t / worst)) + 1


def _crossing_chunk(law, x, t_grid, n, rng, consumers):
    """Run ``n`` walks past ``max(t_grid)``; feed every consumer at every threshold.

    Returns sums and sums of squares with shape ``(len(t_grid), len(consumers))``.
    """
    g = law.matrices
    cdf = np.cumsum(law.weights)
    cdf[-1] = 1.0
    k_t = len(t_grid)
    sums = np.zeros((k_t, len(consumers)), dtype=complex)
    sq = np.zeros((k_t, len(consumers)))
    y = np.tile(x, (n, 1))
    s = np.zeros(n)
    idx = np.arange(n)
    nxt = np.zeros(n, dtype=int)  # index of the next threshold not yet crossed
    while len(idx):
        letters = np.searchsorted(cdf, rng.random(len(idx)), side="right")
        z = apply_letters(g, letters, y)
        nz = np.linalg.norm(z, axis=1)
        v = np.log(nz)
        s_new = s + v
        z /= nz[:, None]
        k = nxt.copy()
        while True:
            hit = k < k_t
            hit[hit] = -s_new[hit] > t_grid[k[hit]]
            if not hit.any():
                break
            rows = np.flatnonzero(hit)
            kk = k[rows]
            for level in np.unique(kk):
                sel = rows[kk == level]
                tt = t_grid[level]
                rec = Crossing(z[sel], s_new[sel] + tt, y[sel], v[sel], s[sel] + tt)
                for c, fn in enumerate(consumers):
                    vals = fn(rec)
                    sums[level, c] += vals.sum()
                    sq[level, c] += np.sum(np.abs(vals) ** 2)
            k[rows] += 1
        nxt = k
        alive = nxt < k_t
        idx, y, s, nxt = idx[alive], z[alive], s_new[alive], nxt[alive]
    return sums, sq


@dataclass(frozen=True)
class Crossing:
    y: np.ndarray  # S_n x
    u: np.ndarray  # sigma(S_n, x) + t
    gy: np.ndarray  # S_{n-1} x
    v: np.ndarray  # sigma(X_n, S_{n-1} x)
    w: np.ndarray  # sigma(S_{n-1}, x) + t


def simulate_crossings(law, x, t_grid, consumers, n_samples, seed, step_cap=STEP_CAP):
    """Means and standard errors of ``consumer(Crossing)`` at every threshold.

    Sample ``i`` belongs to chunk ``i // CHUNK`` whose stream is
    ``(seed, RENEWAL, chunk)``, so results do not depend on thread count.
    Every consumer sees the same paths (common random numbers).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid < 0):
        raise ValueError("t must be >= 0")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be increasing")
    if step_bound(law, t_grid[-1]) > step_cap:
        raise StepCapExceeded(f"stopping time may need {step_bound(law, t_grid[-1])} steps > cap {step_cap}")
    x = unit(x)
    bounds = _rng.chunk_bounds(n_samples)

    def run(c):
        lo, hi = bounds[c]
        return _crossing_chunk(law, x, t_grid, hi - lo, _rng.stream(seed, _rng.TAG_RENEWAL, c), consumers)

    parts = _rng.pmap(run, range(len(bounds)))
    sums = sum(p[0] for p in parts)
    sq = sum(p[1] for p in parts)
    mean = sums / n_samples
    var = np.maximum(sq / n_samples - np.abs(mean) ** 2, 0.0)
    se = np.sqrt(var / max(n_samples - 1, 1))
    return mean, se


def _as_consumer(f):
    return lambda rec: f(rec.y, rec.u)


def renewal_Et(law, f, x, t, n_samples=100_000, seed=0):
    """``E_t f(x) = E f(S_{n_t} x, sigma(S_{n_t}, x) + t)``."""
    fs = f if isinstance(f, (list, tuple)) else [f]
    mean, se = simulate_crossings(law, x, [t], [_as_consumer(g) for g in fs], n_samples, seed)
    out = [Estimate(complex(mean[0, i]), float(se[0, i])) for i in range(len(fs))]
    return out if isinstance(f, (list, tuple)) else out[0]


def renewal_residue(law, f3, x, t, n_samples=100_000, seed=0):
    """``E f3(h g x, sigma(h, g x), sigma(g, x) + t)`` with ``g = S_{n-1}``, ``h = X_n``."""
    mean, se = simulate_crossings(law, x, [t], [lambda r: np.asarray(f3(r.y, r.v, r.w), dtype=complex)],
                                  n_samples, seed)
    return Estimate(complex(mean[0, 0]), float(se[0, 0]))


def overshoots(law, x, t, n_samples=10_000, seed=0):
    """Raw overshoot sample ``sigma(S_{n_t}, x) + t``."""
    out = []

    def keep(rec):
        out.append(rec.u)
        return np.zeros(len(rec.u))

    x = unit(x)
    for c, (lo, hi) in enumerate(_rng.chunk_bounds(n_samples)):
        _crossing_chunk(law, x, np.array([float(t)]), hi - lo, _rng.stream(seed, _rng.TAG_RENEWAL, c), [keep])
    return np.concatenate(out)


def _clustered_mean(vals, groups):
    """Mean with a cluster-robust standard error (clusters = walk chains)."""
    n = len(vals)
    mean = vals.mean()
    if groups is None:
        return mean, float(np.std(vals) / math.sqrt(n))
    dev = vals - mean
    labels, inv = np.unique(groups, return_inverse=True)
    tot = np.zeros(len(labels), dtype=complex)
    np.add.at(tot, inv, dev)
    g = len(labels)
    var = np.sum(np.abs(tot) ** 2) / n**2 * g / max(g - 1, 1)
    return mean, float(math.sqrt(var))


def renewal_limit(law, f, x=None, measure=None, n_samples=1_000_000, seed=0, lyap=None):
    """Limit of ``E_t f(x)`` in importance form.

    ``(1/|sigma_lambda|) E[-sigma(h, y) f(h y, sigma(h, y) + u)]`` with
    ``y ~ nu_x``, ``h ~ lambda``, ``u ~ U[0, -sigma(h, y)]``. The error bar
    clusters samples by the chain that produced their atom, so it includes
    the estimation noise of ``nu_x``, and adds the Lyapunov uncertainty.
    """
    if lyap is None:
        lyap = lyapunov(law, seed=seed)
    if lyap.value + lyap.half_width >= 0:
        raise NonNegativeLyapunov(f"Lyapunov estimate {lyap.value:.4g} +- {lyap.half_width:.2g} is not negative")
    if measure is None:
        measure = stationary(law, x if x is not None else np.eye(law.dim)[0], seed=seed)
    fs = f if isinstance(f, (list, tuple)) else [f]
    rng = _rng.stream(seed, _rng.TAG_LIMIT)
    idx = measure.sample_index(rng, n_samples)
    y = measure.atoms[idx]
    letters = _rng.draw_letters(rng, law.weights, n_samples)
    hy = apply_letters(law.matrices, letters, y)
    nrm = np.linalg.norm(hy, axis=1)
    sig = np.log(nrm)
    hy /= nrm[:, None]
    u = rng.random(n_samples) * (-sig)
    groups = None if measure.groups is None else measure.groups[idx]
    scale = abs(lyap.value)
    out = []
    for g in fs:
        m, se = _clustered_mean(-sig * g(hy, sig + u), groups)
        val = m / scale
        rel = lyap.half_width / 2 / scale
        out.append(Estimate(complex(val), float(math.hypot(se / scale, abs(val) * rel))))
    return out if isinstance(f, (list, tuple)) else out[0]


@dataclass
class RenewalComparison:
    t_grid: np.ndarray
    et_values: np.ndarray  # complex
    et_stderr: np.ndarray
    limit_value: complex
    limit_stderr: float
    residual: np.ndarray
    residual_stderr: np.ndarray
    epsilon1_hat: float = None
    coarse_limit: complex = None
    resolution_gap: float = None
    notes: list = field(default_factory=list)

    @property
    def oscillation(self):
        """Largest residual over the grid."""
        return float(np.max(self.residual))

    def rows(self):
        for t, e, se, r in zip(self.t_grid, self.et_values, self.et_stderr, self.residual):
            yield (float(t), e.real, e.imag, float(se), self.limit_value.real, self.limit_value.imag,
                   self.limit_stderr, float(r))

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("t,re_Et,im_Et,stderr,re_limit,im_limit,limit_stderr,residual\n")
            for row in self.rows():
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def fit_decay_rate(t_grid, residual, stderr, floor=3.0):
    """Slope of ``log residual`` against ``t`` over points above ``floor`` x stderr."""
    t_grid, residual, stderr = map(np.asarray, (t_grid, residual, stderr))
    keep = residual > floor * stderr
    if keep.sum() < 3:
        return None
    slope = np.polyfit(t_grid[keep], np.log(residual[keep]), 1)[0]
    return float(-slope) if slope < 0 else None


def renewal_sweep(law, f, x, t_grid, n_samples=200_000, seed=0, measure=None, lyap=None,
                  limit_samples=None):
    """Tabulate ``|E_t f(x) - limit|`` over ``t_grid`` with a coarse-measure bias check."""
    t_grid = np.asarray(t_grid, dtype=float)
    mean, se = simulate_crossings(law, x, t_grid, [_as_consumer(f)], n_samples, seed)
    if lyap is None:
        lyap = lyapunov(law, seed=seed)
    if measure is None:
        measure = stationary(law, x, seed=seed)
    n_lim = limit_samples or n_samples
    lim = renewal_limit(law, f, measure=measure, n_samples=n_lim, seed=seed, lyap=lyap)
    coarse = renewal_limit(law, f, measure=measure.coarsen(), n_samples=n_lim, seed=seed, lyap=lyap)
    et = mean[:, 0]
    resid = np.abs(et - lim.value)
    rse = np.hypot(se[:, 0], lim.stderr)
    out = RenewalComparison(t_grid, et, se[:, 0], lim.value, lim.stderr, resid, rse,
                            fit_decay_rate(t_grid, resid, rse), coarse.value,
                            abs(coarse.value - lim.value))
    if out.resolution_gap > 3 * math.hypot(lim.stderr, coarse.stderr):
        out.notes.append("limit depends on the resolution of the stationary estimate")
    return out
