"""Fourier decay sweeps and power-law fits of ``sup_direction |mu_hat(R u)|``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _rng
from .errors import BudgetExceeded
from .fourier import chaos_sample, check_cs_bound, fourier_mc, fourier_recursive, tube_mass

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
TUBE_EPSILON = 0.1


def golden_directions(n=64):
    """Golden-angle points on the upper half circle (``mu_hat(-xi)`` is the conjugate)."""
    ang = np.mod(np.arange(n) * GOLDEN_ANGLE, math.pi)
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


def fibonacci_directions(n=64):
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    r = np.sqrt(1 - z * z)
    phi = k * GOLDEN_ANGLE
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def default_directions(d, n=64):
    if d == 2:
        base = golden_directions(n)
    elif d == 3:
        base = fibonacci_directions(n)
    else:
        rng = _rng.stream(0, _rng.TAG_PROPS, d)
        base = rng.normal(size=(n, d))
        base /= np.linalg.norm(base, axis=1, keepdims=True)
    return np.concatenate([base, np.eye(d)])


@dataclass(frozen=True, eq=False)
class SweepPlan:
    magnitudes: np.ndarray
    directions: np.ndarray
    method: str = "recursive"
    tol: float = 1e-3
    budget: int = 5 * 10**7
    mc_samples: int = 10**6
    seed: int = 0

    def __post_init__(self):
        mags = np.asarray(self.magnitudes, dtype=float)
        dirs = np.atleast_2d(np.asarray(self.directions, dtype=float))
        if mags.ndim != 1 or len(mags) < 1 or np.any(np.diff(mags) <= 0):
            raise ValueError("magnitudes must be strictly increasing")
        if len(dirs) < 8:
            raise ValueError("need at least 8 directions")
        if self.method not in ("recursive", "mc"):
            raise ValueError(f"unknown method {self.method!r}")
        object.__setattr__(self, "magnitudes", mags)
        object.__setattr__(self, "directions", dirs / np.linalg.norm(dirs, axis=1, keepdims=True))

    @classmethod
    def geometric(cls, d, lo=4, hi=12, base=2.0, **kw):
        return cls(base ** np.arange(lo, hi + 1, dtype=float), default_directions(d), **kw)


@dataclass(frozen=True)
class PowerFit:
    alpha: float
    ci: tuple
    intercept: float
    residual_sd: float
    n: int
    reliable: bool
    reason: str = ""


def fit_power_law(r, values, errors=None, max_residual_sd=0.35, level=0.95):
    """Least squares ``log values = c - alpha log r`` with a t-based interval for ``alpha``.

    The fit is unreliable with fewer than 3 points, when a value does not
    clear twice its error bar, or when the log residuals scatter more than
    ``max_residual_sd``.
    """
    r, values = np.asarray(r, dtype=float), np.asarray(values, dtype=float)
    n = len(r)
    if n < 3 or np.any(values <= 0):
        return PowerFit(float("nan"), (float("nan"),) * 2, float("nan"), float("nan"), n, False,
                        "too few positive points")
    x, y = np.log(r), np.log(values)
    res = stats.linregress(x, y)
    resid = y - (res.intercept + res.slope * x)
    sd = float(np.sqrt(np.sum(resid**2) / (n - 2))) if n > 2 else 0.0
    q = stats.t.ppf(0.5 + level / 2, n - 2)
    alpha = -float(res.slope)
    half = float(q * res.stderr)
    reliable, reason = True, ""
    if errors is not None and np.any(values <= 2 * np.asarray(errors)):
        reliable, reason = False, "some values are within twice their error bar"
    elif sd > max_residual_sd:
        reliable, reason = False, f"log residual sd {sd:.3f} > {max_residual_sd}"
    return PowerFit(alpha, (alpha - half, alpha + half), float(res.intercept), sd, n, reliable, reason)


@dataclass
class DecayReport:
    magnitudes: np.ndarray
    sup_abs: np.ndarray
    sup_error: np.ndarray
    points: list  # (xi, value, error, method)
    fit: PowerFit
    warnings: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def alpha_hat(self):
        return self.fit.alpha if self.fit.reliable else None

    def summary(self):
        return {
            "alpha_hat": self.alpha_hat,
            "alpha_ci": list(self.fit.ci) if self.fit.reliable else None,
            "fit_note": self.fit.reason or "ok",
            "fit_points": self.fit.n,
            "residual_sd": self.fit.residual_sd,
            "warnings": list(self.warnings),
            "failures": list(self.failures),
        }

    def write_points_csv(self, path):
        d = len(self.points[0][0]) if self.points else 2
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join([f"xi_{i + 1}" for i in range(d)] + ["re", "im", "abs", "stderr_or_certified_bound", "method"]) + "\n")
            for xi, v, e, m in self.points:
                fh.write(",".join(repr(float(c)) for c in xi)
                         + f",{v.real!r},{v.imag!r},{abs(v)!r},{float(e)!r},{m}\n")

    def write_table_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("R,sup_abs,error\n")
            for r, s, e in zip(self.magnitudes, self.sup_abs, self.sup_error):
                fh.write(f"{float(r)!r},{float(s)!r},{float(e)!r}\n")


def smoothed_nonincreasing(values, window=3):
    v = np.convolve(np.asarray(values, dtype=float), np.ones(window) / window, mode="valid")
    return bool(np.all(np.diff(v) <= 1e-12))


def is_arithmetic_structure(system):
    """All linear parts are conformal with one common ratio: every cocycle step is the same."""
    from .semigroup import is_conformal

    mats = system.linear
    ratios = np.abs(np.linalg.det(mats)) ** (1.0 / system.dim)
    return is_conformal(mats) and np.ptp(ratios) <= 1e-12 * ratios.max()


def decay_sweep(system, plan, verdicts=None, pool=None):
    """``sup_u |mu_hat(R u)|`` for each ``R`` and a power fit on the upper half of ``R``.

    Points are evaluated recursively (certified bound) with a Monte Carlo
    fallback when the recursion exceeds ``plan.budget`` nodes.
    """
    mags, dirs = plan.magnitudes, plan.directions
    if dirs.shape[1] != system.dim:
        raise ValueError("direction dimension does not match the system")
    pool_box = [pool]

    def get_pool():
        if pool_box[0] is None:
            pool_box[0] = chaos_sample(system, plan.mc_samples, plan.seed)
        return pool_box[0]

    tasks = [(r, u) for r in mags for u in dirs]

    def one(task):
        r, u = task
        xi = r * u
        if plan.method == "recursive":
            try:
                v = fourier_recursive(system, xi, plan.tol, plan.budget)
                return xi, v.value, v.error, "recursive"
            except BudgetExceeded:
                return xi, None, None, "fallback"
        return xi, None, None, "mc"

    out = _rng.pmap(one, tasks)
    points, failures = [], []
    for xi, v, e, m in out:
        if v is None:
            try:
                est = fourier_mc(get_pool(), xi)
                v, e, m = est.value, est.error, "montecarlo"
            except Exception as exc:  # partial tables on per-point failure
                failures.append({"xi": xi.tolist(), "error": repr(exc)})
                continue
        points.append((xi, v, e, m))

    sup_abs = np.full(len(mags), np.nan)
    sup_err = np.full(len(mags), np.nan)
    for xi, v, e, _ in points:
        i = int(np.argmin(np.abs(mags - np.linalg.norm(xi))))
        if not abs(v) <= sup_abs[i]:  # also replaces NaN
            sup_abs[i], sup_err[i] = abs(v), e
    upper = mags >= np.median(mags)
    ok = upper & np.isfinite(sup_abs)
    fit = fit_power_law(mags[ok], sup_abs[ok], sup_err[ok])
    rep = DecayReport(mags, sup_abs, sup_err, points, fit, verdicts=verdicts or {}, failures=failures)

    if system.is_singleton:
        rep.warnings.append("singleton: all maps share a fixed point, the measure is a Dirac mass")
    irr = (verdicts or {}).get("totally_irreducible")
    if irr is not None and irr.get("verdict") == "refuted":
        rep.warnings.append(f"reducible: {irr['witness'].get('kind', 'invariant subspace')} found")
    if is_arithmetic_structure(system):
        rep.warnings.append("arithmetic: every map has the same conformal contraction ratio")
    if not fit.reliable:
        rep.warnings.append(f"no reliable decay exponent ({fit.reason})")
    if np.all(np.isfinite(sup_abs)) and len(sup_abs) >= 3 and not smoothed_nonincreasing(sup_abs):
        rep.warnings.append("sup |mu_hat| is not non-increasing in R after smoothing (soft check)")
    return rep


def schedule_st(xi_norm, epsilon1_hat=1.0):
    """``s = |xi|^(eps/(6+eps))`` and ``t = log(|xi|/s)``, so that ``s e^t = |xi|``."""
    if xi_norm < 1:
        raise ValueError("|xi| must be >= 1")
    if epsilon1_hat <= 0:
        raise ValueError("epsilon1_hat must be positive")
    s = xi_norm ** (epsilon1_hat / (6.0 + epsilon1_hat))
    return s, math.log(xi_norm / s)


def proof_diagnostic(system, pool, xi, epsilon1_hat=1.0):
    """The Cauchy-Schwarz step at the scheduled ``t`` and the tube mass at ``delta = s^-eps``."""
    xi = np.asarray(xi, dtype=float)
    s, t = schedule_st(float(np.linalg.norm(xi)), epsilon1_hat)
    cs = check_cs_bound(system, pool, xi, t)
    delta = s ** (-TUBE_EPSILON)
    tm, tse = tube_mass(pool, delta)
    return {
        "s": s, "t": t, "delta": delta,
        "cs_lhs": cs.lhs, "cs_rhs": cs.rhs, "cs_violated": cs.violated,
        "tube_mass": tm, "tube_stderr": tse,
    }
