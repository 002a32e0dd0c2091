"""The transpose random walk on the sphere S^{d-1}.

Matrices act on unit vectors by ``g.x = g x / |g x|`` and carry the norm
cocycle ``sigma(g, x) = log |g x|``. Products are built on the left:
``S_n = X_n ... X_1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, nnls
from scipy.spatial import ConvexHull, QhullError

from . import _rng
from .errors import Inconclusive, InsufficientAtoms, SingularMatrix
from .ifs import min_singular, op_norm

RENORM_EVERY = 32


@dataclass(frozen=True, eq=False)
class WalkLaw:
    """``lambda = sum_j p_j delta_{g_j}``; for an IFS the ``g_j`` are the ``A_j^T``."""

    matrices: np.ndarray  # (k, d, d)
    weights: np.ndarray  # (k,)

    @property
    def dim(self):
        return self.matrices.shape[1]

    @property
    def size(self):
        return self.matrices.shape[0]

    @classmethod
    def from_system(cls, system):
        return cls(np.ascontiguousarray(system.transposes()), system.weights)

    @classmethod
    def from_matrices(cls, matrices, weights=None):
        m = np.asarray(matrices, dtype=float)
        if m.ndim == 2:
            m = m[None]
        k = m.shape[0]
        p = np.full(k, 1.0 / k) if weights is None else np.asarray(weights, dtype=float)
        if m.shape[1] < 2 or m.shape[1] != m.shape[2]:
            raise ValueError("matrices must be d x d with d >= 2")
        if np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        if np.any(np.atleast_1d(op_norm(m)) >= 1.0):
            raise ValueError("every matrix must have operator norm < 1")
        if np.any(np.atleast_1d(min_singular(m)) < 1e-12):
            raise SingularMatrix("law contains a singular matrix")
        return cls(m, p)

    @property
    def log_min_singular(self):
        """Lower bound for a single cocycle increment."""
        return float(np.log(np.min(min_singular(self.matrices))))


def cocycle(g, x):
    """``log |g x|`` for unit ``x`` (a vector or a stack of vectors)."""
    g = np.asarray(g, dtype=float)
    if min_singular(g) < 1e-300:
        raise SingularMatrix("cocycle of a singular matrix")
    x = np.asarray(x, dtype=float)
    return np.log(np.linalg.norm(x @ g.T, axis=-1))


def act(g, x):
    y = np.asarray(x, dtype=float) @ np.asarray(g, dtype=float).T
    return y / np.linalg.norm(y, axis=-1, keepdims=True)


def apply_letters(matrices, letters, y):
    """Row-wise ``matrices[letters[i]] @ y[i]``, unrolled for d = 2."""
    if y.shape[1] == 2:
        a = matrices[:, 0, 0][letters]
        b = matrices[:, 0, 1][letters]
        c = matrices[:, 1, 0][letters]
        d = matrices[:, 1, 1][letters]
        y0, y1 = y[:, 0], y[:, 1]
        return np.stack([a * y0 + b * y1, c * y0 + d * y1], axis=1)
    return np.einsum("nij,nj->ni", matrices[letters], y)


def unit(x):
    x = np.asarray(x, dtype=float)
    return x / np.linalg.norm(x)


# --------------------------------------------------------------------------
# Lyapunov constant


@dataclass(frozen=True)
class LyapunovEstimate:
    value: float
    half_width: float
    n_steps: int
    n_trajectories: int


def lyapunov(law, n_steps=10_000, n_trajectories=200, seed=0):
    """First Lyapunov constant as the mean of ``(1/n) log ||X_n ... X_1||``.

    Running products are renormalised every ``RENORM_EVERY`` steps; the
    half-width is twice the standard error across trajectories.
    """
    if n_steps < 100:
        raise ValueError("n_steps must be >= 100")
    if n_trajectories < 2:
        raise ValueError("need at least 2 trajectories")
    d = law.dim
    letters = np.stack(
        [_rng.draw_letters(_rng.stream(seed, _rng.TAG_LYAPUNOV, i), law.weights, n_steps)
         for i in range(n_trajectories)],
        axis=1,
    )
    prod = np.broadcast_to(np.eye(d), (n_trajectories, d, d)).copy()
    acc = np.zeros(n_trajectories)
    g = law.matrices
    for step, row in enumerate(letters, start=1):
        prod = np.einsum("tij,tjk->tik", g[row], prod)
        if step % RENORM_EVERY == 0 or step == n_steps:
            nrm = op_norm(prod)
            acc += np.log(nrm)
            prod /= nrm[:, None, None]
    per = acc / n_steps
    value = float(per.mean())
    # identical trajectories (e.g. scalar laws) get an exact zero, not mean rounding noise
    hw = 0.0 if np.ptp(per) == 0 else float(2.0 * per.std(ddof=1) / math.sqrt(n_trajectories))
    return LyapunovEstimate(value, hw, n_steps, n_trajectories)


# --------------------------------------------------------------------------
# invariant cones


@dataclass
class ConeReport:
    """Outcome of the invariant-cone search.

    ``status`` is ``preserved``, ``blowup`` or ``inconclusive``. When
    preserved, ``axis`` is a unit vector with ``axis . y > 0`` on the cone
    and ``rays`` generate it.
    """

    status: str
    witness: str
    iterations: int
    axis: np.ndarray = None
    rays: np.ndarray = None
    component_weights: tuple = None

    @property
    def preserved(self):
        return self.status == "preserved"

    def component_weights_at(self, x=None):
        return self.component_weights

    def to_dict(self):
        return {
            "status": self.status,
            "preserved": self.preserved,
            "witness": self.witness,
            "iterations": self.iterations,
            "axis": None if self.axis is None else self.axis.tolist(),
            "component_weights": None if self.component_weights is None else list(self.component_weights),
        }


def _angle(v):
    return np.mod(np.arctan2(v[..., 1], v[..., 0]), 2 * math.pi)


def _arc_image(g, start, width):
    u = np.array([math.cos(start), math.sin(start)])
    v = np.array([math.cos(start + width), math.sin(start + width)])
    a, b = _angle(g @ u), _angle(g @ v)
    w = (b - a) % (2 * math.pi)
    if w > math.pi:  # orientation reversed by det g < 0
        a, w = b, 2 * math.pi - w
    return a, w


def _cover_arc(arcs):
    """Smallest arc containing every arc in ``arcs``; each is (start, width)."""
    best = (None, math.inf)
    for s, _ in arcs:
        ext = max(((s2 - s) % (2 * math.pi)) + w2 for s2, w2 in arcs)
        if ext < best[1]:
            best = (s, ext)
    return best


def _cone_2d(law, start, width, max_iter, tol):
    arc = (start % (2 * math.pi), width)
    for it in range(1, max_iter + 1):
        arcs = [arc] + [_arc_image(g, *arc) for g in law.matrices]
        new = _cover_arc(arcs)
        if new[1] >= math.pi - 1e-12:
            return "blowup", it, new
        moved = abs(new[1] - arc[1]) + abs(math.remainder(new[0] - arc[0], 2 * math.pi))
        arc = new
        if moved < tol:
            return "preserved", it, arc
    return "inconclusive", max_iter, arc


def _axis_lp(rays):
    """Maximise ``min_i u . r_i`` over ``|u|_inf <= 1``; returns (u, margin)."""
    m, d = rays.shape
    c = np.zeros(d + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-rays, np.ones((m, 1))])
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(m), bounds=[(-1, 1)] * d + [(None, 1)], method="highs")
    u = res.x[:d]
    return u, float(res.x[-1])


def _extreme_rays(rays, axis):
    chart = rays / (rays @ axis)[:, None]
    basis = np.linalg.svd(np.eye(len(axis)) - np.outer(axis, axis) / (axis @ axis))[0][:, : len(axis) - 1]
    coords = chart @ basis
    try:
        hull = ConvexHull(coords)
    except QhullError:
        return rays
    return rays[np.sort(hull.vertices)]


def _cone_nd(law, rays, max_iter, tol):
    rays = np.array([unit(r) for r in rays])
    for it in range(1, max_iter + 1):
        axis, margin = _axis_lp(rays)
        if margin <= 1e-9:
            return "blowup", it, rays
        rays = _extreme_rays(rays, axis)
        images = np.concatenate([act(g, rays) for g in law.matrices])
        outside = []
        for y in images:
            _, resid = nnls(rays.T, y)
            if resid > tol:
                outside.append(y)
        if not outside:
            return "preserved", it, rays
        rays = np.concatenate([rays, outside])
    return "inconclusive", max_iter, rays


def _start_cones(law, seed, n_random):
    """Starting directions: the positive orthant, dominant eigenvectors, random rays."""
    d = law.dim
    starts = [np.eye(d)]
    for g in law.matrices:
        vals, vecs = np.linalg.eig(g)
        i = int(np.argmax(np.abs(vals)))
        if abs(vals[i].imag) < 1e-12:
            v = np.real(vecs[:, i])
            starts.append(v[None])
            starts.append(-v[None])
    rng = _rng.stream(seed, _rng.TAG_CONE)
    for _ in range(n_random):
        starts.append(rng.normal(size=(1, d)))
    return starts


def detect_cone(law, max_iter=500, tol=1e-6, seed=0, n_random=4):
    """Look for a proper convex cone mapped into itself by every matrix of the law.

    From each starting cone the closure ``C <- hull(C u g_1 C u ... u g_k C)``
    is iterated. It either stabilises (a preserved proper cone) or its
    angular width reaches pi (no proper cone contains the start). Raises
    :class:`Inconclusive` when neither happens within ``max_iter``.
    """
    d = law.dim
    if d < 2:
        raise ValueError("d must be >= 2")
    outcomes = []
    for rays in _start_cones(law, seed, n_random):
        if d == 2:
            if len(rays) == 1:
                start, width = float(_angle(rays[0])), 0.0
            else:
                start, width = 0.0, math.pi / 2
            status, it, arc = _cone_2d(law, start, width, max_iter, tol)
            if status == "preserved":
                mid = arc[0] + arc[1] / 2
                gens = np.array([[math.cos(arc[0]), math.sin(arc[0])],
                                 [math.cos(arc[0] + arc[1]), math.sin(arc[0] + arc[1])]])
                return ConeReport("preserved", f"invariant arc start={arc[0]:.6f} width={arc[1]:.6f}",
                                  it, np.array([math.cos(mid), math.sin(mid)]), gens)
            outcomes.append((status, it, f"arc width {arc[1]:.6f}"))
        else:
            status, it, cone_rays = _cone_nd(law, rays, max_iter, tol)
            if status == "preserved":
                axis, _ = _axis_lp(cone_rays)
                return ConeReport("preserved", f"invariant cone with {len(cone_rays)} extreme rays",
                                  it, unit(axis), cone_rays)
            outcomes.append((status, it, f"{len(cone_rays)} rays"))
    its = max(o[1] for o in outcomes)
    if all(o[0] == "blowup" for o in outcomes):
        return ConeReport("blowup", "hull of every starting cone reached angular width pi", its)
    report = ConeReport("inconclusive", "; ".join(f"{s} after {i} ({w})" for s, i, w in outcomes), its)
    raise Inconclusive("cone detection did not stabilise", report)


# --------------------------------------------------------------------------
# stationary measures


@dataclass(eq=False)
class EmpiricalSphereMeasure:
    atoms: np.ndarray  # (n, d) unit vectors
    weights: np.ndarray  # (n,) summing to 1
    provenance: dict = field(default_factory=dict)
    groups: np.ndarray = None  # chain label per atom, for clustered error bars

    def __len__(self):
        return len(self.weights)

    @property
    def dim(self):
        return self.atoms.shape[1]

    def integrate(self, f):
        return np.sum(self.weights * f(self.atoms))

    def sample_index(self, rng, n):
        cdf = np.cumsum(self.weights)
        cdf[-1] = 1.0
        return np.searchsorted(cdf, rng.random(n), side="right")

    def sample(self, rng, n):
        return self.atoms[self.sample_index(rng, n)]

    def restrict(self, keep):
        """Keep the atoms selected by a boolean mask, renormalising weights."""
        w = self.weights[keep]
        g = None if self.groups is None else self.groups[keep]
        return EmpiricalSphereMeasure(self.atoms[keep], w / w.sum(), dict(self.provenance), g)

    def coarsen(self):
        """Half-resolution copy: every second chain, or every second atom without labels."""
        if self.groups is None:
            keep = np.arange(len(self)) % 2 == 0
        else:
            keep = self.groups % 2 == 0
        return self.restrict(keep)

    def write(self, csv_path, sidecar_path=None):
        d = self.dim
        with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join([f"coord_{i + 1}" for i in range(d)] + ["weight"]) + "\n")
            for x, w in zip(self.atoms, self.weights):
                fh.write(",".join(repr(float(v)) for v in x) + "," + repr(float(w)) + "\n")
        if sidecar_path is not None:
            with open(sidecar_path, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(self.provenance, fh, indent=2, sort_keys=True)
                fh.write("\n")


def walk(law, starts, n_steps, seed, side=0, record_from=0):
    """Run one chain per row of ``starts``; returns positions from step ``record_from`` on.

    Output has shape ``(n_chains, n_steps - record_from, d)``. Chain ``i``
    draws from stream ``(seed, WALK, side, i)``.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    n = len(starts)
    letters = np.stack(
        [_rng.draw_letters(_rng.stream(seed, _rng.TAG_WALK, side, i), law.weights, n_steps)
         for i in range(n)],
        axis=1,
    )
    x = starts / np.linalg.norm(starts, axis=1, keepdims=True)
    out = np.empty((n, n_steps - record_from, law.dim))
    g = law.matrices
    for step, row in enumerate(letters):
        x = apply_letters(g, row, x)
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        if step >= record_from:
            out[:, step - record_from] = x
    return out


def stationary(law, x0, burn_in=200, n_atoms=100_000, seed=0, n_chains=64, cone=None):
    """Birkhoff estimate of the stationary measure reached from ``x0``.

    Half the chains start at ``x0`` and half at ``-x0``. Without an
    invariant cone the measure is unique and the two halves are pooled; their
    distance is recorded as ``antipodal_discrepancy`` in the provenance.
    With a preserved cone ``C`` the two ergodic components live on ``C`` and
    ``-C``. Chains from ``x0`` and ``-x0`` are folded into ``C`` to estimate
    the first component; the weight ``p_1(x0)`` is the fraction of chains
    from ``x0`` absorbed in ``C``.
    """
    x0 = unit(x0)
    if cone is None:
        cone = detect_cone(law, seed=seed)
    per_chain = -(-n_atoms // (2 * n_chains))
    steps = burn_in + per_chain
    plus = walk(law, np.tile(x0, (n_chains, 1)), steps, seed, record_from=burn_in)
    minus = walk(law, np.tile(-x0, (n_chains, 1)), steps, seed, side=1, record_from=burn_in)
    prov = {
        "seed": int(seed),
        "burn_in": int(burn_in),
        "trajectory_length": int(per_chain),
        "n_chains": int(n_chains),
        "cone": cone.status,
    }
    if not cone.preserved:
        prov["component"] = "unique"
        prov["antipodal_discrepancy"] = float(
            measure_distance(plus.reshape(-1, law.dim), minus.reshape(-1, law.dim)))
        atoms = np.concatenate([plus, minus]).reshape(-1, law.dim)
        groups = np.repeat(np.arange(2 * n_chains), per_chain)
        return EmpiricalSphereMeasure(atoms, np.full(len(atoms), 1.0 / len(atoms)), prov, groups)

    axis = cone.axis
    side = np.sign(plus[:, -1] @ axis)
    p1 = float(np.mean(side > 0))
    folded = np.concatenate([plus * side[:, None, None],
                             minus * np.sign(minus[:, -1] @ axis)[:, None, None]])
    nu1 = folded.reshape(-1, law.dim)
    n1 = len(nu1)
    chain = np.repeat(np.arange(2 * n_chains), per_chain)
    atoms, weights, groups = [], [], []
    if p1 > 0:
        atoms.append(nu1)
        weights.append(np.full(n1, p1 / n1))
        groups.append(chain)
    if p1 < 1:
        atoms.append(-nu1)
        weights.append(np.full(n1, (1 - p1) / n1))
        groups.append(chain)
    cone.component_weights = (p1, 1 - p1)
    prov["component"] = "mixture"
    prov["p1"] = p1
    prov["p2"] = 1 - p1
    return EmpiricalSphereMeasure(np.concatenate(atoms), np.concatenate(weights), prov,
                                  np.concatenate(groups))


def circle_w1(a, b, bins=4096, wa=None, wb=None):
    """Wasserstein-1 distance on S^1 (arc-length metric) between two atom sets."""
    edges = np.linspace(0.0, 2 * math.pi, bins + 1)
    ha, _ = np.histogram(_angle(a), edges, weights=wa)
    hb, _ = np.histogram(_angle(b), edges, weights=wb)
    diff = np.cumsum(ha / ha.sum() - hb / hb.sum())
    return float(np.sum(np.abs(diff - np.median(diff))) * (2 * math.pi / bins))


def measure_distance(a, b):
    """Circle W1 for d = 2; otherwise the largest gap in first and second moments."""
    if a.shape[1] == 2:
        return circle_w1(a, b)
    m1 = np.abs(a.mean(0) - b.mean(0)).max()
    m2 = np.abs(a.T @ a / len(a) - b.T @ b / len(b)).max()
    return max(m1, m2)


# --------------------------------------------------------------------------
# Guivarc'h regularity


@dataclass(frozen=True)
class GuivarchResult:
    alpha: float
    C: float
    radii: tuple
    sup_mass: tuple
    flagged: bool
    reason: str = ""


def hyperplane_distance(atoms, normal):
    """Chordal distance from unit vectors to the great sphere orthogonal to ``normal``."""
    s = np.clip(np.abs(atoms @ normal), 0.0, 1.0)
    return np.sqrt(np.maximum(2.0 - 2.0 * np.sqrt(1.0 - s * s), 0.0))


def guivarch_check(measure, n_hyperplanes=100, radii=None, seed=0, min_alpha=0.05):
    """Worst-case neighbourhood mass of hyperplanes and its fitted power law.

    Hyperplanes are drawn with uniform unit normals plus normals orthogonal
    to randomly chosen atoms (so that some hyperplanes pass through the
    support). The fit is ``log sup_Y nu(d(x, Y) <= r) = log C + alpha log r``.
    """
    if radii is None:
        radii = np.geomspace(0.3, 1e-3, 10)
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be decreasing")
    if len(measure) < 50:
        raise InsufficientAtoms(f"need at least 50 atoms, got {len(measure)}")
    d = measure.dim
    rng = _rng.stream(seed, _rng.TAG_GUIVARCH)
    normals = rng.normal(size=(n_hyperplanes, d))
    picks = measure.atoms[rng.integers(0, len(measure), n_hyperplanes)]
    tang = rng.normal(size=(n_hyperplanes, d))
    tang -= np.sum(tang * picks, axis=1, keepdims=True) * picks
    normals = np.concatenate([normals, tang])
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)

    sup_mass = np.zeros(len(radii))
    for u in normals:
        dist = hyperplane_distance(measure.atoms, u)
        mass = np.array([measure.weights[dist <= r].sum() for r in radii])
        sup_mass = np.maximum(sup_mass, mass)
    ok = sup_mass > 0
    if ok.sum() < 2:
        raise InsufficientAtoms("neighbourhoods are empty at almost every radius")
    alpha, log_c = np.polyfit(np.log(radii[ok]), np.log(sup_mass[ok]), 1)
    flagged, reason = False, ""
    if alpha < min_alpha:
        flagged, reason = True, f"fitted exponent {alpha:.4f} < {min_alpha}"
    elif sup_mass[-1] > 0.5:
        flagged, reason = True, "half the mass sits within the smallest radius of a hyperplane"
    return GuivarchResult(float(alpha), float(math.exp(log_c)), tuple(radii), tuple(sup_mass), flagged, reason)
