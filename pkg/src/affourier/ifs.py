"""Affine iterated function systems, their word algebra and stopping trees.

A system is a finite family of maps ``f_j(x) = A_j x + b_j`` with weights
``p_j``. Words compose left to right: ``f_w = f_{w_1} o ... o f_{w_n}``, so
``A_w = A_{w_1} ... A_{w_n}`` and ``b_w = b_{w_1} + A_{w_1} b_{w_2} + ...``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import BudgetExceeded, IndexOutOfRange, SystemFormatError, ValidationError

WEIGHT_TOL = 1e-12
SINGULAR_TOL = 1e-12
DEFAULT_NODE_CAP = 10**7


def op_norm(a):
    """Operator (spectral) norm; accepts a single matrix or a stack."""
    a = np.asarray(a, dtype=float)
    if a.shape[-2:] == (2, 2):
        s = np.sum(a * a, axis=(-2, -1))
        det = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
        disc = np.sqrt(np.maximum(s * s - 4.0 * det * det, 0.0))
        out = np.sqrt(0.5 * (s + disc))
    else:
        out = np.linalg.norm(a, 2, axis=(-2, -1))
    return float(out) if out.ndim == 0 else out


def min_singular(a):
    a = np.asarray(a, dtype=float)
    return np.linalg.svd(a, compute_uv=False)[..., -1]


def fixed_point(a, b):
    a = np.asarray(a, dtype=float)
    return np.linalg.solve(np.eye(a.shape[0]) - a, np.asarray(b, dtype=float))


def _readonly(x):
    x = np.array(x, dtype=float)
    x.flags.writeable = False
    return x


@dataclass(frozen=True, eq=False)
class AffineSystem:
    """A validated weighted IFS. Build through :func:`validate` or :func:`make_system`."""

    linear: np.ndarray  # (k, d, d)
    translation: np.ndarray  # (k, d)
    weights: np.ndarray  # (k,)

    @property
    def dim(self):
        return self.linear.shape[1]

    @property
    def size(self):
        return self.linear.shape[0]

    def __len__(self):
        return self.size

    @cached_property
    def norms(self):
        return np.atleast_1d(op_norm(self.linear))

    @property
    def max_norm(self):
        return float(np.max(self.norms))

    @cached_property
    def fixed_points(self):
        return np.array([fixed_point(a, b) for a, b in zip(self.linear, self.translation)])

    @cached_property
    def is_singleton(self):
        """True when every map shares one fixed point, so F is a single point."""
        fp = self.fixed_points
        scale = 1.0 + float(np.max(np.abs(fp)))
        return bool(np.max(np.abs(fp - fp[0])) <= 1e-12 * scale)

    def transposes(self):
        return np.transpose(self.linear, (0, 2, 1))

    def translated(self, v):
        """Conjugate every map by the translation ``x -> x + v``.

        The resulting self-affine measure is the image of this one under the
        same translation.
        """
        v = np.asarray(v, dtype=float)
        b = self.translation + v[None, :] - np.einsum("kij,j->ki", self.linear, v)
        return make_system(self.linear, b, self.weights)

    def to_dict(self):
        return {
            "dim": int(self.dim),
            "maps": [
                {"A": a.tolist(), "b": b.tolist(), "p": float(p)}
                for a, b, p in zip(self.linear, self.translation, self.weights)
            ],
        }


def validate(raw):
    """Check raw system data and return an :class:`AffineSystem`.

    ``raw`` follows the JSON system schema ``{"dim": d, "maps": [{"A", "b",
    "p"}, ...]}``. Every violated constraint is collected before raising
    :class:`ValidationError`.
    """
    violations = []
    if not isinstance(raw, dict) or "maps" not in raw:
        raise SystemFormatError("system must be an object with a 'maps' list")
    maps = raw["maps"]
    if not isinstance(maps, (list, tuple)) or len(maps) == 0:
        raise ValidationError([("DimensionMismatch", "system needs at least one map")])
    dim = raw.get("dim")

    mats, vecs, probs = [], [], []
    for j, m in enumerate(maps):
        try:
            a = np.array(m["A"], dtype=float)
            b = np.array(m["b"], dtype=float)
            p = float(m["p"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SystemFormatError(f"map {j}: cannot read A/b/p ({exc})") from None
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and math.isfinite(p)):
            violations.append(("DimensionMismatch", f"map {j}: non-finite entries"))
        mats.append(a)
        vecs.append(b)
        probs.append(p)

    d = dim if dim is not None else (mats[0].shape[0] if mats[0].ndim == 2 else None)
    if not isinstance(d, int) or d < 2:
        violations.append(("DimensionMismatch", f"dimension must be an integer >= 2, got {d!r}"))
        raise ValidationError(violations)
    shapes_ok = True
    for j, (a, b) in enumerate(zip(mats, vecs)):
        if a.shape != (d, d):
            violations.append(("DimensionMismatch", f"map {j}: A has shape {a.shape}, expected {(d, d)}"))
            shapes_ok = False
        if b.shape != (d,):
            violations.append(("DimensionMismatch", f"map {j}: b has shape {b.shape}, expected {(d,)}"))
            shapes_ok = False

    k = len(maps)
    for j, p in enumerate(probs):
        # a lone map carries all the mass; that degenerate system is accepted and flagged singleton
        if not (0.0 < p < 1.0 or (k == 1 and p == 1.0)):
            violations.append(("BadWeights", f"p_{j} = {p!r} is not in (0, 1)"))
    total = math.fsum(probs)
    if abs(total - 1.0) > WEIGHT_TOL:
        violations.append(("BadWeights", f"weights sum to {total!r}, not 1"))

    if shapes_ok:
        for j, a in enumerate(mats):
            if not np.all(np.isfinite(a)):
                continue
            n = op_norm(a)
            if n >= 1.0:
                violations.append(("NonContractive", f"||A_{j}|| = {n:.6g} >= 1"))
            if min_singular(a) < SINGULAR_TOL:
                violations.append(("Singular", f"A_{j} is numerically singular"))

    if violations:
        raise ValidationError(violations)
    return AffineSystem(_readonly(mats), _readonly(vecs), _readonly(probs))


def make_system(linear, translation, weights):
    raw = {
        "dim": int(np.shape(linear)[-1]),
        "maps": [{"A": a, "b": b, "p": p} for a, b, p in zip(linear, translation, weights)],
    }
    return validate(raw)


_TOP_KEYS = {"dim", "maps"}
_MAP_KEYS = {"A", "b", "p"}


def parse_system(text):
    """Parse a JSON system document. Unknown keys are rejected."""
    raw = json.loads(text)
    if not isinstance(raw, dict):
        raise SystemFormatError("top level must be a JSON object")
    extra = set(raw) - _TOP_KEYS
    if extra:
        raise SystemFormatError(f"unknown keys: {sorted(extra)}")
    if "maps" not in raw or "dim" not in raw:
        raise SystemFormatError("system needs 'dim' and 'maps'")
    for j, m in enumerate(raw["maps"]):
        if not isinstance(m, dict):
            raise SystemFormatError(f"map {j} must be an object")
        extra = set(m) - _MAP_KEYS
        if extra:
            raise SystemFormatError(f"map {j}: unknown keys {sorted(extra)}")
        missing = _MAP_KEYS - set(m)
        if missing:
            raise SystemFormatError(f"map {j}: missing keys {sorted(missing)}")
    return validate(raw)


def load_system(path):
    with open(path, encoding="utf-8") as fh:
        return parse_system(fh.read())


def dump_system(system):
    return json.dumps(system.to_dict(), indent=2) + "\n"


# --------------------------------------------------------------------------
# words


@dataclass(frozen=True, eq=False)
class Word:
    letters: tuple
    product: np.ndarray
    translation: np.ndarray
    weight: float

    def __len__(self):
        return len(self.letters)

    def __call__(self, x):
        return self.product @ np.asarray(x, dtype=float) + self.translation

    def then(self, other):
        """The word ``self . other``, i.e. the map ``f_self o f_other``."""
        return Word(
            self.letters + other.letters,
            self.product @ other.product,
            self.translation + self.product @ other.translation,
            self.weight * other.weight,
        )


def compose(system, letters):
    letters = tuple(int(j) for j in letters)
    d = system.dim
    a = np.eye(d)
    b = np.zeros(d)
    w = 1.0
    for j in letters:
        if not 0 <= j < system.size:
            raise IndexOutOfRange(f"letter {j} outside alphabet of size {system.size}")
        b = b + a @ system.translation[j]
        a = a @ system.linear[j]
        w *= float(system.weights[j])
    return Word(letters, a, b, w)


@dataclass(frozen=True, eq=False)
class WordFamily:
    """A prefix-free family of words stored column-wise.

    ``letters`` is padded with -1 past each word's length. Rows are sorted
    lexicographically by letter sequence.
    """

    letters: np.ndarray  # (M, L) int
    lengths: np.ndarray  # (M,)
    products: np.ndarray  # (M, d, d)
    translations: np.ndarray  # (M, d)
    weights: np.ndarray  # (M,)
    nodes: int  # tree nodes visited

    def __len__(self):
        return len(self.weights)

    def letter_tuple(self, i):
        return tuple(int(j) for j in self.letters[i, : self.lengths[i]])

    @cached_property
    def words(self):
        return tuple(
            Word(self.letter_tuple(i), self.products[i], self.translations[i], float(self.weights[i]))
            for i in range(len(self))
        )


@dataclass(frozen=True, eq=False)
class StoppingSet(WordFamily):
    """``W_t(z)``: first crossing words of ``-log|A_w^T z| > t``.

    ``cocycles[i]`` is ``log|A_w^T z|`` accumulated along the tree and
    ``directions[i]`` the unit vector ``A_w^T z / |A_w^T z|``.
    """

    anchor: np.ndarray = None
    threshold: float = 0.0
    cocycles: np.ndarray = None
    directions: np.ndarray = None


def _grow(system, is_leaf, anchor=None, cap=DEFAULT_NODE_CAP):
    """Breadth-first expansion of the word tree until every branch is a leaf.

    ``is_leaf(products, cocycles, level)`` decides leaves among the children
    at depth ``level``. The cocycle ``log|A_w^T anchor|`` is tracked incrementally when an
    anchor is given.
    """
    k, d = system.size, system.dim
    A, b, p = system.linear, system.translation, system.weights
    At = system.transposes()

    prods = np.eye(d)[None]
    trans = np.zeros((1, d))
    wts = np.ones(1)
    lets = np.zeros((1, 0), dtype=np.intp)
    if anchor is not None:
        u = np.asarray(anchor, dtype=float)[None]
        s = np.zeros(1)
    nodes = 1
    level = 0
    out = []
    while len(wts):
        level += 1
        m = len(wts)
        nodes += m * k
        if nodes > cap:
            raise BudgetExceeded(f"word tree exceeded {cap} nodes")
        c_prods = np.einsum("mij,kjl->mkil", prods, A).reshape(m * k, d, d)
        c_trans = (trans[:, None, :] + np.einsum("mij,kj->mki", prods, b)).reshape(m * k, d)
        c_wts = (wts[:, None] * p[None, :]).ravel()
        c_lets = np.concatenate(
            [np.repeat(lets, k, axis=0), np.tile(np.arange(k), m)[:, None]], axis=1
        )
        if anchor is not None:
            v = np.einsum("kij,mj->mki", At, u).reshape(m * k, d)
            nv = np.sqrt(np.einsum("ni,ni->n", v, v))
            c_s = np.repeat(s, k) + np.log(nv)
            c_u = v / nv[:, None]
        else:
            c_s = c_u = None
        leaf = is_leaf(c_prods, c_s, level)
        out.append(
            (c_lets[leaf], c_prods[leaf], c_trans[leaf], c_wts[leaf],
             None if c_s is None else c_s[leaf], None if c_u is None else c_u[leaf])
        )
        keep = ~leaf
        prods, trans, wts, lets = c_prods[keep], c_trans[keep], c_wts[keep], c_lets[keep]
        if anchor is not None:
            u, s = c_u[keep], c_s[keep]

    depth = max(block[0].shape[1] for block in out)
    n = sum(len(block[3]) for block in out)
    letters = np.full((n, depth), -1, dtype=np.intp)
    lengths = np.empty(n, dtype=np.intp)
    row = 0
    for block in out:
        cnt, ln = block[0].shape
        letters[row:row + cnt, :ln] = block[0]
        lengths[row:row + cnt] = ln
        row += cnt
    order = np.lexsort(letters.T[::-1]) if depth else np.arange(n)

    def cat(i, shape):
        parts = [block[i] for block in out if block[i] is not None]
        return np.concatenate(parts)[order] if parts else np.empty(shape)

    return dict(
        letters=letters[order],
        lengths=lengths[order],
        products=cat(1, (0, d, d)),
        translations=cat(2, (0, d)),
        weights=cat(3, (0,)),
        cocycles=cat(4, (0,)) if anchor is not None else None,
        directions=cat(5, (0, d)) if anchor is not None else None,
        nodes=nodes,
    )


def all_words(system, length):
    """Every word of the given length, in lexicographic order."""
    if length < 1:
        raise ValueError("length must be >= 1")
    res = _grow(system, lambda prods, _s, level: np.full(len(prods), level >= length), cap=np.inf)
    res.pop("cocycles")
    res.pop("directions")
    return WordFamily(**res)


def norm_family(system, r, cap=DEFAULT_NODE_CAP):
    """Words with ``||A_w|| < r <= ||A_{w minus last letter}||``."""
    if not 0.0 < r <= 1.0:
        raise ValueError(f"r must lie in (0, 1], got {r}")
    res = _grow(system, lambda prods, _s, _l: np.atleast_1d(op_norm(prods)) < r, cap=cap)
    res.pop("cocycles")
    res.pop("directions")
    return WordFamily(**res)


def stopping_set(system, z, t, cap=DEFAULT_NODE_CAP):
    """``W_t(z)``: stop each branch at the first ``n`` with ``-log|A_w^T z| > t``."""
    if t < 0:
        raise ValueError("threshold t must be >= 0")
    z = np.asarray(z, dtype=float)
    nz = np.linalg.norm(z)
    if z.shape != (system.dim,) or nz == 0:
        raise ValueError("anchor must be a nonzero d-vector")
    z = z / nz
    res = _grow(system, lambda _p, s, _l: -s > t, anchor=z, cap=cap)
    return StoppingSet(anchor=z, threshold=float(t), **res)


def attractor_ball(system, center=None):
    """A ball ``B(c, R)`` with ``f_j(B) subset B`` for every map; it contains F.

    The default center is the fixed point of the first map.
    """
    c = system.fixed_points[0] if center is None else np.asarray(center, dtype=float)
    resid = system.translation - (c[None, :] - np.einsum("kij,j->ki", system.linear, c))
    radius = float(np.max(np.linalg.norm(resid, axis=1))) / (1.0 - system.max_norm)
    return c, radius
