"""Finite witnesses for proximality and total irreducibility of the linear parts.

None of these verdicts is a proof. ``witnessed`` means a concrete product
was found (proximality) or that no obstruction turned up within the search
budget (irreducibility); every verdict records the budget it used.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _rng
from .ifs import compose

WITNESS_NOTE = "no obstruction found within budget; not a proof"
CRITERION_D23 = ("for d = 2, 3 power decay follows from irreducibility of the linear group "
                 "together with a non-compact image in PGL(d, R)")
DISCLAIMER = ("Zariski closures, R-splitness and connectedness are not computed; "
              "the verdicts below are finite heuristic searches")


@dataclass
class PropertyVerdict:
    property: str
    verdict: str  # witnessed | refuted | inconclusive
    witness: dict = field(default_factory=dict)
    budget: dict = field(default_factory=dict)
    note: str = ""

    def to_dict(self):
        return _jsonable(asdict(self))

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _products(mats, max_len, cap):
    """All words up to ``max_len`` in shortlex order with their products, stopping at ``cap``."""
    k = len(mats)
    words, prods = [], []
    level_w, level_p = [()], [np.eye(mats.shape[1])]
    for _ in range(max_len):
        nw, npr = [], []
        for w, p in zip(level_w, level_p):
            for j in range(k):
                nw.append(w + (j,))
                npr.append(p @ mats[j])
        words += nw
        prods += npr
        if len(words) >= cap:
            return words[:cap], np.array(prods[:cap]), True
        level_w, level_p = nw, npr
    return words, np.array(prods), False


def is_conformal(mats, tol=1e-12):
    """Every matrix is a positive scalar times an orthogonal matrix."""
    for a in mats:
        g = a.T @ a
        c = np.trace(g) / len(g)
        if np.max(np.abs(g - c * np.eye(len(g)))) > tol * max(c, 1e-300):
            return False
    return True


def _sorted_eigs(prods):
    vals = np.linalg.eigvals(prods)
    order = np.argsort(-np.abs(vals), axis=1, kind="stable")
    return np.take_along_axis(vals, order, axis=1)


def proximality_witness(system, max_word_len=8, gap_threshold=0.05, cap=200_000):
    """Shortest (then lexicographically first) word whose product has a dominant real simple eigenvalue."""
    mats = system.linear
    budget = {"max_word_len": max_word_len, "cap": cap}
    if is_conformal(mats):
        return PropertyVerdict("proximal", "refuted",
                               {"reason": "every generator is scalar times orthogonal; such products "
                                          "have all eigenvalues of equal modulus"}, budget)
    words, prods, capped = _products(mats, max_word_len, cap)
    ev = _sorted_eigs(prods)
    m1, m2 = np.abs(ev[:, 0]), np.abs(ev[:, 1])
    ratio = m1 / np.maximum(m2, 1e-300)
    ok = (ratio >= 1 + gap_threshold) & (np.abs(ev[:, 0].imag) <= 1e-12 * m1)
    budget["products_examined"] = len(words)
    budget["capped"] = capped
    if not ok.any():
        return PropertyVerdict("proximal", "inconclusive", {"best_ratio": float(ratio.max())}, budget,
                               "no product with the required eigenvalue gap")
    i = int(np.argmax(ok))
    return PropertyVerdict("proximal", "witnessed", {
        "word": list(words[i]),
        "lambda1": float(ev[i, 0].real),
        "lambda2_modulus": float(m2[i]),
        "gap_ratio": float(ratio[i]),
    }, budget)


def gap_ratio_of_word(system, letters):
    """``|lambda_1| / |lambda_2|`` of a word's product, multiplied from scratch."""
    ev = _sorted_eigs(compose(system, letters).product[None])[0]
    return float(abs(ev[0]) / abs(ev[1]))


# --------------------------------------------------------------------------
# invariant subspaces


def _basis(vectors):
    """Orthonormal basis of the span of the columns."""
    u, s, _ = np.linalg.svd(np.atleast_2d(vectors), full_matrices=False)
    return u[:, : int(np.sum(s > 1e-12 * s[0]))]


def _proj(b):
    return b @ b.T


def invariance_defect(mats, b):
    """``max_j ||(Id - P) A_j B||`` for an orthonormal basis ``B``."""
    q = np.eye(len(b)) - _proj(b)
    return float(max(np.linalg.norm(q @ a @ b, 2) for a in mats))


def _candidates(mats, prods, n_random, rng):
    """Lines and planes from eigen-data of products, plus axes and random lines."""
    d = mats.shape[1]
    out = []
    for p in prods:
        vals, vecs = np.linalg.eig(p)
        for k in range(d):
            v = vecs[:, k]
            if abs(vals[k].imag) <= 1e-12 * max(abs(vals[k]), 1e-300):
                out.append(_basis(np.real(v)[:, None]))
            elif d == 3 and vals[k].imag > 0:
                out.append(_basis(np.stack([v.real, v.imag], axis=1)))
        if d == 3:
            tv, tvecs = np.linalg.eig(p.T)
            for k in range(d):
                if abs(tv[k].imag) <= 1e-12 * max(abs(tv[k]), 1e-300):
                    n = np.real(tvecs[:, k])
                    out.append(_basis(np.linalg.svd(n[None])[2][1:].T))
    for i in range(d):
        out.append(np.eye(d)[:, [i]])
    for _ in range(n_random):
        out.append(_basis(rng.normal(size=(d, 1))))
    return out


def finite_orbit(mats, b, cap=64, tol=1e-9):
    """Orbit of the subspace spanned by ``b`` under the generators, or None if it exceeds ``cap``."""
    d = len(b)
    orbit = [b]
    projs = np.empty((cap + 1, d, d))
    projs[0] = _proj(b)
    frontier = [b]
    while frontier:
        nxt = []
        for s in frontier:
            for a in mats:
                img = _basis(a @ s)
                pj = _proj(img)
                if np.min(np.max(np.abs(projs[: len(orbit)] - pj), axis=(1, 2))) > tol:
                    if len(orbit) == cap:
                        return None
                    projs[len(orbit)] = pj
                    orbit.append(img)
                    nxt.append(img)
        frontier = nxt
    return orbit


def irreducibility_test(system, max_word_len=6, n_candidates=200, seed=0, orbit_cap=64, tol=1e-9):
    """Search for an invariant subspace or a finite invariant union of subspaces."""
    d = system.dim
    budget = {"max_word_len": max_word_len, "n_candidates": n_candidates, "orbit_cap": orbit_cap}
    if d not in (2, 3):
        return PropertyVerdict("totally_irreducible", "inconclusive", {}, budget,
                               f"dimension {d} is outside the supported range 2..3")
    mats = system.linear
    _, prods, _ = _products(mats, max_word_len, n_candidates)
    rng = _rng.stream(seed, _rng.TAG_PROPS)
    cands = _candidates(mats, prods, max(8, n_candidates // 10), rng)
    budget["candidates_examined"] = len(cands)
    for b in cands:
        defect = invariance_defect(mats, b)
        if defect <= tol:
            return PropertyVerdict("totally_irreducible", "refuted", {
                "kind": "invariant subspace",
                "basis": b.T,
                "defect": defect,
            }, budget)
    for b in cands:
        orbit = finite_orbit(mats, b, orbit_cap, tol)
        if orbit is not None:
            return PropertyVerdict("totally_irreducible", "refuted", {
                "kind": "finite invariant union",
                "orbit_size": len(orbit),
                "bases": [o.T for o in orbit],
            }, budget)
    return PropertyVerdict("totally_irreducible", "witnessed", {"dispersed": len(cands)}, budget, WITNESS_NOTE)


def contracting_verdict(system):
    norms = system.norms
    v = "witnessed" if np.all(norms < 1) else "refuted"
    return PropertyVerdict("contracting", v, {"norms": norms, "max_norm": float(norms.max())})


def noncompact_verdict(system, max_word_len=6, cap=5000):
    """Image in PGL is unbounded if some product has eigenvalues of different moduli."""
    mats = system.linear
    if is_conformal(mats):
        return PropertyVerdict("noncompact", "refuted", {"reason": "conformal generators"})
    words, prods, _ = _products(mats, max_word_len, cap)
    ev = np.abs(_sorted_eigs(prods))
    spread = ev[:, 0] / np.maximum(ev[:, -1], 1e-300)
    i = int(np.argmax(spread))
    if spread[i] > 1 + 1e-9:
        return PropertyVerdict("noncompact", "witnessed", {"word": list(words[i]), "modulus_ratio": float(spread[i])})
    return PropertyVerdict("noncompact", "inconclusive", {"best_ratio": float(spread[i])},
                           {"max_word_len": max_word_len, "cap": cap})


def property_report(system, max_word_len=8, gap_threshold=0.05, seed=0):
    """All verdicts plus the low-dimensional criterion summary."""
    prox = proximality_witness(system, max_word_len, gap_threshold)
    irr = irreducibility_test(system, min(max_word_len, 6), seed=seed)
    nc = noncompact_verdict(system)
    out = {
        "disclaimer": DISCLAIMER,
        "verdicts": {
            "contracting": contracting_verdict(system).to_dict(),
            "proximal": prox.to_dict(),
            "totally_irreducible": irr.to_dict(),
            "noncompact": nc.to_dict(),
        },
    }
    if system.dim in (2, 3):
        met = irr.verdict == "witnessed" and nc.verdict == "witnessed"
        failed = irr.verdict == "refuted" or nc.verdict == "refuted"
        out["criterion_d23"] = {
            "statement": CRITERION_D23,
            "status": "met (heuristic)" if met else ("not met" if failed else "undetermined"),
        }
    return out
