"""Configuration loading and the stage runners behind the command line.

A config is a JSON object. The system is given inline (``"system": {...}``),
as a path (``"system": "file.json"``, relative to the config) or by name
(``"preset": "proximal_pair"``). Optional sections ``fourier``, ``frostman``,
``sweep``, ``walk``, ``renewal``, ``transfer`` and ``props`` tune or enable
the stages. All outputs are UTF-8 with LF line endings and carry no
timestamps, so equal inputs give equal bytes.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import decay, fourier, renewal, semigroup, sphere, systems, transfer
from .errors import AffourierError, Inconclusive
from .ifs import validate


class ConfigError(AffourierError):
    pass


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, NaN/inf to None, complex to [re, im]."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_config(path):
    """Parse a config file; ``json.JSONDecodeError`` carries line and column."""
    text = Path(path).read_text(encoding="utf-8")
    cfg = json.loads(text)
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    cfg.setdefault("_base", str(Path(path).resolve().parent))
    return cfg


def load_config_system(cfg):
    """Raw system data from a config (not yet validated)."""
    if "preset" in cfg:
        name = cfg["preset"]
        if name not in systems.CATALOG:
            raise ConfigError(f"unknown preset {name!r}; known: {sorted(systems.CATALOG)}")
        return systems.CATALOG[name]().to_dict()
    raw = cfg.get("system")
    if raw is None and "maps" in cfg:
        return {k: cfg[k] for k in ("dim", "maps") if k in cfg}
    if isinstance(raw, str):
        p = Path(raw)
        if not p.is_absolute():
            p = Path(cfg.get("_base", ".")) / p
        return json.loads(p.read_text(encoding="utf-8"))
    if isinstance(raw, dict):
        return raw
    raise ConfigError("config needs 'system', 'preset' or top-level 'maps'")


def _vec(v):
    return np.asarray(v, dtype=float)


# --------------------------------------------------------------------------
# stages


def stage_validate(system):
    return {
        "dim": system.dim,
        "maps": system.size,
        "norms": system.norms,
        "singleton": system.is_singleton,
        "barycenter": fourier.barycenter(system),
    }


def stage_fourier(system, cfg, out, seed, method=None, budget=None):
    sec = cfg.get("fourier", {})
    freqs = sec.get("frequencies", [[1.0] + [0.0] * (system.dim - 1)])
    method = method or sec.get("method", "recursive")
    tol = float(sec.get("tol", 1e-6))
    rows = []
    pool = None
    for xi in freqs:
        xi = _vec(xi)
        if method == "recursive":
            cap = int(budget) if budget else fourier.DEFAULT_RECURSION_CAP
            v = fourier.fourier_recursive(system, xi, tol, cap)
        else:
            if pool is None:
                pool = fourier.chaos_sample(system, int(budget or sec.get("samples", 100_000)), seed)
            v = fourier.fourier_mc(pool, xi)
        rows.append((xi, v.value, v.error, v.method))
    if out is not None:
        with open(out / "fourier.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join([f"xi_{i + 1}" for i in range(system.dim)]
                              + ["re", "im", "abs", "stderr_or_certified_bound", "method"]) + "\n")
            for xi, v, e, m in rows:
                fh.write(",".join(repr(float(c)) for c in xi) + f",{v.real!r},{v.imag!r},{abs(v)!r},{float(e)!r},{m}\n")
    return {"points": [{"xi": xi, "value": v, "abs": abs(v), "error": e, "method": m} for xi, v, e, m in rows]}


def stage_frostman(system, cfg, seed, pool=None):
    sec = cfg.get("frostman", {})
    n = int(sec.get("samples", 200_000))
    radii = _vec(sec.get("radii", [2.0**-k for k in range(3, 10)]))
    if pool is None:
        pool = fourier.chaos_sample(system, n, seed)
    est = fourier.frostman(system, pool, radii, n_centers=int(sec.get("centers", 200)))
    return {"s1": est.s1, "s2_hat": est.s2_hat, "C1": est.C1, "C2": est.C2,
            "radii": est.radii, "sup_mass": est.sup_mass}


def stage_props(system, cfg, seed):
    sec = cfg.get("props", {})
    return semigroup.property_report(system, int(sec.get("max_word_len", 8)),
                                     float(sec.get("gap_threshold", 0.05)), seed)


def stage_sweep(system, cfg, out, seed, method=None, budget=None, verdicts=None):
    sec = cfg.get("sweep", {})
    dirs = decay.default_directions(system.dim, int(sec.get("n_directions", 64)))
    plan = decay.SweepPlan(
        float(sec.get("base", 2.0)) ** np.arange(int(sec.get("lo", 4)), int(sec.get("hi", 12)) + 1, dtype=float),
        dirs,
        method={"mc": "mc", "montecarlo": "mc"}.get(method or sec.get("method", "recursive"), "recursive"),
        tol=float(sec.get("tol", 1e-3)),
        budget=int(budget or sec.get("budget", 5 * 10**7)),
        mc_samples=int(sec.get("mc_samples", 10**6)),
        seed=seed,
    )
    rep = decay.decay_sweep(system, plan, verdicts)
    if out is not None:
        rep.write_points_csv(out / "sweep_points.csv")
        rep.write_table_csv(out / "sweep_table.csv")
    res = rep.summary()
    res["sup_abs"] = rep.sup_abs
    res["magnitudes"] = rep.magnitudes
    return res


def stage_walk(system, cfg, out, seed):
    sec = cfg.get("walk", {})
    law = sphere.WalkLaw.from_system(system)
    lyap = sphere.lyapunov(law, int(sec.get("lyapunov_steps", 2000)), int(sec.get("trajectories", 100)), seed)
    res = {"lyapunov": lyap.value, "lyapunov_half_width": lyap.half_width}
    try:
        cone = sphere.detect_cone(law, seed=seed)
    except Inconclusive as exc:
        res["cone"] = exc.report.to_dict() if exc.report else {"status": "inconclusive"}
        return res, law, lyap, None
    x0 = _vec(sec.get("x0", [1.0] + [0.0] * (system.dim - 1)))
    meas = sphere.stationary(law, x0, int(sec.get("burn_in", 200)), int(sec.get("n_atoms", 20_000)), seed, cone=cone)
    res["cone"] = cone.to_dict()
    res["stationary"] = meas.provenance
    try:
        g = sphere.guivarch_check(meas, int(sec.get("hyperplanes", 50)), seed=seed)
        res["guivarch"] = {"alpha": g.alpha, "C": g.C, "radii": g.radii, "sup_mass": g.sup_mass,
                           "flagged": g.flagged, "reason": g.reason}
    except AffourierError as exc:
        res["guivarch"] = {"error": str(exc)}
    if out is not None:
        meas.write(out / "stationary.csv", out / "stationary.json")
    return res, law, lyap, meas


def _test_function(desc, dim):
    kind = desc.get("kind", "bump")
    if kind == "constant":
        return renewal.constant(float(desc.get("value", 1.0)))
    if kind == "lattice_wave":
        return renewal.lattice_wave(float(desc["period"]), float(desc.get("phase", 0.0)))
    if kind == "bump":
        direction = desc.get("direction")
        return renewal.bump(float(desc.get("center", -0.4)), float(desc.get("width", 0.5)),
                            None if direction is None else sphere.unit(direction), float(desc.get("tilt", 0.5)))
    raise ConfigError(f"unknown test function kind {kind!r}")


def stage_renewal(system, cfg, out, seed, law=None, lyap=None, measure=None):
    sec = cfg.get("renewal", {})
    law = law or sphere.WalkLaw.from_system(system)
    x = _vec(sec.get("x", [1.0] + [0.0] * (system.dim - 1)))
    f = _test_function(sec.get("function", {}), system.dim)
    t_grid = _vec(sec.get("t_grid", [2.0, 5.0, 10.0, 20.0]))
    if lyap is None:
        lyap = sphere.lyapunov(law, 2000, 100, seed)
    if measure is None:
        measure = sphere.stationary(law, x, n_atoms=int(sec.get("n_atoms", 20_000)), seed=seed)
    cmp_ = renewal.renewal_sweep(law, f, x, t_grid, int(sec.get("samples", 100_000)), seed,
                                 measure=measure, lyap=lyap)
    if out is not None:
        cmp_.write_csv(out / "renewal.csv")
    return {"limit": cmp_.limit_value, "limit_stderr": cmp_.limit_stderr, "max_residual": cmp_.oscillation,
            "epsilon1_hat": cmp_.epsilon1_hat, "resolution_gap": cmp_.resolution_gap, "notes": cmp_.notes}


def stage_transfer(system, cfg, out, seed):
    sec = cfg.get("transfer", {})
    law = sphere.WalkLaw.from_system(system)
    grid = transfer.CircleGrid(int(sec.get("n_points", 2048)))
    b_grid = _vec(sec.get("b_grid", [0.0, 5.0, 10.0, 20.0, 50.0]))
    scan = transfer.spectral_scan(law, float(sec.get("a", 0.0)), b_grid, grid, int(sec.get("n_iter", 400)))
    if out is not None:
        scan.write_csv(out / "transfer.csv")
    return {"signature": scan.signature, "leading_modulus": scan.leading_modulus, "flags": scan.flags}


# --------------------------------------------------------------------------


def run_report(config, out, seed=None, method=None, budget=None):
    """Run every configured stage; returns ``(exit_code, summary)``.

    Validation failure is fatal (exit 1). Other stage failures are recorded
    under ``errors`` and make the exit code 1 while later stages still run.
    """
    cfg = read_config(config) if not isinstance(config, dict) else dict(config)
    seed = int(cfg.get("seed", 0) if seed is None else seed)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"seed": seed, "stages": {}, "errors": {}, "warnings": []}
    try:
        system = validate(load_config_system(cfg))
    except AffourierError as exc:
        summary["errors"]["validate"] = str(exc)
        write_json(out / "summary.json", summary)
        return 1, summary
    st = summary["stages"]
    st["validate"] = stage_validate(system)

    def guarded(name, fn):
        try:
            return fn()
        except (AffourierError, ValueError, np.linalg.LinAlgError) as exc:
            summary["errors"][name] = f"{type(exc).__name__}: {exc}"
            return None

    props = guarded("props", lambda: stage_props(system, cfg, seed))
    st["props"] = props
    if props is not None:
        write_json(out / "props.json", props)
    st["frostman"] = guarded("frostman", lambda: stage_frostman(system, cfg, seed))
    if "fourier" in cfg:
        st["fourier"] = guarded("fourier", lambda: stage_fourier(system, cfg, out, seed, method, budget))
    verdicts = props["verdicts"] if props else None
    sweep = guarded("sweep", lambda: stage_sweep(system, cfg, out, seed, method, budget, verdicts))
    st["sweep"] = sweep
    if sweep:
        summary["warnings"] += sweep["warnings"]
    walk_state = (None, None, None)
    if "walk" in cfg or "renewal" in cfg:
        w = guarded("walk", lambda: stage_walk(system, cfg, out, seed))
        if w is not None:
            st["walk"], *walk_state = w
    if "renewal" in cfg:
        law, lyap, meas = walk_state
        st["renewal"] = guarded("renewal", lambda: stage_renewal(system, cfg, out, seed, law, lyap, meas))
    if "transfer" in cfg:
        st["transfer"] = guarded("transfer", lambda: stage_transfer(system, cfg, out, seed))
    write_json(out / "summary.json", summary)
    return (1 if summary["errors"] else 0), summary
