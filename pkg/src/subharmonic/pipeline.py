"""Analysis pipeline behind the command-line front end.

Each ``run_*`` function takes a resolved :class:`RunConfig` and an output
directory, writes its artifacts and returns an exit code.
"""

import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import DomainError, NumericalError
from .floquet import classify
from .melnikov import CASE_A, CASE_B, existence_report, find_zero, zero_map, classify_case
from .odeint import Trajectory, format_float, integrate
from .orbit import PeriodicOrbitRecord, refine_periodic_orbit, returns_csv, verify_orbit
from .systems import ActionAnglePoint

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_INCONCLUSIVE = 2
EXIT_USAGE = 64

GRID_SAMPLES = 64
GRID_SPREAD = 0.2

# Failures that count as numerical (exit 1) rather than programming errors.
NUMERICAL_ERRORS = (NumericalError, DomainError, np.linalg.LinAlgError, FloatingPointError)


def diagnostic(message):
    print(f"subharmonic: {message}", file=sys.stderr)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_json(path, payload, cfg, model=None, epsilon=None):
    """Write ``payload`` with the resolved config and tool version embedded."""
    doc = dict(payload)
    doc["tool"] = {"name": "subharmonic", "version": __version__}
    run_cfg = cfg.to_dict()
    if epsilon is not None:
        run_cfg["epsilon"] = [float(epsilon)]
    doc["config"] = run_cfg
    if model is not None:
        doc["system"] = model.describe()
    text = json.dumps(_clean(doc), sort_keys=True, indent=2, allow_nan=False)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def grid_seed(model, cfg, res):
    """Deterministic best-of-grid starting point around the reference level."""
    rng = np.random.default_rng(cfg.grid_seed)
    ref = np.asarray(model.reference_level, dtype=float)
    best, best_norm = None, np.inf
    for _ in range(GRID_SAMPLES):
        theta = rng.uniform(0.0, model.T)
        I = ref * (1.0 + GRID_SPREAD * rng.uniform(-1.0, 1.0, ref.size))
        if not model.level_in_domain(I):
            continue
        z = np.concatenate([[theta], I])
        try:
            F = zero_map(model, z, res, classify_case(model, I, cfg.degeneracy_tol))
        except NUMERICAL_ERRORS:
            continue
        norm = float(np.max(np.abs(F)))
        if norm < best_norm:
            best, best_norm = z, norm
    if best is None:
        raise DomainError("grid seeding found no admissible starting point")
    return ActionAnglePoint.from_z(best)


def starting_point(model, cfg, res):
    if cfg.seed is not None:
        return ActionAnglePoint.from_z(cfg.seed), "config"
    return grid_seed(model, cfg, res), "grid"


def _quad_tol(cfg):
    return {"abs_tol": cfg.quad_tol, "rel_tol": max(cfg.quad_tol * 0.1, 1e-14)}


def melnikov_stage(model, cfg, res):
    """Zero search followed by the existence report.

    If the search fails the report is evaluated at the starting point so
    the verdict and reasons are still recorded.
    """
    start, source = starting_point(model, cfg, res)
    notes = {"seed_source": source, "seed": start.to_dict(), "grid_seed": cfg.grid_seed}
    point = start
    try:
        point, info = find_zero(model, start, res, tol=min(cfg.zero_tol, 1e-8),
                                return_info=True, **_quad_tol(cfg))
        notes["zero_search"] = {"converged": True, **info}
    except NUMERICAL_ERRORS as err:
        diagnostic(f"zero search failed ({err}); reporting at the starting point")
        notes["zero_search"] = {"converged": False, "error": str(err)}
    report = existence_report(model, point, res, zero_tol=cfg.zero_tol,
                              degeneracy_tol=cfg.degeneracy_tol, **_quad_tol(cfg))
    return report, notes


def refine_stage(model, cfg, eps, res, point):
    """Refined periodic orbit (or the unrefined seed on failure)."""
    seed = np.asarray(cfg.x0, float) if cfg.x0 is not None else model.parametrization(
        np.asarray(point.I), point.theta0)
    try:
        return refine_periodic_orbit(model, seed, eps, res, tol=cfg.newton_tol,
                                     rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol,
                                     predicted_seed=seed), None
    except NUMERICAL_ERRORS as err:
        diagnostic(f"periodic orbit refinement failed: {err}")
        return PeriodicOrbitRecord(float(eps), seed.copy(), res.window(model.T), float("nan"),
                                   seed.copy(), converged=False), str(err)


def verify_stage(model, cfg, record, cycles):
    """Return distances; on integration failure the completed prefix and the error."""
    try:
        return verify_orbit(model, record, cycles, cfg.rel_tol, cfg.abs_tol), None
    except NUMERICAL_ERRORS as err:
        diagnostic(f"verification stopped: {err}")
        return list(getattr(err, "completed", [])), str(err)


def trajectory_stage(model, cfg, x0, eps, t_final, samples):
    """Dense samples of the perturbed flow; stops at the first failure."""
    field_ = model.field(eps)
    x0 = np.asarray(x0, dtype=float)
    chunks = max(1, samples // cfg.samples_per_cycle)
    edges = np.linspace(0.0, t_final, chunks + 1)
    times, states = [0.0], [x0]
    x = x0
    try:
        for a, b in zip(edges[:-1], edges[1:]):
            t_eval = np.linspace(a, b, cfg.samples_per_cycle + 1)[1:]
            traj = integrate(field_, x, a, b, cfg.rel_tol, cfg.abs_tol, t_eval=t_eval,
                             domain=model.field_domain)
            times.extend(traj.times)
            states.extend(traj.states)
            x = traj.final_state
    except NUMERICAL_ERRORS as err:
        diagnostic(f"trajectory stopped at t={getattr(err, 't', float('nan'))}: {err}")
        return Trajectory(np.array(times), np.array(states)), str(err)
    return Trajectory(np.array(times), np.array(states)), None


def stability_stage(model, record):
    path = "refined" if record.converged else "eqAt"
    try:
        return classify(model, record, path=path), None
    except NUMERICAL_ERRORS as err:
        diagnostic(f"stability classification failed: {err}")
        return None, str(err)


def run_analyze(cfg, eps, out_dir):
    """Full pipeline for one epsilon; returns the exit code."""
    os.makedirs(out_dir, exist_ok=True)
    model = cfg.build_model()
    res = cfg.resonance_spec()
    errors = []

    try:
        report, notes = melnikov_stage(model, cfg, res)
    except NUMERICAL_ERRORS as err:
        diagnostic(f"Melnikov analysis failed: {err}")
        return EXIT_NUMERICAL
    write_json(os.path.join(out_dir, "melnikov.json"), {**report.to_dict(), "search": notes},
               cfg, model, eps)

    record, err = refine_stage(model, cfg, eps, res, report.point)
    if err:
        errors.append(f"refinement: {err}")
    distances, err = verify_stage(model, cfg, record, cfg.cycles)
    if err:
        errors.append(f"verification: {err}")
    record.cycles_verified = len(distances)
    record.per_cycle_return_distance = distances
    returns_csv(distances, os.path.join(out_dir, "returns.csv"))

    seed_record = PeriodicOrbitRecord(float(eps), record.predicted_seed, record.period,
                                      float("nan"), record.predicted_seed, converged=False)
    seed_distances, _ = verify_stage(model, cfg, seed_record, cfg.cycles)
    returns_csv(seed_distances, os.path.join(out_dir, "returns_seed.csv"))

    orbit_doc = record.to_dict()
    orbit_doc["within_seed_bound"] = record.within_seed_bound(cfg.seed_bound)
    orbit_doc["seed_offset"] = record.seed_offset
    orbit_doc["errors"] = list(errors)
    write_json(os.path.join(out_dir, "orbit.json"), orbit_doc, cfg, model, eps)

    stability, err = stability_stage(model, record)
    if err:
        errors.append(f"stability: {err}")
        write_json(os.path.join(out_dir, "stability.json"), {"error": err}, cfg, model, eps)
    else:
        write_json(os.path.join(out_dir, "stability.json"), stability.to_dict(), cfg, model, eps)

    t_final = cfg.t_final if cfg.t_final is not None else cfg.cycles * record.period
    traj, err = trajectory_stage(model, cfg, record.x0_star, eps, t_final,
                                 cfg.cycles * cfg.samples_per_cycle)
    if err:
        errors.append(f"trajectory: {err}")
    traj.to_csv(os.path.join(out_dir, "trajectory.csv"))

    if errors:
        return EXIT_NUMERICAL
    return EXIT_OK if report.verdict in (CASE_A, CASE_B) else EXIT_INCONCLUSIVE


def run_find_zero(cfg, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    model = cfg.build_model()
    res = cfg.resonance_spec()
    report, notes = melnikov_stage(model, cfg, res)
    write_json(os.path.join(out_dir, "melnikov.json"), {**report.to_dict(), "search": notes},
               cfg, model)
    if not notes["zero_search"]["converged"]:
        return EXIT_NUMERICAL
    return EXIT_OK if report.verdict in (CASE_A, CASE_B) else EXIT_INCONCLUSIVE


def load_record(path):
    with open(path, encoding="utf-8") as fh:
        return PeriodicOrbitRecord.from_dict(json.load(fh))


def run_verify(cfg, record, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    model = cfg.build_model()
    distances, err = verify_stage(model, cfg, record, cfg.cycles)
    returns_csv(distances, os.path.join(out_dir, "returns.csv"))
    record.cycles_verified = len(distances)
    record.per_cycle_return_distance = distances
    write_json(os.path.join(out_dir, "orbit.json"), record.to_dict(), cfg, model,
               record.epsilon)
    return EXIT_NUMERICAL if err else EXIT_OK


def run_floquet(cfg, record, out_dir, path):
    os.makedirs(out_dir, exist_ok=True)
    model = cfg.build_model()
    report = classify(model, record, path=path)
    write_json(os.path.join(out_dir, "stability.json"), report.to_dict(), cfg, model,
               record.epsilon)
    return EXIT_INCONCLUSIVE if report.verdict == "inconclusive" else EXIT_OK


def run_simulate(cfg, eps, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    model = cfg.build_model()
    if cfg.x0 is not None:
        x0 = np.asarray(cfg.x0, dtype=float)
    else:
        point = (ActionAnglePoint.from_z(cfg.seed) if cfg.seed is not None
                 else ActionAnglePoint(model.reference_level, 0.0))
        x0 = model.parametrization(np.asarray(point.I), point.theta0)
    L = cfg.resonance_spec().window(model.T)
    t_final = cfg.t_final if cfg.t_final is not None else cfg.cycles * L
    samples = max(1, int(round(t_final / L * cfg.samples_per_cycle)))
    traj, err = trajectory_stage(model, cfg, x0, eps, t_final, samples)
    traj.to_csv(os.path.join(out_dir, "trajectory.csv"))
    drift = np.max(np.abs(np.array([model.integrals(s) for s in traj.states])
                          - model.integrals(traj.states[0])), axis=0)
    write_json(os.path.join(out_dir, "simulation.json"),
               {"x0": [float(v) for v in x0], "t_final": float(traj.times[-1]),
                "samples": int(len(traj.times)), "integral_drift": drift, "error": err},
               cfg, model, eps)
    return EXIT_NUMERICAL if err else EXIT_OK


def format_table(rows):
    """Fixed-width pass/fail table from ``(name, passed, detail)`` rows."""
    width = max(len(r[0]) for r in rows)
    lines = [f"{'check'.ljust(width)}  result  detail"]
    for name, passed, detail in rows:
        lines.append(f"{name.ljust(width)}  {'PASS' if passed else 'FAIL'}    {detail}")
    return "\n".join(lines)


__all__ = ["run_analyze", "run_find_zero", "run_verify", "run_floquet", "run_simulate",
           "write_json", "grid_seed", "load_record", "format_table", "format_float",
           "EXIT_OK", "EXIT_NUMERICAL", "EXIT_INCONCLUSIVE", "EXIT_USAGE"]
