"""Command-line front end: certify, oracle, max-radius, reach, pendulum,
abstraction.

One JSON config schema (shipped with the package) covers every subcommand;
command-line flags override file values.  Each run writes a deterministic
report.json (identical configs give identical reports up to the wall-clock
field), plus transitions CSV and matplotlib-rendered SVG scenes on request.
Exit status: 0 for PASS/feasible, 2 for FAIL/infeasible, 1 for errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
from jsonschema import Draft202012Validator

from . import fixtures as fx
from .geometry import Ball, Box, SampleConfig, sigma_regularity_oracle
from .pendulum import (CellGrid, PendulumParams, abstraction_step,
                       pendulum_constants, pendulum_field, pendulum_radius)
from .polynomials import Polynomial
from .reach import (estimate_bounds, flow_states, radius_c11, reach_overapprox,
                    trajectory_hull_box)
from .sublevel import (SublevelSet, ToleranceConfig, certify_convexity,
                       certify_r_convexity, max_radius)

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_FAIL = 2


class ConfigError(ValueError):
    pass


def _schema() -> dict:
    text = resources.files("convreach").joinpath("config_schema.json").read_text()
    return json.loads(text)


def validate_config(config: dict) -> None:
    """Schema-validate, reporting the offending field path."""
    validator = Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(config), key=lambda e: e.json_path)
    if errors:
        msgs = [f"{e.json_path}: {e.message}" for e in errors]
        raise ConfigError("invalid config:\n  " + "\n  ".join(msgs))


def _sanitize(obj):
    """Make report content JSON-serializable and deterministic."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


def _digest(config: dict) -> str:
    canon = json.dumps(_sanitize(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _tolerances(config: dict) -> ToleranceConfig:
    t = config.get("tolerances", {})
    return ToleranceConfig(**t)


def _resolve_set(section: dict, tol: ToleranceConfig) -> fx.Fixture:
    name = section.get("fixture")
    if name is not None:
        if name not in fx.CONSTRAINT_FIXTURES:
            raise ConfigError(f"unknown fixture '{name}' "
                              f"(known: {sorted(fx.CONSTRAINT_FIXTURES)})")
        return fx.CONSTRAINT_FIXTURES[name]()
    polys = section.get("polynomials")
    box = section.get("box")
    if polys is None or box is None:
        raise ConfigError("either 'fixture' or 'polynomials' + 'box' required")
    nvars = len(box["lo"])
    constraints = tuple(
        fx.constraint_from_polynomial(Polynomial.from_terms(nvars, terms), f"poly{k}")
        for k, terms in enumerate(polys)
    )
    S = SublevelSet(constraints, Box(box["lo"], box["hi"]))
    return fx.Fixture("inline-polynomial", S)


def _resolve_field(section: dict):
    name = section.get("field", "pendulum")
    if name == "zero":
        dim = len(section.get("center", [0.0, 0.0]))
        return fx.zero_field(dim)
    if name == "linear":
        if "matrix" not in section:
            raise ConfigError("linear field requires 'matrix'")
        return fx.linear_field(np.asarray(section["matrix"], dtype=float))
    if name == "rotation":
        return fx.rotation_field()
    if name == "pendulum":
        return pendulum_field(PendulumParams(section.get("omega", 1.0),
                                             section.get("gamma", 0.0),
                                             section.get("u", 0.0)))
    raise ConfigError(f"unknown field '{name}'")


# ---------------------------------------------------------------------------
# command runners (each returns (results dict, caveats list, exit code))


def _run_certify(config: dict):
    sec = config.get("certify", {})
    tol = _tolerances(config)
    fixture = _resolve_set(sec, tol)
    seed = config.get("seed", 0)
    kwargs = dict(boundary=fixture.boundary_sampler, seed=seed, tol=tol,
                  n_dirs=sec.get("directions", 64))
    r = sec.get("r")
    if r is None:
        cert = certify_convexity(fixture.set, mode=sec.get("mode", "exists-i"), **kwargs)
    else:
        cert = certify_r_convexity(fixture.set, float(r),
                                   mode=sec.get("mode", "exists-i"), **kwargs)
    results = {"certificate": cert.to_dict(), "fixture": fixture.name}
    return results, list(cert.caveats), EXIT_PASS if cert.passed else EXIT_FAIL


def _run_oracle(config: dict):
    sec = config.get("oracle", {})
    tol = _tolerances(config)
    fixture = _resolve_set(sec, tol)
    if "r" not in sec:
        raise ConfigError("oracle requires 'r'")
    samples = SampleConfig(pairs=sec.get("pairs", 500),
                           alphas=sec.get("alphas", 8),
                           probes=sec.get("probes", 64),
                           seed=config.get("seed", 0))
    verdict = sigma_regularity_oracle(fixture.membership(), float(sec["r"]), samples)
    results = {"verdict": verdict.to_dict(), "fixture": fixture.name,
               "r": float(sec["r"])}
    caveats = ["PASS is sampled evidence, not a proof"] if verdict.passed else []
    return results, caveats, EXIT_PASS if verdict.passed else EXIT_FAIL


def _run_max_radius(config: dict):
    sec = config.get("max_radius", {})
    tol = _tolerances(config)
    fixture = _resolve_set(sec, tol)
    value = max_radius(fixture.set, boundary=fixture.boundary_sampler,
                       n_dirs=sec.get("directions", 64), seed=config.get("seed", 0),
                       tol=tol)
    results = {"max_radius": value, "fixture": fixture.name,
               "strongly_convex": math.isfinite(value)}
    return results, ["sampled estimate of the tight radius"], EXIT_PASS


def _run_reach(config: dict):
    sec = config.get("reach", {})
    vf = _resolve_field(sec)
    center = np.asarray(sec.get("center", [0.0] * vf.dim), dtype=float)
    radius = float(sec.get("radius", 0.1))
    s = float(sec.get("s", radius))
    t = float(sec.get("t", 1.0))
    steps = int(sec.get("steps", 1024))
    directions = int(sec.get("directions", 16))
    init = Ball(center, radius)
    caveats = []
    r = sec.get("r")
    if r is None:
        if vf.name == "pendulum":
            p = PendulumParams(sec.get("omega", 1.0), sec.get("gamma", 0.0),
                               sec.get("u", 0.0))
            r = pendulum_radius(p, s, t)
            if not pendulum_constants(p, t).preconditions_ok:
                caveats.append("pendulum theorem preconditions violated: non-certified")
        else:
            seed_pts = center + radius * np.concatenate(
                [np.zeros((1, vf.dim)), np.eye(vf.dim), -np.eye(vf.dim)])
            hull = trajectory_hull_box(vf, seed_pts, t, steps=min(steps, 256))
            bounds = estimate_bounds(vf, hull, seed=config.get("seed", 0))
            if bounds.m2_heuristic:
                caveats.append("M2 estimated by finite differences: non-certified")
            r = radius_c11(s, t, bounds)
    if r is None:
        return ({"radius": None, "feasible": False}, caveats, EXIT_FAIL)
    approx = reach_overapprox(vf, init, s, t, float(r), directions=directions,
                              steps=steps)
    results = {
        "radius": float(r),
        "feasible": True,
        "patches": [
            {"point": p.point.tolist(), "normal": p.normal.tolist(),
             "radius": p.radius}
            for p in approx.patches
        ],
    }
    return results, caveats, EXIT_PASS


def _run_pendulum(config: dict):
    sec = config.get("pendulum", {})
    p = PendulumParams(sec.get("omega", 1.0), sec.get("gamma", 0.0),
                       sec.get("u", 0.0))
    s = float(sec.get("s", 0.4))
    t = float(sec.get("t", 0.32))
    consts = pendulum_constants(p, t)
    r = pendulum_radius(p, s, t)
    results = {
        "constants": consts.to_dict(t),
        "s": s, "t": t,
        "radius": r,
        "feasible": r is not None,
    }
    caveats = [] if consts.preconditions_ok else list(consts.reasons)
    return results, caveats, EXIT_PASS if r is not None else EXIT_FAIL


def _load_scenario(sec: dict) -> dict:
    merged = dict(sec)
    path = merged.pop("scenario", None)
    if path is not None:
        loaded = json.loads(Path(path).read_text())
        for k, v in loaded.items():
            merged.setdefault(k, v)
    return merged


def _run_abstraction(config: dict):
    from .reach import InfeasibleRadiusError

    sec = _load_scenario(config.get("abstraction", {}))
    for key in ("grid", "source_cell", "controls", "T", "s"):
        if key not in sec:
            raise ConfigError(f"abstraction requires '{key}' (inline or via scenario)")
    grid = CellGrid.regular(sec["grid"]["lo"], sec["grid"]["cell_size"],
                            sec["grid"]["shape"])
    p = PendulumParams(sec.get("omega", 1.0), sec.get("gamma", 0.0))
    try:
        report = abstraction_step(
            grid, int(sec["source_cell"]), sec["controls"], p,
            s=float(sec["s"]), T=float(sec["T"]), method=sec.get("method", "both"),
            patches=int(sec.get("patches", 16)), steps=int(sec.get("steps", 1024)),
            seed=int(sec.get("seed", config.get("seed", 1))),
        )
    except InfeasibleRadiusError as exc:
        return {"feasible": False, "reason": str(exc)}, [], EXIT_FAIL
    results = {"transitions": report.to_dict(), "cells": len(grid), "feasible": True}
    return results, ["over-approximating abstraction: spurious transitions possible"], EXIT_PASS


RUNNERS = {
    "certify": _run_certify,
    "oracle": _run_oracle,
    "max-radius": _run_max_radius,
    "reach": _run_reach,
    "pendulum": _run_pendulum,
    "abstraction": _run_abstraction,
}

# config section owned by each subcommand ('max-radius' maps to 'max_radius')
SECTION = {
    "certify": "certify",
    "oracle": "oracle",
    "max-radius": "max_radius",
    "reach": "reach",
    "pendulum": "pendulum",
    "abstraction": "abstraction",
}


def run(config: dict) -> tuple:
    """Validate, dispatch and assemble the report. Returns (report, exit code)."""
    validate_config(config)
    command = config.get("command")
    if command not in RUNNERS:
        raise ConfigError(f"missing or unknown command: {command!r}")
    t0 = time.perf_counter()
    results, caveats, code = RUNNERS[command](config)
    # presentation-only keys stay out of the digest and the echo
    echoed = {k: v for k, v in config.items() if k not in ("out", "svg")}
    report = {
        "command": command,
        "config_digest": _digest(echoed),
        "config": _sanitize(echoed),
        "results": _sanitize(results),
        "caveats": caveats,
        "exit_code": code,
        "wall_clock_s": time.perf_counter() - t0,
    }
    return report, code


def _write_outputs(report: dict, config: dict) -> None:
    out_dir = Path(config.get("out", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n")
    command = report["command"]
    if command == "abstraction" and "transitions" in report["results"]:
        _write_transitions_csv(report, out_dir)
    if config.get("svg"):
        _render_figure(report, config, out_dir)


def _write_transitions_csv(report: dict, out_dir: Path) -> None:
    import csv

    trans = report["results"]["transitions"]["transitions"]
    controls = report["results"]["transitions"]["controls"]
    with open(out_dir / "transitions.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["source", "control", "target"])
        method = "balls" if "balls" in trans else next(iter(trans))
        for source, ci, target in trans[method]:
            writer.writerow([source, controls[ci], target])


def _render_figure(report: dict, config: dict, out_dir: Path) -> None:
    from . import plots

    command = report["command"]
    fig = None
    if command in ("certify", "oracle", "max-radius"):
        sec = config.get(SECTION[command], {})
        fixture = _resolve_set(sec, _tolerances(config))
        if fixture.set.dim != 2:
            return
        witness = report["results"].get("verdict", {}).get("witness")
        fig = plots.render_set_scene(fixture.membership(), witness,
                                     title=f"{command}: {fixture.name}")
    elif command == "reach":
        sec = config.get("reach", {})
        vf = _resolve_field(sec)
        if vf.dim != 2 or not report["results"].get("feasible"):
            return
        from .geometry import BallIntersection, SupportPatch

        patches = tuple(
            SupportPatch(np.asarray(p["point"]), np.asarray(p["normal"]), p["radius"])
            for p in report["results"]["patches"]
        )
        init = Ball(np.asarray(sec.get("center", [0.0, 0.0]), dtype=float),
                    float(sec.get("radius", 0.1)))
        rng = np.random.default_rng(config.get("seed", 0))
        raw = rng.standard_normal((400, 2))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        raw *= rng.random((400, 1)) ** 0.5 * init.radius
        flowed = flow_states(vf, init.center + raw, float(sec.get("t", 1.0)),
                             steps=256)
        fig = plots.render_reach_scene(init, BallIntersection(patches), flowed,
                                       title="attainable-set over-approximation")
    elif command == "abstraction":
        sec = _load_scenario(config.get("abstraction", {}))
        grid = CellGrid.regular(sec["grid"]["lo"], sec["grid"]["cell_size"],
                                sec["grid"]["shape"])
        from .pendulum import cell_embedding

        p_base = PendulumParams(sec.get("omega", 1.0), sec.get("gamma", 0.0))
        approxs = []
        labels = []
        init = cell_embedding(grid.boxes[int(sec["source_cell"])])
        for u in sec["controls"]:
            p = PendulumParams(p_base.omega, p_base.gamma, u)
            r = pendulum_radius(p, float(sec["s"]), float(sec["T"]))
            approxs.append(reach_overapprox(
                pendulum_field(p), init, float(sec["s"]), float(sec["T"]), r,
                directions=int(sec.get("patches", 16)),
                steps=int(sec.get("steps", 1024))))
            labels.append(f"u={u}")
        fig = plots.render_abstraction_scene(grid, int(sec["source_cell"]),
                                             approxs, labels,
                                             title="abstraction step")
    if fig is not None:
        fig.savefig(out_dir / f"{command}.svg", format="svg")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convreach",
        description="Strong-convexity certificates and supporting-ball "
                    "over-approximation of attainable sets.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="JSON config file")
    common.add_argument("--seed", type=int, help="PRNG seed")
    common.add_argument("--out", type=str, help="output directory")
    common.add_argument("--svg", action="store_true", default=None,
                        help="render an SVG scene (2-D only)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_cert = sub.add_parser("certify", parents=[common],
                            help="convexity / r-convexity certificate")
    p_cert.add_argument("--fixture", type=str)
    p_cert.add_argument("--r", type=float)
    p_cert.add_argument("--mode", choices=["exists-i", "all-i"])
    p_cert.add_argument("--directions", type=int)

    p_orc = sub.add_parser("oracle", parents=[common],
                           help="sigma-regularity brute-force oracle")
    p_orc.add_argument("--fixture", type=str)
    p_orc.add_argument("--r", type=float)
    p_orc.add_argument("--pairs", type=int)
    p_orc.add_argument("--alphas", type=int)
    p_orc.add_argument("--probes", type=int)

    p_max = sub.add_parser("max-radius", parents=[common],
                           help="best certified radius (single constraint)")
    p_max.add_argument("--fixture", type=str)
    p_max.add_argument("--directions", type=int)

    p_reach = sub.add_parser("reach", parents=[common],
                             help="supporting-ball over-approximation")
    p_reach.add_argument("--field", type=str)
    p_reach.add_argument("--omega", type=float)
    p_reach.add_argument("--gamma", type=float)
    p_reach.add_argument("--u", type=float)
    p_reach.add_argument("--center", type=float, nargs="+")
    p_reach.add_argument("--radius", type=float)
    p_reach.add_argument("--s", type=float)
    p_reach.add_argument("--t", type=float)
    p_reach.add_argument("--r", type=float)
    p_reach.add_argument("--directions", type=int)
    p_reach.add_argument("--steps", type=int)

    p_pen = sub.add_parser("pendulum", parents=[common],
                           help="pendulum closed-form constants and radius")
    p_pen.add_argument("--omega", type=float)
    p_pen.add_argument("--gamma", type=float)
    p_pen.add_argument("--u", type=float)
    p_pen.add_argument("--s", type=float)
    p_pen.add_argument("--t", type=float)

    p_abs = sub.add_parser("abstraction", parents=[common],
                           help="one abstraction transition step")
    p_abs.add_argument("--scenario", type=str)
    p_abs.add_argument("--method", choices=["balls", "halfspaces", "both"])
    p_abs.add_argument("--patches", type=int)
    p_abs.add_argument("--steps", type=int)

    return parser


_TOP_LEVEL_FLAGS = ("seed", "out", "svg")


def config_from_args(args: argparse.Namespace) -> dict:
    """Merge the config file (if any) with CLI flag overrides."""
    config: dict = {}
    if args.config:
        config = json.loads(Path(args.config).read_text())
    config["command"] = args.command
    section_key = SECTION[args.command]
    section = dict(config.get(section_key, {}))
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        if key in _TOP_LEVEL_FLAGS:
            config[key] = value
        else:
            section[key] = value
    if section:
        config[section_key] = section
    return config


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
        report, code = run(config)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError,
            ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    _write_outputs(report, config)
    summary = {k: report["results"].get(k) for k in ("radius", "max_radius") if k in report["results"]}
    status = "PASS/feasible" if code == EXIT_PASS else "FAIL/infeasible"
    print(f"{report['command']}: {status} " + (json.dumps(_sanitize(summary)) if summary else ""))
    return code


if __name__ == "__main__":
    raise SystemExit(main())
