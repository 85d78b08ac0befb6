"""Command line: ``rknn generate|calibrate|verify|sweep``.

Exit codes: 0 success, 1 usage or schema error, 2 runtime or solver error.
Run specs are JSON files validated against :data:`RUNSPEC_SCHEMA` before
anything is computed or written.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import jsonschema

from . import builtins
from .analysis import asymptotics_fit, covering_radius, separation
from .density import calibrate_Csdk, upsert_registry
from .energy import EnergyModel, evaluate
from .export import write_json, write_ply, write_points
from .geometry import ProjectionError, SamplingError, domain_from_json
from .optimize import OptimizationError, OptimizerConfig, minimize
from .verify import SUITES, run_suite

# quadrature resolution for the covering-radius estimate, by intrinsic dimension
COVER_RESOLUTION = {1: 4000, 2: 200}

_OPT_PROPS = {
    "max_iters": {"type": "integer", "minimum": 0},
    "step0": {"type": ["number", "null"], "exclusiveMinimum": 0},
    "shrink": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    "max_halvings": {"type": "integer", "minimum": 0},
    "graph_refresh": {"type": "integer", "minimum": 1},
    "tol_rel_energy": {"type": "number", "minimum": 0},
    "window": {"type": "integer", "minimum": 1},
    "restarts": {"type": "integer", "minimum": 0},
    "jitter": {"type": "number", "minimum": 0},
    "max_move": {"type": "number", "exclusiveMinimum": 0},
    "tie_tol": {"type": "number", "minimum": 0},
    "precondition": {"type": "boolean"},
    "smoothing": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
    "coarsen": {"type": "integer", "minimum": 0},
    "coarse_min": {"type": "integer", "minimum": 2},
}

RUNSPEC_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["domain", "model", "N"],
    "properties": {
        "domain": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": ["box", "torus", "sphere", "implicit"]}},
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["s", "k"],
            "properties": {
                "s": {"type": "number", "exclusiveMinimum": 0},
                "k": {"oneOf": [{"type": "integer", "minimum": 1}, {"const": "full"}]},
                "weight": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["constant", "density"]},
                        "c": {"type": "number", "exclusiveMinimum": 0},
                        "density": {"enum": sorted(builtins.DENSITIES)},
                    },
                },
                "field": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["none", "builtin"]},
                        "name": {"enum": sorted(builtins.FIELDS)},
                    },
                },
            },
        },
        "N": {"type": "integer", "minimum": 1},
        "init": {"enum": ["uniform", "stratified"]},
        "optimizer": {"type": "object", "additionalProperties": False, "properties": _OPT_PROPS},
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "points": {"type": "string"},
                "trace": {"type": "string"},
                "summary": {"type": "string"},
                "ply": {"type": "string"},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}

DEFAULT_OUTPUTS = {"points": "points.csv", "trace": "trace.csv", "summary": "summary.json"}


class UsageError(Exception):
    """Bad arguments or an invalid run spec (exit 1)."""


def _fail(msg, code):
    print(f"rknn: {msg}", file=sys.stderr)
    return code


def load_runspec(path) -> dict:
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read run spec {path}: {exc}") from None
    try:
        jsonschema.validate(spec, RUNSPEC_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise UsageError(f"invalid run spec: {exc.message}") from None
    return spec


def build_problem(spec: dict, seed: int | None = None, threads: int | None = None):
    """Domain, model and optimizer settings from a validated run spec."""
    try:
        domain = domain_from_json(spec["domain"])
        m = spec["model"]
        s = float(m["s"])
        fld = m.get("field", {"kind": "none"})
        if fld["kind"] == "builtin" and "name" not in fld:
            raise UsageError("builtin field needs a name")
        field = builtins.field(fld.get("name") if fld["kind"] == "builtin" else None)
        w = m.get("weight")
        if w is not None and w["kind"] == "density" and "density" not in w:
            raise UsageError("density weight needs a density name")
        weight = builtins.weight(w, domain, s)
        model = EnergyModel(s, m["k"], domain.d, weight, field)
        run_seed = int(spec.get("seed", 0) if seed is None else seed)
        opts = OptimizerConfig(**{**spec.get("optimizer", {}), "seed": run_seed, "workers": threads})
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"invalid run spec: {exc}") from None
    return domain, model, opts, run_seed


def _initial(spec, domain, n, seed):
    if spec.get("init", "uniform") == "stratified":
        from .density import stratified_sample
        from .geometry import Box

        if not isinstance(domain, Box):
            raise UsageError("stratified init needs a box domain")
        return stratified_sample(domain, n, seed)
    return domain.sample_uniform(n, seed)


def run_generate(spec, n, seed, threads):
    """Optimize one configuration; returns (points, trace, summary)."""
    domain, model, opts, run_seed = build_problem(spec, seed, threads)
    x0 = _initial(spec, domain, n, run_seed)
    x, trace = minimize(x0, model, domain, opts)
    final = evaluate(x, model, domain, threads)
    sep = separation(x, domain) if n > 1 else math.inf
    quad = domain.build_quadrature(COVER_RESOLUTION.get(domain.d, 60))
    summary = {
        "N": n,
        "final_energy": final.total,
        "rescaled_energy": final.total / n ** (1.0 + model.s / domain.d),
        "separation": sep,
        "covering_radius": covering_radius(x, quad, domain),
        "iterations": trace.iters,
        "stop_reason": trace.stop_reason,
    }
    return x, trace, summary


def _write_outputs(out, outputs, x, trace, summary):
    os.makedirs(out, exist_ok=True)
    write_points(os.path.join(out, outputs["points"]), x)
    trace.write_csv(os.path.join(out, outputs["trace"]))
    write_json(os.path.join(out, outputs["summary"]), summary)
    if "ply" in outputs:
        write_ply(os.path.join(out, outputs["ply"]), x)


def cmd_generate(args):
    spec = load_runspec(args.spec)
    outputs = {**DEFAULT_OUTPUTS, **spec.get("outputs", {})}
    domain, _, _, _ = build_problem(spec, args.seed, args.threads)
    if "ply" in outputs and domain.p != 3:
        raise UsageError("PLY output needs points in R^3")
    x, trace, summary = run_generate(spec, int(spec["N"]), args.seed, args.threads)
    _write_outputs(args.out, outputs, x, trace, summary)
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_sweep(args):
    spec = load_runspec(args.spec)
    Ns = args.N
    if not Ns:
        raise UsageError("sweep needs a nonempty N list")
    if len(Ns) < 3 or any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise UsageError("sweep needs at least three increasing N values")
    domain, model, _, _ = build_problem(spec, args.seed, args.threads)
    outputs = {**DEFAULT_OUTPUTS, **spec.get("outputs", {})}
    outputs.pop("ply", None)
    rows, pairs = [], []
    results = []
    for n in Ns:
        x, trace, summary = run_generate(spec, n, args.seed, args.threads)
        results.append((n, x, trace, summary))
        pairs.append((n, summary["final_energy"]))
        rows.append((n, summary["final_energy"], summary["rescaled_energy"], summary["separation"],
                     summary["separation"] * n ** (1.0 / domain.d)))
    fit = asymptotics_fit(pairs, model.s, domain.d)
    for n, x, trace, summary in results:
        _write_outputs(os.path.join(args.out, f"N{n}"), outputs, x, trace, summary)
    with open(os.path.join(args.out, "sweep.csv"), "w") as fh:
        fh.write("N,final_energy,rescaled_energy,separation,scaled_separation\n")
        for r in rows:
            fh.write(f"{r[0]}," + ",".join(repr(float(v)) for v in r[1:]) + "\n")
    write_json(os.path.join(args.out, "fit.json"), fit.to_dict())
    print(fit.to_json(sort_keys=True))
    return 0


def cmd_calibrate(args):
    if not args.N:
        raise UsageError("calibrate needs an N list")
    if args.s <= 0 or args.d < 1 or args.k < 1:
        raise UsageError("need s > 0, d >= 1, k >= 1")
    if len(args.N) < 3 or any(b <= a for a, b in zip(args.N, args.N[1:])):
        raise UsageError("calibrate needs at least three increasing N values")
    opts = None
    if args.max_iters is not None:
        opts = OptimizerConfig(max_iters=args.max_iters, tol_rel_energy=1e-12, window=100, workers=args.threads)
    cal = calibrate_Csdk(args.s, args.d, args.k, args.N, opts, seed=args.seed)
    entry = {
        "value": cal.value,
        "method": "calibrated",
        "residual": cal.residual,
        "slope": cal.slope,
        "pairs": cal.pairs,
        "seed": args.seed,
        "oracle": cal.oracle,
        "oracle_error": cal.oracle_error,
        "provenance": "exact oracle available" if cal.oracle is not None else "no oracle",
    }
    if args.registry:
        upsert_registry(args.registry, args.s, args.d, args.k, entry)
    print(json.dumps(entry, sort_keys=True))
    return 0


def cmd_verify(args):
    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; known: {', '.join(sorted(SUITES))}")
    verdict = run_suite(args.suite, seed=args.seed)
    text = verdict.to_json(sort_keys=True)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_json(os.path.join(args.out, f"{args.suite}.json"), json.loads(text))
    print(text)
    return 0 if verdict.passed else 2


def make_parser():
    p = argparse.ArgumentParser(prog="rknn", description="k-nearest-neighbor Riesz energy point configurations")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="overrides the run spec seed")
    common.add_argument("--threads", type=int, default=None, help="worker cap for neighbor queries")
    common.add_argument("--registry", default=os.environ.get("RKNN_REGISTRY"),
                        help="constant registry JSON (default: $RKNN_REGISTRY)")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="optimize one configuration")
    g.add_argument("--spec", required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("calibrate", parents=[common], help="estimate the cube constant")
    c.add_argument("--s", type=float, required=True)
    c.add_argument("--d", type=int, required=True)
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--N", type=int, nargs="+", required=True)
    c.add_argument("--max-iters", type=int, default=None)
    c.set_defaults(func=cmd_calibrate)

    v = sub.add_parser("verify", parents=[common], help="run a property suite")
    v.add_argument("suite")
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_verify)

    w = sub.add_parser("sweep", parents=[common], help="generate over several N and fit the asymptotics")
    w.add_argument("--spec", required=True)
    w.add_argument("--out", required=True)
    w.add_argument("--N", type=int, nargs="*", default=[])
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; usage errors are 1 here
        return 0 if exc.code == 0 else 1
    if args.command == "calibrate" and args.seed is None:
        args.seed = 0
    if args.command == "verify" and args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except UsageError as exc:
        return _fail(str(exc), 1)
    except (OptimizationError, ProjectionError, SamplingError, FloatingPointError, ValueError) as exc:
        return _fail(f"run failed: {exc}", 2)


if __name__ == "__main__":
    sys.exit(main())
