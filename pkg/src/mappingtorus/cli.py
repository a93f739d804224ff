"""Command-line interface: determinants, torsion, heat traces and checks.

Exit codes: 0 success, 1 invalid input, 2 truncation failure, 3 failed check.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time

from . import oracle
from .determinants import (
    klein_bottle_det_result,
    mapping_torus_det_modified,
    mapping_torus_det_shifted,
    product_with_circle_det_result,
    t2_phi_det_result,
)
from .fredholm import DetResult, TruncationError, TruncationPolicy
from .oracle import OracleError
from .spectral_model import (
    CIRCLE_REFLECTION,
    CIRCLE_ROTATION,
    IDENTITY,
    TORUS_SWAP_SHIFT,
    Circle,
    IsometrySpec,
    MappingTorusSpec,
    RectTorus,
    klein_bottle,
    t2_phi,
)
from .torsion import (
    analytic_torsion,
    torsion_from_definition,
    witten_torsion,
    witten_torsion_assembled,
)
from .verification import CHECKS, DEFAULT_SEED, run_checks

EXIT_OK, EXIT_INPUT, EXIT_TRUNCATION, EXIT_VERIFY = 0, 1, 2, 3
TWO_PI = 2 * math.pi

ISOMETRIES = {
    "identity": IDENTITY,
    "reflection": CIRCLE_REFLECTION,
    "rotation": CIRCLE_ROTATION,
    "swap-shift": TORUS_SWAP_SHIFT,
}


class InputError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def read_config(path: str) -> dict:
    """key = value lines; '#' starts a comment.  Keys use flag names."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = value
    return out


# --------------------------------------------------------------------------
# geometry from flags


def _positive(args, name):
    value = getattr(args, name, None)
    if value is None:
        raise InputError(f"--{name.replace('_', '-')} is required")
    if not (value > 0 and math.isfinite(value)):
        raise InputError(f"--{name.replace('_', '-')} must be positive, got {value!r}")
    return value


def base_from_args(args):
    if args.base == "circle":
        return Circle(_positive(args, "rho"))
    return RectTorus(_positive(args, "L1"), _positive(args, "L2"))


def spec_from_args(args) -> MappingTorusSpec:
    kind = getattr(args, "spec", None) or "mapping-torus"
    if kind in ("klein", "klein-bottle"):
        return klein_bottle(_positive(args, "a"), _positive(args, "rho"))
    if kind == "t2-phi":
        return t2_phi()
    if kind == "circle-rotation":
        base = Circle(_positive(args, "rho"))
        return MappingTorusSpec(base, IsometrySpec(CIRCLE_ROTATION, base, args.angle),
                                _positive(args, "a"))
    base = base_from_args(args)
    iso = ISOMETRIES["identity" if kind == "product" else args.isometry]
    angle = args.angle if iso == CIRCLE_ROTATION else 0.0
    try:
        return MappingTorusSpec(base, IsometrySpec(iso, base, angle), _positive(args, "a"))
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def policy_from_args(args) -> TruncationPolicy:
    if not (0 < args.tail_tol <= 1e-2):
        raise InputError(f"--tail-tol must lie in (0, 1e-2], got {args.tail_tol!r}")
    if args.cutoff is not None and not args.cutoff > 0:
        raise InputError(f"--cutoff must be positive, got {args.cutoff!r}")
    return TruncationPolicy(cutoff=args.cutoff, tail_tol=args.tail_tol)


# --------------------------------------------------------------------------
# output


def _params(args, keys):
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def emit(fmt: str, quantity: str, params: dict, result: DetResult, runtime_ms: float,
         extra: dict | None = None, stream=None):
    stream = stream or sys.stdout
    value = f"{result.value:.17g}"
    if fmt == "json":
        payload = {"quantity": quantity, "params": params, "value": "@VALUE@",
                   "tail_bound": result.tail_bound, "blocks_used": result.blocks_used,
                   "runtime_ms": round(runtime_ms, 3)}
        if extra:
            payload.update(extra)
        text = json.dumps(payload, sort_keys=False).replace('"@VALUE@"', value)
        print(text, file=stream)
    elif fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["quantity", "params", "value", "tail_bound", "blocks_used", "runtime_ms"])
        writer.writerow([quantity, ";".join(f"{k}={v}" for k, v in params.items()), value,
                         f"{result.tail_bound:.6g}", result.blocks_used, f"{runtime_ms:.3f}"])
        stream.write(buf.getvalue())
    else:
        print(f"{quantity} = {value}  (tail bound {result.tail_bound:.3g}, "
              f"{result.blocks_used} blocks, {runtime_ms:.1f} ms)", file=stream)
        for k, v in (extra or {}).items():
            print(f"  {k} = {v}", file=stream)


# --------------------------------------------------------------------------
# commands


def cmd_det(args) -> int:
    policy = policy_from_args(args)
    t0 = time.perf_counter()
    if args.target == "klein-bottle":
        params = _params(args, ["a", "rho"])
        _positive(args, "a"), _positive(args, "rho")
        result = klein_bottle_det_result(args.a, args.rho)
        quantity = "log_det_star_klein_bottle"
    elif args.target == "t2-phi":
        params = {"variant": args.variant}
        result = t2_phi_det_result(policy, args.variant)
        quantity = "log_det_star_t2_phi"
    elif args.target == "product":
        params = _params(args, ["base", "rho", "L1", "L2", "a", "q"])
        base = base_from_args(args)
        scalar = product_with_circle_det_result(base, _positive(args, "a"), policy)
        comps = math.comb(base.dimension + 1, args.q) if 0 <= args.q <= base.dimension + 1 else 0
        if comps == 0:
            raise InputError(f"--q must lie in 0..{base.dimension + 1}")
        result = DetResult(comps * scalar.value, comps * scalar.tail_bound, scalar.blocks_used,
                           scalar.diagnostics)
        quantity = "log_det_star_product"
    else:
        spec = spec_from_args(args)
        params = _params(args, ["base", "rho", "L1", "L2", "isometry", "angle", "a", "q", "lam"])
        if args.lam is not None:
            if not args.lam > 0:
                raise InputError("--lam must be positive")
            result = mapping_torus_det_shifted(spec, args.q, args.lam, policy)
            quantity = "log_det_shifted_mapping_torus"
        else:
            result = mapping_torus_det_modified(spec, args.q, policy)
            quantity = "log_det_star_mapping_torus"
    emit(args.format, quantity, params, result, 1000 * (time.perf_counter() - t0))
    return EXIT_OK


def cmd_torsion(args) -> int:
    policy = policy_from_args(args)
    spec = spec_from_args(args)
    params = _params(args, ["spec", "base", "rho", "L1", "L2", "isometry", "angle", "a", "t"])
    t0 = time.perf_counter()
    extra = {}
    if args.witten:
        t = _positive(args, "t")
        quantity = "log_witten_torsion"
        primary = witten_torsion(spec, t)
        if args.pathway in ("definition", "both"):
            other = witten_torsion_assembled(spec, t, policy)
            if args.pathway == "definition":
                primary = other
            else:
                extra = {"assembled": other, "difference": primary - other}
    else:
        quantity = "log_analytic_torsion"
        if args.pathway == "definition":
            primary = torsion_from_definition(spec, policy)
        else:
            primary = analytic_torsion(spec)
            if args.pathway == "both":
                other = torsion_from_definition(spec, policy)
                extra = {"from_definition": other, "difference": primary - other}
    emit(args.format, quantity, params, DetResult(primary), 1000 * (time.perf_counter() - t0), extra)
    return EXIT_OK


def cmd_heat(args) -> int:
    t = _positive(args, "t")
    if args.spec in ("klein", "klein-bottle"):
        raw = oracle.klein_bottle_raw(_positive(args, "a"), _positive(args, "rho"))
    elif args.spec == "torus":
        raw = oracle.torus_raw(_positive(args, "a"), TWO_PI * _positive(args, "rho"))
    else:
        raw = oracle.mapping_torus_raw(spec_from_args(args), args.q)
    t0 = time.perf_counter()
    value = oracle.heat_trace(raw, t)
    params = _params(args, ["spec", "base", "rho", "L1", "L2", "isometry", "angle", "a", "q", "t"])
    emit(args.format, "heat_trace", params, DetResult(value), 1000 * (time.perf_counter() - t0))
    return EXIT_OK


def cmd_verify(args) -> int:
    policy = policy_from_args(args)
    results = run_checks(args.only or None, policy, args.seed)
    if args.format == "json":
        print(json.dumps([{"name": r.name, "passed": r.passed, "residual": r.residual,
                           "tolerance": r.tolerance, "details": r.details} for r in results]))
    elif args.format == "csv":
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(["name", "passed", "residual", "tolerance"])
        for r in results:
            writer.writerow([r.name, r.passed, f"{r.residual:.6g}", f"{r.tolerance:g}"])
    else:
        for r in results:
            status = "PASS" if r.passed else "FAIL"
            print(f"{status} {r.name:16s} residual={r.residual:.3e} tol={r.tolerance:.0e}")
            for k, v in r.details.items():
                print(f"     {k} = {v}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


# --------------------------------------------------------------------------
# parser


def _add_common(p):
    p.add_argument("--format", choices=["json", "csv", "plain"], default="plain")
    p.add_argument("--cutoff", type=float, default=None, help="eigenvalue cutoff Λ (default: automatic)")
    p.add_argument("--tail-tol", type=float, default=1e-12, help="tail tolerance for infinite series")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--config", default=None, help="key = value file; explicit flags win")


def _add_geometry(p):
    p.add_argument("--base", choices=["circle", "torus"], default="circle")
    p.add_argument("--rho", type=float, default=None, help="circle radius")
    p.add_argument("--L1", type=float, default=None, help="first torus period")
    p.add_argument("--L2", type=float, default=None, help="second torus period")
    p.add_argument("--isometry", choices=sorted(ISOMETRIES), default="identity")
    p.add_argument("--angle", type=float, default=0.0, help="rotation angle in radians")
    p.add_argument("--a", type=float, default=None, help="interval length")
    p.add_argument("--q", type=int, default=0, help="form degree")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mappingtorus", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("det", help="log-determinants")
    p.add_argument("target", choices=["klein-bottle", "t2-phi", "product", "mapping-torus"])
    _add_geometry(p)
    p.add_argument("--lam", type=float, default=None, help="spectral shift λ > 0")
    p.add_argument("--variant", choices=["reference", "corrected"], default="reference")
    _add_common(p)
    p.set_defaults(func=cmd_det)

    p = sub.add_parser("torsion", help="analytic and Witten-deformed torsion")
    p.add_argument("--spec", choices=["klein", "t2-phi", "circle-rotation", "product", "mapping-torus"],
                   default="klein")
    _add_geometry(p)
    p.add_argument("--pathway", choices=["harmonic", "definition", "both"], default="harmonic")
    p.add_argument("--witten", action="store_true", help="deformed torsion at --t")
    p.add_argument("--t", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_torsion)

    p = sub.add_parser("heat", help="heat trace Tr e^{-tΔ}")
    p.add_argument("--spec", choices=["klein", "torus", "t2-phi", "circle-rotation", "product",
                                      "mapping-torus"], default="klein")
    _add_geometry(p)
    p.add_argument("--t", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_heat)

    p = sub.add_parser("verify", help="run the cross-validation checks")
    p.add_argument("--only", action="append", choices=sorted(CHECKS), default=None)
    _add_common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    config = read_config(known.config)
    choices = parser._subparsers._group_actions[0].choices
    command = next((a for a in argv if a in choices), None)
    if command is None:
        return
    sp = choices[command]
    actions = {a.dest: a for a in sp._actions}
    unknown = set(config) - set(actions)
    if unknown:
        raise InputError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    for key, value in list(config.items()):
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            config[key] = value.lower() in ("1", "true", "yes", "on")
        elif isinstance(action, argparse._AppendAction):
            if any(opt in argv for opt in action.option_strings):
                del config[key]  # explicit flags replace, not extend, the config list
            else:
                config[key] = [v.strip() for v in value.split(",") if v.strip()]
    sp.set_defaults(**config)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except (InputError, ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (TruncationError, OracleError) as exc:
        print(f"truncation failure: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION


if __name__ == "__main__":
    sys.exit(main())
