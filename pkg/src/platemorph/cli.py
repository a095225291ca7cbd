"""Command-line front end for the bilayer plate morphing engine.

Subcommands: forward (single plate solve), map (design-space sweep to
CSV/SVG), inverse (target surface -> print plan), preview (deployed-shape
OBJ), verify (plan-vs-target residual check).  Angles are degrees and
lengths millimetres at this boundary; outputs are byte-deterministic.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import designmap, inverse, torusgeom
from .errors import (
    GeometryError,
    InfeasibleTargetError,
    MaterialRangeError,
    OverConstrainedError,
    PlateMorphError,
    SingularMapError,
    SingularSystemError,
    TopologyError,
    UnsupportedTargetError,
    ValidationError,
)
from .laminate import bilayer, free_recovery_state
from .material import load_material_card
from .designmap import MAP_FIELDS, classify_mode, gaussian_curvature, principal_curvatures

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_MATERIAL = 3
EXIT_IO = 4
EXIT_TARGET = 5
EXIT_VERIFY = 6


def _error_payload(exc: Exception) -> dict:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, InfeasibleTargetError) and exc.best_residual is not None:
        payload["best_residual_per_mm"] = exc.best_residual
    if isinstance(exc, OverConstrainedError) and exc.reasons:
        payload["reasons"] = list(exc.reasons)
    if isinstance(exc, SingularSystemError) and exc.condition is not None:
        payload["condition"] = exc.condition
    return payload


def _exit_code_for(exc: Exception) -> int:
    if isinstance(exc, MaterialRangeError):
        return EXIT_MATERIAL
    if isinstance(exc, (UnsupportedTargetError, InfeasibleTargetError,
                        OverConstrainedError, SingularSystemError, SingularMapError)):
        return EXIT_TARGET
    if isinstance(exc, (ValidationError, GeometryError, TopologyError)):
        return EXIT_VALIDATION
    if isinstance(exc, OSError):
        return EXIT_IO
    raise exc


def _dump_json(doc: dict, stream) -> None:
    json.dump(doc, stream, indent=2)
    stream.write("\n")


def _write_json_atomic(doc: dict, path: str) -> None:
    data = (json.dumps(doc, indent=2) + "\n").encode("utf-8")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def cmd_forward(args) -> int:
    card = load_material_card(args.material)
    layup = bilayer(card, args.theta1, args.theta2, args.t1, args.t2)
    state = free_recovery_state(layup, args.ta)
    kx, ky, kxy = (float(v) for v in state.kappa)
    pc = principal_curvatures(kx, ky, kxy)
    kmax = float(np.max(np.abs(state.kappa)))
    mode = classify_mode(state, max(1e-6, 1e-3 * kmax), 1e-6)
    _dump_json({
        "state": state.to_dict(),
        "principal": {"k1_per_mm": pc.k1, "k2_per_mm": pc.k2, "phi_deg": pc.phi},
        "K_per_mm2": gaussian_curvature(pc),
        "mode": mode.value,
    }, sys.stdout)
    return EXIT_OK


def cmd_map(args) -> int:
    card = load_material_card(args.material)
    for fld in args.svg:
        if fld not in MAP_FIELDS:
            raise ValidationError(f"unknown map field {fld!r}; expected one of {MAP_FIELDS}")
    grid = designmap.sweep_map(card, args.t1, args.t2, args.ta, args.step)
    os.makedirs(args.out, exist_ok=True)
    designmap.export_map_csv(grid, os.path.join(args.out, "map.csv"))
    for fld in args.svg:
        designmap.render_map_svg(grid, fld, os.path.join(args.out, f"map_{fld}.svg"))
    _dump_json(designmap.map_summary(grid), sys.stdout)
    return EXIT_OK


def cmd_inverse(args) -> int:
    card = load_material_card(args.material)
    target = inverse.load_target(args.target)
    options = inverse.PlanOptions(
        step=args.step,
        max_a=args.max_a,
        max_b=args.max_b,
        sweep_ratio=tuple(args.sweep_ratio or ()),
        sweep_ta=tuple(args.sweep_ta or ()),
    )
    plan, ranked = inverse.plan_with_candidates(
        target, card, args.ratio, args.thickness, args.ta, options
    )
    inverse.save_plan(plan, args.out)
    rows = [
        {
            "theta1_deg": c.theta1,
            "theta2_deg": c.theta2,
            "residual_per_mm": c.residual,
            "a_mm": c.a_mm,
            "b_mm": c.b_mm,
            "flat_direction": c.flat_direction,
        }
        for c in ranked
    ]
    _dump_json({
        "candidates": rows,
        "selected": {
            "theta1_deg": plan.theta1, "theta2_deg": plan.theta2,
            "t1_mm": plan.t1, "t2_mm": plan.t2, "ta_c": plan.t_a,
        },
        "plan_path": args.out,
    }, sys.stdout)
    return EXIT_OK


def cmd_preview(args) -> int:
    plan = inverse.load_plan(args.plan)
    if args.nu < 2 or args.nv < 2:
        raise ValidationError("preview resolution must be at least 2x2")
    if args.mode == "quadratic":
        mesh = torusgeom.quadratic_preview(plan.state, plan.a, plan.b, args.nu, args.nv)
    else:
        mesh = inverse.sample_target_quad(plan.patch, plan.corners, args.nu, args.nv)
    torusgeom.export_obj(mesh, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    plan = inverse.load_plan(args.plan)
    card = load_material_card(args.material)
    if card.name != plan.material:
        raise ValidationError(
            f"material card {card.name!r} does not match plan material {plan.material!r}"
        )
    target = inverse.load_target(args.target)
    report = inverse.verify_plan(plan, target, card)
    _write_json_atomic(report.to_dict(), args.out)
    _dump_json(report.to_dict(), sys.stdout)
    return EXIT_OK if report.passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="platemorph",
        description="Forward and inverse design of self-morphing printed bilayer plates.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("forward", help="solve one bilayer free-recovery state")
    p.add_argument("--material", required=True, help="material card JSON path")
    p.add_argument("--theta1", type=float, required=True, help="bottom layer angle (deg)")
    p.add_argument("--theta2", type=float, required=True, help="top layer angle (deg)")
    p.add_argument("--t1", type=float, required=True, help="bottom layer thickness (mm)")
    p.add_argument("--t2", type=float, required=True, help="top layer thickness (mm)")
    p.add_argument("--ta", type=float, required=True, help="activation temperature (C)")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("map", help="sweep the (theta1, theta2) design map")
    p.add_argument("--material", required=True)
    p.add_argument("--t1", type=float, required=True)
    p.add_argument("--t2", type=float, required=True)
    p.add_argument("--ta", type=float, required=True)
    p.add_argument("--step", type=float, default=1.0, help="angle step (deg), must divide 180")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--svg", nargs="*", default=[], metavar="FIELD",
                   help=f"fields to render as SVG heatmaps ({', '.join(MAP_FIELDS)})")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("inverse", help="plan a flat plate for a target surface")
    p.add_argument("--material", required=True)
    p.add_argument("--target", required=True, help="target .json (analytic patch) or .obj (mesh)")
    p.add_argument("--ratio", type=float, required=True, help="thickness ratio t1/t2")
    p.add_argument("--thickness", type=float, required=True, help="total thickness (mm)")
    p.add_argument("--ta", type=float, required=True)
    p.add_argument("--out", required=True, help="print-plan JSON output path")
    p.add_argument("--step", type=float, default=1.0, help="search grid step (deg)")
    p.add_argument("--sweep-ratio", type=_float_list, default=(),
                   help="comma list of thickness ratios to sweep")
    p.add_argument("--sweep-ta", type=_float_list, default=(),
                   help="comma list of activation temperatures to sweep")
    p.add_argument("--max-a", type=float, default=None, help="max plate size along x (mm)")
    p.add_argument("--max-b", type=float, default=None, help="max plate size along y (mm)")
    p.set_defaults(func=cmd_inverse)

    p = sub.add_parser("preview", help="export the deployed shape of a plan as OBJ")
    p.add_argument("--plan", required=True)
    p.add_argument("--mode", choices=("quadratic", "torus"), default="quadratic")
    p.add_argument("--nu", type=int, default=41)
    p.add_argument("--nv", type=int, default=41)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preview)

    p = sub.add_parser("verify", help="check a plan against its target surface")
    p.add_argument("--plan", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--material", required=True)
    p.add_argument("--out", required=True, help="verification report JSON path")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (PlateMorphError, OSError) as exc:
        _dump_json(_error_payload(exc), sys.stderr)
        return _exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
