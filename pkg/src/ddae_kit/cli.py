"""Command-line workflow: analyze / solve / stability / hidden-delays /
check-history / probe.

All reports are JSON tagged with "schema": "ddae-kit/1"; trajectories
are CSV with knot rows emitted twice (side column L and R) so primary
discontinuities stay visible in plots.  stdout carries no diagnostics;
errors go to stderr and are signalled through the exit code:

    0  success
    2  inconsistent restart (partial outputs written)
    3  irregular pencil
    4  malformed input
"""

from __future__ import annotations

import argparse
import json
import sys as _sys

import numpy as np

from .classify import (
    PropagationKind,
    build_backward_system,
    classify,
    classify_matrices,
)
from .errors import (
    DdaeKitError,
    InconsistentRestart,
    MalformedProblem,
    NotAdmissible,
    NotSmoothingType,
    SingularPencil,
)
from .history import check_index3_uniqueness, construct_probe_history, splicing_report
from .model import build_split
from .problemfile import _encode_pieces, load_problem
from .reform import expand_hidden_delays
from .solver import SolverConfig, method_of_steps
from .stability import SearchBox, assess_exponential_stability, spectral_abscissa
from .cheb import cgl_nodes

SCHEMA = "ddae-kit/1"

EXIT_OK = 0
EXIT_INCONSISTENT = 2
EXIT_IRREGULAR = 3
EXIT_MALFORMED = 4


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _scalar_json(value):
    if isinstance(value, complex) or np.iscomplexobj(np.asarray(value)):
        value = complex(value)
        return [value.real, value.imag]
    return float(value)


def _matrix_json(M):
    M = np.asarray(M)
    return [[_scalar_json(v) for v in row] for row in np.atleast_2d(M)]


def _analyze_payload(sys):
    split = build_split(sys)
    M = sys.horizon_intervals
    report = classify(split, M, sys.policy)
    verdict = sys.regularity
    idx3 = check_index3_uniqueness(split, sys.policy)
    splice = splicing_report(sys, split)

    backward = build_backward_system(sys, policy=sys.policy)
    bw = {
        "regular": bool(backward.regularity.regular),
        "det_D": _scalar_json(backward.det_D),
        "propagation": None,
        "legacy": None,
    }
    if backward.regularity.regular:
        bw_report = classify_matrices(
            backward.E, backward.A, backward.D, M, sys.policy
        )
        bw["propagation"] = bw_report.propagation.kind.value
        bw["legacy"] = bw_report.legacy.kind.value

    hidden = None
    if report.propagation.kind is PropagationKind.SMOOTHING:
        exp = expand_hidden_delays(split, M, sys.policy)
        hidden = {
            "nu_D": exp.nu_D,
            "delay_count": len(exp.D_delays),
            "delays": [float((k + 1) * sys.tau) for k in range(exp.nu_D + 1)],
        }

    return {
        "schema": SCHEMA,
        "regularity": {
            "regular": bool(verdict.regular),
            "witness": verdict.witness,
            "det_magnitude": verdict.det_magnitude,
        },
        "decomposition": {
            "n_d": split.n_d,
            "n_a": split.n_a,
            "index": split.nu,
            "rank_ambiguous": bool(split.qwf.rank_ambiguous),
        },
        "propagation": {
            "kind": report.propagation.kind.value,
            "nu_D": report.propagation.nu_D,
            "first_violating_k": report.propagation.first_violating_k,
            "horizon_dependent_note": report.propagation.horizon_dependent_note,
        },
        "legacy": report.legacy.kind.value,
        "evidence": report.evidence,
        "cross_check": bool(report.consistency_flag),
        "index3_uniqueness": {
            "applicable": idx3.applicable,
            "index_le_3": idx3.index_le_3,
            "N_Ba2_zero": idx3.N_Ba2_zero,
            "N2_Ba1_Bd2_zero": idx3.N2_Ba1_Bd2_zero,
            "norm_N_Ba2": idx3.norm_N_Ba2,
            "norm_N2_Ba1_Bd2": idx3.norm_N2_Ba1_Bd2,
        },
        "backward": bw,
        "hidden_delays": hidden,
        "history_checks": {
            "admissible": splice.admissible,
            "admissible_residual": splice.admissible_residual,
            "smooth_c1": splice.smooth_c1,
            "smooth_c1_residual": splice.smooth_c1_residual,
            "smooth_c2": splice.smooth_c2,
            "smooth_c2_residual": splice.smooth_c2_residual,
            "kappa_observed": splice.kappa_observed,
        },
    }


def cmd_analyze(args):
    sys_ = load_problem(args.problem)
    _write_json(args.out, _analyze_payload(sys_))
    return EXIT_OK


def _format_value(v):
    return "%.17g" % v


def _write_trajectory_csv(path, sys_, trajectory, degree):
    complex_field = sys_.is_complex
    n = sys_.n
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if complex_field:
            cols = []
            for j in range(1, n + 1):
                cols += [f"x_{j}_re", f"x_{j}_im"]
        else:
            cols = [f"x_{j}" for j in range(1, n + 1)]
        fh.write(",".join(["t"] + cols + ["side"]) + "\n")
        for seg in trajectory.segments:
            offset = (seg.index - 1) * trajectory.tau
            rows = []
            for p_idx, piece in enumerate(seg.pieces.pieces):
                nodes = 0.5 * (piece.a + piece.b) + 0.5 * (piece.b - piece.a) * cgl_nodes(
                    max(degree, 1)
                )
                for k, t_loc in enumerate(nodes):
                    if p_idx > 0 and k == 0:
                        continue
                    rows.append((float(t_loc), piece.eval(float(t_loc))))
            for r_idx, (t_loc, value) in enumerate(rows):
                side = ""
                if r_idx == 0:
                    side = "R"
                elif r_idx == len(rows) - 1:
                    side = "L"
                if complex_field:
                    vals = []
                    for v in value:
                        vals += [_format_value(np.real(v)), _format_value(np.imag(v))]
                else:
                    vals = [_format_value(np.real(v)) for v in value]
                fh.write(
                    ",".join([_format_value(offset + t_loc)] + vals + [side]) + "\n"
                )


def _ledger_payload(ledger, tau):
    return {
        "schema": SCHEMA,
        "tau": float(tau),
        "knots": [
            {
                "knot_index": e.knot_index,
                "time": float(e.time),
                "matched_order": e.matched_order,
                "first_jump_order": e.first_jump_order,
                "jump_norm": e.jump_norm,
                "inconsistent_restart": e.inconsistent_restart,
            }
            for e in ledger.entries
        ],
    }


def cmd_solve(args):
    sys_ = load_problem(args.problem)
    config = SolverConfig(
        degree=args.degree,
        k_max=args.kmax,
        on_inconsistent=args.on_inconsistent,
    )
    try:
        trajectory, ledger = method_of_steps(sys_, config=config)
    except NotAdmissible as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_MALFORMED
    except InconsistentRestart as exc:
        # hard-stop mode: no outputs are written
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_INCONSISTENT
    _write_trajectory_csv(args.out_csv, sys_, trajectory, args.degree)
    _write_json(args.ledger_out, _ledger_payload(ledger, sys_.tau))
    if ledger.has_inconsistent:
        print("warning: inconsistent restart; partial outputs written",
              file=_sys.stderr)
        return EXIT_INCONSISTENT
    return EXIT_OK


def cmd_stability(args):
    sys_ = load_problem(args.problem)
    split = build_split(sys_)
    box = None
    if args.re_min is not None or args.re_max is not None or args.im_max is not None:
        from .stability import default_box

        base = default_box(sys_.E, sys_.A, sys_.D, sys_.tau)
        box = SearchBox(
            re_min=args.re_min if args.re_min is not None else base.re_min,
            re_max=args.re_max if args.re_max is not None else base.re_max,
            im_max=args.im_max if args.im_max is not None else base.im_max,
        )
    report = spectral_abscissa(sys_, box=box, grid=args.grid)
    verdict = assess_exponential_stability(sys_, split, report)
    payload = {
        "schema": SCHEMA,
        "alpha": report.alpha,
        "roots": [
            {"lambda": [lam.real, lam.imag], "residual": res}
            for lam, res in report.rightmost_roots
        ],
        "box": {
            "re_min": report.box.re_min,
            "re_max": report.box.re_max,
            "im_max": report.box.im_max,
        },
        "grid": list(report.grid),
        "box_limited": report.box_limited,
        "no_roots": report.no_roots,
        "gate": report.gate,
        "verdict": verdict.value,
    }
    _write_json(args.out, payload)
    return EXIT_OK


def cmd_hidden_delays(args):
    sys_ = load_problem(args.problem)
    split = build_split(sys_)
    try:
        exp = expand_hidden_delays(split, sys_.horizon_intervals, sys_.policy)
    except NotSmoothingType as exc:
        _write_json(
            args.out,
            {"schema": SCHEMA, "applicable": False, "reason": str(exc)},
        )
        return EXIT_OK
    payload = {
        "schema": SCHEMA,
        "applicable": True,
        "nu_D": exp.nu_D,
        "delays": [float((k + 1) * sys_.tau) for k in range(exp.nu_D + 1)],
        "J": _matrix_json(exp.J),
        "D": [_matrix_json(Dk) for Dk in exp.D_delays],
    }
    _write_json(args.out, payload)
    return EXIT_OK


def cmd_check_history(args):
    sys_ = load_problem(args.problem)
    split = build_split(sys_)
    splice = splicing_report(sys_, split)
    payload = {
        "schema": SCHEMA,
        "admissible": splice.admissible,
        "admissible_residual": splice.admissible_residual,
        "smooth_c1": splice.smooth_c1,
        "smooth_c1_residual": splice.smooth_c1_residual,
        "smooth_c2": splice.smooth_c2,
        "smooth_c2_residual": splice.smooth_c2_residual,
        "kappa_observed": splice.kappa_observed,
    }
    _write_json(args.out, payload)
    return EXIT_OK


def cmd_probe(args):
    sys_ = load_problem(args.problem)
    split = build_split(sys_)
    dim = split.n_d if args.side == "slow" else split.n_a
    if dim == 0:
        print(f"error: system has no {args.side} part", file=_sys.stderr)
        return EXIT_MALFORMED
    if args.target:
        target = np.array([float(v) for v in args.target.split(",")])
    else:
        target = np.zeros(dim)
        target[0] = 1.0
    try:
        phi = construct_probe_history(split, args.order, target, side=args.side)
    except (ValueError, DdaeKitError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_MALFORMED
    payload = {
        "schema": SCHEMA,
        "order": args.order,
        "side": args.side,
        "target": [float(v) for v in np.real(target)],
        "history": _encode_pieces(phi, np.iscomplexobj(phi.pieces[0][2])),
    }
    _write_json(args.out, payload)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ddae-kit",
        description="Analyze and solve linear delay differential-algebraic equations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="full structural report")
    p.add_argument("problem")
    p.add_argument("out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("solve", help="method-of-steps trajectory and jump ledger")
    p.add_argument("problem")
    p.add_argument("out_csv")
    p.add_argument("ledger_out")
    p.add_argument("--degree", type=int, default=48)
    p.add_argument("--kmax", type=int, default=None)
    p.add_argument(
        "--on-inconsistent", choices=("stop", "record"), default="record",
        dest="on_inconsistent",
    )
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("stability", help="spectral abscissa and verdict")
    p.add_argument("problem")
    p.add_argument("out")
    p.add_argument("--re-min", type=float, default=None, dest="re_min")
    p.add_argument("--re-max", type=float, default=None, dest="re_max")
    p.add_argument("--im-max", type=float, default=None, dest="im_max")
    p.add_argument("--grid", type=int, default=80)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("hidden-delays", help="retarded multi-delay reformulation")
    p.add_argument("problem")
    p.add_argument("out")
    p.set_defaults(func=cmd_hidden_delays)

    p = sub.add_parser("check-history", help="admissibility and splicing checks")
    p.add_argument("problem")
    p.add_argument("out")
    p.set_defaults(func=cmd_check_history)

    p = sub.add_parser("probe", help="construct a worst-case probe history")
    p.add_argument("problem")
    p.add_argument("out")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--side", choices=("slow", "fast"), default="slow")
    p.add_argument("--target", type=str, default=None)
    p.set_defaults(func=cmd_probe)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MalformedProblem as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_MALFORMED
    except SingularPencil as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_IRREGULAR
    except InconsistentRestart as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_INCONSISTENT


if __name__ == "__main__":
    raise SystemExit(main())
