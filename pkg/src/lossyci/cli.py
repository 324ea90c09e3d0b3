"""Command-line front end.

Subcommands: info, rd, wyner, gk, verify, equality-demo, sweep, gen.
Exit codes: 0 success, 2 input or validation error, 3 solver
non-convergence, 4 bound violated beyond tolerance.  Results are printed
with 6 decimal places; ``gen`` emits full-precision JSON so its output
revalidates exactly.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import common_info, rate_distortion, sandwich, shannon, sources
from .config import RunConfig
from .probability import (
    JointDistribution,
    ValidationError,
    attach,
    deterministic_channel,
    distribution_from_json,
    distribution_to_json,
    label_projection,
    marginalize,
    shared_component_source,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NO_CONVERGENCE = 3
EXIT_BOUND_VIOLATION = 4


class NonConvergenceError(RuntimeError):
    """A solver finished without meeting its convergence contract."""


class BoundViolationError(RuntimeError):
    """The certified inequality chain failed beyond tolerance."""


def _round6(obj):
    if isinstance(obj, float):
        return round(obj, 6)
    if isinstance(obj, dict):
        return {k: _round6(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round6(v) for v in obj]
    return obj


def _print_json(obj):
    print(json.dumps(_round6(obj), indent=2))


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _load_dist(path: str) -> JointDistribution:
    with open(path) as fh:
        return distribution_from_json(fh.read())


def _group(arg: str) -> tuple:
    return tuple(s for s in arg.split(",") if s)


def _config_from(args) -> RunConfig:
    kwargs = {}
    for attr, key in (
        ("u_card", "u_cardinality"),
        ("restarts", "restarts"),
        ("seed", "seed"),
        ("solver_tol", "solver_tol"),
        ("feas_tol", "feasibility_tol"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            kwargs[key] = value
    return RunConfig(**kwargs)


def _hamming_pair(source):
    (n1, a1), (n2, a2) = source.variables
    return rate_distortion.hamming(a1), rate_distortion.hamming(a2)


def _four_variable_joint(args):
    """Load a reconstruction-extended joint, building encoders when needed.

    A 4-variable distribution is used as-is (variable order: X1, X2,
    Zhat1, Zhat2).  A 2-variable source requires --d1/--d2 and is extended
    with Hamming-optimal encoders: the joint encoder for the upper-bound
    path, per-marginal encoders for the lower-bound path.
    """
    joint = _load_dist(args.dist)
    if len(joint.variables) == 4:
        x_names = joint.names[:2]
        z_names = joint.names[2:]
        return joint, x_names, z_names, None
    if len(joint.variables) != 2:
        raise ValidationError("expected a 2-variable source or a 4-variable joint")
    if args.d1 is None or args.d2 is None:
        raise ValidationError("a 2-variable source needs --d1 and --d2")
    return joint, joint.names, None, (args.d1, args.d2)


def cmd_info(args) -> int:
    joint = _load_dist(args.dist)
    out = {}
    if args.entropy:
        out["entropy_bits"] = shannon.entropy(joint, _group(args.entropy))
    if args.mi:
        out["mi_bits"] = shannon.mutual_information(
            joint, _group(args.mi[0]), _group(args.mi[1])
        )
    if args.cmi:
        out["cmi_bits"] = shannon.conditional_mutual_information(
            joint, *(_group(g) for g in args.cmi)
        )
    if args.interaction:
        out["interaction_bits"] = shannon.interaction_information(
            joint, *(_group(g) for g in args.interaction)
        )
    if args.markov:
        out["markov_residual_bits"] = shannon.markov_residual(
            joint, *(_group(g) for g in args.markov)
        )
    if not out:
        raise ValidationError(
            "nothing to compute: pass --entropy, --mi, --cmi, --interaction or --markov"
        )
    _print_json(out)
    return EXIT_OK


def cmd_rd(args) -> int:
    joint = _load_dist(args.dist)
    if args.joint:
        if len(joint.variables) != 2:
            raise ValidationError("--joint needs a 2-variable source")
        if args.d1 is None or args.d2 is None:
            raise ValidationError("--joint needs --d1 and --d2")
        d1, d2 = _hamming_pair(joint)
        sol = rate_distortion.ba_joint(joint, d1, d2, (args.d1, args.d2))
        if not sol.converged:
            raise NonConvergenceError("joint rate-distortion solve did not converge")
        print("d1_target,d2_target,rate_bits,distortion1,distortion2,iterations,converged")
        print(
            f"{_fmt(args.d1)},{_fmt(args.d2)},{_fmt(sol.rate)},"
            f"{_fmt(sol.distortions[0])},{_fmt(sol.distortions[1])},"
            f"{sol.iterations},{sol.converged}"
        )
        return EXIT_OK
    name = args.var or joint.names[0]
    pmf = marginalize(joint, (name,)).probs
    measure = rate_distortion.hamming(joint.alphabet(name))
    targets = [float(t) for t in args.targets.split(",")] if args.targets else [0.0]
    print("d_target,rate_bits,distortion,iterations,converged")
    code = EXIT_OK
    for t in targets:
        sol = rate_distortion.ba_at_distortion(pmf, measure, t, input_name=name)
        if not sol.converged:
            code = EXIT_NO_CONVERGENCE
        print(
            f"{_fmt(t)},{_fmt(sol.rate)},{_fmt(sol.distortions[0])},"
            f"{sol.iterations},{sol.converged}"
        )
    return code


def cmd_wyner(args) -> int:
    joint, x_names, z_names, targets = _four_variable_joint(args)
    cfg = _config_from(args)
    if z_names is None:
        d1, d2 = _hamming_pair(joint)
        sol = rate_distortion.ba_joint(joint, d1, d2, targets)
        if not sol.converged:
            raise NonConvergenceError("joint rate-distortion solve did not converge")
        joint = attach(joint, sol.encoder)
        z_names = sol.encoder.output_names
    w = common_info.wyner_upper(
        joint,
        u_card=cfg.u_cardinality,
        restarts=cfg.restarts,
        seed=cfg.seed,
        tol=cfg.feasibility_tol,
        x_names=x_names,
        z_names=z_names,
    )
    if not w.feasible(cfg.feasibility_tol):
        raise NonConvergenceError(
            f"no feasible decomposition found (residual {w.marginal_match_residual:.2e}); "
            "consider raising --u-card or --restarts"
        )
    _print_json(
        {
            "objective_bits": w.objective,
            "u_cardinality": w.u_cardinality,
            "marginal_match_residual": w.marginal_match_residual,
            "restarts_used": w.restarts_used,
            "p_u": list(w.p_u),
        }
    )
    return EXIT_OK


def cmd_gk(args) -> int:
    joint, x_names, z_names, targets = _four_variable_joint(args)
    cfg = _config_from(args)
    if z_names is None:
        d1, d2 = _hamming_pair(joint)
        p1 = marginalize(joint, (x_names[0],)).probs
        p2 = marginalize(joint, (x_names[1],)).probs
        m1 = rate_distortion.ba_at_distortion(
            p1, d1, targets[0], input_name=x_names[0], output_name="Zhat1"
        )
        m2 = rate_distortion.ba_at_distortion(
            p2, d2, targets[1], input_name=x_names[1], output_name="Zhat2"
        )
        if not (m1.converged and m2.converged):
            raise NonConvergenceError("marginal rate-distortion solve did not converge")
        joint = attach(attach(joint, m1.encoder), m2.encoder)
        z_names = ("Zhat1", "Zhat2")
    g = common_info.gk_lower(joint, x_names=x_names, z_names=z_names)
    _print_json(
        {
            "objective_bits": g.objective,
            "v_cardinality": len(g.v_alphabet),
            "condition_residuals": dict(g.condition_residuals),
        }
    )
    return EXIT_OK


def _report_obj(report: sandwich.BoundReport) -> dict:
    return {
        "k_lower_bits": report.k_lower,
        "i_mid_bits": report.i_mid,
        "c_upper_bits": report.c_upper,
        "slack_left_bits": report.slack_left,
        "slack_right_bits": report.slack_right,
        "encoder_rate_bits": report.encoder_rate,
        "distortions": list(report.distortions) if report.distortions else None,
        "residuals": dict(report.residuals),
        "equality_left": report.equality_left,
        "equality_right": report.equality_right,
        "converged": report.converged,
    }


def _check_chain(report: sandwich.BoundReport, cfg: RunConfig) -> None:
    if not report.converged:
        raise NonConvergenceError("a solver did not converge; no assertion made")
    if report.feasible(cfg.feasibility_tol):
        if report.slack_left < -cfg.feasibility_tol or report.slack_right < -cfg.solver_tol:
            raise BoundViolationError(
                f"bound chain violated: k={report.k_lower:.6f} "
                f"i={report.i_mid:.6f} c={report.c_upper:.6f}"
            )


def cmd_verify(args) -> int:
    source = _load_dist(args.dist)
    if len(source.variables) != 2:
        raise ValidationError("verify needs a 2-variable source")
    cfg = _config_from(args)
    d1, d2 = _hamming_pair(source)
    report = sandwich.sandwich_check(source, d1, d2, (args.d1, args.d2), cfg)
    _print_json(_report_obj(report))
    _check_chain(report, cfg)
    return EXIT_OK


def _equality_channels(kind: str, source: JointDistribution):
    x1, x2 = source.names
    a1, a2 = source.alphabet(x1), source.alphabet(x2)
    if kind == "copy":
        c1 = deterministic_channel(x1, a1, range(len(a1)), "Zhat1", a1.symbols)
        c2 = deterministic_channel(x2, a2, range(len(a2)), "Zhat2", a2.symbols)
    elif kind == "project":
        c1 = label_projection(x1, a1, 1, "Zhat1")
        c2 = label_projection(x2, a2, 1, "Zhat2")
    elif kind == "mixed":
        c1 = deterministic_channel(x1, a1, range(len(a1)), "Zhat1", a1.symbols)
        c2 = label_projection(x2, a2, 1, "Zhat2")
    else:
        raise ValidationError(f"unknown channel kind {kind!r}")
    return c1, c2


def cmd_equality_demo(args) -> int:
    rng = np.random.default_rng(args.seed)

    def pmf(k):
        v = rng.random(k) + 0.2
        return v / v.sum()

    w = pmf(args.w_size)
    x1p = pmf(args.x1_size)
    x2p = pmf(args.x2_size)
    source = shared_component_source(w, x1p, x2p)
    c1, c2 = _equality_channels(args.channels, source)
    cfg = _config_from(args)
    report = sandwich.equality_case_check(w, x1p, x2p, c1, c2, config=cfg)
    h_w = float(-(w * np.log2(w)).sum())

    print(f"shared-component source: |W|={args.w_size} |X'1|={args.x1_size} "
          f"|X'2|={args.x2_size} seed={args.seed} channels={args.channels}")
    print(f"H(W) = {_fmt(h_w)} bits")
    print()
    print("equality-condition residuals:")
    for key in (
        "ci_z1_z2_given_w",
        "w_from_reconstructions",
        "zero_info_z1_w_given_z2",
        "zero_info_z2_w_given_z1",
        "hw_identity",
    ):
        print(f"  {key:<28} {report.residuals[key]:.3e}")
    print()
    print(f"k_lower = {_fmt(report.k_lower)}  i_mid = {_fmt(report.i_mid)}  "
          f"c_upper = {_fmt(report.c_upper)}")
    print(f"equality certified: {report.equality_left}")

    # replay both bounding chains with the shared variable as auxiliary
    full = attach(source, label_projection(source.names[0], source.alphabet(source.names[0]), 1, "W"))
    full = attach(attach(full, c1), c2)
    for side in ("rhs", "lhs"):
        trace = sandwich.proof_trace(full, side, aux="W", x_names=source.names)
        print()
        print(f"{side} chain (auxiliary = W):")
        for step in trace.steps:
            rel = "<=" if step.inequality else "=="
            print(f"  {step.lhs: .6f} {rel} {step.rhs: .6f}  "
                  f"residual {step.residual:.3e}  {step.label}")
    print()
    print("implications:")
    for imp in sandwich.implication_suite(full, x_names=source.names):
        status = "vacuous" if imp.vacuous else ("holds" if imp.holds else "VIOLATED")
        print(f"  [{status}] {imp.label}: consequent {imp.consequent_name} "
              f"residual {imp.consequent_residual:.3e}")
    return EXIT_OK


def _parse_grid(spec: str) -> np.ndarray:
    try:
        start, stop, count = spec.split(":")
        return np.linspace(float(start), float(stop), int(count))
    except ValueError:
        raise ValidationError(f"grid {spec!r} must be start:stop:count")


def cmd_sweep(args) -> int:
    source = _load_dist(args.dist)
    if len(source.variables) != 2:
        raise ValidationError("sweep needs a 2-variable source")
    cfg = _config_from(args)
    d1, d2 = _hamming_pair(source)
    grid1 = _parse_grid(args.d1_grid)
    grid2 = _parse_grid(args.d2_grid)
    print("d1,d2,k_lower,i_mid,c_upper,slack_left,slack_right")
    code = EXIT_OK
    for t1 in grid1:
        for t2 in grid2:
            report = sandwich.sandwich_check(source, d1, d2, (t1, t2), cfg)
            print(
                f"{_fmt(t1)},{_fmt(t2)},{_fmt(report.k_lower)},{_fmt(report.i_mid)},"
                f"{_fmt(report.c_upper)},{_fmt(report.slack_left)},{_fmt(report.slack_right)}"
            )
            if not report.converged:
                code = EXIT_NO_CONVERGENCE
    return code


def cmd_gen(args) -> int:
    if args.family == "dsbs":
        joint = sources.dsbs(args.p)
    elif args.family == "shared":
        joint = sources.shared_random(args.w, args.x1, args.x2, args.seed)
    elif args.family == "blockdiag":
        joint = sources.block_diagonal(args.blocks, args.size, args.seed)
    else:
        joint = sources.random_joint(args.shape, args.seed)
    print(distribution_to_json(joint))
    return EXIT_OK


def _add_solver_flags(sub):
    sub.add_argument("--u-card", type=int, default=None, dest="u_card")
    sub.add_argument("--restarts", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--solver-tol", type=float, default=None, dest="solver_tol")
    sub.add_argument("--feas-tol", type=float, default=None, dest="feas_tol")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lossyci",
        description="Common-information bounds for finite pair sources.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("info", help="information measures of a stored distribution")
    p.add_argument("--dist", required=True)
    p.add_argument("--entropy", metavar="GROUP")
    p.add_argument("--mi", nargs=2, metavar=("A", "B"))
    p.add_argument("--cmi", nargs=3, metavar=("A", "B", "C"))
    p.add_argument("--interaction", nargs=3, metavar=("A", "B", "C"))
    p.add_argument("--markov", nargs=3, metavar=("A", "B", "C"))
    p.set_defaults(func=cmd_info)

    p = subs.add_parser("rd", help="rate-distortion points (Hamming distortion)")
    p.add_argument("--dist", required=True)
    p.add_argument("--var", default=None, help="variable for single-source mode")
    p.add_argument("--targets", default=None, help="comma-separated distortion targets")
    p.add_argument("--joint", action="store_true", help="two-constraint pair mode")
    p.add_argument("--d1", type=float, default=None)
    p.add_argument("--d2", type=float, default=None)
    p.set_defaults(func=cmd_rd)

    p = subs.add_parser("wyner", help="conditional-independence upper bound")
    p.add_argument("--dist", required=True)
    p.add_argument("--d1", type=float, default=None)
    p.add_argument("--d2", type=float, default=None)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_wyner)

    p = subs.add_parser("gk", help="common-part lower bound")
    p.add_argument("--dist", required=True)
    p.add_argument("--d1", type=float, default=None)
    p.add_argument("--d2", type=float, default=None)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_gk)

    p = subs.add_parser("verify", help="certified bound chain for a pair source")
    p.add_argument("--dist", required=True)
    p.add_argument("--d1", type=float, required=True)
    p.add_argument("--d2", type=float, required=True)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_verify)

    p = subs.add_parser("equality-demo", help="walk an equality construction end to end")
    p.add_argument("--w-size", type=int, default=2, dest="w_size")
    p.add_argument("--x1-size", type=int, default=2, dest="x1_size")
    p.add_argument("--x2-size", type=int, default=2, dest="x2_size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--channels", choices=("copy", "project", "mixed"), default="copy")
    p.add_argument("--u-card", type=int, default=None, dest="u_card")
    p.add_argument("--restarts", type=int, default=None)
    p.set_defaults(func=cmd_equality_demo)

    p = subs.add_parser("sweep", help="bound chain over a distortion grid (CSV)")
    p.add_argument("--dist", required=True)
    p.add_argument("--d1-grid", required=True, dest="d1_grid", metavar="START:STOP:COUNT")
    p.add_argument("--d2-grid", required=True, dest="d2_grid", metavar="START:STOP:COUNT")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = subs.add_parser("gen", help="generate a test-family distribution")
    fams = p.add_subparsers(dest="family", required=True)
    f = fams.add_parser("dsbs")
    f.add_argument("--p", type=float, required=True)
    f = fams.add_parser("shared")
    f.add_argument("--w", type=int, required=True)
    f.add_argument("--x1", type=int, required=True)
    f.add_argument("--x2", type=int, required=True)
    f.add_argument("--seed", type=int, default=0)
    f = fams.add_parser("blockdiag")
    f.add_argument("--blocks", type=int, required=True)
    f.add_argument("--size", type=int, required=True)
    f.add_argument("--seed", type=int, default=None)
    f = fams.add_parser("random")
    f.add_argument("--shape", type=int, nargs="+", required=True)
    f.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0,) else 0
    try:
        return args.func(args)
    except (ValidationError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except BoundViolationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BOUND_VIOLATION


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
