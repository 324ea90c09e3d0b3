"""Sandwich-bound harness: K(X1,X2;D1,D2) <= I(Zhat1;Zhat2) <= C(X1,X2;D1,D2).

Assembles rate-distortion encoders for a pair source, evaluates the
certified lower bound (common-part coarsening), the middle mutual
information, and the certified upper bound (conditional-independence
decomposition), and replays every step of the two bounding chains as a
numerical residual.  The inequality chain is asserted only in certified
form: the lower solver under-estimates and the upper solver over-estimates
their targets, so the chain must hold whenever all feasibility residuals
pass.

The middle term is computed under the joint encoder while the lower bound
uses per-marginal encoders; the two encoder families answer different
optimization problems and the report carries both.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import common_info, rate_distortion, shannon
from .config import RunConfig
from .probability import (
    Channel,
    JointDistribution,
    ValidationError,
    attach,
    label_projection,
    marginalize,
    shared_component_source,
)


@dataclass(frozen=True)
class BoundReport:
    """The three quantities, their slacks, and every residual that was checked."""

    k_lower: float
    i_mid: float
    c_upper: float
    slack_left: float
    slack_right: float
    encoder_rate: float
    distortions: tuple | None
    residuals: dict
    equality_left: bool
    equality_right: bool
    converged: bool
    joint_encoder: Channel | None = field(repr=False, default=None)
    marginal_encoders: tuple | None = field(repr=False, default=None)
    wyner: common_info.WynerSolution | None = field(repr=False, default=None)
    gk: common_info.GKSolution | None = field(repr=False, default=None)

    def feasible(self, tol: float = 1e-6) -> bool:
        return all(r <= tol for r in self.residuals.values())


def _excess(achieved: float, target: float) -> float:
    """Distortion feasibility residual: only exceeding the target counts."""
    return max(0.0, achieved - target)


def sandwich_check(
    source: JointDistribution,
    d1: rate_distortion.DistortionMeasure,
    d2: rate_distortion.DistortionMeasure,
    targets,
    config: RunConfig | None = None,
) -> BoundReport:
    """Evaluate the certified bound chain for one source and target pair.

    The joint encoder comes from ``ba_joint`` (middle and upper terms); the
    per-marginal encoders come from ``ba_at_distortion`` (lower term).  No
    assertion is made when any solver fails to converge.
    """
    cfg = config or RunConfig()
    if len(source.variables) != 2:
        raise ValidationError("sandwich_check needs a two-variable source")
    x_names = source.names
    t1, t2 = float(targets[0]), float(targets[1])

    joint_sol = rate_distortion.ba_joint(
        source, d1, d2, (t1, t2), max_iter=cfg.max_iterations
    )
    joint4 = attach(source, joint_sol.encoder)
    z_names = joint_sol.encoder.output_names
    i_mid = shannon.mutual_information(joint4, (z_names[0],), (z_names[1],))

    wyner = common_info.wyner_upper(
        joint4,
        u_card=cfg.u_cardinality,
        restarts=cfg.restarts,
        seed=cfg.seed,
        tol=cfg.feasibility_tol,
        x_names=x_names,
        z_names=z_names,
    )
    c_upper = wyner.objective

    p1 = marginalize(source, (x_names[0],)).probs
    p2 = marginalize(source, (x_names[1],)).probs
    marg1 = rate_distortion.ba_at_distortion(
        p1, d1, t1, max_iter=cfg.max_iterations,
        input_name=x_names[0], output_name=z_names[0],
    )
    marg2 = rate_distortion.ba_at_distortion(
        p2, d2, t2, max_iter=cfg.max_iterations,
        input_name=x_names[1], output_name=z_names[1],
    )
    gk_joint = attach(attach(source, marg1.encoder), marg2.encoder)
    gk = common_info.gk_lower(
        gk_joint, eps=cfg.identity_tol, x_names=x_names, z_names=z_names
    )
    k_lower = gk.objective

    residuals = {
        "wyner_marginal_match": wyner.marginal_match_residual,
        "rd_joint_d1": _excess(joint_sol.distortions[0], t1),
        "rd_joint_d2": _excess(joint_sol.distortions[1], t2),
        "rd_marginal_d1": _excess(marg1.distortions[0], t1),
        "rd_marginal_d2": _excess(marg2.distortions[0], t2),
    }
    for name, value in gk.condition_residuals.items():
        residuals[f"gk_{name}"] = value

    # the chain-closing Markov conditions, measured on the attached joints:
    # the right side needs Zhat1 - U - Zhat2 and I(Zhat;U|X) = 0 (an encoder
    # carrying private randomness breaks the latter), the left side needs V
    # recoverable from each joint-encoder reconstruction as well
    u_name = wyner.u_given_z.output_names[0]
    u_ext = attach(joint4, wyner.u_given_z)
    residuals["ci_z1_z2_given_u"] = shannon.conditional_mutual_information(
        u_ext, (z_names[0],), (z_names[1],), (u_name,)
    )
    residuals["u_from_reconstructions"] = shannon.conditional_mutual_information(
        u_ext, x_names, (u_name,), z_names
    )
    residuals["u_beyond_sources"] = shannon.conditional_mutual_information(
        u_ext, z_names, (u_name,), x_names
    )
    v_name = gk.v_map_from_x1.output_names[0]
    v_ext = attach(joint4, gk.v_map_from_x1)
    residuals["gk_x1_z1_v_joint"] = shannon.conditional_mutual_information(
        v_ext, (x_names[0],), (v_name,), (z_names[0],)
    )
    residuals["gk_x2_z2_v_joint"] = shannon.conditional_mutual_information(
        v_ext, (x_names[1],), (v_name,), (z_names[1],)
    )

    converged = bool(
        joint_sol.converged
        and marg1.converged
        and marg2.converged
        and wyner.feasible(cfg.feasibility_tol)
    )
    slack_left = i_mid - k_lower
    slack_right = c_upper - i_mid
    return BoundReport(
        k_lower=k_lower,
        i_mid=i_mid,
        c_upper=c_upper,
        slack_left=slack_left,
        slack_right=slack_right,
        encoder_rate=joint_sol.rate,
        distortions=tuple(joint_sol.distortions),
        residuals=residuals,
        equality_left=bool(abs(slack_left) <= cfg.solver_tol),
        equality_right=bool(abs(slack_right) <= cfg.solver_tol),
        converged=converged,
        joint_encoder=joint_sol.encoder,
        marginal_encoders=(marg1.encoder, marg2.encoder),
        wyner=wyner,
        gk=gk,
    )


def equality_case_check(
    w,
    x1p,
    x2p,
    z1_channel: Channel,
    z2_channel: Channel,
    tol: float | None = None,
    config: RunConfig | None = None,
) -> BoundReport:
    """Certify the equality conditions on a shared-component construction.

    Builds X1 = (X'1, W), X2 = (X'2, W), attaches the supplied
    reconstruction channels (inputs X1 and X2 respectively), and checks:
    (a) Zhat1 <-> W <-> Zhat2, (b) (X1,X2) <-> (Zhat1,Zhat2) <-> W,
    (c) I(Zhat1;W|Zhat2) = I(Zhat2;W|Zhat1) = 0, (d) the identity
    I(X1;X2) - I(X1;X2|W) = H(W), and (e) that the three bound quantities
    all equal H(W).  Violations of (a)-(d) are reported as a failed
    certificate, never raised.
    """
    cfg = config or RunConfig()
    eq_tol = tol if tol is not None else cfg.solver_tol
    source = shared_component_source(w, x1p, x2p)
    x_names = source.names
    w_chan = label_projection(x_names[0], source.alphabet(x_names[0]), 1, "W")
    with_w = attach(source, w_chan)
    if z1_channel.input_names != (x_names[0],):
        raise ValidationError(f"z1_channel must take input {x_names[0]!r}")
    if z2_channel.input_names != (x_names[1],):
        raise ValidationError(f"z2_channel must take input {x_names[1]!r}")
    z_names = (z1_channel.output_names[0], z2_channel.output_names[0])
    full = attach(attach(with_w, z1_channel), z2_channel)

    h_w = shannon.entropy(full, "W")
    mi_x = shannon.mutual_information(full, (x_names[0],), (x_names[1],))
    cmi_x_given_w = shannon.conditional_mutual_information(
        full, (x_names[0],), (x_names[1],), ("W",)
    )
    residuals = {
        "ci_z1_z2_given_w": shannon.conditional_mutual_information(
            full, (z_names[0],), (z_names[1],), ("W",)
        ),
        "w_from_reconstructions": shannon.conditional_mutual_information(
            full, x_names, ("W",), z_names
        ),
        "zero_info_z1_w_given_z2": shannon.conditional_mutual_information(
            full, (z_names[0],), ("W",), (z_names[1],)
        ),
        "zero_info_z2_w_given_z1": shannon.conditional_mutual_information(
            full, (z_names[1],), ("W",), (z_names[0],)
        ),
        "hw_identity": abs(mi_x - cmi_x_given_w - h_w),
    }

    four = marginalize(full, (*x_names, *z_names))
    i_mid = shannon.mutual_information(four, (z_names[0],), (z_names[1],))
    gk = common_info.gk_lower(four, eps=cfg.identity_tol, x_names=x_names, z_names=z_names)
    wyner = common_info.wyner_upper(
        four,
        u_card=cfg.u_cardinality,
        restarts=cfg.restarts,
        seed=cfg.seed,
        tol=cfg.feasibility_tol,
        x_names=x_names,
        z_names=z_names,
    )
    residuals["wyner_marginal_match"] = wyner.marginal_match_residual
    for name, value in gk.condition_residuals.items():
        residuals[f"gk_{name}"] = value

    k_lower, c_upper = gk.objective, wyner.objective
    slack_left = i_mid - k_lower
    slack_right = c_upper - i_mid
    equality = (
        abs(k_lower - h_w) <= eq_tol
        and abs(i_mid - h_w) <= eq_tol
        and abs(c_upper - h_w) <= eq_tol
    )
    return BoundReport(
        k_lower=k_lower,
        i_mid=i_mid,
        c_upper=c_upper,
        slack_left=slack_left,
        slack_right=slack_right,
        encoder_rate=shannon.mutual_information(four, x_names, z_names),
        distortions=None,
        residuals=residuals,
        equality_left=equality,
        equality_right=equality,
        converged=wyner.feasible(cfg.feasibility_tol),
        joint_encoder=None,
        marginal_encoders=(z1_channel, z2_channel),
        wyner=wyner,
        gk=gk,
    )


@dataclass(frozen=True)
class ProofStep:
    """One line of a bounding chain, evaluated numerically.

    ``justification`` names the conditional mutual information whose
    vanishing makes an equality step exact (None for pure identities);
    ``justification_residual`` is its value on this joint.  For the single
    inequality step, ``slack`` is rhs - lhs and ``residual`` is the
    violation max(0, lhs - rhs).
    """

    label: str
    lhs: float
    rhs: float
    inequality: bool = False
    justification: str | None = None
    justification_residual: float | None = None

    @property
    def residual(self) -> float:
        if self.inequality:
            return max(0.0, self.lhs - self.rhs)
        return abs(self.lhs - self.rhs)

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs if self.inequality else 0.0


@dataclass(frozen=True)
class ProofTrace:
    side: str
    steps: tuple

    @property
    def start(self) -> float:
        return self.steps[0].lhs

    @property
    def end(self) -> float:
        return self.steps[-1].rhs

    @property
    def inequality_slack(self) -> float:
        return sum(s.slack for s in self.steps if s.inequality)


def proof_trace(
    joint: JointDistribution,
    side: str,
    aux: str = "U",
    x_names=("X1", "X2"),
    z_names=("Zhat1", "Zhat2"),
) -> ProofTrace:
    """Replay one bounding chain step by step on a concrete joint.

    ``side`` is "rhs" (auxiliary renders the reconstructions independent;
    chain runs from I(Zhat1;Zhat2) up to I(X1,X2;U)) or "lhs" (auxiliary is
    extractable from each side; chain runs from I(X1,X2;V) up to
    I(Zhat1;Zhat2)).
    """
    if side not in ("rhs", "lhs"):
        raise ValidationError("side must be 'rhs' or 'lhs'")
    for name in (*x_names, *z_names, aux):
        if name not in joint.names:
            raise KeyError(f"joint is missing variable {name!r}")
    x1, x2 = (x_names[0],), (x_names[1],)
    z1, z2 = (z_names[0],), (z_names[1],)
    xx = x_names
    zz = z_names
    a = (aux,)
    mi = lambda g1, g2: shannon.mutual_information(joint, g1, g2)
    cmi = lambda g1, g2, g3: shannon.conditional_mutual_information(joint, g1, g2, g3)
    ii = lambda g1, g2, g3: shannon.interaction_information(joint, g1, g2, g3)

    if side == "rhs":
        cmi_z1z2_u = cmi(z1, z2, a)
        cmi_z1_u_z2 = cmi(z1, a, z2)
        cmi_z2_u_z1 = cmi(z2, a, z1)
        cmi_x_u_z = cmi(xx, a, zz)
        cmi_z_u_x = cmi(zz, a, xx)
        e0 = mi(z1, z2)
        e1 = ii(z1, z2, a) + cmi_z1z2_u
        e2 = ii(z1, z2, a)
        e3 = mi(zz, a) - cmi_z1_u_z2 - cmi_z2_u_z1
        e4 = mi(zz, a)
        e5 = mi(xx + zz, a) - cmi_x_u_z
        e6 = mi(xx + zz, a)
        e7 = mi(xx, a) + cmi_z_u_x
        e8 = mi(xx, a)
        steps = (
            ProofStep("split off the interaction with the auxiliary", e0, e1),
            ProofStep(
                "reconstructions independent given the auxiliary", e1, e2,
                justification=f"I({z_names[0]};{z_names[1]}|{aux})",
                justification_residual=cmi_z1z2_u,
            ),
            ProofStep("decompose the interaction", e2, e3),
            ProofStep(
                "drop the two conditional informations", e3, e4, inequality=True
            ),
            ProofStep("chain rule over the sources", e4, e5),
            ProofStep(
                "auxiliary determined through the reconstructions", e5, e6,
                justification=f"I({x_names[0]},{x_names[1]};{aux}|{z_names[0]},{z_names[1]})",
                justification_residual=cmi_x_u_z,
            ),
            ProofStep("chain rule over the reconstructions", e6, e7),
            ProofStep(
                "reconstructions carry nothing extra about the auxiliary", e7, e8,
                justification=f"I({z_names[0]},{z_names[1]};{aux}|{x_names[0]},{x_names[1]})",
                justification_residual=cmi_z_u_x,
            ),
        )
        return ProofTrace(side="rhs", steps=steps)

    cmi_x2_v_x1 = cmi(x2, a, x1)
    cmi_x1_v_x2 = cmi(x1, a, x2)
    cmi_x1_v_z1 = cmi(x1, a, z1)
    cmi_x2_v_z2 = cmi(x2, a, z2)
    cmi_z1z2_v = cmi(z1, z2, a)
    e0 = mi(xx, a)
    e1 = mi(x1, a) + cmi_x2_v_x1
    e2 = mi(x1, a)
    e3 = ii(x1, x2, a) + cmi_x1_v_x2
    e4 = ii(x1, x2, a)
    e5 = ii((x_names[0], z_names[0]), (x_names[1], z_names[1]), a)
    e6 = ii(z1, z2, a)
    e7 = mi(z1, z2)
    steps = (
        ProofStep("chain rule over the sources", e0, e1),
        ProofStep(
            "auxiliary extractable from the first source", e1, e2,
            justification=f"I({x_names[1]};{aux}|{x_names[0]})",
            justification_residual=cmi_x2_v_x1,
        ),
        ProofStep("split off the interaction with the second source", e2, e3),
        ProofStep(
            "auxiliary extractable from the second source", e3, e4,
            justification=f"I({x_names[0]};{aux}|{x_names[1]})",
            justification_residual=cmi_x1_v_x2,
        ),
        ProofStep(
            "absorb the reconstructions into each side", e4, e5,
            justification=(
                f"I({x_names[1]};{aux}|{x_names[0]}) and I({x_names[0]};{aux}|{x_names[1]})"
            ),
            justification_residual=max(cmi_x2_v_x1, cmi_x1_v_x2),
        ),
        ProofStep(
            "reduce each side to its reconstruction", e5, e6,
            justification=(
                f"I({x_names[0]};{aux}|{z_names[0]}) and I({x_names[1]};{aux}|{z_names[1]})"
            ),
            justification_residual=max(cmi_x1_v_z1, cmi_x2_v_z2),
        ),
        ProofStep(
            "drop the conditioning on the auxiliary", e6, e7, inequality=True
        ),
    )
    return ProofTrace(side="lhs", steps=steps)


@dataclass(frozen=True)
class ImplicationResult:
    """One structural implication: antecedent residuals and the consequent's."""

    label: str
    antecedent_residuals: dict
    consequent_name: str
    consequent_residual: float
    vacuous: bool
    holds: bool | None


def implication_suite(
    joint: JointDistribution,
    tol: float = 1e-9,
    x_names=("X1", "X2"),
    z_names=("Zhat1", "Zhat2"),
    w_name: str = "W",
) -> list:
    """Check the four structural implications of the equality analysis.

    Each implication is evaluated numerically: when every antecedent
    residual is <= tol the consequent residual is asserted to be
    <= 10 * tol; otherwise the implication is reported as vacuous.
    """
    for name in (*x_names, *z_names, w_name):
        if name not in joint.names:
            raise KeyError(f"joint is missing variable {name!r}")
    x1, x2 = (x_names[0],), (x_names[1],)
    z1, z2 = (z_names[0],), (z_names[1],)
    w = (w_name,)
    cmi = lambda g1, g2, g3: shannon.conditional_mutual_information(joint, g1, g2, g3)

    # the coupling condition: W computable from each source, sources
    # independent given W
    coupling = {
        "h_w_given_x1": shannon.conditional_entropy(joint, w, x1),
        "h_w_given_x2": shannon.conditional_entropy(joint, w, x2),
        "ci_x1_x2_given_w": cmi(x1, x2, w),
    }
    ci_given_w = {"ci_z1_z2_given_w": cmi(z1, z2, w)}
    recover = {"w_from_reconstructions": cmi(x_names, w, z_names)}
    ci_given_x1 = cmi(z1, z2, x1)
    ci_given_x2 = cmi(z1, z2, x2)

    results = []

    def run(label, antecedents, consequent_name, consequent_residual):
        vacuous = any(v > tol for v in antecedents.values())
        holds = None if vacuous else bool(consequent_residual <= 10 * tol)
        results.append(
            ImplicationResult(
                label=label,
                antecedent_residuals=dict(antecedents),
                consequent_name=consequent_name,
                consequent_residual=consequent_residual,
                vacuous=vacuous,
                holds=holds,
            )
        )

    run(
        "reconstructions independent given the first source",
        {**ci_given_w, **coupling},
        f"I({z_names[0]};{z_names[1]}|{x_names[0]})",
        ci_given_x1,
    )
    run(
        "first source linked to the shared variable only through its reconstruction",
        {**recover, "ci_z1_z2_given_x1": ci_given_x1},
        f"I({x_names[0]};{w_name}|{z_names[0]})",
        cmi(x1, w, z1),
    )
    run(
        "reconstructions independent given the second source",
        {**ci_given_w, **coupling},
        f"I({z_names[0]};{z_names[1]}|{x_names[1]})",
        ci_given_x2,
    )
    run(
        "second source linked to the shared variable only through its reconstruction",
        {**recover, "ci_z1_z2_given_x2": ci_given_x2},
        f"I({x_names[1]};{w_name}|{z_names[1]})",
        cmi(x2, w, z2),
    )
    return results
