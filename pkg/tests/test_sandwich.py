"""End-to-end bound chain, equality certification, proof replay, implications."""

import numpy as np
import pytest

from lossyci import (
    Alphabet,
    Channel,
    RunConfig,
    ValidationError,
    attach,
    conditional_mutual_information,
    deterministic_channel,
    dsbs,
    entropy,
    equality_case_check,
    hamming,
    implication_suite,
    label_projection,
    mutual_information,
    proof_trace,
    random_joint,
    sandwich_check,
    shared_component_source,
    validate,
)

H_334 = 1.5709505944546684  # entropy of (0.3, 0.3, 0.4)
I_DSBS_01 = 0.5310044064107188  # 1 - h(0.1)
C_DSBS_01 = 0.8727605668001542  # minimal binary-auxiliary split of dsbs(0.1)


def hamming_pair(source):
    return hamming(source.alphabet("X1")), hamming(source.alphabet("X2"))


def check(source, targets, **cfg_kwargs):
    d1, d2 = hamming_pair(source)
    config = RunConfig(**cfg_kwargs) if cfg_kwargs else None
    return sandwich_check(source, d1, d2, targets, config=config)


# ----------------------------------------------------------- the bound chain


def test_copy_source_collapses_to_the_source_entropy():
    src = validate(np.diag([0.3, 0.3, 0.4]), [("X1", "abc"), ("X2", "abc")])
    rep = check(src, (0.0, 0.0))
    assert rep.converged
    assert rep.feasible()
    assert rep.k_lower == pytest.approx(H_334, abs=1e-4)
    assert rep.i_mid == pytest.approx(H_334, abs=1e-6)
    assert rep.c_upper == pytest.approx(H_334, abs=1e-3)
    assert rep.equality_left and rep.equality_right


def test_independent_source_collapses_to_zero():
    src = validate(np.outer([0.3, 0.7], [0.6, 0.4]), [("X1", "ab"), ("X2", "ab")])
    rep = check(src, (0.0, 0.0))
    assert rep.converged
    assert rep.feasible()
    assert rep.k_lower == 0.0
    assert rep.i_mid <= 1e-9
    assert rep.c_upper <= 1e-6


def test_dsbs_lossless_anchors():
    rep = check(dsbs(0.1), (0.0, 0.0))
    assert rep.converged
    assert rep.feasible()
    # full support kills the recoverable common part entirely
    assert rep.k_lower == 0.0
    assert rep.i_mid == pytest.approx(I_DSBS_01, abs=1e-6)
    assert C_DSBS_01 - 1e-9 <= rep.c_upper <= C_DSBS_01 + 2e-3
    assert rep.k_lower <= rep.i_mid + 1e-6
    assert rep.i_mid <= rep.c_upper + 1e-3


def test_dsbs_lossy_gate_rejects_randomized_encoders():
    # at (0.1, 0.1) the optimal test channel carries private randomness, so
    # the auxiliary is not a function of the sources and the chain does not
    # certify; the report must say so rather than assert a broken bound
    rep = check(dsbs(0.1), (0.1, 0.1))
    assert rep.converged
    assert not rep.feasible()
    assert rep.residuals["u_beyond_sources"] > 1e-3
    assert rep.slack_right < 0


def test_distortion_relaxation_lowers_the_rate():
    # note the middle term is not monotone here: a joint encoder may align
    # the reconstructions harder as the targets loosen
    reps = [check(dsbs(0.1), (d, d)) for d in (0.0, 0.05, 0.1)]
    rates = [r.encoder_rate for r in reps]
    assert rates[0] > rates[1] > rates[2]
    assert all(r.converged for r in reps)


def test_rejects_sources_with_more_than_two_variables():
    src = random_joint((2, 2, 2), 0)
    d = hamming(src.alphabet("X1"))
    with pytest.raises(ValidationError):
        sandwich_check(src, d, d, (0.0, 0.0))


# ------------------------------------------------------------- equality case


def identity_channel(src, var, out):
    a = src.alphabet(var)
    return deterministic_channel(var, a, range(len(a)), out, a.symbols)


def test_equality_construction_uniform_shared_bit():
    src = shared_component_source([0.5, 0.5], [1.0], [1.0])
    rep = equality_case_check(
        [0.5, 0.5], [1.0], [1.0],
        identity_channel(src, "X1", "Zhat1"),
        identity_channel(src, "X2", "Zhat2"),
    )
    assert rep.converged
    construction = (r for k, r in rep.residuals.items() if k != "wyner_marginal_match")
    assert all(r <= 1e-9 for r in construction)
    assert rep.residuals["wyner_marginal_match"] <= 1e-6
    assert rep.k_lower == 1.0
    assert rep.i_mid == pytest.approx(1.0, abs=1e-12)
    assert rep.c_upper == pytest.approx(1.0, abs=1e-6)
    assert rep.equality_left and rep.equality_right


def test_equality_construction_with_private_parts():
    src = shared_component_source([0.5, 0.5], [0.6, 0.4], [0.7, 0.3])
    rep = equality_case_check(
        [0.5, 0.5], [0.6, 0.4], [0.7, 0.3],
        identity_channel(src, "X1", "Zhat1"),
        identity_channel(src, "X2", "Zhat2"),
    )
    assert rep.converged
    construction = (r for k, r in rep.residuals.items() if k != "wyner_marginal_match")
    assert all(r <= 1e-9 for r in construction)
    assert rep.residuals["wyner_marginal_match"] <= 1e-6
    assert rep.k_lower == pytest.approx(1.0, abs=1e-4)
    assert rep.i_mid == pytest.approx(1.0, abs=1e-6)
    assert rep.c_upper == pytest.approx(1.0, abs=1e-3)
    assert rep.equality_left and rep.equality_right


def test_equality_construction_trivial_shared_variable():
    src = shared_component_source([1.0], [0.6, 0.4], [0.7, 0.3])
    rep = equality_case_check(
        [1.0], [0.6, 0.4], [0.7, 0.3],
        identity_channel(src, "X1", "Zhat1"),
        identity_channel(src, "X2", "Zhat2"),
    )
    assert rep.k_lower == 0.0
    assert rep.i_mid <= 1e-9
    assert rep.c_upper <= 1e-6


def test_equality_check_rejects_miswired_channels():
    src = shared_component_source([0.5, 0.5], [1.0], [1.0])
    with pytest.raises(ValidationError):
        equality_case_check(
            [0.5, 0.5], [1.0], [1.0],
            identity_channel(src, "X2", "Zhat1"),
            identity_channel(src, "X2", "Zhat2"),
        )


# ------------------------------------------------------------- proof replay


def equality_joint():
    src = shared_component_source([0.5, 0.5], [0.6, 0.4], [1.0])
    w = label_projection("X1", src.alphabet("X1"), 1, "W")
    full = attach(src, w)
    full = attach(full, identity_channel(src, "X1", "Zhat1"))
    return attach(full, identity_channel(src, "X2", "Zhat2"))


def test_proof_replay_on_an_equality_joint():
    full = equality_joint()
    h_w = entropy(full, "W")
    for side in ("rhs", "lhs"):
        trace = proof_trace(full, side, aux="W")
        assert trace.side == side
        for step in trace.steps:
            assert step.residual <= 1e-9
        assert trace.inequality_slack <= 1e-9
        assert trace.start == pytest.approx(h_w, abs=1e-9)
        assert trace.end == pytest.approx(h_w, abs=1e-9)


def test_rhs_slack_identity_on_random_joints():
    # the one inequality drops I(Zhat1;U|Zhat2) + I(Zhat2;U|Zhat1); its slack
    # must equal that sum exactly, feasibility notwithstanding
    for seed in range(12):
        j = random_joint((2, 2, 2, 2, 2), seed, names=("X1", "X2", "Zhat1", "Zhat2", "U"))
        trace = proof_trace(j, "rhs")
        expect = conditional_mutual_information(
            j, ("Zhat1",), ("U",), ("Zhat2",)
        ) + conditional_mutual_information(j, ("Zhat2",), ("U",), ("Zhat1",))
        assert abs(trace.inequality_slack - expect) < 1e-10
        assert trace.start == pytest.approx(
            mutual_information(j, ("Zhat1",), ("Zhat2",)), abs=1e-12
        )
        assert trace.end == pytest.approx(
            mutual_information(j, ("X1", "X2"), ("U",)), abs=1e-12
        )
        for step in trace.steps:
            if step.justification is None and not step.inequality:
                assert step.residual <= 1e-10


def test_lhs_pure_identities_hold_on_random_joints():
    for seed in range(12):
        j = random_joint((2, 2, 2, 2, 2), seed, names=("X1", "X2", "Zhat1", "Zhat2", "V"))
        trace = proof_trace(j, "lhs", aux="V")
        assert trace.start == pytest.approx(
            mutual_information(j, ("X1", "X2"), ("V",)), abs=1e-12
        )
        for step in trace.steps:
            if step.justification is None and not step.inequality:
                assert step.residual <= 1e-10


def test_proof_replay_rejects_bad_arguments():
    full = equality_joint()
    with pytest.raises(ValidationError):
        proof_trace(full, "middle", aux="W")
    with pytest.raises(KeyError):
        proof_trace(full, "rhs", aux="Q")


# -------------------------------------------------------------- implications


def test_implications_on_an_equality_joint():
    results = implication_suite(equality_joint())
    assert len(results) == 4
    for r in results:
        assert not r.vacuous
        assert r.holds is True
        assert r.consequent_residual <= 1e-8


def test_implications_on_a_parity_coupling():
    # W = X1 xor X2 with uniform bits: W is recoverable from the pair but
    # from neither source alone, so the coupling antecedents fail while the
    # recoverability ones survive
    bits = Alphabet(("0", "1"))
    src = validate(np.full((2, 2), 0.25), [("X1", bits.symbols), ("X2", bits.symbols)])
    kernel = np.zeros((2, 2, 2))
    for i in range(2):
        for j in range(2):
            kernel[i, j, (i + j) % 2] = 1.0
    parity = Channel(
        inputs=(("X1", bits), ("X2", bits)), outputs=(("W", bits),), kernel=kernel
    )
    full = attach(src, parity)
    full = attach(full, identity_channel(src, "X1", "Zhat1"))
    full = attach(full, identity_channel(src, "X2", "Zhat2"))
    results = implication_suite(full)
    statuses = [(r.vacuous, r.holds) for r in results]
    assert statuses == [(True, None), (False, True), (True, None), (False, True)]


def test_implications_go_vacuous_under_perturbation():
    full = equality_joint()
    rng = np.random.default_rng(0)
    probs = full.probs + 1e-3 * rng.random(full.probs.shape)
    noisy = validate(
        probs / probs.sum(), [(n, full.alphabet(n).symbols) for n in full.names]
    )
    results = implication_suite(noisy)
    assert all(r.vacuous for r in results)
    assert all(r.holds is None for r in results)
