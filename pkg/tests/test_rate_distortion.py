"""Blahut-Arimoto solvers against closed forms and curve properties."""

import math

import numpy as np
import pytest

from lossyci import (
    Alphabet,
    DistortionMeasure,
    InfeasibleDistortionError,
    ValidationError,
    ba_at_distortion,
    ba_joint,
    ba_single,
    dsbs,
    hamming,
    validate,
)

B = Alphabet(("0", "1"))
T = Alphabet(("0", "1", "2"))


def hb(p):
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def test_binary_uniform_closed_form():
    for d in (0.0, 0.05, 0.1, 0.25, 0.45):
        sol = ba_at_distortion(np.array([0.5, 0.5]), hamming(B), d)
        assert sol.converged
        assert sol.rate == pytest.approx(1.0 - hb(d), abs=1e-4)
        assert sol.distortions[0] <= d + 1e-6


def test_binary_skewed_closed_form():
    # R(D) = h(p) - h(D) for D <= p
    p = 0.25
    for d in (0.05, 0.1, 0.2):
        sol = ba_at_distortion(np.array([p, 1 - p]), hamming(B), d)
        assert sol.converged
        assert sol.rate == pytest.approx(hb(p) - hb(d), abs=1e-4)


def test_ternary_uniform_closed_form():
    # R(D) = log2(3) - h(D) - D * log2(2) on the uniform ternary source
    sol = ba_at_distortion(np.full(3, 1 / 3), hamming(T), 0.2)
    assert sol.converged
    assert sol.rate == pytest.approx(0.6630344058337938, abs=1e-4)


def test_zero_rate_region():
    sol = ba_at_distortion(np.array([0.5, 0.5]), hamming(B), 0.6)
    assert sol.converged
    assert sol.rate == 0.0
    assert sol.lagrange == (0.0,)
    assert sol.distortions[0] == pytest.approx(0.5, abs=1e-12)


def test_infeasible_target_raises():
    costs = np.array([[0.3, 1.0], [1.0, 0.3]])  # distortion floor 0.3
    m = DistortionMeasure(B, B, costs)
    with pytest.raises(InfeasibleDistortionError):
        ba_at_distortion(np.array([0.5, 0.5]), m, 0.1)


def test_distortion_measure_validation():
    with pytest.raises(ValidationError):
        DistortionMeasure(B, B, np.array([[0.0, -1.0], [1.0, 0.0]]))
    with pytest.raises(ValidationError):
        DistortionMeasure(B, B, np.full((2, 2), np.inf))
    with pytest.raises(ValidationError):
        hamming(B, T)


def test_lagrange_zero_gives_zero_rate():
    sol = ba_single(np.array([0.3, 0.7]), hamming(B), 0.0)
    assert sol.rate == pytest.approx(0.0, abs=1e-12)


def test_encoder_rows_are_distributions():
    sol = ba_at_distortion(np.array([0.2, 0.3, 0.5]), hamming(T), 0.15)
    np.testing.assert_allclose(sol.encoder.kernel.sum(axis=-1), 1.0, atol=1e-12)
    assert np.all(sol.encoder.kernel >= 0)


def test_objective_trace_non_increasing():
    sol = ba_single(np.array([0.5, 0.5]), hamming(B), 2.0)
    trace = np.array(sol.objective_trace)
    assert np.all(np.diff(trace) <= 1e-12)


def test_curve_monotone_and_targets_hit():
    p = np.array([0.2, 0.3, 0.5])
    rates = []
    for d in np.linspace(0.0, 0.5, 11):
        sol = ba_at_distortion(p, hamming(T), float(d))
        assert sol.converged, f"no convergence at D={d}"
        assert sol.distortions[0] <= d + 1e-6
        rates.append(sol.rate)
    assert all(r1 - r0 <= 1e-9 for r0, r1 in zip(rates, rates[1:]))


def test_joint_lossless_is_joint_entropy():
    src = dsbs(0.1)
    sol = ba_joint(src, hamming(B), hamming(B), (0.0, 0.0))
    assert sol.converged
    # H(X1, X2) for the 0.1-crossover symmetric pair
    assert sol.rate == pytest.approx(1.4689955935892813, abs=1e-4)


def test_joint_rate_between_single_letter_bounds():
    src = dsbs(0.1)
    sol = ba_joint(src, hamming(B), hamming(B), (0.1, 0.1))
    assert sol.converged
    r_single = 1.0 - hb(0.1)
    assert sol.rate <= 2 * r_single + 1e-6  # coding the two sides separately
    assert sol.rate >= r_single - 1e-6  # each side alone needs this much


def test_joint_separates_on_independent_source():
    px = np.array([0.3, 0.7])
    py = np.array([0.4, 0.6])
    src = validate(np.outer(px, py), [("X1", ("0", "1")), ("X2", ("0", "1"))])
    sol = ba_joint(src, hamming(B), hamming(B), (0.05, 0.1))
    r1 = ba_at_distortion(px, hamming(B), 0.05).rate
    r2 = ba_at_distortion(py, hamming(B), 0.1).rate
    assert sol.converged
    assert sol.rate == pytest.approx(r1 + r2, abs=2e-4)


def test_joint_time_shares_across_breakpoints():
    # the per-coordinate distortion of the optimal test channel jumps at
    # multiplier breakpoints; mixing bracket encoders must still hit targets
    src = dsbs(0.1)
    sol = ba_joint(src, hamming(B), hamming(B), (0.2, 0.0))
    assert sol.converged
    assert sol.distortions[0] <= 0.2 + 1e-6
    assert sol.distortions[1] <= 1e-6
    harder = ba_joint(src, hamming(B), hamming(B), (0.15, 0.0))
    assert harder.converged
    assert harder.rate >= sol.rate - 1e-9


def test_joint_zero_rate_region():
    src = dsbs(0.1)
    sol = ba_joint(src, hamming(B), hamming(B), (0.6, 0.7))
    assert sol.converged
    assert sol.rate == 0.0


def test_joint_infeasible_raises():
    src = dsbs(0.1)
    costs = np.array([[0.2, 1.0], [1.0, 0.2]])
    m = DistortionMeasure(B, B, costs)
    with pytest.raises(InfeasibleDistortionError):
        ba_joint(src, m, hamming(B), (0.05, 0.5))


def test_joint_rejects_mismatched_measure():
    src = dsbs(0.1)
    with pytest.raises(ValidationError):
        ba_joint(src, hamming(T), hamming(B), (0.1, 0.1))
