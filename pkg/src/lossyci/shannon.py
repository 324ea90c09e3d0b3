"""Entropies, mutual informations and Markov residuals, all in bits.

Variable groups are given by name (a string or a sequence of strings) and
are treated as a single composite variable.  Small negative mutual
informations from floating point cancellation (within -1e-12) are clamped
to zero; interaction information is reported signed and never clamped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .probability import JointDistribution, ValidationError, marginalize, _group

LN2 = float(np.log(2.0))
# |negative MI| below this is attributed to rounding and clamped to 0.
NEG_CLAMP = 1e-12


def _entropy_bits(p: np.ndarray) -> float:
    return float(-xlogy(p, p).sum() / LN2)


def _clamp(value: float) -> float:
    if -NEG_CLAMP < value < 0.0:
        return 0.0
    return value


def _check_disjoint(*groups):
    flat = [n for g in groups for n in g]
    if len(set(flat)) != len(flat):
        raise ValidationError(f"groups overlap: {groups}")


def entropy(joint: JointDistribution, group) -> float:
    """H(group) in bits."""
    group = _group(group)
    return _entropy_bits(marginalize(joint, group).probs)


def conditional_entropy(joint: JointDistribution, group, given) -> float:
    """H(group | given) = H(group, given) - H(given), in bits."""
    group, given = _group(group), _group(given)
    _check_disjoint(group, given)
    sub = marginalize(joint, group + given).probs
    h_joint = _entropy_bits(sub)
    h_given = _entropy_bits(sub.sum(axis=tuple(range(len(group)))))
    return max(h_joint - h_given, 0.0)


def mutual_information(joint: JointDistribution, a, b) -> float:
    """I(A;B) = H(A) + H(B) - H(A,B) in bits, clamped at tiny negatives."""
    a, b = _group(a), _group(b)
    _check_disjoint(a, b)
    sub = marginalize(joint, a + b).probs
    h_ab = _entropy_bits(sub)
    h_a = _entropy_bits(sub.sum(axis=tuple(range(len(a), sub.ndim))))
    h_b = _entropy_bits(sub.sum(axis=tuple(range(len(a)))))
    return _clamp(h_a + h_b - h_ab)


def conditional_mutual_information(joint: JointDistribution, a, b, c) -> float:
    """I(A;B|C) = H(A,C) + H(B,C) - H(C) - H(A,B,C) in bits."""
    a, b, c = _group(a), _group(b), _group(c)
    _check_disjoint(a, b, c)
    sub = marginalize(joint, a + b + c).probs
    na, nb = len(a), len(b)
    ax_a = tuple(range(na))
    ax_b = tuple(range(na, na + nb))
    h_abc = _entropy_bits(sub)
    h_ac = _entropy_bits(sub.sum(axis=ax_b))
    h_bc = _entropy_bits(sub.sum(axis=ax_a))
    h_c = _entropy_bits(sub.sum(axis=ax_a + ax_b))
    return _clamp(h_ac + h_bc - h_c - h_abc)


def interaction_information(joint: JointDistribution, a, b, c) -> float:
    """I(A;B;C) = I(A;B) - I(A;B|C); symmetric in its arguments, may be negative."""
    return mutual_information(joint, a, b) - conditional_mutual_information(joint, a, b, c)


@dataclass(frozen=True)
class InteractionBreakdown:
    """Numerical check of I(A;B;C) = I(A,B;C) - I(A;C|B) - I(B;C|A)."""

    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def interaction_breakdown(joint: JointDistribution, a, b, c) -> InteractionBreakdown:
    """Evaluate both sides of the interaction decomposition identity."""
    a, b, c = _group(a), _group(b), _group(c)
    lhs = interaction_information(joint, a, b, c)
    rhs = (
        mutual_information(joint, a + b, c)
        - conditional_mutual_information(joint, a, c, b)
        - conditional_mutual_information(joint, b, c, a)
    )
    return InteractionBreakdown(lhs=lhs, rhs=rhs)


def markov_residual(joint: JointDistribution, a, b, c) -> float:
    """Residual I(A;C|B) of the Markov chain A <-> B <-> C; zero iff it holds."""
    return conditional_mutual_information(joint, a, c, b)
