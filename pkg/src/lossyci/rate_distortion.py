"""Rate-distortion solvers for finite sources (Blahut-Arimoto family).

``ba_single`` runs the alternating-minimization iteration at a fixed
Lagrange multiplier; ``ba_at_distortion`` wraps it in a bisection to hit a
distortion target; ``ba_joint`` solves the two-constraint problem for a
pair source with per-coordinate distortion measures, using one multiplier
per constraint and a nested bisection.  Rates are in bits; multipliers
live in the natural-log domain (the encoder reweighting is exp(-lam * d)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from .probability import Alphabet, Channel, ValidationError

LN2 = float(np.log(2.0))
# Multiplier treated as the lossless limit; exp(-LAMBDA_MAX * d) underflows
# to exact zero for any positive cost, which is the intended behavior.
LAMBDA_MAX = 1e6


class InfeasibleDistortionError(ValueError):
    """Target distortion below what any encoder can achieve."""


@dataclass(frozen=True)
class DistortionMeasure:
    """Per-letter cost d(x, z) >= 0 between a source and a reconstruction alphabet."""

    source_alphabet: Alphabet
    reconstruction_alphabet: Alphabet
    costs: np.ndarray

    def __post_init__(self):
        costs = np.array(self.costs, dtype=float)
        shape = (len(self.source_alphabet), len(self.reconstruction_alphabet))
        if costs.shape != shape:
            raise ValidationError(f"cost matrix shape {costs.shape} != {shape}")
        if np.any(costs < 0) or np.any(np.isnan(costs)):
            raise ValidationError("costs must be nonnegative")
        if not np.all(np.isfinite(costs).any(axis=1)):
            raise ValidationError("every source symbol needs a finite-cost reconstruction")
        costs.setflags(write=False)
        object.__setattr__(self, "costs", costs)


def hamming(alphabet: Alphabet, reconstruction: Alphabet | None = None) -> DistortionMeasure:
    """0/1 cost; by default the reconstruction alphabet equals the source's."""
    rec = reconstruction if reconstruction is not None else alphabet
    if len(rec) != len(alphabet):
        raise ValidationError("hamming needs matching alphabet sizes")
    costs = 1.0 - np.eye(len(alphabet))
    return DistortionMeasure(alphabet, rec, costs)


@dataclass(frozen=True)
class RDSolution:
    """One point on (or near) a rate-distortion curve.

    ``lagrange`` holds the multiplier per distortion constraint,
    ``distortions`` the achieved averages, ``encoder`` the test channel.
    ``objective_trace`` records rate + sum(lam * D) per iteration of the
    final inner solve (bits); it is non-increasing for exact BA updates.
    """

    lagrange: tuple[float, ...]
    rate: float
    distortions: tuple[float, ...]
    encoder: Channel
    iterations: int
    converged: bool
    objective_trace: tuple[float, ...] = field(default=(), repr=False)


def _ba_core(p_x, cost_list, lams, tol, max_iter, q_init=None, dist_tol=0.0):
    """Alternate encoder and output-marginal updates at fixed multipliers.

    ``cost_list`` holds one (n_x, n_z) matrix per constraint, already
    broadcast to the full reconstruction alphabet.  Returns the encoder,
    output marginal, rate (bits), per-constraint distortions, iteration
    count, convergence flag and the per-iteration objective trace.

    ``dist_tol`` > 0 adds an early exit once every distortion moves less
    than it over two consecutive sweeps; the distortions settle long before
    the rate does, which is all a multiplier search needs.
    """
    n_x = p_x.size
    n_z = cost_list[0].shape[1]
    weighted = np.zeros((n_x, n_z))
    for lam, c in zip(lams, cost_list):
        if lam != 0.0:
            weighted = weighted + lam * np.where(np.isfinite(c), c, np.inf)
    finite_row = np.isfinite(weighted).astype(float)
    finite_row /= finite_row.sum(axis=1, keepdims=True)
    q = np.full(n_z, 1.0 / n_z) if q_init is None else q_init.copy()
    rate_prev = np.inf
    dists_prev = None
    stable = 0
    trace = []
    converged = False
    iters = 0
    for iters in range(1, max_iter + 1):
        # shift each row of log q - weighted by its max before exponentiating
        # so the dominant entry is exactly 1 and rows never underflow to zero
        with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
            expo = np.where(q > 0, np.log(np.where(q > 0, q, 1.0)), -np.inf)[None, :] - weighted
            enc = np.exp(expo - expo.max(axis=1, keepdims=True))
        enc[~np.isfinite(enc)] = 0.0
        sums = enc.sum(axis=1)
        dead = sums <= 0.0
        if np.any(dead):
            # every positive-mass output letter is unreachable for these rows;
            # spread over the finite-cost letters (only matters when p_x = 0)
            enc[dead] = finite_row[dead]
            sums = enc.sum(axis=1)
        enc /= sums[:, None]
        q = p_x @ enc
        w = p_x[:, None] * enc
        with np.errstate(divide="ignore", invalid="ignore"):
            log_ratio = np.where(w > 0, np.log(enc / np.where(q > 0, q, 1.0)[None, :]), 0.0)
        rate = float((w * log_ratio).sum() / LN2)
        dists = [float((w * np.where(np.isfinite(c), c, 0.0)).sum()) for c in cost_list]
        trace.append(rate + sum(l * d for l, d in zip(lams, dists)) / LN2)
        if abs(rate - rate_prev) < tol:
            converged = True
            break
        if dist_tol > 0.0 and dists_prev is not None:
            if all(abs(d - dp) < dist_tol for d, dp in zip(dists, dists_prev)):
                stable += 1
                if stable >= 2:
                    converged = True
                    break
            else:
                stable = 0
        rate_prev = rate
        dists_prev = dists
    return enc, q, rate, dists, iters, converged, trace


def _falsi_step(lo, hi, f_lo, f_hi):
    """Regula-falsi proposal inside (lo, hi); midpoint when degenerate."""
    if f_hi == f_lo or not (np.isfinite(f_lo) and np.isfinite(f_hi)):
        return 0.5 * (lo + hi)
    x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
    if not (lo < x < hi):
        return 0.5 * (lo + hi)
    return x


def _warm_start(q):
    """Reopen zeroed output letters before reusing a converged marginal."""
    if q is None:
        return None
    mixed = 0.99 * q + 0.01 / q.size
    return mixed / mixed.sum()


def _eval_encoder(p_x, enc, cost_list):
    """Exact rate (bits) and distortions of a fixed encoder."""
    q = p_x @ enc
    w = p_x[:, None] * enc
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = np.where(w > 0, np.log(enc / np.where(q > 0, q, 1.0)[None, :]), 0.0)
    rate = float((w * log_ratio).sum() / LN2)
    dists = [float((w * np.where(np.isfinite(c), c, 0.0)).sum()) for c in cost_list]
    return rate, dists


def _encoder_channel(src_name, src_alpha, out_names, out_alphas, enc, out_shape):
    outputs = tuple((n, a) for n, a in zip(out_names, out_alphas))
    kernel = enc.reshape((len(src_alpha),) + out_shape)
    return kernel, outputs


def ba_single(
    p_x,
    measure: DistortionMeasure,
    lam: float,
    tol: float = 1e-9,
    max_iter: int = 10000,
    input_name: str = "X",
    output_name: str = "Zhat",
) -> RDSolution:
    """Solve min I(X;Z) + lam * E[d] for one source and one distortion measure."""
    p_x = np.asarray(p_x, dtype=float)
    if p_x.shape != (len(measure.source_alphabet),):
        raise ValidationError("source pmf does not match the distortion measure")
    if lam < 0:
        raise ValidationError("lagrange multiplier must be >= 0")
    enc, q, rate, dists, iters, conv, trace = _ba_core(
        p_x, [measure.costs], [lam], tol, max_iter
    )
    encoder = Channel(
        inputs=((input_name, measure.source_alphabet),),
        outputs=((output_name, measure.reconstruction_alphabet),),
        kernel=enc,
    )
    return RDSolution(
        lagrange=(float(lam),),
        rate=rate,
        distortions=tuple(dists),
        encoder=encoder,
        iterations=iters,
        converged=conv,
        objective_trace=tuple(trace),
    )


def _zero_rate_distortion(p_x, costs) -> tuple[float, int]:
    """Best average distortion with a single fixed reconstruction letter."""
    finite = np.where(np.isfinite(costs), costs, np.inf)
    expected = p_x @ finite
    j = int(np.argmin(expected))
    return float(expected[j]), j


def _min_distortion(p_x, costs) -> float:
    """Distortion floor: each source letter uses its cheapest reconstruction."""
    finite = np.where(np.isfinite(costs), costs, np.inf)
    return float(p_x @ finite.min(axis=1))


def ba_at_distortion(
    p_x,
    measure: DistortionMeasure,
    target_d: float,
    tol: float = 1e-6,
    rate_tol: float = 1e-9,
    max_iter: int = 10000,
    input_name: str = "X",
    output_name: str = "Zhat",
) -> RDSolution:
    """Rate-distortion point at a distortion target, via bisection over lam.

    Returns the zero-rate solution when ``target_d`` is at or above the
    zero-rate distortion; raises ``InfeasibleDistortionError`` when it lies
    below the distortion floor.
    """
    p_x = np.asarray(p_x, dtype=float)
    if p_x.shape != (len(measure.source_alphabet),):
        raise ValidationError("source pmf does not match the distortion measure")
    costs = measure.costs
    d_zero, j_best = _zero_rate_distortion(p_x, costs)
    d_floor = _min_distortion(p_x, costs)
    if target_d < d_floor - 1e-12:
        raise InfeasibleDistortionError(
            f"target {target_d} below the distortion floor {d_floor}"
        )
    n_z = len(measure.reconstruction_alphabet)
    if target_d >= d_zero - tol:
        kernel = np.zeros((p_x.size, n_z))
        kernel[:, j_best] = 1.0
        encoder = Channel(
            inputs=((input_name, measure.source_alphabet),),
            outputs=((output_name, measure.reconstruction_alphabet),),
            kernel=kernel,
        )
        return RDSolution(
            lagrange=(0.0,),
            rate=0.0,
            distortions=(d_zero,),
            encoder=encoder,
            iterations=0,
            converged=True,
        )

    q = None
    total = [0]

    def solve(lam, tight=False):
        # the multiplier search only needs settled distortions; the final
        # call re-solves at full rate precision
        nonlocal q
        enc, q, rate, dists, iters, conv, trace = _ba_core(
            p_x, [costs], [lam],
            rate_tol if tight else max(rate_tol, 1e-7),
            max_iter, q_init=_warm_start(q),
            dist_tol=0.0 if tight else 0.02 * tol,
        )
        total[0] += iters
        return enc, rate, dists[0], conv, trace

    # exponential growth to bracket the target, then regula falsi; the
    # lam=0 endpoint is the best single-letter (zero-rate) encoder
    enc0 = np.zeros((p_x.size, n_z))
    enc0[:, j_best] = 1.0
    lo_state = (0.0, enc0, 0.0, d_zero, True, ())
    lo, hi = 0.0, 1.0
    enc, rate, dist, conv, trace = solve(hi)
    while dist > target_d and hi < LAMBDA_MAX:
        lo_state = (hi, enc, rate, dist, conv, trace)
        lo = hi
        hi = min(hi * 4.0, LAMBDA_MAX)
        enc, rate, dist, conv, trace = solve(hi)
    hi_state = (hi, enc, rate, dist, conv, trace)
    best = hi_state
    f_lo, f_hi = lo_state[3] - target_d, hi_state[3] - target_d
    last_side = 0
    for _ in range(80):
        if abs(best[3] - target_d) < tol:
            break
        mid = _falsi_step(lo, hi, f_lo, f_hi)
        if mid == lo or mid == hi:
            break
        enc, rate, dist, conv, trace = solve(mid)
        state = (mid, enc, rate, dist, conv, trace)
        if abs(dist - target_d) < abs(best[3] - target_d):
            best = state
        if dist > target_d:
            lo_state, lo, f_lo = state, mid, dist - target_d
            if last_side == -1:
                f_hi *= 0.5  # Illinois damping against endpoint stagnation
            last_side = -1
        else:
            hi_state, hi, f_hi = state, mid, dist - target_d
            if last_side == 1:
                f_lo *= 0.5
            last_side = 1
    lam = best[0]
    enc, rate, dist, conv, trace = solve(lam, tight=True)
    if abs(dist - target_d) >= tol and lo_state[3] > target_d >= hi_state[3]:
        # distortion jumps across a support breakpoint; the curve is linear
        # over the gap, so time-sharing the endpoint encoders is exactly
        # optimal at the target
        r_lo, d_lo = _eval_encoder(p_x, lo_state[1], [costs])
        r_hi, d_hi = _eval_encoder(p_x, hi_state[1], [costs])
        span = d_lo[0] - d_hi[0]
        alpha = (target_d - d_hi[0]) / span if span > 0 else 0.0
        alpha = min(1.0, max(0.0, alpha))
        enc = alpha * lo_state[1] + (1.0 - alpha) * hi_state[1]
        rate, dists = _eval_encoder(p_x, enc, [costs])
        dist = dists[0]
        lam, conv, trace = hi_state[0], lo_state[4] and hi_state[4], hi_state[5]
    total_iters = total[0]
    # the distortion constraint is an inequality: at or below target counts
    hit = dist <= target_d + tol
    encoder = Channel(
        inputs=((input_name, measure.source_alphabet),),
        outputs=((output_name, measure.reconstruction_alphabet),),
        kernel=enc,
    )
    return RDSolution(
        lagrange=(float(lam),),
        rate=rate,
        distortions=(float(dist),),
        encoder=encoder,
        iterations=total_iters,
        converged=bool(conv and hit),
        objective_trace=tuple(trace),
    )


def ba_joint(
    source,
    d1: DistortionMeasure,
    d2: DistortionMeasure,
    targets,
    tol: float = 1e-6,
    rate_tol: float = 1e-9,
    max_iter: int = 10000,
    output_names=("Zhat1", "Zhat2"),
) -> RDSolution:
    """Joint rate-distortion point for a pair source with two constraints.

    ``source`` is a two-variable JointDistribution; ``d1`` acts on the first
    coordinate and ``d2`` on the second.  Each constraint gets its own
    multiplier; the outer loop bisects the first multiplier while an inner
    bisection re-tunes the second, and either multiplier pins to 0 when its
    constraint is slack at the rate optimum.
    """
    if len(source.variables) != 2:
        raise ValidationError("ba_joint needs a two-variable source")
    (n1_name, a1), (n2_name, a2) = source.variables
    if a1.symbols != d1.source_alphabet.symbols:
        raise ValidationError(f"distortion 1 does not match variable {n1_name!r}")
    if a2.symbols != d2.source_alphabet.symbols:
        raise ValidationError(f"distortion 2 does not match variable {n2_name!r}")
    t1, t2 = float(targets[0]), float(targets[1])
    p_xy = source.probs
    p_x1 = p_xy.sum(axis=1)
    p_x2 = p_xy.sum(axis=0)
    m1, m2 = len(d1.reconstruction_alphabet), len(d2.reconstruction_alphabet)
    # flatten (x1, x2) -> rows and (z1, z2) -> columns
    p_flat = p_xy.reshape(-1)
    c1 = np.broadcast_to(
        d1.costs[:, None, :, None], (p_xy.shape[0], p_xy.shape[1], m1, m2)
    ).reshape(p_flat.size, m1 * m2)
    c2 = np.broadcast_to(
        d2.costs[None, :, None, :], (p_xy.shape[0], p_xy.shape[1], m1, m2)
    ).reshape(p_flat.size, m1 * m2)

    floor1 = _min_distortion(p_x1, d1.costs)
    floor2 = _min_distortion(p_x2, d2.costs)
    if t1 < floor1 - 1e-12:
        raise InfeasibleDistortionError(f"target {t1} below the distortion floor {floor1}")
    if t2 < floor2 - 1e-12:
        raise InfeasibleDistortionError(f"target {t2} below the distortion floor {floor2}")
    zero1, j1 = _zero_rate_distortion(p_x1, d1.costs)
    zero2, j2 = _zero_rate_distortion(p_x2, d2.costs)

    def make_solution(lams, enc, rate, dists, iters, conv, trace):
        kernel = enc.reshape(p_xy.shape + (m1, m2))
        encoder = Channel(
            inputs=source.variables,
            outputs=(
                (output_names[0], d1.reconstruction_alphabet),
                (output_names[1], d2.reconstruction_alphabet),
            ),
            kernel=kernel,
        )
        return RDSolution(
            lagrange=tuple(float(l) for l in lams),
            rate=rate,
            distortions=tuple(float(d) for d in dists),
            encoder=encoder,
            iterations=iters,
            converged=conv,
            objective_trace=tuple(trace),
        )

    if t1 >= zero1 - tol and t2 >= zero2 - tol:
        enc = np.zeros((p_flat.size, m1 * m2))
        enc[:, j1 * m2 + j2] = 1.0
        return make_solution((0.0, 0.0), enc, 0.0, (zero1, zero2), 0, True, ())

    q = None
    counter = [0]

    def solve(l1, l2, tight=False):
        # loose solves suffice while hunting multipliers; see ba_at_distortion
        nonlocal q
        enc, q, rate, dists, iters, conv, trace = _ba_core(
            p_flat, [c1, c2], [l1, l2],
            rate_tol if tight else max(rate_tol, 1e-7),
            max_iter, q_init=_warm_start(q),
            dist_tol=0.0 if tight else 0.02 * tol,
        )
        counter[0] += iters
        return enc, rate, dists, conv, trace

    def mix(lo_out, hi_out, target, idx):
        """Time-share two encoders across a breakpoint to hit one target."""
        r_lo, d_lo = _eval_encoder(p_flat, lo_out[0], [c1, c2])
        r_hi, d_hi = _eval_encoder(p_flat, hi_out[0], [c1, c2])
        span = d_lo[idx] - d_hi[idx]
        alpha = (target - d_hi[idx]) / span if span > 0 else 0.0
        alpha = min(1.0, max(0.0, alpha))
        enc = alpha * lo_out[0] + (1.0 - alpha) * hi_out[0]
        rate, dists = _eval_encoder(p_flat, enc, [c1, c2])
        return enc, rate, dists, lo_out[3] and hi_out[3], hi_out[4]

    def tune_l2(l1):
        """Smallest-rate multiplier for constraint 2 at fixed l1; 0 when slack.

        Returns (l2, out, mixed): ``mixed`` marks a time-shared encoder that
        no single multiplier reproduces.
        """
        lo_out = solve(l1, 0.0)
        if lo_out[2][1] <= t2 + tol:
            return 0.0, lo_out, False
        lo, hi = 0.0, 1.0
        out = solve(l1, hi)
        while out[2][1] > t2 and hi < LAMBDA_MAX:
            lo_out = out
            lo, hi = hi, min(hi * 4.0, LAMBDA_MAX)
            out = solve(l1, hi)
        hi_out = out
        best = (hi, out)
        f_lo, f_hi = lo_out[2][1] - t2, hi_out[2][1] - t2
        last_side = 0
        for _ in range(80):
            if abs(best[1][2][1] - t2) < tol:
                break
            mid = _falsi_step(lo, hi, f_lo, f_hi)
            if mid == lo or mid == hi:
                break
            out = solve(l1, mid)
            if abs(out[2][1] - t2) < abs(best[1][2][1] - t2):
                best = (mid, out)
            if out[2][1] > t2:
                lo_out, lo, f_lo = out, mid, out[2][1] - t2
                if last_side == -1:
                    f_hi *= 0.5
                last_side = -1
            else:
                hi_out, hi, f_hi = out, mid, out[2][1] - t2
                if last_side == 1:
                    f_lo *= 0.5
                last_side = 1
        if abs(best[1][2][1] - t2) >= tol and lo_out[2][1] > t2 >= hi_out[2][1]:
            return best[0], mix(lo_out, hi_out, t2, 1), True
        return best[0], best[1], False

    def polished(l1, l2, out, mixed):
        """Re-solve the chosen multipliers at full precision when possible."""
        if mixed:
            return out
        enc, rate, dists, conv, trace = solve(l1, l2, tight=True)
        if dists[0] <= t1 + tol and dists[1] <= t2 + tol:
            return enc, rate, dists, conv, trace
        return out

    l2_0, out0, mixed0 = tune_l2(0.0)
    if out0[2][0] <= t1 + tol:
        enc, rate, dists, conv, trace = polished(0.0, l2_0, out0, mixed0)
        hit = dists[0] <= t1 + tol and dists[1] <= t2 + tol
        return make_solution((0.0, l2_0), enc, rate, dists, counter[0], conv and hit, trace)

    lo_state = (0.0, l2_0, out0, mixed0)
    lo, hi = 0.0, 1.0
    l2_hi, out_hi, mixed_hi = tune_l2(hi)
    while out_hi[2][0] > t1 and hi < LAMBDA_MAX:
        lo_state = (hi, l2_hi, out_hi, mixed_hi)
        lo, hi = hi, min(hi * 4.0, LAMBDA_MAX)
        l2_hi, out_hi, mixed_hi = tune_l2(hi)
    hi_state = (hi, l2_hi, out_hi, mixed_hi)
    best = hi_state
    f_lo, f_hi = lo_state[2][2][0] - t1, hi_state[2][2][0] - t1
    last_side = 0
    for _ in range(80):
        if abs(best[2][2][0] - t1) < tol:
            break
        mid = _falsi_step(lo, hi, f_lo, f_hi)
        if mid == lo or mid == hi:
            break
        l2_mid, out_mid, mixed_mid = tune_l2(mid)
        state = (mid, l2_mid, out_mid, mixed_mid)
        if abs(out_mid[2][0] - t1) < abs(best[2][2][0] - t1):
            best = state
        if out_mid[2][0] > t1:
            lo_state, lo, f_lo = state, mid, out_mid[2][0] - t1
            if last_side == -1:
                f_hi *= 0.5
            last_side = -1
        else:
            hi_state, hi, f_hi = state, mid, out_mid[2][0] - t1
            if last_side == 1:
                f_lo *= 0.5
            last_side = 1
    l1, l2, out, mixed = best
    if abs(out[2][0] - t1) >= tol and lo_state[2][2][0] > t1 >= hi_state[2][2][0]:
        l1, l2 = hi_state[0], hi_state[1]
        enc, rate, dists, conv, trace = mix(lo_state[2], hi_state[2], t1, 0)
    else:
        enc, rate, dists, conv, trace = polished(l1, l2, out, mixed)
    hit = dists[0] <= t1 + tol and dists[1] <= t2 + tol
    return make_solution(
        (l1, l2), enc, rate, dists, counter[0], bool(conv and hit), trace
    )
