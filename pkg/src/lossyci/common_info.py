"""Common-information bounds for a pair source with reconstructions.

Two families of quantities are computed on a joint distribution over
(X1, X2, Zhat1, Zhat2):

* ``wyner_upper`` minimizes I(X1,X2;U) over auxiliary variables U that
  render Zhat1 and Zhat2 conditionally independent while reproducing
  their joint marginal.  Any feasible decomposition certifies an upper
  bound, so the returned objective over-estimates the true minimum
  regardless of optimizer quality.
* ``gk_lower`` maximizes I(X1,X2;V) over variables V recoverable from
  each side separately (four Markov constraints).  It builds the common
  part of the support of P(X1,X2) and coarsens it until it is computable
  from Zhat1 alone and from Zhat2 alone, so the returned objective
  under-estimates the true maximum.

``wyner_bruteforce`` and ``gk_bruteforce`` are independent grid searches
used to cross-check the solvers on small instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from . import shannon
from .probability import (
    Alphabet,
    Channel,
    JointDistribution,
    ValidationError,
    attach,
    deterministic_channel,
    marginalize,
)

LN2 = float(np.log(2.0))
FEASIBLE_TOL = 1e-6
PENALTY_LADDER = (1e2, 1e4, 1e6, 1e8)


class UnionFind:
    """Disjoint sets with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return
        if self.size[ri] < self.size[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        self.size[ri] += self.size[rj]


# --------------------------------------------------------------- common part

@dataclass(frozen=True)
class CommonPart:
    """Connected components of the support of a two-variable distribution.

    Components are numbered by first occurrence in a row-major scan of the
    support.  Both label channels are deterministic and agree on every
    support cell; symbols with zero marginal mass map to component 0.
    """

    n_components: int
    component_of: dict
    row_labels: np.ndarray
    col_labels: np.ndarray
    masses: np.ndarray
    row_channel: Channel
    col_channel: Channel


def gk_common_part(joint: JointDistribution, component_name: str = "C") -> CommonPart:
    """Common part of a two-variable joint via union-find on its support."""
    if len(joint.variables) != 2:
        raise ValidationError("common part needs a two-variable joint")
    probs = joint.probs
    n1, n2 = probs.shape
    uf = UnionFind(n1 + n2)
    cells = np.argwhere(probs > 0)
    for i, j in cells:
        uf.union(int(i), n1 + int(j))
    root_to_id: dict[int, int] = {}
    component_of = {}
    for i, j in cells:
        root = uf.find(int(i))
        if root not in root_to_id:
            root_to_id[root] = len(root_to_id)
        component_of[(int(i), int(j))] = root_to_id[root]
    n_comp = max(len(root_to_id), 1)
    row_mass = probs.sum(axis=1)
    col_mass = probs.sum(axis=0)
    row_labels = np.zeros(n1, dtype=int)
    col_labels = np.zeros(n2, dtype=int)
    for i in range(n1):
        if row_mass[i] > 0:
            row_labels[i] = root_to_id[uf.find(i)]
    for j in range(n2):
        if col_mass[j] > 0:
            col_labels[j] = root_to_id[uf.find(n1 + j)]
    masses = np.zeros(n_comp)
    for (i, j), c in component_of.items():
        masses[c] += probs[i, j]
    comp_symbols = tuple(f"c{k}" for k in range(n_comp))
    (name1, alpha1), (name2, alpha2) = joint.variables
    row_channel = deterministic_channel(name1, alpha1, row_labels, component_name, comp_symbols)
    col_channel = deterministic_channel(name2, alpha2, col_labels, component_name, comp_symbols)
    return CommonPart(
        n_components=n_comp,
        component_of=component_of,
        row_labels=row_labels,
        col_labels=col_labels,
        masses=masses,
        row_channel=row_channel,
        col_channel=col_channel,
    )


# ---------------------------------------------------------------- GK bounds

GK_CONDITIONS = ("x2_x1_v", "x1_x2_v", "x1_z1_v", "x2_z2_v")


@dataclass(frozen=True)
class GKSolution:
    """A variable V recoverable from each reconstruction, with its value H(V).

    ``condition_residuals`` holds the four Markov residuals
    I(X2;V|X1), I(X1;V|X2), I(X1;V|Zhat1), I(X2;V|Zhat2) evaluated on the
    joint extended with V.
    """

    v_alphabet: Alphabet
    v_map_from_z1: Channel
    v_map_from_z2: Channel
    v_map_from_x1: Channel
    v_map_from_x2: Channel
    objective: float
    condition_residuals: dict

    def feasible(self, eps: float = 1e-9) -> bool:
        return all(r <= eps for r in self.condition_residuals.values())


def _resolve_names(joint, x_names, z_names):
    for n in (*x_names, *z_names):
        if n not in joint.names:
            raise KeyError(f"unknown variable {n!r}; have {joint.names}")


def gk_lower(
    joint: JointDistribution,
    eps: float = 1e-9,
    x_names=("X1", "X2"),
    z_names=("Zhat1", "Zhat2"),
    v_name: str = "V",
) -> GKSolution:
    """Best common-part coarsening recoverable from Zhat1 alone and Zhat2 alone.

    Merges common-part components of P(X1,X2) that co-occur under some
    reconstruction letter; the result is the finest labeling whose four
    Markov residuals vanish, hence the largest certified value H(V).
    """
    _resolve_names(joint, x_names, z_names)
    if v_name in joint.names:
        raise ValidationError(f"variable {v_name!r} already present")
    cp = gk_common_part(marginalize(joint, x_names))
    uf = UnionFind(cp.n_components)
    for x_name, z_name, labels in (
        (x_names[0], z_names[0], cp.row_labels),
        (x_names[1], z_names[1], cp.col_labels),
    ):
        pxz = marginalize(joint, (x_name, z_name)).probs
        for col in range(pxz.shape[1]):
            rows = np.nonzero(pxz[:, col] > 0)[0]
            for r in rows[1:]:
                uf.union(int(labels[rows[0]]), int(labels[r]))
    class_of_comp = {}
    for c in range(cp.n_components):
        root = uf.find(c)
        if root not in class_of_comp:
            class_of_comp[root] = len(class_of_comp)
    comp_class = np.array([class_of_comp[uf.find(c)] for c in range(cp.n_components)])
    n_classes = len(class_of_comp)
    v_masses = np.zeros(n_classes)
    for c in range(cp.n_components):
        v_masses[comp_class[c]] += cp.masses[c]
    v_masses = v_masses / v_masses.sum()
    objective = max(0.0, float(-xlogy(v_masses, v_masses).sum() / LN2))
    v_symbols = tuple(f"v{k}" for k in range(n_classes))

    def z_map(x_name, z_name, labels):
        pxz = marginalize(joint, (x_name, z_name)).probs
        mapping = np.zeros(pxz.shape[1], dtype=int)
        for col in range(pxz.shape[1]):
            rows = np.nonzero(pxz[:, col] > 0)[0]
            if rows.size:
                classes = {int(comp_class[labels[r]]) for r in rows}
                assert len(classes) == 1, "coarsening must be decodable per letter"
                mapping[col] = classes.pop()
        return deterministic_channel(z_name, joint.alphabet(z_name), mapping, v_name, v_symbols)

    map_z1 = z_map(x_names[0], z_names[0], cp.row_labels)
    map_z2 = z_map(x_names[1], z_names[1], cp.col_labels)
    map_x1 = deterministic_channel(
        x_names[0], joint.alphabet(x_names[0]),
        comp_class[cp.row_labels], v_name, v_symbols,
    )
    map_x2 = deterministic_channel(
        x_names[1], joint.alphabet(x_names[1]),
        comp_class[cp.col_labels], v_name, v_symbols,
    )
    extended = attach(joint, map_z1)
    residuals = {
        "x2_x1_v": shannon.conditional_mutual_information(
            extended, (x_names[1],), (v_name,), (x_names[0],)
        ),
        "x1_x2_v": shannon.conditional_mutual_information(
            extended, (x_names[0],), (v_name,), (x_names[1],)
        ),
        "x1_z1_v": shannon.conditional_mutual_information(
            extended, (x_names[0],), (v_name,), (z_names[0],)
        ),
        "x2_z2_v": shannon.conditional_mutual_information(
            extended, (x_names[1],), (v_name,), (z_names[1],)
        ),
    }
    return GKSolution(
        v_alphabet=Alphabet(v_symbols),
        v_map_from_z1=map_z1,
        v_map_from_z2=map_z2,
        v_map_from_x1=map_x1,
        v_map_from_x2=map_x2,
        objective=objective,
        condition_residuals=residuals,
    )


def _simplex_lattice(k: int, steps: int) -> np.ndarray:
    """All pmfs on k letters with entries that are multiples of 1/steps."""
    rows = [
        np.array(c, dtype=float) / steps
        for c in itertools.product(range(steps + 1), repeat=k)
        if sum(c) == steps
    ]
    return np.stack(rows)


def gk_bruteforce(
    joint: JointDistribution,
    v_card: int,
    eps: float = 1e-9,
    grid_steps: int = 0,
    x_names=("X1", "X2"),
    z_names=("Zhat1", "Zhat2"),
    v_name: str = "V",
) -> float:
    """Exhaustive search over V = f(X1) maps, optionally plus stochastic rows.

    Enumerates every deterministic labeling of X1 into at most ``v_card``
    classes and, when ``grid_steps`` > 0, every row-stochastic P(V|X1) with
    rows on the simplex lattice of that resolution.  Keeps candidates whose
    four Markov residuals are all <= eps and returns the largest
    I(X1,X2;V) among them (the constant V always qualifies).
    """
    _resolve_names(joint, x_names, z_names)
    nx1 = len(joint.alphabet(x_names[0]))
    if v_card ** nx1 > 1_000_000:
        raise ValidationError("deterministic map enumeration too large")
    v_symbols = tuple(f"v{k}" for k in range(v_card))
    alpha1 = joint.alphabet(x_names[0])
    best = 0.0

    def score(channel) -> None:
        nonlocal best
        extended = attach(joint, channel)
        residuals = (
            shannon.conditional_mutual_information(extended, (x_names[1],), (v_name,), (x_names[0],)),
            shannon.conditional_mutual_information(extended, (x_names[0],), (v_name,), (x_names[1],)),
            shannon.conditional_mutual_information(extended, (x_names[0],), (v_name,), (z_names[0],)),
            shannon.conditional_mutual_information(extended, (x_names[1],), (v_name,), (z_names[1],)),
        )
        if max(residuals) <= eps:
            value = shannon.mutual_information(extended, x_names, (v_name,))
            if value > best:
                best = value

    for mapping in itertools.product(range(v_card), repeat=nx1):
        score(deterministic_channel(x_names[0], alpha1, mapping, v_name, v_symbols))
    if grid_steps > 0:
        lattice = _simplex_lattice(v_card, grid_steps)
        if lattice.shape[0] ** nx1 > 200_000:
            raise ValidationError("stochastic grid enumeration too large")
        for rows in itertools.product(range(lattice.shape[0]), repeat=nx1):
            kernel = lattice[list(rows)]
            channel = Channel(
                inputs=((x_names[0], alpha1),),
                outputs=((v_name, Alphabet(v_symbols)),),
                kernel=kernel,
            )
            score(channel)
    return best


# -------------------------------------------------------------- Wyner bound

@dataclass(frozen=True)
class WynerSolution:
    """A decomposition (P(U), P(Zhat1|U), P(Zhat2|U)) and its certified value.

    Conditional independence of the reconstructions given U holds by
    parameterization; ``marginal_match_residual`` is the L1 gap between the
    decomposition's (Zhat1, Zhat2) marginal and the true one.  ``objective``
    is I(X1,X2;U) evaluated on the true joint extended with the Bayes
    posterior ``u_given_z``, so the base Markov condition holds exactly.
    """

    u_cardinality: int
    p_u: np.ndarray
    p_z1_given_u: Channel
    p_z2_given_u: Channel
    objective: float
    marginal_match_residual: float
    restarts_used: int
    u_given_z: Channel = field(repr=False, default=None)

    def feasible(self, tol: float = FEASIBLE_TOL) -> bool:
        return self.marginal_match_residual < tol


def _project_rows_to_simplex(x: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto the probability simplex."""
    srt = np.sort(x, axis=-1)[..., ::-1]
    css = np.cumsum(srt, axis=-1) - 1.0
    k = np.arange(1, x.shape[-1] + 1)
    rho = ((srt - css / k) > 0).sum(axis=-1)
    theta = np.take_along_axis(css, rho[..., None] - 1, axis=-1) / rho[..., None]
    return np.maximum(x - theta, 0.0)


def _wyner_tensors(joint, x_names, z_names):
    ordered = marginalize(joint, (*x_names, *z_names)).probs
    nx = ordered.shape[0] * ordered.shape[1]
    p_xz = ordered.reshape(nx, ordered.shape[2], ordered.shape[3])
    p_z = p_xz.sum(axis=0)
    p_x = p_xz.sum(axis=(1, 2))
    return p_xz, p_z, p_x


def _wyner_objective(p, A, B, p_xz, p_z, p_x):
    """Objective (bits), L1 residual and intermediates for one decomposition."""
    M = p[:, None, None] * A[:, :, None] * B[:, None, :]
    Q = M.sum(axis=0)
    residual = float(np.abs(Q - p_z).sum())
    Qs = np.where(Q > 0, Q, 1.0)
    qpost = M / Qs
    J = np.einsum("xij,uij->xu", p_xz, qpost)
    # mass on letters the decomposition misses is spread uniformly over U,
    # matching how conditioning fills zero-probability rows
    missing = (Q == 0) & (p_z > 0)
    if np.any(missing):
        J = J + p_xz[:, missing].sum(axis=1)[:, None] / p.size
    JU = J.sum(axis=0)
    f_nats = float(xlogy(J, J).sum() - xlogy(p_x, p_x).sum() - xlogy(JU, JU).sum())
    return f_nats, residual, (M, Q, Qs, qpost, J, JU)


def _wyner_gradients(p, A, B, beta, p_xz, p_x, p_z, intermediates):
    M, Q, Qs, qpost, J, JU = intermediates
    Px_safe = np.where(p_x > 0, p_x, 1.0)
    JU_safe = np.where(JU > 0, JU, 1.0)
    with np.errstate(divide="ignore"):
        L = np.where(
            J > 0,
            np.log(np.where(J > 0, J, 1.0))
            - np.log(Px_safe)[:, None]
            - np.log(JU_safe)[None, :],
            0.0,
        )
    G = np.einsum("xij,xu->uij", p_xz, L)
    centered = G - (qpost * G).sum(axis=0)[None, :, :]
    T = centered / Qs[None, :, :] + 2.0 * beta * (Q - p_z)[None, :, :]
    AB = A[:, :, None] * B[:, None, :]
    grad_p = (AB * T).sum(axis=(1, 2))
    grad_A = p[:, None] * np.einsum("uij,uj->ui", T, B)
    grad_B = p[:, None] * np.einsum("uij,ui->uj", T, A)
    return grad_p, grad_A, grad_B


def _penalty_sq(intermediates, p_z) -> float:
    Q = intermediates[1]
    return float(((Q - p_z) ** 2).sum())


def _wyner_descend(p, A, B, p_xz, p_z, p_x, max_stage_iters):
    """Projected gradient descent with an escalating quadratic penalty."""
    p, A, B = p.copy(), A.copy(), B.copy()
    last_beta = PENALTY_LADDER[-1]
    for beta in PENALTY_LADDER:
        # early stages only steer toward the feasible set; solve them loosely
        stop = 1e-12 if beta == last_beta else 1e-9
        f, res, inter = _wyner_objective(p, A, B, p_xz, p_z, p_x)
        merit = f + beta * _penalty_sq(inter, p_z)
        step_hint = None
        for _ in range(max_stage_iters):
            gp, gA, gB = _wyner_gradients(p, A, B, beta, p_xz, p_x, p_z, inter)
            scale = max(
                1.0,
                float(np.abs(gp).max(initial=0.0)),
                float(np.abs(gA).max(initial=0.0)),
                float(np.abs(gB).max(initial=0.0)),
            )
            step = 0.5 / scale if step_hint is None else min(0.5 / scale, 4.0 * step_hint)
            improved = False
            while step > 1e-14:
                p_new = _project_rows_to_simplex(p - step * gp)
                A_new = _project_rows_to_simplex(A - step * gA)
                B_new = _project_rows_to_simplex(B - step * gB)
                f_new, res_new, inter_new = _wyner_objective(
                    p_new, A_new, B_new, p_xz, p_z, p_x
                )
                merit_new = f_new + beta * _penalty_sq(inter_new, p_z)
                if merit_new < merit - 1e-15:
                    p, A, B = p_new, A_new, B_new
                    f, res, inter = f_new, res_new, inter_new
                    improved = merit - merit_new
                    merit = merit_new
                    step_hint = step
                    break
                step *= 0.5
            if not improved:
                break
            if improved < stop * max(1.0, abs(merit)):
                break
    f, res, _ = _wyner_objective(p, A, B, p_xz, p_z, p_x)
    return p, A, B, f / LN2, res


def _component_init(p_z, u_card):
    """Start from the support components of the reconstruction-pair marginal."""
    n1, n2 = p_z.shape
    pair = JointDistribution(
        (("r", Alphabet(tuple(map(str, range(n1))))), ("c", Alphabet(tuple(map(str, range(n2)))))),
        p_z / p_z.sum(),
    )
    cp = gk_common_part(pair)
    if cp.n_components > u_card:
        return None
    p = np.zeros(u_card)
    A = np.full((u_card, n1), 1.0 / n1)
    B = np.full((u_card, n2), 1.0 / n2)
    for c in range(cp.n_components):
        p[c] = cp.masses[c]
        rows = cp.row_labels == c
        cols = cp.col_labels == c
        mask_r = np.where(rows, p_z.sum(axis=1), 0.0)
        mask_c = np.where(cols, p_z.sum(axis=0), 0.0)
        if mask_r.sum() > 0:
            A[c] = mask_r / mask_r.sum()
        if mask_c.sum() > 0:
            B[c] = mask_c / mask_c.sum()
    return p, A, B


def _pair_init(p_z, u_card):
    """Exact decomposition with one atom per reconstruction pair."""
    n1, n2 = p_z.shape
    if u_card < n1 * n2:
        return None
    p = np.zeros(u_card)
    A = np.full((u_card, n1), 1.0 / n1)
    B = np.full((u_card, n2), 1.0 / n2)
    for i in range(n1):
        for j in range(n2):
            u = i * n2 + j
            p[u] = p_z[i, j]
            A[u] = 0.0
            A[u, i] = 1.0
            B[u] = 0.0
            B[u, j] = 1.0
    return p, A, B


def wyner_upper(
    joint: JointDistribution,
    u_card: int | None = None,
    restarts: int = 4,
    seed: int = 0,
    tol: float = FEASIBLE_TOL,
    x_names=("X1", "X2"),
    z_names=("Zhat1", "Zhat2"),
    u_name: str = "U",
    max_stage_iters: int = 400,
) -> WynerSolution:
    """Upper-bound I(X1,X2;U) over U making the reconstructions independent.

    Deterministic starting points (the one-atom-per-pair decomposition and
    the support-component decomposition, when the cardinality allows them)
    are scored alongside ``restarts`` seeded random starts refined by
    penalized projected gradient descent.  The best candidate with
    marginal-match residual below ``tol`` wins; with none feasible the
    lowest-residual candidate is returned for inspection.
    """
    _resolve_names(joint, x_names, z_names)
    if u_name in joint.names:
        raise ValidationError(f"variable {u_name!r} already present")
    p_xz, p_z, p_x = _wyner_tensors(joint, x_names, z_names)
    n1, n2 = p_z.shape
    K = u_card if u_card is not None else n1 * n2
    if K < 1:
        raise ValidationError("u_card must be >= 1")

    candidates = []  # (objective_bits, residual, p, A, B)

    def add_raw(init):
        if init is None:
            return
        p0, A0, B0 = init
        f, res, _ = _wyner_objective(p0, A0, B0, p_xz, p_z, p_x)
        candidates.append((f / LN2, res, p0, A0, B0))

    def add_descended(init):
        if init is None:
            return
        p0, A0, B0 = init
        p1, A1, B1, f_bits, res = _wyner_descend(p0, A0, B0, p_xz, p_z, p_x, max_stage_iters)
        candidates.append((f_bits, res, p1, A1, B1))

    def at_floor():
        # mutual information cannot go below zero, so a feasible candidate
        # at zero ends the search
        return any(res < tol and obj <= 1e-12 for obj, res, _, _, _ in candidates)

    add_raw(_pair_init(p_z, K))
    comp = _component_init(p_z, K)
    add_raw(comp)
    if not at_floor():
        add_descended(comp)
    rng_root = np.random.default_rng(seed)
    for r in range(restarts):
        if at_floor():
            break
        rng = np.random.default_rng(rng_root.integers(0, 2**63 - 1))
        p0 = rng.random(K) + 0.1
        p0 /= p0.sum()
        A0 = rng.random((K, n1)) + 0.1
        A0 /= A0.sum(axis=1, keepdims=True)
        B0 = rng.random((K, n2)) + 0.1
        B0 /= B0.sum(axis=1, keepdims=True)
        add_descended((p0, A0, B0))

    feasible = [c for c in candidates if c[1] < tol]
    if feasible:
        best = min(feasible, key=lambda c: c[0])  # ties keep the earliest start
    else:
        best = min(candidates, key=lambda c: c[1])
    obj, res, p, A, B = best

    u_alpha = Alphabet(tuple(f"u{k}" for k in range(K)))
    z1_var = (z_names[0], joint.alphabet(z_names[0]))
    z2_var = (z_names[1], joint.alphabet(z_names[1]))
    chan_z1 = Channel(inputs=((u_name, u_alpha),), outputs=(z1_var,), kernel=A)
    chan_z2 = Channel(inputs=((u_name, u_alpha),), outputs=(z2_var,), kernel=B)
    M = p[:, None, None] * A[:, :, None] * B[:, None, :]
    Q = M.sum(axis=0)
    post = np.where(Q[None] > 0, M / np.where(Q > 0, Q, 1.0)[None], 1.0 / K)
    uniform_rows = tuple(map(tuple, np.argwhere(Q == 0))) if np.any(Q == 0) else ()
    u_given_z = Channel(
        inputs=(z1_var, z2_var),
        outputs=((u_name, u_alpha),),
        kernel=np.moveaxis(post, 0, -1),
        uniform_rows=uniform_rows,
    )
    extended = attach(joint, u_given_z)
    certified = shannon.mutual_information(extended, x_names, (u_name,))
    return WynerSolution(
        u_cardinality=K,
        p_u=p,
        p_z1_given_u=chan_z1,
        p_z2_given_u=chan_z2,
        objective=certified,
        marginal_match_residual=res,
        restarts_used=len(candidates),
        u_given_z=u_given_z,
    )


def wyner_bruteforce(
    joint: JointDistribution,
    u_card: int,
    grid_steps: int = 24,
    feas_tol: float = 5e-4,
    x_names=("X1", "X2"),
    z_names=("Zhat1", "Zhat2"),
    budget: float = 1e8,
    zoom_passes: int = 10,
) -> float:
    """Grid search over (P(U), P(Zhat1|U), P(Zhat2|U)) at resolution 1/grid_steps.

    Scans the full product grid over the free simplex coordinates, then
    repeatedly re-grids around the best cell, shrinking the window each
    pass.  The feasible set is a lower-dimensional manifold, so a single
    refinement cannot push the residual below ~1/grid_steps^2; the zoom
    continues until grid points sit within ``feas_tol`` of the marginal
    constraint.  Returns the smallest objective with residual <= feas_tol.
    """
    _resolve_names(joint, x_names, z_names)
    p_xz, p_z, p_x = _wyner_tensors(joint, x_names, z_names)
    n1, n2 = p_z.shape
    K = u_card
    free = (K - 1) + K * (n1 - 1) + K * (n2 - 1)
    n_vals = grid_steps + 1
    if float(n_vals) ** free > budget:
        raise ValidationError(
            f"grid of {n_vals}^{free} points exceeds the {budget:.0e} budget"
        )
    const_x = float(xlogy(p_x, p_x).sum())

    def evaluate(params, gate):
        """params: (N, free) free coordinates; returns objective, residual."""
        N = params.shape[0]
        p_free = params[:, : K - 1]
        p = np.concatenate([p_free, 1.0 - p_free.sum(axis=1, keepdims=True)], axis=1)
        a_free = params[:, K - 1: K - 1 + K * (n1 - 1)].reshape(N, K, n1 - 1)
        A = np.concatenate([a_free, 1.0 - a_free.sum(axis=2, keepdims=True)], axis=2)
        b_free = params[:, K - 1 + K * (n1 - 1):].reshape(N, K, n2 - 1)
        B = np.concatenate([b_free, 1.0 - b_free.sum(axis=2, keepdims=True)], axis=2)
        valid = (p[:, -1] > -1e-12) & (A[:, :, -1] > -1e-12).all(axis=1) & (
            B[:, :, -1] > -1e-12
        ).all(axis=1)
        p = np.clip(p, 0.0, None)
        A = np.clip(A, 0.0, None)
        B = np.clip(B, 0.0, None)
        M = p[:, :, None, None] * A[:, :, :, None] * B[:, :, None, :]
        Q = M.sum(axis=1)
        residual = np.abs(Q - p_z[None]).sum(axis=(1, 2))
        residual[~valid] = np.inf
        interesting = residual <= gate
        objective = np.full(N, np.inf)
        if np.any(interesting):
            Mi = M[interesting]
            Qi = Q[interesting]
            Qs = np.where(Qi > 0, Qi, 1.0)
            qpost = Mi / Qs[:, None]
            J = np.einsum("xij,nuij->nxu", p_xz, qpost)
            missing = (Qi == 0) & (p_z[None] > 0)
            if np.any(missing):
                lost = np.einsum("xij,nij->nx", p_xz, missing.astype(float))
                J = J + lost[:, :, None] / K
            JU = J.sum(axis=1)
            f = xlogy(J, J).sum(axis=(1, 2)) - const_x - xlogy(JU, JU).sum(axis=1)
            objective[interesting] = f / LN2
        return objective, residual

    best_obj = np.inf  # best objective seen at the strict tolerance, any pass
    best_params = None
    # centering score: the bare objective is ~0 at infeasible product
    # points, so the zoom would chase the relaxed optimum off the
    # constraint manifold; the residual term keeps it feasibility-first
    beta = 8.0

    def scan(grids, gate):
        """One full scan; returns the zoom center (best penalized score,
        else least infeasible) and updates the strict-tolerance best."""
        nonlocal best_obj, best_params
        dims = tuple(len(g) for g in grids)
        total = int(np.prod([float(d) for d in dims]))
        chunk = 1_000_000
        center_score, center, center_res = np.inf, None, np.inf
        fallback_res, fallback = np.inf, None
        for start in range(0, total, chunk):
            idx = np.arange(start, min(start + chunk, total))
            coords = np.unravel_index(idx, dims)
            params = np.stack(
                [grids[d][coords[d]] for d in range(len(dims))], axis=1
            )
            obj, res = evaluate(params, gate)
            strict = np.where(res <= feas_tol, obj, np.inf)
            j = int(np.argmin(strict))
            if strict[j] < best_obj:
                best_obj, best_params = strict[j], params[j]
            score = np.where(res <= gate, obj + beta * res, np.inf)
            j = int(np.argmin(score))
            if score[j] < center_score:
                center_score, center, center_res = score[j], params[j], res[j]
            j = int(np.argmin(res))
            if res[j] < fallback_res:
                fallback_res, fallback = res[j], params[j]
        if center is None:
            center, center_res = fallback, fallback_res
        return center, center_res

    step = 1.0 / grid_steps
    center, center_res = scan(
        [np.linspace(0.0, 1.0, n_vals)] * free, max(feas_tol, 3.0 * step)
    )
    if center is None:
        raise ValidationError("grid scan found no candidate point")
    m = 13
    while m > 5 and float(m) ** free > 3e7:
        m -= 2
    if float(m) ** free <= 3e7:
        for _ in range(zoom_passes):
            # the window must reach the constraint manifold, which sits
            # up to ~center_res away in parameter space
            half = min(0.5, max(3.2 * step, 1.5 * center_res))
            grids = [
                np.clip(np.linspace(v - half, v + half, m), 0.0, 1.0)
                for v in center
            ]
            step = 2.0 * half / (m - 1)
            center, center_res = scan(grids, max(feas_tol, 3.0 * step))
    if best_params is None:
        raise ValidationError(
            f"no grid point met the feasibility tolerance {feas_tol}"
        )
    return float(best_obj)
