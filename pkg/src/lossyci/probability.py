"""Finite joint distributions over named variables, and channels between them.

Everything downstream works on these two objects: a ``JointDistribution``
(a nonnegative tensor with one axis per named variable, summing to one)
and a ``Channel`` (a row-stochastic kernel from named inputs to named
outputs).  All tensor layouts are row-major in the declared variable order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

# Entries below this are treated as exact zeros during validation.
CLAMP_EPS = 1e-15
# Tolerated deviation of a raw pmf from unit mass before it is rejected.
SUM_TOL = 1e-9
# Internal invariant: constructed objects must be normalized this tightly.
CONSTRUCTION_TOL = 1e-12
# Separator used in labels of composite symbols such as "a0|w1".
COMPOSITE_SEP = "|"


class ValidationError(ValueError):
    """Raised when raw input fails the distribution or channel contract."""


def _as_symbol_tuple(symbols) -> tuple[str, ...]:
    syms = tuple(str(s) for s in symbols)
    if len(syms) == 0:
        raise ValidationError("alphabet must be nonempty")
    if len(set(syms)) != len(syms):
        raise ValidationError(f"alphabet has repeated symbols: {syms}")
    return syms


@dataclass(frozen=True)
class Alphabet:
    """Ordered finite symbol set for one variable."""

    symbols: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "symbols", _as_symbol_tuple(self.symbols))

    def __len__(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise KeyError(f"symbol {symbol!r} not in alphabet {self.symbols}")


def _freeze_array(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


def _check_variables(variables) -> tuple[tuple[str, Alphabet], ...]:
    out = []
    for name, alpha in variables:
        if not isinstance(alpha, Alphabet):
            alpha = Alphabet(tuple(alpha))
        out.append((str(name), alpha))
    names = [n for n, _ in out]
    if len(set(names)) != len(names):
        raise ValidationError(f"variable names are not unique: {names}")
    return tuple(out)


@dataclass(frozen=True)
class JointDistribution:
    """Probability tensor over one or more named finite variables.

    The tensor axes follow the declared variable order.  Construction
    enforces the tight invariant (nonnegative, unit mass within 1e-12);
    use :func:`validate` to admit raw data under the looser input contract.
    """

    variables: tuple[tuple[str, Alphabet], ...]
    probs: np.ndarray

    def __post_init__(self):
        variables = _check_variables(self.variables)
        probs = _freeze_array(self.probs)
        shape = tuple(len(a) for _, a in variables)
        if probs.shape != shape:
            raise ValidationError(
                f"pmf shape {probs.shape} does not match alphabet sizes {shape}"
            )
        if np.any(probs < 0):
            raise ValidationError("pmf has negative entries")
        total = float(probs.sum())
        if abs(total - 1.0) > CONSTRUCTION_TOL:
            raise ValidationError(f"pmf mass {total!r} deviates from 1 beyond 1e-12")
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "probs", probs)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.variables)

    def alphabet(self, name: str) -> Alphabet:
        for n, a in self.variables:
            if n == name:
                return a
        raise KeyError(f"unknown variable {name!r}; have {self.names}")

    def axis(self, name: str) -> int:
        for i, (n, _) in enumerate(self.variables):
            if n == name:
                return i
        raise KeyError(f"unknown variable {name!r}; have {self.names}")

    def marginal(self, keep) -> "JointDistribution":
        return marginalize(self, keep)

    def condition(self, given) -> "Channel":
        return condition(self, given)

    def attach(self, channel: "Channel") -> "JointDistribution":
        return attach(self, channel)


@dataclass(frozen=True)
class Channel:
    """Row-stochastic kernel P(outputs | inputs) between named variables.

    ``kernel`` has one leading axis per input variable followed by one axis
    per output variable; every input row sums to one within 1e-12.
    ``uniform_rows`` records input index tuples whose rows were filled
    uniformly because the conditioning event had zero probability.
    """

    inputs: tuple[tuple[str, Alphabet], ...]
    outputs: tuple[tuple[str, Alphabet], ...]
    kernel: np.ndarray
    uniform_rows: tuple[tuple[int, ...], ...] = field(default=())

    def __post_init__(self):
        inputs = _check_variables(self.inputs)
        outputs = _check_variables(self.outputs)
        if set(n for n, _ in inputs) & set(n for n, _ in outputs):
            raise ValidationError("channel input and output names overlap")
        kernel = _freeze_array(self.kernel)
        shape = tuple(len(a) for _, a in inputs) + tuple(len(a) for _, a in outputs)
        if kernel.shape != shape:
            raise ValidationError(
                f"kernel shape {kernel.shape} does not match {shape}"
            )
        if np.any(kernel < 0):
            raise ValidationError("kernel has negative entries")
        n_in = len(inputs)
        row_sums = kernel.reshape(shape[:n_in] + (-1,)).sum(axis=-1)
        if np.any(np.abs(row_sums - 1.0) > CONSTRUCTION_TOL):
            raise ValidationError("kernel rows do not sum to 1 within 1e-12")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "uniform_rows", tuple(tuple(r) for r in self.uniform_rows))

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.inputs)

    @property
    def output_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.outputs)


def validate(raw, variables) -> JointDistribution:
    """Admit a raw pmf tensor under the input contract.

    Entries in [0, 1e-15) are clamped to exact zero, then the tensor is
    renormalized.  Raises ``ValidationError`` on negative entries, on mass
    deviating from 1 by more than 1e-9, or on a shape mismatch.
    """
    variables = _check_variables(variables)
    arr = np.array(raw, dtype=float)
    shape = tuple(len(a) for _, a in variables)
    if arr.shape != shape:
        raise ValidationError(f"pmf shape {arr.shape} does not match {shape}")
    if np.any(arr < 0):
        raise ValidationError("pmf has negative entries")
    total = float(arr.sum())
    if abs(total - 1.0) > SUM_TOL:
        raise ValidationError(f"pmf mass {total!r} deviates from 1 beyond 1e-9")
    arr = np.where(arr < CLAMP_EPS, 0.0, arr)
    arr = arr / arr.sum()
    return JointDistribution(variables, arr)


def marginalize(joint: JointDistribution, keep) -> JointDistribution:
    """Sum out every variable not named in ``keep``, preserving its order."""
    keep = _group(keep)
    axes = [joint.axis(n) for n in keep]  # raises on unknown names
    drop = tuple(i for i in range(len(joint.variables)) if i not in axes)
    probs = joint.probs.sum(axis=drop) if drop else joint.probs
    # reorder surviving axes to the requested order
    surviving = [i for i in range(len(joint.variables)) if i not in drop]
    perm = [surviving.index(a) for a in axes]
    probs = np.transpose(probs, perm)
    variables = tuple(joint.variables[a] for a in axes)
    return JointDistribution(variables, probs)


def condition(joint: JointDistribution, given) -> Channel:
    """Split ``joint`` into P(rest | given) as a Channel.

    Rows whose conditioning event has zero probability are filled with the
    uniform distribution and reported in ``Channel.uniform_rows``.
    """
    given = _group(given)
    in_axes = [joint.axis(n) for n in given]
    out_axes = [i for i in range(len(joint.variables)) if i not in in_axes]
    if not out_axes:
        raise ValidationError("conditioning on every variable leaves no outputs")
    perm = in_axes + out_axes
    probs = np.transpose(joint.probs, perm)
    in_shape = probs.shape[: len(in_axes)]
    out_shape = probs.shape[len(in_axes):]
    flat = probs.reshape(in_shape + (-1,))
    row_mass = flat.sum(axis=-1)
    n_out = flat.shape[-1]
    kernel = np.empty_like(flat)
    zero = row_mass == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        kernel = flat / row_mass[..., None]
    kernel[zero] = 1.0 / n_out
    uniform_rows = tuple(map(tuple, np.argwhere(zero))) if np.any(zero) else ()
    return Channel(
        inputs=tuple(joint.variables[a] for a in in_axes),
        outputs=tuple(joint.variables[a] for a in out_axes),
        kernel=kernel.reshape(in_shape + out_shape),
        uniform_rows=uniform_rows,
    )


_EINSUM_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


def attach(joint: JointDistribution, channel: Channel) -> JointDistribution:
    """Extend ``joint`` with the channel outputs: P(old, new) = P(old) * kernel.

    The channel inputs must name variables of ``joint`` with identical
    alphabets.  By construction the new outputs are conditionally
    independent of the remaining old variables given the channel inputs.
    """
    for name, alpha in channel.inputs:
        have = joint.alphabet(name)  # raises on unknown name
        if have.symbols != alpha.symbols:
            raise ValidationError(
                f"channel input {name!r} alphabet {alpha.symbols} "
                f"does not match joint alphabet {have.symbols}"
            )
    for name, _ in channel.outputs:
        if name in joint.names:
            raise ValidationError(f"output variable {name!r} already present")
    n_joint = len(joint.variables)
    n_out = len(channel.outputs)
    if n_joint + n_out > len(_EINSUM_LETTERS):
        raise ValidationError("too many variables to attach")
    letters = {n: _EINSUM_LETTERS[i] for i, (n, _) in enumerate(joint.variables)}
    out_letters = _EINSUM_LETTERS[n_joint: n_joint + n_out]
    sub_joint = "".join(letters[n] for n in joint.names)
    sub_kernel = "".join(letters[n] for n in channel.input_names) + out_letters
    sub_out = sub_joint + out_letters
    probs = np.einsum(f"{sub_joint},{sub_kernel}->{sub_out}", joint.probs, channel.kernel)
    return JointDistribution(joint.variables + channel.outputs, probs)


def _group(names) -> tuple[str, ...]:
    if isinstance(names, str):
        return (names,)
    return tuple(names)


def _pmf_1d(raw, what: str) -> np.ndarray:
    arr = np.array(raw, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{what} must be a nonempty 1-d pmf")
    if np.any(arr < 0):
        raise ValidationError(f"{what} has negative entries")
    if abs(arr.sum() - 1.0) > SUM_TOL:
        raise ValidationError(f"{what} mass deviates from 1 beyond 1e-9")
    return arr / arr.sum()


def shared_component_source(
    w,
    x1_private,
    x2_private,
    w_symbols=None,
    x1_symbols=None,
    x2_symbols=None,
    names=("X1", "X2"),
) -> JointDistribution:
    """Build the two-variable source X1 = (X'1, W), X2 = (X'2, W).

    ``w``, ``x1_private`` and ``x2_private`` are pmfs of three independent
    variables; the same W realization is embedded in both composites.  The
    composite alphabets use labels "a|w" so W stays recoverable by label
    projection (see :func:`label_projection`).
    """
    w = _pmf_1d(w, "w pmf")
    p1 = _pmf_1d(x1_private, "x1 private pmf")
    p2 = _pmf_1d(x2_private, "x2 private pmf")
    w_syms = tuple(w_symbols) if w_symbols else tuple(f"w{i}" for i in range(w.size))
    a_syms = tuple(x1_symbols) if x1_symbols else tuple(f"a{i}" for i in range(p1.size))
    b_syms = tuple(x2_symbols) if x2_symbols else tuple(f"b{i}" for i in range(p2.size))
    for syms, what in ((w_syms, "w"), (a_syms, "x1"), (b_syms, "x2")):
        if any(COMPOSITE_SEP in s for s in syms):
            raise ValidationError(f"{what} symbols may not contain {COMPOSITE_SEP!r}")
    nw = w.size
    x1_alpha = Alphabet(tuple(f"{a}{COMPOSITE_SEP}{wl}" for a in a_syms for wl in w_syms))
    x2_alpha = Alphabet(tuple(f"{b}{COMPOSITE_SEP}{wl}" for b in b_syms for wl in w_syms))
    probs = np.zeros((p1.size * nw, p2.size * nw))
    for iw in range(nw):
        block = w[iw] * np.outer(p1, p2)
        probs[iw::nw, iw::nw] = block
    return JointDistribution(((names[0], x1_alpha), (names[1], x2_alpha)), probs)


def label_projection(var_name: str, alphabet: Alphabet, part: int, new_name: str) -> Channel:
    """Deterministic channel extracting one part of a composite label.

    Splits each symbol of ``alphabet`` on "|" and maps it to component
    ``part``.  The output alphabet lists the parts in first-occurrence order.
    """
    parts = []
    for s in alphabet.symbols:
        pieces = s.split(COMPOSITE_SEP)
        if part >= len(pieces):
            raise ValidationError(f"symbol {s!r} has no component {part}")
        parts.append(pieces[part])
    seen: list[str] = []
    for p in parts:
        if p not in seen:
            seen.append(p)
    kernel = np.zeros((len(alphabet), len(seen)))
    for i, p in enumerate(parts):
        kernel[i, seen.index(p)] = 1.0
    return Channel(
        inputs=((var_name, alphabet),),
        outputs=((new_name, Alphabet(tuple(seen))),),
        kernel=kernel,
    )


def deterministic_channel(var_name: str, alphabet: Alphabet, mapping,
                          new_name: str, new_symbols) -> Channel:
    """Channel sending symbol i of ``alphabet`` to ``new_symbols[mapping[i]]``."""
    new_alpha = Alphabet(tuple(new_symbols))
    mapping = list(mapping)
    if len(mapping) != len(alphabet):
        raise ValidationError("mapping length does not match alphabet size")
    kernel = np.zeros((len(alphabet), len(new_alpha)))
    for i, j in enumerate(mapping):
        j = int(j)
        if not 0 <= j < len(new_alpha):
            raise ValidationError(f"mapping value {j} outside the target alphabet")
        kernel[i, j] = 1.0
    return Channel(
        inputs=((var_name, alphabet),),
        outputs=((new_name, new_alpha),),
        kernel=kernel,
    )


# ------------------------------------------------------------------ JSON I/O

def _variables_to_obj(variables) -> list:
    return [{"name": n, "alphabet": list(a.symbols)} for n, a in variables]


def _variables_from_obj(obj) -> list:
    try:
        return [(d["name"], Alphabet(tuple(d["alphabet"]))) for d in obj]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed variable declarations: {exc}")


def distribution_to_json(joint: JointDistribution) -> str:
    obj = {
        "variables": _variables_to_obj(joint.variables),
        "pmf": [float(x) for x in joint.probs.reshape(-1)],
    }
    return json.dumps(obj, indent=2)


def distribution_from_json(text: str) -> JointDistribution:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc}")
    if not isinstance(obj, dict) or "variables" not in obj or "pmf" not in obj:
        raise ValidationError('distribution JSON needs "variables" and "pmf"')
    variables = _variables_from_obj(obj["variables"])
    shape = tuple(len(a) for _, a in variables)
    arr = np.array(obj["pmf"], dtype=float)
    if arr.size != int(np.prod(shape)):
        raise ValidationError(
            f"pmf has {arr.size} entries, expected {int(np.prod(shape))}"
        )
    return validate(arr.reshape(shape), variables)


def channel_to_json(channel: Channel) -> str:
    obj = {
        "inputs": _variables_to_obj(channel.inputs),
        "outputs": _variables_to_obj(channel.outputs),
        "kernel": [float(x) for x in channel.kernel.reshape(-1)],
    }
    return json.dumps(obj, indent=2)


def channel_from_json(text: str) -> Channel:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc}")
    if not isinstance(obj, dict) or not {"inputs", "outputs", "kernel"} <= set(obj):
        raise ValidationError('channel JSON needs "inputs", "outputs" and "kernel"')
    inputs = _variables_from_obj(obj["inputs"])
    outputs = _variables_from_obj(obj["outputs"])
    shape = tuple(len(a) for _, a in inputs) + tuple(len(a) for _, a in outputs)
    arr = np.array(obj["kernel"], dtype=float)
    if arr.size != int(np.prod(shape)):
        raise ValidationError("kernel entry count does not match alphabets")
    return Channel(tuple(inputs), tuple(outputs), arr.reshape(shape))
