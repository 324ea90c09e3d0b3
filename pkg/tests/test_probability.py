"""Distribution container, conditioning, attachment and JSON round trips."""

import numpy as np
import pytest

from lossyci import (
    Alphabet,
    Channel,
    ValidationError,
    attach,
    channel_from_json,
    channel_to_json,
    condition,
    deterministic_channel,
    distribution_from_json,
    distribution_to_json,
    label_projection,
    marginalize,
    mutual_information,
    shared_component_source,
    validate,
)

BITS = ("0", "1")

# I(X;Y) for a uniform bit through a 0.1-crossover symmetric channel,
# 1 - h2(0.1)
BSC_01_MI = 0.5310044064107188


def pair(raw):
    return validate(raw, [("X1", BITS), ("X2", BITS)])


def test_validate_freezes_and_names():
    j = pair([[0.4, 0.1], [0.2, 0.3]])
    assert j.names == ("X1", "X2")
    assert j.alphabet("X1").symbols == BITS
    assert not j.probs.flags.writeable
    assert j.probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_validate_rejects_bad_input():
    with pytest.raises(ValidationError):
        pair([[0.7, 0.4], [0.0, 0.0]])  # mass 1.1
    with pytest.raises(ValidationError):
        pair([[0.5, -0.1], [0.3, 0.3]])
    with pytest.raises(ValidationError):
        validate([[0.5, 0.5]], [("A", BITS), ("B", BITS)])  # shape mismatch
    with pytest.raises(ValidationError):
        validate([0.5, 0.5], [("A", ("0",)), ("A", BITS)])  # duplicate name


def test_marginalize():
    j = pair([[0.4, 0.1], [0.2, 0.3]])
    np.testing.assert_allclose(marginalize(j, ("X1",)).probs, [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(marginalize(j, ("X2",)).probs, [0.6, 0.4], atol=1e-15)
    assert marginalize(j, ("X2",)).names == ("X2",)


def test_condition_rows():
    j = pair([[0.4, 0.1], [0.2, 0.3]])
    ch = condition(j, ("X1",))
    np.testing.assert_allclose(ch.kernel, [[0.8, 0.2], [0.4, 0.6]], atol=1e-15)
    assert ch.input_names == ("X1",)
    assert ch.output_names == ("X2",)
    assert ch.uniform_rows == ()


def test_condition_zero_row_flagged_uniform():
    j = pair([[0.5, 0.5], [0.0, 0.0]])
    ch = condition(j, ("X1",))
    np.testing.assert_allclose(ch.kernel[1], [0.5, 0.5])
    assert ch.uniform_rows == ((1,),)


def test_attach_bsc_mutual_information():
    x = validate([0.5, 0.5], [("X", BITS)])
    bsc = Channel(
        inputs=(("X", Alphabet(BITS)),),
        outputs=(("Y", Alphabet(BITS)),),
        kernel=np.array([[0.9, 0.1], [0.1, 0.9]]),
    )
    joint = attach(x, bsc)
    assert joint.names == ("X", "Y")
    assert mutual_information(joint, ("X",), ("Y",)) == pytest.approx(
        BSC_01_MI, abs=1e-12
    )


def test_attach_then_marginalize_recovers_base():
    j = pair([[0.4, 0.1], [0.2, 0.3]])
    ch = deterministic_channel("X1", j.alphabet("X1"), [1, 0], "Y", BITS)
    ext = attach(j, ch)
    np.testing.assert_allclose(
        marginalize(ext, ("X1", "X2")).probs, j.probs, atol=1e-15
    )
    # Y is X1 flipped
    np.testing.assert_allclose(marginalize(ext, ("Y",)).probs, [0.5, 0.5])


def test_attach_rejects_name_clash():
    j = pair([[0.4, 0.1], [0.2, 0.3]])
    ch = deterministic_channel("X1", j.alphabet("X1"), [0, 1], "X2", ("a", "b"))
    with pytest.raises(ValidationError):
        attach(j, ch)


def test_deterministic_channel_validates_mapping():
    a = Alphabet(BITS)
    with pytest.raises(ValidationError):
        deterministic_channel("X", a, [0], "Y", BITS)  # wrong length
    with pytest.raises(ValidationError):
        deterministic_channel("X", a, [0, 5], "Y", ("u",))  # out of range


def test_label_projection_parts():
    alpha = Alphabet(("a0|w0", "a1|w0", "a0|w1"))
    proj = label_projection("X1", alpha, 1, "W")
    assert proj.outputs[0][1].symbols == ("w0", "w1")
    np.testing.assert_allclose(
        proj.kernel, [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    )
    first = label_projection("X1", alpha, 0, "P")
    assert first.outputs[0][1].symbols == ("a0", "a1")


def test_shared_component_source_structure():
    w = [0.5, 0.5]
    src = shared_component_source(w, [0.3, 0.7], [0.2, 0.8])
    assert src.names == ("X1", "X2")
    assert src.probs.shape == (4, 4)
    # the shared label is computable from either side and carries all the
    # dependence: I(X1;X2) = H(W) and I(X1;X2|W) = 0
    wch = label_projection("X1", src.alphabet("X1"), 1, "W")
    ext = attach(src, wch)
    assert mutual_information(src, ("X1",), ("X2",)) == pytest.approx(1.0, abs=1e-12)
    from lossyci import conditional_mutual_information

    assert conditional_mutual_information(
        ext, ("X1",), ("X2",), ("W",)
    ) == pytest.approx(0.0, abs=1e-12)


def test_shared_component_source_seeded_identity():
    rng = np.random.default_rng(7)
    for _ in range(5):
        w = rng.random(3) + 0.1
        w /= w.sum()
        x1p = rng.random(2) + 0.1
        x1p /= x1p.sum()
        x2p = rng.random(2) + 0.1
        x2p /= x2p.sum()
        src = shared_component_source(w, x1p, x2p)
        h_w = float(-(w * np.log2(w)).sum())
        assert mutual_information(src, ("X1",), ("X2",)) == pytest.approx(
            h_w, abs=1e-12
        )


def test_distribution_json_round_trip():
    j = pair([[0.4, 0.1], [0.2, 0.3]])
    back = distribution_from_json(distribution_to_json(j))
    assert back.names == j.names
    assert back.alphabet("X2").symbols == BITS
    np.testing.assert_allclose(back.probs, j.probs, atol=1e-15)


def test_channel_json_round_trip():
    ch = deterministic_channel("X", Alphabet(BITS), [1, 0], "Y", ("u", "v"))
    back = channel_from_json(channel_to_json(ch))
    assert back.input_names == ("X",)
    assert back.output_names == ("Y",)
    np.testing.assert_allclose(back.kernel, ch.kernel, atol=1e-15)


def test_json_rejects_malformed_input():
    with pytest.raises(ValidationError):
        distribution_from_json("not json")
    with pytest.raises(ValidationError):
        distribution_from_json('{"nope": 1}')
    with pytest.raises(ValidationError):
        channel_from_json('{"kernel": []}')
