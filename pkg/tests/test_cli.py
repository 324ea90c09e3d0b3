"""Command-line behavior: output formats, exit codes, round trips."""

import json
import math

import numpy as np
import pytest

from lossyci import (
    attach,
    deterministic_channel,
    distribution_from_json,
    distribution_to_json,
    dsbs,
    entropy,
    mutual_information,
    random_joint,
    validate,
)
from lossyci.cli import run
from lossyci.sandwich import BoundReport


def write_dist(tmp_path, joint, name="dist.json"):
    path = tmp_path / name
    path.write_text(distribution_to_json(joint))
    return str(path)


def copy_extension(src):
    out = src
    for var, new in (("X1", "Zhat1"), ("X2", "Zhat2")):
        a = src.alphabet(var)
        out = attach(out, deterministic_channel(var, a, range(len(a)), new, a.symbols))
    return out


# -------------------------------------------------------------------- gen


def test_gen_is_deterministic(capsys):
    assert run(["gen", "random", "--shape", "3", "3", "--seed", "1"]) == 0
    first = capsys.readouterr().out
    assert run(["gen", "random", "--shape", "3", "3", "--seed", "1"]) == 0
    assert capsys.readouterr().out == first
    joint = distribution_from_json(first)
    assert joint.probs.shape == (3, 3)


def test_gen_families_revalidate(capsys):
    for argv in (
        ["gen", "dsbs", "--p", "0.15"],
        ["gen", "shared", "--w", "2", "--x1", "2", "--x2", "2", "--seed", "4"],
        ["gen", "blockdiag", "--blocks", "2", "--size", "2"],
    ):
        assert run(argv) == 0
        joint = distribution_from_json(capsys.readouterr().out)
        assert abs(joint.probs.sum() - 1.0) < 1e-12


def test_gen_dsbs_matches_library(capsys):
    assert run(["gen", "dsbs", "--p", "0.15"]) == 0
    joint = distribution_from_json(capsys.readouterr().out)
    np.testing.assert_allclose(joint.probs, dsbs(0.15).probs, atol=1e-15)


# ------------------------------------------------------------------- info


def test_info_measures_match_library(tmp_path, capsys):
    joint = random_joint((2, 3), 5)
    path = write_dist(tmp_path, joint)
    assert run(["info", "--dist", path, "--entropy", "X1,X2", "--mi", "X1", "X2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["entropy_bits"] == pytest.approx(entropy(joint, ("X1", "X2")), abs=5e-7)
    assert out["mi_bits"] == pytest.approx(
        mutual_information(joint, ("X1",), ("X2",)), abs=5e-7
    )


def test_info_without_a_measure_is_an_input_error(tmp_path, capsys):
    path = write_dist(tmp_path, dsbs(0.1))
    assert run(["info", "--dist", path]) == 2
    assert "error:" in capsys.readouterr().err


# --------------------------------------------------------------------- rd


def test_rd_single_source_csv(tmp_path, capsys):
    path = write_dist(tmp_path, dsbs(0.1))
    assert run(["rd", "--dist", path, "--var", "X1", "--targets", "0.0,0.25"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "d_target,rate_bits,distortion,iterations,converged"
    assert len(lines) == 3
    row = lines[2].split(",")
    assert float(row[0]) == 0.25
    assert float(row[1]) == pytest.approx(1 - (-0.25 * math.log2(0.25) - 0.75 * math.log2(0.75)), abs=1e-4)
    assert row[4] == "True"


def test_rd_joint_csv(tmp_path, capsys):
    path = write_dist(tmp_path, dsbs(0.1))
    assert run(["rd", "--dist", path, "--joint", "--d1", "0.0", "--d2", "0.0"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == (
        "d1_target,d2_target,rate_bits,distortion1,distortion2,iterations,converged"
    )
    row = lines[1].split(",")
    assert float(row[2]) == pytest.approx(1.4689955935892813, abs=1e-4)


def test_rd_joint_needs_both_targets(tmp_path, capsys):
    path = write_dist(tmp_path, dsbs(0.1))
    assert run(["rd", "--dist", path, "--joint", "--d1", "0.0"]) == 2


# -------------------------------------------------------------- wyner / gk


def test_wyner_on_a_four_variable_joint(tmp_path, capsys):
    path = write_dist(tmp_path, copy_extension(dsbs(0.1)))
    assert run(["wyner", "--dist", path, "--u-card", "2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["objective_bits"] == pytest.approx(0.872761, abs=2e-3)
    assert out["u_cardinality"] == 2
    assert len(out["p_u"]) == 2


def test_wyner_infeasible_cardinality_is_non_convergence(tmp_path, capsys):
    path = write_dist(tmp_path, dsbs(0.1))
    assert run(["wyner", "--dist", path, "--d1", "0.0", "--d2", "0.0", "--u-card", "1"]) == 3
    assert "no feasible decomposition" in capsys.readouterr().err


def test_gk_reports_the_common_part(tmp_path, capsys):
    assert run(["gen", "blockdiag", "--blocks", "2", "--size", "2"]) == 0
    path = tmp_path / "blocks.json"
    path.write_text(capsys.readouterr().out)
    assert run(["gk", "--dist", str(path), "--d1", "0.0", "--d2", "0.0"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["objective_bits"] == 1.0
    assert out["v_cardinality"] == 2
    assert all(v <= 1e-9 for v in out["condition_residuals"].values())


# ----------------------------------------------------------------- verify


def test_verify_certified_chain(tmp_path, capsys):
    path = write_dist(tmp_path, dsbs(0.1))
    assert run(["verify", "--dist", path, "--d1", "0.0", "--d2", "0.0"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["converged"] is True
    assert out["k_lower_bits"] == 0.0
    assert out["i_mid_bits"] == pytest.approx(0.531004, abs=5e-7)
    assert out["c_upper_bits"] == pytest.approx(0.872761, abs=2e-3)
    assert set(out["residuals"]) >= {
        "wyner_marginal_match",
        "u_beyond_sources",
        "ci_z1_z2_given_u",
    }


def test_verify_non_convergence_exits_3(tmp_path, capsys, monkeypatch):
    import dataclasses

    import lossyci.sandwich as sw

    real = sw.sandwich_check

    def unconverged(*a, **kw):
        return dataclasses.replace(real(*a, **kw), converged=False)

    monkeypatch.setattr(sw, "sandwich_check", unconverged)
    path = write_dist(tmp_path, dsbs(0.1))
    assert run(["verify", "--dist", path, "--d1", "0.0", "--d2", "0.0"]) == 3
    assert "did not converge" in capsys.readouterr().err


def test_verify_bound_violation_exits_4(tmp_path, capsys, monkeypatch):
    import lossyci.sandwich as sw

    def violating(*a, **kw):
        return BoundReport(
            k_lower=1.0,
            i_mid=0.4,
            c_upper=0.5,
            slack_left=-0.6,
            slack_right=0.1,
            encoder_rate=1.0,
            distortions=(0.0, 0.0),
            residuals={"wyner_marginal_match": 0.0},
            equality_left=False,
            equality_right=False,
            converged=True,
        )

    monkeypatch.setattr(sw, "sandwich_check", violating)
    path = write_dist(tmp_path, dsbs(0.1))
    assert run(["verify", "--dist", path, "--d1", "0.0", "--d2", "0.0"]) == 4
    assert "bound chain violated" in capsys.readouterr().err


# ---------------------------------------------------- equality-demo / sweep


def test_equality_demo_certifies(capsys):
    code = run([
        "equality-demo", "--w-size", "2", "--x1-size", "1", "--x2-size", "1",
        "--seed", "3",
    ])
    out = capsys.readouterr().out
    assert code == 0
    assert "equality certified: True" in out
    assert "rhs chain" in out and "lhs chain" in out
    assert "VIOLATED" not in out


def test_sweep_csv_shape(tmp_path, capsys):
    src = validate(np.outer([0.5, 0.5], [0.5, 0.5]), [("X1", "01"), ("X2", "01")])
    path = write_dist(tmp_path, src)
    assert run([
        "sweep", "--dist", path, "--d1-grid", "0.0:0.2:2", "--d2-grid", "0.0:0.0:1",
    ]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "d1,d2,k_lower,i_mid,c_upper,slack_left,slack_right"
    assert len(lines) == 3
    assert all(len(line.split(",")) == 7 for line in lines[1:])


def test_sweep_rejects_malformed_grid(tmp_path, capsys):
    path = write_dist(tmp_path, dsbs(0.1))
    assert run(["sweep", "--dist", path, "--d1-grid", "0:0.2", "--d2-grid", "0:0:1"]) == 2


# ------------------------------------------------------------- exit codes


def test_missing_file_exits_2(capsys):
    assert run(["info", "--dist", "/nonexistent/d.json", "--entropy", "X1"]) == 2
    assert "error:" in capsys.readouterr().err


def test_malformed_json_exits_2(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert run(["info", "--dist", str(path), "--entropy", "X1"]) == 2


def test_unknown_flag_exits_2(capsys):
    assert run(["verify", "--nope"]) == 2


def test_unknown_command_exits_2(capsys):
    assert run(["frobnicate"]) == 2


def test_help_exits_0(capsys):
    assert run(["--help"]) == 0
    assert "lossyci" in capsys.readouterr().out
