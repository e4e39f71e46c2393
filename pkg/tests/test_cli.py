"""CLI: potential grammar, JSON schema and round-trip, exit codes, determinism."""

import json
from fractions import Fraction

import pytest

from heattrace.cli import (
    EXIT_COMPUTE,
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VERIFY,
    NonPositiveLeadingError,
    OddPowerError,
    PotentialParseError,
    main,
    parse_potential,
)
from heattrace.exactalg import rat


class TestParsePotential:
    def test_basic(self):
        pot = parse_potential("1 + 2*r^2 + 3*r^4", dimension=3)
        assert pot.dimension == 3
        assert dict(pot.coeffs) == {0: 1, 2: 2, 4: 3}
        assert pot.q == 4

    def test_whitespace_and_fractions(self):
        pot = parse_potential("  3/2 * r^4+ 1/3 ", dimension=1)
        assert dict(pot.coeffs) == {4: rat(3, 2), 0: rat(1, 3)}

    def test_bare_power(self):
        pot = parse_potential("r^2", dimension=2)
        assert dict(pot.coeffs) == {2: 1}

    def test_leading_sign_and_accumulation(self):
        pot = parse_potential("+r^4 - 1*r^2 + 2*r^2 + 0", dimension=3)
        assert dict(pot.coeffs) == {4: 1, 2: 1}

    def test_odd_power_rejected(self):
        with pytest.raises(OddPowerError):
            parse_potential("r^3")
        with pytest.raises(OddPowerError):
            parse_potential("1 + 2*r")

    def test_nonpositive_leading(self):
        with pytest.raises(NonPositiveLeadingError):
            parse_potential("-1*r^4 + 1")
        with pytest.raises(NonPositiveLeadingError):
            parse_potential("5")

    def test_syntax_error_has_position(self):
        # positions refer to the whitespace-squeezed expression
        with pytest.raises(PotentialParseError, match="position 2"):
            parse_potential("1 + r^^4")

    def test_empty(self):
        with pytest.raises(PotentialParseError, match="empty"):
            parse_potential("   ")

    def test_negative_constant_rejected(self):
        with pytest.raises(PotentialParseError, match="nonnegative"):
            parse_potential("r^2 - 1")

    def test_zero_denominator_rejected(self):
        with pytest.raises(PotentialParseError, match="zero denominator"):
            parse_potential("1/0 + r^2")

    def test_fully_cancelled_terms(self):
        with pytest.raises(NonPositiveLeadingError):
            parse_potential("r^2 - r^2 + 5")

    def test_bad_coupling_rational(self, capsys):
        assert main(["verify-harmonic", "--c", "x/y"]) == EXIT_USAGE
        assert "--c" in capsys.readouterr().err

    def test_file_input(self, tmp_path, capsys):
        f = tmp_path / "pot.txt"
        f.write_text("1 + r^2\n")
        assert main(["coeff", "--potential", f"@{f}", "--order", "0"]) == EXIT_OK
        assert "1 + 1*r^2" in capsys.readouterr().out


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


class TestExpandCommand:
    def test_json_schema_and_atoms(self, capsys):
        code, out = run_json(
            capsys,
            ["expand", "--dim", "3", "--potential", "1+r^2+r^4", "--order", "4",
             "--t", "0.1", "--format", "json"],
        )
        assert code == EXIT_OK
        payload = json.loads(out)
        assert payload["leading_power"] == "-9/4"
        assert payload["job"]["command"] == "expand"
        a2 = next(row for row in payload["terms"] if row["j"] == 2)
        assert a2["atoms"] == [
            {
                "rational": "-1/16",
                "pi_half_power": 0,
                "gamma_residue": "1/4",
                "cq_exponent": "-1/2",
            }
        ]
        assert a2["t_power"] == "-7/4"
        assert len(payload["eval"]) == 1

    def test_round_trip_atoms(self, capsys):
        code, out = run_json(
            capsys,
            ["expand", "--potential", "2*r^2", "--order", "8", "--format", "json"],
        )
        assert code == EXIT_OK
        payload = json.loads(out)
        from heattrace.assembly import trace_expansion
        from heattrace.parametrix import PotentialSpec

        exp = trace_expansion(PotentialSpec.from_coeffs(3, {2: 2}), 3, 8)
        for row in payload["terms"]:
            want = exp.coefficients[row["j"]].atoms()
            got = tuple(
                (
                    rat(Fraction(a["rational"])),
                    a["pi_half_power"],
                    rat(Fraction(a["gamma_residue"])),
                    rat(Fraction(a["cq_exponent"])),
                )
                for a in row["atoms"]
            )
            assert got == tuple((c, h, r, e) for c, h, r, e in want)

    def test_byte_identical_reruns(self, capsys):
        argv = ["expand", "--potential", "1+2*r^2+3*r^4", "--order", "6",
                "--t", "0.05,0.1", "--format", "json"]
        _, first = run_json(capsys, argv)
        _, second = run_json(capsys, argv)
        assert first == second

    def test_coeff_single_j(self, capsys):
        code, out = run_json(
            capsys,
            ["coeff", "--potential", "r^4", "--order", "4", "--j", "4", "--format", "json"],
        )
        assert code == EXIT_OK
        payload = json.loads(out)
        assert [row["j"] for row in payload["terms"]] == [4]

    def test_human_output(self, capsys):
        code = main(["expand", "--potential", "r^2", "--order", "8", "--t", "0.1"])
        out = capsys.readouterr().out
        assert code == EXIT_OK
        assert "leading   : t^(-3)" in out
        assert "eval t=0.1" in out


class TestVerifyCommands:
    def test_verify_harmonic_pass(self, capsys):
        assert main(["verify-harmonic", "--dim", "3", "--c", "7/5", "--order", "8"]) == EXIT_OK
        assert "RESULT: PASS" in capsys.readouterr().out

    def test_verify_harmonic_other_dimensions(self, capsys):
        for dim in (1, 2):
            assert main(["verify-harmonic", "--dim", str(dim), "--order", "6"]) == EXIT_OK
            capsys.readouterr()

    def test_verify_paper_quartic(self, capsys):
        assert main(["verify-paper", "--case", "quartic3d", "--format", "json"]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["verification"]["all_pass"] is True
        labels = {c["label"] for c in payload["verification"]["checks"]}
        assert "a_10" in labels

    def test_verify_paper_harmonic_case(self, capsys):
        assert main(["verify-paper", "--case", "harmonic3d"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "combined_8" in out and "FAIL" not in out

    def test_verify_numeric_pass_and_csv(self, capsys):
        argv = ["verify-numeric", "--dim", "1", "--potential", "r^2", "--order", "8",
                "--t", "0.5,0.25", "--format", "csv"]
        assert main(argv) == EXIT_OK
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "t,expansion,oracle,rel_diff,oracle_error"
        assert "fitted_alpha" in out

    def test_verify_numeric_failure_exit(self, capsys):
        argv = ["verify-numeric", "--dim", "1", "--potential", "r^2", "--order", "0",
                "--t", "1.0", "--tol", "1e-6"]
        assert main(argv) == EXIT_VERIFY

    def test_oracle_quadrature(self, capsys):
        argv = ["oracle-quadrature", "--potential", "1+2*r^2+3*r^4", "--order", "20",
                "--t", "0.05", "--k", "0,2", "--format", "json"]
        assert main(argv) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        rows = payload["verification"]["table"]
        assert {r["k"] for r in rows} == {0, 2}
        assert all(r["rel_diff"] < 1e-7 for r in rows)


class TestExitCodes:
    def test_usage_error_from_bad_potential(self, capsys):
        assert main(["expand", "--potential", "r^3", "--order", "2"]) == EXIT_USAGE
        assert "odd power" in capsys.readouterr().err

    def test_usage_error_from_argparse(self, capsys):
        assert main(["expand"]) == EXIT_USAGE
        capsys.readouterr()

    def test_usage_error_bad_t(self, capsys):
        assert main(["expand", "--potential", "r^2", "--t", "0,-1"]) == EXIT_USAGE
        capsys.readouterr()

    def test_missing_file(self, capsys):
        assert main(["expand", "--potential", "@/no/such/file"]) == EXIT_USAGE
        assert "error" in capsys.readouterr().err

    def test_compute_error_from_depth_cap(self, capsys, monkeypatch):
        monkeypatch.setenv("HEATTRACE_MAX_K", "1")
        code = main(["expand", "--potential", "r^2", "--order", "12"])
        assert code == EXIT_COMPUTE
        assert "computation error" in capsys.readouterr().err

    def test_verify_numeric_requires_t(self, capsys):
        assert main(["verify-numeric", "--potential", "r^2"]) == EXIT_USAGE
        capsys.readouterr()

    def test_expand_rejects_csv(self, capsys):
        assert main(["expand", "--potential", "r^2", "--format", "csv"]) == EXIT_USAGE
        capsys.readouterr()
