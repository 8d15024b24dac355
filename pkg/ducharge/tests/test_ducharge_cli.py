"""Contains tests that test the ducharge.cli module."""

import contextlib
import io
import json
import pathlib
import tempfile
import unittest

import ducharge


def run_cli(*argv):
    """Runs the command line interface with stdout captured. Returns (exit code, stdout text)."""
    stdout = io.StringIO()
    with contextlib.redirect_stdout(stdout):
        code = ducharge.cli.main([str(arg) for arg in argv])
    return code, stdout.getvalue()


class CLITestCase(unittest.TestCase):
    """Creates a test case for testing the ducharge command line interface."""
    def setUp(self):
        """Setup a temporary output directory."""
        self.tmp = tempfile.TemporaryDirectory()
        self.path = pathlib.Path(self.tmp.name)

    def tearDown(self):
        """Remove the temporary output directory."""
        self.tmp.cleanup()

    def test_exit_code_for(self):
        """Tests the ducharge.cli.exit_code_for() method."""
        self.assertEqual(ducharge.cli.exit_code_for(ducharge.framework.ParseError("x")), ducharge.cli.EXIT_USAGE)
        self.assertEqual(ducharge.cli.exit_code_for(ducharge.framework.ContractViolation("x")), ducharge.cli.EXIT_USAGE)
        self.assertEqual(ducharge.cli.exit_code_for(ducharge.framework.ResourceError("x")), ducharge.cli.EXIT_RESOURCE)
        self.assertEqual(
            ducharge.cli.exit_code_for(ducharge.framework.InconclusiveError("x")), ducharge.cli.EXIT_INCONCLUSIVE
        )
        violation = ducharge.framework.TheoremViolation("x", 1.0)
        self.assertEqual(ducharge.cli.exit_code_for(violation), ducharge.cli.EXIT_FALSE)

    def test_usage_errors(self):
        """Tests that invalid invocations exit with the usage code."""
        # Ensure missing commands and unknown flags are usage errors
        self.assertEqual(run_cli()[0], 2)
        self.assertEqual(run_cli("check-gate", "@fswap", "--colour", "blue")[0], 2)

        # Ensure invalid configuration files are usage errors
        (self.path / "bad.yml").write_text("listeners: []\n", encoding="utf-8")
        self.assertEqual(run_cli("check-gate", "@fswap", "--config", self.path / "bad.yml")[0], 2)

    def test_check_gate(self):
        """Tests the check-gate command."""
        # Ensure dual-unitary gates exit 0 and write a report
        code, stdout = run_cli("check-gate", "@fswap", "--out", self.path)
        self.assertEqual(code, 0)
        self.assertTrue(json.loads(stdout)["dual_unitary"])
        report = json.loads((self.path / "check_gate.json").read_text(encoding="utf-8"))
        self.assertTrue(report["unitary"])

        # Ensure unitary gates that are not dual-unitary exit 1
        self.assertEqual(run_cli("check-gate", "@cz", "--out", self.path)[0], 1)

        # Ensure truncated and missing gate files are parse errors
        (self.path / "truncated.json").write_text(json.dumps({"d": 2, "matrix": [[[1, 0]]]}), encoding="utf-8")
        self.assertEqual(run_cli("check-gate", self.path / "truncated.json", "--out", self.path)[0], 2)
        self.assertEqual(run_cli("check-gate", self.path / "missing.json", "--out", self.path)[0], 2)

    def test_check_gate_from_config(self):
        """Tests that gates named in a configuration file can be used."""
        config = "gates:\n  - name: kick\n    module: phased_swap\n    config:\n      theta: 0.4\n"
        (self.path / "config.yml").write_text(config, encoding="utf-8")
        code, stdout = run_cli("check-gate", "@kick", "--config", self.path / "config.yml", "--out", self.path)
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(stdout)["gate"], "kick")

    def test_find_solitons(self):
        """Tests the find-solitons command."""
        arguments = ("find-solitons", "@fswap", "@fswap", "--w", 3, "--direction", "minus", "--out", self.path)
        code, stdout = run_cli(*arguments)
        self.assertEqual(code, 0)
        self.assertIn("found 5 width-3 solitons", stdout)

        # Ensure the solitons and the spectrum were written
        solitons = json.loads((self.path / "solitons_minus_w3.json").read_text(encoding="utf-8"))
        self.assertEqual(len(solitons), 5)
        self.assertEqual(solitons[0]["direction"], "-")
        spectrum = (self.path / "spectrum_minus_w3.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(len(spectrum), 65)

        # Ensure even widths, non dual-unitary gates and unknown directions are usage errors
        self.assertEqual(run_cli("find-solitons", "@fswap", "@fswap", "--w", 2, "--out", self.path)[0], 2)
        self.assertEqual(run_cli("find-solitons", "@cz", "@cz", "--out", self.path)[0], 2)
        self.assertEqual(run_cli("find-solitons", "@fswap", "@fswap", "--direction", "up", "--out", self.path)[0], 2)

    def test_verify_charge(self):
        """Tests the verify-charge command."""
        record = ducharge.lightcone_maps.SolitonRecord(ducharge.tensor_core.pauli_string("Z"), "+", 1.0)
        ducharge.charges.write_charge(ducharge.charges.charge_from_soliton(record, 4), self.path / "charge.json")
        ducharge.gates.write_gate(ducharge.gates.random_dual_unitary_qubit(2), self.path / "random.json")

        # Ensure the conserved charge exits 0 and reports its residual
        code, stdout = run_cli("verify-charge", self.path / "charge.json", "@fswap", "@fswap", "--out", self.path)
        self.assertEqual(code, 0)
        self.assertLess(json.loads(stdout)["residual"], 1e-9)

        # Ensure a circuit that does not conserve the charge exits 1
        random_gate = self.path / "random.json"
        code, _ = run_cli("verify-charge", self.path / "charge.json", random_gate, random_gate, "--out", self.path)
        self.assertEqual(code, 1)

        # Ensure a mismatching chain size and a missing charge file are usage errors
        code, _ = run_cli("verify-charge", self.path / "charge.json", "@fswap", "@fswap", "--L", 5, "--out", self.path)
        self.assertEqual(code, 2)
        code, _ = run_cli("verify-charge", self.path / "missing.json", "@fswap", "@fswap", "--out", self.path)
        self.assertEqual(code, 2)

        # Ensure a matching chain size is accepted and the help text says it is only checked
        code, _ = run_cli("verify-charge", self.path / "charge.json", "@fswap", "@fswap", "--L", 4, "--out", self.path)
        self.assertEqual(code, 0)
        help_text = ducharge.cli.get_parser()._subparsers._group_actions[0].choices["verify-charge"].format_help()
        self.assertIn("only checks it against the chain", " ".join(help_text.split()))

    def test_theorem1(self):
        """Tests the theorem1 command."""
        code, stdout = run_cli("theorem1", "@fswap", "@fswap", "--L", 4, "--w-max", 1, "--out", self.path)
        self.assertEqual(code, 0)
        report = json.loads(stdout)
        self.assertEqual((report["oracle_dimension"], report["soliton_dimension"]), (2, 2))
        self.assertTrue((self.path / "theorem1.json").is_file())

        # Ensure gates that are not dual-unitary and invalid widths are usage errors
        self.assertEqual(run_cli("theorem1", "@cz", "@cz", "--out", self.path)[0], 2)
        self.assertEqual(run_cli("theorem1", "@fswap", "@fswap", "--L", 4, "--w-max", 7, "--out", self.path)[0], 2)

        # Ensure accepted widths too large for the dense caps exit with the resource code
        self.assertEqual(run_cli("theorem1", "@fswap", "@fswap", "--L", 5, "--w-max", 5, "--out", self.path)[0], 3)

    def test_scan(self):
        """Tests the scan command."""
        # Ensure an empty scan is a usage error
        self.assertEqual(run_cli("scan", "--count", 0, "--out", self.path)[0], 2)

        # Ensure the same seeds produce identical tables
        tables = []
        for name in ("first", "second"):
            code, _ = run_cli("scan", "--count", 2, "--seed", 5, "--w-max", 1, "--out", self.path / name)
            self.assertEqual(code, 0)
            tables.append((self.path / name / "scan.csv").read_text(encoding="utf-8"))
            self.assertTrue((self.path / name / "scan_timing.json").is_file())
        self.assertEqual(tables[0], tables[1])

        lines = tables[0].splitlines()
        self.assertEqual(lines[0], "seed,solitons_plus,solitons_minus,charge_dimension,inconclusive")
        self.assertEqual([line.split(",")[0] for line in lines[1:]], ["5", "6"])

    def test_fswap_demo(self):
        """Tests the fswap-demo command."""
        code, stdout = run_cli("fswap-demo", "--out", self.path)
        self.assertEqual(code, 0)
        report = json.loads(stdout)
        self.assertEqual(report["failed"], [])
        self.assertIn("dense_symbolic_crosscheck", report["checks"])
        self.assertTrue((self.path / "fswap_demo.json").is_file())

        # Ensure unsupported census widths are usage errors
        self.assertEqual(run_cli("fswap-demo", "--w", 4, "--out", self.path)[0], 2)

        # Ensure a gate that is not Clifford fails the pipeline
        ducharge.gates.write_gate(ducharge.gates.phased_swap(1.0), self.path / "phased.json")
        self.assertNotEqual(run_cli("fswap-demo", "--gate", self.path / "phased.json", "--out", self.path)[0], 0)


if __name__ == '__main__':
    unittest.main()
