"""Contains tests that test the ducharge.charges module."""

import pathlib
import tempfile
import unittest

import numpy as np

from ducharge import chain
from ducharge import charges
from ducharge import framework
from ducharge import gates
from ducharge import lightcone_maps
from ducharge import tensor_core

SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_Z = np.diag([1, -1]).astype(complex)


def sigma_z_soliton(direction):
    """Returns the width-one sigma-z soliton moving in the given direction."""
    return lightcone_maps.SolitonRecord(tensor_core.pauli_string("Z"), direction, 1.0)


def random_boundary_traceless(rng, w):
    """Returns a random operator on w qubits that is traceless at both ends."""
    dim = 2 ** w
    op = tensor_core.LocalOperator(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)), 2, w)
    return tensor_core.boundary_traceless_project(op)


class ChargeRecordTestCase(unittest.TestCase):
    """Creates a test case for testing the ducharge.charges.ChargeRecord class."""
    def test_validation(self):
        """Test the ChargeRecord class's constructor validation."""
        z = tensor_core.pauli_string("Z")

        # Ensure the chain must be even and at least four sites
        with self.assertRaises(framework.ContractViolation):
            charges.ChargeRecord(7, [(1, 0, z)])
        with self.assertRaises(framework.ContractViolation):
            charges.ChargeRecord(2, [(1, 0, z)])

        # Ensure densities must be traceless at both ends and share d
        with self.assertRaises(framework.ContractViolation):
            charges.ChargeRecord(8, [(1, 0, tensor_core.pauli_string("ZI"))])
        with self.assertRaises(framework.ContractViolation):
            charges.ChargeRecord(8, [(1, 0, z), (1, 2, tensor_core.string_operator([1], 3))])

        # Ensure start sites wrap around the ring and user charges are labelled
        record = charges.ChargeRecord(8, [(1, 9, z)])
        self.assertEqual(record.terms[0][1], 1)
        self.assertEqual(record.provenance, {"kind": "user"})
        self.assertEqual(record.L, 4)

    def test_norm(self):
        """Test the ChargeRecord class's norm() and string_terms() methods."""
        z = tensor_core.pauli_string("Z")
        record = charges.ChargeRecord(8, [(1, x, z) for x in range(8)])

        # Ensure eight orthonormal strings give norm sqrt(8)
        self.assertEqual(len(record.string_terms()), 8)
        self.assertAlmostEqual(record.norm(), np.sqrt(8))

        # Ensure cancelling terms leave an empty expansion
        self.assertEqual(charges.ChargeRecord(8, [(1, 0, z), (-1, 0, z)]).string_terms(), {})

    def test_components(self):
        """Test the ducharge.charges.charge_components() function."""
        terms = [(2, 3, tensor_core.pauli_string("XYZ")), (1, 0, tensor_core.pauli_string("Z"))]
        record = charges.ChargeRecord(8, terms)
        components = charges.charge_components(record)
        self.assertEqual(sorted(components), [(0, 1), (3, 3)])
        self.assertTrue(components[(3, 3)].allclose(2 * tensor_core.pauli_string("XYZ")))


class ChargeFileTestCase(unittest.TestCase):
    """Creates a test case for testing the charge JSON files."""
    def setUp(self):
        """Setup a temporary directory for charge files."""
        self.tmp = tempfile.TemporaryDirectory()
        self.path = pathlib.Path(self.tmp.name)

    def tearDown(self):
        """Remove the temporary directory."""
        self.tmp.cleanup()

    def test_read_charge(self):
        """Test the write_charge() and read_charge() functions."""
        record = charges.charge_from_soliton(sigma_z_soliton("+"), 4)
        charges.write_charge(record, self.path / "charge.json")
        read = charges.read_charge(self.path / "charge.json")

        # Ensure the strings and provenance survive
        self.assertEqual(read.string_terms(), record.string_terms())
        self.assertEqual(read.provenance["kind"], "from_soliton")

    def test_read_charge_errors(self):
        """Test the parse errors raised by read_charge()."""
        with self.assertRaises(framework.ParseError):
            charges.read_charge(self.path / "missing.json")

        # Ensure malformed documents are parse errors
        with self.assertRaises(framework.ParseError):
            charges.charge_from_dict({"terms": []})
        with self.assertRaises(framework.ParseError):
            charges.charge_from_dict({"chain_len": 8, "terms": [{"x": 0, "w": 1}]})
        with self.assertRaises(framework.ParseError):
            charges.charge_from_dict({
                "chain_len": 8, "terms": [{"coeff": [1, 0], "x": 0, "w": 1, "op": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]}]
            })


class SolitonChargeTestCase(unittest.TestCase):
    """Creates a test case for testing charges built from solitons."""
    def setUp(self):
        """Setup the FSWAP circuit on eight sites."""
        self.fswap = gates.fswap()
        self.F = chain.floquet(self.fswap, self.fswap, 4)

    def test_sigma_z_charges(self):
        """Test that the sigma-z soliton charges and their sum are conserved."""
        right = charges.charge_from_soliton(sigma_z_soliton("+"), 4)
        left = charges.charge_from_soliton(sigma_z_soliton("-"), 4)

        # Ensure right movers sit on even sites and left movers on odd sites
        self.assertEqual([x for _, x, _ in right.terms], [0, 2, 4, 6])
        self.assertEqual([x for _, x, _ in left.terms], [1, 3, 5, 7])

        # Ensure each charge and the total magnetization are conserved
        self.assertLess(charges.verify_conserved(self.F, right), 1e-9)
        self.assertLess(charges.verify_conserved(self.F, left), 1e-9)
        total = charges.ChargeRecord(8, right.terms + left.terms)
        self.assertLess(charges.verify_conserved(self.F, total), 1e-9)

    def test_fermion_pair_charge(self):
        """Test the charge built from sigma-minus sigma-z sigma-minus."""
        op = tensor_core.LocalOperator(np.kron(np.kron(SIGMA_MINUS, SIGMA_Z), SIGMA_MINUS), 2)
        record = charges.soliton_from_operator(op, self.fswap, self.fswap, "+")

        # Ensure the phase is one and the operator moves unchanged
        self.assertAlmostEqual(record.lam, 1.0)
        self.assertAlmostEqual(tensor_core.hs_norm(record.op), np.sqrt(8))
        self.assertLess(charges.soliton_step_residual(record, self.fswap, self.fswap), 1e-9)

        Q = charges.charge_from_soliton(record, 4)
        self.assertLess(charges.verify_conserved(self.F, Q), 1e-9)

    def test_soliton_from_operator_error(self):
        """Test that operators spreading under a period are refused."""
        op = tensor_core.pauli_string("X")
        with self.assertRaises(framework.NumericError):
            charges.soliton_from_operator(op, self.fswap, self.fswap, "+")

    def test_phase_pattern(self):
        """Test the phase weights of a soliton charge with phase i."""
        gate = gates.phased_swap(np.pi / 4)
        records = lightcone_maps.find_solitons(gate, gate, 1, "+")
        minus = [record for record in records if abs(record.lam - 1j) < 1e-8]
        self.assertEqual(len(minus), 1)

        # Ensure the weights follow i^(x/2) on even sites
        Q = charges.charge_from_soliton(minus[0], 4)
        np.testing.assert_allclose([coeff for coeff, _, _ in Q.terms], [1, 1j, -1, -1j], atol=1e-9)
        F = chain.floquet(gate, gate, 4)
        self.assertLess(charges.verify_conserved(F, Q), 1e-9)

        # Ensure the same soliton does not close around a ring of L=3
        with self.assertRaises(framework.PhaseIncompatible):
            charges.charge_from_soliton(minus[0], 3)

    def test_non_conserved(self):
        """Test that a charge built from B_oe densities is not conserved."""
        gate = gates.random_dual_unitary_qubit(3)
        F = chain.floquet(gate, gate, 4)
        Q = charges.ChargeRecord(8, [(1, x, tensor_core.pauli_string("XX")) for x in (1, 3, 5, 7)])
        self.assertGreater(charges.verify_conserved(F, Q), 0.1)

        # Ensure random B_oe densities never give a conserved charge, whatever the gates
        rng = np.random.default_rng(11)
        for trial in range(20):
            U = gates.random_dual_unitary_qubit(100 + trial)
            V = gates.random_dual_unitary_qubit(200 + trial)
            density = random_boundary_traceless(rng, 2)
            Q = charges.ChargeRecord(8, [(1, x, density) for x in (1, 3, 5, 7)])
            self.assertGreater(charges.verify_conserved(chain.floquet(U, V, 4), Q), 0.1, msg=f"trial {trial}")

        # Ensure foreign chains and zero charges are rejected
        with self.assertRaises(framework.ContractViolation):
            charges.verify_conserved(chain.floquet(gate, gate, 3), Q)
        with self.assertRaises(framework.ContractViolation):
            charges.verify_conserved(F, charges.ChargeRecord(8, []))


class CompositeTestCase(unittest.TestCase):
    """Creates a test case for testing composite solitons."""
    def test_composite_family(self):
        """Test the sigma-z composite family on eight sites."""
        family = charges.composite_family(sigma_z_soliton("+"), 4)
        self.assertEqual([len(composite.parts) for composite in family], [1, 2, 2, 3, 4])

        # Ensure every composite charge is conserved
        fswap = gates.fswap()
        F = chain.floquet(fswap, fswap, 4)
        for composite in family:
            Q = charges.charge_from_soliton(composite, 4)
            self.assertEqual(Q.provenance["kind"], "composite")
            self.assertLess(charges.verify_conserved(F, Q), 1e-9)

    def test_composite_validation(self):
        """Test the CompositeSoliton class's constructor validation."""
        right = sigma_z_soliton("+")
        left = sigma_z_soliton("-")
        with self.assertRaises(framework.ContractViolation):
            charges.composite_soliton([])
        with self.assertRaises(framework.ContractViolation):
            charges.composite_soliton([(right, 0), (left, 3)])
        with self.assertRaises(framework.ContractViolation):
            charges.composite_soliton([(right, 1)])

        wide = lightcone_maps.SolitonRecord(tensor_core.pauli_string("ZIZ"), "+", 1.0)
        with self.assertRaises(framework.ContractViolation):
            charges.composite_soliton([(wide, 0), (right, 2)])

    def test_composite_translation(self):
        """Test that composites move with the product phase."""
        gate = gates.phased_swap(0.7)
        records = lightcone_maps.find_solitons(gate, gate, 1, "+")
        moving = [record for record in records if abs(record.lam - 1) > 1e-6]
        composite = charges.composite_soliton([(moving[0], 0), (moving[0], 4)], gate, gate)
        self.assertAlmostEqual(composite.lam, moving[0].lam ** 2)
        self.assertEqual(composite.width, 5)

    def test_conjugate_pair(self):
        """Test that a soliton times its adjoint has phase one and gives a conserved charge."""
        gate = gates.phased_swap(1.0)
        records = lightcone_maps.find_solitons(gate, gate, 1, "+")
        moving = [record for record in records if abs(record.lam - 1) > 1e-6][0]

        # Ensure the lone soliton does not close around the ring
        with self.assertRaises(framework.PhaseIncompatible):
            charges.charge_from_soliton(moving, 4)

        # Ensure the adjoint is a soliton with the conjugate phase
        partner = charges.adjoint_soliton(moving)
        self.assertAlmostEqual(partner.lam, np.conj(moving.lam))
        np.testing.assert_allclose(partner.op.matrix, moving.op.matrix.conj().T)
        self.assertLess(charges.soliton_step_residual(partner, gate, gate, 0), 1e-9)

        pair = charges.conjugate_pair(moving, 0, 2)
        self.assertEqual(pair.lam, 1.0)
        self.assertLess(charges.soliton_step_residual(pair, gate, gate, 0), 1e-9)
        Q = charges.charge_from_soliton(pair, 4)
        self.assertLess(charges.verify_conserved(chain.floquet(gate, gate, 4), Q), 1e-9)


class BruteForceTestCase(unittest.TestCase):
    """Creates a test case for testing the brute-force conserved space."""
    def test_fswap(self):
        """Test the conserved space of the FSWAP circuit."""
        fswap = gates.fswap()
        space = charges.brute_force_conserved_space(fswap, fswap, 4, 3)
        self.assertEqual(space.dimension, 12)
        self.assertFalse(space.inconclusive)

        # Ensure every basis charge is conserved and the basis is orthonormal
        F = chain.floquet(fswap, fswap, 4)
        for Q in space.records:
            self.assertEqual(Q.provenance["kind"], "brute_force")
            self.assertLess(charges.verify_conserved(F, Q), 1e-8)
        self.assertAlmostEqual(space.records[0].norm(), 1.0)

    def test_random_gate(self):
        """Test that a generic dual-unitary circuit has no local conserved charges."""
        gate = gates.random_dual_unitary_qubit(0)
        self.assertEqual(charges.brute_force_conserved_space(gate, gate, 4, 3).dimension, 0)

    def test_w_max_range(self):
        """Test the range of w_max accepted by the brute-force search."""
        fswap = gates.fswap()
        for L, w_max in ((4, 5), (4, 0), (2, 1), (4, True)):
            with self.assertRaises(framework.ContractViolation, msg=f"L={L}, w_max={w_max}"):
                charges.brute_force_conserved_space(fswap, fswap, L, w_max)

    def test_resource_cap(self):
        """Test that accepted widths whose working arrays exceed the caps raise a resource error."""
        fswap = gates.fswap()

        # Ensure the widest densities of a ten site ring are rejected before anything is allocated
        with self.assertRaises(framework.ResourceError):
            charges.brute_force_conserved_space(fswap, fswap, 5, 5)
        with self.assertRaises(framework.ResourceError):
            charges.brute_force_conserved_space(fswap, fswap, 4, 4)

        # Ensure a smaller cap rejects a run the default cap allows
        with self.assertRaises(framework.ResourceError):
            charges.brute_force_conserved_space(fswap, fswap, 4, 3, framework.RunConfig(max_superop_dim=256))
        with self.assertRaises(framework.ResourceError):
            charges.theorem1_report(fswap, fswap, 5, 5)


class DecompositionTestCase(unittest.TestCase):
    """Creates a test case for testing the decomposition into soliton charges."""
    def setUp(self):
        """Setup the FSWAP soliton sets."""
        self.fswap = gates.fswap()
        self.solitons = charges.soliton_sets(self.fswap, self.fswap, 3)

    def test_decompose(self):
        """Test the decomposition of the total magnetization."""
        right = charges.charge_from_soliton(sigma_z_soliton("+"), 4)
        left = charges.charge_from_soliton(sigma_z_soliton("-"), 4)
        Q = charges.ChargeRecord(8, right.terms + [(2 * coeff, x, op) for coeff, x, op in left.terms])
        F = chain.floquet(self.fswap, self.fswap, 4)
        report = charges.decompose_into_soliton_charges(Q, self.solitons, F)

        # Ensure the width-one coefficients are one and two
        self.assertLess(report["residual"], charges.DECOMPOSITION_TOL)
        alpha = [entry for entry in report["alpha"] if entry["w"] == 1]
        beta = [entry for entry in report["beta"] if entry["w"] == 1]
        self.assertAlmostEqual(alpha[0]["coeff"][0], 1.0)
        self.assertAlmostEqual(beta[0]["coeff"][0], 2.0)

    def test_decompose_errors(self):
        """Test the errors raised by decompose_into_soliton_charges()."""
        gate = gates.random_dual_unitary_qubit(3)
        F = chain.floquet(gate, gate, 4)
        Q = charges.ChargeRecord(8, [(1, x, tensor_core.pauli_string("XX")) for x in (1, 3, 5, 7)])

        # Ensure non-conserved and even-width charges are rejected
        with self.assertRaises(framework.ContractViolation):
            charges.decompose_into_soliton_charges(Q, self.solitons, F)
        with self.assertRaises(framework.ContractViolation):
            charges.decompose_into_soliton_charges(Q, self.solitons)

    def test_theorem1_report(self):
        """Test the comparison between the brute-force space and the soliton charges."""
        report = charges.theorem1_report(self.fswap, self.fswap, 4, 3)
        self.assertEqual(report["oracle_dimension"], 12)
        self.assertEqual(report["soliton_dimension"], 12)
        self.assertEqual(report["soliton_counts"], {"+1": 1, "+3": 5, "-1": 1, "-3": 5})
        self.assertTrue(report["match"])

        # Ensure generic gates have neither conserved charges nor solitons, conclusively
        for seed in range(20):
            gate = gates.random_dual_unitary_qubit(seed)
            report = charges.theorem1_report(gate, gate, 4, 3)
            self.assertEqual((report["oracle_dimension"], report["soliton_dimension"]), (0, 0), msg=f"seed {seed}")
            self.assertFalse(report["inconclusive"], msg=f"seed {seed}")
            self.assertTrue(report["match"], msg=f"seed {seed}")

        with self.assertRaises(framework.ContractViolation):
            charges.theorem1_report(gates.cz(), gates.cz(), 4, 3)

    def test_span_angles(self):
        """Test the ducharge.charges.span_angles() function."""
        right = charges.charge_from_soliton(sigma_z_soliton("+"), 4)
        left = charges.charge_from_soliton(sigma_z_soliton("-"), 4)
        self.assertEqual(charges.span_angles([], [right]).size, 0)
        np.testing.assert_allclose(charges.span_angles([right], [right]), [0], atol=1e-8)
        np.testing.assert_allclose(charges.span_angles([right], [left]), [np.pi / 2], atol=1e-8)


if __name__ == '__main__':
    unittest.main()
