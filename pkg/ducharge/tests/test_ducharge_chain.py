"""Contains tests that test the ducharge.chain module."""

import unittest

import numpy as np

from ducharge import chain
from ducharge import framework
from ducharge import gates
from ducharge import tensor_core


def random_boundary_traceless(rng, w):
    """Returns a random operator on w qubits that is traceless at both ends."""
    dim = 2 ** w
    op = tensor_core.LocalOperator(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)), 2, w)
    return tensor_core.boundary_traceless_project(op)


class TranslationTestCase(unittest.TestCase):
    """Creates a test case for testing the ducharge.chain.translation_op() function."""
    def test_translation_op(self):
        """Test that conjugation by the translation moves content one site to the left."""
        shift = chain.translation_op(3)
        z = tensor_core.pauli_string("Z").matrix
        eye = np.eye(2)

        # Ensure a at site 1 moves to site 0 and a at site 0 wraps to site 2
        np.testing.assert_allclose(shift @ np.kron(np.kron(eye, z), eye) @ shift.T, np.kron(np.kron(z, eye), eye))
        np.testing.assert_allclose(shift @ np.kron(np.kron(z, eye), eye) @ shift.T, np.kron(np.kron(eye, eye), z))

        # Ensure the translation is a permutation with period equal to the ring size
        np.testing.assert_allclose(np.linalg.matrix_power(chain.translation_op(4, 3), 4), np.eye(81))

        with self.assertRaises(framework.ContractViolation):
            chain.translation_op(1)

    def test_parity_class(self):
        """Test the ducharge.chain.parity_class() function."""
        self.assertEqual(chain.parity_class(0, 2), "B_ee")
        self.assertEqual(chain.parity_class(0, 3), "B_eo")
        self.assertEqual(chain.parity_class(5, 2), "B_oe")
        self.assertEqual(chain.parity_class(7, 1), "B_oo")


class FloquetTestCase(unittest.TestCase):
    """Creates a test case for testing the ducharge.chain.FloquetOperator class."""
    def test_validation(self):
        """Test the FloquetOperator class's constructor validation."""
        fswap = gates.fswap()
        with self.assertRaises(framework.ContractViolation):
            chain.floquet(fswap, fswap, 1)
        with self.assertRaises(framework.ContractViolation):
            chain.floquet(fswap, gates.swap(3), 2)
        with self.assertRaises(framework.ContractViolation):
            chain.floquet(gates.Gate(2 * np.eye(4)), fswap, 2)
        with self.assertRaises(framework.ResourceError):
            chain.floquet(fswap, fswap, 7)

    def test_random_circuit(self):
        """Test the Floquet operator of a random dual-unitary circuit."""
        F = chain.floquet(gates.random_dual_unitary_qubit(1), gates.random_dual_unitary_qubit(2), 3)
        self.assertEqual(F.chain_len, 6)
        self.assertLess(F.unitarity_residual(), 1e-10)
        self.assertLess(F.translation_residual(), 1e-10)

    def test_swap_circuit(self):
        """Test that the SWAP circuit moves even-site content right and odd-site content left by two."""
        swap = gates.swap(2)
        F = chain.floquet(swap, swap, 3)
        z = tensor_core.pauli_string("Z")

        # Ensure Z on site 0 moves to site 2 and Z on site 1 wraps to site 5
        evolved = chain.heisenberg(F, tensor_core.embed(z, 0, 6))
        self.assertTrue(evolved.allclose(tensor_core.materialize(tensor_core.embed(z, 2, 6))))
        evolved = chain.heisenberg(F, tensor_core.embed(z, 1, 6))
        self.assertTrue(evolved.allclose(tensor_core.materialize(tensor_core.embed(z, 5, 6))))

        # Ensure that on four sites the period is a translation by two
        F = chain.floquet(swap, swap, 2)
        shift = chain.translation_op(4)
        np.testing.assert_allclose(F.matrix @ shift @ shift, np.eye(16), atol=1e-12)

    def test_heisenberg(self):
        """Test the ducharge.chain.heisenberg() function."""
        F = chain.floquet(gates.random_dual_unitary_qubit(4), gates.random_dual_unitary_qubit(5), 2)
        op = tensor_core.embed(tensor_core.pauli_string("XY"), 3, 4)

        # Ensure zero steps return the operator and steps compose
        self.assertTrue(chain.heisenberg(F, op, 0).allclose(tensor_core.materialize(op)))
        twice = chain.heisenberg(F, chain.heisenberg(F, op))
        self.assertTrue(chain.heisenberg(F, op, 2).allclose(twice, atol=1e-10))

        # Ensure negative steps and foreign chains are rejected
        with self.assertRaises(framework.ContractViolation):
            chain.heisenberg(F, op, -1)
        with self.assertRaises(framework.ContractViolation):
            chain.heisenberg(F, tensor_core.embed(tensor_core.pauli_string("X"), 0, 6))


class LightConeStepTestCase(unittest.TestCase):
    """Creates a test case for testing the ducharge.chain.light_cone_step() function."""
    def test_matches_dense_evolution(self):
        """Test that the local step agrees with dense Heisenberg evolution."""
        U = gates.random_dual_unitary_qubit(6)
        V = gates.random_dual_unitary_qubit(7)
        F = chain.floquet(U, V, 4)
        rng = np.random.default_rng(0)

        for x in (2, 1, 7):
            op = random_boundary_traceless(rng, 3)
            start, window = chain.light_cone_step(U, V, op, x, 8)

            # Ensure the window starts two sites to the left of the operator
            self.assertEqual(start, (x - 2) % 8)
            self.assertEqual(window.w, 7)

            dense = chain.heisenberg(F, tensor_core.embed(op, x, 8))
            local = tensor_core.materialize(tensor_core.embed(window, start, 8))
            self.assertTrue(dense.allclose(local, atol=1e-10), msg=f"mismatch at x={x}")

    def test_too_wide(self):
        """Test that light cones wrapping the ring are rejected."""
        with self.assertRaises(framework.ContractViolation):
            chain.light_cone_step(gates.fswap(), gates.fswap(), tensor_core.identity(2, 3), 0, 6)


class SupportProfileTestCase(unittest.TestCase):
    """Creates a test case for testing the ducharge.chain.support_profile() function."""
    def test_single_class(self):
        """Test the profile of a string in one parity class."""
        op = tensor_core.materialize(tensor_core.embed(tensor_core.pauli_string("XZ"), 3, 8))
        profile = chain.support_profile(op)
        self.assertEqual((profile.x, profile.w, profile.parity_class), (3, 2, "B_oe"))
        self.assertEqual(profile.flags[3:5], [chain.STRICT, chain.STRICT])
        self.assertEqual(profile.flags[0], chain.IDENTITY_ONLY)
        self.assertEqual(profile.to_dict()["class"], "B_oe")

    def test_identity(self):
        """Test the profile of a multiple of the identity."""
        profile = chain.support_profile(tensor_core.identity(2, 4) * 3)
        self.assertIsNone(profile.x)
        self.assertIsNone(profile.parity_class)

    def test_mixed(self):
        """Test the profiles of operators outside a single class."""
        z0 = tensor_core.materialize(tensor_core.embed(tensor_core.pauli_string("Z"), 0, 8))
        z4 = tensor_core.materialize(tensor_core.embed(tensor_core.pauli_string("Z"), 4, 8))
        zz = tensor_core.materialize(tensor_core.embed(tensor_core.pauli_string("ZZ"), 0, 8))

        # Ensure a tie between covering intervals is mixed with a diagnostic
        profile = chain.support_profile(z0 + z4)
        self.assertEqual(profile.parity_class, chain.MIXED)
        self.assertTrue(profile.diagnostic)

        # Ensure strings in different classes give a mixed profile with a mixed site flag
        profile = chain.support_profile(z0 + zz)
        self.assertEqual(profile.parity_class, chain.MIXED)
        self.assertEqual(profile.flags[:2], [chain.STRICT, chain.MIXED_SITE])

    def test_class_content(self):
        """Test the ducharge.chain.class_content() function."""
        terms = {(3, 0, 0, 0, 0, 0): 1.0, (0, 1, 3, 0, 0, 0): 1.0}
        content = chain.class_content(terms, 6)
        self.assertAlmostEqual(content["classes"]["B_eo"], np.sqrt(0.5))
        self.assertAlmostEqual(content["classes"]["B_oe"], np.sqrt(0.5))
        self.assertEqual(sorted(content["widths"]), [1, 2])


class DigraphTestCase(unittest.TestCase):
    """Creates a test case for testing the parity-class digraph."""
    def test_allowed_transitions(self):
        """Test the intervals a single-site operator can reach."""
        targets = chain.allowed_transitions(0, 1, 12)

        # Ensure the soliton path of two sites to the right is allowed
        self.assertIn((2, 1), targets)

        # Ensure every target stays inside the light cone
        for x, w in targets:
            self.assertLessEqual(w, 5)
            self.assertIn(x, (11, 10, 0, 1, 2))

        with self.assertRaises(framework.ContractViolation):
            chain.allowed_transitions(0, 3, 6)

    def test_digraph_edges(self):
        """Test the shape of the parity-class digraph."""
        edges = chain.digraph_edges(20, range(1, 7))
        self.assertEqual(sorted(edges), ["B_ee", "B_eo", "B_oe", "B_oo"])

        # Ensure no class leads into B_ee and B_oe only leads to itself
        for source, targets in edges.items():
            self.assertNotIn("B_ee", targets, msg=f"edge {source} -> B_ee")
        self.assertEqual(list(edges["B_oe"]), ["B_oe"])

    def test_transition_check(self):
        """Test that random circuits never leave the allowed intervals."""
        rng = np.random.default_rng(42)
        for trial in range(200):
            U = gates.random_dual_unitary_qubit(trial)
            V = gates.random_dual_unitary_qubit(trial + 1000)
            F = chain.floquet(U, V, 6)
            w = int(rng.integers(1, 3))
            x = int(rng.integers(0, 12))
            report = chain.digraph_transition_check(F, tensor_core.embed(random_boundary_traceless(rng, w), x, 12))

            # Ensure nothing lands outside the allowed targets
            self.assertLess(report["forbidden_norm"], chain.FORBIDDEN_TOL, msg=f"trial {trial}")
            self.assertAlmostEqual(sum(component["norm"] ** 2 for component in report["components"]), 1.0)
            self.assertEqual(report["input"]["class"], chain.parity_class(x, w))

    def test_b_ee_never_persists(self):
        """Test that B_ee densities always leave their class and width after one period."""
        rng = np.random.default_rng(7)
        for trial in range(50):
            U = gates.random_dual_unitary_qubit(500 + trial)
            F = chain.floquet(U, gates.random_dual_unitary_qubit(600 + trial), 6)
            x = 2 * int(rng.integers(0, 6))
            report = chain.digraph_transition_check(F, tensor_core.embed(random_boundary_traceless(rng, 2), x, 12))
            self.assertEqual(report["input"]["class"], "B_ee")

            # Ensure no same-width B_ee component and nothing forbidden remains
            persisting = [
                component for component in report["components"]
                if component["class"] == "B_ee" and component["width"] == 2 and component["norm"] > 1e-9
            ]
            self.assertEqual(persisting, [], msg=f"trial {trial}")
            self.assertLess(report["forbidden_norm"], chain.FORBIDDEN_TOL, msg=f"trial {trial}")

    def test_transition_check_errors(self):
        """Test the errors raised by digraph_transition_check()."""
        F = chain.floquet(gates.fswap(), gates.fswap(), 6)
        with self.assertRaises(framework.ContractViolation):
            chain.digraph_transition_check(F, tensor_core.embed(tensor_core.pauli_string("XYZ"), 0, 12))
        with self.assertRaises(framework.ContractViolation):
            chain.digraph_transition_check(F, tensor_core.embed(tensor_core.pauli_string("XI"), 0, 12))
        with self.assertRaises(framework.ContractViolation):
            chain.digraph_transition_check(F, tensor_core.embed(tensor_core.pauli_string("X"), 0, 8))


if __name__ == '__main__':
    unittest.main()
