"""
Module that contains two-qudit gates: the `Gate` type, the space-time dual reshuffle, unitarity checks, the standard
dual-unitary constructors, batched gate conjugation and the gate JSON format.
"""

import json
import logging
import pathlib

import numpy as np
import scipy.linalg
import scipy.stats

from . import framework
from . import tensor_core

log = logging.getLogger(__name__)

# Default max-norm tolerance of the unitarity checks.
DEFAULT_TOL = 1e-10


class Gate:
    """
    Creates a `Gate`: a dense d^2 x d^2 matrix acting on two qudits, basis |i>|j> with the first qudit slowest.

    Attributes:
        d (int): The qudit dimension.
        matrix (numpy.ndarray): The read-only matrix entries.
        name (str): An optional label used in logs and provenance.
    """
    _d = None
    _matrix = None

    def __init__(self, matrix, d: (int, None) = None, name: str = ""):
        """
        Initializes the `Gate` after validating its shape.

        Args:
            matrix (array_like): The d^2 x d^2 entries.
            d (int, None): The qudit dimension. Inferred from the shape when `None`.
            name (str): An optional label.

        Raises:
            ducharge.framework.ContractViolation: When the matrix is not d^2 x d^2 or has NaN/Inf entries.
        """
        matrix = np.array(matrix, dtype=complex)

        # Require a square matrix
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise framework.ContractViolation(f"gate matrix must be square, got shape {matrix.shape}")

        if d is None:
            d = int(round(np.sqrt(matrix.shape[0])))

        # Require a two-qudit shape
        if d < 2 or matrix.shape != (d * d, d * d):
            raise framework.ContractViolation(f"gate matrix shape {matrix.shape} is not (d^2, d^2) for d={d}")

        # Require finite entries
        if not np.all(np.isfinite(matrix)):
            raise framework.ContractViolation("gate entries must be finite")

        matrix.setflags(write=False)
        self._d = int(d)
        self._matrix = matrix
        self.name = name

    def __repr__(self):
        return f"Gate(d={self.d}, name='{self.name}')"

    def __str__(self):
        return self.name if self.name else f"gate(d={self.d})"

    @property
    def d(self):
        """The qudit dimension."""
        return self._d

    @property
    def matrix(self):
        """The read-only matrix entries."""
        return self._matrix

    @property
    def tensor(self):
        """The entries as a (d, d, d, d) tensor indexed (out_1, out_2, in_1, in_2)."""
        return self._matrix.reshape((self._d,) * 4)


def dual(g: Gate):
    """
    Returns the space-time dual gate, with entries <i j| dual |k l> = <l j| g |k i>. The reshuffle is a permutation of
    entries, so it is involutive and preserves the Frobenius norm.
    """
    # Swapping the first output leg with the second input leg
    reshuffled = g.tensor.transpose(3, 1, 2, 0)
    return Gate(reshuffled.reshape(g.d ** 2, g.d ** 2), g.d, name=f"dual({g})" if g.name else "")


def unitarity_residual(g: Gate):
    """Returns max |g g^dagger - 1| over entries."""
    return float(np.max(np.abs(g.matrix @ g.matrix.conj().T - np.eye(g.d ** 2))))


def duality_residual(g: Gate):
    """Returns max |dual(g) dual(g)^dagger - 1| over entries."""
    return unitarity_residual(dual(g))


def is_unitary(g: Gate, tol: float = DEFAULT_TOL):
    """Checks unitarity in max-norm."""
    # Require a positive tolerance
    if tol <= 0:
        raise framework.ContractViolation("'tol' must be positive")
    return unitarity_residual(g) < tol


def is_dual_unitary(g: Gate, tol: float = DEFAULT_TOL):
    """Checks that both the gate and its space-time dual are unitary in max-norm."""
    return is_unitary(g, tol) and is_unitary(dual(g), tol)


def require_unitary(g: Gate, tol: float = DEFAULT_TOL):
    """Raises `ContractViolation` unless `g` is unitary."""
    if not is_unitary(g, tol):
        raise framework.ContractViolation(f"gate '{g}' is not unitary (residual {unitarity_residual(g):.3e})")


def require_dual_unitary(g: Gate, tol: float = DEFAULT_TOL):
    """Raises `ContractViolation` unless `g` is dual-unitary."""
    if not is_dual_unitary(g, tol):
        raise framework.ContractViolation(
            f"gate '{g}' is not dual-unitary (unitarity {unitarity_residual(g):.3e}, "
            f"duality {duality_residual(g):.3e})"
        )


def swap(d: int = 2):
    """Returns the SWAP gate on two qudits."""
    matrix = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            matrix[j * d + i, i * d + j] = 1
    return Gate(matrix, d, name="swap")


def fswap():
    """Returns the fermionic SWAP: SWAP with a -1 on |11>."""
    matrix = np.array([
        [1, 0, 0, 0],
        [0, 0, 1, 0],
        [0, 1, 0, 0],
        [0, 0, 0, -1]
    ], dtype=complex)
    return Gate(matrix, 2, name="fswap")


def phased_swap(theta: float = 1.0):
    """
    Returns SWAP (u x u) with u = diag(1, e^{i theta}). Each layer multiplies sigma-minus by e^{i theta} while moving
    it, which gives solitons whose phase is not a root of unity for generic theta.
    """
    phase = np.diag([1, np.exp(1j * theta)])
    gate = Gate(swap(2).matrix @ np.kron(phase, phase), 2, name=f"phased_swap({theta:g})")
    return gate


def cz():
    """Returns the controlled-Z gate, unitary but not dual-unitary."""
    return Gate(np.diag([1, 1, 1, -1]), 2, name="cz")


def identity_gate(d: int = 2):
    """Returns the two-qudit identity, unitary but not dual-unitary."""
    return Gate(np.eye(d * d), d, name="identity")


def dual_unitary_core(J: float):
    """Returns exp[i (pi/4 XX + pi/4 YY + J ZZ)], the entangling core of every two-qubit dual-unitary gate."""
    letters = tensor_core.site_basis(2)
    xx = np.kron(letters[1], letters[1])
    yy = np.kron(letters[2], letters[2])
    zz = np.kron(letters[3], letters[3])
    return scipy.linalg.expm(1j * (np.pi / 4 * xx + np.pi / 4 * yy + J * zz))


def random_dual_unitary_qubit(seed: (int, None) = None, J: (float, None) = None):
    """
    Samples a two-qubit dual-unitary gate (u1 x u2) core(J) (u3 x u4) with Haar-random single-qubit u's.

    Args:
        seed (int, None): Seed of the generator owned by this call. The same seed returns the same gate.
        J (float, None): The ZZ coupling of the core. When `None`, it is drawn uniformly from [0, pi/2).

    Returns:
        ducharge.gates.Gate: A gate passing `is_dual_unitary()`.
    """
    rng = np.random.default_rng(seed)
    if J is None:
        J = float(rng.uniform(0, np.pi / 2))

    singles = scipy.stats.unitary_group.rvs(2, size=4, random_state=rng)
    matrix = np.kron(singles[0], singles[1]) @ dual_unitary_core(J) @ np.kron(singles[2], singles[3])
    return Gate(matrix, 2, name=f"random_du(seed={seed}, J={J:.6g})")


def conjugate_layer(ops, gate: Gate, firsts, n_sites: int):
    """
    Conjugates a batch of operators by copies of `gate` acting on site pairs (p, p+1) for p in `firsts`.

    Args:
        ops (numpy.ndarray): Array of shape (batch, d^n, d^n).
        gate (ducharge.gates.Gate): The gate applied to each pair, first qudit on the left site.
        firsts (iterable of int): Left sites of the pairs. Pairs must not overlap and must lie inside the window.
        n_sites (int): The number of sites n of the window.

    Raises:
        ducharge.framework.ContractViolation: When a pair does not fit inside the window.

    Returns:
        numpy.ndarray: The conjugated batch, same shape as `ops`.
    """
    d = gate.d
    ops = np.asarray(ops, dtype=complex)
    batch = ops.shape[0]
    tensor = ops.reshape((batch,) + (d,) * (2 * n_sites))
    g = gate.tensor
    g_conj = g.conj()

    for first in firsts:
        # Require the pair to lie inside the window
        if not 0 <= first < n_sites - 1:
            raise framework.ContractViolation(f"gate pair ({first}, {first + 1}) is outside a {n_sites}-site window")

        rows = [1 + first, 2 + first]
        cols = [1 + n_sites + first, 2 + n_sites + first]
        tensor = np.moveaxis(np.tensordot(g, tensor, axes=([2, 3], rows)), [0, 1], rows)
        tensor = np.moveaxis(np.tensordot(tensor, g_conj, axes=(cols, [2, 3])), [-2, -1], cols)

    return tensor.reshape(ops.shape)


def gate_to_dict(g: Gate):
    """Returns the JSON-ready dictionary {"d": d, "matrix": [[[re, im], ...], ...]}."""
    return {
        "d": g.d,
        "matrix": tensor_core.matrix_to_pairs(g.matrix)
    }


def gate_from_dict(data: dict, name: str = ""):
    """
    Builds a `Gate` from its dictionary form.

    Raises:
        ducharge.framework.ParseError: When the dictionary does not describe a d^2 x d^2 complex matrix.
    """
    # Require the documented keys
    if not isinstance(data, dict) or "d" not in data or "matrix" not in data:
        raise framework.ParseError("gate data must be an object with 'd' and 'matrix' values")

    # Require d to be an integer of at least 2
    d = data["d"]
    if isinstance(d, bool) or not isinstance(d, int) or d < 2:
        raise framework.ParseError("gate 'd' value must be an integer >= 2")

    matrix = tensor_core.matrix_from_pairs(data["matrix"], d * d)
    try:
        return Gate(matrix, d, name=name)
    except framework.ContractViolation as exc:
        raise framework.ParseError(f"gate matrix is invalid ({exc})") from exc


def read_gate(path: (str, pathlib.Path)):
    """
    Reads a gate JSON file.

    Raises:
        ducharge.framework.ParseError: When the file is missing, not JSON or not a gate.
    """
    path = pathlib.Path(path)
    try:
        with open(path, "r", encoding="utf-8") as gate_file:
            data = json.load(gate_file)
    except (OSError, json.JSONDecodeError) as exc:
        raise framework.ParseError(f"failed to read gate file '{path}' ({exc})") from exc

    gate = gate_from_dict(data, name=path.stem)
    log.debug(f"read gate '{gate}' from '{path}'")
    return gate


def write_gate(g: Gate, path: (str, pathlib.Path)):
    """Writes a gate JSON file. Floats are written in their exact round-trip form."""
    with open(path, "w", encoding="utf-8") as gate_file:
        json.dump(gate_to_dict(g), gate_file)
