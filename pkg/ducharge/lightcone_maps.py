"""
Module that builds the light-cone superoperators of a brickwork circuit, their spectra and the soliton sets.

A right-moving window map appends an identity site on the right of the operator, conjugates by a row of gates, and
traces out the leftmost site with a 1/d weight. Two such half steps (first with U, then with V) move an operator at an
even start site by two sites to the right. The left-moving map mirrors this.
"""

import csv
import logging

import numpy as np
import scipy.linalg

from . import framework
from . import gates
from . import tensor_core

log = logging.getLogger(__name__)

PLUS = "+"
MINUS = "-"

# Tolerances fixed by the extraction procedure.
UNIMODULAR_TOL = 1e-8
CLUSTER_TOL = 1e-6
RANK_THRESHOLD = 1e-8
RESIDUAL_TOL = 1e-9


def parse_direction(value: str):
    """
    Normalizes a direction given as '+', '-', 'plus' or 'minus'.

    Raises:
        ducharge.framework.ContractViolation: When the value is not a known direction.
    """
    aliases = {PLUS: PLUS, "plus": PLUS, "right": PLUS, MINUS: MINUS, "minus": MINUS, "left": MINUS}
    if value not in aliases:
        raise framework.ContractViolation(f"unknown direction '{value}', expected one of plus or minus")
    return aliases[value]


class Superoperator:
    """
    Creates a `Superoperator`: a dense d^(2w) x d^(2w) matrix acting on column-stacked width-w operators.

    Construction checks that the map is unital, trace preserving and has spectral radius at most one.

    Attributes:
        d (int): The qudit dimension.
        w (int): The width of the operators acted on.
        matrix (numpy.ndarray): The read-only matrix.
        direction (str): '+' for right-moving maps, '-' for left-moving maps.
        provenance (tuple): Names of the gates the map was built from.
    """
    _eigen = None

    def __init__(self, matrix, d: int, w: int, direction: str, provenance: tuple = (), slack: float = 0.0):
        """
        Initializes the `Superoperator` and verifies its channel invariants.

        Args:
            matrix (numpy.ndarray): The d^(2w) x d^(2w) matrix.
            d (int): The qudit dimension.
            w (int): The operator width.
            direction (str): '+' or '-'.
            provenance (tuple): Names of the generating gates.
            slack (float): Extra tolerance granted to the invariant checks, typically the gate unitarity residual.

        Raises:
            ducharge.framework.ContractViolation: When the shape does not match (d, w).
            ducharge.framework.NumericError: When a channel invariant fails.
        """
        matrix = np.array(matrix, dtype=complex)

        # Require the matrix to act on width-w operators
        if matrix.shape != (d ** (2 * w), d ** (2 * w)):
            raise framework.ContractViolation(f"superoperator shape {matrix.shape} does not match d={d}, w={w}")

        matrix.setflags(write=False)
        self._matrix = matrix
        self._d = d
        self._w = w
        self._direction = parse_direction(direction)
        self._provenance = tuple(provenance)
        self._eigen = self._decompose()
        self.check_invariants(slack)

    def __repr__(self):
        return f"Superoperator(d={self.d}, w={self.w}, direction='{self.direction}')"

    @property
    def d(self):
        """The qudit dimension."""
        return self._d

    @property
    def w(self):
        """The operator width."""
        return self._w

    @property
    def matrix(self):
        """The read-only matrix."""
        return self._matrix

    @property
    def direction(self):
        """The direction '+' or '-'."""
        return self._direction

    @property
    def provenance(self):
        """The names of the generating gates."""
        return self._provenance

    def apply(self, op: tensor_core.LocalOperator, t: int = 1):
        """Applies the map `t` times to an operator."""
        # Require the operator to match the map
        if (op.d, op.w) != (self.d, self.w):
            raise framework.ContractViolation(
                f"operator (d={op.d}, w={op.w}) does not match map (d={self.d}, w={self.w})"
            )

        vec = tensor_core.vectorize(op)
        for _ in range(t):
            vec = self._matrix @ vec
        return tensor_core.devectorize(vec, self.d)

    def _decompose(self):
        """
        Computes the eigen-decomposition once, at construction, as read-only arrays.

        Raises:
            ducharge.framework.NumericError: When the eigensolver fails.
        """
        try:
            values, vectors = scipy.linalg.eig(self._matrix)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise framework.NumericError(
                f"eigensolver failed for {self!r}", {"error": str(exc), "shape": self._matrix.shape}
            ) from exc
        values.setflags(write=False)
        vectors.setflags(write=False)
        return values, vectors

    def eigen(self):
        """Returns the read-only eigen-decomposition (values, right vectors as columns)."""
        return self._eigen

    def spectral_radius(self):
        """Returns the largest eigenvalue modulus."""
        return float(np.max(np.abs(self.eigen()[0])))

    def check_invariants(self, slack: float = 0.0):
        """
        Checks unitality, trace preservation and the spectral radius bound.

        Raises:
            ducharge.framework.NumericError: When any check fails.
        """
        unit = tensor_core.vectorize(tensor_core.identity(self.d, self.w))
        tol = 1e-12 * np.sqrt(unit.size) + 10 * slack
        unital = float(np.max(np.abs(self._matrix @ unit - unit)))
        trace_preserving = float(np.max(np.abs(unit.conj() @ self._matrix - unit.conj())))
        radius = self.spectral_radius()
        diagnostics = {"unital": unital, "trace_preserving": trace_preserving, "spectral_radius": radius}

        # Require a unital, trace preserving contraction
        if unital > tol or trace_preserving > tol or radius > 1 + 1e-10 + 10 * slack:
            raise framework.NumericError(f"{self!r} violates channel invariants", diagnostics)

        log.debug(f"{self!r} invariants {diagnostics}")


def _half_step(ops, gate: gates.Gate, direction: str):
    """
    Applies one light-cone half step to a batch of odd-width operators.

    Right-moving: append an identity site on the right, conjugate by gates on (0,1), (2,3), ..., trace the first site.
    Left-moving: prepend an identity site on the left, conjugate the same way, trace the last site.
    """
    d = gate.d
    batch, dim, _ = ops.shape
    w = tensor_core.width_from_dim(dim, d)
    eye = np.eye(d)

    if direction == PLUS:
        extended = np.einsum("bij,ac->biajc", ops, eye).reshape(batch, dim * d, dim * d)
    else:
        extended = np.einsum("ac,bij->baicj", eye, ops).reshape(batch, dim * d, dim * d)

    evolved = gates.conjugate_layer(extended, gate, range(0, w, 2), w + 1)

    if direction == PLUS:
        traced = np.trace(evolved.reshape(batch, d, dim, d, dim), axis1=1, axis2=3)
    else:
        traced = np.trace(evolved.reshape(batch, dim, d, dim, d), axis1=2, axis2=4)

    return traced / d


def _map_matrix(layers, d: int, w: int, direction: str):
    """Builds the matrix of the composition of half steps, one per gate in `layers`."""
    dim = d ** w
    size = dim * dim

    # Devectorized unit vectors: column stacking puts entry (i, j) at index i + j*dim
    units = np.eye(size, dtype=complex).reshape(size, dim, dim).transpose(0, 2, 1)
    images = units
    for gate in layers:
        images = _half_step(images, gate, direction)

    # Column k of the matrix is vec(image_k)
    return images.transpose(0, 2, 1).reshape(size, size).T


def m_plus(U: gates.Gate):
    """
    Builds M+(a) = (1/d) tr_0[U (a x 1) U^dagger] on single-site operators.

    Raises:
        ducharge.framework.ContractViolation: When U is not unitary.
    """
    gates.require_unitary(U)
    return Superoperator(
        _map_matrix([U], U.d, 1, PLUS), U.d, 1, PLUS, (str(U),), slack=gates.unitarity_residual(U)
    )


def m_minus(U: gates.Gate):
    """
    Builds M-(a) = (1/d) tr_1[U (1 x a) U^dagger] on single-site operators.

    Raises:
        ducharge.framework.ContractViolation: When U is not unitary.
    """
    gates.require_unitary(U)
    return Superoperator(
        _map_matrix([U], U.d, 1, MINUS), U.d, 1, MINUS, (str(U),), slack=gates.unitarity_residual(U)
    )


def m_w(U: gates.Gate, V: gates.Gate, w: int, direction: str, config: (framework.RunConfig, None) = None):
    """
    Builds the two-layer window map M+,w or M-,w on width-w operators: (w+1)/2 copies of U, then (w+1)/2 copies of V,
    each half step followed by the edge partial trace with weight 1/d. For w=1 this equals the composition of the two
    single-gate maps, V's after U's.

    Args:
        U (ducharge.gates.Gate): The even-bond gate.
        V (ducharge.gates.Gate): The odd-bond gate.
        w (int): The odd operator width.
        direction (str): '+' for right movers, '-' for left movers.
        config (ducharge.framework.RunConfig, None): The configuration whose superoperator cap applies.

    Raises:
        ducharge.framework.ContractViolation: When w is even or not positive, or a gate is not unitary.
        ducharge.framework.ResourceError: When d^(2w) exceeds the cap.

    Returns:
        ducharge.lightcone_maps.Superoperator: The window map.
    """
    config = config if config else framework.RunConfig()
    direction = parse_direction(direction)

    # Require a positive odd width
    if isinstance(w, bool) or not isinstance(w, int) or w < 1 or w % 2 == 0:
        raise framework.ContractViolation(f"window width must be a positive odd integer, got {w}")

    # Require matching unitary gates
    gates.require_unitary(U)
    gates.require_unitary(V)
    if U.d != V.d:
        raise framework.ContractViolation(f"gates act on different qudits (d={U.d} and d={V.d})")
    config.check_superop_dim(U.d, w)

    slack = max(gates.unitarity_residual(U), gates.unitarity_residual(V))
    matrix = _map_matrix([U, V], U.d, w, direction)
    superop = Superoperator(matrix, U.d, w, direction, (str(U), str(V)), slack=slack)
    log.debug(f"built M{direction},{w} from '{U}' and '{V}'")
    return superop


def _leading_index(coeffs, threshold: float = 1e-8):
    """Returns the flat index of the first string coefficient above `threshold`."""
    flat = np.abs(np.ravel(coeffs))
    hits = np.nonzero(flat > threshold)[0]
    return int(hits[0]) if hits.size else 0


def _canonical(op: tensor_core.LocalOperator):
    """Rotates the global phase so the leading string coefficient is real positive; returns (op, leading index)."""
    coeffs = tensor_core.string_coefficients(op)
    leading = _leading_index(coeffs)
    value = np.ravel(coeffs)[leading]
    phase = np.conj(value) / abs(value) if abs(value) > 0 else 1.0
    return phase * op, leading


def unimodular_eigenspace(S: Superoperator, tol: float = UNIMODULAR_TOL):
    """
    Finds every eigenpair of `S` with an eigenvalue on the unit circle.

    Eigenvalues within `CLUSTER_TOL` are grouped; each group's eigenspace is recomputed as the null space of S - mu
    with mu the group mean, so degenerate groups come out orthonormal. Every vector is re-checked by direct
    application. Vectors have unit norm and canonical phase; output is ordered by the angle of the eigenvalue, then by
    the leading string index.

    Args:
        S (ducharge.lightcone_maps.Superoperator): The map.
        tol (float): Unimodularity tolerance, in (0, 1e-4).

    Raises:
        ducharge.framework.ContractViolation: When `tol` is out of range.
        ducharge.framework.NumericError: When an eigenspace cannot be recovered or fails its residual check.

    Returns:
        list: (lambda, LocalOperator) pairs. Members of one degenerate group share the same lambda value.
    """
    # Require a sensible tolerance
    if not 0 < tol < 1e-4:
        raise framework.ContractViolation(f"unimodularity tolerance must lie in (0, 1e-4), got {tol}")

    values, _ = S.eigen()
    candidates = sorted(values[np.abs(np.abs(values) - 1) < tol], key=lambda lam: round(float(np.angle(lam)), 9))

    clusters = []
    for lam in candidates:
        for cluster in clusters:
            if abs(lam - np.mean(cluster)) < CLUSTER_TOL:
                cluster.append(lam)
                break
        else:
            clusters.append([lam])

    pairs = []
    size = S.matrix.shape[0]
    for cluster in clusters:
        mu = complex(np.mean(cluster))
        basis, singular_values = tensor_core.null_space(S.matrix - mu * np.eye(size), RANK_THRESHOLD)
        if basis.shape[1] == 0:
            raise framework.NumericError(
                f"no eigenspace recovered for eigenvalue {mu:.12g}",
                {"cluster": [complex(lam) for lam in cluster], "smallest_singular": float(singular_values[-1])}
            )
        if basis.shape[1] != len(cluster):
            log.warning(f"eigenvalue {mu:.12g} has multiplicity {len(cluster)} but nullity {basis.shape[1]}")

        lam = mu / abs(mu)
        members = []
        for column in basis.T:
            op, leading = _canonical(tensor_core.devectorize(column, S.d))
            residual = tensor_core.hs_norm(S.apply(op) - lam * op)
            if residual > RESIDUAL_TOL:
                raise framework.NumericError(
                    f"eigenvector residual {residual:.3e} for eigenvalue {lam:.12g}", {"residual": residual}
                )
            members.append((leading, op))

        pairs.extend((lam, op) for _, op in sorted(members, key=lambda member: member[0]))

    log.debug(f"{S!r} has {len(pairs)} unimodular eigenvectors in {len(clusters)} clusters")
    return pairs


class SolitonRecord:
    """
    Creates a `SolitonRecord`: a boundary-traceless width-w operator moved by two sites per period up to a phase.

    Attributes:
        op (ducharge.tensor_core.LocalOperator): The operator, normalized to hs_norm sqrt(d^w).
        direction (str): '+' for right movers (even start sites), '-' for left movers (odd start sites).
        width (int): The width w.
        lam (complex): The unimodular phase.
    """
    _op = None
    _direction = None
    _lam = None

    def __init__(self, op: tensor_core.LocalOperator, direction: str, lam: complex):
        """
        Initializes the `SolitonRecord` after validating the operator and the phase.

        Raises:
            ducharge.framework.ContractViolation: When the operator is not boundary traceless or |lam| is not one.
        """
        # Require the operator to be strictly traceless at both ends
        if tensor_core.boundary_defect(op) > 1e-10:
            raise framework.ContractViolation("soliton operator must be traceless at both boundary sites")

        # Require a unimodular phase
        if abs(abs(lam) - 1) > UNIMODULAR_TOL:
            raise framework.ContractViolation(f"soliton phase {lam} is not unimodular")

        self._op = op
        self._direction = parse_direction(direction)
        self._lam = complex(lam) / abs(lam)

    def __repr__(self):
        return f"SolitonRecord(direction='{self.direction}', width={self.width}, lam={self.lam:.6g})"

    @property
    def op(self):
        """The soliton operator."""
        return self._op

    @property
    def direction(self):
        """The direction '+' or '-'."""
        return self._direction

    @property
    def width(self):
        """The width in sites."""
        return self._op.w

    @property
    def lam(self):
        """The unimodular phase."""
        return self._lam

    def adjoint(self):
        """Returns the partner record (lam*, op^dagger)."""
        return SolitonRecord(self._op.dagger(), self._direction, np.conj(self._lam))


def find_solitons(U: gates.Gate, V: gates.Gate, w: int, direction: str, tol: float = UNIMODULAR_TOL,
                  config: (framework.RunConfig, None) = None):
    """
    Extracts the width-w solitons: unimodular eigenvectors of the window map that are strictly traceless at both ends.

    Padded narrower solitons and the identity are excluded by intersecting each eigenvalue cluster with the
    boundary-traceless subspace. Degenerate clusters yield an orthonormal basis of that intersection.

    Args:
        U (ducharge.gates.Gate): The even-bond gate.
        V (ducharge.gates.Gate): The odd-bond gate.
        w (int): The odd width.
        direction (str): '+' or '-'.
        tol (float): Unimodularity tolerance.
        config (ducharge.framework.RunConfig, None): The configuration whose caps apply.

    Raises:
        ducharge.framework.ContractViolation: When a gate is not dual-unitary or w is even.

    Returns:
        list: `SolitonRecord` objects normalized to hs_norm sqrt(d^w).
    """
    gates.require_dual_unitary(U)
    gates.require_dual_unitary(V)
    superop = m_w(U, V, w, direction, config)

    clusters = {}
    for lam, op in unimodular_eigenspace(superop, tol):
        clusters.setdefault(lam, []).append(op)

    records = []
    norm = np.sqrt(superop.d ** w)
    for lam, ops in clusters.items():
        columns = np.array([tensor_core.vectorize(op) for op in ops]).T
        rejected = np.array([tensor_core.vectorize(op - tensor_core.boundary_traceless_project(op)) for op in ops]).T
        kernel, _ = tensor_core.null_space(rejected, RANK_THRESHOLD)

        for coefficients in kernel.T:
            op = tensor_core.boundary_traceless_project(tensor_core.devectorize(columns @ coefficients, superop.d))
            op, _ = _canonical((norm / tensor_core.hs_norm(op)) * op)
            residual = tensor_core.hs_norm(superop.apply(op) - lam * op) / norm
            if residual > RESIDUAL_TOL:
                raise framework.NumericError(f"soliton residual {residual:.3e} exceeds {RESIDUAL_TOL}",
                                             {"residual": residual, "lambda": lam})
            records.append(SolitonRecord(op, direction, lam))

    log.info(f"found {len(records)} width-{w} solitons moving '{direction}' for gates '{U}', '{V}'")
    return records


def norm_ratios(S: Superoperator, op: tensor_core.LocalOperator, t_max: int):
    """Returns [||S^t(op)|| / ||op|| for t = 1..t_max]."""
    norm = tensor_core.hs_norm(op)
    ratios = []
    current = op
    for _ in range(t_max):
        current = S.apply(current)
        ratios.append(tensor_core.hs_norm(current) / norm)
    return ratios


def unitary_subspace_diagnostics(S: Superoperator, records, t_max: int = 10, samples: int = 20, seed: int = 0):
    """
    Checks that solitons span a norm-preserving subspace of `S` while everything orthogonal to the unimodular
    eigenspace (solitons, padded solitons and the identity) only loses norm.

    Args:
        S (ducharge.lightcone_maps.Superoperator): The map the records were extracted from.
        records (list): `SolitonRecord` objects from `find_solitons()` on the same map.
        t_max (int): The number of applications.
        samples (int): The number of random complement operators.
        seed (int): The seed of the complement sampler.

    Returns:
        dict: Norm ratios per record, the largest deviation of norms and pairwise inner products from their initial
            values, and the norm sequences of the random complement operators.
    """
    soliton_ratios = [norm_ratios(S, record.op, t_max) for record in records]
    max_norm_deviation = max((abs(ratio - 1) for ratios in soliton_ratios for ratio in ratios), default=0.0)

    # Pairwise inner products under repeated application
    max_inner_deviation = 0.0
    initial = [record.op for record in records]
    current = list(initial)
    for _ in range(t_max):
        current = [S.apply(op) for op in current]
        for i, first in enumerate(current):
            for j, second in enumerate(current):
                drift = abs(tensor_core.hs_inner(first, second) - tensor_core.hs_inner(initial[i], initial[j]))
                max_inner_deviation = max(max_inner_deviation, drift / S.d ** S.w)

    # Random operators orthogonal to the whole unimodular eigenspace
    unimodular = [tensor_core.vectorize(op) for _, op in unimodular_eigenspace(S)]
    span = scipy.linalg.orth(np.array(unimodular).T) if unimodular else np.zeros((S.matrix.shape[0], 0))
    rng = np.random.default_rng(seed)
    complement_norms = []
    for _ in range(samples):
        vec = rng.standard_normal(S.matrix.shape[0]) + 1j * rng.standard_normal(S.matrix.shape[0])
        vec = vec - span @ (span.conj().T @ vec)
        op = tensor_core.devectorize(vec / np.linalg.norm(vec), S.d)
        complement_norms.append([1.0] + norm_ratios(S, op, t_max))

    non_increasing = all(
        later <= earlier + 1e-12 for norms in complement_norms for earlier, later in zip(norms, norms[1:])
    )

    return {
        "t_max": t_max,
        "soliton_norm_ratios": soliton_ratios,
        "max_norm_deviation": max_norm_deviation,
        "max_inner_deviation": max_inner_deviation,
        "complement_norms": complement_norms,
        "complement_non_increasing": non_increasing
    }


def hermitian_partner_residual(S: Superoperator, record: SolitonRecord):
    """Returns ||S(a^dagger) - lam* a^dagger|| / ||a|| for a soliton (lam, a)."""
    partner = record.adjoint()
    return tensor_core.hs_norm(S.apply(partner.op) - partner.lam * partner.op) / tensor_core.hs_norm(record.op)


def spectrum_rows(S: Superoperator):
    """Returns spectrum rows (re, im, abs, width, direction), largest modulus first."""
    values, _ = S.eigen()
    ordered = sorted(values, key=lambda lam: (-abs(lam), round(float(np.angle(lam)), 9)))
    return [(float(lam.real), float(lam.imag), float(abs(lam)), S.w, S.direction) for lam in ordered]


def write_spectrum_csv(S: Superoperator, path):
    """Writes `spectrum_rows()` as CSV with a header row and 17 significant digits."""
    with open(path, "w", encoding="utf-8", newline="") as csv_file:
        writer = csv.writer(csv_file)
        writer.writerow(["re", "im", "abs", "width", "direction"])
        for re_part, im_part, modulus, width, direction in spectrum_rows(S):
            numbers = [format(value, ".17g") for value in (re_part, im_part, modulus)]
            writer.writerow(numbers + [width, direction])


def soliton_to_dict(record: SolitonRecord):
    """Returns the JSON-ready form of a soliton record."""
    return {
        "direction": record.direction,
        "width": record.width,
        "lambda": [float(record.lam.real), float(record.lam.imag)],
        "op": tensor_core.operator_to_dict(record.op)
    }


def soliton_from_dict(data: dict):
    """
    Inverts `soliton_to_dict()`.

    Raises:
        ducharge.framework.ParseError: When keys are missing or malformed.
    """
    # Require the documented keys
    if not isinstance(data, dict) or not {"direction", "lambda", "op"} <= set(data.keys()):
        raise framework.ParseError("soliton data must be an object with 'direction', 'lambda' and 'op' values")

    try:
        lam = complex(data["lambda"][0], data["lambda"][1])
        return SolitonRecord(tensor_core.operator_from_dict(data["op"]), data["direction"], lam)
    except (TypeError, IndexError, framework.ContractViolation) as exc:
        raise framework.ParseError(f"soliton data is invalid ({exc})") from exc


def solitons_to_list(records):
    """Returns the JSON-ready list form of soliton records."""
    return [soliton_to_dict(record) for record in records]
