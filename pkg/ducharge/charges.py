"""
Module that builds conserved charges from solitons, checks conservation, decomposes conserved charges into soliton
charges and computes the conserved space independently by brute force.

Charges are compared in the chain string basis with the inner product tr(A^dagger B) / d^(2L), under which distinct
strings are orthonormal.
"""

import itertools
import json
import logging
import pathlib

import numpy as np
import scipy.linalg

from . import chain
from . import framework
from . import gates
from . import lightcone_maps
from . import tensor_core

log = logging.getLogger(__name__)

# Largest |lam^L - 1| accepted for a translation invariant charge.
PHASE_TOL = 1e-8

# Residuals of checked statements.
CONSERVED_TOL = 1e-9
DECOMPOSITION_TOL = 1e-8

# Singular value threshold and required gap of the brute-force nullspace.
NULL_THRESHOLD = 1e-8
GAP_RATIO = 1e3


def _max_charge_width(L: int):
    """Returns the widest density whose light cone neither wraps nor joins two parity classes."""
    return min(L, 2 * L - 4)


class ChargeRecord:
    """
    Creates a `ChargeRecord`: a sum of coefficient-weighted, boundary-traceless densities placed on a periodic chain.

    Attributes:
        chain_len (int): The chain size 2L.
        terms (list): (coeff, x, op) tuples with op a `LocalOperator` strictly traceless at both ends.
        provenance (dict): Where the charge came from, with a 'kind' of from_soliton, composite, brute_force or user.
    """
    _chain_len = None
    _terms = None
    _strings = None

    def __init__(self, chain_len: int, terms, provenance: (dict, None) = None):
        """
        Initializes the `ChargeRecord` after validating every term.

        Raises:
            ducharge.framework.ContractViolation: When the chain is invalid, a term does not fit, mixes d, or is not
                strictly traceless at both ends of its support.
        """
        # Require an even chain of at least four sites
        if isinstance(chain_len, bool) or not isinstance(chain_len, (int, np.integer)):
            raise framework.ContractViolation(f"'chain_len' must be an integer, got {chain_len}")
        if chain_len < 4 or chain_len % 2:
            raise framework.ContractViolation(f"'chain_len' must be even and >= 4, got {chain_len}")

        checked = []
        dims = set()
        for coeff, x, op in terms:
            # Require embeddable boundary-traceless densities
            if not isinstance(op, tensor_core.LocalOperator) or op.w < 1 or op.w > chain_len:
                raise framework.ContractViolation(f"term at x={x} must be a LocalOperator of width <= {chain_len}")
            if tensor_core.boundary_defect(op) > 1e-10:
                raise framework.ContractViolation(f"charge term at x={x} is not traceless at both boundary sites")
            dims.add(op.d)
            checked.append((complex(coeff), int(x) % int(chain_len), op))

        # Require one qudit dimension
        if len(dims) > 1:
            raise framework.ContractViolation(f"charge terms mix qudit dimensions {sorted(dims)}")

        self._chain_len = int(chain_len)
        self._terms = checked
        self.provenance = dict(provenance) if provenance else {"kind": "user"}

    def __repr__(self):
        kind = self.provenance.get("kind")
        return f"ChargeRecord(chain_len={self.chain_len}, terms={len(self.terms)}, kind='{kind}')"

    @property
    def chain_len(self):
        """The chain size 2L."""
        return self._chain_len

    @property
    def L(self):  # pylint: disable=invalid-name
        """The half chain length."""
        return self._chain_len // 2

    @property
    def terms(self):
        """The (coeff, x, op) terms."""
        return list(self._terms)

    @property
    def d(self):
        """The qudit dimension, 2 for an empty charge."""
        return self._terms[0][2].d if self._terms else 2

    def string_terms(self):
        """Returns the chain string expansion {ring letter tuple: coefficient}."""
        if self._strings is None:
            strings = {}
            for coeff, x, op in self._terms:
                for key, value in tensor_core.chain_string_terms(op, x, self.chain_len).items():
                    strings[key] = strings.get(key, 0) + coeff * value
            self._strings = {key: value for key, value in strings.items() if abs(value) > 1e-14}
        return self._strings

    def norm(self):
        """Returns sqrt(tr(Q^dagger Q) / d^(2L))."""
        return float(np.sqrt(sum(abs(value) ** 2 for value in self.string_terms().values())))

    def materialize(self, config: (framework.RunConfig, None) = None):
        """
        Builds the dense chain matrix of the charge.

        Raises:
            ducharge.framework.ResourceError: When d^(2L) exceeds the chain cap.
        """
        config = config if config else framework.RunConfig()
        config.check_chain_dim(self.d, self.chain_len)
        size = self.d ** self.chain_len
        matrix = np.zeros((size, size), dtype=complex)
        for coeff, x, op in self._terms:
            matrix += coeff * tensor_core.materialize(tensor_core.embed(op, x, self.chain_len), config).matrix
        return tensor_core.LocalOperator(matrix, self.d, self.chain_len)

    def to_dict(self):
        """Returns the JSON-ready form {chain_len, d, terms: [{coeff, x, w, op}], provenance}."""
        return {
            "chain_len": self.chain_len,
            "d": self.d,
            "terms": [
                {"coeff": [coeff.real, coeff.imag], "x": x, "w": op.w, "op": tensor_core.matrix_to_pairs(op.matrix)}
                for coeff, x, op in self._terms
            ],
            "provenance": self.provenance
        }


def charge_from_dict(data: dict):
    """
    Builds a `ChargeRecord` from `ChargeRecord.to_dict()` output.

    Raises:
        ducharge.framework.ParseError: When keys are missing or a term is malformed.
    """
    # Require the documented keys
    if not isinstance(data, dict) or "chain_len" not in data or "terms" not in data:
        raise framework.ParseError("charge data must be an object with 'chain_len' and 'terms' values")

    d = data.get("d", 2)
    terms = []
    try:
        for term in data["terms"]:
            w = term["w"]
            matrix = tensor_core.matrix_from_pairs(term["op"], d ** w)
            coeff = complex(term["coeff"][0], term["coeff"][1])
            terms.append((coeff, term["x"], tensor_core.LocalOperator(matrix, d, w)))
        return ChargeRecord(data["chain_len"], terms, data.get("provenance"))
    except (KeyError, TypeError, IndexError) as exc:
        raise framework.ParseError(f"charge term is malformed ({exc})") from exc
    except framework.ContractViolation as exc:
        raise framework.ParseError(f"charge data is invalid ({exc})") from exc


def read_charge(path: (str, pathlib.Path)):
    """
    Reads a charge JSON file.

    Raises:
        ducharge.framework.ParseError: When the file is missing, not JSON or not a charge.
    """
    try:
        with open(path, "r", encoding="utf-8") as charge_file:
            data = json.load(charge_file)
    except (OSError, json.JSONDecodeError) as exc:
        raise framework.ParseError(f"failed to read charge file '{path}' ({exc})") from exc
    return charge_from_dict(data)


def write_charge(charge: ChargeRecord, path: (str, pathlib.Path)):
    """Writes a charge JSON file."""
    with open(path, "w", encoding="utf-8") as charge_file:
        json.dump(charge.to_dict(), charge_file)


def phase_compatible(lam: complex, L: int):
    """Checks whether lam is an L-th root of unity within `PHASE_TOL`."""
    return abs(complex(lam) ** L - 1) < PHASE_TOL


def charge_from_soliton(s: lightcone_maps.SolitonRecord, L: int):
    """
    Sums the translates of a soliton into a charge on 2L sites.

    Right movers are placed on even sites with weight lam^(x/2); left movers on odd sites with weight lam^(-(x-1)/2).

    Args:
        s (ducharge.lightcone_maps.SolitonRecord): The soliton.
        L (int): The half chain length.

    Raises:
        ducharge.framework.PhaseIncompatible: When lam^L differs from 1.
        ducharge.framework.ContractViolation: When the soliton does not fit on the chain.

    Returns:
        ducharge.charges.ChargeRecord: The charge.
    """
    # Require a phase that closes around the ring
    if not phase_compatible(s.lam, L):
        raise framework.PhaseIncompatible(
            f"soliton phase {s.lam:.12g} is not an {L}-th root of unity (|lam^L - 1| = {abs(s.lam ** L - 1):.3e})",
            s.lam, L
        )

    if s.direction == lightcone_maps.PLUS:
        terms = [(s.lam ** (x // 2), x, s.op) for x in range(0, 2 * L, 2)]
    else:
        terms = [(s.lam ** (-((x - 1) // 2)), x, s.op) for x in range(1, 2 * L, 2)]

    kind = "composite" if isinstance(s, CompositeSoliton) else "from_soliton"
    provenance = {"kind": kind, "direction": s.direction, "w": s.width, "lambda": [s.lam.real, s.lam.imag]}
    return ChargeRecord(2 * L, terms, provenance)


def verify_conserved(F: chain.FloquetOperator, Q: ChargeRecord, config: (framework.RunConfig, None) = None):
    """
    Returns the relative residual ||F Q F^dagger - Q|| / ||Q|| in Hilbert-Schmidt norm.

    Raises:
        ducharge.framework.ContractViolation: When the chains differ or Q is zero.
    """
    # Require a charge on the same chain
    if Q.chain_len != F.chain_len:
        raise framework.ContractViolation(f"charge chain {Q.chain_len} does not match {F.chain_len} sites")

    dense = Q.materialize(config).matrix
    norm = np.linalg.norm(dense)

    # Require a non-zero charge
    if norm == 0:
        raise framework.ContractViolation("cannot verify conservation of a zero charge")

    evolved = F.matrix @ dense @ F.matrix.conj().T
    residual = float(np.linalg.norm(evolved - dense) / norm)
    log.debug(f"conservation residual of {Q!r} under {F!r} is {residual:.3e}")
    return residual


def charge_components(Q: ChargeRecord):
    """
    Splits a charge into densities on their minimal covering intervals.

    Returns:
        dict: {(x, w): LocalOperator}, each strictly traceless at both ends. Strings without a unique covering interval
            are keyed by the interval `tensor_core.cyclic_interval()` picks.
    """
    grouped = {}
    for key, coeff in Q.string_terms().items():
        interval = tensor_core.cyclic_interval([site for site, index in enumerate(key) if index], Q.chain_len)
        if interval is None:
            continue
        x, w, _ = interval
        local = tuple(key[(x + offset) % Q.chain_len] for offset in range(w))
        grouped.setdefault((x, w), {})[local] = coeff

    components = {}
    for (x, w), strings in sorted(grouped.items()):
        coeffs = np.zeros((Q.d * Q.d,) * w, dtype=complex)
        for local, coeff in strings.items():
            coeffs[local] = coeff
        components[(x, w)] = tensor_core.from_string_coefficients(coeffs, Q.d)

    return components


class ConservedSpace:
    """
    Creates a `ConservedSpace`: the result of `brute_force_conserved_space()`.

    Attributes:
        records (list): Orthonormal `ChargeRecord` basis of the conserved space.
        singular_values (numpy.ndarray): All singular values of the fixed-point problem, every sector combined.
        gap_ratio (float): Smallest kept over largest discarded singular value, `inf` without discarded values.
        inconclusive (bool): Whether the gap ratio is below `GAP_RATIO`.
    """
    def __init__(self, records, singular_values, gap_ratio: float):
        self.records = list(records)
        self.singular_values = np.asarray(singular_values)
        self.gap_ratio = float(gap_ratio)
        self.inconclusive = self.gap_ratio < GAP_RATIO

    def __len__(self):
        return len(self.records)

    def __repr__(self):
        return f"ConservedSpace(dimension={len(self)}, gap_ratio={self.gap_ratio:.3g})"

    @property
    def dimension(self):
        """The number of independent conserved charges."""
        return len(self.records)


def _ring_codes(letters, d: int):
    """Encodes ring letter arrays of shape (n, 2L) as integers, first site most significant."""
    weights = (d * d) ** np.arange(letters.shape[1] - 1, -1, -1, dtype=np.int64)
    return letters.astype(np.int64) @ weights


def _orbit_data(letters, d: int):
    """
    Finds the two-site translation representative of each ring string.

    Returns:
        tuple: (representative codes, shift l with string = T^(2l) representative, period R in two-site steps).
    """
    cells = letters.shape[1] // 2
    codes = np.stack([_ring_codes(np.roll(letters, -2 * shift, axis=1), d) for shift in range(cells)], axis=1)
    shifts = np.argmin(codes, axis=1)
    representatives = codes[np.arange(codes.shape[0]), shifts]
    periods = cells // np.sum(codes == codes[:, :1], axis=1)
    return representatives, shifts, periods


def _cell_basis(d: int, w_max: int):
    """Yields (parity, w, letters) for every boundary-traceless string of width 1..w_max placed at site 0 or 1."""
    letters = range(1, d * d)
    for w in range(1, w_max + 1):
        interiors = itertools.product(range(d * d), repeat=max(w - 2, 0))
        shapes = [(a,) for a in letters] if w == 1 else [
            (a,) + interior + (b,) for interior in interiors for a in letters for b in letters
        ]
        for parity in (0, 1):
            for shape in shapes:
                yield parity, w, shape


def _image_entries(U: gates.Gate, V: gates.Gate, basis, chain_len: int):
    """
    Evolves every cell basis string by one period with the window engine.

    Returns:
        tuple: (column index, ring letters, coefficient) arrays covering every image string.
    """
    d = U.d
    columns, rows, values = [], [], []
    groups = {}
    for column, (parity, w, shape) in enumerate(basis):
        groups.setdefault((parity, w), []).append((column, shape))

    for (parity, w), members in groups.items():
        ops = np.array([chain.pad_window(tensor_core.string_operator(shape, d)).matrix for _, shape in members])
        start = (parity - 2) % chain_len
        images = chain.window_step(ops, U, V, start, w + 4)

        for (column, _), image in zip(members, images):
            coeffs = tensor_core.string_coefficients(tensor_core.LocalOperator(image, d, w + 4))
            hits = np.nonzero(np.abs(coeffs) > 1e-14)
            ring = np.zeros((hits[0].size, chain_len), dtype=np.int64)
            for offset, index in enumerate(hits):
                ring[:, (start + offset) % chain_len] = index
            columns.append(np.full(hits[0].size, column))
            rows.append(ring)
            values.append(coeffs[hits])

    return np.concatenate(columns), np.concatenate(rows), np.concatenate(values)


def _oracle_workload(basis, d: int, w_max: int):
    """
    Bounds the dense entries the oracle allocates: one full window image per basis string, and one sector block.

    Block rows are orbit representatives of strings that fit a width w_max + 4 window starting on site 0 or 1.

    Returns:
        tuple: (image entries, sector block entries).
    """
    images = sum(d ** (2 * (w + 4)) for _, w, _ in basis)
    rows = min(images + len(basis), 2 * d ** (2 * (w_max + 4)))
    return images, rows * len(basis)


def brute_force_conserved_space(U: gates.Gate, V: gates.Gate, L: int, w_max: int,
                                config: (framework.RunConfig, None) = None, strict: bool = True):
    """
    Computes every conserved charge built from boundary-traceless densities of width up to w_max, without solitons.

    The candidate space holds sums over all start sites x of densities q(x, w). One period is applied to each basis
    string exactly with the window engine. The fixed-point problem (F - 1)Q = 0 commutes with two-site translations,
    so it is solved in each of the L momentum sectors with orbit representatives as rows, by singular value
    decomposition at `NULL_THRESHOLD`.

    Args:
        U (ducharge.gates.Gate): The even-bond gate.
        V (ducharge.gates.Gate): The odd-bond gate.
        L (int): The half chain length.
        w_max (int): The largest density width, at most min(L, 2L - 4).
        config (ducharge.framework.RunConfig, None): The configuration whose chain cap applies.
        strict (bool): Raise `InconclusiveError` when the singular value gap is too small, instead of flagging it.

    Raises:
        ducharge.framework.ContractViolation: When w_max is out of range or the gates are not unitary.
        ducharge.framework.ResourceError: When d^(2L) exceeds the chain cap, or the image or sector block arrays would
            exceed max_superop_dim^2 entries.
        ducharge.framework.InconclusiveError: When `strict` and the gap ratio is below `GAP_RATIO`.

    Returns:
        ducharge.charges.ConservedSpace: The orthonormal basis and the singular value diagnostics.
    """
    config = config if config else framework.RunConfig()
    F = chain.floquet(U, V, L, config)

    # Require light cones that stay inside one class and never wrap
    if isinstance(w_max, bool) or not isinstance(w_max, int) or not 1 <= w_max <= _max_charge_width(L):
        raise framework.ContractViolation(f"'w_max' must lie in [1, {_max_charge_width(L)}] for L={L}, got {w_max}")

    d = F.d
    chain_len = F.chain_len
    basis = list(_cell_basis(d, w_max))
    image_entries, block_entries = _oracle_workload(basis, d, w_max)
    config.check_dense_entries(image_entries, f"evolving {len(basis)} density strings")
    config.check_dense_entries(block_entries, f"momentum sector blocks with {len(basis)} columns")
    columns, ring, values = _image_entries(U, V, basis, chain_len)

    placed = np.zeros((len(basis), chain_len), dtype=np.int64)
    for column, (parity, _, shape) in enumerate(basis):
        placed[column, parity:parity + len(shape)] = shape

    image_reps, image_shifts, image_periods = _orbit_data(ring, d)
    basis_reps, basis_shifts, _ = _orbit_data(placed, d)
    row_codes, inverse = np.unique(np.concatenate([image_reps, basis_reps]), return_inverse=True)
    image_rows = inverse[:image_reps.size]
    basis_rows = inverse[image_reps.size:]

    records = []
    singular_values = []
    for m in range(L):
        k = 2 * np.pi * m / L
        compatible = (m * image_periods) % L == 0
        block = np.zeros((row_codes.size, len(basis)), dtype=complex)
        weights = values * np.exp(-1j * k * image_shifts) * np.sqrt(L / image_periods)
        np.add.at(block, (image_rows[compatible], columns[compatible]), weights[compatible])
        np.add.at(block, (basis_rows, np.arange(len(basis))), -np.exp(-1j * k * basis_shifts))

        null, sector_values = tensor_core.null_space(block, NULL_THRESHOLD)
        singular_values.append(sector_values)
        for vector in null.T:
            records.append(_sector_charge(vector, basis, m, L, d))

        log.debug(f"momentum sector {m}/{L}: {null.shape[1]} conserved charges")

    singular_values = np.concatenate(singular_values)
    kept = singular_values[singular_values > NULL_THRESHOLD]
    discarded = singular_values[singular_values <= NULL_THRESHOLD]
    largest_discarded = float(np.max(discarded)) if discarded.size else 0.0
    smallest_kept = float(np.min(kept)) if kept.size else np.inf
    gap_ratio = smallest_kept / largest_discarded if largest_discarded > 0 else np.inf

    space = ConservedSpace(records, singular_values, gap_ratio)
    if space.inconclusive and strict:
        raise framework.InconclusiveError(
            f"no clean singular value gap at {NULL_THRESHOLD:g} (ratio {gap_ratio:.3g})",
            {"smallest_kept": smallest_kept, "largest_discarded": largest_discarded, "gap_ratio": gap_ratio}
        )

    log.info(f"brute force found {space.dimension} conserved charges for L={L}, w_max={w_max}")
    return space


def _sector_charge(vector, basis, m: int, L: int, d: int):
    """Turns a momentum-sector null vector into a `ChargeRecord` with one density per (x, w)."""
    k = 2 * np.pi * m / L
    densities = {}
    for coeff, (parity, w, shape) in zip(vector, basis):
        if abs(coeff) < 1e-14:
            continue
        for cell in range(L):
            key = (parity + 2 * cell, w)
            if key not in densities:
                densities[key] = np.zeros((d * d,) * w, dtype=complex)
            densities[key][shape] += coeff * np.exp(1j * k * cell) / np.sqrt(L)

    terms = [(1.0, x, tensor_core.from_string_coefficients(coeffs, d)) for (x, _), coeffs in sorted(densities.items())]
    return ChargeRecord(2 * L, terms, {"kind": "brute_force", "sector": m})


def _charge_matrix(charges, keys=None):
    """Stacks charges as columns over their chain strings; returns (matrix, keys)."""
    if keys is None:
        keys = sorted({key for charge in charges for key in charge.string_terms()})
    index = {key: row for row, key in enumerate(keys)}
    matrix = np.zeros((len(keys), len(charges)), dtype=complex)
    for column, charge in enumerate(charges):
        for key, value in charge.string_terms().items():
            matrix[index[key], column] = value
    return matrix, keys


def span_angles(charges_a, charges_b):
    """
    Returns the principal angles between the spans of two charge lists, in radians and descending order.

    Either span being empty gives an empty array; compare the span dimensions separately.
    """
    charges = list(charges_a) + list(charges_b)
    if not charges_a or not charges_b:
        return np.zeros(0)

    matrix, _ = _charge_matrix(charges)
    span_a = scipy.linalg.orth(matrix[:, :len(charges_a)])
    span_b = scipy.linalg.orth(matrix[:, len(charges_a):])
    if span_a.shape[1] == 0 or span_b.shape[1] == 0:
        return np.zeros(0)
    return scipy.linalg.subspace_angles(span_a, span_b)


def soliton_sets(U: gates.Gate, V: gates.Gate, w_max: int, config: (framework.RunConfig, None) = None):
    """Returns {(direction, w): [SolitonRecord]} for both directions and every odd w <= w_max."""
    return {
        (direction, w): lightcone_maps.find_solitons(U, V, w, direction, config=config)
        for w in range(1, w_max + 1, 2)
        for direction in (lightcone_maps.PLUS, lightcone_maps.MINUS)
    }


def decompose_into_soliton_charges(Q: ChargeRecord, solitons: dict, F: (chain.FloquetOperator, None) = None,
                                   config: (framework.RunConfig, None) = None):
    """
    Writes a conserved charge as a combination of soliton charges.

    The alphas come from projecting the width-w density at x=0 onto the right movers of width w, the betas from the
    density at x=1 onto the left movers. Only solitons whose phase closes around the ring take part.

    Args:
        Q (ducharge.charges.ChargeRecord): The charge.
        solitons (dict): {(direction, w): [SolitonRecord]} as returned by `soliton_sets()`.
        F (ducharge.chain.FloquetOperator, None): When given, Q is first checked to be conserved under F.
        config (ducharge.framework.RunConfig, None): The configuration whose caps apply.

    Raises:
        ducharge.framework.ContractViolation: When Q is not conserved, holds even-width densities or densities wider
            than min(L, 2L - 4).
        ducharge.framework.TheoremViolation: When the reconstruction residual exceeds `DECOMPOSITION_TOL`.

    Returns:
        dict: {"alpha": [...], "beta": [...], "residual": float}. Each coefficient entry holds w, index, lambda, coeff.
    """
    L = Q.L
    if F is not None:
        residual = verify_conserved(F, Q, config)
        # Require a conserved input
        if residual >= CONSERVED_TOL:
            raise framework.ContractViolation(f"charge is not conserved (residual {residual:.3e})")

    components = charge_components(Q)
    norm = Q.norm()
    for (x, w), op in components.items():
        # Require odd widths inside the valid range
        if w > _max_charge_width(L):
            raise framework.ContractViolation(f"density at x={x} has width {w} > {_max_charge_width(L)}")
        if w % 2 == 0 and tensor_core.hs_norm(op) / np.sqrt(op.d ** w) > 1e-9 * max(norm, 1.0):
            raise framework.ContractViolation(f"density at x={x} has even width {w}")

    report = {"alpha": [], "beta": []}
    reconstruction = []
    for (direction, w), records in sorted(solitons.items()):
        usable = [record for record in records if phase_compatible(record.lam, L)]
        anchor = 0 if direction == lightcone_maps.PLUS else 1
        density = components.get((anchor, w))
        if not usable or density is None:
            continue

        matrix = np.array([tensor_core.vectorize(record.op) for record in usable]).T
        coeffs, *_ = np.linalg.lstsq(matrix, tensor_core.vectorize(density), rcond=None)
        name = "alpha" if direction == lightcone_maps.PLUS else "beta"
        for index, (record, coeff) in enumerate(zip(usable, coeffs)):
            report[name].append({
                "w": w,
                "index": index,
                "lambda": [record.lam.real, record.lam.imag],
                "coeff": [float(coeff.real), float(coeff.imag)]
            })
            for term_coeff, x, op in charge_from_soliton(record, L).terms:
                reconstruction.append((coeff * term_coeff, x, op))

    rebuilt = ChargeRecord(Q.chain_len, reconstruction).string_terms()
    original = Q.string_terms()
    difference = sum(abs(original.get(key, 0) - rebuilt.get(key, 0)) ** 2 for key in set(original) | set(rebuilt))
    report["residual"] = float(np.sqrt(difference)) / norm if norm > 0 else 0.0

    if report["residual"] > DECOMPOSITION_TOL:
        raise framework.TheoremViolation(
            f"charge does not decompose into soliton charges (residual {report['residual']:.3e})", report["residual"]
        )

    log.debug(f"decomposed {Q!r}: {len(report['alpha'])} alphas, {len(report['beta'])} betas")
    return report


def soliton_step_residual(record: lightcone_maps.SolitonRecord, U: gates.Gate, V: gates.Gate, x: (int, None) = None):
    """
    Returns ||F a_x F^dagger - lam a_(x+-2)|| / ||a|| for a soliton placed at x, computed with the window engine.

    Args:
        record (ducharge.lightcone_maps.SolitonRecord): The soliton, or a composite.
        U (ducharge.gates.Gate): The even-bond gate.
        V (ducharge.gates.Gate): The odd-bond gate.
        x (int, None): The start site. Defaults to 0 for right movers and 1 for left movers.
    """
    if x is None:
        x = 0 if record.direction == lightcone_maps.PLUS else 1

    width = record.width
    chain_len = width + 4 + (width % 2)
    _, window = chain.light_cone_step(U, V, record.op, x, chain_len)
    pad = np.eye(record.op.d ** 4)
    if record.direction == lightcone_maps.PLUS:
        expected = np.kron(pad, record.op.matrix)
    else:
        expected = np.kron(record.op.matrix, pad)

    return float(np.linalg.norm(window.matrix - record.lam * expected) / tensor_core.hs_norm(record.op))


def soliton_from_operator(op: tensor_core.LocalOperator, U: gates.Gate, V: gates.Gate, direction: str):
    """
    Wraps a known moving operator as a `SolitonRecord`, fitting its phase from one period of the window engine.

    Args:
        op (ducharge.tensor_core.LocalOperator): The operator, strictly traceless at both ends.
        U (ducharge.gates.Gate): The even-bond gate.
        V (ducharge.gates.Gate): The odd-bond gate.
        direction (str): '+' or '-'.

    Raises:
        ducharge.framework.NumericError: When one period does not move `op` by two sites up to a phase.

    Returns:
        ducharge.lightcone_maps.SolitonRecord: The record, normalized to hs_norm sqrt(d^w).
    """
    direction = lightcone_maps.parse_direction(direction)
    x = 0 if direction == lightcone_maps.PLUS else 1
    op = (np.sqrt(op.d ** op.w) / tensor_core.hs_norm(op)) * op

    _, window = chain.light_cone_step(U, V, op, x, op.w + 4 + (op.w % 2))
    pad = np.eye(op.d ** 4)
    expected = np.kron(pad, op.matrix) if direction == lightcone_maps.PLUS else np.kron(op.matrix, pad)
    overlap = np.vdot(expected, window.matrix) / np.vdot(expected, expected)

    # Require a non-vanishing overlap with the translated operator
    if abs(overlap) < 1e-12:
        raise framework.NumericError("operator has no overlap with its translate", {"overlap": abs(overlap)})

    record = lightcone_maps.SolitonRecord(op, direction, overlap / abs(overlap))
    residual = soliton_step_residual(record, U, V, x)
    if residual > CONSERVED_TOL:
        raise framework.NumericError(f"operator is not a soliton (residual {residual:.3e})", {"residual": residual})
    return record


class CompositeSoliton(lightcone_maps.SolitonRecord):
    """
    Creates a `CompositeSoliton`: the product of same-direction solitons on disjoint supports of equal site parity.

    The product moves by two sites per period with the product of the phases.

    Attributes:
        parts (list): (SolitonRecord, site) pairs in site order.
        x (int): The first site of the product.
    """
    def __init__(self, parts, lam: (complex, None) = None):
        """
        Initializes the `CompositeSoliton` from its parts.

        Args:
            parts (list): (SolitonRecord, site) pairs.
            lam (complex, None): Overrides the product phase, for pairings whose phase is exactly one.

        Raises:
            ducharge.framework.ContractViolation: When parts differ in direction or d, sit on the wrong parity, or
                overlap.
        """
        parts = sorted(((record, int(site)) for record, site in parts), key=lambda part: part[1])

        # Require at least one part
        if not parts:
            raise framework.ContractViolation("a composite needs at least one part")

        direction = parts[0][0].direction
        parity = 0 if direction == lightcone_maps.PLUS else 1
        d = parts[0][0].op.d
        for record, site in parts:
            # Require one direction, one d and the direction's site parity
            if record.direction != direction:
                raise framework.ContractViolation("composite parts must share one direction")
            if record.op.d != d:
                raise framework.ContractViolation("composite parts must share one qudit dimension")
            if site % 2 != parity:
                parity_name = "even" if parity == 0 else "odd"
                raise framework.ContractViolation(f"'{direction}' parts must sit on {parity_name} sites")

        for (first, first_site), (_, second_site) in zip(parts, parts[1:]):
            # Require disjoint supports
            if second_site < first_site + first.width:
                raise framework.ContractViolation(f"parts at sites {first_site} and {second_site} overlap")

        x = parts[0][1]
        matrix = np.ones((1, 1), dtype=complex)
        cursor = x
        for record, site in parts:
            matrix = np.kron(np.kron(matrix, np.eye(d ** (site - cursor))), record.op.matrix)
            cursor = site + record.width

        total = complex(np.prod([record.lam for record, _ in parts])) if lam is None else complex(lam)
        super().__init__(tensor_core.LocalOperator(matrix, d), direction, total)
        self.parts = parts
        self.x = x

    def __repr__(self):
        sites = [site for _, site in self.parts]
        return f"CompositeSoliton(direction='{self.direction}', sites={sites}, lam={self.lam:.6g})"


def composite_soliton(parts, U: (gates.Gate, None) = None, V: (gates.Gate, None) = None):
    """
    Builds the product of solitons placed at the given sites.

    Args:
        parts (list): (SolitonRecord, site) pairs.
        U (ducharge.gates.Gate, None): With V, checks that one period translates the product with phase lam_total.
        V (ducharge.gates.Gate, None): The odd-bond gate.

    Raises:
        ducharge.framework.ContractViolation: On direction, parity or overlap violations.
        ducharge.framework.NumericError: When the translation check fails.
    """
    composite = CompositeSoliton(parts)
    if U is not None and V is not None:
        residual = soliton_step_residual(composite, U, V, composite.x)
        if residual > CONSERVED_TOL:
            raise framework.NumericError(f"{composite!r} is not translated by one period", {"residual": residual})
    return composite


def adjoint_soliton(s: lightcone_maps.SolitonRecord):
    """Returns the partner soliton (lam*, a^dagger)."""
    return s.adjoint()


def conjugate_pair(s: lightcone_maps.SolitonRecord, x: int, x_adjoint: int):
    """Returns the product of a at x and a^dagger at x_adjoint; its phase is exactly 1."""
    return CompositeSoliton([(s, x), (adjoint_soliton(s), x_adjoint)], lam=1.0)


def composite_family(s: lightcone_maps.SolitonRecord, L: int, max_parts: (int, None) = None):
    """
    Enumerates products of copies of one soliton over sets of same-parity sites of the 2L-site chain.

    Each set starts at the first site of the direction's parity and is listed once per translation class: the gap
    wrapping around the ring is at least as large as every gap inside the set.

    Returns:
        list: `CompositeSoliton` objects, smallest sets first.
    """
    parity = 0 if s.direction == lightcone_maps.PLUS else 1
    chain_len = 2 * L
    sites = list(range(parity + 2, chain_len, 2))
    limit = max_parts if max_parts else L

    family = []
    for size in range(0, limit):
        for rest in itertools.combinations(sites, size):
            chosen = (parity,) + rest
            gaps = [second - first - s.width for first, second in zip(chosen, chosen[1:])]
            wrap = parity + chain_len - chosen[-1] - s.width
            if min(gaps + [wrap]) < 0 or any(gap > wrap for gap in gaps):
                continue
            family.append(CompositeSoliton([(s, site) for site in chosen]))

    log.debug(f"built {len(family)} composites of {s!r} on {chain_len} sites")
    return family


def theorem1_report(U: gates.Gate, V: gates.Gate, L: int, w_max: int, config: (framework.RunConfig, None) = None):
    """
    Compares the brute-force conserved space with the span of soliton charges and decomposes every oracle vector.

    Raises:
        ducharge.framework.ContractViolation: When a gate is not dual-unitary or w_max is out of range.
        ducharge.framework.InconclusiveError: When the oracle has no clean singular value gap.

    Returns:
        dict: Dimensions, principal angles, the largest decomposition residual and the overall verdict.
    """
    config = config if config else framework.RunConfig()
    gates.require_dual_unitary(U)
    gates.require_dual_unitary(V)

    space = brute_force_conserved_space(U, V, L, w_max, config)
    solitons = soliton_sets(U, V, w_max, config)
    soliton_charges = [
        charge_from_soliton(record, L)
        for records in solitons.values() for record in records if phase_compatible(record.lam, L)
    ]

    soliton_dim = 0
    if soliton_charges:
        soliton_dim = scipy.linalg.orth(_charge_matrix(soliton_charges)[0]).shape[1]

    angles = span_angles(space.records, soliton_charges)
    residuals = [decompose_into_soliton_charges(Q, solitons)["residual"] for Q in space.records]
    max_angle = float(np.max(angles)) if angles.size else 0.0
    max_residual = max(residuals, default=0.0)

    report = {
        "L": L,
        "w_max": w_max,
        "oracle_dimension": space.dimension,
        "soliton_dimension": soliton_dim,
        "soliton_counts": {f"{direction}{w}": len(records) for (direction, w), records in sorted(solitons.items())},
        "principal_angles": [float(angle) for angle in angles],
        "max_angle": max_angle,
        "max_residual": max_residual,
        "gap_ratio": space.gap_ratio,
        "inconclusive": space.inconclusive,
        "match": space.dimension == soliton_dim and max_angle < 1e-7 and max_residual < DECOMPOSITION_TOL
    }
    log.info(f"theorem check: oracle {space.dimension}, solitons {soliton_dim}, match {report['match']}")
    return report
