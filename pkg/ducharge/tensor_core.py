"""
Module that contains the qudit operator algebra used by every analysis: the string basis, Hilbert-Schmidt geometry,
partial traces, periodic embeddings and the boundary-traceless subspace.

Operators are dense matrices in the product basis |i_1>...|i_w> with the first site slowest. Superoperators act on the
column-stacked (Fortran order) vectorization of these matrices.
"""

import functools
import logging

import numpy as np
import scipy.linalg

from . import framework

log = logging.getLogger(__name__)

# Letters of the d=2 string basis in basis-index order.
PAULI_LETTERS = "IXYZ"

# Largest number of complex entries operator_basis() will materialize.
MAX_BASIS_ENTRIES = 2 ** 24


@functools.lru_cache(maxsize=None)
def site_basis(d: int):
    """
    Returns the single-site basis as a read-only array of shape (d*d, d, d).

    For d=2 this is (1, X, Y, Z). For d >= 3 it is the clock and shift basis X^a Z^b stored at index a*d + b, which is
    orthogonal but not Hermitian. Element 0 is always the identity and every element satisfies tr(B^dagger B) = d.

    Args:
        d (int): The qudit dimension.

    Returns:
        numpy.ndarray: The basis letters.
    """
    if d == 2:
        letters = np.array([
            [[1, 0], [0, 1]],
            [[0, 1], [1, 0]],
            [[0, -1j], [1j, 0]],
            [[1, 0], [0, -1]]
        ], dtype=complex)
    else:
        shift = np.roll(np.eye(d, dtype=complex), 1, axis=0)
        clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
        letters = np.array([
            np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b) for a in range(d) for b in range(d)
        ])

    letters.setflags(write=False)
    return letters


class LocalOperator:
    """
    Creates a `LocalOperator`: a dense d^w x d^w complex matrix on w qudit sites. Values are immutable once created.

    A width of zero is allowed and denotes a 1x1 scalar, as produced by tracing out every site.

    Attributes:
        d (int): The qudit dimension.
        w (int): The number of sites the operator acts on.
        matrix (numpy.ndarray): A read-only view of the matrix entries.
    """
    _d = None
    _w = None
    _matrix = None

    # Numpy scalars defer to __rmul__
    __array_ufunc__ = None

    def __init__(self, matrix, d: int, w: (int, None) = None):
        """
        Initializes the `LocalOperator` after validating the matrix against (d, w).

        Args:
            matrix (array_like): The matrix entries.
            d (int): The qudit dimension. Must be at least 2.
            w (int, None): The width in sites. When `None`, the width is inferred from the matrix shape.

        Raises:
            ducharge.framework.ContractViolation: When the matrix shape does not match (d^w, d^w) or holds NaN/Inf.
        """
        # Require d to be an integer of at least 2
        if isinstance(d, bool) or not isinstance(d, (int, np.integer)) or d < 2:
            raise framework.ContractViolation(f"qudit dimension must be an integer >= 2, got {d}")

        matrix = np.array(matrix, dtype=complex)

        # Require a square matrix
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise framework.ContractViolation(f"operator matrix must be square, got shape {matrix.shape}")

        if w is None:
            w = width_from_dim(matrix.shape[0], d)

        # Require the shape to match the width exactly
        if w < 0 or matrix.shape != (d ** w, d ** w):
            raise framework.ContractViolation(f"operator shape {matrix.shape} does not match d={d}, w={w}")

        # Require finite entries
        if not np.all(np.isfinite(matrix)):
            raise framework.ContractViolation("operator entries must be finite")

        matrix.setflags(write=False)
        self._d = int(d)
        self._w = int(w)
        self._matrix = matrix

    def __repr__(self):
        return f"LocalOperator(d={self.d}, w={self.w})"

    def __add__(self, other):
        _require_same_shape(self, other)
        return LocalOperator(self.matrix + other.matrix, self.d, self.w)

    def __sub__(self, other):
        _require_same_shape(self, other)
        return LocalOperator(self.matrix - other.matrix, self.d, self.w)

    def __mul__(self, scalar):
        return LocalOperator(scalar * self.matrix, self.d, self.w)

    __rmul__ = __mul__

    def __neg__(self):
        return LocalOperator(-self.matrix, self.d, self.w)

    def __matmul__(self, other):
        _require_same_shape(self, other)
        return LocalOperator(self.matrix @ other.matrix, self.d, self.w)

    def dagger(self):
        """Returns the Hermitian adjoint."""
        return LocalOperator(self.matrix.conj().T, self.d, self.w)

    def kron(self, other):
        """Returns the tensor product with `other` placed on the sites to the right."""
        if other.d != self.d:
            raise framework.ContractViolation(f"cannot take tensor product of d={self.d} and d={other.d} operators")
        return LocalOperator(np.kron(self.matrix, other.matrix), self.d, self.w + other.w)

    def allclose(self, other, atol: float = 1e-12):
        """Checks whether `other` has the same shape and entries within `atol` in max-norm."""
        if (self.d, self.w) != (other.d, other.w):
            return False
        return bool(np.max(np.abs(self.matrix - other.matrix), initial=0.0) < atol)

    # Getters
    @property
    def d(self):
        """The qudit dimension."""
        return self._d

    @property
    def w(self):
        """The width in sites."""
        return self._w

    @property
    def dim(self):
        """The matrix dimension d^w."""
        return self._d ** self._w

    @property
    def matrix(self):
        """The read-only matrix entries."""
        return self._matrix


class EmbeddedOperator:
    """
    Creates an `EmbeddedOperator`: a `LocalOperator` placed on sites x, ..., x+w-1 (mod chain_len) of a periodic chain.

    Attributes:
        inner (ducharge.tensor_core.LocalOperator): The operator on its own support.
        x (int): The start site, reduced into [0, chain_len).
        chain_len (int): The number of sites 2L of the chain.
    """
    _inner = None
    _x = None
    _chain_len = None

    def __init__(self, inner: LocalOperator, x: int, chain_len: int):
        # Require an even chain of at least four sites
        if isinstance(chain_len, bool) or not isinstance(chain_len, (int, np.integer)):
            raise framework.ContractViolation("'chain_len' must be an integer")
        if chain_len < 4 or chain_len % 2:
            raise framework.ContractViolation(f"'chain_len' must be even and >= 4, got {chain_len}")

        # Require the operator to fit on the chain
        if not isinstance(inner, LocalOperator):
            raise framework.ContractViolation("'inner' must be type 'LocalOperator'")
        if inner.w > chain_len:
            raise framework.ContractViolation(f"width {inner.w} does not fit a chain of {chain_len} sites")

        self._inner = inner
        self._x = int(x) % int(chain_len)
        self._chain_len = int(chain_len)

    def __repr__(self):
        return f"EmbeddedOperator(x={self.x}, w={self.inner.w}, chain_len={self.chain_len})"

    @property
    def inner(self):
        """The operator on its own support."""
        return self._inner

    @property
    def x(self):
        """The start site."""
        return self._x

    @property
    def chain_len(self):
        """The chain length 2L."""
        return self._chain_len

    @property
    def sites(self):
        """The chain sites covered, in operator order."""
        return [(self.x + k) % self.chain_len for k in range(self.inner.w)]


def _require_same_shape(a: LocalOperator, b: LocalOperator):
    """Raises `ContractViolation` unless both operators share (d, w)."""
    if not isinstance(a, LocalOperator) or not isinstance(b, LocalOperator):
        raise framework.ContractViolation("operands must be type 'LocalOperator'")
    if (a.d, a.w) != (b.d, b.w):
        raise framework.ContractViolation(f"shape mismatch: (d={a.d}, w={a.w}) vs (d={b.d}, w={b.w})")


def width_from_dim(dim: int, d: int):
    """
    Returns w such that d^w == dim.

    Raises:
        ducharge.framework.ContractViolation: When `dim` is not a power of `d`.
    """
    w = 0
    size = 1
    while size < dim:
        size *= d
        w += 1

    if size != dim:
        raise framework.ContractViolation(f"dimension {dim} is not a power of d={d}")

    return w


def identity(d: int, w: int):
    """Returns the identity `LocalOperator` on w sites."""
    return LocalOperator(np.eye(d ** w), d, w)


def string_operator(indices, d: int):
    """
    Returns the basis string with the given per-site basis indices.

    Args:
        indices (sequence of int): One basis index in [0, d*d) per site.
        d (int): The qudit dimension.
    """
    letters = site_basis(d)
    matrix = np.ones((1, 1), dtype=complex)
    for index in indices:
        matrix = np.kron(matrix, letters[index])
    return LocalOperator(matrix, d, len(indices))


def pauli_string(letters: str):
    """
    Returns the d=2 string for a word such as "XIZ".

    Raises:
        ducharge.framework.ContractViolation: When the word contains a letter outside IXYZ.
    """
    indices = []
    for letter in letters.upper():
        # Require known Pauli letters
        if letter not in PAULI_LETTERS:
            raise framework.ContractViolation(f"unknown Pauli letter '{letter}'")
        indices.append(PAULI_LETTERS.index(letter))
    return string_operator(indices, 2)


def operator_basis(d: int, w: int):
    """
    Builds the ordered string basis of operators on w qudits.

    Element 0 is the identity, elements are pairwise Hilbert-Schmidt orthogonal and each satisfies
    hs_inner(B, B) = d^w. Strings are ordered lexicographically by per-site basis index, first site slowest.

    Args:
        d (int): The qudit dimension.
        w (int): The width in sites.

    Raises:
        ducharge.framework.ResourceError: When the basis would hold more than `MAX_BASIS_ENTRIES` entries.

    Returns:
        list: The d^(2w) basis strings as `LocalOperator` objects.
    """
    # Require the basis to fit in memory
    if d ** (4 * w) > MAX_BASIS_ENTRIES:
        raise framework.ResourceError(f"operator basis for d={d}, w={w} needs {d ** (4 * w)} entries")

    count = d ** (2 * w)
    basis = []
    for flat in range(count):
        indices = np.unravel_index(flat, (d * d,) * w) if w else ()
        basis.append(string_operator([int(i) for i in indices], d))

    log.debug(f"built operator basis with {count} strings for d={d}, w={w}")
    return basis


def string_coefficients(op: LocalOperator):
    """
    Expands an operator in the string basis.

    Returns:
        numpy.ndarray: Array of shape (d*d,)*w with entry [k_1, ..., k_w] equal to tr(B_k^dagger op) / d^w.
    """
    d, w = op.d, op.w
    if w == 0:
        return np.array(op.matrix[0, 0])

    letters = site_basis(d)
    tensor = op.matrix.reshape((d,) * (2 * w))

    # Pair the row and column index of every site: (i_1, j_1, i_2, j_2, ...)
    tensor = tensor.transpose([axis for site in range(w) for axis in (site, site + w)])

    # Contract the leading (i, j) pair each pass; the letter index lands at the end
    for _ in range(w):
        tensor = np.tensordot(tensor, letters.conj(), axes=([0, 1], [1, 2]))

    return tensor / d ** w


def from_string_coefficients(coeffs, d: int):
    """
    Rebuilds an operator from its string coefficients, the inverse of `string_coefficients()`.

    Args:
        coeffs (numpy.ndarray): Array of shape (d*d,)*w.
        d (int): The qudit dimension.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    w = coeffs.ndim
    if w == 0:
        return LocalOperator(coeffs.reshape(1, 1), d, 0)

    letters = site_basis(d)
    tensor = coeffs
    for _ in range(w):
        tensor = np.tensordot(tensor, letters, axes=([0], [0]))

    # Axes are now (i_1, j_1, i_2, j_2, ...); restore (i_1..i_w, j_1..j_w)
    rows = [2 * site for site in range(w)]
    cols = [2 * site + 1 for site in range(w)]
    tensor = tensor.transpose(rows + cols)
    return LocalOperator(tensor.reshape(d ** w, d ** w), d, w)


def hs_inner(a: LocalOperator, b: LocalOperator):
    """
    Returns the Hilbert-Schmidt inner product tr(a^dagger b).

    Raises:
        ducharge.framework.ContractViolation: When the operators differ in (d, w).
    """
    _require_same_shape(a, b)
    return complex(np.vdot(a.matrix, b.matrix))


def hs_norm(a: LocalOperator):
    """Returns sqrt(tr(a^dagger a))."""
    return float(np.sqrt(np.real(np.vdot(a.matrix, a.matrix))))


def partial_trace(op: LocalOperator, sites):
    """
    Traces out the given sites of an operator.

    Args:
        op (ducharge.tensor_core.LocalOperator): The operator to trace.
        sites (iterable of int): Site indices within [0, w-1].

    Raises:
        ducharge.framework.ContractViolation: When a site is outside the operator.

    Returns:
        ducharge.tensor_core.LocalOperator: The operator on the remaining sites, in their original order. Tracing every
            site returns a width-0 scalar equal to tr(op).
    """
    sites = set(sites)
    for site in sites:
        # Require every traced site to lie in the operator
        if isinstance(site, bool) or not isinstance(site, (int, np.integer)) or not 0 <= site < op.w:
            raise framework.ContractViolation(f"site {site} is outside an operator of width {op.w}")

    d = op.d
    remaining = op.w
    tensor = op.matrix.reshape((d,) * (2 * remaining))
    for site in sorted(sites, reverse=True):
        tensor = np.trace(tensor, axis1=site, axis2=site + remaining)
        remaining -= 1

    return LocalOperator(np.reshape(tensor, (d ** remaining, d ** remaining)), d, remaining)


def boundary_traceless_project(op: LocalOperator):
    """
    Projects an operator onto the boundary-traceless subspace: strings with a non-identity letter on the first and the
    last site (the single site when w=1). The projection is exact in basis index, idempotent and self-adjoint.

    Raises:
        ducharge.framework.ContractViolation: When the operator has width 0.
    """
    # Require at least one site
    if op.w < 1:
        raise framework.ContractViolation("boundary projection needs a width of at least 1")

    coeffs = string_coefficients(op).copy()
    coeffs[0, ...] = 0
    coeffs[..., 0] = 0
    return from_string_coefficients(coeffs, op.d)


def boundary_defect(op: LocalOperator):
    """Returns hs_norm(op - boundary_traceless_project(op)) / max(hs_norm(op), 1)."""
    rejected = op - boundary_traceless_project(op)
    return hs_norm(rejected) / max(hs_norm(op), 1.0)


def embed(op: LocalOperator, x: int, chain_len: int):
    """Places `op` on sites x, ..., x+w-1 (mod chain_len) of a periodic chain."""
    return EmbeddedOperator(op, x, chain_len)


def materialize(embedded: EmbeddedOperator, config: (framework.RunConfig, None) = None):
    """
    Builds the full chain matrix of an embedded operator, identity outside its sites.

    Args:
        embedded (ducharge.tensor_core.EmbeddedOperator): The operator to expand.
        config (ducharge.framework.RunConfig, None): The configuration whose chain cap applies.

    Raises:
        ducharge.framework.ResourceError: When d^chain_len exceeds the chain cap.

    Returns:
        ducharge.tensor_core.LocalOperator: The width-chain_len operator.
    """
    config = config if config else framework.RunConfig()
    inner = embedded.inner
    d, n = inner.d, embedded.chain_len
    config.check_chain_dim(d, n)

    full = np.kron(inner.matrix, np.eye(d ** (n - inner.w)))
    covered = embedded.sites
    targets = covered + [site for site in range(n) if site not in set(covered)]

    # Axis p of the tensor currently holds chain site targets[p]
    perm = list(np.argsort(targets))
    tensor = full.reshape((d,) * (2 * n)).transpose(perm + [p + n for p in perm])
    return LocalOperator(tensor.reshape(d ** n, d ** n), d, n)


def vectorize(op: LocalOperator):
    """Returns the column-stacked vector of length d^(2w); its conjugate dot product equals `hs_inner()`."""
    return op.matrix.reshape(-1, order="F").copy()


def devectorize(vec, d: int):
    """
    Inverts `vectorize()`.

    Raises:
        ducharge.framework.ContractViolation: When the length is not d^(2w).
    """
    vec = np.asarray(vec, dtype=complex)
    dim = int(round(np.sqrt(vec.size)))

    # Require a square number of entries
    if dim * dim != vec.size:
        raise framework.ContractViolation(f"vector of length {vec.size} is not a vectorized square matrix")

    return LocalOperator(vec.reshape(dim, dim, order="F"), d)


def cyclic_interval(sites, n: int):
    """
    Finds the minimal cyclic interval of a ring of n sites covering the given sites.

    Args:
        sites (iterable of int): Covered sites in [0, n).
        n (int): The ring size.

    Returns:
        tuple: (x, w, ambiguous) with the start site and width, or `None` when `sites` is empty. `ambiguous` is true
            when more than one interval of width w covers the sites.
    """
    sites = sorted(set(int(site) % n for site in sites))
    if not sites:
        return None

    # Identity gaps after each covered site, the last one wrapping around
    gaps = [nxt - cur - 1 for cur, nxt in zip(sites, sites[1:])]
    gaps.append(sites[0] + n - sites[-1] - 1)
    largest = max(gaps)
    position = gaps.index(largest)
    x = sites[(position + 1) % len(sites)]
    return x, n - largest, gaps.count(largest) > 1


def chain_string_terms(op: LocalOperator, x: int, chain_len: int, cutoff: float = 1e-14):
    """
    Expands an operator placed at site x in chain-level strings.

    Args:
        op (ducharge.tensor_core.LocalOperator): The operator on its own sites.
        x (int): The start site on the ring.
        chain_len (int): The ring size.
        cutoff (float): Coefficients with smaller magnitude are dropped.

    Returns:
        dict: Maps a tuple of chain_len basis indices (0 for identity) to its complex coefficient.
    """
    # Require the operator to fit on the ring
    if op.w > chain_len:
        raise framework.ContractViolation(f"width {op.w} does not fit a chain of {chain_len} sites")

    coeffs = string_coefficients(op)
    terms = {}
    for indices in zip(*np.nonzero(np.abs(coeffs) > cutoff)):
        letters = [0] * chain_len
        for offset, index in enumerate(indices):
            letters[(x + offset) % chain_len] = int(index)
        key = tuple(letters)
        terms[key] = terms.get(key, 0) + complex(coeffs[indices])

    return terms


def null_space(matrix, threshold: float = 1e-8):
    """
    Returns an orthonormal basis of the numerical null space of `matrix`.

    Args:
        matrix (numpy.ndarray): An m x n matrix.
        threshold (float): Singular values at or below this absolute value count as zero.

    Returns:
        tuple: (basis, singular_values) where basis has shape (n, nullity) and singular_values holds all min(m, n)
            singular values in descending order, padded with zeros up to n when m < n.
    """
    matrix = np.asarray(matrix, dtype=complex)
    n = matrix.shape[1]
    if matrix.shape[0] == 0:
        return np.eye(n, dtype=complex), np.zeros(n)

    _, values, vh = scipy.linalg.svd(matrix, full_matrices=True)
    values = np.concatenate([values, np.zeros(n - values.size)])
    rank = int(np.sum(values > threshold))
    return vh[rank:].conj().T, values


def matrix_to_pairs(matrix):
    """Returns a complex matrix as nested [re, im] lists, the matrix layout of every JSON file."""
    return [[[float(entry.real), float(entry.imag)] for entry in row] for row in np.asarray(matrix)]


def matrix_from_pairs(data, dim: int):
    """
    Inverts `matrix_to_pairs()`.

    Raises:
        ducharge.framework.ParseError: When the data is not a dim x dim grid of [re, im] pairs.
    """
    try:
        entries = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise framework.ParseError("matrix value must be nested [re, im] pairs") from exc

    # Require a dim x dim grid of pairs
    if entries.shape != (dim, dim, 2):
        raise framework.ParseError(f"matrix has shape {entries.shape}, expected ({dim}, {dim}, 2)")

    return entries[..., 0] + 1j * entries[..., 1]


def operator_to_dict(op: LocalOperator):
    """Returns {"d", "w", "matrix"} for an operator."""
    return {"d": op.d, "w": op.w, "matrix": matrix_to_pairs(op.matrix)}


def operator_from_dict(data: dict):
    """
    Builds an operator from `operator_to_dict()` output.

    Raises:
        ducharge.framework.ParseError: When keys are missing or the matrix does not match (d, w).
    """
    # Require the documented keys
    if not isinstance(data, dict) or not {"d", "w", "matrix"} <= set(data.keys()):
        raise framework.ParseError("operator data must be an object with 'd', 'w' and 'matrix' values")

    d, w = data["d"], data["w"]
    for key, value in (("d", d), ("w", w)):
        # Require integer metadata
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            raise framework.ParseError(f"operator '{key}' value must be a non-negative integer")

    try:
        return LocalOperator(matrix_from_pairs(data["matrix"], d ** w), d, w)
    except framework.ContractViolation as exc:
        raise framework.ParseError(f"operator matrix is invalid ({exc})") from exc
