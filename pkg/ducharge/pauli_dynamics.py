"""
Module that propagates sums of Pauli strings exactly through Clifford brickwork circuits on the infinite lattice, and
builds Jordan-Wigner fermions and their products.

A term may carry a semi-infinite tail: an implicit Z on every site left of `left_string`. Tails are what make the
translation of a single fermion exact, and they can only be propagated by gates that map Z x Z to itself.
"""

import logging
import re

import numpy as np

from . import framework
from . import gates
from . import tensor_core

log = logging.getLogger(__name__)

# Coefficients below this magnitude are dropped.
ZERO_CUTOFF = 1e-14

SEMI_INFINITE = "semi_infinite"
FINITE_FROM_0 = "finite_from_0"

# Single-site products a * b = phase * c.
_PRODUCTS = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I")
}

_TERM_TEXT = re.compile(r"^([+-]?\d+):([XYZ])$")
_TAIL_TEXT = re.compile(r"^tail:(-?\d+)$")


class PauliTerm:
    """
    Creates a `PauliTerm`: coeff times a product of single-site Paulis, optionally with a Z on every site < left_string.

    Terms are canonical after construction: identity letters are dropped and explicit Z letters directly right of the
    tail are absorbed into it.

    Attributes:
        coeff (complex): The coefficient.
        letters (dict): Site to letter 'X', 'Y' or 'Z'.
        left_string (int, None): The tail start s, or `None` without a tail.
    """
    def __init__(self, coeff: complex, letters: (dict, None) = None, left_string: (int, None) = None):
        """
        Initializes the `PauliTerm`.

        Raises:
            ducharge.framework.ContractViolation: When a letter is unknown or sits inside the tail.
        """
        letters = dict(letters) if letters else {}
        for site, letter in list(letters.items()):
            # Require Pauli letters on integer sites
            if letter not in "IXYZ" or len(letter) != 1:
                raise framework.ContractViolation(f"unknown Pauli letter '{letter}' at site {site}")
            if left_string is not None and site < left_string:
                raise framework.ContractViolation(f"letter at site {site} lies inside the tail at {left_string}")
            if letter == "I":
                del letters[site]

        if left_string is not None:
            while letters.get(left_string) == "Z":
                del letters[left_string]
                left_string += 1

        self.coeff = complex(coeff)
        self.letters = {int(site): letters[site] for site in sorted(letters)}
        self.left_string = None if left_string is None else int(left_string)

    def __repr__(self):
        return f"PauliTerm({self.coeff}, {self.letters}, left_string={self.left_string})"

    @property
    def key(self):
        """The string identity of the term, without its coefficient."""
        return self.left_string, tuple(self.letters.items())

    def letter_at(self, site: int):
        """Returns the letter on `site`, tail included."""
        if site in self.letters:
            return self.letters[site]
        if self.left_string is not None and site < self.left_string:
            return "Z"
        return "I"

    def dagger(self):
        """Returns the adjoint term; Pauli strings are Hermitian, so only the coefficient changes."""
        return PauliTerm(np.conj(self.coeff), self.letters, self.left_string)


def multiply_terms(a: PauliTerm, b: PauliTerm):
    """Returns the product a * b, tails included."""
    tails = [tail for tail in (a.left_string, b.left_string) if tail is not None]
    sites = set(a.letters) | set(b.letters)

    if len(tails) == 2:
        # Tails cancel below the shorter one
        tail = None
        sites |= set(range(min(tails), max(tails)))
    elif len(tails) == 1:
        tail = min([tails[0]] + [site for site in sites if site < tails[0]])
        sites |= set(range(tail, tails[0]))
    else:
        tail = None

    coeff = a.coeff * b.coeff
    letters = {}
    for site in sorted(sites):
        phase, letter = _PRODUCTS[(a.letter_at(site), b.letter_at(site))]
        coeff *= phase
        if letter != "I":
            letters[site] = letter

    return PauliTerm(coeff, letters, tail)


class PauliSum:
    """
    Creates a `PauliSum`: an immutable sum of `PauliTerm` objects with equal strings merged and zeros dropped.

    Terms are ordered by (first site, letters).
    """
    def __init__(self, terms=()):
        merged = {}
        for term in terms:
            if term.key in merged:
                merged[term.key] = PauliTerm(merged[term.key].coeff + term.coeff, term.letters, term.left_string)
            else:
                merged[term.key] = term

        kept = [term for term in merged.values() if abs(term.coeff) >= ZERO_CUTOFF]
        self._terms = tuple(sorted(kept, key=_sort_key))

    def __repr__(self):
        return f"PauliSum({len(self)} terms)"

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def __eq__(self, other):
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self.as_dict() == other.as_dict()

    def __hash__(self):
        return hash(frozenset(self.as_dict().items()))

    def __add__(self, other):
        return PauliSum(self._terms + other.terms)

    def __sub__(self, other):
        return self + (-1) * other

    def __mul__(self, scalar):
        return PauliSum(PauliTerm(scalar * term.coeff, term.letters, term.left_string) for term in self._terms)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return multiply(self, other)

    @property
    def terms(self):
        """The canonical terms."""
        return self._terms

    def as_dict(self):
        """Returns {term key: coeff}."""
        return {term.key: term.coeff for term in self._terms}

    def is_zero(self):
        """Checks whether no term survived."""
        return not self._terms

    def dagger(self):
        """Returns the adjoint sum."""
        return PauliSum(term.dagger() for term in self._terms)

    def has_tail(self):
        """Checks whether any term carries a semi-infinite tail."""
        return any(term.left_string is not None for term in self._terms)

    def translate(self, shift: int):
        """Returns the sum moved by `shift` sites."""
        return PauliSum(
            PauliTerm(
                term.coeff,
                {site + shift: letter for site, letter in term.letters.items()},
                None if term.left_string is None else term.left_string + shift
            )
            for term in self._terms
        )

    def allclose(self, other, atol: float = 1e-12):
        """Checks whether every coefficient agrees within `atol`."""
        mine, theirs = self.as_dict(), other.as_dict()
        return all(abs(mine.get(key, 0) - theirs.get(key, 0)) <= atol for key in set(mine) | set(theirs))


def _sort_key(term: PauliTerm):
    """Orders terms by first site, tails first, then by letters."""
    first = min(term.letters) if term.letters else 0
    if term.left_string is not None:
        first = min(first, term.left_string - 1)
    return first, term.left_string is None, term.left_string or 0, tuple(term.letters.items())


def multiply(P: PauliSum, Q: PauliSum):
    """Returns the exact product P Q."""
    return PauliSum(multiply_terms(a, b) for a in P for b in Q)


def commutator(P: PauliSum, Q: PauliSum):
    """Returns [P, Q] = PQ - QP."""
    return multiply(P, Q) - multiply(Q, P)


def anticommutator(P: PauliSum, Q: PauliSum):
    """Returns {P, Q} = PQ + QP."""
    return multiply(P, Q) + multiply(Q, P)


class CliffordTableau:
    """
    Creates a `CliffordTableau`: the images of X x 1, Z x 1, 1 x X and 1 x Z under conjugation by a two-qubit gate.

    Attributes:
        images (dict): Generator word ('XI', 'ZI', 'IX', 'IZ') to (sign, two-letter word).
        lookup (dict): Every two-letter word to (phase, two-letter word), derived from the generator images.
        z_string_stable (bool): Whether Z x Z maps to +Z x Z.
        name (str): The name of the gate.
    """
    def __init__(self, images: dict, name: str = ""):
        """
        Initializes the `CliffordTableau` and derives the full two-site lookup.

        Raises:
            ducharge.framework.ContractViolation: When the images do not preserve the Pauli commutation relations.
        """
        self.images = dict(images)
        self.name = name
        self.lookup = {}
        for first in "IXYZ":
            for second in "IXYZ":
                self.lookup[(first, second)] = self._image_of(first + second)

        # Require a valid automorphism: images of anticommuting generators anticommute
        for left, right, anticommute in (("XI", "ZI", True), ("IX", "IZ", True), ("XI", "IX", False),
                                         ("XI", "IZ", False), ("ZI", "IX", False), ("ZI", "IZ", False)):
            if _words_anticommute(self.images[left][1], self.images[right][1]) != anticommute:
                raise framework.ContractViolation(f"images of {left} and {right} break the commutation relations")

        phase, word = self.lookup[("Z", "Z")]
        self.z_string_stable = word == "ZZ" and phase == 1

    def __repr__(self):
        return f"CliffordTableau(name='{self.name}', z_string_stable={self.z_string_stable})"

    def _image_of(self, word: str):
        """Multiplies generator images, with Y = i X Z, to get the image of any two-letter word."""
        phase = 1
        factors = []
        for position, letter in enumerate(word):
            x_word, z_word = ("XI", "ZI") if position == 0 else ("IX", "IZ")
            if letter == "X":
                factors.append(self.images[x_word])
            elif letter == "Z":
                factors.append(self.images[z_word])
            elif letter == "Y":
                phase *= 1j
                factors.append(self.images[x_word])
                factors.append(self.images[z_word])

        current = "II"
        for sign, image in factors:
            phase *= sign
            letters = []
            for left, right in zip(current, image):
                site_phase, letter = _PRODUCTS[(left, right)]
                phase *= site_phase
                letters.append(letter)
            current = "".join(letters)

        return complex(phase), current


def _words_anticommute(a: str, b: str):
    """Checks whether two Pauli words anticommute."""
    clashes = sum(1 for left, right in zip(a, b) if "I" not in (left, right) and left != right)
    return clashes % 2 == 1


def tableau_from_gate(g: gates.Gate):
    """
    Builds the Clifford tableau of a two-qubit gate by dense conjugation of the generators.

    Raises:
        ducharge.framework.ContractViolation: When the gate is not a unitary qubit gate.
        ducharge.framework.NonClifford: When a generator image is not a single signed Pauli string.

    Returns:
        ducharge.pauli_dynamics.CliffordTableau: The tableau.
    """
    # Require a unitary qubit gate
    if g.d != 2:
        raise framework.ContractViolation(f"Clifford tableaus need qubits, got d={g.d}")
    gates.require_unitary(g)

    images = {}
    for word in ("XI", "ZI", "IX", "IZ"):
        generator = tensor_core.pauli_string(word)
        image = tensor_core.LocalOperator(g.matrix @ generator.matrix @ g.matrix.conj().T, 2, 2)
        coeffs = tensor_core.string_coefficients(image)
        hits = list(zip(*np.nonzero(np.abs(coeffs) > 1e-10)))

        # Require a single signed Pauli string
        if len(hits) != 1:
            raise framework.NonClifford(f"gate '{g}' maps {word} to a sum of {len(hits)} Pauli strings", word)
        value = coeffs[hits[0]]
        sign = int(np.sign(value.real))
        if abs(value - sign) > 1e-10:
            raise framework.NonClifford(f"gate '{g}' maps {word} to {value:.6g} times a Pauli string", word)

        target = "".join(tensor_core.PAULI_LETTERS[index] for index in hits[0])
        residual = tensor_core.hs_norm(image - sign * tensor_core.pauli_string(target))
        if residual > 1e-10:
            raise framework.NonClifford(f"image of {word} under gate '{g}' has residual {residual:.3e}", word)
        images[word] = (sign, target)

    tableau = CliffordTableau(images, name=str(g))
    log.debug(f"built {tableau!r} with images {images}")
    return tableau


def _apply_layer(term: PauliTerm, tableau: CliffordTableau, parity: int):
    """Conjugates one term by gates on every pair (p, p+1) with p of the given parity."""
    letters = dict(term.letters)
    tail = term.left_string

    if tail is not None and tail % 2 != parity:
        # The gate on (tail-1, tail) sees a tail Z on its first site
        letters[tail - 1] = "Z"
        tail -= 1

    firsts = sorted({site if site % 2 == parity else site - 1 for site in letters})
    coeff = term.coeff
    for first in firsts:
        phase, image = tableau.lookup[(letters.get(first, "I"), letters.get(first + 1, "I"))]
        coeff *= phase
        letters[first], letters[first + 1] = image[0], image[1]

    return PauliTerm(coeff, letters, tail)


def brickwork_step(tU: CliffordTableau, tV: CliffordTableau, P: PauliSum, t: int = 1):
    """
    Applies t brickwork periods: U on pairs (2k, 2k+1), then V on pairs (2k+1, 2k+2).

    Args:
        tU (ducharge.pauli_dynamics.CliffordTableau): The tableau of the even-bond gate.
        tV (ducharge.pauli_dynamics.CliffordTableau): The tableau of the odd-bond gate.
        P (ducharge.pauli_dynamics.PauliSum): The sum to evolve.
        t (int): The number of periods.

    Raises:
        ducharge.framework.ContractViolation: When a term has a tail and a tableau is not Z-string stable.

    Returns:
        ducharge.pauli_dynamics.PauliSum: The evolved sum, with as many terms as `P`.
    """
    # Require tails to survive both layers
    if P.has_tail() and not (tU.z_string_stable and tV.z_string_stable):
        raise framework.ContractViolation("semi-infinite tails need tableaus that map Z x Z to Z x Z")

    # Require a non-negative number of steps
    if isinstance(t, bool) or not isinstance(t, int) or t < 0:
        raise framework.ContractViolation(f"'t' must be a non-negative integer, got {t}")

    terms = list(P)
    for _ in range(t):
        terms = [_apply_layer(_apply_layer(term, tU, 0), tV, 1) for term in terms]

    return PauliSum(terms)


def sigma_minus(site: int):
    """Returns (X - iY)/2 on `site`."""
    return PauliSum([PauliTerm(0.5, {site: "X"}), PauliTerm(-0.5j, {site: "Y"})])


def jw_fermion(j: int, mode: str = SEMI_INFINITE):
    """
    Builds the Jordan-Wigner fermion f_j = [Z ... Z] sigma-minus_j.

    Args:
        j (int): The site.
        mode (str): 'semi_infinite' for a tail of Z on every site < j, 'finite_from_0' for explicit Z on sites 0..j-1.

    Raises:
        ducharge.framework.ContractViolation: When the mode is unknown, or j < 0 in 'finite_from_0' mode.
    """
    if mode == SEMI_INFINITE:
        return PauliSum([PauliTerm(0.5, {j: "X"}, j), PauliTerm(-0.5j, {j: "Y"}, j)])

    # Require a known mode and a string that starts at site 0
    if mode != FINITE_FROM_0:
        raise framework.ContractViolation(f"unknown fermion mode '{mode}'")
    if j < 0:
        raise framework.ContractViolation(f"finite strings need j >= 0, got {j}")

    string = {site: "Z" for site in range(j)}
    return PauliSum([PauliTerm(0.5, {**string, j: "X"}), PauliTerm(-0.5j, {**string, j: "Y"})])


def fermion_pair(j: int, l: int, mode: str = SEMI_INFINITE):
    """
    Builds F_(j,l) = f_j f_(j+l+1) = sigma-minus Z^l sigma-minus on sites j..j+l+1. Odd l gives a soliton.

    Raises:
        ducharge.framework.ContractViolation: When l is negative.
    """
    # Require a non-negative gap
    if l < 0:
        raise framework.ContractViolation(f"fermion gap must be non-negative, got {l}")
    return multiply(jw_fermion(j, mode), jw_fermion(j + l + 1, mode))


def fermion_number_pair(j: int):
    """Returns f_j^dagger f_j, which equals (1 + Z_j)/2."""
    fermion = jw_fermion(j, SEMI_INFINITE)
    return multiply(fermion.dagger(), fermion)


def to_local_operator(P: PauliSum, chain_len: int):
    """
    Renders a finite sum densely on sites 0..chain_len-1.

    Raises:
        ducharge.framework.ContractViolation: When a term has a tail or a letter outside the sites.
    """
    size = 2 ** chain_len
    matrix = np.zeros((size, size), dtype=complex)
    for term in P:
        # Require finite terms on the rendered sites
        if term.left_string is not None:
            raise framework.ContractViolation("cannot render a semi-infinite tail densely")
        if any(not 0 <= site < chain_len for site in term.letters):
            raise framework.ContractViolation(f"term {term!r} leaves sites 0..{chain_len - 1}")

        word = "".join(term.letter_at(site) for site in range(chain_len))
        matrix += term.coeff * tensor_core.pauli_string(word).matrix

    return tensor_core.LocalOperator(matrix, 2, chain_len)


def pauli_sum_to_text(P: PauliSum):
    """Writes one term per line: 're im site:letter ... [tail:s]'. Floats are written in exact round-trip form."""
    lines = []
    for term in P:
        fields = [repr(term.coeff.real), repr(term.coeff.imag)]
        fields += [f"{site}:{letter}" for site, letter in term.letters.items()]
        if term.left_string is not None:
            fields.append(f"tail:{term.left_string}")
        lines.append(" ".join(fields))
    return "\n".join(lines) + ("\n" if lines else "")


def pauli_sum_from_text(text: str):
    """
    Parses the `pauli_sum_to_text()` format. Blank lines and lines starting with '#' are skipped.

    Raises:
        ducharge.framework.ParseError: When a line is malformed.
    """
    terms = []
    for number, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields or fields[0].startswith("#"):
            continue

        try:
            coeff = complex(float(fields[0]), float(fields[1]))
        except (ValueError, IndexError) as exc:
            raise framework.ParseError(f"line {number}: expected 're im' coefficient") from exc

        letters = {}
        tail = None
        for field in fields[2:]:
            letter_match = _TERM_TEXT.match(field)
            tail_match = _TAIL_TEXT.match(field)
            if letter_match:
                site = int(letter_match.group(1))
                # Require one letter per site
                if site in letters:
                    raise framework.ParseError(f"line {number}: site {site} appears twice")
                letters[site] = letter_match.group(2)
            elif tail_match and tail is None:
                tail = int(tail_match.group(1))
            else:
                raise framework.ParseError(f"line {number}: cannot parse '{field}'")

        try:
            terms.append(PauliTerm(coeff, letters, tail))
        except framework.ContractViolation as exc:
            raise framework.ParseError(f"line {number}: {exc}") from exc

    return PauliSum(terms)
