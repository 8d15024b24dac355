"""
Module that holds the many-body constructions on the periodic 2L-site chain: translations, the Floquet operator,
Heisenberg evolution, support and parity classification, and the parity-class transition digraph.

Sites 0..2L-1 sit on a ring. One Floquet period applies U to the pairs (2k, 2k+1), then V to the pairs (2k+1, 2k+2)
with V's first qudit on the odd site. Even-site content of a SWAP circuit therefore moves right and odd-site content
moves left.
"""

import itertools
import logging

import numpy as np

from . import framework
from . import gates
from . import tensor_core

log = logging.getLogger(__name__)

# Strings with smaller coefficients do not count towards supports.
SUPPORT_CUTOFF = 1e-10

# Norm of the forbidden part of a transition that still counts as clean.
FORBIDDEN_TOL = 1e-9

# Class assigned to operators outside a single parity class.
MIXED = "mixed/other"

# Site flags reported by support_profile().
IDENTITY_ONLY = "identity"
MIXED_SITE = "mixed"
STRICT = "strict"

# Non-identity masks a dual-unitary gate can produce from each input mask of its pair.
GATE_MASK_RULES = {
    (False, False): ((False, False),),
    (True, False): ((False, True), (True, True)),
    (False, True): ((True, False), (True, True)),
    (True, True): ((False, True), (True, False), (True, True))
}


def parity_class(x: int, w: int):
    """Returns the parity class name B_ee, B_eo, B_oe or B_oo for start site x and width w."""
    return "B_" + ("e" if x % 2 == 0 else "o") + ("e" if w % 2 == 0 else "o")


def translation_op(l: int, d: int = 2):
    """
    Builds the one-site periodic translation with P|i_1 i_2 ... i_l> = |i_2 ... i_l i_1>.

    Conjugation moves content at site k to site k-1, so P (a at site 1) P^dagger is a at site 0.

    Raises:
        ducharge.framework.ContractViolation: When l is smaller than 2.

    Returns:
        numpy.ndarray: The d^l x d^l permutation matrix.
    """
    # Require a ring of at least two sites
    if isinstance(l, bool) or not isinstance(l, (int, np.integer)) or l < 2:
        raise framework.ContractViolation(f"translation needs at least 2 sites, got {l}")

    size = d ** l
    digits = np.array(np.unravel_index(np.arange(size), (d,) * l))
    targets = np.ravel_multi_index(tuple(np.roll(digits, -1, axis=0)), (d,) * l)
    matrix = np.zeros((size, size))
    matrix[targets, np.arange(size)] = 1
    return matrix


class FloquetOperator:
    """
    Creates a `FloquetOperator`: one period P V^{xL} P^{-1} U^{xL} of the brickwork circuit on 2L sites.

    The dense matrix is built on first access, so local analyses can share the gates without paying for it.

    Attributes:
        U (ducharge.gates.Gate): The even-bond gate.
        V (ducharge.gates.Gate): The odd-bond gate.
        L (int): The half chain length.
        d (int): The qudit dimension.
        chain_len (int): The number of sites 2L.
        matrix (numpy.ndarray): The d^(2L) x d^(2L) period unitary.
    """
    # pylint: disable=invalid-name
    _matrix = None

    def __init__(self, U: gates.Gate, V: gates.Gate, L: int, config: (framework.RunConfig, None) = None):
        """
        Initializes the `FloquetOperator` after validating the gates and the chain size.

        Raises:
            ducharge.framework.ContractViolation: When the gates are not unitary, differ in d, or L < 2.
            ducharge.framework.ResourceError: When d^(2L) exceeds the chain cap.
        """
        config = config if config else framework.RunConfig()

        # Require matching unitary gates
        gates.require_unitary(U)
        gates.require_unitary(V)
        if U.d != V.d:
            raise framework.ContractViolation(f"gates act on different qudits (d={U.d} and d={V.d})")

        # Require at least four sites
        if isinstance(L, bool) or not isinstance(L, (int, np.integer)) or L < 2:
            raise framework.ContractViolation(f"'L' must be an integer of at least 2, got {L}")

        config.check_chain_dim(U.d, 2 * L)
        self.U = U
        self.V = V
        self.L = int(L)

    def __repr__(self):
        return f"FloquetOperator(U='{self.U}', V='{self.V}', L={self.L})"

    @property
    def d(self):
        """The qudit dimension."""
        return self.U.d

    @property
    def chain_len(self):
        """The number of sites 2L."""
        return 2 * self.L

    @property
    def matrix(self):
        """The dense period unitary, built on first access."""
        if self._matrix is None:
            u_layer = np.ones((1, 1), dtype=complex)
            v_layer = np.ones((1, 1), dtype=complex)
            for _ in range(self.L):
                u_layer = np.kron(u_layer, self.U.matrix)
                v_layer = np.kron(v_layer, self.V.matrix)

            shift = translation_op(self.chain_len, self.d)
            matrix = shift @ v_layer @ shift.T @ u_layer
            matrix.setflags(write=False)
            self._matrix = matrix
            log.debug(f"built dense {self!r} of dimension {matrix.shape[0]}")

        return self._matrix

    def unitarity_residual(self):
        """Returns max |F F^dagger - 1| over entries."""
        return float(np.max(np.abs(self.matrix @ self.matrix.conj().T - np.eye(self.matrix.shape[0]))))

    def translation_residual(self):
        """Returns max |P^2 F P^-2 - F| over entries, zero for a two-site translation invariant circuit."""
        shift = translation_op(self.chain_len, self.d)
        shift2 = shift @ shift
        return float(np.max(np.abs(shift2 @ self.matrix @ shift2.T - self.matrix)))


def floquet(U: gates.Gate, V: gates.Gate, L: int, config: (framework.RunConfig, None) = None):
    """
    Builds the Floquet operator of the (U, V) brickwork circuit on 2L sites.

    Raises:
        ducharge.framework.ContractViolation: When the gates are not unitary or differ in d.
        ducharge.framework.ResourceError: When d^(2L) exceeds the configured cap.
    """
    return FloquetOperator(U, V, L, config)


def _as_chain_operator(F: FloquetOperator, op, config: (framework.RunConfig, None) = None):
    """Returns the dense chain operator of an `EmbeddedOperator` or a full-width `LocalOperator`."""
    if isinstance(op, tensor_core.EmbeddedOperator):
        # Require the operator to live on this chain
        if op.chain_len != F.chain_len:
            raise framework.ContractViolation(f"operator chain {op.chain_len} does not match {F.chain_len} sites")
        return tensor_core.materialize(op, config)

    if isinstance(op, tensor_core.LocalOperator) and op.w == F.chain_len and op.d == F.d:
        return op

    raise framework.ContractViolation("operator must be an 'EmbeddedOperator' or a full-chain 'LocalOperator'")


def heisenberg(F: FloquetOperator, op, t: int = 1, config: (framework.RunConfig, None) = None):
    """
    Evolves an operator for t periods in the Heisenberg picture: F^t op (F^dagger)^t.

    Args:
        F (ducharge.chain.FloquetOperator): The period unitary.
        op (ducharge.tensor_core.EmbeddedOperator, ducharge.tensor_core.LocalOperator): The operator, embedded or
            already full width.
        t (int): The number of periods, at least zero.
        config (ducharge.framework.RunConfig, None): The configuration whose chain cap applies.

    Raises:
        ducharge.framework.ContractViolation: When t is negative or the operator does not match the chain.

    Returns:
        ducharge.tensor_core.LocalOperator: The width-2L evolved operator.
    """
    # Require a non-negative number of steps
    if isinstance(t, bool) or not isinstance(t, (int, np.integer)) or t < 0:
        raise framework.ContractViolation(f"'t' must be a non-negative integer, got {t}")

    matrix = _as_chain_operator(F, op, config).matrix
    unitary = F.matrix
    for _ in range(t):
        matrix = unitary @ matrix @ unitary.conj().T

    return tensor_core.LocalOperator(matrix, F.d, F.chain_len)


def window_step(ops, U: gates.Gate, V: gates.Gate, start: int, n_sites: int):
    """Applies one period to a batch of window operators whose first site is chain site `start`."""
    ops = gates.conjugate_layer(ops, U, range(start % 2, n_sites - 1, 2), n_sites)
    return gates.conjugate_layer(ops, V, range(1 - start % 2, n_sites - 1, 2), n_sites)


def pad_window(op: tensor_core.LocalOperator):
    """Returns `op` with two identity sites added on each side, the window one period can reach."""
    pad = np.eye(op.d ** 2)
    return tensor_core.LocalOperator(np.kron(np.kron(pad, op.matrix), pad), op.d, op.w + 4)


def light_cone_step(U: gates.Gate, V: gates.Gate, op: tensor_core.LocalOperator, x: int, chain_len: int):
    """
    Applies one period to an operator on sites x..x+w-1 without building chain matrices.

    Only gates inside the window [x-2, x+w+1] are applied; the ones straddling its edges act on identity sites.

    Args:
        U (ducharge.gates.Gate): The even-bond gate.
        V (ducharge.gates.Gate): The odd-bond gate.
        op (ducharge.tensor_core.LocalOperator): The operator on its own support.
        x (int): The start site on the ring.
        chain_len (int): The ring size 2L.

    Raises:
        ducharge.framework.ContractViolation: When the window would wrap onto itself (w + 4 > chain_len).

    Returns:
        tuple: (start, window) where `window` is the width w+4 image and `start` = x-2 mod chain_len.
    """
    # Require the light cone to fit on the ring
    if op.w + 4 > chain_len:
        raise framework.ContractViolation(f"width {op.w} light cone does not fit a chain of {chain_len} sites")

    start = (x - 2) % chain_len
    window = pad_window(op)
    evolved = window_step(window.matrix[np.newaxis], U, V, start, window.w)[0]
    return start, tensor_core.LocalOperator(evolved, op.d, window.w)


class SupportProfile:
    """
    Creates a `SupportProfile`: where a chain operator acts non-trivially and which parity class it lies in.

    Attributes:
        x (int, None): The start of the minimal covering interval, `None` for multiples of the identity.
        w (int): The width of the interval, 0 for multiples of the identity.
        flags (list): Per chain site, one of 'identity', 'mixed' or 'strict'.
        parity_class (str, None): B_ee, B_eo, B_oe, B_oo, 'mixed/other', or `None` for multiples of the identity.
        diagnostic (str): Why the class is 'mixed/other', empty otherwise.
    """
    def __init__(self, x, w, flags, parity, diagnostic=""):
        self.x = x
        self.w = w
        self.flags = list(flags)
        self.parity_class = parity
        self.diagnostic = diagnostic

    def __repr__(self):
        return f"SupportProfile(x={self.x}, w={self.w}, parity_class='{self.parity_class}')"

    def to_dict(self):
        """Returns the JSON-ready form."""
        return {
            "x": self.x, "w": self.w, "flags": self.flags, "class": self.parity_class, "diagnostic": self.diagnostic
        }


def _string_class(key, chain_len: int):
    """Returns (x, w, class) of one chain string given as a ring letter tuple."""
    interval = tensor_core.cyclic_interval([site for site, index in enumerate(key) if index], chain_len)
    if interval is None:
        return None, 0, None

    x, w, ambiguous = interval
    if ambiguous or w > chain_len // 2:
        return x, w, MIXED
    return x, w, parity_class(x, w)


def support_profile(op: tensor_core.LocalOperator):
    """
    Classifies a full-chain operator by the strings with coefficient above `SUPPORT_CUTOFF`.

    A parity class is assigned only when every contributing string lies in the same class with width at most L. Ties
    between minimal covering intervals are reported as 'mixed/other' with a diagnostic.
    """
    chain_len = op.w
    terms = tensor_core.chain_string_terms(op, 0, chain_len, cutoff=SUPPORT_CUTOFF)
    keys = [key for key in terms if any(key)]

    flags = []
    for site in range(chain_len):
        letters = {bool(key[site]) for key in keys}
        flags.append(STRICT if letters == {True} else MIXED_SITE if letters == {True, False} else IDENTITY_ONLY)

    if not keys:
        return SupportProfile(None, 0, flags, None)

    x, w, ambiguous = tensor_core.cyclic_interval(
        [site for site in range(chain_len) if flags[site] != IDENTITY_ONLY], chain_len
    )
    classes = {_string_class(key, chain_len)[2] for key in keys}
    if ambiguous:
        return SupportProfile(x, w, flags, MIXED, "minimal covering interval is not unique")
    if len(classes) > 1:
        return SupportProfile(x, w, flags, MIXED, f"strings span classes {sorted(classes)}")
    if MIXED in classes:
        diagnostic = f"a string is wider than L={chain_len // 2} or has no unique interval"
        return SupportProfile(x, w, flags, MIXED, diagnostic)

    return SupportProfile(x, w, flags, classes.pop())


def class_content(terms: dict, chain_len: int):
    """
    Splits the weight of a chain operator over parity classes and widths.

    Args:
        terms (dict): Chain strings as returned by `tensor_core.chain_string_terms()`.
        chain_len (int): The ring size.

    Returns:
        dict: {"classes": {class: relative norm}, "widths": {w: relative norm}}. The identity string is reported under
            class 'identity' and width 0.
    """
    weights = {}
    widths = {}
    total = 0.0
    for key, coeff in terms.items():
        _, w, name = _string_class(key, chain_len)
        weight = abs(coeff) ** 2
        total += weight
        name = name if name else "identity"
        weights[name] = weights.get(name, 0.0) + weight
        widths[w] = widths.get(w, 0.0) + weight

    scale = total if total > 0 else 1.0
    return {
        "classes": {name: float(np.sqrt(weight / scale)) for name, weight in sorted(weights.items())},
        "widths": {w: float(np.sqrt(weight / scale)) for w, weight in sorted(widths.items())}
    }


def _propagate_masks(masks, firsts):
    """Applies `GATE_MASK_RULES` to the given pairs of every mask."""
    for first in firsts:
        propagated = set()
        for mask in masks:
            for image in GATE_MASK_RULES[(mask[first], mask[first + 1])]:
                propagated.add(mask[:first] + image + mask[first + 2:])
        masks = propagated
    return masks


def allowed_transitions(x: int, w: int, chain_len: int):
    """
    Derives every interval one period can move a width-w operator at site x into, using only dual-unitarity.

    Every string of the input is non-identity on both ends of [x, x+w-1]; its interior is free. Each gate then follows
    `GATE_MASK_RULES`: a traceless letter entering a gate next to an identity leaves its own site with an identity and
    the partner site strictly traceless, and a traceless pair never maps to the identity.

    Args:
        x (int): The start site.
        w (int): The width, at least 1.
        chain_len (int): The ring size 2L.

    Raises:
        ducharge.framework.ContractViolation: When the light cone does not fit on the ring.

    Returns:
        set: (start, width) pairs of every reachable minimal interval.
    """
    # Require the light cone to fit on the ring
    if w < 1 or w + 4 > chain_len:
        raise framework.ContractViolation(f"width {w} light cone does not fit a chain of {chain_len} sites")

    start = x - 2
    n_sites = w + 4
    inputs = set()
    for interior in itertools.product((False, True), repeat=max(w - 2, 0)):
        inner = (True,) if w == 1 else (True,) + interior + (True,)
        inputs.add((False, False) + inner + (False, False))

    masks = _propagate_masks(inputs, range(start % 2, n_sites - 1, 2))
    masks = _propagate_masks(masks, range(1 - start % 2, n_sites - 1, 2))

    targets = set()
    for mask in masks:
        covered = [p for p, flag in enumerate(mask) if flag]
        targets.add(((start + covered[0]) % chain_len, covered[-1] - covered[0] + 1))

    return targets


def digraph_edges(chain_len: int, w_values):
    """
    Collates `allowed_transitions()` into the parity-class digraph.

    Returns:
        dict: {source class: {target class: sorted widths}} over the given input widths.
    """
    edges = {}
    for w in w_values:
        for x in (0, 1):
            source = parity_class(x, w)
            targets = edges.setdefault(source, {})
            for target_x, target_w in allowed_transitions(x, w, chain_len):
                widths = targets.setdefault(parity_class(target_x, target_w), set())
                widths.add(target_w)

    return {
        source: {target: sorted(widths) for target, widths in sorted(targets.items())}
        for source, targets in sorted(edges.items())
    }


def digraph_transition_check(F: FloquetOperator, op: tensor_core.EmbeddedOperator):
    """
    Evolves one embedded operator by a period and sorts the image into interval components.

    Args:
        F (ducharge.chain.FloquetOperator): The circuit. Only its gates are used.
        op (ducharge.tensor_core.EmbeddedOperator): The input, strictly traceless at both ends of its support.

    Raises:
        ducharge.framework.ContractViolation: When the input is not in a single class or w > L - 4.

    Returns:
        dict: {"input": {class, x, w}, "components": [{interval, x, width, class, norm, allowed}],
            "forbidden_norm": float}. Norms are relative to the image norm.
    """
    inner = op.inner

    # Require one parity class and a light cone away from the wrap
    if op.chain_len != F.chain_len:
        raise framework.ContractViolation(f"operator chain {op.chain_len} does not match {F.chain_len} sites")
    if inner.w > F.L - 4:
        raise framework.ContractViolation(f"width {inner.w} exceeds L - 4 = {F.L - 4}")
    if tensor_core.boundary_defect(inner) > SUPPORT_CUTOFF:
        raise framework.ContractViolation("input must be strictly traceless at both ends to lie in one class")

    start, window = light_cone_step(F.U, F.V, inner, op.x, F.chain_len)
    allowed = allowed_transitions(op.x, inner.w, F.chain_len)
    coeffs = tensor_core.string_coefficients(window)

    weights = {}
    for indices in zip(*np.nonzero(np.abs(coeffs) > 1e-14)):
        covered = [p for p, index in enumerate(indices) if index]
        key = ((start + covered[0]) % F.chain_len, covered[-1] - covered[0] + 1) if covered else (None, 0)
        weights[key] = weights.get(key, 0.0) + abs(coeffs[indices]) ** 2

    total = sum(weights.values())
    components = []
    forbidden = 0.0
    for (x, w), weight in sorted(weights.items(), key=lambda item: (item[0][1], item[0][0] or 0)):
        is_allowed = (x, w) in allowed
        if not is_allowed:
            forbidden += weight
        components.append({
            "interval": [x, (x + w - 1) % F.chain_len] if w else [],
            "x": x,
            "width": w,
            "class": parity_class(x, w) if w else "identity",
            "norm": float(np.sqrt(weight / total)),
            "allowed": is_allowed
        })

    report = {
        "input": {"class": parity_class(op.x, inner.w), "x": op.x, "w": inner.w},
        "components": components,
        "forbidden_norm": float(np.sqrt(forbidden / total))
    }
    log.debug(f"transition of {op!r}: {len(components)} components, forbidden norm {report['forbidden_norm']:.3e}")
    return report
