"""Module that contains the core framework for ducharge: errors, logging, run configuration and plugin bases."""

import logging
import os
import pathlib

# Name of the environment variable that overrides every resource cap.
MAX_DIM_ENV = "DUCHARGE_MAX_DIM"


class Error(BaseException):
    """Creates the `Error` object used by ducharge. Every library error derives from this class."""
    def __init__(self, message: str):
        super().__init__(message)


class ContractViolation(Error):
    """Raised when an operation is called outside its preconditions (shapes, parities, widths)."""


class ResourceError(Error):
    """Raised when a requested dense object would exceed a configured dimension cap."""


class ParseError(Error):
    """Raised when a gate, charge, Pauli-sum or configuration input is malformed."""


class NonClifford(Error):
    """Raised when a gate does not map a Pauli generator to a single signed Pauli string."""
    def __init__(self, message: str, generator: str = ""):
        super().__init__(message)
        self.generator = generator


class NumericError(Error):
    """Raised when a dense eigensolver or decomposition fails. Carries a diagnostic dictionary."""
    def __init__(self, message: str, diagnostics: (dict, None) = None):
        super().__init__(message)
        self.diagnostics = diagnostics if diagnostics else {}


class InconclusiveError(NumericError):
    """Raised when a nullspace has no clean singular value gap at the configured threshold."""


class PhaseIncompatible(Error):
    """Raised when a soliton phase is not an L-th root of unity, so no translation invariant charge exists."""
    def __init__(self, message: str, lam: complex, L: int):
        super().__init__(message)
        self.lam = lam
        self.L = L


class TheoremViolation(Error):
    """Raised when a conserved charge does not decompose into soliton charges within tolerance."""
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


def setup_logging(level: int = logging.NOTSET, handler=None, **kwargs):
    """
    Sets up the package logger used by every ducharge module.

    Args:
        level (int): Sets the logging level the Logger will start logging at. See
            https://docs.python.org/3/library/logging.html#logging-levels
        handler (logging.Handler): Sets the logging handler to use. You can pass in a custom Handler like a
            logging.FileHandler to log to a file. If no handler is specified, the default handler
            logging.StreamHandler is assumed which will only print logs to the console.
        **log_format (str): Sets the format of log messages. See
            https://docs.python.org/3/library/logging.html#logging.Formatter.format
        **log_date_format (str): Sets the format of datetime strings in log messages. See
            https://docs.python.org/3/library/logging.html#logging.Formatter.formatTime

    Returns:
        logging.Logger: The configured package logger.
    """
    # Set formatting
    log_format = kwargs.get("log_format", "[%(asctime)s][%(levelname)s]:%(message)s")
    log_date_format = kwargs.get("log_date_format", "%b %d %Y %H:%M:%S")

    # Set handler
    handler = handler if handler else logging.StreamHandler()
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(fmt=log_format, datefmt=log_date_format))

    # Replace any handler installed by an earlier call
    log = logging.getLogger("ducharge")
    for old_handler in list(log.handlers):
        log.removeHandler(old_handler)
    log.setLevel(level)
    log.addHandler(handler)

    return log


class RunConfig:
    """
    Creates a `RunConfig` object holding the tolerances, seeds and resource caps shared by all analyses.

    Attributes:
        tol (float): The residual tolerance used to decide checked statements. Must lie in (0, 1e-3].
        seed (int): The unsigned integer seed for every random draw.
        max_chain_dim (int): The largest Hilbert space dimension d^{2L} a dense chain operator may have.
        max_superop_dim (int): The largest operator-space dimension d^{2w} a dense superoperator may act on.
        out_dir (pathlib.Path): The directory reports are written to.
        workers (int): The number of worker processes batch scans may use.
        log_level (int): The logging level the CLI configures.
        L (int): The default half chain length.
        w_max (int): The default largest charge density width.
    """
    # Private attributes are not for public consumption.
    # pylint: disable=too-many-instance-attributes,invalid-name

    # Initialize attributes.
    _tol = None
    _seed = None
    _max_chain_dim = None
    _max_superop_dim = None
    _out_dir = None
    _workers = None
    _log_level = None
    _L = None
    _w_max = None

    def __init__(self, **kwargs):
        """
        Initializes the `RunConfig` from keyword arguments, falling back to defaults.

        Args:
            **tol (float): Residual tolerance. Defaults to 1e-9.
            **seed (int): Random seed. Defaults to 0.
            **max_chain_dim (int): Dense chain dimension cap. Defaults to 4096.
            **max_superop_dim (int): Dense superoperator cap. Defaults to 4096.
            **out_dir (str): Output directory. Defaults to the working directory.
            **workers (int): Worker processes for scans. Defaults to 1.
            **log_level (str, int): Logging level name or number. Defaults to WARNING.
            **L (int): Half chain length. Defaults to 4.
            **w_max (int): Largest density width. Defaults to 3.
        """
        self.tol = kwargs.get("tol", 1e-9)
        self.seed = kwargs.get("seed", 0)
        self.max_chain_dim = kwargs.get("max_chain_dim", 4096)
        self.max_superop_dim = kwargs.get("max_superop_dim", 4096)
        self.out_dir = kwargs.get("out_dir", ".")
        self.workers = kwargs.get("workers", 1)
        self.log_level = kwargs.get("log_level", logging.WARNING)
        self.L = kwargs.get("L", 4)
        self.w_max = kwargs.get("w_max", 3)
        self.apply_environment()

    def apply_environment(self):
        """
        Applies the `DUCHARGE_MAX_DIM` environment variable, when present, to both resource caps.

        Raises:
            ducharge.framework.Error: When the environment variable is not a positive integer.
        """
        value = os.environ.get(MAX_DIM_ENV)
        if value is None:
            return

        # Require the override to be a positive integer
        try:
            cap = int(value)
        except ValueError as exc:
            raise Error(f"'{MAX_DIM_ENV}' must be a positive integer, got '{value}'") from exc

        self.max_chain_dim = cap
        self.max_superop_dim = cap

    def check_chain_dim(self, d: int, n_sites: int):
        """
        Ensures a dense operator on `n_sites` qudits fits under `max_chain_dim`.

        Raises:
            ducharge.framework.ResourceError: When d^n_sites exceeds the cap.
        """
        if d ** n_sites > self.max_chain_dim:
            raise ResourceError(
                f"chain dimension {d}^{n_sites} = {d ** n_sites} exceeds cap {self.max_chain_dim}"
            )

    def check_superop_dim(self, d: int, w: int):
        """
        Ensures a dense superoperator on width `w` operators fits under `max_superop_dim`.

        Raises:
            ducharge.framework.ResourceError: When d^(2w) exceeds the cap.
        """
        if d ** (2 * w) > self.max_superop_dim:
            raise ResourceError(
                f"superoperator dimension {d}^{2 * w} = {d ** (2 * w)} exceeds cap {self.max_superop_dim}"
            )

    def check_dense_entries(self, entries: int, label: str):
        """
        Ensures a dense working array fits in the memory of the largest allowed superoperator, max_superop_dim^2
        entries.

        Args:
            entries (int): The number of complex entries the array would hold.
            label (str): What the array holds, used in the error message.

        Raises:
            ducharge.framework.ResourceError: When entries exceeds max_superop_dim^2.
        """
        if entries > self.max_superop_dim ** 2:
            raise ResourceError(
                f"{label} needs {entries} dense entries, exceeding cap {self.max_superop_dim}^2 = "
                f"{self.max_superop_dim ** 2}"
            )

    def to_dict(self):
        """Returns a plain dictionary of this configuration, suitable for reports."""
        return {
            "tol": self.tol,
            "seed": self.seed,
            "max_chain_dim": self.max_chain_dim,
            "max_superop_dim": self.max_superop_dim,
            "out_dir": str(self.out_dir),
            "workers": self.workers,
            "log_level": logging.getLevelName(self.log_level),
            "L": self.L,
            "w_max": self.w_max
        }

    # Getters and setters
    @property
    def tol(self):
        """The property to get and/or set the tol attribute."""
        return self._tol

    @tol.setter
    def tol(self, value: float):
        """Sets the tol attribute after validating the new value."""
        # Require tol to be a real number
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise Error("'tol' must be type 'float'")

        # Require tol to be a usable tolerance
        if not 0 < value <= 1e-3:
            raise Error("'tol' must be within (0, 1e-3]")

        self._tol = float(value)

    @property
    def seed(self):
        """The property to get and/or set the seed attribute."""
        return self._seed

    @seed.setter
    def seed(self, value: int):
        """Sets the seed attribute after validating the new value."""
        # Require seed to be an unsigned integer
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            raise Error("'seed' must be an unsigned integer")

        self._seed = value

    @property
    def max_chain_dim(self):
        """The property to get and/or set the max_chain_dim attribute."""
        return self._max_chain_dim

    @max_chain_dim.setter
    def max_chain_dim(self, value: int):
        """Sets the max_chain_dim attribute after validating the new value."""
        # Require caps to be positive integers
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise Error("'max_chain_dim' must be a positive integer")

        self._max_chain_dim = value

    @property
    def max_superop_dim(self):
        """The property to get and/or set the max_superop_dim attribute."""
        return self._max_superop_dim

    @max_superop_dim.setter
    def max_superop_dim(self, value: int):
        """Sets the max_superop_dim attribute after validating the new value."""
        # Require caps to be positive integers
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise Error("'max_superop_dim' must be a positive integer")

        self._max_superop_dim = value

    @property
    def out_dir(self):
        """The property to get and/or set the out_dir attribute."""
        return self._out_dir

    @out_dir.setter
    def out_dir(self, value: (str, pathlib.Path)):
        """Sets the out_dir attribute after validating the new value."""
        # Require out_dir to be a path-like string
        if not isinstance(value, (str, pathlib.Path)):
            raise Error("'out_dir' must be type 'str'")

        self._out_dir = pathlib.Path(value)

    @property
    def workers(self):
        """The property to get and/or set the workers attribute."""
        return self._workers

    @workers.setter
    def workers(self, value: int):
        """Sets the workers attribute after validating the new value."""
        # Require at least one worker
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise Error("'workers' must be a positive integer")

        self._workers = value

    @property
    def log_level(self):
        """The property to get and/or set the log_level attribute."""
        return self._log_level

    @log_level.setter
    def log_level(self, value: (str, int)):
        """Sets the log_level attribute after validating the new value."""
        # Allow level names like 'DEBUG'
        if isinstance(value, str):
            level = logging.getLevelName(value.upper())
            if not isinstance(level, int):
                raise Error(f"'log_level' '{value}' is not a known logging level")
            value = level

        # Require the level to be a logging integer
        if isinstance(value, bool) or not isinstance(value, int):
            raise Error("'log_level' must be type 'str' or 'int'")

        self._log_level = value

    @property
    def L(self):
        """The property to get and/or set the L attribute."""
        return self._L

    @L.setter
    def L(self, value: int):
        """Sets the L attribute after validating the new value."""
        # Require a chain of at least four sites
        if isinstance(value, bool) or not isinstance(value, int) or value < 2:
            raise Error("'L' must be an integer of at least 2")

        self._L = value

    @property
    def w_max(self):
        """The property to get and/or set the w_max attribute."""
        return self._w_max

    @w_max.setter
    def w_max(self, value: int):
        """Sets the w_max attribute after validating the new value."""
        # Require a positive width
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise Error("'w_max' must be a positive integer")

        self._w_max = value


class BaseFactory:
    """
    Creates a `BaseFactory` object that builds a named two-qudit gate from a configuration dictionary.

    Attributes:
        name (str): The name of the object. This is the name gates built by this factory are referenced by.
        log (logging.Logger): The Logger object to use when logging events that occur while building.
        config (dict): The dict of factory configuration values, for example a phase angle or a seed.
    """
    name = ""
    _config = None

    def __init__(self, **kwargs):
        """
        Initialize the object with required attributes.

        Notes:
            Any arguments passed in when this object is created will be stored in the 'config' attribute of the object.
        """
        self.config = kwargs
        self.log = logging.getLogger(__name__)

    def __str__(self):
        """Sets this object's name attribute as its string representation."""
        return self.name

    def run(self):
        """
        Runs the current factory object. This method calls the `pre_build()` and `build()` methods respectively and
        checks for any errors encountered.

        Raises:
            ducharge.framework.Error: When the `pre_build()` or `build()` method raises a ducharge error.

        Returns:
            ducharge.gates.Gate: The gate built by this factory.
        """
        # Try to run pre-build checks and log errors.
        try:
            self.pre_build()
        except Error as pre_build_err:
            self.log.error(f"pre-build checks for factory '{self}' failed ({pre_build_err})")
            raise pre_build_err

        # Try to build and log errors
        try:
            gate = self.build()
        except Error as build_err:
            self.log.error(f"build for factory '{self}' failed ({build_err})")
            raise build_err

        self.log.debug(f"factory '{self}' built a d={gate.d} gate")
        return gate

    def build(self):
        """
        Initializes the `build()` method that returns the gate. This method is intended to be overwritten by a child
        class. If this method is not overwritten by the child class, an error is raised.

        Raises:
            ducharge.framework.Error: When the `build()` method has not been overwritten by a child class.
        """
        raise Error(f"method has not been overwritten by child class of factory '{self}'")

    def pre_build(self):
        """
        Initializes the `pre_build()` method that validates the `config` attribute before `build()` is called. This
        method is intended to be overwritten by a child class. Raise a `ducharge.framework.Error` to mark the checks as
        a failure.
        """

    def get_float(self, key: str, default: float):
        """Reads a real-valued option from `config`, raising `Error` for non-numeric values."""
        value = self.config.get(key, default)

        # Require numeric options to be real numbers
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise Error(f"factory '{self}' option '{key}' must be type 'float'")

        return float(value)

    # Getters and setters
    @property
    def config(self):
        """The property to get and/or set the config attribute."""
        return self._config

    @config.setter
    def config(self, value: dict):
        """Sets the config attribute after validating the new value."""
        # Ensure config is a dict
        if not isinstance(value, dict):
            raise Error("'config' must be type 'dict'")

        self._config = value
