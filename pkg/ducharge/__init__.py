"""
.. include:: ../docs/DOCUMENTATION.md
"""
from . import framework
from . import tensor_core
from . import gates
from . import lightcone_maps
from . import chain
from . import charges
from . import pauli_dynamics
from . import factories
from . import tools
from . import cli

# Set the version of this package
__version__ = "0.1.0"

# Don't include tests module in generated documentation.
__pdoc__ = {"tests": False}
