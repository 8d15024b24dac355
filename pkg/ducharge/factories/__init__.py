"""Module that groups the built-in gate factories for ducharge to use."""
from . import cz
from . import dual_unitary
from . import file
from . import fswap
from . import identity
from . import phased_swap
from . import swap
