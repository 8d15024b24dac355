"""
Creates the built-in 'phased_swap' factory. The gate moves sigma-minus by one site per layer while multiplying it by
e^{i theta}, so its solitons carry a tunable phase.
"""
from ducharge import framework
from ducharge import gates


class Factory(framework.BaseFactory):
    """Defines a factory for SWAP (u x u) with u = diag(1, e^{i theta}). Option 'theta' defaults to 1.0."""
    name = "phased_swap"

    def build(self):
        """Overwrites the build() method to return the phased SWAP gate."""
        return gates.phased_swap(self.get_float("theta", 1.0))

    def pre_build(self):
        """Overwrites the pre_build() method to ensure 'theta' is a real number."""
        self.get_float("theta", 1.0)
