"""Creates the built-in 'identity' factory."""
from ducharge import framework
from ducharge import gates


class Factory(framework.BaseFactory):
    """Defines a factory for the two-qudit identity, unitary but not dual-unitary."""
    name = "identity"

    def build(self):
        """Overwrites the build() method to return the identity gate."""
        return gates.identity_gate(self.config.get("d", 2))

    def pre_build(self):
        """Overwrites the pre_build() method to validate the qudit dimension."""
        # Require 'd' to be an integer of at least 2
        d = self.config.get("d", 2)
        if isinstance(d, bool) or not isinstance(d, int) or d < 2:
            raise framework.Error(f"factory '{self}' config value 'd' must be an integer >= 2")
