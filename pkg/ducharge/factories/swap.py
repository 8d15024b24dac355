"""Creates the built-in 'swap' factory that builds the qudit SWAP gate."""
from ducharge import framework
from ducharge import gates


class Factory(framework.BaseFactory):
    """Defines a factory for the SWAP gate on two qudits of dimension `d` (default 2)."""
    name = "swap"

    def build(self):
        """Overwrites the build() method to return the SWAP gate."""
        return gates.swap(self.config.get("d", 2))

    def pre_build(self):
        """Overwrites the pre_build() method to validate the qudit dimension."""
        # Require 'd' to be an integer of at least 2
        d = self.config.get("d", 2)
        if isinstance(d, bool) or not isinstance(d, int) or d < 2:
            raise framework.Error(f"factory '{self}' config value 'd' must be an integer >= 2")
