"""Creates the built-in 'cz' factory. CZ is unitary but not dual-unitary, which makes it a useful negative control."""
from ducharge import framework
from ducharge import gates


class Factory(framework.BaseFactory):
    """Defines a factory for the controlled-Z gate."""
    name = "cz"

    def build(self):
        """Overwrites the build() method to return the CZ gate."""
        return gates.cz()
