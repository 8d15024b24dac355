"""Creates the built-in 'fswap' factory that builds the fermionic SWAP gate."""
from ducharge import framework
from ducharge import gates


class Factory(framework.BaseFactory):
    """Defines a factory for the fermionic SWAP, a Clifford dual-unitary gate. It takes no options."""
    name = "fswap"

    def build(self):
        """Overwrites the build() method to return the FSWAP gate."""
        return gates.fswap()
