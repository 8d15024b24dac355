"""Creates the built-in 'dual_unitary' factory that samples seeded random two-qubit dual-unitary gates."""
from ducharge import framework
from ducharge import gates


class Factory(framework.BaseFactory):
    """
    Defines a factory for (u1 x u2) exp[i(pi/4 XX + pi/4 YY + J ZZ)] (u3 x u4) with Haar-random single-qubit gates.

    Options:
        seed (int): The seed of the draw. Defaults to 0.
        J (float): The ZZ coupling. Drawn uniformly from [0, pi/2) when omitted.
    """
    name = "dual_unitary"

    def build(self):
        """Overwrites the build() method to sample the gate."""
        coupling = self.get_float("J", 0.0) if "J" in self.config else None
        return gates.random_dual_unitary_qubit(seed=self.config.get("seed", 0), J=coupling)

    def pre_build(self):
        """Overwrites the pre_build() method to validate 'seed' and 'J'."""
        # Require 'seed' to be an unsigned integer
        seed = self.config.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise framework.Error(f"factory '{self}' config value 'seed' must be an unsigned integer")

        # Only check 'J' when it is specified, otherwise it is drawn with the gate
        if "J" in self.config:
            self.get_float("J", 0.0)
