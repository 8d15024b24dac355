"""Creates the built-in 'file' factory that reads a gate from a gate JSON file."""
import pathlib

from ducharge import framework
from ducharge import gates


class Factory(framework.BaseFactory):
    """Defines a factory that loads the gate stored at config value 'path'."""
    name = "file"

    def build(self):
        """Overwrites the build() method to read the gate file."""
        return gates.read_gate(self.config["path"])

    def pre_build(self):
        """Overwrites the pre_build() method to ensure 'path' names an existing file."""
        # Require a 'path' value to be specified
        if "path" not in self.config:
            raise framework.Error(f"factory '{self}' requires config value 'path'")

        # Ensure 'path' is a str
        if not isinstance(self.config.get("path"), str):
            raise framework.Error(f"factory '{self}' config value 'path' must be type 'str'")

        # Require 'path' to exist
        if not pathlib.Path(self.config["path"]).is_file():
            raise framework.ParseError(f"factory '{self}' gate file '{self.config['path']}' does not exist")
