"""
Module that includes tool functions that primarily assist the CLI and unit tests, but may be useful to others.
"""

import csv
import inspect
import json
import logging
import math
import pathlib
import sys

import numpy as np
import yaml

from . import factories
from . import framework
from . import gates

log = logging.getLogger(__name__)

# Keys a configuration file may hold at its top level.
CONFIG_KEYS = ("run", "gates", "factory_path")

# Keys of the 'run' section, each a RunConfig attribute.
RUN_KEYS = ("tol", "seed", "max_chain_dim", "max_superop_dim", "out_dir", "workers", "log_level", "L", "w_max")


def get_factory_modules(path: (str, None) = None):
    """
    Gathers all available gate factory modules. This allows a 'path' to be specified to optionally pass in plugin
    factory modules. Built-in factories are always included.

    Args:
        path (str, None): A path to a directory that contains plugin factory modules. Only .py files within this
            directory will be included. Each .py file must include a class named `Factory` that extends the
            `ducharge.framework.BaseFactory` class. If `None` is specified, only the built-in factory modules will be
            available.

    Raises:
        ducharge.framework.Error: When plugin factory modules could not be loaded.

    Returns:
        dict: A dictionary of available factory modules. The dictionary keys will be the module names and the values
            will be the module itself.
    """
    # Start by gathering the built-in factories from the ducharge.factories sub-package.
    available_factories = dict(inspect.getmembers(factories, inspect.ismodule))

    # If a plugin path was passed in, include modules within that directory as well.
    if path:
        path_obj = pathlib.Path(path)

        # Require path to be an existing directory
        if not path_obj.exists() or not path_obj.is_dir():
            raise framework.Error(f"failed to load factory modules '{path}' is not an existing directory")

        sys.path.append(str(path_obj.absolute()))

        for module_path in path_obj.glob("*.py"):
            # Verify this module could be imported and contains the Factory class
            try:
                module = __import__(module_path.stem)
                getattr(module, "Factory")
            except ModuleNotFoundError as exc:
                mod_not_found_err_msg = f"failed to import factory module '{module_path.stem}' from '{path}'"
                raise framework.Error(mod_not_found_err_msg) from exc
            except AttributeError as exc:
                attr_err_msg = f"factory module '{module_path.stem}' from '{path}' has no class named 'Factory'"
                raise framework.Error(attr_err_msg) from exc

            # Ensure the module's Factory class is a subclass of BaseFactory
            if inspect.isclass(module.Factory) and issubclass(module.Factory, framework.BaseFactory):
                available_factories[module_path.stem] = module
                continue

            raise framework.Error(
                f"'Factory' class in '{module_path}' is not subclass of 'ducharge.framework.BaseFactory'"
            )

    return available_factories


def get_gates_from_dict(config: dict, path: (str, None) = None):
    """
    Converts a dictionary representation of named gates to `Gate` objects.

    Args:
        config (dict): A dictionary with a 'gates' list of {name, module, config} items.
        path (str, None): A directory of plugin factory modules, see `get_factory_modules()`.

    Raises:
        ducharge.framework.Error: When a validation error occurs, or a factory fails to build its gate.

    Returns:
        dict: The built gates keyed by their configured names, in configuration order.
    """
    valid_gates = {}
    available_factories = get_factory_modules(path)

    # Require gates config to be defined
    if "gates" not in config.keys():
        raise framework.Error("'gates' value is required")

    # Require gates config to be a list
    if not isinstance(config.get("gates"), list):
        raise framework.Error("'gates' value must be type list")

    for gate in config.get("gates"):
        # Require gate definition to be a dict
        if not isinstance(gate, dict):
            raise framework.Error("'gates' items must be type dict")

        # Require gate name to be defined
        if "name" not in gate.keys():
            raise framework.Error("'gates' items must contain 'name' value")

        # Require gate names to be unique
        if gate["name"] in valid_gates:
            raise framework.Error(f"multiple 'gates' items assigned name '{gate['name']}'")

        # Require gate module to be defined and known
        if "module" not in gate.keys():
            raise framework.Error("'gates' items must contain 'module' value")
        if gate["module"] not in available_factories:
            raise framework.Error(f"'gates' item references undefined factory module '{gate['module']}'")

        # Require factory options to be a dict
        options = gate.get("config", {})
        if not isinstance(options, dict):
            raise framework.Error("'gates' item 'config' value must be type dict")

        factory = available_factories[gate["module"]].Factory(**options)
        built = factory.run()
        built.name = gate["name"]
        valid_gates[gate["name"]] = built

    return valid_gates


def get_run_config_from_dict(config: dict):
    """
    Converts the 'run' section of a configuration dictionary to a `RunConfig`.

    Args:
        config (dict): A dictionary with an optional 'run' mapping of `RunConfig` attributes.

    Raises:
        ducharge.framework.Error: When the section holds unknown keys or invalid values.

    Returns:
        ducharge.framework.RunConfig: The validated run configuration.
    """
    # Require known top level keys
    unknown = sorted(set(config.keys()) - set(CONFIG_KEYS))
    if unknown:
        raise framework.Error(f"unknown configuration values {unknown}")

    run = config.get("run", {})

    # Require the run section to be a dict of known keys
    if not isinstance(run, dict):
        raise framework.Error("'run' value must be type dict")
    unknown = sorted(set(run.keys()) - set(RUN_KEYS))
    if unknown:
        raise framework.Error(f"unknown 'run' values {unknown}")

    return framework.RunConfig(**run)


def load_config(path: (str, pathlib.Path)):
    """
    Reads a YAML configuration file.

    Raises:
        ducharge.framework.ParseError: When the file cannot be read or is not a YAML mapping.

    Returns:
        dict: The configuration, empty for an empty file.
    """
    try:
        with open(path, "r", encoding="utf-8") as config_file:
            config = yaml.safe_load(config_file)
    except (OSError, yaml.YAMLError) as exc:
        raise framework.ParseError(f"failed to read configuration file '{path}' ({exc})") from exc

    config = config if config is not None else {}

    # Require a mapping at the top level
    if not isinstance(config, dict):
        raise framework.ParseError(f"configuration file '{path}' must contain a mapping")

    log.debug(f"loaded configuration '{path}' with keys {sorted(config)}")
    return config


def resolve_gate(spec: str, named_gates: (dict, None) = None, path: (str, None) = None):
    """
    Resolves a gate argument: '@name' refers to a configured gate or, failing that, a built-in factory run with default
    options; anything else is a gate JSON file path.

    Args:
        spec (str): The gate argument.
        named_gates (dict, None): Gates from `get_gates_from_dict()`.
        path (str, None): A directory of plugin factory modules.

    Raises:
        ducharge.framework.ParseError: When the name is unknown or the file is not a gate.

    Returns:
        ducharge.gates.Gate: The gate.
    """
    if not spec.startswith("@"):
        return gates.read_gate(spec)

    name = spec[1:]
    if named_gates and name in named_gates:
        return named_gates[name]

    available_factories = get_factory_modules(path)
    if name not in available_factories:
        raise framework.ParseError(f"gate '{spec}' is neither a configured gate nor a factory module")
    return available_factories[name].Factory().run()


def to_jsonable(value):
    """
    Converts report values to JSON-ready Python types: numpy scalars and arrays to numbers and lists, complex numbers to
    [re, im] pairs, tuple keys to strings, and non-finite floats to their string names.
    """
    if isinstance(value, dict):
        return {str(key) if not isinstance(key, str) else key: to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [to_jsonable(value.real), to_jsonable(value.imag)]
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else str(float(value))
    return value


def write_json(data, path: (str, pathlib.Path)):
    """Writes a report as JSON. Floats keep their exact round-trip form."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as json_file:
        json.dump(to_jsonable(data), json_file, indent=2)
    log.debug(f"wrote report '{path}'")


def write_csv(header, rows, path: (str, pathlib.Path)):
    """Writes rows as CSV with a header row; floats use 17 significant digits."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as csv_file:
        writer = csv.writer(csv_file)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format(item, ".17g") if isinstance(item, float) else item for item in row])
    log.debug(f"wrote {len(rows)} rows to '{path}'")
