"""Contains tests that test the ducharge.tools module and the built-in gate factories."""

import json
import pathlib
import tempfile
import unittest

import numpy as np

import ducharge

PLUGIN_SOURCE = '''
from ducharge import framework
from ducharge import gates


class Factory(framework.BaseFactory):
    name = "{name}"

    def build(self):
        return gates.swap(3)
'''


class ToolsTestCase(unittest.TestCase):
    """Creates a test case for testing the ducharge.tools module."""
    def setUp(self):
        """Setup a temporary directory for configuration, gate and plugin files."""
        self.tmp = tempfile.TemporaryDirectory()
        self.path = pathlib.Path(self.tmp.name)

    def tearDown(self):
        """Remove the temporary directory."""
        self.tmp.cleanup()

    def test_get_gates_from_dict(self):
        """Tests the ducharge.tools.get_gates_from_dict() method."""
        # Ensure error is raised when config does not contain gates
        with self.assertRaises(ducharge.framework.Error):
            ducharge.tools.get_gates_from_dict({})

        # Ensure error is raised when gates is not a list
        with self.assertRaises(ducharge.framework.Error):
            ducharge.tools.get_gates_from_dict({"gates": False})

        # Ensure error is raised if gate is not a dict
        with self.assertRaises(ducharge.framework.Error):
            ducharge.tools.get_gates_from_dict({"gates": [False]})

        # Ensure error is raised if gate name is not set
        with self.assertRaises(ducharge.framework.Error):
            ducharge.tools.get_gates_from_dict({"gates": [{}]})

        # Ensure error is raised if gate name is not unique
        with self.assertRaises(ducharge.framework.Error):
            ducharge.tools.get_gates_from_dict(
                {
                    "gates": [
                        {"name": "test_gate", "module": "fswap"},
                        {"name": "test_gate", "module": "fswap"}
                    ]
                }
            )

        # Ensure error is raised if gate module is not set or not known
        with self.assertRaises(ducharge.framework.Error):
            ducharge.tools.get_gates_from_dict({"gates": [{"name": "test_gate"}]})
        with self.assertRaises(ducharge.framework.Error):
            ducharge.tools.get_gates_from_dict({"gates": [{"name": "test_gate", "module": "invalid"}]})

        # Ensure error is raised if gate config is not a dict
        with self.assertRaises(ducharge.framework.Error):
            ducharge.tools.get_gates_from_dict({"gates": [{"name": "test_gate", "module": "swap", "config": []}]})

        # Ensure valid gates are built, named and kept in order
        built = ducharge.tools.get_gates_from_dict(
            {
                "gates": [
                    {"name": "qutrit_swap", "module": "swap", "config": {"d": 3}},
                    {"name": "kick", "module": "phased_swap", "config": {"theta": 0.5}},
                    {"name": "draw", "module": "dual_unitary", "config": {"seed": 4, "J": 0.3}}
                ]
            }
        )
        self.assertEqual(list(built), ["qutrit_swap", "kick", "draw"])
        self.assertEqual(built["qutrit_swap"].d, 3)
        self.assertEqual(built["kick"].name, "kick")
        np.testing.assert_allclose(built["draw"].matrix, ducharge.gates.random_dual_unitary_qubit(4, 0.3).matrix)

    def test_factory_options(self):
        """Tests the validation of the built-in factory options."""
        invalid_configs = [
            {"name": "g", "module": "swap", "config": {"d": 1}},
            {"name": "g", "module": "identity", "config": {"d": "two"}},
            {"name": "g", "module": "phased_swap", "config": {"theta": "wide"}},
            {"name": "g", "module": "dual_unitary", "config": {"seed": -1}},
            {"name": "g", "module": "dual_unitary", "config": {"J": [0.1]}},
            {"name": "g", "module": "file", "config": {}},
            {"name": "g", "module": "file", "config": {"path": 5}},
            {"name": "g", "module": "file", "config": {"path": str(self.path / "missing.json")}}
        ]

        # Ensure every invalid option is rejected
        for gate in invalid_configs:
            with self.assertRaises(ducharge.framework.Error, msg=str(gate)):
                ducharge.tools.get_gates_from_dict({"gates": [gate]})

        # Ensure the file factory reads an existing gate file
        ducharge.gates.write_gate(ducharge.gates.cz(), self.path / "cz.json")
        built = ducharge.tools.get_gates_from_dict(
            {"gates": [{"name": "stored", "module": "file", "config": {"path": str(self.path / "cz.json")}}]}
        )
        np.testing.assert_array_equal(built["stored"].matrix, ducharge.gates.cz().matrix)

    def test_get_factory_modules(self):
        """Tests the ducharge.tools.get_factory_modules() method."""
        # Ensure the built-in factories are always available
        modules = ducharge.tools.get_factory_modules()
        for name in ("cz", "dual_unitary", "file", "fswap", "identity", "phased_swap", "swap"):
            self.assertIn(name, modules)

        # Ensure error is raised if the plugin path is not a directory
        with self.assertRaises(ducharge.framework.Error):
            ducharge.tools.get_factory_modules(str(self.path / "missing"))

        # Ensure a valid plugin module is included and usable by name
        plugins = self.path / "plugins"
        plugins.mkdir()
        (plugins / "ducharge_test_plugin_gate.py").write_text(
            PLUGIN_SOURCE.format(name="ducharge_test_plugin_gate"), encoding="utf-8"
        )
        modules = ducharge.tools.get_factory_modules(str(plugins))
        self.assertIn("ducharge_test_plugin_gate", modules)
        built = ducharge.tools.get_gates_from_dict(
            {"gates": [{"name": "plugin", "module": "ducharge_test_plugin_gate"}]}, str(plugins)
        )
        self.assertEqual(built["plugin"].d, 3)

        # Ensure error is raised if a plugin module has no Factory class
        broken = self.path / "broken"
        broken.mkdir()
        (broken / "ducharge_test_broken_gate.py").write_text("VALUE = 1\n", encoding="utf-8")
        with self.assertRaises(ducharge.framework.Error):
            ducharge.tools.get_factory_modules(str(broken))

        # Ensure error is raised if the Factory class does not extend BaseFactory
        foreign = self.path / "foreign"
        foreign.mkdir()
        (foreign / "ducharge_test_foreign_gate.py").write_text("class Factory:\n    pass\n", encoding="utf-8")
        with self.assertRaises(ducharge.framework.Error):
            ducharge.tools.get_factory_modules(str(foreign))

    def test_get_run_config_from_dict(self):
        """Tests the ducharge.tools.get_run_config_from_dict() method."""
        # Ensure an empty config gives the defaults
        self.assertEqual(ducharge.tools.get_run_config_from_dict({}).L, 4)

        # Ensure run values are applied
        config = ducharge.tools.get_run_config_from_dict({"run": {"L": 6, "w_max": 5, "log_level": "info"}})
        self.assertEqual((config.L, config.w_max), (6, 5))

        # Ensure unknown or invalid values raise an error
        with self.assertRaises(ducharge.framework.Error):
            ducharge.tools.get_run_config_from_dict({"listeners": []})
        with self.assertRaises(ducharge.framework.Error):
            ducharge.tools.get_run_config_from_dict({"run": {"colour": "blue"}})
        with self.assertRaises(ducharge.framework.Error):
            ducharge.tools.get_run_config_from_dict({"run": []})
        with self.assertRaises(ducharge.framework.Error):
            ducharge.tools.get_run_config_from_dict({"run": {"tol": -1}})

    def test_load_config(self):
        """Tests the ducharge.tools.load_config() method."""
        text = "run:\n  L: 5\ngates:\n  - name: a\n    module: fswap\n"
        (self.path / "config.yml").write_text(text, encoding="utf-8")
        config = ducharge.tools.load_config(self.path / "config.yml")
        self.assertEqual(config["run"]["L"], 5)
        self.assertEqual(config["gates"][0]["module"], "fswap")

        # Ensure an empty file is an empty config
        (self.path / "empty.yml").write_text("", encoding="utf-8")
        self.assertEqual(ducharge.tools.load_config(self.path / "empty.yml"), {})

        # Ensure missing files, invalid YAML and non-mapping documents raise parse errors
        (self.path / "invalid.yml").write_text("run: [\n", encoding="utf-8")
        (self.path / "list.yml").write_text("- 1\n- 2\n", encoding="utf-8")
        for filename in ("missing.yml", "invalid.yml", "list.yml"):
            with self.assertRaises(ducharge.framework.ParseError, msg=filename):
                ducharge.tools.load_config(self.path / filename)

    def test_resolve_gate(self):
        """Tests the ducharge.tools.resolve_gate() method."""
        named = {"mine": ducharge.gates.swap(3)}

        # Ensure configured names win over factory modules
        self.assertEqual(ducharge.tools.resolve_gate("@mine", named).d, 3)
        self.assertEqual(ducharge.tools.resolve_gate("@fswap", named).name, "fswap")

        # Ensure unknown names raise a parse error
        with self.assertRaises(ducharge.framework.ParseError):
            ducharge.tools.resolve_gate("@unknown", named)

        # Ensure anything else is read as a gate file
        ducharge.gates.write_gate(ducharge.gates.fswap(), self.path / "stored.json")
        self.assertEqual(ducharge.tools.resolve_gate(str(self.path / "stored.json")).name, "stored")
        with self.assertRaises(ducharge.framework.ParseError):
            ducharge.tools.resolve_gate(str(self.path / "missing.json"))

    def test_to_jsonable(self):
        """Tests the ducharge.tools.to_jsonable() method."""
        converted = ducharge.tools.to_jsonable(
            {(0, 1): np.int64(3), "z": 1 + 2j, "inf": float("inf"), "flags": np.array([True, False]), "n": None}
        )
        self.assertEqual(converted["(0, 1)"], 3)
        self.assertEqual(converted["z"], [1.0, 2.0])
        self.assertEqual(converted["inf"], "inf")
        self.assertEqual(converted["flags"], [True, False])
        self.assertIsNone(converted["n"])
        json.dumps(converted)

    def test_write_files(self):
        """Tests the ducharge.tools.write_json() and write_csv() methods."""
        ducharge.tools.write_json({"value": np.float64(0.1)}, self.path / "nested" / "report.json")
        self.assertEqual(json.loads((self.path / "nested" / "report.json").read_text(encoding="utf-8")), {"value": 0.1})

        ducharge.tools.write_csv(["a", "b"], [(1, 0.1), (2, "x")], self.path / "table.csv")
        lines = (self.path / "table.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(lines, ["a,b", "1,0.10000000000000001", "2,x"])


if __name__ == '__main__':
    unittest.main()
