# -*- coding: utf-8 -*-
"""
Unittest of file `framework.py`, config handling and class ExperimentFramework
python -m unittest -v test_framework.py
"""
import os
import tempfile
import unittest
from copy import deepcopy

import yaml

from settings import FOLDER_PATH
from src.dataset import generate_dataset
from src.errors import ConfigError, GeometryMismatchError
from src.framework import (DEFAULT_CONFIG, ExperimentFramework, check_config, coarsen_mesh,
                           config_from_file, merge_config, resolve_config)

CONFIGS = os.path.join(FOLDER_PATH, "configs-example")
TOY_CONFIG = os.path.join(CONFIGS, "config-toy.yaml")


class TestConfig(unittest.TestCase):
    """
    Test class for merge_config, resolve_config and check_config
    """
    def test_defaults(self):
        config = resolve_config({})
        self.assertEqual(config["physics"]["frames"], config["model"]["time_length"])
        self.assertEqual(config["hierarchy"], DEFAULT_CONFIG["hierarchy"])
        self.assertTrue(os.path.isabs(config["output_dir"]))

    def test_example_configs(self):
        for name in ("config-toy.yaml", "config-desk.yaml", "config-overfit.yaml"):
            check_config(config_from_file(os.path.join(CONFIGS, name)))

    def test_merge_config(self):
        base = {"a": {"b": 1, "c": 2}, "d": [1, 2]}
        merged = merge_config(base, {"a": {"c": 3}, "d": [5]})
        self.assertEqual(merged, {"a": {"b": 1, "c": 3}, "d": [5]})
        self.assertEqual(base["a"]["c"], 2)

    def test_geometry_replaced(self):
        """ An icosahedron description does not inherit ellipsoid keys """
        config = resolve_config({"geometry": {"heart": {"shape": "icosahedron"}}})
        self.assertEqual(config["geometry"]["heart"], {"shape": "icosahedron"})
        self.assertEqual(config["geometry"]["torso"], DEFAULT_CONFIG["geometry"]["torso"])

    def test_paths_resolved(self):
        config = config_from_file(TOY_CONFIG)
        self.assertEqual(config["geometry"]["heart"],
                         os.path.join(FOLDER_PATH, "sample-data", "icosahedron.mesh"))
        self.assertEqual(config["output_dir"], os.path.join(FOLDER_PATH, "experiments", "toy"))

    def test_overrides(self):
        """ Flags win over the file """
        with tempfile.TemporaryDirectory() as folder:
            config = config_from_file(TOY_CONFIG, seed=7, output_dir=folder, jobs=2)
        self.assertEqual((config["seed"], config["jobs"]), (7, 2))
        self.assertEqual(config["output_dir"], os.path.abspath(folder))

    def test_unknown_keys(self):
        for config in ({"epochs": 3}, {"train": {"learning_rate": 0.1}},
                       {"data": {"rotations": [{"axis": "z", "degrees": [0], "step": 1}]}},
                       {"geometry": {"heart": {"shape": "ellipsoid", "radius": 1}}}):
            with self.assertRaises(ConfigError):
                resolve_config(config)

    def test_invalid_values(self):
        invalid = [
            {"seed": -1},
            {"jobs": 0},
            {"hierarchy": {"heart": [60, 70]}},
            {"hierarchy": {"torso": [3]}},
            {"physics": {"frames": 59}},
            {"physics": {"ap": {"dt": 0}}},
            {"model": {"spline": {"degree": 3, "kernel_size": [3, 3, 3]}}},
            {"data": {"train_fraction": 0.8, "val_fraction": 0.5}},
            {"data": {"rotations": [{"axis": "w", "degrees": [0]}]}},
            {"train": {"beta2": 1.0}},
            {"eval": {"type_metrics": ["precision"]}},
            {"eval": {"sweep": {"axis": "z", "degrees": "all"}}},
        ]
        for config in invalid:
            with self.assertRaises(ConfigError, msg=str(config)):
                resolve_config(config)

    def test_empty_file(self):
        with tempfile.TemporaryDirectory() as folder:
            path = os.path.join(folder, "empty.yaml")
            with open(path, "w", encoding="utf-8") as openfile:
                openfile.write("")
            config = config_from_file(path)
        self.assertEqual(config["seed"], DEFAULT_CONFIG["seed"])


class TestExperimentFramework(unittest.TestCase):
    """
    Test class for ExperimentFramework outputs that do not need training
    """
    def setUp(self):
        self.folder = tempfile.TemporaryDirectory()
        self.config = config_from_file(TOY_CONFIG, output_dir=self.folder.name)

    def tearDown(self):
        self.folder.cleanup()

    def test_echo_config(self):
        framework = ExperimentFramework(self.config)
        with open(framework.echo_config(), encoding="utf-8") as openfile:
            echoed = yaml.load(openfile, Loader=yaml.FullLoader)
        self.assertEqual(echoed["name_exp"], "toy")
        self.assertEqual(echoed["hierarchy"], {"heart": [6], "torso": [6]})
        check_config(echoed)

    def test_bundle(self):
        bundle = ExperimentFramework(self.config).bundle
        self.assertEqual(bundle.heart.vertex_counts, [12, 6])
        self.assertEqual(bundle.torso.vertex_counts, [12, 6])

    def test_cross_bundle(self):
        bundle = ExperimentFramework(self.config).cross_bundle()
        self.assertEqual(bundle.heart.vertex_counts, [20, 8])

    def test_cross_bundle_proportional(self):
        """ No targets -> same level ratios as the training pair """
        config = deepcopy(self.config)
        del config["eval"]["cross_geometry"]["hierarchy"]
        bundle = ExperimentFramework(config).cross_bundle()
        self.assertEqual(bundle.heart.vertex_counts, [20, 10])
        self.assertEqual(bundle.torso.vertex_counts, [12, 6])

    def test_cross_bundle_missing(self):
        config = deepcopy(self.config)
        config["eval"]["cross_geometry"] = None
        with self.assertRaises(ConfigError):
            ExperimentFramework(config).cross_bundle()

    def test_dataset_geometry_mismatch(self):
        """ Data generated on another heart is refused for training """
        framework = ExperimentFramework(self.config)
        other = deepcopy(self.config)
        other["geometry"]["heart"] = {"shape": "icosahedron", "scale": 1.5}
        other_framework = ExperimentFramework(other)
        generate_dataset(other_framework.bundle, other, framework.dataset_folder)
        with self.assertRaises(GeometryMismatchError):
            framework.train()

    def test_gradcheck(self):
        table = ExperimentFramework(self.config).gradcheck(max_entries=2)
        self.assertTrue(table.passed.all())
        self.assertTrue(os.path.exists(os.path.join(self.folder.name, "gradcheck.csv")))

    def test_coarsen_mesh(self):
        hierarchy = coarsen_mesh({"shape": "ellipsoid", "rings": 7, "segments": 14},
                                 [50, 25], self.folder.name)
        self.assertEqual(hierarchy.vertex_counts, [100, 50, 25])
        self.assertTrue(os.path.exists(os.path.join(self.folder.name, "hierarchy.yaml")))


if __name__ == '__main__':
    unittest.main()
