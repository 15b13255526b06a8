# -*- coding: utf-8 -*-
"""
Unittest of file `metrics.py`, class Metrics and MetricReport
python -m unittest -v test_metrics.py
"""
import json
import os
import tempfile
import unittest

import numpy as np
import pandas as pd

from src.errors import ConfigError, ShapeError
from src.metrics import (Metrics, MetricReport, activation_metrics, cc_metric,
                         default_duration_threshold, mse_metric, scar_identify)
from src.mesh import ellipsoid_mesh
from src.physics import APParams, make_scar, simulate_ap, single_cell_ap

config_metrics = {"type_metrics": ["mse", "cc", "dice"]}


class TestMetrics(unittest.TestCase):
    """
    Test class for Metrics class
    """
    def test_get_dice(self):
        """ Test get_dice """
        metrics = Metrics(config_metrics=config_metrics)
        self.assertEqual(metrics.get_dice(range(10), range(5, 15)), 0.5)
        self.assertEqual(metrics.get_dice([], []), 1.0)
        self.assertEqual(metrics.get_dice([], [1, 2]), 0.0)
        self.assertEqual(metrics.get_dice([1, 2], [1, 2]), 1.0)

    def test_get_numbers(self):
        """ Test get_numbers """
        numbers = Metrics.get_numbers(found=[1, 2, 3], gold_standard=[2, 3, 4, 5])
        self.assertEqual(numbers, dict(true_pos=2, false_pos=1, false_neg=2))

    def test_check_config(self):
        """ Unknown metric and bad threshold """
        with self.assertRaises(ConfigError):
            Metrics({"type_metrics": ["precision"]})
        with self.assertRaises(ConfigError):
            Metrics({"type_metrics": ["mse"], "duration_threshold": -1})
        with self.assertRaises(ConfigError):
            Metrics({})

    def test_call(self):
        x = np.random.default_rng(0).standard_normal((5, 1, 6))
        values = Metrics({"type_metrics": ["mse", "cc"]})(x + 0.1, x)
        self.assertAlmostEqual(values["mse"], 0.01, places=12)
        self.assertAlmostEqual(values["cc"], 1.0, places=12)
        self.assertNotIn("dice", values)


class TestSignalMetrics(unittest.TestCase):
    """
    Test class for mse_metric and cc_metric
    """
    def test_cc_examples(self):
        x = np.random.default_rng(1).standard_normal((4, 1, 10))
        self.assertAlmostEqual(cc_metric(x, x), 1.0, places=12)
        centered = x - x.mean()
        self.assertAlmostEqual(cc_metric(-centered, centered), -1.0, places=12)
        self.assertAlmostEqual(cc_metric(2 * x + 3, x), 1.0, places=12)

    def test_cc_affine_invariance(self):
        rng = np.random.default_rng(2)
        x, x_hat = rng.standard_normal((2, 6, 1, 5))
        reference = cc_metric(x_hat, x)
        self.assertAlmostEqual(cc_metric(0.3 * x_hat - 7, x), reference, places=12)
        self.assertAlmostEqual(cc_metric(x_hat, 5 * x + 1), reference, places=12)

    def test_cc_errors(self):
        with self.assertRaises(ValueError):
            cc_metric(np.ones((2, 1, 3)), np.arange(6.0).reshape(2, 1, 3))
        with self.assertRaises(ShapeError):
            cc_metric(np.ones((2, 1, 3)), np.arange(8.0).reshape(2, 1, 4))

    def test_mse(self):
        self.assertEqual(mse_metric(np.ones((2, 1, 2)), np.zeros((2, 1, 2))), 1.0)
        self.assertEqual(mse_metric(np.ones(3), np.ones(3)), 0.0)


class TestActivation(unittest.TestCase):
    """
    Test class for activation_metrics and scar_identify
    """
    def test_step_signal(self):
        """ Active on frames 10-40 -> time 10, duration 31; zero vertex inactive """
        x = np.zeros((2, 1, 60))
        x[0, 0, 10:41] = 1.0
        table = activation_metrics(x)
        self.assertEqual(table.activation_time.tolist(), [10, -1])
        self.assertEqual(table.duration.tolist(), [31, 0])
        self.assertEqual(table.active.tolist(), [True, False])

    def test_plateau_against_single_cell(self):
        """ Stimulated vertex of a mesh simulation vs the isolated cell """
        params = APParams(diffusion=0.01)
        x = simulate_ap(ellipsoid_mesh(3, 6), 0, params=params, frames=60)
        reference = int(np.sum(single_cell_ap(params, 60) >= 0.5))
        self.assertLessEqual(abs(int(activation_metrics(x).duration[0]) - reference), 2)

    def test_scar_perfect_reconstruction(self):
        """ Shifted single-cell traces outside the scar, rest inside """
        mesh = ellipsoid_mesh(4, 8)
        scar = make_scar(mesh, 20, 0.8)
        trace = single_cell_ap(APParams(), 60)
        x = np.zeros((mesh.num_vertices, 1, 60))
        for vertex in range(mesh.num_vertices):
            if vertex not in scar:
                shift = vertex % 5
                x[vertex, 0, shift:] = trace[:60 - shift]
        threshold = default_duration_threshold(x, scar.vertices)
        self.assertGreater(threshold, 0)
        result = scar_identify(x, threshold, scar.vertices)
        self.assertEqual(result.predicted, scar.vertices)
        self.assertEqual(result.dice, 1.0)

    def test_scar_threshold(self):
        """ threshold 0 -> empty prediction; larger thresholds predict more """
        x = np.zeros((4, 1, 10))
        x[1, 0, :3] = 1.0
        x[2, 0, :6] = 1.0
        x[3, 0, :] = 1.0
        self.assertEqual(scar_identify(x, 0, [0]).dice, 0.0)
        sizes = [len(scar_identify(x, threshold).predicted) for threshold in (0, 1, 4, 7, 11)]
        self.assertEqual(sizes, [0, 1, 2, 3, 4])
        with self.assertRaises(ValueError):
            scar_identify(x, -1)


class TestMetricReport(unittest.TestCase):
    """
    Test class for MetricReport
    """
    def report(self):
        report = MetricReport(group_name="degrees")
        report.add("a", -1.0, {"mse": 1.0, "cc": 0.5})
        report.add("b", -1.0, {"mse": 3.0, "cc": 0.7})
        report.add("c", 2.0, {"mse": 2.0, "cc": 0.9, "dice": 0.8})
        return report

    def test_summary(self):
        summary = self.report().summary()
        self.assertEqual(summary.group.tolist(), [-1.0, 2.0])
        self.assertEqual(summary["count"].tolist(), [2, 1])
        self.assertEqual(summary.mse_mean.tolist(), [2.0, 2.0])
        self.assertEqual(summary.mse_std.tolist(), [1.0, 0.0])
        self.assertTrue(np.isnan(summary.dice_mean[0]))

    def test_empty(self):
        report = MetricReport()
        self.assertEqual(len(report), 0)
        self.assertTrue(report.summary().empty)

    def test_save(self):
        with tempfile.TemporaryDirectory() as folder:
            self.report().save(folder, "sweep_z")
            rows = pd.read_csv(os.path.join(folder, "sweep_z.csv"))
            summary = pd.read_csv(os.path.join(folder, "sweep_z_summary.csv"))
            with open(os.path.join(folder, "sweep_z.json"), encoding="utf-8") as openfile:
                info = json.load(openfile)
        self.assertIn("degrees", rows.columns)
        self.assertEqual(len(summary), 2)
        self.assertEqual(info["num_samples"], 3)
        self.assertAlmostEqual(info["overall"]["mse_mean"], 2.0)
        self.assertIn("flattened", info["cc_definition"])


if __name__ == '__main__':
    unittest.main()
