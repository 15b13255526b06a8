# -*- coding: utf-8 -*-
"""
Unittest of file `gradcheck.py`, finite-difference checks
python -m unittest -v test_gradcheck.py
"""
import unittest

import numpy as np

from src.autodiff import Tensor, make_result
from src.gradcheck import (MODEL_ENTRIES, TOLERANCE, TOY_MODEL, check_direction,
                           check_gradients, gradcheck_suite, toy_bundle)
from src.network import InverseNetwork


def doubled_identity(x: Tensor) -> Tensor:
    """ Identity with a wrong backward (twice the true gradient) """
    return make_result(x.data.copy(), (x,), lambda grad: (2 * grad,), "broken")


class TestCheckGradients(unittest.TestCase):
    """
    Test class for check_gradients and check_direction
    """
    def test_cubic(self):
        """ sum(x^3): exact up to the h^2 term of the central difference """
        x = Tensor(np.array([0.5, -1.0, 2.0]))
        result = check_gradients(lambda: (x * x * x).sum(), {"x": x})
        self.assertEqual(result["entries"], 3)
        self.assertLess(result["max_rel_error"], TOLERANCE)

    def test_step_error(self):
        """ Large step -> error h^2 on every entry of sum(x^3) """
        x = Tensor(np.array([0.1, 0.2]))
        result = check_gradients(lambda: (x * x * x).sum(), {"x": x}, step=0.1)
        self.assertAlmostEqual(result["max_abs_error"], 0.01, places=10)

    def test_wrong_backward(self):
        x = Tensor(np.array([[1.0, 2.0], [3.0, -1.0]]))
        loss_fn = lambda: (doubled_identity(x) * doubled_identity(x)).sum()
        self.assertGreater(check_gradients(loss_fn, {"x": x})["max_rel_error"], 0.5)

    def test_inputs_restored(self):
        values = np.array([0.3, -0.7, 1.1])
        x = Tensor(values.copy())
        check_gradients(lambda: (x * x).sum(), {"x": x})
        result = check_direction(lambda: (x * x).sum(), {"x": x})
        self.assertLess(result["max_rel_error"], TOLERANCE)
        self.assertTrue(np.array_equal(x.data, values))

    def test_max_entries(self):
        x = Tensor(np.ones((4, 5)))
        result = check_gradients(lambda: (x * x).sum(), {"x": x}, max_entries=3)
        self.assertEqual(result["entries"], 3)


class TestGradcheckSuite(unittest.TestCase):
    """
    Test class for gradcheck_suite on the toy network
    """
    def test_toy_suite(self):
        table = gradcheck_suite(seed=0, max_entries=3)
        self.assertEqual(table.columns.tolist(),
                         ["operation", "entries", "max_abs_error", "max_rel_error", "passed"])
        for operation in ("elu", "temporal_conv", "transposed_temporal_conv", "pool", "unpool",
                          "spline_conv", "bipartite_spline_conv", "st_gcnn_block", "mse_loss",
                          "full_model", "full_model_direction"):
            self.assertIn(operation, table.operation.tolist())
        self.assertTrue(table.passed.all(), table.to_string())

    def test_given_model(self):
        model = InverseNetwork(TOY_MODEL, seed=3)
        table = gradcheck_suite(model, toy_bundle(), seed=1, max_entries=2)
        self.assertTrue(table.passed.all(), table.to_string())

    def test_full_model_sample(self):
        """ Default: up to MODEL_ENTRIES entries of every parameter tensor """
        model = InverseNetwork(TOY_MODEL, seed=0)
        table = gradcheck_suite(model, toy_bundle(), seed=0).set_index("operation")
        expected = sum(min(MODEL_ENTRIES, tensor.data.size) for tensor in model.params.values())
        self.assertEqual(MODEL_ENTRIES, 16)
        self.assertEqual(table.loc["full_model", "entries"], expected)
        self.assertTrue(table.passed.all(), table.to_string())


if __name__ == '__main__':
    unittest.main()
