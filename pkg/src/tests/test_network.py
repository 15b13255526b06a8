# -*- coding: utf-8 -*-
"""
Unittest of file `network.py`, class InverseNetwork
python -m unittest -v test_network.py
"""
import unittest
from copy import deepcopy

import numpy as np
from numpy.testing import assert_allclose

from src.autodiff import Tensor
from src.coarsening import build_hierarchy
from src.errors import ShapeError
from src.framework import DEFAULT_CONFIG
from src.geometry import GeometryBundle, bundle_from_config
from src.gradcheck import TOY_MODEL, toy_bundle
from src.mesh import ellipsoid_mesh
from src.network import (BlockConfig, InverseNetwork, parameter_shapes, st_gcnn_block,
                         time_lengths)
from src.spline import SplineKernel, spline_weight


def zero_model(model_config):
    model = InverseNetwork(model_config)
    for param in model.params.values():
        param.data[...] = 0.0
    return model


class TestShapes(unittest.TestCase):
    """
    Test class for parameter_shapes and the default configuration
    """
    @classmethod
    def setUpClass(cls):
        cls.bundle = bundle_from_config(DEFAULT_CONFIG["geometry"], DEFAULT_CONFIG["hierarchy"],
                                        DEFAULT_CONFIG["model"]["spline"])
        cls.model = InverseNetwork(DEFAULT_CONFIG["model"], seed=0)

    def test_time_lengths(self):
        """ 60 -> 30 -> 15 -> 8 and back """
        lengths = time_lengths(DEFAULT_CONFIG["model"])
        self.assertEqual([lengths[f"encoder.{i}"] for i in range(3)], [30, 15, 8])
        self.assertEqual(lengths["latent"], 8)
        self.assertEqual(lengths["decoder.3"], 60)

    def test_encode_shape(self):
        y = np.random.default_rng(0).standard_normal((self.bundle.num_torso, 1, 60))
        z_b = self.model.encode(Tensor(y), self.bundle)
        self.assertEqual(z_b.shape, (20, 64, 8))

    def test_forward_shape(self):
        y = np.random.default_rng(1).standard_normal((self.bundle.num_torso, 1, 60))
        self.assertEqual(self.model.predict(y, self.bundle).shape, (100, 1, 60))

    def test_num_parameters(self):
        expected = sum(int(np.prod(shape))
                       for shape in parameter_shapes(DEFAULT_CONFIG["model"]).values())
        self.assertEqual(self.model.num_parameters, expected)

    def test_channel_mismatch(self):
        config = deepcopy(DEFAULT_CONFIG["model"])
        config["encoder"]["blocks"][1]["in_channels"] = 8
        with self.assertRaises(ShapeError):
            parameter_shapes(config)

    def test_time_mismatch(self):
        config = deepcopy(DEFAULT_CONFIG["model"])
        config["time_length"] = 61
        with self.assertRaises(ShapeError):
            time_lengths(config)


class TestBlock(unittest.TestCase):
    """
    Test class for st_gcnn_block
    """
    def setUp(self):
        self.bundle = toy_bundle()
        self.edge_basis = self.bundle.torso_bases[0]
        self.x = Tensor(np.random.default_rng(2).standard_normal((12, 1, 8)))

    def block_params(self, block, spline=0.0, residual=0.0, temporal=0.0):
        num_weights = self.edge_basis.num_weights
        return {
            "spline": Tensor(np.full((num_weights, block.in_channels, block.out_channels), spline)),
            "residual": Tensor(np.full((block.out_channels, block.in_channels, 1), residual)),
            "temporal": Tensor(np.full((block.out_channels, block.out_channels, block.width),
                                       temporal)),
        }

    def test_zero_parameters(self):
        block = BlockConfig(1, 2, width=3, stride=2, padding=1)
        out = st_gcnn_block(self.x, block, self.edge_basis, None, self.block_params(block))
        self.assertTrue(np.all(out.data == 0))

    def test_identity_block(self):
        """ Unit residual and temporal kernels, no spline, no pooling -> elu(x) """
        block = BlockConfig(1, 1, width=1, stride=1, padding=0, resample=False)
        params = self.block_params(block, residual=1.0, temporal=1.0)
        out = st_gcnn_block(self.x, block, self.edge_basis, None, params)
        expected = np.where(self.x.data > 0, self.x.data, np.expm1(self.x.data))
        assert_allclose(out.data, expected, atol=1e-15)

    def test_pooled_node_count(self):
        block = BlockConfig(1, 2, width=3, stride=2, padding=1)
        params = self.block_params(block, spline=0.1, residual=0.2, temporal=0.3)
        out = st_gcnn_block(self.x, block, self.edge_basis, self.bundle.torso.maps[0], params)
        self.assertEqual(out.shape, (self.bundle.torso.vertex_counts[1], 2, 4))

    def test_shape_errors(self):
        block = BlockConfig(2, 2)
        with self.assertRaises(ShapeError):
            st_gcnn_block(self.x, block, self.edge_basis, None, self.block_params(block))
        with self.assertRaises(ShapeError):
            st_gcnn_block(Tensor(np.ones((5, 2, 8))), block, self.edge_basis, None,
                          self.block_params(block))


class TestInverseNetwork(unittest.TestCase):
    """
    Test class for encode, inverse_map, decode and forward on the toy pair
    """
    def setUp(self):
        self.bundle = toy_bundle()
        self.model = InverseNetwork(TOY_MODEL, seed=3)
        self.y = np.random.default_rng(4).standard_normal((self.bundle.num_torso, 1, 8))

    def test_zero_parameters(self):
        model = zero_model(TOY_MODEL)
        z_b = model.encode(Tensor(self.y), self.bundle)
        self.assertTrue(np.all(z_b.data == 0))
        x_hat = model.decode(Tensor(np.ones((6, 2, 4))), self.bundle)
        self.assertTrue(np.all(x_hat.data == 0))
        self.assertEqual(x_hat.shape, (self.bundle.num_heart, 1, 8))

    def test_encode_continuity(self):
        """ O(eps) change for an eps perturbation """
        eps = 1e-7
        noise = np.random.default_rng(5).standard_normal(self.y.shape)
        first = self.model.encode(Tensor(self.y), self.bundle).data
        second = self.model.encode(Tensor(self.y + eps * noise), self.bundle).data
        self.assertLess(np.max(np.abs(first - second)), 1e3 * eps)

    def test_inverse_map_linear(self):
        rng = np.random.default_rng(6)
        z1, z2 = rng.standard_normal((2, 6, 2, 4))
        combined = self.model.inverse_map(Tensor(2.0 * z1 - 3.0 * z2), self.bundle).data
        separate = 2.0 * self.model.inverse_map(Tensor(z1), self.bundle).data - \
            3.0 * self.model.inverse_map(Tensor(z2), self.bundle).data
        assert_allclose(combined, separate, atol=1e-12)

    def test_inverse_map_dense_oracle(self):
        """ Coefficients evaluated on every torso/heart latent pair """
        bipartite = self.bundle.bipartite
        kernel = SplineKernel(2, 2, 1, (3, 3, 3))
        kernel.weights.data[...] = self.model.params["inverse.spline"].data
        z_b = np.random.default_rng(7).standard_normal((bipartite.num_left, 2, 4))
        expected = np.zeros((bipartite.num_right, 2, 4))
        for source, target, attr in zip(bipartite.sources, bipartite.targets, bipartite.attrs):
            expected[target] += spline_weight(attr, kernel).data.T @ z_b[source]
        assert_allclose(self.model.inverse_map(Tensor(z_b), self.bundle).data, expected,
                        atol=1e-12)

    def test_deterministic(self):
        first = InverseNetwork(TOY_MODEL, seed=3).predict(self.y, self.bundle)
        second = InverseNetwork(TOY_MODEL, seed=3).predict(self.y, self.bundle)
        self.assertTrue(np.array_equal(first, second))

    def test_other_geometry(self):
        """ Same parameters on a larger pair with the same level counts """
        heart = build_hierarchy(ellipsoid_mesh(3, 6), [8])
        torso = build_hierarchy(ellipsoid_mesh(3, 6, radii=(3.0, 3.0, 3.0)), [10])
        other = GeometryBundle(heart, torso, degree=1, kernel_size=(3, 3, 3))
        before = self.model.state_dict()
        y = np.random.default_rng(8).standard_normal((20, 1, 8))
        self.assertEqual(self.model.predict(y, other).shape, (20, 1, 8))
        for name, value in self.model.state_dict().items():
            self.assertTrue(np.array_equal(value, before[name]))

    def test_geometry_mismatch(self):
        """ Three torso levels for a one-block encoder, wrong node count """
        torso = build_hierarchy(ellipsoid_mesh(3, 6), [10, 6])
        bundle = GeometryBundle(self.bundle.heart, torso, degree=1, kernel_size=(3, 3, 3))
        with self.assertRaises(ShapeError):
            self.model.encode(Tensor(np.ones((20, 1, 8))), bundle)
        with self.assertRaises(ShapeError):
            self.model.encode(Tensor(np.ones((7, 1, 8))), self.bundle)

    def test_state_dict(self):
        other = InverseNetwork(TOY_MODEL, seed=9)
        other.load_state_dict(self.model.state_dict())
        self.assertTrue(np.array_equal(other.predict(self.y, self.bundle),
                                       self.model.predict(self.y, self.bundle)))
        state = self.model.state_dict()
        state["inverse.spline"] = np.zeros((2, 2))
        with self.assertRaises(ShapeError):
            other.load_state_dict(state)


if __name__ == '__main__':
    unittest.main()
