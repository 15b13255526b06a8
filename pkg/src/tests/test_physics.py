# -*- coding: utf-8 -*-
"""
Unittest of file `physics.py`, class APParams and the forward model
python -m unittest -v test_physics.py
"""
import unittest

import numpy as np
from numpy.testing import assert_allclose

from src.errors import MeshError, ShapeError, SimulationError
from src.mesh import TriMesh, ellipsoid_mesh, icosahedron
from src.metrics import activation_metrics
from src.physics import (APParams, ScarMap, add_noise, apply_forward, build_forward_operator,
                         graph_laplacian, is_connected_scar, make_scar, mesh_laplacian,
                         select_origins, simulate_ap, simulate_on_laplacian, single_cell_ap)


def point_cloud(points):
    """ Vertices only, enough for the forward operator """
    return TriMesh(points, np.zeros((0, 3), dtype=np.int64))


class TestLaplacian(unittest.TestCase):
    """
    Test class for graph_laplacian
    """
    def test_two_vertices(self):
        assert_allclose(graph_laplacian(2, [[0, 1]]).toarray(), [[1, -1], [-1, 1]])

    def test_constant_vector(self):
        laplacian = mesh_laplacian(ellipsoid_mesh(3, 6))
        assert_allclose(laplacian @ np.ones(20), np.zeros(20), atol=1e-15)

    def test_icosahedron_degree(self):
        assert_allclose(mesh_laplacian(icosahedron()).diagonal(), np.full(12, 5.0))


class TestSimulation(unittest.TestCase):
    """
    Test class for simulate_ap
    """
    def test_rest(self):
        """ No stimulus -> u stays 0 """
        out = simulate_ap(icosahedron(), None, frames=10)
        self.assertEqual(out.shape, (12, 1, 10))
        self.assertTrue(np.all(out == 0))

    def test_scar_clamped(self):
        mesh = ellipsoid_mesh(4, 8)
        scar = make_scar(mesh, 20, 0.8)
        self.assertGreater(len(scar), 1)
        out = simulate_ap(mesh, 0, scar, frames=20)
        self.assertTrue(np.all(out[sorted(scar.vertices)] == 0))
        self.assertGreater(out[~scar.mask].max(), 0.9)

    def test_origin_in_scar(self):
        mesh = icosahedron()
        with self.assertRaises(ValueError):
            simulate_ap(mesh, 3, ScarMap([3], 12), frames=5)
        with self.assertRaises(MeshError):
            simulate_ap(mesh, 12, frames=5)

    def test_activation_recovery_cycle(self):
        """ 2-vertex graph: each vertex goes above 0.9 and back below 0.1 """
        out = simulate_on_laplacian(graph_laplacian(2, [[0, 1]]), 0, np.zeros(2, dtype=bool),
                                    frames=60)
        for vertex in range(2):
            self.assertGreater(out[vertex, 0].max(), 0.9)
            self.assertLess(out[vertex, 0, -1], 0.1)

    def test_plateau_matches_single_cell(self):
        """ Weak coupling: the stimulated vertex follows the isolated cell """
        params = APParams(diffusion=0.01)
        out = simulate_on_laplacian(graph_laplacian(2, [[0, 1]]), 0, np.zeros(2, dtype=bool),
                                    params, frames=60)
        reference = single_cell_ap(params, frames=60)
        coupled = int(np.sum(out[0, 0] >= 0.5))
        isolated = int(np.sum(reference >= 0.5))
        self.assertLessEqual(abs(coupled - isolated), 2)

    def test_activation_monotone_on_path(self):
        """ Activation time does not decrease with the distance to the origin """
        edges = [[i, i + 1] for i in range(7)]
        out = simulate_on_laplacian(graph_laplacian(8, edges), 0, np.zeros(8, dtype=bool),
                                    frames=40)
        table = activation_metrics(out)
        self.assertTrue(table.active.all())
        self.assertTrue(np.all(np.diff(table.activation_time.values) >= 0))

    def test_unstable(self):
        with self.assertRaises(SimulationError) as context:
            simulate_ap(icosahedron(), 0, params=APParams(dt=1.0, substeps=1), frames=3)
        self.assertEqual(context.exception.params["dt"], 1.0)

    def test_params(self):
        self.assertEqual(APParams.from_dict({"k": 8.0}).a, 0.15)
        with self.assertRaises(ValueError):
            APParams.from_dict({"kappa": 1.0})
        with self.assertRaises(ValueError):
            APParams(dt=0.0)


class TestScarsAndOrigins(unittest.TestCase):
    """
    Test class for make_scar and select_origins
    """
    def test_scar_connected(self):
        mesh = ellipsoid_mesh(7, 14)
        for seed in (0, 17, 55):
            scar = make_scar(mesh, seed, 0.5)
            self.assertIn(seed, scar)
            self.assertTrue(is_connected_scar(mesh, scar))

    def test_scar_zero_radius(self):
        self.assertEqual(make_scar(icosahedron(), 4, 0.0).vertices, frozenset([4]))

    def test_origins(self):
        mesh = ellipsoid_mesh(7, 14)
        origins = select_origins(mesh, 6)
        self.assertEqual(len(set(origins)), 6)
        self.assertEqual(origins, select_origins(mesh, 6))
        self.assertEqual(origins[1], 99)
        with self.assertRaises(ValueError):
            select_origins(mesh, 101)


class TestForwardOperator(unittest.TestCase):
    """
    Test class for build_forward_operator, apply_forward and add_noise
    """
    def test_equidistant(self):
        operator = build_forward_operator(icosahedron(), point_cloud([[0.0, 0.0, 0.0]]))
        assert_allclose(operator, np.full((1, 12), 1 / 12))

    def test_distances_one_and_three(self):
        heart = point_cloud([[1.0, 0.0, 0.0], [3.0, 0.0, 0.0]])
        operator = build_forward_operator(heart, point_cloud([[0.0, 0.0, 0.0]]))
        assert_allclose(operator, [[0.75, 0.25]])

    def test_row_stochastic(self):
        heart = ellipsoid_mesh(3, 6)
        torso = ellipsoid_mesh(4, 8, radii=(3.0, 3.0, 4.0))
        operator = build_forward_operator(heart, torso)
        self.assertTrue(np.all(operator >= 0))
        assert_allclose(operator.sum(axis=1), np.ones(torso.num_vertices))
        x = np.random.default_rng(0).standard_normal((20, 1, 7))
        y = apply_forward(operator, x)
        self.assertTrue(np.all(y.max(axis=0) <= x.max(axis=0) + 1e-12))
        self.assertTrue(np.all(y.min(axis=0) >= x.min(axis=0) - 1e-12))
        assert_allclose(apply_forward(operator, np.full((20, 1, 3), 2.5)), np.full((34, 1, 3), 2.5))

    def test_coincident(self):
        with self.assertRaises(MeshError):
            build_forward_operator(icosahedron(), icosahedron())

    def test_apply(self):
        rng = np.random.default_rng(1)
        operator, x = rng.standard_normal((4, 3)), rng.standard_normal((3, 1, 5))
        expected = np.zeros((4, 1, 5))
        for i in range(4):
            for j in range(3):
                expected[i] += operator[i, j] * x[j]
        assert_allclose(apply_forward(operator, x), expected, atol=1e-12)
        permutation = np.eye(3)[[2, 0, 1]]
        assert_allclose(apply_forward(permutation, x), x[[2, 0, 1]])
        self.assertTrue(np.all(apply_forward(operator, np.zeros((3, 1, 5))) == 0))
        with self.assertRaises(ShapeError):
            apply_forward(operator, np.ones((4, 1, 5)))

    def test_noise_power(self):
        """ 20 dB: noise power is a hundredth of the signal power, within 10% """
        signal = np.sin(np.linspace(0, 50, 100000)).reshape(1000, 1, 100)
        noise = add_noise(signal, 20.0, seed=3) - signal
        ratio = np.mean(noise ** 2) / (np.mean(signal ** 2) / 100)
        self.assertLess(abs(ratio - 1.0), 0.1)

    def test_noise_seeded(self):
        signal = np.random.default_rng(4).standard_normal((5, 1, 8))
        self.assertTrue(np.array_equal(add_noise(signal, 20.0, 7), add_noise(signal, 20.0, 7)))
        assert_allclose(add_noise(2 * signal, 20.0, 7) - 2 * signal,
                        2 * (add_noise(signal, 20.0, 7) - signal), atol=1e-12)
        self.assertTrue(np.array_equal(add_noise(signal, np.inf), signal))
        with self.assertRaises(ValueError):
            add_noise(np.zeros((2, 1, 3)))


if __name__ == '__main__':
    unittest.main()
