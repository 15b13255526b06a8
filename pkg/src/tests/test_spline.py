# -*- coding: utf-8 -*-
"""
Unittest of file `spline.py`, class SplineKernel and the spline convolutions
python -m unittest -v test_spline.py
"""
import unittest
from itertools import product

import numpy as np
from numpy.testing import assert_allclose

from src.autodiff import Tensor
from src.errors import ShapeError
from src.graph import BipartiteGraph, GeometryGraph, build_graph
from src.mesh import icosahedron, tetrahedron
from src.spline import (SplineKernel, bipartite_spline_conv, bspline_basis,
                        bspline_basis_dense, knot_vector, spline_conv, spline_weight)


def cox_de_boor(t, index, degree, knots):
    """ Textbook recursion, 0/0 taken as 0 """
    if degree == 0:
        return 1.0 if knots[index] <= t < knots[index + 1] else 0.0
    value = 0.0
    left = knots[index + degree] - knots[index]
    if left > 0:
        value += (t - knots[index]) / left * cox_de_boor(t, index, degree - 1, knots)
    right = knots[index + degree + 1] - knots[index + 1]
    if right > 0:
        value += (knots[index + degree + 1] - t) / right * \
            cox_de_boor(t, index + 1, degree - 1, knots)
    return value


def random_kernel(rng, in_channels=2, out_channels=3, degree=1, kernel_size=(3, 4, 3)):
    kernel = SplineKernel(in_channels, out_channels, degree, kernel_size)
    kernel.weights.data[...] = rng.standard_normal(kernel.shape)
    return kernel


def brute_force_weight(u, kernel):
    """ Sum over every basis product of the kernel """
    k1, k2, k3 = kernel.kernel_size
    dense = [bspline_basis_dense(u[dim], kernel.degree, size)
             for dim, size in enumerate(kernel.kernel_size)]
    total = np.zeros((kernel.in_channels, kernel.out_channels))
    for p1, p2, p3 in product(range(k1), range(k2), range(k3)):
        total += dense[0][p1] * dense[1][p2] * dense[2][p3] * \
            kernel.weights.data[p1 * k2 * k3 + p2 * k3 + p3]
    return total


class TestBasis(unittest.TestCase):
    """
    Test class for bspline_basis
    """
    def test_linear_examples(self):
        assert_allclose(bspline_basis_dense(0.0, 1, 2), [1.0, 0.0])
        assert_allclose(bspline_basis_dense(0.5, 1, 2), [0.5, 0.5])
        assert_allclose(bspline_basis_dense(1.0, 1, 2), [0.0, 1.0])

    def test_cox_de_boor(self):
        """ m=2, k=5, t=0.37 """
        knots = knot_vector(2, 5)
        oracle = [cox_de_boor(0.37, index, 2, knots) for index in range(5)]
        assert_allclose(bspline_basis_dense(0.37, 2, 5), oracle, rtol=0, atol=1e-12)

    def test_partition_of_unity(self):
        """ Nonnegative, sum 1, at most m + 1 nonzero """
        for degree, num_bases in ((1, 5), (2, 5), (3, 7)):
            for t in np.linspace(0, 1, 23):
                values, indices = bspline_basis(t, degree, num_bases)
                self.assertEqual(len(indices), degree + 1)
                self.assertTrue(np.all(values >= 0))
                self.assertTrue(np.all((indices >= 0) & (indices < num_bases)))
                self.assertAlmostEqual(float(values.sum()), 1.0, places=12)

    def test_domain(self):
        with self.assertRaises(ValueError):
            bspline_basis(1.2, 1, 3)
        with self.assertRaises(ValueError):
            bspline_basis(0.5, 3, 3)


class TestSplineWeight(unittest.TestCase):
    """
    Test class for spline_weight
    """
    def test_zero_kernel(self):
        kernel = SplineKernel(2, 3, 1, (3, 3, 3))
        assert_allclose(spline_weight(np.array([0.2, 0.7, 0.5]), kernel).data, np.zeros((2, 3)))

    def test_constant_kernel(self):
        """ Every basis weight equal to W -> W """
        constant = np.random.default_rng(0).standard_normal((2, 3))
        kernel = SplineKernel(2, 3, 2, (4, 4, 4))
        kernel.weights.data[...] = constant
        assert_allclose(spline_weight(np.array([0.2, 0.7, 0.5]), kernel).data, constant,
                        atol=1e-12)

    def test_brute_force(self):
        rng = np.random.default_rng(1)
        for degree in (1, 2):
            kernel = random_kernel(rng, degree=degree, kernel_size=(3, 4, 5))
            u = np.array([0.2, 0.7, 0.5])
            assert_allclose(spline_weight(u, kernel).data, brute_force_weight(u, kernel),
                            atol=1e-12)

    def test_gradient(self):
        """ d sum(g(u)) / d w_p = B_p(u) """
        rng = np.random.default_rng(2)
        kernel = random_kernel(rng, kernel_size=(3, 3, 3))
        u = np.array([0.25, 1.0, 0.6])
        spline_weight(u, kernel).sum().backward()
        dense = [bspline_basis_dense(value, 1, 3) for value in u]
        expected = np.einsum("a,b,c->abc", *dense).ravel()
        assert_allclose(kernel.weights.grad[:, 0, 0], expected, atol=1e-15)


class TestSplineConv(unittest.TestCase):
    """
    Test class for spline_conv and bipartite_spline_conv
    """
    def loop_conv(self, graph, features, kernel):
        out = np.zeros((graph.num_targets, kernel.out_channels, features.shape[2]))
        for source, target, attr in zip(graph.sources, graph.targets, graph.attrs):
            weight = brute_force_weight(attr, kernel)
            out[target] += weight.T @ features[source]
        return out

    def test_against_loops(self):
        rng = np.random.default_rng(3)
        graph = build_graph(icosahedron())
        kernel = random_kernel(rng)
        features = rng.standard_normal((12, 2, 4))
        out = spline_conv(graph, Tensor(features), kernel)
        self.assertEqual(out.shape, (12, 3, 4))
        assert_allclose(out.data, self.loop_conv(graph, features, kernel), atol=1e-12)

    def test_bipartite_against_loops(self):
        rng = np.random.default_rng(4)
        bgraph = BipartiteGraph(rng.standard_normal((5, 3)), rng.standard_normal((4, 3)))
        kernel = random_kernel(rng, in_channels=2, out_channels=1)
        z_b = rng.standard_normal((5, 2, 3))
        out = bipartite_spline_conv(bgraph, Tensor(z_b), kernel)
        self.assertEqual(out.shape, (4, 1, 3))
        assert_allclose(out.data, self.loop_conv(bgraph, z_b, kernel), atol=1e-12)

    def test_zero_kernel(self):
        graph = build_graph(icosahedron())
        out = spline_conv(graph, Tensor(np.ones((12, 2, 3))), SplineKernel(2, 2, 1, (3, 3, 3)))
        self.assertTrue(np.all(out.data == 0))

    def test_linearity(self):
        """ Linear in the features and in the kernel weights """
        rng = np.random.default_rng(5)
        graph = build_graph(icosahedron())
        first, second = random_kernel(rng), random_kernel(rng)
        x1, x2 = rng.standard_normal((12, 2, 3)), rng.standard_normal((12, 2, 3))
        a, b = 1.7, -0.4
        assert_allclose(spline_conv(graph, Tensor(a * x1 + b * x2), first).data,
                        a * spline_conv(graph, Tensor(x1), first).data +
                        b * spline_conv(graph, Tensor(x2), first).data, atol=1e-12)
        mixed = SplineKernel(2, 3, 1, (3, 4, 3))
        mixed.weights.data[...] = a * first.weights.data + b * second.weights.data
        assert_allclose(spline_conv(graph, Tensor(x1), mixed).data,
                        a * spline_conv(graph, Tensor(x1), first).data +
                        b * spline_conv(graph, Tensor(x1), second).data, atol=1e-12)

    def test_permutation_equivariance(self):
        """ Relabelling the vertices permutes the output the same way """
        rng = np.random.default_rng(6)
        graph = build_graph(icosahedron())
        kernel = random_kernel(rng)
        features = rng.standard_normal((12, 2, 4))
        perm = rng.permutation(12)
        inverse = np.argsort(perm)
        relabelled = GeometryGraph(graph.coords[perm], inverse[graph.sources],
                                   inverse[graph.targets])
        out = spline_conv(graph, Tensor(features), kernel).data
        assert_allclose(spline_conv(relabelled, Tensor(features[perm]), kernel).data, out[perm],
                        atol=1e-12)

    def test_kernel_transfer(self):
        """ The same kernel on a larger graph gives the same output on the shared part """
        rng = np.random.default_rng(7)
        graph, other = build_graph(icosahedron()), build_graph(tetrahedron())
        # shifted, scaled copy of the icosahedron next to a tetrahedron
        coords = np.concatenate([2.5 * graph.coords + [10.0, -3.0, 1.0], other.coords])
        union = GeometryGraph(coords, np.concatenate([graph.sources, other.sources + 12]),
                              np.concatenate([graph.targets, other.targets + 12]))
        kernel = random_kernel(rng)
        features = rng.standard_normal((12, 2, 3))
        padded = np.concatenate([features, rng.standard_normal((4, 2, 3))])
        assert_allclose(spline_conv(union, Tensor(padded), kernel).data[:12],
                        spline_conv(graph, Tensor(features), kernel).data, atol=1e-12)

    def test_single_vertex_self_loop(self):
        """ y = g(0.5, 0.5, 0.5)^T x """
        rng = np.random.default_rng(8)
        graph = GeometryGraph([[0.3, -1.0, 2.0]], [0], [0])
        for degree in (1, 2):
            kernel = random_kernel(rng, degree=degree, kernel_size=(4, 3, 5))
            features = rng.standard_normal((1, 2, 6))
            weight = spline_weight(np.full(3, 0.5), kernel).data
            out = spline_conv(graph, Tensor(features), kernel)
            self.assertEqual(out.shape, (1, 3, 6))
            assert_allclose(out.data[0], weight.T @ features[0], atol=1e-12)

    def test_shape_errors(self):
        graph = build_graph(icosahedron())
        kernel = SplineKernel(2, 2, 1, (3, 3, 3))
        with self.assertRaises(ShapeError):
            spline_conv(graph, Tensor(np.ones((11, 2, 3))), kernel)
        with self.assertRaises(ShapeError):
            spline_conv(graph, Tensor(np.ones((12, 3, 3))), kernel)


if __name__ == '__main__':
    unittest.main()
