# -*- coding: utf-8 -*-
"""
Open B-spline bases over [0, 1], spline kernels over 3-d edge attributes and
the spline convolutions built on them

A kernel holds one (in_channels, out_channels) weight matrix per tensor-product
basis function. For an edge with attribute u, the kernel value is
    g(u) = sum_p B_p(u) w_p
and only (degree + 1)^3 of the B_p are nonzero.
"""
from typing import Tuple

import numpy as np
from scipy import sparse

from src.autodiff import Tensor, make_result
from src.errors import ShapeError


def knot_vector(degree: int, num_bases: int) -> np.ndarray:
    """ Clamped open-uniform knots, endpoints repeated degree + 1 times """
    if degree < 0 or num_bases < degree + 1:
        raise ValueError(f"Need num_bases >= degree + 1, got degree {degree}, bases {num_bases}")
    inner = np.linspace(0.0, 1.0, num_bases - degree + 1)
    return np.concatenate([np.zeros(degree), inner, np.ones(degree)])


def find_span(values: np.ndarray, degree: int, num_bases: int, knots: np.ndarray) -> np.ndarray:
    """ Knot span of each value; t = 1 falls in the last nonempty span """
    spans = np.searchsorted(knots, values, side="right") - 1
    return np.clip(spans, degree, num_bases - 1)


def basis_funs(values: np.ndarray, degree: int, num_bases: int) -> Tuple[np.ndarray, np.ndarray]:
    """ The degree + 1 nonzero basis values at each t (shape (n, degree + 1))
    and the index of the first of them """
    values = np.atleast_1d(np.asarray(values, dtype=np.float64))
    knots = knot_vector(degree, num_bases)
    spans = find_span(values, degree, num_bases, knots)

    count = values.shape[0]
    basis = np.zeros((count, degree + 1))
    left = np.zeros((count, degree + 1))
    right = np.zeros((count, degree + 1))
    basis[:, 0] = 1.0
    for j in range(1, degree + 1):
        left[:, j] = values - knots[spans + 1 - j]
        right[:, j] = knots[spans + j] - values
        saved = np.zeros(count)
        for r in range(j):
            temp = basis[:, r] / (right[:, r + 1] + left[:, j - r])
            basis[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        basis[:, j] = saved
    return basis, spans - degree


def _check_domain(values: np.ndarray):
    if np.any(values < 0.0) or np.any(values > 1.0) or not np.all(np.isfinite(values)):
        raise ValueError("B-spline argument outside [0, 1]")


def bspline_basis(t: float, degree: int, num_bases: int) -> Tuple[np.ndarray, np.ndarray]:
    """ (values, indices) of the degree + 1 potentially nonzero bases at t """
    _check_domain(np.asarray(t, dtype=np.float64))
    basis, first = basis_funs(np.array([t]), degree, num_bases)
    return basis[0], first[0] + np.arange(degree + 1)


def bspline_basis_dense(t: float, degree: int, num_bases: int) -> np.ndarray:
    """ All `num_bases` values at t """
    values, indices = bspline_basis(t, degree, num_bases)
    dense = np.zeros(num_bases)
    dense[indices] = values
    return dense


def basis_products(attrs, degree: int, kernel_size: Tuple[int, int, int]):
    """ Tensor-product bases of 3-d attributes, shape (E, (degree + 1)^3),
    with the flat kernel index of each product """
    attrs = np.atleast_2d(np.asarray(attrs, dtype=np.float64))
    if attrs.shape[1] != 3:
        raise ShapeError(f"Edge attributes should be 3-d, got shape {attrs.shape}")
    _check_domain(attrs)
    k1, k2, k3 = kernel_size
    per_dim = [basis_funs(attrs[:, dim], degree, size)
               for dim, size in enumerate(kernel_size)]
    (b0, f0), (b1, f1), (b2, f2) = per_dim
    offsets = np.arange(degree + 1)
    values = np.einsum("ea,eb,ec->eabc", b0, b1, b2).reshape(attrs.shape[0], -1)
    i0 = (f0[:, None] + offsets)[:, :, None, None]
    i1 = (f1[:, None] + offsets)[:, None, :, None]
    i2 = (f2[:, None] + offsets)[:, None, None, :]
    indices = (i0 * k2 * k3 + i1 * k3 + i2).reshape(attrs.shape[0], -1)
    return values, indices


class SplineKernel:
    """ Trainable weights of shape (k1 * k2 * k3, in_channels, out_channels) """
    def __init__(self, in_channels: int, out_channels: int, degree: int = 1,
                 kernel_size: Tuple[int, int, int] = (5, 5, 5), name: str = "kernel"):
        kernel_size = tuple(int(size) for size in kernel_size)
        if len(kernel_size) != 3:
            raise ValueError("Spline kernels are defined over 3 attribute dimensions")
        if any(size < degree + 1 for size in kernel_size):
            raise ValueError(f"Kernel size {kernel_size} too small for degree {degree}")
        if in_channels < 1 or out_channels < 1:
            raise ValueError("Channels must be >= 1")
        self.degree = degree
        self.kernel_size = kernel_size
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.weights = Tensor(np.zeros(self.shape), requires_grad=True, name=name)

    def __repr__(self):
        return (f"SplineKernel({self.in_channels}->{self.out_channels}, degree={self.degree}, "
                f"size={self.kernel_size})")

    @property
    def num_weights(self) -> int:
        return int(np.prod(self.kernel_size))

    @property
    def support(self) -> int:
        return (self.degree + 1) ** 3

    @property
    def shape(self) -> tuple:
        return (self.num_weights, self.in_channels, self.out_channels)

    def initialize(self, rng: np.random.Generator):
        bound = (self.in_channels * self.support) ** -0.5
        self.weights.data[...] = rng.uniform(-bound, bound, size=self.shape)


def spline_weight(u, kernel: SplineKernel) -> Tensor:
    """ g(u) as an (in_channels, out_channels) tensor, differentiable in the weights """
    values, indices = basis_products(np.asarray(u)[None, :], kernel.degree, kernel.kernel_size)
    values, indices = values[0], indices[0]
    weights = kernel.weights
    data = np.einsum("s,sco->co", values, weights.data[indices])

    def grad_fn(grad):
        grad_w = np.zeros_like(weights.data)
        np.add.at(grad_w, indices, values[:, None, None] * grad[None, :, :])
        return (grad_w,)

    return make_result(data, (weights,), grad_fn, "spline_weight")


class EdgeBasis:
    """ Spline bases of a graph's edges, with the sparse operators used by
    `spline_aggregate`: weight mixing (K x E), gather back to sources and
    scatter into targets """
    def __init__(self, graph, degree: int, kernel_size: Tuple[int, int, int]):
        self.degree = degree
        self.kernel_size = tuple(kernel_size)
        self.sources = graph.sources
        self.targets = graph.targets
        self.num_sources = graph.num_vertices
        self.num_targets = graph.num_targets
        self.num_weights = int(np.prod(kernel_size))
        self.values, self.indices = basis_products(graph.attrs, degree, kernel_size)

        num_edges = self.sources.shape[0]
        edge_ids = np.arange(num_edges)
        support = self.values.shape[1]
        self.mix = sparse.csr_matrix(
            (self.values.ravel(), (self.indices.ravel(), np.repeat(edge_ids, support))),
            shape=(self.num_weights, num_edges))
        self.scatter = sparse.csr_matrix(
            (np.ones(num_edges), (self.targets, edge_ids)), shape=(self.num_targets, num_edges))
        self.gather_back = sparse.csr_matrix(
            (np.ones(num_edges), (self.sources, edge_ids)), shape=(self.num_sources, num_edges))

    @property
    def num_edges(self) -> int:
        return self.sources.shape[0]

    def edge_kernels(self, weights: np.ndarray) -> np.ndarray:
        """ g(u_e) for every edge, shape (E, in, out) """
        flat = self.mix.T @ weights.reshape(self.num_weights, -1)
        return np.asarray(flat).reshape(self.num_edges, weights.shape[1], weights.shape[2])


def spline_aggregate(features: Tensor, weights: Tensor, edge_basis: EdgeBasis) -> Tensor:
    """ out(i) = sum over edges (j -> i) of f(j) g(u(i, j)), per time frame """
    if features.ndim != 3:
        raise ShapeError(f"Features should be (nodes, channels, time), got {features.shape}")
    num_nodes, channels, length = features.shape
    if num_nodes != edge_basis.num_sources:
        raise ShapeError(
            f"Features on {num_nodes} nodes, graph has {edge_basis.num_sources} source vertices")
    if weights.shape[0] != edge_basis.num_weights or weights.shape[1] != channels:
        raise ShapeError(
            f"Kernel of shape {weights.shape} does not fit {channels} channels and "
            f"{edge_basis.num_weights} bases")
    num_edges, out_channels = edge_basis.num_edges, weights.shape[2]

    kernels = edge_basis.edge_kernels(weights.data)
    gathered = features.data[edge_basis.sources]
    messages = np.einsum("ect,eco->eot", gathered, kernels)
    data = np.asarray(edge_basis.scatter @ messages.reshape(num_edges, -1)).reshape(
        edge_basis.num_targets, out_channels, length)

    def grad_fn(grad):
        edge_grad = grad[edge_basis.targets]
        grad_x = grad_w = None
        if features.requires_grad:
            back = np.einsum("eot,eco->ect", edge_grad, kernels)
            grad_x = np.asarray(edge_basis.gather_back @ back.reshape(num_edges, -1)).reshape(
                features.shape)
        if weights.requires_grad:
            per_edge = np.einsum("ect,eot->eco", gathered, edge_grad)
            grad_w = np.asarray(edge_basis.mix @ per_edge.reshape(num_edges, -1)).reshape(
                weights.shape)
        return grad_x, grad_w

    return make_result(data, (features, weights), grad_fn, "spline_aggregate")


def spline_conv(graph, features: Tensor, kernel: SplineKernel, edge_basis: EdgeBasis = None) -> Tensor:
    """ Spatial spline convolution over a GeometryGraph (self-loops included) """
    if features.shape[0] != graph.num_vertices:
        raise ShapeError(
            f"spline_conv: features on {features.shape[0]} nodes, graph has {graph.num_vertices}")
    if edge_basis is None:
        edge_basis = EdgeBasis(graph, kernel.degree, kernel.kernel_size)
    return spline_aggregate(features, kernel.weights, edge_basis)


def bipartite_spline_conv(bgraph, z_b: Tensor, kernel: SplineKernel,
                          edge_basis: EdgeBasis = None) -> Tensor:
    """ z_h(i) = sum over every torso latent vertex j of z_b(j) h(u(i, j)) """
    if z_b.shape[0] != bgraph.num_left:
        raise ShapeError(
            f"bipartite_spline_conv: input on {z_b.shape[0]} nodes, graph has {bgraph.num_left}")
    if edge_basis is None:
        edge_basis = EdgeBasis(bgraph, kernel.degree, kernel.kernel_size)
    return spline_aggregate(z_b, kernel.weights, edge_basis)
