# -*- coding: utf-8 -*-
"""
Graphs with geometric edge attributes

The attribute of the directed edge (i, j) (message from j into i) is the unit
offset (c_i - c_j) / |c_i - c_j| rescaled per coordinate from [-1, 1] to
[0, 1]. Self-loops and coincident points get (0.5, 0.5, 0.5).
"""
import numpy as np

from src.errors import ShapeError
from src.mesh import TriMesh


def edge_attributes(targets, sources) -> np.ndarray:
    """ Row-wise attribute of pairs (c_i, c_j), arrays of shape (E, 3) """
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    sources = np.atleast_2d(np.asarray(sources, dtype=np.float64))
    offsets = targets - sources
    distances = np.linalg.norm(offsets, axis=1, keepdims=True)
    unit = np.divide(offsets, distances, out=np.zeros_like(offsets), where=distances > 0)
    return (unit + 1.0) / 2.0


def edge_attribute(ci, cj) -> np.ndarray:
    """ 3-vector in [0, 1]^3 """
    return edge_attributes(ci, cj)[0]


class GeometryGraph:
    """ Directed graph over mesh vertices: both directions of every mesh edge
    plus one self-loop per vertex, ordered by (target, source) """
    def __init__(self, coords, sources, targets):
        coords = np.array(coords, dtype=np.float64)
        sources = np.asarray(sources, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.int64)
        order = np.lexsort((sources, targets))
        self.coords = coords
        self.num_vertices = coords.shape[0]
        self.sources = sources[order]
        self.targets = targets[order]
        self.attrs = edge_attributes(coords[self.targets], coords[self.sources])
        for array in (self.coords, self.sources, self.targets, self.attrs):
            array.setflags(write=False)

    def __repr__(self):
        return f"GeometryGraph(V={self.num_vertices}, directed_edges={self.num_edges})"

    @property
    def num_edges(self) -> int:
        return self.sources.shape[0]

    @property
    def num_targets(self) -> int:
        return self.num_vertices


def build_graph(mesh: TriMesh) -> GeometryGraph:
    edges = mesh.edges
    loops = np.arange(mesh.num_vertices)
    sources = np.concatenate([edges[:, 0], edges[:, 1], loops])
    targets = np.concatenate([edges[:, 1], edges[:, 0], loops])
    return GeometryGraph(mesh.vertices, sources, targets)


class BipartiteGraph:
    """ Complete directed bipartite graph, every torso (left) vertex into
    every heart (right) vertex """
    def __init__(self, left_coords, right_coords):
        left_coords = np.array(left_coords, dtype=np.float64)
        right_coords = np.array(right_coords, dtype=np.float64)
        if left_coords.shape[0] == 0 or right_coords.shape[0] == 0:
            raise ShapeError("Bipartite graph needs nonempty vertex sets on both sides")
        self.num_left = left_coords.shape[0]
        self.num_right = right_coords.shape[0]
        self.left_coords = left_coords
        self.right_coords = right_coords
        # edge e = i * num_left + j goes from left j into right i
        self.targets = np.repeat(np.arange(self.num_right), self.num_left)
        self.sources = np.tile(np.arange(self.num_left), self.num_right)
        self.attrs = edge_attributes(right_coords[self.targets], left_coords[self.sources])

    def __repr__(self):
        return f"BipartiteGraph(left={self.num_left}, right={self.num_right})"

    @property
    def num_edges(self) -> int:
        return self.sources.shape[0]

    @property
    def num_vertices(self) -> int:
        """ Source side size, what input features are indexed by """
        return self.num_left

    @property
    def num_targets(self) -> int:
        return self.num_right


def build_bipartite(torso_latent: GeometryGraph, heart_latent: GeometryGraph) -> BipartiteGraph:
    return BipartiteGraph(torso_latent.coords, heart_latent.coords)
