# -*- coding: utf-8 -*-
"""
Geometry bundle: heart and torso hierarchies, the bipartite graph between
their coarsest levels, and the spline bases of every graph
"""
import hashlib

import numpy as np

from src.coarsening import MeshHierarchy, hierarchy_from_config
from src.graph import build_bipartite
from src.mesh import mesh_from_config
from src.spline import EdgeBasis


class GeometryBundle:
    """ Everything geometric the network needs for one heart-torso pair """
    def __init__(self, heart: MeshHierarchy, torso: MeshHierarchy,
                 degree: int = 1, kernel_size=(5, 5, 5)):
        self.heart = heart
        self.torso = torso
        self.degree = degree
        self.kernel_size = tuple(kernel_size)
        self.bipartite = build_bipartite(torso.graphs[-1], heart.graphs[-1])
        self.heart_bases = [EdgeBasis(graph, degree, self.kernel_size) for graph in heart.graphs]
        self.torso_bases = [EdgeBasis(graph, degree, self.kernel_size) for graph in torso.graphs]
        self.bipartite_basis = EdgeBasis(self.bipartite, degree, self.kernel_size)
        self._hash = None

    def __repr__(self):
        return (f"GeometryBundle(heart={self.heart.vertex_counts}, "
                f"torso={self.torso.vertex_counts})")

    @property
    def num_heart(self) -> int:
        return self.heart.meshes[0].num_vertices

    @property
    def num_torso(self) -> int:
        return self.torso.meshes[0].num_vertices

    def rotated(self, axis: str, degrees: float) -> "GeometryBundle":
        """ Heart rotated about its fine-level centroid, torso untouched """
        if degrees == 0:
            return self
        return GeometryBundle(self.heart.rotated(axis, degrees), self.torso,
                              self.degree, self.kernel_size)

    def geometry_hash(self) -> str:
        """ sha256 over coordinates, triangles and pooling maps of every level """
        if self._hash is None:
            digest = hashlib.sha256()
            for hierarchy in (self.heart, self.torso):
                digest.update(str(hierarchy.vertex_counts).encode("utf-8"))
                for mesh in hierarchy.meshes:
                    digest.update(np.ascontiguousarray(mesh.vertices, dtype="<f8").tobytes())
                    digest.update(np.ascontiguousarray(mesh.triangles, dtype="<i8").tobytes())
                for pooling_map in hierarchy.maps:
                    digest.update(np.ascontiguousarray(pooling_map.labels, dtype="<i8").tobytes())
            self._hash = digest.hexdigest()
        return self._hash


def bundle_from_config(geometry: dict, hierarchy: dict, spline: dict) -> GeometryBundle:
    """ `geometry`: {heart, torso} mesh paths, hierarchy folders or procedural
    descriptions; `hierarchy`: {heart, torso} coarsening targets """
    sides = {}
    for side in ("heart", "torso"):
        description = geometry[side]
        source = description if isinstance(description, str) else mesh_from_config(description)
        sides[side] = hierarchy_from_config(source, hierarchy.get(side, []))
    return GeometryBundle(sides["heart"], sides["torso"],
                          degree=spline.get("degree", 1),
                          kernel_size=spline.get("kernel_size", [5, 5, 5]))
