# -*- coding: utf-8 -*-
"""
Topology-preserving coarsening by shortest-edge collapse, pooling maps between
consecutive levels, and mesh hierarchies (build, rotate, save, load)

An edge ab is collapsed only if it passes the link condition:
- the common neighbours of a and b are exactly the apexes of the two
  triangles on ab
- no link edge of a is also a link edge of b
Boundary vertices are never moved, so open meshes keep their border.
"""
import os
from typing import List, Union

import numpy as np
import pandas as pd
import yaml
from loguru import logger

from src.autodiff import Tensor, node_matmul, read_tensor_block, write_tensor_block
from src.errors import MeshError, ShapeError, TopologyError
from src.graph import GeometryGraph, build_graph
from src.mesh import TriMesh, load_mesh, rotate_points, save_mesh


class PoolingMap:
    """ Binary fine x coarse assignment, one 1 per row and at least one per column """
    def __init__(self, assignment):
        assignment = np.array(assignment, dtype=np.float64)
        if assignment.ndim != 2:
            raise ShapeError(f"Assignment should be a matrix, got shape {assignment.shape}")
        if not np.all((assignment == 0) | (assignment == 1)):
            raise ValueError("Assignment entries should be 0 or 1")
        if not np.all(assignment.sum(axis=1) == 1):
            raise ValueError("Each fine vertex should belong to exactly one coarse vertex")
        sizes = assignment.sum(axis=0)
        if not np.all(sizes >= 1):
            raise ValueError("Empty cluster in pooling map")
        self.assignment = assignment
        self.normalized_transpose = (assignment / sizes).T
        self.assignment.setflags(write=False)
        self.normalized_transpose.setflags(write=False)

    def __repr__(self):
        return f"PoolingMap(fine={self.num_fine}, coarse={self.num_coarse})"

    @property
    def num_fine(self) -> int:
        return self.assignment.shape[0]

    @property
    def num_coarse(self) -> int:
        return self.assignment.shape[1]

    @property
    def labels(self) -> np.ndarray:
        """ Coarse vertex of each fine vertex """
        return np.argmax(self.assignment, axis=1)

    @classmethod
    def from_labels(cls, labels, num_coarse: int) -> "PoolingMap":
        labels = np.asarray(labels, dtype=np.int64)
        assignment = np.zeros((labels.shape[0], num_coarse))
        assignment[np.arange(labels.shape[0]), labels] = 1.0
        return cls(assignment)

    @classmethod
    def identity(cls, size: int) -> "PoolingMap":
        return cls(np.eye(size))


def pool(features: Tensor, pooling_map: PoolingMap) -> Tensor:
    """ Per-cluster mean """
    if features.shape[0] != pooling_map.num_fine:
        raise ShapeError(
            f"pool: features on {features.shape[0]} nodes, map expects {pooling_map.num_fine}")
    return node_matmul(pooling_map.normalized_transpose, features)


def unpool(features: Tensor, pooling_map: PoolingMap) -> Tensor:
    """ Copy each cluster value back to its fine vertices """
    if features.shape[0] != pooling_map.num_coarse:
        raise ShapeError(
            f"unpool: features on {features.shape[0]} nodes, map expects {pooling_map.num_coarse}")
    return node_matmul(pooling_map.assignment, features)


class EdgeCollapser:
    """ Mutable working copy of a mesh during coarsening """
    def __init__(self, mesh: TriMesh):
        self.positions = np.array(mesh.vertices, dtype=np.float64)
        self.faces = {index: list(map(int, tri)) for index, tri in enumerate(mesh.triangles)}
        self.vertex_faces = [set() for _ in range(mesh.num_vertices)]
        for index, tri in self.faces.items():
            for vertex in tri:
                self.vertex_faces[vertex].add(index)
        self.alive = set(range(mesh.num_vertices))
        self.members = {vertex: [vertex] for vertex in range(mesh.num_vertices)}
        self.frozen = mesh.boundary_vertices()

    def current_edges(self) -> list:
        """ (length, a, b) for every live edge, shortest first """
        pairs = set()
        for tri in self.faces.values():
            for start, end in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                pairs.add((min(start, end), max(start, end)))
        pairs = sorted(pairs)
        if not pairs:
            return []
        pairs = np.array(pairs)
        lengths = np.linalg.norm(self.positions[pairs[:, 0]] - self.positions[pairs[:, 1]], axis=1)
        order = np.lexsort((pairs[:, 1], pairs[:, 0], lengths))
        return [(lengths[i], int(pairs[i, 0]), int(pairs[i, 1])) for i in order]

    def _neighbours(self, vertex: int) -> set:
        return {v for face in self.vertex_faces[vertex] for v in self.faces[face]} - {vertex}

    def is_collapsible(self, vertex_a: int, vertex_b: int) -> bool:
        if vertex_a in self.frozen or vertex_b in self.frozen:
            return False
        shared = self.vertex_faces[vertex_a] & self.vertex_faces[vertex_b]
        if len(shared) != 2:
            return False
        apexes = {v for face in shared for v in self.faces[face]} - {vertex_a, vertex_b}
        if self._neighbours(vertex_a) & self._neighbours(vertex_b) != apexes:
            return False
        link_a = {frozenset(set(self.faces[face]) - {vertex_a})
                  for face in self.vertex_faces[vertex_a] - shared}
        link_b = {frozenset(set(self.faces[face]) - {vertex_b})
                  for face in self.vertex_faces[vertex_b] - shared}
        return not link_a & link_b

    def collapse(self, vertex_a: int, vertex_b: int):
        """ Merge b into a, a moves to the edge midpoint """
        shared = self.vertex_faces[vertex_a] & self.vertex_faces[vertex_b]
        for face in shared:
            for vertex in self.faces[face]:
                self.vertex_faces[vertex].discard(face)
            del self.faces[face]
        for face in self.vertex_faces[vertex_b]:
            self.faces[face] = [vertex_a if v == vertex_b else v for v in self.faces[face]]
            self.vertex_faces[vertex_a].add(face)
        self.vertex_faces[vertex_b] = set()
        self.positions[vertex_a] = (self.positions[vertex_a] + self.positions[vertex_b]) / 2
        self.members[vertex_a].extend(self.members.pop(vertex_b))
        self.alive.discard(vertex_b)

    def step(self) -> bool:
        """ Collapse the shortest admissible edge, False if none is left """
        for _, vertex_a, vertex_b in self.current_edges():
            if self.is_collapsible(vertex_a, vertex_b):
                self.collapse(vertex_a, vertex_b)
                return True
        return False

    def result(self, num_fine: int):
        """ Compactly relabelled coarse mesh and its pooling map """
        kept = sorted(self.alive)
        relabel = {old: new for new, old in enumerate(kept)}
        triangles = [[relabel[v] for v in self.faces[face]] for face in sorted(self.faces)]
        labels = np.zeros(num_fine, dtype=np.int64)
        for representative, members in self.members.items():
            labels[members] = relabel[representative]
        coarse = TriMesh(self.positions[kept], np.array(triangles).reshape(-1, 3))
        return coarse, PoolingMap.from_labels(labels, len(kept))


def coarsen(mesh: TriMesh, target_vertex_count: int) -> tuple:
    """ Collapse shortest admissible edges until `target_vertex_count` vertices
    remain. Returns (coarse mesh, pooling map)

    Raises TopologyError, with the vertex count reached as `achieved`, when no
    admissible collapse is left first. Nothing partial is returned then.
    """
    if not 4 <= target_vertex_count < mesh.num_vertices:
        raise MeshError(
            f"Coarsening target should be in [4, {mesh.num_vertices}), got {target_vertex_count}")
    collapser = EdgeCollapser(mesh)
    while len(collapser.alive) > target_vertex_count:
        if not collapser.step():
            raise TopologyError(
                f"No topology-preserving collapse left before reaching {target_vertex_count}",
                achieved=len(collapser.alive))
    coarse, pooling_map = collapser.result(mesh.num_vertices)
    if coarse.euler() != mesh.euler():
        raise TopologyError("Euler characteristic changed during coarsening",
                            achieved=coarse.num_vertices)
    return coarse, pooling_map


class MeshHierarchy:
    """ Levels from fine (0) to coarse, with one pooling map per transition """
    def __init__(self, meshes: List[TriMesh], maps: List[PoolingMap]):
        if not meshes:
            raise ValueError("A hierarchy needs at least one level")
        if len(maps) != len(meshes) - 1:
            raise ValueError(f"{len(meshes)} levels need {len(meshes) - 1} pooling maps")
        for level, pooling_map in enumerate(maps):
            fine, coarse = meshes[level], meshes[level + 1]
            if coarse.num_vertices >= fine.num_vertices:
                raise ValueError("Vertex counts must strictly decrease across levels")
            if (pooling_map.num_fine, pooling_map.num_coarse) != \
                    (fine.num_vertices, coarse.num_vertices):
                raise ShapeError(f"Pooling map {level} does not match levels {level}/{level + 1}")
            if coarse.euler() != fine.euler():
                raise TopologyError(f"Euler characteristic differs at level {level + 1}",
                                    achieved=coarse.num_vertices)
        self.meshes = list(meshes)
        self.maps = list(maps)
        self.graphs = [build_graph(mesh) for mesh in meshes]

    def __len__(self):
        return len(self.meshes)

    def __repr__(self):
        return f"MeshHierarchy(vertices={self.vertex_counts})"

    @property
    def levels(self) -> list:
        return list(zip(self.meshes, self.graphs))

    @property
    def vertex_counts(self) -> list:
        return [mesh.num_vertices for mesh in self.meshes]

    def graph(self, level: int) -> GeometryGraph:
        return self.graphs[level]

    def rotated(self, axis: str, degrees: float, center=None) -> "MeshHierarchy":
        """ Every level rotated about one common centre, maps reused """
        center = self.meshes[0].centroid if center is None else center
        meshes = [mesh.with_vertices(rotate_points(mesh.vertices, axis, degrees, center))
                  for mesh in self.meshes]
        return MeshHierarchy(meshes, self.maps)

    def scaled(self, factor: float, center=None) -> "MeshHierarchy":
        center = self.meshes[0].centroid if center is None else center
        return MeshHierarchy([mesh.scaled(factor, center) for mesh in self.meshes], self.maps)

    def summary(self) -> pd.DataFrame:
        """ One row per level: vertices, edges, triangles, euler """
        rows = [dict(level=level, **mesh.summary()) for level, mesh in enumerate(self.meshes)]
        return pd.DataFrame(rows, columns=["level", "vertices", "edges", "triangles", "euler"])


def build_hierarchy(mesh: TriMesh, targets: List[int]) -> MeshHierarchy:
    """ Repeated coarsening, `targets` strictly decreasing. A TopologyError at
    any level aborts the whole build """
    targets = [int(target) for target in targets]
    if any(later >= earlier for earlier, later in zip(targets, targets[1:])):
        raise ValueError(f"Hierarchy targets must strictly decrease, got {targets}")
    meshes, maps = [mesh], []
    for target in targets:
        coarse, pooling_map = coarsen(meshes[-1], target)
        logger.debug(f"[Coarsen] {meshes[-1].num_vertices} -> {coarse.num_vertices} vertices")
        meshes.append(coarse)
        maps.append(pooling_map)
    return MeshHierarchy(meshes, maps)


def save_hierarchy(hierarchy: MeshHierarchy, folder: str):
    """ `level_<k>.mesh`, `map_<k>.bin` and an index `hierarchy.yaml` """
    if not os.path.exists(folder):
        os.makedirs(folder)
    for level, mesh in enumerate(hierarchy.meshes):
        save_mesh(mesh, os.path.join(folder, f"level_{level}.mesh"))
    for level, pooling_map in enumerate(hierarchy.maps):
        with open(os.path.join(folder, f"map_{level}.bin"), "wb") as openfile:
            write_tensor_block(openfile, pooling_map.assignment)
    index = {"levels": [dict(level=level, **mesh.summary())
                        for level, mesh in enumerate(hierarchy.meshes)]}
    with open(os.path.join(folder, "hierarchy.yaml"), "w", encoding="utf-8") as openfile:
        yaml.dump(index, openfile, sort_keys=False)


def load_hierarchy(folder: str) -> MeshHierarchy:
    with open(os.path.join(folder, "hierarchy.yaml"), encoding="utf-8") as openfile:
        index = yaml.load(openfile, Loader=yaml.FullLoader)
    num_levels = len(index["levels"])
    meshes = [load_mesh(os.path.join(folder, f"level_{level}.mesh")) for level in range(num_levels)]
    maps = []
    for level in range(num_levels - 1):
        with open(os.path.join(folder, f"map_{level}.bin"), "rb") as openfile:
            maps.append(PoolingMap(read_tensor_block(openfile)))
    return MeshHierarchy(meshes, maps)


def hierarchy_from_config(mesh: Union[TriMesh, str], targets: List[int]) -> MeshHierarchy:
    """ A saved hierarchy folder or a mesh to coarsen """
    if isinstance(mesh, str) and os.path.isdir(mesh):
        return load_hierarchy(mesh)
    if isinstance(mesh, str):
        mesh = load_mesh(mesh)
    return build_hierarchy(mesh, targets)
