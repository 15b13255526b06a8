# -*- coding: utf-8 -*-
"""
Triangular surface meshes: validation, text I/O, rigid rotations and a few
procedural closed surfaces

Mesh text format
```
V F
x y z        (V lines)
i j k        (F lines, 0-based vertex indices)
```
"""
import numpy as np
from scipy import sparse

from src.errors import MeshError

AXES = {"x": 0, "y": 1, "z": 2}


class TriMesh:
    """ Immutable triangle mesh. Every triangle references three distinct
    vertices in range and every edge borders one or two triangles """
    def __init__(self, vertices, triangles):
        vertices = np.array(vertices, dtype=np.float64)
        triangles = np.array(triangles, dtype=np.int64)
        if triangles.size == 0:
            triangles = triangles.reshape(0, 3)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError(f"Vertices should be a (V, 3) array, got shape {vertices.shape}")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError(f"Triangles should be a (F, 3) array, got shape {triangles.shape}")
        if not np.all(np.isfinite(vertices)):
            raise MeshError("Vertex coordinates must be finite")
        self._check_triangles(triangles, vertices.shape[0])

        vertices.setflags(write=False)
        triangles.setflags(write=False)
        self.vertices = vertices
        self.triangles = triangles
        self._edges = None

    @staticmethod
    def _check_triangles(triangles: np.ndarray, num_vertices: int):
        for index, (i, j, k) in enumerate(triangles):
            if min(i, j, k) < 0 or max(i, j, k) >= num_vertices:
                raise MeshError(
                    f"Triangle index out of range [0, {num_vertices})", element=index)
            if i == j or j == k or i == k:
                raise MeshError("Degenerate triangle (repeated vertex)", element=index)

        counts = {}
        for index, tri in enumerate(triangles):
            for start, end in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (min(start, end), max(start, end))
                counts[key] = counts.get(key, 0) + 1
                if counts[key] > 2:
                    raise MeshError(
                        f"Non-manifold edge {key} borders more than two triangles",
                        element=index)

    def __repr__(self):
        return f"TriMesh(V={self.num_vertices}, E={self.num_edges}, F={self.num_triangles})"

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def edges(self) -> np.ndarray:
        """ Unique undirected edges (i < j), sorted lexicographically """
        if self._edges is None:
            tri = self.triangles
            pairs = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
            pairs = np.sort(pairs, axis=1)
            edges = np.unique(pairs, axis=0) if pairs.size else np.zeros((0, 2), dtype=np.int64)
            edges.setflags(write=False)
            self._edges = edges
        return self._edges

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    def euler(self) -> int:
        """ V - E + F """
        return self.num_vertices - self.num_edges + self.num_triangles

    def adjacency(self) -> sparse.csr_matrix:
        """ Binary symmetric vertex adjacency """
        edges = self.edges
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        data = np.ones(rows.shape[0])
        return sparse.csr_matrix((data, (rows, cols)),
                                 shape=(self.num_vertices, self.num_vertices))

    def edge_triangle_counts(self) -> sparse.csr_matrix:
        """ Entry (i, j) is the number of triangles bordering edge ij """
        tri = self.triangles
        rows = np.column_stack((tri[:, 0], tri[:, 1], tri[:, 1], tri[:, 2], tri[:, 2], tri[:, 0])).ravel()
        cols = np.column_stack((tri[:, 1], tri[:, 0], tri[:, 2], tri[:, 1], tri[:, 0], tri[:, 2])).ravel()
        return sparse.csr_matrix((np.ones(rows.shape[0]), (rows, cols)),
                                 shape=(self.num_vertices, self.num_vertices))

    def is_edge_manifold(self) -> bool:
        counts = self.edge_triangle_counts()
        return counts.nnz == 0 or np.max(counts.data) <= 2

    def is_closed(self) -> bool:
        """ No boundary edge """
        counts = self.edge_triangle_counts()
        return 1 not in counts.data

    def boundary_vertices(self) -> set:
        counts = self.edge_triangle_counts().tocoo()
        return {int(i) for i, value in zip(counts.row, counts.data) if value == 1}

    @property
    def centroid(self) -> np.ndarray:
        """ Mean vertex position """
        return self.vertices.mean(axis=0)

    def with_vertices(self, vertices) -> "TriMesh":
        """ Same connectivity, new coordinates """
        return TriMesh(vertices, self.triangles)

    def scaled(self, factor: float, center=None) -> "TriMesh":
        center = self.centroid if center is None else np.asarray(center, dtype=np.float64)
        return self.with_vertices(center + factor * (self.vertices - center))

    def summary(self) -> dict:
        return dict(vertices=self.num_vertices, edges=self.num_edges,
                    triangles=self.num_triangles, euler=self.euler())


def load_mesh(path: str) -> TriMesh:
    """ Parse the mesh text format, errors carry the offending line number """
    with open(path, "r", encoding="utf-8") as openfile:
        lines = [(number, line.split()) for number, line in enumerate(openfile, start=1)
                 if line.strip()]
    if not lines:
        raise MeshError(f"Empty mesh file {path}", line=1)

    number, header = lines[0]
    try:
        num_vertices, num_triangles = (int(value) for value in header)
    except ValueError as error:
        raise MeshError("Header should be `V F`", line=number) from error
    if num_vertices < 0 or num_triangles < 0:
        raise MeshError("Negative counts in header", line=number)
    if len(lines) - 1 != num_vertices + num_triangles:
        raise MeshError(
            f"Expected {num_vertices} vertex and {num_triangles} triangle lines, "
            f"found {len(lines) - 1} lines", line=lines[-1][0])

    vertices = []
    for number, fields in lines[1:1 + num_vertices]:
        try:
            if len(fields) != 3:
                raise ValueError
            vertices.append([float(value) for value in fields])
        except ValueError as error:
            raise MeshError("Vertex line should be `x y z`", line=number) from error

    triangles = []
    for element, (number, fields) in enumerate(lines[1 + num_vertices:]):
        try:
            if len(fields) != 3:
                raise ValueError
            tri = [int(value) for value in fields]
        except ValueError as error:
            raise MeshError("Triangle line should be `i j k`", line=number,
                            element=element) from error
        if min(tri) < 0 or max(tri) >= num_vertices:
            raise MeshError(f"Triangle index out of range [0, {num_vertices})",
                            line=number, element=element)
        triangles.append(tri)

    try:
        return TriMesh(np.array(vertices).reshape(-1, 3), np.array(triangles).reshape(-1, 3))
    except MeshError as error:
        if error.element is not None:
            raise MeshError(error.base_message, line=lines[1 + num_vertices + error.element][0],
                            element=error.element) from error
        raise


def save_mesh(mesh: TriMesh, path: str):
    """ Coordinates written with `repr`, so loading gives back the same floats """
    with open(path, "w", encoding="utf-8") as openfile:
        openfile.write(f"{mesh.num_vertices} {mesh.num_triangles}\n")
        for x, y, z in mesh.vertices:
            openfile.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")
        for i, j, k in mesh.triangles:
            openfile.write(f"{i} {j} {k}\n")


def rotation_matrix(axis: str, degrees: float) -> np.ndarray:
    if axis not in AXES:
        raise ValueError(f"Rotation axis should be one of {list(AXES)}, got `{axis}`")
    theta = np.deg2rad(degrees)
    cos, sin = np.cos(theta), np.sin(theta)
    first, second = [i for i in range(3) if i != AXES[axis]]
    # x -> (y, z), y -> (z, x), z -> (x, y): right-handed order
    if axis == "y":
        first, second = second, first
    matrix = np.eye(3)
    matrix[first, first], matrix[first, second] = cos, -sin
    matrix[second, first], matrix[second, second] = sin, cos
    return matrix


def rotate_points(points, axis: str, degrees: float, center) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    return (points - center) @ rotation_matrix(axis, degrees).T + center


def rotate_mesh(mesh: TriMesh, axis: str, degrees: float, center=None) -> TriMesh:
    """ Rigid rotation about `axis` through `center` (default: the centroid) """
    center = mesh.centroid if center is None else center
    return mesh.with_vertices(rotate_points(mesh.vertices, axis, degrees, center))


def ellipsoid_mesh(rings: int = 7, segments: int = 14, radii=(1.0, 1.0, 1.0),
                   center=(0.0, 0.0, 0.0)) -> TriMesh:
    """ Latitude/longitude tessellation with pole fans, 2 + rings * segments
    vertices, outward orientation """
    if rings < 1 or segments < 3:
        raise MeshError("Ellipsoid needs rings >= 1 and segments >= 3")
    radii = np.asarray(radii, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)

    theta = np.pi * np.arange(1, rings + 1) / (rings + 1)
    phi = 2 * np.pi * np.arange(segments) / segments
    ring_points = np.stack([
        np.outer(np.sin(theta), np.cos(phi)).ravel(),
        np.outer(np.sin(theta), np.sin(phi)).ravel(),
        np.repeat(np.cos(theta), segments)], axis=1)
    unit = np.concatenate([[[0.0, 0.0, 1.0]], ring_points, [[0.0, 0.0, -1.0]]])
    vertices = center + unit * radii

    def ring_vertex(ring, seg):
        return 1 + ring * segments + seg % segments

    south = 1 + rings * segments
    triangles = []
    for seg in range(segments):
        triangles.append([0, ring_vertex(0, seg), ring_vertex(0, seg + 1)])
    for ring in range(rings - 1):
        for seg in range(segments):
            up, up_next = ring_vertex(ring, seg), ring_vertex(ring, seg + 1)
            low, low_next = ring_vertex(ring + 1, seg), ring_vertex(ring + 1, seg + 1)
            triangles.append([up, low, low_next])
            triangles.append([up, low_next, up_next])
    for seg in range(segments):
        triangles.append([south, ring_vertex(rings - 1, seg + 1), ring_vertex(rings - 1, seg)])
    return TriMesh(vertices, triangles)


def tetrahedron() -> TriMesh:
    vertices = [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]
    triangles = [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]
    return TriMesh(vertices, triangles)


def icosahedron() -> TriMesh:
    golden = (1 + np.sqrt(5)) / 2
    vertices = [[-1, golden, 0], [1, golden, 0], [-1, -golden, 0], [1, -golden, 0],
                [0, -1, golden], [0, 1, golden], [0, -1, -golden], [0, 1, -golden],
                [golden, 0, -1], [golden, 0, 1], [-golden, 0, -1], [-golden, 0, 1]]
    triangles = [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
                 [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
                 [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
                 [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    return TriMesh(vertices, triangles)


def mesh_from_config(description) -> TriMesh:
    """ Either a mesh file path or `{shape: ellipsoid|icosahedron|tetrahedron, ...}` """
    if isinstance(description, str):
        return load_mesh(description)
    shape = description.get("shape")
    if shape == "ellipsoid":
        return ellipsoid_mesh(rings=description.get("rings", 7),
                              segments=description.get("segments", 14),
                              radii=description.get("radii", [1.0, 1.0, 1.0]),
                              center=description.get("center", [0.0, 0.0, 0.0]))
    if shape in ("icosahedron", "tetrahedron"):
        mesh = icosahedron() if shape == "icosahedron" else tetrahedron()
        scale = description.get("scale", 1.0)
        center = np.asarray(description.get("center", [0.0, 0.0, 0.0]), dtype=np.float64)
        return mesh.with_vertices(center + scale * mesh.vertices)
    raise MeshError(f"Unknown procedural shape `{shape}`")
