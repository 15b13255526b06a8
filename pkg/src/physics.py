# -*- coding: utf-8 -*-
"""
Synthetic ground truth: Aliev-Panfilov excitation on the heart mesh, the
inverse-distance forward operator to the torso, and measurement noise

Reaction-diffusion on the combinatorial graph Laplacian L = D - A:
    du/dt = -diffusion L u + k u (1 - u) (u - a) - u v
    dv/dt = (e0 + mu1 v / (u + mu2)) (-v - k u (u - a - 1))
integrated with explicit Euler, `substeps` steps of `dt` per saved frame.
"""
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Optional

import networkx as nx
import numpy as np
from scipy import sparse

from src.errors import MeshError, ShapeError, SimulationError
from src.mesh import TriMesh

MAX_STEP_CHANGE = 0.5


@dataclass(frozen=True)
class APParams:
    """ Aliev-Panfilov constants and integration settings """
    k: float = 8.0
    a: float = 0.15
    e0: float = 0.002
    mu1: float = 0.2
    mu2: float = 0.3
    diffusion: float = 1.0
    dt: float = 0.02
    substeps: int = 50

    def __post_init__(self):
        if self.dt <= 0 or self.substeps < 1 or self.diffusion < 0:
            raise ValueError(f"Invalid integration settings dt={self.dt}, "
                             f"substeps={self.substeps}, diffusion={self.diffusion}")

    @classmethod
    def from_dict(cls, config: dict) -> "APParams":
        known = {field.name for field in fields(cls)}
        unknown = set(config) - known
        if unknown:
            raise ValueError(f"Unknown AP parameters {sorted(unknown)}")
        return cls(**config)

    def to_dict(self) -> dict:
        return asdict(self)


class ScarMap:
    """ Connected set of non-excitable heart vertices (possibly empty) """
    def __init__(self, vertices: Iterable[int], num_vertices: int):
        self.vertices = frozenset(int(vertex) for vertex in vertices)
        self.num_vertices = num_vertices
        if any(not 0 <= vertex < num_vertices for vertex in self.vertices):
            raise MeshError(f"Scar vertex out of range [0, {num_vertices})")

    def __len__(self):
        return len(self.vertices)

    def __contains__(self, vertex):
        return vertex in self.vertices

    def __repr__(self):
        return f"ScarMap(size={len(self.vertices)})"

    @property
    def mask(self) -> np.ndarray:
        mask = np.zeros(self.num_vertices, dtype=bool)
        mask[sorted(self.vertices)] = True
        return mask

    @classmethod
    def empty(cls, num_vertices: int) -> "ScarMap":
        return cls([], num_vertices)


def mesh_to_networkx(mesh: TriMesh) -> nx.Graph:
    """ Vertices and edges weighted by Euclidean length """
    graph = nx.Graph()
    graph.add_nodes_from(range(mesh.num_vertices))
    lengths = np.linalg.norm(mesh.vertices[mesh.edges[:, 0]] - mesh.vertices[mesh.edges[:, 1]], axis=1)
    graph.add_weighted_edges_from(
        (int(i), int(j), float(length)) for (i, j), length in zip(mesh.edges, lengths))
    return graph


def make_scar(mesh: TriMesh, seed_vertex: int, radius: float) -> ScarMap:
    """ Geodesic ball (shortest paths along edges) around `seed_vertex` """
    if not 0 <= seed_vertex < mesh.num_vertices:
        raise MeshError(f"Scar seed {seed_vertex} out of range [0, {mesh.num_vertices})")
    distances = nx.single_source_dijkstra_path_length(
        mesh_to_networkx(mesh), seed_vertex, cutoff=radius, weight="weight")
    return ScarMap(distances.keys(), mesh.num_vertices)


def is_connected_scar(mesh: TriMesh, scar: ScarMap) -> bool:
    if len(scar) <= 1:
        return True
    return nx.is_connected(mesh_to_networkx(mesh).subgraph(scar.vertices))


def select_origins(mesh: TriMesh, count: int, start: int = 0) -> list:
    """ Farthest-point sampling of `count` vertices, Euclidean distances """
    if not 0 < count <= mesh.num_vertices:
        raise ValueError(f"Cannot pick {count} vertices out of {mesh.num_vertices}")
    chosen = [start]
    distances = np.linalg.norm(mesh.vertices - mesh.vertices[start], axis=1)
    while len(chosen) < count:
        candidate = int(np.argmax(distances))
        chosen.append(candidate)
        distances = np.minimum(
            distances, np.linalg.norm(mesh.vertices - mesh.vertices[candidate], axis=1))
    return chosen


def select_scar_seeds(mesh: TriMesh, count: int) -> list:
    """ Farthest-point sampling started away from the origin sampling """
    start = int(np.argmax(np.linalg.norm(mesh.vertices - mesh.vertices[0], axis=1)))
    return select_origins(mesh, count, start=start)


def graph_laplacian(num_vertices: int, edges) -> sparse.csr_matrix:
    """ L = D - A over undirected edges """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    adjacency = sparse.csr_matrix((np.ones(rows.shape[0]), (rows, cols)),
                                  shape=(num_vertices, num_vertices))
    adjacency.data[:] = 1.0
    degree = sparse.diags(np.asarray(adjacency.sum(axis=1)).ravel())
    return (degree - adjacency).tocsr()


def mesh_laplacian(mesh: TriMesh) -> sparse.csr_matrix:
    return graph_laplacian(mesh.num_vertices, mesh.edges)


class AlievPanfilov:
    """ Explicit Euler integrator over a fixed graph Laplacian """
    def __init__(self, laplacian, params: APParams = APParams()):
        self.laplacian = sparse.csr_matrix(laplacian)
        self.params = params

    def derivatives(self, u: np.ndarray, v: np.ndarray) -> tuple:
        p = self.params
        du = -p.diffusion * (self.laplacian @ u) + p.k * u * (1 - u) * (u - p.a) - u * v
        dv = (p.e0 + p.mu1 * v / (u + p.mu2)) * (-v - p.k * u * (u - p.a - 1))
        return du, dv

    def run(self, u0: np.ndarray, frames: int, clamped: Optional[np.ndarray] = None) -> np.ndarray:
        """ (frames, V) transmembrane variable, frame 0 is `u0` """
        p = self.params
        u = np.array(u0, dtype=np.float64)
        v = np.zeros_like(u)
        if clamped is not None:
            u[clamped] = 0.0
        out = np.zeros((frames, u.shape[0]))
        if frames > 0:
            out[0] = u
        for frame in range(1, frames):
            for _ in range(p.substeps):
                du, dv = self.derivatives(u, v)
                step = p.dt * du
                if not (np.all(np.isfinite(step)) and np.all(np.isfinite(dv))):
                    raise SimulationError(f"Non-finite state at frame {frame}", p.to_dict())
                if np.max(np.abs(step)) >= MAX_STEP_CHANGE:
                    raise SimulationError(
                        f"Unstable step (|du| = {np.max(np.abs(step)):.3f}) at frame {frame}",
                        p.to_dict())
                u = u + step
                v = v + p.dt * dv
                if clamped is not None:
                    u[clamped] = 0.0
                    v[clamped] = 0.0
            out[frame] = u
        return out


def simulate_ap(mesh: TriMesh, origin: Optional[int], scar: Optional[ScarMap] = None,
                params: APParams = APParams(), frames: int = 60) -> np.ndarray:
    """ (V, 1, frames) normalised potential, u = 1 at `origin` at t = 0.
    `origin=None` leaves the tissue at rest """
    scar = scar or ScarMap.empty(mesh.num_vertices)
    return simulate_on_laplacian(mesh_laplacian(mesh), origin, scar.mask, params, frames)


def simulate_on_laplacian(laplacian, origin: Optional[int], scar_mask: np.ndarray,
                          params: APParams = APParams(), frames: int = 60) -> np.ndarray:
    """ Same as `simulate_ap`, for any graph given by its Laplacian """
    num_vertices = laplacian.shape[0]
    u0 = np.zeros(num_vertices)
    if origin is not None:
        if not 0 <= origin < num_vertices:
            raise MeshError(f"Origin {origin} out of range [0, {num_vertices})")
        if scar_mask[origin]:
            raise ValueError(f"Origin {origin} lies inside the scar")
        u0[origin] = 1.0
    trace = AlievPanfilov(laplacian, params).run(u0, frames, clamped=scar_mask)
    return trace.T[:, None, :]


def single_cell_ap(params: APParams = APParams(), frames: int = 60, u0: float = 1.0) -> np.ndarray:
    """ Isolated cell trace, shape (frames,) """
    return AlievPanfilov(sparse.csr_matrix((1, 1)), params).run(np.array([u0]), frames)[:, 0]


def build_forward_operator(heart: TriMesh, torso: TriMesh) -> np.ndarray:
    """ H_ij = (1 / r_ij) / sum_k (1 / r_ik), torso i, heart j """
    offsets = torso.vertices[:, None, :] - heart.vertices[None, :, :]
    distances = np.linalg.norm(offsets, axis=2)
    if np.any(distances == 0):
        torso_vertex, heart_vertex = np.argwhere(distances == 0)[0]
        raise MeshError(f"Torso vertex {torso_vertex} coincides with heart vertex {heart_vertex}")
    inverse = 1.0 / distances
    return inverse / inverse.sum(axis=1, keepdims=True)


def apply_forward(operator: np.ndarray, signal: np.ndarray) -> np.ndarray:
    """ Y_t = H X_t for every frame; signal is (V_heart, channels, T) """
    operator = np.asarray(operator, dtype=np.float64)
    signal = np.asarray(signal, dtype=np.float64)
    if operator.ndim != 2 or signal.ndim != 3 or operator.shape[1] != signal.shape[0]:
        raise ShapeError(f"Forward operator {operator.shape} cannot act on signal {signal.shape}")
    return np.tensordot(operator, signal, axes=(1, 0))


def add_noise(signal: np.ndarray, snr_db: float = 20.0, seed: int = 0) -> np.ndarray:
    """ White Gaussian noise with power = signal power / 10^(snr_db / 10);
    signal power is the mean square over the whole block """
    signal = np.asarray(signal, dtype=np.float64)
    if np.isinf(snr_db) and snr_db > 0:
        return signal.copy()
    power = float(np.mean(signal ** 2))
    if power == 0.0:
        raise ValueError("Cannot add noise at a given SNR to a zero-power signal")
    sigma = np.sqrt(power / 10 ** (snr_db / 10))
    rng = np.random.default_rng(seed)
    return signal + sigma * rng.standard_normal(signal.shape)
