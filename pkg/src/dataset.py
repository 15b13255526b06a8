# -*- coding: utf-8 -*-
"""
Dataset generation and loading

A dataset folder holds one `<sample_id>.X` (heart) and `<sample_id>.Y` (noisy
torso) tensor file per sample, plus `manifest.yaml`:
- `samples`: id, origin, scar id and vertices, rotation, noise seed, split,
  sha256 of both tensor files
- `failures`: (origin, scar) pairs that could not be simulated, with reason

Simulations depend on (origin, scar) only; each rotation reuses them with a
forward operator rebuilt for the rotated heart.
"""
import os
from dataclasses import dataclass, field
from typing import Iterator, List

import numpy as np
import yaml
from loguru import logger
from tqdm import tqdm

from src.autodiff import load_tensor, save_tensor
from src.errors import DatasetError, ShapeError, SimulationError
from src.geometry import GeometryBundle
from src.helpers import derive_seed, file_sha256, format_degrees, make_folder, parallel_map, to_builtin
from src.mesh import TriMesh
from src.physics import (APParams, ScarMap, add_noise, apply_forward, build_forward_operator,
                         make_scar, select_origins, select_scar_seeds, simulate_ap)

MANIFEST_NAME = "manifest.yaml"
HEALTHY = "healthy"
SPLITS = ("train", "val", "test")


@dataclass
class Sample:
    """ One (X, Y) pair with its provenance """
    sample_id: str
    x: np.ndarray
    y: np.ndarray
    origin: int
    scar: str
    axis: str
    degrees: float
    seed: int
    scar_vertices: List[int] = field(default_factory=list)
    split: str = "train"


def sample_id(origin: int, scar: str, axis: str, degrees: float) -> str:
    """ o<origin>_s<scar>_<axis><signed degrees>, e.g. o3_s1_z-2 """
    return f"o{origin}_s{scar}_{axis}{format_degrees(degrees)}"


def plan_sources(heart: TriMesh, data_config: dict) -> tuple:
    """ Origins and named scars (`healthy` first when requested) """
    origins = data_config["origins"]
    if isinstance(origins, int):
        origins = select_origins(heart, origins)
    scars = {}
    if data_config.get("include_healthy", False):
        scars[HEALTHY] = ScarMap.empty(heart.num_vertices)
    seeds = data_config["scars"]
    if isinstance(seeds, int):
        seeds = select_scar_seeds(heart, seeds) if seeds > 0 else []
    for index, seed_vertex in enumerate(seeds):
        scars[str(index)] = make_scar(heart, int(seed_vertex), data_config["scar_radius"])
    return [int(origin) for origin in origins], scars


def plan_rotations(data_config: dict) -> list:
    """ [(axis, degrees), ...] in configuration order """
    return [(group["axis"], float(degrees))
            for group in data_config["rotations"] for degrees in group["degrees"]]


def _simulate_task(task: tuple) -> dict:
    heart, origin, scar_name, scar, params, frames = task
    try:
        signal = simulate_ap(heart, origin, scar, params, frames)
        return dict(origin=origin, scar=scar_name, x=signal)
    except (SimulationError, ValueError) as error:
        return dict(origin=origin, scar=scar_name, error=f"{type(error).__name__}: {error}")


def simulate_sources(heart: TriMesh, origins: list, scars: dict, params: APParams,
                     frames: int, jobs: int = 1) -> tuple:
    """ ({(origin, scar): X}, [failure records]) """
    tasks = [(heart, origin, name, scar, params, frames)
             for origin in origins for name, scar in scars.items()]
    logger.info(f"[Data] {len(tasks)} simulations on {jobs} worker(s)")
    results = parallel_map(_simulate_task, tasks, jobs, desc="simulate")
    signals, failures = {}, []
    for result in results:
        if "error" in result:
            logger.warning(f"[Skipped][o{result['origin']}_s{result['scar']}] {result['error']}")
            failures.append(dict(origin=result["origin"], scar=result["scar"],
                                 reason=result["error"]))
        else:
            signals[(result["origin"], result["scar"])] = result["x"]
    return signals, failures


def project_samples(bundle: GeometryBundle, signals: dict, scars: dict, rotations: list,
                    snr_db: float, seed: int) -> List[Sample]:
    """ Torso measurements of every simulation under every heart rotation """
    samples = []
    heart, torso = bundle.heart.meshes[0], bundle.torso.meshes[0]
    for axis, degrees in rotations:
        rotated = bundle.heart.rotated(axis, degrees).meshes[0] if degrees else heart
        operator = build_forward_operator(rotated, torso)
        for (origin, scar), signal in signals.items():
            name = sample_id(origin, scar, axis, degrees)
            noise_seed = derive_seed(seed, name)
            measured = add_noise(apply_forward(operator, signal), snr_db, noise_seed)
            samples.append(Sample(sample_id=name, x=signal, y=measured, origin=origin, scar=scar,
                                  axis=axis, degrees=degrees, seed=noise_seed,
                                  scar_vertices=sorted(scars[scar].vertices)))
    return samples


def assign_splits(samples: List[Sample], train_fraction: float, val_fraction: float,
                  seed: int) -> List[Sample]:
    """ Per-origin shuffle, first `train_fraction` to train, next
    `val_fraction` to val, rest to test """
    rng = np.random.default_rng(seed)
    by_origin = {}
    for sample in samples:
        by_origin.setdefault(sample.origin, []).append(sample)
    for origin in sorted(by_origin):
        group = sorted(by_origin[origin], key=lambda sample: sample.sample_id)
        order = rng.permutation(len(group))
        num_train = int(round(train_fraction * len(group)))
        num_val = int(round(val_fraction * len(group)))
        for rank, index in enumerate(order):
            if rank < num_train:
                group[index].split = "train"
            elif rank < num_train + num_val:
                group[index].split = "val"
            else:
                group[index].split = "test"
    return samples


def make_samples(bundle: GeometryBundle, data_config: dict, params: APParams,
                 frames: int, seed: int, rotations: list = None, jobs: int = 1) -> tuple:
    """ In-memory generation, returns (samples, failures) """
    origins, scars = plan_sources(bundle.heart.meshes[0], data_config)
    rotations = plan_rotations(data_config) if rotations is None else rotations
    signals, failures = simulate_sources(bundle.heart.meshes[0], origins, scars, params,
                                         frames, jobs)
    samples = project_samples(bundle, signals, scars, rotations,
                              data_config.get("snr_db", 20.0), seed)
    return samples, failures


def generate_dataset(bundle: GeometryBundle, config: dict, folder: str, jobs: int = 1) -> dict:
    """ Simulate, project, add noise and persist; returns the manifest """
    data_config = config["data"]
    params = APParams.from_dict(config["physics"]["ap"])
    frames = config["physics"]["frames"]
    seed = config["seed"]
    make_folder(folder)

    samples, failures = make_samples(bundle, data_config, params, frames, seed, jobs=jobs)
    failures = [dict(failure, axis=axis, degrees=degrees)
                for failure in failures for axis, degrees in plan_rotations(data_config)]
    assign_splits(samples, data_config.get("train_fraction", 0.8),
                  data_config.get("val_fraction", 0.0), seed)

    records = []
    for sample in tqdm(samples, desc="persist", leave=False):
        checksums = {}
        for key, array in (("X", sample.x), ("Y", sample.y)):
            path = os.path.join(folder, f"{sample.sample_id}.{key}")
            save_tensor(path, array)
            checksums[key] = file_sha256(path)
        records.append(dict(id=sample.sample_id, origin=sample.origin, scar=sample.scar,
                            scar_vertices=sample.scar_vertices, axis=sample.axis,
                            degrees=sample.degrees, seed=sample.seed, split=sample.split,
                            sha256=checksums))

    manifest = dict(
        name_exp=config.get("name_exp", ""), seed=seed, geometry=config["geometry"],
        hierarchy=config["hierarchy"], geometry_hash=bundle.geometry_hash(),
        heart_vertices=bundle.num_heart, torso_vertices=bundle.num_torso,
        frames=frames, snr_db=data_config.get("snr_db", 20.0),
        physics=params.to_dict(), samples=records, failures=failures)
    with open(os.path.join(folder, MANIFEST_NAME), "w", encoding="utf-8") as openfile:
        yaml.dump(to_builtin(manifest), openfile, sort_keys=False)
    logger.success(f"[Data] {len(records)} samples, {len(failures)} failures in {folder}")
    return manifest


def read_manifest(folder: str) -> dict:
    path = os.path.join(folder, MANIFEST_NAME)
    if not os.path.exists(path):
        raise DatasetError(f"No manifest in {folder}")
    with open(path, encoding="utf-8") as openfile:
        manifest = yaml.load(openfile, Loader=yaml.FullLoader)
    identifiers = [record["id"] for record in manifest.get("samples", [])]
    if len(identifiers) != len(set(identifiers)):
        raise DatasetError("Duplicate sample ids in manifest")
    return manifest


def load_samples(folder: str, split: str = None, shuffle_seed: int = None,
                 verify: bool = True) -> Iterator[Sample]:
    """ Samples of `split` (all when None), in manifest order or shuffled
    deterministically by `shuffle_seed` """
    if split is not None and split not in SPLITS:
        raise DatasetError(f"Unknown split `{split}`, expected one of {SPLITS}")
    manifest = read_manifest(folder)
    records = [record for record in manifest["samples"]
               if split is None or record["split"] == split]
    if shuffle_seed is not None:
        records = [records[index] for index in np.random.default_rng(shuffle_seed).permutation(len(records))]
    expected = {"X": (manifest["heart_vertices"], 1, manifest["frames"]),
                "Y": (manifest["torso_vertices"], 1, manifest["frames"])}

    for record in records:
        arrays = {}
        for key in ("X", "Y"):
            path = os.path.join(folder, f"{record['id']}.{key}")
            if verify and file_sha256(path) != record["sha256"][key]:
                raise DatasetError(f"Checksum mismatch for {path}")
            arrays[key] = load_tensor(path)
            if arrays[key].shape != tuple(expected[key]):
                raise ShapeError(f"{path} has shape {arrays[key].shape}, expected {expected[key]}")
            if not np.all(np.isfinite(arrays[key])):
                raise DatasetError(f"Non-finite values in {path}")
        yield Sample(sample_id=record["id"], x=arrays["X"], y=arrays["Y"], origin=record["origin"],
                     scar=str(record["scar"]), axis=record["axis"], degrees=record["degrees"],
                     seed=record["seed"], scar_vertices=list(record.get("scar_vertices", [])),
                     split=record["split"])
