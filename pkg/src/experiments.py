# -*- coding: utf-8 -*-
"""
Evaluation harness: standard evaluation of a checkpoint, rotation sweeps
(in or out of the training range, about any axis) and transfer of a trained
checkpoint to another heart-torso geometry
"""
from typing import List

import numpy as np
from loguru import logger

from src.dataset import Sample, make_samples
from src.errors import GeometryMismatchError, ShapeError
from src.geometry import GeometryBundle
from src.helpers import parallel_map
from src.metrics import MetricReport, Metrics
from src.network import InverseNetwork
from src.physics import APParams
from src.training import Checkpoint


def check_geometry(checkpoint: Checkpoint, bundle: GeometryBundle):
    if checkpoint.geometry_hash and checkpoint.geometry_hash != bundle.geometry_hash():
        raise GeometryMismatchError(
            f"Checkpoint geometry {checkpoint.geometry_hash[:12]} does not match "
            f"requested geometry {bundle.geometry_hash()[:12]}")


class RotatedBundles:
    """ Rotated copies of one bundle, built once per (axis, degrees) """
    def __init__(self, bundle: GeometryBundle):
        self.bundle = bundle
        self.cache = {}

    def __call__(self, axis: str, degrees: float) -> GeometryBundle:
        if not degrees:
            return self.bundle
        key = (axis, float(degrees))
        if key not in self.cache:
            self.cache[key] = self.bundle.rotated(axis, degrees)
        return self.cache[key]


def _evaluate_task(task: tuple) -> dict:
    model, bundle, sample, metrics = task
    x_hat = model.predict(sample.y, bundle)
    return metrics(x_hat, sample.x, sample.scar_vertices)


def evaluate_model(model: InverseNetwork, bundle: GeometryBundle, samples: List[Sample],
                   metrics: Metrics = None, group_by: str = "degrees", jobs: int = 1) -> MetricReport:
    """ One row per sample, grouped by a Sample attribute """
    metrics = metrics or Metrics()
    bundles = RotatedBundles(bundle)
    tasks = [(model, bundles(sample.axis, sample.degrees), sample, metrics) for sample in samples]
    results = parallel_map(_evaluate_task, tasks, jobs, desc="evaluate")
    report = MetricReport(group_name=group_by)
    for sample, result in zip(samples, results):
        report.add(sample.sample_id, getattr(sample, group_by), result)
    return report


def evaluate(checkpoint: Checkpoint, bundle: GeometryBundle, samples: List[Sample],
             metrics: Metrics = None, jobs: int = 1) -> MetricReport:
    """ Evaluation on the training geometry, refused on a geometry mismatch """
    check_geometry(checkpoint, bundle)
    return evaluate_model(checkpoint.model(), bundle, samples, metrics, jobs=jobs)


def reconstruct(checkpoint: Checkpoint, bundle: GeometryBundle, y: np.ndarray,
                check: bool = True) -> np.ndarray:
    """ Heart signal (V_heart, 1, T) from one torso signal (V_torso, 1, T) """
    if check:
        check_geometry(checkpoint, bundle)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 3 or y.shape[0] != bundle.num_torso:
        raise ShapeError(f"Torso signal of shape {y.shape} does not fit {bundle.num_torso} vertices")
    return checkpoint.model().predict(y, bundle)


def _physics(config: dict) -> tuple:
    return APParams.from_dict(config["physics"]["ap"]), config["physics"]["frames"]


def eval_seed(config: dict) -> int:
    """ `eval.seed` when set, else the dataset seed (degree 0 then reproduces dataset samples) """
    seed = config.get("eval", {}).get("seed")
    return config["seed"] if seed is None else seed


def rotation_sweep(checkpoint: Checkpoint, bundle: GeometryBundle, config: dict, axis: str,
                   degrees: list, metrics: Metrics = None, jobs: int = 1) -> MetricReport:
    """ Fresh samples at every degree (heart rotated, torso fixed), one group per degree """
    check_geometry(checkpoint, bundle)
    if not degrees:
        return MetricReport(group_name="degrees")
    params, frames = _physics(config)
    rotations = [(axis, float(value)) for value in degrees]
    samples, failures = make_samples(bundle, config["data"], params, frames,
                                     eval_seed(config),
                                     rotations=rotations, jobs=jobs)
    if failures:
        logger.warning(f"[Sweep] {len(failures)} simulations failed and are left out")
    logger.info(f"[Sweep] axis {axis}, {len(degrees)} degrees, {len(samples)} samples")
    return evaluate_model(checkpoint.model(), bundle, samples, metrics, jobs=jobs)


def cross_geometry_eval(checkpoint: Checkpoint, new_bundle: GeometryBundle, config: dict,
                        metrics: Metrics = None, jobs: int = 1) -> MetricReport:
    """ Same trained parameters on another geometry, with data simulated on it """
    model = checkpoint.model()
    model.check_geometry(new_bundle)
    params, frames = _physics(config)
    samples, failures = make_samples(new_bundle, config["data"], params, frames,
                                     eval_seed(config),
                                     rotations=[("z", 0.0)], jobs=jobs)
    if failures:
        logger.warning(f"[Cross-geometry] {len(failures)} simulations failed and are left out")
    logger.info(f"[Cross-geometry] heart {new_bundle.heart.vertex_counts}, "
                f"torso {new_bundle.torso.vertex_counts}, {len(samples)} samples")
    return evaluate_model(model, new_bundle, samples, metrics, group_by="scar", jobs=jobs)


def proportional_targets(vertex_counts: List[int], num_vertices: int) -> List[int]:
    """ Coarsening targets keeping the level ratios of a reference hierarchy """
    targets = []
    previous = num_vertices
    for count in vertex_counts[1:]:
        target = max(4, int(round(count / vertex_counts[0] * num_vertices)))
        target = min(target, previous - 1)
        if target < 4:
            raise ShapeError(f"Mesh with {num_vertices} vertices too small for "
                             f"{len(vertex_counts)} levels")
        targets.append(target)
        previous = target
    return targets
