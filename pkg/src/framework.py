# -*- coding: utf-8 -*-
"""
Main class to run the workflows from a config

A run config is a YAML file, cf. `configs-example/`. It is checked (unknown
keys rejected), completed with `DEFAULT_CONFIG`, its relative paths resolved
against the config file's folder, and echoed to `<output_dir>/config.yaml`.

Output folder layout
- `config.yaml`                  resolved config
- `dataset/`                     tensors + manifest (gen-data)
- `train/`                       last.ckpt, best.ckpt, history.csv, history.html
- `eval/`                        report.csv, report_summary.csv, report.json
- `sweep/`                       sweep_<axis>.{csv,json,html}, sweep_<axis>_summary.csv
- `cross_geometry/`              report.*
- `gradcheck.csv`
"""
import os
from copy import deepcopy
from dataclasses import fields
from typing import List, Optional

import numpy as np
import pandas as pd
import yaml
from loguru import logger

from doc.check_config_framework import CONFIG_TYPE_ERROR_MESSAGES \
    as config_error_messages
from src.autodiff import load_tensor, save_tensor
from src.coarsening import MeshHierarchy, build_hierarchy, hierarchy_from_config, save_hierarchy
from src.dataset import generate_dataset, load_samples, read_manifest
from src.errors import ConfigError, DatasetError, GeometryMismatchError, ShapeError
from src.experiments import (cross_geometry_eval, evaluate, proportional_targets,
                             reconstruct, rotation_sweep)
from src.geometry import GeometryBundle, bundle_from_config
from src.gradcheck import MODEL_ENTRIES, gradcheck_suite
from src.helpers import make_folder, to_builtin
from src.mesh import AXES, mesh_from_config
from src.metrics import Metrics, cc_metric
from src.network import DEFAULT_MODEL, InverseNetwork, parameter_shapes, time_lengths
from src.physics import APParams
from src.plotter import Plotter
from src.training import DEFAULT_TRAIN, Checkpoint, Trainer

DEFAULT_CONFIG = {
    "name_exp": "inverse",
    "seed": 0,
    "output_dir": "out",
    "jobs": 1,
    "geometry": {
        "heart": {"shape": "ellipsoid", "rings": 7, "segments": 14, "radii": [1.0, 1.0, 1.3]},
        "torso": {"shape": "ellipsoid", "rings": 9, "segments": 16, "radii": [3.0, 2.5, 4.0]},
    },
    "hierarchy": {"heart": [60, 36, 22, 13], "torso": [80, 40, 20]},
    "model": DEFAULT_MODEL,
    "physics": {"ap": APParams().to_dict(), "frames": 60},
    "data": {
        "origins": 4,
        "scars": 1,
        "scar_radius": 0.35,
        "include_healthy": True,
        "rotations": [{"axis": "z", "degrees": [-2, -1, 0, 1, 2]}],
        "snr_db": 20.0,
        "train_fraction": 0.8,
        "val_fraction": 0.0,
    },
    "train": DEFAULT_TRAIN,
    "eval": {
        "type_metrics": ["mse", "cc", "dice"],
        "duration_threshold": None,
        "seed": None,
        "sweep": {"axis": "z", "degrees": list(range(-6, 7))},
        "cross_geometry": None,
    },
}

BLOCK_KEYS = ["in_channels", "out_channels", "width", "stride", "padding", "output_padding"]
LAYER_KEYS = ["channels", "width"]
SHAPE_KEYS = ["shape", "rings", "segments", "radii", "center", "scale"]


def _is_int(value) -> bool:
    return isinstance(value, (int, np.integer)) and not isinstance(value, bool)


def _is_number(value) -> bool:
    return isinstance(value, (int, float, np.number)) and not isinstance(value, bool)


def _check_keys(section: dict, allowed: list, name: str):
    if not isinstance(section, dict):
        raise ConfigError(f"Section `{name}` should be a dict")
    for key in section:
        if key not in allowed:
            raise ConfigError(config_error_messages["unknown_key"].format(
                key=key, section=name, allowed=", ".join(allowed)))


def merge_config(base: dict, update: dict) -> dict:
    """ Nested dicts merged key by key, anything else replaced """
    merged = deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = deepcopy(value)
    return merged


def load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as openfile:
        config = yaml.load(openfile, Loader=yaml.FullLoader)
    if config is None:
        return {}
    if not isinstance(config, dict):
        raise ConfigError(f"Config {path} should be a mapping")
    return config


def _check_geometry_entry(value, message: str, name: str):
    if isinstance(value, str):
        return
    if not isinstance(value, dict) or "shape" not in value:
        raise ConfigError(message)
    _check_keys(value, SHAPE_KEYS, name)


def _check_targets(targets, message: str):
    if not isinstance(targets, list) or not all(_is_int(elt) and elt >= 4 for elt in targets):
        raise ConfigError(message)
    if any(later >= earlier for earlier, later in zip(targets, targets[1:])):
        raise ConfigError(message)


def _check_model(model: dict):
    messages = config_error_messages["model"]
    _check_keys(model, list(DEFAULT_MODEL.keys()), "model")
    if not _is_int(model["time_length"]) or model["time_length"] < 1:
        raise ConfigError(messages["time_length"])
    _check_keys(model["spline"], ["degree", "kernel_size"], "model.spline")
    spline = model["spline"]
    if not _is_int(spline["degree"]) or spline["degree"] < 1 or \
            not isinstance(spline["kernel_size"], list) or len(spline["kernel_size"]) != 3 or \
            any(not _is_int(size) or size <= spline["degree"] for size in spline["kernel_size"]):
        raise ConfigError(messages["spline"])
    for side in ("encoder", "decoder"):
        _check_keys(model[side], ["blocks", "layers"], f"model.{side}")
        if not isinstance(model[side].get("blocks"), list) or \
                not isinstance(model[side].get("layers"), list):
            raise ConfigError(messages[side])
        for block in model[side]["blocks"]:
            _check_keys(block, BLOCK_KEYS, f"model.{side}.blocks")
        for layer in model[side]["layers"]:
            _check_keys(layer, LAYER_KEYS, f"model.{side}.layers")
    if not model["encoder"]["blocks"]:
        raise ConfigError(messages["encoder"])
    try:
        parameter_shapes(model)
        time_lengths(model)
    except (ShapeError, TypeError, ValueError) as error:
        raise ConfigError(f"{messages['encoder']} ({error})") from error


def _check_data(data: dict):
    messages = config_error_messages["data"]
    _check_keys(data, list(DEFAULT_CONFIG["data"].keys()), "data")
    for key in ("origins", "scars"):
        value = data[key]
        if not (_is_int(value) and value >= 0) and \
                not (isinstance(value, list) and all(_is_int(elt) for elt in value)):
            raise ConfigError(messages[key])
    if not _is_number(data["scar_radius"]) or data["scar_radius"] <= 0:
        raise ConfigError(messages["scar_radius"])
    if not isinstance(data["include_healthy"], bool):
        raise ConfigError(messages["include_healthy"])
    if not isinstance(data["rotations"], list) or not data["rotations"]:
        raise ConfigError(messages["rotations"])
    for group in data["rotations"]:
        _check_keys(group, ["axis", "degrees"], "data.rotations")
        if group.get("axis") not in AXES or not isinstance(group.get("degrees"), list) or \
                not all(_is_number(elt) for elt in group["degrees"]):
            raise ConfigError(messages["rotations"])
    if not _is_number(data["snr_db"]):
        raise ConfigError(messages["snr_db"])
    for key in ("train_fraction", "val_fraction"):
        if not _is_number(data[key]) or not 0 <= data[key] <= 1:
            raise ConfigError(messages[key])
    if data["train_fraction"] + data["val_fraction"] > 1:
        raise ConfigError(messages["val_fraction"])


def _check_train(train: dict):
    messages = config_error_messages["train"]
    _check_keys(train, list(DEFAULT_TRAIN.keys()), "train")
    if not _is_int(train["epochs"]) or train["epochs"] < 0:
        raise ConfigError(messages["epochs"])
    if not _is_int(train["batch_size"]) or train["batch_size"] < 1:
        raise ConfigError(messages["batch_size"])
    for key in ("lr", "eps"):
        if not _is_number(train[key]) or train[key] <= 0:
            raise ConfigError(messages[key])
    for key in ("beta1", "beta2"):
        if not _is_number(train[key]) or not 0 <= train[key] < 1:
            raise ConfigError(messages[key])


def _check_eval(config_eval: dict):
    messages = config_error_messages["eval"]
    _check_keys(config_eval, list(DEFAULT_CONFIG["eval"].keys()), "eval")
    Metrics({"type_metrics": config_eval["type_metrics"],
             "duration_threshold": config_eval["duration_threshold"]})
    if config_eval["seed"] is not None and (not _is_int(config_eval["seed"]) or
                                            config_eval["seed"] < 0):
        raise ConfigError(messages["seed"])
    sweep = config_eval["sweep"]
    _check_keys(sweep, ["axis", "degrees"], "eval.sweep")
    if sweep.get("axis") not in AXES or not isinstance(sweep.get("degrees"), list) or \
            not all(_is_number(elt) for elt in sweep["degrees"]):
        raise ConfigError(messages["sweep"])
    cross = config_eval["cross_geometry"]
    if cross is not None:
        _check_keys(cross, ["heart", "torso", "hierarchy"], "eval.cross_geometry")
        if "heart" not in cross or "torso" not in cross:
            raise ConfigError(messages["cross_geometry"])
        for side in ("heart", "torso"):
            _check_geometry_entry(cross[side], messages["cross_geometry"],
                                  f"eval.cross_geometry.{side}")
        if "hierarchy" in cross:
            _check_keys(cross["hierarchy"], ["heart", "torso"], "eval.cross_geometry.hierarchy")
            for side, targets in cross["hierarchy"].items():
                _check_targets(targets, config_error_messages["hierarchy"][side])


def check_config(config: dict):
    """ Raises ConfigError on the first invalid or unknown entry of a
    complete (defaults merged) config """
    if not isinstance(config, dict):
        raise ConfigError("`config` should be a dict")
    _check_keys(config, list(DEFAULT_CONFIG.keys()), "root")

    if not isinstance(config["name_exp"], str):
        raise ConfigError(config_error_messages["name_exp"])
    if not _is_int(config["seed"]) or config["seed"] < 0:
        raise ConfigError(config_error_messages["seed"])
    if not isinstance(config["output_dir"], str):
        raise ConfigError(config_error_messages["output_dir"])
    if not _is_int(config["jobs"]) or config["jobs"] < 1:
        raise ConfigError(config_error_messages["jobs"])

    _check_keys(config["geometry"], ["heart", "torso"], "geometry")
    _check_keys(config["hierarchy"], ["heart", "torso"], "hierarchy")
    for side in ("heart", "torso"):
        _check_geometry_entry(config["geometry"].get(side),
                              config_error_messages["geometry"][side], f"geometry.{side}")
        _check_targets(config["hierarchy"].get(side), config_error_messages["hierarchy"][side])

    _check_model(config["model"])

    _check_keys(config["physics"], ["ap", "frames"], "physics")
    _check_keys(config["physics"]["ap"], [field.name for field in fields(APParams)], "physics.ap")
    try:
        APParams.from_dict(config["physics"]["ap"])
    except (TypeError, ValueError) as error:
        raise ConfigError(f"{config_error_messages['physics']['ap']} ({error})") from error
    if not _is_int(config["physics"]["frames"]) or \
            config["physics"]["frames"] != config["model"]["time_length"]:
        raise ConfigError(config_error_messages["physics"]["frames"])

    _check_data(config["data"])
    _check_train(config["train"])
    _check_eval(config["eval"])


def _resolve_path(value, base_dir: str):
    if isinstance(value, str) and not os.path.isabs(value):
        return os.path.normpath(os.path.join(base_dir, value))
    return value


def resolve_config(config: dict, base_dir: str = ".", seed: Optional[int] = None,
                   output_dir: Optional[str] = None, jobs: Optional[int] = None) -> dict:
    """ Defaults merged, flag overrides applied (flags win), every path made absolute """
    if not isinstance(config, dict):
        raise ConfigError("`config` should be a dict")
    _check_keys(config, list(DEFAULT_CONFIG.keys()), "root")
    resolved = merge_config(DEFAULT_CONFIG, config)
    # a geometry description replaces the default one as a whole
    geometry = config.get("geometry")
    for side, description in (geometry.items() if isinstance(geometry, dict) else []):
        resolved["geometry"][side] = deepcopy(description)
    if seed is not None:
        resolved["seed"] = seed
    if jobs is not None:
        resolved["jobs"] = jobs
    if output_dir is not None:
        resolved["output_dir"] = os.path.abspath(output_dir)
    check_config(resolved)

    base_dir = os.path.abspath(base_dir)
    resolved["output_dir"] = _resolve_path(resolved["output_dir"], base_dir)
    for side in ("heart", "torso"):
        resolved["geometry"][side] = _resolve_path(resolved["geometry"][side], base_dir)
    cross = resolved["eval"]["cross_geometry"]
    if cross is not None:
        for side in ("heart", "torso"):
            cross[side] = _resolve_path(cross[side], base_dir)
    return resolved


def config_from_file(path: Optional[str], seed: Optional[int] = None,
                     output_dir: Optional[str] = None, jobs: Optional[int] = None) -> dict:
    """ Resolved config from a YAML file, or the defaults when `path` is None """
    if path is None:
        return resolve_config({}, os.getcwd(), seed, output_dir, jobs)
    config = load_config(path)
    return resolve_config(config, os.path.dirname(os.path.abspath(path)), seed, output_dir, jobs)


def coarsen_mesh(mesh, targets: List[int], folder: Optional[str] = None) -> MeshHierarchy:
    """ Mesh file or procedural description -> hierarchy, saved when `folder` is given """
    source = mesh if isinstance(mesh, str) else mesh_from_config(mesh)
    hierarchy = hierarchy_from_config(source, targets)
    if folder is not None:
        save_hierarchy(hierarchy, folder)
        logger.success(f"[Coarsen] {len(hierarchy)} levels saved in {folder}")
    return hierarchy


class ExperimentFramework:
    """
    Data generation, training and evaluation for one resolved config
    """
    def __init__(self, config: dict):
        """ `config`: output of `resolve_config` """
        self.config_error_messages = config_error_messages
        check_config(config)
        self.config = config
        self.seed = config["seed"]
        self.jobs = config["jobs"]
        self.save_folder = make_folder(config["output_dir"])
        self.dataset_folder = os.path.join(self.save_folder, "dataset")
        self.train_folder = os.path.join(self.save_folder, "train")
        self.metrics = Metrics({"type_metrics": config["eval"]["type_metrics"],
                                "duration_threshold": config["eval"]["duration_threshold"]})
        self._bundle = None

    def echo_config(self) -> str:
        path = os.path.join(self.save_folder, "config.yaml")
        with open(path, "w", encoding="utf-8") as openfile:
            yaml.dump(to_builtin(self.config), openfile, sort_keys=False)
        return path

    @property
    def bundle(self) -> GeometryBundle:
        if self._bundle is None:
            logger.info("[Geometry] building hierarchies")
            self._bundle = bundle_from_config(self.config["geometry"], self.config["hierarchy"],
                                              self.config["model"]["spline"])
            logger.info(f"[Geometry] heart {self._bundle.heart.vertex_counts}, "
                        f"torso {self._bundle.torso.vertex_counts}")
        return self._bundle

    def default_checkpoint(self) -> str:
        return os.path.join(self.train_folder, "best.ckpt")

    def _check_dataset(self) -> dict:
        manifest = read_manifest(self.dataset_folder)
        if manifest["geometry_hash"] != self.bundle.geometry_hash():
            raise GeometryMismatchError(
                f"Dataset in {self.dataset_folder} was generated on another geometry")
        return manifest

    def generate_data(self) -> dict:
        logger.info(f"[Data] generating into {self.dataset_folder}")
        return generate_dataset(self.bundle, self.config, self.dataset_folder, jobs=self.jobs)

    def train(self, resume: Optional[str] = None) -> Checkpoint:
        self._check_dataset()
        train_samples = list(load_samples(self.dataset_folder, "train"))
        val_samples = list(load_samples(self.dataset_folder, "val"))
        if not train_samples:
            raise DatasetError("No training sample in the dataset")
        model = InverseNetwork(self.config["model"], seed=self.seed)
        model.check_geometry(self.bundle)
        logger.info(f"[Train] {model.num_parameters} parameters, {len(train_samples)} train / "
                    f"{len(val_samples)} val samples")
        trainer = Trainer(model, self.bundle, self.config["train"], seed=self.seed,
                          save_folder=make_folder(self.train_folder))
        if resume is not None:
            trainer.resume(Checkpoint.load(resume))
            logger.info(f"[Train] resumed at epoch {trainer.epoch}")
        best = trainer.fit(train_samples, val_samples=val_samples)
        if trainer.history:
            Plotter.save_fig(Plotter.build_history_figure(pd.DataFrame(trainer.history)),
                             os.path.join(self.train_folder, "history.html"))
        logger.success(f"[Train] best checkpoint at epoch {best.epoch}")
        return best

    def evaluate(self, checkpoint_path: Optional[str] = None, split: str = "test"):
        self._check_dataset()
        checkpoint = Checkpoint.load(checkpoint_path or self.default_checkpoint())
        samples = list(load_samples(self.dataset_folder, split))
        if not samples:
            logger.warning(f"[Eval] empty `{split}` split, evaluating every sample")
            samples = list(load_samples(self.dataset_folder))
        report = evaluate(checkpoint, self.bundle, samples, self.metrics, jobs=self.jobs)
        report.save(make_folder(os.path.join(self.save_folder, "eval")), "report")
        logger.success(f"[Eval] {len(report)} samples: {report.overall()}")
        return report

    def sweep(self, checkpoint_path: Optional[str] = None, axis: Optional[str] = None,
              degrees: Optional[list] = None):
        axis = axis or self.config["eval"]["sweep"]["axis"]
        degrees = self.config["eval"]["sweep"]["degrees"] if degrees is None else degrees
        if axis not in AXES:
            raise ConfigError(self.config_error_messages["eval"]["sweep"])
        checkpoint = Checkpoint.load(checkpoint_path or self.default_checkpoint())
        report = rotation_sweep(checkpoint, self.bundle, self.config, axis, degrees,
                                self.metrics, jobs=self.jobs)
        folder = make_folder(os.path.join(self.save_folder, "sweep"))
        name = f"sweep_{axis}"
        report.save(folder, name)
        summary = report.summary().rename(columns={"group": "degrees"})
        if not summary.empty:
            metrics = [metric for metric in ("mse", "cc") if metric in self.metrics.type_metrics]
            Plotter(metrics=metrics)(summary, folder, x_column="degrees", name=name)
        logger.success(f"[Sweep] {len(report)} samples over {len(degrees)} degrees about {axis}")
        return report

    def cross_bundle(self) -> GeometryBundle:
        """ Second heart-torso pair, coarsened like the training pair when no
        targets are given """
        cross = self.config["eval"]["cross_geometry"]
        if cross is None:
            raise ConfigError(self.config_error_messages["eval"]["cross_geometry"])
        hierarchies = {}
        reference = {"heart": self.bundle.heart, "torso": self.bundle.torso}
        for side in ("heart", "torso"):
            source = cross[side] if isinstance(cross[side], str) else mesh_from_config(cross[side])
            if isinstance(source, str) and os.path.isdir(source):
                hierarchies[side] = hierarchy_from_config(source, [])
                continue
            targets = cross.get("hierarchy", {}).get(side)
            if targets is None:
                mesh = mesh_from_config(source) if isinstance(source, str) else source
                targets = proportional_targets(reference[side].vertex_counts, mesh.num_vertices)
                hierarchies[side] = build_hierarchy(mesh, targets)
            else:
                hierarchies[side] = hierarchy_from_config(source, targets)
        spline = self.config["model"]["spline"]
        return GeometryBundle(hierarchies["heart"], hierarchies["torso"],
                              degree=spline["degree"], kernel_size=spline["kernel_size"])

    def cross_geometry(self, checkpoint_path: Optional[str] = None):
        checkpoint = Checkpoint.load(checkpoint_path or self.default_checkpoint())
        new_bundle = self.cross_bundle()
        report = cross_geometry_eval(checkpoint, new_bundle, self.config, self.metrics,
                                     jobs=self.jobs)
        report.save(make_folder(os.path.join(self.save_folder, "cross_geometry")), "report")
        logger.success(f"[Cross-geometry] {len(report)} samples: {report.overall()}")
        return report

    def reconstruct(self, checkpoint_path: str, y_path: str, out_path: str,
                    x_path: Optional[str] = None) -> Optional[float]:
        """ Writes X_hat, returns its CC against `x_path` when given """
        checkpoint = Checkpoint.load(checkpoint_path)
        x_hat = reconstruct(checkpoint, self.bundle, load_tensor(y_path))
        save_tensor(out_path, x_hat)
        logger.info(f"[Reconstruct] {out_path} {x_hat.shape}")
        if x_path is None:
            return None
        return cc_metric(x_hat, load_tensor(x_path))

    def gradcheck(self, max_entries: int = MODEL_ENTRIES) -> pd.DataFrame:
        model = InverseNetwork(self.config["model"], seed=self.seed)
        table = gradcheck_suite(model, self.bundle, seed=self.seed, max_entries=max_entries)
        table.to_csv(os.path.join(self.save_folder, "gradcheck.csv"), index=False)
        return table
