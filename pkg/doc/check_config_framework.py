# -*- coding: utf-8 -*-
"""
Storing type error messages when checking run configs
"""

CONFIG_TYPE_ERROR_MESSAGES = {
    "unknown_key": "Unknown key in the config: `{key}` (section `{section}`). " + \
        "Allowed keys: {allowed}",

    "name_exp": "`name_exp` should be in the config keys" + \
        "Format: str",

    "seed": "`seed` should be in the config keys" + \
        "Format: int >= 0",

    "output_dir": "`output_dir` should be in the config keys" + \
        "Format: str, path of the output folder (relative to the config file)",

    "jobs": "`jobs` should be in the config keys" + \
        "Format: int >= 1, number of worker processes",

    "geometry": {
        side: f"`geometry.{side}` should be in the config keys" + \
            "Format: str (mesh file or saved hierarchy folder) or dict " + \
            "{shape: ellipsoid|icosahedron|tetrahedron, ...}" for side in ["heart", "torso"]
    },

    "hierarchy": {
        side: f"`hierarchy.{side}` should be in the config keys" + \
            "Format: list of strictly decreasing int >= 4, coarsening targets" \
            for side in ["heart", "torso"]
    },

    "model": {
        "time_length": "`model.time_length` should be in the config keys" + \
            "Format: int >= 1, and equal to `physics.frames`",
        "spline": "`model.spline` should be in the config keys" + \
            "Format: dict {degree: int >= 1, kernel_size: list of 3 int > degree}",
        "encoder": "`model.encoder` should be in the config keys" + \
            "Format: dict {blocks: list of block dicts, layers: list of {channels, width}}",
        "decoder": "`model.decoder` should be in the config keys" + \
            "Format: dict {layers: list of {channels, width}, blocks: list of block dicts}",
    },

    "physics": {
        "ap": "`physics.ap` should be in the config keys" + \
            "Format: dict, subset of k, a, e0, mu1, mu2, diffusion, dt, substeps",
        "frames": "`physics.frames` should be in the config keys" + \
            "Format: int >= 1, equal to `model.time_length`",
    },

    "data": {
        "origins": "`data.origins` should be in the config keys" + \
            "Format: int (count, farthest-point sampling) or list of heart vertex ids",
        "scars": "`data.scars` should be in the config keys" + \
            "Format: int (count) or list of heart vertex ids used as scar centres",
        "scar_radius": "`data.scar_radius` should be in the config keys" + \
            "Format: float > 0, geodesic radius of each scar",
        "include_healthy": "`data.include_healthy`, if used, should be a boolean",
        "rotations": "`data.rotations` should be in the config keys" + \
            "Format: list of {axis: x|y|z, degrees: list of float}",
        "snr_db": "`data.snr_db` should be in the config keys" + \
            "Format: float (dB) or `inf` for noise-free measurements",
        "train_fraction": "`data.train_fraction` should be in the config keys" + \
            "Format: float in [0, 1]",
        "val_fraction": "`data.val_fraction`, if used, should be a float in [0, 1], " + \
            "with train_fraction + val_fraction <= 1",
    },

    "train": {
        "epochs": "`train.epochs` should be an int >= 0",
        "batch_size": "`train.batch_size` should be an int >= 1",
        "lr": "`train.lr` should be a float > 0",
        "beta1": "`train.beta1` should be a float in [0, 1)",
        "beta2": "`train.beta2` should be a float in [0, 1)",
        "eps": "`train.eps` should be a float > 0",
    },

    "eval": {
        "type_metrics": "`type_metrics` should be in the config keys" + \
            "Format: list[str], contain at most `mse`, `cc` and `dice`",
        "duration_threshold": "`duration_threshold`, if used, should be a number > 0 (frames); " + \
            "leave it empty for half the median healthy duration",
        "seed": "`eval.seed`, if used, should be an int >= 0",
        "sweep": "`eval.sweep` should be a dict {axis: x|y|z, degrees: list of float}",
        "cross_geometry": "`eval.cross_geometry`, if used, should be a dict " + \
            "{heart, torso} with optional `hierarchy: {heart, torso}`",
    },
}
