# -*- coding: utf-8 -*-
"""
Desk-scale rotation study
- data on z rotations -2..2 degrees, training, standard evaluation
- sweep -6..6 degrees about the configured axis (per-degree MSE/CC table + figure)
- optionally the same checkpoint on the cross-geometry pair
Steps whose outputs already exist are skipped
"""
import os
from datetime import datetime

import click
import numpy as np
from loguru import logger

from settings import FOLDER_PATH
from src.framework import ExperimentFramework, config_from_file

DEFAULT_CONFIG = os.path.join(FOLDER_PATH, "configs-example", "config-desk.yaml")


@click.command()
@click.option("--config", default=DEFAULT_CONFIG, help="YAML run config")
@click.option("--out", default=None, help="output folder (overrides `output_dir`)")
@click.option("--jobs", type=int, default=None, help="worker processes")
@click.option("--cross/--no-cross", default=True, help="also run the cross-geometry evaluation")
def main(config, out, jobs, cross):
    start_time = datetime.now()
    logger.info(f"[Time] Started at: {start_time}")
    experiment = ExperimentFramework(config_from_file(config, output_dir=out, jobs=jobs))
    experiment.echo_config()

    if not os.path.exists(os.path.join(experiment.dataset_folder, "manifest.yaml")):
        experiment.generate_data()
    else:
        logger.info("[Data] already generated")
    if not os.path.exists(experiment.default_checkpoint()):
        experiment.train()
    else:
        logger.info("[Train] already trained")

    experiment.evaluate()
    summary = experiment.sweep().summary()
    logger.info(f"[Sweep]\n{summary.to_string(index=False)}")
    complete = len(summary) == len(experiment.config["eval"]["sweep"]["degrees"]) and \
        bool(np.all(np.isfinite(summary[["mse_mean", "cc_mean"]].astype(float).values)))
    if complete:
        logger.success("[Sweep] every degree has finite metrics")
    else:
        logger.error("[Sweep] missing degrees or non-finite metrics")

    if cross and experiment.config["eval"]["cross_geometry"] is not None:
        report = experiment.cross_geometry()
        finite = bool(np.all(np.isfinite(report.rows[["mse", "cc"]].astype(float).values)))
        logger.info(f"[Cross-geometry] {len(report)} samples, finite metrics: {finite}")

    logger.info(f"[Time] Took {datetime.now() - start_time}")


if __name__ == '__main__':
    main()
