# -*- coding: utf-8 -*-
"""
Trainability check on a small heart-torso pair
- 4 noise-free samples, 2000 epochs at lr 5e-4
- passes when the training loss drops at least 100x from epoch 1 and every
training sample is reconstructed with CC > 0.95
"""
import os
import json
from datetime import datetime

import click
import pandas as pd
from loguru import logger

from settings import FOLDER_PATH
from src.dataset import load_samples
from src.framework import ExperimentFramework, config_from_file
from src.metrics import cc_metric
from src.training import Checkpoint

DEFAULT_CONFIG = os.path.join(FOLDER_PATH, "configs-example", "config-overfit.yaml")
MIN_LOSS_RATIO = 100.0
MIN_CC = 0.95


@click.command()
@click.option("--config", default=DEFAULT_CONFIG, help="YAML run config")
@click.option("--out", default=None, help="output folder (overrides `output_dir`)")
@click.option("--seed", type=int, default=None, help="base seed")
def main(config, out, seed):
    start_time = datetime.now()
    logger.info(f"[Time] Started at: {start_time}")
    experiment = ExperimentFramework(config_from_file(config, seed=seed, output_dir=out))
    experiment.echo_config()
    experiment.generate_data()
    experiment.train()

    history = pd.read_csv(os.path.join(experiment.train_folder, "history.csv"))
    ratio = history.train_loss.iloc[0] / max(history.train_loss.min(), 1e-300)
    logger.info(f"[Overfit] loss {history.train_loss.iloc[0]:.4g} -> "
                f"{history.train_loss.min():.4g} ({ratio:.1f}x)")

    checkpoint = experiment.default_checkpoint()
    model = Checkpoint.load(checkpoint).model()
    scores = {}
    for sample in load_samples(experiment.dataset_folder, "train"):
        x_hat = model.predict(sample.y, experiment.bundle)
        scores[sample.sample_id] = cc_metric(x_hat, sample.x)
        logger.info(f"[Overfit] {sample.sample_id}\tcc {scores[sample.sample_id]:.4f}")

    passed = ratio >= MIN_LOSS_RATIO and all(value > MIN_CC for value in scores.values())
    with open(os.path.join(experiment.save_folder, "overfit.json"), "w", encoding="utf-8") as openfile:
        json.dump(dict(loss_ratio=float(ratio), cc=scores, passed=passed,
                       epochs=int(history.epoch.iloc[-1])), openfile, indent=4)
    if passed:
        logger.success(f"[Overfit] passed in {datetime.now() - start_time}")
    else:
        logger.error(f"[Overfit] failed in {datetime.now() - start_time}")


if __name__ == '__main__':
    main()
