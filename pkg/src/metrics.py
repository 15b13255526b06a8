# -*- coding: utf-8 -*-
"""
Metrics for assessing the quality of the reconstruction
- MSE and CC (Pearson over the flattened space-time block)
- activation time/duration per vertex, scar identification and Dice
- MetricReport: per-sample rows, grouped mean/std, CSV and JSON output
"""
import json
import os
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from doc.check_config_framework import CONFIG_TYPE_ERROR_MESSAGES \
    as config_error_messages
from src.errors import ConfigError, ShapeError

ACTIVATION_LEVEL = 0.5
CC_DEFINITION = "pearson over the flattened space-time block of each sample"


def mse_metric(x_hat: np.ndarray, x: np.ndarray) -> float:
    x_hat, x = np.asarray(x_hat, dtype=np.float64), np.asarray(x, dtype=np.float64)
    if x_hat.shape != x.shape:
        raise ShapeError(f"mse: shapes {x_hat.shape} and {x.shape} differ")
    return float(np.mean((x_hat - x) ** 2))


def cc_metric(x_hat: np.ndarray, x: np.ndarray) -> float:
    """ Pearson correlation of the two flattened blocks """
    x_hat, x = np.asarray(x_hat, dtype=np.float64).ravel(), np.asarray(x, dtype=np.float64).ravel()
    if x_hat.shape != x.shape:
        raise ShapeError(f"cc: shapes {x_hat.shape} and {x.shape} differ")
    centered_hat, centered = x_hat - x_hat.mean(), x - x.mean()
    norm_hat, norm = np.linalg.norm(centered_hat), np.linalg.norm(centered)
    if norm_hat == 0 or norm == 0:
        raise ValueError("cc undefined for a constant signal")
    return float(np.clip(centered_hat @ centered / (norm_hat * norm), -1.0, 1.0))


def activation_metrics(x: np.ndarray, level: float = ACTIVATION_LEVEL) -> pd.DataFrame:
    """ Per vertex: first frame with u >= level (-1 if never), number of such
    frames, and an `active` flag. `x` is (V, T) or (V, 1, T) """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        x = x[:, 0, :]
    above = x >= level
    active = above.any(axis=1)
    time = np.where(active, np.argmax(above, axis=1), -1)
    return pd.DataFrame(dict(vertex=np.arange(x.shape[0]), activation_time=time,
                             duration=above.sum(axis=1), active=active))


def default_duration_threshold(x: np.ndarray, scar_vertices: Iterable[int] = ()) -> float:
    """ Half the median duration of active vertices outside the scar """
    table = activation_metrics(x)
    healthy = table[table.active & ~table.vertex.isin(list(scar_vertices))]
    if healthy.empty:
        return 0.0
    return 0.5 * float(healthy.duration.median())


@dataclass
class ScarResult:
    predicted: frozenset
    truth: frozenset
    dice: float


class Metrics:
    """
    Quantitative metrics: mse, cc, dice
    """
    possible_type_metrics = ["mse", "cc", "dice"]

    def __init__(self, config_metrics: dict = None):
        """ config_metrics keys (cf. doc/check_config_framework.py):
        - `type_metrics`: subset of mse, cc, dice
        - `duration_threshold`: frames, or None for half the healthy median
        """
        config_metrics = config_metrics or {"type_metrics": ["mse", "cc", "dice"]}
        self.config_error_messages = config_error_messages
        self._check_config(config=config_metrics)
        self.type_metrics = config_metrics["type_metrics"]
        self.duration_threshold = config_metrics.get("duration_threshold")

    def _check_config(self, config: dict):
        if "type_metrics" not in config:
            raise ConfigError(self.config_error_messages["eval"]["type_metrics"])
        if not isinstance(config["type_metrics"], list) or \
                any(elt not in self.possible_type_metrics for elt in config["type_metrics"]):
            raise ConfigError(self.config_error_messages["eval"]["type_metrics"])
        threshold = config.get("duration_threshold")
        if threshold is not None and (not isinstance(threshold, (int, float)) or threshold <= 0):
            raise ConfigError(self.config_error_messages["eval"]["duration_threshold"])

    @staticmethod
    def get_numbers(found: Iterable, gold_standard: Iterable) -> dict:
        """ Numbers necessary to calculate the metrics """
        found, gold_standard = set(found), set(gold_standard)
        true_pos = len(found.intersection(gold_standard))
        false_pos = len(found.difference(gold_standard))
        false_neg = len(gold_standard.difference(found))
        return dict(true_pos=true_pos,
                    false_pos=false_pos,
                    false_neg=false_neg)

    @staticmethod
    def get_f1(**args: dict) -> float:
        """ f1, equal to the Dice coefficient of the two sets """
        if args["true_pos"] + \
            0.5 * (args["false_pos"] + args["false_neg"]) == 0:
            return 0
        return args["true_pos"] / (args["true_pos"] + \
            0.5 * (args["false_pos"] + args["false_neg"]))

    @classmethod
    def get_dice(cls, predicted: Iterable, truth: Iterable) -> float:
        """ 2 |A n B| / (|A| + |B|); two empty sets agree perfectly """
        predicted, truth = set(predicted), set(truth)
        if not predicted and not truth:
            return 1.0
        return float(cls.get_f1(**cls.get_numbers(found=predicted, gold_standard=truth)))

    @classmethod
    def scar_identify(cls, x_hat: np.ndarray, duration_threshold: float,
                      truth: Iterable[int] = ()) -> ScarResult:
        """ Vertices active for fewer than `duration_threshold` frames
        (never-activated ones included) """
        table = activation_metrics(x_hat)
        predicted = frozenset(int(v) for v in table.vertex[table.duration < duration_threshold])
        truth = frozenset(int(v) for v in truth)
        return ScarResult(predicted=predicted, truth=truth, dice=cls.get_dice(predicted, truth))

    def __call__(self, x_hat: np.ndarray, x: np.ndarray,
                 scar_vertices: Optional[Iterable[int]] = None) -> dict:
        metrics = {}
        if "mse" in self.type_metrics:
            metrics["mse"] = mse_metric(x_hat, x)
        if "cc" in self.type_metrics:
            metrics["cc"] = cc_metric(x_hat, x)
        if "dice" in self.type_metrics and scar_vertices:
            threshold = self.duration_threshold or default_duration_threshold(x, scar_vertices)
            metrics["dice"] = self.scar_identify(x_hat, threshold, scar_vertices).dice
        return metrics


def scar_identify(x_hat: np.ndarray, duration_threshold: float, truth: Iterable[int] = ()) -> ScarResult:
    if duration_threshold < 0:
        raise ValueError("Duration threshold must be >= 0 frames")
    return Metrics.scar_identify(x_hat, duration_threshold, truth)


class MetricReport:
    """ Per-sample metric rows grouped by a key (e.g. rotation degrees) """
    columns = ["sample_id", "group", "mse", "cc", "dice"]

    def __init__(self, rows: list = None, group_name: str = "degrees"):
        self.group_name = group_name
        self.rows = pd.DataFrame(rows or [], columns=self.columns)

    def __len__(self):
        return len(self.rows)

    def add(self, sample_id: str, group, metrics: dict):
        row = dict(sample_id=sample_id, group=group, mse=metrics.get("mse"),
                   cc=metrics.get("cc"), dice=metrics.get("dice"))
        self.rows = pd.concat([self.rows, pd.DataFrame([row], columns=self.columns)],
                              ignore_index=True)

    def extend(self, other: "MetricReport"):
        self.rows = pd.concat([self.rows, other.rows], ignore_index=True)

    def summary(self) -> pd.DataFrame:
        """ mean/std of each metric per group (std 0 for singletons) """
        if self.rows.empty:
            return pd.DataFrame(columns=["group", "count", "mse_mean", "mse_std", "cc_mean",
                                         "cc_std", "dice_mean", "dice_std"])
        numeric = self.rows.astype({"mse": float, "cc": float, "dice": float})
        grouped = numeric.groupby("group", sort=True)
        summary = pd.DataFrame({
            "count": grouped.size(),
            "mse_mean": grouped.mse.mean(), "mse_std": grouped.mse.std(ddof=0),
            "cc_mean": grouped.cc.mean(), "cc_std": grouped.cc.std(ddof=0),
            "dice_mean": grouped.dice.mean(), "dice_std": grouped.dice.std(ddof=0),
        }).reset_index()
        return summary

    def overall(self) -> dict:
        numeric = self.rows.astype({"mse": float, "cc": float, "dice": float})
        return {f"{metric}_{stat}": (float(getattr(numeric[metric], stat)(**kwargs))
                                     if numeric[metric].notna().any() else None)
                for metric in ("mse", "cc", "dice")
                for stat, kwargs in (("mean", {}), ("std", {"ddof": 0}))}

    def save(self, folder: str, name: str = "report"):
        """ `<name>.csv` (per sample), `<name>_summary.csv`, `<name>.json` """
        rows = self.rows.rename(columns={"group": self.group_name})
        rows.to_csv(os.path.join(folder, f"{name}.csv"), index=False)
        summary = self.summary().rename(columns={"group": self.group_name})
        summary.to_csv(os.path.join(folder, f"{name}_summary.csv"), index=False)
        info = dict(num_samples=len(self.rows), group=self.group_name,
                    cc_definition=CC_DEFINITION, overall=self.overall(),
                    groups=json.loads(summary.to_json(orient="records")))
        with open(os.path.join(folder, f"{name}.json"), "w", encoding="utf-8") as openfile:
            json.dump(info, openfile, indent=4)
