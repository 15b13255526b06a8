# -*- coding: utf-8 -*-
"""
Loss, Adam optimiser, training loop and checkpoints

Checkpoint file layout
- magic `STGCKPT1`, uint32 version, uint64 header length
- JSON header: model and training config, epoch, Adam step, rng state,
  history, geometry hash, parameter names and shapes
- one tensor block per parameter, then Adam first moments, then second moments
"""
import json
import os
import struct
import time
from collections import OrderedDict
from copy import deepcopy
from typing import List

import numpy as np
import pandas as pd
from loguru import logger
from tqdm import tqdm

from src.autodiff import Tensor, read_tensor_block, write_tensor_block
from src.dataset import Sample
from src.errors import ShapeError, TrainingDivergenceError
from src.geometry import GeometryBundle
from src.network import InverseNetwork

CHECKPOINT_MAGIC = b"STGCKPT1"
CHECKPOINT_VERSION = 1

DEFAULT_TRAIN = {
    "epochs": 300,
    "batch_size": 8,
    "lr": 5e-4,
    "beta1": 0.9,
    "beta2": 0.999,
    "eps": 1e-8,
}


def mse_loss(x_hat: Tensor, x) -> Tensor:
    """ Mean over all elements of the squared difference """
    target = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if x_hat.shape != target.shape:
        raise ShapeError(f"mse_loss: prediction {x_hat.shape} vs target {target.shape}")
    return (x_hat - Tensor(target)).square().mean()


def monitored_loss(row: dict) -> float:
    """ Validation loss of a history row when there is one, else training loss """
    return row["val_loss"] if row.get("val_loss") is not None else row["train_loss"]


class Adam:
    """ Bias-corrected Adam over a dict of named tensors """
    def __init__(self, lr: float = 5e-4, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = OrderedDict()
        self.v = OrderedDict()

    def step(self, params: "OrderedDict[str, Tensor]"):
        """ In-place update from `.grad` (missing gradients count as zero) """
        for name, param in params.items():
            if param.grad is not None and not np.all(np.isfinite(param.grad)):
                bad = int(np.sum(~np.isfinite(param.grad)))
                raise TrainingDivergenceError(
                    f"Non-finite gradient in `{name}` ({bad} entries) at step {self.step_count + 1}")

        self.step_count += 1
        correction1 = 1.0 - self.beta1 ** self.step_count
        correction2 = 1.0 - self.beta2 ** self.step_count
        for name, param in params.items():
            grad = param.grad if param.grad is not None else np.zeros_like(param.data)
            if name not in self.m:
                self.m[name] = np.zeros_like(param.data)
                self.v[name] = np.zeros_like(param.data)
            self.m[name] *= self.beta1
            self.m[name] += (1.0 - self.beta1) * grad
            self.v[name] *= self.beta2
            self.v[name] += (1.0 - self.beta2) * (grad * grad)
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            param.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state(self) -> dict:
        return dict(step=self.step_count, m=deepcopy(self.m), v=deepcopy(self.v))

    def load_state(self, state: dict):
        self.step_count = state["step"]
        self.m = OrderedDict((name, value.copy()) for name, value in state["m"].items())
        self.v = OrderedDict((name, value.copy()) for name, value in state["v"].items())


class Checkpoint:
    """ Everything needed to resume training or to evaluate """
    def __init__(self, model_config: dict, params: dict, train_config: dict = None,
                 adam_state: dict = None, epoch: int = 0, rng_state: dict = None,
                 history: list = None, geometry_hash: str = ""):
        self.model_config = deepcopy(model_config)
        self.params = OrderedDict((name, np.array(value)) for name, value in params.items())
        self.train_config = deepcopy(train_config or DEFAULT_TRAIN)
        self.adam_state = adam_state or dict(step=0, m=OrderedDict(), v=OrderedDict())
        self.epoch = epoch
        self.rng_state = rng_state
        self.history = list(history or [])
        self.geometry_hash = geometry_hash

    def __repr__(self):
        return f"Checkpoint(epoch={self.epoch}, params={len(self.params)})"

    def model(self) -> InverseNetwork:
        model = InverseNetwork(self.model_config)
        model.load_state_dict(self.params)
        return model

    def save(self, path: str):
        header = dict(
            model_config=self.model_config, train_config=self.train_config,
            epoch=self.epoch, adam_step=self.adam_state["step"], rng_state=self.rng_state,
            history=self.history, geometry_hash=self.geometry_hash,
            params=[[name, list(value.shape)] for name, value in self.params.items()],
            moments=list(self.adam_state["m"].keys()))
        payload = json.dumps(header, sort_keys=True).encode("utf-8")
        with open(path, "wb") as openfile:
            openfile.write(CHECKPOINT_MAGIC)
            openfile.write(struct.pack("<IQ", CHECKPOINT_VERSION, len(payload)))
            openfile.write(payload)
            for value in self.params.values():
                write_tensor_block(openfile, value)
            for key in ("m", "v"):
                for value in self.adam_state[key].values():
                    write_tensor_block(openfile, value)

    @classmethod
    def load(cls, path: str) -> "Checkpoint":
        with open(path, "rb") as openfile:
            if openfile.read(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
                raise ValueError(f"{path} is not a checkpoint")
            version, length = struct.unpack("<IQ", openfile.read(12))
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"Unsupported checkpoint version {version}")
            header = json.loads(openfile.read(length).decode("utf-8"))
            params = OrderedDict()
            for name, shape in header["params"]:
                params[name] = read_tensor_block(openfile)
                if list(params[name].shape) != shape:
                    raise ShapeError(f"Checkpoint parameter `{name}` has a corrupted shape")
            moments = {}
            for key in ("m", "v"):
                moments[key] = OrderedDict(
                    (name, read_tensor_block(openfile)) for name in header["moments"])
        adam_state = dict(step=header["adam_step"], m=moments["m"], v=moments["v"])
        return cls(header["model_config"], params, header["train_config"], adam_state,
                   header["epoch"], header["rng_state"], header["history"],
                   header["geometry_hash"])


class Trainer:
    """
    Mini-batch training with shuffling, best-checkpoint retention and resume.
    The loss of a batch is the sum over its samples of the per-sample MSE.
    """
    def __init__(self, model: InverseNetwork, bundle: GeometryBundle, train_config: dict = None,
                 seed: int = 0, save_folder: str = None):
        self.model = model
        self.bundle = bundle
        self.config = dict(DEFAULT_TRAIN, **(train_config or {}))
        self.optimizer = Adam(self.config["lr"], self.config["beta1"], self.config["beta2"],
                              self.config["eps"])
        self.rng = np.random.default_rng(seed)
        self.save_folder = save_folder
        self.epoch = 0
        self.history = []
        self.best = None
        self._bundles = {}

    def bundle_for(self, sample: Sample) -> GeometryBundle:
        """ Training geometry with the sample's heart rotation, cached """
        key = (sample.axis, float(sample.degrees))
        if not sample.degrees:
            return self.bundle
        if key not in self._bundles:
            self._bundles[key] = self.bundle.rotated(*key)
        return self._bundles[key]

    def batch_loss(self, batch: List[Sample]) -> Tensor:
        total = None
        for sample in batch:
            loss = mse_loss(self.model(sample.y, self.bundle_for(sample)), sample.x)
            total = loss if total is None else total + loss
        return total

    def evaluate_loss(self, samples: List[Sample]) -> float:
        """ Mean per-sample MSE, no parameter change """
        if not samples:
            return float("nan")
        values = [float(mse_loss(self.model(sample.y, self.bundle_for(sample)), sample.x).data)
                  for sample in samples]
        return float(np.mean(values))

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(self.model.config, self.model.state_dict(), self.config,
                          self.optimizer.state(), self.epoch, self.rng.bit_generator.state,
                          self.history, self.bundle.geometry_hash())

    def resume(self, checkpoint: Checkpoint, best: Checkpoint = None):
        """ Continue from a saved state, same losses as an uninterrupted run.
        The best model so far is `best`, else `best.ckpt` of the save folder when it
        belongs to the same run, else the resumed state itself """
        if checkpoint.geometry_hash and checkpoint.geometry_hash != self.bundle.geometry_hash():
            logger.warning("[Resume] checkpoint was trained on another geometry")
        self.model.load_state_dict(checkpoint.params)
        self.optimizer.load_state(checkpoint.adam_state)
        if checkpoint.rng_state is not None:
            self.rng.bit_generator.state = checkpoint.rng_state
        self.epoch = checkpoint.epoch
        self.history = list(checkpoint.history)
        best = best or self._saved_best(checkpoint)
        if best is not None and best.history:
            self.best = (monitored_loss(best.history[-1]), best)
        elif checkpoint.history:
            self.best = (monitored_loss(checkpoint.history[-1]), checkpoint)

    def _saved_best(self, checkpoint: Checkpoint):
        if not self.save_folder:
            return None
        path = os.path.join(self.save_folder, "best.ckpt")
        if not os.path.exists(path):
            return None
        best = Checkpoint.load(path)
        if best.epoch > checkpoint.epoch or best.geometry_hash != checkpoint.geometry_hash or \
                best.history != checkpoint.history[:len(best.history)]:
            logger.warning(f"[Resume] {path} is not from the resumed run, ignored")
            return None
        return best

    def train_epoch(self, samples: List[Sample]) -> float:
        """ One shuffled pass, returns the mean per-sample loss """
        order = self.rng.permutation(len(samples))
        batch_size = self.config["batch_size"]
        total = 0.0
        for start in range(0, len(order), batch_size):
            batch = [samples[index] for index in order[start:start + batch_size]]
            good_state = self.model.state_dict()
            good_optimizer = self.optimizer.state()
            loss = self.batch_loss(batch)
            value = float(loss.data)
            if not np.isfinite(value):
                self._diverged(good_state, good_optimizer, f"Non-finite loss at epoch {self.epoch + 1}")
            loss.backward()
            try:
                self.optimizer.step(self.model.params)
            except TrainingDivergenceError as error:
                self._diverged(good_state, good_optimizer, str(error))
            total += value
        return total / len(samples)

    def _diverged(self, state: dict, optimizer_state: dict, message: str):
        self.model.load_state_dict(state)
        self.optimizer.load_state(optimizer_state)
        if self.save_folder:
            self.checkpoint().save(os.path.join(self.save_folder, "last.ckpt"))
        raise TrainingDivergenceError(message)

    def fit(self, train_samples: List[Sample], epochs: int = None,
            val_samples: List[Sample] = None) -> Checkpoint:
        """ Train until `epochs` total epochs, returns the best checkpoint """
        epochs = self.config["epochs"] if epochs is None else epochs
        if not train_samples and epochs > self.epoch:
            raise ValueError("Training needs at least one sample")
        val_samples = val_samples or []
        if self.best is None:
            self.best = (float("inf"), self.checkpoint())

        for _ in tqdm(range(self.epoch, epochs), desc="epochs", leave=False):
            start = time.time()
            train_loss = self.train_epoch(train_samples)
            self.epoch += 1
            val_loss = self.evaluate_loss(val_samples) if val_samples else None
            self.history.append(dict(epoch=self.epoch, train_loss=train_loss, val_loss=val_loss))
            logger.info(f"[Epoch {self.epoch}] train {train_loss:.6g}" +
                        (f" val {val_loss:.6g}" if val_loss is not None else ""))
            monitored = monitored_loss(self.history[-1])
            if monitored < self.best[0]:
                self.best = (monitored, self.checkpoint())
            self._write_history(time.time() - start)

        if self.save_folder:
            self.checkpoint().save(os.path.join(self.save_folder, "last.ckpt"))
            self.best[1].save(os.path.join(self.save_folder, "best.ckpt"))
        return self.best[1]

    def _write_history(self, seconds: float):
        """ `history.csv`; `seconds` is the only wall-clock column """
        if not self.save_folder:
            return
        row = pd.DataFrame([dict(self.history[-1], seconds=seconds)])
        path = os.path.join(self.save_folder, "history.csv")
        row.to_csv(path, mode="a", header=not os.path.exists(path), index=False)
