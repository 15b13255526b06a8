# -*- coding: utf-8 -*-
"""
Spatio-temporal graph encoder, bipartite inverse block and decoder

Y (torso, 1, T) --encoder--> z_b (torso latent) --bipartite spline conv-->
z_h (heart latent) --decoder--> X_hat (heart, 1, T)

Each ST-GCNN block: spline conv + width-1 residual conv, ELU, temporal conv
(strided in the encoder, transposed in the decoder), then pool or unpool.
"""
from collections import OrderedDict
from copy import deepcopy
from dataclasses import dataclass
from typing import Dict

import numpy as np

from src.autodiff import (Tensor, conv_output_length, elu, temporal_conv,
                          transposed_output_length, transposed_temporal_conv)
from src.coarsening import PoolingMap, pool, unpool
from src.errors import ShapeError
from src.geometry import GeometryBundle
from src.spline import EdgeBasis, spline_aggregate

DEFAULT_MODEL = {
    "time_length": 60,
    "spline": {"degree": 1, "kernel_size": [5, 5, 5]},
    "encoder": {
        "blocks": [
            {"in_channels": 1, "out_channels": 16, "width": 5, "stride": 2, "padding": 2},
            {"in_channels": 16, "out_channels": 32, "width": 5, "stride": 2, "padding": 2},
            {"in_channels": 32, "out_channels": 64, "width": 5, "stride": 2, "padding": 2},
        ],
        "layers": [{"channels": 64, "width": 3}, {"channels": 64, "width": 3}],
    },
    "decoder": {
        "layers": [{"channels": 64, "width": 3}, {"channels": 64, "width": 3}],
        "blocks": [
            {"in_channels": 64, "out_channels": 32, "width": 5, "stride": 2, "padding": 2,
             "output_padding": 0},
            {"in_channels": 32, "out_channels": 16, "width": 5, "stride": 2, "padding": 2,
             "output_padding": 1},
            {"in_channels": 16, "out_channels": 16, "width": 5, "stride": 2, "padding": 2,
             "output_padding": 1},
            {"in_channels": 16, "out_channels": 1, "width": 5, "stride": 1, "padding": 2,
             "output_padding": 0},
        ],
    },
}


@dataclass(frozen=True)
class BlockConfig:
    """ One ST-GCNN block; `direction` is `encode` (pool) or `decode` (unpool) """
    in_channels: int
    out_channels: int
    width: int = 5
    stride: int = 1
    padding: int = 0
    output_padding: int = 0
    direction: str = "encode"
    resample: bool = True

    def __post_init__(self):
        if self.stride < 1 or self.in_channels < 1 or self.out_channels < 1 or self.width < 1:
            raise ValueError(f"Invalid block config {self}")
        if self.direction not in ("encode", "decode"):
            raise ValueError(f"Block direction should be `encode` or `decode`, got {self.direction}")

    def output_length(self, length: int) -> int:
        if self.direction == "encode":
            return conv_output_length(length, self.width, self.stride, self.padding)
        return transposed_output_length(length, self.width, self.stride, self.padding,
                                        self.output_padding)

    @classmethod
    def from_dict(cls, config: dict, direction: str) -> "BlockConfig":
        return cls(direction=direction, **config)


def block_configs(model_config: dict) -> tuple:
    encoder = [BlockConfig.from_dict(block, "encode") for block in model_config["encoder"]["blocks"]]
    decoder = [BlockConfig.from_dict(block, "decode") for block in model_config["decoder"]["blocks"]]
    return encoder, decoder


def time_lengths(model_config: dict) -> dict:
    """ Time length after every stage, raises if encoder and decoder disagree """
    encoder, decoder = block_configs(model_config)
    length = model_config["time_length"]
    lengths = {"input": length}
    for index, block in enumerate(encoder):
        length = block.output_length(length)
        if length < 1:
            raise ShapeError(f"Encoder block {index} shrinks time below 1 frame")
        lengths[f"encoder.{index}"] = length
    for layer in model_config["encoder"]["layers"] + model_config["decoder"]["layers"]:
        length = conv_output_length(length, layer["width"], 1, layer["width"] // 2)
    lengths["latent"] = length
    for index, block in enumerate(decoder):
        length = block.output_length(length)
        lengths[f"decoder.{index}"] = length
    if length != model_config["time_length"]:
        raise ShapeError(
            f"Decoder returns {length} frames, expected {model_config['time_length']}")
    return lengths


def _block_shapes(prefix: str, block: BlockConfig, num_weights: int) -> dict:
    return {
        f"{prefix}.spline": (num_weights, block.in_channels, block.out_channels),
        f"{prefix}.residual": (block.out_channels, block.in_channels, 1),
        f"{prefix}.temporal": (block.out_channels, block.out_channels, block.width),
    }


def parameter_shapes(model_config: dict) -> "OrderedDict[str, tuple]":
    """ Name -> shape, a pure function of the model configuration """
    num_weights = int(np.prod(model_config["spline"]["kernel_size"]))
    encoder, decoder = block_configs(model_config)
    shapes = OrderedDict()
    for index, block in enumerate(encoder):
        shapes.update(_block_shapes(f"encoder.{index}", block, num_weights))
    channels = encoder[-1].out_channels
    for index, layer in enumerate(model_config["encoder"]["layers"]):
        shapes[f"encoder.layer.{index}"] = (layer["channels"], channels, layer["width"])
        channels = layer["channels"]
    shapes["inverse.spline"] = (num_weights, channels, channels)
    for index, layer in enumerate(model_config["decoder"]["layers"]):
        shapes[f"decoder.layer.{index}"] = (layer["channels"], channels, layer["width"])
        channels = layer["channels"]
    if decoder and decoder[0].in_channels != channels:
        raise ShapeError(
            f"Decoder expects {decoder[0].in_channels} channels, latent has {channels}")
    for index, block in enumerate(decoder):
        shapes.update(_block_shapes(f"decoder.{index}", block, num_weights))
    for blocks in (encoder, decoder):
        for previous, block in zip(blocks, blocks[1:]):
            if previous.out_channels != block.in_channels:
                raise ShapeError(f"Channel mismatch between consecutive blocks: {previous} -> {block}")
    return shapes


def init_bound(name: str, shape: tuple, support: int) -> float:
    """ (fan_in * basis support) ** -0.5 """
    if name.endswith(".spline"):
        return (shape[1] * support) ** -0.5
    return (shape[1] * shape[2]) ** -0.5


def _check_nodes(x: Tensor, expected: int, where: str):
    if x.shape[0] != expected:
        raise ShapeError(f"{where}: tensor on {x.shape[0]} nodes, level has {expected}")


def st_gcnn_block(x: Tensor, block: BlockConfig, edge_basis: EdgeBasis,
                  pooling_map: PoolingMap, params: Dict[str, Tensor]) -> Tensor:
    """ `params` holds `spline`, `residual` and `temporal` tensors """
    _check_nodes(x, edge_basis.num_sources, "st_gcnn_block")
    if x.shape[1] != block.in_channels:
        raise ShapeError(f"st_gcnn_block: {x.shape[1]} channels in, block expects {block.in_channels}")
    spatial = spline_aggregate(x, params["spline"], edge_basis)
    hidden = elu(spatial + temporal_conv(x, params["residual"]))
    if block.direction == "encode":
        hidden = temporal_conv(hidden, params["temporal"], block.stride, block.padding)
    else:
        hidden = transposed_temporal_conv(hidden, params["temporal"], block.stride,
                                          block.padding, block.output_padding)
    if pooling_map is None or not block.resample:
        return hidden
    return pool(hidden, pooling_map) if block.direction == "encode" else unpool(hidden, pooling_map)


class InverseNetwork:
    """
    Encoder, bipartite inverse map and decoder sharing one parameter dict.
    Parameters do not depend on the geometry, the bundle is passed per call.
    """
    def __init__(self, model_config: dict = None, seed: int = 0):
        self.config = deepcopy(model_config or DEFAULT_MODEL)
        self.encoder_blocks, self.decoder_blocks = block_configs(self.config)
        self.time_lengths = time_lengths(self.config)
        self.support = (self.config["spline"]["degree"] + 1) ** 3
        self.params = OrderedDict(
            (name, Tensor(np.zeros(shape), requires_grad=True, name=name))
            for name, shape in parameter_shapes(self.config).items())
        self.initialize(seed)

    def __repr__(self):
        return f"InverseNetwork(parameters={self.num_parameters})"

    def initialize(self, seed: int):
        rng = np.random.default_rng(seed)
        for name, param in self.params.items():
            bound = init_bound(name, param.shape, self.support)
            param.data[...] = rng.uniform(-bound, bound, size=param.shape)

    @property
    def num_parameters(self) -> int:
        return int(sum(param.data.size for param in self.params.values()))

    def zero_grad(self):
        for param in self.params.values():
            param.zero_grad()

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((name, param.data.copy()) for name, param in self.params.items())

    def load_state_dict(self, state: dict):
        for name, param in self.params.items():
            if name not in state:
                raise ShapeError(f"Missing parameter `{name}`")
            if state[name].shape != param.shape:
                raise ShapeError(f"Parameter `{name}` has shape {state[name].shape}, "
                                 f"expected {param.shape}")
            param.data[...] = state[name]

    def _block_params(self, prefix: str) -> dict:
        return {key: self.params[f"{prefix}.{key}"] for key in ("spline", "residual", "temporal")}

    def check_geometry(self, bundle: GeometryBundle):
        if len(bundle.torso) != len(self.encoder_blocks) + 1:
            raise ShapeError(f"Encoder has {len(self.encoder_blocks)} blocks, torso hierarchy "
                             f"has {len(bundle.torso)} levels")
        if len(bundle.heart) != len(self.decoder_blocks) + 1:
            raise ShapeError(f"Decoder has {len(self.decoder_blocks)} blocks, heart hierarchy "
                             f"has {len(bundle.heart)} levels")
        if bundle.kernel_size != tuple(self.config["spline"]["kernel_size"]) or \
                bundle.degree != self.config["spline"]["degree"]:
            raise ShapeError("Geometry bundle spline bases do not match the model kernels")

    def _layers(self, x: Tensor, side: str) -> Tensor:
        for index, layer in enumerate(self.config[side]["layers"]):
            x = elu(temporal_conv(x, self.params[f"{side}.layer.{index}"],
                                  stride=1, padding=layer["width"] // 2))
        return x

    def encode(self, y: Tensor, bundle: GeometryBundle) -> Tensor:
        """ (torso, 1, T) -> (torso latent, channels, latent T) """
        self.check_geometry(bundle)
        _check_nodes(y, bundle.num_torso, "encode")
        if y.shape[1:] != (self.encoder_blocks[0].in_channels, self.config["time_length"]):
            raise ShapeError(f"encode: expected (nodes, {self.encoder_blocks[0].in_channels}, "
                             f"{self.config['time_length']}), got {y.shape}")
        x = y
        for index, block in enumerate(self.encoder_blocks):
            x = st_gcnn_block(x, block, bundle.torso_bases[index], bundle.torso.maps[index],
                              self._block_params(f"encoder.{index}"))
            _check_nodes(x, bundle.torso.vertex_counts[index + 1], f"encoder block {index}")
        return self._layers(x, "encoder")

    def inverse_map(self, z_b: Tensor, bundle: GeometryBundle) -> Tensor:
        _check_nodes(z_b, bundle.bipartite.num_left, "inverse_map")
        return spline_aggregate(z_b, self.params["inverse.spline"], bundle.bipartite_basis)

    def decode(self, z_h: Tensor, bundle: GeometryBundle) -> Tensor:
        """ (heart latent, channels, latent T) -> (heart, 1, T) """
        self.check_geometry(bundle)
        levels = len(bundle.heart) - 1
        _check_nodes(z_h, bundle.heart.vertex_counts[levels], "decode")
        x = self._layers(z_h, "decoder")
        for index, block in enumerate(self.decoder_blocks):
            level = levels - index
            x = st_gcnn_block(x, block, bundle.heart_bases[level], bundle.heart.maps[level - 1],
                              self._block_params(f"decoder.{index}"))
            _check_nodes(x, bundle.heart.vertex_counts[level - 1], f"decoder block {index}")
        return x

    def forward(self, y: Tensor, bundle: GeometryBundle) -> Tensor:
        return self.decode(self.inverse_map(self.encode(y, bundle), bundle), bundle)

    def __call__(self, y, bundle: GeometryBundle) -> Tensor:
        if not isinstance(y, Tensor):
            y = Tensor(y)
        return self.forward(y, bundle)

    def predict(self, y: np.ndarray, bundle: GeometryBundle) -> np.ndarray:
        """ Forward pass on a plain array, no graph kept """
        return self.forward(Tensor(y), bundle).numpy()
