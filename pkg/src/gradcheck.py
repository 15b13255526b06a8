# -*- coding: utf-8 -*-
"""
Central finite-difference checks of the backward pass

Every case builds a scalar loss (a fixed random projection of an operation's
output) and compares the gradients of the inputs with
(L(x + h) - L(x - h)) / 2h, entry by entry:
    |g_ad - g_fd| / max(1, |g_fd|) < tolerance
"""
from typing import Callable, Dict

import numpy as np
import pandas as pd
from loguru import logger

from src.autodiff import Tensor, elu, temporal_conv, transposed_temporal_conv
from src.coarsening import build_hierarchy, pool, unpool
from src.geometry import GeometryBundle
from src.graph import BipartiteGraph, build_graph
from src.mesh import icosahedron
from src.network import BlockConfig, InverseNetwork, st_gcnn_block
from src.spline import EdgeBasis, SplineKernel, bipartite_spline_conv, spline_conv
from src.training import mse_loss

STEP = 1e-5
TOLERANCE = 1e-4
# sampled entries per parameter tensor in the full-model check
MODEL_ENTRIES = 16

TOY_MODEL = {
    "time_length": 8,
    "spline": {"degree": 1, "kernel_size": [3, 3, 3]},
    "encoder": {
        "blocks": [{"in_channels": 1, "out_channels": 2, "width": 3, "stride": 2, "padding": 1}],
        "layers": [{"channels": 2, "width": 3}],
    },
    "decoder": {
        "layers": [],
        "blocks": [{"in_channels": 2, "out_channels": 1, "width": 3, "stride": 2, "padding": 1,
                    "output_padding": 1}],
    },
}


def projected(output_fn: Callable[[], Tensor], rng: np.random.Generator) -> Callable[[], Tensor]:
    """ Scalar loss <R, f()> with R drawn once """
    projection = Tensor(rng.standard_normal(output_fn().shape))
    return lambda: (output_fn() * projection).sum()


def _loss_value(loss_fn) -> float:
    return float(loss_fn().data)


def check_gradients(loss_fn: Callable[[], Tensor], inputs: Dict[str, Tensor], step: float = STEP,
                    max_entries: int = None, rng: np.random.Generator = None) -> dict:
    """ Elementwise comparison over every input (or `max_entries` random
    entries of each), returns the worst errors """
    rng = rng or np.random.default_rng(0)
    for tensor in inputs.values():
        tensor.requires_grad = True
    loss = loss_fn()
    loss.backward()
    analytic = {name: (tensor.grad.copy() if tensor.grad is not None
                       else np.zeros_like(tensor.data))
                for name, tensor in inputs.items()}

    worst_rel, worst_abs, entries = 0.0, 0.0, 0
    for name, tensor in inputs.items():
        size = tensor.data.size
        flat_ids = np.arange(size) if max_entries is None or max_entries >= size \
            else np.sort(rng.choice(size, max_entries, replace=False))
        for flat in flat_ids:
            position = np.unravel_index(flat, tensor.shape)
            original = tensor.data[position]
            tensor.data[position] = original + step
            plus = _loss_value(loss_fn)
            tensor.data[position] = original - step
            minus = _loss_value(loss_fn)
            tensor.data[position] = original
            numeric = (plus - minus) / (2 * step)
            error = abs(analytic[name][position] - numeric)
            worst_abs = max(worst_abs, error)
            worst_rel = max(worst_rel, error / max(1.0, abs(numeric)))
            entries += 1
    return dict(max_rel_error=worst_rel, max_abs_error=worst_abs, entries=entries)


def check_direction(loss_fn: Callable[[], Tensor], inputs: Dict[str, Tensor],
                    step: float = STEP, rng: np.random.Generator = None) -> dict:
    """ <grad, d> against the directional difference of the loss along a random d """
    rng = rng or np.random.default_rng(0)
    for tensor in inputs.values():
        tensor.requires_grad = True
    loss_fn().backward()
    directions = {name: rng.standard_normal(tensor.shape) for name, tensor in inputs.items()}
    analytic = sum(float(np.sum(tensor.grad * directions[name]))
                   for name, tensor in inputs.items() if tensor.grad is not None)
    originals = {name: tensor.data.copy() for name, tensor in inputs.items()}

    values = []
    for sign in (1.0, -1.0):
        for name, tensor in inputs.items():
            tensor.data[...] = originals[name] + sign * step * directions[name]
        values.append(_loss_value(loss_fn))
    for name, tensor in inputs.items():
        tensor.data[...] = originals[name]
    numeric = (values[0] - values[1]) / (2 * step)
    error = abs(analytic - numeric)
    return dict(max_rel_error=error / max(1.0, abs(numeric)), max_abs_error=error, entries=1)


def toy_bundle() -> GeometryBundle:
    """ Icosahedron heart inside a scaled icosahedron torso, 12 -> 6 vertices each """
    mesh = icosahedron()
    heart = build_hierarchy(mesh, [6])
    torso = build_hierarchy(mesh.scaled(3.0), [6])
    return GeometryBundle(heart, torso, degree=TOY_MODEL["spline"]["degree"],
                          kernel_size=TOY_MODEL["spline"]["kernel_size"])


def _random(rng, shape, scale: float = 1.0) -> Tensor:
    return Tensor(scale * rng.standard_normal(shape), requires_grad=True)


def operation_cases(rng: np.random.Generator, bundle: GeometryBundle) -> dict:
    """ name -> (loss_fn, inputs) on small random data """
    cases = {}
    degree, kernel_size = bundle.degree, bundle.kernel_size
    graph = build_graph(bundle.heart.meshes[0])
    pooling_map = bundle.heart.maps[0]
    num_fine, num_coarse = pooling_map.num_fine, pooling_map.num_coarse

    xe = _random(rng, (5, 2, 6))
    cases["elu"] = (projected(lambda: elu(xe), rng), {"x": xe})

    x, w = _random(rng, (5, 2, 9)), _random(rng, (3, 2, 3), 0.5)
    cases["temporal_conv"] = (projected(lambda: temporal_conv(x, w, 2, 1), rng), {"x": x, "w": w})

    xt, wt = _random(rng, (5, 3, 4)), _random(rng, (3, 2, 3), 0.5)
    cases["transposed_temporal_conv"] = (
        projected(lambda: transposed_temporal_conv(xt, wt, 2, 1, 1), rng), {"x": xt, "w": wt})

    xp = _random(rng, (num_fine, 2, 4))
    cases["pool"] = (projected(lambda: pool(xp, pooling_map), rng), {"x": xp})
    xu = _random(rng, (num_coarse, 2, 4))
    cases["unpool"] = (projected(lambda: unpool(xu, pooling_map), rng), {"x": xu})

    kernel = SplineKernel(2, 3, degree, kernel_size)
    kernel.initialize(rng)
    basis = EdgeBasis(graph, degree, kernel_size)
    xs = _random(rng, (graph.num_vertices, 2, 4))
    cases["spline_conv"] = (projected(lambda: spline_conv(graph, xs, kernel, basis), rng),
                            {"x": xs, "w": kernel.weights})

    bgraph = BipartiteGraph(rng.standard_normal((4, 3)), rng.standard_normal((5, 3)))
    bkernel = SplineKernel(2, 2, degree, kernel_size)
    bkernel.initialize(rng)
    bbasis = EdgeBasis(bgraph, degree, kernel_size)
    zb = _random(rng, (4, 2, 3))
    cases["bipartite_spline_conv"] = (
        projected(lambda: bipartite_spline_conv(bgraph, zb, bkernel, bbasis), rng),
        {"x": zb, "w": bkernel.weights})

    block = BlockConfig(in_channels=2, out_channels=2, width=3, stride=2, padding=1)
    num_weights = int(np.prod(kernel_size))
    params = {"spline": _random(rng, (num_weights, 2, 2), 0.3),
              "residual": _random(rng, (2, 2, 1), 0.5),
              "temporal": _random(rng, (2, 2, 3), 0.5)}
    xb = _random(rng, (num_fine, 2, 8))
    heart_basis = bundle.heart_bases[0]
    cases["st_gcnn_block"] = (
        projected(lambda: st_gcnn_block(xb, block, heart_basis, pooling_map, params), rng),
        dict(params, x=xb))

    prediction, target = _random(rng, (5, 1, 6)), rng.standard_normal((5, 1, 6))
    cases["mse_loss"] = (lambda: mse_loss(prediction, target), {"x": prediction})
    return cases


def model_case(model: InverseNetwork, bundle: GeometryBundle, rng: np.random.Generator) -> tuple:
    """ MSE of the full network against a random target """
    time_length = model.config["time_length"]
    y = rng.standard_normal((bundle.num_torso, 1, time_length))
    target = rng.standard_normal((bundle.num_heart, 1, time_length))
    return (lambda: mse_loss(model(y, bundle), target)), dict(model.params)


def gradcheck_suite(model: InverseNetwork = None, bundle: GeometryBundle = None, seed: int = 0,
                    step: float = STEP, tolerance: float = TOLERANCE,
                    max_entries: int = MODEL_ENTRIES) -> pd.DataFrame:
    """ One row per operation: operation, entries, max_abs_error, max_rel_error, passed.
    Without a model the toy network on the toy geometry is checked.

    Operation rows compare every entry. The `full_model` row is a sample:
    at most `max_entries` random entries of each parameter tensor, with
    `full_model_direction` adding one random directional derivative over all
    of them.
    """
    rng = np.random.default_rng(seed)
    toy = toy_bundle()
    bundle = toy if bundle is None else bundle
    if model is None:
        model = InverseNetwork(TOY_MODEL, seed=seed)
    model.check_geometry(bundle)

    rows = []
    for name, (loss_fn, inputs) in operation_cases(rng, toy).items():
        rows.append(dict(operation=name, **check_gradients(loss_fn, inputs, step, rng=rng)))
    loss_fn, inputs = model_case(model, bundle, rng)
    rows.append(dict(operation="full_model",
                     **check_gradients(loss_fn, inputs, step, max_entries=max_entries, rng=rng)))
    rows.append(dict(operation="full_model_direction",
                     **check_direction(loss_fn, inputs, step, rng=rng)))

    table = pd.DataFrame(rows, columns=["operation", "entries", "max_abs_error", "max_rel_error"])
    table["passed"] = table.max_rel_error < tolerance
    for row in table.itertuples():
        if not row.passed:
            logger.warning(f"[Gradcheck] {row.operation}: relative error {row.max_rel_error:.3g}")
    return table
