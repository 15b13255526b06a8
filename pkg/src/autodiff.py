# -*- coding: utf-8 -*-
"""
Minimal reverse-mode differentiation over dense float64 arrays

Each operation returns a `Tensor` that remembers its parents and a closure
mapping the output gradient to one gradient per parent. `Tensor.backward`
walks the recorded graph in reverse topological order.

Signals on meshes are (nodes, channels, time) arrays; the temporal
convolutions below act on the last axis, independently per node.
"""
import struct
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.errors import ShapeError

TENSOR_MAGIC = b"GTEN"
TENSOR_VERSION = 1


class Tensor:
    """ Dense array with an optional gradient and its producing operation """
    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name
        self.op = "leaf"
        self._parents = ()
        self._grad_fn = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        """ Copy of the values """
        return self.data.copy()

    def detach(self) -> "Tensor":
        """ Same values, cut from the graph """
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, grad: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    # Arithmetic
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __truediv__(self, scalar: float):
        if isinstance(scalar, Tensor):
            raise ShapeError("Division is only defined by a Python scalar")
        return mul(self, 1.0 / scalar)

    def sum(self) -> "Tensor":
        return tensor_sum(self)

    def mean(self) -> "Tensor":
        return tensor_mean(self)

    def square(self) -> "Tensor":
        return mul(self, self)

    def backward(self):
        """ Populate `.grad` of every tensor flagged `requires_grad` that
        contributed to this scalar. Gradients of the graph are reset first, so
        calling twice gives the same result """
        if self.data.size != 1:
            raise ShapeError(f"backward needs a scalar, got shape {self.shape}")

        order = _topological_order(self)
        for node in order:
            node.grad = None
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._grad_fn is None or node.grad is None:
                continue
            parent_grads = node._grad_fn(node.grad)
            for parent, grad in zip(node._parents, parent_grads):
                if grad is not None and parent.requires_grad:
                    parent._accumulate(grad)


def _topological_order(root: Tensor) -> list:
    """ Iterative depth-first post-order over nodes requiring grad """
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def as_tensor(value) -> Tensor:
    """ Wrap constants, leave tensors untouched """
    return value if isinstance(value, Tensor) else Tensor(value)


def make_result(data: np.ndarray, parents: tuple, grad_fn, op: str) -> Tensor:
    """ Output tensor of an operation; `grad_fn(g)` returns one gradient
    (or None) per parent """
    out = Tensor(data)
    out.op = op
    if any(parent.requires_grad for parent in parents):
        out.requires_grad = True
        out._parents = parents
        out._grad_fn = grad_fn
    return out


def _check_same_shape(left: Tensor, right: Tensor, op: str):
    if left.shape != right.shape:
        raise ShapeError(f"{op}: shapes {left.shape} and {right.shape} differ")


def add(left, right) -> Tensor:
    left, right = as_tensor(left), as_tensor(right)
    if right.ndim == 0 and left.ndim > 0:
        return make_result(left.data + right.data, (left, right),
                           lambda g: (g, np.sum(g)), "add")
    _check_same_shape(left, right, "add")
    return make_result(left.data + right.data, (left, right), lambda g: (g, g), "add")


def neg(x: Tensor) -> Tensor:
    return make_result(-x.data, (x,), lambda g: (-g,), "neg")


def mul(left, right) -> Tensor:
    """ Elementwise product, or product by a scalar """
    left = as_tensor(left)
    if not isinstance(right, Tensor):
        factor = float(right)
        return make_result(left.data * factor, (left,), lambda g: (g * factor,), "scale")
    _check_same_shape(left, right, "mul")
    return make_result(left.data * right.data, (left, right),
                       lambda g: (g * right.data, g * left.data), "mul")


def tensor_sum(x: Tensor) -> Tensor:
    return make_result(np.sum(x.data), (x,),
                       lambda g: (np.full(x.shape, float(g)),), "sum")


def tensor_mean(x: Tensor) -> Tensor:
    size = x.data.size
    return make_result(np.mean(x.data), (x,),
                       lambda g: (np.full(x.shape, float(g) / size),), "mean")


def elu(x: Tensor) -> Tensor:
    """ x if x > 0 else exp(x) - 1 """
    negative = np.exp(np.minimum(x.data, 0.0))
    data = np.where(x.data > 0, x.data, negative - 1.0)
    slope = np.where(x.data > 0, 1.0, negative)
    return make_result(data, (x,), lambda g: (g * slope,), "elu")


def node_matmul(matrix: np.ndarray, x: Tensor) -> Tensor:
    """ Constant matrix applied along the node axis: (A, B) x (B, ...) -> (A, ...) """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != x.shape[0]:
        raise ShapeError(
            f"node_matmul: matrix {matrix.shape} does not act on {x.shape[0]} nodes")
    data = np.tensordot(matrix, x.data, axes=(1, 0))
    return make_result(data, (x,),
                       lambda g: (np.tensordot(matrix.T, g, axes=(1, 0)),), "node_matmul")


# Temporal convolution, on arrays of shape (nodes, channels, time)

def _pad_time(data: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return data
    return np.pad(data, ((0, 0), (0, 0), (padding, padding)))


def _windows(padded: np.ndarray, width: int, stride: int) -> np.ndarray:
    """ (V, C, S, width) strided view """
    return sliding_window_view(padded, width, axis=2)[:, :, ::stride, :]


def _correlate(padded: np.ndarray, weights: np.ndarray, stride: int) -> np.ndarray:
    return np.einsum("vcsk,ock->vos", _windows(padded, weights.shape[2], stride), weights)


def _correlate_adjoint(grad: np.ndarray, weights: np.ndarray, stride: int,
                       padded_length: int) -> np.ndarray:
    out = np.zeros((grad.shape[0], weights.shape[1], padded_length))
    span = stride * (grad.shape[2] - 1) + 1
    for k in range(weights.shape[2]):
        out[:, :, k:k + span:stride] += np.einsum("vos,oc->vcs", grad, weights[:, :, k])
    return out


def _kernel_gradient(padded: np.ndarray, grad: np.ndarray, stride: int,
                     width: int) -> np.ndarray:
    return np.einsum("vcsk,vos->ock", _windows(padded, width, stride), grad)


def conv_output_length(length: int, width: int, stride: int, padding: int) -> int:
    """ floor((T + 2 padding - width) / stride) + 1 """
    return (length + 2 * padding - width) // stride + 1


def transposed_output_length(length: int, width: int, stride: int, padding: int,
                             output_padding: int = 0) -> int:
    """ (T - 1) stride - 2 padding + width + output_padding """
    return (length - 1) * stride - 2 * padding + width + output_padding


def temporal_conv(x: Tensor, weights: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """ Cross-correlation along time; weights are (out_ch, in_ch, width) """
    if x.ndim != 3 or weights.ndim != 3:
        raise ShapeError(f"temporal_conv expects 3-d input and kernel, got {x.shape}, {weights.shape}")
    if weights.shape[1] != x.shape[1]:
        raise ShapeError(
            f"temporal_conv: kernel expects {weights.shape[1]} channels, input has {x.shape[1]}")
    if stride < 1:
        raise ShapeError("temporal_conv: stride must be >= 1")
    length, width = x.shape[2], weights.shape[2]
    padded_length = length + 2 * padding
    if width > padded_length:
        raise ShapeError(f"temporal_conv: width {width} exceeds padded length {padded_length}")

    padded = _pad_time(x.data, padding)
    data = _correlate(padded, weights.data, stride)

    def grad_fn(grad):
        grad_x = None
        if x.requires_grad:
            grad_x = _correlate_adjoint(grad, weights.data, stride,
                                        padded_length)[:, :, padding:padding + length]
        grad_w = _kernel_gradient(padded, grad, stride, width) if weights.requires_grad else None
        return grad_x, grad_w

    return make_result(data, (x, weights), grad_fn, "temporal_conv")


def transposed_temporal_conv(x: Tensor, weights: Tensor, stride: int = 1, padding: int = 0,
                             output_padding: int = 0) -> Tensor:
    """ Adjoint of `temporal_conv` with the same kernel (out_ch, in_ch, width):
    maps out_ch channels back to in_ch channels and expands time """
    if x.ndim != 3 or weights.ndim != 3:
        raise ShapeError(
            f"transposed_temporal_conv expects 3-d input and kernel, got {x.shape}, {weights.shape}")
    if weights.shape[0] != x.shape[1]:
        raise ShapeError(
            f"transposed_temporal_conv: kernel expects {weights.shape[0]} channels, "
            f"input has {x.shape[1]}")
    if stride < 1:
        raise ShapeError("transposed_temporal_conv: stride must be >= 1")
    if output_padding < 0 or (output_padding >= stride and output_padding != 0):
        raise ShapeError("transposed_temporal_conv: output_padding must be smaller than stride")
    length, width = x.shape[2], weights.shape[2]
    padded_length = (length - 1) * stride + width + output_padding
    out_length = padded_length - 2 * padding
    if out_length < 1:
        raise ShapeError("transposed_temporal_conv: padding removes the whole output")

    data = _correlate_adjoint(x.data, weights.data, stride,
                              padded_length)[:, :, padding:padding + out_length]

    def grad_fn(grad):
        padded_grad = _pad_time(grad, padding)
        grad_x = _correlate(padded_grad, weights.data, stride) if x.requires_grad else None
        grad_w = _kernel_gradient(padded_grad, x.data, stride, width).transpose(1, 0, 2) \
            if weights.requires_grad else None
        return grad_x, grad_w

    return make_result(data, (x, weights), grad_fn, "transposed_temporal_conv")


# Serialization: magic, version, rank, dims, row-major little-endian doubles

def write_tensor_block(openfile, array: np.ndarray):
    """ Append one tensor block to an open binary file """
    array = np.ascontiguousarray(array, dtype="<f8")
    openfile.write(TENSOR_MAGIC)
    openfile.write(struct.pack("<II", TENSOR_VERSION, array.ndim))
    if array.ndim:
        openfile.write(struct.pack(f"<{array.ndim}Q", *array.shape))
    openfile.write(array.tobytes(order="C"))


def read_tensor_block(openfile) -> np.ndarray:
    """ Read the next tensor block of an open binary file """
    magic = openfile.read(4)
    if magic != TENSOR_MAGIC:
        raise ShapeError(f"Not a tensor block (magic {magic!r})")
    version, rank = struct.unpack("<II", openfile.read(8))
    if version != TENSOR_VERSION:
        raise ShapeError(f"Unsupported tensor block version {version}")
    dims = struct.unpack(f"<{rank}Q", openfile.read(8 * rank)) if rank else ()
    count = int(np.prod(dims)) if dims else 1
    payload = openfile.read(8 * count)
    if len(payload) != 8 * count:
        raise ShapeError(f"Truncated tensor block: expected {count} values")
    return np.frombuffer(payload, dtype="<f8").reshape(dims).astype(np.float64)


def save_tensor(path: str, array) -> None:
    """ One tensor per file """
    if isinstance(array, Tensor):
        array = array.data
    with open(path, "wb") as openfile:
        write_tensor_block(openfile, np.asarray(array))


def load_tensor(path: str) -> np.ndarray:
    with open(path, "rb") as openfile:
        return read_tensor_block(openfile)
