"""
Reverse-mode differentiation over dense float64 arrays.

A Graph records every operation in creation order, which is a topological
order, so backward simply walks the node list in reverse. Tensors are
immutable once created. Each graph is single-threaded; distinct graphs can be
built and differentiated concurrently.
"""

import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from app.exceptions import ModelError, ShapeError

logger = logging.getLogger(__name__)

# Additive mask value; exp underflows to exactly zero after max-subtraction.
MASK_VALUE = -1e30
LOG_FLOOR = 1e-300

ArrayLike = Union[np.ndarray, Sequence[float], float]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Tensor:
    """A node of a computation graph: immutable data plus its provenance."""

    __slots__ = ("data", "index", "parents", "op", "name", "trainable", "_backward")

    def __init__(self,
                 data: np.ndarray,
                 index: int,
                 parents: Tuple["Tensor", ...] = (),
                 op: str = "constant",
                 backward: Optional[BackwardFn] = None,
                 name: Optional[str] = None,
                 trainable: bool = False):
        data = np.array(data, dtype=np.float64)
        data.setflags(write=False)
        self.data = data
        self.index = index
        self.parents = parents
        self.op = op
        self.name = name
        self.trainable = trainable
        self._backward = backward

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item: tensor of shape {self.shape} is not a scalar")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(op={self.op}, shape={self.shape}{label})"


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to an operand's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


class Graph:
    """
    Records operations on tensors for one forward/backward pass.

    Attributes:
        nodes: Every tensor in creation (topological) order
        parameters: Named trainable leaves
    """

    def __init__(self):
        self.nodes: List[Tensor] = []
        self.parameters: Dict[str, Tensor] = {}

    def _record(self,
                data: np.ndarray,
                parents: Tuple[Tensor, ...],
                op: str,
                backward: Optional[BackwardFn]) -> Tensor:
        for parent in parents:
            if parent.index >= len(self.nodes) or self.nodes[parent.index] is not parent:
                raise ShapeError(f"{op}: operand {parent!r} belongs to another graph")
        node = Tensor(data, len(self.nodes), parents=parents, op=op, backward=backward)
        self.nodes.append(node)
        return node

    # Leaves

    def param(self, name: str, array: ArrayLike) -> Tensor:
        """
        Register (or fetch) a named trainable leaf.

        Args:
            name: Parameter name, unique within the graph
            array: Initial value; copied

        Returns:
            Tensor: The leaf
        """
        existing = self.parameters.get(name)
        if existing is not None:
            return existing
        node = Tensor(array, len(self.nodes), op="param", name=name, trainable=True)
        self.nodes.append(node)
        self.parameters[name] = node
        return node

    def constant(self, array: ArrayLike) -> Tensor:
        """Register a non-trainable leaf."""
        node = Tensor(array, len(self.nodes), op="constant")
        self.nodes.append(node)
        return node

    # Linear algebra and elementwise arithmetic

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
        a_data, b_data = a.data, b.data

        def backward(grad):
            return grad @ b_data.T, a_data.T @ grad

        return self._record(a_data @ b_data, (a, b), "matmul", backward)

    def transpose(self, a: Tensor) -> Tensor:
        if a.data.ndim != 2:
            raise ShapeError(f"transpose: expected a 2-D tensor, got shape {a.shape}")

        def backward(grad):
            return (grad.T,)

        return self._record(a.data.T, (a,), "transpose", backward)

    def _broadcast_shape(self, op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
        try:
            return np.broadcast_shapes(a.shape, b.shape)
        except ValueError:
            raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        self._broadcast_shape("add", a, b)
        a_shape, b_shape = a.shape, b.shape

        def backward(grad):
            return _unbroadcast(grad, a_shape), _unbroadcast(grad, b_shape)

        return self._record(a.data + b.data, (a, b), "add", backward)

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        self._broadcast_shape("sub", a, b)
        a_shape, b_shape = a.shape, b.shape

        def backward(grad):
            return _unbroadcast(grad, a_shape), -_unbroadcast(grad, b_shape)

        return self._record(a.data - b.data, (a, b), "sub", backward)

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        """Elementwise (Hadamard) product with broadcasting."""
        self._broadcast_shape("mul", a, b)
        a_data, b_data = a.data, b.data

        def backward(grad):
            return _unbroadcast(grad * b_data, a_data.shape), _unbroadcast(grad * a_data, b_data.shape)

        return self._record(a_data * b_data, (a, b), "mul", backward)

    def scale(self, a: Tensor, factor: float) -> Tensor:
        factor = float(factor)

        def backward(grad):
            return (grad * factor,)

        return self._record(a.data * factor, (a,), "scale", backward)

    def concat(self, tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
        if not tensors:
            raise ShapeError("concat: no operands")
        ndim = tensors[0].data.ndim
        for tensor in tensors:
            other_dims = [d for i, d in enumerate(tensor.shape) if i != axis % ndim]
            first_dims = [d for i, d in enumerate(tensors[0].shape) if i != axis % ndim]
            if tensor.data.ndim != ndim or other_dims != first_dims:
                raise ShapeError(
                    f"concat(axis={axis}): incompatible shapes {[t.shape for t in tensors]}"
                )
        sizes = [tensor.shape[axis] for tensor in tensors]
        boundaries = np.cumsum(sizes)[:-1]

        def backward(grad):
            return tuple(np.split(grad, boundaries, axis=axis))

        data = np.concatenate([tensor.data for tensor in tensors], axis=axis)
        return self._record(data, tuple(tensors), "concat", backward)

    # Nonlinearities

    def sigmoid(self, a: Tensor) -> Tensor:
        out = expit(a.data)

        def backward(grad):
            return (grad * out * (1.0 - out),)

        return self._record(out, (a,), "sigmoid", backward)

    def tanh(self, a: Tensor) -> Tensor:
        out = np.tanh(a.data)

        def backward(grad):
            return (grad * (1.0 - out * out),)

        return self._record(out, (a,), "tanh", backward)

    def softmax(self, a: Tensor) -> Tensor:
        """Row-wise softmax of a 2-D tensor."""
        if a.data.ndim != 2:
            raise ShapeError(f"softmax: expected a 2-D tensor, got shape {a.shape}")
        out = _softmax_rows(a.data)
        return self._record(out, (a,), "softmax", self._softmax_backward(out))

    def masked_softmax(self, a: Tensor, mask: np.ndarray) -> Tensor:
        """
        Row-wise softmax with masked positions forced to probability zero.

        Args:
            a: 2-D logits
            mask: Boolean array broadcastable to ``a``; True marks excluded entries

        Raises:
            ModelError: If a row has no unmasked entry
        """
        if a.data.ndim != 2:
            raise ShapeError(f"masked_softmax: expected a 2-D tensor, got shape {a.shape}")
        try:
            mask = np.broadcast_to(np.asarray(mask, dtype=bool), a.shape)
        except ValueError:
            raise ShapeError(f"masked_softmax: mask shape {np.shape(mask)} does not fit {a.shape}")
        fully_masked = np.flatnonzero(mask.all(axis=1))
        if fully_masked.size:
            raise ModelError(f"masked_softmax: row {int(fully_masked[0])} is fully masked")
        out = _softmax_rows(a.data + np.where(mask, MASK_VALUE, 0.0))
        return self._record(out, (a,), "masked_softmax", self._softmax_backward(out))

    @staticmethod
    def _softmax_backward(out: np.ndarray) -> BackwardFn:
        def backward(grad):
            return (out * (grad - (grad * out).sum(axis=1, keepdims=True)),)
        return backward

    # Reductions and indexing

    def cross_entropy(self, probs: Tensor, gold: Sequence[int]) -> Tensor:
        """
        Summed negative log-likelihood of gold columns under row distributions.

        Args:
            probs: n x k row-stochastic tensor
            gold: n gold column indices

        Returns:
            Tensor: Scalar loss
        """
        gold = np.asarray(gold, dtype=np.int64)
        if probs.data.ndim != 2 or gold.shape != (probs.shape[0],):
            raise ShapeError(f"cross_entropy: {len(gold)} gold indices for shape {probs.shape}")
        if gold.size and (gold.min() < 0 or gold.max() >= probs.shape[1]):
            raise ShapeError(f"cross_entropy: gold index out of range for shape {probs.shape}")
        rows = np.arange(gold.size)
        picked = np.maximum(probs.data[rows, gold], LOG_FLOOR)
        shape = probs.shape

        def backward(grad):
            full = np.zeros(shape)
            full[rows, gold] = -grad / picked
            return (full,)

        return self._record(np.array(-np.log(picked).sum()), (probs,), "cross_entropy", backward)

    def sum(self, a: Tensor) -> Tensor:
        shape = a.shape

        def backward(grad):
            return (np.broadcast_to(grad, shape).copy(),)

        return self._record(np.array(a.data.sum()), (a,), "sum", backward)

    def slice(self, a: Tensor, key) -> Tensor:
        """Basic (non-fancy) slicing; ``key`` as accepted by ndarray indexing."""
        shape = a.shape
        try:
            out = a.data[key]
        except IndexError as e:
            raise ShapeError(f"slice: {e} for shape {shape}")

        def backward(grad):
            full = np.zeros(shape)
            full[key] = grad
            return (full,)

        return self._record(out, (a,), "slice", backward)

    def gather_rows(self, a: Tensor, indices: Sequence[int]) -> Tensor:
        """Select rows (with repetition) from a 2-D tensor."""
        indices = np.asarray(indices, dtype=np.int64)
        if a.data.ndim != 2 or (indices.size and (indices.min() < 0 or indices.max() >= a.shape[0])):
            raise ShapeError(f"gather_rows: indices out of range for shape {a.shape}")
        shape = a.shape

        def backward(grad):
            full = np.zeros(shape)
            np.add.at(full, indices, grad)
            return (full,)

        return self._record(a.data[indices], (a,), "gather_rows", backward)

    # Differentiation

    def backward(self, loss: Tensor) -> Dict[str, np.ndarray]:
        """
        Gradients of a scalar loss with respect to every named parameter.

        Args:
            loss: Scalar tensor recorded in this graph

        Returns:
            Dict[str, np.ndarray]: Gradient per parameter, zero for parameters
                the loss does not depend on

        Raises:
            ShapeError: If the loss is not a scalar
        """
        if loss.data.size != 1:
            raise ShapeError(f"backward: loss must be a scalar, got shape {loss.shape}")
        if loss.index >= len(self.nodes) or self.nodes[loss.index] is not loss:
            raise ShapeError("backward: loss belongs to another graph")

        grads: List[Optional[np.ndarray]] = [None] * len(self.nodes)
        grads[loss.index] = np.ones_like(loss.data)
        for node in reversed(self.nodes[: loss.index + 1]):
            grad = grads[node.index]
            if grad is None or node._backward is None:
                continue
            for parent, parent_grad in zip(node.parents, node._backward(grad)):
                if parent_grad is None:
                    continue
                current = grads[parent.index]
                grads[parent.index] = parent_grad if current is None else current + parent_grad

        result: Dict[str, np.ndarray] = {}
        for name, leaf in self.parameters.items():
            grad = grads[leaf.index]
            result[name] = np.zeros(leaf.shape) if grad is None else np.array(grad, dtype=np.float64)
        return result


GraphBuilder = Callable[[Dict[str, np.ndarray]], Tuple[Graph, Tensor]]


def grad_check(graph_builder: GraphBuilder,
               params: Dict[str, np.ndarray],
               eps: float = 1e-5,
               atol: float = 1e-8,
               max_elements: Optional[int] = None,
               seed: int = 0) -> float:
    """
    Compare backward gradients with central finite differences.

    The relative error of an element is ``|a - n| / max(|a|, |n|, 1e-8)``;
    elements whose absolute discrepancy is below ``atol`` count as exact,
    since central differences cannot resolve smaller values.

    Args:
        graph_builder: Deterministic function building (graph, scalar loss)
            from a name -> array mapping
        params: Point at which to check
        eps: Finite-difference step
        atol: Absolute discrepancy treated as round-off
        max_elements: Check at most this many entries per parameter,
            sampled with ``seed``; None checks every entry
        seed: Sampling seed

    Returns:
        float: Maximum relative error over checked elements
    """
    base = {name: np.array(value, dtype=np.float64) for name, value in params.items()}
    graph, loss = graph_builder(base)
    analytic = graph.backward(loss)
    rng = np.random.default_rng(seed)

    def evaluate(name: str, flat_index: int, delta: float) -> float:
        shifted = dict(base)
        value = base[name].copy()
        value.flat[flat_index] += delta
        shifted[name] = value
        _, shifted_loss = graph_builder(shifted)
        return shifted_loss.item()

    worst = 0.0
    for name in sorted(base):
        size = base[name].size
        if max_elements is not None and size > max_elements:
            indices = np.sort(rng.choice(size, size=max_elements, replace=False))
        else:
            indices = np.arange(size)
        gradient = analytic.get(name)
        for flat_index in indices:
            numeric = (evaluate(name, flat_index, eps) - evaluate(name, flat_index, -eps)) / (2.0 * eps)
            exact = 0.0 if gradient is None else float(gradient.flat[flat_index])
            difference = abs(exact - numeric)
            if difference < atol:
                continue
            worst = max(worst, difference / max(abs(exact), abs(numeric), 1e-8))
    logger.debug(f"grad_check over {len(base)} parameters: max relative error {worst:.3e}")
    return worst
