"""Network assembly: the 3x(conv+pool) -> flatten -> dense(100) -> dense(3) classifier."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError
from .layers import Conv2D, Dense, Flatten, Layer, MaxPool2x2
from .tensor import FLOAT, Tensor

INPUT_SHAPE = (150, 150, 3)
NUM_CLASSES = 3


class Network:
    """Ordered layer stack with shared forward/backward plumbing.

    Parameters live inside the layers; a frozen network may be shared
    read-only across threads. Training-mode forward caches per-layer
    activations that backward consumes.
    """

    def __init__(self, layers: list[Layer], input_shape: tuple[int, int, int] | None = None):
        self.layers = layers
        self.input_shape = input_shape

    @property
    def engine(self) -> str:
        for layer in self.layers:
            if isinstance(layer, Conv2D):
                return layer.engine
        return "im2col"

    @engine.setter
    def engine(self, value: str):
        if value not in ("im2col", "direct"):
            raise ValueError(f"unknown engine {value!r}")
        for layer in self.layers:
            if isinstance(layer, Conv2D):
                layer.engine = value

    @property
    def dtype(self):
        for _, _, p in self.parameters():
            return p.dtype
        return FLOAT

    def parameters(self):
        """Yield (layer_index, name, array) for every parameter tensor."""
        for i, layer in enumerate(self.layers):
            for name, p in layer.params.items():
                yield i, name, p

    def gradients(self):
        for i, layer in enumerate(self.layers):
            for name, g in layer.grads.items():
                yield i, name, g

    def param_count(self) -> int:
        return sum(layer.param_count() for layer in self.layers)

    def layer_param_counts(self) -> tuple[int, ...]:
        return tuple(layer.param_count() for layer in self.layers)

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        if self.input_shape is not None and tuple(x.shape[1:]) != self.input_shape:
            raise ShapeError(f"expected input (batch, {self.input_shape}), got {x.shape}")
        for layer in self.layers:
            x = layer.forward(x, training=training)
        return x

    def backward(self, dout: Tensor) -> None:
        """Reverse-mode pass from d(loss)/d(output), through the softmax head."""
        for layer in reversed(self.layers):
            dout = layer.backward(dout)

    def backward_from_logits(self, dlogits: Tensor) -> None:
        """Reverse-mode pass starting at the final layer's pre-activation.

        Used with the fused softmax + cross-entropy gradient, which is
        better conditioned than differentiating through the probabilities.
        """
        head = self.layers[-1]
        if not isinstance(head, Dense):
            raise ShapeError("network head is not a dense layer")
        dout = head.backward_from_preact(dlogits)
        for layer in reversed(self.layers[:-1]):
            dout = layer.backward(dout)

    def zero_grads(self) -> None:
        for _, _, g in self.gradients():
            g[...] = 0

    def astype(self, dtype) -> "Network":
        """Copy of the network with parameters cast to dtype (inference use)."""
        clone = clone_architecture(self)
        for src_layer, dst_layer in zip(self.layers, clone.layers):
            for name, p in src_layer.params.items():
                dst_layer.params[name] = p.astype(dtype)
                dst_layer.grads[name] = np.zeros_like(dst_layer.params[name])
        return clone


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(FLOAT)


def build_mask_net(seed: int) -> Network:
    """Build the 150x150x3 three-class classifier with seeded Glorot init.

    Layer chain: conv(32@3x3,relu) -> pool -> conv -> pool -> conv -> pool
    -> flatten -> dense(100,relu) -> dense(3,softmax). 944,595 parameters.
    Kernels are drawn in layer order from one seeded generator; biases are
    zero, so equal seeds give bitwise-equal networks.
    """
    rng = np.random.default_rng(seed)
    layers: list[Layer] = []
    in_c = 3
    for _ in range(3):
        k = glorot_uniform(rng, (3, 3, in_c, 32), fan_in=9 * in_c, fan_out=9 * 32)
        layers.append(Conv2D(k, np.zeros(32, dtype=FLOAT), activation="relu"))
        layers.append(MaxPool2x2())
        in_c = 32
    layers.append(Flatten())
    w1 = glorot_uniform(rng, (17 * 17 * 32, 100), fan_in=17 * 17 * 32, fan_out=100)
    layers.append(Dense(w1, np.zeros(100, dtype=FLOAT), activation="relu"))
    w2 = glorot_uniform(rng, (100, NUM_CLASSES), fan_in=100, fan_out=NUM_CLASSES)
    layers.append(Dense(w2, np.zeros(NUM_CLASSES, dtype=FLOAT), activation="softmax"))
    return Network(layers, input_shape=INPUT_SHAPE)


def _layer_descriptor(layer: Layer) -> dict:
    if isinstance(layer, Conv2D):
        return {
            "kind": "conv2d",
            "kernel_shape": list(layer.params["kernel"].shape),
            "activation": layer.activation,
        }
    if isinstance(layer, MaxPool2x2):
        return {"kind": "maxpool2x2"}
    if isinstance(layer, Flatten):
        return {"kind": "flatten"}
    if isinstance(layer, Dense):
        return {
            "kind": "dense",
            "weights_shape": list(layer.params["weights"].shape),
            "activation": layer.activation,
        }
    raise TypeError(f"cannot describe layer {type(layer).__name__}")


def describe_architecture(net: Network) -> dict:
    return {
        "input_shape": list(net.input_shape) if net.input_shape else None,
        "layers": [_layer_descriptor(l) for l in net.layers],
    }


def network_from_description(desc: dict) -> Network:
    """Rebuild a zero-initialized network from an architecture descriptor."""
    layers: list[Layer] = []
    for d in desc["layers"]:
        kind = d["kind"]
        if kind == "conv2d":
            kh, kw, ci, co = d["kernel_shape"]
            layers.append(
                Conv2D(np.zeros((kh, kw, ci, co), dtype=FLOAT), np.zeros(co, dtype=FLOAT),
                       activation=d.get("activation"))
            )
        elif kind == "maxpool2x2":
            layers.append(MaxPool2x2())
        elif kind == "flatten":
            layers.append(Flatten())
        elif kind == "dense":
            n_in, n_out = d["weights_shape"]
            layers.append(
                Dense(np.zeros((n_in, n_out), dtype=FLOAT), np.zeros(n_out, dtype=FLOAT),
                      activation=d.get("activation"))
            )
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
    shape = desc.get("input_shape")
    return Network(layers, input_shape=tuple(shape) if shape else None)


def clone_architecture(net: Network) -> Network:
    return network_from_description(describe_architecture(net))
