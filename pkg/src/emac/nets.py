"""Minimal dense-network engine: MLPs with analytic backprop, Adam, soft target updates.

Everything here is plain float64 numpy. Networks are chains of affine layers
with an activation after each one; no other layer types exist. Forward passes
cache enough intermediates for an exact analytic backward pass, so gradients
can be checked against finite differences to tight tolerances.
"""

import io
import struct

import numpy as np

HIDDEN_ACTIVATIONS = ("relu", "identity")
OUTPUT_ACTIVATIONS = ("identity", "tanh")

_CHECKPOINT_MAGIC = b"EMNN"


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z):
    # Subgradient at exactly 0 is taken as 0.
    return (z > 0.0).astype(np.float64)


class ForwardCache:
    """Intermediates of one forward pass, consumed by ``backward``.

    Invalidated as soon as the owning network's parameters change.
    """

    __slots__ = ("net", "version", "inputs", "preacts", "squashed")

    def __init__(self, net, version, inputs, preacts, squashed):
        self.net = net
        self.version = version
        self.inputs = inputs      # input to each layer, batch-shaped (B, in)
        self.preacts = preacts    # pre-activation of each layer, (B, out)
        self.squashed = squashed  # tanh(z_last) when the output squashes, else None


class Mlp:
    """A feed-forward network: affine layers with fixed activations.

    ``hidden_activation`` applies after every layer but the last;
    ``output_activation`` after the last. A ``tanh`` output is scaled by
    ``output_scale`` (bounded action heads). Parameters are float64 and
    must stay finite; any update that would break that raises.
    """

    def __init__(self, weights, biases, hidden_activation="relu",
                 output_activation="identity", output_scale=1.0):
        if hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unknown hidden activation {hidden_activation!r}")
        if output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {output_activation!r}")
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias vector per weight matrix")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValueError(f"layer {i}: weight {w.shape} incompatible with bias {b.shape}")
            if i > 0 and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError(
                    f"layer {i}: input dim {w.shape[1]} != previous output "
                    f"{self.weights[i - 1].shape[0]}")
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation
        self.output_scale = float(output_scale)
        self._version = 0
        self._check_finite()

    @classmethod
    def create(cls, sizes, rng, hidden_activation="relu",
               output_activation="identity", output_scale=1.0):
        """Build a network with uniform +-1/sqrt(fan_in) init, drawn from ``rng``."""
        if len(sizes) < 2:
            raise ValueError("need at least an input and an output size")
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(weights, biases, hidden_activation, output_activation, output_scale)

    @property
    def sizes(self):
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def input_dim(self):
        return self.weights[0].shape[1]

    @property
    def output_dim(self):
        return self.weights[-1].shape[0]

    def num_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def _check_finite(self):
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise FloatingPointError(f"non-finite parameters in layer {i}")

    def _bump_version(self):
        self._version += 1

    def copy(self):
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                   self.hidden_activation, self.output_activation, self.output_scale)

    def forward(self, x):
        """Plain forward pass; accepts (in,) or (B, in), returns matching shape."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.ndim != 2 or h.shape[1] != self.input_dim:
            raise ValueError(f"input shape {x.shape} does not match input dim {self.input_dim}")
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            if i < last:
                h = _relu(z) if self.hidden_activation == "relu" else z
            elif self.output_activation == "tanh":
                h = self.output_scale * np.tanh(z)
            else:
                h = z
        return h[0] if single else h

    def forward_cached(self, x):
        """Forward pass returning the output and a cache for ``backward``."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.ndim != 2 or h.shape[1] != self.input_dim:
            raise ValueError(f"input shape {x.shape} does not match input dim {self.input_dim}")
        inputs, preacts = [], []
        last = len(self.weights) - 1
        squashed = None
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            z = h @ w.T + b
            preacts.append(z)
            if i < last:
                h = _relu(z) if self.hidden_activation == "relu" else z
            elif self.output_activation == "tanh":
                squashed = np.tanh(z)
                h = self.output_scale * squashed
            else:
                h = z
        cache = ForwardCache(self, self._version, inputs, preacts, squashed)
        return (h[0] if single else h), cache

    def __call__(self, x):
        return self.forward(x)


class ParamGrads:
    """Per-layer parameter gradients, shaped like the network they came from."""

    __slots__ = ("d_weights", "d_biases")

    def __init__(self, d_weights, d_biases):
        self.d_weights = d_weights
        self.d_biases = d_biases

    @classmethod
    def zeros_like(cls, net):
        return cls([np.zeros_like(w) for w in net.weights],
                   [np.zeros_like(b) for b in net.biases])

    def scaled(self, factor):
        return ParamGrads([factor * dw for dw in self.d_weights],
                          [factor * db for db in self.d_biases])

    def add(self, other):
        return ParamGrads([a + b for a, b in zip(self.d_weights, other.d_weights)],
                          [a + b for a, b in zip(self.d_biases, other.d_biases)])

    def max_abs(self):
        return max(max(np.abs(dw).max() for dw in self.d_weights),
                   max(np.abs(db).max() for db in self.d_biases))


def backward(net, cache, grad_output, need_param_grads=True):
    """Backpropagate ``grad_output`` through a cached forward pass.

    Returns ``(ParamGrads, grad_input)``. Parameter gradients are summed over
    the batch; ``grad_input`` keeps the batch shape. Pure: mutates nothing.
    Raises if the cache does not belong to ``net`` or is stale (parameters
    changed since the forward pass).
    """
    if cache.net is not net:
        raise ValueError("cache was produced by a different network")
    if cache.version != net._version:
        raise ValueError("stale cache: parameters changed since the forward pass")
    g = np.asarray(grad_output, dtype=np.float64)
    single = g.ndim == 1
    if single:
        g = g[None, :]
    if g.shape != cache.preacts[-1].shape:
        raise ValueError(
            f"grad_output shape {grad_output.shape} does not match "
            f"output shape {cache.preacts[-1].shape}")

    last = len(net.weights) - 1
    d_weights = [None] * len(net.weights) if need_param_grads else None
    d_biases = [None] * len(net.weights) if need_param_grads else None
    for i in range(last, -1, -1):
        if i == last:
            if net.output_activation == "tanh":
                dz = g * net.output_scale * (1.0 - cache.squashed ** 2)
            else:
                dz = g
        else:
            if net.hidden_activation == "relu":
                dz = g * _relu_grad(cache.preacts[i])
            else:
                dz = g
        if need_param_grads:
            d_weights[i] = dz.T @ cache.inputs[i]
            d_biases[i] = dz.sum(axis=0)
        g = dz @ net.weights[i]
    grad_input = g[0] if single else g
    grads = ParamGrads(d_weights, d_biases) if need_param_grads else None
    return grads, grad_input


class Adam:
    """Adam optimizer state for one network (bias-corrected moments)."""

    def __init__(self, net, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m_weights = [np.zeros_like(w) for w in net.weights]
        self.m_biases = [np.zeros_like(b) for b in net.biases]
        self.v_weights = [np.zeros_like(w) for w in net.weights]
        self.v_biases = [np.zeros_like(b) for b in net.biases]
        self.t = 0
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def step(self, net, grads, lr):
        """Apply one Adam update in place; advances the step counter by 1."""
        if lr <= 0.0:
            raise ValueError("learning rate must be positive")
        if len(grads.d_weights) != len(net.weights):
            raise ValueError("gradient layout does not match network")
        for dw, db, w, b in zip(grads.d_weights, grads.d_biases, net.weights, net.biases):
            if dw.shape != w.shape or db.shape != b.shape:
                raise ValueError("gradient shapes do not match network")
            if not (np.isfinite(dw).all() and np.isfinite(db).all()):
                raise FloatingPointError("non-finite gradient entries")
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        params = zip(net.weights + net.biases,
                     grads.d_weights + grads.d_biases,
                     self.m_weights + self.m_biases,
                     self.v_weights + self.v_biases)
        for p, g, m, v in params:
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        net._bump_version()
        net._check_finite()


def soft_update(target, online, tau):
    """Blend target parameters toward online ones: tau*online + (1-tau)*target."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    if target.sizes != online.sizes:
        raise ValueError(f"shape mismatch: {target.sizes} vs {online.sizes}")
    for tw, ow in zip(target.weights, online.weights):
        tw *= 1.0 - tau
        tw += tau * ow
    for tb, ob in zip(target.biases, online.biases):
        tb *= 1.0 - tau
        tb += tau * ob
    target._bump_version()
    target._check_finite()


def dump_params(net):
    """Serialize parameters to the flat binary checkpoint layout.

    Little-endian: magic, int32 layer count, int32 (out, in) per layer, then
    for each layer the row-major float64 weight matrix followed by the bias.
    """
    buf = io.BytesIO()
    buf.write(_CHECKPOINT_MAGIC)
    buf.write(struct.pack("<i", len(net.weights)))
    for w in net.weights:
        buf.write(struct.pack("<ii", w.shape[0], w.shape[1]))
    for w, b in zip(net.weights, net.biases):
        buf.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return buf.getvalue()


def load_params(net, blob):
    """Load a checkpoint produced by ``dump_params`` into ``net`` (in place)."""
    buf = io.BytesIO(blob)
    magic = buf.read(4)
    if magic != _CHECKPOINT_MAGIC:
        raise ValueError("not a network checkpoint")
    (n_layers,) = struct.unpack("<i", buf.read(4))
    if n_layers != len(net.weights):
        raise ValueError(f"checkpoint has {n_layers} layers, network has {len(net.weights)}")
    shapes = [struct.unpack("<ii", buf.read(8)) for _ in range(n_layers)]
    for (out, inp), w in zip(shapes, net.weights):
        if (out, inp) != w.shape:
            raise ValueError(f"checkpoint layer shape {(out, inp)} != network {w.shape}")
    for w, b in zip(net.weights, net.biases):
        raw = buf.read(w.size * 8)
        w[...] = np.frombuffer(raw, dtype="<f8").reshape(w.shape)
        b[...] = np.frombuffer(buf.read(b.size * 8), dtype="<f8")
    net._bump_version()
    net._check_finite()


def save_params(net, path):
    with open(path, "wb") as fh:
        fh.write(dump_params(net))


def load_params_file(net, path):
    with open(path, "rb") as fh:
        load_params(net, fh.read())
