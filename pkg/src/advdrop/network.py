"""Feed-forward networks with manual backpropagation and a dropout split point.

A :class:`SplitNetwork` is an ordered list of layers containing at most one
``adversarial_dropout_slot``. Everything below the slot is the under part
``h(x)``; everything above it is the upper part, and the slot itself applies
the raw product ``h * mask`` (no rescale) during training. In evaluation mode
the slot multiplies ``h`` by its keep probability, the weight-scaling rule for
un-rescaled dropout. Ordinary dropout layers use inverted scaling instead.

Batches carry a leading item axis. A single item (shape equal to the
network's ``input_shape``) is accepted and returned without the batch axis.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, FormatError, ShapeError, StaleTraceError
from .numerics import DTYPE, RngStream, as_tensor, sample_bernoulli_mask, sample_gaussian

LAYER_KINDS = (
    "dense", "conv2d", "maxpool", "flatten", "relu", "lrelu", "softmax",
    "dropout", "gaussian_noise", "adversarial_dropout_slot",
)
CHECKPOINT_FORMAT = "advdrop.params"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    units: int | None = None
    filters: int | None = None
    kernel: int = 3
    padding: str = "same"
    pool: int = 2
    alpha: float = 0.1
    keep_prob: float = 1.0
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigurationError(f"unknown layer kind {self.kind!r}")
        if self.kind == "dense" and not (self.units and self.units > 0):
            raise ConfigurationError("dense layer needs a positive 'units'")
        if self.kind == "conv2d":
            if not (self.filters and self.filters > 0):
                raise ConfigurationError("conv2d layer needs a positive 'filters'")
            if self.padding not in ("same", "valid"):
                raise ConfigurationError("conv2d padding must be 'same' or 'valid'")
            if self.padding == "same" and self.kernel % 2 == 0:
                raise ConfigurationError("'same' padding needs an odd kernel")
        if not 0.0 <= self.keep_prob <= 1.0:
            raise ConfigurationError("keep_prob must lie in [0, 1]")
        if self.sigma < 0:
            raise ConfigurationError("sigma must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        allowed = set(cls.__dataclass_fields__)
        unknown = set(d) - allowed
        if unknown:
            raise ConfigurationError(f"unknown layer fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name != "kind" and value != f.default:
                out[f.name] = value
        return out


# ---------------------------------------------------------------------------
# layers


class _Layer:
    stochastic = False
    param_names: tuple[str, ...] = ()

    def __init__(self, spec: LayerSpec, in_shape: tuple[int, ...]):
        self.spec = spec
        self.in_shape = in_shape
        self.out_shape = self._out_shape(in_shape)

    def _out_shape(self, in_shape):
        return in_shape

    def init_params(self, rng: RngStream) -> dict:
        return {}

    def forward(self, x, params, noise, train):
        raise NotImplementedError

    def backward(self, gy, params, cache):
        raise NotImplementedError


class _Dense(_Layer):
    param_names = ("W", "b")

    def _out_shape(self, in_shape):
        if len(in_shape) != 1:
            raise ShapeError(f"dense layer expects flat input, got item shape {in_shape}")
        return (self.spec.units,)

    def init_params(self, rng):
        fan_in, fan_out = self.in_shape[0], self.spec.units
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return {"W": (2.0 * rng.uniform((fan_in, fan_out)) - 1.0) * limit,
                "b": np.zeros(fan_out, dtype=DTYPE)}

    def forward(self, x, params, noise, train):
        return x @ params["W"] + params["b"], x

    def backward(self, gy, params, cache):
        x = cache
        return gy @ params["W"].T, {"W": x.T @ gy, "b": gy.sum(axis=0)}


class _Conv2d(_Layer):
    """Stride-1 convolution over (channels, height, width) items via im2col."""

    param_names = ("W", "b")

    def _out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeError(f"conv2d expects (C, H, W) items, got {in_shape}")
        c, h, w = in_shape
        k = self.spec.kernel
        if self.spec.padding == "same":
            return (self.spec.filters, h, w)
        if h < k or w < k:
            raise ShapeError(f"kernel {k} larger than input {h}x{w}")
        return (self.spec.filters, h - k + 1, w - k + 1)

    def init_params(self, rng):
        c = self.in_shape[0]
        k, f = self.spec.kernel, self.spec.filters
        limit = np.sqrt(6.0 / (c * k * k + f * k * k))
        return {"W": (2.0 * rng.uniform((f, c, k, k)) - 1.0) * limit,
                "b": np.zeros(f, dtype=DTYPE)}

    def _pad(self):
        return self.spec.kernel // 2 if self.spec.padding == "same" else 0

    def forward(self, x, params, noise, train):
        n = x.shape[0]
        k, p = self.spec.kernel, self._pad()
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
        _, c, ho, wo, _, _ = win.shape
        cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
        w2 = params["W"].reshape(self.spec.filters, -1)
        out = cols @ w2.T + params["b"]
        y = out.reshape(n, ho, wo, -1).transpose(0, 3, 1, 2)
        return np.ascontiguousarray(y), (cols, xp.shape)

    def backward(self, gy, params, cache):
        cols, xp_shape = cache
        n, c, hp, wp = xp_shape
        k, p, f = self.spec.kernel, self._pad(), self.spec.filters
        ho, wo = gy.shape[2], gy.shape[3]
        g2 = gy.transpose(0, 2, 3, 1).reshape(-1, f)
        w2 = params["W"].reshape(f, -1)
        grads = {"W": (g2.T @ cols).reshape(params["W"].shape), "b": g2.sum(axis=0)}
        dcols = (g2 @ w2).reshape(n, ho, wo, c, k, k)
        dxp = np.zeros(xp_shape, dtype=DTYPE)
        for i in range(k):
            for j in range(k):
                dxp[:, :, i:i + ho, j:j + wo] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        if p:
            dxp = dxp[:, :, p:hp - p, p:wp - p]
        return dxp, grads


class _MaxPool(_Layer):
    """Non-overlapping max pooling; trailing rows/columns that do not fill a window are dropped."""

    def _out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeError(f"maxpool expects (C, H, W) items, got {in_shape}")
        c, h, w = in_shape
        s = self.spec.pool
        if h < s or w < s:
            raise ShapeError(f"pool size {s} larger than input {h}x{w}")
        return (c, h // s, w // s)

    def forward(self, x, params, noise, train):
        s = self.spec.pool
        n, c, h, w = x.shape
        ho, wo = h // s, w // s
        xc = x[:, :, :ho * s, :wo * s]
        blocks = xc.reshape(n, c, ho, s, wo, s).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, s * s)
        arg = blocks.argmax(axis=-1)
        y = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
        return y, (arg, x.shape)

    def backward(self, gy, params, cache):
        arg, x_shape = cache
        s = self.spec.pool
        n, c, h, w = x_shape
        ho, wo = h // s, w // s
        blocks = np.zeros((n, c, ho, wo, s * s), dtype=DTYPE)
        np.put_along_axis(blocks, arg[..., None], gy[..., None], axis=-1)
        dx = np.zeros(x_shape, dtype=DTYPE)
        dx[:, :, :ho * s, :wo * s] = (
            blocks.reshape(n, c, ho, wo, s, s).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho * s, wo * s))
        return dx, {}


class _Flatten(_Layer):
    def _out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, params, noise, train):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, gy, params, cache):
        return gy.reshape(cache), {}


class _ReLU(_Layer):
    def forward(self, x, params, noise, train):
        return np.maximum(x, 0.0), x > 0

    def backward(self, gy, params, cache):
        return gy * cache, {}


class _LReLU(_Layer):
    def forward(self, x, params, noise, train):
        pos = x > 0
        return np.where(pos, x, self.spec.alpha * x), pos

    def backward(self, gy, params, cache):
        return np.where(cache, gy, self.spec.alpha * gy), {}


class _Softmax(_Layer):
    def _out_shape(self, in_shape):
        if len(in_shape) != 1:
            raise ShapeError("softmax expects flat input")
        return in_shape

    def forward(self, x, params, noise, train):
        z = np.exp(x - x.max(axis=1, keepdims=True))
        s = z / z.sum(axis=1, keepdims=True)
        return s, s

    def backward(self, gy, params, cache):
        s = cache
        return s * (gy - np.sum(gy * s, axis=1, keepdims=True)), {}


class _Dropout(_Layer):
    """Inverted dropout: kept units are divided by ``keep_prob``."""

    stochastic = True

    def sample(self, rng, shape):
        return sample_bernoulli_mask(rng, shape, self.spec.keep_prob)

    def forward(self, x, params, noise, train):
        if not train or self.spec.keep_prob == 1.0:
            return x, None
        scaled = noise / self.spec.keep_prob if self.spec.keep_prob > 0 else noise
        return x * scaled, scaled

    def backward(self, gy, params, cache):
        return (gy if cache is None else gy * cache), {}


class _GaussianNoise(_Layer):
    stochastic = True

    def sample(self, rng, shape):
        return sample_gaussian(rng, shape, self.spec.sigma)

    def forward(self, x, params, noise, train):
        if not train:
            return x, None
        return x + noise, None

    def backward(self, gy, params, cache):
        return gy, {}


class _Slot(_Layer):
    def _out_shape(self, in_shape):
        if len(in_shape) != 1:
            raise ShapeError(f"adversarial dropout slot needs flat input, got {in_shape}")
        return in_shape

    def forward(self, x, params, noise, train):
        scale = noise if train else self.spec.keep_prob
        return x * scale, scale

    def backward(self, gy, params, cache):
        return gy * cache, {}


_LAYER_CLASSES = {
    "dense": _Dense, "conv2d": _Conv2d, "maxpool": _MaxPool, "flatten": _Flatten,
    "relu": _ReLU, "lrelu": _LReLU, "softmax": _Softmax, "dropout": _Dropout,
    "gaussian_noise": _GaussianNoise, "adversarial_dropout_slot": _Slot,
}


# ---------------------------------------------------------------------------
# network


@dataclass
class ForwardTrace:
    """Everything recorded by one forward pass.

    ``noises`` maps layer index to the sampled noise of each stochastic layer;
    feeding it back through ``forward(..., noises=trace.noises)`` with the
    same mask reproduces ``output`` exactly.
    """

    x: np.ndarray
    caches: list
    noises: dict
    mask: np.ndarray | None
    h: np.ndarray | None
    output: np.ndarray
    version: int
    train: bool
    single: bool = False
    activations: list = field(default_factory=list)


def add_grads(total: dict | None, more: dict, scale: float = 1.0) -> dict:
    """Accumulate ``scale * more`` into ``total`` (a fresh dict when None)."""
    if total is None:
        return {k: scale * v for k, v in more.items()}
    for k, v in more.items():
        if k in total:
            total[k] = total[k] + scale * v
        else:
            total[k] = scale * v
    return total


class SplitNetwork:
    def __init__(self, specs, input_shape, seed: int = 0, rng: RngStream | None = None):
        self.specs = [s if isinstance(s, LayerSpec) else LayerSpec.from_dict(s) for s in specs]
        self.input_shape = tuple(int(d) for d in input_shape)
        slots = [i for i, s in enumerate(self.specs) if s.kind == "adversarial_dropout_slot"]
        if len(slots) > 1:
            raise ConfigurationError("a network may hold at most one adversarial dropout slot")
        self.slot_index = slots[0] if slots else None

        self.layers: list[_Layer] = []
        shape = self.input_shape
        for spec in self.specs:
            layer = _LAYER_CLASSES[spec.kind](spec, shape)
            self.layers.append(layer)
            shape = layer.out_shape
        self.output_shape = shape

        rng = rng if rng is not None else RngStream(seed)
        self.params: dict[str, np.ndarray] = {}
        for i, layer in enumerate(self.layers):
            for name, value in layer.init_params(rng).items():
                self.params[self._pname(i, name)] = value
        self.version = 0

    @staticmethod
    def _pname(index: int, name: str) -> str:
        return f"{index}.{name}"

    # -- structure --------------------------------------------------------

    @property
    def H(self) -> int:
        if self.slot_index is None:
            raise ConfigurationError("network has no adversarial dropout slot")
        return self.layers[self.slot_index].in_shape[0]

    @property
    def slot_keep_prob(self) -> float:
        if self.slot_index is None:
            return 1.0
        return self.specs[self.slot_index].keep_prob

    @property
    def under_layers(self):
        end = self.slot_index if self.slot_index is not None else len(self.layers)
        return self.layers[:end]

    @property
    def upper_layers(self):
        return [] if self.slot_index is None else self.layers[self.slot_index + 1:]

    def num_params(self) -> int:
        return sum(v.size for v in self.params.values())

    def set_params(self, params: dict) -> None:
        for k, v in params.items():
            if k not in self.params or self.params[k].shape != np.shape(v):
                raise ShapeError(f"parameter {k!r} does not match the network")
        self.params = {k: as_tensor(params[k]).copy() for k in self.params}
        self.version += 1

    def sample_slot_mask(self, rng: RngStream, n: int, keep_prob: float | None = None) -> np.ndarray:
        q = self.slot_keep_prob if keep_prob is None else keep_prob
        return sample_bernoulli_mask(rng, (n, self.H), q)

    # -- forward ----------------------------------------------------------

    def _batch(self, x):
        x = as_tensor(x)
        if x.shape == self.input_shape:
            return x[None], True
        if x.shape[1:] != self.input_shape:
            raise ShapeError(f"input item shape {x.shape[1:]} does not match {self.input_shape}")
        return x, False

    def _check_mask(self, mask, n):
        mask = as_tensor(mask)
        if mask.shape[-1] != self.H or mask.ndim > 2 or (mask.ndim == 2 and mask.shape[0] not in (1, n)):
            raise ShapeError(f"mask shape {mask.shape} does not fit split width {self.H} and batch {n}")
        return np.broadcast_to(mask.reshape(-1, self.H), (n, self.H))

    def _run(self, a, lo, hi, *, train, rng, noises, caches, new_noises, acts):
        for i in range(lo, hi):
            layer = self.layers[i]
            noise = None
            if train and layer.stochastic:
                if noises is not None and i in noises:
                    noise = noises[i]
                elif rng is None:
                    raise ValueError(f"layer {i} ({layer.spec.kind}) needs an rng or a recorded noise")
                else:
                    noise = layer.sample(rng, a.shape)
                new_noises[i] = noise
            params = {n: self.params[self._pname(i, n)] for n in layer.param_names}
            a, cache = layer.forward(a, params, noise, train)
            caches[i] = cache
            acts.append(a)
        return a

    def forward(self, x, mask=None, rng: RngStream | None = None, *, train: bool = True,
                noises: dict | None = None):
        """Run the network; returns ``(output, trace)``.

        In training mode ``mask`` is the slot mask (shape ``(H,)`` or
        ``(batch, H)``); when omitted it is sampled from ``rng`` with the
        slot's keep probability. Evaluation mode ignores noise entirely.
        """
        xb, single = self._batch(x)
        n = xb.shape[0]
        caches = [None] * len(self.layers)
        new_noises: dict = {}
        acts: list = []
        if self.slot_index is None:
            if mask is not None:
                raise ShapeError("mask given but the network has no adversarial dropout slot")
            out = self._run(xb, 0, len(self.layers), train=train, rng=rng, noises=noises,
                            caches=caches, new_noises=new_noises, acts=acts)
            return self._finish(xb, caches, new_noises, None, None, out, train, single, acts)

        h = self._run(xb, 0, self.slot_index, train=train, rng=rng, noises=noises,
                      caches=caches, new_noises=new_noises, acts=acts)
        if train:
            if mask is None:
                if rng is None:
                    raise ValueError("training-mode forward needs a mask or an rng")
                mask = self.sample_slot_mask(rng, n)
            mask = self._check_mask(mask, n)
        elif mask is not None:
            raise ValueError("evaluation mode does not take a mask")
        return self._upper_from(xb, h, mask, caches, new_noises, acts, train=train, rng=rng,
                                noises=noises, single=single)

    def _upper_from(self, xb, h, mask, caches, new_noises, acts, *, train, rng, noises, single):
        s = self.slot_index
        a, caches[s] = self.layers[s].forward(h, {}, mask, train)
        acts.append(a)
        out = self._run(a, s + 1, len(self.layers), train=train, rng=rng, noises=noises,
                        caches=caches, new_noises=new_noises, acts=acts)
        return self._finish(xb, caches, new_noises, mask, h, out, train, single, acts)

    def _finish(self, xb, caches, noises, mask, h, out, train, single, acts):
        trace = ForwardTrace(x=xb, caches=caches, noises=noises, mask=mask, h=h, output=out,
                             version=self.version, train=train, single=single, activations=acts)
        return (out[0] if single else out), trace

    def reforward_upper(self, trace: ForwardTrace, mask, rng: RngStream | None = None):
        """Re-run slot and upper part of ``trace`` with a different slot mask.

        The under part (and its noise) is shared with ``trace``; upper-part
        stochastic layers reuse the noise recorded in ``trace``.
        """
        self._check_fresh(trace)
        if not trace.train:
            raise ValueError("reforward_upper needs a training-mode trace")
        s = self.slot_index
        mask = self._check_mask(mask, trace.x.shape[0])
        caches = list(trace.caches[:s]) + [None] * (len(self.layers) - s)
        new_noises = {i: v for i, v in trace.noises.items() if i < s}
        acts = list(trace.activations[:s])
        return self._upper_from(trace.x, trace.h, mask, caches, new_noises, acts, train=True,
                                rng=rng, noises=trace.noises, single=trace.single)

    def under(self, x, rng=None, *, train=True, noises=None):
        """Output of the under part, ``h(x)``."""
        xb, single = self._batch(x)
        end = self.slot_index if self.slot_index is not None else len(self.layers)
        h = self._run(xb, 0, end, train=train, rng=rng, noises=noises,
                      caches=[None] * len(self.layers), new_noises={}, acts=[])
        return h[0] if single else h

    def upper(self, z, rng=None, *, train=True, noises=None):
        """Upper part applied to an already-masked hidden vector ``z``."""
        s = self.slot_index
        z = as_tensor(z)
        single = z.ndim == 1
        zb = z[None] if single else z
        out = self._run(zb, s + 1, len(self.layers), train=train, rng=rng, noises=noises,
                        caches=[None] * len(self.layers), new_noises={}, acts=[])
        return out[0] if single else out

    def predict(self, x):
        return self.forward(x, train=False)[0]

    # -- backward ---------------------------------------------------------

    def _check_fresh(self, trace):
        if trace.version != self.version:
            raise StaleTraceError(
                f"trace recorded at parameter version {trace.version}, network is at {self.version}")

    def backward(self, trace: ForwardTrace, output_grad, *, stop_at_split: bool = False):
        """Reverse-mode gradients of the traced computation.

        Returns ``(param_grads, input_grad)``. With ``stop_at_split`` the sweep
        ends at the slot and the second value is the gradient with respect to
        the hidden vector ``h`` (the slot input) instead of the network input.
        """
        self._check_fresh(trace)
        g = as_tensor(output_grad)
        if trace.single:
            g = g[None]
        if g.shape != trace.output.shape:
            raise ShapeError(f"output_grad shape {g.shape} does not match output {trace.output.shape}")
        if stop_at_split and self.slot_index is None:
            raise ConfigurationError("network has no adversarial dropout slot")
        lo = self.slot_index if stop_at_split else 0
        grads: dict[str, np.ndarray] = {}
        for i in range(len(self.layers) - 1, lo - 1, -1):
            layer = self.layers[i]
            params = {n: self.params[self._pname(i, n)] for n in layer.param_names}
            g, pg = layer.backward(g, params, trace.caches[i])
            for name, value in pg.items():
                grads[self._pname(i, name)] = value
        for k in self.params:
            if k not in grads and (not stop_at_split or int(k.split(".")[0]) > lo):
                grads[k] = np.zeros_like(self.params[k])
        return grads, (g[0] if trace.single else g)


def grad_wrt_hidden(net: SplitNetwork, x, mask_at_split, divergence_grad,
                    rng: RngStream | None = None, noises: dict | None = None) -> np.ndarray:
    """Gradient of a divergence with respect to the hidden vector ``h(x)``.

    ``divergence_grad`` is dD/d(output); it is pushed back through the upper
    part and the slot product only. Parameters are not touched.
    """
    _, trace = net.forward(x, mask_at_split, rng, noises=noises)
    _, gh = net.backward(trace, divergence_grad, stop_at_split=True)
    return gh


# ---------------------------------------------------------------------------
# optimisation


@dataclass
class AdamState:
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update. Returns new ``(params, state)``; inputs are not modified."""
    t = state.t + 1
    new_params, m_new, v_new = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        if np.shape(g) != np.shape(p):
            raise ShapeError(f"gradient for {k!r} has shape {np.shape(g)}, parameter {np.shape(p)}")
        m = beta1 * state.m.get(k, 0.0) + (1 - beta1) * g
        v = beta2 * state.v.get(k, 0.0) + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        new_params[k] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
        m_new[k], v_new[k] = m, v
    return new_params, AdamState(t=t, m=m_new, v=v_new)


# ---------------------------------------------------------------------------
# checkpoints


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def checkpoint_dict(net: SplitNetwork, params: dict | None = None) -> dict:
    params = net.params if params is None else params
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "input_shape": list(net.input_shape),
        "architecture": [s.to_dict() for s in net.specs],
        "tensors": [{"name": k, "shape": list(v.shape), "data": v.ravel().tolist()}
                    for k, v in params.items()],
    }


def save_checkpoint(path, net: SplitNetwork, params: dict | None = None) -> None:
    atomic_write_text(path, json.dumps(checkpoint_dict(net, params)))


def load_checkpoint(path) -> SplitNetwork:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise FormatError(f"{path} is not a parameter checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {doc.get('version')}")
    net = SplitNetwork([LayerSpec.from_dict(s) for s in doc["architecture"]], doc["input_shape"])
    params = {}
    for t in doc["tensors"]:
        arr = np.asarray(t["data"], dtype=DTYPE)
        if arr.size != int(np.prod(t["shape"])):
            raise FormatError(f"tensor {t['name']!r} has {arr.size} values for shape {t['shape']}")
        params[t["name"]] = arr.reshape(t["shape"])
    if set(params) != set(net.params):
        raise FormatError("checkpoint tensors do not match its architecture")
    net.set_params(params)
    net.version = 0
    return net
