"""Convolutional-recurrent counting network.

Layout per time step::

    image -> conv 3x3 (7 filters) -> logistic -> max-pool 2x2/2 -> flatten
          -> hidden3 (logistic)
    [hidden3, trigger(2), context] -> hidden4 (logistic)   # Elman layer
    hidden4 -> number head (softmax, 11)
    hidden4 -> gesture head (logistic, 7)

The context fed at step t is hidden4 from step t-1 (0.5 everywhere at t=0).
All sequence functions are batched: arrays are indexed ``[t, b, ...]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.special import expit

from . import kernels
from .scene import BASE, GridGeometry, World

N_STEPS = 15
INITIAL_CONTEXT = 0.5


class NumericalDivergence(FloatingPointError):
    """Non-finite loss or gradient during training."""


class FeedbackPolicy(enum.IntEnum):
    NO_HAND = 0
    NETWORK_HAND = 1
    SCRIPTED_HAND = 2


@dataclass(frozen=True)
class Architecture:
    filters: int = 7
    kernel: int = 3
    hidden3: int = 130
    hidden4: int = 135
    n_numbers: int = 11
    n_joints: int = 7
    n_triggers: int = 2

    @property
    def dense4_inputs(self) -> int:
        return self.hidden3 + self.n_triggers + self.hidden4


PARAM_NAMES = ("conv_w", "conv_b", "w3", "b3", "w4", "b4", "wn", "bn", "wg", "bg")
NUMBER_HEAD = frozenset({"wn", "bn"})
FULL_MASK = frozenset(PARAM_NAMES)
GESTURE_PRETRAIN_MASK = FULL_MASK - NUMBER_HEAD


def param_shapes(arch: Architecture, pool_size: int) -> dict[str, tuple[int, ...]]:
    a = arch
    return {
        "conv_w": (a.filters, a.kernel, a.kernel),
        "conv_b": (a.filters,),
        "w3": (pool_size, a.hidden3),
        "b3": (a.hidden3,),
        "w4": (a.dense4_inputs, a.hidden4),
        "b4": (a.hidden4,),
        "wn": (a.hidden4, a.n_numbers),
        "bn": (a.n_numbers,),
        "wg": (a.hidden4, a.n_joints),
        "bg": (a.n_joints,),
    }


@dataclass
class NetworkParams:
    conv_w: np.ndarray
    conv_b: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    w4: np.ndarray
    b4: np.ndarray
    wn: np.ndarray
    bn: np.ndarray
    wg: np.ndarray
    bg: np.ndarray
    conv_activation: str = "logistic"

    def __post_init__(self):
        if self.conv_activation not in CONV_ACTIVATIONS:
            raise ValueError("unknown conv activation %r" % self.conv_activation)
        for name in PARAM_NAMES:
            setattr(self, name, np.asarray(getattr(self, name)))
        h3, h4 = self.b3.shape[0], self.b4.shape[0]
        expected = param_shapes(Architecture(filters=self.conv_w.shape[0], kernel=self.conv_w.shape[1],
                                             hidden3=h3, hidden4=h4, n_numbers=self.bn.shape[0],
                                             n_joints=self.bg.shape[0],
                                             n_triggers=self.w4.shape[0] - h3 - h4),
                                self.w3.shape[0])
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError("%s has shape %s, expected %s" % (name, getattr(self, name).shape, shape))

    @property
    def arch(self) -> Architecture:
        h3, h4 = self.b3.shape[0], self.b4.shape[0]
        return Architecture(self.conv_w.shape[0], self.conv_w.shape[1], h3, h4,
                            self.bn.shape[0], self.bg.shape[0], self.w4.shape[0] - h3 - h4)

    @property
    def dtype(self):
        return self.w3.dtype

    def items(self):
        for name in PARAM_NAMES:
            yield name, getattr(self, name)

    def copy(self) -> "NetworkParams":
        return NetworkParams(**{k: v.copy() for k, v in self.items()}, conv_activation=self.conv_activation)

    def astype(self, dtype) -> "NetworkParams":
        return NetworkParams(**{k: v.astype(dtype) for k, v in self.items()},
                             conv_activation=self.conv_activation)

    def all_finite(self) -> bool:
        return all(np.isfinite(v).all() for _, v in self.items())

    def equals(self, other: "NetworkParams") -> bool:
        return all(np.array_equal(v, getattr(other, k)) for k, v in self.items())


INIT_SCHEMES = ("uniform", "fan_in")


def init_params(rng: np.random.Generator, pool_size: int, arch: Architecture = Architecture(),
                dtype=np.float32, scale: float = 0.1, conv_activation: str = "logistic",
                scheme: str = "uniform") -> NetworkParams:
    """Biases zero; weights uniform in [-scale, scale], or for ``fan_in`` in
    [-a, a] with a = scale * sqrt(3 / fan_in) (unit variance at scale 1)."""
    if scheme not in INIT_SCHEMES:
        raise ValueError("unknown init scheme %r" % scheme)
    arrays = {}
    for name, shape in param_shapes(arch, pool_size).items():
        if name.startswith("b") or name == "conv_b":
            arrays[name] = np.zeros(shape, dtype=dtype)
            continue
        limit = scale
        if scheme == "fan_in":
            fan_in = shape[1] * shape[2] if name == "conv_w" else shape[0]
            limit = scale * np.sqrt(3.0 / fan_in)
        arrays[name] = rng.uniform(-limit, limit, size=shape).astype(dtype)
    return NetworkParams(**arrays, conv_activation=conv_activation)


def init_for_geometry(rng, geometry: GridGeometry, arch: Architecture = Architecture(), dtype=np.float32,
                      conv_activation: str = "logistic", scale: float = 0.1, scheme: str = "uniform"):
    return init_params(rng, geometry.pool_output_size(arch.filters, arch.kernel), arch, dtype, scale,
                       conv_activation, scheme)


CONV_ACTIVATIONS = ("logistic", "relu")


def conv_activation(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "logistic":
        return expit(z)
    if kind == "relu":
        return np.maximum(z, 0)
    raise ValueError("unknown conv activation %r" % kind)


def conv_activation_grad(a: np.ndarray, kind: str) -> np.ndarray:
    """Derivative expressed through the activation value."""
    if kind == "logistic":
        return a * (1 - a)
    return (a > 0).astype(a.dtype)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class SequenceBatch:
    """Network-ready arrays for B trials.

    images: (T, B, H, W) step images without network hands; network-hand
    trials get their hand composited on top during the forward pass.
    """
    images: np.ndarray
    triggers: np.ndarray          # (B, 2)
    number_targets: np.ndarray    # (T, B) class indices
    posture_targets: np.ndarray   # (T, B, J)
    feedback: np.ndarray          # (B,) FeedbackPolicy values

    @property
    def size(self) -> int:
        return self.triggers.shape[0]

    @property
    def steps(self) -> int:
        return self.images.shape[0]


@dataclass
class TrajectoryCache:
    images: np.ndarray   # (T, B, H, W) images actually consumed
    pooled: np.ndarray   # (T, B, F, PH, PW)
    argmax: np.ndarray   # (T, B, F, PH, PW)
    dense4_in: np.ndarray  # (T, B, H3 + 2 + H4): [hidden3, trigger, context]
    hidden4: np.ndarray  # (T, B, H4)
    number: np.ndarray   # (T, B, 11)
    gesture: np.ndarray  # (T, B, J)
    hands: np.ndarray    # (T, B) hand column fed back (BASE when none)

    @property
    def steps(self) -> int:
        return self.number.shape[0]


def forward_step(params: NetworkParams, images: np.ndarray, triggers: np.ndarray, context: np.ndarray):
    """One time step for a batch.

    Returns ``(number, gesture, new_context, activations)`` where activations
    is a dict with ``pooled``, ``argmax``, ``dense4_in`` and ``hidden4``.
    """
    b = images.shape[0]
    if triggers.shape != (b, params.arch.n_triggers) or context.shape != (b, params.b4.shape[0]):
        raise ValueError("step input shapes do not match the network")
    dt = params.dtype
    zmax, argmax = kernels.conv_pool_forward(images.astype(dt, copy=False), params.conv_w, params.conv_b)
    pooled = conv_activation(zmax, params.conv_activation)
    flat = pooled.reshape(b, -1)
    if flat.shape[1] != params.w3.shape[0]:
        raise ValueError("image size gives %d pooled units, network expects %d"
                         % (flat.shape[1], params.w3.shape[0]))
    h3 = expit(flat @ params.w3 + params.b3)
    d4 = np.concatenate([h3, triggers.astype(dt, copy=False), context.astype(dt, copy=False)], axis=1)
    h4 = expit(d4 @ params.w4 + params.b4)
    number = softmax(h4 @ params.wn + params.bn)
    gesture = expit(h4 @ params.wg + params.bg)
    acts = {"pooled": pooled, "argmax": argmax, "dense4_in": d4, "hidden4": h4}
    return number, gesture, h4, acts


def initial_context(batch_size: int, params: NetworkParams) -> np.ndarray:
    return np.full((batch_size, params.b4.shape[0]), INITIAL_CONTEXT, dtype=params.dtype)


def sequence_forward(params: NetworkParams, batch: SequenceBatch, world: Optional[World] = None):
    """Run all steps with the context threaded through.

    For NETWORK_HAND trials the image at step t >= 1 gets the hand sprite of
    the column nearest to the gesture output of step t-1 (nothing when that
    is the base posture). Other trials consume ``batch.images`` verbatim.
    Returns ``(number, gesture, cache)``.
    """
    steps, bsz = batch.steps, batch.size
    net_hand = np.flatnonzero(batch.feedback == FeedbackPolicy.NETWORK_HAND)
    if len(net_hand) and world is None:
        raise ValueError("network-hand feedback needs a World to draw the hand")
    dt = params.dtype
    images = np.array(batch.images, dtype=dt, copy=True)
    hands = np.full((steps, bsz), BASE, dtype=np.int64)
    context = initial_context(bsz, params)
    pooled = argmax = None
    d4 = np.empty((steps, bsz, params.w4.shape[0]), dtype=dt)
    h4 = np.empty((steps, bsz, params.b4.shape[0]), dtype=dt)
    number = np.empty((steps, bsz, params.bn.shape[0]), dtype=dt)
    gesture = np.empty((steps, bsz, params.bg.shape[0]), dtype=dt)
    for t in range(steps):
        if t > 0 and len(net_hand):
            snapped = world.table.snap(gesture[t - 1, net_hand])
            hands[t, net_hand] = snapped
            images[t, net_hand] = world.with_hands(images[t, net_hand], snapped)
        num, ges, context, acts = forward_step(params, images[t], batch.triggers, context)
        if pooled is None:
            pooled = np.empty((steps,) + acts["pooled"].shape, dtype=dt)
            argmax = np.empty((steps,) + acts["argmax"].shape, dtype=np.uint8)
        pooled[t], argmax[t] = acts["pooled"], acts["argmax"]
        d4[t], h4[t] = acts["dense4_in"], acts["hidden4"]
        number[t], gesture[t] = num, ges
    cache = TrajectoryCache(images, pooled, argmax, d4, h4, number, gesture, hands)
    return number, gesture, cache


def sequence_loss(number: np.ndarray, gesture: np.ndarray, batch: SequenceBatch, rates) -> float:
    """number_rate * cross-entropy + gesture_rate * half squared error, summed over steps and trials."""
    number_lr, gesture_lr = rates
    t_idx, b_idx = np.indices(batch.number_targets.shape)
    p = number[t_idx, b_idx, batch.number_targets].astype(np.float64)
    ce = -np.log(np.maximum(p, np.finfo(np.float64).tiny)).sum()
    se = 0.5 * ((gesture.astype(np.float64) - batch.posture_targets) ** 2).sum()
    return float(number_lr * ce + gesture_lr * se)


def sequence_gradients(params: NetworkParams, cache: TrajectoryCache, batch: SequenceBatch, rates,
                       mask: Iterable[str] = FULL_MASK) -> dict[str, np.ndarray]:
    """Backpropagation through time over the cached trajectory.

    Returns gradients of ``sequence_loss`` for the parameter names in ``mask``.
    """
    mask = frozenset(mask)
    number_lr, gesture_lr = rates
    steps, bsz = cache.steps, batch.size
    dt = params.dtype
    h3n, h4n = params.b3.shape[0], params.b4.shape[0]
    grads: dict[str, np.ndarray] = {}

    onehot = np.zeros_like(cache.number)
    t_idx, b_idx = np.indices(batch.number_targets.shape)
    onehot[t_idx, b_idx, batch.number_targets] = 1
    dzn = (number_lr * (cache.number - onehot)).astype(dt)
    g = cache.gesture
    dzg = (gesture_lr * (g - batch.posture_targets) * g * (1 - g)).astype(dt)
    h4 = cache.hidden4
    if "wn" in mask:
        grads["wn"] = h4.reshape(-1, h4n).T @ dzn.reshape(-1, dzn.shape[-1])
    if "bn" in mask:
        grads["bn"] = dzn.sum(axis=(0, 1))
    if "wg" in mask:
        grads["wg"] = h4.reshape(-1, h4n).T @ dzg.reshape(-1, dzg.shape[-1])
    if "bg" in mask:
        grads["bg"] = dzg.sum(axis=(0, 1))
    if not mask & {"w4", "b4", "w3", "b3", "conv_w", "conv_b"}:
        return grads

    dh4 = dzn @ params.wn.T + dzg @ params.wg.T
    w_ctx = params.w4[h3n + params.arch.n_triggers:]
    dz4 = np.empty_like(h4)
    carry = np.zeros((bsz, h4n), dtype=dt)
    for t in range(steps - 1, -1, -1):
        dz4[t] = (dh4[t] + carry) * h4[t] * (1 - h4[t])
        carry = dz4[t] @ w_ctx.T
    if "w4" in mask:
        grads["w4"] = cache.dense4_in.reshape(-1, cache.dense4_in.shape[-1]).T @ dz4.reshape(-1, h4n)
    if "b4" in mask:
        grads["b4"] = dz4.sum(axis=(0, 1))
    if not mask & {"w3", "b3", "conv_w", "conv_b"}:
        return grads

    h3 = cache.dense4_in[..., :h3n]
    dz3 = (dz4 @ params.w4[:h3n].T) * h3 * (1 - h3)
    flat = cache.pooled.reshape(steps * bsz, -1)
    if "w3" in mask:
        grads["w3"] = flat.T @ dz3.reshape(-1, h3n)
    if "b3" in mask:
        grads["b3"] = dz3.sum(axis=(0, 1))
    if mask & {"conv_w", "conv_b"}:
        dflat = dz3.reshape(-1, h3n) @ params.w3.T
        dpool = (dflat * conv_activation_grad(flat, params.conv_activation)).reshape(cache.pooled.shape[0] * bsz, *cache.pooled.shape[2:])
        imgs = cache.images.reshape(steps * bsz, *cache.images.shape[2:])
        dw, db = kernels.conv_pool_backward(imgs, dpool, cache.argmax.reshape(dpool.shape),
                                            params.conv_w.shape[1])
        if "conv_w" in mask:
            grads["conv_w"] = dw.astype(dt, copy=False)
        if "conv_b" in mask:
            grads["conv_b"] = db.astype(dt, copy=False)
    return grads


def apply_gradients(params: NetworkParams, grads: dict[str, np.ndarray]) -> None:
    """In-place plain gradient-descent step (rates are folded into the loss)."""
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NumericalDivergence("non-finite gradient in %s" % name)
    for name, g in grads.items():
        p = getattr(params, name)
        p -= g.astype(p.dtype, copy=False)


def sequence_backward(params: NetworkParams, cache: TrajectoryCache, batch: SequenceBatch, rates,
                      mask: Iterable[str] = FULL_MASK) -> NetworkParams:
    """Return a copy of ``params`` after one gradient step on this trajectory."""
    out = params.copy()
    if rates[0] == 0 and rates[1] == 0:
        return out
    apply_gradients(out, sequence_gradients(params, cache, batch, rates, mask))
    return out
