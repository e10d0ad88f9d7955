"""Parameter update rules.

Per-head rates enter as loss-term weights (see ``net.sequence_loss``); the
optimizer step size is the largest of the two rates, so with plain SGD the
rates are exactly the per-head learning rates, and with Adam they keep
their ratio as relative head weights while the step size follows the
larger one.
"""

from __future__ import annotations

import numpy as np

from .net import NetworkParams, NumericalDivergence


def _check_finite(grads):
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NumericalDivergence("non-finite gradient in %s" % name)


class SGD:
    name = "sgd"

    def __init__(self, **_):
        pass

    def step(self, params: NetworkParams, grads: dict, rates) -> None:
        _check_finite(grads)
        for name, g in grads.items():
            p = getattr(params, name)
            p -= g.astype(p.dtype, copy=False)

    def state(self) -> dict[str, np.ndarray]:
        return {}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        pass


class Adam:
    name = "adam"

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: NetworkParams, grads: dict, rates) -> None:
        _check_finite(grads)
        lr = max(rates)
        if lr <= 0:
            return
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1 - b1 ** self.t
        c2 = 1 - b2 ** self.t
        # rates are already folded into the gradient; undo the overall scale so
        # that the loss-term weights stay relative
        for name, g in grads.items():
            g = g / lr
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            v = self.v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p = getattr(params, name)
            p -= (lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.dtype, copy=False)

    def state(self) -> dict[str, np.ndarray]:
        out = {"adam.t": np.array([self.t], dtype=np.float32)}
        for name in self.m:
            out["adam.m." + name] = self.m[name]
            out["adam.v." + name] = self.v[name]
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        self.t = int(state["adam.t"][0]) if "adam.t" in state else 0
        self.m = {k[len("adam.m."):]: np.array(v) for k, v in state.items() if k.startswith("adam.m.")}
        self.v = {k[len("adam.v."):]: np.array(v) for k, v in state.items() if k.startswith("adam.v.")}


OPTIMIZERS = {"sgd": SGD, "adam": Adam}


def make_optimizer(name: str):
    try:
        return OPTIMIZERS[name]()
    except KeyError:
        raise ValueError("unknown optimizer %r (choose from %s)" % (name, ", ".join(OPTIMIZERS))) from None
