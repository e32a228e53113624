"""Small tanh MLPs with hand-written backpropagation.

Everything here is plain numpy: forward passes cache activations, each loss
returns exact analytic gradients for every parameter, and a finite-difference
oracle in the test suite checks them all.  Keeping the chain rule explicit is
what makes the gradient-check contract testable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class DivergenceError(RuntimeError):
    """Training diverged (exploding logits or non-finite parameters)."""


@dataclass
class Net:
    """Fully connected net: tanh hidden layers, linear output."""

    sizes: tuple
    weights: list
    biases: list

    @classmethod
    def init(cls, sizes, rng: np.random.Generator) -> "Net":
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            weights.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(sizes=tuple(sizes), weights=weights, biases=biases)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        """Returns (output, cache of layer inputs for backward)."""
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.sizes[0]:
            raise ValueError(f"input dim {x.shape[1]} != expected {self.sizes[0]}")
        cache = [x]
        a = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            a = z if i == last else np.tanh(z)
            cache.append(a)
        return a, cache

    def backward(self, cache: list, dout: np.ndarray) -> tuple[list, list]:
        """Gradients of a scalar loss given d(loss)/d(output); returns (dWs, dbs)."""
        dws = [None] * len(self.weights)
        dbs = [None] * len(self.biases)
        delta = dout
        for i in range(len(self.weights) - 1, -1, -1):
            a_prev = cache[i]
            dws[i] = a_prev.T @ delta
            dbs[i] = delta.sum(axis=0)
            if i > 0:
                # propagate through tanh of the previous hidden layer
                delta = (delta @ self.weights[i].T) * (1.0 - cache[i] ** 2)
        return dws, dbs

    def zeros_like_grads(self) -> tuple[list, list]:
        return [np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases]

    def flat(self) -> np.ndarray:
        return np.concatenate([w.ravel() for w in self.weights] + [b.ravel() for b in self.biases])

    def set_flat(self, vec: np.ndarray) -> None:
        pos = 0
        for w in self.weights:
            w[...] = vec[pos : pos + w.size].reshape(w.shape)
            pos += w.size
        for b in self.biases:
            b[...] = vec[pos : pos + b.size].reshape(b.shape)
            pos += b.size

    def copy(self) -> "Net":
        return Net(
            sizes=self.sizes,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def finite(self) -> bool:
        return all(np.isfinite(w).all() for w in self.weights) and all(
            np.isfinite(b).all() for b in self.biases
        )


def log_softmax(logits: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Row-wise log-softmax; masked-out entries get -inf (probability 0)."""
    z = logits if mask is None else np.where(mask, logits, -np.inf)
    m = z.max(axis=1, keepdims=True)
    shifted = z - m
    expsum = np.exp(shifted).sum(axis=1, keepdims=True)
    return shifted - np.log(expsum)


def entropy_of(logp: np.ndarray) -> np.ndarray:
    """Row-wise entropy; treats zero-probability entries as contributing 0."""
    p = np.exp(logp)
    return -(p * np.where(np.isfinite(logp), logp, 0.0)).sum(axis=1)


def _entropy_bonus_dlogits(p, logp, h, coef):
    # d(-coef * mean H)/dlogits; rows scaled later by 1/B
    return coef * p * (np.where(np.isfinite(logp), logp, 0.0) + h[:, None])


def actor_loss_a2c(
    net: Net,
    obs: np.ndarray,
    actions: np.ndarray,
    advantages: np.ndarray,
    entropy_coef: float = 0.0,
    mask: Optional[np.ndarray] = None,
):
    """Policy-gradient loss: -mean(log pi(a) * adv) - entropy_coef * mean(H)."""
    logits, cache = net.forward(obs)
    logp = log_softmax(logits, mask)
    p = np.exp(logp)
    n = obs.shape[0]
    rows = np.arange(n)
    h = entropy_of(logp)
    loss = -(logp[rows, actions] * advantages).mean() - entropy_coef * h.mean()

    dlogits = p * advantages[:, None]
    dlogits[rows, actions] -= advantages
    dlogits += _entropy_bonus_dlogits(p, logp, h, entropy_coef)
    dlogits /= n
    dws, dbs = net.backward(cache, dlogits)
    return loss, (dws, dbs), {"logits": logits, "entropy": h.mean()}


def actor_loss_ppo(
    net: Net,
    obs: np.ndarray,
    actions: np.ndarray,
    advantages: np.ndarray,
    old_logp: np.ndarray,
    clip_eps: float = 0.2,
    entropy_coef: float = 0.0,
    mask: Optional[np.ndarray] = None,
):
    """Clipped surrogate: -mean(min(r*A, clip(r)*A)) - entropy_coef * mean(H)."""
    logits, cache = net.forward(obs)
    logp = log_softmax(logits, mask)
    p = np.exp(logp)
    n = obs.shape[0]
    rows = np.arange(n)
    lp_a = logp[rows, actions]
    ratio = np.exp(lp_a - old_logp)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    surrogate = np.minimum(unclipped, clipped)
    h = entropy_of(logp)
    loss = -surrogate.mean() - entropy_coef * h.mean()

    # gradient flows only where the unclipped branch is active
    coef = np.where(unclipped <= clipped, ratio * advantages, 0.0)
    dlogits = p * coef[:, None]
    dlogits[rows, actions] -= coef
    dlogits += _entropy_bonus_dlogits(p, logp, h, entropy_coef)
    dlogits /= n
    dws, dbs = net.backward(cache, dlogits)
    diagnostics = {
        "logits": logits,
        "entropy": h.mean(),
        "ratio": ratio,
        "clip_fraction": float((unclipped > clipped).mean()),
    }
    return loss, (dws, dbs), diagnostics


def value_loss(net: Net, obs: np.ndarray, returns: np.ndarray):
    """Mean squared error of the scalar value head."""
    v, cache = net.forward(obs)
    v = v[:, 0]
    n = obs.shape[0]
    loss = ((v - returns) ** 2).mean()
    dv = (2.0 * (v - returns) / n)[:, None]
    dws, dbs = net.backward(cache, dv)
    return loss, (dws, dbs), {"value": v}


def q_loss(net: Net, obs: np.ndarray, actions: np.ndarray, targets: np.ndarray):
    """Mean squared error of Q(s, a) against fixed targets."""
    q, cache = net.forward(obs)
    n = obs.shape[0]
    rows = np.arange(n)
    err = q[rows, actions] - targets
    loss = (err**2).mean()
    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * err / n
    dws, dbs = net.backward(cache, dq)
    return loss, (dws, dbs), {"q": q}


def sac_actor_loss(
    net: Net,
    obs: np.ndarray,
    min_q: np.ndarray,
    temperature: float,
    mask: Optional[np.ndarray] = None,
):
    """Soft policy loss: mean over states of sum_a pi(a) (T log pi(a) - minQ(a))."""
    logits, cache = net.forward(obs)
    logp = log_softmax(logits, mask)
    p = np.exp(logp)
    n = obs.shape[0]
    g = temperature * np.where(np.isfinite(logp), logp, 0.0) - min_q
    inner = (p * g).sum(axis=1)
    loss = inner.mean()
    dlogits = p * (g - inner[:, None]) / n
    dws, dbs = net.backward(cache, dlogits)
    return loss, (dws, dbs), {"logits": logits, "entropy": entropy_of(logp).mean()}


def temperature_loss(log_temp: float, entropy: np.ndarray, target_entropy: float):
    """Loss alpha * (H - H_target) averaged over states; gradient w.r.t. log alpha."""
    alpha = float(np.exp(log_temp))
    gap = entropy - target_entropy
    loss = float(alpha * gap.mean())
    dlog_temp = float(alpha * gap.mean())
    return loss, dlog_temp


def polyak_update(target: Net, online: Net, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, elementwise."""
    for tw, w in zip(target.weights, online.weights):
        tw *= 1.0 - tau
        tw += tau * w
    for tb, b in zip(target.biases, online.biases):
        tb *= 1.0 - tau
        tb += tau * b


def check_divergence(logits: np.ndarray, limit: float = 1e3) -> None:
    mean_abs = float(np.abs(logits).mean())
    if not np.isfinite(mean_abs) or mean_abs > limit:
        raise DivergenceError(
            f"mean |logits| = {mean_abs:.3g} exceeded {limit:g}; "
            "lower the learning rate or raise the entropy bonus"
        )


class SGDMomentum:
    """Classic momentum update; velocity per parameter array."""

    def __init__(self, lr: float, momentum: float = 0.9):
        self.lr = lr
        self.momentum = momentum
        self._velocity: dict = {}

    def step(self, net: Net, grads: tuple, key: str = "") -> None:
        dws, dbs = grads
        vel = self._velocity.setdefault(
            key, ([np.zeros_like(w) for w in net.weights], [np.zeros_like(b) for b in net.biases])
        )
        for w, dw, v in zip(net.weights, dws, vel[0]):
            v *= self.momentum
            v += dw
            w -= self.lr * v
        for b, db, v in zip(net.biases, dbs, vel[1]):
            v *= self.momentum
            v += db
            b -= self.lr * v


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._state: dict = {}

    def _update(self, param: np.ndarray, grad: np.ndarray, slot: tuple) -> None:
        m, v, t = self._state.get(slot, (np.zeros_like(param), np.zeros_like(param), 0))
        t += 1
        m = self.beta1 * m + (1 - self.beta1) * grad
        v = self.beta2 * v + (1 - self.beta2) * grad**2
        self._state[slot] = (m, v, t)
        m_hat = m / (1 - self.beta1**t)
        v_hat = v / (1 - self.beta2**t)
        param -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def step(self, net: Net, grads: tuple, key: str = "") -> None:
        dws, dbs = grads
        for i, (w, dw) in enumerate(zip(net.weights, dws)):
            self._update(w, dw, (key, "w", i))
        for i, (b, db) in enumerate(zip(net.biases, dbs)):
            self._update(b, db, (key, "b", i))


def make_optimizer(name: str, lr: float, momentum: float = 0.9):
    if name == "sgdm":
        return SGDMomentum(lr, momentum)
    if name == "adam":
        return Adam(lr)
    raise ValueError(f"unknown optimizer: {name!r}")


#: every network loss with analytic gradients, keyed by spec name
LOSSES = {
    "a2c_actor": actor_loss_a2c,
    "ppo_actor": actor_loss_ppo,
    "value": value_loss,
    "q": q_loss,
    "sac_actor": sac_actor_loss,
}


def mlp_backward(net: Net, batch: dict, loss_spec: str):
    """Analytic gradients of the named loss for one network and batch.

    Returns (loss, (dWs, dbs), diagnostics); the finite-difference oracle in
    the test suite validates every entry of the registry.
    """
    if loss_spec not in LOSSES:
        raise ValueError(f"unknown loss spec {loss_spec!r}; known: {sorted(LOSSES)}")
    return LOSSES[loss_spec](net, **batch)
