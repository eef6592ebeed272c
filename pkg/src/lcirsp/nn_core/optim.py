"""RMSProp and Adam with per-parameter slot state."""

from __future__ import annotations

import numpy as np


class RmsProp:
    """v <- rho*v + (1-rho)*g^2;  p <- p - lr * g / (sqrt(v) + eps)."""

    def __init__(self, params, lr=1e-3, rho=0.9, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.rho = rho
        self.eps = eps
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        for p, v in zip(self.params, self.v):
            if p.grad is None:
                continue
            v *= self.rho
            v += (1.0 - self.rho) * p.grad * p.grad
            p.data -= self.lr * p.grad / (np.sqrt(v) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


class Adam:
    """Bias-corrected first/second moment update."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad * p.grad
            p.data -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


def rmsprop_step(values, gradients, slots, lr=1e-3, rho=0.9, eps=1e-8):
    """Functional single-tensor form; mutates and returns (values, slots)."""
    slots *= rho
    slots += (1.0 - rho) * gradients * gradients
    values -= lr * gradients / (np.sqrt(slots) + eps)
    return values, slots


def adam_step(values, gradients, m, v, t, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """Functional single-tensor form at step t >= 1; mutates in place."""
    if t < 1:
        raise ValueError("adam step count starts at 1")
    m *= beta1
    m += (1.0 - beta1) * gradients
    v *= beta2
    v += (1.0 - beta2) * gradients * gradients
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    values -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return values, m, v
