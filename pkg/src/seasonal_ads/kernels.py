"""Hot numeric kernels for MLP training: activation, loss, Adam updates.

Two interchangeable backends compute identical math:

* ``numba``: loop kernels compiled with ``@njit`` (the default when numba
  imports cleanly),
* ``numpy``: pure-vectorized fallback.

Selection happens once at import from the ``SEASONAL_ADS_BACKEND``
environment variable (``numba`` or ``numpy``). Matrix products stay in
numpy/BLAS in the caller either way; these kernels cover the elementwise
and reduction work between them. ``benchmarks/bench_backends.py``
compares the two.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

ENV_VAR = "SEASONAL_ADS_BACKEND"


def _relu_numpy(z):
    return np.maximum(z, 0.0)


def _relu_backward_numpy(grad, z):
    return np.where(z > 0.0, grad, 0.0)


def _softmax_xent_numpy(logits, labels):
    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    loss_sum = -float(np.log(probs[np.arange(labels.size), labels]).sum())
    return probs, loss_sum


def _adam_update_numpy(params, grads, m, v, step, lr, beta1, beta2, eps):
    m *= beta1
    m += (1.0 - beta1) * grads
    v *= beta2
    v += (1.0 - beta2) * grads * grads
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    params -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def _numpy_backend() -> SimpleNamespace:
    return SimpleNamespace(
        name="numpy",
        relu=_relu_numpy,
        relu_backward=_relu_backward_numpy,
        softmax_xent=_softmax_xent_numpy,
        adam_update=_adam_update_numpy,
    )


def _numba_backend() -> SimpleNamespace:
    from numba import njit

    @njit(cache=True)
    def relu(z):
        out = np.empty_like(z)
        flat_in = z.ravel()
        flat_out = out.ravel()
        for i in range(flat_in.size):
            x = flat_in[i]
            flat_out[i] = x if x > 0.0 else 0.0
        return out

    @njit(cache=True)
    def relu_backward(grad, z):
        out = np.empty_like(grad)
        flat_g = grad.ravel()
        flat_z = z.ravel()
        flat_out = out.ravel()
        for i in range(flat_g.size):
            flat_out[i] = flat_g[i] if flat_z[i] > 0.0 else 0.0
        return out

    @njit(cache=True)
    def softmax_xent(logits, labels):
        rows, cols = logits.shape
        probs = np.empty((rows, cols))
        loss_sum = 0.0
        for i in range(rows):
            peak = logits[i, 0]
            for j in range(1, cols):
                if logits[i, j] > peak:
                    peak = logits[i, j]
            total = 0.0
            for j in range(cols):
                e = np.exp(logits[i, j] - peak)
                probs[i, j] = e
                total += e
            for j in range(cols):
                probs[i, j] /= total
            loss_sum -= np.log(probs[i, labels[i]])
        return probs, loss_sum

    @njit(cache=True)
    def adam_update(params, grads, m, v, step, lr, beta1, beta2, eps):
        c1 = 1.0 - beta1**step
        c2 = 1.0 - beta2**step
        for i in range(params.size):
            g = grads[i]
            m[i] = beta1 * m[i] + (1.0 - beta1) * g
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
            params[i] -= lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)

    return SimpleNamespace(
        name="numba",
        relu=relu,
        relu_backward=relu_backward,
        softmax_xent=softmax_xent,
        adam_update=adam_update,
    )


def make_backend(name: str) -> SimpleNamespace:
    if name == "numpy":
        return _numpy_backend()
    if name == "numba":
        return _numba_backend()
    raise ValueError(f"unknown backend {name!r}; expected 'numba' or 'numpy'")


def _select_default() -> SimpleNamespace:
    requested = os.environ.get(ENV_VAR, "").strip().lower()
    if requested:
        return make_backend(requested)
    try:
        return _numba_backend()
    except ImportError:
        return _numpy_backend()


BACKEND = _select_default()
