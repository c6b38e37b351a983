"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The row-wise loss/probability kernels and the fused optimizer update are the
only places where the training loop spends meaningful time outside of BLAS
matmuls.  Each kernel exists twice: an ``@njit`` version and a vectorized
numpy version with identical semantics (results agree to floating-point
roundoff; summation order differs, so outputs are not guaranteed bitwise
equal across backends).

Selection happens once at import time:

* default: numba, when importable
* ``PRUNEKD_NO_NUMBA=1`` in the environment forces the numpy path

``ACTIVE_BACKEND`` records which path is in use.  Both implementations stay
importable (``numpy_kernels`` / ``numba_kernels``) so the benchmark in
``benchmarks/bench_backends.py`` can compare them directly.
"""

import os
from types import SimpleNamespace

import numpy as np

__all__ = [
    "ACTIVE_BACKEND",
    "numpy_kernels",
    "numba_kernels",
    "softmax_rows",
    "ce_loss_grad_rows",
    "kl_loss_grad_rows",
    "sgd_momentum_update",
]


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def _np_softmax_rows(z, tau):
    """Row-wise temperature softmax, stabilized by max subtraction."""
    shifted = (z - z.max(axis=1, keepdims=True)) / tau
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _np_ce_loss_grad_rows(z, labels):
    """Per-row cross-entropy against integer labels at temperature 1.

    Returns (losses, grad) where grad[i] = softmax(z[i]) - onehot(labels[i]).
    """
    p = _np_softmax_rows(z, 1.0)
    n = z.shape[0]
    rows = np.arange(n)
    # clip only inside the log; the gradient uses the exact probabilities
    losses = -np.log(np.maximum(p[rows, labels], 1e-300))
    grad = p.copy()
    grad[rows, labels] -= 1.0
    return losses, grad


def _np_kl_loss_grad_rows(z_student, z_teacher, tau):
    """Per-row KL(teacher || student) of temperature-softened predictions.

    Returns (losses, grad) with grad taken w.r.t. the raw student logits:
    grad[i] = (softmax(z_s[i]/tau) - softmax(z_t[i]/tau)) / tau.
    The tau**2 convention factor is applied by the caller.
    """
    qs = _np_softmax_rows(z_student, tau)
    qt = _np_softmax_rows(z_teacher, tau)
    log_ratio = np.log(np.maximum(qt, 1e-300)) - np.log(np.maximum(qs, 1e-300))
    losses = np.sum(qt * log_ratio, axis=1)
    grad = (qs - qt) / tau
    return losses, grad


def _np_sgd_momentum_update(param, grad, velocity, lr, momentum, weight_decay):
    """In-place SGD with momentum and L2 weight decay.

    v <- momentum * v + grad + weight_decay * param;  param <- param - lr * v
    """
    velocity *= momentum
    velocity += grad
    if weight_decay != 0.0:
        velocity += weight_decay * param
    param -= lr * velocity


numpy_kernels = SimpleNamespace(
    softmax_rows=_np_softmax_rows,
    ce_loss_grad_rows=_np_ce_loss_grad_rows,
    kl_loss_grad_rows=_np_kl_loss_grad_rows,
    sgd_momentum_update=_np_sgd_momentum_update,
)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

def _build_numba_kernels():
    from numba import njit

    @njit(cache=True)
    def softmax_rows(z, tau):
        n, c = z.shape
        out = np.empty((n, c))
        for i in range(n):
            m = z[i, 0]
            for j in range(1, c):
                if z[i, j] > m:
                    m = z[i, j]
            s = 0.0
            for j in range(c):
                e = np.exp((z[i, j] - m) / tau)
                out[i, j] = e
                s += e
            for j in range(c):
                out[i, j] /= s
        return out

    @njit(cache=True)
    def ce_loss_grad_rows(z, labels):
        n, c = z.shape
        losses = np.empty(n)
        grad = np.empty((n, c))
        for i in range(n):
            m = z[i, 0]
            for j in range(1, c):
                if z[i, j] > m:
                    m = z[i, j]
            s = 0.0
            for j in range(c):
                e = np.exp(z[i, j] - m)
                grad[i, j] = e
                s += e
            for j in range(c):
                grad[i, j] /= s
            y = labels[i]
            p = grad[i, y]
            if p < 1e-300:
                p = 1e-300
            losses[i] = -np.log(p)
            grad[i, y] -= 1.0
        return losses, grad

    @njit(cache=True)
    def kl_loss_grad_rows(z_student, z_teacher, tau):
        n, c = z_student.shape
        losses = np.empty(n)
        grad = np.empty((n, c))
        qt = np.empty(c)
        for i in range(n):
            ms = z_student[i, 0]
            mt = z_teacher[i, 0]
            for j in range(1, c):
                if z_student[i, j] > ms:
                    ms = z_student[i, j]
                if z_teacher[i, j] > mt:
                    mt = z_teacher[i, j]
            ss = 0.0
            st = 0.0
            for j in range(c):
                es = np.exp((z_student[i, j] - ms) / tau)
                et = np.exp((z_teacher[i, j] - mt) / tau)
                grad[i, j] = es
                qt[j] = et
                ss += es
                st += et
            acc = 0.0
            for j in range(c):
                qs_j = grad[i, j] / ss
                qt_j = qt[j] / st
                a = qs_j if qs_j > 1e-300 else 1e-300
                b = qt_j if qt_j > 1e-300 else 1e-300
                acc += qt_j * (np.log(b) - np.log(a))
                grad[i, j] = (qs_j - qt_j) / tau
            losses[i] = acc
        return losses, grad

    @njit(cache=True)
    def sgd_momentum_update(param, grad, velocity, lr, momentum, weight_decay):
        n = param.shape[0]
        for k in range(n):
            v = momentum * velocity[k] + grad[k] + weight_decay * param[k]
            velocity[k] = v
            param[k] -= lr * v

    return SimpleNamespace(
        softmax_rows=softmax_rows,
        ce_loss_grad_rows=ce_loss_grad_rows,
        kl_loss_grad_rows=kl_loss_grad_rows,
        sgd_momentum_update=sgd_momentum_update,
    )


numba_kernels = None
if os.environ.get("PRUNEKD_NO_NUMBA", "0") != "1":
    try:
        numba_kernels = _build_numba_kernels()
    except ImportError:
        numba_kernels = None

if numba_kernels is not None:
    ACTIVE_BACKEND = "numba"
    _active = numba_kernels
else:
    ACTIVE_BACKEND = "numpy"
    _active = numpy_kernels

softmax_rows = _active.softmax_rows
ce_loss_grad_rows = _active.ce_loss_grad_rows
kl_loss_grad_rows = _active.kl_loss_grad_rows
sgd_momentum_update = _active.sgd_momentum_update
