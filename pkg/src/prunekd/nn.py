"""Minimal dense classifier with hand-derived gradients and SGD training.

The architecture is fixed by construction (ReLU hidden layers, identity
output producing logits), so gradients are written out analytically rather
than through autodiff.  The training loop records the per-epoch correctness
trace that the forgetting scorer consumes, and is bit-deterministic given
(seed, config, data) on a single thread.
"""

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .common import InputError

__all__ = [
    "DenseNet",
    "TrainConfig",
    "TrainTrace",
    "softmax_temperature",
    "kd_loss",
    "train",
    "predict_logits",
    "accuracy",
    "per_sample_ce_grad_sqnorms",
]


@dataclass
class DenseNet:
    """Fully-connected net: ReLU on hidden layers, raw logits at the output.

    ``weights[l]`` has shape (fan_in, fan_out); inputs are row vectors.
    """

    layer_sizes: list
    weights: list
    biases: list

    @classmethod
    def init(cls, layer_sizes, seed):
        """Per-layer uniform init scaled by 1/sqrt(fan_in)."""
        if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
            raise InputError("layer_sizes needs >= 2 positive entries")
        rng = np.random.default_rng((seed, 30))
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(list(layer_sizes), weights, biases)

    def copy(self):
        return DenseNet(
            list(self.layer_sizes),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def forward(self, x):
        """Batched forward pass; x is (B, d), returns (B, C) logits."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[np.newaxis, :]
        if x.shape[1] != self.layer_sizes[0]:
            raise InputError(
                f"input dim {x.shape[1]} != expected {self.layer_sizes[0]}"
            )
        a = x
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w + b
            if l != last:
                np.maximum(a, 0.0, out=a)
        return a

    def _forward_trace(self, x):
        """Forward pass keeping hidden activations for backprop."""
        acts = [x]
        a = x
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w + b
            if l != last:
                np.maximum(a, 0.0, out=a)
                acts.append(a)
        return acts, a

    def save(self, path):
        """Checkpoint as npz; round-trips bit-exactly."""
        arrays = {"layer_sizes": np.array(self.layer_sizes, dtype=np.int64)}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            arrays[f"w{i}"] = w
            arrays[f"b{i}"] = b
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path):
        with np.load(path) as blob:
            sizes = [int(v) for v in blob["layer_sizes"]]
            weights = [blob[f"w{i}"] for i in range(len(sizes) - 1)]
            biases = [blob[f"b{i}"] for i in range(len(sizes) - 1)]
        return cls(sizes, weights, biases)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 5e-4
    epochs: int = 60
    batch_size: int = 64
    lr_decay_epochs: tuple = (30, 45)
    lr_decay_factor: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise InputError("lr must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise InputError("momentum must be in [0, 1)")
        if self.weight_decay < 0:
            raise InputError("weight_decay must be >= 0")
        if self.epochs < 0 or self.batch_size < 1:
            raise InputError("epochs must be >= 0 and batch_size >= 1")
        decay = tuple(self.lr_decay_epochs)
        object.__setattr__(self, "lr_decay_epochs", decay)
        if any(b <= a for a, b in zip(decay, decay[1:])):
            raise InputError("lr_decay_epochs must be strictly increasing")
        if any(e >= self.epochs for e in decay) and self.epochs > 0:
            raise InputError("lr_decay_epochs must all be < epochs")

    def replace(self, **kw):
        from dataclasses import replace as _replace

        return _replace(self, **kw)


@dataclass
class TrainTrace:
    """Per-epoch accuracies plus the correctness matrix for the forgetting
    scorer.  Row e of ``correctness`` reflects model state after epoch e;
    columns follow ``sample_ids`` order."""

    train_acc: np.ndarray
    test_acc: np.ndarray
    correctness: np.ndarray
    sample_ids: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def epochs(self):
        return self.correctness.shape[0]


def softmax_temperature(logits, tau):
    """Temperature softmax q_i = exp(z_i/tau) / sum_j exp(z_j/tau).

    Accepts a single logit vector or a batch of rows; stabilized by max
    subtraction.
    """
    if tau <= 0:
        raise InputError("tau must be > 0")
    z = np.asarray(logits, dtype=np.float64)
    single = z.ndim == 1
    if single:
        z = z[np.newaxis, :]
    out = backend.softmax_rows(np.ascontiguousarray(z), float(tau))
    return out[0] if single else out


def _combined_loss_grad(student_logits, teacher_logits, labels, alpha, tau,
                        tau_squared):
    """Batched KD objective: per-row losses and gradients w.r.t. logits.

    The alpha endpoints are hard branches: at alpha=0 the teacher logits are
    never touched, at alpha=1 the labels are never touched.  This is what
    makes the label-ablation and no-teacher equivalences exact rather than
    up to rounding.
    """
    z = np.ascontiguousarray(student_logits, dtype=np.float64)
    if alpha == 0.0:
        return backend.ce_loss_grad_rows(z, labels)
    scale = tau * tau if tau_squared else 1.0
    zt = np.ascontiguousarray(teacher_logits, dtype=np.float64)
    kl_losses, kl_grad = backend.kl_loss_grad_rows(z, zt, float(tau))
    if alpha == 1.0:
        return scale * kl_losses, scale * kl_grad
    ce_losses, ce_grad = backend.ce_loss_grad_rows(z, labels)
    losses = (1.0 - alpha) * ce_losses + alpha * scale * kl_losses
    grad = (1.0 - alpha) * ce_grad + alpha * scale * kl_grad
    return losses, grad


def kd_loss(student_logits, teacher_logits, label, alpha, tau,
            tau_squared=True):
    """Combined distillation loss for one sample and its logit gradient.

    loss = (1-alpha) * CE(label, softmax(student, tau=1))
         + alpha * scale * KL(softmax(teacher, tau) || softmax(student, tau))

    where scale is tau**2 by default (gradient magnitudes comparable across
    tau) or 1 with ``tau_squared=False``.
    """
    if tau <= 0:
        raise InputError("tau must be > 0")
    if not 0.0 <= alpha <= 1.0:
        raise InputError("alpha must be in [0, 1]")
    z = np.asarray(student_logits, dtype=np.float64)[np.newaxis, :]
    c = z.shape[1]
    if not 0 <= label < c:
        raise InputError(f"label {label} out of range for {c} classes")
    zt = None
    if alpha != 0.0:
        zt = np.asarray(teacher_logits, dtype=np.float64)[np.newaxis, :]
        if zt.shape != z.shape:
            raise InputError("teacher and student logits must match in shape")
    labels = np.array([label], dtype=np.int64)
    losses, grad = _combined_loss_grad(z, zt, labels, float(alpha), float(tau),
                                       tau_squared)
    return float(losses[0]), grad[0]


def predict_logits(model, ds, batch_size=512):
    """Pure batched forward pass; row i of the output corresponds to row i
    of the dataset (ascending sample_id order)."""
    out = np.empty((ds.n, model.layer_sizes[-1]))
    for start in range(0, ds.n, batch_size):
        stop = min(start + batch_size, ds.n)
        out[start:stop] = model.forward(ds.features[start:stop])
    return out


def accuracy(model, ds):
    if ds.n == 0:
        return float("nan")
    pred = np.argmax(predict_logits(model, ds), axis=1)
    return float(np.mean(pred == ds.labels))


def _teacher_matrix(teacher_logits, ds, num_classes):
    """Align a sample_id -> logits mapping with the dataset rows."""
    mat = np.empty((ds.n, num_classes))
    for row, sid in enumerate(ds.sample_ids):
        try:
            vec = teacher_logits[int(sid)]
        except KeyError:
            raise InputError(
                f"teacher logits missing for sample_id {int(sid)}"
            ) from None
        mat[row] = vec
    return np.ascontiguousarray(mat)


def train(model, ds, cfg, teacher_logits=None, alpha=0.0, tau=4.0,
          tau_squared=True, eval_ds=None):
    """SGD with momentum and weight decay over the combined KD objective.

    ``teacher_logits`` maps sample_id -> logit vector and must cover every
    training sample; when absent the loop behaves as alpha = 0.  Shuffling
    is a pure function of (cfg.seed, epoch); the final partial batch is
    used.  Returns a trained copy of the model and the TrainTrace.
    """
    if tau <= 0:
        raise InputError("tau must be > 0")
    if not 0.0 <= alpha <= 1.0:
        raise InputError("alpha must be in [0, 1]")
    if teacher_logits is None:
        alpha = 0.0
    net = model.copy()
    n = ds.n
    c = net.layer_sizes[-1]
    teacher = None
    if alpha != 0.0:
        teacher = _teacher_matrix(teacher_logits, ds, c)
    labels = np.ascontiguousarray(ds.labels)
    feats = ds.features

    velocities = [np.zeros_like(w) for w in net.weights] + [
        np.zeros_like(b) for b in net.biases
    ]
    params = net.weights + net.biases

    train_acc = np.zeros(cfg.epochs)
    test_acc = np.full(cfg.epochs, np.nan)
    correctness = np.zeros((cfg.epochs, n), dtype=bool)

    lr = cfg.lr
    for epoch in range(cfg.epochs):
        if epoch in cfg.lr_decay_epochs:
            lr *= cfg.lr_decay_factor
        perm = np.random.default_rng((cfg.seed, 40, epoch)).permutation(n)
        for start in range(0, n, cfg.batch_size):
            rows = perm[start:start + cfg.batch_size]
            x = feats[rows]
            acts, logits = net._forward_trace(x)
            zt = teacher[rows] if teacher is not None else None
            _, gout = _combined_loss_grad(
                logits, zt, labels[rows], alpha, tau, tau_squared
            )
            delta = gout / rows.size
            grads = [None] * len(net.weights)
            bgrads = [None] * len(net.weights)
            for l in range(len(net.weights) - 1, -1, -1):
                grads[l] = acts[l].T @ delta
                bgrads[l] = delta.sum(axis=0)
                if l > 0:
                    delta = (delta @ net.weights[l].T) * (acts[l] > 0)
            for p, g, v in zip(params, grads + bgrads, velocities):
                backend.sgd_momentum_update(
                    p.ravel(), np.ascontiguousarray(g).ravel(), v.ravel(),
                    lr, cfg.momentum, cfg.weight_decay,
                )
        pred = np.argmax(predict_logits(net, ds), axis=1)
        correct = pred == labels
        correctness[epoch] = correct
        train_acc[epoch] = correct.mean() if n else float("nan")
        if eval_ds is not None:
            test_acc[epoch] = accuracy(net, eval_ds)

    trace = TrainTrace(
        train_acc=train_acc,
        test_acc=test_acc,
        correctness=correctness,
        sample_ids=ds.sample_ids.copy(),
        metadata={"alpha": alpha, "tau": tau, "seed": cfg.seed},
    )
    return net, trace


def per_sample_ce_grad_sqnorms(model, ds, last_layer_only=False):
    """Squared L2 norm of the per-sample cross-entropy gradient w.r.t. all
    parameters (or only the final layer's).

    Per-sample, per-layer gradients are rank-one (outer products of the
    incoming activation and the backpropagated delta), so their squared
    norms factor as ||a||^2 * ||delta||^2 without materializing them.
    """
    total = np.zeros(ds.n)
    batch = 512
    for start in range(0, ds.n, batch):
        stop = min(start + batch, ds.n)
        x = ds.features[start:stop]
        acts, logits = model._forward_trace(x)
        _, delta = backend.ce_loss_grad_rows(
            np.ascontiguousarray(logits), np.ascontiguousarray(ds.labels[start:stop])
        )
        acc = np.zeros(stop - start)
        for l in range(len(model.weights) - 1, -1, -1):
            if not last_layer_only or l == len(model.weights) - 1:
                a_sq = np.sum(acts[l] ** 2, axis=1)
                d_sq = np.sum(delta**2, axis=1)
                acc += a_sq * d_sq + d_sq  # weight block + bias block
            if l > 0:
                delta = (delta @ model.weights[l].T) * (acts[l] > 0)
        total[start:stop] = acc
    return total
