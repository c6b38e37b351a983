"""Synthetic dataset generation, label-noise injection, and CSV ingestion.

Classification data comes from spherical Gaussian mixtures (class means on
the unit sphere, per-class clouds with a configurable spread); regression
problems have i.i.d. standard Gaussian columns.  Everything is a pure
function of its seed.
"""

from dataclasses import dataclass

import numpy as np

from .common import InputError, fmt_float, round_half_up
from .theory import RegressionProblem

__all__ = [
    "LabeledDataset",
    "NoiseSpec",
    "gen_gaussian_mixture",
    "gen_linear_regression",
    "inject_label_noise",
    "load_csv_dataset",
    "save_csv_dataset",
    "save_regression_csv",
    "load_regression_csv",
]


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix (N x d), integer labels in [0, C), stable sample ids.

    Sample ids are the permutation-stable identity of samples: pruning takes
    sub-views but never renumbers.  Rows are kept in ascending sample_id
    order.
    """

    features: np.ndarray
    labels: np.ndarray
    sample_ids: np.ndarray
    num_classes: int
    split_tag: str = "train"

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        ids = np.asarray(self.sample_ids, dtype=np.int64)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "sample_ids", ids)
        if feats.ndim != 2:
            raise InputError("features must be 2-D (N x d)")
        n = feats.shape[0]
        if labels.shape != (n,) or ids.shape != (n,):
            raise InputError("labels and sample_ids must have length N")
        if len(np.unique(ids)) != n:
            raise InputError("sample_ids must be distinct")
        if n and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise InputError("labels must lie in [0, num_classes)")
        if not np.all(np.isfinite(feats)):
            raise InputError("non-finite feature values")
        if self.split_tag not in ("train", "test"):
            raise InputError("split_tag must be 'train' or 'test'")

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    def subset(self, ids):
        """View restricted to the given sample ids, rows in ascending id order."""
        wanted = np.sort(np.asarray(ids, dtype=np.int64))
        pos_of = {int(s): i for i, s in enumerate(self.sample_ids)}
        try:
            rows = np.array([pos_of[int(s)] for s in wanted], dtype=np.int64)
        except KeyError as exc:
            raise InputError(f"unknown sample_id {exc.args[0]}") from None
        return LabeledDataset(
            features=self.features[rows],
            labels=self.labels[rows],
            sample_ids=wanted,
            num_classes=self.num_classes,
            split_tag=self.split_tag,
        )


@dataclass(frozen=True)
class NoiseSpec:
    """Uniform label-flip specification; flipped labels are re-drawn from
    the C-1 wrong classes."""

    flip_fraction: float
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.flip_fraction <= 1.0:
            raise InputError("flip_fraction must be in [0, 1]")


def gen_gaussian_mixture(num_classes, dim, per_class, spread, seed,
                         per_class_test=None):
    """Spherical Gaussian mixture; returns a (train, test) dataset pair.

    Class means are unit-normalized Gaussian draws (shared between the
    splits); each class contributes exactly ``per_class`` train samples and
    ``per_class_test`` test samples (default: per_class), drawn with
    disjoint seed substreams.
    """
    if num_classes < 2:
        raise InputError("need at least 2 classes")
    if dim < 2:
        raise InputError("need dim >= 2")
    if per_class < 1:
        raise InputError("need per_class >= 1")
    if per_class_test is None:
        per_class_test = per_class
    means_rng = np.random.default_rng((seed, 10))
    means = means_rng.standard_normal((num_classes, dim))
    means /= np.linalg.norm(means, axis=1, keepdims=True)

    def build(count, sub, tag):
        rng = np.random.default_rng((seed, sub))
        feats = np.empty((num_classes * count, dim))
        labels = np.empty(num_classes * count, dtype=np.int64)
        for c in range(num_classes):
            block = slice(c * count, (c + 1) * count)
            feats[block] = means[c] + spread * rng.standard_normal((count, dim))
            labels[block] = c
        return LabeledDataset(
            features=feats,
            labels=labels,
            sample_ids=np.arange(num_classes * count),
            num_classes=num_classes,
            split_tag=tag,
        )

    return build(per_class, 11, "train"), build(per_class_test, 12, "test")


def gen_linear_regression(d, n, noise_std=1.0, lam=1.0, seed=0):
    """Regression problem with i.i.d. standard Gaussian columns and a
    unit-norm ground-truth parameter vector."""
    if d > n:
        raise InputError(f"need d <= N, got d={d}, N={n}")
    rng = np.random.default_rng((seed, 0))
    X = rng.standard_normal((d, n))
    theta = rng.standard_normal(d)
    theta /= np.linalg.norm(theta)
    return RegressionProblem(X=X, theta_star=theta, noise_std=noise_std, lam=lam)


def inject_label_noise(ds, spec):
    """Flip exactly round(flip_fraction * N) labels to uniformly-drawn wrong
    classes.  Deterministic given the spec seed; never maps a label to
    itself."""
    k = round_half_up(spec.flip_fraction * ds.n)
    if k == 0:
        return ds
    rng = np.random.default_rng((spec.seed, 20))
    rows = rng.choice(ds.n, size=k, replace=False)
    labels = ds.labels.copy()
    # uniform over the C-1 wrong classes: draw an offset in [1, C) and rotate
    offsets = rng.integers(1, ds.num_classes, size=k)
    labels[rows] = (labels[rows] + offsets) % ds.num_classes
    return LabeledDataset(
        features=ds.features,
        labels=labels,
        sample_ids=ds.sample_ids,
        num_classes=ds.num_classes,
        split_tag=ds.split_tag,
    )


def _parse_float(cell, path, lineno):
    try:
        return float(cell)
    except ValueError:
        raise InputError(
            f"{path}:{lineno}: cannot parse {cell!r} as a number"
        ) from None


def load_csv_dataset(path, label_column="label", split_tag="train",
                     num_classes=None):
    """Load the header-row CSV dataset format (``f0,...,f{d-1},label``).

    Row order defines sample_ids.  Malformed cells raise an error naming the
    offending line.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise InputError(f"{path}: empty file")
    header = lines[0].split(",")
    if label_column not in header:
        raise InputError(f"{path}: no column named {label_column!r}")
    label_idx = header.index(label_column)
    feat_idx = [i for i in range(len(header)) if i != label_idx]
    feats, labels = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != len(header):
            raise InputError(
                f"{path}:{lineno}: expected {len(header)} cells, got {len(cells)}"
            )
        feats.append([_parse_float(cells[i], path, lineno) for i in feat_idx])
        raw = _parse_float(cells[label_idx], path, lineno)
        if raw != int(raw):
            raise InputError(f"{path}:{lineno}: label {raw!r} is not an integer")
        labels.append(int(raw))
    labels = np.array(labels, dtype=np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if labels.size else 1
    return LabeledDataset(
        features=np.array(feats, dtype=np.float64).reshape(len(labels), -1),
        labels=labels,
        sample_ids=np.arange(len(labels)),
        num_classes=num_classes,
        split_tag=split_tag,
    )


def save_csv_dataset(ds, path):
    """Write the CSV dataset format; floats round-trip exactly."""
    cols = [f"f{i}" for i in range(ds.dim)] + ["label"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for row, label in zip(ds.features, ds.labels):
            fh.write(",".join(fmt_float(v) for v in row))
            fh.write(f",{int(label)}\n")


def save_regression_csv(problem, y, path):
    """Regression variant of the dataset format: samples as rows, real-valued
    ``target`` column."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (problem.n,):
        raise InputError("y must have one value per sample")
    cols = [f"f{i}" for i in range(problem.d)] + ["target"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for j in range(problem.n):
            fh.write(",".join(fmt_float(v) for v in problem.X[:, j]))
            fh.write(f",{fmt_float(y[j])}\n")


def load_regression_csv(path):
    """Load a regression CSV back into (X, y) with X of shape (d, N)."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise InputError(f"{path}: empty file")
    header = lines[0].split(",")
    if header[-1] != "target":
        raise InputError(f"{path}: last column must be 'target'")
    rows, targets = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != len(header):
            raise InputError(
                f"{path}:{lineno}: expected {len(header)} cells, got {len(cells)}"
            )
        rows.append([_parse_float(c, path, lineno) for c in cells[:-1]])
        targets.append(_parse_float(cells[-1], path, lineno))
    X = np.array(rows, dtype=np.float64).T
    return X, np.array(targets, dtype=np.float64)
