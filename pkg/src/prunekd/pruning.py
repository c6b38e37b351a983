"""Importance scoring and subset selection.

Scorers turn training artifacts into per-sample scores (error L2 norm,
gradient norm, forgetting-event counts); selection keeps either the top
scoring fraction with deterministic tie-breaking or a class-balanced random
draw.  Score tables and prune results round-trip through commented CSV
files bit-exactly.
"""

from dataclasses import dataclass

import numpy as np

from .common import InputError, fmt_float, round_half_up
from .nn import per_sample_ce_grad_sqnorms

__all__ = [
    "ScoreTable",
    "PruneResult",
    "score_el2n",
    "score_grand",
    "score_forgetting",
    "score_random",
    "prune_topk",
    "prune_random_balanced",
    "save_scores",
    "load_scores",
    "save_prune_result",
    "load_prune_result",
]

SCORE_METHODS = ("el2n", "grand", "forgetting", "random")


@dataclass
class ScoreTable:
    """Per-sample importance scores with provenance metadata.

    ``scores`` maps sample_id -> finite float; for the random method the
    stored values are the drawn priorities themselves.
    """

    method: str
    scores: dict
    ensemble_size: int = 0
    snapshot_epoch: int = -1
    seed: int = 0

    def __post_init__(self):
        if self.method not in SCORE_METHODS:
            raise InputError(f"unknown score method {self.method!r}")
        for sid, val in self.scores.items():
            if not np.isfinite(val):
                raise InputError(f"non-finite score for sample_id {sid}")


@dataclass
class PruneResult:
    """Sample ids retained at fraction f, in selection order."""

    kept_ids: np.ndarray
    fraction: float
    method: str

    def __post_init__(self):
        ids = np.asarray(self.kept_ids, dtype=np.int64)
        object.__setattr__(self, "kept_ids", ids)
        if len(np.unique(ids)) != ids.size:
            raise InputError("kept_ids must be distinct")


def _softmax_rows(z):
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def score_el2n(ensemble_logits, labels, sample_ids=None):
    """Error L2 norm: || softmax(z) - onehot(y) ||_2, ensemble-averaged."""
    if not ensemble_logits:
        raise InputError("ensemble must be nonempty")
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.size
    first = np.asarray(ensemble_logits[0])
    if sample_ids is None:
        sample_ids = np.arange(n)
    total = np.zeros(n)
    for logits in ensemble_logits:
        logits = np.asarray(logits, dtype=np.float64)
        if logits.shape != first.shape or logits.shape[0] != n:
            raise InputError("ensemble logit matrices must be congruent")
        p = _softmax_rows(logits)
        p[np.arange(n), labels] -= 1.0
        total += np.sqrt(np.sum(p**2, axis=1))
    mean = total / len(ensemble_logits)
    return ScoreTable(
        method="el2n",
        scores={int(s): float(v) for s, v in zip(sample_ids, mean)},
        ensemble_size=len(ensemble_logits),
    )


def score_grand(ensemble_models, ds, last_layer_only=False):
    """Gradient norm of the per-sample cross-entropy loss w.r.t. all model
    parameters (exact by default; last-layer mode is an explicit opt-in),
    ensemble-averaged."""
    if not ensemble_models:
        raise InputError("ensemble must be nonempty")
    total = np.zeros(ds.n)
    for model in ensemble_models:
        total += np.sqrt(
            per_sample_ce_grad_sqnorms(model, ds, last_layer_only=last_layer_only)
        )
    mean = total / len(ensemble_models)
    return ScoreTable(
        method="grand",
        scores={int(s): float(v) for s, v in zip(ds.sample_ids, mean)},
        ensemble_size=len(ensemble_models),
    )


def score_forgetting(trace):
    """Count correct -> misclassified transitions per sample over epochs.

    Samples never classified correctly in any epoch receive epochs + 1,
    strictly above any achievable flip count, so they rank as hardest.
    """
    correctness = trace.correctness
    epochs = correctness.shape[0]
    if epochs == 0:
        raise InputError("trace must cover at least one epoch")
    flips = np.sum(correctness[:-1] & ~correctness[1:], axis=0)
    never = ~correctness.any(axis=0)
    scores = np.where(never, epochs + 1, flips).astype(np.float64)
    return ScoreTable(
        method="forgetting",
        scores={int(s): float(v) for s, v in zip(trace.sample_ids, scores)},
        snapshot_epoch=epochs,
    )


def score_random(sample_ids, seed):
    """Uniform random priorities (the unbalanced random baseline)."""
    sample_ids = np.asarray(sample_ids, dtype=np.int64)
    rng = np.random.default_rng((seed, 51))
    priorities = rng.random(sample_ids.size)
    return ScoreTable(
        method="random",
        scores={int(s): float(v) for s, v in zip(sample_ids, priorities)},
        seed=seed,
    )


def prune_topk(table, f, n):
    """Keep the round(f*N) highest-scoring ids.

    Ties break by ascending sample_id, so the kept sets nest across
    fractions.  kept_ids come out sorted by descending score, then
    ascending id.
    """
    if f > 1.0:
        raise InputError("f must be <= 1")
    if len(table.scores) != n:
        raise InputError(f"score table covers {len(table.scores)} ids, need {n}")
    k = round_half_up(f * n)
    if k == 0:
        raise InputError(f"f={f} keeps zero of {n} samples")
    order = sorted(table.scores.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = np.array([sid for sid, _ in order[:k]], dtype=np.int64)
    return PruneResult(kept_ids=kept, fraction=f, method=table.method)


def prune_random_balanced(labels, f, seed, sample_ids=None):
    """Class-balanced random selection.

    The total budget round(f*N) is apportioned across classes by largest
    remainder on shares proportional to class counts, then filled by
    uniform draws without replacement inside each class.
    """
    if not 0.0 < f <= 1.0:
        raise InputError("f must be in (0, 1]")
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.size
    if sample_ids is None:
        sample_ids = np.arange(n)
    sample_ids = np.asarray(sample_ids, dtype=np.int64)
    k = round_half_up(f * n)
    if k == 0:
        raise InputError(f"f={f} keeps zero of {n} samples")
    classes, counts = np.unique(labels, return_counts=True)
    if np.any(counts == 0):
        raise InputError("every class must be nonempty")
    quotas = largest_remainder_quotas(counts, k)
    if np.any(quotas > counts):
        raise InputError("class quota exceeds class population")
    rng = np.random.default_rng((seed, 50))
    kept = []
    for cls, quota in zip(classes, quotas):
        members = np.sort(sample_ids[labels == cls])
        kept.append(rng.choice(members, size=quota, replace=False))
    kept = np.sort(np.concatenate(kept))
    return PruneResult(kept_ids=kept, fraction=f, method="random")


def largest_remainder_quotas(counts, total):
    """Apportion ``total`` across groups proportionally to ``counts``.

    Floors of the exact shares first; leftover units go to the largest
    fractional remainders, ties broken by ascending group index.
    """
    counts = np.asarray(counts, dtype=np.int64)
    shares = total * counts / counts.sum()
    base = np.floor(shares).astype(np.int64)
    leftover = total - int(base.sum())
    remainders = shares - base
    order = sorted(range(len(counts)), key=lambda i: (-remainders[i], i))
    quotas = base.copy()
    for i in order[:leftover]:
        quotas[i] += 1
    return quotas


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def save_scores(table, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            f"# method={table.method} ensemble={table.ensemble_size} "
            f"snapshot_epoch={table.snapshot_epoch} seed={table.seed}\n"
        )
        fh.write("sample_id,score\n")
        for sid in sorted(table.scores):
            fh.write(f"{sid},{fmt_float(table.scores[sid])}\n")


def load_scores(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2 or not lines[0].startswith("# "):
        raise InputError(f"{path}: not a score file")
    meta = dict(item.split("=", 1) for item in lines[0][2:].split())
    scores = {}
    for lineno, line in enumerate(lines[2:], start=3):
        if not line:
            continue
        sid, val = line.split(",")
        scores[int(sid)] = float(val)
    return ScoreTable(
        method=meta["method"],
        scores=scores,
        ensemble_size=int(meta["ensemble"]),
        snapshot_epoch=int(meta["snapshot_epoch"]),
        seed=int(meta["seed"]),
    )


def save_prune_result(result, path, seed=0):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            f"# method={result.method} f={fmt_float(result.fraction)} seed={seed}\n"
        )
        fh.write("sample_id\n")
        for sid in result.kept_ids:
            fh.write(f"{int(sid)}\n")


def load_prune_result(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2 or not lines[0].startswith("# "):
        raise InputError(f"{path}: not a prune result file")
    meta = dict(item.split("=", 1) for item in lines[0][2:].split())
    ids = [int(line) for line in lines[2:] if line]
    return PruneResult(
        kept_ids=np.array(ids, dtype=np.int64),
        fraction=float(meta["f"]),
        method=meta["method"],
    )
