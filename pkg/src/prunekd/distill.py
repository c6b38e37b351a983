"""Teacher-logit caching and pruning-fraction-aware distillation weight.

The teacher is frozen, so its logits are computed once per dataset and
cached; students resolve their distillation weight from a piecewise-linear
policy over the pruning fraction before delegating to the training loop.
"""

from dataclasses import dataclass

import numpy as np

from .common import InputError, array_digest, fmt_float
from .nn import DenseNet, predict_logits, train

__all__ = [
    "TeacherCache",
    "AlphaPolicy",
    "DEFAULT_ALPHA_POLICY",
    "cache_teacher_logits",
    "alpha_schedule",
    "distill_train",
    "save_teacher_cache",
    "load_teacher_cache",
]


@dataclass
class TeacherCache:
    """Frozen per-sample teacher logits, keyed by sample_id."""

    teacher_id: str
    logits: dict
    tau_hint: float = 4.0

    def __post_init__(self):
        for sid, vec in self.logits.items():
            if not np.all(np.isfinite(vec)):
                raise InputError(f"non-finite teacher logits for sample {sid}")

    @property
    def num_classes(self):
        first = next(iter(self.logits.values()))
        return int(np.asarray(first).size)

    def digest(self):
        """Content hash; unchanged before/after any training run."""
        ids = sorted(self.logits)
        mat = np.array([self.logits[i] for i in ids], dtype=np.float64)
        return array_digest(np.array(ids, dtype=np.int64), mat)


@dataclass(frozen=True)
class AlphaPolicy:
    """Piecewise-linear distillation weight over the pruning fraction.

    Knots are (f, alpha) pairs with f strictly increasing in (0, 1]; the
    interpolation clamps outside the knot range.
    """

    knots: tuple

    def __post_init__(self):
        knots = tuple((float(f), float(a)) for f, a in self.knots)
        object.__setattr__(self, "knots", knots)
        if not knots:
            raise InputError("policy needs at least one knot")
        fs = [f for f, _ in knots]
        if any(not 0.0 < f <= 1.0 for f in fs):
            raise InputError("knot fractions must lie in (0, 1]")
        if any(b <= a for a, b in zip(fs, fs[1:])):
            raise InputError("knot fractions must be strictly increasing")
        if any(not 0.0 <= a <= 1.0 for _, a in knots):
            raise InputError("knot alphas must lie in [0, 1]")

    @classmethod
    def constant(cls, alpha):
        return cls(knots=((1.0, alpha),))


# Weight 1.0 at and below f=0.3, easing to 0.5 by f=0.7: heavy reliance on
# the teacher under aggressive pruning, balanced labels/teacher when most
# data is kept.
DEFAULT_ALPHA_POLICY = AlphaPolicy(knots=((0.1, 1.0), (0.3, 1.0), (0.7, 0.5)))


def cache_teacher_logits(teacher, ds, tau_hint=4.0, teacher_id="teacher"):
    """Run the frozen teacher over a dataset and store logits by sample_id."""
    if ds.dim != teacher.layer_sizes[0]:
        raise InputError(
            f"teacher input dim {teacher.layer_sizes[0]} != dataset dim {ds.dim}"
        )
    logits = predict_logits(teacher, ds)
    return TeacherCache(
        teacher_id=teacher_id,
        logits={int(s): logits[i].copy() for i, s in enumerate(ds.sample_ids)},
        tau_hint=tau_hint,
    )


def alpha_schedule(f, policy):
    """Resolve the distillation weight for a pruning fraction."""
    if not 0.0 < f <= 1.0:
        raise InputError("f must be in (0, 1]")
    knots = policy.knots
    if f <= knots[0][0]:
        return knots[0][1]
    if f >= knots[-1][0]:
        return knots[-1][1]
    for (f0, a0), (f1, a1) in zip(knots, knots[1:]):
        if f0 <= f <= f1:
            t = (f - f0) / (f1 - f0)
            return a0 + t * (a1 - a0)
    raise AssertionError("unreachable: knots cover the clamped range")


def distill_train(student_arch, pruned_ds, cache, f, policy, tau, cfg,
                  eval_ds=None, tau_squared=True):
    """Train a student on a pruned dataset against the cached teacher.

    Resolves alpha = alpha_schedule(f, policy), verifies cache coverage,
    and delegates to the training loop; the resolved alpha lands in the
    trace metadata.  The student is initialized from cfg.seed.
    """
    for sid in pruned_ds.sample_ids:
        if int(sid) not in cache.logits:
            raise InputError(f"teacher cache missing sample_id {int(sid)}")
    alpha = alpha_schedule(f, policy)
    student = DenseNet.init(student_arch, seed=cfg.seed)
    net, trace = train(
        student, pruned_ds, cfg,
        teacher_logits=cache.logits, alpha=alpha, tau=tau,
        tau_squared=tau_squared, eval_ds=eval_ds,
    )
    trace.metadata["alpha"] = alpha
    trace.metadata["f"] = f
    trace.metadata["teacher_id"] = cache.teacher_id
    return net, trace


# ---------------------------------------------------------------------------
# cache file format
# ---------------------------------------------------------------------------

def save_teacher_cache(cache, path):
    """Header with teacher_id/C/N, then one CSV row of full-precision logits
    per sample."""
    ids = sorted(cache.logits)
    c = cache.num_classes
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            f"# teacher_id={cache.teacher_id} classes={c} samples={len(ids)} "
            f"tau_hint={fmt_float(cache.tau_hint)}\n"
        )
        fh.write("sample_id," + ",".join(f"z_{j}" for j in range(c)) + "\n")
        for sid in ids:
            vec = np.asarray(cache.logits[sid], dtype=np.float64)
            fh.write(f"{sid}," + ",".join(fmt_float(v) for v in vec) + "\n")


def load_teacher_cache(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2 or not lines[0].startswith("# "):
        raise InputError(f"{path}: not a teacher cache file")
    meta = dict(item.split("=", 1) for item in lines[0][2:].split())
    logits = {}
    for line in lines[2:]:
        if not line:
            continue
        cells = line.split(",")
        logits[int(cells[0])] = np.array([float(v) for v in cells[1:]])
    cache = TeacherCache(
        teacher_id=meta["teacher_id"],
        logits=logits,
        tau_hint=float(meta["tau_hint"]),
    )
    if cache.num_classes != int(meta["classes"]):
        raise InputError(f"{path}: class count mismatch")
    return cache
