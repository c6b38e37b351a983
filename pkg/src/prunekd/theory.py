"""Ridge regression self-distillation on pruned data: estimators and bias.

Implements the closed-form linear-regression machinery: the ridge estimator,
the pruned-data self-distillation estimator, the exact SVD expression for the
squared norm of the expected estimation error (the bias), a Monte-Carlo
verification oracle for it, and the singular-value dominance check used to
argue that a teacher trained on more data cannot increase that bias.

All matrices follow the column-sample convention: X is d x N with one sample
per column.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .common import InputError, round_half_up

__all__ = [
    "RegressionProblem",
    "PrunedView",
    "BiasReport",
    "ridge_fit",
    "sd_student_fit",
    "bias_closed_form",
    "bias_monte_carlo",
    "singular_value_dominance",
    "verify_theorem",
]

# zero-singular-value threshold, relative to the largest singular value
RANK_TOL = 1e-12

# Monte-Carlo trials are drawn in fixed-size blocks, each from its own
# seed-indexed substream, so results do not depend on how blocks are scheduled.
MC_BLOCK = 8192


@dataclass(frozen=True)
class RegressionProblem:
    """Ground-truth linear model y = X^T theta_star + eta.

    X has shape (d, N) with samples as columns; eta is i.i.d. zero-mean
    Gaussian with standard deviation ``noise_std``; ``lam`` is the ridge
    regularizer (must be positive).
    """

    X: np.ndarray
    theta_star: np.ndarray
    noise_std: float
    lam: float

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        theta = np.asarray(self.theta_star, dtype=np.float64)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "theta_star", theta)
        if X.ndim != 2:
            raise InputError("X must be a 2-D matrix (d x N)")
        d, n = X.shape
        if d > n:
            raise InputError(f"need d <= N, got d={d}, N={n}")
        if theta.shape != (d,):
            raise InputError(f"theta_star must have shape ({d},)")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(theta)):
            raise InputError("non-finite entries in X or theta_star")
        if self.noise_std < 0:
            raise InputError("noise_std must be >= 0")
        if self.lam <= 0:
            raise InputError("lambda must be > 0")

    @property
    def d(self):
        return self.X.shape[0]

    @property
    def n(self):
        return self.X.shape[1]

    def sample_labels(self, rng):
        """Draw one label vector y = X^T theta_star + eta."""
        clean = self.X.T @ self.theta_star
        if self.noise_std == 0.0:
            return clean
        return clean + self.noise_std * rng.standard_normal(self.n)


@dataclass(frozen=True)
class PrunedView:
    """A column subset of a problem's data matrix.

    ``indices`` are distinct column indices into the parent X, in the order
    the columns appear in ``X_f``.  The standing assumption d <= N_f <= N is
    enforced on construction.
    """

    indices: np.ndarray
    X_f: np.ndarray
    fraction: float

    @classmethod
    def from_indices(cls, problem, indices):
        idx = np.asarray(indices, dtype=np.int64)
        if idx.ndim != 1 or len(np.unique(idx)) != idx.size:
            raise InputError("indices must be a 1-D list of distinct values")
        if idx.size and (idx.min() < 0 or idx.max() >= problem.n):
            raise InputError("indices out of range")
        if idx.size < problem.d:
            raise InputError(
                f"need at least d={problem.d} columns, got {idx.size}"
            )
        return cls(
            indices=idx,
            X_f=problem.X[:, idx].copy(),
            fraction=idx.size / problem.n,
        )

    @property
    def n_f(self):
        return self.indices.size


@dataclass(frozen=True)
class BiasReport:
    """Closed-form and Monte-Carlo bias for one (alpha, f, f_t) setting."""

    bias_closed_form: float
    bias_monte_carlo: float
    trials: int
    alpha: float
    f: float
    f_t: float


def _check_regression_inputs(X_f, y_f, lam):
    X_f = np.asarray(X_f, dtype=np.float64)
    y_f = np.asarray(y_f, dtype=np.float64)
    if X_f.ndim != 2:
        raise InputError("X_f must be 2-D (d x N_f)")
    if y_f.shape != (X_f.shape[1],):
        raise InputError(
            f"y_f must have shape ({X_f.shape[1]},), got {y_f.shape}"
        )
    if not np.all(np.isfinite(X_f)) or not np.all(np.isfinite(y_f)):
        raise InputError("non-finite entries in X_f or y_f")
    if lam <= 0:
        raise InputError("lambda must be > 0")
    return X_f, y_f


def ridge_fit(X_f, y_f, lam):
    """Ridge regression estimate (X_f X_f^T + lam I)^{-1} X_f y_f.

    Solved as a symmetric positive-definite linear system; no explicit
    inverse is formed.
    """
    X_f, y_f = _check_regression_inputs(X_f, y_f, lam)
    d = X_f.shape[0]
    gram = X_f @ X_f.T + lam * np.eye(d)
    return np.linalg.solve(gram, X_f @ y_f)


def sd_student_fit(X_f, y_f, theta_teacher, alpha, lam):
    """Self-distillation student fit on a pruned view.

    Returns (X_f X_f^T + lam I)^{-1} X_f ((1-alpha) y_f + alpha X_f^T theta_t),
    i.e. ridge regression against labels blended with the teacher's
    predictions of the student's own samples.
    """
    X_f, y_f = _check_regression_inputs(X_f, y_f, lam)
    theta_teacher = np.asarray(theta_teacher, dtype=np.float64)
    if theta_teacher.shape != (X_f.shape[0],):
        raise InputError("theta_teacher must be a d-vector")
    if not 0.0 <= alpha <= 1.0:
        raise InputError("alpha must be in [0, 1]")
    targets = (1.0 - alpha) * y_f + alpha * (X_f.T @ theta_teacher)
    d = X_f.shape[0]
    gram = X_f @ X_f.T + lam * np.eye(d)
    return np.linalg.solve(gram, X_f @ targets)


def _left_svd(X_f):
    """Left singular vectors and singular values, descending."""
    u, s, _ = np.linalg.svd(X_f, full_matrices=False)
    return u, s


def bias_closed_form(problem, student_view, teacher_view, alpha):
    """Squared norm of the expected estimation error, in closed form.

    With (sigma_i, u_i) from the student view's SVD and (sigma'_j, u'_j)
    from the teacher view's SVD, evaluates

        sum_i (lam / (sigma_i^2 + lam))^2
              ( sum_j <theta*, u'_j> <u'_j, u_i>
                      (1 + alpha sigma_i^2 / (sigma'_j^2 + lam)) )^2

    The expression stays finite for rank-deficient views because lam > 0;
    a degenerate input only triggers a warning.
    """
    lam = problem.lam
    u, s = _left_svd(student_view.X_f)
    up, sp = _left_svd(teacher_view.X_f)
    for name, sv in (("student", s), ("teacher", sp)):
        if sv[0] == 0.0 or np.any(sv < RANK_TOL * sv[0]):
            warnings.warn(
                f"rank-deficient {name} view: singular value below "
                f"{RANK_TOL:g} * sigma_1; bias formula remains finite",
                RuntimeWarning,
                stacklevel=2,
            )
    coef = problem.theta_star @ up                     # <theta*, u'_j>
    overlap = up.T @ u                                 # [j, i] = <u'_j, u_i>
    gain = 1.0 + alpha * s[np.newaxis, :] ** 2 / (sp[:, np.newaxis] ** 2 + lam)
    inner = np.sum(coef[:, np.newaxis] * overlap * gain, axis=0)
    shrink = lam / (s**2 + lam)
    return float(np.sum((shrink * inner) ** 2))


def bias_monte_carlo(problem, student_view, teacher_view, alpha, trials, seed):
    """Monte-Carlo estimate of the squared norm of the expected error.

    Each trial draws a fresh label-noise vector for the full problem, fits
    the teacher on its view, fits the student on its view against the
    blended targets (1-alpha) y_f + alpha X_f^T theta_teacher, and
    accumulates the estimation error theta_hat_s - theta_star.  Returns
    ||mean error||^2 (the bias, not the MSE).

    Trials are processed in blocks of ``MC_BLOCK``; block b draws its noise
    from the substream seeded by (seed, 0, b), so the result is a pure
    function of (inputs, seed) and independent of any parallel schedule
    over blocks.  The per-trial fits are evaluated in the two-term form
    (1-alpha) M X_f y_f + alpha M X_f X_f^T theta_t with M the regularized
    Gram inverse, which keeps every intermediate d-dimensional; the trials=1
    path is verified against the plain estimator functions in the tests.
    """
    if trials < 1:
        raise InputError("trials must be >= 1")
    lam = problem.lam
    d = problem.d
    xs = student_view.X_f
    xt = teacher_view.X_f
    gram_s = xs @ xs.T + lam * np.eye(d)
    gram_t = xt @ xt.T + lam * np.eye(d)
    clean = problem.X.T @ problem.theta_star
    # label-noise rows that any fit actually reads
    used = np.union1d(student_view.indices, teacher_view.indices)
    pos = np.searchsorted(used, student_view.indices)
    pos_t = np.searchsorted(used, teacher_view.indices)
    xs_y_clean = xs @ clean[student_view.indices]
    xt_y_clean = xt @ clean[teacher_view.indices]
    ssq = xs @ xs.T

    err_sum = np.zeros(d)
    done = 0
    block_id = 0
    while done < trials:
        b = min(MC_BLOCK, trials - done)
        rng = np.random.default_rng((seed, 0, block_id))
        eta = problem.noise_std * rng.standard_normal((used.size, b))
        theta_t = np.linalg.solve(
            gram_t, xt_y_clean[:, np.newaxis] + xt @ eta[pos_t, :]
        )
        xs_y = xs_y_clean[:, np.newaxis] + xs @ eta[pos, :]
        theta_s = np.linalg.solve(
            gram_s, (1.0 - alpha) * xs_y + alpha * (ssq @ theta_t)
        )
        err_sum += np.sum(theta_s - problem.theta_star[:, np.newaxis], axis=1)
        done += b
        block_id += 1
    return float(np.sum((err_sum / trials) ** 2))


def singular_value_dominance(X, X_f):
    """Check sigma_k(X) >= sigma_k(X_f) for k = 1..d, with tolerance.

    X_f must be a column subset of X (exact column matches, multiset
    semantics).  Returns (ok, margins) where margins[k] =
    sigma_k(X) - sigma_k(X_f) and ok means every margin >= -1e-10 * sigma_1(X).
    """
    X = np.asarray(X, dtype=np.float64)
    X_f = np.asarray(X_f, dtype=np.float64)
    if X.shape[0] != X_f.shape[0]:
        raise InputError("X and X_f must have the same number of rows")
    if X_f.shape[1] > X.shape[1] or X_f.shape[1] < X.shape[0]:
        raise InputError("need d <= N_f <= N")
    remaining = {}
    for j in range(X.shape[1]):
        key = X[:, j].tobytes()
        remaining[key] = remaining.get(key, 0) + 1
    for j in range(X_f.shape[1]):
        key = X_f[:, j].tobytes()
        count = remaining.get(key, 0)
        if count == 0:
            raise InputError(f"column {j} of X_f is not a column of X")
        remaining[key] = count - 1
    s_full = np.linalg.svd(X, compute_uv=False)
    s_sub = np.linalg.svd(X_f, compute_uv=False)
    d = X.shape[0]
    margins = s_full[:d] - s_sub[:d]
    tol = 1e-10 * s_full[0]
    return bool(np.all(margins >= -tol)), margins


def verify_theorem(problem, f, alpha, trials, seed):
    """Compare the bias for a full-data teacher against a same-data teacher.

    Builds one random student view at fraction f and two teacher views:
    f_t = 1 (all columns) and f_t = f (the student view itself).  Returns a
    (full-teacher, same-teacher) pair of BiasReports; the claimed inequality
    is bias(f_t=1) <= bias(f_t=f) up to 1e-12 absolute slack.
    """
    if not 0.0 < f <= 1.0:
        raise InputError("f must be in (0, 1]")
    n_f = round_half_up(f * problem.n)
    if n_f < problem.d:
        raise InputError(
            f"f*N = {n_f} violates the standing assumption d <= N_f"
        )
    rng = np.random.default_rng((seed, 1))
    idx = np.sort(rng.choice(problem.n, size=n_f, replace=False))
    student = PrunedView.from_indices(problem, idx)
    teacher_full = PrunedView.from_indices(problem, np.arange(problem.n))
    reports = []
    for f_t, teacher in ((1.0, teacher_full), (student.fraction, student)):
        cf = bias_closed_form(problem, student, teacher, alpha)
        mc = bias_monte_carlo(problem, student, teacher, alpha, trials, seed)
        reports.append(
            BiasReport(
                bias_closed_form=cf,
                bias_monte_carlo=mc,
                trials=trials,
                alpha=alpha,
                f=student.fraction,
                f_t=f_t,
            )
        )
    return reports[0], reports[1]
