"""RBF-kernel SVMs trained with SMO, score-level fusion, and the evaluation
metrics (accuracy, AUC, EER, ROC).

Labels are +1 for live faces and -1 for fakes throughout. Features should be
standardized before training; :class:`FeatureScaler` holds the training
statistics so the same affine map applies at prediction time.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """exp(-gamma * ||a - b||^2) for all pairs, shape (len(A), len(B))."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


@dataclass(frozen=True)
class FeatureScaler:
    """Per-dimension standardization fitted on training data."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "FeatureScaler":
        X = np.asarray(X, dtype=np.float64)
        std = X.std(axis=0)
        std = np.where(std > 0, std, 1.0)  # constant features pass through
        return cls(mean=X.mean(axis=0), std=std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std


@dataclass(frozen=True)
class SvmModel:
    """RBF SVM in dual form: support vectors, their alpha*y coefficients,
    and the bias."""

    support_vectors: np.ndarray  # (m, dim)
    dual_coef: np.ndarray  # (m,) alpha_i * y_i
    bias: float
    gamma: float
    C: float
    dim: int

    def decision(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise ValidationError(f"feature dimension {X.shape[1]} != model dimension {self.dim}")
        return rbf_kernel(X, self.support_vectors, self.gamma) @ self.dual_coef + self.bias


def decision_score(model: SvmModel, x: np.ndarray) -> float:
    """Signed decision value for one sample; its sign is the predicted class."""
    return float(model.decision(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def train_svm(
    X: np.ndarray,
    y: np.ndarray,
    C: float = 1.0,
    gamma: float | None = None,
    tol: float = 1e-3,
    max_epochs: int = 1000,
    seed: int = 0,
) -> SvmModel:
    """Train a soft-margin RBF SVM by sequential minimal optimization.

    Alternates full sweeps with sweeps over non-bound multipliers until no
    multiplier changes, which leaves the dual variables KKT-consistent within
    ``tol``. The pair-selection fallback scans from a seeded random start, so
    training is deterministic for a fixed (seed, data order).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValidationError(f"X {X.shape} and y {y.shape} are inconsistent")
    if not np.all(np.isfinite(X)):
        raise ValidationError("features contain non-finite values")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValidationError("labels must be +1 or -1")
    if np.unique(y).size < 2:
        raise ValidationError("training data must contain both classes")

    n, dim = X.shape
    if gamma is None:
        gamma = 1.0 / dim
    rng = np.random.default_rng(seed)

    K = rbf_kernel(X, X, gamma)
    alphas = np.zeros(n)
    bias = 0.0
    errors = -y.copy()  # decision(x_i) - y_i with all alphas at zero

    def take_step(i1: int, i2: int) -> bool:
        nonlocal bias
        if i1 == i2:
            return False
        a1, a2 = alphas[i1], alphas[i2]
        y1, y2 = y[i1], y[i2]
        e1, e2 = errors[i1], errors[i2]

        if y1 != y2:
            low, high = max(0.0, a2 - a1), min(C, C + a2 - a1)
        else:
            low, high = max(0.0, a1 + a2 - C), min(C, a1 + a2)
        if low >= high:
            return False

        eta = K[i1, i1] + K[i2, i2] - 2.0 * K[i1, i2]
        if eta <= 0:
            return False  # degenerate direction; skip rather than probe the ends
        a2_new = np.clip(a2 + y2 * (e1 - e2) / eta, low, high)
        if abs(a2_new - a2) < 1e-12 * (a2_new + a2 + 1e-12):
            return False
        a1_new = a1 + y1 * y2 * (a2 - a2_new)

        d1 = y1 * (a1_new - a1)
        d2 = y2 * (a2_new - a2)
        b1 = bias - e1 - d1 * K[i1, i1] - d2 * K[i1, i2]
        b2 = bias - e2 - d1 * K[i1, i2] - d2 * K[i2, i2]
        if 0.0 < a1_new < C:
            bias_new = b1
        elif 0.0 < a2_new < C:
            bias_new = b2
        else:
            bias_new = 0.5 * (b1 + b2)

        alphas[i1], alphas[i2] = a1_new, a2_new
        errors[:] += d1 * K[i1] + d2 * K[i2] + (bias_new - bias)
        bias = bias_new
        return True

    def examine(i2: int) -> bool:
        y2, a2, e2 = y[i2], alphas[i2], errors[i2]
        r2 = e2 * y2
        if not ((r2 < -tol and a2 < C) or (r2 > tol and a2 > 0)):
            return False
        non_bound = np.flatnonzero((alphas > 0) & (alphas < C))
        if non_bound.size > 1:
            i1 = int(non_bound[np.argmax(np.abs(errors[non_bound] - e2))])
            if take_step(i1, i2):
                return True
        start = int(rng.integers(n))
        for offset in range(non_bound.size):
            if take_step(int(non_bound[(start + offset) % non_bound.size]), i2):
                return True
        start = int(rng.integers(n))
        for offset in range(n):
            if take_step((start + offset) % n, i2):
                return True
        return False

    examine_all = True
    epoch = 0
    while epoch < max_epochs:
        epoch += 1
        if examine_all:
            candidates = range(n)
        else:
            candidates = np.flatnonzero((alphas > 0) & (alphas < C))
        changed = sum(examine(int(i)) for i in candidates)
        if examine_all:
            if changed == 0:
                break
            examine_all = False
        elif changed == 0:
            examine_all = True

    support = alphas > 1e-12
    return SvmModel(
        support_vectors=X[support].copy(),
        dual_coef=(alphas * y)[support],
        bias=float(bias),
        gamma=float(gamma),
        C=float(C),
        dim=dim,
    )


def grid_search_svm(
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_val: np.ndarray,
    y_val: np.ndarray,
    Cs: tuple[float, ...] = (0.1, 1.0, 10.0, 100.0),
    gamma_factors: tuple[float, ...] = (0.25, 1.0, 4.0),
    tol: float = 1e-3,
    seed: int = 0,
) -> tuple[float, float]:
    """Pick (C, gamma) by held-out accuracy; gamma = factor / dim. Ties keep
    the earliest grid entry (C outer loop, factor inner)."""
    dim = np.asarray(X_train).shape[1]
    best = None
    for C in Cs:
        for factor in gamma_factors:
            gamma = factor / dim
            model = train_svm(X_train, y_train, C=C, gamma=gamma, tol=tol, seed=seed)
            acc = float(np.mean(np.sign(model.decision(X_val)) == np.asarray(y_val)))
            if best is None or acc > best[0]:
                best = (acc, C, gamma)
    return best[1], best[2]


@dataclass(frozen=True)
class FusionRule:
    """Weighted sum of the two decision scores; live iff fused >= threshold."""

    weights: tuple[float, float] = (0.5, 0.5)
    threshold: float = 0.0

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if len(w) != 2 or min(w) < 0 or abs(sum(w) - 1.0) > 1e-9:
            raise ValidationError(f"weights must be nonnegative and sum to 1, got {w}")
        object.__setattr__(self, "weights", w)


def fuse(scores: tuple[float, float], rule: FusionRule = FusionRule()) -> tuple[float, int]:
    """Combine (depth score, texture score) into (fused score, label in
    {+1 live, -1 fake})."""
    s_depth, s_texture = scores
    if not (np.isfinite(s_depth) and np.isfinite(s_texture)):
        raise ValidationError("scores must be finite")
    fused = rule.weights[0] * s_depth + rule.weights[1] * s_texture
    return fused, (1 if fused >= rule.threshold else -1)


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    auc: float
    eer: float
    roc: tuple[tuple[float, float], ...]  # (FPR, TPR) points
    pos_scores: np.ndarray
    neg_scores: np.ndarray

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "auc": self.auc,
            "eer": self.eer,
            "n_pos": int(self.pos_scores.size),
            "n_neg": int(self.neg_scores.size),
        }


def roc_curve(scores: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """ROC points sweeping thresholds over all distinct scores (predict live
    iff score >= threshold), from (0, 0) to (1, 1). Shape (n_points, 2)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    pos = (labels[order] == 1).astype(np.float64)
    neg = 1.0 - pos

    tp = np.cumsum(pos)
    fp = np.cumsum(neg)
    distinct = np.flatnonzero(np.diff(sorted_scores, append=-np.inf))  # last index of each group
    tpr = tp[distinct] / max(pos.sum(), 1.0)
    fpr = fp[distinct] / max(neg.sum(), 1.0)
    return np.vstack([np.zeros((1, 2)), np.column_stack([fpr, tpr])])


def evaluate(scores: np.ndarray, labels: np.ndarray, threshold: float = 0.0) -> EvalReport:
    """Accuracy at the threshold, trapezoid AUC, and interpolated EER.

    The EER is read off the ROC polyline where the false-positive rate equals
    the false-negative rate, linearly interpolating between adjacent points.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise ValidationError("scores and labels differ in length")
    if not np.all(np.isin(labels, (-1, 1))):
        raise ValidationError("labels must be +1 or -1")
    if np.unique(labels).size < 2:
        raise ValidationError("evaluation needs both classes")

    roc = roc_curve(scores, labels)
    fpr, tpr = roc[:, 0], roc[:, 1]
    auc = float(np.trapezoid(tpr, fpr))

    fnr = 1.0 - tpr
    diff = fpr - fnr  # non-decreasing along the curve, from -1 to +1
    cross = int(np.searchsorted(diff, 0.0, side="left"))
    if diff[cross] == 0.0:
        eer = float(fpr[cross])
    else:
        f0, f1 = fpr[cross - 1], fpr[cross]
        d0, d1 = diff[cross - 1], diff[cross]
        u = -d0 / (d1 - d0)
        eer = float(f0 + u * (f1 - f0))

    predictions = np.where(scores >= threshold, 1, -1)
    accuracy = float(np.mean(predictions == labels))
    return EvalReport(
        accuracy=accuracy,
        auc=auc,
        eer=eer,
        roc=tuple((float(a), float(b)) for a, b in roc),
        pos_scores=np.sort(scores[labels == 1]),
        neg_scores=np.sort(scores[labels == -1]),
    )
