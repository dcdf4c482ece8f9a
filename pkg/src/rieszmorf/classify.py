"""One-vs-all polynomial-kernel SVMs, grid search and LOSO evaluation.

The binary machines are trained with an SMO solver using maximal-violating
pair selection with second-order gain (the LIBSVM "WSS2" rule).  Ties in the
selection are broken by the lowest sample index, so training is fully
deterministic.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dataset import DatasetManifest, SplitError, load_sequence
from .morf import MorfParams, extract_morf
from .riesz import TemporalFilterConfig

log = logging.getLogger(__name__)

TAU = 1e-12


class TrainingError(ValueError):
    """Training data cannot produce a classifier."""


class FeatureError(ValueError):
    """Feature vectors with inconsistent lengths."""


@dataclass(frozen=True, order=True)
class KernelParams:
    """``K(u, v) = (gamma <u, v> + c0) ** degree``; ordering is (C, gamma, c0)."""

    C: float = 1.0
    gamma: float = 1.0
    c0: float = 1.0
    degree: int = 3

    def __post_init__(self):
        if not self.gamma > 0 or not self.C > 0:
            raise ValueError(f"gamma and C must be positive, got gamma={self.gamma} C={self.C}")

    def kernel_from_gram(self, gram: np.ndarray) -> np.ndarray:
        return (self.gamma * gram + self.c0) ** self.degree

    def kernel(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return self.kernel_from_gram(np.asarray(a) @ np.asarray(b).T)

    def to_json(self) -> dict:
        return {"C": self.C, "gamma": self.gamma, "c0": self.c0, "degree": self.degree}


@dataclass
class BinaryMachine:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # y_i * alpha_i
    bias: float
    iterations: int = 0
    converged: bool = True

    def decision(self, kernel_rows: np.ndarray) -> np.ndarray:
        return kernel_rows @ self.dual_coef + self.bias


@dataclass
class SvmModel:
    classes: List[str]
    machines: List[BinaryMachine]
    params: KernelParams
    n_features: int

    def decision_function(self, features) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if x.shape[1] != self.n_features:
            raise FeatureError(f"expected {self.n_features} features, got {x.shape[1]}")
        cols = []
        for m in self.machines:
            if len(m.dual_coef) == 0:
                cols.append(np.full(len(x), m.bias))
            else:
                cols.append(m.decision(self.params.kernel(x, m.support_vectors)))
        return np.stack(cols, axis=1)


def smo_solve(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3,
              max_iter: Optional[int] = None) -> Tuple[np.ndarray, float, int, bool]:
    """Solve the soft-margin dual for labels ``y`` in {-1, +1}.

    Returns ``(alpha, bias, iterations, converged)`` with decision function
    ``sum_i alpha_i y_i K(x_i, x) + bias``.
    """
    n = len(y)
    y = y.astype(np.float64)
    Q = K * np.outer(y, y)
    diag = np.diag(K).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 0.5 a'Qa - e'a
    if max_iter is None:
        max_iter = max(100000, 100 * n)
    it = 0
    converged = False
    while it < max_iter:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        score = -y * grad
        if not up.any() or not low.any():
            converged = True
            break
        up_scores = np.where(up, score, -np.inf)
        i = int(np.argmax(up_scores))
        g_max = up_scores[i]
        g_min = np.min(np.where(low, score, np.inf))
        if g_max - g_min < tol:
            converged = True
            break
        # second-order choice of j among violating partners of i
        b = g_max - score
        a = diag[i] + diag - 2.0 * y[i] * y * Q[i]
        a = np.where(a > 0, a, TAU)
        cand = low & (score < g_max)
        gain = np.where(cand, -(b * b) / a, np.inf)
        j = int(np.argmin(gain))

        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(K[i, i] + K[j, j] + 2.0 * Q[i, j], TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            quad = max(K[i, i] + K[j, j] - 2.0 * Q[i, j], TAU)
            delta = (grad[i] - grad[j]) / quad
            total = ai + aj
            ai -= delta
            aj += delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        d_i, d_j = ai - alpha[i], aj - alpha[j]
        grad += Q[:, i] * d_i + Q[:, j] * d_j
        alpha[i], alpha[j] = ai, aj
        it += 1

    score = -y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = -np.mean(score[free])
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        ub = np.min(np.where(up, -score, np.inf)) if up.any() else np.inf
        lb = np.max(np.where(low, -score, -np.inf)) if low.any() else -np.inf
        rho = (ub + lb) / 2.0 if np.isfinite(ub) and np.isfinite(lb) else (ub if np.isfinite(ub) else lb)
    if not converged:
        warnings.warn(f"SMO stopped after {it} iterations without reaching tol={tol}")
    return alpha, float(-rho), it, converged


def train_binary(gram_or_kernel: np.ndarray, y: np.ndarray, C: float, features: np.ndarray,
                 tol: float = 1e-3) -> BinaryMachine:
    alpha, bias, it, ok = smo_solve(gram_or_kernel, y, C, tol)
    sv = alpha > 0
    return BinaryMachine(features[sv].copy(), (alpha * y)[sv], bias, it, ok)


def _check_training(features, labels) -> Tuple[np.ndarray, List[str]]:
    try:
        x = np.asarray(features, dtype=np.float64)
    except ValueError as exc:
        raise FeatureError(f"feature vectors of unequal length: {exc}") from None
    if x.ndim != 2:
        raise FeatureError("features must be a list of equal-length vectors")
    if len(x) != len(labels):
        raise FeatureError(f"{len(x)} feature vectors but {len(labels)} labels")
    if not np.all(np.isfinite(x)):
        raise FeatureError("features contain NaN or Inf")
    return x, [str(v) for v in labels]


def train_svm(features, labels, params: KernelParams, classes: Optional[Sequence[str]] = None,
              tol: float = 1e-3, kernel_matrix: Optional[np.ndarray] = None) -> SvmModel:
    """One binary machine per class (class vs rest).

    ``classes`` fixes the class order (default: sorted labels).  A
    precomputed training ``kernel_matrix`` may be passed to avoid recomputing it.
    """
    x, labels = _check_training(features, labels)
    present = sorted(set(labels))
    if len(present) < 2:
        raise TrainingError(f"need at least 2 classes, got {present}")
    classes = list(classes) if classes is not None else present
    K = params.kernel(x, x) if kernel_matrix is None else kernel_matrix
    lab = np.asarray(labels)
    machines = []
    for c in classes:
        y = np.where(lab == c, 1.0, -1.0)
        if (y > 0).all() or (y < 0).all():
            # class absent from this training set: constant decision
            machines.append(BinaryMachine(np.zeros((0, x.shape[1])), np.zeros(0),
                                          1.0 if (y > 0).all() else -1.0))
            continue
        machines.append(train_binary(K, y, params.C, x, tol))
    return SvmModel(classes, machines, params, x.shape[1])


def predict(model: SvmModel, feature) -> Tuple[str, np.ndarray]:
    """Label with the largest decision value (first class wins ties)."""
    scores = model.decision_function(feature)[0]
    return model.classes[int(np.argmax(scores))], scores


def predict_many(model: SvmModel, features) -> Tuple[List[str], np.ndarray]:
    scores = model.decision_function(features)
    return [model.classes[int(k)] for k in np.argmax(scores, axis=1)], scores


# -- metrics -----------------------------------------------------------------

@dataclass
class Metrics:
    accuracy: float
    f_measure: float
    confusion: np.ndarray
    classes: List[str]
    folds: List[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "f_measure": self.f_measure,
            "classes": list(self.classes),
            "confusion": self.confusion.astype(int).tolist(),
            "folds": self.folds,
        }


def confusion_matrix(true: Sequence[str], pred: Sequence[str], classes: Sequence[str]) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    index = {c: k for k, c in enumerate(classes)}
    cm = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(true, pred):
        cm[index[t], index[p]] += 1
    return cm


def macro_f1(cm: np.ndarray) -> float:
    """Mean per-class F1 with 0/0 taken as 0."""
    tp = np.diag(cm).astype(np.float64)
    pred_tot = cm.sum(axis=0)
    true_tot = cm.sum(axis=1)
    scores = []
    for k in range(len(tp)):
        p = tp[k] / pred_tot[k] if pred_tot[k] else 0.0
        r = tp[k] / true_tot[k] if true_tot[k] else 0.0
        scores.append(2 * p * r / (p + r) if p + r else 0.0)
    return float(np.mean(scores))


def metrics_from_predictions(true, pred, classes, folds=None) -> Metrics:
    cm = confusion_matrix(true, pred, classes)
    total = cm.sum()
    acc = float(np.trace(cm) / total) if total else 0.0
    return Metrics(acc, macro_f1(cm), cm, list(classes), list(folds or []))


# -- model selection ---------------------------------------------------------

@dataclass
class GridSearchResult:
    best: KernelParams
    scores: List[Tuple[KernelParams, float]]
    protocol: str


def stratified_folds(labels: Sequence[str], k: int = 3) -> List[np.ndarray]:
    """Deterministic stratified assignment: the n-th sample of a class goes to fold n mod k."""
    counters: Dict[str, int] = {}
    assign = np.zeros(len(labels), dtype=np.int64)
    for idx, lab in enumerate(labels):
        n = counters.get(lab, 0)
        assign[idx] = n % k
        counters[lab] = n + 1
    return [np.flatnonzero(assign == f) for f in range(k)]


def _inner_splits(labels, subjects) -> Tuple[List[Tuple[np.ndarray, np.ndarray]], str]:
    subjects = np.asarray(subjects)
    uniq = sorted(set(subjects.tolist()))
    if len(uniq) >= 2:
        return [(np.flatnonzero(subjects != s), np.flatnonzero(subjects == s)) for s in uniq], "loso"
    folds = stratified_folds(labels, 3)
    n = len(labels)
    splits = [(np.setdiff1d(np.arange(n), f), f) for f in folds if len(f)]
    return splits, "stratified-3-fold"


def grid_search(features, labels, subject_ids, grid: Sequence[KernelParams],
                classes: Optional[Sequence[str]] = None, tol: float = 1e-3) -> GridSearchResult:
    """Pick the grid point with the best mean inner-fold accuracy.

    Inner folds leave one training subject out; with a single subject a
    stratified 3-fold split is used instead.  Ties go to the first point in
    ascending ``(C, gamma, c0)`` order.
    """
    if not grid:
        raise ValueError("empty hyperparameter grid")
    x, labels = _check_training(features, labels)
    grid = sorted(grid)
    if classes is None:
        classes = sorted(set(labels))
    splits, protocol = _inner_splits(labels, subject_ids)
    if protocol != "loso":
        log.warning("grid search: one training subject, falling back to %s", protocol)
    lab = np.asarray(labels)
    gram = x @ x.T
    scores = []
    for params in grid:
        K_full = params.kernel_from_gram(gram)
        accs = []
        for tr, te in splits:
            if len(set(lab[tr].tolist())) < 2:
                accs.append(0.0)
                continue
            model = train_svm(x[tr], lab[tr].tolist(), params, classes, tol,
                              kernel_matrix=K_full[np.ix_(tr, tr)])
            pred, _ = predict_many(model, x[te])
            accs.append(float(np.mean(np.asarray(pred) == lab[te])))
        scores.append((params, float(np.mean(accs))))
    best_score = max(s for _, s in scores)
    best = next(p for p, s in scores if s == best_score)
    return GridSearchResult(best, scores, protocol)


def default_grid(dim: int) -> List[KernelParams]:
    return [KernelParams(C=C, gamma=g / dim, c0=c0)
            for C in (0.1, 1.0, 10.0, 100.0) for g in (1.0, 10.0) for c0 in (0.0, 1.0)]


@dataclass
class FoldResult:
    subject: str
    test_ids: List[str]
    true: List[str]
    pred: List[str]
    scores: np.ndarray
    search: GridSearchResult
    model: SvmModel


def run_fold(subject: str, train_x, train_y, train_subjects, test_ids, test_x, test_y,
             grid, classes, tol=1e-3) -> FoldResult:
    """Model selection, training and prediction for one held-out subject.

    Receives only its own partition, so no training-side result can depend on
    the held-out descriptors.
    """
    search = grid_search(train_x, train_y, train_subjects, grid, classes, tol)
    model = train_svm(train_x, train_y, search.best, classes, tol)
    pred, scores = predict_many(model, test_x)
    return FoldResult(subject, list(test_ids), list(test_y), pred, scores, search, model)


def _run_fold_args(args):
    return run_fold(*args)


def evaluate_features(ids: Sequence[str], features, labels: Sequence[str], subjects: Sequence[str],
                      classes: Sequence[str], grid: Optional[Sequence[KernelParams]] = None,
                      jobs: int = 1, tol: float = 1e-3) -> Tuple[Metrics, List[FoldResult]]:
    """Leave-one-subject-out evaluation on precomputed descriptors."""
    x = np.asarray(features, dtype=np.float64)
    ids = list(ids)
    lab = np.asarray([str(v) for v in labels])
    subj = np.asarray([str(s) for s in subjects])
    uniq = sorted(set(subj.tolist()))
    if len(uniq) < 2:
        raise SplitError("leave-one-subject-out needs >= 2 subjects")
    if grid is None:
        grid = default_grid(x.shape[1])
    tasks = []
    for s in uniq:
        tr, te = np.flatnonzero(subj != s), np.flatnonzero(subj == s)
        tasks.append((s, x[tr], lab[tr].tolist(), subj[tr].tolist(), [ids[k] for k in te],
                      x[te], lab[te].tolist(), list(grid), list(classes), tol))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_fold_args, tasks))
    else:
        results = [run_fold(*t) for t in tasks]
    true, pred, folds = [], [], []
    for r in results:  # fold (subject) order
        true += r.true
        pred += r.pred
        folds.append({
            "subject": r.subject,
            "test_ids": r.test_ids,
            "true": r.true,
            "predicted": r.pred,
            "scores": r.scores.tolist(),
            "best_params": r.search.best.to_json(),
            "inner_protocol": r.search.protocol,
            "inner_accuracy": max(s for _, s in r.search.scores),
            "accuracy": float(np.mean(np.asarray(r.true) == np.asarray(r.pred))),
        })
    return metrics_from_predictions(true, pred, classes, folds), results


# -- end to end ----------------------------------------------------------------

@dataclass
class ExtractionResult:
    ids: List[str]
    features: np.ndarray
    failures: Dict[str, str]


def _extract_one(args):
    seq, root, params, filter_cfg = args
    try:
        frames = load_sequence(seq, root)
        desc = extract_morf(frames, seq, params, filter_cfg.with_fps(seq.fps))
        return seq.id, desc.values, None
    except Exception as exc:  # reported per sequence
        return seq.id, None, f"{type(exc).__name__}: {exc}"


def extract_descriptors(manifest: DatasetManifest, params: MorfParams,
                        filter_cfg: TemporalFilterConfig, jobs: int = 1) -> ExtractionResult:
    """Descriptors of every manifest sequence, in manifest order.

    The filter's ``fps`` is replaced by each sequence's own frame rate.
    """
    tasks = [(seq, manifest.root, params, filter_cfg) for seq in manifest.sequences]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_extract_one, tasks))
    else:
        out = [_extract_one(t) for t in tasks]
    ids, rows, failures = [], [], {}
    for sid, values, err in out:
        if err is not None:
            log.warning("sequence %s failed: %s", sid, err)
            failures[sid] = err
            continue
        ids.append(sid)
        rows.append(values)
    feats = np.vstack(rows) if rows else np.zeros((0, params.length))
    return ExtractionResult(ids, feats, failures)


def evaluate_loso(manifest: DatasetManifest, params: MorfParams, filter_cfg: TemporalFilterConfig,
                  grid: Optional[Sequence[KernelParams]] = None, jobs: int = 1,
                  extraction: Optional[ExtractionResult] = None) -> Metrics:
    """Extract descriptors, then run leave-one-subject-out evaluation.

    Sequences whose extraction fails are left out and counted in
    ``Metrics.folds[*]["excluded"]`` and the ``failures`` log.
    """
    if len(manifest.subjects) < 2:
        raise SplitError("leave-one-subject-out needs >= 2 subjects")
    ext = extraction or extract_descriptors(manifest, params, filter_cfg, jobs)
    by_id = manifest.by_id()
    labels = [by_id[i].label for i in ext.ids]
    subjects = [by_id[i].subject_id for i in ext.ids]
    metrics, _ = evaluate_features(ext.ids, ext.features, labels, subjects, manifest.classes,
                                   grid, jobs)
    if ext.failures:
        warnings.warn(f"{len(ext.failures)} sequences failed extraction and were excluded")
    for fold in metrics.folds:
        fold["excluded"] = sorted(i for i in ext.failures if by_id[i].subject_id == fold["subject"])
    return metrics
