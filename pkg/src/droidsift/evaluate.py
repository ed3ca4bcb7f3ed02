"""Confusion accounting, rate metrics, ROC/AUC, and cross-validation.

Rates with a zero denominator are reported as None, never coerced to 0.
AUC is the normalized rank-sum: the probability that a random suspicious
score exceeds a random benign score, ties counting one half; this equals
the trapezoidal area under the ROC curve over all cutoffs.

Cross-validation is stratified and, by default, re-ranks features inside
each training fold so the test fold never leaks into selection.  The
global_ranking switch instead ranks once on the full corpus before
splitting (rank-then-split), trading leak-freedom for a selection
shared by every fold.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Callable, Sequence

from . import bayes, rank
from .detect import AppProfile, FeatureCatalog, Label
from .errors import BadK, Empty, LengthMismatch, OneClassOnly, UnlabeledSample

# feature selection for one evaluation: top-k by MI, or an explicit id list
FeatureSpec = int | Sequence[str]

FoldHook = Callable[[int, list[AppProfile], list[AppProfile], tuple[str, ...]], None]


@dataclass(frozen=True)
class ConfusionCounts:
    n_bb: int  # benign classified benign
    n_bs: int  # benign classified suspicious
    n_sb: int  # suspicious classified benign
    n_ss: int  # suspicious classified suspicious

    @property
    def total(self) -> int:
        return self.n_bb + self.n_bs + self.n_sb + self.n_ss


@dataclass(frozen=True)
class EvalReport:
    counts: ConfusionCounts
    err: float | None
    acc: float | None
    tnr: float | None
    fpr: float | None
    tpr: float | None
    fnr: float | None
    precision: float | None
    auc: float | None = None
    fold_reports: tuple["EvalReport", ...] | None = None
    scores: tuple[tuple[float, Label], ...] | None = None  # pooled (score, truth)


def confusion(predictions: Sequence[Label], truths: Sequence[Label]) -> ConfusionCounts:
    if len(predictions) != len(truths):
        raise LengthMismatch("%d predictions vs %d truths" % (len(predictions), len(truths)))
    if not predictions:
        raise Empty("no samples to count")
    n_bb = n_bs = n_sb = n_ss = 0
    for pred, truth in zip(predictions, truths):
        if truth is Label.BENIGN:
            if pred is Label.BENIGN:
                n_bb += 1
            elif pred is Label.SUSPICIOUS:
                n_bs += 1
            else:
                raise UnlabeledSample("prediction without a class label")
        elif truth is Label.SUSPICIOUS:
            if pred is Label.SUSPICIOUS:
                n_ss += 1
            elif pred is Label.BENIGN:
                n_sb += 1
            else:
                raise UnlabeledSample("prediction without a class label")
        else:
            raise UnlabeledSample("truth without a class label")
    return ConfusionCounts(n_bb=n_bb, n_bs=n_bs, n_sb=n_sb, n_ss=n_ss)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


def metrics(counts: ConfusionCounts) -> EvalReport:
    """Accuracy, error rate, the four class rates, and precision."""
    total = counts.total
    if total == 0:
        raise Empty("confusion counts sum to zero")
    benign_total = counts.n_bb + counts.n_bs
    suspicious_total = counts.n_sb + counts.n_ss
    predicted_suspicious = counts.n_bs + counts.n_ss
    return EvalReport(
        counts=counts,
        acc=(counts.n_bb + counts.n_ss) / total,
        err=(counts.n_bs + counts.n_sb) / total,
        tnr=_ratio(counts.n_bb, benign_total),
        fpr=_ratio(counts.n_bs, benign_total),
        tpr=_ratio(counts.n_ss, suspicious_total),
        fnr=_ratio(counts.n_sb, suspicious_total),
        precision=_ratio(counts.n_ss, predicted_suspicious),
    )


def roc_auc(scores: Sequence[float], truths: Sequence[Label]) -> float:
    """Rank-sum AUC with midrank tie handling."""
    if len(scores) != len(truths):
        raise LengthMismatch("%d scores vs %d truths" % (len(scores), len(truths)))
    n_sus = sum(1 for t in truths if t is Label.SUSPICIOUS)
    n_ben = sum(1 for t in truths if t is Label.BENIGN)
    if n_sus + n_ben != len(truths):
        raise UnlabeledSample("truth without a class label")
    if n_sus == 0 or n_ben == 0:
        raise OneClassOnly("AUC needs both classes (%d suspicious, %d benign)"
                           % (n_sus, n_ben))
    order = sorted(range(len(scores)), key=lambda i: scores[i])
    ranks = [0.0] * len(scores)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        midrank = (i + j) / 2.0 + 1.0  # ranks are 1-based
        for idx in order[i:j + 1]:
            ranks[idx] = midrank
        i = j + 1
    rank_sum = sum(r for r, t in zip(ranks, truths) if t is Label.SUSPICIOUS)
    u = rank_sum - n_sus * (n_sus + 1) / 2.0
    return u / (n_sus * n_ben)


def roc_points(scores: Sequence[float], truths: Sequence[Label]) -> list[tuple[float, float, float]]:
    """(fpr, tpr, threshold) sweep, highest threshold first.

    Each point classifies suspicious at score >= threshold; the leading
    point is the empty-positive corner at threshold +inf.
    """
    n_sus = sum(1 for t in truths if t is Label.SUSPICIOUS)
    n_ben = len(truths) - n_sus
    if n_sus == 0 or n_ben == 0:
        raise OneClassOnly("ROC needs both classes")
    points = [(0.0, 0.0, float("inf"))]
    pairs = sorted(zip(scores, truths), key=lambda p: -p[0])
    seen_sus = 0
    seen_ben = 0
    i = 0
    while i < len(pairs):
        threshold = pairs[i][0]
        while i < len(pairs) and pairs[i][0] == threshold:
            if pairs[i][1] is Label.SUSPICIOUS:
                seen_sus += 1
            else:
                seen_ben += 1
            i += 1
        points.append((seen_ben / n_ben, seen_sus / n_sus, threshold))
    return points


def kfold_split(profiles: Sequence[AppProfile], k: int,
                seed: int) -> list[tuple[list[AppProfile], list[AppProfile]]]:
    """Stratified folds: shuffle within class, deal round-robin."""
    if k < 2:
        raise BadK("k=%d, need at least 2 folds" % k)
    benign = [p for p in profiles if p.label is Label.BENIGN]
    suspicious = [p for p in profiles if p.label is Label.SUSPICIOUS]
    if len(benign) + len(suspicious) != len(profiles):
        raise UnlabeledSample("corpus contains unlabeled profiles")
    if len(benign) < k or len(suspicious) < k:
        raise BadK("k=%d but classes have %d benign / %d suspicious members"
                   % (k, len(benign), len(suspicious)))
    rng = random.Random(seed)
    rng.shuffle(benign)
    rng.shuffle(suspicious)
    folds: list[list[AppProfile]] = [[] for _ in range(k)]
    for i, profile in enumerate(benign):
        folds[i % k].append(profile)
    for i, profile in enumerate(suspicious):
        folds[i % k].append(profile)
    splits = []
    for i in range(k):
        train_part = [p for j, fold in enumerate(folds) if j != i for p in fold]
        splits.append((train_part, list(folds[i])))
    return splits


def _mean_or_none(values: list[float | None]) -> float | None:
    defined = [v for v in values if v is not None]
    if not defined:
        return None
    return sum(defined) / len(defined)


def _select_ids(profiles: list[AppProfile], catalog: FeatureCatalog,
                feature_spec: FeatureSpec) -> tuple[str, ...]:
    if isinstance(feature_spec, int):
        counts = rank.tally(profiles, catalog)
        ranked = rank.rank_and_select(counts, feature_spec, drop_unobserved=True)
        return tuple(r.feature_id for r in ranked)
    return tuple(feature_spec)


def evaluate_cv(profiles: Sequence[AppProfile], catalog: FeatureCatalog, k: int,
                feature_spec: FeatureSpec, alpha: float, seed: int,
                global_ranking: bool = False, pooled: bool = False,
                fold_hook: FoldHook | None = None) -> EvalReport:
    """Stratified k-fold evaluation of the rank/train/classify pipeline.

    feature_spec is either an int (top-k by MI) or an explicit feature id
    sequence.  Headline metrics average the per-fold values; with pooled
    they come from the summed confusion matrix and pooled scores instead.
    """
    all_profiles = list(profiles)
    fixed_ids: tuple[str, ...] | None = None
    if global_ranking or not isinstance(feature_spec, int):
        fixed_ids = _select_ids(all_profiles, catalog, feature_spec)

    fold_reports: list[EvalReport] = []
    pooled_scores: list[tuple[float, Label]] = []
    sum_bb = sum_bs = sum_sb = sum_ss = 0
    for fold_index, (train_part, test_part) in enumerate(kfold_split(all_profiles, k, seed)):
        selected = fixed_ids if fixed_ids is not None else _select_ids(
            train_part, catalog, feature_spec)
        if fold_hook is not None:
            fold_hook(fold_index, train_part, test_part, selected)
        model = bayes.train(train_part, catalog, list(selected), alpha)
        indices = [catalog.index_of(fid) for fid in selected]
        predictions: list[Label] = []
        truths: list[Label] = []
        scores: list[float] = []
        for profile in test_part:
            bits = [profile.bits[i] for i in indices]
            verdict = bayes.classify(model, bits)
            predictions.append(verdict.label)
            truths.append(profile.label)
            scores.append(verdict.posterior_suspicious)
            pooled_scores.append((verdict.posterior_suspicious, profile.label))
        counts = confusion(predictions, truths)
        sum_bb += counts.n_bb
        sum_bs += counts.n_bs
        sum_sb += counts.n_sb
        sum_ss += counts.n_ss
        fold_reports.append(replace(metrics(counts), auc=roc_auc(scores, truths)))

    total_counts = ConfusionCounts(n_bb=sum_bb, n_bs=sum_bs, n_sb=sum_sb, n_ss=sum_ss)
    if pooled:
        report = metrics(total_counts)
        auc = roc_auc([s for s, _ in pooled_scores], [t for _, t in pooled_scores])
    else:
        report = EvalReport(
            counts=total_counts,
            err=_mean_or_none([r.err for r in fold_reports]),
            acc=_mean_or_none([r.acc for r in fold_reports]),
            tnr=_mean_or_none([r.tnr for r in fold_reports]),
            fpr=_mean_or_none([r.fpr for r in fold_reports]),
            tpr=_mean_or_none([r.tpr for r in fold_reports]),
            fnr=_mean_or_none([r.fnr for r in fold_reports]),
            precision=_mean_or_none([r.precision for r in fold_reports]),
        )
        auc = _mean_or_none([r.auc for r in fold_reports])
    return replace(report, auc=auc, fold_reports=tuple(fold_reports),
                   scores=tuple(pooled_scores))
