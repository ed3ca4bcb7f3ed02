"""Per-class feature tallies and mutual-information ranking.

MI uses plug-in (maximum likelihood) probabilities from the contingency
counts, log base 2, with the convention that zero-probability joint cells
contribute nothing.  For one binary feature against the binary class the
score lies in [0, 1] bits.  No smoothing here; smoothing belongs to the
classifier.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .detect import AppProfile, FeatureCatalog, Label
from .errors import BadK, EmptyCorpus, LengthMismatch, UnlabeledSample


@dataclass(frozen=True)
class Cells:
    """One feature's contingency counts against the class label."""

    n11: int  # present & suspicious
    n10: int  # present & benign
    n01: int  # absent & suspicious
    n00: int  # absent & benign

    def __post_init__(self) -> None:
        if min(self.n11, self.n10, self.n01, self.n00) < 0:
            raise ValueError("contingency counts must be nonnegative")

    @property
    def present(self) -> int:
        return self.n11 + self.n10


@dataclass(frozen=True)
class FeatureCounts:
    cells: dict[str, Cells]  # ordered per catalog
    n_suspicious: int
    n_benign: int


@dataclass(frozen=True)
class RankedFeature:
    feature_id: str
    mi: float
    cells: Cells


def tally(profiles: list[AppProfile], catalog: FeatureCatalog) -> FeatureCounts:
    """Exact contingency counts over a labeled corpus."""
    if not profiles:
        raise EmptyCorpus("no profiles to tally")
    width = len(catalog)
    present_sus = [0] * width
    present_ben = [0] * width
    n_sus = 0
    n_ben = 0
    for profile in profiles:
        if len(profile.bits) != width:
            raise LengthMismatch(
                "profile %r has %d bits, catalog has %d"
                % (profile.source_id, len(profile.bits), width))
        if profile.label is Label.SUSPICIOUS:
            n_sus += 1
            counts = present_sus
        elif profile.label is Label.BENIGN:
            n_ben += 1
            counts = present_ben
        else:
            raise UnlabeledSample("profile %r carries no class label" % profile.source_id)
        for i, bit in enumerate(profile.bits):
            if bit:
                counts[i] += 1
    cells = {
        feature.id: Cells(
            n11=present_sus[i],
            n10=present_ben[i],
            n01=n_sus - present_sus[i],
            n00=n_ben - present_ben[i],
        )
        for i, feature in enumerate(catalog.features)
    }
    return FeatureCounts(cells=cells, n_suspicious=n_sus, n_benign=n_ben)


def mutual_information(cells: Cells) -> float:
    """MI between one Bernoulli feature and the class, in bits."""
    n = cells.n11 + cells.n10 + cells.n01 + cells.n00
    if n == 0:
        return 0.0
    total = 0.0
    # (joint, feature marginal, class marginal) for each of the four cells
    terms = (
        (cells.n11, cells.n11 + cells.n10, cells.n11 + cells.n01),
        (cells.n10, cells.n11 + cells.n10, cells.n10 + cells.n00),
        (cells.n01, cells.n01 + cells.n00, cells.n11 + cells.n01),
        (cells.n00, cells.n01 + cells.n00, cells.n10 + cells.n00),
    )
    for joint, row, col in terms:
        if joint == 0:
            continue
        total += (joint / n) * math.log2(joint * n / (row * col))
    # clamp tiny negative round-off so scores are usable as nonnegative keys
    return total if total > 0.0 else 0.0


def rank_and_select(counts: FeatureCounts, k: int,
                    drop_unobserved: bool = False) -> list[RankedFeature]:
    """Score every feature, sort by MI descending (ties by id), keep k.

    With drop_unobserved, features never seen in either class are removed
    before the cut, so fewer than k entries may come back.
    """
    if k < 1 or k > len(counts.cells):
        raise BadK("k=%d outside 1..%d" % (k, len(counts.cells)))
    scored = [RankedFeature(fid, mutual_information(c), c)
              for fid, c in counts.cells.items()]
    scored.sort(key=lambda r: (-r.mi, r.feature_id))
    if drop_unobserved:
        scored = [r for r in scored if r.cells.present > 0]
    return scored[:k]
