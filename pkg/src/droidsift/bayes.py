"""Bernoulli naive-Bayes training, scoring, and model persistence.

Likelihoods are Laplace-smoothed with pseudo-count alpha (default 1):
several built-in features have zero benign occurrences and would
otherwise veto the class outright.  Priors are the raw class fractions.
Posteriors accumulate in log space and renormalize over the two classes,
so long feature vectors cannot underflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .detect import AppProfile, FeatureCatalog, Label
from .errors import (BadModel, EmptyFeatureSet, LengthMismatch, MissingClass,
                     UnlabeledSample)

MODEL_FORMAT = 1


@dataclass(frozen=True)
class BayesModel:
    selected_features: tuple[str, ...]
    prior_benign: float
    prior_suspicious: float
    likelihood_benign: tuple[float, ...]     # P(feature present | benign)
    likelihood_suspicious: tuple[float, ...]  # P(feature present | suspicious)
    alpha: float
    catalog_version: str


@dataclass(frozen=True)
class Verdict:
    label: Label
    posterior_suspicious: float
    log_odds: float


def train(profiles: list[AppProfile], catalog: FeatureCatalog,
          selected: list[str] | tuple[str, ...], alpha: float = 1.0) -> BayesModel:
    """Estimate priors and per-feature conditional likelihoods.

    likelihood = (present-in-class + alpha) / (class size + 2 * alpha)
    """
    if not selected:
        raise EmptyFeatureSet("no features selected for training")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    indices = [catalog.index_of(fid) for fid in selected]

    n_ben = 0
    n_sus = 0
    hits_ben = [0] * len(indices)
    hits_sus = [0] * len(indices)
    for profile in profiles:
        if len(profile.bits) != len(catalog):
            raise LengthMismatch(
                "profile %r has %d bits, catalog has %d"
                % (profile.source_id, len(profile.bits), len(catalog)))
        if profile.label is Label.BENIGN:
            n_ben += 1
            hits = hits_ben
        elif profile.label is Label.SUSPICIOUS:
            n_sus += 1
            hits = hits_sus
        else:
            raise UnlabeledSample("profile %r carries no class label" % profile.source_id)
        for j, idx in enumerate(indices):
            if profile.bits[idx]:
                hits[j] += 1
    if n_ben == 0 or n_sus == 0:
        raise MissingClass(
            "training needs both classes (got %d benign, %d suspicious)" % (n_ben, n_sus))

    total = n_ben + n_sus
    return BayesModel(
        selected_features=tuple(selected),
        prior_benign=n_ben / total,
        prior_suspicious=n_sus / total,
        likelihood_benign=tuple((h + alpha) / (n_ben + 2 * alpha) for h in hits_ben),
        likelihood_suspicious=tuple((h + alpha) / (n_sus + 2 * alpha) for h in hits_sus),
        alpha=alpha,
        catalog_version=catalog.version,
    )


def _ln(x: float) -> float:
    return math.log(x) if x > 0.0 else float("-inf")


def _log_joints(model: BayesModel, bits: tuple[bool, ...] | list[bool]) -> tuple[float, float]:
    if len(bits) != len(model.selected_features):
        raise LengthMismatch(
            "vector has %d bits, model uses %d features"
            % (len(bits), len(model.selected_features)))
    log_sus = _ln(model.prior_suspicious)
    log_ben = _ln(model.prior_benign)
    for bit, p_sus, p_ben in zip(bits, model.likelihood_suspicious, model.likelihood_benign):
        if bit:
            log_sus += _ln(p_sus)
            log_ben += _ln(p_ben)
        else:
            log_sus += _ln(1.0 - p_sus)
            log_ben += _ln(1.0 - p_ben)
    return log_sus, log_ben


def _renormalize(log_sus: float, log_ben: float) -> float:
    diff = log_ben - log_sus
    if diff > 709.0:  # exp would overflow; the suspicious mass is ~0
        return 0.0
    if diff < -709.0:
        return 1.0
    return 1.0 / (1.0 + math.exp(diff))


def posterior(model: BayesModel, bits: tuple[bool, ...] | list[bool]) -> float:
    """P(suspicious | vector), renormalized over the two classes."""
    log_sus, log_ben = _log_joints(model, bits)
    if log_sus == float("-inf") and log_ben == float("-inf"):
        # vector impossible under both classes (alpha=0 edge); fall back to prior
        return model.prior_suspicious
    return _renormalize(log_sus, log_ben)


def classify(model: BayesModel, bits: tuple[bool, ...] | list[bool]) -> Verdict:
    """Benign only if strictly more probable; ties resolve to suspicious."""
    log_sus, log_ben = _log_joints(model, bits)
    if log_sus == float("-inf") and log_ben == float("-inf"):
        p_sus = model.prior_suspicious
        log_odds = _ln(model.prior_suspicious) - _ln(model.prior_benign)
    else:
        p_sus = _renormalize(log_sus, log_ben)
        log_odds = log_sus - log_ben
    label = Label.SUSPICIOUS if p_sus >= 0.5 else Label.BENIGN
    return Verdict(label=label, posterior_suspicious=p_sus, log_odds=log_odds)


# persistence ----------------------------------------------------------------

def save_model(model: BayesModel) -> bytes:
    """Versioned text document; floats use repr so round-trips are exact."""
    lines = [
        "droidsift-model %d" % MODEL_FORMAT,
        "catalog %s" % model.catalog_version,
        "alpha %r" % model.alpha,
        "prior_benign %r" % model.prior_benign,
        "prior_suspicious %r" % model.prior_suspicious,
        "features %d" % len(model.selected_features),
    ]
    for fid, p_ben, p_sus in zip(model.selected_features,
                                 model.likelihood_benign,
                                 model.likelihood_suspicious):
        lines.append("%s\t%r\t%r" % (fid, p_ben, p_sus))
    return ("\n".join(lines) + "\n").encode("utf-8")


def _model_float(token: str, what: str) -> float:
    try:
        return float(token)
    except ValueError as exc:
        raise BadModel("unparseable %s: %r" % (what, token)) from exc


def load_model(data: bytes, catalog: FeatureCatalog) -> BayesModel:
    """Parse and validate a saved model against the active catalog."""
    try:
        lines = data.decode("utf-8").splitlines()
    except UnicodeDecodeError as exc:
        raise BadModel("model file is not UTF-8: %s" % exc) from exc
    if not lines or not lines[0].startswith("droidsift-model "):
        raise BadModel("missing model header line")
    if lines[0].split(" ", 1)[1].strip() != str(MODEL_FORMAT):
        raise BadModel("unsupported model format %r" % lines[0])

    header: dict[str, str] = {}
    body_start = 1
    for i, line in enumerate(lines[1:], 1):
        key, _, value = line.partition(" ")
        if key == "features":
            header[key] = value
            body_start = i + 1
            break
        if key not in ("catalog", "alpha", "prior_benign", "prior_suspicious"):
            raise BadModel("unexpected header line %r" % line)
        header[key] = value
    for required in ("catalog", "alpha", "prior_benign", "prior_suspicious", "features"):
        if required not in header:
            raise BadModel("missing %r header" % required)

    catalog_version = header["catalog"].strip()
    alpha = _model_float(header["alpha"], "alpha")
    prior_ben = _model_float(header["prior_benign"], "prior_benign")
    prior_sus = _model_float(header["prior_suspicious"], "prior_suspicious")
    try:
        n_features = int(header["features"])
    except ValueError as exc:
        raise BadModel("unparseable feature count") from exc

    rows = [line for line in lines[body_start:] if line.strip()]
    if len(rows) != n_features:
        raise BadModel("declared %d features, found %d rows" % (n_features, len(rows)))
    ids: list[str] = []
    lik_ben: list[float] = []
    lik_sus: list[float] = []
    for row in rows:
        parts = row.split("\t")
        if len(parts) != 3:
            raise BadModel("bad feature row %r" % row)
        ids.append(parts[0])
        lik_ben.append(_model_float(parts[1], "benign likelihood"))
        lik_sus.append(_model_float(parts[2], "suspicious likelihood"))

    model = BayesModel(
        selected_features=tuple(ids),
        prior_benign=prior_ben,
        prior_suspicious=prior_sus,
        likelihood_benign=tuple(lik_ben),
        likelihood_suspicious=tuple(lik_sus),
        alpha=alpha,
        catalog_version=catalog_version,
    )
    _validate_model(model, catalog)
    return model


def _validate_model(model: BayesModel, catalog: FeatureCatalog) -> None:
    if model.catalog_version != catalog.version:
        raise BadModel("model built for catalog %r, active catalog is %r"
                       % (model.catalog_version, catalog.version))
    if model.alpha < 0:
        raise BadModel("negative alpha")
    if model.prior_benign <= 0 or model.prior_suspicious <= 0:
        raise BadModel("priors must be positive")
    if abs(model.prior_benign + model.prior_suspicious - 1.0) > 1e-9:
        raise BadModel("priors sum to %r, expected 1"
                       % (model.prior_benign + model.prior_suspicious))
    known = set(catalog.ids())
    seen: set[str] = set()
    for fid in model.selected_features:
        if fid in seen:
            raise BadModel("duplicate feature id %r" % fid)
        seen.add(fid)
        if fid not in known:
            raise BadModel("feature id %r is absent from the active catalog" % fid)
    for p in list(model.likelihood_benign) + list(model.likelihood_suspicious):
        if model.alpha > 0:
            if not 0.0 < p < 1.0:
                raise BadModel("likelihood %r outside (0, 1) despite smoothing" % p)
        elif not 0.0 <= p <= 1.0:
            raise BadModel("likelihood %r outside [0, 1]" % p)
