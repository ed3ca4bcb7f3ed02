"""Corpus manifests, profile persistence, batch extraction, synthesis.

Corpus manifest: CSV with header `id,label,family`; id is a package path
(or synthetic id), label is benign/suspicious, family is free text.

Profile store: line-oriented text.  First line pins the format and the
catalog version; records are CSV `id,label,family,bits,diagnostics` where
bits is a 0/1 string in catalog order and diagnostics, when present, is a
JSON string array.  Stores round-trip losslessly, diagnostics included.

The synthetic generator draws each feature bit independently from its
per-class Bernoulli marginal.  The default marginals are the built-in
feature frequencies over 1000-sample classes; real apps correlate
features, so treat synthetic corpora as calibration data, not ground
truth.
"""
from __future__ import annotations

import csv
import io
import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .detect import AppProfile, FeatureCatalog, Label, run_detectors
from .container import open_archive
from .errors import (BadSpec, BadStore, CatalogMismatch, DroidsiftError,
                     NoReadableSamples)

STORE_HEADER_PREFIX = "#droidsift-store v1 catalog="

# Built-in per-feature occurrence counts out of 1000 samples per class,
# keyed by feature id: (benign count, suspicious count).
DEFAULT_FREQUENCIES: dict[str, tuple[int, int]] = {
    "getSubscriberId": (42, 742),
    "getDeviceId": (316, 854),
    "getSimSerialNumber": (35, 455),
    ".apk": (89, 537),
    "intent.action.BOOT_COMPLETED": (69, 482),
    "chmod": (19, 389),
    "Runtime.exec": (62, 458),
    "abortBroadcast": (4, 328),
    "getLineNumber": (111, 491),
    "/system/app": (4, 292),
    "/system/bin": (45, 368),
    "createSubprocess": (0, 169),
    "getSimOperator": (37, 196),
    "remount": (3, 122),
    "DexClassLoader": (16, 152),
    "pm install": (0, 98),
    "getCallState": (10, 119),
    "chown": (5, 107),
    ".jar": (87, 252),
    "mount": (29, 152),
    "KeySpec": (99, 254),
    "/system/bin/sh": (4, 90),
    "SMSReceiver": (3, 66),
    "getNetworkOperator": (202, 353),
    "SecretKey": (119, 248),
}


@dataclass(frozen=True)
class CorpusRecord:
    sample_id: str
    label: Label
    family: str | None = None


@dataclass(frozen=True)
class CorpusManifest:
    records: tuple[CorpusRecord, ...]


@dataclass
class ProfileStore:
    catalog_version: str
    profiles: list[AppProfile] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class MarginalSpec:
    """Per-feature (p_benign, p_suspicious) Bernoulli marginals."""

    marginals: dict[str, tuple[float, float]]


def default_marginals() -> MarginalSpec:
    return MarginalSpec(marginals={
        fid: (ben / 1000.0, sus / 1000.0)
        for fid, (ben, sus) in DEFAULT_FREQUENCIES.items()
    })


def load_marginals(data: bytes) -> MarginalSpec:
    """CSV `id,p_benign,p_suspicious` with a header row."""
    try:
        rows = list(csv.reader(io.StringIO(data.decode("utf-8"))))
    except UnicodeDecodeError as exc:
        raise BadSpec("marginals file is not UTF-8: %s" % exc) from exc
    if not rows or [c.strip() for c in rows[0]] != ["id", "p_benign", "p_suspicious"]:
        raise BadSpec("expected header 'id,p_benign,p_suspicious'")
    marginals: dict[str, tuple[float, float]] = {}
    for lineno, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != 3:
            raise BadSpec("line %d: expected 3 columns" % lineno)
        fid = row[0]
        try:
            p_ben, p_sus = float(row[1]), float(row[2])
        except ValueError as exc:
            raise BadSpec("line %d: unparseable probability" % lineno) from exc
        if fid in marginals:
            raise BadSpec("line %d: duplicate feature id %r" % (lineno, fid))
        marginals[fid] = (p_ben, p_sus)
    return MarginalSpec(marginals=marginals)


def load_corpus_manifest(data: bytes) -> CorpusManifest:
    """CSV `id,label,family` with a header row."""
    try:
        rows = list(csv.reader(io.StringIO(data.decode("utf-8"))))
    except UnicodeDecodeError as exc:
        raise BadStore("corpus manifest is not UTF-8: %s" % exc) from exc
    if not rows or [c.strip() for c in rows[0]] != ["id", "label", "family"]:
        raise BadStore("expected header 'id,label,family'")
    records: list[CorpusRecord] = []
    seen: set[str] = set()
    for lineno, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != 3:
            raise BadStore("line %d: expected 3 columns" % lineno)
        sample_id, label_token, family = row
        if sample_id in seen:
            raise BadStore("line %d: duplicate id %r" % (lineno, sample_id))
        if label_token not in (Label.BENIGN.value, Label.SUSPICIOUS.value):
            raise BadStore("line %d: label must be benign or suspicious, got %r"
                           % (lineno, label_token))
        seen.add(sample_id)
        records.append(CorpusRecord(
            sample_id=sample_id,
            label=Label(label_token),
            family=family or None,
        ))
    return CorpusManifest(records=tuple(records))


def extract_corpus(manifest: CorpusManifest, catalog: FeatureCatalog,
                   base_dir: Path | str | None = None) -> ProfileStore:
    """Profile every package in the manifest; per-app failures are skipped
    with a store diagnostic rather than aborting the batch."""
    base = Path(base_dir) if base_dir is not None else None
    store = ProfileStore(catalog_version=catalog.version)
    for record in manifest.records:
        path = Path(record.sample_id)
        if base is not None and not path.is_absolute():
            path = base / path
        try:
            data = path.read_bytes()
        except OSError as exc:
            store.diagnostics.append("%s: unreadable (%s)" % (record.sample_id, exc))
            continue
        try:
            profile = run_detectors(open_archive(data, record.sample_id), catalog)
        except DroidsiftError as exc:
            store.diagnostics.append("%s: %s" % (record.sample_id, exc))
            continue
        store.profiles.append(AppProfile(
            source_id=record.sample_id,
            label=record.label,
            family=record.family,
            bits=profile.bits,
            diagnostics=profile.diagnostics,
        ))
    if not store.profiles:
        raise NoReadableSamples("no sample in the manifest produced a profile")
    return store


def synth_generate(spec: MarginalSpec, n_benign: int, n_suspicious: int,
                   seed: int, catalog: FeatureCatalog) -> ProfileStore:
    """Draw labeled Bernoulli profiles; deterministic for a given seed."""
    if n_benign < 0 or n_suspicious < 0:
        raise BadSpec("sample counts must be nonnegative")
    ids = catalog.ids()
    ids_set = set(ids)
    missing = [fid for fid in ids if fid not in spec.marginals]
    if missing:
        raise BadSpec("marginals missing for catalog features: %s" % ", ".join(missing))
    extra = [fid for fid in spec.marginals if fid not in ids_set]
    if extra:
        raise BadSpec("marginals name unknown features: %s" % ", ".join(extra))
    for fid, (p_ben, p_sus) in spec.marginals.items():
        if not (0.0 <= p_ben <= 1.0 and 0.0 <= p_sus <= 1.0):
            raise BadSpec("marginals for %r outside [0, 1]" % fid)

    rng = random.Random(seed)
    store = ProfileStore(catalog_version=catalog.version)
    for class_label, count, column in (
            (Label.BENIGN, n_benign, 0), (Label.SUSPICIOUS, n_suspicious, 1)):
        for i in range(count):
            bits = tuple(rng.random() < spec.marginals[fid][column] for fid in ids)
            store.profiles.append(AppProfile(
                source_id="synth-%s-%05d" % (class_label.value, i),
                label=class_label,
                family=None,
                bits=bits,
            ))
    return store


# persistence ----------------------------------------------------------------

def save_store(store: ProfileStore) -> bytes:
    out = io.StringIO()
    out.write(STORE_HEADER_PREFIX + store.catalog_version + "\n")
    for note in store.diagnostics:
        out.write("#diag %s\n" % note.replace("\n", " "))
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["id", "label", "family", "bits", "diagnostics"])
    for profile in store.profiles:
        bits = "".join("1" if b else "0" for b in profile.bits)
        diag = json.dumps(list(profile.diagnostics)) if profile.diagnostics else ""
        writer.writerow([profile.source_id, profile.label.value,
                         profile.family or "", bits, diag])
    return out.getvalue().encode("utf-8")


def load_store(data: bytes, catalog: FeatureCatalog) -> ProfileStore:
    """Parse a store and check it was built under the active catalog."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise BadStore("store file is not UTF-8: %s" % exc) from exc
    lines = text.splitlines()
    if not lines or not lines[0].startswith(STORE_HEADER_PREFIX):
        raise BadStore("missing store header line")
    version = lines[0][len(STORE_HEADER_PREFIX):]
    if version != catalog.version:
        raise CatalogMismatch("store built under catalog %r, active catalog is %r"
                              % (version, catalog.version))
    store = ProfileStore(catalog_version=version)
    body_start = 1
    for line in lines[1:]:
        if line.startswith("#diag "):
            store.diagnostics.append(line[len("#diag "):])
            body_start += 1
        else:
            break
    rows = list(csv.reader(lines[body_start:]))
    if not rows or rows[0] != ["id", "label", "family", "bits", "diagnostics"]:
        raise BadStore("missing record header row")
    valid_labels = {label.value: label for label in Label}
    for lineno, row in enumerate(rows[1:], body_start + 2):
        if not row:
            continue
        if len(row) != 5:
            raise BadStore("line %d: expected 5 columns" % lineno)
        sample_id, label_token, family, bits_token, diag_token = row
        if label_token not in valid_labels:
            raise BadStore("line %d: unknown label %r" % (lineno, label_token))
        if len(bits_token) != len(catalog) or set(bits_token) - {"0", "1"}:
            raise BadStore("line %d: bits must be %d chars of 0/1" % (lineno, len(catalog)))
        if diag_token:
            try:
                diag_list = json.loads(diag_token)
            except json.JSONDecodeError as exc:
                raise BadStore("line %d: bad diagnostics field" % lineno) from exc
            if (not isinstance(diag_list, list)
                    or any(not isinstance(d, str) for d in diag_list)):
                raise BadStore("line %d: diagnostics must be a string array" % lineno)
        else:
            diag_list = []
        store.profiles.append(AppProfile(
            source_id=sample_id,
            label=valid_labels[label_token],
            family=family or None,
            bits=tuple(ch == "1" for ch in bits_token),
            diagnostics=tuple(diag_list),
        ))
    return store
