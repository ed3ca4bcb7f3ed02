"""Feature catalog and detectors.

A catalog is an ordered list of feature definitions; its order is the
canonical bit order of every profile vector built against it.  Detector
kinds and where they look:

    ApiCall         dex tables: exact method-name match or substring of a
                    string-pool entry
    Command         case-sensitive substring over dex string pools and the
                    raw bytes of resource/asset/native-lib entries
    Permission      exact membership in the manifest permission set
    PayloadEntry    an embedded .apk/.jar entry name with the matching
                    extension
    ManifestAction  exact membership in the manifest intent actions, or
                    substring of a dex string-pool entry

A feature fires if any location matches.  Per-entry parse failures become
diagnostics on the profile; only an archive with no parseable dex and no
manifest is rejected outright.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

from . import container
from .container import ApkArchive, EntryKind
from .dexparse import DexIndex, MatchMode, contains_pattern, parse_dex
from .errors import BadCatalog, DroidsiftError, NoDex
from .manifest import ManifestInfo, parse_manifest


class FeatureKind(Enum):
    API_CALL = "ApiCall"
    COMMAND = "Command"
    PERMISSION = "Permission"
    PAYLOAD_ENTRY = "PayloadEntry"
    MANIFEST_ACTION = "ManifestAction"


class Label(Enum):
    BENIGN = "benign"
    SUSPICIOUS = "suspicious"
    UNLABELED = "unlabeled"


@dataclass(frozen=True)
class FeatureDef:
    id: str
    kind: FeatureKind
    pattern: str
    description: str


@dataclass(frozen=True)
class FeatureCatalog:
    features: tuple[FeatureDef, ...]
    version: str

    def __len__(self) -> int:
        return len(self.features)

    def ids(self) -> tuple[str, ...]:
        return tuple(f.id for f in self.features)

    def index_of(self, feature_id: str) -> int:
        for i, f in enumerate(self.features):
            if f.id == feature_id:
                return i
        raise BadCatalog("unknown feature id %r" % feature_id)


@dataclass(frozen=True)
class AppProfile:
    source_id: str
    label: Label
    family: str | None
    bits: tuple[bool, ...]
    diagnostics: tuple[str, ...] = ()


DEFAULT_CATALOG_VERSION = "core-25.v1"

# The built-in features and their match patterns.  Ids are the familiar
# feature names; patterns are what actually appears in dex tables or
# manifests (notably "exec" is the method name behind Runtime.exec, and
# the boot action carries its full android.intent prefix).
_DEFAULT_FEATURES: tuple[tuple[str, FeatureKind, str, str], ...] = (
    ("getSubscriberId", FeatureKind.API_CALL, "getSubscriberId",
     "telephony subscriber identity getter"),
    ("getDeviceId", FeatureKind.API_CALL, "getDeviceId",
     "telephony device identity getter"),
    ("getSimSerialNumber", FeatureKind.API_CALL, "getSimSerialNumber",
     "SIM serial number getter"),
    (".apk", FeatureKind.PAYLOAD_ENTRY, ".apk",
     "embedded secondary application package"),
    ("intent.action.BOOT_COMPLETED", FeatureKind.MANIFEST_ACTION,
     "android.intent.action.BOOT_COMPLETED",
     "receiver triggered at device boot"),
    ("chmod", FeatureKind.COMMAND, "chmod",
     "shell permission-change command"),
    ("Runtime.exec", FeatureKind.API_CALL, "exec",
     "child process launch via Runtime"),
    ("abortBroadcast", FeatureKind.API_CALL, "abortBroadcast",
     "broadcast interception call"),
    ("getLineNumber", FeatureKind.API_CALL, "getLineNumber",
     "phone line number getter"),
    ("/system/app", FeatureKind.COMMAND, "/system/app",
     "system application directory path"),
    ("/system/bin", FeatureKind.COMMAND, "/system/bin",
     "system binaries directory path"),
    ("createSubprocess", FeatureKind.API_CALL, "createSubprocess",
     "native subprocess creation call"),
    ("getSimOperator", FeatureKind.API_CALL, "getSimOperator",
     "SIM operator code getter"),
    ("remount", FeatureKind.COMMAND, "remount",
     "filesystem remount command"),
    ("DexClassLoader", FeatureKind.API_CALL, "DexClassLoader",
     "dynamic bytecode class loading"),
    ("pm install", FeatureKind.COMMAND, "pm install",
     "package-manager silent install command"),
    ("getCallState", FeatureKind.API_CALL, "getCallState",
     "telephony call state getter"),
    ("chown", FeatureKind.COMMAND, "chown",
     "shell ownership-change command"),
    (".jar", FeatureKind.PAYLOAD_ENTRY, ".jar",
     "embedded secondary java archive"),
    ("mount", FeatureKind.COMMAND, "mount",
     "filesystem mount command"),
    ("KeySpec", FeatureKind.API_CALL, "KeySpec",
     "cryptographic key specification class"),
    ("/system/bin/sh", FeatureKind.COMMAND, "/system/bin/sh",
     "system shell path"),
    ("SMSReceiver", FeatureKind.API_CALL, "SMSReceiver",
     "SMS-intercepting receiver class name"),
    ("getNetworkOperator", FeatureKind.API_CALL, "getNetworkOperator",
     "network operator code getter"),
    ("SecretKey", FeatureKind.API_CALL, "SecretKey",
     "symmetric encryption key class"),
)

_KIND_BY_TOKEN = {kind.value: kind for kind in FeatureKind}


def default_catalog() -> FeatureCatalog:
    """The built-in 25-feature catalog, in canonical order."""
    features = tuple(FeatureDef(fid, kind, pattern, desc)
                     for fid, kind, pattern, desc in _DEFAULT_FEATURES)
    return FeatureCatalog(features=features, version=DEFAULT_CATALOG_VERSION)


def dump_catalog(catalog: FeatureCatalog) -> bytes:
    """Serialize a catalog to the tab-separated text format."""
    lines = ["#! version=%s" % catalog.version,
             "# id<TAB>kind<TAB>pattern<TAB>description"]
    for f in catalog.features:
        lines.append("%s\t%s\t%s\t%s" % (f.id, f.kind.value, f.pattern, f.description))
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_catalog(data: bytes) -> FeatureCatalog:
    """Parse the tab-separated catalog format.

    Lines are `id<TAB>kind<TAB>pattern<TAB>description`; '#' starts a
    comment, blank lines are ignored.  A `#! version=...` directive pins
    the catalog version; without one the version is derived from the
    content so stores and models can still detect mismatches.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise BadCatalog("catalog file is not UTF-8: %s" % exc) from exc
    version: str | None = None
    features: list[FeatureDef] = []
    seen: set[str] = set()
    for lineno, raw_line in enumerate(text.splitlines(), 1):
        line = raw_line.strip()
        if line.startswith("#!"):
            directive = line[2:].strip()
            if directive.startswith("version="):
                version = directive[len("version="):].strip()
            continue
        if not line or line.startswith("#"):
            continue
        parts = raw_line.split("\t", 3)
        if len(parts) != 4:
            raise BadCatalog("line %d: expected 4 tab-separated fields" % lineno)
        fid, kind_token, pattern, description = (p.strip() for p in parts)
        if not fid:
            raise BadCatalog("line %d: empty feature id" % lineno)
        if fid in seen:
            raise BadCatalog("line %d: duplicate feature id %r" % (lineno, fid))
        if kind_token not in _KIND_BY_TOKEN:
            raise BadCatalog("line %d: unknown kind %r" % (lineno, kind_token))
        if not pattern:
            raise BadCatalog("line %d: empty pattern for %r" % (lineno, fid))
        seen.add(fid)
        features.append(FeatureDef(fid, _KIND_BY_TOKEN[kind_token], pattern, description))
    if not features:
        raise BadCatalog("catalog defines no features")
    if version is None:
        digest = hashlib.sha256(
            "\n".join("%s\t%s\t%s" % (f.id, f.kind.value, f.pattern) for f in features)
            .encode("utf-8")).hexdigest()
        version = "sha256:%s" % digest[:12]
    return FeatureCatalog(features=tuple(features), version=version)


@dataclass
class ScanReport:
    """run_detectors plus the evidence behind each bit, for reporting."""

    profile: AppProfile
    hits: dict[str, list[str]] = field(default_factory=dict)  # feature id -> locations
    manifest_info: ManifestInfo | None = None
    payload_entries: list[str] = field(default_factory=list)
    dex_names: list[str] = field(default_factory=list)


def inspect_archive(archive: ApkArchive, catalog: FeatureCatalog) -> ScanReport:
    """Apply every detector and keep the matched locations."""
    diagnostics: list[str] = list(archive.diagnostics)

    dexes: list[tuple[str, DexIndex]] = []
    manifest_info: ManifestInfo | None = None
    blobs: list[tuple[str, bytes]] = []
    for entry in archive.entries:
        if entry.kind is EntryKind.DEX:
            try:
                index = parse_dex(container.read_entry(archive, entry.name))
                dexes.append((entry.name, index))
                for note in index.diagnostics:
                    diagnostics.append("%s: %s" % (entry.name, note))
            except DroidsiftError as exc:
                diagnostics.append("%s: %s" % (entry.name, exc))
        elif entry.kind is EntryKind.MANIFEST:
            try:
                manifest_info = parse_manifest(container.read_entry(archive, entry.name))
            except DroidsiftError as exc:
                diagnostics.append("%s: %s" % (entry.name, exc))
        elif entry.kind in (EntryKind.RESOURCE, EntryKind.ASSET, EntryKind.NATIVE_LIB):
            try:
                blobs.append((entry.name, container.read_entry(archive, entry.name)))
            except DroidsiftError as exc:
                diagnostics.append("%s: %s" % (entry.name, exc))

    if not dexes and manifest_info is None:
        raise NoDex("archive %r has no parseable dex and no manifest" % archive.source_id)

    payload_entries = container.list_payload_entries(archive)

    bits: list[bool] = []
    hits: dict[str, list[str]] = {}
    for feature in catalog.features:
        locations = _match_feature(feature, dexes, manifest_info, blobs, payload_entries)
        bits.append(bool(locations))
        if locations:
            hits[feature.id] = locations

    profile = AppProfile(
        source_id=archive.source_id,
        label=Label.UNLABELED,
        family=None,
        bits=tuple(bits),
        diagnostics=tuple(diagnostics),
    )
    return ScanReport(
        profile=profile,
        hits=hits,
        manifest_info=manifest_info,
        payload_entries=payload_entries,
        dex_names=[name for name, _ in dexes],
    )


def _match_feature(feature: FeatureDef,
                   dexes: list[tuple[str, DexIndex]],
                   manifest_info: ManifestInfo | None,
                   blobs: list[tuple[str, bytes]],
                   payload_entries: list[str]) -> list[str]:
    pattern = feature.pattern
    locations: list[str] = []
    if feature.kind is FeatureKind.API_CALL:
        for name, index in dexes:
            if (contains_pattern(index, pattern, MatchMode.EXACT)
                    or contains_pattern(index, pattern, MatchMode.SUBSTRING)):
                locations.append(name)
    elif feature.kind is FeatureKind.COMMAND:
        for name, index in dexes:
            if contains_pattern(index, pattern, MatchMode.SUBSTRING):
                locations.append(name)
        needle = pattern.encode("utf-8")
        for name, blob in blobs:
            if needle in blob:
                locations.append(name)
    elif feature.kind is FeatureKind.PERMISSION:
        if manifest_info is not None and pattern in manifest_info.permissions:
            locations.append("manifest:uses-permission")
    elif feature.kind is FeatureKind.PAYLOAD_ENTRY:
        suffix = pattern.lower()
        locations.extend(n for n in payload_entries if n.lower().endswith(suffix))
    elif feature.kind is FeatureKind.MANIFEST_ACTION:
        if manifest_info is not None and pattern in manifest_info.intent_actions:
            locations.append("manifest:action")
        for name, index in dexes:
            if contains_pattern(index, pattern, MatchMode.SUBSTRING):
                locations.append(name)
    return locations


def run_detectors(archive: ApkArchive, catalog: FeatureCatalog) -> AppProfile:
    """Boolean feature vector for one archive, aligned to catalog order."""
    return inspect_archive(archive, catalog).profile
