"""Application package (ZIP) container reader.

Parses the end-of-central-directory record and central directory only;
entry payloads are decompressed lazily by read_entry.  Layout per the
PKWARE APPNOTE:

    end of central directory   PK\\x05\\x06  (22 bytes + comment)
    central directory entry    PK\\x01\\x02  (46 bytes + name/extra/comment)
    local file header          PK\\x03\\x04  (30 bytes + name/extra)

Only stored (0) and deflate (8) compression methods are accepted.
Multi-disk and zip64 containers are rejected as BadContainer.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

from .errors import BadContainer, CorruptEntry, EntryNotFound, UnsupportedCompression

_EOCD_SIG = b"PK\x05\x06"
_CEN_SIG = b"PK\x01\x02"
_LOC_SIG = b"PK\x03\x04"

_EOCD_FMT = "<4sHHHHIIH"          # sig, disk, cd disk, n disk, n total, cd size, cd off, comment len
_CEN_FMT = "<4sHHHHHHIIIHHHHHII"  # sig, vers x2, flags, method, time, date, crc, csize, usize,
                                  # name/extra/comment len, disk, iattr, eattr, local offset
_LOC_FMT = "<4sHHHHHIIIHH"        # sig, ver, flags, method, time, date, crc, csize, usize, name/extra len

_EOCD_SIZE = struct.calcsize(_EOCD_FMT)
_CEN_SIZE = struct.calcsize(_CEN_FMT)
_LOC_SIZE = struct.calcsize(_LOC_FMT)

STORED = 0
DEFLATED = 8


class EntryKind(Enum):
    DEX = "dex"
    MANIFEST = "manifest"
    RESOURCE = "resource"
    ASSET = "asset"
    NATIVE_LIB = "native-lib"
    EMBEDDED_PACKAGE = "embedded-package"
    OTHER = "other"


def classify_name(name: str) -> EntryKind:
    """Map an entry name to its kind; total, case-insensitive on extensions."""
    lower = name.lower()
    if lower.endswith(".dex"):
        return EntryKind.DEX
    if lower == "androidmanifest.xml":
        return EntryKind.MANIFEST
    if lower.endswith(".apk") or lower.endswith(".jar"):
        return EntryKind.EMBEDDED_PACKAGE
    if lower.endswith(".so") or lower.startswith("lib/"):
        return EntryKind.NATIVE_LIB
    if lower.startswith("assets/"):
        return EntryKind.ASSET
    if lower.startswith("res/") or lower == "resources.arsc":
        return EntryKind.RESOURCE
    return EntryKind.OTHER


@dataclass(frozen=True)
class ArchiveEntry:
    name: str
    compressed_size: int
    uncompressed_size: int
    kind: EntryKind
    # central-directory bookkeeping needed to locate and verify the payload
    method: int
    crc32: int
    flags: int
    local_offset: int


@dataclass(frozen=True)
class ApkArchive:
    """Immutable view of a parsed container; safe to share across readers."""

    source_id: str
    entries: tuple[ArchiveEntry, ...]
    diagnostics: tuple[str, ...]
    data: bytes = field(repr=False)

    @cached_property
    def _by_name(self) -> dict[str, ArchiveEntry]:
        return {entry.name: entry for entry in self.entries}


def _decode_name(raw: bytes, flags: int) -> str:
    # general-purpose bit 11 marks UTF-8 names; legacy names are cp437
    if flags & 0x800:
        name = raw.decode("utf-8", errors="replace")
    else:
        name = raw.decode("cp437", errors="replace")
    # normalize separators so duplicate detection sees one spelling
    return name.replace("\\", "/")


def _find_eocd(data: bytes) -> tuple:
    # comment may be up to 65535 bytes; search the trailing window for the
    # last signature that leaves room for the fixed record
    window_start = max(0, len(data) - _EOCD_SIZE - 0xFFFF)
    pos = data.rfind(_EOCD_SIG, window_start)
    while pos != -1:
        if pos + _EOCD_SIZE <= len(data):
            return pos, struct.unpack_from(_EOCD_FMT, data, pos)
        pos = data.rfind(_EOCD_SIG, window_start, pos)
    raise BadContainer("end-of-central-directory signature not found")


def open_archive(data: bytes, source_id: str) -> ApkArchive:
    """Parse the container directory; payloads are not read here.

    Raises BadContainer for structural problems and UnsupportedCompression
    if any entry uses a method other than stored/deflate.
    """
    eocd_pos, eocd = _find_eocd(data)
    (_, disk_no, cd_disk, count_disk, count_total, cd_size, cd_offset, _comment_len) = eocd
    if disk_no != 0 or cd_disk != 0 or count_disk != count_total:
        raise BadContainer("multi-disk archives are not supported")
    if count_total == 0xFFFF or cd_offset == 0xFFFFFFFF or cd_size == 0xFFFFFFFF:
        raise BadContainer("zip64 archives are not supported")
    if cd_offset + cd_size > len(data) or cd_offset > eocd_pos:
        raise BadContainer("central directory lies outside the file")

    entries: dict[str, ArchiveEntry] = {}
    diagnostics: list[str] = []
    offset = cd_offset
    for _ in range(count_total):
        if offset + _CEN_SIZE > len(data):
            raise BadContainer("central directory truncated")
        fields = struct.unpack_from(_CEN_FMT, data, offset)
        if fields[0] != _CEN_SIG:
            raise BadContainer("bad central directory entry signature at offset %d" % offset)
        (_, _, _, flags, method, _, _, crc, csize, usize,
         name_len, extra_len, comment_len, _, _, _, local_offset) = fields
        name_start = offset + _CEN_SIZE
        name_end = name_start + name_len
        if name_end > len(data):
            raise BadContainer("entry name truncated")
        name = _decode_name(data[name_start:name_end], flags)
        if method not in (STORED, DEFLATED):
            raise UnsupportedCompression(
                "entry %r uses unsupported compression method %d" % (name, method))
        entry = ArchiveEntry(
            name=name,
            compressed_size=csize,
            uncompressed_size=usize,
            kind=classify_name(name),
            method=method,
            crc32=crc,
            flags=flags,
            local_offset=local_offset,
        )
        if name in entries:
            diagnostics.append("duplicate entry name %r: keeping last occurrence" % name)
            del entries[name]  # reinsert so archive order reflects the survivor
        entries[name] = entry
        offset = name_end + extra_len + comment_len

    return ApkArchive(
        source_id=source_id,
        entries=tuple(entries.values()),
        diagnostics=tuple(diagnostics),
        data=data,
    )


def read_entry(archive: ApkArchive, name: str) -> bytes:
    """Decompress one entry and verify its size and CRC-32."""
    entry = archive._by_name.get(name)
    if entry is None:
        raise EntryNotFound("no entry named %r" % name)
    data = archive.data
    off = entry.local_offset
    if off + _LOC_SIZE > len(data):
        raise CorruptEntry("local header of %r lies outside the file" % name)
    fields = struct.unpack_from(_LOC_FMT, data, off)
    if fields[0] != _LOC_SIG:
        raise CorruptEntry("bad local header signature for %r" % name)
    name_len, extra_len = fields[9], fields[10]
    start = off + _LOC_SIZE + name_len + extra_len
    end = start + entry.compressed_size
    if end > len(data):
        raise CorruptEntry("payload of %r truncated" % name)
    raw = data[start:end]
    if entry.method == STORED:
        payload = raw
    else:
        try:
            payload = zlib.decompress(raw, -15)
        except zlib.error as exc:
            raise CorruptEntry("deflate stream of %r is invalid: %s" % (name, exc)) from exc
    if len(payload) != entry.uncompressed_size:
        raise CorruptEntry(
            "entry %r decompressed to %d bytes, directory declares %d"
            % (name, len(payload), entry.uncompressed_size))
    if zlib.crc32(payload) & 0xFFFFFFFF != entry.crc32:
        raise CorruptEntry("checksum mismatch for %r" % name)
    return payload


def list_payload_entries(archive: ApkArchive) -> list[str]:
    """Names of embedded secondary packages (.apk/.jar), in archive order."""
    return [e.name for e in archive.entries if e.kind is EntryKind.EMBEDDED_PACKAGE]
