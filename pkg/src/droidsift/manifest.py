"""Manifest extraction from Android binary XML or plaintext XML.

Binary XML is a chunk stream (little-endian):

    outer chunk       type 0x0003, 8-byte header, size = whole document
    string pool       type 0x0001, 28-byte header, then u4 offsets, then
                      length-prefixed strings (UTF-16LE, or UTF-8 when
                      flag bit 8 is set)
    resource map      type 0x0180 (skipped)
    start/end ns      types 0x0100/0x0101
    start element     type 0x0102, 16-byte node header, then ns/name and
                      a 20-byte attribute record per attribute
    end element       type 0x0103

Attribute values that are plain strings resolve through the pool; values
stored as resource references are recorded as "@ref:0x%08x" and never
match detector patterns.  Other typed scalars are ignored.

The plaintext path accepts ordinary UTF-8 XML with the same extraction
rules, so fixtures need not be compiled.
"""
from __future__ import annotations

import struct
import xml.etree.ElementTree as ET
from dataclasses import dataclass

from .errors import BadManifest

ANDROID_NS = "http://schemas.android.com/apk/res/android"

_CHUNK_STRING_POOL = 0x0001
_CHUNK_XML = 0x0003
_CHUNK_START_NAMESPACE = 0x0100
_CHUNK_END_NAMESPACE = 0x0101
_CHUNK_START_ELEMENT = 0x0102
_CHUNK_END_ELEMENT = 0x0103
_CHUNK_CDATA = 0x0104
_CHUNK_RESOURCE_MAP = 0x0180

_UTF8_FLAG = 1 << 8
_NO_INDEX = 0xFFFFFFFF

_TYPE_REFERENCE = 0x01
_TYPE_STRING = 0x03

_COMPONENT_TAGS = ("activity", "service", "receiver")


@dataclass(frozen=True)
class ManifestInfo:
    package_name: str
    permissions: frozenset[str]
    component_names: frozenset[str]
    intent_actions: frozenset[str]


class _Extractor:
    """Accumulates manifest facts while elements stream past."""

    def __init__(self) -> None:
        self.package_name = ""
        self.permissions: set[str] = set()
        self.component_names: set[str] = set()
        self.intent_actions: set[str] = set()

    def element(self, tag: str, attrs: dict[str, str]) -> None:
        if tag == "manifest" and "package" in attrs:
            self.package_name = attrs["package"]
        elif tag == "uses-permission" and "name" in attrs:
            self.permissions.add(attrs["name"])
        elif tag in _COMPONENT_TAGS and "name" in attrs:
            self.component_names.add(attrs["name"])
        elif tag == "action" and "name" in attrs:
            self.intent_actions.add(attrs["name"])

    def result(self) -> ManifestInfo:
        return ManifestInfo(
            package_name=self.package_name,
            permissions=frozenset(self.permissions),
            component_names=frozenset(self.component_names),
            intent_actions=frozenset(self.intent_actions),
        )


def parse_manifest(data: bytes) -> ManifestInfo:
    """Extract package name, permissions, components and intent actions.

    Dispatches on the leading chunk type: 0x0003 selects the binary
    decoder, anything else is attempted as plaintext XML.  Raises
    BadManifest when neither layout applies.
    """
    if len(data) >= 2 and struct.unpack_from("<H", data, 0)[0] == _CHUNK_XML:
        return _parse_binary(data)
    return _parse_plaintext(data)


# binary path ---------------------------------------------------------------

def _u16(data: bytes, off: int) -> int:
    return struct.unpack_from("<H", data, off)[0]


def _u32(data: bytes, off: int) -> int:
    return struct.unpack_from("<I", data, off)[0]


def _parse_string_pool(data: bytes, off: int, header_size: int, size: int) -> list[str]:
    if header_size < 28 or off + 28 > off + size:
        raise BadManifest("string pool header too small")
    count = _u32(data, off + 8)
    flags = _u32(data, off + 16)
    strings_start = _u32(data, off + 20)
    offsets_base = off + header_size
    if offsets_base + 4 * count > off + size:
        raise BadManifest("string pool offset table exceeds chunk")
    utf8 = bool(flags & _UTF8_FLAG)
    end = off + size
    pool: list[str] = []
    for i in range(count):
        rel = _u32(data, offsets_base + 4 * i)
        pool.append(_decode_pool_string(data, off + strings_start + rel, end, utf8))
    return pool


def _decode_pool_string(data: bytes, pos: int, end: int, utf8: bool) -> str:
    # malformed individual strings degrade to ""; detector patterns are
    # nonempty so they can never match a placeholder
    try:
        if utf8:
            # two lengths: chars (ignored) then bytes, each 1 or 2 bytes
            _, pos = _read_len8(data, pos, end)
            nbytes, pos = _read_len8(data, pos, end)
            if pos + nbytes > end:
                return ""
            return data[pos:pos + nbytes].decode("utf-8", errors="replace")
        nchars = _u16(data, pos)
        pos += 2
        if nchars & 0x8000:
            nchars = ((nchars & 0x7FFF) << 16) | _u16(data, pos)
            pos += 2
        if pos + 2 * nchars > end:
            return ""
        return data[pos:pos + 2 * nchars].decode("utf-16-le", errors="replace")
    except struct.error:
        return ""


def _read_len8(data: bytes, pos: int, end: int) -> tuple[int, int]:
    if pos >= end:
        raise struct.error("length prefix out of range")
    value = data[pos]
    pos += 1
    if value & 0x80:
        if pos >= end:
            raise struct.error("length prefix out of range")
        value = ((value & 0x7F) << 8) | data[pos]
        pos += 1
    return value, pos


def _attr_value(pool: list[str], raw_idx: int, data_type: int, data_word: int) -> str | None:
    if raw_idx != _NO_INDEX and raw_idx < len(pool):
        return pool[raw_idx]
    if data_type == _TYPE_STRING and data_word < len(pool):
        return pool[data_word]
    if data_type == _TYPE_REFERENCE:
        return "@ref:0x%08x" % data_word
    return None


def _parse_binary(data: bytes) -> ManifestInfo:
    if len(data) < 8:
        raise BadManifest("binary manifest shorter than its header")
    doc_header_size = _u16(data, 2)
    doc_size = _u32(data, 4)
    if doc_header_size < 8 or doc_size > len(data):
        raise BadManifest("document header is inconsistent")
    end = doc_size
    pool: list[str] | None = None
    extractor = _Extractor()
    off = doc_header_size
    while off < end:
        if off + 8 > end:
            raise BadManifest("trailing bytes too short for a chunk header")
        ctype = _u16(data, off)
        header_size = _u16(data, off + 2)
        size = _u32(data, off + 4)
        if header_size < 8 or size < header_size or off + size > end:
            raise BadManifest("chunk at offset %d overruns its container" % off)
        if ctype == _CHUNK_STRING_POOL and pool is None:
            pool = _parse_string_pool(data, off, header_size, size)
        elif ctype == _CHUNK_START_ELEMENT:
            if pool is None:
                raise BadManifest("element chunk before string pool")
            _parse_element(data, off, header_size, size, pool, extractor)
        elif ctype in (_CHUNK_END_ELEMENT, _CHUNK_START_NAMESPACE,
                       _CHUNK_END_NAMESPACE, _CHUNK_CDATA, _CHUNK_RESOURCE_MAP):
            pass
        # unknown chunk types are skipped by size, matching platform behavior
        off += size
    if pool is None:
        raise BadManifest("no string pool chunk present")
    return extractor.result()


def _parse_element(data: bytes, off: int, header_size: int, size: int,
                   pool: list[str], extractor: _Extractor) -> None:
    body = off + header_size
    if body + 20 > off + size:
        raise BadManifest("element chunk body truncated")
    name_idx = _u32(data, body + 4)
    attr_start = _u16(data, body + 8)
    attr_size = _u16(data, body + 10)
    attr_count = _u16(data, body + 12)
    if name_idx >= len(pool):
        return
    tag = pool[name_idx]
    if attr_size < 20:
        raise BadManifest("attribute record smaller than 20 bytes")
    attrs: dict[str, str] = {}
    base = body + attr_start
    for i in range(attr_count):
        rec = base + i * attr_size
        if rec + 20 > off + size:
            raise BadManifest("attribute %d overruns element chunk" % i)
        _ns, aname_idx, raw_idx = struct.unpack_from("<III", data, rec)
        _sz, _res0, data_type, data_word = struct.unpack_from("<HBBI", data, rec + 12)
        if aname_idx >= len(pool):
            continue
        value = _attr_value(pool, raw_idx, data_type, data_word)
        if value is not None:
            attrs[pool[aname_idx]] = value
    extractor.element(tag, attrs)


# plaintext path ------------------------------------------------------------

def _localname(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _parse_plaintext(data: bytes) -> ManifestInfo:
    try:
        root = ET.fromstring(data)
    except (ET.ParseError, ValueError) as exc:
        raise BadManifest("not a binary chunk stream and not well-formed XML: %s" % exc) from exc
    extractor = _Extractor()
    for elem in root.iter():
        attrs: dict[str, str] = {}
        for key, value in elem.attrib.items():
            attrs[_localname(key)] = value
        extractor.element(_localname(elem.tag), attrs)
    return extractor.result()
