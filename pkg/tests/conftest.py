"""Shared fixture builders.

These writers are intentionally independent of the parsers under test:
archives come from the stdlib zipfile module, dex files from a minimal
assembler written against the published format layout, and binary
manifests from a chunk writer mirroring the platform encoding.  Parsing
one of these fixtures and recovering the original content is therefore a
genuine round-trip check, not the parser testing itself.
"""
from __future__ import annotations

import hashlib
import io
import struct
import zipfile
import zlib

import pytest

from droidsift import default_catalog

ANDROID_NS = "http://schemas.android.com/apk/res/android"


# zip reference writer --------------------------------------------------------

def build_zip(entries: list[tuple[str, bytes]], compression: int = zipfile.ZIP_DEFLATED) -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=compression) as zf:
        for name, data in entries:
            zf.writestr(name, data)
    return buf.getvalue()


# dex reference assembler ------------------------------------------------------

def encode_mutf8(text: str) -> bytes:
    out = bytearray()
    for ch in text:
        cp = ord(ch)
        if cp == 0:
            out += b"\xc0\x80"
        elif cp < 0x80:
            out.append(cp)
        elif cp < 0x800:
            out.append(0xC0 | (cp >> 6))
            out.append(0x80 | (cp & 0x3F))
        elif cp < 0x10000:
            out.append(0xE0 | (cp >> 12))
            out.append(0x80 | ((cp >> 6) & 0x3F))
            out.append(0x80 | (cp & 0x3F))
        else:
            cp -= 0x10000
            for unit in (0xD800 + (cp >> 10), 0xDC00 + (cp & 0x3FF)):
                out.append(0xE0 | (unit >> 12))
                out.append(0x80 | ((unit >> 6) & 0x3F))
                out.append(0x80 | (unit & 0x3F))
    return bytes(out)


def encode_uleb128(value: int) -> bytes:
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def utf16_length(text: str) -> int:
    return sum(2 if ord(ch) > 0xFFFF else 1 for ch in text)


def build_dex(strings: list[str] = (), methods: list[tuple[str, str]] = (),
              type_descriptors: list[str] = (), version: bytes = b"035") -> bytes:
    """Assemble a minimal dex with the given string pool content.

    `methods` are (class descriptor, method name) pairs; descriptors and
    names are added to the pool automatically, as is the ()V prototype
    every method id points at.
    """
    pool: set[str] = set(strings)
    descriptors: set[str] = set(type_descriptors)
    for class_desc, method_name in methods:
        descriptors.add(class_desc)
        pool.add(method_name)
    if methods:
        descriptors.add("V")
        pool.add("V")
    pool |= descriptors
    pool_list = sorted(pool)
    string_index = {s: i for i, s in enumerate(pool_list)}
    type_list = sorted(descriptors)
    type_index = {s: i for i, s in enumerate(type_list)}

    header_size = 0x70
    n_protos = 1 if methods else 0
    pos = header_size
    string_ids_off = pos if pool_list else 0
    pos += 4 * len(pool_list)
    type_ids_off = pos if type_list else 0
    pos += 4 * len(type_list)
    proto_ids_off = pos if n_protos else 0
    pos += 12 * n_protos
    method_ids_off = pos if methods else 0
    pos += 8 * len(methods)
    data_off = pos

    data = bytearray()
    string_offsets = []
    for s in pool_list:
        string_offsets.append(data_off + len(data))
        data += encode_uleb128(utf16_length(s)) + encode_mutf8(s) + b"\x00"

    body = bytearray()
    for off in string_offsets:
        body += struct.pack("<I", off)
    for desc in type_list:
        body += struct.pack("<I", string_index[desc])
    if n_protos:
        # single ()V prototype: shorty "V", return type "V", no parameters
        body += struct.pack("<III", string_index["V"], type_index["V"], 0)
    for class_desc, method_name in methods:
        body += struct.pack("<HHI", type_index[class_desc], 0, string_index[method_name])
    body += data

    file_size = header_size + len(body)
    header = bytearray(struct.pack("<4s3ss", b"dex\n", version, b"\x00"))
    header += b"\x00" * 4                        # checksum placeholder
    header += b"\x00" * 20                       # signature placeholder
    header += struct.pack("<II", file_size, header_size)
    header += struct.pack("<I", 0x12345678)      # endian tag
    header += struct.pack("<II", 0, 0)           # link
    header += struct.pack("<I", 0)               # map_off (no map in fixtures)
    header += struct.pack("<II", len(pool_list), string_ids_off)
    header += struct.pack("<II", len(type_list), type_ids_off)
    header += struct.pack("<II", n_protos, proto_ids_off)
    header += struct.pack("<II", 0, 0)           # field_ids
    header += struct.pack("<II", len(methods), method_ids_off if methods else 0)
    header += struct.pack("<II", 0, 0)           # class_defs
    header += struct.pack("<II", len(data), data_off if data else 0)
    assert len(header) == header_size

    blob = bytearray(header + body)
    blob[12:32] = hashlib.sha1(blob[32:]).digest()
    blob[8:12] = struct.pack("<I", zlib.adler32(bytes(blob[12:])) & 0xFFFFFFFF)
    return bytes(blob)


# binary manifest writer -------------------------------------------------------

def _axml_chunk(ctype: int, header_extra: bytes, body: bytes) -> bytes:
    header_size = 8 + len(header_extra)
    return struct.pack("<HHI", ctype, header_size, header_size + len(body)) + header_extra + body


def _axml_string_pool(strings: list[str], utf8: bool) -> bytes:
    offsets = []
    blob = bytearray()
    for s in strings:
        offsets.append(len(blob))
        if utf8:
            encoded = s.encode("utf-8")
            blob.append(len(s))
            blob.append(len(encoded))
            blob += encoded + b"\x00"
        else:
            blob += struct.pack("<H", len(s)) + s.encode("utf-16-le") + b"\x00\x00"
    while len(blob) % 4:
        blob.append(0)
    count = len(strings)
    strings_start = 28 + 4 * count
    header_extra = struct.pack("<IIIII", count, 0, 0x100 if utf8 else 0, strings_start, 0)
    body = b"".join(struct.pack("<I", o) for o in offsets) + bytes(blob)
    return _axml_chunk(0x0001, header_extra, body)


class _AxmlWriter:
    def __init__(self, strings: list[str], utf8: bool = False) -> None:
        self.index = {s: i for i, s in enumerate(strings)}
        self.strings = strings
        self.utf8 = utf8
        self.chunks: list[bytes] = []

    def start_ns(self) -> None:
        extra = struct.pack("<II", 0, 0xFFFFFFFF)  # line, comment
        body = struct.pack("<II", self.index["android"], self.index[ANDROID_NS])
        self.chunks.append(_axml_chunk(0x0100, extra, body))

    def end_ns(self) -> None:
        extra = struct.pack("<II", 0, 0xFFFFFFFF)
        body = struct.pack("<II", self.index["android"], self.index[ANDROID_NS])
        self.chunks.append(_axml_chunk(0x0101, extra, body))

    def start(self, tag: str, attrs: list[tuple[str | None, str, object]] = ()) -> None:
        # attrs: (namespace uri or None, attribute name, value); a value of
        # ("ref", resid) emits a resource reference instead of a string
        extra = struct.pack("<II", 0, 0xFFFFFFFF)
        body = struct.pack("<IIHHHHHH", 0xFFFFFFFF, self.index[tag],
                           20, 20, len(attrs), 0, 0, 0)
        for ns, name, value in attrs:
            ns_idx = self.index[ns] if ns is not None else 0xFFFFFFFF
            if isinstance(value, tuple) and value[0] == "ref":
                raw, dtype, word = 0xFFFFFFFF, 0x01, value[1]
            else:
                raw, dtype, word = self.index[value], 0x03, self.index[value]
            body += struct.pack("<IIIHBBI", ns_idx, self.index[name], raw, 8, 0, dtype, word)
        self.chunks.append(_axml_chunk(0x0102, extra, body))

    def end(self, tag: str) -> None:
        extra = struct.pack("<II", 0, 0xFFFFFFFF)
        body = struct.pack("<II", 0xFFFFFFFF, self.index[tag])
        self.chunks.append(_axml_chunk(0x0103, extra, body))

    def document(self) -> bytes:
        pool = _axml_string_pool(self.strings, self.utf8)
        resmap = _axml_chunk(0x0180, b"", struct.pack("<I", 0x01010003))
        children = pool + resmap + b"".join(self.chunks)
        return struct.pack("<HHI", 0x0003, 8, 8 + len(children)) + children


def build_axml(package: str = "com.example.app",
               permissions: list[str] = (),
               components: list[tuple[str, str]] = (),
               actions: list[str] = (),
               utf8_pool: bool = False,
               ref_permission_id: int | None = None) -> bytes:
    """Binary manifest mirroring build_plain_manifest for the same inputs."""
    strings = ["name", "android", ANDROID_NS, "manifest", "package", package,
               "uses-permission", "application", "intent-filter", "action"]
    for perm in permissions:
        strings.append(perm)
    for tag, cname in components:
        strings.extend([tag, cname])
    strings.extend(actions)
    # dedupe preserving order
    seen: set[str] = set()
    strings = [s for s in strings if not (s in seen or seen.add(s))]

    w = _AxmlWriter(strings, utf8=utf8_pool)
    w.start_ns()
    w.start("manifest", [(None, "package", package)])
    for perm in permissions:
        w.start("uses-permission", [(ANDROID_NS, "name", perm)])
        w.end("uses-permission")
    if ref_permission_id is not None:
        w.start("uses-permission", [(ANDROID_NS, "name", ("ref", ref_permission_id))])
        w.end("uses-permission")
    w.start("application", [])
    receiver_for_actions = None
    for tag, cname in components:
        w.start(tag, [(ANDROID_NS, "name", cname)])
        if tag == "receiver" and receiver_for_actions is None and actions:
            receiver_for_actions = cname
            w.start("intent-filter", [])
            for act in actions:
                w.start("action", [(ANDROID_NS, "name", act)])
                w.end("action")
            w.end("intent-filter")
        w.end(tag)
    if actions and receiver_for_actions is None:
        w.start("intent-filter", [])
        for act in actions:
            w.start("action", [(ANDROID_NS, "name", act)])
            w.end("action")
        w.end("intent-filter")
    w.end("application")
    w.end("manifest")
    w.end_ns()
    return w.document()


def build_plain_manifest(package: str = "com.example.app",
                         permissions: list[str] = (),
                         components: list[tuple[str, str]] = (),
                         actions: list[str] = ()) -> bytes:
    """Plaintext twin of build_axml."""
    lines = ['<?xml version="1.0" encoding="utf-8"?>',
             '<manifest xmlns:android="%s" package="%s">' % (ANDROID_NS, package)]
    for perm in permissions:
        lines.append('  <uses-permission android:name="%s"/>' % perm)
    lines.append("  <application>")
    receiver_used = False
    for tag, cname in components:
        if tag == "receiver" and not receiver_used and actions:
            receiver_used = True
            lines.append('    <%s android:name="%s">' % (tag, cname))
            lines.append("      <intent-filter>")
            for act in actions:
                lines.append('        <action android:name="%s"/>' % act)
            lines.append("      </intent-filter>")
            lines.append("    </%s>" % tag)
        else:
            lines.append('    <%s android:name="%s"/>' % (tag, cname))
    if actions and not receiver_used:
        lines.append("    <intent-filter>")
        for act in actions:
            lines.append('      <action android:name="%s"/>' % act)
        lines.append("    </intent-filter>")
    lines.append("  </application>")
    lines.append("</manifest>")
    return "\n".join(lines).encode("utf-8")


# composite fixtures -----------------------------------------------------------

def build_fixture_apk() -> bytes:
    """The end-to-end package: one dex with getSubscriberId, one asset with
    chmod, one embedded payload, and a BOOT_COMPLETED receiver."""
    dex = build_dex(methods=[("Landroid/telephony/TelephonyManager;", "getSubscriberId")])
    axml = build_axml(
        package="com.fixture.sample",
        permissions=["android.permission.RECEIVE_BOOT_COMPLETED"],
        components=[("receiver", "com.fixture.sample.BootReceiver")],
        actions=["android.intent.action.BOOT_COMPLETED"],
    )
    inner_payload = build_zip([("classes.dex", build_dex(strings=["inner"]))])
    return build_zip([
        ("AndroidManifest.xml", axml),
        ("classes.dex", dex),
        ("assets/setup.txt", b"run: chmod 755 /data/local/tmp/worker\n"),
        ("assets/payload.apk", inner_payload),
    ])


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def fixture_apk_bytes():
    return build_fixture_apk()
