"""Random-access and streaming reader for WARC/1.0 and WARC/1.1 files.

Record-compressed ``.warc.gz`` (one gzip member per record) and plain
``.warc`` are supported. A small writer and a CDX indexer are included so
corpora can be built without external tools.
"""
from __future__ import annotations

import base64
import gzip
import hashlib
import logging
import os
import zlib
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

logger = logging.getLogger(__name__)

_CHUNK = 64 * 1024


class WarcError(Exception):
    pass


class CorruptRecordError(WarcError):
    pass


class TruncatedRecordError(WarcError):
    pass


class WrongRecordTypeError(WarcError):
    def __init__(self, record_type, offset):
        super().__init__("record at offset %d is %r, not 'response'" % (offset, record_type))
        self.record_type = record_type
        self.offset = offset


@dataclass(frozen=True)
class WarcLocator:
    warc_file: str
    offset: int


@dataclass(frozen=True)
class MementoPayload:
    target_uri: str
    warc_datetime: datetime
    http_status: int
    content_type: str
    body: bytes

    @property
    def timestamp(self):
        return self.warc_datetime.strftime("%Y%m%d%H%M%S")

    @property
    def mimetype(self):
        return self.content_type.split(";", 1)[0].strip().lower() or "unk"


def sha1_base32(data: bytes) -> str:
    return base64.b32encode(hashlib.sha1(data).digest()).decode("ascii")


def parse_warc_date(value):
    value = value.strip()
    for fmt in ("%Y-%m-%dT%H:%M:%SZ", "%Y-%m-%dT%H:%M:%S.%fZ", "%Y-%m-%dT%H:%MZ", "%Y-%m-%dZ"):
        try:
            return datetime.strptime(value, fmt).replace(tzinfo=timezone.utc)
        except ValueError:
            pass
    raise CorruptRecordError("bad WARC-Date %r" % value)


def _parse_headers(block: bytes):
    headers = {}
    for line in block.split(b"\r\n"):
        if not line:
            continue
        name, sep, value = line.partition(b":")
        if not sep:
            continue
        headers[name.decode("latin-1").strip().lower()] = value.decode("utf-8", "replace").strip()
    return headers


def _split_http(block: bytes):
    """Split an HTTP response block into (status, headers, body)."""
    end = block.find(b"\r\n\r\n")
    sep = 4
    if end < 0:
        end = block.find(b"\n\n")
        sep = 2
    if end < 0:
        raise CorruptRecordError("no blank line after HTTP headers")
    head = block[:end].replace(b"\r\n", b"\n").split(b"\n")
    status_line = head[0].decode("latin-1")
    parts = status_line.split(None, 2)
    if len(parts) < 2 or not parts[0].startswith("HTTP/") or not parts[1].isdigit():
        raise CorruptRecordError("bad HTTP status line %r" % status_line)
    headers = _parse_headers(b"\r\n".join(head[1:]))
    return int(parts[1]), headers, block[end + sep:]


def _parse_record(data: bytes, offset: int):
    """Parse one WARC record from the start of `data`.

    Returns ``(headers, block, consumed)``; `consumed` counts the trailing
    CRLFCRLF when present.
    """
    if not data:
        raise CorruptRecordError("no record at offset %d (end of file)" % offset)
    if not data.startswith(b"WARC/"):
        raise CorruptRecordError("bad magic at offset %d: %r" % (offset, data[:8]))
    head_end = data.find(b"\r\n\r\n")
    if head_end < 0:
        raise TruncatedRecordError("header block at offset %d is incomplete" % offset)
    version = data[:data.find(b"\r\n")].decode("latin-1")
    if version not in ("WARC/1.0", "WARC/1.1"):
        raise CorruptRecordError("unsupported version %r at offset %d" % (version, offset))
    headers = _parse_headers(data[:head_end])
    try:
        length = int(headers["content-length"])
    except (KeyError, ValueError):
        raise CorruptRecordError("missing Content-Length at offset %d" % offset) from None
    start = head_end + 4
    if len(data) < start + length:
        raise TruncatedRecordError("record at offset %d declares %d bytes, %d present"
                                   % (offset, length, len(data) - start))
    consumed = start + length
    if data[consumed:consumed + 4] == b"\r\n\r\n":
        consumed += 4
    return headers, data[start:start + length], consumed


def _payload(headers, block, offset):
    rtype = headers.get("warc-type", "")
    if rtype != "response":
        raise WrongRecordTypeError(rtype, offset)
    status, http_headers, body = _split_http(block)
    return MementoPayload(
        target_uri=headers.get("warc-target-uri", ""),
        warc_datetime=parse_warc_date(headers.get("warc-date", "")),
        http_status=status,
        content_type=http_headers.get("content-type", ""),
        body=body,
    )


def _inflate_member(fh, offset):
    """Decompress the gzip member at `offset`; returns (data, compressed_size)."""
    fh.seek(offset)
    d = zlib.decompressobj(wbits=31)
    out = []
    used = 0
    while not d.eof:
        chunk = fh.read(_CHUNK)
        if not chunk:
            raise TruncatedRecordError("gzip member at offset %d ends early" % offset)
        try:
            out.append(d.decompress(chunk))
        except zlib.error as exc:
            raise CorruptRecordError("gzip error at offset %d: %s" % (offset, exc)) from None
        used += len(chunk)
    used -= len(d.unused_data)
    return b"".join(out), used


def _is_gzip_at(fh, offset):
    fh.seek(offset)
    return fh.read(2) == b"\x1f\x8b"


def _read_raw(fh, offset):
    """Return (headers, block, bytes consumed in the file)."""
    if _is_gzip_at(fh, offset):
        data, used = _inflate_member(fh, offset)
        headers, block, consumed = _parse_record(data, offset)
        if data[consumed:].lstrip(b"\r\n").startswith(b"WARC/"):
            raise CorruptRecordError(
                "gzip member at offset %d holds several records; whole-file gzip "
                "is not supported, recompress one member per record" % offset)
        return headers, block, used
    fh.seek(offset)
    head = fh.read(_CHUNK)
    if not head.startswith(b"WARC/"):
        raise CorruptRecordError("bad magic at offset %d: %r" % (offset, head[:8]))
    head_end = head.find(b"\r\n\r\n")
    headers = _parse_headers(head[:head_end]) if head_end >= 0 else {}
    try:
        need = head_end + 4 + int(headers["content-length"]) + 4
    except (KeyError, ValueError):
        need = len(head)
    data = head
    if need > len(head):
        fh.seek(offset)
        data = fh.read(need)
    return _parse_record(data, offset)


class WarcFile:
    """One open handle for repeated random reads from a single WARC file."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "rb")
        self._size = os.fstat(self._fh.fileno()).st_size

    def read(self, offset) -> MementoPayload:
        if offset >= self._size:
            raise CorruptRecordError("offset %d is past end of %s (%d bytes)"
                                     % (offset, self.path, self._size))
        headers, block, _ = _read_raw(self._fh, offset)
        return _payload(headers, block, offset)

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_record(locator: WarcLocator, root=".") -> MementoPayload:
    with WarcFile(Path(root) / locator.warc_file) as wf:
        return wf.read(locator.offset)


class WarcStream:
    """Iterate ``(offset, MementoPayload)`` over a WARC file.

    Non-response records are counted in ``skipped``; a truncated tail stops
    iteration and sets ``truncated``.
    """

    def __init__(self, path):
        self.path = Path(path)
        self.skipped = 0
        self.truncated = False

    def __iter__(self):
        with open(self.path, "rb") as fh:
            size = os.fstat(fh.fileno()).st_size
            offset = 0
            while offset < size:
                try:
                    headers, block, used = _read_raw(fh, offset)
                except TruncatedRecordError as exc:
                    logger.warning("%s: %s", self.path, exc)
                    self.truncated = True
                    return
                if headers.get("warc-type") == "response":
                    yield offset, _payload(headers, block, offset)
                else:
                    self.skipped += 1
                offset += used
                # plain files may pad records with extra newlines
                fh.seek(offset)
                while fh.read(2) == b"\r\n":
                    offset += 2


def stream_records(path) -> WarcStream:
    return WarcStream(path)


def build_response_block(body: bytes, status=200, content_type="text/html; charset=utf-8",
                         extra_headers=()):
    reason = {200: "OK", 404: "Not Found", 301: "Moved Permanently"}.get(status, "Status")
    lines = ["HTTP/1.1 %d %s" % (status, reason), "Content-Type: %s" % content_type,
             "Content-Length: %d" % len(body)]
    lines.extend("%s: %s" % kv for kv in extra_headers)
    return ("\r\n".join(lines) + "\r\n\r\n").encode("latin-1") + body


class WarcWriter:
    """Append records to a WARC file; one gzip member per record if `compress`."""

    def __init__(self, fh, compress=False):
        self.fh = fh
        self.compress = compress

    def write_record(self, record_type, target_uri, when: datetime, block: bytes,
                     content_type="application/http; msgtype=response"):
        offset = self.fh.tell()
        head = [
            "WARC/1.0",
            "WARC-Type: %s" % record_type,
            "WARC-Target-URI: %s" % target_uri,
            "WARC-Date: %s" % when.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "Content-Type: %s" % content_type,
            "Content-Length: %d" % len(block),
        ]
        raw = ("\r\n".join(head) + "\r\n\r\n").encode("utf-8") + block + b"\r\n\r\n"
        if self.compress:
            raw = gzip.compress(raw, mtime=0)
        self.fh.write(raw)
        return offset

    def write_response(self, target_uri, when, body, status=200,
                       content_type="text/html; charset=utf-8"):
        return self.write_record("response", target_uri, when,
                                 build_response_block(body, status, content_type))

    def write_request(self, target_uri, when):
        block = ("GET / HTTP/1.1\r\nHost: %s\r\n\r\n" % target_uri).encode("utf-8")
        return self.write_record("request", target_uri, when, block,
                                 "application/http; msgtype=request")


def index_warc(path, name=None):
    """CDX records for every response in `path` (digest = SHA-1 of the body)."""
    from .cdx import CdxRecord
    from .uri import CanonicalizationError, canonicalize

    name = name or Path(path).name
    out = []
    for offset, p in stream_records(path):
        try:
            key = canonicalize(p.target_uri)
        except CanonicalizationError:
            key = p.target_uri
        out.append(CdxRecord(key, p.timestamp, p.target_uri, p.mimetype, str(p.http_status),
                             sha1_base32(p.body), "-", "-", offset, name))
    return out
