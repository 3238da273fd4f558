"""SURT canonicalization and 128-bit SimHash URI identifiers.

An id depends on the canonical key alone, so ids computed on different
machines, partitions or processing cycles always agree.
"""
from __future__ import annotations

import logging
import re
import threading
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable
from urllib.parse import urlsplit

import numpy as np

logger = logging.getLogger(__name__)

FNV128_OFFSET = 0x6C62272E07BB014262B821756295C58D
FNV128_PRIME = 0x0000000001000000000000000000013B
_MASK128 = (1 << 128) - 1

_WWW_LABEL = re.compile(r"^www\d*$")
_DEFAULT_PORTS = {"80", "443"}


class CanonicalizationError(ValueError):
    """Raised when a string cannot be turned into a SURT key."""

    def __init__(self, uri, reason):
        super().__init__("cannot canonicalize %r: %s" % (uri, reason))
        self.uri = uri
        self.reason = reason


class UriIdCollisionWarning(UserWarning):
    pass


def _looks_like_surt(text):
    paren = text.find(")")
    if paren < 0:
        return False
    slash = text.find("/")
    return slash < 0 or paren < slash


def _sorted_query(query):
    if not query:
        return ""
    params = [p for p in query.split("&") if p]
    params.sort(key=lambda p: p.split("=", 1)[0])
    return "&".join(params)


def _finish(host_labels, port, path, query):
    labels = [l for l in host_labels if l]
    if not labels:
        raise CanonicalizationError(".".join(host_labels), "empty host")
    if len(labels) > 1 and _WWW_LABEL.match(labels[0]):
        labels = labels[1:]
    host = ",".join(reversed(labels))
    if port and port not in _DEFAULT_PORTS:
        host += ":" + port
    path = path or "/"
    if not path.startswith("/"):
        path = "/" + path
    key = host + ")" + path
    query = _sorted_query(query)
    if query:
        key += "?" + query
    return key.lower()


def canonicalize(uri: str) -> str:
    """Return the SURT key of `uri`.

    >>> canonicalize("http://www1.example.org/foo.html")
    'org,example)/foo.html'
    >>> canonicalize("https://Example.ORG:443/a?b=2&a=1#frag")
    'org,example)/a?a=1&b=2'
    """
    if not isinstance(uri, str) or not uri.strip():
        raise CanonicalizationError(uri, "empty input")
    text = uri.strip()
    scheme = re.match(r"^([A-Za-z][A-Za-z0-9+.-]*):(?!\d)", text)
    if scheme and scheme.group(1).lower() not in ("http", "https"):
        raise CanonicalizationError(uri, "unsupported scheme %r" % scheme.group(1))

    if _looks_like_surt(text):
        hostpart, _, rest = text.partition(")")
        rest = rest.split("#", 1)[0]
        path, _, query = rest.partition("?")
        hostpart, _, port = hostpart.partition(":")
        labels = list(reversed(hostpart.split(",")))
        return _finish(labels, port, path, query)

    if text.startswith("//"):
        text = "http:" + text
    elif not re.match(r"^[A-Za-z][A-Za-z0-9+.-]*://", text):
        text = "http://" + text
    try:
        parts = urlsplit(text)
        port = parts.port
    except ValueError as exc:
        raise CanonicalizationError(uri, str(exc)) from None
    if parts.scheme.lower() not in ("http", "https"):
        raise CanonicalizationError(uri, "unsupported scheme %r" % parts.scheme)
    host = parts.hostname
    if not host:
        raise CanonicalizationError(uri, "missing host")
    if any(c.isspace() for c in host):
        raise CanonicalizationError(uri, "whitespace in host")
    labels = host.rstrip(".").split(".")
    return _finish(labels, str(port) if port is not None else "",
                   parts.path, parts.query)


def render(key: str) -> str:
    """Turn a SURT key back into a plain http URI."""
    hostpart, _, rest = key.partition(")")
    hostpart, _, port = hostpart.partition(":")
    host = ".".join(reversed(hostpart.split(",")))
    if port:
        host += ":" + port
    return "http://" + host + (rest or "/")


@lru_cache(maxsize=1 << 16)
def fnv1a_128(data: bytes) -> int:
    h = FNV128_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV128_PRIME) & _MASK128
    return h


def simhash128(text: str) -> int:
    """SimHash over byte 4-grams with FNV-1a-128 as the feature hash."""
    raw = text.encode("utf-8")
    if len(raw) < 4:
        grams = [raw]
    else:
        grams = [raw[i:i + 4] for i in range(len(raw) - 3)]
    buf = b"".join(fnv1a_128(g).to_bytes(16, "little") for g in grams)
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8).reshape(-1, 16),
                         axis=1, bitorder="little")
    # vote > 0  <=>  set-count > clear-count
    winners = 2 * bits.sum(axis=0, dtype=np.int64) > len(grams)
    return int.from_bytes(np.packbits(winners, bitorder="little").tobytes(), "little")


@dataclass(frozen=True, order=True)
class UriId:
    bits: int

    def __post_init__(self):
        if not 0 <= self.bits <= _MASK128:
            raise ValueError("UriId out of 128-bit range")

    @property
    def hex(self):
        return "%032x" % self.bits

    @classmethod
    def from_hex(cls, text):
        return cls(int(text, 16))

    def __str__(self):
        return self.hex


def uri_id(key: str) -> UriId:
    """128-bit id of an already canonical SURT key."""
    return UriId(simhash128(key))


def id_for(uri: str) -> UriId:
    return uri_id(canonicalize(uri))


def read_golden(path):
    """Read a ``SURT<TAB>hex`` golden-vector file."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line:
                key, hexid = line.split("\t")
                pairs.append((key, hexid))
    return pairs


def write_golden(path, keys):
    with open(path, "w", encoding="utf-8") as fh:
        for key in keys:
            fh.write("%s\t%s\n" % (key, uri_id(key).hex))


@dataclass
class IdTable:
    """In-memory id -> (SURT, representative URI) table.

    The SURT stored for an id never changes; the representative URI is
    last-write-wins. A second SURT under the same id is a collision: it
    raises a warning and lands in :attr:`collisions`.
    """

    hash_fn: Callable[[str], UriId] = uri_id
    _rows: dict = field(default_factory=dict)
    collisions: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def put(self, key: str, original_uri: str) -> UriId:
        ident = self.hash_fn(key)
        with self._lock:
            row = self._rows.get(ident)
            if row is None or row[0] == key:
                self._rows[ident] = (key, original_uri)
                return ident
            self.collisions[(ident, key)] = original_uri
        logger.warning("uri id collision %s: %r vs %r", ident.hex, row[0], key)
        warnings.warn("uri id %s already maps to %r, not %r" % (ident.hex, row[0], key),
                      UriIdCollisionWarning, stacklevel=2)
        return ident

    def get(self, ident: UriId):
        try:
            return self._rows[ident]
        except KeyError:
            raise KeyError("unknown uri id %s" % ident.hex) from None

    def __len__(self):
        return len(self._rows)

    def __contains__(self, ident):
        return ident in self._rows
