"""Content-centric temporal web graph store.

Mementos that share a content checksum share one content vertex and its
outlink set; observations map (source URI, datetime) onto a checksum. The
property view (URI -> URI edges carrying datetimes and anchor text) is
rebuilt from the join of the two.

Key families in the backing :class:`~twgraph.kvstore.KVStore`::

    ID\\0<id>                                   -> first SURT seen for the id
    ID\\0<id>\\0<surt>                           -> representative original URI
    COL\\0<id>\\0<surt>                          -> URI of a colliding SURT
    OBS\\0<id>\\0<surt>\\0<datetime>              -> checksum
    CNT\\0<checksum>                            -> ""  (content known)
    OUT\\0<checksum>\\0<id>\\0<surt>\\0<type>\\0<text> -> ""
    IN\\0<id>\\0<surt>\\0<src surt>\\0<datetime>\\0<type>\\0<text> -> source URI

Every id is followed by its SURT, so two URIs whose ids collide are never
merged.
"""
from __future__ import annotations

import logging
import re
import warnings
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .extract import LinkRecord, LinkType, _escape
from .kvstore import KVStore
from .uri import UriId, UriIdCollisionWarning, canonicalize, render, uri_id

logger = logging.getLogger(__name__)

SEP = "\x00"
_CONTROL = re.compile(r"[\x00-\x08\x0b\x0c\x0e-\x1f\x7f]")
_TS = re.compile(r"^\d{14}$")


class ConflictError(ValueError):
    """A (source, datetime) memento was re-inserted with different content."""


def clean_text(text):
    return _CONTROL.sub("", text)


def _key(*parts):
    return SEP.join(parts)


@dataclass(frozen=True)
class ObservationEntry:
    source_id: UriId
    source_surt: str
    datetime: str
    checksum: str

    def __post_init__(self):
        if not _TS.match(self.datetime):
            raise ValueError("datetime must be 14 digits: %r" % self.datetime)


@dataclass(frozen=True)
class Outlink:
    target_id: UriId
    target_surt: str
    link_type: LinkType
    text: str


@dataclass(frozen=True)
class TemporalEdge:
    source_id: UriId
    source_surt: str
    target_id: UriId
    target_surt: str
    link_type: LinkType
    text: str
    datetimes: tuple


@dataclass(frozen=True)
class InlinkEntry:
    target_id: UriId
    source_uri: str
    source_surt: str
    datetime: str
    link_type: LinkType
    text: str


@dataclass
class MaterializeResult:
    written: int
    dangling: list  # checksums referenced by observations but never loaded


def _in_range(ts, start, end):
    return (start is None or ts >= start) and (end is None or ts <= end)


class GraphStore:
    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self.kv = KVStore(self.path / "graph.log" if self.path is not None else None)
        self.collisions = []

    @classmethod
    def memory(cls):
        return cls(None)

    # -- uri table -----------------------------------------------------

    def put_uri(self, original_uri, key=None):
        """Register a URI; returns ``(id, surt)``."""
        key = key or canonicalize(original_uri)
        ident = uri_id(key)
        h = ident.hex
        first = self.kv.get(_key("ID", h))
        if first is None:
            self.kv.put(_key("ID", h), key)
        elif first != key and self.kv.put_if_absent(_key("COL", h, key), original_uri):
            self.collisions.append((ident, first, key))
            logger.warning("uri id collision %s: %r vs %r", h, first, key)
            warnings.warn("uri id %s already maps to %r, not %r" % (h, first, key),
                          UriIdCollisionWarning, stacklevel=2)
        self.kv.put(_key("ID", h, key), original_uri)
        return ident, key

    def get_uri(self, ident: UriId, key=None):
        """``(surt, representative uri)`` for `ident`; KeyError if unknown."""
        h = ident.hex
        key = key or self.kv.get(_key("ID", h))
        uri = self.kv.get(_key("ID", h, key)) if key is not None else None
        if uri is None:
            raise KeyError("unknown uri id %s" % h)
        return key, uri

    def lookup(self, uri):
        key = canonicalize(uri)
        return uri_id(key), key

    # -- writes --------------------------------------------------------

    def upsert_observation(self, entry: ObservationEntry):
        k = _key("OBS", entry.source_id.hex, entry.source_surt, entry.datetime)
        old = self.kv.get(k)
        if old is not None and old != entry.checksum:
            raise ConflictError("%s at %s already has content %s, not %s"
                                % (entry.source_surt, entry.datetime, old, entry.checksum))
        self.kv.put(k, entry.checksum)

    def observe(self, uri, datetime, checksum, key=None):
        ident, key = self.put_uri(uri, key)
        self.upsert_observation(ObservationEntry(ident, key, datetime, checksum))
        return ident

    def upsert_content(self, checksum, outlinks: Iterable[Outlink] = ()):
        self.kv.put(_key("CNT", checksum))
        for o in outlinks:
            self.kv.put(_key("OUT", checksum, o.target_id.hex, o.target_surt,
                             o.link_type.value, clean_text(o.text)))

    def add_link_records(self, records: Iterable[LinkRecord], pages: Iterable[str] = ()):
        """Load extractor output; `pages` marks checksums seen with no links."""
        by_doc = defaultdict(list)
        for rec in records:
            ident, key = self.put_uri(rec.outlink_uri)
            by_doc[rec.doc_checksum].append(Outlink(ident, key, rec.link_type, rec.text))
        for checksum in pages:
            by_doc.setdefault(checksum, [])
        for checksum, outs in by_doc.items():
            self.upsert_content(checksum, outs)

    def add_observations(self, observations):
        """Load an observation log (``cdx.Observation`` rows)."""
        for o in observations:
            uri = o.original_uri or None
            key = canonicalize(uri or o.urlkey)
            self.observe(uri or render(key), o.timestamp, o.digest, key)

    def materialize_inlinks(self) -> MaterializeResult:
        """Invert observations x content into the IN family; rerunnable."""
        written = 0
        dangling = set()
        outs_cache = {}
        for key, checksum in self.kv.scan("OBS" + SEP):
            _, src_hex, src_surt, ts = key.split(SEP)
            if checksum not in outs_cache:
                if _key("CNT", checksum) not in self.kv:
                    dangling.add(checksum)
                if len(outs_cache) > 4096:
                    outs_cache.clear()
                outs_cache[checksum] = list(self._content(checksum))
            outs = outs_cache[checksum]
            if not outs:
                continue
            src_uri = self.kv.get(_key("ID", src_hex, src_surt)) or render(src_surt)
            for o in outs:
                k = _key("IN", o.target_id.hex, o.target_surt, src_surt, ts,
                         o.link_type.value, o.text)
                fresh = k not in self.kv
                self.kv.put(k, src_uri)
                written += fresh
        self.kv.flush()
        if dangling:
            logger.warning("%d observed checksums have no content vertex", len(dangling))
        return MaterializeResult(written, sorted(dangling))

    def flush(self):
        self.kv.flush()

    def close(self):
        self.kv.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- reads ---------------------------------------------------------

    def _content(self, checksum):
        for key, _ in self.kv.scan(_key("OUT", checksum) + SEP):
            _, _, hexid, surt, ltype, text = key.split(SEP)
            yield Outlink(UriId.from_hex(hexid), surt, LinkType(ltype), text)

    def content(self, checksum):
        return list(self._content(checksum))

    def has_content(self, checksum):
        return _key("CNT", checksum) in self.kv

    def observations(self, source_id: Optional[UriId] = None, source_surt=None):
        prefix = "OBS" + SEP
        if source_id is not None:
            prefix += source_id.hex + SEP
            if source_surt is not None:
                prefix += source_surt + SEP
        for key, checksum in self.kv.scan(prefix):
            _, h, surt, ts = key.split(SEP)
            yield ObservationEntry(UriId.from_hex(h), surt, ts, checksum)

    def get_outlinks(self, source_id: UriId, start=None, end=None, source_surt=None):
        """Property-view edges leaving `source_id`, datetimes trimmed to the range."""
        groups = defaultdict(set)
        for obs in self.observations(source_id, source_surt):
            if not _in_range(obs.datetime, start, end):
                continue
            for o in self._content(obs.checksum):
                groups[(obs.source_surt, o.target_surt, o.target_id, o.link_type, o.text)].add(obs.datetime)
        edges = [TemporalEdge(source_id, s_surt, t_id, t_surt, lt, text, tuple(sorted(ts)))
                 for (s_surt, t_surt, t_id, lt, text), ts in groups.items()]
        edges.sort(key=lambda e: (e.target_surt, e.datetimes[0], e.link_type.value, e.text,
                                  e.source_surt))
        return edges

    def get_inlinks(self, target_id: UriId, start=None, end=None, target_surt=None):
        prefix = _key("IN", target_id.hex) + SEP
        if target_surt is not None:
            prefix += target_surt + SEP
        out = []
        for key, src_uri in self.kv.scan(prefix):
            _, _, _, src_surt, ts, ltype, text = key.split(SEP)
            if _in_range(ts, start, end):
                out.append(InlinkEntry(target_id, src_uri, src_surt, ts, LinkType(ltype), text))
        out.sort(key=lambda e: (e.source_surt, e.datetime, e.link_type.value, e.text))
        return out

    def outlinks_for(self, uri, start=None, end=None):
        ident, key = self.lookup(uri)
        return self.get_outlinks(ident, start, end, key)

    def inlinks_for(self, uri, start=None, end=None):
        ident, key = self.lookup(uri)
        return self.get_inlinks(ident, start, end, key)

    def iter_quads(self):
        """Sorted ``(source_surt, target_surt, datetime, type, text)`` tuples."""
        quads = set()
        cache = {}
        for obs in self.observations():
            outs = cache.get(obs.checksum)
            if outs is None:
                outs = cache[obs.checksum] = self.content(obs.checksum)
            for o in outs:
                quads.add((obs.source_surt, o.target_surt, obs.datetime, o.link_type.value, o.text))
        return sorted(quads)

    def export_quads(self, path):
        n = 0
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for q in self.iter_quads():
                fh.write("\t".join(q[:4] + (_escape(q[4]),)) + "\n")
                n += 1
        return n

    def stats(self):
        return {
            "uris": sum(1 for k, _ in self.kv.scan("ID" + SEP) if k.count(SEP) == 2),
            "observations": self.kv.count("OBS" + SEP),
            "content_vertices": self.kv.count("CNT" + SEP),
            "outlink_triples": self.kv.count("OUT" + SEP),
            "inlink_entries": self.kv.count("IN" + SEP),
            "collisions": self.kv.count("COL" + SEP),
        }
