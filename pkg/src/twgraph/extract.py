"""Outlink extraction from archived HTML and WARC-aware work partitioning."""
from __future__ import annotations

import heapq
import logging
import re
import time
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from html.parser import HTMLParser
from pathlib import Path
from typing import Optional
from urllib.parse import urldefrag, urljoin, urlsplit

from .uri import CanonicalizationError, UriId, canonicalize, uri_id
from .warc import MementoPayload, WarcError, WarcFile, sha1_base32

logger = logging.getLogger(__name__)

USER_AGENT = "twgraph-link-extractor/0.1 (+temporal web graph builder)"
_TS = re.compile(r"^\d{14}$")


class LinkType(str, Enum):
    HREF = "HREF"
    IMAGE = "IMAGE"


def _escape(text):
    return (text.replace("\\", "\\\\").replace("\t", "\\t")
            .replace("\n", "\\n").replace("\r", "\\r"))


_UNESCAPES = {"\\\\": "\\", "\\t": "\t", "\\n": "\n", "\\r": "\r"}


def _unescape(text):
    return re.sub(r"\\[\\tnr]", lambda m: _UNESCAPES[m.group(0)], text)


@dataclass(frozen=True, order=True)
class LinkRecord:
    doc_checksum: str
    outlink_uri: str
    outlink_id: UriId
    link_type: LinkType
    text: str

    @classmethod
    def create(cls, doc_checksum, outlink_uri, link_type, text=""):
        ident = uri_id(canonicalize(outlink_uri))
        return cls(doc_checksum, outlink_uri, ident, LinkType(link_type), text)

    def to_tsv(self):
        return "\t".join((self.doc_checksum, self.outlink_uri, self.outlink_id.hex,
                          self.link_type.value, _escape(self.text)))

    @classmethod
    def from_tsv(cls, line):
        checksum, uri, hexid, ltype, text = line.rstrip("\n").split("\t")
        return cls(checksum, uri, UriId.from_hex(hexid), LinkType(ltype), _unescape(text))


class _LinkParser(HTMLParser):
    _INVISIBLE = {"script", "style", "noscript", "template"}

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.base = None
        self.links = []  # (href, type, text)
        self._anchor = None  # [href, text parts]
        self._hidden = 0

    def _close_anchor(self):
        if self._anchor is not None:
            href, parts = self._anchor
            text = " ".join("".join(parts).split())
            self.links.append((href, LinkType.HREF, text))
            self._anchor = None

    def handle_starttag(self, tag, attrs):
        attrs = {k: (v or "") for k, v in attrs}
        if tag in self._INVISIBLE:
            self._hidden += 1
        elif tag == "base" and self.base is None and attrs.get("href"):
            self.base = attrs["href"]
        elif tag == "a":
            self._close_anchor()
            if "href" in attrs:
                self._anchor = [attrs["href"], []]
        elif tag == "img" and attrs.get("src"):
            alt = " ".join(attrs.get("alt", "").split())
            self.links.append((attrs["src"], LinkType.IMAGE, alt))
            if self._anchor is not None:
                self._anchor[1].append(" ")

    def handle_startendtag(self, tag, attrs):
        if tag in self._INVISIBLE:
            return
        self.handle_starttag(tag, attrs)

    def handle_endtag(self, tag):
        if tag in self._INVISIBLE:
            self._hidden = max(0, self._hidden - 1)
        elif tag == "a":
            self._close_anchor()
        elif self._anchor is not None and tag in ("p", "div", "br", "li", "td", "span"):
            self._anchor[1].append(" ")

    def handle_data(self, data):
        if self._anchor is not None and not self._hidden:
            self._anchor[1].append(data)

    def close(self):
        super().close()
        self._close_anchor()


def _decode(body, content_type=""):
    if isinstance(body, str):
        return body
    m = re.search(r"charset=([\w.-]+)", content_type or "", re.I)
    if m is None:
        m = re.search(rb"<meta[^>]+charset=[\"']?([\w.-]+)", body[:4096], re.I)
        charset = m.group(1).decode("ascii") if m else "utf-8"
    else:
        charset = m.group(1)
    try:
        return body.decode(charset, "replace")
    except LookupError:
        return body.decode("utf-8", "replace")


def replay_pattern(replay_root):
    """Regex matching archive-rewritten URLs under `replay_root`.

    ``<root>/<14-digit timestamp>[xx_]/<original>``; the scheme/host part is
    optional so root-relative rewrites match too.
    """
    parts = urlsplit(replay_root.rstrip("/"))
    if parts.scheme not in ("http", "https") or not parts.netloc:
        raise ValueError("replay root must be an absolute http(s) URL: %r" % replay_root)
    host = re.escape(parts.netloc)
    path = re.escape(parts.path.rstrip("/"))
    return re.compile(r"^(?:(?:https?:)?//%s)?%s/(\d{14})(?:[a-z]{2}_)?/(.+)$" % (host, path),
                      re.I)


def unrewrite(href, pattern):
    m = pattern.match(href)
    if not m:
        return href
    original = m.group(2)
    original = re.sub(r"^(https?):/+", r"\1://", original, flags=re.I)
    if not re.match(r"^https?://", original, re.I):
        original = "http://" + original.lstrip("/")
    return original


@dataclass
class Extractor:
    """HTML -> LinkRecords, with counters for everything skipped."""

    replay_root: Optional[str] = None
    stats: Counter = field(default_factory=Counter)

    def __post_init__(self):
        self._pattern = replay_pattern(self.replay_root) if self.replay_root else None

    def _clean(self, href):
        href = re.sub(r"[\t\n\r]", "", href).strip().replace(" ", "%20")
        if self._pattern is not None:
            href = unrewrite(href, self._pattern)
        return href

    def extract(self, page, page_uri, page_checksum=None):
        content_type = ""
        if isinstance(page, MementoPayload):
            mime = page.mimetype
            if "html" not in mime and mime not in ("unk", ""):
                self.stats["non_html"] += 1
                return []
            content_type = page.content_type
            body = page.body
        else:
            body = page
        if page_checksum is None:
            raw = body if isinstance(body, bytes) else body.encode("utf-8")
            page_checksum = sha1_base32(raw)

        parser = _LinkParser()
        try:
            parser.feed(_decode(body, content_type))
            parser.close()
        except Exception:  # html.parser is tolerant; guard against the odd assertion
            logger.warning("html parse failed for %s", page_uri, exc_info=True)
            self.stats["parse_errors"] += 1

        base = page_uri
        if parser.base:
            base = urljoin(page_uri, self._clean(parser.base))

        out = []
        for href, ltype, text in parser.links:
            href = self._clean(href)
            if not href or href.startswith("#"):
                self.stats["empty_or_fragment"] += 1
                continue
            target, _ = urldefrag(urljoin(base, href))
            if self._pattern is not None:
                target = unrewrite(target, self._pattern)
            try:
                ident = uri_id(canonicalize(target))
            except CanonicalizationError:
                self.stats["unsupported_uri"] += 1
                continue
            out.append(LinkRecord(page_checksum, target, ident, ltype, text))
        self.stats["pages"] += 1
        self.stats["links"] += len(out)
        return out


def extract_links(page, page_uri, page_checksum=None, replay_root=None):
    """Outlinks (``<a href>`` and ``<img src>``) of one archived page."""
    return Extractor(replay_root).extract(page, page_uri, page_checksum)


@dataclass
class Partition:
    index: int
    records: list = field(default_factory=list)

    @property
    def warc_files(self):
        return sorted({r.warc_file for r in self.records})


@dataclass
class PartitionPlan:
    partitions: list
    assignment: dict  # warc_file -> partition index

    def loads(self):
        return [len(p.records) for p in self.partitions]


def plan_partitions(extraction_list, k: int) -> PartitionPlan:
    """Split records into `k` partitions so each WARC file has exactly one owner.

    File groups go, largest first (name breaks ties), to the partition with
    the fewest records so far (lowest index breaks ties).
    """
    if k < 1:
        raise ValueError("need at least one partition")
    groups = defaultdict(list)
    for rec in extraction_list:
        groups[rec.warc_file].append(rec)
    partitions = [Partition(i) for i in range(k)]
    heap = [(0, i) for i in range(k)]
    assignment = {}
    for name in sorted(groups, key=lambda n: (-len(groups[n]), n)):
        load, idx = heapq.heappop(heap)
        recs = sorted(groups[name], key=lambda r: r.offset)
        partitions[idx].records.extend(recs)
        assignment[name] = idx
        heapq.heappush(heap, (load + len(recs), idx))
    for p in partitions:
        p.records.sort(key=lambda r: (r.warc_file, r.offset))
    return PartitionPlan(partitions, assignment)


class SourceKind(str, Enum):
    WARC_CORPUS = "warc"
    REPLAY_ENDPOINT = "replay"


@dataclass
class ExtractionSource:
    kind: SourceKind
    location: str  # corpus root directory or replay base URL
    politeness_ms: int = 0
    timeout: float = 30.0
    retries: int = 3
    user_agent: str = USER_AGENT

    def __post_init__(self):
        self.kind = SourceKind(self.kind)
        if self.kind is SourceKind.REPLAY_ENDPOINT:
            replay_pattern(self.location)  # validates
            self.location = self.location.rstrip("/")
        if self.politeness_ms < 0:
            raise ValueError("politeness delay must be >= 0")


@dataclass
class LinkBatch:
    partition: int
    records: list
    pages: list  # checksums of pages processed, links or not


@dataclass
class PartitionStats:
    index: int
    records: int = 0
    pages: int = 0
    links: int = 0
    seconds: float = 0.0
    failures: list = field(default_factory=list)  # (urlkey, timestamp, reason)
    errors: list = field(default_factory=list)  # partition-level: (warc_file, [urlkeys])


@dataclass
class ExtractionReport:
    partitions: list = field(default_factory=list)
    map_seconds: float = 0.0
    total_seconds: float = 0.0

    @property
    def records(self):
        return sum(p.records for p in self.partitions)

    @property
    def links(self):
        return sum(p.links for p in self.partitions)

    def key_values(self):
        lines = ["partitions=%d" % len(self.partitions), "records=%d" % self.records,
                 "links=%d" % self.links, "map_seconds=%.6f" % self.map_seconds,
                 "total_seconds=%.6f" % self.total_seconds]
        for p in self.partitions:
            lines.append("partition.%d.records=%d" % (p.index, p.records))
            lines.append("partition.%d.links=%d" % (p.index, p.links))
            lines.append("partition.%d.seconds=%.6f" % (p.index, p.seconds))
            lines.append("partition.%d.failures=%d" % (p.index, len(p.failures)))
            lines.append("partition.%d.errors=%d" % (p.index, len(p.errors)))
        return "\n".join(lines)


@dataclass
class ExtractionRun:
    batches: list
    report: ExtractionReport

    def link_records(self):
        return [r for b in self.batches for r in b.records]


def _checksum(rec, body):
    return rec.digest if rec.digest and rec.digest != "-" else sha1_base32(body)


def _run_warc_partition(source, part, stats):
    extractor = Extractor()
    links, pages = [], []
    by_file = defaultdict(list)
    for rec in part.records:
        by_file[rec.warc_file].append(rec)
    for name in sorted(by_file):
        recs = by_file[name]
        path = Path(source.location) / name
        if not path.is_file():
            stats.errors.append((name, [r.urlkey for r in recs]))
            logger.error("partition %d: missing WARC %s (%d records)", part.index, path, len(recs))
            continue
        with WarcFile(path) as wf:
            for rec in recs:
                try:
                    payload = wf.read(rec.offset)
                except WarcError as exc:
                    stats.failures.append((rec.urlkey, rec.timestamp, str(exc)))
                    continue
                checksum = _checksum(rec, payload.body)
                links.extend(extractor.extract(payload, rec.original_uri, checksum))
                pages.append(checksum)
    return links, pages


def _run_replay_partition(source, part, stats):
    import requests

    extractor = Extractor(replay_root=source.location)
    session = requests.Session()
    session.max_redirects = 5
    session.headers["User-Agent"] = source.user_agent
    links, pages = [], []
    delay = source.politeness_ms / 1000.0
    first = True
    for rec in part.records:
        url = "%s/%s/%s" % (source.location, rec.timestamp, rec.original_uri)
        body, reason = None, None
        for attempt in range(1 + source.retries):
            if not first and delay:
                time.sleep(delay)
            first = False
            try:
                resp = session.get(url, timeout=source.timeout)
            except requests.TooManyRedirects:
                reason = "too many redirects"
                break
            except requests.RequestException as exc:
                reason = "%s: %s" % (type(exc).__name__, exc)
                continue
            if resp.status_code >= 500:
                reason = "HTTP %d" % resp.status_code
                continue
            if resp.status_code != 200:
                reason = "HTTP %d" % resp.status_code
                break
            body = resp.content
            break
        if body is None:
            stats.failures.append((rec.urlkey, rec.timestamp, reason))
            continue
        checksum = _checksum(rec, body)
        links.extend(extractor.extract(body, rec.original_uri, checksum))
        pages.append(checksum)
    session.close()
    return links, pages


def _run_partition(source, part):
    stats = PartitionStats(part.index, records=len(part.records))
    t0 = time.perf_counter()
    if source.kind is SourceKind.WARC_CORPUS:
        links, pages = _run_warc_partition(source, part, stats)
    else:
        links, pages = _run_replay_partition(source, part, stats)
    stats.seconds = time.perf_counter() - t0
    stats.pages = len(pages)
    stats.links = len(links)
    return LinkBatch(part.index, links, pages), stats


def run_extraction(source: ExtractionSource, plan: PartitionPlan, workers=None) -> ExtractionRun:
    """Extract every partition of `plan`, one worker per partition."""
    t0 = time.perf_counter()
    parts = [p for p in plan.partitions if p.records]
    report = ExtractionReport()
    batches = []
    if parts:
        n = workers or len(parts)
        with ThreadPoolExecutor(max_workers=n) as pool:
            for batch, stats in pool.map(lambda p: _run_partition(source, p), parts):
                batches.append(batch)
                report.partitions.append(stats)
    report.map_seconds = sum(p.seconds for p in report.partitions)
    report.total_seconds = time.perf_counter() - t0
    return ExtractionRun(batches, report)


def write_link_batches(path, batches):
    with open(path, "w", encoding="utf-8") as fh:
        for batch in batches:
            for rec in batch.records:
                fh.write(rec.to_tsv() + "\n")


def read_link_records(path):
    with open(path, encoding="utf-8") as fh:
        return [LinkRecord.from_tsv(line) for line in fh if line.strip()]
