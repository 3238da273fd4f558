"""CDX crawl-index parsing and the include/exclude filter chain."""
from __future__ import annotations

import gzip
import logging
import re
import time
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import PurePosixPath
from typing import Iterable, Optional
from urllib.parse import urlsplit

logger = logging.getLogger(__name__)

_BASE32 = re.compile(r"^[A-Z2-7]{32}$")

# CDX header letters -> CdxRecord attribute
_LETTERS = {
    "N": "urlkey", "A": "urlkey", "b": "timestamp", "a": "original_uri",
    "m": "mimetype", "s": "status", "k": "digest", "r": "redirect",
    "M": "meta", "S": "length", "V": "offset", "v": "offset", "g": "warc_file",
}
LAYOUT_9 = "N b a m s k r V g".split()
LAYOUT_10 = "N b a m s k r M V g".split()
LAYOUT_11 = "N b a m s k r M S V g".split()
_BY_COUNT = {9: LAYOUT_9, 10: LAYOUT_10, 11: LAYOUT_11}


class CdxFormatError(ValueError):
    pass


@dataclass(frozen=True)
class CdxRecord:
    urlkey: str
    timestamp: str
    original_uri: str
    mimetype: str
    status: str
    digest: str
    redirect: str
    meta: str
    offset: int
    warc_file: str
    length: Optional[int] = None

    def __post_init__(self):
        try:
            datetime.strptime(self.timestamp, "%Y%m%d%H%M%S")
        except (TypeError, ValueError):
            raise CdxFormatError("bad timestamp %r" % (self.timestamp,)) from None
        if len(self.timestamp) != 14:
            raise CdxFormatError("timestamp must have 14 digits: %r" % self.timestamp)
        if self.offset < 0:
            raise CdxFormatError("negative offset %d" % self.offset)
        if self.digest != "-" and not _BASE32.match(self.digest):
            raise CdxFormatError("bad digest %r" % self.digest)

    def to_line(self, layout=LAYOUT_10):
        values = []
        for letter in layout:
            v = getattr(self, _LETTERS[letter])
            values.append("-" if v is None else str(v))
        return " ".join(values)


def _record_from_fields(fields, layout):
    values = {}
    for letter, raw in zip(layout, fields):
        attr = _LETTERS.get(letter)
        if attr is not None:
            values[attr] = raw
    missing = {"urlkey", "timestamp", "original_uri", "mimetype", "status",
               "digest", "offset", "warc_file"} - values.keys()
    if missing:
        raise CdxFormatError("layout lacks fields: %s" % ", ".join(sorted(missing)))
    digest = values["digest"]
    if digest.lower().startswith("sha1:"):
        digest = digest[5:]
    try:
        offset = int(values["offset"])
    except ValueError:
        raise CdxFormatError("bad offset %r" % values["offset"]) from None
    length = values.get("length")
    return CdxRecord(
        urlkey=values["urlkey"],
        timestamp=values["timestamp"],
        original_uri=values["original_uri"],
        mimetype=values["mimetype"],
        status=values["status"],
        digest=digest,
        redirect=values.get("redirect", "-"),
        meta=values.get("meta", "-"),
        offset=offset,
        warc_file=values["warc_file"],
        length=int(length) if length and length.isdigit() else None,
    )


class CdxReader:
    """Iterate CdxRecords from a text or binary stream.

    Malformed lines are skipped; ``skipped`` holds ``(line_no, reason)``.
    A `` CDX ...`` header fixes the field layout for the rest of the stream,
    otherwise the layout is picked per line from the field count.
    """

    def __init__(self, stream):
        self._stream = stream
        self.layout = None
        self.skipped = []

    def __iter__(self):
        for line_no, line in enumerate(self._stream, 1):
            if isinstance(line, bytes):
                line = line.decode("utf-8", "replace")
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            if line.startswith(" CDX") or line.startswith("CDX "):
                self.layout = line.split()[1:]
                continue
            fields = line.split(" ")
            fields = [f for f in fields if f != ""]
            layout = self.layout or _BY_COUNT.get(len(fields))
            if len(fields) < 9:
                self.skipped.append((line_no, "only %d fields" % len(fields)))
                continue
            if layout is None or len(fields) != len(layout):
                self.skipped.append((line_no, "%d fields do not fit layout" % len(fields)))
                continue
            try:
                yield _record_from_fields(fields, layout)
            except CdxFormatError as exc:
                self.skipped.append((line_no, str(exc)))


def parse_cdx_stream(stream) -> CdxReader:
    return CdxReader(stream)


def open_cdx(path):
    """Open a plain or gzip-compressed CDX file as text."""
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"\x1f\x8b":
        return gzip.open(path, "rt", encoding="utf-8", errors="replace")
    return open(path, encoding="utf-8", errors="replace")


def read_cdx_files(paths):
    """All records from `paths`, in order, plus the combined skip list."""
    records, skipped = [], []
    for path in paths:
        with open_cdx(path) as fh:
            reader = CdxReader(fh)
            records.extend(reader)
            skipped.extend((str(path), n, why) for n, why in reader.skipped)
    return records, skipped


class Mode(str, Enum):
    INCLUDE = "INCLUDE"
    EXCLUDE = "EXCLUDE"


class Predicate(str, Enum):
    STATUS_EQUALS = "status-equals"
    MIMETYPE_PREFIX = "mimetype-prefix-in-set"
    EXTENSION = "extension-in-set"
    DUPLICATE_DIGEST = "duplicate-digest"


def _path_extension(uri):
    try:
        path = urlsplit(uri).path
    except ValueError:
        path = uri.split("?", 1)[0].split("#", 1)[0]
    if path.endswith("/"):
        return ""
    suffix = PurePosixPath(path).suffix
    return suffix[1:].lower() if suffix else ""


@dataclass(frozen=True)
class FilterRule:
    mode: Mode
    predicate: Predicate
    params: frozenset = frozenset()
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "predicate", Predicate(self.predicate))
        object.__setattr__(self, "params", frozenset(self.params))
        if self.predicate is not Predicate.DUPLICATE_DIGEST and not self.params:
            raise ValueError("%s rule needs parameters" % self.predicate.value)
        if self.predicate is Predicate.DUPLICATE_DIGEST and self.mode is not Mode.EXCLUDE:
            raise ValueError("duplicate-digest rule must be EXCLUDE")

    @property
    def stateless(self):
        return self.predicate is not Predicate.DUPLICATE_DIGEST

    def matches(self, rec: CdxRecord) -> bool:
        p = self.predicate
        if p is Predicate.STATUS_EQUALS:
            return rec.status in self.params or (
                "2xx" in self.params and len(rec.status) == 3 and rec.status.startswith("2"))
        if p is Predicate.MIMETYPE_PREFIX:
            mime = rec.mimetype.lower()
            return any(mime.startswith(prefix) for prefix in self.params)
        if p is Predicate.EXTENSION:
            return _path_extension(rec.original_uri) in self.params
        raise TypeError("duplicate-digest is not a per-record predicate")

    def keep(self, rec):
        return self.matches(rec) == (self.mode is Mode.INCLUDE)

    def describe(self):
        if self.label:
            return self.label
        params = ",".join(sorted(self.params))
        return "%s %s %s" % (self.mode.value, self.predicate.value, params)


def default_rule_chain(success_2xx=False):
    """The five standard rules, in reduction-table order."""
    return [
        FilterRule(Mode.INCLUDE, Predicate.STATUS_EQUALS,
                   {"200", "2xx"} if success_2xx else {"200"}, "HTTP status 200"),
        FilterRule(Mode.EXCLUDE, Predicate.MIMETYPE_PREFIX,
                   {"image/", "text/css", "application/javascript",
                    "text/javascript", "application/x-javascript"},
                   "images, JS and CSS"),
        FilterRule(Mode.INCLUDE, Predicate.MIMETYPE_PREFIX, {"text/"}, "text/* only"),
        FilterRule(Mode.EXCLUDE, Predicate.EXTENSION,
                   {"jpg", "jpeg", "png", "gif", "bmp", "ico", "tif", "tiff",
                    "css", "js", "swf"},
                   "image/resource extensions"),
        FilterRule(Mode.EXCLUDE, Predicate.DUPLICATE_DIGEST, label="duplicate checksum"),
    ]


def dedupe_by_digest(records):
    """Keep the earliest-timestamp record per digest; input order breaks ties.

    Records without a digest are always kept.
    """
    winners = {}
    for pos, rec in enumerate(records):
        if rec.digest == "-":
            continue
        best = winners.get(rec.digest)
        if best is None or rec.timestamp < records[best].timestamp:
            winners[rec.digest] = pos
    keep = set(winners.values())
    return [r for pos, r in enumerate(records) if r.digest == "-" or pos in keep]


@dataclass
class RuleStat:
    rule: str
    surviving: int
    seconds: float


@dataclass
class FilterReport:
    input_count: int = 0
    output_count: int = 0
    rules: list = field(default_factory=list)

    def table(self):
        lines = ["%-40s %12s %8s %10s" % ("rule", "surviving", "share", "seconds")]
        for st in self.rules:
            share = st.surviving / self.input_count if self.input_count else 0.0
            lines.append("%-40s %12d %7.1f%% %10.4f" % (st.rule, st.surviving, 100 * share, st.seconds))
        share = self.output_count / self.input_count if self.input_count else 0.0
        lines.append("%-40s %12d %7.1f%%" % ("all rules", self.output_count, 100 * share))
        return "\n".join(lines)

    def key_values(self):
        lines = ["input_count=%d" % self.input_count, "output_count=%d" % self.output_count]
        for i, st in enumerate(self.rules):
            lines.append("rule.%d.name=%s" % (i, st.rule))
            lines.append("rule.%d.surviving=%d" % (i, st.surviving))
            lines.append("rule.%d.seconds=%.6f" % (i, st.seconds))
        return "\n".join(lines)


@dataclass(frozen=True)
class Observation:
    urlkey: str
    timestamp: str
    digest: str
    original_uri: str = ""


def apply_filters(records: Iterable[CdxRecord], rule_chain, success_statuses=("200",)):
    """Run `rule_chain` over `records`.

    Returns ``(extraction_list, observation_log, report)``. The observation
    log lists every successful memento, duplicates included, so that all
    capture times of a content checksum can be rebuilt later.
    """
    if not rule_chain:
        raise ValueError("rule chain is empty")
    records = list(records)
    report = FilterReport(input_count=len(records))
    observations = [Observation(r.urlkey, r.timestamp, r.digest, r.original_uri)
                    for r in records if r.status in success_statuses]

    survivors = records
    for rule in rule_chain:
        t0 = time.perf_counter()
        if rule.stateless:
            survivors = [r for r in survivors if rule.keep(r)]
        else:
            survivors = dedupe_by_digest(survivors)
        report.rules.append(RuleStat(rule.describe(), len(survivors), time.perf_counter() - t0))
    report.output_count = len(survivors)
    logger.info("filtered %d -> %d records", report.input_count, report.output_count)
    return survivors, observations, report


def write_extraction_list(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write("\t".join((r.urlkey, r.timestamp, r.original_uri, r.digest,
                                str(r.offset), r.warc_file)) + "\n")


def read_extraction_list(path):
    """Read back an extraction list; returns lightweight CdxRecords."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            urlkey, ts, uri, digest, offset, warc = line.rstrip("\n").split("\t")
            out.append(CdxRecord(urlkey, ts, uri, "text/html", "200", digest, "-", "-",
                                 int(offset), warc))
    return out


def write_observation_log(path, observations):
    with open(path, "w", encoding="utf-8") as fh:
        for o in observations:
            fh.write("\t".join((o.urlkey, o.timestamp, o.digest, o.original_uri)) + "\n")


def read_observation_log(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 3:
                continue
            out.append(Observation(*parts[:4]))
    return out


def load_rule_chain(path):
    """Read a rule chain from a text file, one rule per line::

        INCLUDE status-equals 200
        EXCLUDE mimetype-prefix-in-set image/ text/css
        EXCLUDE duplicate-digest
    """
    chain = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 2:
                raise ValueError("%s:%d: expected MODE PREDICATE [PARAMS...]" % (path, line_no))
            chain.append(FilterRule(parts[0].upper(), parts[1], frozenset(parts[2:])))
    if not chain:
        raise ValueError("%s: no rules" % path)
    return chain
