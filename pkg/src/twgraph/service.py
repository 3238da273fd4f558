"""HTTP access to the temporal link structure of a URI.

``GET /linkQuery?uri=<uri>[&from=<ts>&to=<ts>&format=rdf|json]`` answers
with RDF/XML in the ``twg`` vocabulary (or the same model as JSON).
Responses from several stores can be merged member by member.
"""
from __future__ import annotations

import json
import logging
import re
import xml.etree.ElementTree as ET
from collections import defaultdict
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from .uri import CanonicalizationError, canonicalize

logger = logging.getLogger(__name__)

RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
TWG_NS = "http://www.mementoweb.org/TemporalWebGraph/"
ET.register_namespace("rdf", RDF_NS)
ET.register_namespace("twg", TWG_NS)

_R = "{%s}" % RDF_NS
_T = "{%s}" % TWG_NS
_TS = re.compile(r"^\d{1,14}$")
# XML 1.0 cannot carry these; CR would not survive end-of-line normalization
_XML_ILLEGAL = re.compile("[\x00-\x08\x0b-\x1f\ufffe\uffff\ud800-\udfff]")


class AggregationError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Member:
    descriptor: str  # SURT for outlink targets, original URI for inlink sources
    link_type: str
    text: str
    timestamps: tuple

    def __post_init__(self):
        if not self.timestamps:
            raise ValueError("member %r has an empty timestamp bag" % self.descriptor)
        object.__setattr__(self, "timestamps", tuple(sorted(set(self.timestamps))))
        object.__setattr__(self, "text", _xml_text(self.text))
        object.__setattr__(self, "descriptor", _xml_text(self.descriptor))

    @property
    def ident(self):
        return (self.descriptor, self.link_type, self.text)


@dataclass(frozen=True)
class LinkStructureResponse:
    subject: str
    outlinks: tuple = ()
    inlinks: tuple = ()

    def __post_init__(self):
        # one member per (descriptor, type, text); repeated members pool their bags
        object.__setattr__(self, "outlinks", tuple(sorted(_merge_members(self.outlinks, ()))))
        object.__setattr__(self, "inlinks", tuple(sorted(_merge_members(self.inlinks, ()))))

    def to_dict(self):
        def dump(members):
            return [{"uri": m.descriptor, "type": m.link_type, "text": m.text,
                     "timestamps": list(m.timestamps)} for m in members]
        return {"uri": self.subject, "outlinks": dump(self.outlinks), "inlinks": dump(self.inlinks)}

    @classmethod
    def from_dict(cls, data):
        def load(rows):
            return [Member(r["uri"], r["type"], r["text"], tuple(r["timestamps"])) for r in rows]
        return cls(data["uri"], load(data["outlinks"]), load(data["inlinks"]))


def _group(members):
    bags = defaultdict(set)
    for descriptor, ltype, text, ts in members:
        bags[(descriptor, ltype, text)].add(ts)
    return [Member(d, lt, tx, tuple(ts)) for (d, lt, tx), ts in bags.items()]


def build_response(store, uri, start=None, end=None) -> LinkStructureResponse:
    """Collect the link structure of `uri` from `store`; unknown URIs give empties."""
    outs = [(e.target_surt, e.link_type.value.lower(), e.text, ts)
            for e in store.outlinks_for(uri, start, end) for ts in e.datetimes]
    ins = [(e.source_uri, e.link_type.value.lower(), e.text, e.datetime)
           for e in store.inlinks_for(uri, start, end)]
    return LinkStructureResponse(uri, _group(outs), _group(ins))


def _xml_text(text):
    return _XML_ILLEGAL.sub("", text)


def to_rdf_xml(resp: LinkStructureResponse) -> bytes:
    root = ET.Element(_R + "RDF")
    desc = ET.SubElement(root, _R + "Description", {_R + "about": _xml_text(resp.subject)})
    for tag, members in (("hasOutlinks", resp.outlinks), ("hasInlinks", resp.inlinks)):
        coll = ET.SubElement(desc, _T + tag, {_R + "parseType": "Collection"})
        for m in members:
            item = ET.SubElement(coll, _R + "Description", {_R + "about": _xml_text(m.descriptor)})
            ET.SubElement(item, _T + "type").text = m.link_type
            ET.SubElement(item, _T + "text").text = _xml_text(m.text)
            bag = ET.SubElement(ET.SubElement(item, _T + "timestamp"), _R + "Bag")
            for ts in m.timestamps:
                ET.SubElement(bag, _R + "li").text = ts
    ET.indent(root, space=" ")
    return ET.tostring(root, encoding="UTF-8", xml_declaration=True)


def from_rdf_xml(data) -> LinkStructureResponse:
    root = ET.fromstring(data)
    if root.tag != _R + "RDF":
        raise ValueError("root element is %r, expected rdf:RDF" % root.tag)
    desc = root.find(_R + "Description")
    if desc is None:
        raise ValueError("missing rdf:Description")

    def members(tag):
        coll = desc.find(_T + tag)
        out = []
        if coll is None:
            return out
        for item in coll.findall(_R + "Description"):
            stamps = tuple(li.text or "" for li in item.findall("%stimestamp/%sBag/%sli" % (_T, _R, _R)))
            out.append(Member(item.get(_R + "about"), item.findtext(_T + "type") or "",
                              item.findtext(_T + "text") or "", stamps))
        return out

    return LinkStructureResponse(desc.get(_R + "about"), members("hasOutlinks"), members("hasInlinks"))


def to_json(resp) -> bytes:
    return json.dumps(resp.to_dict(), ensure_ascii=False, indent=1).encode("utf-8")


def from_json(data) -> LinkStructureResponse:
    return LinkStructureResponse.from_dict(json.loads(data))


def _merge_members(a, b):
    bags = defaultdict(set)
    for m in list(a) + list(b):
        bags[m.ident].update(m.timestamps)
    return [Member(d, lt, tx, tuple(ts)) for (d, lt, tx), ts in bags.items()]


def merge_responses(r1: LinkStructureResponse, r2: LinkStructureResponse) -> LinkStructureResponse:
    """Union two responses about the same URI, merging timestamp bags."""
    try:
        same = canonicalize(r1.subject) == canonicalize(r2.subject)
    except CanonicalizationError as exc:
        raise AggregationError(str(exc)) from None
    if not same:
        raise AggregationError("cannot merge responses about %r and %r" % (r1.subject, r2.subject))
    return LinkStructureResponse(min(r1.subject, r2.subject),
                                 _merge_members(r1.outlinks, r2.outlinks),
                                 _merge_members(r1.inlinks, r2.inlinks))


@dataclass
class HttpResult:
    status: int
    content_type: str
    body: bytes
    headers: dict = field(default_factory=dict)


def _error(status, message):
    body = json.dumps({"error": message}).encode("utf-8")
    return HttpResult(status, "application/json", body)


def handle_link_query(store, params) -> HttpResult:
    """Answer one linkQuery; `params` maps names to a value or list of values."""
    def param(name):
        v = params.get(name)
        if isinstance(v, (list, tuple)):
            v = v[0] if v else None
        return v

    uri = param("uri")
    if not uri:
        return _error(400, "missing required parameter 'uri'")
    start, end = param("from"), param("to")
    for name, value in (("from", start), ("to", end)):
        if value is not None and not _TS.match(value):
            return _error(400, "%r must be a 1-14 digit archival timestamp" % name)
    if start is not None:
        start = start.ljust(14, "0")
    if end is not None:
        end = end.ljust(14, "9")
    fmt = (param("format") or "rdf").lower()
    if fmt not in ("rdf", "json"):
        return _error(400, "format must be rdf or json")
    try:
        canonicalize(uri)
    except CanonicalizationError as exc:
        return _error(400, str(exc))
    if store is None:
        return _error(503, "link store unavailable")
    try:
        resp = build_response(store, uri, start, end)
    except (OSError, ValueError, RuntimeError) as exc:
        logger.exception("store query failed for %s", uri)
        return _error(503, "link store unavailable: %s" % exc)
    if fmt == "json":
        return HttpResult(200, "application/json", to_json(resp))
    return HttpResult(200, "application/rdf+xml", to_rdf_xml(resp))


def make_handler(store):
    class LinkQueryHandler(BaseHTTPRequestHandler):
        server_version = "twgraph-linkservice/0.1"

        def do_GET(self):
            parts = urlsplit(self.path)
            if not parts.path.rstrip("/").endswith("/linkQuery"):
                result = _error(404, "unknown path %s" % parts.path)
            else:
                result = handle_link_query(store, parse_qs(parts.query))
            self.send_response(result.status)
            self.send_header("Content-Type", result.content_type)
            self.send_header("Content-Length", str(len(result.body)))
            self.end_headers()
            self.wfile.write(result.body)

        def log_message(self, fmt, *args):
            logger.info("%s - %s", self.address_string(), fmt % args)

    return LinkQueryHandler


def make_server(store, host="127.0.0.1", port=8080) -> ThreadingHTTPServer:
    return ThreadingHTTPServer((host, port), make_handler(store))
