"""Synthetic web-archive corpora and a local Wayback-style replay stub.

Used by the test suite and the demo scripts. The corpus is deterministic:
a handful of small sites captured monthly from 2009-11 onward, one WARC
and one CDX file per crawl, with unchanged recaptures, images, stylesheets,
a 404 and a ``<base href>`` page mixed in.
"""
from __future__ import annotations

import html
import random
import re
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import unquote, urljoin

from .cdx import LAYOUT_10, parse_cdx_stream
from .warc import WarcWriter, index_warc

SITES = {
    "http://www.example.com/": ["", "about.html", "news/index.html", "contact.html"],
    "http://news.example.org/": ["", "world.html", "sport.html", "2009/olympics.html"],
    "http://blog.example.net/": ["", "posts/1.html", "posts/2.html"],
    "http://www.cs.example.edu/": ["", "~lab/", "courses/web.html"],
}
EXTERNAL = ["http://www.w3.org/", "http://uncrawled.example.info/a.html",
            "https://secure.example.com/login", "http://uncrawled.example.info/b.html"]
LAB = "http://www.cs.example.edu/~lab/"
LAB_TEXT = ["Research group", "Web science lab", "Web Science and Digital Libraries"]
PNG = b"\x89PNG\r\n\x1a\n" + bytes(range(64))


def _pages():
    return [site + path for site, paths in SITES.items() for path in paths]


def _page_html(uri, month, rng):
    """Body of `uri` as captured in crawl number `month`."""
    site = next(s for s in SITES if uri.startswith(s))
    links = []
    for path in SITES[site]:
        target = site + path
        if target != uri:
            rel = path or "./"
            if uri.endswith("/") and uri != site:
                rel = target  # absolute from pages in sub-directories
            links.append((rel, "to %s" % (path or "home")))
    others = [p for p in _pages() if not p.startswith(site)]
    for target in rng.sample(others, 2 + month % 3):
        links.append((target, "see  %s" % target.split("//")[1].rstrip("/")))
    if uri == "http://www.example.com/":
        links.append((LAB, LAB_TEXT[min(month // 2, len(LAB_TEXT) - 1)]))
        links.append(("http://news.example.org/?b=2&amp;a=1#top", "News &amp; more"))
    if month % 2 == 0:
        links.append((EXTERNAL[month % len(EXTERNAL)], "external"))
    if uri.startswith("http://blog."):
        links.append(("mailto:editor@example.net", "mail"))
        links.append(("#comments", "comments"))
    anchors = "\n".join('<li><a href="%s">%s</a></li>' % (href, text) for href, text in links)
    base = '<base href="http://www.cs.example.edu/">' if uri == "http://www.cs.example.edu/courses/web.html" else ""
    extra = '<a href="~lab/">group <b>page</b></a>' if base else ""
    return ("<html><head>%s<title>%s</title><link rel=stylesheet href=/s.css>"
            "<script>if (1 < 2) { document.title += ''; }</script></head><body>"
            '<img src="/logo.png" alt="logo"><ul>\n%s\n</ul>%s</body></html>'
            % (base, uri, anchors, extra)).encode("utf-8")


@dataclass
class FixtureCorpus:
    root: Path
    warcs: list = field(default_factory=list)
    cdx_files: list = field(default_factory=list)

    def cdx_records(self):
        out = []
        for path in self.cdx_files:
            with open(path, encoding="utf-8") as fh:
                out.extend(parse_cdx_stream(fh))
        return out


def _write_crawl(root: Path, n: int, rng):
    """One crawl: every page captured once, content changing every other month."""
    name = "crawl-%02d.warc.gz" % n
    start = datetime(2009, 11, 4, 10, 0, 0) + timedelta(days=30 * n + rng.randrange(5))
    when = start
    with open(root / name, "wb") as fh:
        w = WarcWriter(fh, compress=True)
        for i, uri in enumerate(_pages()):
            when += timedelta(minutes=7, seconds=rng.randrange(60))
            w.write_request(uri, when)
            # pages 0, 4, 8... change every month, the rest only every other month
            version = n if i % 4 == 0 else n - n % 2
            w.write_response(uri, when, _page_html(uri, version, random.Random(uri + str(version))))
        for site in SITES:
            when += timedelta(seconds=30)
            w.write_response(site + "logo.png", when, PNG, content_type="image/png")
            w.write_response(site + "s.css", when, b"body{color:#333}", content_type="text/css")
        w.write_response("http://www.example.com/missing.html", when, b"<html>gone</html>", status=404)
    cdx_path = root / ("crawl-%02d.cdx" % n)
    with open(cdx_path, "w", encoding="utf-8") as fh:
        fh.write(" CDX " + " ".join(LAYOUT_10) + "\n")
        for rec in index_warc(root / name):
            fh.write(rec.to_line(LAYOUT_10) + "\n")
    return root / name, cdx_path


def build_corpus(root, crawls=4, first=0) -> FixtureCorpus:
    """Write crawls ``first .. first+crawls-1`` under `root`."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    corpus = FixtureCorpus(root)
    for n in range(first, first + crawls):
        warc, cdx_path = _write_crawl(root, n, random.Random(n))
        corpus.warcs.append(warc)
        corpus.cdx_files.append(cdx_path)
    return corpus


# -- replay stub --------------------------------------------------------

_ATTR = re.compile(r'(\b(?:href|src)=)("[^"]*"|\'[^\']*\'|[^\s>]+)', re.I)
_BASE = re.compile(r'<base\s+href="([^"]*)"', re.I)


def rewrite_html(body: bytes, page_uri, timestamp, prefix="/wayback"):
    """Rewrite every href/src the way a Wayback replay does."""
    text = body.decode("utf-8")
    m = _BASE.search(text)
    base = urljoin(page_uri, html.unescape(m.group(1))) if m else page_uri

    def sub(match):
        raw = match.group(2).strip("\"'")
        value = html.unescape(raw)
        if not value or value.startswith("#") or value.lower().startswith(("mailto:", "javascript:")):
            return match.group(0)
        target = urljoin(base, value)
        flag = "im_" if match.group(1).lower().startswith("src") else ""
        return '%s"%s/%s%s/%s"' % (match.group(1), prefix, timestamp, flag, html.escape(target))

    return _ATTR.sub(sub, text).encode("utf-8")


class ReplayStub:
    """Serve a FixtureCorpus at ``http://127.0.0.1:<port>/wayback/<ts>/<uri>``.

    `fail_first` makes the first request for each URL answer 503, to
    exercise client retries.
    """

    def __init__(self, corpus: FixtureCorpus, fail_first=False):
        from .warc import WarcFile

        self.index = {}
        self.requests = 0
        for rec in corpus.cdx_records():
            self.index[(rec.timestamp, rec.original_uri)] = (corpus.root / rec.warc_file, rec.offset)
        self._warc = WarcFile
        self._seen = set()
        self.fail_first = fail_first
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), self._handler())
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def url(self):
        return "http://127.0.0.1:%d/wayback" % self.server.server_address[1]

    def _handler(self):
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):
                stub.requests += 1
                m = re.match(r"^/wayback/(\d{14})(?:[a-z]{2}_)?/(.+)$", self.path)
                hit = m and stub.index.get((m.group(1), unquote(m.group(2))))
                if stub.fail_first and self.path not in stub._seen:
                    stub._seen.add(self.path)
                    self.send_response(503)
                    self.end_headers()
                    return
                if not hit:
                    self.send_response(404)
                    self.end_headers()
                    return
                with stub._warc(hit[0]) as wf:
                    payload = wf.read(hit[1])
                body = payload.body
                if "html" in payload.mimetype:
                    body = rewrite_html(body, payload.target_uri, m.group(1))
                self.send_response(payload.http_status)
                self.send_header("Content-Type", payload.content_type)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        return Handler

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()
