import random

import pytest
from hypothesis import given, settings, strategies as st

from twgraph import cdx
from twgraph.cdx import CdxRecord
from twgraph.extract import (ExtractionSource, Extractor, LinkRecord, LinkType, extract_links,
                             plan_partitions, read_link_records, run_extraction,
                             write_link_batches)
from twgraph.uri import id_for
from twgraph.warc import MementoPayload

CS = "B2LTWWPUOYAH7UIPQ7ZUPQ4VMBSVC36A"


def links(body, uri="http://vancouver2010.com/", **kw):
    return [(r.outlink_uri, r.link_type.value, r.text) for r in extract_links(body, uri, CS, **kw)]


def test_relative_anchor():
    out = extract_links(b'<a href="/news">News</a>', "http://vancouver2010.com/", CS)
    assert len(out) == 1
    r = out[0]
    assert (r.outlink_uri, r.link_type, r.text) == ("http://vancouver2010.com/news", LinkType.HREF, "News")
    assert r.outlink_id == id_for("http://vancouver2010.com/news")
    assert r.doc_checksum == CS


def test_no_links():
    assert links(b"<html><body><p>plain</p></body></html>") == []


def test_replay_prefix_is_stripped():
    body = b'<a href="http://replay.example/web/20100130003005/http://example.org/x">x</a>'
    assert links(body, replay_root="http://replay.example/web") == [("http://example.org/x", "HREF", "x")]
    body = b'<img src="/web/20100130003005im_/http://example.org/p.png" alt="P">'
    assert links(body, replay_root="http://replay.example/web") == [("http://example.org/p.png", "IMAGE", "P")]


def test_images_base_fragments_schemes_and_text():
    body = (b'<base href="http://other.org/dir/"><a href="a.html#frag">A <b>bold</b>\n  text</a>'
            b'<a href="mailto:x@y.org">m</a><a href="#top">t</a><a href="javascript:go()">j</a>'
            b'<img src="i.png"><a href="&#104;ttp://e.org/?q=1&amp;r=2">ent &amp; ity</a>'
            b'<script>document.write("<a href=/no>")</script><a>no href</a>')
    ex = Extractor()
    out = [(r.outlink_uri, r.link_type.value, r.text) for r in ex.extract(body, "http://x.org/", CS)]
    assert out == [("http://other.org/dir/a.html", "HREF", "A bold text"),
                   ("http://other.org/dir/i.png", "IMAGE", ""),
                   ("http://e.org/?q=1&r=2", "HREF", "ent & ity")]
    assert ex.stats["unsupported_uri"] == 2 and ex.stats["empty_or_fragment"] == 1


def test_non_html_payload_is_skipped():
    from datetime import datetime
    p = MementoPayload("http://a/x.pdf", datetime(2009, 1, 1), 200, "application/pdf", b"%PDF")
    ex = Extractor()
    assert ex.extract(p, "http://a/x.pdf", CS) == []
    assert ex.stats["non_html"] == 1


def test_checksum_defaults_to_body_digest():
    from twgraph.warc import sha1_base32
    (r,) = extract_links(b'<a href="/b">b</a>', "http://a.org/")
    assert r.doc_checksum == sha1_base32(b'<a href="/b">b</a>')


def test_link_record_tsv_roundtrip(tmp_path):
    r = LinkRecord.create(CS, "http://a.org/x", "HREF", "tab\there\\ and\nnewline")
    assert LinkRecord.from_tsv(r.to_tsv()) == r
    from twgraph.extract import LinkBatch
    write_link_batches(tmp_path / "l.tsv", [LinkBatch(0, [r, r], [CS])])
    assert read_link_records(tmp_path / "l.tsv") == [r, r]


def _rec(warc, offset):
    return CdxRecord("a)/", "20091104010203", "http://a/", "text/html", "200", "-", "-", "-",
                     offset, warc)


def test_partition_example_loads():
    recs = [_rec(name, i) for name, n in (("A", 100), ("B", 60), ("C", 40), ("D", 40))
            for i in range(n)]
    plan = plan_partitions(recs, 2)
    assert sorted(plan.loads()) == [100, 140]
    assert plan.assignment["A"] != plan.assignment["B"]
    with pytest.raises(ValueError):
        plan_partitions(recs, 0)


def _check_plan(sizes, k):
    recs = [_rec("f%03d" % i, j) for i, n in enumerate(sizes) for j in range(n)]
    plan = plan_partitions(recs, k)
    owners = {}
    for p in plan.partitions:
        for r in p.records:
            assert owners.setdefault(r.warc_file, p.index) == p.index
    assert sum(plan.loads()) == len(recs)
    assert sorted((r.warc_file, r.offset) for p in plan.partitions for r in p.records) == \
        sorted((r.warc_file, r.offset) for r in recs)
    assert all(plan.assignment[f] == i for f, i in owners.items())
    if sizes:
        # greedy bound: no partition exceeds the mean by more than the largest file
        assert max(plan.loads()) <= sum(sizes) / k + max(sizes)


def test_partition_exclusivity_random_distributions():
    rng = random.Random(3)
    for _ in range(1000):
        sizes = [rng.choice([1, 2, 5, 10, 50]) * rng.randint(1, 4) for _ in range(rng.randint(0, 12))]
        _check_plan(sizes, rng.randint(1, 6))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(1, 30), max_size=10), st.integers(1, 5))
def test_partition_property(sizes, k):
    _check_plan(sizes, k)


@pytest.fixture(scope="module")
def extraction_list(corpus):
    kept, _, _ = cdx.apply_filters(corpus.cdx_records(), cdx.default_rule_chain())
    return kept


@pytest.mark.parametrize("k", [1, 2, 5])
def test_warc_and_replay_extraction_are_set_equal(corpus, replay, extraction_list, k):
    plan = plan_partitions(extraction_list, k)
    warc = run_extraction(ExtractionSource("warc", str(corpus.root)), plan)
    rep = run_extraction(ExtractionSource("replay", replay.url), plan)
    assert set(warc.link_records()) == set(rep.link_records())
    assert len(warc.link_records()) > 100
    assert warc.report.records == len(extraction_list)
    assert not any(p.failures or p.errors for p in warc.report.partitions + rep.report.partitions)


def test_replay_retries_on_5xx(corpus, extraction_list):
    from twgraph.corpus import ReplayStub
    recs = extraction_list[:3]
    with ReplayStub(corpus, fail_first=True) as stub:
        run = run_extraction(ExtractionSource("replay", stub.url, politeness_ms=1),
                             plan_partitions(recs, 1))
        assert stub.requests == 6
    assert run.report.partitions[0].pages == 3


def test_replay_failures_are_recorded(extraction_list):
    src = ExtractionSource("replay", "http://127.0.0.1:9/wayback", timeout=0.2, retries=1)
    run = run_extraction(src, plan_partitions(extraction_list[:2], 1))
    assert len(run.report.partitions[0].failures) == 2


def test_missing_warc_is_a_partition_error(tmp_path, extraction_list):
    run = run_extraction(ExtractionSource("warc", str(tmp_path)), plan_partitions(extraction_list, 2))
    assert all(p.errors for p in run.report.partitions)
    assert run.link_records() == []


def test_source_validation():
    with pytest.raises(ValueError):
        ExtractionSource("replay", "not a url")
    with pytest.raises(ValueError):
        ExtractionSource("ftp", "/x")
    with pytest.raises(ValueError):
        ExtractionSource("warc", "/x", politeness_ms=-1)
