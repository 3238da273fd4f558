import gzip
import io
import time
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from tests.oracles import filter_oracle
from twgraph import cdx
from twgraph.cdx import (CdxFormatError, CdxRecord, FilterRule, Mode, Predicate, apply_filters,
                         default_rule_chain, parse_cdx_stream)

DATA = Path(__file__).parent / "data"
EXAMPLE = ("org,example)/ 20091104010203 http://www.example.org/ text/html 200 "
           "AAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAA - - 1043 crawl-01.warc.gz")
DIGEST = "B2LTWWPUOYAH7UIPQ7ZUPQ4VMBSVC36A"


def rec(ts="20091104010203", uri="http://example.org/", mime="text/html", status="200",
        digest=DIGEST, offset=0, warc="a.warc.gz"):
    return CdxRecord("org,example)/", ts, uri, mime, status, digest, "-", "-",
                     offset, warc)


def test_parse_ten_field_line():
    (r,) = list(parse_cdx_stream(io.StringIO(EXAMPLE + "\n")))
    assert r.urlkey == "org,example)/"
    assert r.timestamp == "20091104010203"
    assert r.offset == 1043 and r.warc_file == "crawl-01.warc.gz"
    assert r.to_line() == EXAMPLE


def test_parse_nine_and_eleven_field_layouts():
    nine = "a)/ 20091104010203 http://a/ text/html 200 %s - 5 f.warc" % DIGEST
    eleven = "a)/ 20091104010203 http://a/ text/html 200 %s - - 777 5 f.warc" % DIGEST
    r9, r11 = parse_cdx_stream(io.StringIO(nine + "\n" + eleven + "\n"))
    assert r9.offset == 5 and r11.offset == 5 and r11.length == 777


def test_header_sets_layout_and_sha1_prefix_is_stripped():
    text = " CDX N b a m s k r V g\na)/ 20091104010203 http://a/ text/html 200 sha1:%s - 9 f.warc\n" % DIGEST
    (r,) = parse_cdx_stream(io.StringIO(text))
    assert r.digest == DIGEST and r.offset == 9


def test_malformed_lines_are_skipped_with_reasons():
    text = "\n".join([EXAMPLE, "too few fields", EXAMPLE.replace("20091104010203", "2009-11-04"),
                      EXAMPLE.replace("AAAAAAAA", "aaaa"),
                      EXAMPLE.replace(" 1043 ", " -5 "), EXAMPLE]) + "\n"
    reader = parse_cdx_stream(io.StringIO(text))
    assert len(list(reader)) == 2
    assert [n for n, _ in reader.skipped] == [2, 3, 4, 5]


def test_bytes_stream_and_gzip(tmp_path):
    p = tmp_path / "x.cdx.gz"
    p.write_bytes(gzip.compress((EXAMPLE + "\n").encode()))
    records, skipped = cdx.read_cdx_files([p])
    assert len(records) == 1 and not skipped
    assert len(list(parse_cdx_stream(io.BytesIO((EXAMPLE + "\n").encode())))) == 1


def test_record_validation():
    with pytest.raises(CdxFormatError):
        rec(ts="20091304010203")
    with pytest.raises(CdxFormatError):
        rec(digest="nope")
    assert rec(digest="-").digest == "-"


def test_extension_predicate():
    rule = default_rule_chain()[3]
    assert rule.matches(rec(uri="http://a.org/x/Logo.PNG"))
    assert rule.matches(rec(uri="http://a.org/s.css?v=3"))
    assert not rule.matches(rec(uri="http://a.org/x.jpg.html"))
    assert not rule.matches(rec(uri="http://a.org/dir.js/"))


def test_dedupe_keeps_earliest_then_first():
    a = rec(ts="20091104010203", offset=1)
    b = rec(ts="20091104010202", offset=2)
    c = rec(ts="20091104010202", offset=3)
    d = rec(digest="-", offset=4)
    e = rec(digest="-", offset=5)
    kept = cdx.dedupe_by_digest([a, b, c, d, e])
    assert [r.offset for r in kept] == [2, 4, 5]


def test_report_counts_and_observations():
    records = [rec(), rec(ts="20091105010203"), rec(status="404", digest="-"),
               rec(mime="image/png", uri="http://a/x.png")]
    kept, obs, report = apply_filters(records, default_rule_chain())
    assert len(kept) == 1
    assert [s.surviving for s in report.rules] == [3, 2, 2, 2, 1]
    assert len(obs) == 3  # every status-200 memento, duplicates included
    assert "duplicate checksum" in report.table()
    assert "rule.4.surviving=1" in report.key_values()


def test_2xx_option():
    kept, _, _ = apply_filters([rec(status="203")], default_rule_chain(success_2xx=True))
    assert len(kept) == 1
    kept, _, _ = apply_filters([rec(status="203")], default_rule_chain())
    assert not kept


def test_rule_validation_and_file(tmp_path):
    with pytest.raises(ValueError):
        FilterRule(Mode.INCLUDE, Predicate.DUPLICATE_DIGEST)
    with pytest.raises(ValueError):
        FilterRule(Mode.INCLUDE, Predicate.STATUS_EQUALS)
    with pytest.raises(ValueError):
        apply_filters([], [])
    p = tmp_path / "rules.txt"
    p.write_text("# comment\nINCLUDE status-equals 200 301\nexclude duplicate-digest\n")
    chain = cdx.load_rule_chain(p)
    assert chain[0].params == {"200", "301"} and chain[1].mode is Mode.EXCLUDE


def test_planted_corpus_matches_frozen_oracle():
    with open(DATA / "planted_1000.cdx") as fh:
        lines = fh.read().splitlines()
    records = list(parse_cdx_stream(io.StringIO("\n".join(lines) + "\n")))
    assert len(records) == 1000
    t0 = time.perf_counter()
    kept, _, _ = apply_filters(records, default_rule_chain())
    assert time.perf_counter() - t0 < 1.0
    expected = [int(x) for x in (DATA / "planted_1000.expected").read_text().split()]
    assert [r.to_line() for r in kept] == [lines[n - 1] for n in expected]
    assert filter_oracle.oracle(lines) == expected


def test_extraction_list_and_observation_log_roundtrip(tmp_path):
    records = [rec(), rec(ts="20091105010203", digest="-", offset=7)]
    cdx.write_extraction_list(tmp_path / "e.tsv", records)
    back = cdx.read_extraction_list(tmp_path / "e.tsv")
    assert [(r.timestamp, r.digest, r.offset) for r in back] == [(r.timestamp, r.digest, r.offset)
                                                                  for r in records]
    obs = [cdx.Observation("a)/", "20091104010203", DIGEST, "http://a/")]
    cdx.write_observation_log(tmp_path / "o.tsv", obs)
    assert cdx.read_observation_log(tmp_path / "o.tsv") == obs
    (tmp_path / "o3.tsv").write_text("a)/\t20091104010203\t%s\n" % DIGEST)
    assert cdx.read_observation_log(tmp_path / "o3.tsv")[0].original_uri == ""


_records = st.builds(
    rec,
    ts=st.sampled_from(["20091104010203", "20091104010204", "20100101000000"]),
    uri=st.sampled_from(["http://a/x.html", "http://a/y.jpg", "http://a/", "http://a/s.css"]),
    mime=st.sampled_from(["text/html", "image/png", "text/css", "application/pdf", "text/plain"]),
    status=st.sampled_from(["200", "404", "301"]),
    digest=st.sampled_from([DIGEST, "C" * 32, "D" * 32, "-"]),
    offset=st.integers(0, 10_000),
)


@settings(max_examples=200, deadline=None)
@given(st.lists(_records, max_size=40))
def test_filter_properties(records):
    chain = default_rule_chain()
    kept, obs, report = apply_filters(records, chain)
    counts = [s.surviving for s in report.rules]
    assert counts == sorted(counts, reverse=True)
    assert all(r in records for r in kept)
    digests = [r.digest for r in kept if r.digest != "-"]
    assert len(digests) == len(set(digests))
    again, _, _ = apply_filters(kept, chain)
    assert again == kept
    assert len(obs) == sum(r.status == "200" for r in records)


def test_legacy_urlkey_example_record():
    line = ("example.org/foo.html 20090312223142 http://www.example.org/foo.html text/html 200 "
            "E6T72C2R6BRRKSI3IZPMRJDXTFJIRC7P - - 111739 TENN-000001.warc.gz")
    (r,) = parse_cdx_stream(io.StringIO(line))
    assert (r.urlkey, r.timestamp, r.status, r.offset, r.warc_file) == (
        "example.org/foo.html", "20090312223142", "200", 111739, "TENN-000001.warc.gz")


def test_empty_inputs():
    reader = parse_cdx_stream(io.StringIO(""))
    assert list(reader) == [] and reader.skipped == []
    kept, obs, report = apply_filters([], default_rule_chain())
    assert kept == [] and obs == [] and report.output_count == 0
    assert [s.surviving for s in report.rules] == [0] * 5


def test_january_capture_wins_and_both_are_observed():
    jan, feb = rec(ts="20100101000000"), rec(ts="20100201000000")
    kept, obs, _ = apply_filters([feb, jan], default_rule_chain())
    assert kept == [jan]
    assert {o.timestamp for o in obs} == {"20100101000000", "20100201000000"}
