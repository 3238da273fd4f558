"""Extracting outlinks from WARC files and from a replay endpoint."""
import tempfile

from twgraph import cdx
from twgraph.corpus import ReplayStub, build_corpus
from twgraph.extract import ExtractionSource, extract_links, plan_partitions, run_extraction

# One page by hand: relative links resolve against the page URI.
for rec in extract_links(b'<a href="/news">News</a> <img src="logo.png" alt="Logo">',
                         "http://vancouver2010.com/"):
    print(rec.link_type.value, rec.outlink_uri, repr(rec.text))

corpus = build_corpus(tempfile.mkdtemp(), crawls=3)
kept, _, _ = cdx.apply_filters(corpus.cdx_records(), cdx.default_rule_chain())

# Work is split so every WARC file is read by exactly one worker.
plan = plan_partitions(kept, 2)
print()
print("partition loads:", plan.loads())
for name, owner in sorted(plan.assignment.items()):
    print("  %s -> worker %d" % (name, owner))

warc_run = run_extraction(ExtractionSource("warc", str(corpus.root)), plan)
print()
print(warc_run.report.key_values())

# The same pages fetched through a Wayback-style replay give the same links,
# once the replay prefix is stripped from every rewritten URL.
with ReplayStub(corpus) as stub:
    replay_run = run_extraction(ExtractionSource("replay", stub.url), plan)
same = set(warc_run.link_records()) == set(replay_run.link_records())
print()
print("WARC and replay extraction agree:", same)
