"""Filtering a crawl index down to the pages worth extracting links from."""
import tempfile

from twgraph import cdx
from twgraph.corpus import build_corpus

# Build a small synthetic archive: four monthly crawls of a few sites.
root = tempfile.mkdtemp()
corpus = build_corpus(root, crawls=4)
records = corpus.cdx_records()
print("%d CDX records in %d files" % (len(records), len(corpus.cdx_files)))
print(records[0].to_line())

# The default chain keeps successful text pages and drops repeated content.
kept, observations, report = cdx.apply_filters(records, cdx.default_rule_chain())
print()
print(report.table())

# Duplicates are gone from the extraction list, but every successful capture
# stays in the observation log so its datetime is not lost.
print()
print("extraction list: %d records" % len(kept))
print("observation log: %d captures" % len(observations))

# A custom chain can be read from a text file, one rule per line.
rules = tempfile.NamedTemporaryFile("w", suffix=".rules", delete=False)
rules.write("INCLUDE status-equals 200\nINCLUDE mimetype-prefix-in-set text/html\n")
rules.close()
kept_html, _, report = cdx.apply_filters(records, cdx.load_rule_chain(rules.name))
print("without dedup: %d records" % len(kept_html))
