"""Monthly PageRank, rank stability and anchor-text history."""
import math
import tempfile
from pathlib import Path

from twgraph import analytics
from twgraph.corpus import build_corpus
from twgraph.pipeline import PipelineConfig, run_pipeline
from twgraph.store import GraphStore

work = Path(tempfile.mkdtemp())
corpus = build_corpus(work / "corpus", crawls=5)
config = PipelineConfig(cdx_paths=corpus.cdx_files, store_path=work / "store",
                        run_dir=work / "run", corpus_root=corpus.root)
run_pipeline(config)
store = GraphStore(config.store_path)

# One graph per month: an edge exists if some capture in that month had the link.
months = analytics.observed_months(store)
tables = {}
for m in months + ["whole"]:
    graph = analytics.build_window_graph(store, m)
    tables[m] = analytics.pagerank(graph)
    print("%-8s %3d nodes %4d edges  %d iterations" % (m, len(graph.nodes), len(graph.edges),
                                                      tables[m].iterations))

print()
print("top pages over the whole period")
for node in tables["whole"].top(5):
    print("  %.4f  %s" % (tables["whole"].scores[node], node))

# How stable is the top 10 from one month to the next?
pairs = list(zip(months, months[1:])) + [(m, "whole") for m in months]
print()
for c in analytics.compare_tables(tables, pairs, k=10):
    tau = "nan" if math.isnan(c.tau) else "%.3f" % c.tau
    print("%-8s vs %-8s overlap %2d  tau %s" % (c.first, c.second, c.overlap, tau))

# What did other pages call the lab page, and when?
print()
for date, text in analytics.inlink_anchor_timeline(store, "http://www.cs.example.edu/~lab/"):
    if not text.startswith(("to ", "see ")):  # skip the generic navigation links
        print(" ", date, text)

cov = analytics.coverage_report(store)
print()
print("%d nodes, %d never crawled (%.0f%%)" % (cov.node_count, cov.uncrawled_target_count,
                                               100 * cov.uncrawled_fraction))
store.close()
