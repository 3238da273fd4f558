"""Loading a temporal web graph and querying it over HTTP."""
import tempfile
import threading
import urllib.request
from pathlib import Path

from twgraph.corpus import build_corpus
from twgraph.pipeline import PipelineConfig, run_pipeline
from twgraph.service import make_server
from twgraph.store import GraphStore

work = Path(tempfile.mkdtemp())
corpus = build_corpus(work / "corpus", crawls=4)

# filter -> extract -> load in one go; a rerun skips every stage.
config = PipelineConfig(cdx_paths=corpus.cdx_files, store_path=work / "store",
                        run_dir=work / "run", corpus_root=corpus.root, workers=2)
result = run_pipeline(config)
print("stages run:", [s.stage for s in result.stages])
print("second run skipped:", run_pipeline(config).skipped)

store = GraphStore(config.store_path)
print()
for name, count in sorted(store.stats().items()):
    print("%-18s %d" % (name, count))

# Outlinks of one page, each edge carrying every datetime it was seen.
print()
for edge in store.outlinks_for("http://www.example.com/")[:5]:
    print(edge.target_surt, edge.link_type.value, repr(edge.text), edge.datetimes)

# The link service answers with RDF/XML.
server = make_server(store, "127.0.0.1", 0)
threading.Thread(target=server.serve_forever, daemon=True).start()
url = "http://127.0.0.1:%d/LinkService/linkQuery?uri=www.cs.example.edu/~lab/" % server.server_address[1]
with urllib.request.urlopen(url) as resp:
    print()
    print(resp.read().decode()[:900])
server.shutdown()
store.close()
