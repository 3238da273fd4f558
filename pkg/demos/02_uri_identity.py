"""SURT keys and 128-bit URI ids."""
import warnings

from twgraph.uri import IdTable, UriIdCollisionWarning, canonicalize, id_for, uri_id

# Different spellings of the same resource share one sort-friendly key.
for uri in ["http://www.example.org/foo.html", "http://www1.example.org/foo.html",
            "example.org/foo.html", "https://EXAMPLE.org:443/foo.html#top"]:
    print("%-40s -> %s" % (uri, canonicalize(uri)))

# The id is a SimHash over byte 4-grams of that key.
key = canonicalize("http://www.vancouver2010.com/")
print()
print(key, uri_id(key).hex)

# Similar keys get similar ids: count the differing bits.
a, b = id_for("http://example.org/page1.html"), id_for("http://example.org/page2.html")
print("bits differing between page1 and page2: %d" % bin(a.bits ^ b.bits).count("1"))

# Near-identical keys can collide outright. The id table notices.
table = IdTable()
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always", UriIdCollisionWarning)
    for i in range(20000):
        table.put(canonicalize("http://example.org/p%d.html" % i), "")
print("%d ids, %d collisions among 20000 sequential URLs" % (len(table), len(table.collisions)))
