"""Back-of-the-envelope cost of running the pipeline on a whole archive."""
from twgraph.analytics import cost_model

# 240 billion mementos, 5 PB of WARCs, on a 100-machine cluster.
est = cost_model(240e9, 100, 5e15)
print("filtering:  %.1f hours" % est.filtering_time_hrs)
print("survivors:  %.0f billion mementos" % (est.filtering_survivors / 1e9))
print("extraction: %.0f days" % est.extraction_time_days)
print("link store: %.0f TB" % (est.storage_size / 1e12))

# Everything scales linearly in the collection and inversely in machines.
print()
print("machines   filtering(h)   extraction(days)")
for m in (50, 100, 200, 400):
    e = cost_model(240e9, m, 5e15)
    print("%8d %14.1f %18.1f" % (m, e.filtering_time_hrs, e.extraction_time_days))
