"""Command line entry point: ``python -m twgraph <command>``.

Exit codes: 0 success, 1 invalid configuration or arguments, 2 stage failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import analytics, cdx
from .extract import (ExtractionSource, plan_partitions, read_link_records,
                      run_extraction, write_link_batches)
from .pipeline import ConfigError, PipelineConfig, run_pipeline
from .store import GraphStore

EXIT_OK, EXIT_INVALID, EXIT_STAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, "%s: error: %s\n" % (self.prog, message))


def _stage_via_config(args, stage):
    cfg = PipelineConfig.from_file(args.config)
    result = run_pipeline(cfg, (stage,))
    for outcome in result.stages:
        print("[%s]%s\n%s" % (outcome.stage, " (up to date)" if outcome.skipped else "", outcome.report))
    if result.status:
        print("stage %s failed" % result.failed_stage, file=sys.stderr)
    return result.status


def cmd_filter(args):
    if args.config:
        return _stage_via_config(args, "filter")
    if not args.cdx or not args.out_dir:
        raise ConfigError("filter needs --cdx and --out-dir (or --config)")
    chain = cdx.load_rule_chain(args.rules) if args.rules else cdx.default_rule_chain()
    records, skipped = cdx.read_cdx_files(args.cdx)
    kept, observations, report = cdx.apply_filters(records, chain)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cdx.write_extraction_list(out / "extraction.tsv", kept)
    cdx.write_observation_log(out / "observations.tsv", observations)
    text = report.table() + "\n\n" + report.key_values()
    (out / "report.txt").write_text(text + "\n")
    print(text)
    if skipped:
        print("skipped %d malformed lines" % len(skipped), file=sys.stderr)
    return EXIT_OK


def cmd_extract(args):
    if args.config:
        return _stage_via_config(args, "extract")
    if not args.extraction_list or not args.out_dir or not args.location:
        raise ConfigError("extract needs --extraction-list, --location and --out-dir")
    try:
        source = ExtractionSource(args.source, args.location, politeness_ms=args.politeness_ms)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    records = cdx.read_extraction_list(args.extraction_list)
    run = run_extraction(source, plan_partitions(records, args.workers))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_link_batches(out / "links.tsv", run.batches)
    pages = sorted({c for b in run.batches for c in b.pages})
    (out / "pages.txt").write_text("".join(c + "\n" for c in pages))
    print(run.report.key_values())
    errors = [e for p in run.report.partitions for e in p.errors]
    return EXIT_STAGE if errors else EXIT_OK


def cmd_load(args):
    if args.config:
        return _stage_via_config(args, "load")
    if not (args.links and args.observations and args.store):
        raise ConfigError("load needs --links, --observations and --store")
    with GraphStore(args.store) as store:
        pages = Path(args.pages).read_text().split() if args.pages else ()
        store.add_link_records(read_link_records(args.links), pages)
        store.add_observations(cdx.read_observation_log(args.observations))
        result = store.materialize_inlinks()
        if args.export:
            store.export_quads(args.export)
        for k, v in sorted(store.stats().items()):
            print("%s=%d" % (k, v))
    print("inlinks_written=%d\ndangling_checksums=%d" % (result.written, len(result.dangling)))
    return EXIT_OK


def _store(args):
    if args.config and not args.store:
        args.store = str(PipelineConfig.from_file(args.config).store_path)
    if not args.store or not Path(args.store).exists():
        raise ConfigError("store not found: %s" % args.store)
    return GraphStore(args.store)


def cmd_serve(args):
    from .service import make_server

    bind = args.bind
    if bind is None and args.config:
        bind = PipelineConfig.from_file(args.config).bind
    host, _, port = (bind or "127.0.0.1:8080").rpartition(":")
    store = _store(args)
    server = make_server(store, host or "127.0.0.1", int(port))
    print("serving /linkQuery on http://%s:%d" % server.server_address[:2])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        store.close()
    return EXIT_OK


def cmd_rank(args):
    with _store(args) as store:
        graph = analytics.build_window_graph(store, analytics.parse_window(args.window))
        if not graph.nodes:
            print("no edges in window %s" % args.window, file=sys.stderr)
            return EXIT_OK
        table = analytics.pagerank(graph, args.damping, args.epsilon, args.max_iter)
    for i, node in enumerate(table.ordered()[:args.top], 1):
        print("%d\t%s\t%.12g" % (i, node, table.scores[node]))
    return EXIT_OK


def cmd_compare(args):
    with _store(args) as store:
        windows = args.windows.split(",") if args.windows else analytics.observed_months(store)
        tables = {}
        for w in windows + ["whole"]:
            graph = analytics.build_window_graph(store, analytics.parse_window(w))
            if graph.nodes:
                tables[w] = analytics.pagerank(graph, args.damping, args.epsilon, args.max_iter)
    months = [w for w in windows if w in tables]
    pairs = list(zip(months, months[1:])) + [(w, "whole") for w in months]
    print("first\tsecond\toverlap\ttau")
    for c in analytics.compare_tables(tables, pairs, args.k):
        tau = "nan" if math.isnan(c.tau) else "%.3f" % c.tau
        print("%s\t%s\t%d\t%s" % (c.first, c.second, c.overlap, tau))
    return EXIT_OK


def cmd_timeline(args):
    with _store(args) as store:
        for date, text in analytics.inlink_anchor_timeline(store, args.uri):
            print("%s\t%s" % (date, text))
    return EXIT_OK


def cmd_coverage(args):
    with _store(args) as store:
        rep = analytics.coverage_report(store)
    print("nodes=%d\nedges=%d\nobserved=%d\nuncrawled=%d\nuncrawled_fraction=%.4f"
          % (rep.node_count, rep.edge_count, rep.observed_count,
             rep.uncrawled_target_count, rep.uncrawled_fraction))
    return EXIT_OK


def cmd_estimate(args):
    est = analytics.cost_model(args.n, args.m, args.size, chained=not args.standalone)
    print("filtering_time_sec=%.1f (%.1f hrs)" % (est.filtering_time_sec, est.filtering_time_hrs))
    print("filtering_survivors=%.0f" % est.filtering_survivors)
    print("extraction_time_hrs=%.1f (%.1f days)" % (est.extraction_time_hrs, est.extraction_time_days))
    print("storage_size=%.6g" % est.storage_size)
    return EXIT_OK


def cmd_run_all(args):
    cfg = PipelineConfig.from_file(args.config)
    result = run_pipeline(cfg)
    for outcome in result.stages:
        print("[%s]%s" % (outcome.stage, " up to date" if outcome.skipped else ""))
        if outcome.report and not outcome.skipped:
            print(outcome.report)
    if result.status:
        print("pipeline halted: stage %s failed" % result.failed_stage, file=sys.stderr)
    return result.status


def build_parser():
    p = _Parser(prog="twgraph", description="temporal web graph toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(sp):
        sp.add_argument("--config", help="pipeline config file (INI)")
        return sp

    def with_store(sp):
        with_config(sp)
        sp.add_argument("--store", help="graph store directory")
        return sp

    def with_rank_params(sp):
        sp.add_argument("--damping", type=float, default=0.85)
        sp.add_argument("--epsilon", type=float, default=1e-8)
        sp.add_argument("--max-iter", type=int, default=100)

    sp = with_config(sub.add_parser("filter", help="filter CDX files"))
    sp.add_argument("--cdx", nargs="+")
    sp.add_argument("--rules")
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_filter)

    sp = with_config(sub.add_parser("extract", help="extract outlinks"))
    sp.add_argument("--extraction-list")
    sp.add_argument("--source", choices=["warc", "replay"], default="warc")
    sp.add_argument("--location", help="WARC corpus root or replay base URL")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--politeness-ms", type=int, default=0)
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_extract)

    sp = with_store(sub.add_parser("load", help="load links and observations into a store"))
    sp.add_argument("--links")
    sp.add_argument("--pages")
    sp.add_argument("--observations")
    sp.add_argument("--export", help="write property-view quads here")
    sp.set_defaults(func=cmd_load)

    sp = with_store(sub.add_parser("serve", help="run the linkQuery HTTP service"))
    sp.add_argument("--bind")
    sp.set_defaults(func=cmd_serve)

    sp = with_store(sub.add_parser("rank", help="PageRank over a window"))
    sp.add_argument("--window", default="whole", help="YYYY-MM or whole")
    sp.add_argument("--top", type=int, default=50)
    with_rank_params(sp)
    sp.set_defaults(func=cmd_rank)

    sp = with_store(sub.add_parser("compare", help="overlap and Kendall tau between windows"))
    sp.add_argument("--k", type=int, default=50)
    sp.add_argument("--windows", help="comma separated YYYY-MM list (default: all months)")
    with_rank_params(sp)
    sp.set_defaults(func=cmd_compare)

    sp = with_store(sub.add_parser("timeline", help="inlink anchor text over time"))
    sp.add_argument("--uri", required=True)
    sp.set_defaults(func=cmd_timeline)

    sp = with_store(sub.add_parser("coverage", help="crawl coverage counts"))
    sp.set_defaults(func=cmd_coverage)

    sp = sub.add_parser("estimate", help="scale-up cost estimate")
    sp.add_argument("--n", type=float, required=True, help="mementos")
    sp.add_argument("--m", type=int, required=True, help="machines")
    sp.add_argument("--size", type=float, default=0.0, help="collection size (any unit)")
    sp.add_argument("--standalone", action="store_true",
                    help="extraction on all n mementos instead of filter survivors")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("run-all", help="run filter, extract and load from a config")
    sp.add_argument("--config", required=True)
    sp.set_defaults(func=cmd_run_all)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
