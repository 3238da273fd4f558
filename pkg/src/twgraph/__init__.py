"""Build, store and query the temporal web graph of a web-archive collection."""
from .analytics import (build_window_graph, cost_model, coverage_report, inlink_anchor_timeline,
                        kendall_tau_topk, pagerank, top_k_overlap)
from .cdx import apply_filters, default_rule_chain, parse_cdx_stream
from .extract import extract_links, plan_partitions, run_extraction
from .service import handle_link_query, merge_responses
from .store import GraphStore
from .uri import canonicalize, uri_id
from .warc import read_record, stream_records

__version__ = "0.1.0"

__all__ = [
    "GraphStore", "apply_filters", "build_window_graph", "canonicalize", "cost_model",
    "coverage_report", "default_rule_chain", "extract_links", "handle_link_query",
    "inlink_anchor_timeline", "kendall_tau_topk", "merge_responses", "pagerank",
    "parse_cdx_stream", "plan_partitions", "read_record", "run_extraction", "stream_records",
    "top_k_overlap", "uri_id",
]
