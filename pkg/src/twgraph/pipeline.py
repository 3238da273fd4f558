"""End-to-end pipeline: filter -> extract -> load/materialize.

Each stage writes its outputs plus a ``MANIFEST`` (SHA-256 over the stage's
input files and parameters) into its own directory under the run
directory. A rerun skips any stage whose manifest still matches, and a
changed input invalidates that stage and everything downstream.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import logging
import shlex
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import cdx as cdxmod
from .extract import (ExtractionSource, LinkBatch, SourceKind, plan_partitions,
                      read_link_records, run_extraction, write_link_batches)
from .store import GraphStore

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__("stage %r failed: %s" % (stage, cause))
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    cdx_paths: list
    store_path: Path
    run_dir: Path
    corpus_root: Optional[Path] = None
    replay_url: Optional[str] = None
    rules_path: Optional[Path] = None
    workers: int = 1
    politeness_ms: int = 0
    bind: str = "127.0.0.1:8080"
    k: int = 50
    damping: float = 0.85
    epsilon: float = 1e-8
    max_iter: int = 100

    def validate(self):
        if (self.corpus_root is None) == (self.replay_url is None):
            raise ConfigError("configure exactly one of corpus_root or replay_url")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not self.cdx_paths:
            raise ConfigError("no cdx files configured")
        for p in self.cdx_paths:
            if not Path(p).is_file():
                raise ConfigError("cdx file not found: %s" % p)
        if self.corpus_root is not None and not Path(self.corpus_root).is_dir():
            raise ConfigError("corpus root not found: %s" % self.corpus_root)
        if self.rules_path is not None and not Path(self.rules_path).is_file():
            raise ConfigError("rules file not found: %s" % self.rules_path)
        if self.replay_url is not None:
            try:
                ExtractionSource(SourceKind.REPLAY_ENDPOINT, self.replay_url)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        return self

    def source(self):
        if self.corpus_root is not None:
            return ExtractionSource(SourceKind.WARC_CORPUS, str(self.corpus_root))
        return ExtractionSource(SourceKind.REPLAY_ENDPOINT, self.replay_url,
                                politeness_ms=self.politeness_ms)

    @classmethod
    def from_file(cls, path):
        """Read an INI file with ``[pipeline]``, ``[service]`` and ``[analytics]``.

        Relative paths are taken relative to the config file.
        """
        path = Path(path)
        parser = configparser.ConfigParser()
        if not parser.read(path):
            raise ConfigError("cannot read config %s" % path)
        base = path.parent
        if not parser.has_section("pipeline"):
            raise ConfigError("%s: missing [pipeline] section" % path)
        pipe = parser["pipeline"]

        def rel(value):
            return (base / value) if value else None

        try:
            cfg = cls(
                cdx_paths=[rel(p) for p in shlex.split(pipe.get("cdx", ""))],
                store_path=rel(pipe.get("store", "store")),
                run_dir=rel(pipe.get("run_dir", "run")),
                corpus_root=rel(pipe.get("corpus_root")),
                replay_url=pipe.get("replay_url") or None,
                rules_path=rel(pipe.get("rules")),
                workers=pipe.getint("workers", 1),
                politeness_ms=pipe.getint("politeness_ms", 0),
                bind=parser.get("service", "bind", fallback="127.0.0.1:8080"),
                k=parser.getint("analytics", "k", fallback=50),
                damping=parser.getfloat("analytics", "damping", fallback=0.85),
                epsilon=parser.getfloat("analytics", "epsilon", fallback=1e-8),
                max_iter=parser.getint("analytics", "max_iter", fallback=100),
            )
        except ValueError as exc:
            raise ConfigError("%s: %s" % (path, exc)) from None
        return cfg


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _manifest(stage, params, files):
    body = {"stage": stage, "params": params,
            "inputs": sorted((Path(f).name, file_digest(f)) for f in files)}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode("utf-8")).hexdigest()


@dataclass
class StageOutcome:
    stage: str
    skipped: bool
    report: str = ""


@dataclass
class PipelineResult:
    status: int
    stages: list = field(default_factory=list)
    failed_stage: Optional[str] = None

    @property
    def skipped(self):
        return [s.stage for s in self.stages if s.skipped]


class Pipeline:
    def __init__(self, config: PipelineConfig):
        self.config = config.validate()
        self.run_dir = Path(config.run_dir)

    def _dir(self, stage):
        d = self.run_dir / stage
        d.mkdir(parents=True, exist_ok=True)
        return d

    def _up_to_date(self, stage, digest, outputs):
        d = self.run_dir / stage
        marker = d / "MANIFEST"
        return (marker.is_file() and marker.read_text().strip() == digest
                and all((d / o).exists() for o in outputs))

    def _finish(self, stage, digest, report):
        d = self._dir(stage)
        (d / "report.txt").write_text(report + "\n", encoding="utf-8")
        (d / "MANIFEST").write_text(digest + "\n")
        return StageOutcome(stage, False, report)

    def _skip(self, stage):
        report = (self.run_dir / stage / "report.txt")
        logger.info("stage %s up to date", stage)
        return StageOutcome(stage, True, report.read_text() if report.exists() else "")

    # -- stages --------------------------------------------------------

    def filter(self):
        cfg = self.config
        inputs = list(cfg.cdx_paths) + ([cfg.rules_path] if cfg.rules_path else [])
        digest = _manifest("filter", {}, inputs)
        outputs = ["extraction.tsv", "observations.tsv"]
        if self._up_to_date("filter", digest, outputs):
            return self._skip("filter")
        chain = cdxmod.load_rule_chain(cfg.rules_path) if cfg.rules_path else cdxmod.default_rule_chain()
        records, skipped = cdxmod.read_cdx_files(cfg.cdx_paths)
        kept, observations, report = cdxmod.apply_filters(records, chain)
        kept.sort(key=lambda r: (r.warc_file, r.offset, r.urlkey, r.timestamp))
        observations.sort(key=lambda o: (o.urlkey, o.timestamp, o.digest, o.original_uri))
        d = self._dir("filter")
        cdxmod.write_extraction_list(d / "extraction.tsv", kept)
        cdxmod.write_observation_log(d / "observations.tsv", observations)
        text = report.table() + "\n\n" + report.key_values() + "\nskipped_lines=%d" % len(skipped)
        return self._finish("filter", digest, text)

    def extract(self):
        cfg = self.config
        d = self._dir("extract")
        ext_list = self.run_dir / "filter" / "extraction.tsv"
        records = cdxmod.read_extraction_list(ext_list)
        inputs = [ext_list]
        if cfg.corpus_root is not None:
            inputs += sorted({Path(cfg.corpus_root) / r.warc_file for r in records
                              if (Path(cfg.corpus_root) / r.warc_file).is_file()})
        params = {"source": str(cfg.replay_url or "warc"), "workers": cfg.workers}
        digest = _manifest("extract", params, inputs)
        if self._up_to_date("extract", digest, ["links.tsv", "pages.txt"]):
            return self._skip("extract")

        # reuse links of content already extracted in an earlier run
        done_pages, old_links = set(), []
        if (d / "pages.txt").exists() and (d / "links.tsv").exists():
            done_pages = set((d / "pages.txt").read_text().split())
            old_links = read_link_records(d / "links.tsv")
        todo = [r for r in records if r.digest == "-" or r.digest not in done_pages]
        plan = plan_partitions(todo, cfg.workers)
        run = run_extraction(cfg.source(), plan)
        errors = [(p.index, e) for p in run.report.partitions for e in p.errors]
        if errors:
            raise StageError("extract", "missing WARC files: %s"
                             % ", ".join(sorted({e[1][0] for e in errors})))
        links = sorted(set(old_links) | set(run.link_records()))
        pages = sorted(done_pages | {c for b in run.batches for c in b.pages})
        write_link_batches(d / "links.tsv", [LinkBatch(-1, links, pages)])
        (d / "pages.txt").write_text("".join(c + "\n" for c in pages))
        failures = sum(len(p.failures) for p in run.report.partitions)
        text = run.report.key_values() + "\nreused_pages=%d\nfailures=%d" % (
            len(done_pages), failures)
        return self._finish("extract", digest, text)

    def load(self):
        cfg = self.config
        links = self.run_dir / "extract" / "links.tsv"
        pages = self.run_dir / "extract" / "pages.txt"
        observations = self.run_dir / "filter" / "observations.tsv"
        digest = _manifest("load", {"store": str(cfg.store_path)}, [links, pages, observations])
        if self._up_to_date("load", digest, ["export.tsv"]) and Path(cfg.store_path).exists():
            return self._skip("load")
        with GraphStore(cfg.store_path) as store:
            store.add_link_records(read_link_records(links), pages.read_text().split())
            store.add_observations(cdxmod.read_observation_log(observations))
            result = store.materialize_inlinks()
            n = store.export_quads(self._dir("load") / "export.tsv")
            stats = store.stats()
        text = "\n".join(["%s=%d" % kv for kv in sorted(stats.items())]
                         + ["inlinks_written=%d" % result.written,
                            "dangling_checksums=%d" % len(result.dangling),
                            "exported_quads=%d" % n])
        return self._finish("load", digest, text)

    STAGES = ("filter", "extract", "load")

    def run(self, stages=STAGES) -> PipelineResult:
        result = PipelineResult(0)
        for stage in stages:
            try:
                outcome = getattr(self, stage)()
            except StageError as exc:
                logger.error("%s", exc)
                result.status, result.failed_stage = 2, stage
                break
            except Exception as exc:  # any stage crash halts the run, outputs stay on disk
                logger.exception("stage %s failed", stage)
                result.status, result.failed_stage = 2, stage
                result.stages.append(StageOutcome(stage, False, "failed: %s" % exc))
                break
            result.stages.append(outcome)
        return result


def run_pipeline(config: PipelineConfig, stages=Pipeline.STAGES) -> PipelineResult:
    return Pipeline(config).run(stages)
