"""End-to-end batch run: ingest -> extract -> rules -> reports.

Applications are processed in parallel but every output is written from
exactly one worker, and aggregation happens in app-id order, so a run is
byte-reproducible regardless of thread scheduling.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from urllib.parse import urlparse

from .backends import MockBackend, RemoteBackend, RemoteConfig
from .catalog import Catalog, load_catalog_file
from .extract import ExtractedDocument, extract, schema_for
from .ingest import (
    ApplicationBundle,
    LoadFailure,
    ScanResult,
    expand_archives,
    map_documents,
    scan_corpus,
)
from .metrics import AppRecord, aggregate_metrics, cost_time_summary
from .report import ReportDocument, canonical_json_bytes, render_html, render_json, report_dict
from .rules import EngineSettings, ReportKind, evaluate_application

logger = logging.getLogger("claimcheck")


def log_event(event: str, **fields) -> None:
    logger.info(json.dumps({"event": event, **fields}, sort_keys=True, default=str))


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    corpus_root: Path
    out_dir: Path
    backend: str = "mock"  # mock | remote
    endpoint: str | None = None
    api_key_env: str = "CLAIMCHECK_API_KEY"
    catalog_path: Path | None = None
    parallelism: int = 4
    extract_parallelism: int = 8
    fuzzy_threshold: float = 0.85
    amount_tolerance_cents: int = 0
    max_file_mb: float = 25.0
    allow_ext: dict[str, str] = field(default_factory=dict)
    timeout_s: float = 30.0
    retries: int = 3
    seed: int | None = None

    def validate(self) -> None:
        if self.backend not in ("mock", "remote"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.backend == "remote":
            if not self.endpoint:
                raise ConfigError("remote backend requires --endpoint")
            parsed = urlparse(self.endpoint)
            if parsed.scheme not in ("http", "https") or not parsed.netloc:
                raise ConfigError(f"malformed endpoint URL: {self.endpoint!r}")
        if self.parallelism < 1 or self.extract_parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if not (0.0 <= self.fuzzy_threshold <= 1.0):
            raise ConfigError("fuzzy threshold must be in [0, 1]")

    def public_dict(self) -> dict:
        data = asdict(self)
        data["corpus_root"] = str(self.corpus_root)
        data["out_dir"] = str(self.out_dir)
        data["catalog_path"] = str(self.catalog_path) if self.catalog_path else None
        return data


class _ThrottledBackend:
    """Caps in-flight extraction calls across all app workers."""

    def __init__(self, inner, limit: int):
        self._inner = inner
        self._semaphore = threading.Semaphore(limit)
        self.backend_id = inner.backend_id

    def fetch(self, doc, schema):
        with self._semaphore:
            return self._inner.fetch(doc, schema)


def make_backend(config: RunConfig):
    if config.backend == "mock":
        inner = MockBackend()
    else:
        inner = RemoteBackend(RemoteConfig(
            endpoint=config.endpoint,
            api_key=os.environ.get(config.api_key_env),
            timeout_s=config.timeout_s,
            retries=config.retries,
        ))
    return _ThrottledBackend(inner, config.extract_parallelism)


@dataclass
class VerifyResult:
    exit_code: int
    records: list[AppRecord]
    scan: ScanResult
    manifest: dict


def _process_application(bundle: ApplicationBundle, catalog: Catalog, backend,
                         settings: EngineSettings, out_dir: Path) -> AppRecord:
    extracted: list[ExtractedDocument] = []
    for ref in bundle.documents:
        schema = schema_for(ref.slot, bundle.typology)
        extracted.append(extract(ref, schema, backend))

    outcomes_by_kind = evaluate_application(bundle, extracted, catalog.checks, settings)

    app_out = out_dir / bundle.app_id
    app_out.mkdir(parents=True, exist_ok=True)
    all_outcome_dicts: list[dict] = []
    for kind in ReportKind:
        report = ReportDocument(
            app_id=bundle.app_id,
            kind=kind,
            outcomes=outcomes_by_kind[kind],
            unsupported_notices=bundle.unsupported,
            catalog_version=catalog.version,
        )
        (app_out / f"{kind.value}.json").write_bytes(render_json(report))
        (app_out / f"{kind.value}.html").write_bytes(render_html(report))
        all_outcome_dicts.extend(report_dict(report)["outcomes"])

    metas = [
        {"path": doc.doc.display_path, "slot": doc.doc.slot.value,
         "cost_eur": doc.meta.cost_eur, "elapsed_ms": doc.meta.elapsed_ms}
        for doc in extracted
    ]
    extraction_payload = {
        "app_id": bundle.app_id,
        "typology": str(bundle.typology),
        "docs": metas,
    }
    (app_out / "extraction.json").write_bytes(canonical_json_bytes(extraction_payload))

    record = AppRecord(app_id=bundle.app_id, typology=str(bundle.typology),
                       outcomes=all_outcome_dicts, metas=metas)
    manual = sum(1 for o in all_outcome_dicts if o["status"] == "manual_check")
    log_event("app_processed", app_id=bundle.app_id, checks=len(all_outcome_dicts),
              manual_checks=manual, unsupported_files=len(bundle.unsupported))
    return record


def _relpath(path: str, root: Path) -> str:
    try:
        return str(Path(path).resolve().relative_to(root.resolve()))
    except ValueError:
        return path


def build_manifest(config: RunConfig, catalog: Catalog, scan: ScanResult,
                   records: list[AppRecord]) -> dict:
    """Run manifest: config, catalog version, counts, and every corpus
    file in exactly one of processed/unsupported/failed."""
    root = Path(config.corpus_root)
    failed_dirs = {Path(f.path).resolve() for f in scan.failures if f.path}
    unsupported_paths = set()
    for bundle in scan.bundles:
        for notice in bundle.unsupported:
            unsupported_paths.add(notice.path)

    files = {"processed": [], "unsupported": [], "failed": []}
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        rel = _relpath(str(path), root)
        if any(parent in failed_dirs for parent in path.resolve().parents):
            files["failed"].append(rel)
        elif str(path) in unsupported_paths:
            files["unsupported"].append(rel)
        else:
            files["processed"].append(rel)
    # archive members only exist virtually; account for their notices too
    member_notices = sorted(p for p in unsupported_paths if "!" in p)
    files["unsupported"].extend(_relpath(p, root) for p in member_notices)

    status_counts: dict[str, int] = {}
    for record in records:
        for outcome in record.outcomes:
            status_counts[outcome["status"]] = status_counts.get(outcome["status"], 0) + 1

    return {
        "config": config.public_dict(),
        "catalog_version": catalog.version,
        "counts": {
            "applications_processed": len(records),
            "applications_failed": len(scan.failures),
            "documents": sum(len(r.metas) for r in records),
            "unsupported_notices": sum(len(b.unsupported) for b in scan.bundles),
            "checks_by_status": dict(sorted(status_counts.items())),
        },
        "failures": [
            {"app_id": f.app_id, "path": _relpath(f.path, root), "reason": f.reason}
            for f in scan.failures
        ],
        "files": files,
    }


def verify_corpus(config: RunConfig) -> VerifyResult:
    config.validate()
    catalog = load_catalog_file(config.catalog_path)
    settings = EngineSettings(fuzzy_threshold=config.fuzzy_threshold,
                              amount_tolerance_cents=config.amount_tolerance_cents)
    backend = make_backend(config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    work_dir = out_dir / "_archives"

    scan = scan_corpus(Path(config.corpus_root), config.max_file_mb, config.allow_ext or None)
    for failure in scan.failures:
        log_event("app_load_failed", app_id=failure.app_id, reason=failure.reason)

    bundles = []
    for bundle in scan.bundles:
        bundle = expand_archives(bundle, work_dir, config.max_file_mb)
        bundles.append(map_documents(bundle))

    def worker(bundle: ApplicationBundle) -> AppRecord | LoadFailure:
        # one crashing application must never abort the batch
        try:
            return _process_application(bundle, catalog, backend, settings, out_dir)
        except Exception as exc:  # noqa: BLE001
            log_event("app_processing_failed", app_id=bundle.app_id, error=str(exc))
            return LoadFailure(app_id=bundle.app_id, path=str(bundle.root or ""),
                               reason=f"processing failed: {exc}")

    if config.parallelism > 1 and len(bundles) > 1:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            results = list(pool.map(worker, bundles))
    else:
        results = [worker(b) for b in bundles]
    records = sorted((r for r in results if isinstance(r, AppRecord)),
                     key=lambda r: r.app_id)
    scan.failures.extend(r for r in results if isinstance(r, LoadFailure))

    summary = aggregate_metrics(records)
    (out_dir / "metrics.json").write_bytes(canonical_json_bytes(summary))
    (out_dir / "cost_time.csv").write_text(cost_time_summary(records).to_csv(), encoding="utf-8")

    manifest = build_manifest(config, catalog, scan, records)
    (out_dir / "manifest.json").write_bytes(canonical_json_bytes(manifest))

    exit_code = 2 if scan.failures else 0
    log_event("run_complete", applications=len(records), failures=len(scan.failures),
              exit_code=exit_code)
    return VerifyResult(exit_code=exit_code, records=records, scan=scan, manifest=manifest)


class MetricsError(ValueError):
    pass


def load_records_from_outputs(out_dir: Path) -> list[AppRecord]:
    """Rebuild per-application records from a previous verify run."""
    out_dir = Path(out_dir)
    if not out_dir.is_dir():
        raise MetricsError(f"outputs directory not found: {out_dir}")
    records: list[AppRecord] = []
    for app_dir in sorted(p for p in out_dir.iterdir() if p.is_dir()):
        extraction_path = app_dir / "extraction.json"
        if not extraction_path.is_file():
            continue
        extraction = json.loads(extraction_path.read_text(encoding="utf-8"))
        outcomes: list[dict] = []
        for kind in ReportKind:
            report_path = app_dir / f"{kind.value}.json"
            if report_path.is_file():
                outcomes.extend(json.loads(report_path.read_text(encoding="utf-8"))["outcomes"])
        records.append(AppRecord(
            app_id=extraction["app_id"],
            typology=extraction["typology"],
            outcomes=outcomes,
            metas=extraction["docs"],
        ))
    if not records:
        raise MetricsError(f"no verify outputs under {out_dir}")
    return records


def compute_metrics(out_dir: Path, labels: dict | None = None) -> dict:
    records = load_records_from_outputs(out_dir)
    summary = aggregate_metrics(records, labels)
    out_dir = Path(out_dir)
    (out_dir / "metrics.json").write_bytes(canonical_json_bytes(summary))
    (out_dir / "cost_time.csv").write_text(cost_time_summary(records).to_csv(), encoding="utf-8")
    return summary
