"""Extraction backends: a deterministic fixture mock and a remote HTTP client.

Both speak the same wire shape: a flat tag->string map plus cost/latency
metadata. Fixtures live in ``<docfile>.fields.json`` sidecars; a sidecar
may carry ``__meta__`` (cost_eur, elapsed_ms) and ``__faults__`` entries
for error-taxonomy testing.
"""

from __future__ import annotations

import base64
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import requests

from .extract import ExtractionSchema, NONE_SENTINEL
from .ingest import DocumentRef

SIDECAR_SUFFIX = ".fields.json"
# Generated document files start with this marker followed by their
# corpus-relative path, so a stub server can resolve the right sidecar
# from posted bytes alone.
DOC_MARKER = b"%CLAIMDOC%"


class BackendError(RuntimeError):
    """Extraction backend failed after retries."""


@dataclass(frozen=True)
class BackendResponse:
    fields: dict[str, str]
    cost_eur: float = 0.0
    elapsed_ms: int = 0


def _corrupt_digit(value: str) -> str:
    """Deterministically alter one digit (or append a marker) of a value."""
    for i, ch in enumerate(value):
        if ch.isdigit():
            return value[:i] + str((int(ch) + 1) % 10) + value[i + 1:]
    return value + "X"


def interpret_sidecar(sidecar: dict, schema: ExtractionSchema) -> BackendResponse:
    """Resolve a sidecar dict to a response, applying any fault entries.

    Fault modes: ``drop`` removes a tag from the response, ``corrupt``
    alters one digit of its value, ``fail`` aborts the whole call.
    """
    fields: dict[str, str] = {}
    for name in schema.tag_names():
        raw = sidecar.get(name)
        fields[name] = NONE_SENTINEL if raw is None else str(raw)
    for fault in sidecar.get("__faults__", []):
        mode = fault.get("mode")
        tag = fault.get("tag")
        if mode == "fail":
            raise BackendError("injected backend failure")
        if tag not in fields:
            continue
        if mode == "drop":
            del fields[tag]
        elif mode == "corrupt":
            fields[tag] = _corrupt_digit(fields[tag])
    meta = sidecar.get("__meta__", {})
    return BackendResponse(
        fields=fields,
        cost_eur=float(meta.get("cost_eur", 0.0)),
        elapsed_ms=int(meta.get("elapsed_ms", 0)),
    )


def load_sidecar(doc_path: Path) -> dict:
    sidecar_path = Path(str(doc_path) + SIDECAR_SUFFIX)
    if not sidecar_path.is_file():
        return {}
    try:
        return json.loads(sidecar_path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise BackendError(f"fixture sidecar unreadable: {exc}") from exc


class MockBackend:
    """Answers from fixture sidecars next to each document file.

    ``store`` bypasses the filesystem: a mapping from document path (str)
    to sidecar dicts, used by in-memory corpus tests.
    """

    backend_id = "mock"

    def __init__(self, store: dict[str, dict] | None = None,
                 loader: Callable[[Path], dict] | None = None):
        self._store = store
        self._loader = loader or load_sidecar

    def fetch(self, doc: DocumentRef, schema: ExtractionSchema) -> BackendResponse:
        if self._store is not None:
            sidecar = self._store.get(str(doc.path), {})
        else:
            sidecar = self._loader(doc.path)
        return interpret_sidecar(sidecar, schema)


@dataclass
class RemoteConfig:
    endpoint: str
    api_key: str | None = None
    timeout_s: float = 30.0
    retries: int = 3
    backoff_s: float = 0.5


class RemoteBackend:
    """POSTs document bytes plus the schema to an extraction endpoint.

    Wire contract: request {doc_kind, schema: [{name, type, variants?}],
    content_b64}; response {fields: {tag: str}, cost_eur, elapsed_ms}
    with absent tags carrying the literal "None".
    """

    backend_id = "remote"

    def __init__(self, config: RemoteConfig, session: requests.Session | None = None):
        self.config = config
        self._session = session or requests.Session()

    def fetch(self, doc: DocumentRef, schema: ExtractionSchema) -> BackendResponse:
        payload = {
            "doc_kind": doc.kind.value,
            "schema": [
                {"name": t.name, "type": t.value_type.value,
                 **({"variants": list(t.variants)} if t.variants else {})}
                for t in schema.tags
            ],
            "content_b64": base64.b64encode(doc.path.read_bytes()).decode("ascii"),
        }
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"

        last_error: Exception | None = None
        url = self.config.endpoint.rstrip("/") + "/extract"
        for attempt in range(self.config.retries):
            if attempt:
                time.sleep(self.config.backoff_s * (2 ** (attempt - 1)))
            try:
                resp = self._session.post(url, json=payload, headers=headers,
                                          timeout=self.config.timeout_s)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code >= 500:
                last_error = RuntimeError(f"server error {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise BackendError(f"extraction endpoint returned {resp.status_code}")
            try:
                body = resp.json()
                fields = {str(k): str(v) for k, v in body["fields"].items()}
                return BackendResponse(
                    fields=fields,
                    cost_eur=float(body.get("cost_eur", 0.0)),
                    elapsed_ms=int(body.get("elapsed_ms", 0)),
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise BackendError(f"malformed extraction response: {exc}") from exc
        raise BackendError(f"extraction failed after {self.config.retries} attempts: {last_error}")
