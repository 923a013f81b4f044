import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from claimcheck.backends import (
    BackendError,
    MockBackend,
    RemoteBackend,
    RemoteConfig,
    interpret_sidecar,
)
from claimcheck.extract import (
    ExtractedValue,
    ValueState,
    classify_mcp,
    extract,
    schema_for,
)
from claimcheck.gencorpus import doc_bytes
from claimcheck.ingest import DocumentRef, DocumentSlot, FileKind, TypologyId
from claimcheck.normalize import Money
from claimcheck.stubserver import FixtureStubServer

T4 = TypologyId.parse("4")
T1 = TypologyId.parse("1")


def invoice_ref(tmp_path: Path, sidecar: dict | None = None) -> DocumentRef:
    doc = tmp_path / "fatura.pdf"
    doc.write_bytes(doc_bytes("app_x", "fatura.pdf"))
    if sidecar is not None:
        (tmp_path / "fatura.pdf.fields.json").write_text(json.dumps(sidecar))
    return DocumentRef(path=doc, kind=FileKind.PDF, slot=DocumentSlot.INVOICE)


class TestSchemaFor:
    def test_prior_communication_schema(self):
        schema = schema_for(DocumentSlot.PRIOR_COMMUNICATION, T4)
        assert len(schema.tags) == 9
        mcp_type = schema.tags[0]
        assert mcp_type.name == "mcp_type"
        assert mcp_type.variants == ("1", "2", "3", "4", "5")
        assert set(schema.tag_names()) >= {
            "NIF_NIPC_mcp", "address_mcp", "energy_source_mcp", "generator_power_mcp",
            "nominal_power_mcp", "date_start_mcp", "date_submission_mcp",
            "ID_energy_producer",
        }

    def test_photo_schema_empty(self):
        assert schema_for(DocumentSlot.PHOTO, T1).tags == ()

    def test_invoice_total_is_money(self):
        schema = schema_for(DocumentSlot.INVOICE, T1)
        by_name = {t.name: t for t in schema.tags}
        assert by_name["total_value"].value_type.value == "money"

    def test_deterministic(self):
        assert schema_for(DocumentSlot.RECEIPT, T1) == schema_for(DocumentSlot.RECEIPT, T4)


class TestExtract:
    def test_mock_round_trip(self, tmp_path):
        ref = invoice_ref(tmp_path, {"total_value": "150,00"})
        result = extract(ref, schema_for(DocumentSlot.INVOICE, T1), MockBackend())
        value = result.fields["total_value"]
        assert value.state is ValueState.PRESENT
        assert value.value == Money(15000)
        assert value.raw == "150,00"

    def test_none_sentinel_is_absent(self, tmp_path):
        ref = invoice_ref(tmp_path, {"total_value": "None"})
        result = extract(ref, schema_for(DocumentSlot.INVOICE, T1), MockBackend())
        assert result.fields["total_value"].state is ValueState.ABSENT

    def test_unparseable_date_is_type_mismatch(self, tmp_path):
        ref = invoice_ref(tmp_path, {"invoice_date": "soon"})
        result = extract(ref, schema_for(DocumentSlot.INVOICE, T1), MockBackend())
        value = result.fields["invoice_date"]
        assert value.state is ValueState.UNREADABLE
        assert value.reason == "type_mismatch"

    def test_missing_sidecar_all_absent(self, tmp_path):
        ref = invoice_ref(tmp_path, sidecar=None)
        result = extract(ref, schema_for(DocumentSlot.INVOICE, T1), MockBackend())
        assert all(v.state is ValueState.ABSENT for v in result.fields.values())

    def test_closed_world_keys(self, tmp_path):
        schema = schema_for(DocumentSlot.INVOICE, T1)
        ref = invoice_ref(tmp_path, {"total_value": "1,00", "unexpected_tag": "x"})
        result = extract(ref, schema, MockBackend())
        assert set(result.fields) == set(schema.tag_names())

    def test_meta_from_sidecar(self, tmp_path):
        ref = invoice_ref(tmp_path, {"__meta__": {"cost_eur": 0.02, "elapsed_ms": 1500}})
        result = extract(ref, schema_for(DocumentSlot.INVOICE, T1), MockBackend())
        assert result.meta.cost_eur == 0.02
        assert result.meta.elapsed_ms == 1500
        assert result.meta.backend_id == "mock"


class TestClassifyMcp:
    def mcp_doc(self, tmp_path, sidecar):
        doc = tmp_path / "mcp.pdf"
        doc.write_bytes(b"x")
        (tmp_path / "mcp.pdf.fields.json").write_text(json.dumps(sidecar))
        ref = DocumentRef(path=doc, kind=FileKind.PDF, slot=DocumentSlot.PRIOR_COMMUNICATION)
        return extract(ref, schema_for(DocumentSlot.PRIOR_COMMUNICATION, T4), MockBackend())

    def test_category_read(self, tmp_path):
        assert self.mcp_doc(tmp_path, {"mcp_type": "1"}).doc_class == "1"

    def test_absent_is_none(self, tmp_path):
        assert self.mcp_doc(tmp_path, {"mcp_type": "None"}).doc_class is None

    def test_out_of_range_category(self, tmp_path):
        extracted = self.mcp_doc(tmp_path, {"mcp_type": "7"})
        assert extracted.fields["mcp_type"].state is ValueState.UNREADABLE
        assert extracted.doc_class is None
        assert classify_mcp(extracted) is None


class TestFaultModes:
    def test_drop_tag(self, tmp_path):
        ref = invoice_ref(tmp_path, {
            "total_value": "150,00", "invoice_number": "FT 1",
            "__faults__": [{"mode": "drop", "tag": "total_value"}],
        })
        result = extract(ref, schema_for(DocumentSlot.INVOICE, T1), MockBackend())
        assert result.fields["total_value"].state is ValueState.ABSENT
        assert result.fields["invoice_number"].state is ValueState.PRESENT

    def test_corrupt_alters_one_digit(self, tmp_path):
        ref = invoice_ref(tmp_path, {
            "total_value": "150,00",
            "__faults__": [{"mode": "corrupt", "tag": "total_value"}],
        })
        result = extract(ref, schema_for(DocumentSlot.INVOICE, T1), MockBackend())
        value = result.fields["total_value"]
        assert value.state is ValueState.PRESENT
        assert value.value != Money(15000)

    def test_fail_marks_all_unreadable(self, tmp_path):
        ref = invoice_ref(tmp_path, {"__faults__": [{"mode": "fail"}]})
        result = extract(ref, schema_for(DocumentSlot.INVOICE, T1), MockBackend())
        assert all(v.state is ValueState.UNREADABLE for v in result.fields.values())
        assert all(v.reason == "backend_error" for v in result.fields.values())

    def test_fault_locality(self, tmp_path):
        base = {"total_value": "150,00", "invoice_number": "FT 1", "buyer_name": "Ana"}
        clean_ref = invoice_ref(tmp_path, base)
        schema = schema_for(DocumentSlot.INVOICE, T1)
        clean = extract(clean_ref, schema, MockBackend())
        faulty_dir = tmp_path / "faulty"
        faulty_dir.mkdir()
        faulty_ref = invoice_ref(faulty_dir, {
            **base, "__faults__": [{"mode": "corrupt", "tag": "total_value"}],
        })
        faulty = extract(faulty_ref, schema, MockBackend())
        for name in schema.tag_names():
            if name == "total_value":
                assert faulty.fields[name] != clean.fields[name]
            else:
                assert faulty.fields[name] == clean.fields[name]


class _FailingHandler(BaseHTTPRequestHandler):
    calls = 0

    def do_POST(self):
        type(self).calls += 1
        self.send_error(500)

    def log_message(self, *args):
        pass


class TestRemoteBackend:
    def test_stub_equivalent_to_mock(self, tmp_path):
        corpus = tmp_path / "corpus"
        (corpus / "app_x").mkdir(parents=True)
        doc = corpus / "app_x" / "fatura.pdf"
        doc.write_bytes(doc_bytes("app_x", "fatura.pdf"))
        sidecar = {"total_value": "150,00", "buyer_name": "Ana Maria",
                   "__meta__": {"cost_eur": 0.01, "elapsed_ms": 900}}
        (corpus / "app_x" / "fatura.pdf.fields.json").write_text(json.dumps(sidecar))
        ref = DocumentRef(path=doc, kind=FileKind.PDF, slot=DocumentSlot.INVOICE)
        schema = schema_for(DocumentSlot.INVOICE, T1)
        with FixtureStubServer(corpus) as server:
            remote = RemoteBackend(RemoteConfig(endpoint=server.url, backoff_s=0.01))
            via_stub = extract(ref, schema, remote)
        via_mock = extract(ref, schema, MockBackend())
        assert via_stub.fields == via_mock.fields
        assert via_stub.meta.cost_eur == via_mock.meta.cost_eur
        assert via_stub.meta.elapsed_ms == via_mock.meta.elapsed_ms

    def test_retry_exhaustion_on_500(self, tmp_path):
        _FailingHandler.calls = 0
        server = ThreadingHTTPServer(("127.0.0.1", 0), _FailingHandler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            url = f"http://127.0.0.1:{server.server_address[1]}"
            remote = RemoteBackend(RemoteConfig(endpoint=url, retries=3, backoff_s=0.01))
            ref = invoice_ref(tmp_path, {"total_value": "1,00"})
            result = extract(ref, schema_for(DocumentSlot.INVOICE, T1), remote)
            assert all(v.state is ValueState.UNREADABLE for v in result.fields.values())
            assert all(v.reason == "backend_error" for v in result.fields.values())
            assert _FailingHandler.calls == 3
        finally:
            server.shutdown()
            server.server_close()

    def test_missing_tag_in_response_is_absent(self):
        schema = schema_for(DocumentSlot.RECEIPT, T1)
        response = interpret_sidecar({"receipt_number": "RC 9"}, schema)
        assert response.fields["receipt_number"] == "RC 9"
        assert response.fields["amount"] == "None"

    def test_connection_error_raises_backend_error(self, tmp_path):
        remote = RemoteBackend(RemoteConfig(endpoint="http://127.0.0.1:9",
                                            retries=2, backoff_s=0.01, timeout_s=0.2))
        ref = invoice_ref(tmp_path, {})
        with pytest.raises(BackendError):
            remote.fetch(ref, schema_for(DocumentSlot.INVOICE, T1))


def test_extracted_value_constructors():
    present = ExtractedValue.present(Money(1), "0,01")
    assert present.state is ValueState.PRESENT
    assert ExtractedValue.absent().state is ValueState.ABSENT
    unreadable = ExtractedValue.unreadable("type_mismatch", "x")
    assert unreadable.reason == "type_mismatch"
