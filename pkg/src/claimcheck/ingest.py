"""Corpus loading: scan application directories, filter file formats,
expand archives, parse declared form data and map files to document slots."""

from __future__ import annotations

import xml.etree.ElementTree as ET
import zipfile
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from .normalize import FormData, parse_declared

SUPPORTED_EXTENSIONS = {".pdf": "pdf", ".zip": "zip", ".jpg": "jpg", ".jpeg": "jpg", ".png": "png"}
DEFAULT_MAX_FILE_MB = 25

# Sidecar fixture files and the form itself are bundle metadata, not
# user documents; they are excluded from the document/unsupported split.
FORM_FILENAME = "form.xml"
SIDECAR_SUFFIX = ".fields.json"

# Intervention catalog. The identifiers mirror the production cost
# accounting rows; the program's category overview counts solar/water
# sub-typologies differently, and that discrepancy is deliberately left
# visible here rather than silently reconciled.
VALID_TYPOLOGIES = (
    "1",
    "2.1.1", "2.1.2", "2.2.1", "2.2.2",
    "3.1", "3.2", "3.3",
    "4",
    "5.1", "5.2",
)

TYPOLOGY_NAMES = {
    1: "window_replacement",
    2: "thermal_insulation",
    3: "heating_and_cooling",
    4: "solar_panels",
    5: "water_efficiency",
}


class FileKind(str, Enum):
    PDF = "pdf"
    ZIP = "zip"
    JPG = "jpg"
    PNG = "png"


class DocumentSlot(str, Enum):
    INVOICE = "invoice"
    RECEIPT = "receipt"
    PROPERTY_REGISTRY = "property_registry"
    PRIOR_COMMUNICATION = "prior_communication"
    ENERGY_CERTIFICATE = "energy_certificate"
    EQUIPMENT_DATASHEET = "equipment_datasheet"
    PHOTO = "photo"
    OTHER = "other"


# Designated upload directories take precedence; filename keywords are
# the fallback for users who dumped everything at the top level.
_SLOT_DIRECTORIES = {
    "invoice": DocumentSlot.INVOICE,
    "fatura": DocumentSlot.INVOICE,
    "receipt": DocumentSlot.RECEIPT,
    "recibo": DocumentSlot.RECEIPT,
    "property_registry": DocumentSlot.PROPERTY_REGISTRY,
    "cpu": DocumentSlot.PROPERTY_REGISTRY,
    "certidao": DocumentSlot.PROPERTY_REGISTRY,
    "prior_communication": DocumentSlot.PRIOR_COMMUNICATION,
    "mcp": DocumentSlot.PRIOR_COMMUNICATION,
    "energy_certificate": DocumentSlot.ENERGY_CERTIFICATE,
    "certificado": DocumentSlot.ENERGY_CERTIFICATE,
    "equipment_datasheet": DocumentSlot.EQUIPMENT_DATASHEET,
    "datasheet": DocumentSlot.EQUIPMENT_DATASHEET,
    "photo": DocumentSlot.PHOTO,
    "fotos": DocumentSlot.PHOTO,
}

_FILENAME_KEYWORDS = (
    ("fatura", DocumentSlot.INVOICE),
    ("invoice", DocumentSlot.INVOICE),
    ("recibo", DocumentSlot.RECEIPT),
    ("receipt", DocumentSlot.RECEIPT),
    ("certidao", DocumentSlot.PROPERTY_REGISTRY),
    ("cpu", DocumentSlot.PROPERTY_REGISTRY),
    ("registo", DocumentSlot.PROPERTY_REGISTRY),
    ("mcp", DocumentSlot.PRIOR_COMMUNICATION),
    ("dgeg", DocumentSlot.PRIOR_COMMUNICATION),
    ("comunicacao", DocumentSlot.PRIOR_COMMUNICATION),
    ("certificado_energetico", DocumentSlot.ENERGY_CERTIFICATE),
    ("certificado", DocumentSlot.ENERGY_CERTIFICATE),
    ("datasheet", DocumentSlot.EQUIPMENT_DATASHEET),
    ("ficha_tecnica", DocumentSlot.EQUIPMENT_DATASHEET),
    ("foto", DocumentSlot.PHOTO),
    ("photo", DocumentSlot.PHOTO),
)


@dataclass(frozen=True)
class TypologyId:
    """Intervention category, e.g. 2.1.1 -> major=2, sub_path=(1, 1)."""

    major: int
    sub_path: tuple[int, ...] = ()

    def __str__(self) -> str:
        return ".".join(str(p) for p in (self.major, *self.sub_path))

    @classmethod
    def parse(cls, text: str) -> "TypologyId":
        parts = text.strip().split(".")
        try:
            numbers = [int(p) for p in parts]
        except ValueError:
            raise ValueError(f"malformed typology id: {text!r}") from None
        tid = cls(numbers[0], tuple(numbers[1:]))
        if str(tid) not in VALID_TYPOLOGIES:
            raise ValueError(
                f"unknown typology {text!r}; valid ids: {', '.join(VALID_TYPOLOGIES)}"
            )
        return tid


@dataclass(frozen=True)
class UnsupportedNotice:
    path: str
    reason: str  # unsupported_extension | corrupt_archive | archive_depth_exceeded | oversize
    message: str
    slot: DocumentSlot = DocumentSlot.OTHER


@dataclass(frozen=True)
class DocumentRef:
    path: Path
    kind: FileKind
    slot: DocumentSlot = DocumentSlot.OTHER
    origin: str = "direct_upload"
    archive_parent: str | None = None

    @property
    def display_path(self) -> str:
        if self.archive_parent:
            return f"{self.archive_parent}!{self.path.name}"
        return str(self.path)


@dataclass
class ApplicationBundle:
    app_id: str
    typology: TypologyId
    form: FormData
    documents: list[DocumentRef] = field(default_factory=list)
    unsupported: list[UnsupportedNotice] = field(default_factory=list)
    root: Path | None = None


@dataclass(frozen=True)
class LoadFailure:
    app_id: str
    path: str
    reason: str


@dataclass
class ScanResult:
    bundles: list[ApplicationBundle]
    failures: list[LoadFailure]


class FormParseError(ValueError):
    pass


# Fields every application must declare; presence only, validity is the
# rule engine's concern.
COMMON_MANDATORY_FIELDS = (
    "applicant_name",
    "applicant_tax_id",
    "company_tax_id",
    "property_address",
    "property_type",
    "property_article",
    "building_use",
    "gross_area",
    "habitation_license_year",
    "submission_date",
    "invoice_number",
    "invoice_value",
    "intervention_type",
)

TYPOLOGY_MANDATORY_FIELDS = {
    1: ("windows_details", "declared_unit_count"),
    2: ("declared_unit_count",),
    3: ("declared_unit_count", "declared_equipment_power"),
    4: (
        "energy_source",
        "declared_peak_power",
        "declared_inverter_power",
        "declared_battery_power",
        "declared_panel_count",
        "declared_battery_count",
    ),
    5: ("declared_unit_count",),
}


def mandatory_fields(typology: TypologyId) -> tuple[str, ...]:
    return COMMON_MANDATORY_FIELDS + TYPOLOGY_MANDATORY_FIELDS.get(typology.major, ())


def classify_file(path: Path | str) -> FileKind | UnsupportedNotice:
    """Extension-based, case-insensitive classification; no content sniffing."""
    p = Path(path)
    kind = SUPPORTED_EXTENSIONS.get(p.suffix.lower())
    if kind is None:
        return UnsupportedNotice(
            path=str(p),
            reason="unsupported_extension",
            message=f"unsupported file type {p.suffix!r}: {p.name} requires manual review",
            slot=infer_slot(p),
        )
    return FileKind(kind)


def infer_slot(path: Path, app_root: Path | None = None) -> DocumentSlot:
    """Slot from upload directory first, then filename keywords, else other."""
    if app_root is not None:
        try:
            rel = path.relative_to(app_root)
        except ValueError:
            rel = Path(path.name)
        for part in rel.parts[:-1]:
            slot = _SLOT_DIRECTORIES.get(part.lower())
            if slot is not None:
                return slot
    name = path.name.lower()
    for keyword, slot in _FILENAME_KEYWORDS:
        if keyword in name:
            return slot
    return DocumentSlot.OTHER


def parse_form_xml(data: bytes) -> tuple[str, TypologyId, FormData]:
    """Parse form.xml into (app_id, typology, declared fields).

    Duplicate field ids and malformed XML are load failures; malformed
    individual values are kept as text with a warning.
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise FormParseError(f"malformed XML: {exc}") from None
    if root.tag != "application":
        raise FormParseError(f"unexpected root element {root.tag!r}")
    app_id = (root.get("id") or "").strip()
    if not app_id:
        raise FormParseError("missing application id attribute")
    try:
        typology = TypologyId.parse(root.get("typology") or "")
    except ValueError as exc:
        raise FormParseError(str(exc)) from None

    form = FormData()
    declared = root.find("declared")
    if declared is not None:
        for element in declared:
            field_id = element.tag
            if field_id in form.declared:
                raise FormParseError(f"duplicate declared field {field_id!r}")
            declared_type = element.get("type", "text")
            raw = element.text or ""
            form.declared[field_id] = parse_declared(field_id, declared_type, raw)

    missing = [f for f in mandatory_fields(typology) if f not in form.declared]
    if missing:
        raise FormParseError(f"missing mandatory fields: {', '.join(sorted(missing))}")
    return app_id, typology, form


def _oversize_notice(path: Path, size: int, cap_bytes: int, slot: DocumentSlot) -> UnsupportedNotice:
    return UnsupportedNotice(
        path=str(path),
        reason="oversize",
        message=f"{path.name} is {size / 1e6:.1f} MB, above the {cap_bytes / 1e6:.0f} MB cap",
        slot=slot,
    )


def scan_application(app_dir: Path, max_file_mb: float = DEFAULT_MAX_FILE_MB,
                     extra_extensions: dict[str, str] | None = None) -> ApplicationBundle:
    """Build one bundle from an application directory. Raises FormParseError."""
    form_path = app_dir / FORM_FILENAME
    if not form_path.is_file():
        raise FormParseError(f"{FORM_FILENAME} not found")
    app_id, typology, form = parse_form_xml(form_path.read_bytes())

    cap_bytes = int(max_file_mb * 1_000_000)
    extensions = dict(SUPPORTED_EXTENSIONS)
    if extra_extensions:
        extensions.update(extra_extensions)

    documents: list[DocumentRef] = []
    unsupported: list[UnsupportedNotice] = []
    for path in sorted(p for p in app_dir.rglob("*") if p.is_file()):
        if path == form_path or path.name.endswith(SIDECAR_SUFFIX):
            continue
        slot = infer_slot(path, app_dir)
        kind_name = extensions.get(path.suffix.lower())
        if kind_name is None:
            unsupported.append(UnsupportedNotice(
                path=str(path),
                reason="unsupported_extension",
                message=f"unsupported file type {path.suffix!r}: {path.name} requires manual review",
                slot=slot,
            ))
            continue
        if path.stat().st_size > cap_bytes:
            unsupported.append(_oversize_notice(path, path.stat().st_size, cap_bytes, slot))
            continue
        documents.append(DocumentRef(path=path, kind=FileKind(kind_name), slot=slot))
    return ApplicationBundle(app_id=app_id, typology=typology, form=form,
                             documents=documents, unsupported=unsupported, root=app_dir)


def scan_corpus(root: Path, max_file_mb: float = DEFAULT_MAX_FILE_MB,
                extra_extensions: dict[str, str] | None = None) -> ScanResult:
    """One bundle per application subdirectory, ordered by app id.

    A broken application is recorded as a LoadFailure and the scan moves
    on; only an unreadable corpus root is an error.
    """
    root = Path(root)
    if not root.is_dir():
        raise NotADirectoryError(f"corpus root not found: {root}")
    bundles: list[ApplicationBundle] = []
    failures: list[LoadFailure] = []
    for app_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        try:
            bundles.append(scan_application(app_dir, max_file_mb, extra_extensions))
        except FormParseError as exc:
            failures.append(LoadFailure(app_id=app_dir.name, path=str(app_dir), reason=str(exc)))
    bundles.sort(key=lambda b: b.app_id)
    return ScanResult(bundles=bundles, failures=failures)


def expand_archives(bundle: ApplicationBundle, work_dir: Path,
                    max_file_mb: float = DEFAULT_MAX_FILE_MB) -> ApplicationBundle:
    """Replace ZIP refs with their members, extracted under work_dir.

    Nesting is limited to one level: a ZIP inside a ZIP becomes an
    archive_depth_exceeded notice. Idempotent on archive-free bundles.
    """
    if not any(d.kind is FileKind.ZIP for d in bundle.documents):
        return bundle

    cap_bytes = int(max_file_mb * 1_000_000)
    documents: list[DocumentRef] = []
    unsupported = list(bundle.unsupported)
    for doc in bundle.documents:
        if doc.kind is not FileKind.ZIP:
            documents.append(doc)
            continue
        target = Path(work_dir) / bundle.app_id / doc.path.stem
        try:
            with zipfile.ZipFile(doc.path) as archive:
                members = [m for m in archive.infolist() if not m.is_dir()]
                target.mkdir(parents=True, exist_ok=True)
                for member in members:
                    member_name = Path(member.filename).name
                    display = f"{doc.path}!{member.filename}"
                    if not member_name or member_name.startswith("."):
                        continue
                    suffix = Path(member_name).suffix.lower()
                    slot = infer_slot(Path(member_name))
                    if suffix == ".zip":
                        unsupported.append(UnsupportedNotice(
                            path=display, reason="archive_depth_exceeded",
                            message=f"nested archive {member.filename} not expanded; review manually",
                            slot=slot))
                        continue
                    if member_name.endswith(SIDECAR_SUFFIX):
                        (target / member_name).write_bytes(archive.read(member))
                        continue
                    kind_name = SUPPORTED_EXTENSIONS.get(suffix)
                    if kind_name is None:
                        unsupported.append(UnsupportedNotice(
                            path=display, reason="unsupported_extension",
                            message=f"unsupported file type {suffix!r} inside {doc.path.name}",
                            slot=slot))
                        continue
                    if member.file_size > cap_bytes:
                        unsupported.append(UnsupportedNotice(
                            path=display, reason="oversize",
                            message=f"{member.filename} exceeds the size cap", slot=slot))
                        continue
                    out_path = target / member_name
                    out_path.write_bytes(archive.read(member))
                    documents.append(DocumentRef(
                        path=out_path, kind=FileKind(kind_name), slot=slot,
                        origin="archive_member", archive_parent=str(doc.path)))
        except zipfile.BadZipFile:
            unsupported.append(UnsupportedNotice(
                path=str(doc.path), reason="corrupt_archive",
                message=f"{doc.path.name} could not be opened as a ZIP archive",
                slot=doc.slot))
    bundle.documents = documents
    bundle.unsupported = unsupported
    return bundle


def map_documents(bundle: ApplicationBundle) -> ApplicationBundle:
    """Finalize slot assignment relative to the application root."""
    mapped = []
    for doc in bundle.documents:
        base = bundle.root if doc.origin == "direct_upload" else None
        mapped.append(replace(doc, slot=infer_slot(doc.path, base)))
    bundle.documents = mapped
    return bundle


def load_bundle(app_dir: Path, work_dir: Path, max_file_mb: float = DEFAULT_MAX_FILE_MB,
                extra_extensions: dict[str, str] | None = None) -> ApplicationBundle:
    """scan -> expand archives -> map slots for a single application."""
    bundle = scan_application(app_dir, max_file_mb, extra_extensions)
    bundle = expand_archives(bundle, work_dir, max_file_mb)
    return map_documents(bundle)
